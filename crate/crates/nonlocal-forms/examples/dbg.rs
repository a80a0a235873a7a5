use nonlocal_forms::kernels::*;
use nonlocal_forms::quadrature::{radial_integral_weighted, QuadratureBudget};

fn main() {
    let alpha = 1.5;
    let params = ThornParams::new(0.5, Alpha::of(alpha).unwrap()).unwrap();
    let k = make_thorn_kernel(&params);
    let w = |z: &[f64]| -> f64 { z.iter().map(|v| v * v).sum() };
    let budget = QuadratureBudget::with_rel_tol(1e-9);
    let v = radial_integral_weighted(k.upper.as_ref(), Some(&w), 0.45, 0.5, &budget).unwrap();
    println!("value {:.6e} cells {}", v.value, v.budget_used);
}
