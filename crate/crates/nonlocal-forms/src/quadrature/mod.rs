//! Numerical integration engines.
//!
//! Building blocks: an adaptive Gauss–Kronrod panel integrator, geometric
//! shell decompositions for radial integrals with singular or unbounded
//! integrands ([`radial`]), and the singular double integral behind the
//! quadratic forms ([`double_form`]).

mod double_form;
pub(crate) mod radial;

pub use double_form::{double_form_integral, double_form_integral_mc, FormFunction};
pub use radial::{profile_integral_outside_ball, radial_integral, radial_integral_weighted};

use serde::Serialize;

/// Resolution controls shared by all integration routines.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureBudget {
    /// Target relative tolerance of returned values.
    pub rel_tol: f64,
    /// Cap on the total number of quadrature panels per top-level call.
    pub max_cells: usize,
    /// Geometric ratio of the shell decomposition (dyadic by default).
    pub annulus_base: f64,
    /// Hard truncation radius for integrals over `R^d` when decay metadata
    /// alone cannot settle the tail.
    pub tail_rmax: f64,
}

impl Default for QuadratureBudget {
    fn default() -> Self {
        QuadratureBudget {
            rel_tol: 1e-6,
            max_cells: 400_000,
            annulus_base: 2.0,
            tail_rmax: 1e9,
        }
    }
}

impl QuadratureBudget {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureBudget {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(crate::Error::Invalid("rel_tol must be positive".into()));
        }
        if self.max_cells < 1000 {
            return Err(crate::Error::Invalid("max_cells must be >= 1000".into()));
        }
        if !(self.annulus_base > 1.0) {
            return Err(crate::Error::Invalid("annulus_base must exceed 1".into()));
        }
        Ok(())
    }

    /// Derived budget for subordinate integrals inside a scan.
    pub fn scaled(&self, factor: f64) -> Self {
        QuadratureBudget {
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }
}

/// A quadratic-form or integral value with an a-posteriori error estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FormValue {
    pub value: f64,
    pub error_estimate: f64,
    /// Number of quadrature panels spent.
    pub budget_used: usize,
}

impl FormValue {
    pub fn zero() -> Self {
        FormValue {
            value: 0.0,
            error_estimate: 0.0,
            budget_used: 0,
        }
    }

    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error_estimate == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.error_estimate / self.value.abs()
        }
    }
}

/// Neumaier compensated accumulator; order-stable summation keeps scans
/// reproducible across worker counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK constants).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod 15/7 panel. Returns `(k15, |k15 - g7|)`.
pub(crate) fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let val = kron * half;
    let err = ((kron - gauss) * half).abs();
    (val, err)
}

struct Panel {
    err: f64,
    a: f64,
    b: f64,
    val: f64,
}

/// Adaptive GK15 on `[a, b]`, splitting the worst panel first.
///
/// `cells` counts panels across nested calls so callers can enforce
/// a global budget.
pub(crate) fn integrate_adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
    cells: &mut usize,
) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let (v0, e0) = gk15(f, a, b);
    *cells += 1;
    let mut panels = vec![Panel {
        err: e0,
        a,
        b,
        val: v0,
    }];
    let mut total_err: f64 = e0;
    let mut total_val: f64 = v0;
    while panels.len() < max_panels {
        let tol = abs_tol.max(rel_tol * total_val.abs());
        if total_err <= tol || total_err <= 1e-300 {
            break;
        }
        // split the worst panel
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .unwrap();
        let mid = 0.5 * (panels[idx].a + panels[idx].b);
        if mid <= panels[idx].a || mid >= panels[idx].b {
            // interval at floating-point resolution; keep as is
            break;
        }
        let p = panels.swap_remove(idx);
        total_err -= p.err;
        total_val -= p.val;
        for (lo, hi) in [(p.a, mid), (mid, p.b)] {
            let (v, e) = gk15(f, lo, hi);
            *cells += 1;
            total_err += e;
            total_val += v;
            panels.push(Panel {
                err: e,
                a: lo,
                b: hi,
                val: v,
            });
        }
    }
    if std::env::var("NLF_TRACE_ADAPT").is_ok() {
        eprintln!(
            "adapt [{a:.4e},{b:.4e}] panels={} err={total_err:.3e} val={total_val:.4e} tol(rel{rel_tol:.1e})",
            panels.len()
        );
    }
    let mut acc = Accumulator::default();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    for p in &panels {
        acc.add(p.val);
    }
    (acc.total(), total_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        // degree-13 polynomial is integrated exactly by G7, checked by K15
        let mut f = |x: f64| x.powi(13) + 2.0 * x.powi(4) + 1.0;
        let (v, e) = gk15(&mut f, 0.0, 1.0);
        assert!((v - (1.0 / 14.0 + 2.0 / 5.0 + 1.0)).abs() < 1e-14);
        assert!(e < 1e-12);
    }

    #[test]
    fn adaptive_sqrt_singularity() {
        let mut cells = 0;
        let mut f = |x: f64| x.sqrt().recip();
        let (v, e) = integrate_adaptive(&mut f, 1e-12, 1.0, 0.0, 1e-10, 2000, &mut cells);
        assert!((v - 2.0).abs() < 1e-5, "v = {v}, err est {e}");
    }

    #[test]
    fn accumulator_compensates() {
        let mut acc = Accumulator::default();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.total(), 10.0);
    }
}
