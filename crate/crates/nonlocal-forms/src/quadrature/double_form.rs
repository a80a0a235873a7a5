//! The singular double integral `∫_D ∫_D (u(y)-u(x))² k(x,y) dy dx`.
//!
//! The y-integral is decomposed into dyadic shells around x: the squared
//! difference vanishes quadratically on the diagonal, so the shell
//! contributions decay geometrically toward it and the un-integrated inner
//! disc is controlled by the function's Lipschitz bound. Pair symmetry
//! halves the work: only offsets in a fixed half-space are integrated and
//! the result is doubled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{circle_in_ball, dist, ArcSet, Ball};
use crate::kernels::KernelSpec;
use crate::profiles::Arcs;
use crate::{Error, Result};

use super::{integrate_adaptive, FormValue, QuadratureBudget};

/// A function that can be fed to the quadratic forms: pointwise values
/// plus a global Lipschitz bound (used to control the diagonal).
pub trait FormFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn lipschitz(&self) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> FormFunction for (F, f64) {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
    fn lipschitz(&self) -> f64 {
        self.1
    }
}

struct Tally {
    cells: std::cell::Cell<usize>,
    nonfinite: std::cell::Cell<bool>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cells: std::cell::Cell::new(0),
            nonfinite: std::cell::Cell::new(false),
        }
    }
    fn bump(&self, n: usize) {
        self.cells.set(self.cells.get() + n);
    }
}

/// Shells stop once a contribution falls below this fraction of the
/// running total times `rel_tol`; the geometric remainder goes into the
/// error estimate.
const SHELL_STOP: f64 = 0.02;
const MAX_SHELLS: usize = 500;

fn inner_1d(
    u: &dyn FormFunction,
    k: &KernelSpec,
    x: f64,
    hi0: f64,
    rel_tol: f64,
    tally: &Tally,
) -> f64 {
    // rightward pairs only; the caller doubles the final integral
    if hi0 <= 0.0 {
        return 0.0;
    }
    let ux = u.value(&[x]);
    let mut acc = 0.0;
    let mut hi = hi0;
    let mut seen_nonzero = false;
    let mut zero_run = 0usize;
    for _ in 0..MAX_SHELLS {
        let lo = hi * 0.5;
        let mut g = |s: f64| {
            let du = u.value(&[x + s]) - ux;
            let v = du * du * k.eval(&[x], &[x + s]);
            if !v.is_finite() {
                tally.nonfinite.set(true);
                return 0.0;
            }
            v
        };
        let mut cells = 0usize;
        let (v, _) = integrate_adaptive(&mut g, lo, hi, 0.0, rel_tol * 0.05, 64, &mut cells);
        tally.bump(cells);
        acc += v;
        // shells decay geometrically toward the diagonal; the remaining
        // contribution is below SHELL_STOP·rel_tol of the total and is
        // covered by the caller's error assembly
        if seen_nonzero && v.abs() <= SHELL_STOP * rel_tol * acc.abs() && acc != 0.0 {
            break;
        }
        if v == 0.0 {
            zero_run += 1;
            if zero_run > 6 {
                break;
            }
        } else {
            zero_run = 0;
            seen_nonzero = true;
        }
        hi = lo;
        if hi < 1e-300 {
            break;
        }
    }
    acc
}

fn inner_2d(
    u: &dyn FormFunction,
    k: &KernelSpec,
    x: &[f64; 2],
    dom: &Ball,
    rel_tol: f64,
    tally: &Tally,
) -> f64 {
    let ux = u.value(x);
    let rho_max = dist(x, &dom.center) + dom.radius;
    let mut acc = 0.0;
    let mut hi = rho_max;
    let mut seen_nonzero = false;
    let mut zero_run = 0usize;
    // fixed half-space of offsets: angles in [0, π)
    let upper = {
        let mut s = ArcSet::empty();
        s.insert(0.0, std::f64::consts::PI);
        s
    };
    for _ in 0..MAX_SHELLS {
        let lo = hi * 0.5;
        let mut density = |rho: f64| {
            let in_dom = circle_in_ball(x, rho, &dom.center, dom.radius);
            let mut arcs = in_dom.intersect(&upper);
            if let Arcs::Set(sec) = k.section(x, rho) {
                arcs = arcs.intersect(&sec);
            }
            if arcs.is_empty() {
                return 0.0;
            }
            let mut ang = 0.0;
            for &(a, b) in arcs.intervals() {
                let mut g = |phi: f64| {
                    let y = [x[0] + rho * phi.cos(), x[1] + rho * phi.sin()];
                    let du = u.value(&y) - ux;
                    let v = du * du * k.eval(x, &y);
                    if !v.is_finite() {
                        tally.nonfinite.set(true);
                        return 0.0;
                    }
                    v
                };
                let mut cc = 0usize;
                let (v, _) = integrate_adaptive(&mut g, a, b, 0.0, rel_tol * 0.1, 48, &mut cc);
                tally.bump(cc);
                ang += v;
            }
            rho * ang
        };
        let mut cells = 0usize;
        let (v, _) = integrate_adaptive(&mut density, lo, hi, 0.0, rel_tol * 0.05, 48, &mut cells);
        tally.bump(cells);
        acc += v;
        if seen_nonzero && v.abs() <= SHELL_STOP * rel_tol * acc.abs() && acc != 0.0 {
            break;
        }
        if v == 0.0 {
            zero_run += 1;
            if zero_run > 6 {
                break;
            }
        } else {
            zero_run = 0;
            seen_nonzero = true;
        }
        hi = lo;
        if hi < 1e-300 {
            break;
        }
    }
    acc
}

/// `∫_D ∫_D (u(y)-u(x))² k(x,y) dy dx` over a ball `D`.
///
/// Deterministic nested quadrature; the returned error estimate combines
/// the outer Gauss–Kronrod estimate with the slaved inner tolerances.
pub fn double_form_integral(
    u: &dyn FormFunction,
    k: &KernelSpec,
    dom: &Ball,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    budget.validate()?;
    if dom.dim() != k.d {
        return Err(Error::Invalid(format!(
            "domain dimension {} does not match kernel dimension {}",
            dom.dim(),
            k.d
        )));
    }
    let rel_tol = budget.rel_tol;
    let tally = Tally::new();
    let (value, outer_err) = match k.d {
        1 => {
            let c = dom.center[0];
            let r = dom.radius;
            let mut f = |x: f64| inner_1d(u, k, x, c + r - x, rel_tol, &tally);
            let mut cells = 0;
            let out = integrate_adaptive(
                &mut f,
                c - r,
                c + r,
                0.0,
                rel_tol * 0.25,
                512,
                &mut cells,
            );
            tally.bump(cells);
            out
        }
        2 => {
            let c = [dom.center[0], dom.center[1]];
            let r = dom.radius;
            let mut cells = 0;
            let mut radial = |t: f64| {
                let mut angular = |phi: f64| {
                    let x = [c[0] + t * phi.cos(), c[1] + t * phi.sin()];
                    inner_2d(u, k, &x, dom, rel_tol, &tally)
                };
                let mut cc = 0;
                let (v, _) = integrate_adaptive(
                    &mut angular,
                    0.0,
                    2.0 * std::f64::consts::PI,
                    0.0,
                    rel_tol * 0.2,
                    96,
                    &mut cc,
                );
                tally.bump(cc);
                t * v
            };
            let out = integrate_adaptive(&mut radial, 0.0, r, 0.0, rel_tol * 0.25, 128, &mut cells);
            tally.bump(cells);
            out
        }
        d => {
            return Err(Error::Unsupported(format!(
                "double form integral implemented for d <= 2, got {d}"
            )))
        }
    };
    if tally.nonfinite.get() {
        return Err(Error::NonFiniteKernel("double form integrand".into()));
    }
    let value = 2.0 * value; // pair symmetry
    Ok(FormValue {
        value,
        error_estimate: 2.0 * outer_err + rel_tol * value.abs(),
        budget_used: tally.cells.get(),
    })
}

/// Stratified Monte Carlo estimate of the same double integral (d = 2).
///
/// Strata are polar x-cells crossed with dyadic offset shells; indicator
/// kernels with cusped supports defeat smooth quadrature rules, while
/// stratification keeps their sampling variance bounded per shell. The
/// error estimate is the one-sigma sampling error plus a Lipschitz bound
/// for the un-sampled inner disc.
pub fn double_form_integral_mc(
    u: &dyn FormFunction,
    k: &KernelSpec,
    dom: &Ball,
    seed: u64,
    samples_per_stratum: usize,
) -> Result<FormValue> {
    if k.d != 2 || dom.dim() != 2 {
        return Err(Error::Unsupported(
            "Monte Carlo fallback implemented for d = 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = [dom.center[0], dom.center[1]];
    let r = dom.radius;
    let (nt, nphi, jshells) = (8usize, 16usize, 30usize);
    let rho_top = 2.0 * r;
    let mut total = 0.0;
    let mut var_total = 0.0;
    let mut evals = 0usize;
    for it in 0..nt {
        // equal-area radial cells: t ∈ [r√(i/n), r√((i+1)/n)]
        let t0 = r * ((it as f64) / nt as f64).sqrt();
        let t1 = r * ((it as f64 + 1.0) / nt as f64).sqrt();
        for ip in 0..nphi {
            let p0 = 2.0 * std::f64::consts::PI * ip as f64 / nphi as f64;
            let p1 = 2.0 * std::f64::consts::PI * (ip as f64 + 1.0) / nphi as f64;
            let cell_area = 0.5 * (t1 * t1 - t0 * t0) * (p1 - p0);
            for j in 0..jshells {
                let hi = rho_top * 0.5f64.powi(j as i32);
                let lo = hi * 0.5;
                let shell_area = std::f64::consts::PI * (hi * hi - lo * lo);
                let mut mean = 0.0;
                let mut m2 = 0.0;
                for n in 0..samples_per_stratum {
                    let t = (t0 * t0 + rng.gen::<f64>() * (t1 * t1 - t0 * t0)).sqrt();
                    let phi = p0 + rng.gen::<f64>() * (p1 - p0);
                    let x = [c[0] + t * phi.cos(), c[1] + t * phi.sin()];
                    let rho = (lo * lo + rng.gen::<f64>() * (hi * hi - lo * lo)).sqrt();
                    let om = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                    let y = [x[0] + rho * om.cos(), x[1] + rho * om.sin()];
                    let f = if dom.contains(&y) {
                        let du = u.value(&y) - u.value(&x);
                        du * du * k.eval(&x, &y)
                    } else {
                        0.0
                    };
                    evals += 1;
                    let delta = f - mean;
                    mean += delta / (n as f64 + 1.0);
                    m2 += delta * (f - mean);
                }
                let scale = cell_area * shell_area;
                total += scale * mean;
                if samples_per_stratum > 1 {
                    let var_mean = m2 / (samples_per_stratum as f64 - 1.0)
                        / samples_per_stratum as f64;
                    var_total += scale * scale * var_mean;
                }
            }
        }
    }
    // inner disc below the last shell, bounded via the Lipschitz constant
    // and the upper envelope's small-ball second moment
    let rho_floor = rho_top * 0.5f64.powi(jshells as i32);
    let lip = u.lipschitz();
    let second_moment = super::radial_integral_weighted(
        k.upper.as_ref(),
        Some(&|z: &[f64]| z.iter().map(|v| v * v).sum::<f64>()),
        0.0,
        rho_floor,
        &QuadratureBudget::with_rel_tol(1e-4),
    )
    .map(|fv| fv.value)
    .unwrap_or(0.0);
    let inner_bound = lip * lip * second_moment * dom.volume();
    Ok(FormValue {
        value: total,
        error_estimate: var_total.sqrt() + inner_bound,
        budget_used: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_fractional_kernel;

    #[test]
    fn constant_function_zero() {
        let k = make_fractional_kernel(1, 1.0, 1.0).unwrap();
        let u = (|_x: &[f64]| 3.0, 0.0);
        let d = Ball::origin(1, 0.5);
        let v = double_form_integral(&u, &k, &d, &QuadratureBudget::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn linear_function_alpha_half_closed_form() {
        // u(x) = x, k = |x-y|^{-3/2} on B_{1/2}: ∫∫ |x-y|^{1/2} = 8/15
        let k = KernelSpec::from_profile(std::sync::Arc::new(
            crate::profiles::PowerProfile::new(1, 1.0, 1.5),
        ));
        let u = (|x: &[f64]| x[0], 1.0);
        let d = Ball::origin(1, 0.5);
        let v =
            double_form_integral(&u, &k, &d, &QuadratureBudget::with_rel_tol(1e-6)).unwrap();
        let expect = 8.0 / 15.0;
        assert!(
            (v.value - expect).abs() < 1e-4 * expect,
            "{} vs {expect}",
            v.value
        );
    }

    #[test]
    fn domain_monotone() {
        let k = make_fractional_kernel(1, 0.8, 1.0).unwrap();
        let u = (|x: &[f64]| (x[0] * 3.0).sin(), 3.0);
        let b = QuadratureBudget::with_rel_tol(1e-4);
        let v1 = double_form_integral(&u, &k, &Ball::origin(1, 0.3), &b)
            .unwrap()
            .value;
        let v2 = double_form_integral(&u, &k, &Ball::origin(1, 0.6), &b)
            .unwrap()
            .value;
        assert!(v1 >= 0.0 && v2 >= v1);
    }
}
