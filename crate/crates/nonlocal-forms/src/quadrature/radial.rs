//! Geometric-shell integration of profiles over annuli, with adaptive
//! refinement per shell, inward refinement toward the origin singularity
//! and decay-driven tail truncation.

use crate::geom::{norm, ArcSet};
use crate::profiles::{Arcs, Decay, Profile};
use crate::{Error, Result};

use super::{integrate_adaptive, Accumulator, FormValue, QuadratureBudget};

/// Shell contributions decaying slower than this ratio are treated as
/// non-convergent when refining toward zero or infinity.
const DIVERGENCE_RATIO: f64 = 0.999;

/// Angular weight applied on top of a profile inside a shell integral.
/// `osc_scale` caps the panel width so oscillatory weights stay resolved.
pub(crate) struct Weight<'a> {
    pub f: &'a dyn Fn(&[f64]) -> f64,
    /// Panels in `r` are kept shorter than `π / (4·osc_scale)`.
    pub osc_scale: f64,
    /// The weight depends on the direction, so exact sphere integrals of
    /// the bare profile cannot be reused.
    pub directional: bool,
}

/// `∫_{S^{d-1}} f(rω) w(rω) dσ(ω) · r^{d-1}`, the density whose 1-d
/// integral over `r` gives the full integral.
fn shell_density(
    f: &dyn Profile,
    weight: Option<&Weight>,
    r: f64,
    ang_tol: f64,
    cells: &mut usize,
) -> f64 {
    let d = f.dim();
    if r == 0.0 {
        return 0.0;
    }
    let plain = weight.map_or(true, |w| !w.directional);
    if plain {
        if let Some(s) = f.sphere_integral(r) {
            let wfac = weight.map_or(1.0, |w| (w.f)(&[r]));
            return r.powi(d as i32 - 1) * s * wfac;
        }
    }
    match d {
        1 => {
            let wp = weight.map_or(1.0, |w| (w.f)(&[r]));
            let wm = weight.map_or(1.0, |w| (w.f)(&[-r]));
            f.eval(&[r]) * wp + f.eval(&[-r]) * wm
        }
        2 => {
            let arcs = match f.support_arcs(r) {
                Arcs::Full => ArcSet::full(),
                Arcs::Set(s) => s,
            };
            let mut acc = 0.0;
            for &(a, b) in arcs.intervals() {
                let mut g = |phi: f64| {
                    let z = [r * phi.cos(), r * phi.sin()];
                    let wv = weight.map_or(1.0, |w| (w.f)(&z));
                    f.eval(&z) * wv
                };
                let (v, _) = integrate_adaptive(&mut g, a, b, 0.0, ang_tol, 64, cells);
                acc += v;
            }
            r * acc
        }
        _ => {
            // d >= 3 only supported for radial profiles and radial weights
            let s = f
                .sphere_integral(r)
                .expect("non-radial profiles unsupported for d >= 3");
            let wfac = weight.map_or(1.0, |w| (w.f)(&[r]));
            r.powi(d as i32 - 1) * s * wfac
        }
    }
}

struct ShellEngine<'a> {
    f: &'a dyn Profile,
    weight: Option<Weight<'a>>,
    budget: QuadratureBudget,
    cells: usize,
    acc: Accumulator,
    err: f64,
    nonfinite: bool,
}

impl<'a> ShellEngine<'a> {
    fn new(f: &'a dyn Profile, weight: Option<Weight<'a>>, budget: QuadratureBudget) -> Self {
        ShellEngine {
            f,
            weight,
            budget,
            cells: 0,
            acc: Accumulator::default(),
            err: 0.0,
            nonfinite: false,
        }
    }

    /// Integrate one shell `[a, b]`.
    fn shell(&mut self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let ang_tol = (self.budget.rel_tol * 0.1).max(1e-12);
        let ang_cells = std::cell::Cell::new(0usize);
        let nonfinite_cell = std::cell::Cell::new(false);
        let fref = self.f;
        let wref = self.weight.as_ref();
        let mut g = |r: f64| {
            let mut c = 0usize;
            let v = shell_density(fref, wref, r, ang_tol, &mut c);
            ang_cells.set(ang_cells.get() + c);
            if !v.is_finite() {
                nonfinite_cell.set(true);
                return 0.0;
            }
            v
        };
        // pre-split oscillatory shells so the adaptive rule sees the waves
        let span = b - a;
        let max_step = self
            .weight
            .as_ref()
            .map(|w| {
                if w.osc_scale > 0.0 {
                    std::f64::consts::PI / (4.0 * w.osc_scale)
                } else {
                    f64::INFINITY
                }
            })
            .unwrap_or(f64::INFINITY);
        let nsub = ((span / max_step).ceil() as usize).clamp(1, 4096);
        let mut val = 0.0;
        let mut err = 0.0;
        let mut cells = 0usize;
        for i in 0..nsub {
            let lo = a + span * i as f64 / nsub as f64;
            let hi = a + span * (i + 1) as f64 / nsub as f64;
            let (v, e) = integrate_adaptive(
                &mut g,
                lo,
                hi,
                0.0,
                (self.budget.rel_tol * 0.05).max(1e-13),
                256,
                &mut cells,
            );
            val += v;
            err += e;
        }
        self.cells += cells + ang_cells.get();
        self.err += err;
        self.nonfinite |= nonfinite_cell.get();
        self.acc.add(val);
        val
    }

    fn over_budget(&self) -> bool {
        self.cells > self.budget.max_cells
    }

    fn finish(self, flagged: bool) -> Result<FormValue> {
        if self.nonfinite {
            return Err(Error::NonFiniteKernel("radial shell integrand".into()));
        }
        let mut err = self.err;
        if flagged {
            // budget exhausted before the target tolerance: inflate
            err = err.max(self.budget.rel_tol * self.acc.total().abs() * 100.0);
        }
        Ok(FormValue {
            value: self.acc.total(),
            error_estimate: err,
            budget_used: self.cells,
        })
    }
}

/// Integral of a profile over the annulus `{r_lo < |z| < r_hi}`.
///
/// `r_lo = 0` refines geometrically into the origin singularity;
/// `r_hi = ∞` truncates using the profile's decay metadata and folds an
/// extrapolated remainder into the value and error estimate. A divergent
/// refinement (non-decaying shell contributions) is reported as
/// [`Error::Divergent`].
pub fn radial_integral(
    f: &dyn Profile,
    r_lo: f64,
    r_hi: f64,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    radial_integral_weighted(f, None, r_lo, r_hi, budget)
}

/// As [`radial_integral`] with an extra pointwise weight `w(z)`;
/// `osc_scale` caps shell panel widths at `π/(4·osc_scale)` so an
/// oscillatory weight (e.g. `sin²(ξ·z/2)`) stays resolved.
pub(crate) fn radial_integral_weighted_impl(
    f: &dyn Profile,
    weight: Option<Weight>,
    r_lo: f64,
    r_hi: f64,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    budget.validate()?;
    if r_hi <= r_lo {
        return Ok(FormValue::zero());
    }
    let d = f.dim();
    let base = budget.annulus_base;
    let mut eng = ShellEngine::new(f, weight, *budget);

    // effective finite upper bound from decay metadata
    let (cap, tail_known_zero) = match f.decay() {
        Decay::Compact { radius } => (radius.min(r_hi), true),
        _ => (r_hi, false),
    };
    if cap <= r_lo {
        return Ok(FormValue::zero());
    }

    // reference scale separating the inward and outward sweeps
    let pivot = if cap.is_finite() {
        cap
    } else {
        r_lo.max(1.0).min(budget.tail_rmax)
    };

    let mut flagged = false;

    // inward sweep toward r_lo (possibly 0)
    {
        let mut hi = pivot.min(cap);
        let mut prev: Option<f64> = None;
        let mut stall = 0usize;
        let mut k = 0usize;
        loop {
            let lo_bound = if r_lo > 0.0 { r_lo } else { 0.0 };
            let lo = (hi / base).max(lo_bound);
            let v = eng.shell(lo, hi).abs();
            let total = eng.acc.total().abs();
            if std::env::var("NLF_TRACE_SHELLS").is_ok() {
                eprintln!("shell k={k} [{lo:.3e},{hi:.3e}] v={v:.4e} total={total:.4e} cells={}", eng.cells);
            }
            if lo <= lo_bound + f64::MIN_POSITIVE && r_lo > 0.0 {
                break;
            }
            if r_lo == 0.0 {
                if let Some(p) = prev {
                    if p > 0.0 && v / p >= DIVERGENCE_RATIO && v > budget.rel_tol * total {
                        // weights such as sin²(ξ·z/2) or r²∧|z|² produce
                        // transient growth above their crossover scale;
                        // only persistent growth deep below the pivot counts
                        if hi < pivot * 1e-4 {
                            stall += 1;
                            if stall >= 6 {
                                return Err(Error::Divergent(format!(
                                    "shell contributions near the origin do not decay \
                                     (last two: {p:.3e}, {v:.3e})"
                                )));
                            }
                        }
                    } else {
                        stall = 0;
                    }
                    // geometric stop + extrapolated remainder
                    let ratio = (v / p).min(0.97);
                    if v <= budget.rel_tol * 0.02 * total && total > 0.0 {
                        let rem = v * ratio / (1.0 - ratio);
                        eng.err += rem;
                        break;
                    }
                }
                if v == 0.0 && prev == Some(0.0) && k > 4 {
                    break;
                }
            }
            prev = Some(v);
            hi = lo;
            k += 1;
            if hi < 1e-250 {
                // depth guard: below this scale profile evaluations lose
                // meaning; remaining mass is covered by the stop criterion
                eng.err += v;
                break;
            }
            if k > 1200 || eng.over_budget() {
                flagged = true;
                break;
            }
        }
    }

    // outward sweep toward r_hi (possibly ∞)
    if cap > pivot {
        let mut lo = pivot;
        let mut prev: Option<f64> = None;
        let mut k = 0usize;
        loop {
            let hi = (lo * base).min(cap);
            let v = eng.shell(lo, hi).abs();
            let total = eng.acc.total().abs();
            if hi >= cap - f64::MIN_POSITIVE && cap.is_finite() {
                break;
            }
            if let Some(p) = prev {
                let ratio = (v / p.max(1e-300)).min(0.97);
                if v <= budget.rel_tol * 0.02 * total && total > 0.0 {
                    // geometric remainder for the un-integrated tail
                    let rem = if tail_known_zero {
                        0.0
                    } else {
                        v * ratio / (1.0 - ratio)
                    };
                    eng.acc.add(rem);
                    eng.err += 0.5 * rem + budget.rel_tol * 0.02 * total;
                    break;
                }
                if p > 0.0 && v / p >= DIVERGENCE_RATIO && k > 8 {
                    let transient = match f.decay() {
                        // shell integrand is r^{d-1}·f; decays only if the
                        // profile falls off faster than r^{-d}
                        Decay::PowerLaw { exponent } => exponent > d as f64,
                        Decay::Rapid | Decay::Compact { .. } => true,
                        Decay::Unknown => false,
                    };
                    if !transient || hi >= budget.tail_rmax {
                        return Err(Error::Divergent(format!(
                            "tail shells do not decay at |z| ~ {hi:.3e}"
                        )));
                    }
                }
            }
            prev = Some(v);
            lo = hi;
            k += 1;
            if lo >= budget.tail_rmax {
                // unresolved tail: flag through the error estimate
                eng.err += prev.unwrap_or(0.0) * 10.0;
                flagged = true;
                break;
            }
            if k > 600 || eng.over_budget() {
                flagged = true;
                break;
            }
        }
    }

    eng.finish(flagged)
}

pub fn radial_integral_weighted(
    f: &dyn Profile,
    weight: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
    r_lo: f64,
    r_hi: f64,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    let w = weight.map(|f| Weight {
        f: f as &dyn Fn(&[f64]) -> f64,
        osc_scale: 0.0,
        directional: true,
    });
    radial_integral_weighted_impl(f, w, r_lo, r_hi, budget)
}

/// `∫_{|w - c| > R} f(w) dw`: integral of a profile over the exterior of a
/// ball centered at `c`. Shells around the origin are clipped against the
/// ball exactly (membership in d = 1, arcs in d = 2).
pub fn profile_integral_outside_ball(
    f: &dyn Profile,
    c: &[f64],
    radius: f64,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    let d = f.dim();
    let dist_c = norm(c);
    if dist_c == 0.0 {
        return radial_integral(f, radius, f64::INFINITY, budget);
    }
    match d {
        1 => {
            let c0 = c[0];
            let w = move |z: &[f64]| -> f64 {
                if (z[0] - c0).abs() > radius {
                    1.0
                } else {
                    0.0
                }
            };
            // the clip boundary sits at |c| ± R; split there to keep the
            // integrand piecewise smooth
            let splits = [(c0 - radius).abs(), (c0 + radius).abs()];
            let lo = 0.0;
            let mut pts: Vec<f64> = splits.to_vec();
            pts.sort_by(f64::total_cmp);
            let mut total = FormValue::zero();
            let mut prev = lo;
            for &p in &pts {
                if p > prev {
                    let v = radial_integral_weighted(f, Some(&w), prev, p, budget)?;
                    total.value += v.value;
                    total.error_estimate += v.error_estimate;
                    total.budget_used += v.budget_used;
                    prev = p;
                }
            }
            let v = radial_integral_weighted(f, Some(&w), prev, f64::INFINITY, budget)?;
            total.value += v.value;
            total.error_estimate += v.error_estimate;
            total.budget_used += v.budget_used;
            Ok(total)
        }
        2 => {
            let cx = [c[0], c[1]];
            let w = move |z: &[f64]| -> f64 {
                let dx = z[0] - cx[0];
                let dy = z[1] - cx[1];
                if dx * dx + dy * dy > radius * radius {
                    1.0
                } else {
                    0.0
                }
            };
            // tangent radii of the excluded ball: shells below the first
            // are entirely excluded, shells beyond the second need no clip
            let inner = (dist_c - radius).max(0.0);
            let outer = dist_c + radius;
            let mut total = FormValue::zero();
            if outer > inner {
                let v = radial_integral_weighted(f, Some(&w), inner, outer, budget)?;
                total.value += v.value;
                total.error_estimate += v.error_estimate;
                total.budget_used += v.budget_used;
            }
            let v = radial_integral(f, outer, f64::INFINITY, budget)?;
            total.value += v.value;
            total.error_estimate += v.error_estimate;
            total.budget_used += v.budget_used;
            Ok(total)
        }
        _ => Err(Error::Unsupported(
            "exterior-ball integrals implemented for d <= 2".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{BallsIndicator, PowerProfile, ZeroProfile};

    fn b() -> QuadratureBudget {
        QuadratureBudget::with_rel_tol(1e-9)
    }

    #[test]
    fn annulus_area() {
        // f ≡ 1 in d = 2 over the annulus 1 < r < 2: area 3π
        let f = PowerProfile::new(2, 1.0, 0.0);
        let v = radial_integral(&f, 1.0, 2.0, &b()).unwrap();
        let expect = 3.0 * std::f64::consts::PI;
        assert!((v.value - expect).abs() < 1e-8 * expect, "{}", v.value);
    }

    #[test]
    fn singular_moment() {
        // ∫_{|z|<r} |z|² |z|^{-2} dz in d = 1 equals 2r (α = 1 shape)
        let f = PowerProfile::new(1, 1.0, 0.0); // |z|^2·|z|^{-2} = 1
        let v = radial_integral(&f, 0.0, 0.7, &b()).unwrap();
        assert!((v.value - 1.4).abs() < 1e-8);
    }

    #[test]
    fn power_tail() {
        // ∫_{|z|>1} |z|^{-2} dz = 2 in d = 1
        let f = PowerProfile::new(1, 1.0, 2.0);
        let v = radial_integral(&f, 1.0, f64::INFINITY, &b()).unwrap();
        assert!((v.value - 2.0).abs() < 1e-6, "{} ± {}", v.value, v.error_estimate);
    }

    #[test]
    fn inner_singularity_converges() {
        // ∫_{|z|<1} |z|^{-1/2} dz (d=1) = 2·∫_0^1 r^{-1/2} dr = 4
        let f = PowerProfile::new(1, 1.0, 0.5);
        let v = radial_integral(&f, 0.0, 1.0, &b()).unwrap();
        assert!((v.value - 4.0).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn inner_divergence_detected() {
        // |z|^{-1} near 0 in d = 1 log-diverges
        let f = PowerProfile::new(1, 1.0, 1.0);
        let r = radial_integral(&f, 0.0, 1.0, &b());
        assert!(matches!(r, Err(Error::Divergent(_))));
    }

    #[test]
    fn zero_profile() {
        let f = ZeroProfile { d: 2 };
        let v = radial_integral(&f, 0.0, f64::INFINITY, &b()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn outside_ball_d1() {
        // f = |z|^{-2} (d=1), exterior of B(3, 1): ∫_{|w-3|>1} |w|^{-2} dw
        // = ∫_{-∞}^{2} + ∫_{4}^{∞} of w^{-2} (through 0? no: |w|^{-2} singular at 0)
        // exterior covers the origin, so the integral diverges; use a
        // compact profile instead.
        let f = BallsIndicator::symmetric_pair(vec![2.0], 0.1);
        // exterior of B(2, 0.15): right ball [1.9,2.1] reduced to [1.9,1.85]..
        // exterior means |w-2|>0.15 ⇒ right ball contributes |[1.9,1.85]|=0
        // pieces [1.9, 1.85]? compute directly: [1.9,2.1] minus (1.85,2.15) = ∅…
        // choose radius 0.05: exterior excludes (1.95,2.05); remaining
        // [1.9,1.95]∪[2.05,2.1] of length 0.1, plus the untouched left ball 0.2.
        let v = profile_integral_outside_ball(&f, &[2.0], 0.05, &b()).unwrap();
        assert!((v.value - 0.3).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn outside_ball_d2_matches_radial() {
        // centered exclusion reduces to a plain tail integral
        let f = PowerProfile::new(2, 1.0, 3.5);
        let a = profile_integral_outside_ball(&f, &[0.0, 0.0], 1.0, &b()).unwrap();
        let e = radial_integral(&f, 1.0, f64::INFINITY, &b()).unwrap();
        assert!((a.value - e.value).abs() < 1e-6 * e.value);
        // off-center exclusion of an indicator pair
        let g = BallsIndicator::symmetric_pair(vec![2.0, 0.0], 0.3);
        let tot = std::f64::consts::PI * 0.09 * 2.0;
        let v = profile_integral_outside_ball(&g, &[2.0, 0.0], 0.3, &b()).unwrap();
        // excluding exactly the right ball leaves the left one
        assert!((v.value - tot / 2.0).abs() < 1e-4, "{} vs {}", v.value, tot / 2.0);
    }
}
