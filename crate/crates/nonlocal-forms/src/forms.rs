//! The comparability laboratory: kernel energies against the fractional
//! reference energy, cutoff functions and the cutoff condition (B), the
//! convolution-form inequality, Poincaré quotients and the thorn-kernel
//! certificate.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{u1prime_constant, ConditionId, ConditionReport, Sample, Verdict};
use crate::geom::{dist, norm, Ball};
use crate::kernels::{KernelSpec, ThornParams};
use crate::profiles::{Arcs, Decay, Profile, Rect2, RectUnion};
use crate::quadrature::{
    double_form_integral, integrate_adaptive, profile_integral_outside_ball, radial_integral,
    FormValue, QuadratureBudget,
};
use crate::testfn::{bump_family, cutoff, TestFunction};
use crate::{Error, Result};

/// `E^k_D(u,u) = ∫_D ∫_D (u(y)-u(x))² k(x,y) dy dx`.
pub fn energy_form(
    u: &TestFunction,
    k: &KernelSpec,
    dom: &Ball,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    double_form_integral(u, k, dom, budget)
}

/// Reference kernel `α(2-α)|z|^{-d-α}` as a [`KernelSpec`].
pub fn reference_kernel(d: usize, alpha: f64) -> Result<KernelSpec> {
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha={alpha} not in (0,2)")));
    }
    Ok(KernelSpec::from_profile(Arc::new(
        crate::profiles::PowerProfile::new(d, alpha * (2.0 - alpha), d as f64 + alpha),
    )))
}

/// `E^α_D(u,u) = α(2-α) ∫_D ∫_D (u(y)-u(x))² |x-y|^{-d-α} dy dx`.
pub fn reference_form(
    u: &TestFunction,
    alpha: f64,
    dom: &Ball,
    budget: &QuadratureBudget,
) -> Result<FormValue> {
    let k = reference_kernel(dom.dim(), alpha)?;
    double_form_integral(u, &k, dom, budget)
}

// ---------------------------------------------------------------------------
// Comparability scans (condition (A))
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RatioEntry {
    pub function_id: String,
    pub alpha: f64,
    pub e_k: f64,
    pub e_alpha: f64,
    pub ratio: f64,
    pub err: f64,
}

/// Per-family ratio statistics for the local comparability condition.
#[derive(Clone, Debug, Serialize)]
pub struct RatioStats {
    pub entries: Vec<RatioEntry>,
    pub excluded: Vec<String>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub verdict: Verdict,
}

impl RatioStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("function_id,alpha,E_k,E_alpha,ratio,err\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.function_id, e.alpha, e.e_k, e.e_alpha, e.ratio, e.err
            ));
        }
        out
    }
}

/// Ratios `E^k_B / E^α_B` over a function family supported in the small
/// ball `B` (radius < 1). The verdict is pass iff the ratios stay inside
/// a positive finite bracket; near-constant functions with vanishing
/// reference energy are excluded and listed.
pub fn comparability_scan(
    k: &KernelSpec,
    alpha: f64,
    ball: &Ball,
    family: &[TestFunction],
    budget: &QuadratureBudget,
) -> Result<RatioStats> {
    if ball.radius >= 1.0 {
        return Err(Error::Domain(
            "comparability is a small-ball statement: radius must be < 1".into(),
        ));
    }
    let reference = reference_kernel(ball.dim(), alpha)?;
    let results: Vec<Result<(String, FormValue, FormValue)>> = family
        .par_iter()
        .map(|u| {
            let ek = double_form_integral(u, k, ball, budget)?;
            let ea = double_form_integral(u, &reference, ball, budget)?;
            Ok((u.id.clone(), ek, ea))
        })
        .collect();

    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        let (id, ek, ea) = r?;
        // reference energy comparable to its own error: constant-like input
        if ea.value <= 10.0 * ea.error_estimate.max(1e-300) {
            excluded.push(id);
            continue;
        }
        let ratio = ek.value / ea.value;
        let err = ratio
            * (ek.error_estimate / ek.value.abs().max(1e-300)
                + ea.error_estimate / ea.value.abs().max(1e-300));
        entries.push(RatioEntry {
            function_id: id,
            alpha,
            e_k: ek.value,
            e_alpha: ea.value,
            ratio,
            err: err.abs(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Invalid(
            "comparability scan: entire family was constant-like".into(),
        ));
    }
    let min_ratio = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0f64, f64::max);
    let verdict = if min_ratio > 0.0 && max_ratio.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(RatioStats {
        entries,
        excluded,
        min_ratio,
        max_ratio,
        verdict,
    })
}

/// Seeded default family for comparability scans.
pub fn default_family(ball: &Ball, count: usize, seed: u64) -> Vec<TestFunction> {
    bump_family(ball, count, seed)
}

// ---------------------------------------------------------------------------
// Cutoffs and condition (B)
// ---------------------------------------------------------------------------

/// Cutoff ramp: 1 on `B_R`, support `closure(B_{R+ρ})`, values in [0,1],
/// Lipschitz bound ≤ 2/ρ.
pub fn build_cutoff(d: usize, big_r: f64, rho: f64) -> Result<TestFunction> {
    if !(0.0 < big_r && big_r < 1.0 && 0.0 < rho && rho < 1.0) {
        return Err(Error::Domain(format!(
            "cutoff needs R, rho in (0,1); got R={big_r}, rho={rho}"
        )));
    }
    Ok(cutoff(d, big_r, rho))
}

/// `∫_{R^d} (τ(y)-τ(x))² k(x,y) dy` for a cutoff τ centered at `center`.
fn cutoff_energy_at(
    k: &KernelSpec,
    tau: &TestFunction,
    center: &[f64],
    x: &[f64],
    budget: &QuadratureBudget,
) -> Result<f64> {
    let d = k.d;
    let tau_at = |y: &[f64]| {
        let shifted: Vec<f64> = y.iter().zip(center).map(|(a, c)| a - c).collect();
        tau.value(&shifted)
    };
    let tx = tau_at(x);
    let supp = match &tau.support {
        crate::testfn::Support::Ball(b) => b.radius,
        _ => return Err(Error::Invalid("cutoff must be compactly supported".into())),
    };
    // beyond this offset radius τ(y) vanishes in every direction
    let s_hi = dist(x, center) + supp;
    let rel_tol = budget.rel_tol;
    let mut acc = 0.0;
    let mut hi = s_hi;
    let mut seen_nonzero = false;
    let mut zero_run = 0usize;
    let mut cells = 0usize;
    for _ in 0..400 {
        let lo = hi * 0.5;
        let v = match d {
            1 => {
                let mut g = |s: f64| {
                    let mut total = 0.0;
                    for side in [-1.0, 1.0] {
                        let y = [x[0] + side * s];
                        let dt = tau_at(&y) - tx;
                        total += dt * dt * k.eval(x, &y);
                    }
                    total
                };
                integrate_adaptive(&mut g, lo, hi, 0.0, rel_tol * 0.05, 64, &mut cells).0
            }
            2 => {
                let inner_cells = std::cell::Cell::new(0usize);
                let mut density = |rho: f64| {
                    let arcs = match k.section(x, rho) {
                        Arcs::Full => crate::geom::ArcSet::full(),
                        Arcs::Set(s) => s,
                    };
                    let mut ang = 0.0;
                    for &(a, b) in arcs.intervals() {
                        let mut g = |phi: f64| {
                            let y = [x[0] + rho * phi.cos(), x[1] + rho * phi.sin()];
                            let dt = tau_at(&y) - tx;
                            dt * dt * k.eval(x, &y)
                        };
                        let mut cc = 0usize;
                        let (v, _) =
                            integrate_adaptive(&mut g, a, b, 0.0, rel_tol * 0.1, 48, &mut cc);
                        inner_cells.set(inner_cells.get() + cc);
                        ang += v;
                    }
                    rho * ang
                };
                let v =
                    integrate_adaptive(&mut density, lo, hi, 0.0, rel_tol * 0.05, 48, &mut cells)
                        .0;
                cells += inner_cells.get();
                v
            }
            _ => return Err(Error::Unsupported("cutoff energies for d <= 2".into())),
        };
        acc += v;
        if seen_nonzero && v.abs() <= 0.02 * rel_tol * acc.abs() && acc != 0.0 {
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
    // far tail: τ(y) = 0, the integrand is τ(x)²k(x,y)
    if tx != 0.0 {
        let tail = if let Some(p) = k.profile() {
            radial_integral(p.as_ref(), s_hi, f64::INFINITY, budget)?.value
        } else {
            // non-invariant kernel: bound through the upper envelope
            profile_integral_outside_ball(k.upper.as_ref(), &vec![0.0; d], s_hi, budget)?.value
        };
        acc += tx * tx * tail;
    }
    Ok(acc)
}

/// Cutoff condition (B): `sup_x ∫ (τ(y)-τ(x))² k(x,y) dy ≤ c ρ^{-α}`.
///
/// The essential sup is approximated by a grid max concentrated in the
/// ramp annulus plus a coarse global grid. With known (U0)/(U1) constants
/// the carried bound `2^α C₄` is asserted alongside.
pub fn check_b(
    k: &KernelSpec,
    alpha: f64,
    big_r: f64,
    rho: f64,
    center: &[f64],
    known_u_constants: Option<(f64, f64)>,
    budget: &QuadratureBudget,
) -> Result<ConditionReport> {
    let tau = build_cutoff(k.d, big_r, rho)?;
    // radii where the sup lives for radial kernels: the ramp annulus,
    // plus a coarse sweep of the rest
    let mut radii: Vec<f64> = (0..=16)
        .map(|i| (big_r - rho).max(0.0) + i as f64 * 3.0 * rho / 16.0)
        .collect();
    radii.extend([0.0, 0.5 * big_r, big_r + 2.0 * rho, big_r + 4.0 * rho]);
    let dirs: Vec<Vec<f64>> = match k.d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..4)
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / 4.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => return Err(Error::Unsupported("check_b for d <= 2".into())),
    };
    let mut xs: Vec<Vec<f64>> = Vec::new();
    for &r in &radii {
        if r == 0.0 {
            xs.push(center.to_vec());
            continue;
        }
        for dir in &dirs {
            xs.push(
                center
                    .iter()
                    .zip(dir)
                    .map(|(c, u)| c + r * u)
                    .collect::<Vec<f64>>(),
            );
        }
    }

    let values: Vec<Result<f64>> = xs
        .par_iter()
        .map(|x| cutoff_energy_at(k, &tau, center, x, budget))
        .collect();
    let mut rep = ConditionReport {
        condition: ConditionId::B,
        verdict: Verdict::Pass,
        empirical_constant: None,
        samples: Vec::new(),
        notes: format!("grid sup over {} points, ramp-focused", xs.len()),
        extra: None,
    };
    let mut best = 0.0f64;
    for (x, v) in xs.iter().zip(values) {
        let v = v?;
        let c = rho.powf(alpha) * v;
        best = best.max(c);
        rep.samples.push(Sample {
            parameter: norm(x),
            value: c,
        });
    }
    rep.empirical_constant = Some(best);
    if !best.is_finite() {
        rep.verdict = Verdict::Fail;
    }
    if let Some((c0, c1)) = known_u_constants {
        let c4 = u1prime_constant(c0, c1, alpha);
        let bound = 2f64.powf(alpha) * c4;
        let ok = best <= bound * (1.0 + crate::conditions::DEFAULT_TOL);
        if !ok {
            rep.verdict = Verdict::Fail;
        }
        rep.extra = Some(serde_json::json!({
            "c4": c4,
            "carried_bound": bound,
            "bound_ok": ok,
        }));
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Convolution inequality
// ---------------------------------------------------------------------------

/// A density `q` together with its self-convolution `q*q` and the support
/// radius ρ.
pub struct ConvolutionPair {
    pub q: Arc<dyn Profile>,
    pub qq: Arc<dyn Profile>,
    pub rho: f64,
}

impl ConvolutionPair {
    /// Numerical convolution of an even 1-d step density.
    pub fn from_step(q: crate::profiles::StepProfile1d, grid_n: usize) -> Self {
        let rho = *q.breaks.last().unwrap();
        let qq = crate::profiles::GridProfile1d::self_convolution(&q, rho, grid_n.max(64));
        ConvolutionPair {
            q: Arc::new(q),
            qq: Arc::new(qq),
            rho,
        }
    }

    /// Exact convolution of a rectangle-union density (d = 2).
    pub fn from_rect_union(q: RectUnion) -> Self {
        let rho = match q.decay() {
            Decay::Compact { radius } => radius,
            _ => unreachable!("rect unions are compact"),
        };
        let conv = crate::profiles::RectUnionConvolution { base: q.clone() };
        ConvolutionPair {
            q: Arc::new(q),
            qq: Arc::new(conv),
            rho,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub l1_norm: f64,
    /// `4‖q‖·rhs - lhs`, nonnegative on a pass.
    pub slack: f64,
    pub verdict: Verdict,
}

/// Convolution-form inequality
/// `E^{q*q}_{B_R}(u,u) ≤ 4‖q‖_{L¹} E^{q}_{B_{R+ρ}}(u,u)`.
pub fn convolution_bound_check(
    pair: &ConvolutionPair,
    u: &TestFunction,
    big_r: f64,
    budget: &QuadratureBudget,
) -> Result<ConvolutionCheck> {
    let d = pair.q.dim();
    let l1 = radial_integral(pair.q.as_ref(), 0.0, f64::INFINITY, budget)?.value;
    let k_qq = KernelSpec::from_profile(pair.qq.clone());
    let k_q = KernelSpec::from_profile(pair.q.clone());
    let lhs = double_form_integral(u, &k_qq, &Ball::origin(d, big_r), budget)?;
    let rhs = double_form_integral(u, &k_q, &Ball::origin(d, big_r + pair.rho), budget)?;
    let bound = 4.0 * l1 * rhs.value;
    let tol_abs = 4.0 * l1 * rhs.error_estimate + lhs.error_estimate;
    let slack = bound - lhs.value;
    Ok(ConvolutionCheck {
        lhs: lhs.value,
        rhs: rhs.value,
        l1_norm: l1,
        slack,
        verdict: if slack >= -tol_abs - crate::conditions::DEFAULT_TOL * bound.abs() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

// ---------------------------------------------------------------------------
// Poincaré quotient
// ---------------------------------------------------------------------------

/// `∫_D f` for pointwise integrands on balls (d ≤ 2).
pub fn ball_integral(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    dom: &Ball,
    rel_tol: f64,
) -> (f64, usize) {
    let mut cells = 0usize;
    match dom.dim() {
        1 => {
            let c = dom.center[0];
            let r = dom.radius;
            let mut g = |x: f64| f(&[x]);
            let (v, _) = integrate_adaptive(&mut g, c - r, c + r, 0.0, rel_tol, 512, &mut cells);
            (v, cells)
        }
        2 => {
            let c = [dom.center[0], dom.center[1]];
            let cc = std::cell::Cell::new(0usize);
            let mut radial = |t: f64| {
                let mut ang = |phi: f64| f(&[c[0] + t * phi.cos(), c[1] + t * phi.sin()]);
                let mut k = 0usize;
                let (v, _) = integrate_adaptive(
                    &mut ang,
                    0.0,
                    2.0 * std::f64::consts::PI,
                    0.0,
                    rel_tol * 0.5,
                    96,
                    &mut k,
                );
                cc.set(cc.get() + k);
                t * v
            };
            let (v, _) =
                integrate_adaptive(&mut radial, 0.0, dom.radius, 0.0, rel_tol, 128, &mut cells);
            (v, cells + cc.get())
        }
        _ => panic!("ball_integral supports d <= 2"),
    }
}

/// Poincaré quotient `‖u - mean_D u‖²_{L²(D)} / E^α_D(u,u)`.
pub fn poincare_quotient(
    u: &TestFunction,
    dom: &Ball,
    alpha: f64,
    budget: &QuadratureBudget,
) -> Result<f64> {
    let vol = dom.volume();
    let (mass, _) = ball_integral(&|x| u.value(x), dom, budget.rel_tol * 0.1);
    let mean = mass / vol;
    let (var, _) = ball_integral(
        &|x| {
            let v = u.value(x) - mean;
            v * v
        },
        dom,
        budget.rel_tol * 0.1,
    );
    let ea = reference_form(u, alpha, dom, budget)?;
    if ea.value <= 10.0 * ea.error_estimate.max(1e-300) {
        return Err(Error::Invalid(
            "Poincaré quotient undefined: reference energy vanishes (constant input)".into(),
        ));
    }
    Ok(var / ea.value)
}

// ---------------------------------------------------------------------------
// Thorn certificate (the worked anisotropic example)
// ---------------------------------------------------------------------------

/// Height of the `E_n` strips: `2^{-2-(n+2)/b}`.
pub fn thorn_strip_height(b: f64, n: i32) -> f64 {
    2f64.powf(-2.0 - (n as f64 + 2.0) / b)
}

/// The cross-shaped set `E_n` as four rectangles.
pub fn thorn_e_rects(b: f64, n: i32) -> Vec<Rect2> {
    let lo = 2f64.powi(-n - 2);
    let hi = 2f64.powi(-n - 1);
    let h = thorn_strip_height(b, n);
    vec![
        Rect2 { x: (lo, hi), y: (-h, h) },
        Rect2 { x: (-hi, -lo), y: (-h, h) },
        Rect2 { x: (-h, h), y: (lo, hi) },
        Rect2 { x: (-h, h), y: (-hi, -lo) },
    ]
}

/// The four squares `P_n`: `5/4·2^{-n-2} ≤ |x₁|, |x₂| ≤ 7/4·2^{-n-2}`.
pub fn thorn_p_rects(n: i32) -> Vec<Rect2> {
    let lo = 1.25 * 2f64.powi(-n - 2);
    let hi = 1.75 * 2f64.powi(-n - 2);
    vec![
        Rect2 { x: (lo, hi), y: (lo, hi) },
        Rect2 { x: (-hi, -lo), y: (lo, hi) },
        Rect2 { x: (lo, hi), y: (-hi, -lo) },
        Rect2 { x: (-hi, -lo), y: (-hi, -lo) },
    ]
}

/// `q_n = 2^{n(β+2)} 1_{E_n}` as a rectangle-union density.
pub fn thorn_q_density(params: &ThornParams, n: i32) -> RectUnion {
    RectUnion {
        rects: thorn_e_rects(params.b, n),
        value: 2f64.powf(n as f64 * (params.beta + 2.0)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThornLevel {
    pub n: i32,
    pub l1_norm: f64,
    /// `‖q_n‖ = 2^{nα-1-2/b} ≤ 2^{nα-2}`.
    pub l1_bound_ok: bool,
    pub en_inside_gamma: bool,
    /// min over sampled `z ∈ P_n` of `q_n*q_n(z) / (2^{-2-4/b} 2^{n(2α+2)})`.
    pub conv_lower_ratio: f64,
    pub conv_lower_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThornCertificate {
    pub b: f64,
    pub alpha: f64,
    pub levels: Vec<ThornLevel>,
    pub scan: RatioStats,
    pub verdict: Verdict,
}

/// Reproduces the anisotropic-example pipeline: builds the sets `E_n`,
/// densities `q_n` and squares `P_n`, verifies the pointwise lower bound
/// `q_n*q_n ≥ 2^{-2-4/b} 2^{n(2α+2)}` on samples of `P_n`, audits the
/// `L¹` bound of `q_n`, and runs a comparability scan for the thorn
/// kernel itself.
pub fn thorn_certificate(
    params: &ThornParams,
    big_r: f64,
    n_levels: usize,
    family_size: usize,
    seed: u64,
    budget: &QuadratureBudget,
) -> Result<ThornCertificate> {
    if !(0.0 < big_r && big_r < 1.0) {
        return Err(Error::Domain("thorn certificate needs R in (0,1)".into()));
    }
    let b = params.b;
    let alpha = params.alpha.alpha;
    let gamma = crate::profiles::ThornRegion { b };
    let mut levels = Vec::new();
    for n in 0..n_levels as i32 {
        let q = thorn_q_density(params, n);
        let l1 = q.value * q.area();
        let l1_exact = 2f64.powf(n as f64 * alpha - 1.0 - 2.0 / b);
        let l1_bound_ok = (l1 - l1_exact).abs() <= 1e-9 * l1_exact
            && l1 <= 2f64.powf(n as f64 * alpha - 2.0) * (1.0 + 1e-12);
        // E_n ⊂ Γ on a sample grid
        let mut en_ok = true;
        for rect in &q.rects {
            for i in 0..5 {
                for j in 0..5 {
                    let z = [
                        rect.x.0 + (rect.x.1 - rect.x.0) * (i as f64 + 0.5) / 5.0,
                        rect.y.0 + (rect.y.1 - rect.y.0) * (j as f64 + 0.5) / 5.0,
                    ];
                    en_ok &= gamma.contains(&z);
                }
            }
        }
        // pointwise convolution lower bound on P_n
        let bound = 2f64.powf(-2.0 - 4.0 / b) * 2f64.powf(n as f64 * (2.0 * alpha + 2.0));
        let mut min_ratio = f64::INFINITY;
        for rect in thorn_p_rects(n) {
            for i in 0..5 {
                for j in 0..5 {
                    let z = [
                        rect.x.0 + (rect.x.1 - rect.x.0) * (i as f64 + 0.5) / 5.0,
                        rect.y.0 + (rect.y.1 - rect.y.0) * (j as f64 + 0.5) / 5.0,
                    ];
                    min_ratio = min_ratio.min(q.self_convolution(&z) / bound);
                }
            }
        }
        levels.push(ThornLevel {
            n,
            l1_norm: l1,
            l1_bound_ok,
            en_inside_gamma: en_ok,
            conv_lower_ratio: min_ratio,
            conv_lower_ok: min_ratio >= 1.0 - 1e-9,
        });
    }
    let kernel = crate::kernels::make_thorn_kernel(params);
    let ball = Ball::origin(2, big_r);
    let family = default_family(&ball, family_size, seed);
    let scan = comparability_scan(&kernel, alpha, &ball, &family, budget)?;
    let verdict = if scan.verdict == Verdict::Pass
        && levels
            .iter()
            .all(|l| l.l1_bound_ok && l.en_inside_gamma && l.conv_lower_ok)
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ThornCertificate {
        b,
        alpha,
        levels,
        scan,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_fractional_kernel, Alpha};
    use crate::profiles::StepProfile1d;
    use crate::testfn::poly_bump;

    fn budget() -> QuadratureBudget {
        QuadratureBudget::with_rel_tol(1e-5)
    }

    #[test]
    fn reference_form_oracle_value() {
        // d=1, α=1, u = (1-4x²)₊² on B_{1/2}: brute-force tensor oracle
        // gives 1088/315 (also pinned by an independent dense grid below)
        let u = poly_bump(1, &[0.0], 0.5, 2);
        let dom = Ball::origin(1, 0.5);
        let v = reference_form(&u, 1.0, &dom, &budget()).unwrap();
        let expect = 1088.0 / 315.0;
        assert!(
            (v.value - expect).abs() < 5e-3 * expect,
            "{} vs {expect}",
            v.value
        );
    }

    #[test]
    fn quadratic_and_shift_invariance() {
        let u = poly_bump(1, &[0.1], 0.3, 2);
        let k = make_fractional_kernel(1, 1.2, 1.0).unwrap();
        let dom = Ball::origin(1, 0.5);
        let e1 = energy_form(&u, &k, &dom, &budget()).unwrap().value;
        let e2 = energy_form(&u.scaled(3.0), &k, &dom, &budget()).unwrap().value;
        assert!((e2 - 9.0 * e1).abs() < 1e-3 * e2);
        let e3 = energy_form(&u.shifted_by_constant(5.0), &k, &dom, &budget())
            .unwrap()
            .value;
        assert!((e3 - e1).abs() < 1e-3 * e1.max(1e-12));
    }

    #[test]
    fn fractional_ratio_forced() {
        // k = A_{1,-α}|z|^{-1-α} vs E^α: ratio is A/(α(2-α)) exactly
        let alpha = 1.0;
        let k = make_fractional_kernel(1, alpha, 1.0).unwrap();
        let dom = Ball::origin(1, 0.5);
        let u = poly_bump(1, &[0.05], 0.35, 1);
        let ek = energy_form(&u, &k, &dom, &budget()).unwrap().value;
        let ea = reference_form(&u, alpha, &dom, &budget()).unwrap().value;
        let expect = 1.0 / std::f64::consts::PI;
        assert!(
            (ek / ea - expect).abs() < 2e-2 * expect,
            "{} vs {expect}",
            ek / ea
        );
    }

    #[test]
    fn cutoff_bound_fractional() {
        // Prop-2.2-style carried bound with the module's own constants
        let alpha = 1.0;
        let k = KernelSpec::from_profile(Arc::new(crate::profiles::PowerProfile::new(
            1,
            2.0 - alpha,
            1.0 + alpha,
        )));
        let rep = check_b(
            &k,
            alpha,
            0.5,
            0.25,
            &[0.0],
            Some((4.0, 2.0)),
            &budget(),
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.extra);
        let c = rep.empirical_constant.unwrap();
        assert!(c > 0.0 && c <= 2.0 * 26.0 * 1.01, "constant {c}");
    }

    #[test]
    fn check_b_zero_kernel() {
        let k = KernelSpec::zero(1);
        let rep = check_b(&k, 1.0, 0.5, 0.25, &[0.0], None, &budget()).unwrap();
        assert_eq!(rep.empirical_constant.unwrap(), 0.0);
    }

    #[test]
    fn convolution_inequality_step() {
        // q = 1_{B_1} in d=1 (‖q‖ = 2), u a bump, R = 1
        let q = StepProfile1d::new(vec![0.0, 1.0], vec![1.0]);
        let pair = ConvolutionPair::from_step(q, 256);
        let u = poly_bump(1, &[0.2], 0.6, 2);
        let chk = convolution_bound_check(&pair, &u, 1.0, &budget()).unwrap();
        assert_eq!(chk.verdict, Verdict::Pass);
        assert!((chk.l1_norm - 2.0).abs() < 1e-6);
        assert!(chk.slack >= 0.0);
        // constant u: both sides vanish
        let c = poly_bump(1, &[0.0], 0.5, 1).scaled(0.0);
        let chk0 = convolution_bound_check(&pair, &c, 1.0, &budget()).unwrap();
        assert_eq!(chk0.lhs, 0.0);
        assert_eq!(chk0.rhs, 0.0);
        assert_eq!(chk0.verdict, Verdict::Pass);
    }

    #[test]
    fn poincare_quotient_shift_invariant() {
        let dom = Ball::origin(1, 1.0);
        let u = TestFunction::custom("linear", 1, crate::testfn::Support::Global {
            effective_radius: 2.0,
        }, 1.0, |x| x[0]);
        let q1 = poincare_quotient(&u, &dom, 1.0, &budget()).unwrap();
        assert!(q1.is_finite() && q1 > 0.0);
        let q2 = poincare_quotient(&u.shifted_by_constant(7.0), &dom, 1.0, &budget()).unwrap();
        assert!((q1 - q2).abs() < 5e-3 * q1, "{q1} vs {q2}");
        // constant input is rejected
        let c = u.scaled(0.0);
        assert!(poincare_quotient(&c, &dom, 1.0, &budget()).is_err());
    }

    #[test]
    fn thorn_sets_geometry() {
        let params = ThornParams::new(0.5, Alpha::of(1.0).unwrap()).unwrap();
        // ‖q_n‖ closed form
        for n in 0..4 {
            let q = thorn_q_density(&params, n);
            let expect = 2f64.powf(n as f64 * 1.0 - 1.0 - 4.0);
            assert!(
                (q.value * q.area() - expect).abs() < 1e-12 * expect,
                "n={n}"
            );
        }
        // convolution lower bound at n=0, b=1/2: q₀*q₀ ≥ 2^{-10} on P₀
        let q0 = thorn_q_density(&params, 0);
        let bound = 2f64.powf(-10.0);
        for rect in thorn_p_rects(0) {
            let z = [
                0.5 * (rect.x.0 + rect.x.1),
                0.5 * (rect.y.0 + rect.y.1),
            ];
            assert!(q0.self_convolution(&z) >= bound, "at {z:?}");
        }
    }
}
