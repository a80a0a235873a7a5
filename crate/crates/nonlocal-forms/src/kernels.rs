//! Jump kernels with declared translation-invariant envelopes, and the
//! built-in families: fractional, masked, thorn and tabulated radial.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use statrs::function::gamma::gamma;

use crate::geom::{circle_in_ball, norm};
use crate::profiles::{Arcs, PowerProfile, Profile, TableProfile, ThornProfile, ZeroProfile};
use crate::{Error, Result};

/// Order parameter `α ∈ (0,2)` together with the family's lower threshold
/// `α₀ ∈ (0, α)`.
#[derive(Clone, Copy, Debug)]
pub struct Alpha {
    pub alpha: f64,
    pub alpha0: f64,
}

impl Alpha {
    pub fn new(alpha: f64, alpha0: f64) -> Result<Self> {
        if !(0.0 < alpha0 && alpha0 < alpha && alpha < 2.0) {
            return Err(Error::Domain(format!(
                "need 0 < alpha0 < alpha < 2, got alpha0={alpha0}, alpha={alpha}"
            )));
        }
        Ok(Alpha { alpha, alpha0 })
    }

    /// Convenience constructor with `α₀ = α/2`.
    pub fn of(alpha: f64) -> Result<Self> {
        Alpha::new(alpha, alpha / 2.0)
    }
}

/// Parameters of the thorn kernel (dimension 2).
#[derive(Clone, Copy, Debug)]
pub struct ThornParams {
    pub b: f64,
    pub alpha: Alpha,
    /// Derived exponent `β = α - 1 + 1/b`.
    pub beta: f64,
}

impl ThornParams {
    pub fn new(b: f64, alpha: Alpha) -> Result<Self> {
        if !(0.0 < b && b < 1.0) {
            return Err(Error::Domain(format!("thorn parameter b={b} not in (0,1)")));
        }
        Ok(ThornParams {
            b,
            alpha,
            beta: alpha.alpha - 1.0 + 1.0 / b,
        })
    }
}

/// Normalizing constant of the fractional reference kernel,
/// `A_{d,-α} = α Γ((d+α)/2) / (2^{1-α} π^{d/2} Γ(1-α/2))`,
/// comparable to `α(2-α)` uniformly on compact α-ranges.
pub fn frac_constant(d: usize, alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha={alpha} not in (0,2)")));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let df = d as f64;
    Ok(alpha * gamma((df + alpha) / 2.0)
        / (2f64.powf(1.0 - alpha) * std::f64::consts::PI.powf(df / 2.0) * gamma(1.0 - alpha / 2.0)))
}

enum Kind {
    /// `k(x,y) = p(x-y)` for an even profile `p`.
    TranslationInvariant(Arc<dyn Profile>),
    /// `k̃(x,y) = base(x,y) · (1{|x| ≤ ratio·|y|} + 1{|y| ≤ ratio·|x|})`.
    Masked { base: Arc<KernelSpec>, ratio: f64 },
    /// Pointwise-evaluable symmetric kernel without further structure.
    Custom(Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>),
}

/// A symmetric jump kernel `k(x,y)` with declared even envelopes
/// `L(x-y) ≤ k(x,y) ≤ U(x-y)`.
///
/// Kernels evaluate lazily as pure functions; they are immutable after
/// construction and safe to share across workers. The diagonal `x = y` is
/// never requested by the quadrature routines.
pub struct KernelSpec {
    pub d: usize,
    pub translation_invariant: bool,
    kind: Kind,
    pub lower: Arc<dyn Profile>,
    pub upper: Arc<dyn Profile>,
}

impl KernelSpec {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            Kind::TranslationInvariant(p) => {
                let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                p.eval(&z)
            }
            Kind::Masked { base, ratio } => {
                let nx = norm(x);
                let ny = norm(y);
                if nx <= ratio * ny || ny <= ratio * nx {
                    base.eval(x, y)
                } else {
                    0.0
                }
            }
            Kind::Custom(f) => f(x, y),
        }
    }

    /// For translation-invariant kernels, the underlying profile.
    pub fn profile(&self) -> Option<&Arc<dyn Profile>> {
        match &self.kind {
            Kind::TranslationInvariant(p) => Some(p),
            _ => None,
        }
    }

    /// Angular section (d = 2) of the circle `{x + ρω}` on which the kernel
    /// can be nonzero; `Arcs::Full` when no structure is available.
    pub fn section(&self, x: &[f64], rho: f64) -> Arcs {
        match &self.kind {
            Kind::TranslationInvariant(p) => p.support_arcs(rho),
            Kind::Masked { base, ratio } => {
                let nx = norm(x);
                // |x + ρω| ≤ ratio·|x| : inside the ball B(0, ratio·|x|)
                let small = circle_in_ball(x, rho, &[0.0, 0.0], ratio * nx);
                // |x| ≤ ratio·|x + ρω| : outside the ball B(0, |x|/ratio)
                let big = circle_in_ball(x, rho, &[0.0, 0.0], nx / ratio).complement();
                let mask = small.union(&big);
                match base.section(x, rho) {
                    Arcs::Full => Arcs::Set(mask),
                    Arcs::Set(s) => Arcs::Set(s.intersect(&mask)),
                }
            }
            Kind::Custom(_) => Arcs::Full,
        }
    }

    /// Kernel from an even profile: `k(x,y) = p(x-y)`, envelopes equal to
    /// the profile itself.
    pub fn from_profile(p: Arc<dyn Profile>) -> KernelSpec {
        KernelSpec {
            d: p.dim(),
            translation_invariant: true,
            lower: p.clone(),
            upper: p.clone(),
            kind: Kind::TranslationInvariant(p),
        }
    }

    /// The zero kernel.
    pub fn zero(d: usize) -> KernelSpec {
        KernelSpec::from_profile(Arc::new(ZeroProfile { d }))
    }

    /// Kernel from an arbitrary symmetric evaluation with declared
    /// envelopes; no structural information beyond pointwise values.
    pub fn custom(
        d: usize,
        eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
        lower: Arc<dyn Profile>,
        upper: Arc<dyn Profile>,
    ) -> KernelSpec {
        KernelSpec {
            d,
            translation_invariant: false,
            lower,
            upper,
            kind: Kind::Custom(eval),
        }
    }
}

/// `k(x,y) = c · A_{d,-α} |x-y|^{-d-α}` with envelopes
/// `c·A_{d,-α}|z|^{-d-α} ≤ k ≤ (A_{d,-α}/c)|z|^{-d-α}` (condition (K) with
/// equality structure at `c = 1`).
pub fn make_fractional_kernel(d: usize, alpha: f64, scale: f64) -> Result<KernelSpec> {
    if !(0.0 < scale && scale <= 1.0) {
        return Err(Error::Domain(format!("scale c={scale} not in (0,1]")));
    }
    let a = frac_constant(d, alpha)?;
    let exponent = d as f64 + alpha;
    let profile = Arc::new(PowerProfile::new(d, scale * a, exponent));
    Ok(KernelSpec {
        d,
        translation_invariant: true,
        lower: Arc::new(PowerProfile::new(d, scale * a, exponent)),
        upper: Arc::new(PowerProfile::new(d, a / scale, exponent)),
        kind: Kind::TranslationInvariant(profile),
    })
}

/// Masked kernel `k̃(x,y) = k(x,y)(1{|x| ≤ 0.1|y|} + 1{|y| ≤ 0.1|x|})`.
///
/// The pointwise lower envelope of the masked kernel is the zero profile:
/// condition checkers needing a nontrivial `L` must be fed an explicit
/// surrogate.
pub fn make_masked_kernel(base: KernelSpec) -> KernelSpec {
    make_masked_kernel_with_ratio(base, 0.1)
}

pub fn make_masked_kernel_with_ratio(base: KernelSpec, ratio: f64) -> KernelSpec {
    let d = base.d;
    let upper = base.upper.clone();
    KernelSpec {
        d,
        translation_invariant: false,
        lower: Arc::new(ZeroProfile { d }),
        upper,
        kind: Kind::Masked {
            base: Arc::new(base),
            ratio,
        },
    }
}

/// Thorn kernel `k(z) = (2-α) 1_{Γ ∩ B₁}(z) |z|^{-2-β}` in `R²`.
pub fn make_thorn_kernel(params: &ThornParams) -> KernelSpec {
    let p = Arc::new(ThornProfile::new(params.b, params.alpha.alpha));
    KernelSpec::from_profile(p)
}

/// Kernel from a tabulated radial profile.
pub fn make_table_kernel(d: usize, points: &[(f64, f64)]) -> Result<KernelSpec> {
    let p = Arc::new(TableProfile::new(d, points)?);
    Ok(KernelSpec::from_profile(p))
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Serialized kernel description:
/// `{"family": "fractional"|"masked"|"thorn"|"table", "d": int,
///   "alpha": float, "params": {...}}`.
#[derive(Debug, Clone, Deserialize)]
pub struct KernelSchema {
    pub family: String,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl KernelSchema {
    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(v.clone()).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn build(&self) -> Result<KernelSpec> {
        let d = self.d.ok_or_else(|| Error::Schema("missing \"d\"".into()))?;
        match self.family.as_str() {
            "fractional" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Schema("fractional kernel needs \"alpha\"".into()))?;
                let scale = self
                    .params
                    .get("scale")
                    .and_then(|v| v.as_f64())
                    .unwrap_or(1.0);
                make_fractional_kernel(d, alpha, scale)
            }
            "masked" => {
                let base_v = self
                    .params
                    .get("base")
                    .ok_or_else(|| Error::Schema("masked kernel needs params.base".into()))?;
                let base = KernelSchema::from_value(base_v)?.build()?;
                let ratio = self
                    .params
                    .get("ratio")
                    .and_then(|v| v.as_f64())
                    .unwrap_or(0.1);
                Ok(make_masked_kernel_with_ratio(base, ratio))
            }
            "thorn" => {
                if d != 2 {
                    return Err(Error::Schema("thorn kernel requires d = 2".into()));
                }
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Schema("thorn kernel needs \"alpha\"".into()))?;
                let b = self
                    .params
                    .get("b")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| Error::Schema("thorn kernel needs params.b".into()))?;
                let params = ThornParams::new(b, Alpha::of(alpha)?)?;
                Ok(make_thorn_kernel(&params))
            }
            "table" => {
                let pts = self
                    .params
                    .get("points")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| Error::Schema("table kernel needs params.points".into()))?;
                let mut points = Vec::with_capacity(pts.len());
                for p in pts {
                    let pair = p
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| Error::Schema("table point must be [r, value]".into()))?;
                    points.push((
                        pair[0].as_f64().ok_or_else(|| Error::Schema("bad r".into()))?,
                        pair[1]
                            .as_f64()
                            .ok_or_else(|| Error::Schema("bad value".into()))?,
                    ));
                }
                make_table_kernel(d, &points)
            }
            other => Err(Error::Schema(format!("unknown kernel family \"{other}\""))),
        }
    }
}

// ---------------------------------------------------------------------------
// Randomized audits
// ---------------------------------------------------------------------------

/// Randomized symmetry and envelope audit on pairs sampled from
/// `[-box_half, box_half]^d` (diagonal excluded).
pub struct KernelAudit {
    pub max_asymmetry: f64,
    pub envelope_violations: usize,
    pub pairs: usize,
}

pub fn audit_kernel(k: &KernelSpec, seed: u64, pairs: usize, box_half: f64) -> KernelAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = k.d;
    let mut max_asym: f64 = 0.0;
    let mut violations = 0usize;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-box_half..box_half)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-box_half..box_half)).collect();
        if x == y {
            continue;
        }
        let kxy = k.eval(&x, &y);
        let kyx = k.eval(&y, &x);
        max_asym = max_asym.max((kxy - kyx).abs());
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let lo = k.lower.eval(&z);
        let hi = k.upper.eval(&z);
        let slack = 1e-12 * hi.max(1.0);
        if kxy + slack < lo || kxy > hi + slack {
            violations += 1;
        }
    }
    KernelAudit {
        max_asymmetry: max_asym,
        envelope_violations: violations,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_constant_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((frac_constant(1, 1.0).unwrap() - 1.0 / pi).abs() < 1e-14);
        assert!((frac_constant(2, 1.0).unwrap() - 1.0 / (2.0 * pi)).abs() < 1e-14);
        assert!(frac_constant(1, 2.0).is_err());
        assert!(frac_constant(1, 0.0).is_err());
        // A_{d,-α} ≍ α(2-α): sampled ratios stay in a fixed bracket
        for d in 1..=3 {
            for &a in &[0.5, 1.0, 1.5, 1.9] {
                let ratio = frac_constant(d, a).unwrap() / (a * (2.0 - a));
                assert!(
                    (0.05..=20.0).contains(&ratio),
                    "d={d} a={a}: ratio {ratio}"
                );
            }
        }
        // prefactor α forces A → 0 linearly as α → 0⁺
        let tiny = frac_constant(1, 1e-8).unwrap();
        assert!(tiny < 1e-7 && tiny > 0.0);
    }

    #[test]
    fn fractional_kernel_values() {
        let k = make_fractional_kernel(1, 1.0, 1.0).unwrap();
        let v = k.eval(&[0.0], &[2.0]);
        let expect = 1.0 / (4.0 * std::f64::consts::PI); // (1/π)·2^{-2}
        assert!((v - expect).abs() < 1e-15);
        assert!(make_fractional_kernel(1, 1.0, 0.0).is_err());
        assert!(make_fractional_kernel(1, 1.0, 1.5).is_err());
    }

    #[test]
    fn masked_kernel_indicator() {
        let base = make_fractional_kernel(2, 1.0, 1.0).unwrap();
        let m = make_masked_kernel(base);
        // second indicator active: |y| = 0.05 ≤ 0.1·|x| = 0.1
        let x = [1.0, 0.0];
        let y = [0.05, 0.0];
        let base_k = make_fractional_kernel(2, 1.0, 1.0).unwrap();
        assert_eq!(m.eval(&x, &y), base_k.eval(&x, &y));
        // both indicators fail
        assert_eq!(m.eval(&[1.0, 0.0], &[0.5, 0.0]), 0.0);
        // mask is symmetric
        assert_eq!(m.eval(&y, &x), m.eval(&x, &y));
    }

    #[test]
    fn thorn_kernel_region() {
        let p = ThornParams::new(0.5, Alpha::of(1.0).unwrap()).unwrap();
        assert!((p.beta - 2.0).abs() < 1e-15);
        let k = make_thorn_kernel(&p);
        let v = k.eval(&[0.5, 0.1], &[0.0, 0.0]);
        assert!((v - 0.26f64.powi(-2)).abs() / v < 1e-12);
        assert_eq!(k.eval(&[0.3, 0.3], &[0.0, 0.0]), 0.0);
        assert_eq!(k.eval(&[1.2, 0.0], &[0.0, 0.0]), 0.0);
        assert!(ThornParams::new(1.0, Alpha::of(1.0).unwrap()).is_err());
    }

    #[test]
    fn symmetry_and_envelope_audits() {
        for k in [
            make_fractional_kernel(1, 1.3, 0.7).unwrap(),
            make_fractional_kernel(2, 0.8, 1.0).unwrap(),
            make_thorn_kernel(&ThornParams::new(0.5, Alpha::of(1.5).unwrap()).unwrap()),
            make_masked_kernel(make_fractional_kernel(2, 1.0, 1.0).unwrap()),
        ] {
            let audit = audit_kernel(&k, 7, 1000, 2.0);
            assert_eq!(audit.max_asymmetry, 0.0);
            assert_eq!(audit.envelope_violations, 0);
        }
    }

    #[test]
    fn schema_round_trip() {
        let v: serde_json::Value = serde_json::from_str(
            r#"{"family":"thorn","d":2,"alpha":1.5,"params":{"b":0.5}}"#,
        )
        .unwrap();
        let k = KernelSchema::from_value(&v).unwrap().build().unwrap();
        assert_eq!(k.d, 2);
        let bad: serde_json::Value = serde_json::from_str(r#"{"family":"nope","d":1}"#).unwrap();
        assert!(KernelSchema::from_value(&bad).unwrap().build().is_err());
        let table: serde_json::Value = serde_json::from_str(
            r#"{"family":"table","d":1,"params":{"points":[[0.1,100.0],[1.0,1.0],[10.0,0.01]]}}"#,
        )
        .unwrap();
        let tk = KernelSchema::from_value(&table).unwrap().build().unwrap();
        assert!((tk.eval(&[0.0], &[0.5]) - 4.0).abs() < 1e-9);
    }
}
