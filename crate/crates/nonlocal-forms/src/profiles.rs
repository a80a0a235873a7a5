//! Even profiles on `R^d`: kernel envelopes, auxiliary densities and the
//! integrands fed to the radial quadrature engine.
//!
//! A [`Profile`] is an evaluable nonnegative even function together with
//! tail-decay metadata (used to truncate infinite integrals) and, where the
//! geometry allows it, exact angular structure: either the full integral
//! over a sphere of radius `r`, or the support section of that sphere as a
//! union of arcs. The thorn profile, for instance, resolves its cusp
//! sections by bisection instead of brute-force angular sampling.

use std::sync::Arc;

use crate::geom::{circle_in_ball, circle_in_halfplane, norm, ArcSet, Ball};

/// Tail-decay metadata used for truncating integrals over `R^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    /// Identically zero outside `B(0, radius)`.
    Compact { radius: f64 },
    /// `f(z) ≲ |z|^{-exponent}` for large `|z|`.
    PowerLaw { exponent: f64 },
    /// Faster than any power (Gaussian-type).
    Rapid,
    Unknown,
}

/// Angular support of a profile on the sphere of radius `r` (`d = 2`).
pub enum Arcs {
    Full,
    Set(ArcSet),
}

pub trait Profile: Send + Sync {
    fn dim(&self) -> usize;

    /// Pointwise evaluation; even: `f(z) = f(-z)`.
    fn eval(&self, z: &[f64]) -> f64;

    fn decay(&self) -> Decay;

    fn is_radial(&self) -> bool {
        false
    }

    /// Exact `∫_{S^{d-1}} f(r ω) dσ(ω)` when available
    /// (`d = 1`: `f(r) + f(-r)`).
    fn sphere_integral(&self, _r: f64) -> Option<f64> {
        None
    }

    /// Support section of the sphere of radius `r` as arcs (`d = 2` only).
    /// `Arcs::Full` means no structural information.
    fn support_arcs(&self, _r: f64) -> Arcs {
        Arcs::Full
    }
}

impl Profile for Arc<dyn Profile> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, z: &[f64]) -> f64 {
        (**self).eval(z)
    }
    fn decay(&self) -> Decay {
        (**self).decay()
    }
    fn is_radial(&self) -> bool {
        (**self).is_radial()
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        (**self).sphere_integral(r)
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        (**self).support_arcs(r)
    }
}

/// `coeff · |z|^{-exponent}`, optionally truncated to `B(0, cap)`.
#[derive(Clone, Debug)]
pub struct PowerProfile {
    pub d: usize,
    pub coeff: f64,
    pub exponent: f64,
    pub cap: Option<f64>,
}

impl PowerProfile {
    pub fn new(d: usize, coeff: f64, exponent: f64) -> Self {
        PowerProfile {
            d,
            coeff,
            exponent,
            cap: None,
        }
    }

    pub fn capped(d: usize, coeff: f64, exponent: f64, cap: f64) -> Self {
        PowerProfile {
            d,
            coeff,
            exponent,
            cap: Some(cap),
        }
    }

    pub fn radial(&self, r: f64) -> f64 {
        if let Some(cap) = self.cap {
            if r >= cap {
                return 0.0;
            }
        }
        self.coeff * r.powf(-self.exponent)
    }
}

impl Profile for PowerProfile {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.radial(norm(z))
    }
    fn decay(&self) -> Decay {
        match self.cap {
            Some(radius) => Decay::Compact { radius },
            None => Decay::PowerLaw {
                exponent: self.exponent,
            },
        }
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        Some(crate::geom::sphere_measure(self.d) * self.radial(r))
    }
}

/// The zero profile.
#[derive(Clone, Debug)]
pub struct ZeroProfile {
    pub d: usize,
}

impl Profile for ZeroProfile {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, _z: &[f64]) -> f64 {
        0.0
    }
    fn decay(&self) -> Decay {
        Decay::Compact { radius: 0.0 }
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn sphere_integral(&self, _r: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// Constant value on a union of balls, zero elsewhere.
#[derive(Clone, Debug)]
pub struct BallsIndicator {
    pub d: usize,
    pub balls: Vec<Ball>,
    pub value: f64,
}

impl BallsIndicator {
    /// Symmetric pair `B(±c, r)` with unit value.
    pub fn symmetric_pair(c: Vec<f64>, r: f64) -> Self {
        let d = c.len();
        let neg: Vec<f64> = c.iter().map(|x| -x).collect();
        BallsIndicator {
            d,
            balls: vec![Ball::new(c, r), Ball::new(neg, r)],
            value: 1.0,
        }
    }
}

impl Profile for BallsIndicator {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, z: &[f64]) -> f64 {
        if self.balls.iter().any(|b| b.contains(z)) {
            self.value
        } else {
            0.0
        }
    }
    fn decay(&self) -> Decay {
        let radius = self
            .balls
            .iter()
            .map(|b| norm(&b.center) + b.radius)
            .fold(0.0, f64::max);
        Decay::Compact { radius }
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        match self.d {
            1 => {
                let mut s = 0.0;
                for sign in [-1.0, 1.0] {
                    if self.balls.iter().any(|b| b.contains(&[sign * r])) {
                        s += self.value;
                    }
                }
                Some(s)
            }
            2 => match self.support_arcs(r) {
                Arcs::Set(set) => Some(self.value * set.total_length()),
                Arcs::Full => None,
            },
            _ => None,
        }
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        if self.d != 2 {
            return Arcs::Full;
        }
        let origin = [0.0, 0.0];
        let mut set = ArcSet::empty();
        for b in &self.balls {
            set = set.union(&circle_in_ball(&origin, r, &b.center, b.radius));
        }
        Arcs::Set(set)
    }
}

/// The thorn region `Γ = {|x₂| ≥ |x₁|^b or |x₁| ≥ |x₂|^b}` in `R²`.
///
/// Membership uses exact comparisons; boundary points count as inside.
#[derive(Clone, Copy, Debug)]
pub struct ThornRegion {
    pub b: f64,
}

impl ThornRegion {
    pub fn contains(&self, z: &[f64]) -> bool {
        let x1 = z[0].abs();
        let x2 = z[1].abs();
        x2 >= x1.powf(self.b) || x1 >= x2.powf(self.b)
    }

    /// Largest angle `φ* ∈ [0, π/4]` such that the point at polar angle φ*
    /// and radius `rho` still satisfies `x₁ ≥ x₂^b`. By the dihedral
    /// symmetry of Γ, the full angular section of the circle of radius
    /// `rho < 1` has measure `8 φ*(rho)`.
    ///
    /// The cusp angle shrinks like `ρ^{1/b-1}`, so the bisection runs in
    /// log φ to keep relative precision at every scale.
    pub fn phi_star(&self, rho: f64) -> f64 {
        let quarter = std::f64::consts::FRAC_PI_4;
        let inside = |phi: f64| rho * phi.cos() >= (rho * phi.sin()).powf(self.b);
        if inside(quarter) {
            return quarter;
        }
        let (mut lo, mut hi) = ((1e-320f64).ln(), quarter.ln());
        if !inside(lo.exp()) {
            return 0.0;
        }
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if inside(mid.exp()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// The eight arcs making up the section of the circle of radius `rho`.
    pub fn arcs(&self, rho: f64) -> ArcSet {
        use std::f64::consts::{FRAC_PI_2, PI};
        let phi = self.phi_star(rho);
        if phi <= 0.0 {
            return ArcSet::empty();
        }
        let mut set = ArcSet::empty();
        // arcs around the four half-axes: ±e₁ at angles 0, π; ±e₂ at ±π/2
        for base in [0.0, FRAC_PI_2, PI, -FRAC_PI_2] {
            set = set.union(&ArcSet::centered(base, phi));
        }
        set
    }
}

/// Thorn kernel profile `(2-α) 1_{Γ ∩ B₁}(z) |z|^{-2-β}`, `β = α - 1 + 1/b`.
#[derive(Clone, Debug)]
pub struct ThornProfile {
    pub region: ThornRegion,
    pub alpha: f64,
    pub beta: f64,
}

impl ThornProfile {
    pub fn new(b: f64, alpha: f64) -> Self {
        ThornProfile {
            region: ThornRegion { b },
            alpha,
            beta: alpha - 1.0 + 1.0 / b,
        }
    }
}

impl Profile for ThornProfile {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, z: &[f64]) -> f64 {
        let r = norm(z);
        if r >= 1.0 || !self.region.contains(z) {
            return 0.0;
        }
        (2.0 - self.alpha) * r.powf(-2.0 - self.beta)
    }
    fn decay(&self) -> Decay {
        Decay::Compact { radius: 1.0 }
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        if r >= 1.0 {
            return Some(0.0);
        }
        let phi = self.region.phi_star(r);
        Some((2.0 - self.alpha) * r.powf(-2.0 - self.beta) * 8.0 * phi)
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        if r >= 1.0 {
            Arcs::Set(ArcSet::empty())
        } else {
            Arcs::Set(self.region.arcs(r))
        }
    }
}

/// Axis-aligned rectangle given by per-axis intervals.
#[derive(Clone, Copy, Debug)]
pub struct Rect2 {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect2 {
    pub fn contains(&self, z: &[f64]) -> bool {
        z[0] >= self.x.0 && z[0] <= self.x.1 && z[1] >= self.y.0 && z[1] <= self.y.1
    }

    pub fn area(&self) -> f64 {
        (self.x.1 - self.x.0).max(0.0) * (self.y.1 - self.y.0).max(0.0)
    }

    fn circle_section(&self, rho: f64) -> ArcSet {
        // intersection of four half-planes
        let o = [0.0, 0.0];
        let mut set = circle_in_halfplane(&o, rho, [1.0, 0.0], self.x.1);
        set = set.intersect(&circle_in_halfplane(&o, rho, [-1.0, 0.0], -self.x.0));
        set = set.intersect(&circle_in_halfplane(&o, rho, [0.0, 1.0], self.y.1));
        set.intersect(&circle_in_halfplane(&o, rho, [0.0, -1.0], -self.y.0))
    }
}

/// Constant value on a union of rectangles (e.g. the cross-shaped sets
/// `E_n` of the thorn construction), zero elsewhere.
#[derive(Clone, Debug)]
pub struct RectUnion {
    pub rects: Vec<Rect2>,
    pub value: f64,
}

impl RectUnion {
    pub fn area(&self) -> f64 {
        // rectangles are assumed pairwise disjoint
        self.rects.iter().map(Rect2::area).sum()
    }

    /// Exact convolution `(self * self)(z)` of the indicator-style density:
    /// sum over rectangle pairs of the overlap volume, scaled by `value²`.
    pub fn self_convolution(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in &self.rects {
            for b in &self.rects {
                let ox = overlap(a.x, (z[0] - b.x.1, z[0] - b.x.0));
                if ox <= 0.0 {
                    continue;
                }
                let oy = overlap(a.y, (z[1] - b.y.1, z[1] - b.y.0));
                if oy > 0.0 {
                    acc += ox * oy;
                }
            }
        }
        self.value * self.value * acc
    }
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

impl Profile for RectUnion {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, z: &[f64]) -> f64 {
        if self.rects.iter().any(|r| r.contains(z)) {
            self.value
        } else {
            0.0
        }
    }
    fn decay(&self) -> Decay {
        let radius = self
            .rects
            .iter()
            .map(|r| {
                let cx = r.x.0.abs().max(r.x.1.abs());
                let cy = r.y.0.abs().max(r.y.1.abs());
                (cx * cx + cy * cy).sqrt()
            })
            .fold(0.0, f64::max);
        Decay::Compact { radius }
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        match self.support_arcs(r) {
            Arcs::Set(set) => Some(self.value * set.total_length()),
            Arcs::Full => None,
        }
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        let mut set = ArcSet::empty();
        for rect in &self.rects {
            set = set.union(&rect.circle_section(r));
        }
        Arcs::Set(set)
    }
}

/// Pointwise self-convolution of a rectangle-union density, as a profile.
#[derive(Clone, Debug)]
pub struct RectUnionConvolution {
    pub base: RectUnion,
}

impl Profile for RectUnionConvolution {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.base.self_convolution(z)
    }
    fn decay(&self) -> Decay {
        match self.base.decay() {
            Decay::Compact { radius } => Decay::Compact {
                radius: 2.0 * radius,
            },
            other => other,
        }
    }
}

/// Radial profile tabulated as sorted `(r, value)` pairs with log-linear
/// interpolation. Below the first node the first segment's slope is
/// extrapolated; beyond the last node the profile is zero.
#[derive(Clone, Debug)]
pub struct TableProfile {
    pub d: usize,
    rs: Vec<f64>,
    vs: Vec<f64>,
}

impl TableProfile {
    pub fn new(d: usize, points: &[(f64, f64)]) -> crate::Result<Self> {
        if points.len() < 2 {
            return Err(crate::Error::Invalid(
                "table profile needs at least two points".into(),
            ));
        }
        let mut rs = Vec::with_capacity(points.len());
        let mut vs = Vec::with_capacity(points.len());
        for &(r, v) in points {
            if !(r > 0.0) || !(v >= 0.0) {
                return Err(crate::Error::Invalid(
                    "table points need r > 0 and value >= 0".into(),
                ));
            }
            if let Some(&prev) = rs.last() {
                if r <= prev {
                    return Err(crate::Error::Invalid(
                        "table radii must be strictly increasing".into(),
                    ));
                }
            }
            rs.push(r);
            vs.push(v);
        }
        Ok(TableProfile { d, rs, vs })
    }

    pub fn radial(&self, r: f64) -> f64 {
        let n = self.rs.len();
        if r > self.rs[n - 1] {
            return 0.0;
        }
        let i = match self.rs.partition_point(|&x| x < r) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let (r0, r1) = (self.rs[i], self.rs[i + 1]);
        let (v0, v1) = (self.vs[i], self.vs[i + 1]);
        if v0 <= 0.0 || v1 <= 0.0 {
            // log interpolation undefined; fall back to linear
            let t = (r - r0) / (r1 - r0);
            return (v0 + t * (v1 - v0)).max(0.0);
        }
        let t = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
        (v0.ln() + t * (v1.ln() - v0.ln())).exp()
    }
}

impl Profile for TableProfile {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.radial(norm(z))
    }
    fn decay(&self) -> Decay {
        Decay::Compact {
            radius: *self.rs.last().unwrap(),
        }
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        Some(crate::geom::sphere_measure(self.d) * self.radial(r))
    }
}

/// Even step function on the line: `values[i]` on `[breaks[i], breaks[i+1])`,
/// mirrored to negative arguments, zero beyond the last break.
#[derive(Clone, Debug)]
pub struct StepProfile1d {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepProfile1d {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(breaks.len(), values.len() + 1);
        assert!(breaks[0] >= 0.0);
        StepProfile1d { breaks, values }
    }

    pub fn radial(&self, r: f64) -> f64 {
        if r < self.breaks[0] || r >= *self.breaks.last().unwrap() {
            return 0.0;
        }
        let i = self.breaks.partition_point(|&b| b <= r) - 1;
        self.values[i]
    }

    pub fn l1_norm(&self) -> f64 {
        2.0 * self
            .values
            .iter()
            .zip(self.breaks.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum::<f64>()
    }
}

impl Profile for StepProfile1d {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.radial(z[0].abs())
    }
    fn decay(&self) -> Decay {
        Decay::Compact {
            radius: *self.breaks.last().unwrap(),
        }
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        Some(2.0 * self.radial(r))
    }
}

/// Even piecewise-linear profile on a uniform grid `r = i·h`, used for
/// numerically convolved densities. Zero beyond the last node.
#[derive(Clone, Debug)]
pub struct GridProfile1d {
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridProfile1d {
    pub fn radial(&self, r: f64) -> f64 {
        let t = r / self.h;
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Numerical self-convolution of an even profile on the same grid:
    /// `(f*f)(x) = ∫ f(x-t) f(t) dt`, trapezoid in `t`.
    pub fn self_convolution(f: &dyn Profile, half_width: f64, n: usize) -> GridProfile1d {
        let h = half_width / n as f64;
        // f supported in [-half_width, half_width] ⇒ f*f in [-2hw, 2hw]
        let m = 2 * n + 1;
        let mut values = vec![0.0; m + 1];
        for (i, slot) in values.iter_mut().enumerate().take(m) {
            let x = i as f64 * h;
            let mut acc = 0.0;
            // t over [x - hw, hw]
            let steps = 4 * n;
            let t0 = x - half_width;
            let t1 = half_width;
            if t1 <= t0 {
                continue;
            }
            let dt = (t1 - t0) / steps as f64;
            for j in 0..=steps {
                let t = t0 + j as f64 * dt;
                let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
                acc += w * f.eval(&[x - t]) * f.eval(&[t]);
            }
            *slot = acc * dt;
        }
        GridProfile1d { h, values }
    }
}

impl Profile for GridProfile1d {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.radial(z[0].abs())
    }
    fn decay(&self) -> Decay {
        Decay::Compact {
            radius: self.h * (self.values.len() - 1) as f64,
        }
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        Some(2.0 * self.radial(r))
    }
}

/// `factor · inner(z)`.
#[derive(Clone)]
pub struct ScaledProfile {
    pub inner: Arc<dyn Profile>,
    pub factor: f64,
}

impl Profile for ScaledProfile {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.factor * self.inner.eval(z)
    }
    fn decay(&self) -> Decay {
        self.inner.decay()
    }
    fn is_radial(&self) -> bool {
        self.inner.is_radial()
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        self.inner.sphere_integral(r).map(|v| self.factor * v)
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        self.inner.support_arcs(r)
    }
}

/// Pointwise sum of profiles.
#[derive(Clone)]
pub struct SumProfile {
    pub parts: Vec<Arc<dyn Profile>>,
}

impl Profile for SumProfile {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.eval(z)).sum()
    }
    fn decay(&self) -> Decay {
        let mut compact_r: f64 = 0.0;
        let mut worst_exp = f64::INFINITY;
        let mut all_compact = true;
        for p in &self.parts {
            match p.decay() {
                Decay::Compact { radius } => compact_r = compact_r.max(radius),
                Decay::PowerLaw { exponent } => {
                    all_compact = false;
                    worst_exp = worst_exp.min(exponent);
                }
                Decay::Rapid => all_compact = false,
                Decay::Unknown => return Decay::Unknown,
            }
        }
        if all_compact {
            Decay::Compact { radius: compact_r }
        } else if worst_exp.is_finite() {
            Decay::PowerLaw {
                exponent: worst_exp,
            }
        } else {
            Decay::Rapid
        }
    }
    fn is_radial(&self) -> bool {
        self.parts.iter().all(|p| p.is_radial())
    }
    fn sphere_integral(&self, r: f64) -> Option<f64> {
        let mut acc = 0.0;
        for p in &self.parts {
            acc += p.sphere_integral(r)?;
        }
        Some(acc)
    }
    fn support_arcs(&self, r: f64) -> Arcs {
        let mut set = ArcSet::empty();
        for p in &self.parts {
            match p.support_arcs(r) {
                Arcs::Full => return Arcs::Full,
                Arcs::Set(s) => set = set.union(&s),
            }
        }
        Arcs::Set(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thorn_region_membership() {
        let g = ThornRegion { b: 0.5 };
        assert!(g.contains(&[0.5, 0.1])); // 0.5 >= sqrt(0.1)
        assert!(!g.contains(&[0.3, 0.3])); // 0.3 < sqrt(0.3) both ways
        assert!(g.contains(&[0.1, 0.5]));
        assert!(g.contains(&[-0.5, -0.1]));
    }

    #[test]
    fn thorn_profile_values() {
        let p = ThornProfile::new(0.5, 1.0); // beta = 2
        let v = p.eval(&[0.5, 0.1]);
        let expect = 1.0 * 0.26f64.powi(-2); // (2-α)=1, |z|² = 0.26
        assert!((v - expect).abs() / expect < 1e-12, "{v} vs {expect}");
        assert_eq!(p.eval(&[0.3, 0.3]), 0.0);
        assert_eq!(p.eval(&[0.9, 0.9]), 0.0); // |z| > 1
    }

    #[test]
    fn thorn_arcs_match_pointwise() {
        let p = ThornProfile::new(0.5, 1.2);
        for &rho in &[0.9, 0.3, 0.05, 2.0_f64.powi(-8)] {
            let exact = p.sphere_integral(rho).unwrap();
            // brute-force angular integral
            let n = 400_000;
            let mut acc = 0.0;
            for i in 0..n {
                let phi = (i as f64 + 0.5) / n as f64 * std::f64::consts::TAU;
                acc += p.eval(&[rho * phi.cos(), rho * phi.sin()]);
            }
            acc *= std::f64::consts::TAU / n as f64;
            let rel = (acc - exact).abs() / exact.max(1e-300);
            // the brute-force reference mislocates each of the 8 arc edges
            // by up to half a sample, so grant it that much slack
            let sample = std::f64::consts::TAU / n as f64;
            let tol = 2e-4 + 4.0 * sample / (8.0 * p.region.phi_star(rho));
            assert!(rel < tol, "rho={rho}: exact {exact} vs brute {acc}");
        }
    }

    #[test]
    fn rect_union_convolution_matches_grid() {
        // square [-1,1]²: conv at 0 is the area 4, at (2,0) it is 0
        let sq = RectUnion {
            rects: vec![Rect2 {
                x: (-1.0, 1.0),
                y: (-1.0, 1.0),
            }],
            value: 1.0,
        };
        assert!((sq.self_convolution(&[0.0, 0.0]) - 4.0).abs() < 1e-12);
        assert!((sq.self_convolution(&[1.0, 0.0]) - 2.0).abs() < 1e-12);
        assert_eq!(sq.self_convolution(&[2.5, 0.0]), 0.0);
    }

    #[test]
    fn table_profile_loglinear() {
        let t = TableProfile::new(1, &[(0.1, 100.0), (1.0, 1.0), (10.0, 0.01)]).unwrap();
        // exact power law |z|^{-2} through those nodes
        assert!((t.radial(0.5) - 4.0).abs() < 1e-10);
        assert!((t.radial(3.0) - 1.0 / 9.0).abs() < 1e-10);
        assert_eq!(t.radial(20.0), 0.0);
    }

    #[test]
    fn step_profile_l1() {
        let q = StepProfile1d::new(vec![0.0, 0.5, 1.0], vec![2.0, 1.0]);
        assert!((q.l1_norm() - 3.0).abs() < 1e-12);
        assert_eq!(q.radial(0.25), 2.0);
        assert_eq!(q.radial(0.75), 1.0);
        assert_eq!(q.radial(1.5), 0.0);
    }
}
