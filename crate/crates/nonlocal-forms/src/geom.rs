//! Euclidean balls, sphere measures and circle-arc bookkeeping.
//!
//! The quadrature engines decompose integrals over `R^d` into spherical
//! shells. For `d = 2` the angular part of a shell is a union of arcs
//! (kernel support sections, ball clips, box clips); [`ArcSet`] keeps
//! those as normalized interval lists on `[0, 2π)`.

use serde::Serialize;

/// Euclidean ball `B(x, r)`.
#[derive(Clone, Debug, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    /// Ball centered at the origin of `R^d`.
    pub fn origin(d: usize, radius: f64) -> Self {
        Ball::new(vec![0.0; d], radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.dim(), self.radius)
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Surface measure of the unit sphere `S^{d-1}` (counting measure for d=1).
pub fn sphere_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("sphere_measure: unsupported dimension {d}"),
    }
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => panic!("ball_volume: unsupported dimension {d}"),
    }
}

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// A set of angle intervals on the circle, normalized to `[0, 2π)` and
/// kept sorted and disjoint. Arcs crossing `2π` are split on insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcSet {
    /// Sorted, disjoint `(start, end)` with `0 <= start < end <= 2π`.
    arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn empty() -> Self {
        ArcSet { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        ArcSet {
            arcs: vec![(0.0, TAU)],
        }
    }

    /// Arc centered at `mid` with half-width `half` (radians).
    pub fn centered(mid: f64, half: f64) -> Self {
        if half <= 0.0 {
            return ArcSet::empty();
        }
        if half >= std::f64::consts::PI {
            return ArcSet::full();
        }
        let mut s = ArcSet::empty();
        s.insert(mid - half, mid + half);
        s
    }

    /// Insert a raw interval, wrapping modulo 2π.
    pub fn insert(&mut self, start: f64, end: f64) {
        if end <= start {
            return;
        }
        if end - start >= TAU {
            self.arcs = vec![(0.0, TAU)];
            return;
        }
        let a = start.rem_euclid(TAU);
        let b = a + (end - start);
        if b <= TAU {
            self.push_interval(a, b);
        } else {
            self.push_interval(a, TAU);
            self.push_interval(0.0, b - TAU);
        }
        self.normalize();
    }

    fn push_interval(&mut self, a: f64, b: f64) {
        if b > a {
            self.arcs.push((a, b));
        }
    }

    fn normalize(&mut self) {
        self.arcs
            .sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.arcs.len());
        for &(a, b) in &self.arcs {
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1e-15 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        self.arcs = merged;
    }

    pub fn complement(&self) -> ArcSet {
        let mut out = ArcSet::empty();
        let mut cursor = 0.0;
        for &(a, b) in &self.arcs {
            if a > cursor {
                out.arcs.push((cursor, a));
            }
            cursor = cursor.max(b);
        }
        if cursor < TAU {
            out.arcs.push((cursor, TAU));
        }
        out
    }

    pub fn intersect(&self, other: &ArcSet) -> ArcSet {
        let mut out = ArcSet::empty();
        for &(a, b) in &self.arcs {
            for &(c, d) in &other.arcs {
                let lo = a.max(c);
                let hi = b.min(d);
                if hi > lo {
                    out.arcs.push((lo, hi));
                }
            }
        }
        out.normalize();
        out
    }

    pub fn union(&self, other: &ArcSet) -> ArcSet {
        let mut out = self.clone();
        out.arcs.extend(other.arcs.iter().copied());
        out.normalize();
        out
    }

    pub fn total_length(&self) -> f64 {
        self.arcs.iter().map(|&(a, b)| b - a).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.arcs
    }
}

/// Angular section of the circle `{x + ρ ω : ω ∈ S¹}` lying inside the
/// ball `B(c, R)`: the set of angles φ with `|x + ρ(cos φ, sin φ) - c| < R`.
pub fn circle_in_ball(x: &[f64], rho: f64, center: &[f64], radius: f64) -> ArcSet {
    debug_assert_eq!(x.len(), 2);
    let dx = center[0] - x[0];
    let dy = center[1] - x[1];
    let delta = (dx * dx + dy * dy).sqrt();
    if delta == 0.0 {
        return if rho < radius {
            ArcSet::full()
        } else {
            ArcSet::empty()
        };
    }
    // |x + ρω - c|² = δ² + ρ² - 2ρδ cos θ, θ the angle between ω and c - x.
    let t = (delta * delta + rho * rho - radius * radius) / (2.0 * rho * delta);
    if t <= -1.0 {
        return ArcSet::full();
    }
    if t >= 1.0 {
        return ArcSet::empty();
    }
    let base = dy.atan2(dx);
    ArcSet::centered(base, t.acos())
}

/// Angular section of the circle around `x` lying inside the half-plane
/// `{ y : y·n <= b }` with `|n| = 1`.
pub fn circle_in_halfplane(x: &[f64], rho: f64, n: [f64; 2], b: f64) -> ArcSet {
    // x·n + ρ cos(φ - base) <= b, base the angle of n.
    let s = x[0] * n[0] + x[1] * n[1];
    let t = (b - s) / rho;
    if t >= 1.0 {
        return ArcSet::full();
    }
    if t <= -1.0 {
        return ArcSet::empty();
    }
    let base = n[1].atan2(n[0]);
    // cos(θ) <= t  ⇔  θ ∈ [acos t, 2π - acos t] around base.
    ArcSet::centered(base + std::f64::consts::PI, std::f64::consts::PI - t.acos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcset_ops() {
        let a = ArcSet::centered(0.0, 1.0);
        assert!((a.total_length() - 2.0).abs() < 1e-12);
        let c = a.complement();
        assert!((c.total_length() - (TAU - 2.0)).abs() < 1e-12);
        let i = a.intersect(&ArcSet::centered(0.5, 1.0));
        assert!((i.total_length() - 1.5).abs() < 1e-12);
        let u = a.union(&ArcSet::centered(3.0, 0.5));
        assert!((u.total_length() - 3.0).abs() < 1e-12);
        assert!(ArcSet::full().complement().is_empty());
    }

    #[test]
    fn arcs_wrap() {
        // arc crossing the 2π seam
        let a = ArcSet::centered(0.1, 0.5);
        assert!((a.total_length() - 1.0).abs() < 1e-12);
        assert_eq!(a.intervals().len(), 2);
    }

    #[test]
    fn circle_ball_section() {
        // circle of radius 1 around origin vs ball B((1,0), 1): third of the
        // circle is inside (cos θ > 1/2  ⇔  |θ| < π/3).
        let arcs = circle_in_ball(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        assert!((arcs.total_length() - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        // fully inside
        assert!((circle_in_ball(&[0.0, 0.0], 0.5, &[0.0, 0.0], 1.0).total_length() - TAU).abs() < 1e-12);
        // fully outside
        assert!(circle_in_ball(&[5.0, 0.0], 0.5, &[0.0, 0.0], 1.0).is_empty());
    }

    #[test]
    fn circle_halfplane_section() {
        // half-plane y1 <= 0 cuts a circle around the origin exactly in half
        let arcs = circle_in_halfplane(&[0.0, 0.0], 1.0, [1.0, 0.0], 0.0);
        assert!((arcs.total_length() - std::f64::consts::PI).abs() < 1e-9);
    }
}
