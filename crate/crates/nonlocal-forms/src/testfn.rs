//! Test functions fed to the quadratic forms: polynomial bumps, Gaussians,
//! bump-windowed Fourier mixtures and radial cutoff ramps.
//!
//! Smoothness is C^{1,1} (polynomial ramps), which every integral in the
//! crate tolerates; each function carries a Lipschitz bound for the
//! diagonal control of the double integrals, and — in d = 1 — a closed-form
//! spectral density `|û(ξ)|²` where the family provides one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{dist, Ball};
use crate::quadrature::FormFunction;

#[derive(Clone, Debug)]
pub enum Support {
    Ball(Ball),
    Global { effective_radius: f64 },
}

impl Support {
    /// Radius beyond which the function is (numerically) negligible.
    pub fn effective_radius(&self) -> f64 {
        match self {
            Support::Ball(b) => crate::geom::norm(&b.center) + b.radius,
            Support::Global { effective_radius } => *effective_radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyTag {
    Bump,
    PolynomialBump,
    FourierMixture,
    Cutoff,
    Gaussian,
    Custom,
}

/// An evaluable test function with support metadata and a Lipschitz bound.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    pub d: usize,
    pub support: Support,
    pub lipschitz: f64,
    pub tag: FamilyTag,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// `|û(ξ)|²` for d = 1 functions with a known transform
    /// (Fourier convention `û(ξ) = (2π)^{-1/2} ∫ u e^{-iξx} dx`).
    spectral_density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl FormFunction for TestFunction {
    fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl TestFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn spectral_density(&self, xi: f64) -> Option<f64> {
        self.spectral_density.as_ref().map(|f| f(xi))
    }

    pub fn has_spectral_density(&self) -> bool {
        self.spectral_density.is_some()
    }

    /// `λ·u` (spectral density scales by λ²).
    pub fn scaled(&self, lambda: f64) -> TestFunction {
        let inner = self.eval.clone();
        let density = self.spectral_density.clone().map(|f| {
            let l2 = lambda * lambda;
            Arc::new(move |xi: f64| l2 * f(xi)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>
        });
        TestFunction {
            id: format!("{}*{lambda}", self.id),
            d: self.d,
            support: self.support.clone(),
            lipschitz: self.lipschitz * lambda.abs(),
            tag: self.tag,
            eval: Arc::new(move |x| lambda * inner(x)),
            spectral_density: density,
        }
    }

    /// `u + c` (forms are invariant; spectral density is dropped).
    pub fn shifted_by_constant(&self, c: f64) -> TestFunction {
        let inner = self.eval.clone();
        TestFunction {
            id: format!("{}+{c}", self.id),
            d: self.d,
            support: Support::Global {
                effective_radius: f64::INFINITY,
            },
            lipschitz: self.lipschitz,
            tag: FamilyTag::Custom,
            eval: Arc::new(move |x| inner(x) + c),
            spectral_density: None,
        }
    }

    pub fn custom(
        id: &str,
        d: usize,
        support: Support,
        lipschitz: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> TestFunction {
        TestFunction {
            id: id.to_string(),
            d,
            support,
            lipschitz,
            tag: FamilyTag::Custom,
            eval: Arc::new(eval),
            spectral_density: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomial bumps
// ---------------------------------------------------------------------------

/// Closed-form `∫_{-1}^{1} (1-t²)^m cos(s t) dt` for m = 1, 2, 3, with a
/// Taylor switch near s = 0 against cancellation.
pub fn bump_cos_transform(m: usize, s: f64) -> f64 {
    let s = s.abs();
    if s < 0.5 {
        let s2 = s * s;
        // coefficients frozen from the series expansions of the closed forms
        let c: [f64; 5] = match m {
            1 => [
                4.0 / 3.0,
                -2.0 / 15.0,
                1.0 / 210.0,
                -1.0 / 11340.0,
                1.0 / 997920.0,
            ],
            2 => [
                16.0 / 15.0,
                -8.0 / 105.0,
                2.0 / 945.0,
                -1.0 / 31185.0,
                1.0 / 3243240.0,
            ],
            3 => [
                32.0 / 35.0,
                -16.0 / 315.0,
                4.0 / 3465.0,
                -2.0 / 135135.0,
                1.0 / 8108100.0,
            ],
            _ => panic!("bump transform implemented for m in 1..=3"),
        };
        return c[0] + s2 * (c[1] + s2 * (c[2] + s2 * (c[3] + s2 * c[4])));
    }
    let (sin, cos) = s.sin_cos();
    match m {
        1 => 4.0 * (sin - s * cos) / s.powi(3),
        2 => 16.0 * (3.0 * sin - 3.0 * s * cos - s * s * sin) / s.powi(5),
        3 => {
            96.0 * (15.0 * sin - 15.0 * s * cos - 6.0 * s * s * sin + s.powi(3) * cos) / s.powi(7)
        }
        _ => panic!("bump transform implemented for m in 1..=3"),
    }
}

/// `u(x) = (1 - |x-c|²/r²)₊^m`.
pub fn poly_bump(d: usize, center: &[f64], radius: f64, m: usize) -> TestFunction {
    assert!(m >= 1);
    let c: Vec<f64> = center.to_vec();
    let ball = Ball::new(c.clone(), radius);
    let r2 = radius * radius;
    let eval = move |x: &[f64]| {
        let t = 1.0 - x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
        if t <= 0.0 {
            0.0
        } else {
            t.powi(m as i32)
        }
    };
    let density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = if d == 1 && m <= 3 {
        let r = radius;
        Some(Arc::new(move |xi: f64| {
            let f = r * bump_cos_transform(m, r * xi);
            f * f / (2.0 * std::f64::consts::PI)
        }))
    } else {
        None
    };
    TestFunction {
        id: format!("bump-m{m}-r{radius:.3}"),
        d,
        support: Support::Ball(ball),
        lipschitz: 2.0 * m as f64 / radius,
        tag: FamilyTag::PolynomialBump,
        eval: Arc::new(eval),
        spectral_density: density,
    }
}

/// `u(x) = exp(-|x-c|²/(2σ²))`.
pub fn gaussian(d: usize, center: &[f64], sigma: f64) -> TestFunction {
    let c: Vec<f64> = center.to_vec();
    let s2 = 2.0 * sigma * sigma;
    let eval = move |x: &[f64]| {
        let q = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        (-q / s2).exp()
    };
    let density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = if d == 1 {
        let s = sigma;
        Some(Arc::new(move |xi: f64| s * s * (-s * s * xi * xi).exp()))
    } else {
        None
    };
    TestFunction {
        id: format!("gauss-s{sigma:.3}"),
        d,
        support: Support::Global {
            effective_radius: crate::geom::norm(center) + 10.0 * sigma,
        },
        lipschitz: 1.0 / sigma,
        tag: FamilyTag::Gaussian,
        eval: Arc::new(eval),
        spectral_density: density,
    }
}

/// Bump-windowed cosine mixture
/// `u(x) = (1-|x-c|²/r²)₊^m · Σ_j a_j cos(ω_j·(x-c))`.
pub fn fourier_mixture(
    d: usize,
    center: &[f64],
    radius: f64,
    m: usize,
    modes: &[(f64, Vec<f64>)],
) -> TestFunction {
    let c: Vec<f64> = center.to_vec();
    let ball = Ball::new(c.clone(), radius);
    let r2 = radius * radius;
    let modes_owned: Vec<(f64, Vec<f64>)> = modes.to_vec();
    let modes_eval = modes_owned.clone();
    let cc = c.clone();
    let eval = move |x: &[f64]| {
        let q: f64 = x.iter().zip(&cc).map(|(a, b)| (a - b) * (a - b)).sum();
        let t = 1.0 - q / r2;
        if t <= 0.0 {
            return 0.0;
        }
        let mut osc = 0.0;
        for (a, w) in &modes_eval {
            let phase: f64 = x.iter().zip(&cc).zip(w).map(|((xi, ci), wi)| (xi - ci) * wi).sum();
            osc += a * phase.cos();
        }
        t.powi(m as i32) * osc
    };
    let amp_sum: f64 = modes_owned.iter().map(|(a, _)| a.abs()).sum();
    let max_omega = modes_owned
        .iter()
        .map(|(_, w)| crate::geom::norm(w))
        .fold(0.0, f64::max);
    let lip = 2.0 * m as f64 / radius * amp_sum + amp_sum * max_omega;
    // d = 1 window transform: v̂(ξ) = Σ (a_j/2)(B̂(ξ-ω_j) + B̂(ξ+ω_j)), real even
    let density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = if d == 1 && m <= 3 {
        let r = radius;
        let md: Vec<(f64, f64)> = modes_owned.iter().map(|(a, w)| (*a, w[0])).collect();
        Some(Arc::new(move |xi: f64| {
            let bhat = |s: f64| r * bump_cos_transform(m, r * s);
            let mut v = 0.0;
            for &(a, w) in &md {
                v += 0.5 * a * (bhat(xi - w) + bhat(xi + w));
            }
            v * v / (2.0 * std::f64::consts::PI)
        }))
    } else {
        None
    };
    TestFunction {
        id: format!("mix-m{m}-k{}", modes_owned.len()),
        d,
        support: Support::Ball(ball),
        lipschitz: lip,
        tag: FamilyTag::FourierMixture,
        eval: Arc::new(eval),
        spectral_density: density,
    }
}

/// Radial cutoff ramp: 1 on `B_R`, 0 outside `B_{R+ρ}`, smoothstep in
/// between; `|τ(x)-τ(y)| ≤ (3/2)ρ^{-1}|x-y| ≤ 2ρ^{-1}|x-y|`.
pub fn cutoff(d: usize, big_r: f64, rho: f64) -> TestFunction {
    let eval = move |x: &[f64]| {
        let t = (crate::geom::norm(x) - big_r) / rho;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    };
    TestFunction {
        id: format!("cutoff-R{big_r:.3}-rho{rho:.4}"),
        d,
        support: Support::Ball(Ball::origin(d, big_r + rho)),
        lipschitz: 1.5 / rho,
        tag: FamilyTag::Cutoff,
        eval: Arc::new(eval),
        spectral_density: None,
    }
}

/// Seeded family of bumps and mixtures compactly supported inside `ball`,
/// for comparability scans.
pub fn bump_family(ball: &Ball, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ball.dim();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        // center uniform in the inner half of the ball
        let center: Vec<f64> = loop {
            let c: Vec<f64> = (0..d)
                .map(|_| rng.gen_range(-0.5..0.5) * ball.radius)
                .collect();
            let shifted: Vec<f64> = c.iter().zip(&ball.center).map(|(a, b)| a + b).collect();
            if dist(&shifted, &ball.center) < 0.55 * ball.radius {
                break shifted;
            }
        };
        let room = ball.radius - dist(&center, &ball.center);
        let radius = room * rng.gen_range(0.35..0.85);
        let m = 1 + i % 3;
        let mut f = if i % 4 == 3 {
            let omega_mag = rng.gen_range(2.0..6.0) / radius;
            let dir: Vec<f64> = if d == 1 {
                vec![1.0]
            } else {
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                vec![phi.cos(), phi.sin()]
            };
            let w1: Vec<f64> = dir.iter().map(|v| v * omega_mag).collect();
            let w2: Vec<f64> = dir.iter().map(|v| -0.5 * v * omega_mag).collect();
            fourier_mixture(d, &center, radius, 2, &[(1.0, w1), (0.4, w2)])
        } else {
            poly_bump(d, &center, radius, m)
        };
        f.id = format!("{}#{}", f.id, i);
        out.push(f);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_basics() {
        let u = poly_bump(1, &[0.0], 0.5, 2);
        assert_eq!(u.value(&[0.0]), 1.0);
        assert_eq!(u.value(&[0.6]), 0.0);
        let v = u.value(&[0.25]);
        assert!((v - 0.5625).abs() < 1e-15); // (1 - 0.25)² = 0.75²
    }

    #[test]
    fn bump_transform_matches_quadrature() {
        // compare the closed form against direct cosine quadrature
        for m in 1..=3 {
            for &s in &[0.0, 0.3, 0.49, 0.51, 1.0, 4.0, 20.0] {
                let n = 200_000;
                let mut acc = 0.0;
                for i in 0..n {
                    let t = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                    acc += (1.0 - t * t).powi(m as i32) * (s * t).cos();
                }
                acc *= 2.0 / n as f64;
                let cf = bump_cos_transform(m, s);
                assert!(
                    (acc - cf).abs() < 1e-6,
                    "m={m} s={s}: quad {acc} vs closed {cf}"
                );
            }
        }
    }

    #[test]
    fn lipschitz_bounds_hold_on_samples() {
        let fns = vec![
            poly_bump(1, &[0.1], 0.4, 3),
            gaussian(1, &[0.0], 0.7),
            fourier_mixture(1, &[0.0], 0.5, 2, &[(1.0, vec![7.0]), (0.4, vec![-3.0])]),
            cutoff(1, 0.5, 0.25),
        ];
        for f in &fns {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
            for _ in 0..2000 {
                let x = rng.gen_range(-1.2..1.2);
                let y = x + rng.gen_range(-0.05..0.05);
                let df = (f.value(&[x]) - f.value(&[y])).abs();
                assert!(
                    df <= f.lipschitz * (x - y).abs() + 1e-12,
                    "{}: |Δu| = {df} at x={x}, y={y}",
                    f.id
                );
            }
        }
    }

    #[test]
    fn cutoff_ramp_shape() {
        let tau = cutoff(2, 0.5, 0.25);
        assert_eq!(tau.value(&[0.3, 0.2]), 1.0);
        assert_eq!(tau.value(&[0.76, 0.0]), 0.0);
        let v = tau.value(&[0.625, 0.0]);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn family_supports_stay_inside() {
        let ball = Ball::origin(2, 0.25);
        for f in bump_family(&ball, 12, 42) {
            match &f.support {
                Support::Ball(b) => {
                    assert!(dist(&b.center, &ball.center) + b.radius <= ball.radius + 1e-12)
                }
                _ => panic!("family functions must be compactly supported"),
            }
        }
    }
}
