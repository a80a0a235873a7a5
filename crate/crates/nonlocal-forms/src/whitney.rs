//! Whitney ball covers of a ball: a family of balls whose η-dilates stay
//! inside the domain, with bounded overlap and a pair-covering constant.
//!
//! The cover is built from a Whitney decomposition into dyadic cubes
//! (cube diameter at most the distance to the complement), each cube
//! carrying a small stencil of balls. A finite family cannot pair-cover
//! arbitrarily close to the boundary; the construction records its
//! smallest resolved cube side and probes respect that scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geom::{dist, Ball};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct WhitneyCover {
    pub eta: f64,
    pub balls: Vec<Ball>,
    pub parent: Ball,
    /// Pair-covering constant achieved by the construction: any x, y in
    /// the resolved region with `|x-y| < c·dist(x, D^c)` share a ball.
    pub pair_constant: f64,
    /// Maximum number of dilates containing a single probe point.
    pub max_overlap: usize,
    /// Side of the smallest Whitney cube kept.
    pub min_cube_side: f64,
    /// Smallest candidate cube side at the recursion depth limit; pair
    /// covering is only guaranteed a few multiples away from the boundary.
    pub truncation_side: f64,
}

impl WhitneyCover {
    pub fn dilate(&self, b: &Ball) -> Ball {
        Ball::new(b.center.clone(), b.radius / self.eta)
    }
}

struct Cube {
    center: Vec<f64>,
    side: f64,
}

impl Cube {
    fn half_diag(&self) -> f64 {
        0.5 * self.side * (self.center.len() as f64).sqrt()
    }

    /// Distance from the farthest cube corner to the domain center.
    fn far_corner_dist(&self, x0: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x0)
            .map(|(c, o)| ((c - o).abs() + 0.5 * self.side).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn near_corner_dist(&self, x0: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x0)
            .map(|(c, o)| ((c - o).abs() - 0.5 * self.side).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

const RADIUS_FACTOR: f64 = 0.75;

/// Build a Whitney ball cover of the ball `dom` with dilation factor
/// `η ∈ (0,1)`.
pub fn whitney_cover(dom: &Ball, eta: f64) -> Result<WhitneyCover> {
    whitney_cover_with_depth(dom, eta, 9)
}

pub fn whitney_cover_with_depth(dom: &Ball, eta: f64, max_depth: usize) -> Result<WhitneyCover> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::Domain(format!("eta={eta} not in (0,1)")));
    }
    let d = dom.dim();
    if d > 3 {
        return Err(Error::Unsupported("whitney covers for d <= 3".into()));
    }
    // stencil fine enough that every stencil cell is covered by its ball
    let stencil = (1.0 / (2.0 * RADIUS_FACTOR * eta)).ceil() as usize;
    let mut cubes: Vec<Cube> = Vec::new();
    let root = Cube {
        center: dom.center.clone(),
        side: 2.0 * dom.radius,
    };
    let mut min_side = root.side;
    let mut stack = vec![(root, 0usize)];
    while let Some((cube, depth)) = stack.pop() {
        if cube.near_corner_dist(&dom.center) >= dom.radius {
            continue; // entirely outside
        }
        let dist_to_complement = dom.radius - cube.far_corner_dist(&dom.center);
        if dist_to_complement >= 2.0 * cube.half_diag() {
            min_side = min_side.min(cube.side);
            cubes.push(cube);
            continue;
        }
        if depth >= max_depth {
            continue; // truncation scale reached
        }
        let s = 0.5 * cube.side;
        let offsets = [-0.25 * cube.side, 0.25 * cube.side];
        match d {
            1 => {
                for ox in offsets {
                    stack.push((
                        Cube {
                            center: vec![cube.center[0] + ox],
                            side: s,
                        },
                        depth + 1,
                    ));
                }
            }
            2 => {
                for ox in offsets {
                    for oy in offsets {
                        stack.push((
                            Cube {
                                center: vec![cube.center[0] + ox, cube.center[1] + oy],
                                side: s,
                            },
                            depth + 1,
                        ));
                    }
                }
            }
            _ => {
                for ox in offsets {
                    for oy in offsets {
                        for oz in offsets {
                            stack.push((
                                Cube {
                                    center: vec![
                                        cube.center[0] + ox,
                                        cube.center[1] + oy,
                                        cube.center[2] + oz,
                                    ],
                                    side: s,
                                },
                                depth + 1,
                            ));
                        }
                    }
                }
            }
        }
    }
    if cubes.is_empty() {
        return Err(Error::Invalid(
            "whitney decomposition produced no cubes; domain too small for the depth".into(),
        ));
    }

    let sqrt_d = (d as f64).sqrt();
    let mut balls = Vec::new();
    for cube in &cubes {
        let r_ball = RADIUS_FACTOR * eta * sqrt_d * cube.side;
        let step = cube.side / stencil as f64;
        let base: Vec<f64> = cube
            .center
            .iter()
            .map(|c| c - 0.5 * cube.side + 0.5 * step)
            .collect();
        let mut idx = vec![0usize; d];
        loop {
            let center: Vec<f64> = base
                .iter()
                .zip(&idx)
                .map(|(b, &i)| b + i as f64 * step)
                .collect();
            balls.push(Ball::new(center, r_ball));
            // odometer
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < stencil {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == d {
                    break;
                }
            }
            if k == d {
                break;
            }
        }
    }

    // pair constant guaranteed by the construction: for x in a cube of
    // side s, dist(x, D^c) < (2√d + √d)s + ... ≤ 5√d·s, and the stencil
    // ball around x absorbs y with |x-y| ≤ r_ball - (cell half-diagonal)
    let pair_constant = (RADIUS_FACTOR * eta - 0.5 / stencil as f64) * sqrt_d
        / (5.0 * sqrt_d);

    // measured overlap of dilates on a probe grid
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_overlap = 0usize;
    for _ in 0..10_000 {
        let p: Vec<f64> = dom
            .center
            .iter()
            .map(|c| c + rng.gen_range(-dom.radius..dom.radius))
            .collect();
        if !dom.contains(&p) {
            continue;
        }
        let count = balls
            .iter()
            .filter(|b| dist(&b.center, &p) < b.radius / eta)
            .count();
        max_overlap = max_overlap.max(count);
    }

    Ok(WhitneyCover {
        eta,
        balls,
        parent: dom.clone(),
        pair_constant,
        max_overlap,
        min_cube_side: min_side,
        truncation_side: 2.0 * dom.radius * 0.5f64.powi(max_depth as i32),
    })
}

/// Exhaustive audit of the cover invariants.
#[derive(Clone, Debug, Serialize)]
pub struct WhitneyAudit {
    pub dilates_inside: bool,
    pub max_overlap: usize,
    pub pair_cover_failures: usize,
    pub pairs_probed: usize,
}

pub fn audit_cover(cover: &WhitneyCover, pairs: usize, seed: u64) -> WhitneyAudit {
    let dom = &cover.parent;
    let d = dom.dim();
    let dilates_inside = cover.balls.iter().all(|b| {
        dist(&b.center, &dom.center) + b.radius / cover.eta <= dom.radius * (1.0 + 1e-12)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut probed = 0usize;
    // pairs are sampled in the resolved region: a finite cover cannot
    // pair-cover arbitrarily close to the boundary
    let floor = 4.0 * (d as f64).sqrt() * cover.truncation_side;
    while probed < pairs {
        let x: Vec<f64> = (0..d)
            .map(|i| dom.center[i] + rng.gen_range(-dom.radius..dom.radius))
            .collect();
        if !dom.contains(&x) {
            continue;
        }
        let dist_boundary = dom.radius - dist(&x, &dom.center);
        if dist_boundary < floor {
            continue;
        }
        let reach = cover.pair_constant * dist_boundary;
        let y: Vec<f64> = x
            .iter()
            .map(|c| c + rng.gen_range(-1.0..1.0) * reach / (d as f64).sqrt())
            .collect();
        if !dom.contains(&y) || dist(&x, &y) >= reach {
            continue;
        }
        probed += 1;
        let covered = cover
            .balls
            .iter()
            .any(|b| dist(&b.center, &x) < b.radius && dist(&b.center, &y) < b.radius);
        if !covered {
            failures += 1;
        }
    }
    WhitneyAudit {
        dilates_inside,
        max_overlap: cover.max_overlap,
        pair_cover_failures: failures,
        pairs_probed: probed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilates_inside_d1() {
        let cover = whitney_cover(&Ball::origin(1, 1.0), 0.5).unwrap();
        let audit = audit_cover(&cover, 1000, 3);
        assert!(audit.dilates_inside);
        assert_eq!(audit.pair_cover_failures, 0);
    }

    #[test]
    fn overlap_bound_d2() {
        let cover = whitney_cover(&Ball::origin(2, 1.0), 0.5).unwrap();
        assert!(
            cover.max_overlap <= 32,
            "overlap {} exceeds 32",
            cover.max_overlap
        );
        assert!(cover.max_overlap >= 1);
    }

    #[test]
    fn pair_cover_d2() {
        for eta in [0.25, 0.5] {
            let cover = whitney_cover(&Ball::origin(2, 1.0), eta).unwrap();
            let audit = audit_cover(&cover, 10_000, 11);
            assert_eq!(
                audit.pair_cover_failures, 0,
                "eta={eta}: {} failures of {}",
                audit.pair_cover_failures, audit.pairs_probed
            );
            assert!(audit.dilates_inside, "eta={eta}");
        }
    }

    #[test]
    fn off_center_domain() {
        let dom = Ball::new(vec![0.3, -0.2], 0.7);
        let cover = whitney_cover(&dom, 0.5).unwrap();
        let audit = audit_cover(&cover, 2000, 5);
        assert!(audit.dilates_inside);
        assert_eq!(audit.pair_cover_failures, 0);
    }
}
