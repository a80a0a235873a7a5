//! Discrete weak solutions of `E(u,φ) = 0` on a ball with exterior data:
//! piecewise-constant Galerkin assembly with nonnegative off-diagonal
//! weights (hence a discrete maximum principle), Schur-reduced symmetric
//! positive-definite solves, weak-Harnack audits and Hölder-exponent
//! estimation via oscillation decay.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{circle_in_halfplane, dist, ArcSet};
use crate::kernels::KernelSpec;
use crate::profiles::{Decay, Profile};
use crate::quadrature::{integrate_adaptive, radial_integral, QuadratureBudget};
use crate::spectral::log_slope;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Exterior data
// ---------------------------------------------------------------------------

/// Evaluable exterior data on `R^d \ B_r(x₀)` with a bound and optional
/// compact support (used to skip far-tail quadrature).
#[derive(Clone)]
pub struct ExteriorData {
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub sup_abs: f64,
    /// Data vanishes outside `B(0, radius)` when set.
    pub compact_radius: Option<f64>,
    pub id: String,
}

impl ExteriorData {
    pub fn constant(c: f64) -> Self {
        ExteriorData {
            eval: Arc::new(move |_| c),
            sup_abs: c.abs(),
            compact_radius: None,
            id: format!("const({c})"),
        }
    }

    /// Smooth compact bump `amp · exp(-1/(1-t²))`, `t = |x-c|/radius`.
    pub fn bump(center: Vec<f64>, radius: f64, amp: f64) -> Self {
        let c = center.clone();
        let reach = crate::geom::norm(&center) + radius;
        ExteriorData {
            eval: Arc::new(move |x: &[f64]| {
                let t = dist(x, &c) / radius;
                if t >= 1.0 {
                    0.0
                } else {
                    amp * (-1.0 / (1.0 - t * t)).exp()
                }
            }),
            sup_abs: amp.abs() * (-1.0f64).exp(),
            compact_radius: Some(reach),
            id: format!("bump(r={radius})"),
        }
    }

    pub fn from_fn(
        id: &str,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        sup_abs: f64,
        compact_radius: Option<f64>,
    ) -> Self {
        ExteriorData {
            eval: Arc::new(f),
            sup_abs,
            compact_radius,
            id: id.to_string(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

// ---------------------------------------------------------------------------
// Grid and assembly
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssemblyOptions {
    /// Diagonal exclusion radius in cell units: kernel mass inside
    /// `|x-y| < diag_cut·h` is dropped (the squared difference vanishes
    /// there at the same rate).
    pub diag_cut: f64,
    /// Relative tolerance of the per-offset weight quadrature.
    pub weight_rel_tol: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            diag_cut: 0.25,
            weight_rel_tol: 1e-8,
        }
    }
}

/// Uniform lattice over the box `[x₀-collar, x₀+collar]^d`.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub d: usize,
    pub h: f64,
    pub x0: Vec<f64>,
    pub n_per_side: usize,
    /// Low corner of the box.
    pub origin: Vec<f64>,
}

impl Grid {
    pub fn cell_count(&self) -> usize {
        self.n_per_side.pow(self.d as u32)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let n = self.n_per_side;
        match self.d {
            1 => vec![self.origin[0] + (flat as f64 + 0.5) * self.h],
            2 => {
                let i = flat % n;
                let j = flat / n;
                vec![
                    self.origin[0] + (i as f64 + 0.5) * self.h,
                    self.origin[1] + (j as f64 + 0.5) * self.h,
                ]
            }
            _ => unreachable!(),
        }
    }

    fn coords(&self, flat: usize) -> [i64; 2] {
        let n = self.n_per_side;
        match self.d {
            1 => [flat as i64, 0],
            _ => [(flat % n) as i64, (flat / n) as i64],
        }
    }
}

/// Assembled symmetric operator with the Schur data for Dirichlet solves.
pub struct AssembledOperator {
    pub grid: Grid,
    pub r: f64,
    pub collar: f64,
    pub alpha: f64,
    /// Offset-indexed weights `w(m) = ∫∫_{C_0 × C_m} k(x,y) dy dx`,
    /// flattened over `(-n..n)^d`.
    weights: Vec<f64>,
    /// Interior cell flat indices (centers inside `B_r(x₀)`).
    pub interior: Vec<usize>,
    /// Exterior cell flat indices (inside the box).
    pub exterior: Vec<usize>,
    /// Per interior cell: full row sum `Σ_{j≠i} w(i-j) + t_i`.
    diag: Vec<f64>,
    /// Per interior cell: beyond-box kernel mass `t_i` (already `h^d`-scaled).
    tail_mass: Vec<f64>,
    /// Quadrature nodes for the beyond-box correction, reused for the
    /// right-hand side so constants stay exactly harmonic.
    tail_nodes: Vec<Vec<(Vec<f64>, f64)>>,
    pub options: AssemblyOptions,
    factor: std::sync::OnceLock<Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>>,
    /// Radial/even profile of the assembled translation-invariant kernel.
    pub kernel_profile: Arc<dyn Profile>,
}

fn offset_index(m: &[i64], n: usize) -> usize {
    let span = 2 * n as i64 - 1;
    let shift = n as i64 - 1;
    match m.len() {
        1 => (m[0] + shift) as usize,
        _ => ((m[1] + shift) * span + (m[0] + shift)) as usize,
    }
}

/// Hat density of the cell-pair correlation at offset `m` along one axis:
/// `λ(t) = (h - |t - m·h|)₊`.
#[inline]
fn hat(t: f64, mh: f64, h: f64) -> f64 {
    (h - (t - mh).abs()).max(0.0)
}

fn weight_1d(profile: &dyn Profile, m: i64, h: f64, delta: f64, rel_tol: f64) -> f64 {
    debug_assert!(m >= 1);
    let mh = m as f64 * h;
    // support [mh-h, mh+h], clipped at the diagonal exclusion radius
    let a = (mh - h).max(delta);
    let b = mh + h;
    if b <= a {
        return 0.0;
    }
    let mut cells = 0usize;
    let mut g = |z: f64| hat(z, mh, h) * profile.eval(&[z]);
    let (v, _) = integrate_adaptive(&mut g, a, b, 0.0, rel_tol, 256, &mut cells);
    v.max(0.0)
}

fn weight_2d(
    profile: &dyn Profile,
    m: [i64; 2],
    h: f64,
    delta: f64,
    rel_tol: f64,
) -> f64 {
    let mx = m[0] as f64 * h;
    let my = m[1] as f64 * h;
    let near = m[0].abs() <= 1 && m[1].abs() <= 1;
    let mut cells = 0usize;
    if near && delta > 0.0 {
        // polar around the singularity, clipped to the support square
        let far = ((mx.abs() + h).powi(2) + (my.abs() + h).powi(2)).sqrt();
        let inner_cells = std::cell::Cell::new(0usize);
        let mut radial = |rho: f64| {
            // arcs of the circle inside the square [mx±h]×[my±h]
            let o = [0.0, 0.0];
            let mut arcs = circle_in_halfplane(&o, rho, [1.0, 0.0], mx + h);
            arcs = arcs.intersect(&circle_in_halfplane(&o, rho, [-1.0, 0.0], -(mx - h)));
            arcs = arcs.intersect(&circle_in_halfplane(&o, rho, [0.0, 1.0], my + h));
            arcs = arcs.intersect(&circle_in_halfplane(&o, rho, [0.0, -1.0], -(my - h)));
            let mut ang = 0.0;
            for &(a, b) in arcs.intervals() {
                let mut g = |phi: f64| {
                    let z = [rho * phi.cos(), rho * phi.sin()];
                    hat(z[0], mx, h) * hat(z[1], my, h) * profile.eval(&z)
                };
                let mut cc = 0usize;
                let (v, _) = integrate_adaptive(&mut g, a, b, 0.0, rel_tol * 2.0, 64, &mut cc);
                inner_cells.set(inner_cells.get() + cc);
                ang += v;
            }
            rho * ang
        };
        let (v, _) = integrate_adaptive(&mut radial, delta, far, 0.0, rel_tol, 256, &mut cells);
        v.max(0.0)
    } else {
        // tensor product, smooth integrand
        let inner_cells = std::cell::Cell::new(0usize);
        let mut outer = |z1: f64| {
            let mut g = |z2: f64| {
                let z = [z1, z2];
                hat(z1, mx, h) * hat(z2, my, h) * profile.eval(&z)
            };
            let mut cc = 0usize;
            let (v, _) =
                integrate_adaptive(&mut g, my - h, my + h, 0.0, rel_tol * 2.0, 64, &mut cc);
            inner_cells.set(inner_cells.get() + cc);
            v
        };
        let (v, _) = integrate_adaptive(&mut outer, mx - h, mx + h, 0.0, rel_tol, 128, &mut cells);
        v.max(0.0)
    }
}

/// Quadrature nodes `(point, weight·k)` for `∫_{R^d \ box} k(x_i - y) … dy`,
/// shared between the diagonal correction and the right-hand side.
fn beyond_box_nodes(
    profile: &dyn Profile,
    x: &[f64],
    box_lo: &[f64],
    box_hi: &[f64],
    budget: &QuadratureBudget,
) -> Vec<(Vec<f64>, f64)> {
    let d = x.len();
    let mut nodes: Vec<(Vec<f64>, f64)> = Vec::new();
    // distance from x to the box boundary (inner clip of the shells)
    let mut inner: f64 = f64::INFINITY;
    for l in 0..d {
        inner = inner.min(x[l] - box_lo[l]).min(box_hi[l] - x[l]);
    }
    let inner = inner.max(0.0);
    let reach = match profile.decay() {
        Decay::Compact { radius } => radius + crate::geom::norm(x),
        _ => budget.tail_rmax,
    };
    // geometric shells with fixed Gauss points per shell; the weights are
    // the 1-d (or polar) Jacobians times the kernel value
    let g7: [(f64, f64); 7] = [
        (-0.949107912342759, 0.129484966168870),
        (-0.741531185599394, 0.279705391489277),
        (-0.405845151377397, 0.381830050505119),
        (0.0, 0.417959183673469),
        (0.405845151377397, 0.381830050505119),
        (0.741531185599394, 0.279705391489277),
        (0.949107912342759, 0.129484966168870),
    ];
    let mut lo = inner.max(1e-12);
    let mut shell_idx = 0usize;
    let mut last_mass = f64::INFINITY;
    while lo < reach && shell_idx < 200 {
        let hi = (lo * 2.0).min(reach);
        let mut shell_mass = 0.0;
        match d {
            1 => {
                for &(t, w) in &g7 {
                    let s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
                    let jac = 0.5 * (hi - lo) * w;
                    for side in [-1.0, 1.0] {
                        let y = vec![x[0] + side * s];
                        if y[0] >= box_lo[0] && y[0] <= box_hi[0] {
                            continue;
                        }
                        let kv = profile.eval(&[s * side]);
                        if kv != 0.0 {
                            shell_mass += jac * kv;
                            nodes.push((y, jac * kv));
                        }
                    }
                }
            }
            2 => {
                for &(t, w) in &g7 {
                    let rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
                    let jac_r = 0.5 * (hi - lo) * w * rho;
                    // arcs of the circle outside the box
                    let inside = {
                        let mut a = circle_in_halfplane(x, rho, [1.0, 0.0], box_hi[0]);
                        a = a.intersect(&circle_in_halfplane(x, rho, [-1.0, 0.0], -box_lo[0]));
                        a = a.intersect(&circle_in_halfplane(x, rho, [0.0, 1.0], box_hi[1]));
                        a.intersect(&circle_in_halfplane(x, rho, [0.0, -1.0], -box_lo[1]))
                    };
                    let outside: ArcSet = inside.complement();
                    for &(a, b) in outside.intervals() {
                        let n_ang = 8;
                        for q in 0..n_ang {
                            let phi = a + (b - a) * (q as f64 + 0.5) / n_ang as f64;
                            let jac = jac_r * (b - a) / n_ang as f64;
                            let z = [rho * phi.cos(), rho * phi.sin()];
                            let kv = profile.eval(&z);
                            if kv != 0.0 {
                                let y = vec![x[0] + z[0], x[1] + z[1]];
                                shell_mass += jac * kv;
                                nodes.push((y, jac * kv));
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        if shell_mass < 1e-14 * last_mass.min(1.0) && shell_idx > 3 {
            break;
        }
        if shell_mass > 0.0 {
            last_mass = shell_mass;
        }
        lo = hi;
        shell_idx += 1;
    }
    nodes
}

/// Piecewise-constant Galerkin assembly of the kernel form on a uniform
/// lattice: `w_ij = ∫∫_{C_i×C_j} k(x,y) dy dx` through the cell-pair
/// correlation density, exterior truncation at `collar_R` with the
/// beyond-box kernel mass folded back into the diagonal.
pub fn assemble(
    kernel: &KernelSpec,
    x0: &[f64],
    r: f64,
    h: f64,
    collar_r: f64,
    alpha: f64,
    opts: &AssemblyOptions,
) -> Result<AssembledOperator> {
    let d = kernel.d;
    if d > 2 {
        return Err(Error::Unsupported("solver implemented for d in {1,2}".into()));
    }
    if h > r / 32.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "grid too coarse: h = {h} must be at most r/32 = {}",
            r / 32.0
        )));
    }
    if collar_r < 2.0 * r {
        return Err(Error::Domain("collar_R must be at least 2r".into()));
    }
    let profile = kernel
        .profile()
        .ok_or_else(|| {
            Error::Unsupported(
                "assembly requires a translation-invariant kernel".into(),
            )
        })?
        .clone();

    let n = (2.0 * collar_r / h).round() as usize;
    let n = n.max(2);
    let origin: Vec<f64> = x0.iter().map(|c| c - 0.5 * n as f64 * h).collect();
    let grid = Grid {
        d,
        h,
        x0: x0.to_vec(),
        n_per_side: n,
        origin,
    };

    let delta = opts.diag_cut * h;
    // offset table (kernel is even: compute one half, mirror the rest)
    let span = 2 * n - 1;
    let weights: Vec<f64> = match d {
        1 => {
            let half: Vec<f64> = (0..n as i64)
                .into_par_iter()
                .map(|m| {
                    if m == 0 {
                        0.0
                    } else {
                        weight_1d(profile.as_ref(), m, h, delta, opts.weight_rel_tol)
                    }
                })
                .collect();
            let mut w = vec![0.0; span];
            for m in 0..n as i64 {
                let v = half[m as usize];
                w[offset_index(&[m], n)] = v;
                w[offset_index(&[-m], n)] = v;
            }
            w
        }
        2 => {
            let mut w = vec![0.0; span * span];
            let jobs: Vec<[i64; 2]> = (0..n as i64)
                .flat_map(|mx| {
                    ((-(n as i64) + 1)..n as i64)
                        .filter(move |&my| mx > 0 || my >= 0)
                        .map(move |my| [mx, my])
                })
                .collect();
            let vals: Vec<f64> = jobs
                .par_iter()
                .map(|m| {
                    if m[0] == 0 && m[1] == 0 {
                        0.0
                    } else {
                        weight_2d(profile.as_ref(), *m, h, delta, opts.weight_rel_tol)
                    }
                })
                .collect();
            for (m, v) in jobs.iter().zip(vals) {
                w[offset_index(m, n)] = v;
                w[offset_index(&[-m[0], -m[1]], n)] = v;
            }
            w
        }
        _ => unreachable!(),
    };

    // classify cells
    let mut interior = Vec::new();
    let mut exterior = Vec::new();
    for flat in 0..grid.cell_count() {
        let c = grid.center(flat);
        if dist(&c, x0) < r {
            interior.push(flat);
        } else {
            exterior.push(flat);
        }
    }
    if interior.is_empty() {
        return Err(Error::Invalid("no interior cells".into()));
    }

    // prefix sums of the offset table for O(1) row sums
    let row_sum_all = |flat: usize| -> f64 {
        // Σ_{j in box} w(i-j): offsets form a rectangle in offset space
        let c = grid.coords(flat);
        match d {
            1 => {
                let lo = -(c[0]);
                let hi = n as i64 - 1 - c[0];
                (lo..=hi)
                    .map(|m| weights[offset_index(&[m], n)])
                    .sum::<f64>()
            }
            _ => unreachable!("2d handled via prefix table"),
        }
    };

    // beyond-box corrections
    let box_lo = grid.origin.clone();
    let box_hi: Vec<f64> = grid
        .origin
        .iter()
        .map(|o| o + n as f64 * h)
        .collect();
    let budget = QuadratureBudget::default();
    let hd = h.powi(d as i32);
    let tail: Vec<(f64, Vec<(Vec<f64>, f64)>)> = interior
        .par_iter()
        .map(|&flat| {
            let x = grid.center(flat);
            let nodes = beyond_box_nodes(profile.as_ref(), &x, &box_lo, &box_hi, &budget);
            let mass: f64 = nodes.iter().map(|(_, w)| w).sum::<f64>() * hd;
            let scaled: Vec<(Vec<f64>, f64)> =
                nodes.into_iter().map(|(y, w)| (y, w * hd)).collect();
            (mass, scaled)
        })
        .collect();

    let diag: Vec<f64> = match d {
        1 => interior
            .iter()
            .zip(&tail)
            .map(|(&flat, (mass, _))| row_sum_all(flat) + mass)
            .collect(),
        2 => {
            // 2-d prefix table over the offset rectangle
            let mut prefix = vec![0.0f64; (span + 1) * (span + 1)];
            for j in 0..span {
                for i in 0..span {
                    prefix[(j + 1) * (span + 1) + (i + 1)] = weights[j * span + i]
                        + prefix[j * (span + 1) + (i + 1)]
                        + prefix[(j + 1) * (span + 1) + i]
                        - prefix[j * (span + 1) + i];
                }
            }
            let shift = n as i64 - 1;
            interior
                .iter()
                .zip(&tail)
                .map(|(&flat, (mass, _))| {
                    let c = grid.coords(flat);
                    // offsets m = c - j for j in the box: m ∈ [c-(n-1), c]
                    let x0i = (c[0] - (n as i64 - 1) + shift) as usize;
                    let x1i = (c[0] + shift) as usize + 1;
                    let y0i = (c[1] - (n as i64 - 1) + shift) as usize;
                    let y1i = (c[1] + shift) as usize + 1;
                    let s = prefix[y1i * (span + 1) + x1i] - prefix[y0i * (span + 1) + x1i]
                        - prefix[y1i * (span + 1) + x0i]
                        + prefix[y0i * (span + 1) + x0i];
                    s + mass
                })
                .collect()
        }
        _ => unreachable!(),
    };

    let (tail_mass, tail_nodes): (Vec<f64>, Vec<Vec<(Vec<f64>, f64)>>) =
        tail.into_iter().unzip();

    Ok(AssembledOperator {
        grid,
        r,
        collar: collar_r,
        alpha,
        weights,
        interior,
        exterior,
        diag,
        tail_mass,
        tail_nodes,
        options: *opts,
        factor: std::sync::OnceLock::new(),
        kernel_profile: profile,
    })
}

impl AssembledOperator {
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        let a = self.grid.coords(from);
        let b = self.grid.coords(to);
        let m = [a[0] - b[0], a[1] - b[1]];
        self.weights[offset_index(&m[..self.grid.d], self.grid.n_per_side)]
    }

    /// Residual of the operator applied to `u ≡ c` with matching constant
    /// exterior data (shared tail nodes make this exact up to rounding).
    pub fn constant_residual(&self, c: f64) -> f64 {
        let mut worst = 0.0f64;
        for (p, &_flat) in self.interior.iter().enumerate() {
            // Σ w(i-j)(c - c) + t_i·c - Σ nodes·c = (t_i - Σ nodes)·c = 0
            let node_mass: f64 = self.tail_nodes[p].iter().map(|(_, w)| w).sum();
            let res = (self.tail_mass[p] - node_mass) * c;
            worst = worst.max(res.abs());
        }
        worst
    }

    fn schur_matrix(&self) -> DMatrix<f64> {
        let n_int = self.interior.len();
        let mut a = DMatrix::zeros(n_int, n_int);
        for (p, &i) in self.interior.iter().enumerate() {
            a[(p, p)] = self.diag[p];
            for (q, &j) in self.interior.iter().enumerate() {
                if p != q {
                    a[(p, q)] = -self.weight(i, j);
                }
            }
        }
        a
    }

    /// Smallest eigenvalue of the Schur system (small instances only).
    pub fn smallest_eigenvalue(&self) -> Result<f64> {
        let n_int = self.interior.len();
        if n_int > 400 {
            return Err(Error::Unsupported(
                "dense eigensolve gated to n <= 400".into(),
            ));
        }
        let a = self.schur_matrix();
        let eig = a.symmetric_eigen();
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

// ---------------------------------------------------------------------------
// Dirichlet solve
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct AssemblyMeta {
    pub residual: f64,
    pub h: f64,
    pub collar: f64,
    pub diag_cut: f64,
    pub interior_cells: usize,
}

/// Grid values of a weak solution with exterior data.
pub struct DiscreteSolution {
    pub grid: Grid,
    pub r: f64,
    pub alpha: f64,
    /// Values on interior cells, parallel to `operator.interior`.
    pub values: Vec<f64>,
    pub interior: Vec<usize>,
    pub exterior: Vec<usize>,
    /// Exterior data sampled at exterior cell centers.
    pub exterior_values: Vec<f64>,
    pub exterior_data: ExteriorData,
    pub meta: AssemblyMeta,
}

impl DiscreteSolution {
    /// Value at a cell center: interior solve value or exterior sample.
    pub fn cell_value(&self, flat: usize) -> Option<f64> {
        if let Ok(p) = self.interior.binary_search(&flat) {
            return Some(self.values[p]);
        }
        if let Ok(p) = self.exterior.binary_search(&flat) {
            return Some(self.exterior_values[p]);
        }
        None
    }

    /// Interior cells (center, value) within a ball around the grid center.
    pub fn values_in_ball(&self, radius: f64) -> Vec<(Vec<f64>, f64)> {
        self.interior
            .iter()
            .zip(&self.values)
            .filter_map(|(&flat, &v)| {
                let c = self.grid.center(flat);
                if dist(&c, &self.grid.x0) < radius {
                    Some((c, v))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in 0..self.grid.d {
            out.push_str(&format!("x{},", l + 1));
        }
        out.push_str("value,region\n");
        for (&flat, &v) in self.interior.iter().zip(&self.values) {
            let c = self.grid.center(flat);
            for coord in &c {
                out.push_str(&format!("{coord},"));
            }
            out.push_str(&format!("{v},interior\n"));
        }
        for (&flat, &v) in self.exterior.iter().zip(&self.exterior_values) {
            let c = self.grid.center(flat);
            for coord in &c {
                out.push_str(&format!("{coord},"));
            }
            out.push_str(&format!("{v},exterior\n"));
        }
        out
    }
}

/// Solve the Schur-reduced system `A_II u = B g`: interior values of the
/// discrete weak solution with the given exterior data. Nonnegative
/// off-diagonal weights give the discrete maximum principle.
pub fn solve_dirichlet(op: &AssembledOperator, g: &ExteriorData) -> Result<DiscreteSolution> {
    let n_int = op.interior.len();
    let exterior_values: Vec<f64> = op
        .exterior
        .iter()
        .map(|&flat| g.value(&op.grid.center(flat)))
        .collect();

    // right-hand side: in-box exterior coupling plus beyond-box data
    let mut b = DVector::zeros(n_int);
    let rhs: Vec<f64> = op
        .interior
        .par_iter()
        .enumerate()
        .map(|(p, &i)| {
            let mut acc = crate::quadrature::Accumulator::default();
            for (&e, &ge) in op.exterior.iter().zip(&exterior_values) {
                if ge != 0.0 {
                    acc.add(op.weight(i, e) * ge);
                }
            }
            for (y, w) in &op.tail_nodes[p] {
                let gy = g.value(y);
                if gy != 0.0 {
                    acc.add(w * gy);
                }
            }
            acc.total()
        })
        .collect();
    for (p, v) in rhs.iter().enumerate() {
        b[p] = *v;
    }

    let a = op.schur_matrix();
    let u = if n_int <= 2200 {
        let factor = op
            .factor
            .get_or_init(|| nalgebra::Cholesky::new(a.clone()));
        match factor {
            Some(f) => f.solve(&b),
            None => {
                return Err(Error::Solver(
                    "Cholesky factorization failed (system not positive definite)".into(),
                ))
            }
        }
    } else {
        conjugate_gradient(&a, &b)?
    };

    // residual of the solved system
    let res = (&a * &u - &b).norm() / b.norm().max(1e-300);

    Ok(DiscreteSolution {
        grid: op.grid.clone(),
        r: op.r,
        alpha: op.alpha,
        values: u.iter().cloned().collect(),
        interior: op.interior.clone(),
        exterior: op.exterior.clone(),
        exterior_values,
        exterior_data: g.clone(),
        meta: AssemblyMeta {
            residual: res,
            h: op.grid.h,
            collar: op.collar,
            diag_cut: op.options.diag_cut,
            interior_cells: n_int,
        },
    })
}

fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let b_norm = b.norm().max(1e-300);
    for _ in 0..(4 * n) {
        let ap = a * &p;
        let alpha = rs / p.dot(&ap);
        x += alpha * &p;
        r -= alpha * &ap;
        let rs_new = r.dot(&r);
        if rs_new.sqrt() / b_norm < 1e-12 {
            return Ok(x);
        }
        p = &r + (rs_new / rs) * p;
        rs = rs_new;
    }
    if r.norm() / b_norm < 1e-8 {
        Ok(x)
    } else {
        Err(Error::Solver(format!(
            "conjugate gradient stalled at relative residual {:.3e}",
            r.norm() / b_norm
        )))
    }
}

/// Discrete maximum principle audit: interior values within the closed
/// range of the exterior data (including the beyond-box values).
pub fn max_principle_ok(sol: &DiscreteSolution) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &sol.exterior_values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    // beyond-box data range: bounded by sup_abs, and equal to zero
    // outside the compact radius when the box already covers it
    let beyond_covered = sol
        .exterior_data
        .compact_radius
        .is_some_and(|cr| cr <= sol.meta.collar);
    if !beyond_covered {
        lo = lo.min(-sol.exterior_data.sup_abs);
        hi = hi.max(sol.exterior_data.sup_abs);
    } else if sol.exterior_data.compact_radius.is_some() {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    let slack = 1e-9 * (hi - lo).abs().max(1e-12);
    sol.values.iter().all(|&v| v >= lo - slack && v <= hi + slack)
}

// ---------------------------------------------------------------------------
// Tail measure
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct TailMeasureReport {
    pub r: f64,
    pub eta: Vec<(usize, f64)>,
    pub geometric_ratio: f64,
    pub pass: bool,
}

/// Normalized tail measures
/// `η_{r,j} = sup_x ν^x_r(R^d \ B_{2^j r}(x₀))`,
/// `ν^x_r(A) = ∫_A U(y-x) dy / ∫_{R^d \ B_r(x₀)} U(y-x₀) dy`,
/// over a grid of base points `x ∈ B_{r/2}(x₀)`.
pub fn tail_measure(
    kernel: &KernelSpec,
    x0: &[f64],
    r: f64,
    x_count: usize,
    j_max: usize,
    budget: &QuadratureBudget,
) -> Result<TailMeasureReport> {
    let u = kernel.upper.as_ref();
    let denom = radial_integral(u, r, f64::INFINITY, budget)?.value;
    if denom <= 1e-300 {
        return Err(Error::Invalid(
            "tail measure denominator vanishes (degenerate envelope)".into(),
        ));
    }
    let d = kernel.d;
    // base points on a segment/cross inside B_{r/2}(x₀)
    let mut xs: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 1..x_count {
        let t = 0.49 * r * i as f64 / (x_count - 1).max(1) as f64;
        for l in 0..d {
            for sgn in [-1.0, 1.0] {
                let mut p = x0.to_vec();
                p[l] += sgn * t;
                xs.push(p);
            }
        }
    }
    let mut eta = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let radius = 2f64.powi(j as i32) * r;
        let mut worst: f64 = 0.0;
        for x in &xs {
            let c: Vec<f64> = x0.iter().zip(x).map(|(a, b)| a - b).collect();
            let num = crate::quadrature::profile_integral_outside_ball(u, &c, radius, budget)?;
            worst = worst.max(num.value / denom);
        }
        eta.push((j, worst));
    }
    // fitted per-j geometric ratio
    let js: Vec<f64> = eta.iter().map(|(j, _)| *j as f64).collect();
    let vals: Vec<f64> = eta.iter().map(|(_, v)| *v).collect();
    let positive = vals.iter().filter(|&&v| v > 0.0).count();
    let ratio = if positive >= 2 {
        let pts: Vec<(f64, f64)> = js
            .iter()
            .zip(&vals)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&j, &v)| (j, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        (sxy / sxx).exp()
    } else {
        0.0
    };
    Ok(TailMeasureReport {
        r,
        pass: ratio < 1.0,
        eta,
        geometric_ratio: ratio,
    })
}

// ---------------------------------------------------------------------------
// Weak Harnack audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct HarnackSample {
    pub p0: f64,
    pub average: f64,
    pub infimum: f64,
    pub tail_term: f64,
    pub empirical_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackAudit {
    pub samples: Vec<HarnackSample>,
}

/// Weak-Harnack audit on a nonnegative discrete solution:
/// smallest `c` with
/// `c·inf_{B_{r/4}} u ≥ (⨍_{B_{r/2}} u^{p₀})^{1/p₀} - c·sup_x ∫ u⁻ k(x,·)`.
pub fn weak_harnack_audit(
    sol: &DiscreteSolution,
    op: &AssembledOperator,
    p0_values: &[f64],
) -> Result<HarnackAudit> {
    if sol.values.iter().any(|&v| v < 0.0) {
        return Err(Error::Invalid(
            "weak Harnack audit requires a nonnegative solution on the ball".into(),
        ));
    }
    let r = sol.r;
    let quarter: Vec<f64> = sol
        .values_in_ball(r / 4.0)
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    let half: Vec<f64> = sol
        .values_in_ball(r / 2.0)
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    if quarter.is_empty() || half.is_empty() {
        return Err(Error::Invalid("grid too coarse for the audit balls".into()));
    }
    let inf = quarter.iter().cloned().fold(f64::INFINITY, f64::min);

    // tail term: sup over base cells in B_{r/2} of ∫_{R^d\B_r} u⁻(z)k(x,z)dz
    let hd = sol.grid.h.powi(sol.grid.d as i32);
    let neg_ext: Vec<f64> = sol.exterior_values.iter().map(|&v| (-v).max(0.0)).collect();
    let any_negative = neg_ext.iter().any(|&v| v > 0.0);
    let mut tail: f64 = 0.0;
    if any_negative {
        for (p, &i) in op.interior.iter().enumerate() {
            let c = sol.grid.center(i);
            if dist(&c, &sol.grid.x0) >= r / 2.0 {
                continue;
            }
            let mut acc = 0.0;
            for (&e, &gneg) in op.exterior.iter().zip(&neg_ext) {
                if gneg > 0.0 {
                    acc += op.weight(i, e) * gneg / hd;
                }
            }
            for (y, w) in &op.tail_nodes[p] {
                let gy = sol.exterior_data.value(y);
                if gy < 0.0 {
                    acc += w * (-gy) / hd;
                }
            }
            tail = tail.max(acc);
        }
    }

    let cell_share = 1.0 / half.len() as f64;
    let mut samples = Vec::new();
    for &p0 in p0_values {
        let avg = (half.iter().map(|v| v.powf(p0)).sum::<f64>() * cell_share).powf(1.0 / p0);
        let denom = inf + tail;
        let c = if avg == 0.0 {
            0.0
        } else if denom > 0.0 {
            avg / denom
        } else {
            f64::INFINITY
        };
        samples.push(HarnackSample {
            p0,
            average: avg,
            infimum: inf,
            tail_term: tail,
            empirical_c: c,
        });
    }
    Ok(HarnackAudit { samples })
}

// ---------------------------------------------------------------------------
// Oscillation decay and the Hölder exponent
// ---------------------------------------------------------------------------

/// Constants of the oscillation-decay iteration at scale factor θ = 4:
/// `c₂ = c₁ θ^{d/p} 2^{(1-d)/p}`, `κ = (c₂)^{-1}/2`,
/// `β_cap = ln(2/(2-κ))/ln θ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OscillationSchedule {
    pub d: usize,
    pub theta: f64,
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    pub beta_cap: f64,
    /// Strong-Harnack variant: the c₂ formula changes and must be
    /// supplied by the caller.
    pub strong: bool,
}

impl OscillationSchedule {
    pub fn new(d: usize, c1: f64, p: f64) -> Result<Self> {
        if !(c1 >= 1.0) || !(p > 0.0) {
            return Err(Error::Domain(
                "schedule needs a Harnack constant c1 >= 1 and exponent p > 0".into(),
            ));
        }
        let theta = 4.0f64;
        let c2 = c1 * theta.powf(d as f64 / p) * 2f64.powf((1.0 - d as f64) / p);
        let kappa = 0.5 / c2;
        if !(0.0 < kappa && kappa < 1.0) {
            return Err(Error::Domain(format!("kappa = {kappa} not in (0,1)")));
        }
        Ok(OscillationSchedule {
            d,
            theta,
            p,
            c1,
            c2,
            kappa,
            beta_cap: (2.0 / (2.0 - kappa)).ln() / theta.ln(),
            strong: false,
        })
    }

    /// Strong-Harnack variant: only c₂ changes, and its value is a user
    /// parameter.
    pub fn with_strong_constant(d: usize, c1: f64, p: f64, c2: f64) -> Result<Self> {
        if !(c2 > 0.5) {
            return Err(Error::Domain("strong-variant c2 must exceed 1/2".into()));
        }
        let kappa = 0.5 / c2;
        Ok(OscillationSchedule {
            d,
            theta: 4.0,
            p,
            c1,
            c2,
            kappa,
            beta_cap: (2.0 / (2.0 - kappa)).ln() / 4f64.ln(),
            strong: true,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifiedSequences {
    pub beta: f64,
    pub k_initial: f64,
    pub m_lower: Vec<f64>,
    pub m_upper: Vec<f64>,
    pub containment_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    /// Measured oscillation per scale `B_{r θ^{-n}}`.
    pub oscillations: Vec<(usize, f64)>,
    /// Fitted exponent from the oscillation decay; `None` is the +∞
    /// sentinel of a constant solution.
    pub beta_fit: Option<f64>,
    pub monotone: bool,
    pub beta_cap: f64,
    pub certified: CertifiedSequences,
}

/// Oscillation-decay estimate of the Hölder exponent: measures
/// `osc_n = max - min` of the solution over `B_{r θ^{-n}}(x₀)`, fits β
/// from the last two thirds of the usable scales, and constructs the
/// monotone bound sequences `(m_n, M_n)` with the Case 1/Case 2 update
/// rule, certifying the largest β (at most `β_cap`) for which the bounds
/// contain the measured extrema at every scale.
pub fn holder_estimate(
    sol: &DiscreteSolution,
    schedule: &OscillationSchedule,
) -> Result<HolderReport> {
    let theta = schedule.theta;
    let r = sol.r;
    // usable scales: the ball must span at least 4 grid cells, otherwise
    // the measured oscillation is grid noise rather than decay
    let mut scales: Vec<(usize, Vec<f64>)> = Vec::new();
    for n in 0..32 {
        let radius = r * theta.powi(-(n as i32));
        if radius < 4.0 * sol.grid.h {
            break;
        }
        let vals: Vec<f64> = sol
            .values_in_ball(radius)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        if vals.len() < 2 {
            break;
        }
        scales.push((n, vals));
    }
    if scales.len() < 3 {
        return Err(Error::Invalid(format!(
            "fewer than 3 usable scales (got {})",
            scales.len()
        )));
    }
    let oscillations: Vec<(usize, f64)> = scales
        .iter()
        .map(|(n, vals)| {
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            (*n, max - min)
        })
        .collect();
    let monotone = oscillations.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-14);

    // least-squares fit on the last ⌈2K/3⌉ scales (early scales carry
    // boundary pollution)
    let k = oscillations.len();
    let start = k - ((2 * k) as f64 / 3.0).ceil() as usize;
    // oscillations at the level of solver round-off count as zero
    let value_scale = scales[0]
        .1
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let noise_floor = 1e-11 * value_scale;
    let fit_pts: Vec<(f64, f64)> = oscillations[start..]
        .iter()
        .filter(|(_, o)| *o > noise_floor)
        .map(|(n, o)| (theta.powi(-(*n as i32)), *o))
        .collect();
    let beta_fit = if fit_pts.len() >= 2 {
        let xs: Vec<f64> = fit_pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit_pts.iter().map(|p| p.1).collect();
        // osc ~ (θ^{-n})^β so the log-log slope in θ^{-n} is β itself
        Some(log_slope(&xs, &ys))
    } else {
        None // constant solution: +∞ sentinel
    };

    // certified sequences: greatest β ≤ β_cap with containment
    let mins: Vec<f64> = scales
        .iter()
        .map(|(_, v)| v.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let maxs: Vec<f64> = scales
        .iter()
        .map(|(_, v)| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    // global range including exterior data within the box and beyond
    let mut g_min = mins[0];
    let mut g_max = maxs[0];
    for &v in &sol.exterior_values {
        g_min = g_min.min(v);
        g_max = g_max.max(v);
    }
    if sol
        .exterior_data
        .compact_radius
        .is_some_and(|cr| cr <= sol.meta.collar)
    {
        g_min = g_min.min(0.0);
        g_max = g_max.max(0.0);
    } else {
        g_min = g_min.min(-sol.exterior_data.sup_abs);
        g_max = g_max.max(sol.exterior_data.sup_abs);
    }
    let k_initial = g_max - g_min;

    let build = |beta: f64| -> (Vec<f64>, Vec<f64>, bool) {
        let mut m_lo = vec![g_min];
        let mut m_hi = vec![g_max];
        let mut ok = mins[0] >= g_min - 1e-12 && maxs[0] <= g_max + 1e-12;
        for n in 1..scales.len() {
            let mid = 0.5 * (m_lo[n - 1] + m_hi[n - 1]);
            let gap = k_initial * theta.powf(-(n as f64) * beta);
            let vals = &scales[n].1;
            let below = vals.iter().filter(|&&v| v <= mid).count();
            // Case 1: the majority of the ball sits below the midpoint
            let (lo, hi) = if 2 * below >= vals.len() {
                (m_lo[n - 1], m_lo[n - 1] + gap)
            } else {
                (m_hi[n - 1] - gap, m_hi[n - 1])
            };
            ok &= mins[n] >= lo - 1e-12 * k_initial.max(1.0)
                && maxs[n] <= hi + 1e-12 * k_initial.max(1.0);
            m_lo.push(lo);
            m_hi.push(hi);
        }
        (m_lo, m_hi, ok)
    };

    let mut beta = schedule.beta_cap;
    let mut certified = None;
    if k_initial <= 0.0 {
        // constant data: trivially contained at the cap
        let (m_lo, m_hi, _) = build(beta);
        certified = Some(CertifiedSequences {
            beta,
            k_initial,
            m_lower: m_lo,
            m_upper: m_hi,
            containment_ok: true,
        });
    } else {
        for _ in 0..24 {
            let (m_lo, m_hi, ok) = build(beta);
            if ok {
                certified = Some(CertifiedSequences {
                    beta,
                    k_initial,
                    m_lower: m_lo,
                    m_upper: m_hi,
                    containment_ok: true,
                });
                break;
            }
            beta *= 0.5;
        }
    }
    let certified = certified.ok_or_else(|| {
        Error::Invalid("no certified β found down to β_cap·2^{-24}".into())
    })?;

    Ok(HolderReport {
        oscillations,
        beta_fit,
        monotone,
        beta_cap: schedule.beta_cap,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::make_fractional_kernel;

    fn op_1d(alpha: f64, h: f64) -> AssembledOperator {
        let k = make_fractional_kernel(1, alpha, 1.0).unwrap();
        assemble(&k, &[0.0], 1.0, h, 3.0, alpha, &AssemblyOptions::default()).unwrap()
    }

    #[test]
    fn schedule_arithmetic() {
        // d=1, c1=2, p=1: c2 = 2·4·2⁰ = 8, κ = 1/16
        let s = OscillationSchedule::new(1, 2.0, 1.0).unwrap();
        assert_eq!(s.c2, 8.0);
        assert_eq!(s.kappa, 1.0 / 16.0);
        let cap = (2.0f64 / (2.0 - 1.0 / 16.0)).ln() / 4.0f64.ln();
        assert!((s.beta_cap - cap).abs() < 1e-15);
        assert!(OscillationSchedule::new(1, 0.5, 1.0).is_err());
        let strong = OscillationSchedule::with_strong_constant(1, 2.0, 1.0, 5.0).unwrap();
        assert!(strong.strong);
        assert_eq!(strong.kappa, 0.1);
    }

    #[test]
    fn preconditions_enforced() {
        let k = make_fractional_kernel(1, 1.0, 1.0).unwrap();
        // h too coarse
        assert!(assemble(&k, &[0.0], 1.0, 0.1, 3.0, 1.0, &AssemblyOptions::default()).is_err());
        // collar too small
        assert!(assemble(&k, &[0.0], 1.0, 1.0 / 64.0, 1.5, 1.0, &AssemblyOptions::default())
            .is_err());
    }

    #[test]
    fn constants_are_harmonic() {
        let op = op_1d(1.0, 1.0 / 64.0);
        // operator residual on constants
        let res = op.constant_residual(3.0);
        assert!(res < 1e-12, "residual {res}");
        // solve with constant data returns the constant
        let sol = solve_dirichlet(&op, &ExteriorData::constant(3.0)).unwrap();
        for &v in &sol.values {
            assert!((v - 3.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn weights_symmetric_nonnegative() {
        let op = op_1d(1.2, 1.0 / 64.0);
        for (i, j) in [(3usize, 40usize), (10, 11), (0, 100)] {
            let a = op.weight(op.interior[i], op.interior[j]);
            let b = op.weight(op.interior[j], op.interior[i]);
            assert_eq!(a, b);
            assert!(a >= 0.0);
        }
    }

    #[test]
    fn max_principle_holds() {
        let op = op_1d(1.0, 1.0 / 64.0);
        let g = ExteriorData::bump(vec![1.8], 0.5, 1.0);
        let sol = solve_dirichlet(&op, &g).unwrap();
        assert!(max_principle_ok(&sol));
        assert!(sol.meta.residual < 1e-10);
        // nonnegative data: solution strictly inside (0, sup g)
        assert!(sol.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn spd_on_small_instance() {
        let k = make_fractional_kernel(1, 1.0, 1.0).unwrap();
        let op = assemble(
            &k,
            &[0.0],
            1.0,
            1.0 / 32.0,
            2.0,
            1.0,
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert!(op.interior.len() <= 200);
        let lambda_min = op.smallest_eigenvalue().unwrap();
        assert!(lambda_min > 0.0, "λ_min = {lambda_min}");
    }

    #[test]
    fn tail_measure_fractional() {
        let k = make_fractional_kernel(1, 1.2, 1.0).unwrap();
        let rep = tail_measure(&k, &[0.0], 0.5, 3, 6, &QuadratureBudget::default()).unwrap();
        assert!(rep.pass, "ratio {}", rep.geometric_ratio);
        // η decays like 2^{-αj} for the pure-power envelope
        assert!((rep.geometric_ratio - 2f64.powf(-1.2)).abs() < 0.05);
        // monotone in j
        for w in rep.eta.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn tail_measure_compact_support() {
        // kernel supported in B_ρ: tails vanish once 2^j r > ρ + |x-x₀|
        let p = crate::profiles::PowerProfile::capped(1, 1.0, 0.5, 2.0);
        let k = KernelSpec::from_profile(std::sync::Arc::new(p));
        let rep = tail_measure(&k, &[0.0], 0.5, 2, 5, &QuadratureBudget::default()).unwrap();
        let last = rep.eta.last().unwrap();
        assert_eq!(last.1, 0.0);
    }

    #[test]
    fn harnack_on_constant_solution() {
        let op = op_1d(1.0, 1.0 / 64.0);
        let sol = solve_dirichlet(&op, &ExteriorData::constant(1.0)).unwrap();
        let audit = weak_harnack_audit(&sol, &op, &[1.0]).unwrap();
        let s = &audit.samples[0];
        assert!((s.average - 1.0).abs() < 1e-7);
        assert!((s.infimum - 1.0).abs() < 1e-7);
        assert_eq!(s.tail_term, 0.0);
        assert!((s.empirical_c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn holder_constant_sentinel() {
        let op = op_1d(1.0, 1.0 / 64.0);
        let sol = solve_dirichlet(&op, &ExteriorData::constant(2.0)).unwrap();
        let schedule = OscillationSchedule::new(1, 2.0, 1.0).unwrap();
        let rep = holder_estimate(&sol, &schedule).unwrap();
        assert!(rep.beta_fit.is_none());
        assert!(rep.monotone);
        assert!(rep.certified.containment_ok);
    }
}
