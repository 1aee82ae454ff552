//! Discretized Lagrangian action on the fundamental segment.
//!
//! The path is piecewise linear between the nodes, so the kinetic part is
//! integrated exactly:
//!
//! ```text
//! 𝒜 = Σᵢ ‖Xᵢ₊₁ − Xᵢ‖² / (2Δtᵢ) + Δt₀ U((X₀ + X₁)/2) + Σ_{i≥1} Δtᵢ (U(Xᵢ) + U(Xᵢ₊₁)) / 2
//! ```
//!
//! The first cell uses the midpoint rule because `U` is infinite at the
//! collision imposed at `t = 0`; the mesh `tᵢ = (T/6)(i/N)^p` is graded
//! toward that collision.

mod minimize;

pub use minimize::{minimize, MinimizeOptions, MinimizeReport, Termination};

use crate::central_config::curly_g;
use crate::dynamics::{gradient_raw, potential_raw, Configuration, Vec3, ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::kepler::RadialEjection;
use crate::symmetry::{project_constraints, FundamentalSegment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_MESH_P: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellRule {
    Midpoint,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureScheme {
    pub times: Vec<f64>,
    pub rules: Vec<CellRule>,
    pub p: f64,
}

impl QuadratureScheme {
    /// Graded mesh `tᵢ = (T/6)(i/N)^p` with the midpoint rule on the first cell.
    pub fn graded(period: f64, cells: usize, p: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        if cells < 2 {
            return Err(Error::Domain(format!("need at least 2 cells, got {cells}")));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Domain(format!("grading exponent must be ≥ 1, got {p}")));
        }
        let end = period / 6.0;
        let times = graded_times(end, cells, p);
        Ok(Self::with_rules(times, p))
    }

    /// Scheme on given node times, for segments not built on the graded mesh.
    pub fn from_times(times: Vec<f64>, p: f64) -> Result<Self> {
        if times.len() < 3 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("node times must start at 0 and increase strictly".into()));
        }
        Ok(Self::with_rules(times, p))
    }

    fn with_rules(times: Vec<f64>, p: f64) -> Self {
        let mut rules = vec![CellRule::Trapezoid; times.len() - 1];
        rules[0] = CellRule::Midpoint;
        QuadratureScheme { times, rules, p }
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    fn check_grid(&self, seg: &FundamentalSegment) -> Result<()> {
        if seg.times.len() != self.times.len() {
            return Err(Error::IncompatibleGrid(format!(
                "segment has {} nodes, quadrature expects {}",
                seg.times.len(),
                self.times.len()
            )));
        }
        let end = *self.times.last().expect("nonempty mesh");
        let tol = 1e-12 * end;
        if seg.times.iter().zip(&self.times).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::IncompatibleGrid("segment node times differ from the quadrature mesh".into()));
        }
        Ok(())
    }
}

pub fn graded_times(end: f64, cells: usize, p: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=cells).map(|i| end * (i as f64 / cells as f64).powf(p)).collect();
    t[cells] = end;
    t
}

/// Node coordinates after checking that only node 0 touches the boundary.
fn checked_points(seg: &FundamentalSegment) -> Result<Vec<Vec3>> {
    let mut pts = Vec::with_capacity(seg.nodes.len());
    for (i, c) in seg.nodes.iter().enumerate() {
        let p = c.to_array();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("node {i} outside the cone: {p:?}")));
        }
        if i > 0 && p.iter().any(|v| *v <= ZERO_THRESHOLD) {
            return Err(Error::Singular(format!("interior collision at node {i}: {p:?}")));
        }
        pts.push(p);
    }
    Ok(pts)
}

fn midpoint(a: &Vec3, b: &Vec3) -> Vec3 {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

pub(crate) fn action_raw(times: &[f64], p: &[Vec3]) -> f64 {
    let n = p.len() - 1;
    let mut kin = 0.0;
    let mut pot = 0.0;
    let mut u_prev = f64::NAN;
    for i in 0..n {
        let h = times[i + 1] - times[i];
        let d = [p[i + 1][0] - p[i][0], p[i + 1][1] - p[i][1], p[i + 1][2] - p[i][2]];
        kin += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * h);
        if i == 0 {
            pot += h * potential_raw(&midpoint(&p[0], &p[1]));
            u_prev = potential_raw(&p[1]);
        } else {
            let u_next = potential_raw(&p[i + 1]);
            pot += 0.5 * h * (u_prev + u_next);
            u_prev = u_next;
        }
    }
    kin + pot
}

/// Full gradient with respect to every node coordinate, constraints ignored.
pub(crate) fn gradient_nodes_raw(times: &[f64], p: &[Vec3]) -> Vec<Vec3> {
    let n = p.len() - 1;
    let mut g = vec![[0.0; 3]; n + 1];
    for i in 0..n {
        let h = times[i + 1] - times[i];
        for k in 0..3 {
            let v = (p[i + 1][k] - p[i][k]) / h;
            g[i][k] -= v;
            g[i + 1][k] += v;
        }
        if i == 0 {
            let gm = gradient_raw(&midpoint(&p[0], &p[1]));
            for k in 0..3 {
                g[0][k] += 0.5 * h * gm[k];
                g[1][k] += 0.5 * h * gm[k];
            }
        } else {
            let ga = gradient_raw(&p[i]);
            let gb = gradient_raw(&p[i + 1]);
            for k in 0..3 {
                g[i][k] += 0.5 * h * ga[k];
                g[i + 1][k] += 0.5 * h * gb[k];
            }
        }
    }
    g
}

/// `U(q) − U(p)` without cancellation between the two evaluations.
fn potential_diff(p: &Vec3, q: &Vec3) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let pair = |i: usize, j: usize| {
        let s1 = p[i] * p[i] + p[j] * p[j];
        let s2 = q[i] * q[i] + q[j] * q[j];
        let ds = d[i] * (p[i] + q[i]) + d[j] * (p[j] + q[j]);
        let (r1, r2) = (s1.sqrt(), s2.sqrt());
        -ds / ((r1 + r2) * r1 * r2)
    };
    let single = |i: usize| -d[i] / (p[i] * q[i]);
    pair(0, 1) + pair(0, 2) + pair(1, 2) + 0.125 * (single(0) + single(1) + single(2))
}

/// `𝒜(b) − 𝒜(a)` evaluated cell by cell in cancellation-free form, so that
/// tiny decreases remain measurable near a minimizer.
pub(crate) fn action_diff_raw(times: &[f64], a: &[Vec3], b: &[Vec3]) -> f64 {
    let n = a.len() - 1;
    let delta: Vec<Vec3> = a
        .iter()
        .zip(b)
        .map(|(x, y)| [y[0] - x[0], y[1] - x[1], y[2] - x[2]])
        .collect();
    let mut acc = 0.0;
    for i in 0..n {
        let h = times[i + 1] - times[i];
        let mut kin = 0.0;
        for k in 0..3 {
            let d_old = a[i + 1][k] - a[i][k];
            let d_new = b[i + 1][k] - b[i][k];
            kin += (delta[i + 1][k] - delta[i][k]) * (d_old + d_new);
        }
        acc += kin / (2.0 * h);
        if i == 0 {
            acc += h * potential_diff(&midpoint(&a[0], &a[1]), &midpoint(&b[0], &b[1]));
        } else {
            acc += 0.5 * h * (potential_diff(&a[i], &b[i]) + potential_diff(&a[i + 1], &b[i + 1]));
        }
    }
    acc
}

/// Discretized action of a segment on the scheme's mesh.
pub fn discretized_action(seg: &FundamentalSegment, q: &QuadratureScheme) -> Result<f64> {
    q.check_grid(seg)?;
    let pts = checked_points(seg)?;
    Ok(action_raw(&q.times, &pts))
}

/// `𝒜(b) − 𝒜(a)` for two segments on the same mesh, accurate even when the
/// difference is far below the rounding level of either value.
pub fn action_difference(a: &FundamentalSegment, b: &FundamentalSegment, q: &QuadratureScheme) -> Result<f64> {
    q.check_grid(a)?;
    q.check_grid(b)?;
    let pa = checked_points(a)?;
    let pb = checked_points(b)?;
    Ok(action_diff_raw(&q.times, &pa, &pb))
}

/// Gradient of the discretized action, projected onto the tangent space of
/// the endpoint constraints: node 0 has components `(0, m, m)` and node `N`
/// has `(n, n, g_z)` with `m`, `n` the averages of the constrained pairs.
pub fn action_gradient(seg: &FundamentalSegment, q: &QuadratureScheme) -> Result<Vec<Vec3>> {
    q.check_grid(seg)?;
    let pts = checked_points(seg)?;
    let mut g = gradient_nodes_raw(&q.times, &pts);
    project_gradient(&mut g);
    Ok(g)
}

pub(crate) fn project_gradient(g: &mut [Vec3]) {
    let n = g.len() - 1;
    let m = 0.5 * (g[0][1] + g[0][2]);
    g[0] = [0.0, m, m];
    let a = 0.5 * (g[n][0] + g[n][1]);
    g[n][0] = a;
    g[n][1] = a;
}

pub fn gradient_inf_norm(g: &[Vec3]) -> f64 {
    g.iter().flat_map(|v| v.iter()).fold(0.0, |m, v| m.max(v.abs()))
}

/// Velocities from the discrete Legendre transform. Interior nodes average
/// the left and right momenta, which coincide at a discrete stationary point.
/// The velocity of the coordinate colliding at `t = 0` is `+∞`.
pub fn legendre_velocities(seg: &FundamentalSegment, q: &QuadratureScheme) -> Result<Vec<Vec3>> {
    q.check_grid(seg)?;
    let p = checked_points(seg)?;
    let n = p.len() - 1;
    let t = &q.times;
    let mut right = vec![[0.0; 3]; n + 1];
    let mut left = vec![[0.0; 3]; n + 1];
    for i in 0..n {
        let h = t[i + 1] - t[i];
        let (ga, gb) = if i == 0 {
            let gm = gradient_raw(&midpoint(&p[0], &p[1]));
            (gm, gm)
        } else {
            (gradient_raw(&p[i]), gradient_raw(&p[i + 1]))
        };
        for k in 0..3 {
            let v = (p[i + 1][k] - p[i][k]) / h;
            right[i][k] = v - 0.5 * h * ga[k];
            left[i + 1][k] = v + 0.5 * h * gb[k];
        }
    }
    let mut vel = vec![[0.0; 3]; n + 1];
    vel[0] = right[0];
    for i in 1..n {
        for k in 0..3 {
            vel[i][k] = 0.5 * (left[i][k] + right[i][k]);
        }
    }
    vel[n] = left[n];
    for k in 0..3 {
        if p[0][k] == 0.0 {
            vel[0][k] = f64::INFINITY;
        }
    }
    Ok(vel)
}

/// One-half of the homothetic ejection-collision motion `X̄(t) = v(t) X_c`
/// along the normalized octahedron, with `v(0) = 0` and `v̇(T/6) = 0`.
pub fn homothetic_segment(period: f64, cells: usize, p: f64) -> Result<FundamentalSegment> {
    let q = QuadratureScheme::graded(period, cells, p)?;
    let ej = RadialEjection::new(curly_g(), period / 6.0)?;
    let c = 1.0 / 3f64.sqrt();
    let mut nodes = Vec::with_capacity(cells + 1);
    let mut vel = Vec::with_capacity(cells + 1);
    for &t in &q.times {
        let (v, vd) = ej.state_at(t);
        nodes.push(Configuration { x: c * v, y: c * v, z: c * v });
        vel.push([c * vd; 3]);
    }
    nodes[0] = Configuration { x: 0.0, y: 0.0, z: 0.0 };
    let mut seg = FundamentalSegment::new(period, q.times, nodes)?;
    seg.velocities = Some(vel);
    Ok(seg)
}

/// Homothetic segment with every free coordinate scaled by `1 + noise·u`,
/// `u` uniform in `[−1, 1]` from a seeded generator, projected onto the
/// constraints.
pub fn perturbed_homothetic_seed(period: f64, cells: usize, p: f64, noise: f64, seed: u64) -> Result<FundamentalSegment> {
    let base = homothetic_segment(period, cells, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = base.clone();
    for c in out.nodes.iter_mut() {
        c.x *= 1.0 + noise * rng.gen_range(-1.0..=1.0);
        c.y *= 1.0 + noise * rng.gen_range(-1.0..=1.0);
        c.z *= 1.0 + noise * rng.gen_range(-1.0..=1.0);
    }
    Ok(project_constraints(&out))
}

/// Transfers a segment to the graded mesh with `cells` cells by local cubic
/// interpolation in the mesh variable `σ = (t/(T/6))^{1/p}`, then projects
/// onto the constraints.
pub fn interpolate_segment(seg: &FundamentalSegment, cells: usize, p: f64) -> Result<FundamentalSegment> {
    if seg.nodes.len() < 4 {
        return Err(Error::Domain("interpolation needs at least 4 nodes".into()));
    }
    let end = seg.end_time();
    let q = QuadratureScheme::graded(seg.period, cells, p)?;
    let sigma_old: Vec<f64> = seg.times.iter().map(|t| (t / end).powf(1.0 / p)).collect();
    let pts: Vec<Vec3> = seg.nodes.iter().map(|c| c.to_array()).collect();
    let m = pts.len();
    let nodes = q
        .times
        .iter()
        .map(|&t| {
            let s = (t / end).powf(1.0 / p);
            let k = sigma_old.partition_point(|&x| x <= s).clamp(2, m - 2);
            let idx = [k - 2, k - 1, k, k + 1];
            let mut out = [0.0; 3];
            for &a in &idx {
                let mut w = 1.0;
                for &b in &idx {
                    if a != b {
                        w *= (s - sigma_old[b]) / (sigma_old[a] - sigma_old[b]);
                    }
                }
                for c in 0..3 {
                    out[c] += w * pts[a][c];
                }
            }
            Configuration { x: out[0], y: out[1], z: out[2] }
        })
        .collect();
    let raw = FundamentalSegment::unconstrained(seg.period, q.times, nodes)?;
    Ok(project_constraints(&raw))
}
