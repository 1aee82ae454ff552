//! Limited-memory quasi-Newton descent on the fundamental segment.
//!
//! The free variables are ordered along one chain
//!
//! ```text
//! z_N, …, z_1, w = y_0 = z_0, y_1, …, y_{N−1}, a = x_N = y_N, x_{N−1}, …, x_1
//! ```
//!
//! in which the kinetic part of the action has a tridiagonal Hessian (the
//! fixed `x_0 = 0` closes the chain). Its inverse seeds the two-loop
//! recursion. Steps are accepted on an Armijo test evaluated with the
//! cancellation-free action difference.

use super::{
    action_diff_raw, action_raw, gradient_inf_norm, gradient_nodes_raw, interpolate_segment,
    legendre_velocities, project_gradient, QuadratureScheme,
};
use crate::dynamics::{Configuration, Vec3};
use crate::error::{Error, Result};
use crate::symmetry::{FundamentalSegment, POSITIVITY_FLOOR};
use serde::Serialize;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Iteration budget per mesh level.
    pub max_iters: usize,
    /// Stop when the projected gradient has max-norm below this value.
    pub grad_tol: f64,
    /// Cell counts visited in order; empty keeps the seed's mesh.
    pub mesh_schedule: Vec<usize>,
    pub mesh_p: f64,
    /// Number of stored correction pairs.
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 200_000,
            grad_tol: 1e-8,
            mesh_schedule: vec![256, 512, 1024],
            mesh_p: super::DEFAULT_MESH_P,
            memory: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No decrease along the search direction or steepest descent; the
    /// gradient is at its rounding floor on this mesh.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub cells: usize,
    pub iterations: usize,
    pub action: f64,
    pub gradient_inf_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeReport {
    pub action: f64,
    pub gradient_inf_norm: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
    pub cells: usize,
    pub mesh_p: f64,
    pub termination: Termination,
    pub levels: Vec<LevelReport>,
    /// Action after every accepted step on the final level, starting with the
    /// level's initial value.
    pub action_history: Vec<f64>,
}

/// Index bookkeeping for the chain ordering.
struct Chain {
    n: usize,
}

impl Chain {
    fn pack(&self, p: &[Vec3]) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; 3 * n];
        for j in 1..=n {
            q[n - j] = p[j][2];
        }
        q[n] = p[0][1];
        for j in 1..n {
            q[n + j] = p[j][1];
            q[3 * n - j] = p[j][0];
        }
        q[2 * n] = p[n][0];
        q
    }

    fn unpack(&self, q: &[f64], p: &mut [Vec3]) {
        let n = self.n;
        p[0] = [0.0, q[n], q[n]];
        for j in 1..n {
            p[j] = [q[3 * n - j], q[n + j], q[n - j]];
        }
        p[n] = [q[2 * n], q[2 * n], q[0]];
    }

    fn reduce(&self, g: &[Vec3]) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; 3 * n];
        for j in 1..=n {
            r[n - j] = g[j][2];
        }
        r[n] = g[0][1] + g[0][2];
        for j in 1..n {
            r[n + j] = g[j][1];
            r[3 * n - j] = g[j][0];
        }
        r[2 * n] = g[n][0] + g[n][1];
        r
    }

    /// Kinetic Hessian as (diagonal, off-diagonal) in chain order.
    fn kinetic_hessian(&self, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let len = 3 * n;
        let inv_h = |cell: usize| 1.0 / (times[cell + 1] - times[cell]);
        let mut diag = vec![0.0; len];
        let mut off = vec![0.0; len - 1];
        for k in 0..len - 1 {
            let cell = if k < n {
                n - 1 - k
            } else if k < 2 * n {
                k - n
            } else {
                3 * n - k - 1
            };
            let w = inv_h(cell);
            off[k] = -w;
            diag[k] += w;
            diag[k + 1] += w;
        }
        diag[len - 1] += inv_h(0);
        (diag, off)
    }
}

/// Solves a symmetric tridiagonal system by the Thomas algorithm.
struct Tridiagonal {
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    fn factor(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        for i in 0..n {
            if i > 0 {
                denom[i] = diag[i] - off[i - 1] * c_prime[i - 1];
            }
            if i + 1 < n {
                c_prime[i] = off[i] / denom[i];
            }
        }
        Tridiagonal { c_prime, denom, off: off.to_vec() }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut d = vec![0.0; n];
        d[0] = rhs[0] / self.denom[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
        d
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Level {
    nodes: Vec<Vec3>,
    iterations: usize,
    action: f64,
    grad_norm: f64,
    history: Vec<f64>,
    converged: bool,
    stalled: bool,
}

fn projected_norm(g_nodes: &[Vec3]) -> f64 {
    let mut g = g_nodes.to_vec();
    project_gradient(&mut g);
    gradient_inf_norm(&g)
}

fn run_level(times: &[f64], start: &[Vec3], opts: &MinimizeOptions) -> Result<Level> {
    let n = start.len() - 1;
    let chain = Chain { n };
    let (diag, off) = chain.kinetic_hessian(times);
    let precond = Tridiagonal::factor(&diag, &off);

    let mut x = chain.pack(start);
    let mut pts = start.to_vec();
    chain.unpack(&x, &mut pts);
    let mut f = action_raw(times, &pts);
    if !f.is_finite() {
        return Err(Error::Constraint("seed has infinite action".into()));
    }
    let mut g_nodes = gradient_nodes_raw(times, &pts);
    let mut g = chain.reduce(&g_nodes);
    let mut gnorm = projected_norm(&g_nodes);
    let mut history = vec![f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trial_pts = pts.clone();
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < opts.max_iters {
        if gnorm < opts.grad_tol {
            break;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if mem.is_empty() {
                    break;
                }
                mem.clear();
            }
            let d = direction(&g, &mem, &precond);
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..80 {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                if xt.iter().all(|v| *v >= POSITIVITY_FLOOR) {
                    chain.unpack(&xt, &mut trial_pts);
                    let df = action_diff_raw(times, &pts, &trial_pts);
                    if df.is_finite() && df <= 1e-4 * alpha * slope {
                        accepted = Some((xt, df));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((xt, df)) = accepted else {
            stalled = true;
            break;
        };
        chain.unpack(&xt, &mut pts);
        let g_new_nodes = gradient_nodes_raw(times, &pts);
        let g_new = chain.reduce(&g_new_nodes);
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = xt;
        f += df;
        g = g_new;
        g_nodes = g_new_nodes;
        gnorm = projected_norm(&g_nodes);
        history.push(f);
        iterations += 1;
    }
    Ok(Level {
        converged: gnorm < opts.grad_tol,
        stalled,
        nodes: pts,
        iterations,
        action: f,
        grad_norm: gnorm,
        history,
    })
}

/// Two-loop recursion with the scaled kinetic preconditioner as initial matrix.
fn direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, k: &Tridiagonal) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let mut r = k.solve(&q);
    if let Some((s, y, _)) = mem.back() {
        let ky = k.solve(y);
        let gamma = dot(s, y) / dot(y, &ky);
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Minimizes the discretized action over the constraint set, starting from a
/// feasible seed and visiting the meshes of `opts.mesh_schedule` in turn.
/// The returned segment carries Legendre velocities.
pub fn minimize(seed: &FundamentalSegment, opts: &MinimizeOptions) -> Result<(FundamentalSegment, MinimizeReport)> {
    seed.check_constraints()?;
    if seed.nodes.iter().skip(1).any(|c| c.to_array().iter().any(|v| *v < POSITIVITY_FLOOR)) {
        return Err(Error::Constraint("seed has coordinates below the positivity floor".into()));
    }
    if !(opts.grad_tol > 0.0) || opts.memory == 0 {
        return Err(Error::Domain("grad_tol must be positive and memory nonzero".into()));
    }
    let mut seg = seed.clone();
    let mut schedule = opts.mesh_schedule.clone();
    if schedule.is_empty() {
        schedule.push(seg.cells());
    }
    let mut levels = Vec::new();
    let mut total = 0;
    let mut last = None;
    for &cells in &schedule {
        if cells != seg.cells() {
            seg = interpolate_segment(&seg, cells, opts.mesh_p)?;
        }
        let mut start: Vec<Vec3> = seg.nodes.iter().map(|c| c.to_array()).collect();
        // the seed may carry x_0 = y_0 = z_0 = 0; lift to the floor
        if start[0][1] < POSITIVITY_FLOOR {
            start[0] = [0.0, POSITIVITY_FLOOR, POSITIVITY_FLOOR];
        }
        let level = run_level(&seg.times, &start, opts)?;
        total += level.iterations;
        seg.nodes = level
            .nodes
            .iter()
            .map(|p| Configuration { x: p[0], y: p[1], z: p[2] })
            .collect();
        levels.push(LevelReport {
            cells,
            iterations: level.iterations,
            action: level.action,
            gradient_inf_norm: level.grad_norm,
        });
        last = Some(level);
    }
    let level = last.expect("schedule is nonempty");
    let q = QuadratureScheme::from_times(seg.times.clone(), opts.mesh_p)?;
    seg.velocities = Some(legendre_velocities(&seg, &q)?);
    let report = MinimizeReport {
        action: action_raw(&seg.times, &level.nodes),
        gradient_inf_norm: level.grad_norm,
        iterations: total,
        constraint_residual: seg.constraint_residual(),
        cells: seg.cells(),
        mesh_p: opts.mesh_p,
        termination: if level.converged {
            Termination::Converged
        } else if level.stalled {
            Termination::Stalled
        } else {
            Termination::MaxIterations
        },
        levels,
        action_history: level.history,
    };
    Ok((seg, report))
}
