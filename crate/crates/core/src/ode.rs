//! Adaptive Dormand–Prince 5(4) integrator with continuous output and
//! terminal event location.
//!
//! The independent variable is called `t` here; the regularized flow uses it
//! for the fictitious time `s`. Integration runs in either direction.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; chosen automatically when `None`.
    pub first_step: Option<f64>,
    pub max_step: f64,
    /// Smallest admissible step magnitude (a floor of 16 ulp of `t` also applies).
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-12,
            first_step: None,
            max_step: f64::INFINITY,
            min_step: 1e-20,
            max_steps: 2_000_000,
        }
    }
}

/// Which zero crossings of an event function terminate the integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    SpanEnd,
    Event,
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + theta1 * (self.r[2][i] + theta * (self.r[3][i] + theta1 * self.r[4][i])));
        }
    }

    fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Result of an integration: accepted steps, continuous output and the stop reason.
#[derive(Debug, Clone)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stop: StopReason,
    pub rhs_evals: usize,
    segments: Vec<Segment>,
}

impl Solution {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("solution holds at least the initial point")
    }

    pub fn y_end(&self) -> &[f64] {
        self.y.last().expect("solution holds at least the initial point")
    }

    pub fn dim(&self) -> usize {
        self.y[0].len()
    }

    /// Continuous output at `t` within the integrated span (clamped to it).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if self.segments.is_empty() {
            out.copy_from_slice(&self.y[0]);
            return out;
        }
        let forward = self.t_end() >= self.t_start();
        // segments are ordered along the integration direction
        let idx = self
            .segments
            .partition_point(|s| if forward { s.t1() < t } else { s.t1() > t })
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t, &mut out);
        out
    }

    /// Time at which component `comp` reaches `target`, assuming it is
    /// monotone along the solution. `None` when `target` is out of range.
    pub fn invert_monotone(&self, comp: usize, target: f64) -> Option<f64> {
        let first = self.y[0][comp];
        let last = self.y_end()[comp];
        let rising = last >= first;
        let (lo, hi) = if rising { (first, last) } else { (last, first) };
        if !(target >= lo && target <= hi) {
            return None;
        }
        let before = |v: f64| if rising { v < target } else { v > target };
        let k = self.y.partition_point(|y| before(y[comp]));
        if k == 0 {
            return Some(self.t[0]);
        }
        let (mut a, mut b) = (self.t[k - 1], self.t[k]);
        let mut fa = self.y[k - 1][comp] - target;
        let fb = self.y[k][comp] - target;
        if fb == 0.0 {
            return Some(b);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            let fm = self.eval(m)[comp] - target;
            if fm == 0.0 {
                return Some(m);
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    }

    /// Appends another solution that starts where this one ends.
    pub fn append(&mut self, other: Solution) {
        self.t.extend_from_slice(&other.t[1..]);
        self.y.extend(other.y.into_iter().skip(1));
        self.segments.extend(other.segments);
        self.stop = other.stop;
        self.rhs_evals += other.rhs_evals;
    }
}

fn error_norm(err: &[f64], y: &[f64], ynew: &[f64], opts: &OdeOptions) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(ynew))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// With an event function `g`, the integration terminates at the first zero
/// of `g` crossed in the requested direction (the initial point is never an
/// event). The crossing is located on the continuous output.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut event: Option<(G, Direction)>,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(f64, &[f64]) -> f64,
{
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();

    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        stop: StopReason::SpanEnd,
        rhs_evals: 0,
        segments: Vec::new(),
    };
    if span == 0.0 {
        return Ok(sol);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1)?;
    sol.rhs_evals += 1;

    let mut h = match opts.first_step {
        Some(h) => h.abs(),
        None => initial_step(&mut f, t, &y, &k1, dir, opts)?,
    }
    .min(opts.max_step)
    .min(span);
    sol.rhs_evals += 1;

    let mut g_prev = event.as_mut().map(|(g, _)| g(t, &y));

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut last = false;

    for _ in 0..opts.max_steps {
        let remaining = (t_end - t) * dir;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < opts.min_step.max(16.0 * f64::EPSILON * t.abs()) {
            return Err(Error::StepUnderflow { t, h });
        }
        let hs = h * dir;

        let stage = |ytmp: &mut [f64], coeffs: &[(f64, &[f64])]| {
            for i in 0..n {
                let mut acc = 0.0;
                for (a, k) in coeffs {
                    acc += a * k[i];
                }
                ytmp[i] = y[i] + hs * acc;
            }
        };

        stage(&mut ytmp, &[(A21, &k1)]);
        let ok = f(t + C2 * hs, &ytmp, &mut k2).and_then(|_| {
            stage(&mut ytmp, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * hs, &ytmp, &mut k3)
        });
        let ok = ok.and_then(|_| {
            stage(&mut ytmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * hs, &ytmp, &mut k4)
        });
        let ok = ok.and_then(|_| {
            stage(&mut ytmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            f(t + C5 * hs, &ytmp, &mut k5)
        });
        let ok = ok.and_then(|_| {
            stage(&mut ytmp, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            f(t + hs, &ytmp, &mut k6)
        });
        let ok = ok.and_then(|_| {
            stage(&mut ynew, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            f(t + hs, &ynew, &mut k7)
        });
        sol.rhs_evals += 6;

        // A failed evaluation inside the step (e.g. a stage landing on a
        // singularity) is treated as a rejected step.
        let err_norm = match ok {
            Ok(()) => {
                for i in 0..n {
                    err[i] = hs
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                }
                let e = error_norm(&err, &y, &ynew, opts);
                if e.is_finite() {
                    e
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        };

        if err_norm <= 1.0 {
            let mut r = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = hs * k1[i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hs * k7[i] - bspl;
                r[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = Segment { t0: t, h: hs, r };
            let t_new = if last { t_end } else { t + hs };

            if let Some((g, direction)) = event.as_mut() {
                let g0 = g_prev.expect("event value initialized with the event");
                let g1 = g(t_new, &ynew);
                let crossed = match direction {
                    Direction::Rising => g0 < 0.0 && g1 >= 0.0,
                    Direction::Falling => g0 > 0.0 && g1 <= 0.0,
                    Direction::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
                };
                if crossed {
                    let te = locate_root(&seg, g, t, t_new, g0, g1, n);
                    let mut ye = vec![0.0; n];
                    seg.eval(te, &mut ye);
                    // the polynomial of the full step stays valid up to te
                    sol.segments.push(seg);
                    sol.t.push(te);
                    sol.y.push(ye);
                    sol.stop = StopReason::Event;
                    return Ok(sol);
                }
                g_prev = Some(g1);
            }

            sol.segments.push(seg);
            t = t_new;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            sol.t.push(t);
            sol.y.push(y.clone());
            if last {
                sol.stop = StopReason::SpanEnd;
                return Ok(sol);
            }
            let fac = if err_norm == 0.0 { 5.0 } else { 0.9 * err_norm.powf(-0.2) };
            h = (h * fac.clamp(0.2, 5.0)).min(opts.max_step);
        } else {
            last = false;
            let fac = if err_norm.is_finite() { 0.9 * err_norm.powf(-0.2) } else { 0.1 };
            h *= fac.clamp(0.1, 0.9);
        }
    }
    Err(Error::StepUnderflow { t, h })
}

fn locate_root<G: FnMut(f64, &[f64]) -> f64>(
    seg: &Segment,
    g: &mut G,
    ta: f64,
    tb: f64,
    ga: f64,
    gb: f64,
    n: usize,
) -> f64 {
    // Illinois variant of regula falsi on the continuous output.
    let mut buf = vec![0.0; n];
    let (mut a, mut b, mut fa, mut fb) = (ta, tb, ga, gb);
    if fb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        seg.eval(c, &mut buf);
        let fc = g(c, &buf);
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    // return the bracket end on the far side of the crossing
    b
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.max_step);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(v, d)| v + dir * h0 * d).collect();
    let mut f1 = vec![0.0; n];
    if f(t + dir * h0, &y1, &mut f1).is_err() {
        return Ok(h0 * 1e-3);
    }
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}
