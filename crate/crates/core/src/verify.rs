//! Independent oracles and the verification suite for computed orbits.

use crate::action::{discretized_action, QuadratureScheme, DEFAULT_MESH_P};
use crate::central_config::curly_g;
use crate::dynamics::{gradient_raw, hamiltonian, CollisionKind, State};
use crate::error::{Error, Result};
use crate::kepler::RadialEjection;
use crate::ode::{integrate, Direction, OdeOptions, StopReason};
use crate::regularize::{
    continue_through_collision, from_regularized, integrate_physical, reintegrate_from_collision,
    to_regularized, ArcStop, Reintegration, RegularizedState,
};
use crate::symmetry::{restrict_to_segment, symmetry_residual, PeriodicOrbit};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Accuracy of collision times along a re-integration; the Sundman window
/// starts at ten times this value.
pub const TOL_T: f64 = 1e-11;

pub const SYMMETRY_GRID_TOL: f64 = 1e-14;
pub const SYMMETRY_REINTEGRATED_TOL: f64 = 1e-6;
pub const ENERGY_DRIFT_TOL: f64 = 1e-9;
pub const COLLISION_TIME_TOL: f64 = 1e-6;
pub const QUADRUPLE_CLEARANCE: f64 = 1e-6;
pub const BACKWARD_CONTINUATION_TOL: f64 = 1e-7;
pub const SUNDMAN_EXPONENT_TOL: f64 = 0.01;
pub const MONOTONICITY_TOL: f64 = 1e-10;
pub const EOM_RESIDUAL_TOL: f64 = 1e-5;
pub const ENDPOINT_TOL: f64 = 1e-12;

/// Integrator settings used for re-integration.
pub fn reintegration_options() -> OdeOptions {
    OdeOptions { rtol: 1e-13, atol: 1e-14, ..OdeOptions::default() }
}

/// `α₀ = (3/2^{1/3})(πg)^{2/3}`, the constant in the homothetic action `α₀τ^{1/3}`.
pub fn alpha0(g: f64) -> f64 {
    3.0 / 2f64.cbrt() * (PI * g).powf(2.0 / 3.0)
}

/// Action of the radial collision-ejection motion `v̈ = −g/v²` of period `τ`,
/// integrated numerically.
pub fn kepler_homothetic_action(g: f64, tau: f64) -> Result<f64> {
    Ok(2.0 * RadialEjection::new(g, 0.5 * tau)?.half_action())
}

/// Action of the homothetic motion over `[0, T/6]`: `α₀/2^{2/3}·(T/6)^{1/3}`.
pub fn homothetic_bound(period: f64) -> f64 {
    alpha0(curly_g()) / 2f64.powf(2.0 / 3.0) * (period / 6.0).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SundmanFit {
    pub t_bar: f64,
    pub x0: f64,
    pub exponent: f64,
    pub fit_residual: f64,
    pub samples: usize,
}

fn power_fit(times: &[f64], values: &[f64], t_bar: f64, window: (f64, f64)) -> Option<SundmanFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter_map(|(&t, &v)| {
            let d = (t - t_bar).abs();
            (d >= window.0 && d <= window.1 && v > 0.0).then(|| (d.ln(), v.ln()))
        })
        .collect();
    let n = pts.len();
    if n < 8 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Some(SundmanFit {
        t_bar,
        x0: icpt.exp(),
        exponent: slope,
        fit_residual: (ss / nf).sqrt(),
        samples: n,
    })
}

/// Power-law fit `v ≈ x0·|t − t̄|^e` over samples with `|t − t̄|` in `window`.
/// `t̄` is refined by golden-section search on the fit residual within half
/// the distance from `t_guess` to the nearest sample.
pub fn sundman_fit(times: &[f64], values: &[f64], t_guess: f64, window: (f64, f64)) -> Result<SundmanFit> {
    let too_small = || Error::WindowTooSmall(format!("fewer than 8 samples in [{:e}, {:e}]", window.0, window.1));
    if times.len() != values.len() || !(window.0 > 0.0 && window.1 > window.0) {
        return Err(too_small());
    }
    power_fit(times, values, t_guess, window).ok_or_else(too_small)?;
    let gap = times.iter().map(|&t| (t - t_guess).abs()).fold(f64::INFINITY, f64::min);
    let delta = 0.5 * gap;
    let cost = |tb: f64| power_fit(times, values, tb, window).map_or(f64::INFINITY, |f| f.fit_residual);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (t_guess - delta, t_guess + delta);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-3 * f64::EPSILON * t_guess.abs().max(delta) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = cost(d);
        }
    }
    let best = [(cost(t_guess), t_guess), (fc, c), (fd, d)]
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("candidates");
    power_fit(times, values, best.1, window).ok_or_else(too_small)
}

/// Samples of `coord` on the far side of a collision at `t_c`, log-spaced over
/// the Sundman window.
fn collision_samples(re: &Reintegration, t_c: f64, coord: usize, window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    const COUNT: usize = 64;
    let (l0, l1) = (window.0.ln(), window.1.ln());
    (0..COUNT)
        .map(|i| {
            let t = t_c + (l0 + (l1 - l0) * i as f64 / (COUNT - 1) as f64).exp();
            (t, re.state_at(t).config.to_array()[coord])
        })
        .unzip()
}

/// Sundman window `[10·TOL_T, 0.01·T]`.
pub fn sundman_window(period: f64) -> (f64, f64) {
    (10.0 * TOL_T, 0.01 * period)
}

/// Fit of the vanishing coordinate after the collision at `t_c`.
pub fn sundman_fit_reintegration(re: &Reintegration, t_c: f64, coord: usize, period: f64) -> Result<SundmanFit> {
    let window = sundman_window(period);
    let (t, v) = collision_samples(re, t_c, coord, window);
    sundman_fit(&t, &v, t_c, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityDiagnostic {
    /// Length of the first third of the loop.
    pub length: f64,
    pub max_norm: f64,
    pub a: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `min over α ∈ [0, π/3] of sin α + sin(π/3 − α)`.
pub fn coercivity_constant() -> f64 {
    const STEPS: usize = 1000;
    (0..=STEPS)
        .map(|i| {
            let a = PI / 3.0 * i as f64 / STEPS as f64;
            a.sin() + (PI / 3.0 - a).sin()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Length of the polygon through the samples on `[0, T/3]` against
/// `a·max‖X‖` over the same samples.
pub fn coercivity_diagnostic(orbit: &PeriodicOrbit) -> CoercivityDiagnostic {
    let third = orbit.period / 3.0 * (1.0 + 1e-12);
    let pts: Vec<[f64; 3]> = orbit
        .times
        .iter()
        .zip(&orbit.samples)
        .filter(|(&t, _)| t <= third)
        .map(|(_, s)| s.config.to_array())
        .collect();
    let length = pts
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt())
        .sum();
    let max_norm = pts.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).fold(0.0, f64::max);
    let a = coercivity_constant();
    let rhs = a * max_norm;
    CoercivityDiagnostic { length, max_norm, a, rhs, holds: length >= rhs }
}

fn second_difference(orbit: &PeriodicOrbit, a: usize, b: usize, c: usize) -> [f64; 3] {
    let (h0, h1) = (orbit.times[b] - orbit.times[a], orbit.times[c] - orbit.times[b]);
    let pa = orbit.samples[a].config.to_array();
    let pb = orbit.samples[b].config.to_array();
    let pc = orbit.samples[c].config.to_array();
    [0, 1, 2].map(|k| 2.0 * ((pc[k] - pb[k]) / h1 - (pb[k] - pa[k]) / h0) / (h0 + h1))
}

fn eom_residual_with<F>(orbit: &PeriodicOrbit, margin: f64, reach: usize, accel: F) -> f64
where
    F: Fn(usize) -> [f64; 3],
{
    let t3 = orbit.period / 3.0;
    let n = orbit.len();
    let mut worst: f64 = 0.0;
    for i in reach..n.saturating_sub(reach) {
        let r = orbit.times[i].rem_euclid(t3);
        if r < margin || t3 - r < margin {
            continue;
        }
        let grad = gradient_raw(&orbit.samples[i].config.to_array());
        let dd = accel(i);
        for k in 0..3 {
            worst = worst.max((dd[k] - grad[k]).abs());
        }
    }
    worst
}

/// Largest `‖ΔX²/Δt² − ∇U(X)‖∞` over samples at least `margin` away from the
/// collision times `kT/3`, using second differences on the nonuniform grid.
/// Decreases as the square of the spacing.
pub fn eom_residual(orbit: &PeriodicOrbit, margin: f64) -> f64 {
    eom_residual_with(orbit, margin, 1, |i| second_difference(orbit, i - 1, i, i + 1))
}

/// As [`eom_residual`] with the Richardson combination `(4D₁ − D₂)/3` of the
/// second differences over one and two grid steps, which removes the leading
/// truncation error.
pub fn eom_residual_extrapolated(orbit: &PeriodicOrbit, margin: f64) -> f64 {
    eom_residual_with(orbit, margin, 2, |i| {
        let d1 = second_difference(orbit, i - 1, i, i + 1);
        let d2 = second_difference(orbit, i - 2, i, i + 2);
        [0, 1, 2].map(|k| (4.0 * d1[k] - d2[k]) / 3.0)
    })
}

/// Counts grid steps where `x` fails to increase on `[0, T/2]` or to decrease
/// on `[T/2, T]`, with tolerance [`MONOTONICITY_TOL`].
pub fn monotonicity_violations(orbit: &PeriodicOrbit) -> usize {
    let half = 0.5 * orbit.period;
    let mut count = 0;
    for i in 0..orbit.len() {
        let j = (i + 1) % orbit.len();
        let (t0, t1) = (orbit.times[i], if j == 0 { orbit.period } else { orbit.times[j] });
        let d = orbit.samples[j].config.x - orbit.samples[i].config.x;
        let bad = if t1 <= half * (1.0 + 1e-12) {
            d < -MONOTONICITY_TOL
        } else if t0 >= half * (1.0 - 1e-12) {
            d > MONOTONICITY_TOL
        } else {
            false
        };
        count += bad as usize;
    }
    count
}

/// Interior samples where `ẍ = ∂U/∂x` is not negative.
pub fn acceleration_violations(orbit: &PeriodicOrbit) -> usize {
    orbit
        .samples
        .iter()
        .filter(|s| !s.config.is_collision())
        .filter(|s| !(gradient_raw(&s.config.to_array())[0] < 0.0))
        .count()
}

/// Smallest second-smallest coordinate over the samples: distance from a
/// quadruple or total collision.
pub fn quadruple_clearance(orbit: &PeriodicOrbit) -> f64 {
    orbit
        .samples
        .iter()
        .map(|s| {
            let mut p = s.config.to_array();
            p.sort_by(f64::total_cmp);
            p[1]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Integrates the physical and regularized formulations from the same interior
/// state for physical time `dt` and returns the largest difference in
/// positions and velocities at matched physical times.
pub fn flow_equivalence(state: &State, dt: f64, opts: &OdeOptions) -> Result<f64> {
    let h = hamiltonian(state);
    let phys = integrate_physical(state, 0.0, dt, opts)?;
    if phys.stop != ArcStop::SpanEnd {
        return Err(Error::Domain("flow comparison arc approaches a collision".into()));
    }
    let r0 = to_regularized(state, h, 0.0, [1.0; 3]);
    let reg = integrate(
        |_s, y: &[f64], dy: &mut [f64]| {
            let dd = crate::regularize::reg_rhs(&RegularizedState::from_vector(y, 0.0, h))?;
            dy.copy_from_slice(&dd);
            Ok(())
        },
        0.0,
        &r0.to_vector(),
        1e6,
        opts,
        Some((|_s: f64, y: &[f64]| y[6] - dt, Direction::Rising)),
    )?;
    if reg.stop != StopReason::Event {
        return Err(Error::Domain("regularized flow did not reach the comparison time".into()));
    }
    const COUNT: usize = 21;
    let mut worst: f64 = 0.0;
    for i in 0..COUNT {
        let t = dt * i as f64 / (COUNT - 1) as f64;
        let s = reg.invert_monotone(6, t).unwrap_or_else(|| reg.t_end());
        let a = from_regularized(&RegularizedState::from_vector(&reg.eval(s), s, h));
        let b = phys.state_at(t);
        let (pa, pb) = (a.config.to_array(), b.config.to_array());
        for k in 0..3 {
            worst = worst.max((pa[k] - pb[k]).abs()).max((a.velocity[k] - b.velocity[k]).abs());
        }
    }
    Ok(worst)
}

/// Continues `start` at time `t0 > 0` backward through the collision near
/// `t = 0` to `−t0` and returns the state there with the collision time.
pub fn backward_continuation(start: &State, t0: f64, h: f64, opts: &OdeOptions) -> Result<(State, f64)> {
    let arc = integrate_physical(start, t0, -t0, opts)?;
    if arc.stop == ArcStop::SpanEnd {
        return Err(Error::Domain("no collision between the start and its mirror time".into()));
    }
    let (t1, s1) = arc.end();
    let passage = continue_through_collision(&s1, t1, Some(h), false, opts)?;
    let after = integrate_physical(&passage.exit, passage.exit_time, -t0, opts)?;
    if after.stop != ArcStop::SpanEnd {
        return Err(Error::Domain("second collision before the mirror time".into()));
    }
    Ok((after.end().1, passage.collision_time))
}

/// Deviation from `x(−t) = x(t)`, `y(−t) = z(t)`, `z(−t) = y(t)`.
pub fn mirror_deviation(forward: &State, backward: &State) -> f64 {
    let a = forward.config;
    let b = backward.config;
    (a.x - b.x).abs().max((a.y - b.z).abs()).max((a.z - b.y).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(value: f64, threshold: f64) -> Self {
        Check { value, threshold, pass: value < threshold }
    }

    fn at_most(value: f64, threshold: f64) -> Self {
        Check { value, threshold, pass: value <= threshold }
    }

    fn above(value: f64, threshold: f64) -> Self {
        Check { value, threshold, pass: value > threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub action: f64,
    pub homothetic_bound: f64,
    pub energy: f64,
    pub symmetry_residual: f64,
    pub reintegrated_symmetry_residual: f64,
    pub energy_drift: f64,
    pub monotonicity_violations: usize,
    pub acceleration_violations: usize,
    pub collision_times: Vec<f64>,
    pub sundman_exponents: Vec<f64>,
    pub eom_residual: f64,
    pub backward_continuation_error: f64,
    pub coercivity: CoercivityDiagnostic,
    pub checks: BTreeMap<String, Check>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }
}

/// Re-integration of one period from the collision sample at `t = 0`.
pub fn reintegrate_orbit(orbit: &PeriodicOrbit, opts: &OdeOptions) -> Result<Reintegration> {
    let i0 = orbit
        .index_of(0.0)
        .ok_or_else(|| Error::IncompatibleGrid("no sample at t = 0".into()))?;
    let s = &orbit.samples[i0];
    if s.config.collision_kind() != CollisionKind::Double || s.config.x != 0.0 {
        return Err(Error::Constraint("the sample at t = 0 is not an x-collision".into()));
    }
    let r = |v: f64| v.sqrt();
    let start = RegularizedState {
        gamma: 0.0,
        upsilon: r(s.config.y),
        zeta: r(s.config.z),
        big_gamma: 1.0,
        big_upsilon: 2.0 * s.velocity[1] * r(s.config.y),
        big_z: 2.0 * s.velocity[2] * r(s.config.z),
        s: 0.0,
        t: 0.0,
        h: orbit.energy,
    };
    reintegrate_from_collision(&start, orbit.period, opts)
}

/// Runs every check on an orbit. Orbits through quadruple or total collisions
/// are rejected; all other failures are recorded in the report.
pub fn verify_orbit(orbit: &PeriodicOrbit) -> Result<VerificationReport> {
    if orbit.is_empty() {
        return Err(Error::Domain("empty orbit".into()));
    }
    if let Some((t, _)) = orbit.times.iter().zip(&orbit.samples).find(|(_, s)| {
        matches!(s.config.collision_kind(), CollisionKind::Quadruple | CollisionKind::Total)
    }) {
        return Err(Error::Constraint(format!("quadruple or total collision at t = {t}")));
    }
    let period = orbit.period;
    let t3 = period / 3.0;
    let opts = reintegration_options();
    let mut checks = BTreeMap::new();
    let inf = f64::INFINITY;

    let sym = symmetry_residual(orbit);
    checks.insert("symmetry_grid".into(), Check::below(sym, SYMMETRY_GRID_TOL));

    let action = restrict_to_segment(orbit)
        .and_then(|seg| {
            let q = QuadratureScheme::from_times(seg.times.clone(), DEFAULT_MESH_P)?;
            discretized_action(&seg, &q)
        })
        .unwrap_or(f64::NAN);
    let bound = homothetic_bound(period);
    checks.insert("action_below_homothetic_bound".into(), Check { value: action, threshold: bound, pass: action < bound });

    let endpoint = [(0.0, 0), (t3, 1), (2.0 * t3, 2)]
        .iter()
        .map(|&(t, k)| match orbit.index_of(t) {
            Some(i) => {
                let p = orbit.samples[i].config.to_array();
                p[k].abs().max((p[(k + 1) % 3] - p[(k + 2) % 3]).abs())
            }
            None => inf,
        })
        .fold(0.0, f64::max);
    checks.insert("endpoint_relations".into(), Check::below(endpoint, ENDPOINT_TOL));

    let grid_collisions: Vec<f64> = orbit
        .times
        .iter()
        .zip(&orbit.samples)
        .filter(|(_, s)| s.config.is_collision())
        .map(|(&t, _)| t)
        .collect();

    let clearance = quadruple_clearance(orbit);
    checks.insert("quadruple_clearance".into(), Check::above(clearance, QUADRUPLE_CLEARANCE));

    let mono = monotonicity_violations(orbit);
    checks.insert("monotonicity".into(), Check::at_most(mono as f64, 0.0));
    let accel = acceleration_violations(orbit);
    checks.insert("acceleration_sign".into(), Check::at_most(accel as f64, 0.0));

    let eom = eom_residual_extrapolated(orbit, period / 60.0);
    checks.insert("eom_residual".into(), Check::below(eom, EOM_RESIDUAL_TOL));

    let coercivity = coercivity_diagnostic(orbit);
    checks.insert(
        "coercivity".into(),
        Check { value: coercivity.length, threshold: coercivity.rhs, pass: coercivity.holds },
    );

    let mut collision_times = Vec::new();
    let mut sundman_exponents = vec![f64::NAN; 3];
    let mut reint_sym = inf;
    let mut drift = inf;
    let mut backward = inf;
    let mut collision_dev = inf;
    if let Ok(re) = reintegrate_orbit(orbit, &opts) {
        let mut passages: Vec<(usize, f64)> = vec![(0, 0.0)];
        passages.extend(re.passages.iter().map(|p| (p.coord, p.collision_time)));
        collision_times = passages.iter().map(|p| p.1).collect();
        let expected = [(0usize, 0.0), (1, t3), (2, 2.0 * t3), (0, period)];
        let grid_ok = grid_collisions.len() == 3
            && grid_collisions.iter().zip([0.0, t3, 2.0 * t3]).all(|(a, b)| (a - b).abs() <= 1e-12 * period);
        if passages.len() == expected.len() && grid_ok {
            collision_dev = passages
                .iter()
                .zip(expected)
                .map(|(&(k, t), (ke, te))| if k == ke { (t - te).abs() } else { inf })
                .fold(0.0, f64::max);
        }
        let samples: Vec<State> = orbit.times.iter().map(|&t| re.state_at(t)).collect();
        let re_orbit = PeriodicOrbit { samples, ..orbit.clone() };
        reint_sym = symmetry_residual(&re_orbit);
        drift = re.physical_energy_drift();
        for p in &re.passages {
            drift = drift.max((p.energy_after - p.energy_before).abs()).max((p.energy_before - re.h).abs());
        }
        for (k, &(coord, t_c)) in passages.iter().take(3).enumerate() {
            if let Ok(fit) = sundman_fit_reintegration(&re, t_c, coord, period) {
                sundman_exponents[k] = fit.exponent;
            }
        }
        let t12 = period / 12.0;
        let fwd = re.state_at(t12);
        if let Ok((back, _)) = backward_continuation(&fwd, t12, re.h, &opts) {
            backward = mirror_deviation(&fwd, &back);
        }
    }
    checks.insert("symmetry_reintegrated".into(), Check::below(reint_sym, SYMMETRY_REINTEGRATED_TOL));
    checks.insert("energy_drift".into(), Check::below(drift, ENERGY_DRIFT_TOL));
    checks.insert("collision_times".into(), Check::below(collision_dev, COLLISION_TIME_TOL));
    checks.insert("backward_continuation".into(), Check::below(backward, BACKWARD_CONTINUATION_TOL));
    for (k, e) in sundman_exponents.iter().enumerate() {
        let dev = (e - 2.0 / 3.0).abs();
        checks.insert(
            format!("sundman_exponent_{k}"),
            Check::below(if dev.is_nan() { inf } else { dev }, SUNDMAN_EXPONENT_TOL),
        );
    }

    Ok(VerificationReport {
        action,
        homothetic_bound: bound,
        energy: orbit.energy,
        symmetry_residual: sym,
        reintegrated_symmetry_residual: reint_sym,
        energy_drift: drift,
        monotonicity_violations: mono,
        acceleration_violations: accel,
        collision_times,
        sundman_exponents,
        eom_residual: eom,
        backward_continuation_error: backward,
        coercivity,
        checks,
    })
}
