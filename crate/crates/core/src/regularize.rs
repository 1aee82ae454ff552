//! Regularization of the double collisions.
//!
//! Square-root coordinates `x = γ²`, `y = υ²`, `z = ζ²` with conjugates
//! `Γ = 2ẋγ`, `Υ = 2ẏυ`, `Z = 2żζ` and the clock `dt/ds = γ²υ²ζ²` turn the
//! equations of motion on the energy surface `H = h` into
//!
//! ```text
//! γ′ = υ²ζ²Γ/4
//! Γ′ = 2γυ²ζ²(h − f(γ, υ, ζ, Γ, Υ, Z)) − 2γ⁵υ²ζ²/(γ⁴+υ⁴)^{3/2} − 2γ⁵υ²ζ²/(γ⁴+ζ⁴)^{3/2}
//! ```
//!
//! and cyclically for `(υ, Υ)` and `(ζ, Z)`, where
//!
//! ```text
//! f(a, b, c, A, B, C) = (B²/(4b²) + C²/(4c²))/2 − M − (1/b² + 1/c²)/8
//! M = 1/√(γ⁴+υ⁴) + 1/√(γ⁴+ζ⁴) + 1/√(υ⁴+ζ⁴)
//! ```
//!
//! The products in the field are expanded so that it can be evaluated at a
//! single vanishing coordinate. Two vanishing coordinates are rejected.

use crate::action::{discretized_action, QuadratureScheme, DEFAULT_MESH_P};
use crate::dynamics::{gradient_raw, hamiltonian, Configuration, State, Vec3, ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::ode::{integrate, Direction, OdeOptions, Solution, StopReason};
use crate::symmetry::{reconstruct_orbit, FundamentalSegment, PeriodicOrbit};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

/// Physical and regularized integrations hand over when the smallest
/// coordinate drops below this multiple of the geometric mean of the others.
pub const SWITCH_RATIO: f64 = 1e-3;

const IDX_T: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizedState {
    pub gamma: f64,
    pub upsilon: f64,
    pub zeta: f64,
    pub big_gamma: f64,
    pub big_upsilon: f64,
    pub big_z: f64,
    pub s: f64,
    pub t: f64,
    pub h: f64,
}

impl RegularizedState {
    /// `(γ, Γ, υ, Υ, ζ, Z, t)`, the layout used by the integrator.
    pub fn to_vector(&self) -> [f64; 7] {
        [
            self.gamma,
            self.big_gamma,
            self.upsilon,
            self.big_upsilon,
            self.zeta,
            self.big_z,
            self.t,
        ]
    }

    pub fn from_vector(y: &[f64], s: f64, h: f64) -> Self {
        RegularizedState {
            gamma: y[0],
            big_gamma: y[1],
            upsilon: y[2],
            big_upsilon: y[3],
            zeta: y[4],
            big_z: y[5],
            t: y[6],
            s,
            h,
        }
    }

    fn roots(&self) -> Vec3 {
        [self.gamma, self.upsilon, self.zeta]
    }
}

/// Lift of a physical state. `signs` selects the branch of each square root.
/// At a collision coordinate the conjugate takes its limit `±1`, with the sign
/// of `ẋ` times the branch sign.
pub fn to_regularized(state: &State, h: f64, t: f64, signs: [f64; 3]) -> RegularizedState {
    let p = state.config.to_array();
    let mut root = [0.0; 3];
    let mut conj = [0.0; 3];
    for k in 0..3 {
        let sgn = if signs[k] < 0.0 { -1.0 } else { 1.0 };
        root[k] = sgn * p[k].sqrt();
        conj[k] = if p[k] <= ZERO_THRESHOLD {
            sgn * state.velocity[k].signum()
        } else {
            2.0 * state.velocity[k] * root[k]
        };
    }
    RegularizedState {
        gamma: root[0],
        upsilon: root[1],
        zeta: root[2],
        big_gamma: conj[0],
        big_upsilon: conj[1],
        big_z: conj[2],
        s: 0.0,
        t,
        h,
    }
}

/// Physical preimage `x = γ²`, `ẋ = Γ/(2γ)`; the velocity of a vanishing
/// coordinate is infinite.
pub fn from_regularized(r: &RegularizedState) -> State {
    let vel = |a: f64, b: f64| {
        if a == 0.0 {
            f64::INFINITY.copysign(b)
        } else {
            b / (2.0 * a)
        }
    };
    State {
        config: Configuration {
            x: r.gamma * r.gamma,
            y: r.upsilon * r.upsilon,
            z: r.zeta * r.zeta,
        },
        velocity: [
            vel(r.gamma, r.big_gamma),
            vel(r.upsilon, r.big_upsilon),
            vel(r.zeta, r.big_z),
        ],
    }
}

fn mutual(a: f64, b: f64, c: f64) -> f64 {
    let (a4, b4, c4) = (a.powi(4), b.powi(4), c.powi(4));
    1.0 / (a4 + b4).sqrt() + 1.0 / (a4 + c4).sqrt() + 1.0 / (b4 + c4).sqrt()
}

/// The Hamiltonian in regularized variables.
pub fn reg_hamiltonian(r: &RegularizedState) -> Result<f64> {
    let [a, b, c] = r.roots();
    if a.abs().min(b.abs()).min(c.abs()) * a.abs().min(b.abs()).min(c.abs()) <= ZERO_THRESHOLD {
        return Err(Error::Singular("regularized Hamiltonian at a collision".into()));
    }
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let kin = 0.5
        * (r.big_gamma.powi(2) / (4.0 * a2)
            + r.big_upsilon.powi(2) / (4.0 * b2)
            + r.big_z.powi(2) / (4.0 * c2));
    Ok(kin - mutual(a, b, c) - 0.125 * (1.0 / a2 + 1.0 / b2 + 1.0 / c2))
}

/// `f(a, b, c, A, B, C)`: the Hamiltonian with the self-interaction of the
/// first pair removed.
pub fn f_function(a: f64, b: f64, c: f64, _big_a: f64, big_b: f64, big_c: f64) -> f64 {
    let (b2, c2) = (b * b, c * c);
    0.5 * (big_b * big_b / (4.0 * b2) + big_c * big_c / (4.0 * c2))
        - mutual(a, b, c)
        - 0.125 * (1.0 / b2 + 1.0 / c2)
}

/// Momentum derivative of the pair `a` with partners `b`, `c`:
/// `2ab²c²(h − f(a, b, c, A, B, C))` minus the mutual forces, expanded.
fn momentum_rate(h: f64, a: f64, b: f64, c: f64, big_b: f64, big_c: f64, m: f64) -> f64 {
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let (a4, b4, c4) = (a2 * a2, b2 * b2, c2 * c2);
    2.0 * a * b2 * c2 * (h + m)
        - 0.25 * a * c2 * (big_b * big_b - 1.0)
        - 0.25 * a * b2 * (big_c * big_c - 1.0)
        - 2.0 * a * a4 * b2 * c2 * ((a4 + b4).powf(-1.5) + (a4 + c4).powf(-1.5))
}

fn reg_field(h: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let (g, gg, u, uu, z, zz) = (y[0], y[1], y[2], y[3], y[4], y[5]);
    let small = [g, u, z].iter().filter(|v| v.abs() * v.abs() <= ZERO_THRESHOLD).count();
    if small >= 2 {
        return Err(Error::MultipleCollision(format!(
            "two square-root coordinates vanish: ({g:e}, {u:e}, {z:e})"
        )));
    }
    let (g2, u2, z2) = (g * g, u * u, z * z);
    let m = mutual(g, u, z);
    dy[0] = 0.25 * u2 * z2 * gg;
    dy[1] = momentum_rate(h, g, u, z, uu, zz, m);
    dy[2] = 0.25 * g2 * z2 * uu;
    dy[3] = momentum_rate(h, u, g, z, gg, zz, m);
    dy[4] = 0.25 * g2 * u2 * zz;
    dy[5] = momentum_rate(h, z, u, g, uu, gg, m);
    dy[IDX_T] = g2 * u2 * z2;
    Ok(())
}

/// Derivative with respect to `s` of `(γ, Γ, υ, Υ, ζ, Z, t)`.
pub fn reg_rhs(r: &RegularizedState) -> Result<[f64; 7]> {
    let mut dy = [0.0; 7];
    reg_field(r.h, &r.to_vector(), &mut dy)?;
    Ok(dy)
}

/// Which coordinate is smallest and how far it is above the hand-over level.
pub fn switch_value(p: &Vec3) -> (usize, f64) {
    let k = (0..3)
        .min_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("three coordinates");
    let o = [(k + 1) % 3, (k + 2) % 3];
    (k, p[k] - SWITCH_RATIO * (p[o[0]] * p[o[1]]).abs().sqrt())
}

fn reg_switch(y: &[f64]) -> f64 {
    switch_value(&[y[0] * y[0], y[2] * y[2], y[4] * y[4]]).1
}

/// Trajectory of the regularized flow, parametrized by `s`.
#[derive(Debug, Clone)]
pub struct RegTrajectory {
    pub h: f64,
    pub sol: Solution,
}

impl RegTrajectory {
    pub fn state_at(&self, s: f64) -> RegularizedState {
        RegularizedState::from_vector(&self.sol.eval(s), s, self.h)
    }

    pub fn physical_at(&self, s: f64) -> State {
        from_regularized(&self.state_at(s))
    }

    pub fn end(&self) -> RegularizedState {
        RegularizedState::from_vector(self.sol.y_end(), self.sol.t_end(), self.h)
    }

    pub fn t_range(&self) -> (f64, f64) {
        let a = self.sol.y[0][IDX_T];
        let b = self.sol.y_end()[IDX_T];
        (a.min(b), a.max(b))
    }

    /// Parameter `s` at physical time `t`.
    pub fn s_at_time(&self, t: f64) -> Option<f64> {
        self.sol.invert_monotone(IDX_T, t)
    }

    /// Largest `|H − h|` over accepted steps whose coordinates all exceed `floor`.
    pub fn energy_drift(&self, floor: f64) -> f64 {
        self.sol
            .y
            .iter()
            .zip(&self.sol.t)
            .filter(|(y, _)| y[0] * y[0] > floor && y[2] * y[2] > floor && y[4] * y[4] > floor)
            .filter_map(|(y, &s)| reg_hamiltonian(&RegularizedState::from_vector(y, s, self.h)).ok())
            .fold(0.0, |m, e| m.max((e - self.h).abs()))
    }
}

type NoEvent = fn(f64, &[f64]) -> f64;

/// Integrates the regularized flow from `r0` to `s_end` (either direction).
pub fn integrate_reg(r0: &RegularizedState, s_end: f64, opts: &OdeOptions) -> Result<RegTrajectory> {
    let h = r0.h;
    let sol = integrate(
        |_s, y: &[f64], dy: &mut [f64]| reg_field(h, y, dy),
        r0.s,
        &r0.to_vector(),
        s_end,
        opts,
        None::<(NoEvent, Direction)>,
    )?;
    Ok(RegTrajectory { h, sol })
}

fn integrate_reg_event<G>(
    r0: &RegularizedState,
    s_end: f64,
    opts: &OdeOptions,
    event: G,
    dir: Direction,
) -> Result<RegTrajectory>
where
    G: FnMut(f64, &[f64]) -> f64,
{
    let h = r0.h;
    let sol = integrate(
        |_s, y: &[f64], dy: &mut [f64]| reg_field(h, y, dy),
        r0.s,
        &r0.to_vector(),
        s_end,
        opts,
        Some((event, dir)),
    )?;
    Ok(RegTrajectory { h, sol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcStop {
    SpanEnd,
    /// The given coordinate reached the hand-over level.
    CollisionApproach(usize),
}

/// Collision-free arc of the physical equations of motion.
#[derive(Debug, Clone)]
pub struct PhysTrajectory {
    pub sol: Solution,
    pub stop: ArcStop,
}

impl PhysTrajectory {
    pub fn state_at(&self, t: f64) -> State {
        let y = self.sol.eval(t);
        State {
            config: Configuration { x: y[0], y: y[1], z: y[2] },
            velocity: [y[3], y[4], y[5]],
        }
    }

    pub fn end(&self) -> (f64, State) {
        (self.sol.t_end(), self.state_at(self.sol.t_end()))
    }

    pub fn energy_drift(&self, h: f64) -> f64 {
        self.sol
            .y
            .iter()
            .map(|y| {
                let s = State::new(Configuration { x: y[0], y: y[1], z: y[2] }, [y[3], y[4], y[5]]);
                (hamiltonian(&s) - h).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn physical_field(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let p = [y[0], y[1], y[2]];
    if p.iter().any(|v| *v <= ZERO_THRESHOLD) {
        return Err(Error::Singular(format!("physical flow at collision {p:?}")));
    }
    let a = gradient_raw(&p);
    dy[..3].copy_from_slice(&y[3..6]);
    dy[3..].copy_from_slice(&a);
    Ok(())
}

/// Integrates the equations of motion from `(t0, s0)` toward `t_end`, stopping
/// early when a coordinate reaches the hand-over level.
pub fn integrate_physical(s0: &State, t0: f64, t_end: f64, opts: &OdeOptions) -> Result<PhysTrajectory> {
    if s0.config.is_collision() {
        return Err(Error::Singular("physical integration needs an interior start".into()));
    }
    let y0 = [
        s0.config.x,
        s0.config.y,
        s0.config.z,
        s0.velocity[0],
        s0.velocity[1],
        s0.velocity[2],
    ];
    let sol = integrate(
        physical_field,
        t0,
        &y0,
        t_end,
        opts,
        Some((|_t: f64, y: &[f64]| switch_value(&[y[0], y[1], y[2]]).1, Direction::Falling)),
    )?;
    let stop = match sol.stop {
        StopReason::SpanEnd => ArcStop::SpanEnd,
        StopReason::Event => {
            let y = sol.y_end();
            ArcStop::CollisionApproach(switch_value(&[y[0], y[1], y[2]]).0)
        }
    };
    Ok(PhysTrajectory { sol, stop })
}

/// A passage through one double collision in regularized variables.
#[derive(Debug, Clone)]
pub struct Passage {
    pub traj: RegTrajectory,
    pub coord: usize,
    pub collision_time: f64,
    pub collision_s: f64,
    pub entry_time: f64,
    pub exit_time: f64,
    pub exit: State,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Bound on the regularized parameter span of one passage.
const PASSAGE_S_MAX: f64 = 1e3;

/// Carries a state at the hand-over level through the approaching double
/// collision and back out to the hand-over level on the far side. `forward`
/// selects the direction of physical time.
pub fn continue_through_collision(
    entry: &State,
    t_entry: f64,
    h: Option<f64>,
    forward: bool,
    opts: &OdeOptions,
) -> Result<Passage> {
    let p = entry.config.to_array();
    let (coord, _) = switch_value(&p);
    let mut sorted = p;
    sorted.sort_by(f64::total_cmp);
    if sorted[1] < 10.0 * SWITCH_RATIO * sorted[2] {
        return Err(Error::MultipleCollision(format!(
            "more than one coordinate near collision at t = {t_entry}: {p:?}"
        )));
    }
    let energy_before = hamiltonian(entry);
    let h = h.unwrap_or(energy_before);
    let r0 = to_regularized(entry, h, t_entry, [1.0; 3]);
    let s_end = if forward { PASSAGE_S_MAX } else { -PASSAGE_S_MAX };
    let traj = integrate_reg_event(&r0, s_end, opts, |_s, y: &[f64]| reg_switch(y), Direction::Rising)?;
    if traj.sol.stop != StopReason::Event {
        return Err(Error::Shooting(format!("passage from t = {t_entry} did not leave the collision region")));
    }
    let collision_s = traj
        .sol
        .invert_monotone(2 * coord, 0.0)
        .ok_or_else(|| Error::Shooting(format!("coordinate {coord} did not vanish during the passage")))?;
    let collision_time = traj.state_at(collision_s).t;
    let end = traj.end();
    let exit = from_regularized(&end);
    Ok(Passage {
        coord,
        collision_time,
        collision_s,
        entry_time: t_entry,
        exit_time: end.t,
        energy_after: hamiltonian(&exit),
        exit,
        energy_before,
        traj,
    })
}

#[derive(Debug, Clone)]
pub enum Piece {
    Physical(PhysTrajectory),
    Regularized(RegTrajectory),
}

impl Piece {
    fn t_range(&self) -> (f64, f64) {
        match self {
            Piece::Physical(p) => {
                let (a, b) = (p.sol.t_start(), p.sol.t_end());
                (a.min(b), a.max(b))
            }
            Piece::Regularized(r) => r.t_range(),
        }
    }

    fn state_at(&self, t: f64) -> State {
        match self {
            Piece::Physical(p) => p.state_at(t),
            Piece::Regularized(r) => {
                let s = r.s_at_time(t).unwrap_or_else(|| r.sol.t_end());
                r.physical_at(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageSummary {
    pub coord: usize,
    pub collision_time: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Trajectory assembled from physical arcs and regularized passages.
#[derive(Debug, Clone)]
pub struct Reintegration {
    pub h: f64,
    pub pieces: Vec<Piece>,
    pub passages: Vec<PassageSummary>,
    pub t_start: f64,
    pub t_end: f64,
}

impl Reintegration {
    /// State at physical time `t` (clamped to the covered span).
    pub fn state_at(&self, t: f64) -> State {
        let piece = self
            .pieces
            .iter()
            .find(|p| {
                let (a, b) = p.t_range();
                t >= a && t <= b
            })
            .unwrap_or_else(|| self.pieces.last().expect("at least one piece"));
        piece.state_at(t)
    }

    /// Largest `|H − h|` over the physical arcs.
    pub fn physical_energy_drift(&self) -> f64 {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Physical(a) => Some(a.energy_drift(self.h)),
                Piece::Regularized(_) => None,
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|H − h|` along the regularized pieces where every coordinate
    /// exceeds `floor`.
    pub fn regularized_energy_drift(&self, floor: f64) -> f64 {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Regularized(r) => Some(r.energy_drift(floor)),
                Piece::Physical(_) => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn regularized_pieces(&self) -> impl Iterator<Item = &RegTrajectory> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Regularized(r) => Some(r),
            Piece::Physical(_) => None,
        })
    }
}

/// Integrates forward from a regularized state at a double collision until
/// physical time `t_end`, alternating physical arcs and regularized passages.
/// The last passage may extend slightly beyond `t_end`.
pub fn reintegrate_from_collision(start: &RegularizedState, t_end: f64, opts: &OdeOptions) -> Result<Reintegration> {
    let h = start.h;
    let mut pieces = Vec::new();
    let mut passages = Vec::new();
    let first = integrate_reg_event(start, PASSAGE_S_MAX, opts, |_s, y: &[f64]| reg_switch(y), Direction::Rising)?;
    if first.sol.stop != StopReason::Event {
        return Err(Error::Shooting("initial passage did not leave the collision region".into()));
    }
    let mut r_end = first.end();
    pieces.push(Piece::Regularized(first));
    loop {
        let exit = from_regularized(&r_end);
        if r_end.t >= t_end {
            break;
        }
        let arc = integrate_physical(&exit, r_end.t, t_end, opts)?;
        let stop = arc.stop;
        let (t_arc, s_arc) = arc.end();
        pieces.push(Piece::Physical(arc));
        if stop == ArcStop::SpanEnd {
            break;
        }
        let passage = continue_through_collision(&s_arc, t_arc, Some(h), true, opts)?;
        passages.push(PassageSummary {
            coord: passage.coord,
            collision_time: passage.collision_time,
            energy_before: passage.energy_before,
            energy_after: passage.energy_after,
        });
        r_end = passage.traj.end();
        pieces.push(Piece::Regularized(passage.traj));
    }
    Ok(Reintegration { h, pieces, passages, t_start: start.t, t_end })
}

/// Regularized state at a collision of `x` at `t = 0` with `y = z = w`,
/// `ẏ = −ż = v` on energy level `h`.
pub fn symmetric_collision_state(w: f64, v: f64, h: f64) -> RegularizedState {
    let r = w.sqrt();
    RegularizedState {
        gamma: 0.0,
        upsilon: r,
        zeta: r,
        big_gamma: 1.0,
        big_upsilon: 2.0 * v * r,
        big_z: -2.0 * v * r,
        s: 0.0,
        t: 0.0,
        h,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineReport {
    /// `y(0) = z(0)`.
    pub w: f64,
    /// `ẏ(0) = −ż(0)`.
    pub v: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Largest coordinate difference between the input and refined nodes.
    pub max_node_shift: f64,
}

fn shoot_arc(u: &Vector3<f64>, period: f64, opts: &OdeOptions) -> Result<RegTrajectory> {
    let start = symmetric_collision_state(u[0], u[1], u[2]);
    let end = period / 6.0;
    let traj = integrate_reg_event(&start, PASSAGE_S_MAX, opts, |_s, y: &[f64]| y[IDX_T] - end, Direction::Rising)?;
    if traj.sol.stop != StopReason::Event {
        return Err(Error::Shooting("arc did not reach T/6".into()));
    }
    Ok(traj)
}

/// Conditions at `T/6`: `x = y`, `ẋ + ẏ = 0`, `ż = 0`.
fn end_conditions(traj: &RegTrajectory) -> Vector3<f64> {
    let e = from_regularized(&traj.end());
    Vector3::new(
        e.config.x - e.config.y,
        e.velocity[0] + e.velocity[1],
        e.velocity[2],
    )
}

/// Newton shooting on the symmetric boundary-value problem: find `(w, v, h)`
/// such that the regularized flow from the collision state at `t = 0` meets
/// the end conditions at `T/6`. The segment supplies the initial guess and
/// the node times of the refined segment.
pub fn refine_segment(
    seg: &FundamentalSegment,
    h_guess: f64,
    opts: &OdeOptions,
) -> Result<(FundamentalSegment, RefineReport)> {
    seg.check_constraints()?;
    let vel = seg.node_velocities();
    let mut u = Vector3::new(seg.nodes[0].y, 0.5 * (vel[0][1] - vel[0][2]), h_guess);
    let mut traj = shoot_arc(&u, seg.period, opts)?;
    let mut res = end_conditions(&traj);
    let mut iterations = 0;
    const TOL: f64 = 1e-11;
    while res.amax() > TOL {
        if iterations == 30 {
            return Err(Error::Shooting(format!("no convergence, residual {:e}", res.amax())));
        }
        iterations += 1;
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let step = 1e-7 * u[j].abs().max(1.0);
            let mut up = u;
            up[j] += step;
            let mut um = u;
            um[j] -= step;
            let rp = end_conditions(&shoot_arc(&up, seg.period, opts)?);
            let rm = end_conditions(&shoot_arc(&um, seg.period, opts)?);
            jac.set_column(j, &((rp - rm) / (2.0 * step)));
        }
        let delta = jac
            .lu()
            .solve(&(-res))
            .ok_or_else(|| Error::Shooting("singular shooting jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let trial = u + delta * lambda;
            let attempt = if trial[0] > 0.0 { shoot_arc(&trial, seg.period, opts).ok() } else { None };
            if let Some(t) = attempt {
                let r = end_conditions(&t);
                if r.amax() < res.amax() || lambda < 1e-3 {
                    u = trial;
                    traj = t;
                    res = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(Error::Shooting(format!("damping failed at residual {:e}", res.amax())));
            }
        }
        if delta.amax() < 1e-15 * u.amax() {
            break;
        }
    }

    let n = seg.cells();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    nodes.push(Configuration { x: 0.0, y: u[0], z: u[0] });
    velocities.push([f64::INFINITY, u[1], -u[1]]);
    for i in 1..n {
        let s = traj
            .s_at_time(seg.times[i])
            .ok_or_else(|| Error::Shooting(format!("node time {} not covered", seg.times[i])))?;
        let st = traj.physical_at(s);
        nodes.push(st.config);
        velocities.push(st.velocity);
    }
    let e = from_regularized(&traj.end());
    let m = 0.5 * (e.config.x + e.config.y);
    nodes.push(Configuration { x: m, y: m, z: e.config.z });
    velocities.push(e.velocity);

    let max_node_shift = nodes
        .iter()
        .zip(&seg.nodes)
        .flat_map(|(a, b)| {
            let (a, b) = (a.to_array(), b.to_array());
            [(a[0] - b[0]).abs(), (a[1] - b[1]).abs(), (a[2] - b[2]).abs()]
        })
        .fold(0.0, f64::max);
    let mut refined = FundamentalSegment::new(seg.period, seg.times.clone(), nodes)?;
    refined.velocities = Some(velocities);
    Ok((
        refined,
        RefineReport {
            w: u[0],
            v: u[1],
            energy: u[2],
            residual: res.amax(),
            iterations,
            max_node_shift,
        },
    ))
}

/// Refines a minimizer by shooting and reconstructs the full period from the
/// refined segment; the orbit energy is the shooting energy. The energy guess
/// comes from the virial identity `𝒜 = −3hT` over a period, applied to the
/// discrete action of the segment.
pub fn refined_orbit(seg: &FundamentalSegment, opts: &OdeOptions) -> Result<(PeriodicOrbit, RefineReport)> {
    let q = QuadratureScheme::from_times(seg.times.clone(), DEFAULT_MESH_P)?;
    let h_guess = -2.0 * discretized_action(seg, &q)? / seg.period;
    let (refined, report) = refine_segment(seg, h_guess, opts)?;
    let mut orbit = reconstruct_orbit(&refined)?;
    orbit.energy = report.energy;
    Ok((orbit, report))
}

#[cfg(test)]
mod tests;
