//! Dihedral symmetry of the loop space and the fundamental segment.
//!
//! The group is generated by
//!
//! ```text
//! g(x, y, z)(t) = (z, x, y)(t − T/3)
//! h(x, y, z)(t) = (x, z, y)(−t)
//! ```
//!
//! and every element acts as `(γX)(t) = P X(σt − kT/3)` for a coordinate
//! permutation `P`, a direction `σ = ±1` and a shift `k ∈ {0, 1, 2}`.
//!
//! An invariant loop is determined by its restriction to `[0, T/6]`. On
//! `[T/6, T/3]` it reads `X(T/3 − u) = (y(u), x(u), z(u))`, and the remaining
//! two thirds follow from `X(t + T/3) = (z(t), x(t), y(t))`.

use crate::dynamics::{hamiltonian, Configuration, State, Vec3};
use crate::error::{Error, Result};
use serde::Serialize;

/// Lower bound applied to free coordinates by [`project_constraints`].
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Relative tolerance used when matching sample times across symmetries.
const TIME_MATCH_TOL: f64 = 1e-12;

/// Relative tolerance for the endpoint constraints in [`FundamentalSegment::new`].
const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GroupElement {
    E,
    G,
    G2,
    H,
    HG,
    HG2,
}

/// Action of a group element on loops: `(γX)(t) = P X(σt − kT/3)` with
/// `(P X)_i = X_{perm[i]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub perm: [usize; 3],
    pub reversed: bool,
    pub shift: u8,
}

impl Descriptor {
    pub const IDENTITY: Descriptor = Descriptor { perm: [0, 1, 2], reversed: false, shift: 0 };

    /// Descriptor of `self ∘ other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Descriptor) -> Descriptor {
        let perm = [
            other.perm[self.perm[0]],
            other.perm[self.perm[1]],
            other.perm[self.perm[2]],
        ];
        // σ₂(σ₁t − k₁T/3) − k₂T/3
        let k1 = if other.reversed { (3 - self.shift) % 3 } else { self.shift };
        Descriptor {
            perm,
            reversed: self.reversed != other.reversed,
            shift: (k1 + other.shift) % 3,
        }
    }

    pub fn apply_vec(&self, v: &Vec3) -> Vec3 {
        [v[self.perm[0]], v[self.perm[1]], v[self.perm[2]]]
    }
}

impl GroupElement {
    pub const ALL: [GroupElement; 6] = [
        GroupElement::E,
        GroupElement::G,
        GroupElement::G2,
        GroupElement::H,
        GroupElement::HG,
        GroupElement::HG2,
    ];

    const GEN_G: Descriptor = Descriptor { perm: [2, 0, 1], reversed: false, shift: 1 };
    const GEN_H: Descriptor = Descriptor { perm: [0, 2, 1], reversed: true, shift: 0 };

    /// Exponents `(a, b)` with `self = hᵃ gᵇ`.
    fn exponents(self) -> (u8, u8) {
        match self {
            GroupElement::E => (0, 0),
            GroupElement::G => (0, 1),
            GroupElement::G2 => (0, 2),
            GroupElement::H => (1, 0),
            GroupElement::HG => (1, 1),
            GroupElement::HG2 => (1, 2),
        }
    }

    fn from_exponents(a: u8, b: u8) -> GroupElement {
        match (a % 2, b % 3) {
            (0, 0) => GroupElement::E,
            (0, 1) => GroupElement::G,
            (0, 2) => GroupElement::G2,
            (1, 0) => GroupElement::H,
            (1, 1) => GroupElement::HG,
            _ => GroupElement::HG2,
        }
    }

    pub fn descriptor(self) -> Descriptor {
        let (a, b) = self.exponents();
        let mut d = Descriptor::IDENTITY;
        if a == 1 {
            d = Self::GEN_H;
        }
        for _ in 0..b {
            d = d.compose(&Self::GEN_G);
        }
        d
    }

    /// Abstract product `self · other` from the relation `g h = h g⁻¹`.
    pub fn mul(self, other: GroupElement) -> GroupElement {
        let (a, b) = self.exponents();
        let (c, d) = other.exponents();
        let b = if c == 1 { (3 - b) % 3 } else { b };
        Self::from_exponents(a + c, b + d)
    }

    pub fn inverse(self) -> GroupElement {
        Self::ALL
            .into_iter()
            .find(|e| self.mul(*e) == GroupElement::E)
            .expect("every group element has an inverse")
    }
}

/// Discretized path on `[0, T/6]`, the optimization variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalSegment {
    pub period: f64,
    pub times: Vec<f64>,
    pub nodes: Vec<Configuration>,
    /// Node velocities when known from an integrator or a Legendre transform.
    /// Finite differences of the nodes are used otherwise.
    pub velocities: Option<Vec<Vec3>>,
}

impl FundamentalSegment {
    /// Builds a segment and checks the endpoint constraints
    /// `x(0) = 0`, `y(0) = z(0)`, `x(T/6) = y(T/6)`.
    pub fn new(period: f64, times: Vec<f64>, nodes: Vec<Configuration>) -> Result<Self> {
        let seg = Self::unconstrained(period, times, nodes)?;
        seg.check_constraints()?;
        Ok(seg)
    }

    /// Builds a segment on `[0, times.last()]` checking only the mesh; used for
    /// test paths and as input to [`project_constraints`].
    pub fn unconstrained(period: f64, times: Vec<f64>, nodes: Vec<Configuration>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        if times.len() != nodes.len() || times.len() < 2 {
            return Err(Error::Domain(format!(
                "segment needs matching times and nodes (at least 2), got {} and {}",
                times.len(),
                nodes.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("node times must start at 0 and increase strictly".into()));
        }
        Ok(FundamentalSegment { period, times, nodes, velocities: None })
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("segment has nodes")
    }

    /// Largest violation of the endpoint constraints.
    pub fn constraint_residual(&self) -> f64 {
        let a = &self.nodes[0];
        let b = self.nodes.last().expect("segment has nodes");
        a.x.abs().max((a.y - a.z).abs()).max((b.x - b.y).abs())
    }

    pub fn check_constraints(&self) -> Result<()> {
        let end = self.period / 6.0;
        if (self.end_time() - end).abs() > CONSTRAINT_TOL * end {
            return Err(Error::Constraint(format!(
                "segment ends at {} instead of T/6 = {end}",
                self.end_time()
            )));
        }
        let scale = self.nodes.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let a = &self.nodes[0];
        if a.x != 0.0 {
            return Err(Error::Constraint(format!("x(0) = {} must vanish", a.x)));
        }
        if (a.y - a.z).abs() > CONSTRAINT_TOL * scale {
            return Err(Error::Constraint(format!("y(0) = {} differs from z(0) = {}", a.y, a.z)));
        }
        let b = self.nodes.last().expect("segment has nodes");
        if (b.x - b.y).abs() > CONSTRAINT_TOL * scale {
            return Err(Error::Constraint(format!(
                "x(T/6) = {} differs from y(T/6) = {}",
                b.x, b.y
            )));
        }
        for (i, c) in self.nodes.iter().enumerate() {
            let [x, y, z] = c.to_array();
            let bad = |v: f64| !(v.is_finite() && v >= 0.0);
            if bad(x) || bad(y) || bad(z) {
                return Err(Error::Constraint(format!("node {i} leaves the cone: {c:?}")));
            }
            if i > 0 && c.is_collision() {
                return Err(Error::Constraint(format!("interior collision at node {i}: {c:?}")));
            }
        }
        Ok(())
    }

    /// Node velocities: attached values if present, otherwise second-order
    /// finite differences on the nonuniform mesh.
    pub fn node_velocities(&self) -> Vec<Vec3> {
        if let Some(v) = &self.velocities {
            return v.clone();
        }
        finite_difference_velocities(&self.times, &self.nodes)
    }
}

/// Three-point nonuniform finite differences, one-sided at both ends.
pub fn finite_difference_velocities(times: &[f64], nodes: &[Configuration]) -> Vec<Vec3> {
    let n = nodes.len();
    let p: Vec<Vec3> = nodes.iter().map(|c| c.to_array()).collect();
    let mut out = vec![[0.0; 3]; n];
    if n == 2 {
        let h = times[1] - times[0];
        let d = [(p[1][0] - p[0][0]) / h, (p[1][1] - p[0][1]) / h, (p[1][2] - p[0][2]) / h];
        return vec![d, d];
    }
    let weights = |t0: f64, t1: f64, t2: f64, at: f64| {
        // derivative of the quadratic interpolant through t0, t1, t2 at `at`
        let w0 = (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let w1 = (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let w2 = (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1));
        (w0, w1, w2)
    };
    for i in 0..n {
        let j = i.clamp(1, n - 2);
        let (w0, w1, w2) = weights(times[j - 1], times[j], times[j + 1], times[i]);
        for k in 0..3 {
            out[i][k] = w0 * p[j - 1][k] + w1 * p[j][k] + w2 * p[j + 1][k];
        }
    }
    out
}

/// Sampled loop on `[0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<State>,
    pub energy: f64,
}

impl PeriodicOrbit {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample at time `t` (taken modulo `T`), if the grid has one.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let period = self.period;
        let t = t.rem_euclid(period);
        let tol = TIME_MATCH_TOL * period;
        let k = self.times.partition_point(|&s| s < t);
        let candidates = [k.checked_sub(1), Some(k % self.times.len().max(1))];
        candidates.into_iter().flatten().find(|&i| {
            let d = (self.times[i] - t).rem_euclid(period);
            d.min(period - d) <= tol
        })
    }

    /// For every sample, the index of the sample at `σt − kT/3`.
    fn index_map(&self, d: &Descriptor) -> Result<Vec<usize>> {
        let sigma = if d.reversed { -1.0 } else { 1.0 };
        self.times
            .iter()
            .map(|&t| {
                let target = sigma * t - d.shift as f64 * self.period / 3.0;
                self.index_of(target).ok_or_else(|| {
                    Error::IncompatibleGrid(format!(
                        "no sample at {} (image of t = {t})",
                        target.rem_euclid(self.period)
                    ))
                })
            })
            .collect()
    }

    pub fn configurations(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.config.to_array()).collect()
    }
}

/// Image of a loop under a group element, on the same grid.
pub fn apply_group_element(e: GroupElement, orbit: &PeriodicOrbit) -> Result<PeriodicOrbit> {
    let d = e.descriptor();
    let map = orbit.index_map(&d)?;
    let sigma = if d.reversed { -1.0 } else { 1.0 };
    let samples = map
        .iter()
        .map(|&j| {
            let s = &orbit.samples[j];
            let p = d.apply_vec(&s.config.to_array());
            let v = d.apply_vec(&s.velocity);
            State {
                config: Configuration { x: p[0], y: p[1], z: p[2] },
                velocity: [sigma * v[0], sigma * v[1], sigma * v[2]],
            }
        })
        .collect();
    Ok(PeriodicOrbit {
        period: orbit.period,
        times: orbit.times.clone(),
        samples,
        energy: orbit.energy,
    })
}

/// Full-period loop from a fundamental segment. The grid consists of the
/// segment times, their reflections `T/3 − tᵢ`, and the shifts by `T/3`,
/// `2T/3`; a segment with `N` cells yields `6N` samples.
pub fn reconstruct_orbit(seg: &FundamentalSegment) -> Result<PeriodicOrbit> {
    seg.check_constraints()?;
    let t3 = seg.period / 3.0;
    let n = seg.cells();
    let vel = seg.node_velocities();
    let mut base_t = Vec::with_capacity(2 * n);
    let mut base: Vec<(Vec3, Vec3)> = Vec::with_capacity(2 * n);
    for i in 0..=n {
        base_t.push(seg.times[i]);
        base.push((seg.nodes[i].to_array(), vel[i]));
    }
    for i in (1..n).rev() {
        let p = seg.nodes[i].to_array();
        let v = vel[i];
        base_t.push(t3 - seg.times[i]);
        base.push(([p[1], p[0], p[2]], [-v[1], -v[0], -v[2]]));
    }
    let g = GroupElement::G.descriptor();
    let mut times = Vec::with_capacity(6 * n);
    let mut states = Vec::with_capacity(6 * n);
    let mut cur = base;
    for k in 0..3 {
        for (t, (p, v)) in base_t.iter().zip(&cur) {
            times.push(t + k as f64 * t3);
            states.push(State {
                config: Configuration { x: p[0], y: p[1], z: p[2] },
                velocity: *v,
            });
        }
        cur = cur.iter().map(|(p, v)| (g.apply_vec(p), g.apply_vec(v))).collect();
    }
    let energy = mean_interior_energy(&states);
    Ok(PeriodicOrbit { period: seg.period, times, samples: states, energy })
}

/// Mean Hamiltonian over collision-free samples.
pub fn mean_interior_energy(samples: &[State]) -> f64 {
    let (sum, count) = samples
        .iter()
        .filter(|s| !s.config.is_collision())
        .fold((0.0, 0usize), |(acc, n), s| (acc + hamiltonian(s), n + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Restriction of an invariant loop to its fundamental segment `[0, T/6]`.
pub fn restrict_to_segment(orbit: &PeriodicOrbit) -> Result<FundamentalSegment> {
    let end = orbit.period / 6.0;
    let last = orbit
        .index_of(end)
        .ok_or_else(|| Error::IncompatibleGrid("no sample at T/6".into()))?;
    let times = orbit.times[..=last].to_vec();
    let nodes = orbit.samples[..=last].iter().map(|s| s.config).collect();
    let mut seg = FundamentalSegment::new(orbit.period, times, nodes)?;
    seg.times[last] = end;
    seg.velocities = Some(orbit.samples[..=last].iter().map(|s| s.velocity).collect());
    Ok(seg)
}

/// Largest deviation from the relations `X(t) = (z, x, y)(t − T/3)` and
/// `X(t) = (x, z, y)(−t)` over the grid, `+∞` when the grid is not closed
/// under both maps.
pub fn symmetry_residual(orbit: &PeriodicOrbit) -> f64 {
    let shift = orbit.index_map(&Descriptor { perm: [0, 1, 2], reversed: false, shift: 1 });
    let refl = orbit.index_map(&Descriptor { perm: [0, 1, 2], reversed: true, shift: 0 });
    let (Ok(shift), Ok(refl)) = (shift, refl) else {
        return f64::INFINITY;
    };
    let mut r: f64 = 0.0;
    for (i, s) in orbit.samples.iter().enumerate() {
        let [x, y, z] = s.config.to_array();
        let [xs, ys, zs] = orbit.samples[shift[i]].config.to_array();
        let [xr, yr, zr] = orbit.samples[refl[i]].config.to_array();
        r = r
            .max((xs - y).abs())
            .max((ys - z).abs())
            .max((zs - x).abs())
            .max((xr - x).abs())
            .max((yr - z).abs())
            .max((zr - y).abs());
    }
    r
}

/// Projection onto the constraint set: `x(0) = 0`, `y(0) = z(0)` and
/// `x(T/6) = y(T/6)` by averaging, then all free coordinates clamped to
/// [`POSITIVITY_FLOOR`].
pub fn project_constraints(seg: &FundamentalSegment) -> FundamentalSegment {
    let mut out = seg.clone();
    out.velocities = None;
    project_in_place(&mut out.nodes);
    out
}

pub(crate) fn project_in_place(nodes: &mut [Configuration]) {
    let n = nodes.len() - 1;
    let floor = |v: f64| if v.is_nan() { POSITIVITY_FLOOR } else { v.max(POSITIVITY_FLOOR) };
    for c in nodes.iter_mut() {
        c.x = floor(c.x);
        c.y = floor(c.y);
        c.z = floor(c.z);
    }
    let m0 = 0.5 * (nodes[0].y + nodes[0].z);
    nodes[0] = Configuration { x: 0.0, y: m0, z: m0 };
    let mn = 0.5 * (nodes[n].x + nodes[n].y);
    nodes[n].x = mn;
    nodes[n].y = mn;
}
