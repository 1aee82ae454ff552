//! Radial Kepler motion `v̈ = −g/v` from an ejection at `v = 0`.
//!
//! With the clock `dt = v ds` and `w = v v̇` the motion at energy
//! `E = v̇²/2 − g/v` obeys the linear system
//!
//! ```text
//! v′ = w,   w′ = 2E v + g,   t′ = v,   A′ = E v + 2g
//! ```
//!
//! where `A` accumulates the action `∫ (v̇²/2 + g/v) dt`. The collision at
//! `v = 0` is a regular point, so the cusp of `v ~ t^{2/3}` costs nothing.

use crate::error::{Error, Result};
use crate::ode::{integrate, Direction, OdeOptions, Solution};

const V: usize = 0;
const W: usize = 1;
const T: usize = 2;
const A: usize = 3;

/// Ejection orbit reaching its apex `v̇ = 0` at a prescribed time.
#[derive(Debug, Clone)]
pub struct RadialEjection {
    pub g: f64,
    pub energy: f64,
    pub apex_time: f64,
    sol: Solution,
}

fn shoot(g: f64, energy: f64, opts: &OdeOptions) -> Result<Solution> {
    let s_max = 2.0 * std::f64::consts::PI / (2.0 * energy.abs()).sqrt();
    let sol = integrate(
        |_s, y: &[f64], dy: &mut [f64]| {
            dy[V] = y[W];
            dy[W] = 2.0 * energy * y[V] + g;
            dy[T] = y[V];
            dy[A] = energy * y[V] + 2.0 * g;
            Ok(())
        },
        0.0,
        &[0.0; 4],
        s_max,
        opts,
        Some((|_s: f64, y: &[f64]| y[W], Direction::Falling)),
    )?;
    if sol.stop != crate::ode::StopReason::Event {
        return Err(Error::Shooting(format!("no apex reached at energy {energy}")));
    }
    Ok(sol)
}

impl RadialEjection {
    /// Shoots on the energy until the apex occurs at `apex_time`.
    pub fn new(g: f64, apex_time: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite() && apex_time > 0.0 && apex_time.is_finite()) {
            return Err(Error::Domain(format!(
                "radial ejection needs g > 0 and apex time > 0, got {g}, {apex_time}"
            )));
        }
        let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..OdeOptions::default() };
        // secant iteration on log|E| ↦ log t_apex
        let mut le0 = (g / apex_time.powf(2.0 / 3.0)).ln();
        let mut f0 = shoot(g, -le0.exp(), &opts)?.y_end()[T].ln() - apex_time.ln();
        let mut le1 = le0 + 0.1;
        for _ in 0..60 {
            let sol1 = shoot(g, -le1.exp(), &opts)?;
            let f1 = sol1.y_end()[T].ln() - apex_time.ln();
            if f1.abs() < 1e-14 {
                return Ok(RadialEjection { g, energy: -le1.exp(), apex_time, sol: sol1 });
            }
            if f1 == f0 {
                break;
            }
            let next = le1 - f1 * (le1 - le0) / (f1 - f0);
            (le0, f0) = (le1, f1);
            le1 = next;
        }
        Err(Error::Shooting(format!(
            "apex time {apex_time} not matched for g = {g}"
        )))
    }

    /// `(v, v̇)` at physical time `t ∈ [0, apex_time]`.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 {
            return (0.0, f64::INFINITY);
        }
        let s = self
            .sol
            .invert_monotone(T, t.min(self.sol.y_end()[T]))
            .unwrap_or_else(|| self.sol.t_end());
        let y = self.sol.eval(s);
        (y[V], y[W] / y[V])
    }

    /// Action from the ejection to the apex.
    pub fn half_action(&self) -> f64 {
        self.sol.y_end()[A]
    }

    pub fn apex_height(&self) -> f64 {
        self.sol.y_end()[V]
    }
}
