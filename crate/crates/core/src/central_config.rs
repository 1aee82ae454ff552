//! Central configurations of the octahedral problem.
//!
//! A configuration is central when `∇U(X) = λ X`. Divided through by each
//! coordinate this reads
//!
//! ```text
//! 1/(8x³) + 1/(x²+y²)^{3/2} + 1/(x²+z²)^{3/2} = −λ
//! 1/(8y³) + 1/(x²+y²)^{3/2} + 1/(y²+z²)^{3/2} = −λ
//! 1/(8z³) + 1/(x²+z²)^{3/2} + 1/(y²+z²)^{3/2} = −λ
//! ```
//!
//! whose only solution ray is the regular octahedron `x = y = z`.

use crate::dynamics::{potential_raw, Configuration, Vec3, ZERO_THRESHOLD};
use crate::error::{Error, Result};
use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

pub const RESIDUAL_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralConfigSolution {
    pub config: Configuration,
    pub lambda: f64,
    /// Max-norm of the augmented residual at the returned point.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Left-hand sides of the central-configuration system plus `λ`.
pub fn cc_residual(c: &Configuration, lambda: f64) -> Result<Vec3> {
    if c.is_collision() || c.x < 0.0 || c.y < 0.0 || c.z < 0.0 {
        return Err(Error::Singular(format!(
            "central configuration residual needs an interior point, got ({}, {}, {})",
            c.x, c.y, c.z
        )));
    }
    Ok(residual_raw(&c.to_array(), lambda))
}

fn residual_raw(p: &Vec3, lambda: f64) -> Vec3 {
    let [x, y, z] = *p;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let rxy = (x2 + y2).powf(-1.5);
    let rxz = (x2 + z2).powf(-1.5);
    let ryz = (y2 + z2).powf(-1.5);
    [
        0.125 / (x2 * x) + rxy + rxz + lambda,
        0.125 / (y2 * y) + rxy + ryz + lambda,
        0.125 / (z2 * z) + rxz + ryz + lambda,
    ]
}

fn augmented(v: &Vector4<f64>) -> Vector4<f64> {
    let r = residual_raw(&[v[0], v[1], v[2]], v[3]);
    Vector4::new(r[0], r[1], r[2], v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 1.0)
}

fn jacobian(v: &Vector4<f64>) -> Matrix4<f64> {
    let [x, y, z] = [v[0], v[1], v[2]];
    let (x2, y2, z2) = (x * x, y * y, z * z);
    // d/da (a² + b²)^{-3/2} = −3a (a² + b²)^{-5/2}
    let dxy = -3.0 * (x2 + y2).powf(-2.5);
    let dxz = -3.0 * (x2 + z2).powf(-2.5);
    let dyz = -3.0 * (y2 + z2).powf(-2.5);
    let self_term = |a: f64| -0.375 / (a * a * a * a);
    Matrix4::new(
        self_term(x) + x * (dxy + dxz),
        y * dxy,
        z * dxz,
        1.0,
        x * dxy,
        self_term(y) + y * (dxy + dyz),
        z * dyz,
        1.0,
        x * dxz,
        y * dyz,
        self_term(z) + z * (dxz + dyz),
        1.0,
        2.0 * x,
        2.0 * y,
        2.0 * z,
        0.0,
    )
}

/// Damped Newton iteration on the system augmented with `‖X‖² = 1`.
pub fn cc_solve(start: &Configuration) -> Result<CentralConfigSolution> {
    let p = start.to_array();
    if p.iter().any(|v| !(v.is_finite() && *v > ZERO_THRESHOLD)) {
        return Err(Error::Domain(format!(
            "central configuration solver needs an interior start, got {p:?}"
        )));
    }
    // λ initialized from the mean of the three left-hand sides
    let r0 = residual_raw(&p, 0.0);
    let lambda0 = -(r0[0] + r0[1] + r0[2]) / 3.0;
    let mut v = Vector4::new(p[0], p[1], p[2], lambda0);
    let mut f = augmented(&v);
    let mut fnorm = f.amax();

    for it in 0..=MAX_ITERATIONS {
        if fnorm <= RESIDUAL_TOL {
            return Ok(CentralConfigSolution {
                config: Configuration { x: v[0], y: v[1], z: v[2] },
                lambda: v[3],
                residual_norm: fnorm,
                iterations: it,
            });
        }
        if it == MAX_ITERATIONS {
            break;
        }
        let step = jacobian(&v)
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::Newton("singular jacobian".into()))?;
        let mut damping = 1.0;
        loop {
            let trial = v + step * damping;
            let interior = (0..3).all(|i| trial[i] > ZERO_THRESHOLD);
            if interior {
                let ft = augmented(&trial);
                let tn = ft.amax();
                if tn.is_finite() && tn < fnorm {
                    v = trial;
                    f = ft;
                    fnorm = tn;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-12 {
                // accept a full Newton step that cannot be improved by damping
                // only when already at roundoff level
                if fnorm <= 10.0 * RESIDUAL_TOL {
                    return Ok(CentralConfigSolution {
                        config: Configuration { x: v[0], y: v[1], z: v[2] },
                        lambda: v[3],
                        residual_norm: fnorm,
                        iterations: it,
                    });
                }
                return Err(Error::Newton(format!("damping failed at residual {fnorm:e}")));
            }
        }
    }
    Err(Error::Newton(format!(
        "no convergence after {MAX_ITERATIONS} iterations, residual {fnorm:e}"
    )))
}

/// `𝒢 = ‖X_c‖ U(X_c)` at the normalized regular octahedron, the minimum of the
/// scale-invariant potential `‖X‖U(X)` on the cone.
pub fn curly_g() -> f64 {
    let c = 1.0 / 3f64.sqrt();
    let p = [c, c, c];
    crate::dynamics::norm(&p) * potential_raw(&p)
}

/// Multiplier of the regular octahedron `(c, c, c)`.
pub fn octahedron_lambda(c: f64) -> f64 {
    -(1.0 + 2f64.powf(2.5)) / (8.0 * c * c * c)
}
