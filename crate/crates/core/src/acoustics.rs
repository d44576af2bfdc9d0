//! Acoustic BSDF: impedance-ratio Snell directions, Fresnel pressure
//! amplitude, stochastic reflect/transmit choice, and GGX microfacet
//! roughness.
//!
//! Directions follow the ray: `omega_i` points toward the surface and every
//! outgoing direction points away from it. Normals passed in face the
//! incoming ray (`n · omega_i < 0`).

use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::math::{Vec3, UNIT_TOLERANCE};
use crate::scene::Hit;

/// Microfacet draws per interaction before the ray is killed.
pub const MAX_SCATTER_ATTEMPTS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum AcousticsError {
    #[error("{name} is not unit length (|v| = {length})")]
    NonUnit { name: &'static str, length: f64 },
    #[error("incident direction does not point toward the surface (n·ω = {0})")]
    NotFacing(f64),
    #[error("impedance ratio must be positive and finite, got {0}")]
    InvalidEta(f64),
}

/// Ray was absorbed after every microfacet draw produced a direction on the
/// wrong side of the geometric surface.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("scatter resampling exhausted")]
pub struct Killed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Reflect,
    Transmit,
}

/// Reflected and transmitted directions at a (micro)surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnellDirections {
    pub reflected: Vec3,
    /// `None` under total internal reflection.
    pub transmitted: Option<Vec3>,
    pub cos_theta_r: f64,
    pub cos_theta_t: Option<f64>,
}

impl SnellDirections {
    pub fn is_tir(&self) -> bool {
        self.transmitted.is_none()
    }
}

fn check_unit(name: &'static str, v: Vec3) -> Result<(), AcousticsError> {
    let length = v.length();
    if (length - 1.0).abs() > UNIT_TOLERANCE {
        return Err(AcousticsError::NonUnit { name, length });
    }
    Ok(())
}

/// Reflection and refraction about `n` with the impedance ratio
/// `eta = Z1 / Z2` playing the role of the index ratio.
pub fn snell_directions(omega_i: Vec3, n: Vec3, eta: f64) -> Result<SnellDirections, AcousticsError> {
    check_unit("omega_i", omega_i)?;
    check_unit("n", n)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(AcousticsError::InvalidEta(eta));
    }
    let cos_r = -n.dot(omega_i);
    if cos_r <= 0.0 {
        return Err(AcousticsError::NotFacing(-cos_r));
    }
    Ok(snell_unchecked(omega_i, n, eta, cos_r))
}

#[inline]
fn snell_unchecked(omega_i: Vec3, n: Vec3, eta: f64, cos_r: f64) -> SnellDirections {
    let cos_r = cos_r.min(1.0);
    let reflected = (omega_i + n * (2.0 * cos_r)).normalized();
    if eta == 1.0 {
        return SnellDirections {
            reflected,
            transmitted: Some(omega_i),
            cos_theta_r: cos_r,
            cos_theta_t: Some(cos_r),
        };
    }
    let k = 1.0 - eta * eta * (1.0 - cos_r * cos_r);
    if k < 0.0 {
        return SnellDirections {
            reflected,
            transmitted: None,
            cos_theta_r: cos_r,
            cos_theta_t: None,
        };
    }
    let cos_t = k.sqrt();
    let transmitted = (omega_i * eta + n * (eta * cos_r - cos_t)).normalized();
    SnellDirections {
        reflected,
        transmitted: Some(transmitted),
        cos_theta_r: cos_r,
        cos_theta_t: Some(cos_t),
    }
}

/// Signed pressure reflection amplitude. `cos_theta_t == None` (TIR) gives 1.
pub fn fresnel_amplitude(z1: f64, z2: f64, cos_theta_r: f64, cos_theta_t: Option<f64>) -> f64 {
    match cos_theta_t {
        None => 1.0,
        Some(cos_t) => {
            let a = z1 * cos_theta_r;
            let b = z2 * cos_t;
            if a + b == 0.0 {
                // Grazing on both sides: everything reflects.
                1.0
            } else {
                ((a - b) / (a + b)).clamp(-1.0, 1.0)
            }
        }
    }
}

/// Pressure transmission amplitude matching [`fresnel_amplitude`].
pub fn transmission_amplitude(a_r: f64) -> f64 {
    1.0 + a_r
}

/// Reflect with probability `a_r_squared`.
pub fn choose_branch<R: Rng + ?Sized>(a_r_squared: f64, rng: &mut R) -> Branch {
    let y: f64 = rng.random();
    if y < a_r_squared {
        Branch::Reflect
    } else {
        Branch::Transmit
    }
}

/// GGX normal distribution.
#[inline]
pub fn ggx_density(n: Vec3, h: Vec3, alpha: f64) -> f64 {
    let cos = n.dot(h);
    if cos <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let d = cos * cos * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrofacetSample {
    pub half_vector: Vec3,
    /// `D(h) (n·h)`, the solid-angle density of `half_vector`.
    pub density: f64,
}

/// Draws a microfacet normal with density `D(h) (n·h)`.
pub fn sample_microfacet_normal<R: Rng + ?Sized>(n: Vec3, alpha: f64, rng: &mut R) -> MicrofacetSample {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    microfacet_from_uniforms(n, alpha, u1, u2)
}

/// Inverse-CDF mapping of two uniforms in `[0, 1)` to a GGX half-vector.
pub fn microfacet_from_uniforms(n: Vec3, alpha: f64, u1: f64, u2: f64) -> MicrofacetSample {
    let tan2 = alpha * alpha * u1 / (1.0 - u1);
    let cos_t = 1.0 / (1.0 + tan2).sqrt();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = n.orthonormal_basis();
    let h = (t * (sin_t * phi.cos()) + b * (sin_t * phi.sin()) + n * cos_t).normalized();
    MicrofacetSample {
        half_vector: h,
        density: ggx_density(n, h, alpha) * cos_t,
    }
}

/// Outcome of one BSDF sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSample {
    pub direction: Vec3,
    /// Multiplier for the path throughput: `sign(A_r)` on reflection, 1 on
    /// transmission. Fresnel magnitude and direction density cancel against
    /// the sampling probabilities.
    pub throughput: f64,
    /// Solid-angle density of `direction`, including the branch probability.
    pub density: f64,
    pub branch: Branch,
    pub a_r: f64,
}

/// Samples the outgoing direction at an interface. `material_pair` is
/// `(Z1, Z2)` for the incident and far side.
pub fn scatter<R: Rng + ?Sized>(
    hit: &Hit,
    omega_i: Vec3,
    material_pair: (f64, f64),
    alpha: f64,
    rng: &mut R,
) -> Result<ScatterSample, Killed> {
    let n = hit.geometric_normal;
    let (z1, z2) = material_pair;
    let eta = z1 / z2;
    for _ in 0..MAX_SCATTER_ATTEMPTS {
        let micro = sample_microfacet_normal(n, alpha, rng);
        let h = micro.half_vector;
        let cos_r = -omega_i.dot(h);
        if cos_r <= 0.0 {
            continue;
        }
        let snell = snell_unchecked(omega_i, h, eta, cos_r);
        let a_r = fresnel_amplitude(z1, z2, snell.cos_theta_r, snell.cos_theta_t);
        let reflect_p = a_r * a_r;
        match (choose_branch(reflect_p, rng), snell.transmitted) {
            (Branch::Reflect, _) | (Branch::Transmit, None) => {
                let out = snell.reflected;
                let cos_o = out.dot(h);
                if out.dot(n) <= 0.0 || cos_o <= 0.0 {
                    continue;
                }
                return Ok(ScatterSample {
                    direction: out,
                    throughput: if a_r < 0.0 { -1.0 } else { 1.0 },
                    density: reflect_p * micro.density / (4.0 * cos_o),
                    branch: Branch::Reflect,
                    a_r,
                });
            }
            (Branch::Transmit, Some(out)) => {
                if out.dot(n) >= 0.0 {
                    continue;
                }
                let jac = refraction_jacobian(omega_i, out, h, eta);
                return Ok(ScatterSample {
                    direction: out,
                    throughput: 1.0,
                    density: (1.0 - reflect_p) * micro.density * jac,
                    branch: Branch::Transmit,
                    a_r,
                });
            }
        }
    }
    Err(Killed)
}

/// `dω_h / dω_t` for refraction of `omega_i` into `omega_t` about `h`.
fn refraction_jacobian(omega_i: Vec3, omega_t: Vec3, h: Vec3, eta: f64) -> f64 {
    let denom = omega_t.dot(h) - eta * omega_i.dot(h);
    if denom == 0.0 {
        return 0.0;
    }
    omega_t.dot(h).abs() / (denom * denom)
}

/// Reflective BSDF density for leaving toward `omega_target`, with the sign
/// of the Fresnel amplitude at the implied microfacet. Zero when the target
/// is not on the incident side of the surface.
pub fn eval_toward_signed(hit: &Hit, omega_i: Vec3, omega_target: Vec3, material_pair: (f64, f64), alpha: f64) -> f64 {
    let n = hit.geometric_normal;
    if omega_target.dot(n) <= 0.0 {
        return 0.0;
    }
    let h = (omega_target - omega_i).normalized();
    let cos_r = omega_target.dot(h);
    if cos_r <= 0.0 || h.dot(n) <= 0.0 {
        return 0.0;
    }
    let (z1, z2) = material_pair;
    let snell = snell_unchecked(omega_i, h, z1 / z2, cos_r);
    let a_r = fresnel_amplitude(z1, z2, snell.cos_theta_r, snell.cos_theta_t);
    let value = a_r * a_r * ggx_density(n, h, alpha) * n.dot(h) / (4.0 * cos_r);
    if a_r < 0.0 {
        -value
    } else {
        value
    }
}

/// Magnitude of [`eval_toward_signed`].
pub fn eval_toward(hit: &Hit, omega_i: Vec3, omega_target: Vec3, material_pair: (f64, f64), alpha: f64) -> f64 {
    eval_toward_signed(hit, omega_i, omega_target, material_pair, alpha).abs()
}

/// Factor applied when a next-event segment passes straight through an
/// interface: the pressure transmission amplitude times the microfacet
/// density of the orientation that lets `direction` continue unrefracted,
/// relative to that density at normal incidence. `n` faces the ray.
/// Returns `None` when the straight continuation is totally reflected.
pub fn straight_transmission(direction: Vec3, n: Vec3, material_pair: (f64, f64), alpha: f64) -> Option<f64> {
    let (z1, z2) = material_pair;
    let cos_r = -direction.dot(n);
    if cos_r <= 0.0 {
        return None;
    }
    let snell = snell_unchecked(direction, n, z1 / z2, cos_r);
    let cos_t = snell.cos_theta_t?;
    let a_r = fresnel_amplitude(z1, z2, cos_r, Some(cos_t));
    let orientation = if z1 == z2 {
        1.0
    } else {
        // Microfacet normal along the ray: D(h)(n·h) / D(n).
        ggx_density(n, -direction, alpha) * cos_r / ggx_density(n, n, alpha)
    };
    Some(transmission_amplitude(a_r) * orientation)
}
