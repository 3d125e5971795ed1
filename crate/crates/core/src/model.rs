//! Model parameters, frame-transformed constants and the physical parameter
//! mappings (dipole, circuit, spin–orbit).
//!
//! The Hamiltonian is
//!
//! ```text
//! H = ω a†a + ε σx + Δ σz + g [(a†σ⁻ + aσ⁺) + λ (e^{iθ} a†σ⁺ + e^{-iθ} aσ⁻)]
//! ```
//!
//! with spin ordering (↑, ↓), σz = diag(1, −1).

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// The six physical parameters of the anisotropic Rabi Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    /// Boson frequency ω (> 0).
    pub omega: f64,
    /// Half level splitting Δ.
    pub delta: f64,
    /// Symmetry-breaking field ε.
    pub epsilon: f64,
    /// Rotating coupling g (≥ 0).
    pub g: f64,
    /// Anisotropy λ (≥ 0); weight of the counter-rotating terms.
    pub lambda: f64,
    /// Counter-rotating phase θ, stored in (−π, π].
    pub theta: f64,
}

impl ModelParams {
    pub fn new(omega: f64, delta: f64, epsilon: f64, g: f64, lambda: f64, theta: f64) -> Result<Self> {
        let p = ModelParams { omega, delta, epsilon, g, lambda, theta: wrap_angle(theta) };
        p.validate()?;
        Ok(p)
    }

    /// Unit boson frequency, zero field and phase.
    pub fn with_coupling(delta: f64, g: f64, lambda: f64) -> Result<Self> {
        Self::new(1.0, delta, 0.0, g, lambda, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega, self.delta, self.epsilon, self.g, self.lambda, self.theta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParams(format!("omega must be > 0 (got {})", self.omega)));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidParams(format!("g must be >= 0 (got {})", self.g)));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!("lambda must be >= 0 (got {})", self.lambda)));
        }
        Ok(())
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        Self::new(self.omega, self.delta, self.epsilon, g, self.lambda, self.theta)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.omega, self.delta, self.epsilon, self.g, lambda, self.theta)
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::new(self.omega, self.delta, self.epsilon, self.g, self.lambda, theta)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.omega, delta, self.epsilon, self.g, self.lambda, self.theta)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(self.omega, self.delta, epsilon, self.g, self.lambda, self.theta)
    }

    /// True when the Hamiltonian has the Z2 parity symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn is_jaynes_cummings(&self) -> bool {
        self.lambda == 0.0
    }

    /// Shift between the spectral parameter and the energy, x = E + λg²/ω.
    pub fn energy_shift(&self) -> f64 {
        self.lambda * self.g * self.g / self.omega
    }

    /// ξ = e^{iθ/2}.
    pub fn xi(&self) -> C64 {
        C64::from_polar(1.0, self.theta / 2.0)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    if !theta.is_finite() || (theta > -PI && theta <= PI) {
        return theta;
    }
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Constants of the rotated frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedConstants {
    pub xi: C64,
    pub c: C64,
    pub d: C64,
    /// Forward branch constant f = d + (1−λ)√λ g² ξ/ω.
    pub f: C64,
    /// Backward branch constant f̄ = d − (1−λ)√λ g² ξ/ω.
    pub fbar: C64,
    /// Mixing angle, tan η = √λ.
    pub eta: f64,
}

/// Constants c, d, f, f̄ entering the recurrences. Rejects λ = 0.
pub fn derive_constants(params: &ModelParams) -> Result<DerivedConstants> {
    params.validate()?;
    if params.is_jaynes_cummings() {
        return Err(Error::JaynesCummingsLimit);
    }
    let ModelParams { omega, delta, epsilon, g, lambda, .. } = *params;
    let xi = params.xi();
    let sl = lambda.sqrt();
    let one_p = 1.0 + lambda;
    let c = C64::from((1.0 - lambda) / one_p * delta) + (xi + xi.conj()) * (sl / one_p * epsilon);
    let d = xi * (2.0 * sl / one_p * delta) - (xi * xi - lambda) * (epsilon / one_p);
    let split = xi * ((1.0 - lambda) * sl * g * g / omega);
    Ok(DerivedConstants { xi, c, d, f: d + split, fbar: d - split, eta: sl.atan() })
}

/// Fixed 2×2 spin rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMaps {
    /// U(λ, θ) taking the rotated-frame spinor (φ₁, φ₂) to the lab frame.
    pub u: Matrix2<C64>,
    /// W = (1, −1; 1, 1)/√2.
    pub w: Matrix2<C64>,
    /// Phase per excitation of R(θ) = exp(iθ/2 (a†a + σz/2)).
    pub r_half_angle: f64,
}

impl FrameMaps {
    /// V = U†W.
    pub fn v(&self) -> Matrix2<C64> {
        self.u.adjoint() * self.w
    }

    /// Diagonal element of R(θ) on |n, s⟩ with s = +1 for ↑ and −1 for ↓.
    pub fn r_phase(&self, n: usize, s: i8) -> C64 {
        C64::from_polar(1.0, self.r_half_angle * (n as f64 + 0.5 * f64::from(s)))
    }
}

pub fn frame_maps(params: &ModelParams) -> FrameMaps {
    let xi = params.xi();
    let sl = params.lambda.sqrt();
    let norm = 1.0 / (1.0 + params.lambda).sqrt();
    let u = Matrix2::new(xi, C64::from(-sl), C64::from(sl), xi.conj()) * C64::from(norm);
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let w = Matrix2::new(h, -h, h, h);
    FrameMaps { u, w, r_half_angle: params.theta / 2.0 }
}

/// Two-level atom in crossed electric and magnetic fields: returns (g, λ)
/// from the electric and magnetic dipole matrix elements.
pub fn map_dipole(d_me: f64, mu_me: f64) -> Result<(f64, f64)> {
    let sum = d_me + mu_me;
    if sum == 0.0 {
        return Err(Error::Domain("dipole mapping undefined for d = -mu".into()));
    }
    Ok((sum / 2.0, (d_me - mu_me) / sum))
}

/// Rashba (α) and Dresselhaus (β) couplings from (g, λ, θ).
///
/// The radius √(g² + (1+λ)²) mixes a dimensionful g with the dimensionless
/// 1+λ; it is evaluated as written, in whatever units g carries.
pub fn map_spin_orbit(g: f64, lambda: f64, theta: f64) -> (f64, f64) {
    let r = (g * g + (1.0 + lambda) * (1.0 + lambda)).sqrt();
    (r * theta.sin(), r * theta.cos())
}

/// Inverse of [`map_spin_orbit`]: returns (θ, radius).
pub fn spin_orbit_angle(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if alpha == 0.0 && beta == 0.0 {
        return Err(Error::Domain("spin-orbit inverse undefined at alpha = beta = 0".into()));
    }
    Ok((alpha.atan2(beta), alpha.hypot(beta)))
}

/// Two inductively coupled SQUIDs: `two_lp` is 2L̃_p and `mutual` is M, which
/// become g(1+λ) and g(1−λ) respectively. The qubit sits at the charge
/// degeneracy point (Δ = 0, θ = 0).
pub fn map_circuit(omega_p: f64, ej_s: f64, two_lp: f64, mutual: f64) -> Result<ModelParams> {
    if two_lp <= 0.0 {
        return Err(Error::Domain(format!("2L_p must be > 0 (got {two_lp})")));
    }
    let sum = two_lp + mutual;
    if sum == 0.0 {
        return Err(Error::Domain("circuit mapping degenerate for 2L_p + M = 0".into()));
    }
    let g = sum / 2.0;
    let lambda = (two_lp - mutual) / sum;
    ModelParams::new(omega_p, 0.0, ej_s, g, lambda, 0.0)
}
