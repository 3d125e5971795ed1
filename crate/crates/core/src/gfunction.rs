//! Transcendental functions whose real zeros are the regular spectrum.
//!
//! * G_ε(x) = φ₁φ̄₂ − φ₂φ̄₁ for any ε,
//! * G₊(x) = −ξφ₁ + √λφ₂ and G₋(x) = √λφ₁ + ξ*φ₂ for ε = 0,
//!
//! all evaluated at z = 0, where the series converge (|y₀| = R/2).

use std::fmt;
use std::ops::RangeInclusive;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive_constants, DerivedConstants, ModelParams};
use crate::series::{self, SeriesConfig, SeriesPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    /// Broken symmetry (or no definite parity).
    #[serde(rename = "eps")]
    Epsilon,
    Plus,
    Minus,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::Epsilon => "eps",
            Sector::Plus => "plus",
            Sector::Minus => "minus",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GValue {
    pub x: f64,
    /// `None` when the recurrence hit a pole guard.
    pub value: Option<C64>,
    pub sector: Sector,
    pub near_pole: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GConfig {
    pub series: SeriesConfig,
    /// Half-width (in units of ω) of the window flagged around each pole.
    pub exclusion_window: f64,
}

impl Default for GConfig {
    fn default() -> Self {
        GConfig { series: SeriesConfig::default(), exclusion_window: 1e-4 }
    }
}

/// Pole positions of the G-functions.
///
/// Forward poles belong to all three functions; backward poles and the
/// `origin` pole x = −c (vanishing D̄₀) only to G_ε. With ε ≠ 0 and θ ≠ 0 the
/// family positions are complex; bracketing uses their real parts and only
/// poles within the exclusion window of the real axis are treated as real.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleRegistry {
    pub family_forward: Vec<C64>,
    pub family_backward: Vec<C64>,
    pub origin: f64,
    pub n_range: RangeInclusive<usize>,
    window: f64,
}

impl PoleRegistry {
    /// Whether a pole lies within the exclusion window of the real axis.
    pub fn is_real(&self, p: C64) -> bool {
        p.im.abs() <= self.window
    }

    /// Imaginary offsets above the window are flagged here.
    pub fn has_complex_poles(&self) -> bool {
        self.family_forward.iter().chain(&self.family_backward).any(|p| !self.is_real(*p))
    }

    /// Sorted real abscissas seen by the function of `sector`.
    pub fn real_abscissas(&self, sector: Sector) -> Vec<f64> {
        let mut v: Vec<f64> = self.family_forward.iter().filter(|p| self.is_real(**p)).map(|p| p.re).collect();
        if sector == Sector::Epsilon {
            v.extend(self.family_backward.iter().filter(|p| self.is_real(**p)).map(|p| p.re));
            v.push(self.origin);
        }
        v.sort_by(f64::total_cmp);
        v
    }

    /// Distance from x to the nearest pole (complex distance) of `sector`.
    pub fn distance(&self, x: f64, sector: Sector) -> f64 {
        let mut d = self.family_forward.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min);
        if sector == Sector::Epsilon {
            d = self.family_backward.iter().map(|p| (p - x).norm()).fold(d, f64::min);
            d = d.min((self.origin - x).abs());
        }
        d
    }
}

/// Offset (ξ + λξ*)ε/(2√λ) of the pole families.
fn epsilon_term(params: &ModelParams) -> C64 {
    let xi = params.xi();
    (xi + xi.conj() * params.lambda) * (params.epsilon / (2.0 * params.lambda.sqrt()))
}

/// Both pole families for n = 0..=n_max.
pub fn poles(params: &ModelParams, n_max: usize) -> Result<PoleRegistry> {
    poles_with_window(params, n_max, GConfig::default().exclusion_window)
}

pub fn poles_with_window(params: &ModelParams, n_max: usize, window: f64) -> Result<PoleRegistry> {
    let k = derive_constants(params)?;
    let w = params.omega;
    let shift = (1.0 - params.lambda).powi(2) * params.g * params.g / (2.0 * w);
    let et = epsilon_term(params);
    let family_forward = (0..=n_max).map(|n| C64::from(n as f64 * w - shift) + et).collect();
    let family_backward = (0..=n_max).map(|n| C64::from((n + 1) as f64 * w - shift) - et).collect();
    Ok(PoleRegistry { family_forward, family_backward, origin: -k.c.re, n_range: 0..=n_max, window: window * w })
}

/// Evaluator with the constants and the pole registry precomputed.
#[derive(Clone, Debug)]
pub struct GFunction {
    pub params: ModelParams,
    pub consts: DerivedConstants,
    pub cfg: GConfig,
    pub poles: PoleRegistry,
    origin: SeriesPoint,
}

impl GFunction {
    /// Registry covers poles up to `x_max`.
    pub fn new(params: &ModelParams, x_max: f64, cfg: GConfig) -> Result<Self> {
        params.validate()?;
        let consts = derive_constants(params)?;
        if params.g <= 0.0 {
            return Err(Error::Domain("G-functions are degenerate at g = 0".into()));
        }
        let reach = (x_max / params.omega).max(0.0) + 2.0 + epsilon_term(params).norm() / params.omega;
        let poles = poles_with_window(params, reach.ceil() as usize, cfg.exclusion_window)?;
        Ok(GFunction { params: *params, consts, cfg, poles, origin: SeriesPoint::origin(params) })
    }

    pub fn check_sector(&self, sector: Sector) -> Result<()> {
        if sector != Sector::Epsilon && self.params.epsilon != 0.0 {
            return Err(Error::SymmetryBroken(self.params.epsilon));
        }
        Ok(())
    }

    /// (φ₁, φ₂) from the forward branch at z = 0.
    pub fn forward_phi(&self, x: f64) -> Result<(C64, C64)> {
        let t = series::forward_coefficients(&self.consts, &self.params, x, &self.cfg.series)?;
        series::eval_phi(&t, &self.origin)
    }

    /// (φ̄₁, φ̄₂) from the backward branch at z = 0.
    pub fn backward_phi(&self, x: f64) -> Result<(C64, C64)> {
        let t = series::backward_coefficients(&self.consts, &self.params, x, &self.cfg.series)?;
        series::eval_phi(&t, &self.origin)
    }

    pub fn eval(&self, x: f64, sector: Sector) -> Result<GValue> {
        self.check_sector(sector)?;
        let near_pole = self.poles.distance(x, sector) < self.poles.window;
        let value = match self.raw(x, sector) {
            Ok(v) => Some(v),
            Err(Error::PoleHit { .. }) => return Ok(GValue { x, value: None, sector, near_pole: true }),
            Err(e) => return Err(e),
        };
        Ok(GValue { x, value, sector, near_pole })
    }

    fn raw(&self, x: f64, sector: Sector) -> Result<C64> {
        let (p1, p2) = self.forward_phi(x)?;
        let xi = self.consts.xi;
        let sl = self.params.lambda.sqrt();
        Ok(match sector {
            Sector::Plus => -xi * p1 + p2 * sl,
            Sector::Minus => p1 * sl + xi.conj() * p2,
            Sector::Epsilon => {
                let (q1, q2) = self.backward_phi(x)?;
                p1 * q2 - p2 * q1
            }
        })
    }

    /// Phase that makes a sector function real: G₊ is real and G₋ carries
    /// e^{−iθ/2}. G_ε has no fixed phase; callers pick one from samples.
    pub fn sector_phase(&self, sector: Sector) -> Option<C64> {
        match sector {
            Sector::Plus => Some(C64::from(1.0)),
            Sector::Minus => Some(self.consts.xi),
            Sector::Epsilon => None,
        }
    }

    /// Cleared-denominator residual |Bₙ Kₙ + Cₙ Kₙ₋₁| / scale at the n-th
    /// forward pole. Zero means the pole lifts.
    pub fn lifting_residual(&self, n: usize) -> Result<f64> {
        let p = self.poles.family_forward[n];
        if !self.poles.is_real(p) {
            return Err(Error::Domain(format!("pole {n} is off the real axis ({p})")));
        }
        Ok(series::pole_numerator(&self.consts, &self.params, p.re, n, &self.cfg.series)?.relative())
    }
}

pub fn g_epsilon(params: &ModelParams, x: f64) -> Result<GValue> {
    GFunction::new(params, x, GConfig::default())?.eval(x, Sector::Epsilon)
}

pub fn g_parity(params: &ModelParams, x: f64, sector: Sector) -> Result<GValue> {
    if sector == Sector::Epsilon {
        return Err(Error::Domain("g_parity takes the plus or minus sector".into()));
    }
    if params.epsilon != 0.0 {
        return Err(Error::SymmetryBroken(params.epsilon));
    }
    GFunction::new(params, x, GConfig::default())?.eval(x, sector)
}
