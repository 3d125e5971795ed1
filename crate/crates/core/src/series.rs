//! Three-term recurrences for the series coefficients and summation of the
//! four series functions φ₁, φ₂, φ̄₁, φ̄₂.
//!
//! Coefficients are stored pre-multiplied by y₀ⁿ, where y₀ = √λ g ξ*/ω is the
//! value of the shifted variable at z = 0. Summing at z = 0 is then a plain
//! sum of the stored terms and the raw Kₙ (which grow like (2|y₀|)⁻ⁿ) never
//! overflow for small couplings.
//!
//! The K recurrence is evaluated in cleared-denominator form
//! `Aₙ Kₙ₊₁ = Bₙ Kₙ + Cₙ Kₙ₋₁` with `Aₙ = aₙ Dₙ` etc., which removes the
//! removable singularity of the forward branch at Dₙ = nω − x + c = 0.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DerivedConstants, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Kₙ⁺, Lₙ⁺: builds φ₁ (from L) and φ₂ (from K).
    Forward,
    /// Kₙ⁻, Lₙ⁻: builds φ̄₁ (from K) and φ̄₂ (from L).
    Backward,
}

/// Truncation and guard settings for the recurrences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesConfig {
    pub n_cap: usize,
    /// Relative size below which a term counts as negligible.
    pub tail_rel: f64,
    /// Consecutive negligible terms required to stop.
    pub tail_run: usize,
    /// Denominators below `guard · ω` raise [`Error::PoleHit`].
    pub guard: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { n_cap: 250, tail_rel: 1e-14, tail_run: 8, guard: 1e-9 }
    }
}

/// Series coefficients at a trial spectral parameter x.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub x: f64,
    pub branch: Branch,
    /// Kₙ y₀ⁿ for n = 0..n_used.
    pub k_scaled: Vec<C64>,
    /// Lₙ y₀ⁿ for n = 0..n_used.
    pub l_scaled: Vec<C64>,
    pub n_used: usize,
    pub converged: bool,
    /// y₀ = √λ g ξ*/ω.
    pub y0: C64,
    /// |y| up to which the tail test was applied.
    pub radius: f64,
}

impl CoefficientTable {
    /// Raw coefficient Kₙ.
    pub fn k(&self, n: usize) -> C64 {
        self.k_scaled[n] / self.y0.powi(n as i32)
    }

    /// Raw coefficient Lₙ.
    pub fn l(&self, n: usize) -> C64 {
        self.l_scaled[n] / self.y0.powi(n as i32)
    }

    /// ln|Kₙ| and ln|Lₙ| without forming y₀⁻ⁿ.
    pub fn ln_abs(&self, n: usize) -> (f64, f64) {
        let shift = n as f64 * self.y0.norm().ln();
        (self.k_scaled[n].norm().ln() - shift, self.l_scaled[n].norm().ln() - shift)
    }
}

/// Bargmann variable z together with y = z + √λ g ξ*/ω and the prefactor
/// exp(−√λ g ξ z/ω).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub z: C64,
    pub y: C64,
    pub prefactor: C64,
}

impl SeriesPoint {
    pub fn new(params: &ModelParams, z: C64) -> Self {
        let s = params.lambda.sqrt() * params.g / params.omega;
        let xi = params.xi();
        SeriesPoint { z, y: z + xi.conj() * s, prefactor: (-(xi * s) * z).exp() }
    }

    pub fn origin(params: &ModelParams) -> Self {
        Self::new(params, C64::from(0.0))
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    omega: f64,
    g: f64,
    lambda: f64,
    sl: f64,
    xi: C64,
    c: C64,
    f: C64,
    fbar: C64,
    x: f64,
}

impl Ctx {
    fn new(k: &DerivedConstants, p: &ModelParams, x: f64) -> Result<Self> {
        if p.lambda <= 0.0 {
            return Err(Error::JaynesCummingsLimit);
        }
        if p.g <= 0.0 {
            return Err(Error::Domain("series degenerate at g = 0".into()));
        }
        Ok(Ctx {
            omega: p.omega,
            g: p.g,
            lambda: p.lambda,
            sl: p.lambda.sqrt(),
            xi: k.xi,
            c: k.c,
            f: k.f,
            fbar: k.fbar,
            x,
        })
    }

    fn y0(&self) -> C64 {
        self.xi.conj() * (self.sl * self.g / self.omega)
    }

    /// Dₙ = nω − x + c (forward) / D̄ₙ = nω − x − c (backward).
    fn den(&self, branch: Branch, n: f64) -> C64 {
        match branch {
            Branch::Forward => C64::from(n * self.omega - self.x) + self.c,
            Branch::Backward => C64::from(n * self.omega - self.x) - self.c,
        }
    }

    /// Cleared forward coefficients (aₙDₙ, bₙDₙ, cₙDₙ).
    fn forward_abc(&self, n: usize) -> (C64, C64, C64) {
        let nf = n as f64;
        let g = self.g;
        let om = 1.0 - self.lambda;
        let dn = self.den(Branch::Forward, nf);
        let dm = self.den(Branch::Forward, nf - 1.0);
        let xs = self.xi.conj();
        let a = (dn * (2.0 * self.sl) - self.f * xs * om) * (xs * ((nf + 1.0) * g));
        let diag = C64::from(4.0 * self.lambda * g * g / self.omega + nf * self.omega - self.x) - self.c;
        let mut b = diag * dn - self.f * self.f.conj();
        let mut c = -(self.xi * dn) * (2.0 * self.sl * g);
        if n > 0 {
            let ratio = dn / dm;
            b -= ratio * (om * om * g * g * nf);
            c += ratio * self.f.conj() * self.xi * self.xi * (om * g);
        }
        (a, b, c)
    }

    /// Sums of the magnitudes of the individual terms making up Bₙ and Cₙ,
    /// the natural scale for deciding that Bₙ Kₙ + Cₙ Kₙ₋₁ vanishes.
    fn forward_bc_scale(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let g = self.g;
        let om = 1.0 - self.lambda;
        let dn = self.den(Branch::Forward, nf).norm();
        let diag = (C64::from(4.0 * self.lambda * g * g / self.omega + nf * self.omega - self.x) - self.c).norm();
        let mut b = (4.0 * self.lambda * g * g / self.omega + nf * self.omega + self.x.abs() + self.c.norm()).max(diag) * dn
            + self.f.norm_sqr();
        let mut c = 2.0 * self.sl * g * dn;
        if n > 0 {
            let ratio = dn / self.den(Branch::Forward, nf - 1.0).norm();
            b += ratio * om * om * g * g * nf;
            c += ratio * self.f.norm() * om * g;
        }
        (b, c)
    }

    /// Cleared backward coefficients (āₙD̄ₙ₊₁, b̄ₙD̄ₙ₊₁, c̄ₙD̄ₙ₊₁).
    fn backward_abc(&self, n: usize) -> (C64, C64, C64) {
        let nf = n as f64;
        let g = self.g;
        let om = 1.0 - self.lambda;
        let dn = self.den(Branch::Backward, nf);
        let dp = self.den(Branch::Backward, nf + 1.0);
        let xs = self.xi.conj();
        let a = (dp * (2.0 * self.sl) + self.fbar * xs * om) * (xs * ((nf + 1.0) * g));
        let diag = C64::from(4.0 * self.lambda * g * g / self.omega + nf * self.omega - self.x) + self.c;
        let ratio = dp / dn;
        let b = diag * dp - ratio * self.fbar.conj() * self.fbar - C64::from(om * om * g * g * (nf + 1.0));
        let c = -(self.xi * dp) * (2.0 * self.sl * g) - ratio * self.fbar.conj() * self.xi * self.xi * (om * g);
        (a, b, c)
    }

    /// Threshold on |Aₙ| equivalent to the pole sitting within guard·ω of x.
    fn a_guard(&self, n: usize, guard: f64) -> f64 {
        guard * self.omega * 2.0 * self.sl * (n as f64 + 1.0) * self.g
    }
}

enum Stop {
    Tail { radius: f64 },
    Fixed(usize),
}

fn build(
    consts: &DerivedConstants,
    params: &ModelParams,
    x: f64,
    branch: Branch,
    stop: Stop,
    cfg: &SeriesConfig,
) -> Result<CoefficientTable> {
    let ctx = Ctx::new(consts, params, x)?;
    let y0 = ctx.y0();
    let y0n = y0.norm();
    let (n_limit, radius) = match stop {
        Stop::Tail { radius } => (cfg.n_cap, radius),
        Stop::Fixed(n) => (n, y0n),
    };
    let rho = radius / y0n;
    let hit = |index: usize| Error::PoleHit { x, index, branch };
    let guard = cfg.guard * ctx.omega;

    // k[n] = Kₙ y₀ⁿ. One look-ahead entry is kept for the forward L ratio.
    let mut k: Vec<C64> = Vec::with_capacity(n_limit + 2);
    let mut l: Vec<C64> = Vec::with_capacity(n_limit + 1);
    k.push(C64::from(1.0));
    let om = 1.0 - ctx.lambda;
    let mut sum_k = NeumaierSum::default();
    let mut sum_l = NeumaierSum::default();
    let mut quiet = 0usize;
    let mut converged = false;

    let mut n = 0usize;
    while n < n_limit {
        // K_{n+1}
        let (a, b, c) = match branch {
            Branch::Forward => ctx.forward_abc(n),
            Branch::Backward => {
                let dn = ctx.den(Branch::Backward, n as f64);
                if dn.norm() < guard {
                    return Err(hit(n));
                }
                ctx.backward_abc(n)
            }
        };
        if a.norm() < ctx.a_guard(n, cfg.guard) {
            return Err(hit(n));
        }
        let km1 = if n > 0 { k[n - 1] } else { C64::from(0.0) };
        let next = (b * k[n] + c * km1 * y0) * y0 / a;
        k.push(next);

        // Lₙ
        let ln = match branch {
            Branch::Forward => {
                let dn = ctx.den(Branch::Forward, n as f64);
                if dn.norm() < guard {
                    return Err(hit(n));
                }
                let xs = ctx.xi.conj();
                (ctx.f.conj() * k[n] - xs * xs * (om * ctx.g * (n as f64 + 1.0)) * k[n + 1] / y0) / dn
            }
            Branch::Backward => {
                let dn = ctx.den(Branch::Backward, n as f64);
                let prev = if n > 0 { k[n - 1] * y0 } else { C64::from(0.0) };
                (ctx.fbar * k[n] + ctx.xi * ctx.xi * (om * ctx.g) * prev) / dn
            }
        };
        l.push(ln);

        if let Stop::Tail { .. } = stop {
            let w = rho.powi(n as i32);
            sum_k.add(k[n]);
            sum_l.add(ln);
            let scale = sum_k.value().norm().max(sum_l.value().norm());
            let term = k[n].norm().max(ln.norm()) * w;
            if !term.is_finite() {
                break;
            }
            if term <= cfg.tail_rel * scale {
                quiet += 1;
                if quiet >= cfg.tail_run {
                    converged = true;
                    n += 1;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        n += 1;
    }
    if let Stop::Fixed(_) = stop {
        converged = k.iter().chain(l.iter()).all(|v| v.re.is_finite() && v.im.is_finite());
    }
    k.truncate(n);
    Ok(CoefficientTable { x, branch, k_scaled: k, l_scaled: l, n_used: n, converged, y0, radius })
}

/// Forward coefficients Kₙ⁺, Lₙ⁺ at x, truncated by the tail test at z = 0.
pub fn forward_coefficients(
    consts: &DerivedConstants,
    params: &ModelParams,
    x: f64,
    cfg: &SeriesConfig,
) -> Result<CoefficientTable> {
    let y0 = params.lambda.sqrt() * params.g / params.omega;
    build(consts, params, x, Branch::Forward, Stop::Tail { radius: y0 }, cfg)
}

/// Backward coefficients Kₙ⁻, Lₙ⁻ at x, truncated by the tail test at z = 0.
pub fn backward_coefficients(
    consts: &DerivedConstants,
    params: &ModelParams,
    x: f64,
    cfg: &SeriesConfig,
) -> Result<CoefficientTable> {
    let y0 = params.lambda.sqrt() * params.g / params.omega;
    build(consts, params, x, Branch::Backward, Stop::Tail { radius: y0 }, cfg)
}

/// Coefficients with the tail test applied at |y| = `radius` instead of |y₀|.
/// `radius` must lie inside the convergence radius 2√λ g/ω.
pub fn coefficients_at_radius(
    consts: &DerivedConstants,
    params: &ModelParams,
    x: f64,
    branch: Branch,
    radius: f64,
    cfg: &SeriesConfig,
) -> Result<CoefficientTable> {
    let r_conv = 2.0 * params.lambda.sqrt() * params.g / params.omega;
    if !(radius > 0.0 && radius < r_conv) {
        return Err(Error::Domain(format!("radius {radius} outside (0, {r_conv})")));
    }
    build(consts, params, x, branch, Stop::Tail { radius }, cfg)
}

/// Exactly `n_terms` coefficients, no tail test.
pub fn coefficients_fixed(
    consts: &DerivedConstants,
    params: &ModelParams,
    x: f64,
    branch: Branch,
    n_terms: usize,
    cfg: &SeriesConfig,
) -> Result<CoefficientTable> {
    build(consts, params, x, branch, Stop::Fixed(n_terms), cfg)
}

/// Sums the two series of `table` at `point`.
///
/// Forward tables return (φ₁, φ₂) = prefactor·(Σ Lₙyⁿ, Σ Kₙyⁿ); backward
/// tables return (φ̄₁, φ̄₂) = prefactor·(Σ Kₙyⁿ, Σ Lₙyⁿ).
pub fn eval_phi(table: &CoefficientTable, point: &SeriesPoint) -> Result<(C64, C64)> {
    if !table.converged {
        return Err(Error::NotConverged { x: table.x, n_used: table.n_used });
    }
    if point.y.norm() > table.radius * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "|y| = {} beyond the radius {} the table was truncated for",
            point.y.norm(),
            table.radius
        )));
    }
    let t = point.y / table.y0;
    let mut sk = NeumaierSum::default();
    let mut sl = NeumaierSum::default();
    let mut pow = C64::from(1.0);
    for (kn, ln) in table.k_scaled.iter().zip(&table.l_scaled) {
        sk.add(kn * pow);
        sl.add(ln * pow);
        pow *= t;
    }
    let (k, l) = (sk.value() * point.prefactor, sl.value() * point.prefactor);
    Ok(match table.branch {
        Branch::Forward => (l, k),
        Branch::Backward => (k, l),
    })
}

/// Cleared recurrence at the forward pole abscissa: returns (Aₙ, Bₙ Kₙ + Cₙ Kₙ₋₁)
/// together with the magnitude scale |Bₙ Kₙ| + |Cₙ Kₙ₋₁|. The pole at xₙ lifts
/// when the middle value vanishes.
pub fn pole_numerator(
    consts: &DerivedConstants,
    params: &ModelParams,
    x_pole: f64,
    n: usize,
    cfg: &SeriesConfig,
) -> Result<PoleNumerator> {
    let ctx = Ctx::new(consts, params, x_pole)?;
    let y0 = ctx.y0();
    // Raw K up to n; min(n, …) guards against early poles on the way.
    let mut raw = vec![C64::from(1.0)];
    for m in 0..n {
        let (a, b, c) = ctx.forward_abc(m);
        if a.norm() < ctx.a_guard(m, cfg.guard) {
            return Err(Error::PoleHit { x: x_pole, index: m, branch: Branch::Forward });
        }
        let km1 = if m > 0 { raw[m - 1] } else { C64::from(0.0) };
        raw.push((b * raw[m] + c * km1) / a);
    }
    let (a, b, c) = ctx.forward_abc(n);
    let (bs, cs) = ctx.forward_bc_scale(n);
    let km1 = if n > 0 { raw[n - 1] } else { C64::from(0.0) };
    // Normalise by y₀ⁿ so the value does not depend on the coefficient growth.
    let s = y0.powi(n as i32);
    let numerator = (b * raw[n] + c * km1) * s;
    let scale = (bs * raw[n].norm() + cs * km1.norm()) * s.norm();
    Ok(PoleNumerator { a, numerator, scale })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleNumerator {
    pub a: C64,
    pub numerator: C64,
    pub scale: f64,
}

impl PoleNumerator {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.numerator.norm() / self.scale
        }
    }
}

/// Neumaier-compensated complex summation.
#[derive(Clone, Copy, Default, Debug)]
pub(crate) struct NeumaierSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl NeumaierSum {
    fn step((sum, comp): (f64, f64), v: f64) -> (f64, f64) {
        let t = sum + v;
        let comp = if sum.abs() >= v.abs() { comp + ((sum - t) + v) } else { comp + ((v - t) + sum) };
        (t, comp)
    }

    pub(crate) fn add(&mut self, v: C64) {
        self.re = Self::step(self.re, v.re);
        self.im = Self::step(self.im, v.im);
    }

    pub(crate) fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_constants;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(delta: f64, eps: f64, g: f64, lambda: f64, theta: f64) -> ModelParams {
        ModelParams::new(1.0, delta, eps, g, lambda, theta).unwrap()
    }

    /// Raw (uncleared) forward recurrence exactly as written, for cross-checks.
    fn raw_forward(p: &ModelParams, x: f64, n_terms: usize) -> (Vec<C64>, Vec<C64>) {
        let k = derive_constants(p).unwrap();
        let (w, g, l) = (p.omega, p.g, p.lambda);
        let sl = l.sqrt();
        let (xi, c, f) = (k.xi, k.c, k.f);
        let xs = xi.conj();
        let mut kk = vec![C64::from(1.0)];
        for n in 0..n_terms {
            let nf = n as f64;
            let dn = C64::from(nf * w - x) + c;
            let dm = C64::from((nf - 1.0) * w - x) + c;
            let a = (C64::from(2.0 * sl) - (1.0 - l) * f * xs / dn) * (nf + 1.0) * g * xs;
            let mut b = C64::from(4.0 * l * g * g / w + nf * w - x) - c - f.conj() * f / dn;
            let mut cc = C64::from(-2.0 * sl * g) * xi;
            if n > 0 {
                b -= (1.0 - l).powi(2) * g * g * nf / dm;
                cc += (1.0 - l) * g * f.conj() * xi * xi / dm;
            }
            let km1 = if n > 0 { kk[n - 1] } else { C64::from(0.0) };
            kk.push((b * kk[n] + cc * km1) / a);
        }
        let ll = (0..n_terms)
            .map(|n| {
                let nf = n as f64;
                (f.conj() * kk[n] - xs * xs * (1.0 - l) * g * kk[n + 1] * (nf + 1.0)) / (C64::from(nf * w - x) + c)
            })
            .collect();
        kk.truncate(n_terms);
        (kk, ll)
    }

    #[test]
    fn k0_is_one() {
        let p = params(0.4, 0.2, 0.5, 0.5, -PI / 2.0);
        let k = derive_constants(&p).unwrap();
        let cfg = SeriesConfig::default();
        for x in [-0.7, 0.3, 2.2] {
            assert_eq!(forward_coefficients(&k, &p, x, &cfg).unwrap().k_scaled[0], C64::from(1.0));
            assert_eq!(backward_coefficients(&k, &p, x, &cfg).unwrap().k_scaled[0], C64::from(1.0));
        }
    }

    #[test]
    fn cleared_form_matches_written_recurrence() {
        let p = params(0.4, 0.2, 0.6, 0.4, 0.7);
        let k = derive_constants(&p).unwrap();
        let x = 0.81;
        let t = coefficients_fixed(&k, &p, x, Branch::Forward, 20, &SeriesConfig::default()).unwrap();
        let (kk, ll) = raw_forward(&p, x, 20);
        for n in 0..20 {
            let rk = (t.k(n) - kk[n]).norm() / kk[n].norm().max(1e-300);
            let rl = (t.l(n) - ll[n]).norm() / ll[n].norm().max(1e-300);
            assert!(rk < 1e-11 && rl < 1e-11, "n={n} rk={rk} rl={rl}");
        }
    }

    #[test]
    fn isotropic_recurrence_reduces() {
        // λ = 1, θ = ε = 0: cleared coefficients are (2D(n+1)g, …, −2gD).
        let p = params(0.4, 0.0, 0.7, 1.0, 0.0);
        let k = derive_constants(&p).unwrap();
        let ctx = Ctx::new(&k, &p, 0.37).unwrap();
        for n in 0..6 {
            let dn = n as f64 - 0.37;
            let (a, _, c) = ctx.forward_abc(n);
            assert_abs_diff_eq!((a / dn).re, 2.0 * (n as f64 + 1.0) * 0.7, epsilon = 1e-13);
            assert_abs_diff_eq!((c / dn).re, -2.0 * 0.7, epsilon = 1e-13);
            let dp = n as f64 + 1.0 - 0.37;
            let (ab, _, _) = ctx.backward_abc(n);
            assert_abs_diff_eq!((ab / dp).re, 2.0 * (n as f64 + 1.0) * 0.7, epsilon = 1e-13);
        }
    }

    #[test]
    fn juddian_point_has_vanishing_a0_and_b0() {
        let g = 4.0 / 15f64.sqrt();
        let p = params(0.4, 0.0, g, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let x_pole = -(0.5f64).powi(2) * g * g / 2.0;
        let pn = pole_numerator(&k, &p, x_pole, 0, &SeriesConfig::default()).unwrap();
        assert!(pn.a.norm() < 1e-14);
        assert!(pn.relative() < 1e-14);
    }

    #[test]
    fn juddian_series_terminates() {
        let g = 4.0 / 15f64.sqrt();
        let p = params(0.4, 0.0, g, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let x_pole = -(0.25) * g * g / 2.0;
        // Evaluate a hair away from the pole: L₀ ≈ 2√λ/(1−λ) = 2√2 and the
        // K series stays dominated by K₀.
        let ctx = Ctx::new(&k, &p, x_pole).unwrap();
        let l0 = ctx.f.conj() / ctx.den(Branch::Forward, 0.0);
        assert_abs_diff_eq!(l0.re, 2.0 * 2f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(l0.im, 0.0);
    }

    #[test]
    fn backward_pole_family_position() {
        // ε = θ = 0: āₙ vanishes at (n+1)ω − (1−λ)²g²/2ω.
        let p = params(0.4, 0.0, 0.7, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        for n in 0..4 {
            let xb = (n as f64 + 1.0) - 0.25 * 0.49 / 2.0;
            let ctx = Ctx::new(&k, &p, xb).unwrap();
            let (a, _, _) = ctx.backward_abc(n);
            assert!(a.norm() < 1e-13, "n={n} a={a}");
        }
    }

    #[test]
    fn pole_hit_reported() {
        let p = params(0.4, 0.0, 0.7, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let x1 = 1.0 - 0.25 * 0.49 / 2.0;
        let err = forward_coefficients(&k, &p, x1, &SeriesConfig::default()).unwrap_err();
        assert!(matches!(err, Error::PoleHit { index: 1, branch: Branch::Forward, .. }));
    }

    #[test]
    fn small_coupling_limit() {
        let p = params(0.4, 0.0, 1e-6, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let t = forward_coefficients(&k, &p, 0.3, &SeriesConfig::default()).unwrap();
        let (_, phi2) = eval_phi(&t, &SeriesPoint::new(&p, C64::from(-(0.5f64.sqrt()) * 1e-6))).unwrap();
        // y = 0 there; only K₀ survives.
        assert_abs_diff_eq!(phi2.re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn real_inputs_give_real_series() {
        let p = params(0.4, 0.0, 0.8, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let cfg = SeriesConfig::default();
        let o = SeriesPoint::origin(&p);
        for x in [-0.4, 0.5, 1.7] {
            let (a, b) = eval_phi(&forward_coefficients(&k, &p, x, &cfg).unwrap(), &o).unwrap();
            let (c, d) = eval_phi(&backward_coefficients(&k, &p, x, &cfg).unwrap(), &o).unwrap();
            for v in [a, b, c, d] {
                assert_eq!(v.im, 0.0);
            }
        }
    }

    #[test]
    fn not_converged_is_reported() {
        let p = params(0.4, 0.0, 0.8, 0.5, 0.0);
        let k = derive_constants(&p).unwrap();
        let cfg = SeriesConfig { n_cap: 3, ..Default::default() };
        let t = forward_coefficients(&k, &p, 0.2, &cfg).unwrap();
        assert!(!t.converged);
        assert!(matches!(eval_phi(&t, &SeriesPoint::origin(&p)), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = NeumaierSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(C64::from(v));
        }
        assert_eq!(s.value().re, 2.0);
    }
}
