//! Energy spectrum from the zeros of the G-functions.
//!
//! Regular roots are bracketed on a uniform grid that is split at every real
//! pole, so a sign change across a pole is never mistaken for a root; roots
//! closer to a pole than the flagging window are still found. Exceptional
//! (Juddian) doublets sit exactly on forward poles whose residue vanishes.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfunction::{GConfig, GFunction, Sector};
use crate::model::ModelParams;
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RootKind {
    Regular,
    Exceptional,
}

impl fmt::Display for RootKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RootKind::Regular => "regular",
            RootKind::Exceptional => "exceptional",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyRoot {
    pub x: f64,
    pub energy: f64,
    pub sector: Sector,
    pub kind: RootKind,
    pub degeneracy: u8,
    pub residual_abs: f64,
    /// Closer to a registered pole than the exclusion window.
    pub near_pole: bool,
}

impl EnergyRoot {
    fn new(params: &ModelParams, x: f64, sector: Sector, kind: RootKind, residual_abs: f64) -> Self {
        let degeneracy = if kind == RootKind::Exceptional { 2 } else { 1 };
        EnergyRoot { x, energy: x - params.energy_shift(), sector, kind, degeneracy, residual_abs, near_pole: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub gfunction: GConfig,
    /// Grid points per unit ω.
    pub grid_density: f64,
    /// Root refinement tolerance in units of ω.
    pub tol: f64,
    /// Distance (units of ω) from a real pole at which a segment scan stops.
    pub pole_core: f64,
    /// |Im G| acceptance relative to the median |G| on the grid (ε ≠ 0).
    pub im_accept: f64,
    /// Sector roots closer than this (units of ω) are merged into a doublet.
    pub merge_tol: f64,
    /// Relative lifting residual below which a pole is exceptional.
    pub lift_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gfunction: GConfig::default(),
            grid_density: 400.0,
            tol: 1e-12,
            pole_core: 1e-9,
            im_accept: 1e-8,
            merge_tol: 1e-9,
            lift_tol: 1e-10,
        }
    }
}

/// Result of a bracketing scan.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RootScan {
    pub roots: Vec<EnergyRoot>,
    /// Brackets whose refinement ran into a pole guard, for inspection.
    pub flagged: Vec<(f64, f64)>,
}

struct Sampler<'a> {
    gf: &'a GFunction,
    sector: Sector,
    phase: C64,
}

impl Sampler<'_> {
    fn value(&self, x: f64) -> Result<Option<C64>> {
        Ok(self.gf.eval(x, self.sector)?.value.map(|v| v * self.phase))
    }
    fn proj(&self, x: f64) -> Result<Option<f64>> {
        Ok(self.value(x)?.map(|v| v.re))
    }
}

/// Regular roots of the G-functions in [x_min, x_max].
///
/// At ε = 0 both sector functions are scanned; otherwise G_ε. Real poles
/// split the range into segments scanned up to `pole_core` from each pole.
pub fn find_roots(params: &ModelParams, x_min: f64, x_max: f64, cfg: &SolverConfig) -> Result<RootScan> {
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
        return Err(Error::Domain(format!("invalid scan range [{x_min}, {x_max}]")));
    }
    let gf = GFunction::new(params, x_max, cfg.gfunction)?;
    let sectors: &[Sector] =
        if params.epsilon == 0.0 { &[Sector::Plus, Sector::Minus] } else { &[Sector::Epsilon] };
    let mut out = RootScan::default();
    for &sector in sectors {
        scan_sector(&gf, sector, x_min, x_max, cfg, &mut out)?;
    }
    out.roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(out)
}

fn segments(gf: &GFunction, sector: Sector, x_min: f64, x_max: f64, core: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![(x_min, false)];
    cuts.extend(gf.poles.real_abscissas(sector).into_iter().filter(|p| *p > x_min && *p < x_max).map(|p| (p, true)));
    cuts.push((x_max, false));
    cuts.windows(2)
        .filter_map(|w| {
            let a = if w[0].1 { w[0].0 + core } else { w[0].0 };
            let b = if w[1].1 { w[1].0 - core } else { w[1].0 };
            (b > a).then_some((a, b))
        })
        .collect()
}

fn scan_sector(
    gf: &GFunction,
    sector: Sector,
    x_min: f64,
    x_max: f64,
    cfg: &SolverConfig,
    out: &mut RootScan,
) -> Result<()> {
    let w = gf.params.omega;
    let segs = segments(gf, sector, x_min, x_max, cfg.pole_core * w);
    let mut grids: Vec<Vec<(f64, Option<C64>)>> = Vec::with_capacity(segs.len());
    for &(a, b) in &segs {
        let n = (((b - a) / w) * cfg.grid_density).ceil().max(4.0) as usize;
        let mut pts = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
            let mut v = gf.eval(x, sector)?.value;
            // pole-side endpoints can trip the coefficient guard; back off
            // so a root just inside the last grid cell keeps its bracket
            if v.is_none() && (i == 0 || i == n) {
                let (inward, mut d) = (if i == 0 { 1.0 } else { -1.0 }, cfg.pole_core * w);
                while v.is_none() && d < 1e-3 * (b - a) {
                    d *= 10.0;
                    v = gf.eval(x + inward * d, sector)?.value;
                    if v.is_some() {
                        pts.push((x + inward * d, v));
                    }
                }
                continue;
            }
            pts.push((x, v));
        }
        // unavailable samples are dropped; brackets join the valid neighbours
        pts.retain(|p| p.1.is_some());
        grids.push(pts);
    }
    let all = || grids.iter().flatten().filter_map(|(_, v)| *v);
    let phase = match gf.sector_phase(sector) {
        Some(p) => p,
        None => principal_phase(all()),
    };
    let mut mags: Vec<f64> = all().map(|v| v.norm()).collect();
    let median = median(&mut mags);
    let window = cfg.gfunction.exclusion_window * w;
    // G_ε is scanned along two orthogonal projections: with complex poles
    // its phase drifts along the real axis, and a root can sit where one
    // projection's slope vanishes. Real-valued sector functions need one.
    let complex = all().any(|v| (v * phase).im.abs() > cfg.im_accept * median);
    let phases: &[C64] = if sector == Sector::Epsilon && complex {
        &[phase, C64::new(0.0, -1.0) * phase]
    } else {
        &[phase]
    };
    let first = out.roots.len();
    for (pass, &phase) in phases.iter().enumerate() {
        let sampler = Sampler { gf, sector, phase };
        let found = out.roots.len();
        for pts in &grids {
            for pair in pts.windows(2) {
                let ((xa, va), (xb, vb)) = (pair[0], pair[1]);
                let (Some(va), Some(vb)) = (va, vb) else { continue };
                let (fa, fb) = ((va * phase).re, (vb * phase).re);
                let x = if fa == 0.0 {
                    xa
                } else if fa * fb > 0.0 || fb == 0.0 {
                    continue;
                } else {
                    match brent(|x| sampler.proj(x), xa, xb, fa, fb, cfg.tol * w)? {
                        Some(x) => x,
                        None => {
                            log::warn!("{sector} bracket [{xa}, {xb}] stalled near a pole");
                            out.flagged.push((xa, xb));
                            continue;
                        }
                    }
                };
                let Some(v) = sampler.value(x)? else {
                    out.flagged.push((xa, xb));
                    continue;
                };
                if sector == Sector::Epsilon {
                    // Both parts vanish at a genuine root; the slope term covers
                    // the imaginary part left over by the finite x tolerance.
                    let slope = (vb - va).norm() / (xb - xa);
                    let allowed = cfg.im_accept * median + 100.0 * slope * cfg.tol * w;
                    if v.im.abs() > allowed {
                        log::debug!("rejected x = {x}: |Im G| = {:e} > {allowed:e}", v.im.abs());
                        continue;
                    }
                }
                if pass > 0 && out.roots[first..found].iter().any(|r| (r.x - x).abs() < 1e3 * cfg.tol * w) {
                    continue;
                }
                let mut r = EnergyRoot::new(&gf.params, x, sector, RootKind::Regular, v.norm());
                r.near_pole = gf.poles.distance(x, sector) < window;
                out.roots.push(r);
            }
        }
    }
    Ok(())
}

/// e^{−iα} with α the principal direction of the samples (unit weights).
fn principal_phase(values: impl Iterator<Item = C64>) -> C64 {
    let s: C64 = values.filter(|v| v.norm() > 0.0).map(|v| (v / v.norm()).powi(2)).sum();
    if s.norm() == 0.0 {
        return C64::from(1.0);
    }
    C64::from_polar(1.0, -0.5 * s.arg())
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Brent's method on a bracket with f(a)·f(b) < 0. `None` if f becomes
/// unavailable (pole guard) inside the bracket.
fn brent<F>(f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<Option<f64>>,
{
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(Some(b));
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let between = if lo < b { s > lo && s < b } else { s > b && s < lo };
        let reject = !between
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol);
        if reject {
            s = 0.5 * (a + b);
        }
        bisected = reject;
        let Some(fs) = f(s)? else { return Ok(None) };
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(Some(b))
}

/// Juddian doublets: forward poles in `n_range` whose lifting numerator
/// vanishes. Requires ε = 0; reported once with degeneracy 2 and no parity.
pub fn exceptional_solutions(
    params: &ModelParams,
    n_range: std::ops::RangeInclusive<usize>,
    cfg: &SolverConfig,
) -> Result<Vec<EnergyRoot>> {
    if params.epsilon != 0.0 {
        return Err(Error::SymmetryBroken(params.epsilon));
    }
    let x_top = *n_range.end() as f64 * params.omega;
    let gf = GFunction::new(params, x_top, cfg.gfunction)?;
    let mut out = Vec::new();
    for n in n_range {
        if n >= gf.poles.family_forward.len() {
            break;
        }
        let x = gf.poles.family_forward[n].re;
        match gf.lifting_residual(n) {
            Ok(r) if r < cfg.lift_tol => {
                let mut root = EnergyRoot::new(params, x, Sector::Epsilon, RootKind::Exceptional, 0.0);
                root.near_pole = true;
                out.push(root);
            }
            Ok(_) => {}
            // An earlier coincident pole on the way: no lifting at this n.
            Err(Error::PoleHit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Spectrum below some energy, doublets merged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub params: ModelParams,
    pub roots: Vec<EnergyRoot>,
    pub flagged: Vec<(f64, f64)>,
}

impl Spectrum {
    /// Lowest `k` energies, each repeated by its degeneracy.
    pub fn levels(&self, k: usize) -> Vec<f64> {
        self.roots.iter().flat_map(|r| std::iter::repeat_n(r.energy, r.degeneracy as usize)).take(k).collect()
    }

    pub fn level_count(&self) -> usize {
        self.roots.iter().map(|r| r.degeneracy as usize).sum()
    }

    /// Roots accounting for the lowest `k` levels.
    pub fn lowest(&self, k: usize) -> Vec<EnergyRoot> {
        let mut n = 0;
        self.roots
            .iter()
            .take_while(|r| {
                let keep = n < k;
                n += r.degeneracy as usize;
                keep
            })
            .copied()
            .collect()
    }
}

/// Lower bound on the ground energy.
fn energy_floor(p: &ModelParams) -> f64 {
    -(p.delta * p.delta + p.epsilon * p.epsilon).sqrt() - p.g * p.g * (1.0 + p.lambda).powi(2) / p.omega
}

/// Energies up to at least `k` levels. λ = 0 uses the JC closed form and
/// g = 0 the decoupled one.
pub fn solve_spectrum(params: &ModelParams, k: usize, cfg: &SolverConfig) -> Result<Spectrum> {
    params.validate()?;
    if params.g == 0.0 {
        return Ok(Spectrum { params: *params, roots: decoupled(params, k), flagged: vec![] });
    }
    if params.is_jaynes_cummings() {
        if params.epsilon != 0.0 {
            return Err(Error::Domain("the λ = 0 closed forms need ε = 0".into()));
        }
        let roots = jc_spectrum(params, k)?
            .into_iter()
            .map(|l| EnergyRoot::new(params, l.energy, l.sector, RootKind::Regular, 0.0))
            .collect();
        return Ok(Spectrum { params: *params, roots, flagged: vec![] });
    }
    let w = params.omega;
    let x_min = energy_floor(params) + params.energy_shift() - 0.05 * w;
    let mut span = (k as f64 + 2.0) * w;
    loop {
        let x_max = x_min + span;
        let s = spectrum_in(params, x_min, x_max, cfg)?;
        if s.level_count() >= k {
            return Ok(s);
        }
        if span > 64.0 * (k as f64 + 2.0) * w {
            return Err(Error::Domain(format!("found only {} of {k} levels below x = {x_max}", s.level_count())));
        }
        span *= 2.0;
    }
}

/// Regular and exceptional roots in [x_min, x_max], doublets merged.
pub fn spectrum_in(params: &ModelParams, x_min: f64, x_max: f64, cfg: &SolverConfig) -> Result<Spectrum> {
    let scan = find_roots(params, x_min, x_max, cfg)?;
    let w = params.omega;
    let mut exc = Vec::new();
    if params.epsilon == 0.0 {
        let top = ((x_max / w).ceil().max(0.0) as usize) + 1;
        exc = exceptional_solutions(params, 0..=top, cfg)?;
        exc.retain(|r| r.x >= x_min && r.x <= x_max);
    }
    let window = cfg.gfunction.exclusion_window * w;
    let mut roots: Vec<EnergyRoot> =
        scan.roots.into_iter().filter(|r| exc.iter().all(|e| (e.x - r.x).abs() > window)).collect();
    roots.extend(exc);
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    // merge coincident roots from the two sectors
    let mut merged: Vec<EnergyRoot> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last)
                if last.kind == RootKind::Regular
                    && r.kind == RootKind::Regular
                    && last.sector != r.sector
                    && last.degeneracy == 1
                    && (r.x - last.x).abs() < cfg.merge_tol * w =>
            {
                last.degeneracy = 2;
                last.sector = Sector::Epsilon;
                last.residual_abs = last.residual_abs.max(r.residual_abs);
            }
            _ => merged.push(r),
        }
    }
    Ok(Spectrum { params: *params, roots: merged, flagged: scan.flagged })
}

fn decoupled(p: &ModelParams, k: usize) -> Vec<EnergyRoot> {
    let r = (p.delta * p.delta + p.epsilon * p.epsilon).sqrt();
    let mut v: Vec<EnergyRoot> = (0..k)
        .flat_map(|n| {
            let par = if n % 2 == 0 { Sector::Plus } else { Sector::Minus };
            let flip = if par == Sector::Plus { Sector::Minus } else { Sector::Plus };
            let (s_lo, s_hi) = if p.epsilon == 0.0 {
                if p.delta >= 0.0 {
                    (par, flip)
                } else {
                    (flip, par)
                }
            } else {
                (Sector::Epsilon, Sector::Epsilon)
            };
            let e = n as f64 * p.omega;
            [
                EnergyRoot::new(p, e - r + p.energy_shift(), s_lo, RootKind::Regular, 0.0),
                EnergyRoot::new(p, e + r + p.energy_shift(), s_hi, RootKind::Regular, 0.0),
            ]
        })
        .collect();
    v.sort_by(|a, b| a.x.total_cmp(&b.x));
    v.truncate(k);
    v
}

/// Closed form (g_c, E) of the first ground-state crossing:
/// g_c = √(2|Δ|ω/(1−λ²)), E = −(1+λ²)g_c²/2ω.
pub fn first_crossing(delta: f64, lambda: f64, omega: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("first crossing needs 0 <= lambda < 1, got {lambda}")));
    }
    if delta == 0.0 || omega <= 0.0 {
        return Err(Error::Domain("first crossing needs delta != 0 and omega > 0".into()));
    }
    let g2 = 2.0 * delta.abs() * omega / (1.0 - lambda * lambda);
    Ok((g2.sqrt(), -(1.0 + lambda * lambda) * g2 / (2.0 * omega)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JcLevel {
    pub energy: f64,
    /// Conserved excitation number a†a + (σz+1)/2.
    pub excitations: usize,
    pub sector: Sector,
}

/// Lowest `k` Jaynes–Cummings levels (λ is ignored): −Δ, then
/// (n+½)ω ± √((Δ−ω/2)² + g²(n+1)) for the pair with n+1 excitations.
pub fn jc_spectrum(params: &ModelParams, k: usize) -> Result<Vec<JcLevel>> {
    if params.epsilon != 0.0 {
        return Err(Error::SymmetryBroken(params.epsilon));
    }
    let (w, d, g) = (params.omega, params.delta, params.g);
    let sector = |m: usize| if m % 2 == 0 { Sector::Plus } else { Sector::Minus };
    let mut v = vec![JcLevel { energy: -d, excitations: 0, sector: Sector::Plus }];
    for n in 0..k {
        let r = ((d - w / 2.0).powi(2) + g * g * (n as f64 + 1.0)).sqrt();
        let c = (n as f64 + 0.5) * w;
        v.push(JcLevel { energy: c - r, excitations: n + 1, sector: sector(n + 1) });
        v.push(JcLevel { energy: c + r, excitations: n + 1, sector: sector(n + 1) });
    }
    v.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    v.truncate(k);
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlochSiegert {
    /// Ground-state shift λ²g²/ω.
    pub delta_e0: f64,
    /// First-excited shift ω/2 − √((Δ−ω/2)²+g²) + (1+λ²)g²/2ω.
    pub delta_e1: f64,
    /// Its leading order λ²g⁴/ω³.
    pub delta_e1_leading: f64,
    /// E₂ of the Jaynes–Cummings model, ω/2 + √((Δ−ω/2)²+g²).
    pub e2_jc: f64,
    /// Isotropic case only: E₃^JC − E₁ of the n = 1 exceptional level,
    /// 3ω/2 − √((Δ−ω/2)²+2g²) − (ω − g²/ω).
    pub e3_jc_minus_e1_exceptional: Option<f64>,
    /// |Δ| = (1−λ²)g²/2ω holds, making ΔE₀ exact.
    pub on_manifold: bool,
}

pub fn bloch_siegert(params: &ModelParams) -> BlochSiegert {
    let (w, d, g, l) = (params.omega, params.delta, params.g, params.lambda);
    let target = (1.0 - l * l) * g * g / (2.0 * w);
    let on_manifold = (d.abs() - target).abs() <= 1e-12 * w.max(target);
    if !on_manifold {
        log::warn!("|Δ| = {} differs from (1−λ²)g²/2ω = {target}; the shift formulas are not exact", d.abs());
    }
    let r1 = ((d - w / 2.0).powi(2) + g * g).sqrt();
    let e3 = (l == 1.0).then(|| 1.5 * w - ((d - w / 2.0).powi(2) + 2.0 * g * g).sqrt() - (w - g * g / w));
    BlochSiegert {
        delta_e0: l * l * g * g / w,
        delta_e1: w / 2.0 - r1 + (1.0 + l * l) * g * g / (2.0 * w),
        delta_e1_leading: l * l * g.powi(4) / w.powi(3),
        e2_jc: w / 2.0 + r1,
        e3_jc_minus_e1_exceptional: e3,
        on_manifold,
    }
}

/// Parameter that a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    G,
    Lambda,
    Delta,
    Epsilon,
    Theta,
    Omega,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::G => "g",
            SweepParam::Lambda => "lambda",
            SweepParam::Delta => "delta",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Theta => "theta",
            SweepParam::Omega => "omega",
        }
    }

    pub fn apply(&self, p: &ModelParams, v: f64) -> Result<ModelParams> {
        let mut q = *p;
        match self {
            SweepParam::G => q.g = v,
            SweepParam::Lambda => q.lambda = v,
            SweepParam::Delta => q.delta = v,
            SweepParam::Epsilon => q.epsilon = v,
            SweepParam::Theta => return p.with_theta(v),
            SweepParam::Omega => q.omega = v,
        }
        q.validate()?;
        Ok(q)
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "g" => SweepParam::G,
            "lambda" => SweepParam::Lambda,
            "delta" => SweepParam::Delta,
            "epsilon" | "eps" => SweepParam::Epsilon,
            "theta" => SweepParam::Theta,
            "omega" => SweepParam::Omega,
            other => return Err(Error::Domain(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSweep {
    pub sweep_parameter: SweepParam,
    pub grid: Vec<f64>,
    /// Lowest `k` energies per grid point (with multiplicity), ascending.
    pub levels: Vec<Vec<f64>>,
    pub sectors: Vec<Vec<Sector>>,
    pub kinds: Vec<Vec<RootKind>>,
}

pub fn sweep(base: &ModelParams, param: SweepParam, grid: &[f64], k: usize, cfg: &SolverConfig) -> Result<SpectrumSweep> {
    let mut out =
        SpectrumSweep { sweep_parameter: param, grid: grid.to_vec(), levels: vec![], sectors: vec![], kinds: vec![] };
    for &v in grid {
        let s = solve_spectrum(&param.apply(base, v)?, k, cfg)?;
        let (mut e, mut sec, mut kind) = (vec![], vec![], vec![]);
        for r in s.lowest(k) {
            for _ in 0..r.degeneracy {
                e.push(r.energy);
                sec.push(r.sector);
                kind.push(r.kind);
            }
        }
        e.truncate(k);
        sec.truncate(k);
        kind.truncate(k);
        out.levels.push(e);
        out.sectors.push(sec);
        out.kinds.push(kind);
    }
    Ok(out)
}

impl SpectrumSweep {
    /// Per-sector level tracks by nearest-energy continuation. Index i of
    /// row j continues the track with the closest energy at row j−1.
    pub fn tracks(&self, sector: Sector) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = self
            .levels
            .iter()
            .zip(&self.sectors)
            .map(|(e, s)| e.iter().zip(s).filter(|(_, t)| **t == sector).map(|(e, _)| *e).collect())
            .collect();
        let Some(first) = rows.first() else { return vec![] };
        let mut tracks: Vec<Vec<f64>> = first.iter().map(|e| vec![*e]).collect();
        for row in &rows[1..] {
            let mut used = vec![false; row.len()];
            for t in tracks.iter_mut() {
                let last = *t.last().unwrap();
                let best = (0..row.len()).filter(|i| !used[*i]).min_by(|a, b| {
                    (row[*a] - last).abs().total_cmp(&(row[*b] - last).abs())
                });
                if let Some(i) = best {
                    used[i] = true;
                    t.push(row[i]);
                }
            }
        }
        tracks
    }

    /// Number of same-sector order swaps between neighbouring tracks.
    pub fn same_sector_swaps(&self, sector: Sector) -> usize {
        let t = self.tracks(sector);
        let len = t.iter().map(Vec::len).min().unwrap_or(0);
        let mut swaps = 0;
        for pair in t.windows(2) {
            for j in 1..len {
                if (pair[0][j] - pair[1][j]).signum() != (pair[0][j - 1] - pair[1][j - 1]).signum() {
                    swaps += 1;
                }
            }
        }
        swaps
    }

    /// Smallest gap between adjacent levels anywhere in the sweep.
    pub fn min_gap(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|row| row.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }
}
