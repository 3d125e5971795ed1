//! `arabi` — spectra, G-function scans, entropies, crossings, oracle runs
//! and λ fits for the anisotropic Rabi model.

mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use output::{emit, fmt17, Cell, Format, Header, Table};
use rabi_core::fit::{
    fit_lambda, fit_lambda_g, sigma_z_toggle, synthesize, Design, FitOptions, FluxQubitParams, SpectroscopyDataset,
    TransitionMethod,
};
use rabi_core::gfunction::{GConfig, GFunction, Sector};
use rabi_core::oracle;
use rabi_core::spectrum::{first_crossing, solve_spectrum, SolverConfig, SweepParam};
use rabi_core::states::{self, ground_state, LogBase, StateMethod};
use rabi_core::{Error, ModelParams};

#[derive(Parser, Debug)]
#[command(name = "arabi", version, about = "Exact spectra of the anisotropic Rabi model", propagate_version = true)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate G(x) on an x grid, with pole positions in the header.
    Gscan(GscanArgs),
    /// Levels from the G-function roots, optionally against the oracle.
    Spectrum(SpectrumArgs),
    /// Ground-state energy, parity and spin entropy.
    Entropy(EntropyArgs),
    /// Closed-form first ground-state crossing (g_c, E).
    Crossing(CrossingArgs),
    /// Fit λ to flux-qubit spectroscopy data.
    Fit(FitArgs),
    /// Truncated-Fock diagonalisation.
    Oracle(OracleArgs),
    /// Write a synthetic spectroscopy dataset.
    Synth(SynthArgs),
}

/// Model parameters in units of ω (ω = 1 by default).
#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    g: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    lambda: f64,
    /// Phase θ; accepts forms like `-pi/2` or `0.25pi`.
    #[arg(long, default_value = "0", value_parser = parse_number, allow_hyphen_values = true)]
    theta: f64,
}

impl ModelArgs {
    fn params(&self) -> anyhow::Result<ModelParams> {
        ModelParams::new(self.omega, self.delta, self.epsilon, self.g, self.lambda, self.theta)
            .map_err(|e| usage(anyhow!(e)))
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Oracle cutoff; if omitted the oracle doubles N_max until converged.
    #[arg(long)]
    nmax: Option<usize>,
    /// Scan points per unit ω.
    #[arg(long, default_value_t = 400.0)]
    grid_density: f64,
    /// Root tolerance in units of ω.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.grid_density > 0.0 && self.tol > 0.0) {
            return Err(usage(anyhow!("--grid-density and --tol must be positive")));
        }
        Ok(SolverConfig { grid_density: self.grid_density, tol: self.tol, ..SolverConfig::default() })
    }

    fn header(&self) -> Vec<(&'static str, String)> {
        vec![
            ("nmax", self.nmax.map_or("auto".into(), |n| n.to_string())),
            ("grid_density", fmt17(self.grid_density)),
            ("tol", fmt17(self.tol)),
        ]
    }
}

/// `name:start:stop:steps`, inclusive endpoints, steps ≥ 2.
#[derive(Clone, Debug, PartialEq)]
struct SweepSpec {
    name: String,
    start: f64,
    stop: f64,
    steps: usize,
}

impl FromStr for SweepSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, a, b, n] = parts[..] else {
            return Err(format!("expected name:start:stop:steps, got `{s}`"));
        };
        let steps: usize = n.parse().map_err(|_| format!("steps `{n}` is not a count"))?;
        if steps < 2 {
            return Err(format!("sweep needs at least 2 steps, got {steps}"));
        }
        Ok(SweepSpec { name: name.to_string(), start: parse_number(a)?, stop: parse_number(b)?, steps })
    }
}

impl SweepSpec {
    fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n).map(|i| if i == n { self.stop } else { self.start + (self.stop - self.start) * i as f64 / n as f64 }).collect()
    }

    fn header(&self) -> Vec<(&'static str, String)> {
        vec![
            ("name", self.name.clone()),
            ("start", fmt17(self.start)),
            ("stop", fmt17(self.stop)),
            ("steps", self.steps.to_string()),
        ]
    }
}

/// A float, optionally written with `pi` (`-pi/2`, `0.5pi`, `pi`).
fn parse_number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t),
    };
    let bad = || format!("`{s}` is not a number");
    let v = if let Some((num, den)) = body.split_once('/') {
        let den: f64 = den.parse().map_err(|_| bad())?;
        multiple_of_pi(num).ok_or_else(bad)? / den
    } else {
        multiple_of_pi(body).ok_or_else(bad)?
    };
    Ok(if neg { -v } else { v })
}

fn multiple_of_pi(s: &str) -> Option<f64> {
    let c = s.strip_suffix("pi")?.trim_end_matches('*');
    Some(if c.is_empty() { PI } else { c.parse::<f64>().ok()? * PI })
}

#[derive(Args, Debug)]
struct GscanArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// x grid as `x:start:stop:steps`; overrides --x-min/--x-max/--points.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 1201)]
    points: usize,
    /// Which function to tabulate; `auto` picks G_ε for ε ≠ 0 and both
    /// parity sectors otherwise.
    #[arg(long, value_enum, default_value_t = SectorArg::Auto)]
    sector: SectorArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SectorArg {
    Auto,
    Eps,
    Plus,
    Minus,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Parameter sweep, e.g. `g:0.1:1:10`.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Number of levels (counting multiplicity) per point.
    #[arg(long, default_value_t = 8)]
    levels: usize,
    /// `oracle` adds oracle energies and |ΔE| next to the G-function levels.
    #[arg(long, value_enum, default_value_t = MethodArg::Series)]
    method: MethodArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Series,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaseArg {
    Nat,
    Two,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
    method: MethodArg,
    /// Fock cutoff of the state.
    #[arg(long, default_value_t = states::DEFAULT_NMAX)]
    nmax: usize,
    #[arg(long, value_enum, default_value_t = BaseArg::Nat)]
    base: BaseArg,
}

#[derive(Args, Debug)]
struct CrossingArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    lambda: f64,
    /// Also report the oracle gap between the two lowest levels at g_c.
    #[arg(long)]
    verify: bool,
    /// Optional table file in addition to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// Flux-qubit device values in GHz (and nA); defaults are the reference device.
#[derive(Args, Debug, Clone)]
struct DeviceArgs {
    #[arg(long, default_value_t = 4.21)]
    delta_q: f64,
    #[arg(long, default_value_t = 500.0)]
    ip_na: f64,
    #[arg(long, default_value_t = 8.13)]
    omega_r: f64,
    #[arg(long, default_value_t = 0.74)]
    g_ghz: f64,
}

impl DeviceArgs {
    fn params(&self, lambda: f64) -> FluxQubitParams {
        FluxQubitParams { delta_q: self.delta_q, ip_na: self.ip_na, omega_r: self.omega_r, g: self.g_ghz, lambda }
    }

    fn header(&self) -> Vec<(&'static str, String)> {
        vec![
            ("delta_q", fmt17(self.delta_q)),
            ("ip_na", fmt17(self.ip_na)),
            ("omega_r", fmt17(self.omega_r)),
            ("g_ghz", fmt17(self.g_ghz)),
        ]
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV (bias_mPhi0,k,freq_GHz[,sigma_GHz]).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    device: DeviceArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    #[arg(long, default_value_t = 1e-4)]
    fit_tol: f64,
    /// Include the constant σz-coupling shift in the model levels.
    #[arg(long)]
    sigma_z_shift: bool,
    /// Fit g together with λ.
    #[arg(long)]
    joint: bool,
    /// Transition model: oracle at fixed --nmax, or G-function roots.
    #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
    method: MethodArg,
    #[arg(long, default_value_t = 20)]
    nmax: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[arg(long, default_value_t = 8)]
    levels: usize,
    /// Fixed cutoff; if omitted N_max is doubled until converged.
    #[arg(long)]
    nmax: Option<usize>,
    /// Convergence tolerance for the doubling.
    #[arg(long, default_value_t = 1e-12)]
    converge_tol: f64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    device: DeviceArgs,
    /// True anisotropy of the synthetic device.
    #[arg(long, default_value_t = 0.5)]
    lambda_true: f64,
    /// Gaussian noise σ in MHz.
    #[arg(long, default_value_t = 10.0)]
    noise_mhz: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status classes.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(Usage(e))
}

/// Input problems are usage errors; everything else is a solver failure.
fn classify(e: Error) -> anyhow::Error {
    match e {
        Error::InvalidParams(_)
        | Error::JaynesCummingsLimit
        | Error::SymmetryBroken(_)
        | Error::Domain(_)
        | Error::Parse { .. }
        | Error::NoDataRows
        | Error::Io(_)
        | Error::UnitMismatch { .. } => usage(anyhow!(e)),
        other => anyhow!(other),
    }
}

trait CoreResult<T> {
    fn core(self) -> anyhow::Result<T>;
}

impl<T> CoreResult<T> for rabi_core::Result<T> {
    fn core(self) -> anyhow::Result<T> {
        self.map_err(classify)
    }
}

fn params_header(p: &ModelParams) -> Vec<(&'static str, String)> {
    vec![
        ("omega", fmt17(p.omega)),
        ("delta", fmt17(p.delta)),
        ("epsilon", fmt17(p.epsilon)),
        ("g", fmt17(p.g)),
        ("lambda", fmt17(p.lambda)),
        ("theta", fmt17(p.theta)),
    ]
}

/// Sweep points as (value, params); a single point when no sweep is given.
fn points(base: &ModelParams, sweep: Option<&SweepSpec>) -> anyhow::Result<(String, Vec<(f64, ModelParams)>)> {
    match sweep {
        None => Ok(("g".into(), vec![(base.g, *base)])),
        Some(s) => {
            let param = SweepParam::from_str(&s.name).map_err(|e| usage(anyhow!(e)))?;
            let pts = s.values().into_iter().map(|v| Ok((v, param.apply(base, v).core()?))).collect::<anyhow::Result<_>>()?;
            Ok((param.name().to_string(), pts))
        }
    }
}

fn with_sweep(h: &mut Header, sweep: Option<&SweepSpec>) {
    if let Some(s) = sweep {
        h.push("sweep", s.header());
    }
}

fn write_out(table: &Table, out: &OutputArgs) -> anyhow::Result<()> {
    emit(table, out.out.as_deref(), out.format).with_context(|| "writing output")
}

fn cmd_gscan(a: &GscanArgs) -> anyhow::Result<()> {
    let p = a.model.params()?;
    let xs = match &a.sweep {
        Some(s) if s.name != "x" => return Err(usage(anyhow!("gscan sweeps x, not `{}`", s.name))),
        Some(s) => s.values(),
        None => {
            let s = SweepSpec { name: "x".into(), start: a.x_min, stop: a.x_max, steps: a.points };
            if a.points < 2 {
                return Err(usage(anyhow!("--points must be at least 2")));
            }
            s.values()
        }
    };
    let (lo, hi) = (xs[0], *xs.last().unwrap());
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(usage(anyhow!("invalid x range [{lo}, {hi}]")));
    }
    let sectors = match a.sector {
        SectorArg::Auto if p.epsilon != 0.0 => vec![Sector::Epsilon],
        SectorArg::Auto => vec![Sector::Plus, Sector::Minus],
        SectorArg::Eps => vec![Sector::Epsilon],
        SectorArg::Plus => vec![Sector::Plus],
        SectorArg::Minus => vec![Sector::Minus],
    };
    let gf = GFunction::new(&p, hi, GConfig::default()).core()?;
    let mut h = Header::new("gscan");
    h.push("params", params_header(&p));
    h.push("sweep", SweepSpec { name: "x".into(), start: lo, stop: hi, steps: xs.len() }.header());
    for &s in &sectors {
        gf.check_sector(s).core()?;
        let ps: Vec<String> =
            gf.poles.real_abscissas(s).into_iter().filter(|x| *x >= lo && *x <= hi).map(fmt17).collect();
        h.push("poles", vec![("sector", s.to_string()), ("x", ps.join(";"))]);
    }
    let mut t = Table::new(h, &["x", "re_G", "im_G", "sector", "near_pole"]);
    for &s in &sectors {
        for &x in &xs {
            let v = gf.eval(x, s).core()?;
            let (re, im) = v.value.map_or((f64::NAN, f64::NAN), |c| (c.re, c.im));
            t.push(vec![x.into(), re.into(), im.into(), s.to_string().into(), v.near_pole.into()]);
        }
    }
    write_out(&t, &a.output)
}

fn oracle_levels(p: &ModelParams, k: usize, nmax: Option<usize>, tol: f64) -> anyhow::Result<(Vec<f64>, usize)> {
    match nmax {
        Some(n) => Ok((oracle::energies(p, n, k).core()?, n)),
        None => {
            let c = oracle::converged_spectrum(p, k, tol).core()?;
            Ok((c.energies, c.n_max))
        }
    }
}

fn cmd_spectrum(a: &SpectrumArgs) -> anyhow::Result<()> {
    if a.levels == 0 {
        return Err(usage(anyhow!("--levels must be positive")));
    }
    let base = a.model.params()?;
    let cfg = a.solver.config()?;
    let (name, pts) = points(&base, a.sweep.as_ref())?;
    let compare = a.method == MethodArg::Oracle;
    let mut cols = vec![name.as_str(), "level", "energy", "x", "sector", "kind", "degeneracy", "near_pole"];
    if compare {
        cols.extend(["oracle_energy", "abs_diff"]);
    }
    let mut rows = Vec::new();
    let (mut worst, mut flagged): (f64, usize) = (0.0, 0);
    for (v, p) in &pts {
        let s = solve_spectrum(p, a.levels, &cfg).core()?;
        let roots = s.lowest(a.levels);
        let oracle = if compare { Some(oracle_levels(p, a.levels + 2, a.solver.nmax, 1e-12)?.0) } else { None };
        let mut level = 0;
        for r in &roots {
            let mut row: Vec<Cell> = vec![
                (*v).into(),
                level.into(),
                r.energy.into(),
                r.x.into(),
                r.sector.to_string().into(),
                r.kind.to_string().into(),
                (r.degeneracy as usize).into(),
                r.near_pole.into(),
            ];
            if let Some(o) = &oracle {
                let d = (level..level + r.degeneracy as usize)
                    .map(|i| o.get(i).map_or(f64::NAN, |e| (e - r.energy).abs()))
                    .fold(0.0, f64::max);
                worst = worst.max(d);
                row.extend([o.get(level).copied().into(), d.into()]);
            }
            rows.push(row);
            level += r.degeneracy as usize;
        }
        for &(xa, xb) in &s.flagged {
            flagged += 1;
            let mut row: Vec<Cell> = vec![
                (*v).into(),
                Cell::Empty,
                f64::NAN.into(),
                (0.5 * (xa + xb)).into(),
                Cell::Empty,
                "flagged".into(),
                0usize.into(),
                true.into(),
            ];
            if compare {
                row.extend([Cell::Empty, Cell::Empty]);
            }
            rows.push(row);
        }
    }
    let mut h = Header::new("spectrum");
    h.push("params", params_header(&base));
    h.push("solver", a.solver.header());
    with_sweep(&mut h, a.sweep.as_ref());
    let mut summary = vec![("points", pts.len().to_string()), ("flagged", flagged.to_string())];
    if compare {
        summary.push(("max_abs_diff", fmt17(worst)));
    }
    h.push("summary", summary);
    let mut t = Table::new(h, &cols);
    t.rows = rows;
    if flagged > 0 {
        log::warn!("{flagged} brackets could not be resolved; see rows with kind=flagged");
    }
    write_out(&t, &a.output)
}

fn cmd_entropy(a: &EntropyArgs) -> anyhow::Result<()> {
    let base = a.model.params()?;
    let (name, pts) = points(&base, a.sweep.as_ref())?;
    let method = match a.method {
        MethodArg::Series => StateMethod::Series,
        MethodArg::Oracle => StateMethod::Oracle,
    };
    let log_base = match a.base {
        BaseArg::Nat => LogBase::Nat,
        BaseArg::Two => LogBase::Two,
    };
    let mut h = Header::new("entropy");
    h.push("params", params_header(&base));
    h.push(
        "state",
        vec![
            ("method", format!("{:?}", a.method).to_lowercase()),
            ("nmax", a.nmax.to_string()),
            ("base", format!("{:?}", a.base).to_lowercase()),
        ],
    );
    with_sweep(&mut h, a.sweep.as_ref());
    let mut t = Table::new(
        h,
        &[&name, "energy", "parity", "entropy", "degenerate", "entropy_plus", "entropy_minus"],
    );
    for (v, p) in &pts {
        let gs = ground_state(p, method, a.nmax, log_base).core()?;
        t.push(vec![
            (*v).into(),
            gs.energy.into(),
            gs.parity.into(),
            gs.entropy.into(),
            gs.degenerate.into(),
            gs.entropy_plus.into(),
            gs.entropy_minus.into(),
        ]);
    }
    write_out(&t, &a.output)
}

fn cmd_crossing(a: &CrossingArgs) -> anyhow::Result<()> {
    let (gc, e) = first_crossing(a.delta, a.lambda, a.omega).core()?;
    let mut line = format!("g_c={} E={}", fmt17(gc), fmt17(e));
    let mut gap = None;
    if a.verify {
        let p = ModelParams::new(a.omega, a.delta, 0.0, gc, a.lambda, 0.0).core()?;
        let c = oracle::converged_spectrum(&p, 2, 1e-12).core()?;
        let d = c.energies[1] - c.energies[0];
        line.push_str(&format!(" oracle_gap={} oracle_nmax={}", fmt17(d), c.n_max));
        gap = Some(d);
    }
    println!("{line}");
    if let Some(path) = &a.out {
        let mut h = Header::new("crossing");
        h.push(
            "params",
            vec![("omega", fmt17(a.omega)), ("delta", fmt17(a.delta)), ("lambda", fmt17(a.lambda))],
        );
        let mut t = Table::new(h, &["g_c", "energy", "oracle_gap"]);
        t.push(vec![gc.into(), e.into(), gap.into()]);
        emit(&t, Some(path), a.format).context("writing output")?;
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> anyhow::Result<()> {
    if !(a.grid_step > 0.0 && a.grid_step <= 0.5 && a.fit_tol > 0.0) {
        return Err(usage(anyhow!("--grid-step must be in (0, 0.5] and --fit-tol positive")));
    }
    let data = SpectroscopyDataset::load(&a.data).core().with_context(|| format!("reading {}", a.data.display()))?;
    let fqp = a.device.params(0.5);
    let method = match a.method {
        MethodArg::Oracle => TransitionMethod::Oracle { n_max: a.nmax },
        MethodArg::Series => TransitionMethod::Series,
    };
    let opts = FitOptions { grid_step: a.grid_step, tol: a.fit_tol, sigma_z_shift: a.sigma_z_shift, method };
    let r = fit_lambda(&data, &fqp, opts).core()?;
    let sz = sigma_z_toggle(&data, &fqp, opts).core()?;
    let joint = if a.joint { Some(fit_lambda_g(&data, &fqp, opts).core()?) } else { None };

    let mut line = format!(
        "lambda_hat={} rss={} rows={} rss_0={} rss_0.5={} rss_1={} sigma_z_change={}",
        fmt17(r.lambda_hat),
        fmt17(r.rss),
        data.rows.len(),
        fmt17(r.rss_at(0.0)),
        fmt17(r.rss_at(0.5)),
        fmt17(r.rss_at(1.0)),
        fmt17(sz.change)
    );
    if let Some(j) = &joint {
        line.push_str(&format!(" joint_lambda={} joint_g={} joint_rss={}", fmt17(j.lambda_hat), fmt17(j.g_hat), fmt17(j.rss)));
    }
    if r.flat_objective {
        line.push_str(" flat_objective=true");
    }
    println!("{line}");

    if a.output.out.is_some() {
        let mut h = Header::new("fit");
        h.push("device", a.device.header());
        h.push(
            "fit",
            vec![
                ("data", a.data.display().to_string()),
                ("grid_step", fmt17(a.grid_step)),
                ("tol", fmt17(a.fit_tol)),
                ("sigma_z_shift", a.sigma_z_shift.to_string()),
                ("method", format!("{:?}", a.method).to_lowercase()),
                ("nmax", a.nmax.to_string()),
            ],
        );
        h.push(
            "result",
            vec![
                ("lambda_hat", fmt17(r.lambda_hat)),
                ("rss", fmt17(r.rss)),
                ("sigma_z_change", fmt17(sz.change)),
                ("flat_objective", r.flat_objective.to_string()),
            ],
        );
        let mut t = Table::new(h, &["bias_mPhi0", "k", "freq_GHz", "model_GHz", "residual_GHz"]);
        for (row, res) in data.rows.iter().zip(&r.residuals) {
            t.push(vec![row.bias_mphi0.into(), row.k.into(), row.freq_ghz.into(), (row.freq_ghz - res).into(), (*res).into()]);
        }
        t.extra.insert("rss_grid".into(), json!(r.grid));
        t.extra.insert("sigma_z".into(), json!(sz));
        if let Some(j) = joint {
            t.extra.insert("joint".into(), json!(j));
        }
        write_out(&t, &a.output)?;
    }
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> anyhow::Result<()> {
    if a.levels == 0 {
        return Err(usage(anyhow!("--levels must be positive")));
    }
    if a.nmax.is_some_and(|n| 2 * (n + 1) < a.levels) {
        return Err(usage(anyhow!("--nmax too small for {} levels", a.levels)));
    }
    let base = a.model.params()?;
    let (name, pts) = points(&base, a.sweep.as_ref())?;
    let mut rows = Vec::new();
    let (mut herm, mut comm): (f64, f64) = (0.0, 0.0);
    for (v, p) in &pts {
        let (e, n) = oracle_levels(p, a.levels, a.nmax, a.converge_tol)?;
        let hm = oracle::build_hamiltonian(p, n).core()?;
        herm = herm.max(hm.hermiticity_error());
        if p.epsilon == 0.0 {
            comm = comm.max(hm.parity_commutator_norm());
        }
        for (i, ei) in e.iter().enumerate() {
            rows.push(vec![(*v).into(), i.into(), (*ei).into(), n.into()]);
        }
    }
    let mut h = Header::new("oracle");
    h.push("params", params_header(&base));
    h.push(
        "oracle",
        vec![
            ("nmax", a.nmax.map_or("auto".into(), |n| n.to_string())),
            ("converge_tol", fmt17(a.converge_tol)),
        ],
    );
    with_sweep(&mut h, a.sweep.as_ref());
    h.push("summary", vec![("hermiticity", fmt17(herm)), ("parity_commutator", fmt17(comm))]);
    let mut t = Table::new(h, &[&name, "level", "energy", "n_max"]);
    t.rows = rows;
    write_out(&t, &a.output)
}

fn cmd_synth(a: &SynthArgs) -> anyhow::Result<()> {
    if !(a.noise_mhz >= 0.0) {
        bail!(usage(anyhow!("--noise-mhz must be non-negative")));
    }
    let fqp = a.device.params(a.lambda_true);
    let data = synthesize(&fqp, &Design::standard(), a.noise_mhz * 1e-3, a.seed, TransitionMethod::default()).core()?;
    let dev: Vec<String> = a.device.header().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
    let comments = vec![
        format!("arabi version={} command=synth", env!("CARGO_PKG_VERSION")),
        format!("device {} lambda={}", dev.join(" "), fmt17(a.lambda_true)),
        format!("synth noise_mhz={} seed={} design=standard", fmt17(a.noise_mhz), a.seed),
    ];
    match &a.out {
        Some(p) => data.save(p, &comments).core()?,
        None => data.write(std::io::stdout().lock(), &comments).core()?,
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gscan(a) => cmd_gscan(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::Crossing(a) => cmd_crossing(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let is_usage = e.chain().any(|c| c.downcast_ref::<Usage>().is_some());
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage { 1 } else { 2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_parsing() {
        let s: SweepSpec = "g:0:2:5".parse().unwrap();
        assert_eq!(s.values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let t: SweepSpec = "theta:-pi:pi/2:3".parse().unwrap();
        assert_eq!(t.start, -PI);
        assert_eq!(t.stop, PI / 2.0);
        assert!("g:0:1:1".parse::<SweepSpec>().is_err());
        assert!("g:0:1".parse::<SweepSpec>().is_err());
        assert!("g:a:1:3".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn pi_forms() {
        assert_eq!(parse_number("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_number("0.25pi").unwrap(), 0.25 * PI);
        assert_eq!(parse_number("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert!(parse_number("pie").is_err());
    }

    #[test]
    fn errors_are_classified() {
        let u = classify(Error::Domain("x".into()));
        assert!(u.downcast_ref::<Usage>().is_some());
        let s = classify(Error::NotConverged { x: 0.0, n_used: 1 });
        assert!(s.downcast_ref::<Usage>().is_none());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
