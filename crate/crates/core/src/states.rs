//! Eigenstates in a truncated Fock basis, parity, reduced spin density and
//! entanglement entropy.
//!
//! Series eigenstates are expanded in the displaced basis
//! |n⟩⟩ = (a† + s ξ*)ⁿ |−s ξ⟩, s = √λ g/ω, where |−sξ⟩ is a normalised
//! coherent state. Each |n⟩⟩ is built from its predecessor by one application
//! of a† + sξ*, which is exact for Fock components ≤ N_max.

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive_constants, frame_maps, ModelParams};
use crate::oracle::{self, basis_index, Spin};
use crate::series::{coefficients_fixed, Branch};
use crate::spectrum::{self, first_crossing, EnergyRoot, RootKind, SolverConfig};

pub const DEFAULT_NMAX: usize = 120;
/// Largest tail mass beyond N_max − 10 accepted for a converged state.
pub const TAIL_LIMIT: f64 = 1e-10;
const TAIL_SKIP: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub up: Vec<C64>,
    pub down: Vec<C64>,
    pub n_max: usize,
    /// L2 norm before normalisation.
    pub norm: f64,
}

impl FockState {
    /// Normalises (up, down) and records the original norm.
    pub fn new(up: Vec<C64>, down: Vec<C64>) -> Result<Self> {
        if up.len() != down.len() || up.is_empty() {
            return Err(Error::Domain("spin components must have equal, nonzero length".into()));
        }
        let norm = up.iter().chain(&down).map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain(format!("state norm {norm} cannot be normalised")));
        }
        let s = C64::from(1.0 / norm);
        let n_max = up.len() - 1;
        Ok(FockState { up: up.iter().map(|v| v * s).collect(), down: down.iter().map(|v| v * s).collect(), n_max, norm })
    }

    /// From an interleaved oracle vector (2n ↓, 2n+1 ↑).
    pub fn from_interleaved(v: &DVector<C64>) -> Result<Self> {
        let n = v.len() / 2;
        let up = (0..n).map(|i| v[basis_index(i, Spin::Up)]).collect();
        let down = (0..n).map(|i| v[basis_index(i, Spin::Down)]).collect();
        Self::new(up, down)
    }

    pub fn to_interleaved(&self) -> DVector<C64> {
        let mut v = DVector::zeros(2 * (self.n_max + 1));
        for n in 0..=self.n_max {
            v[basis_index(n, Spin::Up)] = self.up[n];
            v[basis_index(n, Spin::Down)] = self.down[n];
        }
        v
    }

    /// Σ_{n ≥ from} |up_n|² + |down_n|².
    pub fn tail_mass(&self, from: usize) -> f64 {
        (from..=self.n_max).map(|n| self.up[n].norm_sqr() + self.down[n].norm_sqr()).sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockState) -> C64 {
        let n = self.n_max.min(other.n_max);
        (0..=n).map(|i| self.up[i].conj() * other.up[i] + self.down[i].conj() * other.down[i]).sum()
    }

    /// Parity operator exp(iπN̂) applied to the state.
    pub fn parity_applied(&self) -> FockState {
        let sign = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
        FockState {
            up: self.up.iter().enumerate().map(|(n, v)| v * -sign(n)).collect(),
            down: self.down.iter().enumerate().map(|(n, v)| v * sign(n)).collect(),
            n_max: self.n_max,
            norm: self.norm,
        }
    }
}

/// Coherent state e^{−|α|²/2} Σ αᵐ/√m! |m⟩ truncated at `n_max`.
fn coherent(alpha: C64, n_max: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(n_max + 1);
    let mut a = C64::from((-alpha.norm_sqr() / 2.0).exp());
    for m in 0..=n_max {
        v.push(a);
        a *= alpha / ((m + 1) as f64).sqrt();
    }
    v
}

/// u ← (a† + shift) u / scale, in place-free form.
fn raise(u: &[C64], shift: C64, scale: C64) -> Vec<C64> {
    let mut out: Vec<C64> = u.iter().map(|v| v * shift).collect();
    for m in 1..u.len() {
        out[m] += u[m - 1] * (m as f64).sqrt();
    }
    out.iter_mut().for_each(|v| *v /= scale);
    out
}

/// Fock amplitudes of (a† + shift)ⁿ |displacement⟩ up to `n_max`.
pub fn displaced_to_fock(displacement: C64, shift: C64, n: usize, n_max: usize) -> Result<Vec<C64>> {
    let mut u = coherent(displacement, n_max);
    for _ in 0..n {
        u = raise(&u, shift, C64::from(1.0));
    }
    let total: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    let tail: f64 = u.iter().skip(n_max.saturating_sub(TAIL_SKIP) + 1).map(|v| v.norm_sqr()).sum();
    if total > 0.0 && tail / total > TAIL_LIMIT {
        return Err(Error::Truncation { tail: tail / total, limit: TAIL_LIMIT });
    }
    Ok(u)
}

fn check_tail(s: &FockState) -> Result<()> {
    let tail = s.tail_mass(s.n_max.saturating_sub(TAIL_SKIP) + 1);
    if tail > TAIL_LIMIT {
        return Err(Error::Truncation { tail, limit: TAIL_LIMIT });
    }
    Ok(())
}

/// Lab-frame eigenstate for a regular root, from the forward series.
///
/// The series is cut where max(|Kₙ|, |Lₙ|)‖|n⟩⟩‖ is smallest: beyond that
/// the forward recurrence is dominated by the growing solution.
pub fn eigenstate_series(params: &ModelParams, root: &EnergyRoot, n_max: usize) -> Result<FockState> {
    if root.kind != RootKind::Regular {
        return Err(Error::Domain("exceptional roots are built by juddian_states".into()));
    }
    let k = derive_constants(params)?;
    let cfg = crate::series::SeriesConfig::default();
    let n_terms = (n_max / 2).clamp(20, 150);
    let t = coefficients_fixed(&k, params, root.x, Branch::Forward, n_terms, &cfg)?;
    let s = params.lambda.sqrt() * params.g / params.omega;
    let xi = params.xi();
    // u_n = |n⟩⟩ / y₀ⁿ, paired with the stored Kₙ y₀ⁿ.
    let u0 = coherent(-xi * s, n_max);
    let shift = xi.conj() * s;
    let mut u = u0.clone();
    let mut n_star = 0;
    let mut best = f64::INFINITY;
    for n in 0..t.n_used {
        let un = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let weight = t.k_scaled[n].norm().max(t.l_scaled[n].norm()) * un;
        if !weight.is_finite() || weight > 1e8 * best {
            break;
        }
        if weight < best {
            best = weight;
            n_star = n;
        }
        u = raise(&u, shift, t.y0);
    }
    let mut c1 = vec![C64::from(0.0); n_max + 1];
    let mut c2 = vec![C64::from(0.0); n_max + 1];
    let mut u = u0;
    for n in 0..=n_star {
        for m in 0..=n_max {
            c1[m] += t.l_scaled[n] * u[m];
            c2[m] += t.k_scaled[n] * u[m];
        }
        u = raise(&u, shift, t.y0);
    }
    assemble(params, c1, c2)
}

fn assemble(params: &ModelParams, c1: Vec<C64>, c2: Vec<C64>) -> Result<FockState> {
    let u = frame_maps(params).u;
    let up: Vec<C64> = c1.iter().zip(&c2).map(|(a, b)| u[(0, 0)] * a + u[(0, 1)] * b).collect();
    let down: Vec<C64> = c1.iter().zip(&c2).map(|(a, b)| u[(1, 0)] * a + u[(1, 1)] * b).collect();
    let st = FockState::new(up, down)?;
    check_tail(&st)?;
    Ok(st)
}

/// ⟨exp(iπN̂)⟩ with N̂ = a†a + (σz+1)/2.
pub fn parity_of(state: &FockState) -> f64 {
    state.inner(&state.parity_applied()).re
}

/// (Ψ₊, Ψ₋) = normalised (1 ± P)Ψ/2; `None` where the projection vanishes.
pub fn parity_projections(state: &FockState) -> (Option<FockState>, Option<FockState>) {
    let p = state.parity_applied();
    let make = |sign: f64| {
        let up = state.up.iter().zip(&p.up).map(|(a, b)| (a + b * sign) * 0.5).collect();
        let down = state.down.iter().zip(&p.down).map(|(a, b)| (a + b * sign) * 0.5).collect();
        FockState::new(up, down).ok().filter(|s| s.norm > 1e-8)
    };
    (make(1.0), make(-1.0))
}

/// The degenerate pair at the first crossing (ε = 0, λ < 1): Ψ₁ = U(L₀, 1)ᵀ
/// ⊗ |−sξ⟩ with L₀ = 2√λξ*/(1−λ), and its parity image Ψ₂ = PΨ₁.
pub fn juddian_states(params: &ModelParams, n_max: usize) -> Result<(FockState, FockState)> {
    if params.epsilon != 0.0 {
        return Err(Error::SymmetryBroken(params.epsilon));
    }
    let (gc, _) = first_crossing(params.delta, params.lambda, params.omega)?;
    if (params.g - gc).abs() > 1e-9 * gc {
        return Err(Error::Domain(format!("g = {} is off the crossing g_c = {gc}", params.g)));
    }
    let l = params.lambda;
    let xi = params.xi();
    let s = l.sqrt() * params.g / params.omega;
    let l0 = xi.conj() * (2.0 * l.sqrt() / (1.0 - l));
    let coh = coherent(-xi * s, n_max);
    let c1: Vec<C64> = coh.iter().map(|v| v * l0).collect();
    let a = assemble(params, c1, coh)?;
    let b = a.parity_applied();
    Ok((a, b))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinDensity {
    /// (↑, ↓) ordering.
    pub rho: Matrix2<C64>,
    /// Ascending eigenvalues (1−p, p).
    pub eigenvalues: (f64, f64),
}

pub fn reduced_spin_density(state: &FockState) -> SpinDensity {
    let uu: f64 = state.up.iter().map(|v| v.norm_sqr()).sum();
    let dd: f64 = state.down.iter().map(|v| v.norm_sqr()).sum();
    let ud: C64 = state.up.iter().zip(&state.down).map(|(u, d)| u * d.conj()).sum();
    let rho = Matrix2::new(C64::from(uu), ud, ud.conj(), C64::from(dd));
    SpinDensity { rho, eigenvalues: eig2(uu, dd, ud) }
}

fn eig2(a: f64, d: f64, b: C64) -> (f64, f64) {
    let tr = a + d;
    let r = ((a - d).powi(2) + 4.0 * b.norm_sqr()).sqrt();
    (((tr - r) / 2.0).clamp(0.0, 1.0), ((tr + r) / 2.0).clamp(0.0, 1.0))
}

impl SpinDensity {
    /// An arbitrary (possibly rotated) 2×2 density matrix.
    pub fn from_matrix(rho: Matrix2<C64>) -> Self {
        SpinDensity { rho, eigenvalues: eig2(rho[(0, 0)].re, rho[(1, 1)].re, rho[(0, 1)]) }
    }

    pub fn trace(&self) -> f64 {
        (self.rho[(0, 0)] + self.rho[(1, 1)]).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nat,
    Two,
}

/// Von Neumann entropy −Σ p ln p (0 ln 0 = 0).
pub fn entropy(rho: &SpinDensity, base: LogBase) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    let s = h(rho.eigenvalues.0) + h(rho.eigenvalues.1);
    match base {
        LogBase::Nat => s,
        LogBase::Two => s / std::f64::consts::LN_2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMethod {
    Series,
    Oracle,
}

/// Ground-state observables at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroundStatePoint {
    pub energy: f64,
    pub parity: f64,
    pub entropy: f64,
    /// Ground level is (numerically) doubly degenerate.
    pub degenerate: bool,
    /// At degeneracy: entropies of the parity-definite combinations Ψ₊, Ψ₋.
    pub entropy_plus: Option<f64>,
    pub entropy_minus: Option<f64>,
}

/// Oracle doublets closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

pub fn ground_state(params: &ModelParams, method: StateMethod, n_max: usize, base: LogBase) -> Result<GroundStatePoint> {
    let (energy, state, degenerate) = match method {
        StateMethod::Series => {
            let s = spectrum::solve_spectrum(params, 2, &SolverConfig::default())?;
            let r = s.roots[0];
            if r.kind == RootKind::Exceptional {
                let (a, _) = juddian_states(params, n_max)?;
                (r.energy, a, true)
            } else if r.degeneracy == 2 {
                return Err(Error::Domain("regular doublet ground state: use the oracle method".into()));
            } else {
                (r.energy, eigenstate_series(params, &r, n_max)?, false)
            }
        }
        StateMethod::Oracle => {
            let h = oracle::build_hamiltonian(params, n_max)?;
            let ep = oracle::eigensolve(&h, 2)?;
            let st = FockState::from_interleaved(&ep.vector(0))?;
            check_tail(&st)?;
            (ep.energies[0], st, ep.energies[1] - ep.energies[0] < DEGENERACY_TOL)
        }
    };
    let entropy_v = entropy(&reduced_spin_density(&state), base);
    let (mut ep, mut em) = (None, None);
    if degenerate {
        let (p, m) = parity_projections(&state);
        ep = p.map(|s| entropy(&reduced_spin_density(&s), base));
        em = m.map(|s| entropy(&reduced_spin_density(&s), base));
    }
    Ok(GroundStatePoint {
        energy,
        parity: parity_of(&state),
        entropy: entropy_v,
        degenerate,
        entropy_plus: ep,
        entropy_minus: em,
    })
}
