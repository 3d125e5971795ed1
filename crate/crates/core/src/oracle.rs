//! Truncated-Fock exact diagonalisation, used as ground truth.
//!
//! Basis ordering is interleaved by boson number: index `2n` is |n,↓⟩ and
//! index `2n+1` is |n,↑⟩, so `dim = 2(N_max+1)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const MIN_NMAX: usize = 10;
pub const START_NMAX: usize = 40;
pub const CAP_NMAX: usize = 1280;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Down,
    Up,
}

/// Position of |n, s⟩ in the interleaved basis.
#[inline]
pub fn basis_index(n: usize, s: Spin) -> usize {
    match s {
        Spin::Down => 2 * n,
        Spin::Up => 2 * n + 1,
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedHamiltonian {
    pub n_max: usize,
    pub matrix: DMatrix<C64>,
    pub params: ModelParams,
}

impl TruncatedHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |H − H†| over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut err: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..=i {
                err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        err
    }

    /// All imaginary parts exactly zero.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|v| v.im == 0.0)
    }

    /// Frobenius norm of [H, P] with P the parity exp(iπN̂).
    pub fn parity_commutator_norm(&self) -> f64 {
        let p = parity_diagonal(self.n_max);
        let m = &self.matrix;
        let mut acc = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                acc += (m[(i, j)] * (p[j] - p[i])).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// ‖Hv − Ev‖ (v not assumed normalised).
    pub fn residual(&self, v: &DVector<C64>, e: f64) -> f64 {
        (&self.matrix * v - v * C64::from(e)).norm()
    }
}

/// Diagonal of exp(iπN̂), N̂ = a†a + (σz+1)/2, in the interleaved basis.
pub fn parity_diagonal(n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .flat_map(|n| {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            [s, -s]
        })
        .collect()
}

pub fn build_hamiltonian(params: &ModelParams, n_max: usize) -> Result<TruncatedHamiltonian> {
    params.validate()?;
    if n_max < MIN_NMAX {
        return Err(Error::Domain(format!("N_max = {n_max} below minimum {MIN_NMAX}")));
    }
    let dim = 2 * (n_max + 1);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    let p = params;
    let cr = C64::from_polar(p.lambda * p.g, p.theta);
    for n in 0..=n_max {
        let (dn, up) = (basis_index(n, Spin::Down), basis_index(n, Spin::Up));
        let nf = n as f64;
        m[(dn, dn)] = C64::from(nf * p.omega - p.delta);
        m[(up, up)] = C64::from(nf * p.omega + p.delta);
        m[(dn, up)] = C64::from(p.epsilon);
        m[(up, dn)] = C64::from(p.epsilon);
        if n < n_max {
            let s = (nf + 1.0).sqrt();
            // g a†σ⁻: |n,↑⟩ → |n+1,↓⟩
            let (i, j) = (basis_index(n + 1, Spin::Down), up);
            m[(i, j)] = C64::from(p.g * s);
            m[(j, i)] = C64::from(p.g * s);
            // λg e^{iθ} a†σ⁺: |n,↓⟩ → |n+1,↑⟩
            let (i, j) = (basis_index(n + 1, Spin::Up), dn);
            m[(i, j)] = cr * s;
            m[(j, i)] = cr.conj() * s;
        }
    }
    Ok(TruncatedHamiltonian { n_max, matrix: m, params: *params })
}

/// Lowest eigenpairs; `vectors` holds one orthonormal eigenvector per column.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigenpairs {
    pub fn vector(&self, i: usize) -> DVector<C64> {
        self.vectors.column(i).into_owned()
    }
}

const MAX_SWEEPS: usize = 100_000;

pub fn eigensolve(h: &TruncatedHamiltonian, k: usize) -> Result<Eigenpairs> {
    let dim = h.dim();
    if k > dim {
        return Err(Error::Domain(format!("requested {k} eigenpairs of a {dim}-dimensional matrix")));
    }
    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if h.is_real() {
        let re = h.matrix.map(|v| v.re);
        let eig = SymmetricEigen::try_new(re, f64::EPSILON, MAX_SWEEPS)
            .ok_or_else(|| Error::Eigen(format!("real symmetric solve did not converge (dim {dim})")))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(C64::from))
    } else {
        let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, MAX_SWEEPS)
            .ok_or_else(|| Error::Eigen(format!("Hermitian solve did not converge (dim {dim})")))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order.truncate(k);
    let energies = order.iter().map(|&i| values[i]).collect();
    let cols: Vec<_> = order.iter().map(|&i| vectors.column(i).into_owned()).collect();
    let vectors = if cols.is_empty() { DMatrix::zeros(dim, 0) } else { DMatrix::from_columns(&cols) };
    Ok(Eigenpairs { energies, vectors })
}

/// Lowest `k` energies at `n_max`.
///
/// At ε = 0 the matrix is block-diagonal in parity, and the two blocks are
/// diagonalised separately (values only).
pub fn energies(params: &ModelParams, n_max: usize, k: usize) -> Result<Vec<f64>> {
    let h = build_hamiltonian(params, n_max)?;
    let dim = h.dim();
    if k > dim {
        return Err(Error::Domain(format!("requested {k} eigenpairs of a {dim}-dimensional matrix")));
    }
    let blocks: Vec<Vec<usize>> = if params.epsilon == 0.0 {
        let p = parity_diagonal(n_max);
        [1.0, -1.0].iter().map(|&s| (0..dim).filter(|&i| p[i] == s).collect()).collect()
    } else {
        vec![(0..dim).collect()]
    };
    let real = h.is_real();
    let mut values = Vec::with_capacity(dim);
    for idx in &blocks {
        let m = idx.len();
        if real {
            let b = DMatrix::from_fn(m, m, |i, j| h.matrix[(idx[i], idx[j])].re);
            values.extend(b.symmetric_eigenvalues().iter().copied());
        } else {
            let b = DMatrix::from_fn(m, m, |i, j| h.matrix[(idx[i], idx[j])]);
            values.extend(b.symmetric_eigenvalues().iter().copied());
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen(format!("non-finite eigenvalue (dim {dim})")));
    }
    values.sort_by(f64::total_cmp);
    values.truncate(k);
    Ok(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergedSpectrum {
    pub energies: Vec<f64>,
    /// Cutoff of the returned energies.
    pub n_max: usize,
    /// Smallest cutoff tried that already agreed with its doubling.
    pub n_converged: usize,
    /// max |ΔE| against the previous (halved) cutoff.
    pub last_change: f64,
}

/// Doubles N_max from 40 until the lowest `k` energies move by less than `tol`.
pub fn converged_spectrum(params: &ModelParams, k: usize, tol: f64) -> Result<ConvergedSpectrum> {
    converged_spectrum_from(params, k, tol, START_NMAX)
}

pub fn converged_spectrum_from(params: &ModelParams, k: usize, tol: f64, start: usize) -> Result<ConvergedSpectrum> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut n = start.max(MIN_NMAX);
    let mut prev = energies(params, n, k)?;
    let mut change = f64::INFINITY;
    while n < CAP_NMAX {
        let next_n = (2 * n).min(CAP_NMAX);
        let next = energies(params, next_n, k)?;
        change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        log::debug!("oracle N_max {n} -> {next_n}: max change {change:e}");
        let n_converged = n;
        n = next_n;
        prev = next;
        if change < tol {
            return Ok(ConvergedSpectrum { energies: prev, n_max: n, n_converged, last_change: change });
        }
    }
    Err(Error::OracleNotConverged { n_max: n, last_change: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn p(delta: f64, eps: f64, g: f64, lambda: f64, theta: f64) -> ModelParams {
        ModelParams::new(1.0, delta, eps, g, lambda, theta).unwrap()
    }

    #[test]
    fn decoupled_is_diagonal() {
        let h = build_hamiltonian(&p(0.4, 0.0, 0.0, 0.5, 0.0), 12).unwrap();
        let e = eigensolve(&h, 6).unwrap().energies;
        for (a, b) in e.iter().zip([-0.4, 0.4, 0.6, 1.4, 1.6, 2.4]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn real_when_theta_zero() {
        assert!(build_hamiltonian(&p(0.4, 0.2, 0.7, 0.5, 0.0), 12).unwrap().is_real());
        assert!(!build_hamiltonian(&p(0.4, 0.2, 0.7, 0.5, -PI / 2.0), 12).unwrap().is_real());
    }

    #[test]
    fn hermitian_and_parity() {
        let h = build_hamiltonian(&p(0.4, 0.0, 0.9, 0.3, 1.1), 30).unwrap();
        assert!(h.hermiticity_error() < 1e-14);
        assert!(h.parity_commutator_norm() < 1e-12);
        let hb = build_hamiltonian(&p(0.4, 0.2, 0.9, 0.3, 1.1), 30).unwrap();
        assert!(hb.parity_commutator_norm() > 0.1);
    }

    #[test]
    fn residuals_and_orthonormality() {
        let h = build_hamiltonian(&p(0.4, 0.2, 0.7, 0.5, -PI / 2.0), 30).unwrap();
        let ep = eigensolve(&h, 8).unwrap();
        for i in 0..8 {
            assert!(h.residual(&ep.vector(i), ep.energies[i]) < 1e-10);
        }
        let gram = ep.vectors.adjoint() * &ep.vectors;
        assert!((gram - DMatrix::<C64>::identity(8, 8)).norm() < 1e-10);
        assert!(ep.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn matches_jc_at_lambda_zero() {
        let (d, g) = (0.5, 0.3);
        let e = energies(&p(d, 0.0, g, 0.0, 0.0), 20, 3).unwrap();
        assert_abs_diff_eq!(e[0], -d, epsilon = 1e-13);
        assert_abs_diff_eq!(e[1], 0.5 - g, epsilon = 1e-13);
        assert_abs_diff_eq!(e[2], 0.5 + g, epsilon = 1e-13);
    }

    #[test]
    fn theta_and_sign_of_g_do_not_change_spectrum() {
        let a = energies(&p(0.4, 0.0, 0.8, 0.5, 0.0), 40, 10).unwrap();
        let b = energies(&p(0.4, 0.0, 0.8, 0.5, -PI / 2.0), 40, 10).unwrap();
        let mut q = p(0.4, 0.2, 0.8, 0.5, 0.0);
        let c = energies(&q, 40, 10).unwrap();
        q.g = -q.g;
        let d = eigensolve(&build_hamiltonian_unchecked(&q, 40), 10).unwrap().energies;
        for i in 0..10 {
            assert!((a[i] - b[i]).abs() < 1e-10);
            assert!((c[i] - d[i]).abs() < 1e-10);
        }
    }

    // Same matrix without parameter validation, so the a → −a gauge (g < 0)
    // can be checked.
    fn build_hamiltonian_unchecked(params: &ModelParams, n_max: usize) -> TruncatedHamiltonian {
        let mut q = *params;
        let sign = q.g.signum();
        q.g = q.g.abs();
        let mut h = build_hamiltonian(&q, n_max).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                if i / 2 != j / 2 {
                    h.matrix[(i, j)] *= sign;
                }
            }
        }
        h
    }

    #[test]
    fn converged_weak_coupling_stops_early() {
        let c = converged_spectrum(&p(0.4, 0.2, 0.1, 0.5, 0.0), 8, 1e-9).unwrap();
        assert_eq!((c.n_converged, c.n_max), (40, 80));
        let z = converged_spectrum(&p(0.4, 0.0, 0.0, 0.5, 0.0), 4, 1e-12).unwrap();
        assert!(z.last_change < 1e-14);
    }

    #[test]
    fn rejects_small_cutoff() {
        assert!(build_hamiltonian(&p(0.4, 0.0, 0.1, 0.5, 0.0), 5).is_err());
        assert!(converged_spectrum(&p(0.4, 0.0, 0.1, 0.5, 0.0), 4, 0.0).is_err());
    }
}
