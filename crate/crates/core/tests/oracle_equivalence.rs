//! G-function spectra against converged truncated diagonalisation over a
//! parameter grid, plus the sweep-level invariants.

use std::f64::consts::PI;

use rabi_core::gfunction::Sector;
use rabi_core::oracle::converged_spectrum;
use rabi_core::spectrum::{spectrum_in, sweep, SolverConfig, SweepParam};
use rabi_core::ModelParams;

const E_TOP: f64 = 5.0;

/// Every oracle level below E_TOP is matched by a G-function level and
/// vice versa (doublets counted twice).
fn check(p: &ModelParams, cfg: &SolverConfig) -> Result<f64, String> {
    let shift = p.energy_shift();
    let floor = -(p.delta.abs() + p.epsilon.abs()) - p.g * p.g * (1.0 + p.lambda).powi(2) / p.omega;
    let s = spectrum_in(p, floor - 0.5 + shift, E_TOP + 0.5 + shift, cfg).map_err(|e| format!("{p:?}: {e}"))?;
    let solver: Vec<f64> = s.levels(usize::MAX).into_iter().filter(|e| *e < E_TOP).collect();
    let want = solver.len() + 4;
    let o = converged_spectrum(p, want, 1e-11).map_err(|e| e.to_string())?;
    let oracle: Vec<f64> = o.energies.into_iter().filter(|e| *e < E_TOP).collect();
    if solver.len() != oracle.len() {
        return Err(format!("{p:?}: {} solver levels vs {} oracle levels below {E_TOP}", solver.len(), oracle.len()));
    }
    // levels right at the cut can fall on either side
    Ok(solver.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[test]
fn grid_matches_oracle() {
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for gi in 1..=15 {
        let g = 0.1 * gi as f64;
        for l in [0.3, 0.5, 1.0] {
            for eps in [0.0, 0.2] {
                for th in [0.0, -PI / 2.0] {
                    let p = ModelParams::new(1.0, 0.4, eps, g, l, th).unwrap();
                    let d = check(&p, &cfg).unwrap();
                    assert!(d < 1e-7, "{p:?}: max deviation {d:e}");
                    worst = worst.max(d);
                    count += 1;
                }
            }
        }
    }
    println!("{count} parameter sets, max deviation {worst:e}");
}

#[test]
fn no_same_parity_crossings() {
    let base = ModelParams::new(1.0, 0.4, 0.0, 0.1, 0.5, 0.0).unwrap();
    let grid: Vec<f64> = (1..=60).map(|i| 0.025 * i as f64).collect();
    let sw = sweep(&base, SweepParam::G, &grid, 10, &SolverConfig::default()).unwrap();
    for sector in [Sector::Plus, Sector::Minus] {
        assert_eq!(sw.same_sector_swaps(sector), 0, "{sector} sector levels swap order");
    }
}

#[test]
fn field_lifts_all_degeneracies() {
    let base = ModelParams::new(1.0, 0.4, 0.2, 0.1, 0.5, -PI / 2.0).unwrap();
    let grid: Vec<f64> = (1..=40).map(|i| 0.025 * i as f64).collect();
    let sw = sweep(&base, SweepParam::G, &grid, 8, &SolverConfig::default()).unwrap();
    assert!(sw.min_gap() > 1e-3, "min gap {}", sw.min_gap());
}
