//! Exact spectrum, eigenstates and entanglement of the anisotropic Rabi model
//!
//! ```text
//! H = ω a†a + ε σx + Δ σz + g[(a†σ⁻ + aσ⁺) + λ(e^{iθ} a†σ⁺ + e^{−iθ} aσ⁻)]
//! ```
//!
//! Energies come from the zeros of transcendental functions built from
//! convergent power series ([`gfunction`], [`spectrum`]). A truncated Fock
//! diagonalisation ([`oracle`]) serves as an independent reference.

pub mod error;
pub mod fit;
pub mod gfunction;
pub mod model;
pub mod oracle;
pub mod series;
pub mod spectrum;
pub mod states;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use model::{derive_constants, frame_maps, DerivedConstants, FrameMaps, ModelParams};
