//! Surface diffusion of elastically strained periodic films.
//!
//! A film `{0 < y < h(x)}` over a periodic interval or square carries a
//! mismatch strain `e0` imposed by the substrate. Its free surface evolves by
//! `V = Δ_Γ (H + Q(E(u)))`, the `H⁻¹` gradient flow of elastic plus surface
//! energy. The modules cover:
//!
//! - [`spectral`] and [`geometry`]: periodic grids, spectral derivatives, graph geometry,
//! - [`elasticity`]: finite elements for the film and its linearization,
//! - [`flow`]: the IMEX time stepper and full runs,
//! - [`diagnostics`]: energies, residuals and the energy identity,
//! - [`stability`]: second variation, Fourier spectra and flat-film scans,
//! - [`io`] and [`commands`]: configuration, output files and the CLI entry points.
//!
//! The guide in `book/` walks through each part with runnable examples.

pub mod commands;
pub mod diagnostics;
pub mod elasticity;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod spectral;
pub mod stability;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/elasticity.md")]
    pub mod elasticity {}
    #[doc = include_str!("../../../book/src/flow.md")]
    pub mod flow {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/stability.md")]
    pub mod stability {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
