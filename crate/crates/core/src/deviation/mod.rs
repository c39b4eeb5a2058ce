//! Fundamental deviation matrix on a finite window and the difference
//! formula linking the stationary vectors of `P` and `P^(N)`.

mod checks;
mod window;

pub use checks::{
    deviation_d_window, difference_decomposition, difference_formula_check, poisson_residual,
    DWindow, Decomposition, DifferenceReport, PoissonResidual,
};
pub use window::{DeviationWindow, WindowSummary};
