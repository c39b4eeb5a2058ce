//! G-matrix, R-matrices and the fundamental matrix of the chain above level 0.

mod fplus;
mod g;
mod rmat;

pub use fplus::FPlusWindow;
pub use g::{solve_g, stationary_of_g, GOptions, MatanSolution};
pub use rmat::RFamily;
