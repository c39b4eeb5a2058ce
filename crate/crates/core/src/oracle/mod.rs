//! Independent brute-force verifiers.
//!
//! Nothing here calls into the matrix-analytic solvers; the routines work
//! directly on truncated transition matrices or on simulated paths.

mod gth;
mod power;
mod sim;
mod truncated;

pub use gth::{gth, lu_stationary};
pub use power::{power_partial_sums, PartialSums};
pub use sim::{mc_first_passage, mc_occupation_r, mc_queue, LossEstimate, McEstimate};
pub use truncated::{first_passage_solve, h_definitional, DefinitionalH, FirstPassage};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::FiniteChainSpec;
    use crate::linalg::Mat;
    use crate::presets;

    #[test]
    fn sc1_first_passage_oracle() {
        let fp = first_passage_solve(&presets::sc1(), 200, 10, 1e-10).unwrap();
        for k in 1..=10 {
            assert!((fp.u[k][0] - k as f64 / 0.3).abs() < 1e-8);
        }
        assert!(fp.u.iter().all(|u| u.min() >= 1.0));
        assert!(first_passage_solve(&presets::sc1(), 10, 10, 1e-10).is_err());
    }

    #[test]
    fn sc1_definitional_h_reference_row() {
        let h = h_definitional(&presets::sc1(), 60, (0, 0)).unwrap();
        // occupation before hitting the reference state from itself is zero
        assert!(h.block(0, 0)[(0, 0)].abs() < 1e-12);
        assert!(h.poisson_residual() < 1e-8);
        let p = FiniteChainSpec::last_column(&presets::sc1(), 60)
            .unwrap()
            .assemble();
        assert!((gth(&p).unwrap() - &h.pi).amax() < 1e-15);
    }

    #[test]
    fn mm1_queue_simulation_brackets_closed_form() {
        let model = presets::mm1_model().unwrap();
        let a = mc_queue(&model.map, &model.service, 4, 1_000_000, 10, 42).unwrap();
        let b = mc_queue(&model.map, &model.service, 4, 1_000_000, 10, 42).unwrap();
        assert_eq!(a.estimate.mean.to_bits(), b.estimate.mean.to_bits());
        let closed = 0.5 * 0.5f64.powi(5) / (1.0 - 0.5f64.powi(6));
        assert!(a.consistent_with(closed, 3.0), "{a:?}");
        assert!(!a.consistent_with(2.0 * closed, 3.0));
    }

    #[test]
    fn zero_loss_count_test() {
        let est = LossEstimate {
            estimate: McEstimate {
                mean: 0.0,
                se: 0.0,
                replications: 10,
            },
            lost: 0,
            counted: 1_000_000,
        };
        assert!(est.consistent_with(1e-9, 3.0));
        assert!(!est.consistent_with(1e-4, 3.0));
    }

    #[test]
    fn periodic_chain_needs_cesaro() {
        let p = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pi = gth(&p).unwrap();
        assert!(power_partial_sums(&p, &pi, 1000, 1e-12, false).is_err());
        let c = power_partial_sums(&p, &pi, 20_000, 1e-12, true).unwrap();
        assert!(c.cesaro);
        // group inverse of the flip chain: (I - e pi)/2
        assert!((c.d[(0, 0)] - 0.25).abs() < 1e-3, "{}", c.d);
    }
}
