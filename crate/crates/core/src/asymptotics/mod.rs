//! Subexponential reference tails and the truncation-error asymptotics of
//! the finite-level stationary vectors.

mod study;
mod tail;

pub use study::{
    convergence_study, fit_constants, last_level_ratio, richardson, tail_ratio, trend_decreasing,
    AsymptoticConstants, KTrend, RatioSequence, StudyReport, StudyRow, LONG_TAIL_DELTA,
    STUDY_THRESHOLD,
};
pub use tail::{subexponential_evidence, TailChoice, TailModel, TailValidation};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matan::MatanSolution;
    use crate::presets;
    use crate::special::hurwitz_zeta;
    use crate::stationary::{solve_infinite, StationaryOptions};

    #[test]
    fn geometric_tail_is_not_subexponential() {
        let r = subexponential_evidence(&TailModel::Geometric { ratio: 0.5 }, 60).unwrap();
        // r(k) = 1 + k exactly
        for (k, x) in r.iter().enumerate() {
            assert!((x - 1.0 - k as f64).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn power_tail_convolution_ratio_tends_to_two() {
        let r = subexponential_evidence(&TailModel::Power { exponent: 2.5 }, 2000).unwrap();
        assert!((r[2000] - 2.0).abs() < 0.1, "{}", r[2000]);
        assert!((r[2000] - 2.0).abs() < (r[200] - 2.0).abs());
        let v = TailModel::Power { exponent: 2.5 }.validate(1000).unwrap();
        assert!(v.delta < 0.01 && v.summable);
    }

    #[test]
    fn degenerate_tail_is_rejected() {
        assert!(subexponential_evidence(&TailModel::Geometric { ratio: 0.0 }, 5).is_err());
        assert!(TailModel::Geometric { ratio: 1.5 }.validate(5).is_err());
    }

    #[test]
    fn chain_tail_gives_exact_constants() {
        let spec = presets::hc1_default();
        let tail = TailModel::chain_integrated(&spec).unwrap();
        let c = fit_constants(&spec, &tail, &[50, 100, 200]).unwrap();
        let norm = spec.double_tail_a(0).unwrap()[(0, 0)];
        for row in c.ratios_a.iter().chain(&c.ratios_b) {
            assert!((row[0] - norm).abs() < 1e-12 * norm);
        }
        assert!((c.c_a[0] - norm).abs() < 1e-10 && !c.violated);
    }

    #[test]
    fn independent_power_reference_plateau() {
        // double tail of Z k^-4.5 is Z N^-2.5 / (3.5 * 2.5) to first order
        let spec = presets::hc1_default();
        let z = 0.2 / hurwitz_zeta(4.5, 1.0);
        let c = fit_constants(
            &spec,
            &TailModel::Power { exponent: 2.5 },
            &[250, 500, 1000],
        )
        .unwrap();
        assert!((c.c_a[0] / (z / 8.75) - 1.0).abs() < 0.02, "{:?}", c.c_a);
    }

    #[test]
    fn light_tail_flags_violation() {
        let spec = presets::sc1();
        let c = fit_constants(&spec, &TailModel::Power { exponent: 2.5 }, &[10, 20, 40]).unwrap();
        assert!(c.violated && c.c_a[0] == 0.0 && c.c_b[0] == 0.0);
        let sol = MatanSolution::solve(&spec).unwrap();
        let pi = solve_infinite(&spec, &sol, &StationaryOptions::for_spec(&spec)).unwrap();
        let study = convergence_study(
            &spec,
            &pi.pi,
            &TailModel::Power { exponent: 2.5 },
            &[0],
            &[5, 10],
        )
        .unwrap();
        assert!(!study.assumptions_ok);
        assert!(study.context.starts_with("assumption-violated"));
    }

    #[test]
    fn last_level_ratio_excludes_first_level_and_decreases() {
        let spec = presets::hc1_default();
        let tail = TailModel::chain_integrated(&spec).unwrap();
        let seq = last_level_ratio(&spec, &tail, &[1, 25, 50, 100, 200]).unwrap();
        assert_eq!(seq.values.len(), 5);
        assert!(seq.trend_ok);
        let light = last_level_ratio(
            &presets::sc1(),
            &TailModel::Power { exponent: 2.5 },
            &[10, 20, 40],
        )
        .unwrap();
        assert!(light.values[2][0] < 1e-6 && light.trend_ok);
    }

    #[test]
    fn trend_helper() {
        assert!(trend_decreasing(&[5.0, 4.0, 3.0, 2.0], 0));
        assert!(trend_decreasing(&[5.0, 4.0, 3.0, 3.5, 2.0], 1));
        assert!(!trend_decreasing(&[5.0, 4.0, 3.0, 3.5, 4.0], 1));
        assert_eq!(richardson(1.0, 3.0, 2.0, 2.5), 2.0);
    }

    #[test]
    fn study_csv_header() {
        let spec = presets::hc1_default();
        let sol = MatanSolution::solve(&spec).unwrap();
        let pi = solve_infinite(&spec, &sol, &StationaryOptions::for_spec(&spec)).unwrap();
        let tail = TailModel::chain_integrated(&spec).unwrap();
        let st = convergence_study(&spec, &pi.pi, &tail, &[0], &[10, 20]).unwrap();
        let csv = st.to_csv();
        assert!(csv.starts_with("N,k,phase,r_N,pibar_N,Fbar_N\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn pareto_queue_tail_ratio_and_study() {
        let m = presets::pareto_model().unwrap();
        let spec = &m.chain;
        let sol = MatanSolution::solve(spec).unwrap();
        let pi = solve_infinite(spec, &sol, &StationaryOptions::for_spec(spec)).unwrap();
        let tail = TailModel::EquilibriumService {
            service: m.service.clone(),
            rate: m.map.rate(),
        };
        let pred = vec![m.rho / (1.0 - m.rho)];
        let r = tail_ratio(&pi.pi, &tail, &[50, 100, 200, 400, 800], Some(pred)).unwrap();
        assert!(r.trend_ok && r.rel_error[4] < 0.02, "{:?}", r.rel_error);
        let st = convergence_study(spec, &pi.pi, &tail, &[0], &[25, 50, 100, 200, 400]).unwrap();
        assert!(st.pass && st.assumptions_ok);
    }

    #[test]
    fn geometric_chain_tail_is_not_long_tailed() {
        let spec = presets::mm1();
        let sol = MatanSolution::solve(&spec).unwrap();
        let pi = solve_infinite(&spec, &sol, &StationaryOptions::for_spec(&spec)).unwrap();
        let tail = TailModel::chain_integrated(&spec).unwrap();
        let st = convergence_study(&spec, &pi.pi, &tail, &[0], &[5, 10, 20]).unwrap();
        assert!(!st.assumptions_ok, "{}", st.context);
        assert!(st.context.contains("factor 0.333"), "{}", st.context);
        assert!(TailModel::chain_integrated(&presets::sc1()).is_err());
    }
}
