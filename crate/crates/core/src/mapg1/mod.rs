//! MAP/G/1/N+1 queue: embedded chain construction and loss probabilities.

mod embed;
mod loss;
mod map;
mod service;

pub use embed::{embed_chain, EmbedOptions, EmbedReport, EmbeddedChain};
pub use loss::{lambda_identity, loss_asymptotic, loss_exact};
pub use map::MapSpec;
pub use service::ServiceDist;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn mm1_blocks_are_geometric() {
        let model = presets::mm1_model().unwrap();
        let a = model.chain.a_family();
        for k in -1..6 {
            let expected = (2.0 / 3.0) * (1.0_f64 / 3.0).powi(k as i32 + 1);
            assert!((a.block(k)[(0, 0)] - expected).abs() < 1e-15, "k={k}");
        }
        assert!(model.report.row_residual < 1e-14);
        assert!(model.report.drift_residual < 1e-12);
    }

    #[test]
    fn md1_blocks_are_poisson() {
        let map = MapSpec::poisson(1.0).unwrap();
        let model = embed_chain(
            &map,
            &ServiceDist::Deterministic { value: 0.5 },
            &EmbedOptions::default(),
        )
        .unwrap();
        let mut fact = 1.0;
        for k in -1..8i64 {
            if k >= 0 {
                fact *= (k + 1) as f64;
            }
            let expected = (-0.5f64).exp() * 0.5f64.powi(k as i32 + 1) / fact;
            assert!((model.chain.a(k)[(0, 0)] - expected).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn mp2_is_stochastic_with_rho_drift() {
        let model = presets::mp2_model().unwrap();
        assert!(model.report.row_residual < 1e-10);
        assert!(model.report.drift_residual < 1e-10);
        let sigma = model.chain.sigma().unwrap();
        assert!((sigma - (model.rho - 1.0)).abs() < 1e-10);
        assert!((model.rho - 0.225).abs() < 1e-12);
    }

    #[test]
    fn phase_type_matches_exponential() {
        let map = presets::mp2_map();
        let exp = embed_chain(
            &map,
            &ServiceDist::Exponential { rate: 4.0 },
            &EmbedOptions::default(),
        )
        .unwrap();
        let ph = ServiceDist::PhaseType {
            alpha: vec![1.0],
            t: vec![vec![-4.0]],
        };
        let ph = embed_chain(&map, &ph, &EmbedOptions::default()).unwrap();
        for k in -1..10 {
            assert!((exp.chain.a(k) - ph.chain.a(k)).amax() < 1e-13);
        }
    }

    #[test]
    fn equilibrium_tails() {
        let d = ServiceDist::Deterministic { value: 0.5 };
        assert!((d.equilibrium_tail(0.25) - 0.5).abs() < 1e-15);
        let e = ServiceDist::Exponential { rate: 2.0 };
        assert!((e.equilibrium_tail(1.0) - (-2.0f64).exp()).abs() < 1e-15);
        let p = ServiceDist::pareto_unit_mean(3.5);
        for s in [&d, &e, &p] {
            assert_eq!(s.equilibrium_tail(0.0), 1.0);
        }
        // integrated survival against the closed form
        let x = 3.0;
        let (nodes, weights) = crate::special::gauss_legendre(16);
        let (lo, hi) = (x, 5000.0f64);
        let panels = 4000;
        let w = (hi - lo) / panels as f64;
        let mut integral = 0.0;
        for i in 0..panels {
            let mid = lo + (i as f64 + 0.5) * w;
            for (t, q) in nodes.iter().zip(&weights) {
                integral += 0.5 * w * q * p.survival(mid + 0.5 * w * t);
            }
        }
        integral += 2.5 / 2.5 * (1.0 + hi / 2.5f64).powf(-2.5);
        assert!((integral / p.mean() - p.equilibrium_tail(x)).abs() < 1e-9);
    }

    #[test]
    fn pareto_mixture_weights_sum_to_one() {
        let p = ServiceDist::pareto_unit_mean(3.5);
        let (w, _) = p.poisson_mixture(0.5, 0.0, 4000);
        let covered: f64 = w.iter().sum();
        // remaining mass is roughly P(S > 4000 / 0.5)
        let rest = 1.0 - covered;
        assert!(rest.abs() < 1e-9, "{rest}");
        // gamma_0 = E exp(-theta S) against a direct quadrature
        let g0: f64 = {
            let n = 200_000;
            let h = 400.0 / n as f64;
            let f = |x: f64| (-0.5 * x).exp() * 3.5 / 2.5 * (1.0 + x / 2.5).powf(-4.5);
            // Simpson
            let inner: f64 = (1..n)
                .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h))
                .sum();
            (f(0.0) + inner + f(400.0)) * h / 3.0
        };
        assert!((w[0] - g0).abs() < 1e-8, "{} vs {g0}", w[0]);
    }

    #[test]
    fn pareto_asymptotic_formula() {
        let p = ServiceDist::pareto_unit_mean(3.5);
        let v0 = loss_asymptotic(&p, 0.5, 0).unwrap();
        assert!((v0 - 0.5 / 1.5).abs() < 1e-15);
        let t: f64 = (1.0 + 200.0 / 2.5f64).powf(-2.5);
        let v = loss_asymptotic(&p, 0.5, 100).unwrap();
        assert!((v - 0.5 * t / (1.0 + 0.5 * t)).abs() < 1e-18);
        let e = ServiceDist::Exponential { rate: 2.0 };
        assert!(matches!(
            loss_asymptotic(&e, 1.0, 10),
            Err(crate::Error::Inapplicable(_))
        ));
    }

    #[test]
    fn mm1_loss_matches_birth_death() {
        let model = presets::mm1_model().unwrap();
        let mut last = 1.0;
        for n in 1..=20 {
            let rho: f64 = 0.5;
            let closed = (1.0 - rho) * rho.powi(n as i32 + 1) / (1.0 - rho.powi(n as i32 + 2));
            let exact = loss_exact(&model, n).unwrap();
            assert!((exact - closed).abs() < 1e-10, "N={n}");
            assert!(exact <= last);
            last = exact;
        }
        assert!((loss_exact(&model, 4).unwrap() - 0.015873).abs() < 1e-6);
        assert!(matches!(
            loss_exact(&model, 0),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn loss_is_monotone_for_mp2_and_pareto() {
        for model in [
            presets::mp2_model().unwrap(),
            presets::pareto_model().unwrap(),
        ] {
            let v: Vec<f64> = (1..=30).map(|n| loss_exact(&model, n).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn renewal_identity() {
        use crate::matan::MatanSolution;
        use crate::stationary::{solve_infinite, StationaryOptions};
        for model in [
            presets::mm1_model().unwrap(),
            presets::md1_model().unwrap(),
            presets::mp2_model().unwrap(),
        ] {
            let spec = &model.chain;
            let sol = MatanSolution::solve(spec).unwrap();
            let pi = solve_infinite(spec, &sol, &StationaryOptions::for_spec(spec)).unwrap();
            assert!(lambda_identity(&model, &pi.pi.level(0)).unwrap() < 1e-8);
        }
        // M/M/1: pi(0) (-Lambda0)^-1 e = 1/lambda - mean service
        let model = presets::mm1_model().unwrap();
        let sol = MatanSolution::solve(&model.chain).unwrap();
        let pi = solve_infinite(
            &model.chain,
            &sol,
            &StationaryOptions::for_spec(&model.chain),
        )
        .unwrap();
        assert!((pi.pi.level(0)[0] - 0.5).abs() < 1e-12);
    }
}
