use mg1_core::chain::{AnalyticTail, BlockFamily, TailWeights};
use mg1_core::mapg1::{embed_chain, loss_exact, EmbedOptions, MapSpec, ServiceDist};
use mg1_core::matan::{stationary_of_g, MatanSolution};
use mg1_core::oracle::{gth, lu_stationary};
use mg1_core::stationary::{solve_infinite, StationaryOptions};
use mg1_core::{ChainSpec, FiniteChainSpec, Mat};
use proptest::prelude::*;

/// Splits each row of `raw` (one matrix per block, all `rows x cols_k`) so
/// that the row sums over all blocks equal one.
fn normalize(raw: &mut [Mat]) {
    let rows = raw[0].nrows();
    for i in 0..rows {
        let total: f64 = raw.iter().map(|m| m.row(i).sum()).sum();
        for m in raw.iter_mut() {
            m.row_mut(i).scale_mut(1.0 / total);
        }
    }
}

fn positive_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(0.05f64..1.0, rows * cols)
        .prop_map(move |v| Mat::from_row_slice(rows, cols, &v))
}

/// Finite-support chain with `m0 = m1 = m`, upward jumps up to `up`, and
/// extra weight on `A(-1)` so that the drift is usually negative.
fn chain() -> impl Strategy<Value = ChainSpec> {
    (1usize..=2, 1usize..=3, 1.0f64..4.0).prop_flat_map(|(m, up, down_boost)| {
        (
            prop::collection::vec(positive_matrix(m, m), up + 2),
            prop::collection::vec(positive_matrix(m, m), up + 1),
        )
            .prop_map(move |(mut a, mut b)| {
                a[0] *= down_boost * up as f64;
                normalize(&mut a);
                normalize(&mut b);
                // B(-1) = A(-1); B(0), B(1..=up) share the remaining rows
                let b_down = a[0].clone();
                let a_fam = BlockFamily::finite(-1, m, m, a).unwrap();
                let b0 = b[0].clone();
                let b_up = BlockFamily::finite(1, m, m, b[1..].to_vec()).unwrap();
                ChainSpec::new(a_fam, b_down, b0, b_up).unwrap()
            })
    })
}

fn recurrent_chain() -> impl Strategy<Value = ChainSpec> {
    chain().prop_filter("negative drift", |s| {
        s.sigma().map(|x| x < -0.05).unwrap_or(false)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gth_vector_is_stationary(n in 2usize..9, seed in prop::collection::vec(0.0f64..1.0, 64)) {
        let mut p = Mat::from_fn(n, n, |i, j| 0.01 + seed[(i * 8 + j) % 64]);
        for i in 0..n {
            let s = p.row(i).sum();
            p.row_mut(i).scale_mut(1.0 / s);
        }
        let x = gth(&p).unwrap();
        prop_assert!((&x * &p - &x).amax() < 1e-13);
        prop_assert!((x.sum() - 1.0).abs() < 1e-14);
        prop_assert!(x.iter().all(|v| *v > 0.0));
        prop_assert!((lu_stationary(&p).unwrap() - x).amax() < 1e-10);
    }

    #[test]
    fn last_column_truncation_is_stochastic(spec in chain(), n in 1usize..12) {
        let p = FiniteChainSpec::last_column(&spec, n).unwrap().assemble();
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        for i in 0..p.nrows() {
            prop_assert!((p.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_sums_telescope(spec in chain(), k in -1i64..6) {
        let a = spec.a_family();
        let diff = a.tail_sum(k) - a.tail_sum(k + 1);
        prop_assert!((diff - a.block(k + 1)).amax() < 1e-15);
        let dd = a.double_tail(k).unwrap() - a.double_tail(k + 1).unwrap();
        prop_assert!((dd - a.tail_sum(k + 1)).amax() < 1e-14);
    }

    #[test]
    fn power_tail_sums_telescope(exponent in 3.5f64..6.0, scale in 0.01f64..0.2, k in 1i64..40) {
        let tail = AnalyticTail {
            weights: TailWeights::PowerLaw { exponent, shift: 0.0 },
            profile: Mat::from_element(1, 1, scale),
        };
        let head = vec![Mat::from_element(1, 1, 0.5), Mat::from_element(1, 1, 0.1)];
        let a = BlockFamily::new(-1, 1, 1, head, Some(tail)).unwrap();
        let diff = a.tail_sum(k) - a.tail_sum(k + 1);
        let block = a.block(k + 1)[(0, 0)];
        prop_assert!((diff[(0, 0)] - block).abs() < 1e-12 * (1.0 + scale));
        let dd = a.double_tail(k).unwrap() - a.double_tail(k + 1).unwrap();
        prop_assert!((dd - a.tail_sum(k + 1)).amax() < 1e-11);
    }

    #[test]
    fn json_round_trip_is_identity(spec in chain()) {
        let text = spec.to_json().unwrap();
        let back = ChainSpec::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
        for k in -1..5 {
            prop_assert_eq!(back.a(k), spec.a(k));
        }
        prop_assert_eq!(back.b_down(), spec.b_down());
        prop_assert_eq!(back.b0(), spec.b0());
        for k in 1..5 {
            prop_assert_eq!(back.b(k), spec.b(k));
        }
    }

    #[test]
    fn g_is_stochastic_and_pi_normalizes(spec in recurrent_chain()) {
        let sol = MatanSolution::solve(&spec).unwrap();
        let g = &sol.g;
        for i in 0..g.nrows() {
            prop_assert!((g.row(i).sum() - 1.0).abs() < 1e-10);
        }
        let gv = stationary_of_g(g).unwrap();
        prop_assert!((&gv * g - &gv).amax() < 1e-12);
        let pi = solve_infinite(&spec, &sol, &StationaryOptions::for_spec(&spec)).unwrap();
        prop_assert!((pi.pi.total() - 1.0).abs() < 1e-9);
        // a truncation past the level where the tail mass drops below 1e-12
        let n = pi.pi.max_level() + 10;
        prop_assume!(n <= 400);
        let f = FiniteChainSpec::last_column(&spec, n).unwrap();
        let x = gth(&f.assemble()).unwrap();
        for k in 0..5 {
            let off = spec.offset(k);
            for (j, v) in pi.pi.level(k).iter().enumerate() {
                prop_assert!((x[off + j] - v).abs() < 1e-9, "level {} phase {}", k, j);
            }
        }
    }

    #[test]
    fn loss_is_monotone_in_capacity(r1 in 0.2f64..2.0, r2 in 0.2f64..2.0, s1 in 0.1f64..1.0, s2 in 0.1f64..1.0, mu in 2.5f64..6.0) {
        let l0 = Mat::from_row_slice(2, 2, &[-(r1 + s1), s1, s2, -(r2 + s2)]);
        let l1 = Mat::from_row_slice(2, 2, &[r1, 0.0, 0.0, r2]);
        let map = MapSpec::new(l0, l1).unwrap();
        prop_assume!(map.rate() / mu < 0.9);
        let model = embed_chain(&map, &ServiceDist::Exponential { rate: mu }, &EmbedOptions::default()).unwrap();
        let v: Vec<f64> = (1..=15).map(|n| loss_exact(&model, n).unwrap()).collect();
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{:?}", v);
    }
}
