use proptest::prelude::*;
use rupkit::kernel::{KernelKind, KernelSpec};
use rupkit::lpe::{equivalent_kernel_weights, fit_predict, predict_grid, LpeConfig, SortedDesign};
use rupkit::model::{sample_baseline, BaselineConfig, Dataset, RegressionFunction};
use rupkit::rng::StreamKey;

fn design(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    use rand::Rng;
    let mut s = StreamKey::new(seed).stream();
    (0..n).map(|_| lo + (hi - lo) * s.random::<f64>()).collect()
}

fn kernel(i: usize) -> KernelSpec {
    KernelSpec::new(KernelKind::ALL[i % KernelKind::ALL.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn weights_sum_to_one_and_vanish_outside(seed in any::<u64>(), order in 0usize..4, h in 0.05f64..0.5,
                                             x0 in 0.0f64..1.0, k in 0usize..4) {
        let xs = design(seed, 300, 0.0, 1.0);
        let cfg = LpeConfig::new(order, h, kernel(k)).unwrap();
        if let Ok(w) = equivalent_kernel_weights(&cfg, &xs, x0) {
            if !w.degenerate {
                prop_assert!((w.sum() - 1.0).abs() <= 1e-10);
            }
            for (x, wk) in xs.iter().zip(&w.weights) {
                if (x - x0).abs() > cfg.window() {
                    prop_assert_eq!(*wk, 0.0);
                }
            }
        }
    }

    #[test]
    fn reproduces_polynomials_up_to_its_order(seed in any::<u64>(), order in 0usize..4, x0 in 0.1f64..0.9,
                                              c in prop::collection::vec(-2.0f64..2.0, 4)) {
        let xs = design(seed, 400, 0.0, 1.0);
        let cfg = LpeConfig::new(order, 0.3, KernelSpec::epanechnikov()).unwrap();
        let p = |x: f64| (0..=order).map(|j| c[j] * (x - 0.5).powi(j as i32)).sum::<f64>();
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let w = equivalent_kernel_weights(&cfg, &xs, x0).unwrap();
        prop_assert!(!w.degenerate);
        prop_assert!((w.apply(&ys) - p(x0)).abs() <= 1e-8);
    }

    #[test]
    fn translation_and_permutation_invariance(seed in any::<u64>(), shift in 0.0f64..0.4, x0 in 0.1f64..0.5) {
        let xs = design(seed, 200, 0.0, 0.6);
        let cfg = LpeConfig::local_linear(0.15).unwrap();
        let w = equivalent_kernel_weights(&cfg, &xs, x0).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let wm = equivalent_kernel_weights(&cfg, &moved, x0 + shift).unwrap();
        for (a, b) in w.weights.iter().zip(&wm.weights) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let rev: Vec<f64> = xs.iter().rev().copied().collect();
        let wr = equivalent_kernel_weights(&cfg, &rev, x0).unwrap();
        for (a, b) in w.weights.iter().zip(wr.weights.iter().rev()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        // adding a constant to every y moves the fit by the same constant
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let up: Vec<f64> = ys.iter().map(|y| y + 3.0).collect();
        prop_assert!((w.apply(&up) - w.apply(&ys) - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn sorted_path_matches_linear_scan(seed in any::<u64>(), h in 0.05f64..0.4, x0 in 0.0f64..1.0) {
        let d = sample_baseline(&BaselineConfig::new(RegressionFunction::sine(), 1.0, 250).unwrap(),
                                &mut StreamKey::new(seed).stream());
        let cfg = LpeConfig::local_linear(h).unwrap();
        let scan = equivalent_kernel_weights(&cfg, &d.xs, x0).map(|w| w.apply(&d.ys));
        let fast = SortedDesign::from_dataset(&d).unwrap().predict(&cfg, x0);
        match (scan, fast) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs())),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a, b),
        }
    }
}

#[test]
fn noiseless_sine_bias_is_small_in_the_interior() {
    let d = sample_baseline(
        &BaselineConfig::new(RegressionFunction::sine(), 0.0, 2000).unwrap(),
        &mut StreamKey::new(7).stream(),
    );
    let cfg = LpeConfig::local_linear(0.05).unwrap();
    let f = RegressionFunction::sine();
    for i in 0..=90 {
        let x = 0.05 + 0.01 * i as f64;
        let err = (fit_predict(&cfg, &d, x).unwrap() - f.eval(x)).abs();
        assert!(err < 0.02, "x = {x}: |bias| = {err}");
    }
}

#[test]
fn grid_prediction_equals_pointwise_prediction() {
    let d = sample_baseline(
        &BaselineConfig::new(RegressionFunction::sine(), 0.0, 500).unwrap(),
        &mut StreamKey::new(8).stream(),
    );
    let cfg = LpeConfig::local_linear(0.08).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let many = predict_grid(&cfg, &d, &grid).unwrap();
    for (x, p) in grid.iter().zip(&many) {
        assert_eq!(*p, fit_predict(&cfg, &d, *x).ok());
    }
    assert!(predict_grid(&cfg, &d, &[]).unwrap().is_empty());
}

#[test]
fn empirical_weight_constants_stay_moderate() {
    // sum |W| < 10 on uniform designs with nh >= 20
    for (seed, n, h) in [(1u64, 200usize, 0.1), (2, 1000, 0.02), (3, 4000, 0.005)] {
        let xs = design(seed, n, 0.0, 1.0);
        let cfg = LpeConfig::local_linear(h).unwrap();
        for i in 0..=20 {
            let w = equivalent_kernel_weights(&cfg, &xs, i as f64 / 20.0).unwrap();
            assert!(w.abs_sum() < 10.0, "n={n} h={h}: sum|W| = {}", w.abs_sum());
        }
    }
}

#[test]
fn degenerate_designs_are_flagged_not_hidden() {
    // two distinct points cannot pin down a local quadratic
    let cfg = LpeConfig::new(2, 0.5, KernelSpec::epanechnikov()).unwrap();
    let w = equivalent_kernel_weights(&cfg, &[0.4, 0.6], 0.5).unwrap();
    assert!(w.degenerate);
    let d = Dataset::new(vec![0.1, 0.2], vec![1.0, 2.0]).unwrap();
    assert!(fit_predict(&LpeConfig::local_linear(0.01).unwrap(), &d, 0.9).is_err());
}
