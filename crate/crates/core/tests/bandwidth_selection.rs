use proptest::prelude::*;
use rupkit::bandwidth::{
    domain_cv_bandwidth, effective_sample_size, estimate_tau_from_summaries, naive_cv_bandwidth, oracle_bandwidth,
    EvalWindow,
};
use rupkit::lpe::{fit_predict, LpeConfig};
use rupkit::model::{BaselineConfig, Dataset, RegressionFunction};
use rupkit::rng::StreamKey;
use rupkit::rup::{draw_perturbation, sample_perturbed, CorrelatedNoiseSpec, RupSpec};
use rupkit::stats;

fn grid() -> Vec<f64> {
    (0..12).map(|i| 0.05 * 1.2f64.powi(i)).collect()
}

/// `j` realizations of `n` points each under correlated noise with the
/// given tau. Streams do not depend on tau, so suites are paired.
fn suite(tau: f64, j: u64, n: usize, key: StreamKey) -> Vec<Dataset> {
    suite_with_buckets(tau, 20, j, n, key)
}

fn suite_with_buckets(tau: f64, b_x: usize, j: u64, n: usize, key: StreamKey) -> Vec<Dataset> {
    let b = BaselineConfig::new(RegressionFunction::sine(), 1.0, n).unwrap();
    let spec: RupSpec = CorrelatedNoiseSpec::new(b_x, tau * b_x as f64, b).unwrap().into();
    (0..j)
        .map(|r| {
            let k = key.child(r);
            let xi = draw_perturbation(&spec, &mut k.child(0).stream()).unwrap().with_id(r);
            sample_perturbed(&spec, &xi, n, &mut k.child(1).stream()).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn oracle_is_monotone(n in 1usize..100_000, tau in 0.0f64..0.5, beta in 0.5f64..3.0) {
        let h = oracle_bandwidth(n, tau, beta, 1.0).unwrap();
        prop_assert!(oracle_bandwidth(n, tau + 1e-3, beta, 1.0).unwrap() >= h);
        prop_assert!(oracle_bandwidth(n + 1, tau, beta, 1.0).unwrap() <= h);
        if tau > 0.0 {
            prop_assert!(oracle_bandwidth(n + 1, tau, beta, 1.0).unwrap() < h);
        }
        prop_assert!(oracle_bandwidth(n, tau + 1e-3, beta, 1.0).unwrap() > h);
    }

    #[test]
    fn n_eff_is_strictly_monotone(n in 1usize..1_000_000, tau in 1e-9f64..1.0) {
        let e = effective_sample_size(n, tau).unwrap().n_eff;
        prop_assert!(effective_sample_size(n, tau * 1.01).unwrap().n_eff < e);
        prop_assert!(effective_sample_size(n + 1, tau).unwrap().n_eff > e);
        prop_assert!((e * (1.0 + n as f64 * tau) - n as f64).abs() <= 1e-12 * n as f64);
    }
}

#[test]
fn oracle_flattens_only_under_shift() {
    for beta in [1.0, 2.0] {
        let r0 = oracle_bandwidth(1000, 0.0, beta, 1.0).unwrap() / oracle_bandwidth(10_000, 0.0, beta, 1.0).unwrap();
        assert!((r0 - 10f64.powf(1.0 / (2.0 * beta + 1.0))).abs() < 1e-12);
        let r = |n: usize| oracle_bandwidth(n, 0.01, beta, 1.0).unwrap() / oracle_bandwidth(10 * n, 0.01, beta, 1.0).unwrap();
        assert!(r(100) > r(10_000) && r(10_000) > r(1_000_000));
        assert!((r(10_000_000) - 1.0).abs() < 1e-4);
    }
}

#[test]
fn tau_estimate_clamps() {
    assert_eq!(estimate_tau_from_summaries(&[1.0; 10], 1000, 1.0).unwrap(), 0.0);
    // sample variance 0.5 below sigma2/n_per = 1
    assert_eq!(estimate_tau_from_summaries(&[0.0, 1.0], 1, 1.0).unwrap(), 0.0);
}

#[test]
fn domain_cv_needs_two_domains() {
    let d = suite(0.0, 1, 100, StreamKey::new(1));
    let lpe = LpeConfig::local_linear(0.1).unwrap();
    assert!(domain_cv_bandwidth(&d, &grid(), &lpe, EvalWindow::default()).is_err());
    let two = suite(0.0, 2, 100, StreamKey::new(1));
    assert_eq!(domain_cv_bandwidth(&two, &[0.2], &lpe, EvalWindow::default()).unwrap().h_star, 0.2);
}

#[test]
fn noiseless_affine_data_selects_largest_h() {
    let xs: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
    let d = Dataset::new(xs, ys).unwrap();
    let g = grid();
    let sel = naive_cv_bandwidth(&d, &g, &LpeConfig::local_linear(0.1).unwrap(), 5, EvalWindow::default(), StreamKey::new(2)).unwrap();
    assert_eq!(sel.h_star, *g.last().unwrap());
}

#[test]
fn domain_and_naive_agree_without_shift() {
    // one realization split in ten domains versus pooled random splits
    let g = grid();
    let lpe = LpeConfig::local_linear(0.1).unwrap();
    let mut within = 0;
    for rep in 0..10u64 {
        let d = suite(0.0, 10, 150, StreamKey::new(3).child(rep));
        let pooled = Dataset::pooled(&d);
        let dom = domain_cv_bandwidth(&d, &g, &lpe, EvalWindow::default()).unwrap().h_star;
        let naive = naive_cv_bandwidth(&pooled, &g, &lpe, 10, EvalWindow::default(), StreamKey::new(4).child(rep)).unwrap().h_star;
        let step = |h: f64| g.iter().position(|v| *v == h).unwrap() as i64;
        within += usize::from((step(dom) - step(naive)).abs() <= 1);
    }
    assert!(within >= 8, "{within}/10 within one grid step");
}

#[test]
fn shift_pushes_domain_cv_toward_larger_h() {
    // the ordering is only reliable once n * tau per domain is well above 1
    let g = grid();
    let lpe = LpeConfig::local_linear(0.1).unwrap();
    let reps = 40u64;
    let mut ordered = 0;
    for rep in 0..reps {
        let key = StreamKey::new(77).child(rep);
        let h0 = domain_cv_bandwidth(&suite_with_buckets(0.0, 50, 6, 1500, key), &g, &lpe, EvalWindow::default());
        let h1 = domain_cv_bandwidth(&suite_with_buckets(0.01, 50, 6, 1500, key), &g, &lpe, EvalWindow::default());
        ordered += usize::from(h1.unwrap().h_star >= h0.unwrap().h_star);
    }
    assert!(ordered as f64 >= 0.9 * reps as f64, "tau ordering held in {ordered}/{reps}");
}

#[test]
fn naive_cv_undersmooths_under_shift() {
    let g = grid();
    let lpe = LpeConfig::local_linear(0.1).unwrap();
    let reps = 40u64;
    let mut naive_smaller = 0;
    for rep in 0..reps {
        let key = StreamKey::new(5).child(rep);
        let d = suite(0.05, 10, 150, key);
        let dom = domain_cv_bandwidth(&d, &g, &lpe, EvalWindow::default()).unwrap().h_star;
        let naive = naive_cv_bandwidth(&Dataset::pooled(&d), &g, &lpe, 10, EvalWindow::default(), key.child(99))
            .unwrap()
            .h_star;
        naive_smaller += usize::from(naive <= dom);
    }
    assert!(naive_smaller as f64 >= 0.8 * reps as f64, "naive <= domain in {naive_smaller}/{reps}");
}

#[test]
fn domain_cv_score_is_unbiased_for_held_out_risk() {
    let h = 0.1;
    let lpe = LpeConfig::local_linear(h).unwrap();
    let (j, n) = (5u64, 200usize);
    let scores: Vec<f64> = (0..200u64)
        .map(|rep| {
            let d = suite(0.0, j, n, StreamKey::new(6).child(rep));
            domain_cv_bandwidth(&d, &[h], &lpe, EvalWindow::default()).unwrap().diagnostics[0].1
        })
        .collect();
    // brute force: train on (j-1)n fresh points, score fresh in-window test points
    let win = EvalWindow::default();
    let direct: Vec<f64> = (0..200u64)
        .map(|rep| {
            let train = Dataset::pooled(&suite(0.0, j - 1, n, StreamKey::new(7).child(rep)));
            let test = &suite(0.0, 1, n, StreamKey::new(8).child(rep))[0];
            let sq: Vec<f64> = test
                .xs
                .iter()
                .zip(&test.ys)
                .filter(|(x, _)| win.contains(**x))
                .map(|(x, y)| (y - fit_predict(&lpe, &train, *x).unwrap()).powi(2))
                .collect();
            stats::mean(&sq)
        })
        .collect();
    let (a, b) = (stats::mean(&scores), stats::mean(&direct));
    let se = (stats::std_error(&scores).powi(2) + stats::std_error(&direct).powi(2)).sqrt();
    assert!((a - b).abs() <= 3.0 * se, "cv {a} direct {b} se {se}");
}
