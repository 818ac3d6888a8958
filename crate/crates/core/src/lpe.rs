//! Local polynomial estimation, LP(ℓ).
//!
//! The fit at `x0` is linear in the responses, `f̂(x0) = Σ_k W_k(x0) Y_k`.
//! The equivalent-kernel weights come from the weighted least-squares
//! system in the rescaled coordinate `u = (x − x0)/h`:
//!
//! ```text
//! G = Σ_k K(u_k) U_k U_kᵀ,   U_k = (1, u_k, …, u_k^ℓ)
//! W_k = K(u_k) · e₁ᵀ G⁻¹ U_k
//! ```
//!
//! When the normalized Gram matrix `G / Σ K(u_k)` has smallest eigenvalue
//! below `1e-10`, a ridge `ridge · trace(G)/(ℓ+1)` is added and the
//! result is flagged `degenerate`.
//!
//! [`SortedDesign`] sorts the design once and restricts each fit to the
//! kernel window, which is what the Monte Carlo drivers use.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::Dataset;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 5;
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpeConfig {
    pub order: usize,
    pub bandwidth: f64,
    pub kernel: KernelSpec,
    /// Relative ridge used only for degenerate local designs.
    pub ridge: f64,
}

impl LpeConfig {
    pub fn new(order: usize, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        let cfg = Self { order, bandwidth, kernel, ridge: 1e-8 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// LP(1) with the Epanechnikov kernel.
    pub fn local_linear(bandwidth: f64) -> Result<Self> {
        Self::new(1, bandwidth, KernelSpec::epanechnikov())
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        let cfg = Self { bandwidth, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order > MAX_ORDER {
            return Err(Error::invalid("order", format!("must be <= {MAX_ORDER}, got {}", self.order)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(Error::invalid("bandwidth", format!("must lie in (0, 1], got {}", self.bandwidth)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid("ridge", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Half-width of the window in `x` units.
    pub fn window(&self) -> f64 {
        self.bandwidth * self.kernel.radius()
    }
}

/// Equivalent-kernel weights at one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub query: f64,
    pub degenerate: bool,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn apply(&self, ys: &[f64]) -> f64 {
        self.weights.iter().zip(ys).map(|(w, y)| w * y).sum()
    }
}

/// Coefficients `a = G⁻¹ e₁` of the local system, so that
/// `W_k = K(u_k) Σ_p a_p u_k^p`.
#[derive(Debug, Clone, Copy)]
struct LocalSolution {
    coef: [f64; MAX_ORDER + 1],
    degenerate: bool,
}

impl LocalSolution {
    #[inline]
    fn weight(&self, order: usize, u: f64, k: f64) -> f64 {
        let mut acc = 0.0;
        for p in (0..=order).rev() {
            acc = acc * u + self.coef[p];
        }
        k * acc
    }
}

/// Moments `S_p = Σ K(u_k) u_k^p` for `p ≤ 2ℓ`, in visiting order.
#[derive(Debug, Clone, Copy)]
struct Moments {
    s: [f64; 2 * MAX_ORDER + 1],
}

impl Moments {
    fn new() -> Self {
        Self { s: [0.0; 2 * MAX_ORDER + 1] }
    }

    #[inline]
    fn add(&mut self, order: usize, u: f64, k: f64) {
        let mut t = k;
        for p in 0..=2 * order {
            self.s[p] += t;
            t *= u;
        }
    }
}

fn solve_local(cfg: &LpeConfig, m: &Moments, x0: f64) -> Result<LocalSolution> {
    let l = cfg.order;
    let mass = m.s[0];
    if !(mass > 0.0) {
        return Err(Error::NoLocalSupport { x0, bandwidth: cfg.bandwidth });
    }
    let mut coef = [0.0; MAX_ORDER + 1];
    if l == 0 {
        coef[0] = 1.0 / mass;
        return Ok(LocalSolution { coef, degenerate: false });
    }
    let dim = l + 1;
    let mut gram = DMatrix::from_fn(dim, dim, |i, j| m.s[i + j]);
    let lambda_min = SymmetricEigen::new(gram.clone() / mass)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let degenerate = !(lambda_min >= EIGEN_FLOOR);
    if degenerate {
        let ridge = cfg.ridge * gram.trace() / dim as f64;
        for i in 0..dim {
            gram[(i, i)] += ridge;
        }
    }
    let mut e1 = DVector::zeros(dim);
    e1[0] = 1.0;
    let a = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&e1),
        None => gram
            .lu()
            .solve(&e1)
            .ok_or_else(|| Error::DegenerateInput(format!("singular local system at x0 = {x0}")))?,
    };
    coef[..dim].copy_from_slice(a.as_slice());
    Ok(LocalSolution { coef, degenerate })
}

/// `(u, K(u))`, with `K = 0` exactly whenever `|x − x0|` exceeds the window.
#[inline]
fn kernel_at(config: &LpeConfig, x: f64, x0: f64) -> (f64, f64) {
    let u = (x - x0) / config.bandwidth;
    if (x - x0).abs() <= config.window() {
        (u, config.kernel.eval(u))
    } else {
        (u, 0.0)
    }
}

fn check_query(x0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::OutOfDomain(x0));
    }
    Ok(())
}

/// Equivalent-kernel weights of an LP(ℓ) fit at `x0`, one per design point
/// in the order given.
pub fn equivalent_kernel_weights(config: &LpeConfig, xs: &[f64], x0: f64) -> Result<WeightVector> {
    config.validate()?;
    check_query(x0)?;
    if xs.is_empty() {
        return Err(Error::DegenerateInput("empty design".into()));
    }
    let mut moments = Moments::new();
    let local: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            let (u, k) = kernel_at(config, x, x0);
            if k > 0.0 {
                moments.add(config.order, u, k);
            }
            (u, k)
        })
        .collect();
    let sol = solve_local(config, &moments, x0)?;
    let weights = local
        .iter()
        .map(|&(u, k)| if k > 0.0 { sol.weight(config.order, u, k) } else { 0.0 })
        .collect();
    Ok(WeightVector { weights, query: x0, degenerate: sol.degenerate })
}

/// `Σ_k W_k(x0) y_k`.
pub fn fit_predict(config: &LpeConfig, data: &Dataset, x0: f64) -> Result<f64> {
    config.validate()?;
    check_query(x0)?;
    SortedDesign::new(&data.xs, &data.ys)?.predict(config, x0)
}

/// Vectorized [`fit_predict`]. Points without local support yield `None`.
pub fn predict_grid(config: &LpeConfig, data: &Dataset, grid: &[f64]) -> Result<Vec<Option<f64>>> {
    config.validate()?;
    if grid.is_empty() {
        return Ok(vec![]);
    }
    let design = SortedDesign::new(&data.xs, &data.ys)?;
    grid.iter()
        .map(|&x0| {
            check_query(x0)?;
            match design.predict(config, x0) {
                Ok(v) => Ok(Some(v)),
                Err(Error::NoLocalSupport { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// A design sorted by `x` with responses carried along.
#[derive(Debug, Clone)]
pub struct SortedDesign {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `order[i]` is the original index of sorted position `i`.
    order: Vec<usize>,
}

impl SortedDesign {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DegenerateInput("xs and ys differ in length".into()));
        }
        if xs.is_empty() {
            return Err(Error::DegenerateInput("empty design".into()));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
        Ok(Self {
            xs: order.iter().map(|&i| xs[i]).collect(),
            ys: order.iter().map(|&i| ys[i]).collect(),
            order,
        })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        Self::new(&data.xs, &data.ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn window(&self, config: &LpeConfig, x0: f64) -> std::ops::Range<usize> {
        // a superset of the window; membership is decided by kernel_at
        let half = config.window() * (1.0 + 1e-12) + 1e-15;
        let lo = self.xs.partition_point(|&x| x < x0 - half);
        let hi = self.xs.partition_point(|&x| x <= x0 + half);
        lo..hi
    }

    fn solve(&self, config: &LpeConfig, x0: f64) -> Result<(std::ops::Range<usize>, LocalSolution)> {
        let range = self.window(config, x0);
        let mut moments = Moments::new();
        for &x in &self.xs[range.clone()] {
            let (u, k) = kernel_at(config, x, x0);
            if k > 0.0 {
                moments.add(config.order, u, k);
            }
        }
        Ok((range, solve_local(config, &moments, x0)?))
    }

    /// Fitted value at `x0`.
    pub fn predict(&self, config: &LpeConfig, x0: f64) -> Result<f64> {
        let (range, sol) = self.solve(config, x0)?;
        let mut acc = 0.0;
        for i in range {
            let (u, k) = kernel_at(config, self.xs[i], x0);
            if k > 0.0 {
                acc += sol.weight(config.order, u, k) * self.ys[i];
            }
        }
        Ok(acc)
    }

    /// Full weight vector in the original (unsorted) order.
    pub fn weights(&self, config: &LpeConfig, x0: f64) -> Result<WeightVector> {
        let (range, sol) = self.solve(config, x0)?;
        let mut weights = vec![0.0; self.len()];
        for i in range {
            let (u, k) = kernel_at(config, self.xs[i], x0);
            if k > 0.0 {
                weights[self.order[i]] = sol.weight(config.order, u, k);
            }
        }
        Ok(WeightVector { weights, query: x0, degenerate: sol.degenerate })
    }

    /// Nonzero weights as `(original index, W_k)` pairs.
    pub fn sparse_weights(&self, config: &LpeConfig, x0: f64) -> Result<Vec<(usize, f64)>> {
        let (range, sol) = self.solve(config, x0)?;
        Ok(range
            .filter_map(|i| {
                let (u, k) = kernel_at(config, self.xs[i], x0);
                (k > 0.0).then(|| (self.order[i], sol.weight(config.order, u, k)))
            })
            .collect())
    }

    /// Predictions on `grid`; `None` where the window is empty.
    pub fn predict_many(&self, config: &LpeConfig, grid: &[f64]) -> Vec<Option<f64>> {
        grid.iter().map(|&x0| self.predict(config, x0).ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;

    fn cfg(order: usize, h: f64, kind: KernelKind) -> LpeConfig {
        LpeConfig::new(order, h, KernelSpec::new(kind)).unwrap()
    }

    #[test]
    fn flat_kernel_local_average() {
        let c = cfg(0, 0.1, KernelKind::Uniform);
        let w = equivalent_kernel_weights(&c, &[0.45, 0.5, 0.55], 0.5).unwrap();
        for v in &w.weights {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nadaraya_watson_closed_form() {
        let c = cfg(0, 0.1, KernelKind::Epanechnikov);
        let w = equivalent_kernel_weights(&c, &[0.45, 0.50, 0.60], 0.5).unwrap();
        assert!((w.weights[0] - 3.0 / 7.0).abs() < 1e-12);
        assert!((w.weights[1] - 4.0 / 7.0).abs() < 1e-12);
        // |x − x0| = h up to rounding: K is zero there
        assert!(w.weights[2].abs() < 1e-12);
        let w = equivalent_kernel_weights(&c, &[0.45, 0.50, 0.6001], 0.5).unwrap();
        assert_eq!(w.weights[2], 0.0);
    }

    #[test]
    fn symmetric_pair_local_linear() {
        let c = cfg(1, 0.1, KernelKind::Epanechnikov);
        let w = equivalent_kernel_weights(&c, &[0.46, 0.54], 0.5).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-12 && (w.weights[1] - 0.5).abs() < 1e-12);
        assert!(!w.degenerate);
    }

    #[test]
    fn single_point_local_linear_is_flagged() {
        let c = cfg(1, 0.1, KernelKind::Epanechnikov);
        let w = equivalent_kernel_weights(&c, &[0.52, 0.9], 0.5).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.weights[1], 0.0);
    }

    #[test]
    fn no_support_is_an_error() {
        let c = cfg(1, 0.05, KernelKind::Epanechnikov);
        assert!(matches!(
            equivalent_kernel_weights(&c, &[0.1, 0.9], 0.5),
            Err(Error::NoLocalSupport { .. })
        ));
        let d = Dataset::new(vec![0.1, 0.9], vec![0.0, 0.0]).unwrap();
        assert_eq!(predict_grid(&c, &d, &[0.5, 0.1]).unwrap()[0], None);
    }

    #[test]
    fn config_validation() {
        assert!(LpeConfig::new(6, 0.1, KernelSpec::default()).is_err());
        assert!(LpeConfig::new(1, 0.0, KernelSpec::default()).is_err());
        assert!(LpeConfig::new(1, 1.5, KernelSpec::default()).is_err());
    }

    #[test]
    fn constant_responses() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let d = Dataset::new(xs, vec![2.5; 50]).unwrap();
        for order in 0..=3 {
            let c = cfg(order, 0.2, KernelKind::Epanechnikov);
            assert!((fit_predict(&c, &d, 0.37).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sorted_and_scan_paths_agree() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 7919) % 200) as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin()).collect();
        let c = cfg(2, 0.15, KernelKind::Triangular);
        let sd = SortedDesign::new(&xs, &ys).unwrap();
        for x0 in [0.0, 0.3, 0.77, 1.0] {
            let w = equivalent_kernel_weights(&c, &xs, x0).unwrap();
            let w2 = sd.weights(&c, x0).unwrap();
            for (a, b) in w.weights.iter().zip(&w2.weights) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((w.apply(&ys) - sd.predict(&c, x0).unwrap()).abs() < 1e-12);
            let sparse = sd.sparse_weights(&c, x0).unwrap();
            let s: f64 = sparse.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }
}
