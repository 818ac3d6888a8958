//! TOML experiment configuration.
//!
//! Only `seed` is required. Every other block falls back to the defaults
//! below, and the fully resolved document is written next to the outputs.

use crate::bandwidth::EvalWindow;
use crate::kernel::{KernelKind, KernelSpec};
use crate::lpe::LpeConfig;
use crate::model::{BaselineConfig, RegressionFunction};
use crate::rup::{CorrelatedNoiseSpec, PartitionSpec, RupSpec, WeightLaw};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A rejected configuration, with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { path: path.into(), message: message.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub baseline: BaselineBlock,
    #[serde(default)]
    pub rup: RupBlock,
    #[serde(default)]
    pub lpe: LpeBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub kl: KlBlock,
    #[serde(default)]
    pub tau: TauBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineBlock {
    /// `zero`, `sin`, or `polynomial` (with `coeffs`).
    pub f: String,
    pub coeffs: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub n_grid: Vec<usize>,
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            f: "sin".into(),
            coeffs: vec![],
            sigma2: 1.0,
            n: 1000,
            n_grid: vec![500, 1000, 2000, 4000, 8000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RupBlock {
    /// `correlated-noise` or `partition`.
    pub model: String,
    pub b_x: usize,
    pub b_eps: usize,
    /// `exp` or `lognormal`.
    pub weight_law: String,
    /// Squared coefficient of variation for `lognormal` weights.
    pub weight_cv2: f64,
    pub delta2: f64,
    /// Sweep values of τ (correlated noise only; `δ² = τ · b_x`).
    pub tau_grid: Vec<f64>,
    /// Number of realizations drawn by `sample`.
    pub realizations: usize,
}

impl Default for RupBlock {
    fn default() -> Self {
        Self {
            model: "correlated-noise".into(),
            b_x: 50,
            b_eps: 50,
            weight_law: "exp".into(),
            weight_cv2: 1.0,
            delta2: 0.25,
            tau_grid: vec![0.0, 0.005, 0.02],
            realizations: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpeBlock {
    pub order: usize,
    pub kernel: String,
    pub h: f64,
    pub h_grid: Vec<f64>,
}

/// 24 points, geometric from 0.04 to 0.5.
pub fn default_h_grid() -> Vec<f64> {
    let (lo, hi, k) = (0.04f64, 0.5f64, 24);
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

impl Default for LpeBlock {
    fn default() -> Self {
        Self { order: 1, kernel: "epanechnikov".into(), h: 0.1, h_grid: default_h_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBlock {
    pub reps: usize,
    pub reps_xi: usize,
    pub reps_data: usize,
    pub eval_points: usize,
    pub eval_lo: f64,
    pub eval_hi: f64,
}

impl Default for McBlock {
    fn default() -> Self {
        Self { reps: 100, reps_xi: 200, reps_data: 50, eval_points: 101, eval_lo: 0.05, eval_hi: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub svg: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: "out".into(), svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlBlock {
    pub n_grid: Vec<usize>,
    /// `per-point` (`B_X = n`) or `fixed` (`B_X = b_x`).
    pub bucket_rule: String,
    pub b_x: usize,
    pub delta2: f64,
    pub sigma2: f64,
    pub beta: f64,
    pub holder_const: f64,
    pub x0: f64,
    pub h_scale: f64,
    pub reps: usize,
}

impl Default for KlBlock {
    fn default() -> Self {
        Self {
            n_grid: vec![200, 400, 800, 1600],
            bucket_rule: "per-point".into(),
            b_x: 10,
            delta2: 1.0,
            sigma2: 1.0,
            beta: 1.0,
            holder_const: 1.0,
            x0: 0.5,
            h_scale: 1.0,
            reps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauBlock {
    /// Simulated realizations when no input files are given.
    pub realizations: usize,
    /// Dataset CSVs to read instead of simulating.
    pub inputs: Vec<String>,
    /// Also subtract `Var(f(X)) / n` (known `f` only).
    pub design_correction: bool,
    /// Smoothness used for the implied oracle bandwidth.
    pub beta: f64,
}

impl Default for TauBlock {
    fn default() -> Self {
        Self { realizations: 500, inputs: vec![], design_correction: false, beta: 2.0 }
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if !(v > 0.0 && v.is_finite()) {
        return err(path, format!("must be finite and > 0, got {v}"));
    }
    Ok(())
}

fn nonneg(path: &str, v: f64) -> Result<(), ConfigError> {
    if !(v >= 0.0 && v.is_finite()) {
        return err(path, format!("must be finite and >= 0, got {v}"));
    }
    Ok(())
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v < min {
        return err(path, format!("must be >= {min}, got {v}"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            baseline: Default::default(),
            rup: Default::default(),
            lpe: Default::default(),
            mc: Default::default(),
            output: Default::default(),
            kl: Default::default(),
            tau: Default::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError {
            path: String::new(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.baseline;
        match b.f.as_str() {
            "zero" | "sin" | "sine" => {}
            "polynomial" => {
                if b.coeffs.is_empty() {
                    return err("baseline.coeffs", "required when baseline.f = \"polynomial\"");
                }
            }
            other => return err("baseline.f", format!("unknown function `{other}` (zero, sin, polynomial)")),
        }
        if b.coeffs.iter().any(|c| !c.is_finite()) {
            return err("baseline.coeffs", "must be finite");
        }
        positive("baseline.sigma2", b.sigma2)?;
        at_least("baseline.n", b.n, 1)?;
        if b.n_grid.is_empty() {
            return err("baseline.n_grid", "must be nonempty");
        }
        if let Some(i) = b.n_grid.iter().position(|&n| n == 0) {
            return err(&format!("baseline.n_grid[{i}]"), "must be >= 1");
        }

        let r = &self.rup;
        at_least("rup.b_x", r.b_x, 1)?;
        at_least("rup.realizations", r.realizations, 1)?;
        nonneg("rup.delta2", r.delta2)?;
        for (i, &t) in r.tau_grid.iter().enumerate() {
            nonneg(&format!("rup.tau_grid[{i}]"), t)?;
        }
        match r.model.as_str() {
            "correlated-noise" => {}
            "partition" => {
                at_least("rup.b_eps", r.b_eps, 2)?;
                match r.weight_law.as_str() {
                    "exp" => {}
                    "lognormal" => positive("rup.weight_cv2", r.weight_cv2)?,
                    other => return err("rup.weight_law", format!("unknown law `{other}` (exp, lognormal)")),
                }
                if !r.tau_grid.is_empty() {
                    return err(
                        "rup.tau_grid",
                        "must be empty for the partition model (its strength follows from b_x, b_eps and the weight law)",
                    );
                }
            }
            other => return err("rup.model", format!("unknown model `{other}` (correlated-noise, partition)")),
        }

        let l = &self.lpe;
        if l.order > crate::lpe::MAX_ORDER {
            return err("lpe.order", format!("must be <= {}", crate::lpe::MAX_ORDER));
        }
        if l.kernel.parse::<KernelKind>().is_err() {
            return err("lpe.kernel", format!("unknown kernel `{}`", l.kernel));
        }
        if !(l.h > 0.0 && l.h <= 1.0) {
            return err("lpe.h", format!("must lie in (0, 1], got {}", l.h));
        }
        if l.h_grid.is_empty() {
            return err("lpe.h_grid", "must be nonempty");
        }
        for (i, &h) in l.h_grid.iter().enumerate() {
            if !(h > 0.0 && h <= 1.0) {
                return err(&format!("lpe.h_grid[{i}]"), format!("must lie in (0, 1], got {h}"));
            }
        }

        let m = &self.mc;
        at_least("mc.reps", m.reps, 2)?;
        at_least("mc.reps_xi", m.reps_xi, 2)?;
        at_least("mc.reps_data", m.reps_data, 2)?;
        at_least("mc.eval_points", m.eval_points, 1)?;
        if !(0.0 <= m.eval_lo && m.eval_lo <= m.eval_hi && m.eval_hi <= 1.0) {
            return err("mc.eval_lo", "need 0 <= eval_lo <= eval_hi <= 1");
        }

        if self.output.dir.is_empty() {
            return err("output.dir", "must be nonempty");
        }

        let k = &self.kl;
        if k.n_grid.is_empty() {
            return err("kl.n_grid", "must be nonempty");
        }
        if let Some(i) = k.n_grid.iter().position(|&n| n == 0) {
            return err(&format!("kl.n_grid[{i}]"), "must be >= 1");
        }
        match k.bucket_rule.as_str() {
            "per-point" => {}
            "fixed" => at_least("kl.b_x", k.b_x, 1)?,
            other => return err("kl.bucket_rule", format!("unknown rule `{other}` (per-point, fixed)")),
        }
        nonneg("kl.delta2", k.delta2)?;
        positive("kl.sigma2", k.sigma2)?;
        positive("kl.beta", k.beta)?;
        positive("kl.holder_const", k.holder_const)?;
        positive("kl.h_scale", k.h_scale)?;
        if !(0.0..=1.0).contains(&k.x0) {
            return err("kl.x0", "must lie in [0, 1]");
        }
        at_least("kl.reps", k.reps, 2)?;

        let t = &self.tau;
        if t.inputs.is_empty() {
            at_least("tau.realizations", t.realizations, 2)?;
        }
        positive("tau.beta", t.beta)?;
        Ok(())
    }

    pub fn regression_function(&self) -> RegressionFunction {
        match self.baseline.f.as_str() {
            "zero" => RegressionFunction::zero(),
            "polynomial" => RegressionFunction::polynomial(self.baseline.coeffs.clone()),
            _ => RegressionFunction::sine(),
        }
    }

    pub fn baseline_config(&self, n: usize) -> crate::error::Result<BaselineConfig> {
        BaselineConfig::new(self.regression_function(), self.baseline.sigma2, n)
    }

    pub fn lpe_config(&self) -> crate::error::Result<LpeConfig> {
        let kind: KernelKind = self.lpe.kernel.parse().expect("validated kernel");
        LpeConfig::new(self.lpe.order, self.lpe.h, KernelSpec::new(kind))
    }

    pub fn eval_window(&self) -> EvalWindow {
        EvalWindow { lo: self.mc.eval_lo, hi: self.mc.eval_hi }
    }

    pub fn eval_grid(&self) -> Vec<f64> {
        self.eval_window().grid(self.mc.eval_points)
    }

    /// The single spec described by the `rup` block, with sample size `n`.
    pub fn rup_spec(&self, n: usize) -> crate::error::Result<RupSpec> {
        let base = self.baseline_config(n)?;
        let r = &self.rup;
        Ok(match r.model.as_str() {
            "partition" => {
                let law = match r.weight_law.as_str() {
                    "lognormal" => WeightLaw::lognormal_with_cv2(r.weight_cv2)?,
                    _ => WeightLaw::Exp,
                };
                PartitionSpec::new(r.b_x, r.b_eps, law, base)?.into()
            }
            _ => CorrelatedNoiseSpec::new(r.b_x, r.delta2, base)?.into(),
        })
    }

    /// One spec per entry of `rup.tau_grid` (`δ² = τ · b_x`), or the single
    /// configured spec when the grid is empty.
    pub fn rup_family(&self, n: usize) -> crate::error::Result<Vec<RupSpec>> {
        if self.rup.tau_grid.is_empty() {
            return Ok(vec![self.rup_spec(n)?]);
        }
        let base = self.baseline_config(n)?;
        self.rup
            .tau_grid
            .iter()
            .map(|&tau| Ok(CorrelatedNoiseSpec::new(self.rup.b_x, tau * self.rup.b_x as f64, base.clone())?.into()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        let e = ExperimentConfig::parse("[baseline]\nn = 5\n").unwrap_err();
        assert!(e.message.contains("seed"), "{e}");
    }

    #[test]
    fn field_paths_in_errors() {
        let e = ExperimentConfig::parse("seed = 1\n[baseline]\nsigma2 = -1.0\n").unwrap_err();
        assert_eq!(e.path, "baseline.sigma2");
        let e = ExperimentConfig::parse("seed = 1\n[lpe]\nh_grid = [0.1, 2.0]\n").unwrap_err();
        assert_eq!(e.path, "lpe.h_grid[1]");
        let e = ExperimentConfig::parse("seed = 1\n[rup]\nmodel = \"partition\"\n").unwrap_err();
        assert_eq!(e.path, "rup.tau_grid");
        let e = ExperimentConfig::parse("seed = 1\n[mc]\nrepz = 3\n").unwrap_err();
        assert!(e.message.contains("repz"));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ExperimentConfig::parse("seed = 7\n[baseline]\nf = \"zero\"\nn = 5\n").unwrap();
        let once = cfg.to_toml();
        let again = ExperimentConfig::parse(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), once);
    }

    #[test]
    fn tau_family_scales_delta2() {
        let cfg = ExperimentConfig::with_seed(1);
        let fam = cfg.rup_family(100).unwrap();
        assert_eq!(fam.len(), 3);
        let taus: Vec<f64> = fam.iter().map(|s| crate::rup::perturbation_strength(s).tau).collect();
        assert!((taus[1] - 0.005).abs() < 1e-15 && (taus[2] - 0.02).abs() < 1e-15);
    }
}
