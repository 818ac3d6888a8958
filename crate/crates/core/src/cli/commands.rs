use super::config::ExperimentConfig;
use super::svg::{line_chart, ChartSpec};
use crate::bandwidth::{
    effective_sample_size, oracle_bandwidth, pooled_within_bucket_variance, realization_means, tau_components,
};
use crate::error::{Error, Result};
use crate::kl::{kl_mc, lemma_construction, KlRow};
use crate::model::{bucket_of, Dataset};
use crate::risk::{mise_mc, optimal_bandwidth_curve, HStarRow, MiseCurve};
use crate::rng::StreamKey;
use crate::rup::{draw_perturbation, sample_perturbed, RealizationRecord};
use crate::stats;
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

// top-level stream labels, one per subcommand
const TAG_SAMPLE: u64 = 1;
const TAG_MISE: u64 = 2;
const TAG_HSTAR: u64 = 3;
const TAG_KL: u64 = 4;
const TAG_TAU: u64 = 5;

/// Files (name, contents) produced by one subcommand, plus warnings.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub const DATASET_HEADER: &str = "x,y,bucket_id,realization_id";

/// Dataset rows in the `x,y,bucket_id,realization_id` schema (no header).
pub fn dataset_rows(d: &Dataset, out: &mut String) {
    for i in 0..d.len() {
        let b = d.bucket_ids.as_ref().map(|b| b[i].to_string()).unwrap_or_default();
        let r = d.realization_id.map(|r| r.to_string()).unwrap_or_default();
        out.push_str(&format!("{:.16e},{:.16e},{b},{r}\n", d.xs[i], d.ys[i]));
    }
}

#[derive(Debug, Deserialize)]
struct DatasetRow {
    x: f64,
    y: f64,
    bucket_id: Option<usize>,
    realization_id: Option<u64>,
}

/// Read dataset CSVs and group rows by `realization_id`. Rows without an
/// id take the index of their file. Missing bucket ids are computed for
/// `b_x` buckets.
pub fn read_datasets(paths: &[impl AsRef<Path>], b_x: usize) -> Result<Vec<Dataset>> {
    // realization id -> (xs, ys, bucket ids)
    type Columns = (Vec<f64>, Vec<f64>, Vec<usize>);
    let mut groups: BTreeMap<u64, Columns> = BTreeMap::new();
    for (file_idx, p) in paths.iter().enumerate() {
        let p = p.as_ref();
        let mut rdr = csv::Reader::from_path(p).map_err(|e| csv_error(p, e))?;
        for row in rdr.deserialize::<DatasetRow>() {
            let row = row.map_err(|e| csv_error(p, e))?;
            if !(0.0..=1.0).contains(&row.x) {
                return Err(Error::OutOfDomain(row.x));
            }
            let g = groups.entry(row.realization_id.unwrap_or(file_idx as u64)).or_default();
            g.0.push(row.x);
            g.1.push(row.y);
            g.2.push(row.bucket_id.unwrap_or_else(|| bucket_of(row.x, b_x)));
        }
    }
    Ok(groups
        .into_iter()
        .map(|(id, (xs, ys, b))| Dataset { xs, ys, bucket_ids: Some(b), realization_id: Some(id) })
        .collect())
}

fn csv_error(p: &Path, e: csv::Error) -> Error {
    Error::io(p, std::io::Error::other(e.to_string()))
}

pub fn sample(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let spec = cfg.rup_spec(cfg.baseline.n)?;
    let root = StreamKey::new(cfg.seed).child(TAG_SAMPLE);
    let draws: Vec<(RealizationRecord, Dataset)> = (0..cfg.rup.realizations as u64)
        .into_par_iter()
        .map(|j| {
            let k = root.child(j);
            let xi = draw_perturbation(&spec, &mut k.child(0).stream())?.with_id(j);
            let data = sample_perturbed(&spec, &xi, cfg.baseline.n, &mut k.child(1).stream())?;
            Ok((RealizationRecord { spec: spec.clone(), realization: xi }, data))
        })
        .collect::<Result<_>>()?;
    let mut csv = format!("{DATASET_HEADER}\n");
    for (_, d) in &draws {
        dataset_rows(d, &mut csv);
    }
    let records: Vec<&RealizationRecord> = draws.iter().map(|(r, _)| r).collect();
    let json = serde_json::to_string_pretty(&records)? + "\n";
    Ok(Artifacts { files: vec![("dataset.csv".into(), csv), ("realization.json".into(), json)], warnings: vec![] })
}

pub fn mise_sweep(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let lpe = cfg.lpe_config()?;
    let eval = cfg.eval_grid();
    let key = StreamKey::new(cfg.seed).child(TAG_MISE);
    let curves: Vec<MiseCurve> = cfg
        .rup_family(cfg.baseline.n)?
        .iter()
        .map(|spec| mise_mc(spec, &lpe, &cfg.lpe.h_grid, &eval, cfg.mc.reps, key))
        .collect::<Result<_>>()?;
    let mut csv = format!("{}\n", MiseCurve::CSV_HEADER);
    let mut warnings = vec![];
    for c in &curves {
        for row in c.csv_rows() {
            csv.push_str(&row);
            csv.push('\n');
        }
        let bad: Vec<String> = c.rows.iter().filter(|r| !r.mise.is_finite()).map(|r| format!("{}", r.h)).collect();
        if !bad.is_empty() {
            warnings.push(format!("tau = {}: no local support somewhere on the grid for h in [{}]", c.tau, bad.join(", ")));
        }
        edge_warning(&mut warnings, &cfg.lpe.h_grid, c.argmin_h, &format!("tau = {}", c.tau));
    }
    let mut files = vec![];
    if cfg.output.svg {
        let svg = line_chart(
            &csv,
            &ChartSpec {
                title: "MISE versus bandwidth",
                x_col: "h",
                y_col: "mise",
                series_col: "tau",
                series_label: "tau",
                log_x: false,
                log_y: false,
            },
        )
        .map_err(Error::DegenerateInput)?;
        files.push(("fig4.svg".into(), svg));
    }
    files.insert(0, ("mise_curve.csv".into(), csv));
    Ok(Artifacts { files, warnings })
}

fn edge_warning(warnings: &mut Vec<String>, grid: &[f64], h: f64, what: &str) {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if grid.len() > 1 && (h == lo || h == hi) {
        warnings.push(format!("{what}: selected h = {h} lies on the edge of the bandwidth grid"));
    }
}

pub fn bandwidth_vs_n(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let lpe = cfg.lpe_config()?;
    let family = cfg.rup_family(cfg.baseline.n)?;
    let rows = optimal_bandwidth_curve(
        &family,
        &cfg.baseline.n_grid,
        &lpe,
        &cfg.lpe.h_grid,
        &cfg.eval_grid(),
        cfg.mc.reps,
        StreamKey::new(cfg.seed).child(TAG_HSTAR),
    )?;
    let mut csv = format!("{}\n", HStarRow::CSV_HEADER);
    let mut warnings = vec![];
    for r in &rows {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
        edge_warning(&mut warnings, &cfg.lpe.h_grid, r.h_star, &format!("n = {}, tau = {}", r.n, r.tau));
    }
    let mut files = vec![("hstar_vs_n.csv".to_string(), csv.clone())];
    if cfg.output.svg {
        let svg = line_chart(
            &csv,
            &ChartSpec {
                title: "Optimal bandwidth versus sample size",
                x_col: "n",
                y_col: "h_star",
                series_col: "tau",
                series_label: "tau",
                log_x: true,
                log_y: true,
            },
        )
        .map_err(Error::DegenerateInput)?;
        files.push(("fig5.svg".into(), svg));
    }
    Ok(Artifacts { files, warnings })
}

pub fn kl_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let k = &cfg.kl;
    let fixed = (k.bucket_rule == "fixed").then_some(k.b_x);
    let rows = kl_mc(
        &k.n_grid,
        |n| fixed.unwrap_or(n),
        k.delta2,
        k.sigma2,
        lemma_construction(k.x0, k.beta, k.holder_const, k.h_scale),
        k.reps,
        StreamKey::new(cfg.seed).child(TAG_KL),
    )?;
    let mut csv = format!("{}\n", KlRow::CSV_HEADER);
    let mut warnings = vec![];
    for r in &rows {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
        if r.regime_warning {
            warnings.push(format!(
                "n = {}: n/B_X = {} has more than doubled across the grid; the ratio need not stabilize",
                r.n,
                r.n as f64 / r.b_x as f64
            ));
        }
    }
    Ok(Artifacts { files: vec![("kl_scaling.csv".into(), csv)], warnings })
}

pub const TAU_HEADER: &str = "tau_hat,var_theta,sampling_term,design_term,sigma2_hat,n_per,realizations,n_eff,h_oracle";

pub fn estimate_tau(cfg: &ExperimentConfig, cli_inputs: &[std::path::PathBuf]) -> Result<Artifacts> {
    let mut inputs: Vec<std::path::PathBuf> = cfg.tau.inputs.iter().map(Into::into).collect();
    inputs.extend(cli_inputs.iter().cloned());
    let datasets = if inputs.is_empty() {
        let spec = cfg.rup_spec(cfg.baseline.n)?;
        let root = StreamKey::new(cfg.seed).child(TAG_TAU);
        (0..cfg.tau.realizations as u64)
            .into_par_iter()
            .map(|j| {
                let k = root.child(j);
                let xi = draw_perturbation(&spec, &mut k.child(0).stream())?.with_id(j);
                sample_perturbed(&spec, &xi, cfg.baseline.n, &mut k.child(1).stream())
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        read_datasets(&inputs, cfg.rup.b_x)?
    };
    if datasets.len() < 2 {
        return Err(Error::NeedsMultipleDomains { found: datasets.len() });
    }
    let theta = realization_means(&datasets);
    let sizes: Vec<f64> = datasets.iter().map(|d| d.len() as f64).collect();
    let n_per = stats::mean(&sizes).round().max(1.0) as usize;
    let sigma2_hat = pooled_within_bucket_variance(&datasets)?;
    let design_var = if cfg.tau.design_correction { design_variance(cfg) } else { 0.0 };
    let est = tau_components(&theta, n_per, sigma2_hat, design_var)?;
    let n_eff = effective_sample_size(n_per, est.tau_hat)?.n_eff;
    let h = oracle_bandwidth(n_per, est.tau_hat, cfg.tau.beta, 1.0)?;
    let report = format!(
        "{TAU_HEADER}\n{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e}\n",
        est.tau_hat, est.var_theta, est.sampling_term, est.design_term, est.sigma2_hat, n_per, est.realizations, n_eff, h
    );
    let mut theta_csv = String::from("realization_id,n,theta\n");
    for (d, t) in datasets.iter().zip(&theta) {
        theta_csv.push_str(&format!("{},{},{:.16e}\n", d.realization_id.unwrap_or_default(), d.len(), t));
    }
    Ok(Artifacts {
        files: vec![("tau_estimate.csv".into(), report), ("theta.csv".into(), theta_csv)],
        warnings: vec![],
    })
}

/// `Var(f(X))` for `X ~ Unif[0,1]` and the configured `f`.
fn design_variance(cfg: &ExperimentConfig) -> f64 {
    let f = cfg.regression_function();
    let m = crate::kernel::integrate(|x| f.eval(x), 0.0, 1.0, 5000);
    let m2 = crate::kernel::integrate(|x| f.eval(x).powi(2), 0.0, 1.0, 5000);
    (m2 - m * m).max(0.0)
}
