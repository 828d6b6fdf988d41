//! `compare` verb: replays a run's config through the quadrature oracle and
//! scores the Monte Carlo ensemble against ground truth.

use crate::config::{EstimatorCfg, ExperimentConfig, GridRadius, AutoTag};
use anyhow::{anyhow, bail, Context};
use ergolab::model::LyapunovSpec;
use ergolab::oracle::{GridSpec, InvariantOracle1D};
use ergolab::transform::ExpTransform;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub struct DeviationRow {
    pub estimator: String,
    pub oracle: f64,
    pub mc_value: f64,
    pub z_score: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn z_score(samples: &[f64], oracle: f64) -> (f64, f64) {
    let (mean, sd) = mean_sd(samples);
    let se = sd / (samples.len() as f64).sqrt();
    (mean, (mean - oracle) / se)
}

/// Final value per path from a checkpoint-series CSV: rows are grouped by
/// path and time-ordered, so the last row per key wins.
fn final_per_path(
    csv: &str,
    key_col: usize,
    value_col: usize,
    filter: Option<(usize, &str)>,
) -> anyhow::Result<Vec<f64>> {
    let mut finals: BTreeMap<u64, f64> = BTreeMap::new();
    for (lineno, line) in csv.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if let Some((c, want)) = filter {
            if cols.get(c).copied() != Some(want) {
                continue;
            }
        }
        let key: u64 = cols
            .get(key_col)
            .context("short row")?
            .parse()
            .with_context(|| format!("line {}: bad path id", lineno + 1))?;
        let value: f64 = cols
            .get(value_col)
            .context("short row")?
            .parse()
            .with_context(|| format!("line {}: bad value", lineno + 1))?;
        finals.insert(key, value);
    }
    Ok(finals.into_values().collect())
}

pub fn compare(run_dir: &Path, override_config: Option<&str>) -> anyhow::Result<i32> {
    let manifest_text = std::fs::read_to_string(run_dir.join("manifest.json"))
        .with_context(|| format!("reading {}/manifest.json", run_dir.display()))?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)?;
    let echoed = manifest
        .get("config")
        .context("manifest has no config echo")?;
    let cfg: ExperimentConfig = serde_json::from_value(echoed.clone())
        .context("re-parsing the echoed config")?;

    let ExperimentConfig::Sde(sde) = &cfg else {
        bail!("compare needs an SDE run (Birkhoff or martingale estimators)");
    };

    if let Some(text) = override_config {
        let other = crate::config::parse_config(text)?;
        let ExperimentConfig::Sde(other_sde) = &other else {
            bail!("override config is not an SDE experiment");
        };
        let a = serde_json::to_value(&sde.model)?;
        let b = serde_json::to_value(&other_sde.model)?;
        if a != b {
            bail!(
                "model mismatch between run ({a}) and override config ({b}); \
                 oracle values would not apply"
            );
        }
    }

    let wanted: Vec<&EstimatorCfg> = sde
        .estimators
        .iter()
        .filter(|e| matches!(e, EstimatorCfg::Birkhoff { .. } | EstimatorCfg::Martingale { .. }))
        .collect();

    let mut rows: Vec<DeviationRow> = Vec::new();

    if !wanted.is_empty() {
        let model = sde.model.build()?;
        if model.invariant.is_none() {
            bail!(
                "model `{}` has no invariant-measure ground truth; nothing to compare against",
                model.label
            );
        }
        let grid = GridSpec {
            radius: match sde.invariant.grid_radius {
                GridRadius::Named(AutoTag::Auto) => None,
                GridRadius::Fixed(r) => Some(r),
            },
            points: sde.invariant.points,
        };
        let oracle = InvariantOracle1D::for_model(&model, grid).map_err(|e| anyhow!("{e}"))?;

        for est in wanted {
            match est {
                EstimatorCfg::Birkhoff { phi } => {
                    let csv = std::fs::read_to_string(run_dir.join("birkhoff.csv"))
                        .context("run has a Birkhoff estimator but no birkhoff.csv")?;
                    let spec = phi.to_spec();
                    let lyap = LyapunovSpec::quadratic(0.5).map_err(|e| anyhow!("{e}"))?;
                    let func = spec.build(Some(&lyap)).map_err(|e| anyhow!("{e}"))?;
                    let truth = oracle.expectation(|x| func(x)).map_err(|e| anyhow!("{e}"))?;
                    let name = spec.name();
                    let finals = final_per_path(&csv, 0, 3, Some((2, name.as_str())))?;
                    if finals.is_empty() {
                        bail!("birkhoff.csv has no rows for observable {name}");
                    }
                    let (mean, z) = z_score(&finals, truth);
                    rows.push(DeviationRow {
                        estimator: format!("birkhoff[{name}]"),
                        oracle: truth,
                        mc_value: mean,
                        z_score: z,
                    });
                }
                EstimatorCfg::Martingale { delta } => {
                    let csv = std::fs::read_to_string(run_dir.join("martingale.csv"))
                        .context("run has a martingale estimator but no martingale.csv")?;
                    let lyap = LyapunovSpec::quadratic(*delta).map_err(|e| anyhow!("{e}"))?;
                    let tf = ExpTransform::new(&model, &lyap).map_err(|e| anyhow!("{e}"))?;
                    let truth = oracle
                        .expectation(|x| tf.bracket_rate(x))
                        .map_err(|e| anyhow!("{e}"))?;

                    let qv_rates = final_per_path(&csv, 0, 5, None)?;
                    let (qv_mean, qv_z) = z_score(&qv_rates, truth);
                    rows.push(DeviationRow {
                        estimator: format!("qv_over_t[delta={delta}]"),
                        oracle: truth,
                        mc_value: qv_mean,
                        z_score: qv_z,
                    });

                    let m_rates = final_per_path(&csv, 0, 4, None)?;
                    let (m_mean, m_z) = z_score(&m_rates, 0.0);
                    rows.push(DeviationRow {
                        estimator: "m_over_t".into(),
                        oracle: 0.0,
                        mc_value: m_mean,
                        z_score: m_z,
                    });
                }
                _ => unreachable!("filtered above"),
            }
        }
    }

    let mut csv = String::from("estimator,oracle,mc_value,z_score\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e}",
            r.estimator, r.oracle, r.mc_value, r.z_score
        );
    }
    std::fs::write(run_dir.join("deviation.csv"), &csv).context("writing deviation.csv")?;

    if rows.is_empty() {
        println!("no oracle-comparable estimators in this run; wrote empty deviation.csv");
    }
    for r in &rows {
        println!(
            "{:<28} oracle {:+.6e}  mc {:+.6e}  z {:+.2}",
            r.estimator, r.oracle, r.mc_value, r.z_score
        );
    }
    Ok(0)
}
