//! Ensemble execution and report emission.
//!
//! Paths are independent work units fanned out over a rayon pool; results
//! are collected in path order and written by a single writer, so output
//! bytes never depend on the worker count.

use crate::config::{
    EstimatorCfg, ExperimentConfig, ResolvedSde, SllnExperiment, SllnFamily, X0Cfg,
};
use anyhow::{bail, Context};
use ergolab::ergodic::{
    envelope_over_path, lil_ratio, EnvelopeRow, EnvelopeTracker, Gauge, BirkhoffTracker,
    LIL_REPORT_FLOOR,
};
use ergolab::model::LyapunovSpec;
use ergolab::rng::Driver;
use ergolab::schedule::geometric_times;
use ergolab::simulate::{exact_ou_path, integrate, Scheme, StepObserver};
use ergolab::slln::{mz_conjecture_continuous, mz_scaled_sums, ou_functional_sequence, pareto_symmetric};
use ergolab::transform::{ExpTransform, MartingaleTracker};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Substream tag reserving an increment-independent counter space for the
/// stationary initial draw.
const INIT_TAG: u64 = 0x1217;

struct MartingaleRow {
    t: f64,
    m: f64,
    qv: f64,
}

#[derive(Default)]
struct PathReport {
    path_id: u64,
    blowup: bool,
    steps: u64,
    envelope: Vec<EnvelopeRow>,
    martingale: Vec<MartingaleRow>,
    birkhoff: Vec<(f64, f64)>,
    birkhoff_phi: String,
}

/// Snapshots the martingale decomposition at checkpoints.
struct MartingaleReporter {
    tracker: MartingaleTracker,
    rows: Vec<MartingaleRow>,
}

impl StepObserver for MartingaleReporter {
    fn on_step(&mut self, t: f64, x: &[f64], x_next: &[f64], dw: &[f64], dt: f64) {
        self.tracker.on_step(t, x, x_next, dw, dt);
    }
    fn on_checkpoint(&mut self, _index: usize, t: f64, _x: &[f64]) {
        self.rows.push(MartingaleRow {
            t,
            m: self.tracker.m,
            qv: self.tracker.qv,
        });
    }
}

struct Fanout<'a>(Vec<&'a mut dyn StepObserver>);

impl StepObserver for Fanout<'_> {
    fn on_step(&mut self, t: f64, x: &[f64], x_next: &[f64], dw: &[f64], dt: f64) {
        for obs in &mut self.0 {
            obs.on_step(t, x, x_next, dw, dt);
        }
    }
    fn on_checkpoint(&mut self, index: usize, t: f64, x: &[f64]) {
        for obs in &mut self.0 {
            obs.on_checkpoint(index, t, x);
        }
    }
}

fn run_one_path(resolved: &ResolvedSde, path_id: u64) -> anyhow::Result<PathReport> {
    let driver = Driver::new(resolved.master_seed, path_id);
    let mut report = PathReport {
        path_id,
        ..Default::default()
    };

    if resolved.scheme == Scheme::ExactOu {
        let ou = resolved
            .model
            .exact_ou
            .as_ref()
            .context("exact-ou scheme without OU parameters")?;
        let (env_cfg,) = match resolved.estimators.as_slice() {
            [EstimatorCfg::Envelope {
                gauge,
                delta,
                t_min,
                oversample_ratio,
            }] => ((gauge, delta, t_min, oversample_ratio),),
            _ => bail!("exact-ou runs support exactly one envelope estimator"),
        };
        let (gauge, delta, t_min, oversample) = env_cfg;
        let targets = resolved.schedule.times();
        let t_end = *targets.last().context("empty schedule")?;
        let times = geometric_times(targets[0], t_end, *oversample).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut snapshot_at = Vec::with_capacity(targets.len());
        let mut next = 0;
        for (i, &t) in times.iter().enumerate() {
            while next < targets.len() && t >= targets[next] {
                snapshot_at.push(i);
                next += 1;
            }
        }
        snapshot_at.dedup();
        let tr = exact_ou_path(ou.lambda, ou.mu, ou.sigma_scale, &times, &driver)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let lyap = LyapunovSpec::quadratic(*delta).map_err(|e| anyhow::anyhow!("{e}"))?;
        let g = Gauge::new(gauge.coeff, gauge.exponent).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut tracker = EnvelopeTracker::new(lyap, g, *t_min).map_err(|e| anyhow::anyhow!("{e}"))?;
        envelope_over_path(&mut tracker, &tr.times, &tr.states, &snapshot_at);
        report.envelope = tracker.into_rows();
        report.steps = times.len() as u64;
        return Ok(report);
    }

    let x0 = match &resolved.x0 {
        X0Cfg::Point(v) => *v,
        X0Cfg::Named(_) => {
            let oracle = resolved
                .oracle
                .as_ref()
                .context("stationary start without an oracle")?;
            oracle.inverse_cdf(driver.substream(INIT_TAG).uniform(0))
        }
    };

    let mut envelope: Option<EnvelopeTracker> = None;
    let mut martingale: Option<MartingaleReporter> = None;
    let mut birkhoff: Option<BirkhoffTracker> = None;
    for est in &resolved.estimators {
        match est {
            EstimatorCfg::Envelope {
                gauge,
                delta,
                t_min,
                ..
            } => {
                let lyap = LyapunovSpec::quadratic(*delta).map_err(|e| anyhow::anyhow!("{e}"))?;
                let g = Gauge::new(gauge.coeff, gauge.exponent).map_err(|e| anyhow::anyhow!("{e}"))?;
                envelope =
                    Some(EnvelopeTracker::new(lyap, g, *t_min).map_err(|e| anyhow::anyhow!("{e}"))?);
            }
            EstimatorCfg::Martingale { delta } => {
                let lyap = LyapunovSpec::quadratic(*delta).map_err(|e| anyhow::anyhow!("{e}"))?;
                let tf = ExpTransform::new(&resolved.model, &lyap)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                martingale = Some(MartingaleReporter {
                    tracker: MartingaleTracker::new(tf),
                    rows: Vec::new(),
                });
            }
            EstimatorCfg::Birkhoff { phi } => {
                let lyap = LyapunovSpec::quadratic(0.5).map_err(|e| anyhow::anyhow!("{e}"))?;
                let spec = phi.to_spec();
                let f = spec.build(Some(&lyap)).map_err(|e| anyhow::anyhow!("{e}"))?;
                birkhoff = Some(BirkhoffTracker::new(spec.name(), move |x| f(x)));
            }
        }
    }

    {
        let mut fan: Vec<&mut dyn StepObserver> = Vec::new();
        if let Some(t) = envelope.as_mut() {
            fan.push(t);
        }
        if let Some(t) = martingale.as_mut() {
            fan.push(t);
        }
        if let Some(t) = birkhoff.as_mut() {
            fan.push(t);
        }
        let mut fan = Fanout(fan);
        let tr = integrate(
            &resolved.model,
            &[x0],
            &resolved.schedule,
            &driver,
            resolved.scheme,
            &mut fan,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        report.blowup = tr.blowup.is_some();
        report.steps = tr
            .blowup
            .map(|b| b.step)
            .unwrap_or_else(|| resolved.schedule.last_step());
    }

    if let Some(t) = envelope {
        report.envelope = t.into_rows();
    }
    if let Some(t) = martingale {
        report.martingale = t.rows;
    }
    if let Some(t) = birkhoff {
        report.birkhoff_phi = t.phi_name().to_string();
        report.birkhoff = t.rows().to_vec();
    }
    Ok(report)
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct RunOutcome {
    pub files: Vec<(String, String, usize)>, // (name, sha256, rows)
    pub total_steps: u64,
    pub blowups: u64,
    pub paths: u64,
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> anyhow::Result<(String, String, usize)> {
    std::fs::write(dir.join(name), content).with_context(|| format!("writing {name}"))?;
    let digest = Sha256::digest(content.as_bytes());
    let rows = content.lines().count().saturating_sub(1);
    Ok((name.to_string(), format!("{digest:x}"), rows))
}

pub fn run_sde(resolved: &ResolvedSde, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let reports: Vec<anyhow::Result<PathReport>> = (0..resolved.seeds)
        .into_par_iter()
        .map(|pid| run_one_path(resolved, pid))
        .collect();
    let mut paths = Vec::with_capacity(reports.len());
    for r in reports {
        paths.push(r?);
    }

    let mut files = Vec::new();
    let has_envelope = paths.iter().any(|p| !p.envelope.is_empty());
    let has_martingale = paths.iter().any(|p| !p.martingale.is_empty());
    let has_birkhoff = paths.iter().any(|p| !p.birkhoff.is_empty());

    if has_envelope {
        let mut csv = String::from("path_id,t,x,V,env_V_over_logt,env_gauge_ratio\n");
        for p in &paths {
            for r in &p.envelope {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    p.path_id,
                    f(r.t),
                    f(r.x_abs),
                    f(r.v),
                    f(r.sup_v_over_logt),
                    f(r.sup_gauge_ratio)
                );
            }
        }
        files.push(write_artifact(out_dir, "envelope.csv", &csv)?);
    }

    if has_martingale {
        let mut csv = String::from("path_id,t,M,QV,M_over_t,QV_over_t,lil_ratio\n");
        for p in &paths {
            for r in &p.martingale {
                let lil = if r.qv > LIL_REPORT_FLOOR {
                    lil_ratio(r.m, r.qv).map(f).unwrap_or_default()
                } else {
                    String::new()
                };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    p.path_id,
                    f(r.t),
                    f(r.m),
                    f(r.qv),
                    f(r.m / r.t),
                    f(r.qv / r.t),
                    lil
                );
            }
        }
        files.push(write_artifact(out_dir, "martingale.csv", &csv)?);
    }

    if has_birkhoff {
        let mut csv = String::from("path_id,t,phi_name,running_avg\n");
        for p in &paths {
            for &(t, avg) in &p.birkhoff {
                let _ = writeln!(csv, "{},{},{},{}", p.path_id, f(t), p.birkhoff_phi, f(avg));
            }
        }
        files.push(write_artifact(out_dir, "birkhoff.csv", &csv)?);
    }

    Ok(RunOutcome {
        files,
        total_steps: paths.iter().map(|p| p.steps).sum(),
        blowups: paths.iter().filter(|p| p.blowup).count() as u64,
        paths: resolved.seeds,
    })
}

pub fn run_slln(cfg: &SllnExperiment, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let series: Vec<anyhow::Result<Vec<(f64, f64)>>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|seed| -> anyhow::Result<Vec<(f64, f64)>> {
            let driver = Driver::new(cfg.master_seed, seed);
            let rows = match &cfg.family {
                SllnFamily::Pareto { alpha, p, n_max } => {
                    let xs = pareto_symmetric(&driver, *alpha, *n_max)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    mz_scaled_sums(&xs, *p, Some(*alpha))
                        .map_err(|e| anyhow::anyhow!("{e}"))?
                        .rows
                        .into_iter()
                        .map(|(n, v)| (n as f64, v))
                        .collect()
                }
                SllnFamily::OuFunctional {
                    p,
                    n_max,
                    phi,
                    lambda,
                    sigma_scale,
                    spacing,
                } => {
                    let lyap =
                        LyapunovSpec::quadratic(0.5).map_err(|e| anyhow::anyhow!("{e}"))?;
                    let func = phi
                        .to_spec()
                        .build(Some(&lyap))
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    let xs = ou_functional_sequence(
                        &driver,
                        *lambda,
                        *sigma_scale,
                        *spacing,
                        *n_max,
                        |x| func(x),
                    )
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                    mz_scaled_sums(&xs, *p, None)
                        .map_err(|e| anyhow::anyhow!("{e}"))?
                        .rows
                        .into_iter()
                        .map(|(n, v)| (n as f64, v))
                        .collect()
                }
                SllnFamily::Continuous {
                    p,
                    eps_exp,
                    t_max,
                    phi,
                    dt,
                    t0,
                } => {
                    let model = ergolab::model::make_ou(2.0, 0.0, 1.0)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    let count = ((t_max / t0).log2().floor() as usize).max(1) + 1;
                    let sched =
                        ergolab::schedule::CheckpointSchedule::spanning(*t0, *t_max, count, *dt)
                            .map_err(|e| anyhow::anyhow!("{e}"))?;
                    let lyap =
                        LyapunovSpec::quadratic(0.5).map_err(|e| anyhow::anyhow!("{e}"))?;
                    let func = phi
                        .to_spec()
                        .build(Some(&lyap))
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    let rep = mz_conjecture_continuous(
                        &model,
                        &|x| func(x),
                        *p,
                        *eps_exp,
                        &sched,
                        &driver,
                        Scheme::Em,
                    )
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                    rep.rows
                }
            };
            Ok(rows)
        })
        .collect();

    let mut csv = String::from("seed,n_or_T,scaled_sum\n");
    let mut rows_total = 0u64;
    for (seed, rows) in series.into_iter().enumerate() {
        let rows = rows?;
        rows_total += rows.len() as u64;
        for (n_or_t, v) in rows {
            let _ = writeln!(csv, "{seed},{},{}", f(n_or_t), f(v));
        }
    }
    let file = write_artifact(out_dir, "slln.csv", &csv)?;

    Ok(RunOutcome {
        files: vec![file],
        total_steps: rows_total,
        blowups: 0,
        paths: cfg.seeds,
    })
}

pub fn write_manifest(
    out_dir: &Path,
    config_echo: &serde_json::Value,
    outcome: &RunOutcome,
    wall_secs: f64,
) -> anyhow::Result<()> {
    let manifest = serde_json::json!({
        "config": config_echo,
        "artifact": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "files": outcome
            .files
            .iter()
            .map(|(name, sha, rows)| serde_json::json!({
                "name": name,
                "sha256": sha,
                "rows": rows,
            }))
            .collect::<Vec<_>>(),
        "paths": outcome.paths,
        "blowups": outcome.blowups,
        "total_steps": outcome.total_steps,
        "wall_clock_secs": wall_secs,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )
    .context("writing manifest.json")?;
    Ok(())
}

/// Executes a parsed experiment; returns the process exit code.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<i32> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let started = Instant::now();
    let echo = crate::config::echo_config(cfg)?;

    let outcome = match cfg {
        ExperimentConfig::Sde(sde) => {
            let resolved = sde.resolve()?;
            run_sde(&resolved, out_dir)?
        }
        ExperimentConfig::Slln(slln) => {
            slln.validate()?;
            run_slln(slln, out_dir)?
        }
    };

    write_manifest(out_dir, &echo, &outcome, started.elapsed().as_secs_f64())?;

    for (name, sha, rows) in &outcome.files {
        println!("wrote {name}: {rows} rows, sha256 {sha}");
    }
    println!(
        "paths {} | blowups {} | steps {} | {:.2}s",
        outcome.paths,
        outcome.blowups,
        outcome.total_steps,
        started.elapsed().as_secs_f64()
    );

    if outcome.blowups * 2 > outcome.paths {
        eprintln!(
            "blowup in {} of {} paths — results written but unusable; \
             try the tamed scheme or a smaller dt",
            outcome.blowups, outcome.paths
        );
        return Ok(3);
    }
    Ok(0)
}
