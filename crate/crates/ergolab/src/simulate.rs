//! Path integration: Brownian increments, Euler–Maruyama / tamed / Milstein
//! stepping, exact OU transitions, and shared-noise coupled pairs.
//!
//! The dense loop advances at fixed `dt` and records states at the
//! schedule's checkpoints; per-step observers receive every transition in
//! time order, which is how all estimators (martingale trackers, Birkhoff
//! averages, envelopes) accumulate without a second pass.

use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::rng::Driver;
use crate::schedule::CheckpointSchedule;

/// States with norm beyond this are treated as numerically exploded even
/// while still finite; keeps blowup detection scheme-independent.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Em,
    Tamed,
    Milstein,
    ExactOu,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Em => "em",
            Scheme::Tamed => "tamed",
            Scheme::Milstein => "milstein",
            Scheme::ExactOu => "exact-ou",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Scheme::Em),
            "tamed" => Ok(Scheme::Tamed),
            "milstein" => Ok(Scheme::Milstein),
            "exact-ou" => Ok(Scheme::ExactOu),
            other => Err(Error::parameter(
                "scheme",
                format!("unknown scheme `{other}` (expected em|tamed|milstein|exact-ou)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Blowup {
    pub step: u64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major checkpoint states: `states[k*dim..(k+1)*dim]`.
    pub states: Vec<f64>,
    pub scheme: Scheme,
    pub blowup: Option<Blowup>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }
}

/// Receives every dense transition and every checkpoint, in time order.
pub trait StepObserver {
    fn on_step(&mut self, _t: f64, _x: &[f64], _x_next: &[f64], _dw: &[f64], _dt: f64) {}
    fn on_checkpoint(&mut self, _index: usize, _t: f64, _x: &[f64]) {}
}

pub struct NoObserver;
impl StepObserver for NoObserver {}

/// Brownian increments over `n` steps of size `dt`: the exact stream that
/// `integrate` consumes, flattened as `[step][coord]`.
pub fn increments(driver: &Driver, n: usize, dim_w: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::parameter("dt", "must be positive"));
    }
    let sq = dt.sqrt();
    Ok((0..(n * dim_w) as u64)
        .map(|g| sq * driver.normal(g))
        .collect())
}

/// One Euler–Maruyama step x′ = x + b(x)dt + σ(x)dW.
pub fn em_step(x: &[f64], model: &SdeModel, dt: f64, dw: &[f64], out: &mut [f64]) {
    let mut b = vec![0.0; model.dim];
    let mut s = vec![0.0; model.dim * model.dim_w];
    model.drift_at(x, &mut b);
    model.diffusion_at(x, &mut s);
    for i in 0..model.dim {
        let noise: f64 = (0..model.dim_w)
            .map(|j| s[i * model.dim_w + j] * dw[j])
            .sum();
        out[i] = x[i] + b[i] * dt + noise;
    }
}

/// One tamed step x′ = x + b(x)dt/(1+dt‖b(x)‖) + σ(x)dW; reduces to plain
/// Euler as dt‖b‖ → 0 and keeps superlinear drifts from exploding.
pub fn tamed_em_step(x: &[f64], model: &SdeModel, dt: f64, dw: &[f64], out: &mut [f64]) {
    let mut b = vec![0.0; model.dim];
    let mut s = vec![0.0; model.dim * model.dim_w];
    model.drift_at(x, &mut b);
    model.diffusion_at(x, &mut s);
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let factor = dt / (1.0 + dt * norm_b);
    for i in 0..model.dim {
        let noise: f64 = (0..model.dim_w)
            .map(|j| s[i * model.dim_w + j] * dw[j])
            .sum();
        out[i] = x[i] + b[i] * factor + noise;
    }
}

/// Step size for the central finite difference approximating σ′ in the
/// Milstein correction.
fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// One Milstein step for 1D models:
/// x′ = x + b dt + σ dW + ½σσ′(dW² − dt), σ′ by central finite difference.
pub fn milstein_step_1d(x: f64, model: &SdeModel, dt: f64, dw: f64) -> f64 {
    let b = model.drift1(x);
    let s = model.diff1(x);
    let h = fd_step(x);
    let ds = (model.diff1(x + h) - model.diff1(x - h)) / (2.0 * h);
    x + b * dt + s * dw + 0.5 * s * ds * (dw * dw - dt)
}

struct BulkNormals<'a> {
    driver: &'a Driver,
    pair_idx: u64,
    pair: (f64, f64),
}

impl<'a> BulkNormals<'a> {
    fn new(driver: &'a Driver) -> Self {
        BulkNormals {
            driver,
            pair_idx: u64::MAX,
            pair: (0.0, 0.0),
        }
    }

    /// Same sequence as `Driver::normal(i)` but without recomputing shared
    /// Box–Muller pairs on consecutive indices.
    #[inline]
    fn get(&mut self, i: u64) -> f64 {
        let p = i / 2;
        if p != self.pair_idx {
            self.pair = self.driver.normal_pair(p);
            self.pair_idx = p;
        }
        if i % 2 == 0 {
            self.pair.0
        } else {
            self.pair.1
        }
    }
}

/// Integrates one path with dense stepping at `schedule.dt`, recording
/// checkpoint states and feeding every transition to `observer`.
///
/// On blowup (non-finite state or norm beyond `BLOWUP_NORM`) integration
/// halts and a partial trajectory is returned with the flag set.
pub fn integrate(
    model: &SdeModel,
    x0: &[f64],
    schedule: &CheckpointSchedule,
    driver: &Driver,
    scheme: Scheme,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    if x0.len() != model.dim {
        return Err(Error::Precondition(format!(
            "x0 has dimension {}, model expects {}",
            x0.len(),
            model.dim
        )));
    }
    match scheme {
        Scheme::ExactOu => {
            return Err(Error::Precondition(
                "the exact scheme samples transitions directly; use exact_ou_path".into(),
            ))
        }
        Scheme::Milstein if model.dim != 1 => {
            return Err(Error::Precondition(
                "milstein stepping is implemented for 1D models only".into(),
            ))
        }
        _ => {}
    }
    if model.dim == 1 && model.dim_w == 1 {
        return Ok(integrate_1d(model, x0[0], schedule, driver, scheme, observer));
    }
    Ok(integrate_nd(model, x0, schedule, driver, scheme, observer))
}

fn integrate_1d(
    model: &SdeModel,
    x0: f64,
    schedule: &CheckpointSchedule,
    driver: &Driver,
    scheme: Scheme,
    observer: &mut dyn StepObserver,
) -> Trajectory {
    let dt = schedule.dt;
    let sq = dt.sqrt();
    let cps = schedule.checkpoint_steps();
    let last = schedule.last_step();
    let mut normals = BulkNormals::new(driver);

    let mut times = Vec::with_capacity(cps.len());
    let mut states = Vec::with_capacity(cps.len());
    let mut blowup = None;
    let mut next_cp = 0;
    let mut x = x0;

    for s in 0..last {
        let dw = sq * normals.get(s);
        let x_next = match scheme {
            Scheme::Em => x + model.drift1(x) * dt + model.diff1(x) * dw,
            Scheme::Tamed => {
                let b = model.drift1(x);
                x + b * dt / (1.0 + dt * b.abs()) + model.diff1(x) * dw
            }
            Scheme::Milstein => milstein_step_1d(x, model, dt, dw),
            Scheme::ExactOu => unreachable!("rejected above"),
        };
        let t = s as f64 * dt;
        observer.on_step(t, &[x], &[x_next], &[dw], dt);
        x = x_next;
        let step_done = s + 1;
        if !x.is_finite() || x.abs() > BLOWUP_NORM {
            blowup = Some(Blowup {
                step: step_done,
                t: step_done as f64 * dt,
            });
            break;
        }
        if next_cp < cps.len() && step_done == cps[next_cp] {
            let t_cp = step_done as f64 * dt;
            times.push(t_cp);
            states.push(x);
            observer.on_checkpoint(next_cp, t_cp, &[x]);
            next_cp += 1;
        }
    }

    Trajectory {
        dim: 1,
        times,
        states,
        scheme,
        blowup,
    }
}

fn integrate_nd(
    model: &SdeModel,
    x0: &[f64],
    schedule: &CheckpointSchedule,
    driver: &Driver,
    scheme: Scheme,
    observer: &mut dyn StepObserver,
) -> Trajectory {
    let (dim, dim_w) = (model.dim, model.dim_w);
    let dt = schedule.dt;
    let sq = dt.sqrt();
    let cps = schedule.checkpoint_steps();
    let last = schedule.last_step();
    let mut normals = BulkNormals::new(driver);

    let mut x = x0.to_vec();
    let mut x_next = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut sig = vec![0.0; dim * dim_w];
    let mut dw = vec![0.0; dim_w];

    let mut times = Vec::with_capacity(cps.len());
    let mut states = Vec::with_capacity(cps.len() * dim);
    let mut blowup = None;
    let mut next_cp = 0;

    for s in 0..last {
        for (j, w) in dw.iter_mut().enumerate() {
            *w = sq * normals.get(s * dim_w as u64 + j as u64);
        }
        model.drift_at(&x, &mut b);
        model.diffusion_at(&x, &mut sig);
        let factor = match scheme {
            Scheme::Em | Scheme::Milstein => dt,
            Scheme::Tamed => {
                let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                dt / (1.0 + dt * norm_b)
            }
            Scheme::ExactOu => unreachable!("rejected above"),
        };
        for i in 0..dim {
            let noise: f64 = (0..dim_w).map(|j| sig[i * dim_w + j] * dw[j]).sum();
            x_next[i] = x[i] + b[i] * factor + noise;
        }
        let t = s as f64 * dt;
        observer.on_step(t, &x, &x_next, &dw, dt);
        std::mem::swap(&mut x, &mut x_next);
        let step_done = s + 1;
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || norm2 > BLOWUP_NORM * BLOWUP_NORM {
            blowup = Some(Blowup {
                step: step_done,
                t: step_done as f64 * dt,
            });
            break;
        }
        if next_cp < cps.len() && step_done == cps[next_cp] {
            let t_cp = step_done as f64 * dt;
            times.push(t_cp);
            states.extend_from_slice(&x);
            observer.on_checkpoint(next_cp, t_cp, &x);
            next_cp += 1;
        }
    }

    Trajectory {
        dim,
        times,
        states,
        scheme,
        blowup,
    }
}

/// Samples an OU path exactly at the given times via stationary-start
/// Gaussian transitions (no discretization error at any spacing).
///
/// The transition X_{t+Δ} = μ + e^{-λΔ/2}(X_t − μ) + σ√(1−e^{-λΔ})·ξ is the
/// incremental form of the time-changed Brownian representation
/// σe^{-λt/2}B(e^{λt}) + μ; computing variances via `expm1` keeps every
/// quantity in double range no matter how large λ·t grows.
pub fn exact_ou_path(
    lambda: f64,
    mu_loc: f64,
    sigma_scale: f64,
    times: &[f64],
    driver: &Driver,
) -> Result<Trajectory> {
    if !(lambda > 0.0) || !(sigma_scale > 0.0) {
        return Err(Error::parameter(
            "lambda/sigma_scale",
            "must be positive",
        ));
    }
    if times.is_empty() {
        return Err(Error::parameter("times", "need at least one time"));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Schedule(
                "exact sampling times must be strictly increasing".into(),
            ));
        }
    }
    if !(times[0] >= 0.0) {
        return Err(Error::Schedule("times must be nonnegative".into()));
    }

    let mut normals = BulkNormals::new(driver);
    let mut states = Vec::with_capacity(times.len());
    let mut x = mu_loc + sigma_scale * normals.get(0);
    states.push(x);
    for k in 1..times.len() {
        let d = times[k] - times[k - 1];
        let a = (-lambda * d / 2.0).exp();
        let sd = sigma_scale * (-(-lambda * d).exp_m1()).sqrt();
        x = mu_loc + a * (x - mu_loc) + sd * normals.get(k as u64);
        states.push(x);
    }

    Ok(Trajectory {
        dim: 1,
        times: times.to_vec(),
        states,
        scheme: Scheme::ExactOu,
        blowup: None,
    })
}

/// Integrates two 1D paths from ordered starts on the *same* Wiener orbit
/// and counts dense steps at which the ordering X^x ≤ X^y fails.
pub fn coupled_integrate(
    model: &SdeModel,
    x_low: f64,
    x_high: f64,
    schedule: &CheckpointSchedule,
    driver: &Driver,
    scheme: Scheme,
) -> Result<(Trajectory, Trajectory, u64)> {
    if model.dim != 1 {
        return Err(Error::Precondition("coupling is defined for 1D models".into()));
    }
    if !(x_low < x_high) {
        return Err(Error::Precondition(format!(
            "coupling needs strictly ordered starts, got {x_low} ≥ {x_high}"
        )));
    }
    if scheme == Scheme::ExactOu {
        return Err(Error::Precondition(
            "coupling tracks dense steps; use a dense scheme".into(),
        ));
    }

    let dt = schedule.dt;
    let sq = dt.sqrt();
    let cps = schedule.checkpoint_steps();
    let last = schedule.last_step();
    let mut normals = BulkNormals::new(driver);

    let step1 = |x: f64, dw: f64| -> f64 {
        match scheme {
            Scheme::Em => x + model.drift1(x) * dt + model.diff1(x) * dw,
            Scheme::Tamed => {
                let b = model.drift1(x);
                x + b * dt / (1.0 + dt * b.abs()) + model.diff1(x) * dw
            }
            Scheme::Milstein => milstein_step_1d(x, model, dt, dw),
            Scheme::ExactOu => unreachable!(),
        }
    };

    let (mut xa, mut xb) = (x_low, x_high);
    let mut violations = 0u64;
    let mut times = Vec::with_capacity(cps.len());
    let (mut states_a, mut states_b) = (Vec::new(), Vec::new());
    let mut blowup = None;
    let mut next_cp = 0;

    for s in 0..last {
        let dw = sq * normals.get(s);
        xa = step1(xa, dw);
        xb = step1(xb, dw);
        if xa > xb {
            violations += 1;
        }
        let step_done = s + 1;
        if !xa.is_finite() || !xb.is_finite() || xa.abs() > BLOWUP_NORM || xb.abs() > BLOWUP_NORM {
            blowup = Some(Blowup {
                step: step_done,
                t: step_done as f64 * dt,
            });
            break;
        }
        if next_cp < cps.len() && step_done == cps[next_cp] {
            times.push(step_done as f64 * dt);
            states_a.push(xa);
            states_b.push(xb);
            next_cp += 1;
        }
    }

    let make = |states: Vec<f64>| Trajectory {
        dim: 1,
        times: times.clone(),
        states,
        scheme,
        blowup,
    };
    Ok((make(states_a), make(states_b), violations))
}
