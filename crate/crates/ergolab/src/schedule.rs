//! Geometric checkpoint schedules over a dense integration grid.
//!
//! Envelope statistics live on log time scales, so observation points are
//! geometric: t_k = t0·ρ^k. Fixed-step integrators can only stop on
//! multiples of dt, so each ideal checkpoint is snapped to the nearest
//! dense step. The snapped times are the schedule's authoritative output —
//! every consumer (trackers, CSV writers, refinement checks) sees the same
//! realized grid, and refining a schedule keeps it reproducible.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CheckpointSchedule {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
    pub dt: f64,
    checkpoint_steps: Vec<u64>,
}

impl CheckpointSchedule {
    pub fn new(t0: f64, ratio: f64, count: usize, dt: f64) -> Result<Self> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(Error::parameter("t0", "must be positive and finite"));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::parameter("ratio", "must be > 1"));
        }
        if count == 0 {
            return Err(Error::parameter("count", "must be at least 1"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::parameter("dt", "must be positive and finite"));
        }
        if dt > t0 {
            return Err(Error::parameter("dt", "dense step must not exceed t0"));
        }

        let mut checkpoint_steps = Vec::with_capacity(count);
        let mut target = t0;
        for k in 0..count {
            let step = (target / dt).round();
            if !step.is_finite() || step >= 2f64.powi(63) {
                return Err(Error::Schedule(format!(
                    "checkpoint {k} at t≈{target:.3e} overflows the step counter at dt={dt:.3e}"
                )));
            }
            let step = step as u64;
            if let Some(&prev) = checkpoint_steps.last() {
                if step <= prev {
                    return Err(Error::Schedule(format!(
                        "checkpoints {} and {k} collide on the dt grid (ratio too close to 1 for dt={dt:.3e})",
                        k - 1
                    )));
                }
            } else if step == 0 {
                return Err(Error::Schedule(
                    "first checkpoint snaps to step 0; increase t0 or decrease dt".into(),
                ));
            }
            checkpoint_steps.push(step);
            target *= ratio;
        }

        Ok(CheckpointSchedule {
            t0,
            ratio,
            count,
            dt,
            checkpoint_steps,
        })
    }

    /// Schedule whose last checkpoint lands at (approximately) `t_end`.
    pub fn spanning(t0: f64, t_end: f64, count: usize, dt: f64) -> Result<Self> {
        if count < 2 || !(t_end > t0) {
            return Err(Error::parameter(
                "t_end",
                "spanning schedule needs t_end > t0 and count ≥ 2",
            ));
        }
        let ratio = (t_end / t0).powf(1.0 / (count - 1) as f64);
        CheckpointSchedule::new(t0, ratio, count, dt)
    }

    /// Dense steps between t=0 and each checkpoint; `step * dt` is exact.
    pub fn checkpoint_steps(&self) -> &[u64] {
        &self.checkpoint_steps
    }

    pub fn last_step(&self) -> u64 {
        *self.checkpoint_steps.last().unwrap()
    }

    /// Realized (snapped) checkpoint times.
    pub fn times(&self) -> Vec<f64> {
        self.checkpoint_steps
            .iter()
            .map(|&s| s as f64 * self.dt)
            .collect()
    }
}

/// Strictly increasing geometric grid t0, t0·ρ, ... capped at `t_end`
/// (with `t_end` itself appended). Used by exact samplers, which need no
/// dense grid and take observation times directly.
pub fn geometric_times(t0: f64, t_end: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || !(t_end > t0) {
        return Err(Error::parameter("t_end", "need 0 < t0 < t_end"));
    }
    if !(ratio > 1.0) {
        return Err(Error::parameter("ratio", "must be > 1"));
    }
    let mut times = vec![t0];
    loop {
        let next = times.last().unwrap() * ratio;
        if next >= t_end {
            break;
        }
        times.push(next);
    }
    times.push(t_end);
    Ok(times)
}
