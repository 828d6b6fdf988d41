//! Long-run path statistics: growth envelopes against logarithmic gauges,
//! Birkhoff running averages, iterated-logarithm ratios, the exponent
//! bootstrap recursion, and the shared-noise monotonicity check.

use crate::error::{Error, Result};
use crate::model::{LyapunovSpec, SdeModel};
use crate::rng::Driver;
use crate::schedule::CheckpointSchedule;
use crate::simulate::{integrate, Scheme, StepObserver};

/// Reporting floor for iterated-logarithm ratios: below bracket e² the
/// inner log log is smaller than ln 2 and the statistic is still dominated
/// by start-up noise.
pub const LIL_REPORT_FLOOR: f64 = 7.38905609893065; // e²

/// |m| / √(2·qv·log log qv), defined once the bracket qv exceeds e.
pub fn lil_ratio(m: f64, qv: f64) -> Option<f64> {
    if qv > std::f64::consts::E {
        Some(m.abs() / (2.0 * qv * qv.ln().ln()).sqrt())
    } else {
        None
    }
}

/// Slowly growing comparison curve g(t) = coeff·(log t)^exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub coeff: f64,
    pub exponent: f64,
}

impl Gauge {
    pub fn new(coeff: f64, exponent: f64) -> Result<Self> {
        if !(coeff > 0.0) || !coeff.is_finite() {
            return Err(Error::parameter("gauge.coeff", "must be positive and finite"));
        }
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::parameter(
                "gauge.exponent",
                "must be positive and finite",
            ));
        }
        Ok(Gauge { coeff, exponent })
    }

    /// Requires t > 1 so the log is positive.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeff * t.ln().powf(self.exponent)
    }
}

/// One reporting row of an envelope run.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeRow {
    pub t: f64,
    /// |x| for 1D, Euclidean norm for higher dimension.
    pub x_abs: f64,
    pub v: f64,
    pub sup_v_over_logt: f64,
    pub sup_gauge_ratio: f64,
}

/// Maintains, densely in time, the running suprema of
///
/// - V(X_s)/log s  (growth of the Lyapunov observable against log t), and
/// - |X_s|/g(s)    (state magnitude against a configured gauge),
///
/// over s ≥ t_min, with snapshot rows taken at checkpoints. Both suprema
/// are updated at every absorbed state, not merely at checkpoints, so
/// refining the checkpoint grid cannot change them.
pub struct EnvelopeTracker {
    lyap: LyapunovSpec,
    gauge: Gauge,
    t_min: f64,
    sup_v: f64,
    sup_g: f64,
    // Lower bounds for log s and g(s) on the time range already passed;
    // exact logs are only computed when a new state could beat a supremum
    // even against these floors.
    log_floor: f64,
    gauge_floor: f64,
    rows: Vec<EnvelopeRow>,
}

impl EnvelopeTracker {
    pub fn new(lyap: LyapunovSpec, gauge: Gauge, t_min: f64) -> Result<Self> {
        if !(t_min > 1.0) {
            return Err(Error::parameter("t_min", "must exceed 1 (log must be positive)"));
        }
        Ok(EnvelopeTracker {
            lyap,
            gauge,
            t_min,
            sup_v: 0.0,
            sup_g: 0.0,
            log_floor: t_min.ln(),
            gauge_floor: gauge.eval(t_min),
            rows: Vec::new(),
        })
    }

    /// Default observation window start: e, keeping log t ≥ 1.
    pub fn starting_at_e(lyap: LyapunovSpec, gauge: Gauge) -> Result<Self> {
        Self::new(lyap, gauge, std::f64::consts::E)
    }

    /// Feeds one observed state at time t. For 1D pass the signed state;
    /// for higher dimension pass the Euclidean norm.
    #[inline]
    pub fn absorb(&mut self, t: f64, x: f64) {
        if t < self.t_min {
            return;
        }
        let v = self.lyap.v(x);
        let a = x.abs();
        // Since log s and g(s) only grow, beating a supremum requires
        // beating it against the cached floors first.
        if v <= self.sup_v * self.log_floor && a <= self.sup_g * self.gauge_floor {
            return;
        }
        let lt = t.ln();
        let g = self.gauge.coeff * lt.powf(self.gauge.exponent);
        self.sup_v = self.sup_v.max(v / lt);
        self.sup_g = self.sup_g.max(a / g);
        self.log_floor = lt;
        self.gauge_floor = g;
    }

    /// Records a reporting row for the current suprema at state (t, x).
    pub fn snapshot(&mut self, t: f64, x: f64) {
        self.rows.push(EnvelopeRow {
            t,
            x_abs: x.abs(),
            v: self.lyap.v(x),
            sup_v_over_logt: self.sup_v,
            sup_gauge_ratio: self.sup_g,
        });
    }

    pub fn sup_v_over_logt(&self) -> f64 {
        self.sup_v
    }

    pub fn sup_gauge_ratio(&self) -> f64 {
        self.sup_g
    }

    pub fn rows(&self) -> &[EnvelopeRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<EnvelopeRow> {
        self.rows
    }
}

impl StepObserver for EnvelopeTracker {
    fn on_step(&mut self, t: f64, _x: &[f64], x_next: &[f64], _dw: &[f64], dt: f64) {
        let x = if x_next.len() == 1 {
            x_next[0]
        } else {
            x_next.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        self.absorb(t + dt, x);
    }

    fn on_checkpoint(&mut self, _index: usize, t: f64, x: &[f64]) {
        let x = if x.len() == 1 {
            x[0]
        } else {
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        self.snapshot(t, x);
    }
}

/// Folds an already-sampled path (e.g. from exact transitions) through an
/// envelope tracker, absorbing every state and snapshotting at the given
/// subset of indices.
pub fn envelope_over_path(
    tracker: &mut EnvelopeTracker,
    times: &[f64],
    states: &[f64],
    snapshot_at: &[usize],
) {
    let mut snap = snapshot_at.iter().peekable();
    for (k, (&t, &x)) in times.iter().zip(states).enumerate() {
        tracker.absorb(t, x);
        if snap.peek() == Some(&&k) {
            tracker.snapshot(t, x);
            snap.next();
        }
    }
}

/// Trapezoidal running time-average A_t = (1/t)∫₀ᵗ φ(X_s) ds of a scalar
/// observable along a dense path, with (t, A_t) rows at checkpoints.
pub struct BirkhoffTracker {
    phi: Box<dyn Fn(f64) -> f64 + Send>,
    phi_name: String,
    acc: f64,
    t: f64,
    rows: Vec<(f64, f64)>,
}

impl BirkhoffTracker {
    pub fn new(phi_name: impl Into<String>, phi: impl Fn(f64) -> f64 + Send + 'static) -> Self {
        BirkhoffTracker {
            phi: Box::new(phi),
            phi_name: phi_name.into(),
            acc: 0.0,
            t: 0.0,
            rows: Vec::new(),
        }
    }

    pub fn phi_name(&self) -> &str {
        &self.phi_name
    }

    pub fn average(&self) -> Option<f64> {
        if self.t > 0.0 {
            Some(self.acc / self.t)
        } else {
            None
        }
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }
}

impl StepObserver for BirkhoffTracker {
    fn on_step(&mut self, _t: f64, x: &[f64], x_next: &[f64], _dw: &[f64], dt: f64) {
        self.acc += 0.5 * ((self.phi)(x[0]) + (self.phi)(x_next[0])) * dt;
        self.t += dt;
    }

    fn on_checkpoint(&mut self, _index: usize, t: f64, _x: &[f64]) {
        if self.t > 0.0 {
            self.rows.push((t, self.acc / self.t));
        }
    }
}

/// Named scalar observables selectable from experiment configs.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    /// φ(x) = x
    X,
    /// φ(x) = x²
    XSquared,
    /// φ(x) = |x|^p
    AbsPow { p: f64 },
    /// φ(x) = e^{δV(x)} for the experiment's Lyapunov observable
    ExpV { delta: f64 },
}

impl PhiSpec {
    pub fn name(&self) -> String {
        match self {
            PhiSpec::X => "x".into(),
            PhiSpec::XSquared => "x^2".into(),
            PhiSpec::AbsPow { p } => format!("|x|^{p}"),
            PhiSpec::ExpV { delta } => format!("exp({delta}V)"),
        }
    }

    /// Builds the evaluator; `ExpV` needs the Lyapunov observable it refers to.
    pub fn build(&self, lyap: Option<&LyapunovSpec>) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match self {
            PhiSpec::X => Ok(Box::new(|x| x)),
            PhiSpec::XSquared => Ok(Box::new(|x| x * x)),
            PhiSpec::AbsPow { p } => {
                if !(*p > 0.0) || !p.is_finite() {
                    return Err(Error::parameter("phi.p", "must be positive and finite"));
                }
                let p = *p;
                Ok(Box::new(move |x| x.abs().powf(p)))
            }
            PhiSpec::ExpV { delta } => {
                if !(*delta > 0.0) || !delta.is_finite() {
                    return Err(Error::parameter("phi.delta", "must be positive and finite"));
                }
                let lyap = lyap.ok_or_else(|| {
                    Error::Precondition(
                        "exp(deltaV) observable needs a Lyapunov observable in the experiment".into(),
                    )
                })?;
                let v = lyap.v_poly().clone();
                let delta = *delta;
                Ok(Box::new(move |x| (delta * v.eval(x)).exp()))
            }
        }
    }
}

/// Running maximum over the given times of |W_t|/√(2t log log t) for a
/// standard Brownian path sampled exactly at those times — the
/// iterated-logarithm statistic of the simplest martingale, whose bracket
/// is t itself.
pub fn bm_lil_running_max(times: &[f64], driver: &Driver) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::parameter("times", "need at least one time"));
    }
    if !(times[0] > std::f64::consts::E) {
        return Err(Error::Precondition(
            "log log t needs t > e at the first observation".into(),
        ));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Schedule(
                "observation times must be strictly increasing".into(),
            ));
        }
    }
    let mut w = 0.0;
    let mut prev_t = 0.0;
    let mut best = f64::NEG_INFINITY;
    for (k, &t) in times.iter().enumerate() {
        w += (t - prev_t).sqrt() * driver.normal(k as u64);
        prev_t = t;
        best = best.max(w.abs() / (2.0 * t * t.ln().ln()).sqrt());
    }
    Ok(best)
}

/// One step of the exponent-improvement recursion β′ = max{1, (1+β)/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapState {
    pub beta: f64,
    pub iteration: u32,
}

impl BootstrapState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(Error::parameter("beta", "must be finite and ≥ 1"));
        }
        Ok(BootstrapState { beta, iteration: 0 })
    }
}

pub fn bootstrap_iterate(state: BootstrapState) -> BootstrapState {
    BootstrapState {
        beta: (0.5 * (1.0 + state.beta)).max(1.0),
        iteration: state.iteration + 1,
    }
}

/// β₀, β₁, …, β_k from the recursion.
pub fn bootstrap_sequence(beta0: f64, k: u32) -> Result<Vec<f64>> {
    let mut st = BootstrapState::new(beta0)?;
    let mut out = Vec::with_capacity(k as usize + 1);
    out.push(st.beta);
    for _ in 0..k {
        st = bootstrap_iterate(st);
        out.push(st.beta);
    }
    Ok(out)
}

/// Intermediate exponent of the improvement step,
/// γ = max{1+ε, ½ + (δ+2ε−½)(β+2ε)}: a pure formula, exposed so the
/// recursion's inner step is testable on its own. At δ→1, ε→0 it reduces
/// to the β update (1+β)/2 clamped at 1.
pub fn gamma_exponent(beta: f64, delta: f64, eps: f64) -> f64 {
    (1.0 + eps).max(0.5 + (delta + 2.0 * eps - 0.5) * (beta + 2.0 * eps))
}

/// Shared-noise comparison of Birkhoff averages: integrates the model from
/// each initial point on the *same* increment stream and returns the final
/// time-averages of φ, plus their spread max−min.
pub struct MonotoneCheck {
    pub averages: Vec<f64>,
    pub spread: f64,
}

pub fn monotone_birkhoff_check(
    model: &SdeModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    initial_points: &[f64],
    schedule: &CheckpointSchedule,
    driver: &Driver,
    scheme: Scheme,
) -> Result<MonotoneCheck> {
    if model.dim != 1 {
        return Err(Error::Precondition(
            "the comparison check is defined for 1D models".into(),
        ));
    }
    if initial_points.is_empty() {
        return Err(Error::parameter("initial_points", "need at least one"));
    }
    struct Borrowed<'a> {
        phi: &'a (dyn Fn(f64) -> f64 + Sync),
        acc: f64,
        t: f64,
    }
    impl StepObserver for Borrowed<'_> {
        fn on_step(&mut self, _t: f64, x: &[f64], x_next: &[f64], _dw: &[f64], dt: f64) {
            self.acc += 0.5 * ((self.phi)(x[0]) + (self.phi)(x_next[0])) * dt;
            self.t += dt;
        }
    }

    let mut averages = Vec::with_capacity(initial_points.len());
    for &x0 in initial_points {
        let mut obs = Borrowed {
            phi,
            acc: 0.0,
            t: 0.0,
        };
        integrate(model, &[x0], schedule, driver, scheme, &mut obs)?;
        if obs.t <= 0.0 {
            return Err(Error::Precondition("empty integration window".into()));
        }
        averages.push(obs.acc / obs.t);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &a in &averages {
        lo = lo.min(a);
        hi = hi.max(a);
    }
    Ok(MonotoneCheck {
        averages,
        spread: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ou, make_poly_drift, LyapunovSpec};
    use crate::poly::Poly;
    use crate::simulate::NoObserver;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn lil_ratio_guard_and_value() {
        assert!(lil_ratio(1.0, 1.0).is_none());
        assert!(lil_ratio(1.0, E).is_none());
        let qv = E * E;
        let expect = 1.0 / (2.0 * qv * std::f64::consts::LN_2).sqrt();
        assert!((lil_ratio(-1.0, qv).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn gauge_eval_hand_value() {
        let g = Gauge::new(2.0_f64.sqrt(), 0.25).unwrap();
        // at t = e⁴: (ln t)^{1/4} = √2, so g = 2.
        assert!((g.eval(E.powi(4)) - 2.0).abs() < 1e-12);
        assert!(Gauge::new(0.0, 1.0).is_err());
        assert!(Gauge::new(1.0, -1.0).is_err());
    }

    #[test]
    fn envelope_of_zero_path_is_zero() {
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let gauge = Gauge::new(1.0, 1.0).unwrap();
        let mut tr = EnvelopeTracker::starting_at_e(lyap, gauge).unwrap();
        for k in 0..1000 {
            tr.absorb(2.0 + k as f64, 0.0);
        }
        assert_eq!(tr.sup_v_over_logt(), 0.0);
        assert_eq!(tr.sup_gauge_ratio(), 0.0);
    }

    #[test]
    fn envelope_matches_direct_maximum() {
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let gauge = Gauge::new(2.0, 0.5).unwrap();
        let mut tr = EnvelopeTracker::starting_at_e(lyap.clone(), gauge).unwrap();
        let times: Vec<f64> = (0..5000).map(|k| 1.5 + 0.37 * k as f64).collect();
        let states: Vec<f64> = times.iter().map(|t| (t * 0.7).sin() * 3.0).collect();
        for (&t, &x) in times.iter().zip(&states) {
            tr.absorb(t, x);
        }
        let mut direct_v: f64 = 0.0;
        let mut direct_g: f64 = 0.0;
        for (&t, &x) in times.iter().zip(&states) {
            if t < E {
                continue;
            }
            direct_v = direct_v.max(lyap.v(x) / t.ln());
            direct_g = direct_g.max(x.abs() / gauge.eval(t));
        }
        assert!((tr.sup_v_over_logt() - direct_v).abs() < 1e-12);
        assert!((tr.sup_gauge_ratio() - direct_g).abs() < 1e-12);
    }

    #[test]
    fn envelope_ignores_times_before_window() {
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let gauge = Gauge::new(1.0, 1.0).unwrap();
        let mut tr = EnvelopeTracker::starting_at_e(lyap, gauge).unwrap();
        tr.absorb(1.00001, 1e6); // huge state before t_min must not count
        assert_eq!(tr.sup_gauge_ratio(), 0.0);
    }

    #[test]
    fn envelope_sup_invariant_under_checkpoint_refinement() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let run = |count: usize| {
            let sched = CheckpointSchedule::spanning(E, 200.0, count, 0.01).unwrap();
            let lyap = LyapunovSpec::quadratic(0.5).unwrap();
            let gauge = Gauge::new(std::f64::consts::SQRT_2, 0.5).unwrap();
            let mut tr = EnvelopeTracker::starting_at_e(lyap, gauge).unwrap();
            integrate(
                &model,
                &[0.0],
                &sched,
                &Driver::new(99, 1),
                Scheme::Em,
                &mut tr,
            )
            .unwrap();
            (tr.sup_v_over_logt(), tr.sup_gauge_ratio())
        };
        let coarse = run(10);
        let fine = run(20);
        assert_eq!(coarse, fine);
    }

    #[test]
    fn envelope_rows_are_nondecreasing_in_sup() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::spanning(E, 500.0, 12, 0.01).unwrap();
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let gauge = Gauge::new(std::f64::consts::SQRT_2, 0.5).unwrap();
        let mut tr = EnvelopeTracker::starting_at_e(lyap, gauge).unwrap();
        integrate(
            &model,
            &[0.0],
            &sched,
            &Driver::new(7, 2),
            Scheme::Em,
            &mut tr,
        )
        .unwrap();
        let rows = tr.rows();
        assert_eq!(rows.len(), 12);
        for w in rows.windows(2) {
            assert!(w[1].sup_v_over_logt >= w[0].sup_v_over_logt);
            assert!(w[1].sup_gauge_ratio >= w[0].sup_gauge_ratio);
        }
    }

    #[test]
    fn envelope_over_path_snapshots_requested_indices() {
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let gauge = Gauge::new(1.0, 1.0).unwrap();
        let mut tr = EnvelopeTracker::starting_at_e(lyap, gauge).unwrap();
        let times = [3.0, 4.0, 5.0, 6.0];
        let states = [1.0, -2.0, 0.5, 1.5];
        envelope_over_path(&mut tr, &times, &states, &[1, 3]);
        assert_eq!(tr.rows().len(), 2);
        assert_eq!(tr.rows()[0].t, 4.0);
        assert_eq!(tr.rows()[1].t, 6.0);
        // sup includes the non-snapshot points too
        assert!((tr.rows()[1].sup_gauge_ratio - 2.0 / 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_constant_observable_is_exact() {
        let model = make_poly_drift(Poly::zero(), 1.0).unwrap();
        let sched = CheckpointSchedule::new(5.0, 2.0, 3, 0.01).unwrap();
        let mut tr = BirkhoffTracker::new("c", |_| 2.5);
        integrate(
            &model,
            &[0.0],
            &sched,
            &Driver::new(1, 0),
            Scheme::Em,
            &mut tr,
        )
        .unwrap();
        assert!((tr.average().unwrap() - 2.5).abs() < 1e-12);
        for &(_, a) in tr.rows() {
            assert!((a - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn birkhoff_ou_square_near_one_stationary_start() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(10_000.0, 2.0, 1, 0.01).unwrap();
        let mut tr = BirkhoffTracker::new("x^2", |x| x * x);
        integrate(
            &model,
            &[0.0],
            &sched,
            &Driver::new(12, 5),
            Scheme::Em,
            &mut tr,
        )
        .unwrap();
        let a = tr.average().unwrap();
        assert!((0.9..=1.1).contains(&a), "average {a}");
    }

    #[test]
    fn birkhoff_far_start_burn_in_is_order_one_over_t() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(10_000.0, 2.0, 1, 0.01).unwrap();
        let mut tr = BirkhoffTracker::new("x^2", |x| x * x);
        integrate(
            &model,
            &[50.0],
            &sched,
            &Driver::new(12, 5),
            Scheme::Em,
            &mut tr,
        )
        .unwrap();
        let a = tr.average().unwrap();
        assert!((0.9..=1.2).contains(&a), "average {a}");
    }

    #[test]
    fn phi_registry_names_and_values() {
        let lyap = LyapunovSpec::quadratic(0.5).unwrap();
        let x2 = PhiSpec::XSquared.build(None).unwrap();
        assert_eq!(x2(3.0), 9.0);
        let ap = PhiSpec::AbsPow { p: 1.5 }.build(None).unwrap();
        assert!((ap(-4.0) - 8.0).abs() < 1e-12);
        let ev = PhiSpec::ExpV { delta: 0.2 }.build(Some(&lyap)).unwrap();
        assert!((ev(2.0) - (0.4f64).exp()).abs() < 1e-12);
        assert_eq!(PhiSpec::X.name(), "x");
        assert_eq!(PhiSpec::XSquared.name(), "x^2");
        assert!(PhiSpec::ExpV { delta: 0.2 }.build(None).is_err());
        assert!(PhiSpec::AbsPow { p: -1.0 }.build(None).is_err());
    }

    #[test]
    fn bm_lil_max_reproducible_and_sane() {
        let times: Vec<f64> = crate::schedule::geometric_times(8.0, 1e6, 1.3).unwrap();
        let a = bm_lil_running_max(&times, &Driver::new(5, 0)).unwrap();
        let b = bm_lil_running_max(&times, &Driver::new(5, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite() && a > 0.0);
        assert!(a < 5.0, "wildly out of LIL scale: {a}");
    }

    #[test]
    fn bm_lil_rejects_small_start() {
        assert!(bm_lil_running_max(&[2.0, 4.0], &Driver::new(0, 0)).is_err());
        assert!(bm_lil_running_max(&[8.0, 7.0], &Driver::new(0, 0)).is_err());
    }

    #[test]
    fn bootstrap_first_steps_and_fixed_point() {
        let s = BootstrapState::new(2.0).unwrap();
        let s1 = bootstrap_iterate(s);
        assert_eq!(s1.beta, 1.5);
        assert_eq!(s1.iteration, 1);
        let fixed = bootstrap_iterate(BootstrapState::new(1.0).unwrap());
        assert_eq!(fixed.beta, 1.0);
        assert!(BootstrapState::new(0.5).is_err());
    }

    #[test]
    fn bootstrap_sequence_is_exactly_dyadic() {
        let seq = bootstrap_sequence(2.0, 50).unwrap();
        for (k, &b) in seq.iter().enumerate() {
            assert_eq!(b, 1.0 + 2.0f64.powi(-(k as i32)), "k={k}");
        }
        assert_eq!(seq[20], 1.0 + 9.5367431640625e-7);
    }

    #[test]
    fn gamma_reduces_to_beta_update_in_the_limit() {
        for &beta in &[1.0, 1.25, 2.0, 3.0] {
            let g = gamma_exponent(beta, 1.0, 0.0);
            let b = bootstrap_iterate(BootstrapState::new(beta).unwrap()).beta;
            assert!((g - b).abs() < 1e-15);
        }
        // away from the limit the clamp at 1+ε binds for β=1
        assert_eq!(gamma_exponent(1.0, 0.6, 0.1), 1.1f64.max(0.5 + 0.4 * 1.2));
    }

    #[test]
    fn monotone_check_ordering_and_contraction() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(10_000.0, 2.0, 1, 0.01).unwrap();
        let phi = |x: f64| x;
        let out = monotone_birkhoff_check(
            &model,
            &phi,
            &[-10.0, 0.0, 10.0],
            &sched,
            &Driver::new(31, 0),
            Scheme::Em,
        )
        .unwrap();
        for &a in &out.averages {
            assert!(a.abs() < 0.1, "average {a} too far from 0");
        }
        // shared noise + increasing Euler map + nondecreasing φ ⇒ exact order
        assert!(out.averages[0] <= out.averages[1]);
        assert!(out.averages[1] <= out.averages[2]);
        assert!(out.spread >= 0.0);
    }

    #[test]
    fn monotone_check_identical_points_identical_averages() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(100.0, 2.0, 1, 0.01).unwrap();
        let phi = |x: f64| x;
        let out = monotone_birkhoff_check(
            &model,
            &phi,
            &[0.7, 0.7],
            &sched,
            &Driver::new(8, 1),
            Scheme::Em,
        )
        .unwrap();
        assert_eq!(out.averages[0], out.averages[1]);
        assert_eq!(out.spread, 0.0);
    }

    #[test]
    fn monotone_ordering_exact_across_seeds() {
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(50.0, 2.0, 1, 0.01).unwrap();
        let phi = |x: f64| x.tanh(); // bounded, strictly increasing
        for seed in 0..10 {
            let out = monotone_birkhoff_check(
                &model,
                &phi,
                &[-3.0, -1.0, 0.5, 2.0],
                &sched,
                &Driver::new(seed, 0),
                Scheme::Em,
            )
            .unwrap();
            for w in out.averages.windows(2) {
                assert!(w[0] <= w[1], "seed {seed}: {:?}", out.averages);
            }
        }
    }

    #[test]
    fn null_observer_compiles_with_integrate() {
        // guard that the observer trait stays object-safe with defaults
        let model = make_ou(2.0, 0.0, 1.0).unwrap();
        let sched = CheckpointSchedule::new(1.0, 2.0, 1, 0.1).unwrap();
        integrate(
            &model,
            &[0.0],
            &sched,
            &Driver::new(0, 0),
            Scheme::Em,
            &mut NoObserver,
        )
        .unwrap();
    }

    proptest! {
        #[test]
        fn bootstrap_never_dips_below_one(beta in 1.0f64..100.0) {
            let mut st = BootstrapState::new(beta).unwrap();
            for _ in 0..200 {
                st = bootstrap_iterate(st);
                prop_assert!(st.beta >= 1.0);
            }
            prop_assert!((st.beta - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gamma_at_least_one_plus_eps(beta in 1.0f64..10.0, delta in 0.0f64..1.0, eps in 0.0f64..0.5) {
            prop_assert!(gamma_exponent(beta, delta, eps) >= 1.0 + eps);
        }
    }
}
