//! Browser-facing wrappers around the SDE laboratory.
//!
//! Each export takes a JSON parameter string and returns a JSON string of
//! the form `{"ok": …}` or `{"error": "…"}`. Keeping the boundary at
//! strings means the page needs nothing beyond `JSON.parse`, and the same
//! functions run (and are tested) on native targets where no JS host
//! exists.
//!
//! Exports:
//! - [`ou_envelope`]: one exactly-sampled Ornstein–Uhlenbeck path on a
//!   geometric time grid with its running growth envelopes.
//! - [`invariant_density`]: quadrature ground truth for the stationary
//!   density of a polynomial-potential gradient diffusion.
//! - [`coupling_gap`]: two paths driven by the same noise from ordered
//!   starts, tracking the gap and any ordering violations.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use ergolab::ergodic::{envelope_over_path, EnvelopeTracker, Gauge};
use ergolab::model::{make_langevin, make_ou, LyapunovSpec, SdeModel};
use ergolab::oracle::{GridSpec, InvariantOracle1D};
use ergolab::poly::Poly;
use ergolab::rng::Driver;
use ergolab::schedule::{geometric_times, CheckpointSchedule};
use ergolab::simulate::{coupled_integrate, exact_ou_path, Scheme};

const E: f64 = std::f64::consts::E;

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    let value = match result {
        Ok(payload) => serde_json::json!({ "ok": payload }),
        Err(message) => serde_json::json!({ "error": message }),
    };
    value.to_string()
}

fn parse<'a, T: Deserialize<'a>>(params: &'a str) -> Result<T, String> {
    serde_json::from_str(params).map_err(|e| format!("bad parameters: {e}"))
}

fn default_sigma() -> f64 {
    1.0
}

fn default_points() -> usize {
    600
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeParams {
    lambda: f64,
    #[serde(default)]
    mu: f64,
    #[serde(default = "default_sigma")]
    sigma_scale: f64,
    t_end: f64,
    seed: u64,
    #[serde(default = "default_points")]
    points: usize,
    /// Exponent weight in the tracked transform V = x²/2 statistics.
    #[serde(default = "EnvelopeParams::default_delta")]
    delta: f64,
    /// Gauge curve coeff·(log t)^exponent that |X_t| is measured against.
    #[serde(default)]
    gauge_coeff: Option<f64>,
    #[serde(default = "EnvelopeParams::default_gauge_exponent")]
    gauge_exponent: f64,
}

impl EnvelopeParams {
    fn default_delta() -> f64 {
        0.9
    }

    fn default_gauge_exponent() -> f64 {
        0.5
    }
}

#[derive(Serialize)]
struct EnvelopeOut {
    t: Vec<f64>,
    x: Vec<f64>,
    v_over_logt: Vec<f64>,
    sup_v_over_logt: Vec<f64>,
    gauge_ratio: Vec<f64>,
    gauge_coeff: f64,
    gauge_exponent: f64,
    final_sup_v_over_logt: f64,
    final_gauge_ratio: f64,
}

fn ou_envelope_impl(params: &str) -> Result<EnvelopeOut, String> {
    let p: EnvelopeParams = parse(params)?;
    if !(p.t_end > E * 1.001) {
        return Err("t_end must exceed e (the envelope window starts there)".into());
    }
    let points = p.points.clamp(16, 4_000);
    // Oversample ~6× between plot points so the running sup is taken over
    // a finer grid than what is drawn.
    let dense_n = (points * 6).clamp(256, 24_000);
    let ratio = (p.t_end / E).powf(1.0 / (dense_n - 1) as f64);
    let times = geometric_times(E, p.t_end, ratio).map_err(|e| e.to_string())?;

    let driver = Driver::new(p.seed, 0);
    let path = exact_ou_path(p.lambda, p.mu, p.sigma_scale, &times, &driver)
        .map_err(|e| e.to_string())?;

    let lyap = LyapunovSpec::quadratic(p.delta).map_err(|e| e.to_string())?;
    let coeff = p
        .gauge_coeff
        .unwrap_or(p.sigma_scale * std::f64::consts::SQRT_2);
    let gauge = Gauge::new(coeff, p.gauge_exponent).map_err(|e| e.to_string())?;
    let mut tracker = EnvelopeTracker::starting_at_e(lyap, gauge).map_err(|e| e.to_string())?;

    let len = path.times.len();
    let mut snapshot_at: Vec<usize> = (0..points)
        .map(|k| (k as f64 * (len - 1) as f64 / (points - 1) as f64).round() as usize)
        .collect();
    snapshot_at.dedup();
    envelope_over_path(&mut tracker, &path.times, &path.states, &snapshot_at);

    let x: Vec<f64> = snapshot_at.iter().map(|&k| path.states[k]).collect();
    let rows = tracker.into_rows();
    let out = EnvelopeOut {
        t: rows.iter().map(|r| r.t).collect(),
        x,
        v_over_logt: rows.iter().map(|r| r.v / r.t.ln()).collect(),
        sup_v_over_logt: rows.iter().map(|r| r.sup_v_over_logt).collect(),
        gauge_ratio: rows.iter().map(|r| r.sup_gauge_ratio).collect(),
        gauge_coeff: coeff,
        gauge_exponent: p.gauge_exponent,
        final_sup_v_over_logt: rows.last().map(|r| r.sup_v_over_logt).unwrap_or(f64::NAN),
        final_gauge_ratio: rows.last().map(|r| r.sup_gauge_ratio).unwrap_or(f64::NAN),
    };
    Ok(out)
}

/// Samples one OU path exactly on a geometric grid over [e, t_end] and
/// reports the running envelopes sup V(X_s)/log s and sup |X_s|/gauge(s).
#[wasm_bindgen]
pub fn ou_envelope(params: &str) -> String {
    respond(ou_envelope_impl(params))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityParams {
    /// Polynomial potential coefficients, constant term first.
    potential: Vec<f64>,
    epsilon: f64,
    /// Quadrature grid size (odd counts are used as-is).
    #[serde(default = "DensityParams::default_grid_points")]
    grid_points: usize,
    /// Half-width of the quadrature window; omitted means automatic.
    #[serde(default)]
    radius: Option<f64>,
    /// Number of samples of the density curve returned for plotting.
    #[serde(default = "DensityParams::default_curve_points")]
    curve_points: usize,
}

impl DensityParams {
    fn default_grid_points() -> usize {
        16_001
    }

    fn default_curve_points() -> usize {
        400
    }
}

#[derive(Serialize)]
struct DensityOut {
    xs: Vec<f64>,
    density: Vec<f64>,
    mean: f64,
    variance: f64,
    second_moment: f64,
    radius: f64,
    normalizing_constant: f64,
}

fn invariant_density_impl(params: &str) -> Result<DensityOut, String> {
    let p: DensityParams = parse(params)?;
    let u = Poly::new(p.potential);
    let grid = GridSpec {
        radius: p.radius,
        points: p.grid_points.clamp(1_001, 200_001),
    };
    let oracle = InvariantOracle1D::build(u.clone(), p.epsilon, grid).map_err(|e| e.to_string())?;

    let curve_points = p.curve_points.clamp(16, 2_000);
    let r = oracle.radius();
    let z = oracle.z();
    let mut xs = Vec::with_capacity(curve_points);
    let mut density = Vec::with_capacity(curve_points);
    for k in 0..curve_points {
        let x = -r + 2.0 * r * k as f64 / (curve_points - 1) as f64;
        xs.push(x);
        density.push((-u.eval(x) / p.epsilon).exp() / z);
    }

    Ok(DensityOut {
        xs,
        density,
        mean: oracle.mean(),
        variance: oracle.variance().map_err(|e| e.to_string())?,
        second_moment: oracle.expectation(|x| x * x).map_err(|e| e.to_string())?,
        radius: r,
        normalizing_constant: z,
    })
}

/// Computes the stationary density exp(-U(x)/ε)/Z of a gradient diffusion
/// by quadrature and returns the curve together with its first moments.
#[wasm_bindgen]
pub fn invariant_density(params: &str) -> String {
    respond(invariant_density_impl(params))
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum CouplingModel {
    Ou {
        lambda: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma_scale: f64,
    },
    Langevin {
        potential: Vec<f64>,
        epsilon: f64,
    },
}

impl CouplingModel {
    fn build(self) -> Result<SdeModel, String> {
        match self {
            CouplingModel::Ou {
                lambda,
                mu,
                sigma_scale,
            } => make_ou(lambda, mu, sigma_scale).map_err(|e| e.to_string()),
            CouplingModel::Langevin { potential, epsilon } => {
                make_langevin(Poly::new(potential), epsilon)
                    .map(|(model, _)| model)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingParams {
    model: CouplingModel,
    x_low: f64,
    x_high: f64,
    t_end: f64,
    #[serde(default = "CouplingParams::default_dt")]
    dt: f64,
    seed: u64,
    #[serde(default = "CouplingParams::default_points")]
    points: usize,
    #[serde(default = "CouplingParams::default_scheme")]
    scheme: String,
}

impl CouplingParams {
    fn default_dt() -> f64 {
        1e-3
    }

    fn default_points() -> usize {
        240
    }

    fn default_scheme() -> String {
        "tamed".into()
    }
}

#[derive(Serialize)]
struct CouplingOut {
    t: Vec<f64>,
    x_low: Vec<f64>,
    x_high: Vec<f64>,
    gap: Vec<f64>,
    violations: u64,
    blowup_t: Option<f64>,
}

/// Geometric schedule over [t_end/64, t_end] whose checkpoint count is
/// reduced until consecutive targets are at least 1.55·dt apart, so they
/// snap to distinct dense steps.
fn plot_schedule(t_end: f64, dt: f64, want: usize) -> Result<CheckpointSchedule, String> {
    if !(dt > 0.0) || !(t_end > 4.0 * dt) {
        return Err("need dt > 0 and t_end > 4·dt".into());
    }
    let t0 = (t_end / 64.0).max(2.0 * dt);
    if t_end <= t0 + 2.0 * dt {
        return Err("t_end too close to t0 for this dt".into());
    }
    let span = t_end / t0;
    let max_count = 1 + (span.ln() / (1.0 + 1.55 * dt / t0).ln()).floor() as usize;
    let count = want.clamp(2, max_count.max(2)).min(512);
    CheckpointSchedule::spanning(t0, t_end, count, dt).map_err(|e| e.to_string())
}

fn coupling_gap_impl(params: &str) -> Result<CouplingOut, String> {
    let p: CouplingParams = parse(params)?;
    let model = p.model.build()?;
    let scheme: Scheme = p.scheme.parse().map_err(|e: ergolab::Error| e.to_string())?;
    if scheme == Scheme::ExactOu {
        return Err("coupling needs a dense scheme (em, tamed, or milstein)".into());
    }
    let schedule = plot_schedule(p.t_end, p.dt, p.points)?;
    let driver = Driver::new(p.seed, 0);
    let (lo, hi, violations) =
        coupled_integrate(&model, p.x_low, p.x_high, &schedule, &driver, scheme)
            .map_err(|e| e.to_string())?;

    let gap = lo
        .states
        .iter()
        .zip(&hi.states)
        .map(|(a, b)| b - a)
        .collect();
    Ok(CouplingOut {
        t: lo.times.clone(),
        x_low: lo.states,
        x_high: hi.states,
        gap,
        violations,
        blowup_t: lo.blowup.map(|b| b.t),
    })
}

/// Runs two paths from ordered starts on the same Wiener orbit and reports
/// the pathwise gap, which contracts for the monotone schemes used here.
#[wasm_bindgen]
pub fn coupling_gap(params: &str) -> String {
    respond(coupling_gap_impl(params))
}
