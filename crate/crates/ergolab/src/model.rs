//! SDE model definitions: drift/diffusion fields, built-in instances
//! (Ornstein–Uhlenbeck, polynomial Langevin, custom polynomial drift),
//! Lyapunov function descriptions, and empirical hypothesis checks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracle::{InvariantOracle1D, TailVerdict};
use crate::poly::Poly;

/// Vector field evaluated in place: `f(x, out)`. For diffusion fields the
/// output is the dim × dim_w matrix in row-major order.
pub type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Parameters of an OU model for which exact transition sampling is
/// available (stationary law N(mu, sigma_scale²), correlation e^{-λ|τ|/2}).
#[derive(Debug, Clone, Copy)]
pub struct OuParams {
    pub lambda: f64,
    pub mu: f64,
    pub sigma_scale: f64,
}

/// Stationary density data for gradient models: μ ∝ e^{-U/ε}.
#[derive(Debug, Clone)]
pub struct InvariantSpec {
    pub u: Poly,
    pub eps: f64,
}

pub struct SdeModel {
    pub dim: usize,
    pub dim_w: usize,
    pub drift: VecField,
    pub diffusion: VecField,
    /// Coefficient growth exponent m: ‖b‖+‖σ‖ ≲ 1+‖x‖^m (declared, probed
    /// by `growth_check`, never certified).
    pub growth_exponent: u32,
    pub label: String,
    /// Set iff the model is an OU process (enables the exact scheme).
    pub exact_ou: Option<OuParams>,
    /// Set iff the stationary law has a known gradient form.
    pub invariant: Option<InvariantSpec>,
}

impl Clone for SdeModel {
    fn clone(&self) -> Self {
        SdeModel {
            dim: self.dim,
            dim_w: self.dim_w,
            drift: Arc::clone(&self.drift),
            diffusion: Arc::clone(&self.diffusion),
            growth_exponent: self.growth_exponent,
            label: self.label.clone(),
            exact_ou: self.exact_ou,
            invariant: self.invariant.clone(),
        }
    }
}

impl std::fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim", &self.dim)
            .field("dim_w", &self.dim_w)
            .field("growth_exponent", &self.growth_exponent)
            .field("label", &self.label)
            .finish()
    }
}

impl SdeModel {
    #[inline]
    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    #[inline]
    pub fn diffusion_at(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    /// Scalar drift for 1D models.
    #[inline]
    pub fn drift1(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut out = [0.0];
        (self.drift)(&[x], &mut out);
        out[0]
    }

    /// Scalar diffusion for 1D models.
    #[inline]
    pub fn diff1(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut out = [0.0];
        (self.diffusion)(&[x], &mut out);
        out[0]
    }
}

/// Polynomial Langevin bookkeeping: U, its leading coefficient c, the half
/// degree p (deg U = 2p), and the temperature ε. The growth envelope of the
/// stationary law scales like (ε/c)^{1/2p}·(log t)^{1/2p}.
#[derive(Debug, Clone)]
pub struct LangevinModel {
    pub potential: Poly,
    pub c: f64,
    pub p: u32,
    pub eps: f64,
}

/// OU model: drift −(λ/2)(x−μ), constant diffusion √λ·σ_scale.
///
/// The diffusion is chosen so the stationary variance equals σ_scale²
/// (Fokker–Planck fixed point: variance = σ_diff²/λ), matching the
/// time-changed Brownian representation σ·e^{-λt/2}B(e^{λt}) + μ.
pub fn make_ou(lambda: f64, mu_loc: f64, sigma_scale: f64) -> Result<SdeModel> {
    if !(lambda > 0.0) {
        return Err(Error::parameter("lambda", "must be positive"));
    }
    if !(sigma_scale > 0.0) {
        return Err(Error::parameter("sigma_scale", "must be positive"));
    }
    let half_lambda = lambda / 2.0;
    let sigma_diff = sigma_scale * lambda.sqrt();
    let u = Poly::new([mu_loc * mu_loc / 2.0, -mu_loc, 0.5]); // (x-μ)²/2
    Ok(SdeModel {
        dim: 1,
        dim_w: 1,
        drift: Arc::new(move |x, out| out[0] = -half_lambda * (x[0] - mu_loc)),
        diffusion: Arc::new(move |_, out| out[0] = sigma_diff),
        growth_exponent: 1,
        label: format!("ou(lambda={lambda}, mu={mu_loc}, sigma={sigma_scale})"),
        exact_ou: Some(OuParams {
            lambda,
            mu: mu_loc,
            sigma_scale,
        }),
        invariant: Some(InvariantSpec {
            u,
            eps: sigma_scale * sigma_scale,
        }),
    })
}

/// Langevin model dX = −U′(X)dt + √(2ε)dW with polynomial potential U.
/// Requires even degree ≥ 2 with positive leading coefficient so that
/// e^{-U/ε} is integrable.
pub fn make_langevin(potential: Poly, eps: f64) -> Result<(SdeModel, LangevinModel)> {
    if !(eps > 0.0) {
        return Err(Error::parameter("epsilon", "must be positive"));
    }
    let deg = potential.degree();
    if deg < 2 || deg % 2 != 0 {
        return Err(Error::parameter(
            "potential",
            format!("degree must be even and ≥ 2, got {deg}"),
        ));
    }
    let c = potential.leading_coeff();
    if !(c > 0.0) {
        return Err(Error::parameter(
            "potential",
            "leading coefficient must be positive (density not normalizable otherwise)",
        ));
    }
    let p = (deg / 2) as u32;
    let dudx = potential.derivative();
    let sigma_diff = (2.0 * eps).sqrt();
    let model = SdeModel {
        dim: 1,
        dim_w: 1,
        drift: Arc::new(move |x, out| out[0] = -dudx.eval(x[0])),
        diffusion: Arc::new(move |_, out| out[0] = sigma_diff),
        growth_exponent: (deg - 1) as u32,
        label: format!("langevin(U={potential}, eps={eps})"),
        exact_ou: None,
        invariant: Some(InvariantSpec {
            u: potential.clone(),
            eps,
        }),
    };
    let lang = LangevinModel {
        potential,
        c,
        p,
        eps,
    };
    Ok((model, lang))
}

/// 1D model with arbitrary polynomial drift and constant diffusion.
///
/// With constant σ the stationary density (when it exists) is the gradient
/// form e^{-U/ε} with U = −∫b and ε = σ²/2; the invariant spec is attached
/// exactly when that U is confining (even degree, positive leading term).
pub fn make_poly_drift(drift: Poly, sigma: f64) -> Result<SdeModel> {
    if !(sigma > 0.0) {
        return Err(Error::parameter("sigma", "must be positive"));
    }
    let u = drift.antiderivative().scale(-1.0);
    let confining = u.degree() >= 2 && u.degree() % 2 == 0 && u.leading_coeff() > 0.0;
    let invariant = confining.then(|| InvariantSpec {
        u,
        eps: sigma * sigma / 2.0,
    });
    let m = drift.degree() as u32;
    let b = drift.clone();
    Ok(SdeModel {
        dim: 1,
        dim_w: 1,
        drift: Arc::new(move |x, out| out[0] = b.eval(x[0])),
        diffusion: Arc::new(move |_, out| out[0] = sigma),
        growth_exponent: m,
        label: format!("poly-drift(b={drift}, sigma={sigma})"),
        exact_ou: None,
        invariant,
    })
}

/// Lyapunov data V (polynomial), its exact derivatives, the transform
/// parameter δ ∈ (0,1), and the radius beyond which V must be
/// nondecreasing in |x|.
#[derive(Debug, Clone)]
pub struct LyapunovSpec {
    v: Poly,
    dv: Poly,
    d2v: Poly,
    pub delta: f64,
    pub r_mono: f64,
    pub label: String,
}

impl LyapunovSpec {
    pub fn new(v: Poly, delta: f64) -> Result<Self> {
        Self::with_radius(v, delta, 1.0)
    }

    pub fn with_radius(v: Poly, delta: f64, r_mono: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::parameter("delta", "must lie strictly in (0, 1)"));
        }
        if !(r_mono > 0.0) {
            return Err(Error::parameter("r_mono", "must be positive"));
        }
        // Probe nonnegativity and monotonicity-in-|x| beyond r_mono; these
        // are assumptions of the growth bound, sampled rather than proved.
        let probes = 256;
        for i in 0..=probes {
            let x = -50.0 + 100.0 * i as f64 / probes as f64;
            if v.eval(x) < 0.0 {
                return Err(Error::parameter(
                    "v",
                    format!("V({x}) < 0; V must be nonnegative"),
                ));
            }
        }
        for sign in [-1.0, 1.0] {
            let mut prev = v.eval(sign * r_mono);
            for i in 1..=probes {
                let x = sign * (r_mono + 49.0 * i as f64 / probes as f64);
                let val = v.eval(x);
                if val + 1e-12 * (1.0 + prev.abs()) < prev {
                    return Err(Error::parameter(
                        "v",
                        format!("V not nondecreasing in |x| at x={x} (beyond r_mono={r_mono})"),
                    ));
                }
                prev = val;
            }
        }
        let dv = v.derivative();
        let d2v = dv.derivative();
        let label = format!("V={v}");
        Ok(LyapunovSpec {
            v,
            dv,
            d2v,
            delta,
            r_mono,
            label,
        })
    }

    /// The standard choice V = x²/2.
    pub fn quadratic(delta: f64) -> Result<Self> {
        Self::new(Poly::new([0.0, 0.0, 0.5]), delta)
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        self.v.eval(x)
    }

    #[inline]
    pub fn dv(&self, x: f64) -> f64 {
        self.dv.eval(x)
    }

    #[inline]
    pub fn d2v(&self, x: f64) -> f64 {
        self.d2v.eval(x)
    }

    pub fn v_poly(&self) -> &Poly {
        &self.v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowthReport {
    /// Largest probed (‖b‖+‖σ‖)/(1+‖x‖^m).
    pub c_hat: f64,
    /// True when the ratio has stopped growing across the two largest radii.
    pub pass: bool,
}

/// Probes the coefficient growth condition ‖b(x)‖+‖σ(x)‖ ≤ C(1+‖x‖^m) on
/// rings of increasing radius. Empirical by construction: reports the
/// observed constant and whether the ratio is still growing at the edge.
pub fn growth_check(model: &SdeModel, radii: &[f64], samples_per_radius: usize) -> GrowthReport {
    let dirs = direction_probes(model.dim, samples_per_radius.max(2));
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut b = vec![0.0; model.dim];
    let mut s = vec![0.0; model.dim * model.dim_w];
    let mut c_hat: f64 = 0.0;
    for &r in radii {
        let mut worst: f64 = 0.0;
        for dir in &dirs {
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            model.drift_at(&x, &mut b);
            model.diffusion_at(&x, &mut s);
            let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm_s = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = (norm_b + norm_s) / (1.0 + r.powi(model.growth_exponent as i32));
            worst = worst.max(ratio);
        }
        per_radius.push(worst);
        c_hat = c_hat.max(worst);
    }
    let pass = match per_radius.len() {
        0 => false,
        1 => per_radius[0].is_finite(),
        n => per_radius[n - 1] <= per_radius[n - 2] * 1.001 && per_radius[n - 1].is_finite(),
    };
    GrowthReport { c_hat, pass }
}

fn direction_probes(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let driver = crate::rng::Driver::new(0x9e3779b9, 0).substream(17);
    (0..count as u64)
        .map(|i| {
            let mut v: Vec<f64> = (0..dim as u64)
                .map(|j| driver.normal(i * dim as u64 + j))
                .collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
            v.iter_mut().for_each(|c| *c /= norm);
            v
        })
        .collect()
}

/// For each δ, asks the quadrature oracle whether ∫ e^{δV} dμ is finite,
/// by comparing tail-truncated integrals at two radii.
pub fn integrability_probe(
    lyap: &LyapunovSpec,
    oracle: &InvariantOracle1D,
    deltas: &[f64],
) -> Vec<(f64, TailVerdict)> {
    deltas
        .iter()
        .map(|&d| {
            let verdict = oracle.tail_verdict(|x| (d * lyap.v(x)).exp(), None);
            (d, verdict)
        })
        .collect()
}
