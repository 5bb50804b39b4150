//! Closed-form rate constants for monotone SPDEs and the scalar optimisation
//! defining the ultra-exponential rate `λ`.
//!
//! Every constant is assembled from the logarithms of its factors. Exponents
//! such as `4/(r-1)` explode as `r → 1`, so the raw products overflow long
//! before the resulting rate becomes meaningless; working in log space keeps
//! `λ` computable whenever it is representable.

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::spectral::NoiseLaw;
use crate::{Error, Result};

/// The quadruple `(r, θ, η, δ)` of the quantitative monotonicity condition
/// `2⟨b(u)-b(v), u-v⟩ ≤ -max{η‖u-v‖_Q^θ |u-v|_H^{r+1-θ}, δ|u-v|_H^{1+r}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralRateParams {
    pub r: f64,
    pub theta: f64,
    pub eta: f64,
    pub delta: f64,
}

impl GeneralRateParams {
    pub fn new(r: f64, theta: f64, eta: f64, delta: f64) -> Result<Self> {
        let params = Self {
            r,
            theta,
            eta,
            delta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            r,
            theta,
            eta,
            delta,
        } = *self;
        for (name, v) in [("r", r), ("theta", theta), ("eta", eta), ("delta", delta)] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} = {v} is not finite")));
            }
        }
        if r <= 1.0 {
            return Err(Error::domain(format!("r = {r} must exceed 1")));
        }
        if theta < 2.0 {
            return Err(Error::domain(format!("theta = {theta} must be at least 2")));
        }
        if theta <= r - 1.0 {
            return Err(Error::domain(format!(
                "theta = {theta} must exceed r - 1 = {}",
                r - 1.0
            )));
        }
        if eta <= 0.0 {
            return Err(Error::domain(format!("eta = {eta} must be positive")));
        }
        if delta <= 0.0 {
            return Err(Error::domain(format!("delta = {delta} must be positive")));
        }
        Ok(())
    }

    /// `θ + 1 - r`, positive for admissible parameters.
    fn gap(&self) -> f64 {
        self.theta + 1.0 - self.r
    }
}

/// All explicit quantities attached to one admissible parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub alpha: f64,
    pub lambda: f64,
    pub t_opt: f64,
    pub lb_primary: f64,
    pub lb_secondary: f64,
    pub c0: f64,
}

/// `(r+1)/(r-1)`, the time exponent of the ultrabound.
fn time_exponent(r: f64) -> f64 {
    (r + 1.0) / (r - 1.0)
}

fn checked_exp(ln_value: f64, what: &str) -> Result<f64> {
    let v = ln_value.exp();
    if v == 0.0 {
        return Err(Error::RateUnderflow(format!("{what}: ln = {ln_value}")));
    }
    if !v.is_finite() {
        return Err(Error::Domain(format!(
            "{what} overflows f64 (ln = {ln_value}); use the log-space variant"
        )));
    }
    Ok(v)
}

/// `ln α` for the general rate constant. Finite for every admissible input.
pub fn ln_alpha_general(params: &GeneralRateParams) -> Result<f64> {
    params.validate()?;
    let GeneralRateParams {
        r,
        theta,
        eta,
        delta,
    } = *params;
    let gap = params.gap();
    let s = time_exponent(r);
    Ok(s * (theta * (r + 1.0) / (r - 1.0)).ln() + (2.0 + theta).ln()
        - 2.0 * r / (r - 1.0) * gap.ln()
        - 2.0 * gap / (theta * (r - 1.0)) * delta.ln()
        - 2.0 / theta * eta.ln())
}

/// The constant `α` entering `exp[α t^{-(r+1)/(r-1)}]`.
pub fn alpha_general(params: &GeneralRateParams) -> Result<f64> {
    checked_exp(ln_alpha_general(params)?, "alpha")
}

pub fn ln_c0_constant(params: &GeneralRateParams) -> Result<f64> {
    params.validate()?;
    let GeneralRateParams {
        r,
        theta,
        eta,
        delta,
    } = *params;
    let gap = params.gap();
    Ok(-2.0 / theta * eta.ln()
        + 2.0 * (theta + 1.0) / theta * ((2.0 + theta) / gap).ln()
        + 2.0 * gap / (theta * (r - 1.0)) * (2.0 / (delta * (r - 1.0))).ln())
}

/// Constant `C₀` of the two-time bound `exp[C₀ s^{-a₁} (t-s)^{-a₂}] - 1`
/// obtained by chaining the Girsanov estimate with the synchronous
/// contraction.
pub fn c0_constant(params: &GeneralRateParams) -> Result<f64> {
    checked_exp(ln_c0_constant(params)?, "C0")
}

/// The exponents `(a₁, a₂)` of the split `s^{a₁} (t-s)^{a₂}`; they sum to
/// `(r+1)/(r-1)`.
pub fn split_exponents(r: f64, theta: f64) -> (f64, f64) {
    let a1 = 2.0 * (theta + 1.0 - r) / (theta * (r - 1.0));
    let a2 = (2.0 + theta) / theta;
    (a1, a2)
}

/// `ln` of the factor `K` with `inf_{s∈(0,t)} C₀ / (s^{a₁}(t-s)^{a₂}) = C₀ K t^{-(a₁+a₂)}`,
/// written in the expanded form of the final algebra.
pub fn ln_split_factor(r: f64, theta: f64) -> f64 {
    let (a1, a2) = split_exponents(r, theta);
    let s = time_exponent(r);
    s * s.ln()
        + a1 * (theta * (r - 1.0) / (2.0 * (theta + 1.0 - r))).ln()
        + a2 * (theta / (2.0 + theta)).ln()
}

/// `ln(ln(1 + 2e^{-s}))`, accurate for large `s`.
fn ln_log1p_two_exp_neg(s: f64) -> f64 {
    let x_ln = LN_2 - s;
    if x_ln < -700.0 {
        // ln(1+x) = x (1 - x/2 + ...), and x/2 is below f64 resolution here.
        return x_ln;
    }
    let x = x_ln.exp();
    x_ln + (x.ln_1p() / x).ln()
}

/// `ln(e^x - 1)` from `ln x`, without overflow, underflow or cancellation.
fn ln_expm1_of_ln(ln_x: f64) -> f64 {
    if ln_x < -30.0 {
        ln_x + 0.5 * ln_x.exp()
    } else {
        let x = ln_x.exp();
        if x > 30.0 {
            x + (-(-x).exp()).ln_1p()
        } else {
            x.exp_m1().ln()
        }
    }
}

/// The functional `g(t) = (1/t) ln(2 / (exp[α t^{-(r+1)/(r-1)}] - 1))`
/// whose supremum over `t > 0` is `λ`, with `α` passed as `ln α`.
pub fn rate_functional_ln(ln_alpha: f64, r: f64, t: f64) -> f64 {
    (LN_2 - ln_expm1_of_ln(ln_alpha - time_exponent(r) * t.ln())) / t
}

/// [`rate_functional_ln`] with `α` given directly.
pub fn rate_functional(alpha: f64, r: f64, t: f64) -> f64 {
    rate_functional_ln(alpha.ln(), r, t)
}

/// Smallest `t` at which `g(t)` is non-negative: `(α / ln 3)^{(r-1)/(r+1)}`.
pub fn ln_t_min(ln_alpha: f64, r: f64) -> f64 {
    (ln_alpha - 3f64.ln().ln()) / time_exponent(r)
}

/// The evaluation point that turns `g` into the first closed-form lower bound:
/// `t_w = (α / ln(1 + 2e^{-(r+1)/(r-1)}))^{(r-1)/(r+1)}`.
pub fn witness_time(alpha: f64, r: f64) -> f64 {
    let s = time_exponent(r);
    ((alpha.ln() - ln_log1p_two_exp_neg(s)) / s).exp()
}

/// Number of log-spaced bracketing points over `(t_min, 10⁴ t_min)`.
const BRACKET_POINTS: usize = 2000;
const BRACKET_DECADES: f64 = 4.0;
const GOLDEN_REL_TOL: f64 = 1e-10;

/// Maximise `g` over `t > 0` given `ln α`. Returns `(λ, t₀)`.
pub fn lambda_sup_ln(ln_alpha: f64, r: f64) -> Result<(f64, f64)> {
    if !ln_alpha.is_finite() {
        return Err(Error::domain(format!("ln alpha = {ln_alpha} is not finite")));
    }
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::domain(format!("r = {r} must exceed 1")));
    }
    let ln_tmin = ln_t_min(ln_alpha, r);
    let g = |ln_t: f64| rate_functional_ln(ln_alpha, r, ln_t.exp());

    let step = BRACKET_DECADES * std::f64::consts::LN_10 / BRACKET_POINTS as f64;
    let mut best = (1usize, f64::NEG_INFINITY);
    for i in 1..=BRACKET_POINTS {
        let v = g(ln_tmin + step * i as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == BRACKET_POINTS {
        return Err(Error::Optimizer(
            "maximum of g sits on the upper edge of the bracket".into(),
        ));
    }
    let lo = ln_tmin + step * (best.0 - 1) as f64;
    let hi = ln_tmin + step * (best.0 + 1) as f64;
    // Relative tolerance in t is absolute tolerance in ln t.
    let ln_t0 = golden_section_max(g, lo, hi, GOLDEN_REL_TOL);
    let t0 = ln_t0.exp();
    let lambda = g(ln_t0).max(best.1);
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Optimizer(format!(
            "no positive value of g found (best {lambda})"
        )));
    }
    Ok((lambda, t0))
}

/// `(λ, t₀)` with `λ = sup_t g(t)`.
pub fn lambda_sup(alpha: f64, r: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha = {alpha} must be positive")));
    }
    lambda_sup_ln(alpha.ln(), r)
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `(ln lb_primary, ln lb_secondary)`.
pub fn ln_lambda_lower_bounds(params: &GeneralRateParams) -> Result<(f64, f64)> {
    params.validate()?;
    let GeneralRateParams {
        r,
        theta,
        eta,
        delta,
    } = *params;
    let gap = params.gap();
    let base = 2.0 * r / (r + 1.0) * gap.ln()
        + 2.0 * gap / (theta * (r + 1.0)) * delta.ln()
        + 2.0 * (r - 1.0) / (theta * (r + 1.0)) * eta.ln()
        - theta.ln()
        - (r - 1.0) / (r + 1.0) * (2.0 + theta).ln();
    let primary = base + (r - 1.0) / (r + 1.0) * ln_log1p_two_exp_neg(time_exponent(r));
    Ok((primary, base - 1.0))
}

/// The two closed-form lower bounds on `λ`; the second replaces the
/// logarithmic factor by its infimum `e^{-1}`.
pub fn lambda_lower_bounds(params: &GeneralRateParams) -> Result<(f64, f64)> {
    let (p, s) = ln_lambda_lower_bounds(params)?;
    Ok((
        checked_exp(p, "lb_primary")?,
        checked_exp(s, "lb_secondary")?,
    ))
}

/// Full report for one parameter set. `α` and `C₀` may overflow for `r`
/// close to 1 even though `λ` is fine; that is reported as an error.
pub fn rate_report(params: &GeneralRateParams) -> Result<RateReport> {
    let ln_alpha = ln_alpha_general(params)?;
    let (lambda, t_opt) = lambda_sup_ln(ln_alpha, params.r)?;
    let (lb_primary, lb_secondary) = lambda_lower_bounds(params)?;
    Ok(RateReport {
        alpha: checked_exp(ln_alpha, "alpha")?,
        lambda,
        t_opt,
        lb_primary,
        lb_secondary,
        c0: c0_constant(params)?,
    })
}

// ---------------------------------------------------------------------------
// Stochastic porous medium equation  dX = Δ X^r dt + σ dW

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorousMediumSpec {
    pub l: f64,
    pub sigma: f64,
    pub r: f64,
    /// Defaults to `r + 1`, the minimiser of `α_θ`.
    pub theta: Option<f64>,
}

impl PorousMediumSpec {
    pub fn new(l: f64, sigma: f64, r: f64) -> Self {
        Self {
            l,
            sigma,
            r,
            theta: None,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(self.r + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::domain(format!("l = {} must be positive", self.l)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!(
                "sigma = {} must be positive",
                self.sigma
            )));
        }
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(Error::domain(format!("r = {} must exceed 1", self.r)));
        }
        let theta = self.theta();
        let r = self.r;
        if !(theta > r - 1.0 && theta >= 2.0 && theta <= r + 1.0) {
            return Err(Error::domain(format!(
                "theta = {theta} outside (r-1, r+1] ∩ [2, r+1] for r = {r}"
            )));
        }
        Ok(())
    }

    /// `(η, δ)` for a given admissible `θ`.
    pub fn constants(&self, theta: f64) -> (f64, f64) {
        let k = PI / self.l;
        let pre = 2f64.powf(2.0 - self.r);
        let eta = pre * self.sigma.powf(theta) * k.powf(self.r + 1.0 - theta);
        let delta = pre * k.powf(self.r + 1.0);
        (eta, delta)
    }

    pub fn params(&self, theta: f64) -> Result<GeneralRateParams> {
        let (eta, delta) = self.constants(theta);
        GeneralRateParams::new(self.r, theta, eta, delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorousMediumRates {
    /// The requested `θ` with its `(η, δ)` and `α_θ`.
    pub theta: f64,
    pub eta: f64,
    pub delta: f64,
    pub alpha_theta: f64,
    /// Report at the optimal `θ = r + 1`.
    pub report: RateReport,
    pub optimal: GeneralRateParams,
}

pub fn porous_medium_rates(spec: &PorousMediumSpec) -> Result<PorousMediumRates> {
    spec.validate()?;
    let theta = spec.theta();
    let params = spec.params(theta)?;
    let optimal = spec.params(spec.r + 1.0)?;
    Ok(PorousMediumRates {
        theta,
        eta: params.eta,
        delta: params.delta,
        alpha_theta: alpha_general(&params)?,
        report: rate_report(&optimal)?,
        optimal,
    })
}

/// `α` of the porous medium equation at `θ = r+1`, in its own closed form
/// `l^{4/(r-1)}(3+r)(r+1)^{2(r+1)/(r-1)} / ((2π)^{4/(r-1)} σ² (r-1)^{(r+1)/(r-1)})`.
pub fn porous_alpha_closed_form(l: f64, sigma: f64, r: f64) -> f64 {
    let s = time_exponent(r);
    let ln = 4.0 / (r - 1.0) * (l / (2.0 * PI)).ln() + (3.0 + r).ln() + 2.0 * s * (r + 1.0).ln()
        - 2.0 * sigma.ln()
        - s * (r - 1.0).ln();
    ln.exp()
}

/// The two porous-medium lower bounds on `λ` in their own closed form.
pub fn porous_lower_bounds_closed_form(l: f64, sigma: f64, r: f64) -> (f64, f64) {
    let q = (r - 1.0) / (r + 1.0);
    let base = 4.0 / (r + 1.0) * (2.0 * PI / l).ln() + 2.0 * q * sigma.ln()
        - (r + 1.0).ln()
        - q * (3.0 + r).ln();
    (
        (base + q * ln_log1p_two_exp_neg(time_exponent(r))).exp(),
        (base - 1.0).exp(),
    )
}

// ---------------------------------------------------------------------------
// Stochastic p-Laplace equation  dX = Δ_p X dt + Q dW

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceSpec {
    pub l: f64,
    pub sigma: f64,
    pub p: f64,
    /// Noise coefficients `q_i`; defaults to the extremal `σ/i`.
    pub q: NoiseLaw,
}

impl PLaplaceSpec {
    pub fn new(l: f64, sigma: f64, p: f64) -> Self {
        Self {
            l,
            sigma,
            p,
            q: NoiseLaw::Power {
                scale: sigma,
                exponent: -1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::domain(format!("l = {} must be positive", self.l)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!(
                "sigma = {} must be positive",
                self.sigma
            )));
        }
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::domain(format!("p = {} must exceed 2", self.p)));
        }
        match self.q {
            NoiseLaw::Scalar(_) => Err(Error::domain(
                "constant q_i is not square-summable; use a power law with exponent < -1/2",
            )),
            NoiseLaw::Power { scale, exponent } => {
                // q_i² ≥ σ²/i² for all i  ⇔  exponent ≥ -1 and |scale| ≥ σ.
                if exponent < -1.0 || scale.abs() < self.sigma {
                    return Err(Error::domain(format!(
                        "q_i = {scale}·i^{exponent} violates q_i² ≥ σ²/i² with σ = {}",
                        self.sigma
                    )));
                }
                if !self.q.square_summable() {
                    return Err(Error::domain(format!(
                        "q_i = {scale}·i^{exponent} is not square-summable"
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceRates {
    pub params: GeneralRateParams,
    pub report: RateReport,
}

/// `r = p-1`, `θ = p`, `η = 2^{p-1}(πσ/l)^p`, `δ = 2^{p-1}(π/l)^p`.
pub fn p_laplace_rates(spec: &PLaplaceSpec) -> Result<PLaplaceRates> {
    spec.validate()?;
    let p = spec.p;
    let pre = 2f64.powf(p - 1.0);
    let params = GeneralRateParams::new(
        p - 1.0,
        p,
        pre * (PI * spec.sigma / spec.l).powf(p),
        pre * (PI / spec.l).powf(p),
    )?;
    Ok(PLaplaceRates {
        params,
        report: rate_report(&params)?,
    })
}

/// `α = (p²l²/(π²(p-2)))^{p/(p-2)} (2+p) / (σ² 2^{4(p-1)/(p-2)})`.
pub fn p_laplace_alpha_closed_form(l: f64, sigma: f64, p: f64) -> f64 {
    let e = p / (p - 2.0);
    let ln = e * (p * p * l * l / (PI * PI * (p - 2.0))).ln() + (2.0 + p).ln()
        - 2.0 * sigma.ln()
        - 4.0 * (p - 1.0) / (p - 2.0) * LN_2;
    ln.exp()
}

pub fn p_laplace_lower_bounds_closed_form(l: f64, sigma: f64, p: f64) -> (f64, f64) {
    let q = (p - 2.0) / p;
    let base = 2.0 * PI.ln() + 4.0 * (p - 1.0) / p * LN_2 + 2.0 * q * sigma.ln()
        - p.ln()
        - 2.0 * l.ln()
        - q * (2.0 + p).ln();
    (
        (base + q * ln_log1p_two_exp_neg(p / (p - 2.0))).exp(),
        (base - 1.0).exp(),
    )
}

// ---------------------------------------------------------------------------
// Stochastic fast-diffusion equation, r ∈ (0, 1)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastDiffusionSpec {
    pub l: f64,
    pub r: f64,
    /// Noise decay exponent in `q_i = λ_i^{1/2 - κ}`.
    pub kappa: f64,
    /// Scale of the Lyapunov function `exp[γ(1+|x|_H²)^{(1-r)/2}]`.
    pub gamma: f64,
    /// Defaults to `4/(1+r)`.
    pub theta: Option<f64>,
    /// Defaults to `1 - 4κ/(1+r)`.
    pub eps: Option<f64>,
}

impl FastDiffusionSpec {
    pub fn new(l: f64, r: f64, kappa: f64, gamma: f64) -> Self {
        Self {
            l,
            r,
            kappa,
            gamma,
            theta: None,
            eps: None,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(4.0 / (1.0 + self.r))
    }

    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(1.0 - 4.0 * self.kappa / (1.0 + self.r))
    }

    /// The constructive noise `q_i = λ_i^{1/2-κ} = (π/l)^{1-2κ} i^{1-2κ}`.
    pub fn noise_law(&self) -> NoiseLaw {
        let e = 1.0 - 2.0 * self.kappa;
        NoiseLaw::Power {
            scale: (PI / self.l).powf(e),
            exponent: e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastDiffusionAdmissibility {
    pub admissible: bool,
    pub theta: f64,
    pub eps: f64,
    /// `Σ q_i²/λ_i < ∞`.
    pub hilbert_schmidt: bool,
    /// `inf_i |q_i| λ_i^{(1-ε)/θ - 1/2} > 0`.
    pub inf_positive: bool,
    pub reasons: Vec<String>,
}

/// Check the noise conditions for the constructive choice `q_i = λ_i^{1/2-κ}`.
/// Violations are reported, not raised.
pub fn fast_diffusion_admissible(spec: &FastDiffusionSpec) -> FastDiffusionAdmissibility {
    let FastDiffusionSpec { l, r, kappa, .. } = *spec;
    let theta = spec.theta();
    let eps = spec.eps();
    let mut reasons = Vec::new();

    if !(l > 0.0) {
        reasons.push(format!("l = {l} must be positive"));
    }
    if !(spec.gamma > 0.0) {
        reasons.push(format!("γ = {} must be positive", spec.gamma));
    }
    if !(r > 0.0 && r < 1.0) {
        reasons.push(format!("r = {r} outside (0, 1)"));
    } else if r <= 1.0 / 3.0 {
        reasons.push(format!("r ≤ 1/3 (r = {r}): the constructive κ-range is empty"));
    }
    // Σ λ_i^{1-2κ}/λ_i = c Σ i^{-4κ} converges iff κ > 1/4.
    let hilbert_schmidt = kappa > 0.25;
    if !hilbert_schmidt {
        reasons.push(format!("κ ≤ 1/4 (κ = {kappa}): Σ q_i²/λ_i diverges"));
    }
    let kappa_max = (1.0 + 3.0 * r) / 8.0;
    if kappa >= kappa_max {
        reasons.push(format!("κ ≥ (1+3r)/8 = {kappa_max} (κ = {kappa})"));
    }
    if theta < 4.0 / (1.0 + r) {
        reasons.push(format!("θ = {theta} below 4/(1+r) = {}", 4.0 / (1.0 + r)));
    }
    let eps_lo = (1.0 - r) / (2.0 * (1.0 + r));
    if !(eps > eps_lo && eps < 1.0) {
        reasons.push(format!("ε = {eps} outside ({eps_lo}, 1)"));
    }
    // |q_i| λ_i^{(1-ε)/θ - 1/2} = λ_i^{(1-ε)/θ - κ}; bounded below iff the
    // exponent is non-negative. The slack absorbs rounding at equality.
    let inf_positive = (1.0 - eps) / theta - kappa >= -1e-12;
    if !inf_positive {
        reasons.push(format!(
            "κ > (1-ε)/θ = {}: inf_i |q_i| λ_i^(1-ε)/θ-1/2 = 0",
            (1.0 - eps) / theta
        ));
    }
    FastDiffusionAdmissibility {
        admissible: reasons.is_empty(),
        theta,
        eps,
        hilbert_schmidt,
        inf_positive,
        reasons,
    }
}

/// Ratio `lb_primary / lb_secondary = e {ln(1+2e^{-(r+1)/(r-1)})}^{(r-1)/(r+1)}`.
pub fn lower_bound_ratio(r: f64) -> f64 {
    E * ((r - 1.0) / (r + 1.0) * ln_log1p_two_exp_neg(time_exponent(r))).exp()
}
