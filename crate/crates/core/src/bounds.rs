//! Hoeffding-type tail bound for time averages of a uniformly ergodic
//! diffusion, and its two closed-form specialisations.
//!
//! For `t > 2‖f‖‖Q♯‖/ε`,
//!
//! ```text
//! P_x( (1/t)∫₀ᵗ f(X_s)ds − π(f) ≥ ε )
//!     ≤ exp{ −2(tε − 2‖f‖‖Q♯‖)² / ((t+1)‖f‖²(2‖Q♯‖+1)²) }
//! ```
//!
//! The exponent is the minimum over `θ ≥ 0` of
//! `θ²(t+1)(2‖Q♯‖+1)²‖f‖²/8 − θ(tε − 2‖Q♯‖‖f‖)`, attained at `θ*`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::models::{DiffusionSpec, Observable};

/// Average hitting time of the tan-OU process with `ρ = 1/2`:
/// `Σ 2/(i(i+1)) = 2`.
pub const TANOU_HALF_T_AV: f64 = 2.0;

/// Inputs of one bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub t: f64,
    pub eps: f64,
    pub f_norm: f64,
    pub q_norm: f64,
}

impl BoundQuery {
    pub fn new(t: f64, eps: f64, f_norm: f64, q_norm: f64) -> Result<Self> {
        for (name, v) in [
            ("t", t),
            ("eps", eps),
            ("f_norm", f_norm),
            ("q_norm", q_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            t,
            eps,
            f_norm,
            q_norm,
        })
    }
}

/// Outcome of one bound evaluation. `exponent`, `bound` and `theta_star`
/// are present only when `valid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub valid: bool,
    pub threshold: f64,
    pub exponent: Option<f64>,
    pub bound: Option<f64>,
    pub theta_star: Option<f64>,
}

impl BoundResult {
    /// `min(bound, 1)`, or 1 for a vacuous (invalid) query.
    pub fn bound_effective(&self) -> f64 {
        self.bound.map_or(1.0, |b| b.min(1.0))
    }
}

/// Smallest horizon (exclusive) for which the bound applies.
pub fn validity_threshold(eps: f64, f_norm: f64, q_norm: f64) -> f64 {
    2.0 * f_norm * q_norm / eps
}

pub fn hoeffding_bound(q: &BoundQuery) -> BoundResult {
    let threshold = validity_threshold(q.eps, q.f_norm, q.q_norm);
    if !(q.t > threshold) {
        return BoundResult {
            valid: false,
            threshold,
            exponent: None,
            bound: None,
            theta_star: None,
        };
    }
    let gap = q.t * q.eps - 2.0 * q.f_norm * q.q_norm;
    let spread = 2.0 * q.q_norm + 1.0;
    let denom = (q.t + 1.0) * q.f_norm * q.f_norm * spread * spread;
    let exponent = -2.0 * gap * gap / denom;
    let theta_star = 4.0 * gap / denom;
    BoundResult {
        valid: true,
        threshold,
        exponent: Some(exponent),
        bound: Some(exponent.exp()),
        theta_star: Some(theta_star),
    }
}

/// Validating wrapper around [`hoeffding_bound`].
pub fn hoeffding(t: f64, eps: f64, f_norm: f64, q_norm: f64) -> Result<BoundResult> {
    Ok(hoeffding_bound(&BoundQuery::new(t, eps, f_norm, q_norm)?))
}

/// Occupation-time bound for the Jacobi process: `f = 1_A`, `‖f‖ ≤ 1`,
/// `‖Q♯‖ ≤ 2 t_av`, giving `exp{−2(tε − 4t_av)² / ((t+1)(4t_av+1)²)}`.
pub fn jacobi_occupation_bound(t: f64, eps: f64, t_av: f64) -> Result<BoundResult> {
    if !(t_av > 0.0 && t_av.is_finite()) {
        return Err(domain(format!(
            "t_av must be positive and finite, got {t_av}"
        )));
    }
    hoeffding(t, eps, 1.0, 2.0 * t_av)
}

/// How the tan-OU exponential-functional constants are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    /// `‖f‖ = e^{|u|π/2}` and `π(f)` by quadrature.
    #[default]
    Computed,
    /// `‖f‖ = e^{uπ/2}` and `π(f) = 2cosh(uπ/2)/(1+u²)`.
    Paper,
}

/// Bound for `∫₀ᵗ e^{uX_s}ds` under the tan-OU process with `ρ = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TanOuBound {
    pub result: BoundResult,
    pub mode: ConstantMode,
    pub u: f64,
    pub t_av: f64,
    pub f_norm: f64,
    pub q_norm: f64,
    /// `π(f)`, the centering per unit time.
    pub centering_rate: f64,
    /// `t·π(f)`, the centering of the time integral.
    pub centering: f64,
}

pub fn tanou_expfunc_bound(t: f64, eps: f64, u: f64, mode: ConstantMode) -> Result<TanOuBound> {
    if !u.is_finite() {
        return Err(domain(format!("u must be finite, got {u}")));
    }
    let (f_norm, centering_rate) = match mode {
        ConstantMode::Computed => {
            let spec = DiffusionSpec::tan_ou(0.5)?;
            let f = Observable::exp_on(u, spec.interval())?;
            let rate = spec.stationary()?.expectation_by_quadrature(&f)?;
            (f.sup_norm(), rate)
        }
        ConstantMode::Paper => (
            (u * FRAC_PI_2).exp(),
            2.0 * (u * FRAC_PI_2).cosh() / (1.0 + u * u),
        ),
    };
    let q_norm = 2.0 * TANOU_HALF_T_AV;
    let result = hoeffding(t, eps, f_norm, q_norm)?;
    Ok(TanOuBound {
        result,
        mode,
        u,
        t_av: TANOU_HALF_T_AV,
        f_norm,
        q_norm,
        centering_rate,
        centering: t * centering_rate,
    })
}
