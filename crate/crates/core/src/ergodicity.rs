//! Uniform-ergodicity criteria, the average hitting time and the
//! deviation-kernel norm surrogate.
//!
//! Two finiteness tests are available:
//!
//! * the integral test `∫_S m([x,u]) s(x) dx < ∞`, applicable when the lower
//!   endpoint is a reflecting boundary;
//! * the spectral test `t_av = Σ_{i≥1} 1/λ_i < ∞` over the non-zero
//!   eigenvalues of `−𝒜` (eigentime identity), available when the spectrum
//!   is known in closed form.
//!
//! Whenever `t_av` is finite the deviation kernel satisfies `‖Q♯‖ ≤ 2 t_av`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::models::{Boundary, ClosedForm, DiffusionSpec};
use crate::quad::{self, Tolerance};
use crate::sum::CompensatedSum;

/// Iteration cap for eigentime series.
pub const MAX_TERMS: u64 = 10_000_000;

/// Default truncation tolerance for [`eigentime`].
pub const DEFAULT_TOL: f64 = 1e-9;

type IndexFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// Non-zero eigenvalues `λ_1 ≤ λ_2 ≤ …` of `−𝒜` with rigorous tail bounds
/// for `Σ_{i>N} 1/λ_i`.
#[derive(Clone)]
pub struct EigenSequence {
    label: String,
    eval: IndexFn,
    tail_envelope: IndexFn,
    tail_floor: Option<IndexFn>,
}

impl fmt::Debug for EigenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenSequence")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl EigenSequence {
    /// `tail_envelope(N)` must bound `Σ_{i>N} 1/λ_i` from above and be
    /// nonincreasing in `N`.
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(u64) -> f64 + Send + Sync + 'static,
        tail_envelope: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            tail_envelope: Arc::new(tail_envelope),
            tail_floor: None,
        }
    }

    /// Adds a lower bound on the tail; the eigentime estimate then adds it
    /// to the partial sum and only the gap between the bounds counts as
    /// truncation uncertainty.
    pub fn with_tail_floor(mut self, floor: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        self.tail_floor = Some(Arc::new(floor));
        self
    }

    /// `λ_i = (σ²/2) i (i − 1 + 2b/σ²)`.
    pub fn jacobi(b: f64, sigma2: f64) -> Result<Self> {
        if !(b > 0.0 && sigma2 > 0.0) {
            return Err(domain("Jacobi spectrum needs b > 0 and sigma2 > 0"));
        }
        let c = 2.0 * b / sigma2;
        let d = c - 1.0;
        let scale = 2.0 / sigma2;
        // ∫_N^∞ dx / (x (x + d))
        let integral = move |n: u64| {
            let n = n as f64;
            if d == 0.0 {
                1.0 / n
            } else {
                (d / n).ln_1p() / d
            }
        };
        Ok(Self::new(
            format!("jacobi(b={b},sigma2={sigma2})"),
            move |i| {
                let i = i as f64;
                0.5 * sigma2 * i * (i - 1.0 + c)
            },
            move |n| scale * integral(n),
        )
        .with_tail_floor(move |n| scale * integral(n + 1)))
    }

    /// `λ_i = i (ρ + i/2)`.
    pub fn tan_ou(rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(domain("tan-OU spectrum needs rho > 0"));
        }
        // 1/λ_i = 2 / (i (i + 2ρ)); ∫_N^∞ 2 dx / (x (x + 2ρ)) = ln(1 + 2ρ/N) / ρ.
        let integral = move |n: u64| (2.0 * rho / n as f64).ln_1p() / rho;
        Ok(Self::new(
            format!("tanou(rho={rho})"),
            move |i| {
                let i = i as f64;
                i * (rho + 0.5 * i)
            },
            integral,
        )
        .with_tail_floor(move |n| integral(n + 1)))
    }

    /// Closed-form spectrum for the built-in models that have one.
    pub fn for_spec(spec: &DiffusionSpec) -> Option<Self> {
        match spec.closed_form()? {
            ClosedForm::Jacobi { b, sigma2, .. } => Self::jacobi(b, sigma2).ok(),
            ClosedForm::TanOu { rho } => Self::tan_ou(rho).ok(),
            ClosedForm::MaoClass { .. } => None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eigenvalue(&self, i: u64) -> f64 {
        (self.eval)(i)
    }

    pub fn tail_envelope(&self, n: u64) -> f64 {
        (self.tail_envelope)(n)
    }

    pub fn tail_floor(&self, n: u64) -> f64 {
        self.tail_floor.as_ref().map_or(0.0, |f| f(n))
    }
}

/// Truncated eigentime series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigentimeEstimate {
    pub value: f64,
    pub uncertainty: f64,
    pub terms: u64,
}

/// Average hitting time `t_av = Σ 1/λ_i`.
///
/// Terms are accumulated left to right with compensated summation until the
/// gap between the tail envelope and the tail floor falls below `tol`. The
/// returned value is the partial sum plus the tail floor, so it never
/// decreases as `tol` shrinks and never exceeds the true sum.
pub fn eigentime(seq: &EigenSequence, tol: f64) -> Result<EigentimeEstimate> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut sum = CompensatedSum::default();
    let mut prev = 0.0;
    for n in 1..=MAX_TERMS {
        let lambda = seq.eigenvalue(n);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!(
                "eigenvalue {n} of {} is {lambda}",
                seq.label
            )));
        }
        if lambda < prev {
            return Err(domain(format!(
                "eigenvalues of {} decrease at index {n}",
                seq.label
            )));
        }
        prev = lambda;
        sum.add(1.0 / lambda);
        let floor = seq.tail_floor(n);
        let gap = seq.tail_envelope(n) - floor;
        if gap < tol {
            return Ok(EigentimeEstimate {
                value: sum.value() + floor,
                uncertainty: gap.max(0.0),
                terms: n,
            });
        }
    }
    Err(Error::DivergenceSuspected {
        terms: MAX_TERMS,
        envelope: seq.tail_envelope(MAX_TERMS),
    })
}

/// Operator-norm surrogate `‖Q♯‖ ≤ 2 t_av`.
pub fn q_sharp_norm_bound(t_av: f64) -> f64 {
    debug_assert!(t_av.is_finite() && t_av > 0.0);
    2.0 * t_av
}

/// `∫_S m([x,u]) s(x) dx` for a diffusion with reflecting lower boundary.
///
/// Returns [`Error::Divergent`] when the domain exhaustion stops shrinking.
pub fn integral_condition(spec: &DiffusionSpec) -> Result<f64> {
    let iv = spec.interval();
    if iv.lower_boundary != Boundary::Reflecting || !iv.lower.is_finite() {
        return Err(Error::Inapplicable(
            "integral test needs a reflecting lower boundary".into(),
        ));
    }
    let integrand = |x: f64| match (spec.speed_tail(x), spec.scale_density(x)) {
        (Ok(tail), Ok(s)) => tail * s,
        _ => f64::NAN,
    };
    // A divergent speed tail surfaces here as a non-finite integrand.
    spec.speed_tail(spec.reference_point())?;
    let est = quad::integrate(
        &integrand,
        iv.lower,
        iv.upper,
        &[spec.reference_point()],
        Tolerance::new(1e-10, 1e-9),
    )?;
    Ok(est.value)
}

/// Outcome of one criterion. Serialises as a bare number when finite and as
/// `{"divergent": true, "rounds": n}` when divergent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CriterionValue {
    Finite(f64),
    Divergent { divergent: bool, rounds: u64 },
    Unavailable { reason: String },
}

impl CriterionValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            CriterionValue::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, CriterionValue::Divergent { .. })
    }

    fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) => CriterionValue::Finite(v),
            Err(Error::Divergent { rounds }) => CriterionValue::Divergent {
                divergent: true,
                rounds: rounds as u64,
            },
            Err(Error::DivergenceSuspected { terms, .. }) => CriterionValue::Divergent {
                divergent: true,
                rounds: terms,
            },
            Err(e) => CriterionValue::Unavailable {
                reason: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UniformlyErgodic,
    NotUniformlyErgodic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IntegralTest,
    SpectralTest,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub spec_id: String,
    pub integral_value: CriterionValue,
    pub t_av: CriterionValue,
    pub t_av_uncertainty: Option<f64>,
    pub q_sharp_norm_bound: Option<f64>,
    pub verdict: Verdict,
    /// Criteria that produced a definite (finite or divergent) answer.
    pub method: Option<Method>,
}

/// Runs every applicable criterion. Failures are recorded per criterion.
pub fn assess(spec: &DiffusionSpec, seq: Option<&EigenSequence>) -> ErgodicityReport {
    let integral_value = CriterionValue::from_result(integral_condition(spec));
    let (t_av, t_av_uncertainty) = match seq {
        Some(seq) => match eigentime(seq, DEFAULT_TOL) {
            Ok(est) => (CriterionValue::Finite(est.value), Some(est.uncertainty)),
            Err(e) => (CriterionValue::from_result(Err(e)), None),
        },
        None => (
            CriterionValue::Unavailable {
                reason: "no eigenvalue sequence supplied".into(),
            },
            None,
        ),
    };
    let q_sharp_norm_bound = t_av.finite().map(q_sharp_norm_bound);

    let decided = |c: &CriterionValue| c.finite().is_some() || c.is_divergent();
    let method = match (decided(&integral_value), decided(&t_av)) {
        (true, true) => Some(Method::Both),
        (true, false) => Some(Method::IntegralTest),
        (false, true) => Some(Method::SpectralTest),
        (false, false) => None,
    };
    let verdict = if integral_value.finite().is_some() || t_av.finite().is_some() {
        Verdict::UniformlyErgodic
    } else if integral_value.is_divergent() || t_av.is_divergent() {
        Verdict::NotUniformlyErgodic
    } else {
        Verdict::Inconclusive
    };

    ErgodicityReport {
        spec_id: spec.id(),
        integral_value,
        t_av,
        t_av_uncertainty,
        q_sharp_norm_bound,
        verdict,
        method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::models::StateInterval;
    use approx::assert_relative_eq;

    fn brute_partial(seq: &EigenSequence, n: u64) -> f64 {
        (1..=n)
            .map(|i| 1.0 / seq.eigenvalue(i))
            .collect::<CompensatedSum>()
            .value()
    }

    #[test]
    fn tanou_average_hitting_time_is_two() {
        let est = eigentime(&EigenSequence::tan_ou(0.5).unwrap(), 1e-9).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn jacobi_telescoping_sum_is_one() {
        let est = eigentime(&EigenSequence::jacobi(2.0, 2.0).unwrap(), 1e-9).unwrap();
        assert!((est.value - 1.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn jacobi_basel_sum() {
        // b = 1, σ² = 2: Σ 1/i². Oracle: partial sum to 10⁶ plus 1/(N+½).
        let seq = EigenSequence::jacobi(1.0, 2.0).unwrap();
        let n = 1_000_000u64;
        let oracle = brute_partial(&seq, n) + 1.0 / (n as f64 + 0.5);
        assert!((oracle - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        let est = eigentime(&seq, 1e-9).unwrap();
        assert!((est.value - oracle).abs() < 1e-9);
    }

    #[test]
    fn envelopes_bracket_the_true_tail() {
        for seq in [
            EigenSequence::jacobi(2.0, 2.0).unwrap(),
            EigenSequence::jacobi(0.3, 2.0).unwrap(),
            EigenSequence::jacobi(5.0, 0.7).unwrap(),
            EigenSequence::tan_ou(0.5).unwrap(),
            EigenSequence::tan_ou(2.0).unwrap(),
        ] {
            let big = 2_000_000u64;
            let total = brute_partial(&seq, big) + seq.tail_envelope(big);
            let mut last = f64::INFINITY;
            for n in [1u64, 2, 5, 10, 100, 1000, 10_000] {
                let tail = total - brute_partial(&seq, n);
                let env = seq.tail_envelope(n);
                assert!(env >= tail - 1e-6, "{} n={n}", seq.label());
                assert!(seq.tail_floor(n) <= tail + 1e-12);
                assert!(env <= last);
                last = env;
            }
        }
    }

    #[test]
    fn eigentime_is_monotone_in_tolerance() {
        let seq = EigenSequence::jacobi(1.3, 0.8).unwrap();
        let mut last = 0.0;
        for tol in [1e-3, 1e-5, 1e-7, 1e-9] {
            let v = eigentime(&seq, tol).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn jacobi_grid_matches_long_partial_sums() {
        for sigma2 in [0.5, 2.0, 3.0] {
            for b in [0.4, 1.0, 2.5] {
                let seq = EigenSequence::jacobi(b, sigma2).unwrap();
                let n = 1_000_000;
                let d = 2.0 * b / sigma2 - 1.0;
                // Midpoint-shifted analytic tail: ∫_{N+½}^∞ (2/σ²) dx / (x(x+d)).
                let m = n as f64 + 0.5;
                let tail = 2.0 / sigma2
                    * if d == 0.0 {
                        1.0 / m
                    } else {
                        (d / m).ln_1p() / d
                    };
                let oracle = brute_partial(&seq, n) + tail;
                let est = eigentime(&seq, 1e-8).unwrap();
                assert!((est.value - oracle).abs() < 1e-7, "b={b} s2={sigma2}");
            }
        }
    }

    #[test]
    fn divergent_series_is_reported() {
        let seq = EigenSequence::new("linear", |i| i as f64, |n| 1.0 / (n as f64).sqrt() * 1e3);
        assert!(matches!(
            eigentime(&seq, 1e-9),
            Err(Error::DivergenceSuspected { .. })
        ));
        assert!(eigentime(&seq, 0.0).is_err());
    }

    #[test]
    fn q_sharp_examples() {
        assert_eq!(q_sharp_norm_bound(2.0), 4.0);
        assert_eq!(q_sharp_norm_bound(1.0), 2.0);
        let pi2 = std::f64::consts::PI.powi(2);
        assert_relative_eq!(
            q_sharp_norm_bound(pi2 / 6.0),
            pi2 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn mao_integral_condition_matches_closed_form() {
        for (gamma, tol) in [(3.0, 1e-6), (4.0, 1e-6)] {
            let spec = DiffusionSpec::mao_class(gamma).unwrap();
            let v = integral_condition(&spec).unwrap();
            let closed = 1.0 / ((gamma - 1.0) * (gamma - 2.0));
            assert!((v - closed).abs() < tol, "gamma={gamma}: {v} vs {closed}");
        }
        let spec = DiffusionSpec::mao_class(2.05).unwrap();
        let v = integral_condition(&spec).unwrap();
        let closed = 1.0 / (1.05 * 0.05);
        assert!(((v - closed) / closed).abs() < 1e-4, "{v} vs {closed}");
    }

    #[test]
    fn mao_gamma_two_diverges() {
        let spec = DiffusionSpec::mao_class_unchecked(2.0).unwrap();
        assert!(matches!(
            integral_condition(&spec),
            Err(Error::Divergent { .. })
        ));
        let report = assess(&spec, None);
        assert_eq!(report.verdict, Verdict::NotUniformlyErgodic);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["integral_value"]["divergent"], true);
    }

    #[test]
    fn integral_condition_requires_reflecting_lower_boundary() {
        let spec = DiffusionSpec::tan_ou(0.5).unwrap();
        assert!(matches!(
            integral_condition(&spec),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn reference_point_does_not_move_integral() {
        let spec = DiffusionSpec::mao_class(3.0).unwrap();
        let a = integral_condition(&spec).unwrap();
        let b = integral_condition(&spec.clone().with_reference_point(4.2).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9);
        let jac = DiffusionSpec::jacobi(0.4, 1.5, 2.0).unwrap();
        let a = integral_condition(&jac).unwrap();
        let b = integral_condition(&jac.clone().with_reference_point(0.2).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn assess_examples() {
        let jac = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
        let seq = EigenSequence::for_spec(&jac).unwrap();
        let r = assess(&jac, Some(&seq));
        assert_eq!(r.verdict, Verdict::UniformlyErgodic);
        assert!((r.t_av.finite().unwrap() - 1.0).abs() < 1e-9);
        assert!((r.q_sharp_norm_bound.unwrap() - 2.0).abs() < 2e-9);
        assert_eq!(r.method, Some(Method::SpectralTest));

        let mao = DiffusionSpec::mao_class(3.0).unwrap();
        let r = assess(&mao, None);
        assert_eq!(r.verdict, Verdict::UniformlyErgodic);
        assert_eq!(r.method, Some(Method::IntegralTest));
        assert!((r.integral_value.finite().unwrap() - 0.5).abs() < 1e-6);

        let iv =
            StateInterval::new(-1.0, 1.0, Boundary::Inaccessible, Boundary::Inaccessible).unwrap();
        let custom =
            DiffusionSpec::custom(iv, Expr::Poly(vec![0.0, -1.0]), Expr::Const(1.0), None).unwrap();
        let r = assess(&custom, None);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.method, None);
    }

    #[test]
    fn both_criteria_agree_when_both_apply() {
        // Regular reflecting boundaries at both ends: 2a/σ² < 1 and 2(b−a)/σ² < 1.
        for (a, b, s2) in [(0.4, 0.9, 2.0), (0.2, 0.5, 1.0), (0.5, 1.2, 3.0)] {
            let spec = DiffusionSpec::jacobi(a, b, s2).unwrap();
            let seq = EigenSequence::for_spec(&spec).unwrap();
            let r = assess(&spec, Some(&seq));
            assert_eq!(r.method, Some(Method::Both), "{r:?}");
            assert!(r.integral_value.finite().is_some() && r.t_av.finite().is_some());
        }
    }
}
