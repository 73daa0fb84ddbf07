//! Diffusion models on an interval: coefficients, scale and speed densities,
//! the stationary law and space averages `π(f)`.
//!
//! For a diffusion with drift `μ` and diffusion coefficient `σ²` the scale
//! density is `s(x) = exp(−∫_{x₀}^x 2μ/σ²)` and the speed density is
//! `m(x) = 2/(σ²(x) s(x))`. The stationary density is `m` normalised by the
//! total speed measure. Built-in models carry closed forms; everything else
//! goes through [`crate::quad`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::expr::Expr;
use crate::quad::{self, Tolerance};

/// Behaviour of the process at an endpoint of its state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Reflecting,
    Inaccessible,
}

/// Open state space `(lower, upper)`; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_boundary: Boundary,
    pub upper_boundary: Boundary,
}

impl StateInterval {
    pub fn new(
        lower: f64,
        upper: f64,
        lower_boundary: Boundary,
        upper_boundary: Boundary,
    ) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(domain(format!(
                "interval needs lower < upper, got ({lower}, {upper})"
            )));
        }
        if lower.is_infinite() && upper.is_infinite() {
            return Err(domain("at most one endpoint may be infinite"));
        }
        if (lower.is_infinite() && lower_boundary == Boundary::Reflecting)
            || (upper.is_infinite() && upper_boundary == Boundary::Reflecting)
        {
            return Err(domain("an infinite endpoint cannot be reflecting"));
        }
        Ok(Self {
            lower,
            upper,
            lower_boundary,
            upper_boundary,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Midpoint, or one unit inside the finite end of a half-line.
    pub fn default_reference(&self) -> f64 {
        quad::default_split(self.lower, self.upper)
    }

    /// `n` points strictly inside the interval; uniform when bounded,
    /// uniform in `atan` distance from the finite end otherwise.
    pub fn sample_points(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                if self.is_bounded() {
                    self.lower + (self.upper - self.lower) * t
                } else if self.lower.is_finite() {
                    self.lower + (t * FRAC_PI_2).tan()
                } else {
                    self.upper - ((1.0 - t) * FRAC_PI_2).tan()
                }
            })
            .collect()
    }
}

/// Built-in models with closed-form scale, speed and stationary densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// Drift `a − b x`, diffusion `σ² x(1−x)` on `(0, 1)`.
    Jacobi { a: f64, b: f64, sigma2: f64 },
    /// Drift `−ρ tan x`, unit diffusion on `(−π/2, π/2)`.
    TanOu { rho: f64 },
    /// Zero drift, diffusion `2(1+x)^γ` on `(0, ∞)`.
    MaoClass { gamma: f64 },
}

/// A one-dimensional time-homogeneous diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    interval: StateInterval,
    drift: Expr,
    diffusion_sq: Expr,
    reference_point: f64,
    closed_form: Option<ClosedForm>,
}

impl DiffusionSpec {
    pub fn jacobi(a: f64, b: f64, sigma2: f64) -> Result<Self> {
        if !(b > a && a > 0.0) {
            return Err(domain(format!(
                "Jacobi needs b > a > 0, got a = {a}, b = {b}"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain(format!("Jacobi needs sigma2 > 0, got {sigma2}")));
        }
        let p = 2.0 * a / sigma2;
        let q = 2.0 * (b - a) / sigma2;
        let side = |e: f64| {
            if e < 1.0 {
                Boundary::Reflecting
            } else {
                Boundary::Inaccessible
            }
        };
        let interval = StateInterval::new(0.0, 1.0, side(p), side(q))?;
        Ok(Self {
            interval,
            drift: Expr::Poly(vec![a, -b]),
            diffusion_sq: Expr::Poly(vec![0.0, sigma2, -sigma2]),
            reference_point: 0.5,
            closed_form: Some(ClosedForm::Jacobi { a, b, sigma2 }),
        })
    }

    pub fn tan_ou(rho: f64) -> Result<Self> {
        if !(rho >= 0.5 && rho.is_finite()) {
            return Err(domain(format!("tan-OU needs rho >= 1/2, got {rho}")));
        }
        let interval = StateInterval::new(
            -FRAC_PI_2,
            FRAC_PI_2,
            Boundary::Inaccessible,
            Boundary::Inaccessible,
        )?;
        Ok(Self {
            interval,
            drift: Expr::tan_x().scaled(-rho),
            diffusion_sq: Expr::Const(1.0),
            reference_point: 0.0,
            closed_form: Some(ClosedForm::TanOu { rho }),
        })
    }

    pub fn mao_class(gamma: f64) -> Result<Self> {
        if !(gamma > 2.0 && gamma.is_finite()) {
            return Err(domain(format!("Mao class needs gamma > 2, got {gamma}")));
        }
        Self::mao_class_unchecked(gamma)
    }

    /// Mao-class coefficients without the `γ > 2` restriction, for probing
    /// the ergodicity criteria at and below the boundary of the class.
    pub fn mao_class_unchecked(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(domain("gamma must be finite"));
        }
        let interval = StateInterval::new(
            0.0,
            f64::INFINITY,
            Boundary::Reflecting,
            Boundary::Inaccessible,
        )?;
        Ok(Self {
            interval,
            drift: Expr::Const(0.0),
            diffusion_sq: Expr::Pow {
                base: Box::new(Expr::Poly(vec![1.0, 1.0])),
                exp: gamma,
            }
            .scaled(2.0),
            reference_point: 1.0,
            closed_form: Some(ClosedForm::MaoClass { gamma }),
        })
    }

    pub fn custom(
        interval: StateInterval,
        drift: Expr,
        diffusion_sq: Expr,
        reference_point: Option<f64>,
    ) -> Result<Self> {
        let x0 = reference_point.unwrap_or_else(|| interval.default_reference());
        if !interval.contains(x0) {
            return Err(domain(format!(
                "reference point {x0} is outside the interval"
            )));
        }
        for x in interval.sample_points(1000) {
            let v = diffusion_sq.eval(x);
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "diffusion coefficient must be positive, got {v} at x = {x}"
                )));
            }
            if !drift.eval(x).is_finite() {
                return Err(domain(format!("drift is not finite at x = {x}")));
            }
        }
        Ok(Self {
            interval,
            drift,
            diffusion_sq,
            reference_point: x0,
            closed_form: None,
        })
    }

    pub fn with_reference_point(mut self, x0: f64) -> Result<Self> {
        if !self.interval.contains(x0) {
            return Err(domain(format!(
                "reference point {x0} is outside the interval"
            )));
        }
        self.reference_point = x0;
        Ok(self)
    }

    /// The same coefficients with closed forms disabled, so every density
    /// is computed by quadrature.
    pub fn generic(&self) -> Self {
        Self {
            closed_form: None,
            ..self.clone()
        }
    }

    pub fn interval(&self) -> &StateInterval {
        &self.interval
    }

    pub fn reference_point(&self) -> f64 {
        self.reference_point
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    pub fn drift_expr(&self) -> &Expr {
        &self.drift
    }

    pub fn diffusion_sq_expr(&self) -> &Expr {
        &self.diffusion_sq
    }

    /// Short identifier used to tag derived data.
    pub fn id(&self) -> String {
        match self.closed_form {
            Some(ClosedForm::Jacobi { a, b, sigma2 }) => {
                format!("jacobi(a={a},b={b},sigma2={sigma2})")
            }
            Some(ClosedForm::TanOu { rho }) => format!("tanou(rho={rho})"),
            Some(ClosedForm::MaoClass { gamma }) => format!("maoclass(gamma={gamma})"),
            None => format!("custom({},{})", self.interval.lower, self.interval.upper),
        }
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        match self.closed_form {
            Some(ClosedForm::Jacobi { a, b, .. }) => a - b * x,
            Some(ClosedForm::TanOu { rho }) => -rho * x.tan(),
            Some(ClosedForm::MaoClass { .. }) => 0.0,
            None => self.drift.eval(x),
        }
    }

    #[inline]
    pub fn diffusion_sq(&self, x: f64) -> f64 {
        match self.closed_form {
            Some(ClosedForm::Jacobi { sigma2, .. }) => sigma2 * x * (1.0 - x),
            Some(ClosedForm::TanOu { .. }) => 1.0,
            Some(ClosedForm::MaoClass { gamma }) => 2.0 * (1.0 + x).powf(gamma),
            None => self.diffusion_sq.eval(x),
        }
    }

    fn require_inside(&self, x: f64) -> Result<()> {
        if self.interval.contains(x) {
            Ok(())
        } else {
            Err(domain(format!(
                "x = {x} is outside the open interval ({}, {})",
                self.interval.lower, self.interval.upper
            )))
        }
    }

    /// Natural log of the scale density.
    pub fn ln_scale_density(&self, x: f64) -> Result<f64> {
        self.require_inside(x)?;
        let x0 = self.reference_point;
        match self.closed_form {
            Some(ClosedForm::Jacobi { a, b, sigma2 }) => {
                let p = 2.0 * a / sigma2;
                let q = 2.0 * (b - a) / sigma2;
                Ok(-p * (x / x0).ln() - q * ((1.0 - x) / (1.0 - x0)).ln())
            }
            Some(ClosedForm::TanOu { rho }) => Ok(-2.0 * rho * (x.cos() / x0.cos()).ln()),
            Some(ClosedForm::MaoClass { .. }) => Ok(0.0),
            None => {
                if x == x0 {
                    return Ok(0.0);
                }
                let ratio = |z: f64| 2.0 * self.drift.eval(z) / self.diffusion_sq.eval(z);
                let est = quad::adaptive(&ratio, x0, x, Tolerance::new(1e-13, 1e-12))?;
                Ok(-est.value)
            }
        }
    }

    pub fn scale_density(&self, x: f64) -> Result<f64> {
        Ok(self.ln_scale_density(x)?.exp())
    }

    pub fn speed_density(&self, x: f64) -> Result<f64> {
        self.require_inside(x)?;
        match self.closed_form {
            Some(ClosedForm::Jacobi { a, b, sigma2 }) => {
                let p = 2.0 * a / sigma2;
                let q = 2.0 * (b - a) / sigma2;
                let x0 = self.reference_point;
                let ln = (p - 1.0) * x.ln() + (q - 1.0) * (1.0 - x).ln()
                    - p * x0.ln()
                    - q * (1.0 - x0).ln();
                Ok(2.0 / sigma2 * ln.exp())
            }
            _ => Ok(2.0 / (self.diffusion_sq(x) * self.scale_density(x)?)),
        }
    }

    /// Total speed measure `M(u) − M(l)`.
    pub fn total_speed(&self) -> Result<f64> {
        let x0 = self.reference_point;
        match self.closed_form {
            Some(ClosedForm::Jacobi { a, b, sigma2 }) => {
                let p = 2.0 * a / sigma2;
                let q = 2.0 * (b - a) / sigma2;
                Ok(2.0 / sigma2 * (ln_beta(p, q) - p * x0.ln() - q * (1.0 - x0).ln()).exp())
            }
            Some(ClosedForm::TanOu { rho }) => {
                let ln_int = 0.5 * PI.ln() + ln_gamma(rho + 0.5) - ln_gamma(rho + 1.0);
                Ok(2.0 * (ln_int - 2.0 * rho * x0.cos().ln()).exp())
            }
            Some(ClosedForm::MaoClass { gamma }) if gamma > 1.0 => Ok(1.0 / (gamma - 1.0)),
            _ => {
                let m = |x: f64| self.speed_density(x).unwrap_or(f64::NAN);
                match quad::integrate(
                    &m,
                    self.interval.lower,
                    self.interval.upper,
                    &[x0],
                    Tolerance::default(),
                ) {
                    Ok(est) if est.value.is_finite() && est.value > 0.0 => Ok(est.value),
                    Ok(_) | Err(Error::Divergent { .. }) => Err(Error::NoStationaryDensity),
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Speed measure of `[x, upper)`.
    pub fn speed_tail(&self, x: f64) -> Result<f64> {
        self.require_inside(x)?;
        let m = |y: f64| self.speed_density(y).unwrap_or(f64::NAN);
        Ok(quad::endpoint_tail(
            &m,
            x,
            self.interval.upper,
            Tolerance::new(1e-13, 1e-11),
            Default::default(),
        )?
        .value)
    }

    /// Stationary law with its normalising constant computed once.
    pub fn stationary(&self) -> Result<StationaryLaw<'_>> {
        StationaryLaw::new(self)
    }
}

/// Normalised speed measure of a positive-recurrent diffusion.
#[derive(Debug, Clone)]
pub struct StationaryLaw<'a> {
    spec: &'a DiffusionSpec,
    total_speed: f64,
}

impl<'a> StationaryLaw<'a> {
    pub fn new(spec: &'a DiffusionSpec) -> Result<Self> {
        let total_speed = spec.total_speed()?;
        Ok(Self { spec, total_speed })
    }

    pub fn total_speed(&self) -> f64 {
        self.total_speed
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.spec.require_inside(x)?;
        match self.spec.closed_form {
            Some(ClosedForm::Jacobi { a, b, sigma2 }) => {
                let p = 2.0 * a / sigma2;
                let q = 2.0 * (b - a) / sigma2;
                Ok(((p - 1.0) * x.ln() + (q - 1.0) * (1.0 - x).ln() - ln_beta(p, q)).exp())
            }
            Some(ClosedForm::TanOu { rho }) => {
                let ln_norm = 0.5 * PI.ln() + ln_gamma(rho + 0.5) - ln_gamma(rho + 1.0);
                Ok((2.0 * rho * x.cos().ln() - ln_norm).exp())
            }
            Some(ClosedForm::MaoClass { gamma }) => Ok((gamma - 1.0) * (1.0 + x).powf(-gamma)),
            None => Ok(self.spec.speed_density(x)? / self.total_speed),
        }
    }

    /// `π(f)` using closed forms where the model and observable allow.
    pub fn expectation(&self, f: &Observable) -> Result<f64> {
        if let Some(v) = self.closed_form_expectation(f) {
            return Ok(v);
        }
        self.expectation_by_quadrature(f)
    }

    fn closed_form_expectation(&self, f: &Observable) -> Option<f64> {
        match (f.kind, self.spec.closed_form) {
            (ObservableKind::Constant(c), _) => Some(c),
            (ObservableKind::Indicator { lo, hi }, Some(ClosedForm::Jacobi { a, b, sigma2 })) => {
                let p = 2.0 * a / sigma2;
                let q = 2.0 * (b - a) / sigma2;
                let cdf = |x: f64| beta_reg(p, q, x.clamp(0.0, 1.0));
                Some((cdf(hi) - cdf(lo)).max(0.0))
            }
            (ObservableKind::Exp { u }, Some(ClosedForm::TanOu { rho: 0.5 })) => {
                Some((u * FRAC_PI_2).cosh() / (1.0 + u * u))
            }
            _ => None,
        }
    }

    /// `π(f)` by adaptive quadrature against the stationary density.
    pub fn expectation_by_quadrature(&self, f: &Observable) -> Result<f64> {
        let iv = self.spec.interval;
        let integrand = |x: f64| {
            let fx = f.eval(x);
            if fx == 0.0 {
                0.0
            } else {
                fx * self.density(x).unwrap_or(f64::NAN)
            }
        };
        let mut points = f.breakpoints.clone();
        points.push(self.spec.reference_point);
        let est = quad::integrate(
            &integrand,
            iv.lower,
            iv.upper,
            &points,
            Tolerance::new(1e-12, 1e-10),
        )?;
        Ok(est.value)
    }

    /// Stationary measure of `(lo, hi)` intersected with the state space.
    pub fn probability(&self, lo: f64, hi: f64) -> Result<f64> {
        let iv = self.spec.interval;
        let lo = lo.max(iv.lower);
        let hi = hi.min(iv.upper);
        if lo >= hi {
            return Ok(0.0);
        }
        self.expectation(&Observable::indicator(lo, hi))
    }
}

/// Scale density `s(x)`.
pub fn scale_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    spec.scale_density(x)
}

/// Speed density `m(x) = 2/(σ²(x) s(x))`.
pub fn speed_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    spec.speed_density(x)
}

/// Normalised speed density.
pub fn stationary_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    spec.stationary()?.density(x)
}

/// Space average `π(f)`.
pub fn pi_integral(spec: &DiffusionSpec, f: &Observable) -> Result<f64> {
    spec.stationary()?.expectation(f)
}

/// Structural tag of an observable, enabling closed-form space averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservableKind {
    Constant(f64),
    Indicator { lo: f64, hi: f64 },
    Exp { u: f64 },
    Other,
}

/// A bounded function `f` with a declared sup norm `‖f‖`.
#[derive(Clone)]
pub struct Observable {
    label: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sup_norm: f64,
    breakpoints: Vec<f64>,
    kind: ObservableKind,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("sup_norm", &self.sup_norm)
            .field("breakpoints", &self.breakpoints)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Observable {
    pub fn new(
        label: impl Into<String>,
        sup_norm: f64,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(func),
            sup_norm,
            breakpoints: Vec::new(),
            kind: ObservableKind::Other,
        }
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    pub fn constant(c: f64) -> Self {
        let mut f = Self::new(format!("const({c})"), c.abs(), move |_| c);
        f.kind = ObservableKind::Constant(c);
        f
    }

    /// Indicator of the open set `(lo, hi)`.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        let mut f = Self::new(format!("indicator({lo},{hi})"), 1.0, move |x| {
            if x > lo && x < hi {
                1.0
            } else {
                0.0
            }
        })
        .with_breakpoints([lo, hi]);
        f.kind = ObservableKind::Indicator { lo, hi };
        f
    }

    /// `e^{ux}` with an explicitly declared sup norm.
    pub fn exp(u: f64, sup_norm: f64) -> Self {
        let mut f = Self::new(format!("exp({u}x)"), sup_norm, move |x| (u * x).exp());
        f.kind = ObservableKind::Exp { u };
        f
    }

    /// `e^{ux}` with its sup over a bounded interval.
    pub fn exp_on(u: f64, interval: &StateInterval) -> Result<Self> {
        if !interval.is_bounded() {
            return Err(domain("exp(ux) is unbounded on an unbounded interval"));
        }
        let sup = (u * interval.lower).exp().max((u * interval.upper).exp());
        Ok(Self::exp(u, sup))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Spot-checks `|f(x)| ≤ ‖f‖` on a 10⁴-point interior grid.
    pub fn check_on(&self, interval: &StateInterval) -> Result<()> {
        let slack = 1e-12 * self.sup_norm.max(1.0);
        for x in interval.sample_points(10_000) {
            let v = self.eval(x);
            if !v.is_finite() || v.abs() > self.sup_norm + slack {
                return Err(Error::SupNormViolated {
                    declared: self.sup_norm,
                    x,
                    value: v.abs(),
                });
            }
        }
        Ok(())
    }
}

/// Model description file.
///
/// ```json
/// {"model": "jacobi", "params": {"a": 1.0, "b": 2.0, "sigma2": 2.0}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum ModelFile {
    Jacobi { a: f64, b: f64, sigma2: f64 },
    Tanou { rho: f64 },
    Maoclass { gamma: f64 },
    Custom(CustomModel),
}

/// Coefficients of a user-supplied model. `None` endpoints are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomModel {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub lower_boundary: Option<Boundary>,
    #[serde(default)]
    pub upper_boundary: Option<Boundary>,
    #[serde(default)]
    pub reference_point: Option<f64>,
    pub drift: Expr,
    pub diffusion_sq: Expr,
}

impl ModelFile {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn to_spec(&self) -> Result<DiffusionSpec> {
        match self {
            ModelFile::Jacobi { a, b, sigma2 } => DiffusionSpec::jacobi(*a, *b, *sigma2),
            ModelFile::Tanou { rho } => DiffusionSpec::tan_ou(*rho),
            ModelFile::Maoclass { gamma } => DiffusionSpec::mao_class(*gamma),
            ModelFile::Custom(c) => {
                let lower = c.lower.unwrap_or(f64::NEG_INFINITY);
                let upper = c.upper.unwrap_or(f64::INFINITY);
                let default_side = |x: f64| {
                    if x.is_finite() {
                        Boundary::Reflecting
                    } else {
                        Boundary::Inaccessible
                    }
                };
                let interval = StateInterval::new(
                    lower,
                    upper,
                    c.lower_boundary.unwrap_or(default_side(lower)),
                    c.upper_boundary.unwrap_or(default_side(upper)),
                )?;
                DiffusionSpec::custom(
                    interval,
                    c.drift.clone(),
                    c.diffusion_sq.clone(),
                    c.reference_point,
                )
            }
        }
    }
}
