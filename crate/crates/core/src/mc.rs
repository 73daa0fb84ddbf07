//! Euler–Maruyama path ensembles for empirical checks of the tail bound.
//!
//! Path `i` draws its Gaussian increments from a ChaCha8 stream keyed by
//! `(seed, i)`, so every path is reproducible on its own and the ensemble
//! does not depend on how paths are scheduled across threads. Ensemble
//! statistics are reduced in path-index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{domain, Error, Result};
use crate::models::{ClosedForm, DiffusionSpec, Observable};
use crate::poisson::endpoint_grid;
use crate::sum::CompensatedSum;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_DELTA: f64 = 0.01;
/// Margin kept from an inaccessible endpoint whose drift blows up there.
pub const DEFAULT_CLAMP: f64 = 1e-2;
/// Share of capped paths above which a hitting-time estimate is unreliable.
pub const CAP_TOLERANCE: f64 = 0.05;

/// What happens when an Euler step leaves the state interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Fold the state back across the finite endpoint it crossed.
    Reflect,
    /// Project onto `[l + delta, u − delta]`.
    Clamp { delta: f64 },
}

impl BoundaryPolicy {
    /// Reflection, except for the tan-OU family whose drift `−ρ tan x`
    /// diverges at both ends.
    pub fn default_for(spec: &DiffusionSpec) -> Self {
        match spec.closed_form() {
            Some(ClosedForm::TanOu { .. }) => BoundaryPolicy::Clamp {
                delta: DEFAULT_CLAMP,
            },
            _ => BoundaryPolicy::Reflect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_horizon: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub x0: f64,
    pub boundary: BoundaryPolicy,
}

/// Interval midpoint, or the reference point on a half-line.
pub fn default_x0(spec: &DiffusionSpec) -> f64 {
    let iv = spec.interval();
    if iv.is_bounded() {
        0.5 * (iv.lower + iv.upper)
    } else {
        spec.reference_point()
    }
}

impl SimConfig {
    pub fn new(spec: &DiffusionSpec, t_horizon: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            dt: DEFAULT_DT,
            t_horizon,
            n_paths,
            seed,
            x0: default_x0(spec),
            boundary: BoundaryPolicy::default_for(spec),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_paths(mut self, n_paths: u64) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn with_horizon(mut self, t_horizon: f64) -> Self {
        self.t_horizon = t_horizon;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self, spec: &DiffusionSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_horizon >= self.dt && self.t_horizon.is_finite()) {
            return Err(domain(format!(
                "horizon {} must be finite and at least dt = {}",
                self.t_horizon, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(domain("n_paths must be positive"));
        }
        let iv = spec.interval();
        if !iv.contains(self.x0) {
            return Err(domain(format!(
                "x0 = {} is outside ({}, {})",
                self.x0, iv.lower, iv.upper
            )));
        }
        match self.boundary {
            BoundaryPolicy::Reflect => {
                if !iv.lower.is_finite() && !iv.upper.is_finite() {
                    return Err(domain("reflection needs a finite endpoint"));
                }
            }
            BoundaryPolicy::Clamp { delta } => {
                if !(delta >= 0.0) || iv.lower + delta >= iv.upper - delta {
                    return Err(domain(format!(
                        "clamp margin {delta} leaves no room in the interval"
                    )));
                }
                if !(self.x0 >= iv.lower + delta && self.x0 <= iv.upper - delta) {
                    return Err(domain(format!(
                        "x0 = {} lies inside the clamp margin",
                        self.x0
                    )));
                }
            }
        }
        self.steps_to(self.t_horizon).map(|_| ())
    }

    /// Number of steps that reach time `t` exactly (to rounding).
    pub fn steps_to(&self, t: f64) -> Result<u64> {
        let k = (t / self.dt).round();
        if k < 1.0 || (k * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(domain(format!(
                "time {t} is not a positive multiple of dt = {}",
                self.dt
            )));
        }
        Ok(k as u64)
    }

    pub fn steps(&self) -> Result<u64> {
        self.steps_to(self.t_horizon)
    }
}

/// Gaussian stream of one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

struct Stepper<'a> {
    spec: &'a DiffusionSpec,
    dt: f64,
    sqrt_dt: f64,
    lower: f64,
    upper: f64,
    lo: f64,
    hi: f64,
    clamp: bool,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a DiffusionSpec, cfg: &SimConfig) -> Self {
        let iv = spec.interval();
        let (lo, hi, clamp) = match cfg.boundary {
            BoundaryPolicy::Reflect => (iv.lower, iv.upper, false),
            BoundaryPolicy::Clamp { delta } => (iv.lower + delta, iv.upper - delta, true),
        };
        Self {
            spec,
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            lower: iv.lower,
            upper: iv.upper,
            lo,
            hi,
            clamp,
        }
    }

    #[inline]
    fn step(&self, x: f64, z: f64) -> std::result::Result<f64, &'static str> {
        let s2 = self.spec.diffusion_sq(x).max(0.0);
        let mut y = x + self.spec.drift(x) * self.dt + s2.sqrt() * self.sqrt_dt * z;
        if !y.is_finite() {
            return Err("state became non-finite");
        }
        if self.clamp {
            y = y.clamp(self.lo, self.hi);
            if !(y > self.lower && y < self.upper) {
                return Err("state left the open interval under clamping");
            }
        } else {
            let mut folds = 0;
            while y < self.lo || y > self.hi {
                y = if y < self.lo {
                    2.0 * self.lo - y
                } else {
                    2.0 * self.hi - y
                };
                folds += 1;
                if folds > 64 {
                    return Err("reflection did not bring the state back into the interval");
                }
            }
        }
        Ok(y)
    }
}

fn sim_error(path: u64, reason: &str) -> Error {
    Error::Simulation {
        path,
        reason: reason.to_string(),
    }
}

// Runs `job` for every path index and returns results in index order. On
// failure, reports the lowest failing path and how many paths completed.
fn run_paths<T: Send>(n: u64, job: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..n).into_par_iter().map(&job).collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed == 0 {
        return Ok(results.into_iter().map(|r| r.ok().unwrap()).collect());
    }
    let done = n as usize - failed;
    let first = results.into_iter().find_map(|r| r.err()).unwrap();
    Err(match first {
        Error::Simulation { path, reason } => Error::Simulation {
            path,
            reason: format!("{reason} ({done} of {n} paths completed)"),
        },
        other => other,
    })
}

/// Trapezoidal time averages `(1/t)∫₀ᵗ f(X_s)ds` of one path at each of the
/// given times (each a multiple of `dt`, in increasing order).
pub fn simulate_functional_at(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    path_index: u64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let marks = times
        .iter()
        .map(|&t| cfg.steps_to(t))
        .collect::<Result<Vec<_>>>()?;
    if marks.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain("checkpoint times must be increasing"));
    }
    path_averages(spec, f, cfg, path_index, &marks)
}

fn path_averages(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    path_index: u64,
    marks: &[u64],
) -> Result<Vec<f64>> {
    let stepper = Stepper::new(spec, cfg);
    let mut rng = path_rng(cfg.seed, path_index);
    let mut x = cfg.x0;
    // Accumulating f − f(x0) makes a constant observable exact.
    let f0 = f.eval(x);
    let mut prev = 0.0;
    let mut area = CompensatedSum::default();
    let mut out = Vec::with_capacity(marks.len());
    let mut next = marks.iter().peekable();
    let last = marks.last().copied().unwrap_or(0);
    for k in 1..=last {
        let z: f64 = rng.sample(StandardNormal);
        x = stepper.step(x, z).map_err(|r| sim_error(path_index, r))?;
        let d = f.eval(x) - f0;
        area.add(0.5 * (prev + d));
        prev = d;
        while next.peek() == Some(&&k) {
            next.next();
            out.push(f0 + area.value() / k as f64);
        }
    }
    Ok(out)
}

/// States `X_0, X_dt, …, X_t` of one path, `t = cfg.t_horizon`.
pub fn simulate_path(spec: &DiffusionSpec, cfg: &SimConfig, path_index: u64) -> Result<Vec<f64>> {
    cfg.validate(spec)?;
    let steps = cfg.steps()?;
    let stepper = Stepper::new(spec, cfg);
    let mut rng = path_rng(cfg.seed, path_index);
    let mut x = cfg.x0;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(x);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        x = stepper.step(x, z).map_err(|r| sim_error(path_index, r))?;
        out.push(x);
    }
    Ok(out)
}

/// `(1/t)∫₀ᵗ f(X_s)ds` along path `path_index` with `t = cfg.t_horizon`.
pub fn simulate_functional(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<f64> {
    cfg.validate(spec)?;
    if path_index >= cfg.n_paths {
        return Err(domain(format!(
            "path index {path_index} out of range for {} paths",
            cfg.n_paths
        )));
    }
    Ok(path_averages(spec, f, cfg, path_index, &[cfg.steps()?])?[0])
}

/// Time averages of every path at each checkpoint; `out[i][j]` is path `i`
/// at `times[j]`. The horizon of `cfg` is ignored in favour of the last
/// checkpoint.
pub fn ensemble_averages(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let last = *times
        .last()
        .ok_or_else(|| domain("no checkpoint times given"))?;
    let cfg = cfg.with_horizon(last);
    cfg.validate(spec)?;
    let marks = times
        .iter()
        .map(|&t| cfg.steps_to(t))
        .collect::<Result<Vec<_>>>()?;
    if marks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("checkpoint times must be strictly increasing"));
    }
    run_paths(cfg.n_paths, |i| path_averages(spec, f, &cfg, i, &marks))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: u64,
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
        let ss = xs
            .iter()
            .map(|x| (x - mean).powi(2))
            .collect::<CompensatedSum>()
            .value();
        let var = if xs.len() > 1 {
            ss / (n - 1.0)
        } else {
            f64::NAN
        };
        Self {
            n: xs.len() as u64,
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

/// Ensemble mean of the time average at the configured horizon.
pub fn ensemble_mean(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
) -> Result<MeanEstimate> {
    let values = ensemble_averages(spec, f, cfg, &[cfg.t_horizon])?;
    let xs: Vec<f64> = values.into_iter().map(|v| v[0]).collect();
    Ok(MeanEstimate::from_samples(&xs))
}

/// Exact binomial (Clopper–Pearson) interval at confidence `1 − delta`,
/// `delta/2` in each tail.
pub fn clopper_pearson(k: u64, n: u64, delta: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(domain(format!(
            "need 0 ≤ k ≤ n and n > 0, got k={k}, n={n}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let tail = 0.5 * delta;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else if k == n {
        tail.powf(1.0 / nf)
    } else {
        // P(Bin(n,p) ≥ k) = I_p(k, n−k+1) = tail
        bisect(|p| beta_reg(kf, nf - kf + 1.0, p) - tail)
    };
    let upper = if k == n {
        1.0
    } else if k == 0 {
        1.0 - tail.powf(1.0 / nf)
    } else {
        // P(Bin(n,p) ≤ k) = 1 − I_p(k+1, n−k) = tail
        bisect(|p| beta_reg(kf + 1.0, nf - kf, p) - (1.0 - tail))
    };
    Ok((lower, upper))
}

pub fn clopper_pearson_upper(k: u64, n: u64, delta: f64) -> Result<f64> {
    Ok(clopper_pearson(k, n, delta)?.1)
}

// Root of an increasing function on [0, 1].
fn bisect(g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical probability of `{(1/t)∫f − π(f) ≥ ε}` with its exact upper
/// confidence limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub t: f64,
    pub eps: f64,
    pub n: u64,
    pub k: u64,
    pub p_hat: f64,
    pub ci_upper: f64,
    pub delta: f64,
    pub pi_f: f64,
}

impl TailEstimate {
    pub fn from_counts(t: f64, eps: f64, k: u64, n: u64, delta: f64, pi_f: f64) -> Result<Self> {
        Ok(Self {
            t,
            eps,
            n,
            k,
            p_hat: k as f64 / n as f64,
            ci_upper: clopper_pearson_upper(k, n, delta)?,
            delta,
            pi_f,
        })
    }
}

/// Tail estimate at the configured horizon.
pub fn estimate_tail(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    eps: f64,
    pi_f: f64,
) -> Result<TailEstimate> {
    let mut grid = estimate_tail_grid(spec, f, cfg, &[cfg.t_horizon], &[eps], pi_f, DEFAULT_DELTA)?;
    Ok(grid.remove(0))
}

/// Tail estimates for every `(t, eps)` pair, `t`-major. All horizons share
/// the same paths, read at checkpoints.
pub fn estimate_tail_grid(
    spec: &DiffusionSpec,
    f: &Observable,
    cfg: &SimConfig,
    times: &[f64],
    epss: &[f64],
    pi_f: f64,
    delta: f64,
) -> Result<Vec<TailEstimate>> {
    if let Some(e) = epss.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(domain(format!("eps must be positive, got {e}")));
    }
    if !pi_f.is_finite() {
        return Err(domain("pi_f must be finite"));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    sorted.dedup();
    let values = ensemble_averages(spec, f, cfg, &sorted)?;
    let n = cfg.n_paths;
    let mut out = Vec::with_capacity(times.len() * epss.len());
    for &t in times {
        let j = sorted.iter().position(|&s| s == t).unwrap();
        for &eps in epss {
            let k = values.iter().filter(|v| v[j] - pi_f >= eps).count() as u64;
            out.push(TailEstimate::from_counts(t, eps, k, n, delta, pi_f)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub n: u64,
    pub mean: f64,
    pub std_error: f64,
    pub capped_fraction: f64,
    pub unreliable: bool,
}

impl HittingEstimate {
    fn from_times(times: &[(f64, bool)]) -> Self {
        let xs: Vec<f64> = times.iter().map(|t| t.0).collect();
        let m = MeanEstimate::from_samples(&xs);
        let capped = times.iter().filter(|t| t.1).count() as f64 / times.len() as f64;
        Self {
            n: m.n,
            mean: m.mean,
            std_error: m.std_error,
            capped_fraction: capped,
            unreliable: capped > CAP_TOLERANCE,
        }
    }
}

// First grid time at which X − y changes sign (or vanishes); capped paths
// report the horizon.
fn hit_time(
    stepper: &Stepper<'_>,
    rng: &mut ChaCha8Rng,
    x: f64,
    y: f64,
    steps: u64,
    path: u64,
) -> Result<(f64, bool)> {
    if x == y {
        return Ok((0.0, false));
    }
    let side = x > y;
    let mut state = x;
    for k in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        state = stepper.step(state, z).map_err(|r| sim_error(path, r))?;
        if state == y || (state > y) != side {
            return Ok((k as f64 * stepper.dt, false));
        }
    }
    Ok((steps as f64 * stepper.dt, true))
}

/// Mean first passage time from `x` to `y`, each path capped at the
/// horizon.
pub fn mc_hitting_time(
    spec: &DiffusionSpec,
    cfg: &SimConfig,
    x: f64,
    y: f64,
) -> Result<HittingEstimate> {
    let iv = spec.interval();
    if !iv.contains(x) || !iv.contains(y) {
        return Err(domain("start and target must be interior points"));
    }
    let cfg = cfg.with_x0(x);
    cfg.validate(spec)?;
    let steps = cfg.steps()?;
    let stepper = Stepper::new(spec, &cfg);
    let times = run_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        hit_time(&stepper, &mut rng, x, y, steps, i)
    })?;
    Ok(HittingEstimate::from_times(&times))
}

/// Inverse-CDF sampler for the stationary law, tabulated on an
/// endpoint-clustered grid and linearly interpolated.
#[derive(Debug, Clone)]
pub struct StationarySampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl StationarySampler {
    pub fn new(spec: &DiffusionSpec, n: usize) -> Result<Self> {
        let law = spec.stationary()?;
        let iv = spec.interval();
        let grid = endpoint_grid(iv, n)?;
        let mut xs = Vec::with_capacity(n + 2);
        let mut cdf = Vec::with_capacity(n + 2);
        if iv.lower.is_finite() {
            xs.push(iv.lower);
            cdf.push(0.0);
        }
        let mut acc = CompensatedSum::default();
        acc.add(law.probability(iv.lower, grid[0])?);
        xs.push(grid[0]);
        cdf.push(acc.value());
        for w in grid.windows(2) {
            acc.add(law.probability(w[0], w[1])?);
            xs.push(w[1]);
            cdf.push(acc.value());
        }
        if iv.upper.is_finite() {
            xs.push(iv.upper);
            cdf.push(1.0);
        }
        let top = *cdf.last().unwrap();
        for c in &mut cdf {
            *c /= top;
        }
        Ok(Self { xs, cdf })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < p);
        if i == 0 {
            return self.xs[0];
        }
        if i >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        if c1 > c0 {
            x0 + (x1 - x0) * (p - c0) / (c1 - c0)
        } else {
            x0
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Monte Carlo average hitting time: for each path, start and target are
/// drawn independently from the stationary law.
pub fn mc_average_hitting_time(spec: &DiffusionSpec, cfg: &SimConfig) -> Result<HittingEstimate> {
    cfg.validate(spec)?;
    let steps = cfg.steps()?;
    let sampler = StationarySampler::new(spec, 2048)?;
    let stepper = Stepper::new(spec, cfg);
    let (lo, hi) = (stepper.lo, stepper.hi);
    let iv = *spec.interval();
    let times = run_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut draw = || {
            let v = sampler.sample(&mut rng);
            let v = if stepper.clamp { v.clamp(lo, hi) } else { v };
            v.clamp(iv.lower.next_up(), iv.upper.next_down())
        };
        let x = draw();
        let y = draw();
        hit_time(&stepper, &mut rng, x, y, steps, i)
    })?;
    Ok(HittingEstimate::from_times(&times))
}

/// Occupation frequencies over equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub samples: u64,
}

/// Fraction of post-burn-in grid states in each of `bins` equal-width bins
/// of a bounded interval. The first 10% of each path is discarded.
pub fn stationary_histogram(
    spec: &DiffusionSpec,
    cfg: &SimConfig,
    bins: usize,
) -> Result<Histogram> {
    cfg.validate(spec)?;
    let iv = *spec.interval();
    if !iv.is_bounded() {
        return Err(domain("histograms need a bounded interval"));
    }
    if bins == 0 {
        return Err(domain("need at least one bin"));
    }
    if cfg.t_horizon < 100.0 {
        return Err(domain(format!(
            "horizon {} is below the minimum of 100",
            cfg.t_horizon
        )));
    }
    let steps = cfg.steps()?;
    let burn = steps / 10;
    let width = (iv.upper - iv.lower) / bins as f64;
    let stepper = Stepper::new(spec, cfg);
    let counts = run_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut x = cfg.x0;
        let mut c = vec![0u64; bins];
        for k in 1..=steps {
            let z: f64 = rng.sample(StandardNormal);
            x = stepper.step(x, z).map_err(|r| sim_error(i, r))?;
            if k > burn {
                let b = (((x - iv.lower) / width) as usize).min(bins - 1);
                c[b] += 1;
            }
        }
        Ok(c)
    })?;
    let mut total = vec![0u64; bins];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let samples: u64 = total.iter().sum();
    Ok(Histogram {
        edges: (0..=bins).map(|i| iv.lower + width * i as f64).collect(),
        frequencies: total.iter().map(|&c| c as f64 / samples as f64).collect(),
        samples,
    })
}
