//! Poisson equation `−𝒜f̂ = f − π(f)` solved by the scale/speed
//! representation
//!
//! ```text
//! f̂(x) = −∫_{x_a}^x s(y) G(y) dy + C,    G(y) = ∫_l^y g(z) m(z) dz,
//! ```
//!
//! with `g = f − π(f)` and `C` chosen so that `π(f̂) = 0`. Because
//! `∫ g m = 0`, the right half of the grid uses `G(y) = −∫_y^u g m`, which
//! keeps `G` free of cancellation near either endpoint.
//!
//! The centering constant is obtained without integrating `f̂` itself:
//! exchanging the order of integration gives
//!
//! ```text
//! π(F) = ∫_l^{x_a} s G Π(l,y) dy − ∫_{x_a}^u s G Π(y,u) dy,    F = f̂ − C.
//! ```
//!
//! [`apply_generator`] is an independent finite-difference checker and plays
//! no part in the solve.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::models::{DiffusionSpec, Observable, StateInterval};
use crate::quad::{self, Tolerance};
use crate::sum::CompensatedSum;

pub const DEFAULT_GRID: usize = 4096;
pub const MIN_GRID: usize = 16;

// Weight of the cosine (Chebyshev) component in the grid map; the rest is
// uniform, which keeps the first cell from collapsing to O(h²).
const CLUSTER_WEIGHT: f64 = 0.5;

const CELL_TOL: Tolerance = Tolerance {
    abs: 1e-14,
    rel: 1e-12,
};
const TAIL_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-11,
};

/// Values sampled on a strictly increasing interior grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    spec_id: String,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, spec_id: impl Into<String>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(domain(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < MIN_GRID {
            return Err(domain(format!(
                "grid needs at least {MIN_GRID} points, got {}",
                grid.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(domain("grid must be finite and strictly increasing"));
        }
        Ok(Self {
            grid,
            values,
            spec_id: spec_id.into(),
        })
    }

    /// Samples `f` on the given grid.
    pub fn sample(
        grid: Vec<f64>,
        spec_id: impl Into<String>,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, values, spec_id)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec_id(&self) -> &str {
        &self.spec_id
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    /// `x,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.iter() {
            let _ = writeln!(out, "{x:e},{v:e}");
        }
        out
    }

    fn check_inside(&self, interval: &StateInterval) -> Result<()> {
        if self.grid.iter().all(|&x| interval.contains(x)) {
            Ok(())
        } else {
            Err(domain(
                "grid points must lie strictly inside the state interval",
            ))
        }
    }
}

/// `max_i |v_i|`.
pub fn sup_norm(gf: &GridFunction) -> f64 {
    gf.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

fn blend(t: f64) -> f64 {
    (1.0 - CLUSTER_WEIGHT) * t + CLUSTER_WEIGHT * 0.5 * (1.0 - (PI * t).cos())
}

/// Interior grid of `n` points clustered toward the endpoints. Infinite
/// endpoints are reached through `x = l + tan(v)` (or its mirror images).
pub fn endpoint_grid(interval: &StateInterval, n: usize) -> Result<Vec<f64>> {
    if n < MIN_GRID {
        return Err(domain(format!(
            "grid needs at least {MIN_GRID} points, got {n}"
        )));
    }
    let (l, u) = (interval.lower, interval.upper);
    let map = |t: f64| -> f64 {
        let b = blend(t);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => l + (u - l) * b,
            (true, false) => l + (0.5 * PI * b).tan(),
            (false, true) => u - (0.5 * PI * (1.0 - b)).tan(),
            (false, false) => (PI * (b - 0.5)).tan(),
        }
    };
    let grid: Vec<f64> = (1..=n).map(|i| map((i as f64 - 0.5) / n as f64)).collect();
    if grid.windows(2).any(|w| !(w[0] < w[1])) || !grid.iter().all(|&x| interval.contains(x)) {
        return Err(domain(format!(
            "grid of {n} points is not representable on ({l}, {u})"
        )));
    }
    Ok(grid)
}

struct Integrands<'a> {
    spec: &'a DiffusionSpec,
    f: &'a Observable,
    pi_f: f64,
    total_speed: f64,
}

impl Integrands<'_> {
    fn s(&self, y: f64) -> f64 {
        self.spec.scale_density(y).unwrap_or(f64::NAN)
    }

    fn m(&self, y: f64) -> f64 {
        self.spec.speed_density(y).unwrap_or(f64::NAN)
    }

    fn gm(&self, y: f64) -> f64 {
        let g = self.f.eval(y) - self.pi_f;
        if g == 0.0 {
            0.0
        } else {
            g * self.m(y)
        }
    }

    // ∫_a^b h with orientation.
    fn cell<F: Fn(f64) -> f64>(&self, h: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            Ok(0.0)
        } else if a < b {
            Ok(quad::adaptive(&h, a, b, CELL_TOL)?.value)
        } else {
            Ok(-quad::adaptive(&h, b, a, CELL_TOL)?.value)
        }
    }

    // ∫_e^y h with orientation, `e` an endpoint of the state interval.
    fn oriented_from<F: Fn(f64) -> f64>(&self, h: F, e: f64, y: f64) -> Result<f64> {
        let v = quad::endpoint_tail(&h, y, e, TAIL_TOL, Default::default())?.value;
        Ok(if e < y { v } else { -v })
    }

    fn g_from_end(&self, e: f64, y: f64) -> Result<f64> {
        self.oriented_from(|z| self.gm(z), e, y)
    }

    fn w_from_end(&self, e: f64, y: f64) -> Result<f64> {
        Ok(self.oriented_from(|z| self.m(z), e, y)?.abs() / self.total_speed)
    }
}

struct HalfSolution {
    // ∫_{p_j}^{x_a} s G, ordered as the input points.
    offsets: Vec<f64>,
    // ∫_e^{x_a} s G W, with W the stationary mass between e and y.
    centering: f64,
}

// `points` run from the endpoint `e` toward the anchor (last element).
fn solve_half(ig: &Integrands<'_>, e: f64, points: &[f64]) -> Result<HalfSolution> {
    let cells: Vec<(f64, f64)> = points.windows(2).map(|w| (w[0], w[1])).collect();

    let increments: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(a, b)| -> Result<(f64, f64)> {
            let dg = ig.cell(|z| ig.gm(z), a, b)?;
            let dw = ig.cell(|z| ig.m(z), a, b)?.abs() / ig.total_speed;
            Ok((dg, dw))
        })
        .collect::<Result<_>>()?;

    let p0 = points[0];
    let mut g_acc = CompensatedSum::default();
    let mut w_acc = CompensatedSum::default();
    g_acc.add(ig.g_from_end(e, p0)?);
    w_acc.add(ig.w_from_end(e, p0)?);
    let mut starts = Vec::with_capacity(cells.len());
    for &(dg, dw) in &increments {
        starts.push((g_acc.value(), w_acc.value()));
        g_acc.add(dg);
        w_acc.add(dw);
    }

    let pieces: Vec<(f64, f64)> = cells
        .par_iter()
        .zip(starts.par_iter())
        .map(|(&(a, b), &(g0, w0))| -> Result<(f64, f64)> {
            let g_at = |y: f64| g0 + ig.cell(|z| ig.gm(z), a, y).unwrap_or(f64::NAN);
            let sg = ig.cell(|y| ig.s(y) * g_at(y), a, b)?;
            let sgw = ig.cell(
                |y| {
                    let w =
                        w0 + ig.cell(|z| ig.m(z), a, y).unwrap_or(f64::NAN).abs() / ig.total_speed;
                    ig.s(y) * g_at(y) * w
                },
                a,
                b,
            )?;
            Ok((sg, sgw))
        })
        .collect::<Result<_>>()?;

    let end_piece = ig.oriented_from(
        |y| {
            let g = ig.g_from_end(e, y).unwrap_or(f64::NAN);
            if g == 0.0 {
                return 0.0;
            }
            ig.s(y) * g * ig.w_from_end(e, y).unwrap_or(f64::NAN)
        },
        e,
        p0,
    )?;

    let mut offsets = vec![0.0; points.len()];
    let mut acc = CompensatedSum::default();
    for j in (0..cells.len()).rev() {
        acc.add(pieces[j].0);
        offsets[j] = acc.value();
    }
    let mut centering = CompensatedSum::default();
    centering.add(end_piece);
    for &(_, sgw) in &pieces {
        centering.add(sgw);
    }
    Ok(HalfSolution {
        offsets,
        centering: centering.value(),
    })
}

/// Solves `−𝒜f̂ = f − π(f)`, `π(f̂) = 0`, on an `n`-point endpoint-clustered
/// grid.
pub fn solve_poisson(spec: &DiffusionSpec, f: &Observable, n: usize) -> Result<GridFunction> {
    let grid = endpoint_grid(spec.interval(), n)?;
    solve_poisson_on(spec, f, grid)
}

/// [`solve_poisson`] on a caller-supplied interior grid.
pub fn solve_poisson_on(
    spec: &DiffusionSpec,
    f: &Observable,
    grid: Vec<f64>,
) -> Result<GridFunction> {
    let iv = *spec.interval();
    let zeros = vec![0.0; grid.len()];
    let mut out = GridFunction::new(grid, zeros, spec.id())?;
    out.check_inside(&iv)?;
    f.check_on(&iv)?;
    let law = spec.stationary()?;
    let ig = Integrands {
        spec,
        f,
        pi_f: law.expectation(f)?,
        total_speed: law.total_speed(),
    };
    let n = out.len();
    let k = n / 2;

    let left = solve_half(&ig, iv.lower, &out.grid[..=k])?;
    let right_points: Vec<f64> = out.grid[k..].iter().rev().copied().collect();
    let right = solve_half(&ig, iv.upper, &right_points)?;

    let c = -(left.centering + right.centering);
    for (j, v) in out.values[..=k].iter_mut().enumerate() {
        *v = left.offsets[j] + c;
    }
    for (j, &off) in right.offsets.iter().enumerate() {
        out.values[n - 1 - j] = off + c;
    }
    Ok(out)
}

/// Finite-difference weights for derivatives `0..=order` at `z` from the
/// nodes `xs` (Fornberg's recursion). `w[k][j]` multiplies the value at
/// `xs[j]` in the `k`-th derivative.
pub fn fd_weights(z: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Result of [`apply_generator`]. Warnings flag grid cells that are coarse
/// relative to the coefficients; they do not invalidate the values.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    pub values: GridFunction,
    pub warnings: Vec<String>,
}

// Stencil node indices for point i: three-point central inside, four-point
// one-sided at the ends.
fn stencil(i: usize, n: usize) -> std::ops::Range<usize> {
    if i == 0 {
        0..4
    } else if i == n - 1 {
        n - 4..n
    } else {
        i - 1..i + 2
    }
}

/// `𝒜 = μ d/dx + ½σ² d²/dx²` applied to grid samples by second-order
/// finite differences on the (nonuniform) grid.
pub fn apply_generator(spec: &DiffusionSpec, gf: &GridFunction) -> Result<GeneratorOutput> {
    gf.check_inside(spec.interval())?;
    let (xs, vs) = (&gf.grid, &gf.values);
    let n = xs.len();
    let mut out = Vec::with_capacity(n);
    let mut coarse = 0usize;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let r = stencil(i, n);
        let w = fd_weights(xs[i], &xs[r.clone()], 2);
        let (mut d1, mut d2) = (0.0, 0.0);
        for (j, idx) in r.clone().enumerate() {
            d1 += w[1][j] * vs[idx];
            d2 += w[2][j] * vs[idx];
        }
        let mu = spec.drift(xs[i]);
        let s2 = spec.diffusion_sq(xs[i]);
        out.push(mu * d1 + 0.5 * s2 * d2);

        let h = (xs[r.end - 1] - xs[r.start]) / (r.len() - 1) as f64;
        let peclet = mu.abs() * h / s2;
        if !(peclet <= 2.0) {
            coarse += 1;
            worst = worst.max(peclet);
        }
    }
    let mut warnings = Vec::new();
    if coarse > 0 {
        warnings.push(format!(
            "{coarse} of {n} stencils have drift-to-diffusion ratio |μ|h/σ² above 2 (worst {worst:.3e}); refine the grid"
        ));
    }
    Ok(GeneratorOutput {
        values: GridFunction::new(xs.clone(), out, gf.spec_id.clone())?,
        warnings,
    })
}

/// Largest residual `|𝒜f̂ + f − π(f)|` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sup: f64,
    pub at: f64,
    /// Grid points skipped because their stencil straddles a breakpoint of `f`.
    pub skipped: usize,
}

pub fn poisson_residual(
    spec: &DiffusionSpec,
    f: &Observable,
    fhat: &GridFunction,
) -> Result<Residual> {
    let pi_f = spec.stationary()?.expectation(f)?;
    let af = apply_generator(spec, fhat)?.values;
    let xs = fhat.grid();
    let n = xs.len();
    let mut res = Residual {
        sup: 0.0,
        at: xs[0],
        skipped: 0,
    };
    for i in 0..n {
        let r = stencil(i, n);
        let (lo, hi) = (xs[r.start], xs[r.end - 1]);
        if f.breakpoints().iter().any(|&b| b >= lo && b <= hi) {
            res.skipped += 1;
            continue;
        }
        let v = (af.values[i] + f.eval(xs[i]) - pi_f).abs();
        if !(v <= res.sup) {
            res.sup = v;
            res.at = xs[i];
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Boundary;

    #[test]
    fn fornberg_weights_match_textbook() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0, 3.0], 2);
        let expect = [2.0, -5.0, 4.0, -1.0];
        for (a, b) in w[2].iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_is_interior_and_clustered() {
        let iv = StateInterval::new(0.0, 1.0, Boundary::Reflecting, Boundary::Reflecting).unwrap();
        let g = endpoint_grid(&iv, 64).unwrap();
        assert!(g[0] > 0.0 && g[63] < 1.0);
        assert!(g[1] - g[0] < g[32] - g[31]);
        assert!((g[0] - (1.0 - g[63])).abs() < 1e-15);
        assert!(endpoint_grid(&iv, 15).is_err());
    }

    #[test]
    fn grid_function_validation() {
        let g: Vec<f64> = (1..=16).map(|i| i as f64).collect();
        assert!(GridFunction::new(g.clone(), vec![0.0; 15], "x").is_err());
        assert!(GridFunction::new(g[..10].to_vec(), vec![0.0; 10], "x").is_err());
        let mut bad = g.clone();
        bad.swap(3, 4);
        assert!(GridFunction::new(bad, vec![0.0; 16], "x").is_err());
        let gf = GridFunction::new(g, (0..16).map(|i| -(i as f64)).collect(), "x").unwrap();
        assert_eq!(sup_norm(&gf), 15.0);
        assert!(gf.sup_norm() >= gf.values()[0].abs());
        assert!(gf.to_csv().starts_with("x,value\n1e0,-0e0\n"));
    }

    #[test]
    fn constant_has_zero_solution() {
        let spec = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
        let gf = solve_poisson(&spec, &Observable::constant(3.0), 64).unwrap();
        assert_eq!(sup_norm(&gf), 0.0);
        let az = apply_generator(&spec, &gf).unwrap();
        assert_eq!(sup_norm(&az.values), 0.0);
    }

    #[test]
    fn tanou_sine_is_an_eigenfunction() {
        let spec = DiffusionSpec::tan_ou(0.5).unwrap();
        let f = Observable::new("sin", 1.0, f64::sin);
        let gf = solve_poisson(&spec, &f, DEFAULT_GRID).unwrap();
        let err = gf
            .iter()
            .map(|(x, v)| (v - x.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let r = poisson_residual(&spec, &f, &gf).unwrap();
        assert!(r.sup < 1e-4 * 2.0, "{r:?}");
    }

    #[test]
    fn jacobi_linear_is_an_eigenfunction() {
        for (a, b, s2) in [(1.0, 2.0, 2.0), (0.3, 1.5, 1.0), (2.0, 3.0, 0.5)] {
            let spec = DiffusionSpec::jacobi(a, b, s2).unwrap();
            let c = a / b;
            let f = Observable::new("x-a/b", c.max(1.0 - c), move |x| x - c);
            let gf = solve_poisson(&spec, &f, DEFAULT_GRID).unwrap();
            let err = gf
                .iter()
                .map(|(x, v)| (v - (x - c) / b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "a={a} b={b}: {err}");
            let r = poisson_residual(&spec, &f, &gf).unwrap();
            assert!(r.sup < 1e-4 * (1.0 + f.sup_norm()), "{r:?}");
        }
    }

    #[test]
    fn generator_on_samples() {
        let spec = DiffusionSpec::tan_ou(0.5).unwrap();
        let grid = endpoint_grid(spec.interval(), 512).unwrap();
        let gf = GridFunction::sample(grid, spec.id(), f64::sin).unwrap();
        let out = apply_generator(&spec, &gf).unwrap();
        let err = out
            .values
            .iter()
            .map(|(x, v)| (v + x.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");

        let spec = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
        let grid = endpoint_grid(spec.interval(), 64).unwrap();
        let gf = GridFunction::sample(grid, spec.id(), |x| x).unwrap();
        let out = apply_generator(&spec, &gf).unwrap();
        let err = out
            .values
            .iter()
            .map(|(x, v)| (v - (1.0 - 2.0 * x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn coarse_grid_warns() {
        let spec = DiffusionSpec::custom(
            StateInterval::new(0.0, 1.0, Boundary::Reflecting, Boundary::Reflecting).unwrap(),
            crate::expr::Expr::Const(500.0),
            crate::expr::Expr::Const(0.01),
            Some(0.5),
        )
        .unwrap();
        let grid = (1..=16).map(|i| i as f64 / 17.0).collect();
        let gf = GridFunction::sample(grid, spec.id(), |x| x).unwrap();
        let out = apply_generator(&spec, &gf).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }
}
