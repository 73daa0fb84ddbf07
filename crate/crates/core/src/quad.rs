//! Adaptive Gauss–Kronrod quadrature with endpoint handling.
//!
//! Finite pieces are integrated with a 7/15-point Gauss–Kronrod pair and
//! global bisection of the worst subinterval. Segments that touch an endpoint
//! of the domain are never evaluated at the endpoint itself: they are covered
//! by geometrically shrinking pieces (distance to a finite endpoint halved per
//! round, width doubled per round toward an infinite endpoint) and the
//! remaining tail is extrapolated from the observed piece ratio. Integrable
//! power-law singularities and slowly decaying tails therefore converge, while
//! pieces that stop shrinking are reported as divergence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Absolute and relative error targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Value of an integral together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Tuning knobs for the endpoint-tail scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// A round whose piece is at least this fraction of the previous piece
    /// counts as "not shrinking".
    pub stall_ratio: f64,
    /// Consecutive non-shrinking rounds before divergence is declared.
    pub stall_rounds: u32,
    pub max_rounds: u32,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            stall_ratio: 0.995,
            stall_rounds: 8,
            max_rounds: 1200,
        }
    }
}

const MAX_SEGMENTS: usize = 4000;

fn check_finite(x: f64, y: f64) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Quadrature {
            lo: x,
            hi: x,
            diagnostic: format!("integrand is not finite at x = {x:e} (value {y})"),
        })
    }
}

/// One 15-point Kronrod evaluation on `[a, b]`; returns (value, error).
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = check_finite(centre, f(centre))?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let x1 = centre - dx;
        let x2 = centre + dx;
        let f1 = check_finite(x1, f(x1))?;
        let f2 = check_finite(x2, f(x2))?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let result = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((result, err))
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss–Kronrod integration over a finite interval.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature {
            lo: a,
            hi: b,
            diagnostic: "adaptive rule needs finite limits".into(),
        });
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (value, error) = gauss_kronrod(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;

    while total_err > tol.target(total) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                lo: a,
                hi: b,
                diagnostic: format!(
                    "segment limit {MAX_SEGMENTS} reached; estimate {total:e} with error {total_err:e}"
                ),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Bisection no longer resolves the subinterval.
            heap.push(worst);
            if total_err <= 1e3 * tol.target(total) {
                break;
            }
            return Err(Error::Quadrature {
                lo: a,
                hi: b,
                diagnostic: format!(
                    "subinterval collapsed at x = {mid:e}; estimate {total:e} with error {total_err:e}"
                ),
            });
        }
        let (v1, e1) = gauss_kronrod(f, worst.a, mid)?;
        let (v2, e2) = gauss_kronrod(f, mid, worst.b)?;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        if heap.len() % 64 == 0 {
            // Re-sum to avoid drift from repeated incremental updates.
            let mut sum = CompensatedSum::default();
            let mut err = 0.0;
            for s in heap.iter() {
                sum.add(s.value);
                err += s.error;
            }
            total = sum.value();
            total_err = err;
        }
    }
    if heap.len() > 1 {
        let mut sum = CompensatedSum::default();
        for s in heap.iter() {
            sum.add(s.value);
        }
        total = sum.value();
    }
    Ok(Estimate {
        value: total,
        error: total_err,
    })
}

fn tail_piece(start: f64, end: f64, k: u32) -> Option<(f64, f64)> {
    if end.is_infinite() {
        let w = start.abs().max(1.0);
        let dir = end.signum();
        let grow = |j: u32| start + dir * w * (2f64.powi(j as i32) - 1.0);
        let (p, q) = (grow(k), grow(k + 1));
        if !q.is_finite() {
            return None;
        }
        Some(if p < q { (p, q) } else { (q, p) })
    } else {
        let d = start - end;
        let near = end + d * 2f64.powi(-(k as i32) - 1);
        let far = end + d * 2f64.powi(-(k as i32));
        // Pieces resolved by only a few ulps give meaningless ratios.
        if (far - near).abs() <= 1024.0 * f64::EPSILON * end.abs() || near == end {
            return None;
        }
        Some(if near < far { (near, far) } else { (far, near) })
    }
}

/// Integrates over the segment between an interior point `start` and an
/// endpoint `end` (finite or infinite) with geometric refinement toward `end`.
/// The result is the integral over the segment oriented from low to high.
pub fn endpoint_tail<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    end: f64,
    tol: Tolerance,
    opts: TailOptions,
) -> Result<Estimate> {
    if start.is_infinite() || start == end {
        return Err(Error::Quadrature {
            lo: start.min(end),
            hi: start.max(end),
            diagnostic: "tail start must be finite and distinct from the endpoint".into(),
        });
    }
    let piece_tol = tol.scaled(0.125);
    let mut sum = CompensatedSum::default();
    let mut piece_err = 0.0;
    let mut prev: Option<f64> = None;
    let mut prev_total: Option<f64> = None;
    let mut stalled = 0u32;
    let mut settled = 0u32;
    let mut zeros = 0u32;
    let mut last_tail = 0.0;
    let mut last_ratio = f64::INFINITY;

    for k in 0..opts.max_rounds {
        let Some((a, b)) = tail_piece(start, end, k) else {
            // Representable pieces exhausted; fall back on extrapolation.
            if last_ratio < opts.stall_ratio {
                return Ok(Estimate {
                    value: sum.value() + last_tail,
                    error: piece_err + last_tail.abs(),
                });
            }
            return Err(Error::Quadrature {
                lo: start.min(end),
                hi: start.max(end),
                diagnostic: format!(
                    "endpoint refinement exhausted after {k} rounds without a shrinking tail"
                ),
            });
        };
        let piece = adaptive(f, a, b, piece_tol)?;
        sum.add(piece.value);
        piece_err += piece.error;
        let cur = piece.value;

        if let Some(p) = prev {
            if p == 0.0 && cur == 0.0 {
                zeros += 1;
                if zeros >= 2 && k >= 3 {
                    return Ok(Estimate {
                        value: sum.value(),
                        error: piece_err,
                    });
                }
                prev = Some(cur);
                continue;
            }
            zeros = 0;
            let ratio = if p == 0.0 {
                f64::INFINITY
            } else {
                (cur / p).abs()
            };
            last_ratio = ratio;
            if ratio >= opts.stall_ratio {
                stalled += 1;
                if stalled >= opts.stall_rounds {
                    return Err(Error::Divergent { rounds: k + 1 });
                }
            } else {
                stalled = 0;
            }
            if ratio < 1.0 {
                let tail = cur * ratio / (1.0 - ratio);
                last_tail = tail;
                let total = sum.value() + tail;
                let target = tol.target(total);
                if k >= 3 && tail.abs() <= target {
                    return Ok(Estimate {
                        value: total,
                        error: piece_err + tail.abs(),
                    });
                }
                if let Some(pt) = prev_total {
                    if (total - pt).abs() <= target && ratio < opts.stall_ratio {
                        settled += 1;
                    } else {
                        settled = 0;
                    }
                    if settled >= 3 && k >= 6 {
                        return Ok(Estimate {
                            value: total,
                            error: piece_err + (total - pt).abs(),
                        });
                    }
                }
                prev_total = Some(total);
            } else {
                prev_total = None;
                settled = 0;
            }
        }
        prev = Some(cur);
    }
    Err(Error::Quadrature {
        lo: start.min(end),
        hi: start.max(end),
        diagnostic: format!(
            "endpoint refinement did not settle within {} rounds",
            opts.max_rounds
        ),
    })
}

/// Integrates `f` over `(lo, hi)`; either limit may be infinite and either
/// may carry an integrable singularity. `breakpoints` strictly inside the
/// interval (discontinuities, kinks) are used as segment boundaries.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    integrate_with(f, lo, hi, breakpoints, tol, TailOptions::default())
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: Tolerance,
    opts: TailOptions,
) -> Result<Estimate> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Quadrature {
            lo,
            hi,
            diagnostic: "empty or ill-formed interval".into(),
        });
    }
    let mut points: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    if points.is_empty() {
        points.push(default_split(lo, hi));
    }

    let mut sum = CompensatedSum::default();
    let mut err = 0.0;
    let first = points[0];
    let last = *points.last().unwrap();

    let left = endpoint_tail(f, first, lo, tol, opts)?;
    sum.add(left.value);
    err += left.error;
    for w in points.windows(2) {
        let mid = adaptive(f, w[0], w[1], tol)?;
        sum.add(mid.value);
        err += mid.error;
    }
    let right = endpoint_tail(f, last, hi, tol, opts)?;
    sum.add(right.value);
    err += right.error;

    Ok(Estimate {
        value: sum.value(),
        error: err,
    })
}

/// A point inside `(lo, hi)` used to split the domain when no breakpoints
/// are supplied.
pub fn default_split(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}
