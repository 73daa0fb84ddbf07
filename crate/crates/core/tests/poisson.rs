use ergodic_bounds::ergodicity::{eigentime, q_sharp_norm_bound, EigenSequence};
use ergodic_bounds::poisson::{
    apply_generator, endpoint_grid, poisson_residual, solve_poisson, sup_norm, GridFunction,
};
use ergodic_bounds::{DiffusionSpec, Observable};

fn t_av(spec: &DiffusionSpec) -> f64 {
    let seq = EigenSequence::for_spec(spec).unwrap();
    eigentime(&seq, 1e-9).unwrap().value
}

// Cells that partition the interval: midpoints between neighbours, with
// the interval ends closing the first and last cell.
fn cell_widths(grid: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 {
                lo
            } else {
                0.5 * (grid[i - 1] + grid[i])
            };
            let right = if i == n - 1 {
                hi
            } else {
                0.5 * (grid[i] + grid[i + 1])
            };
            right - left
        })
        .collect()
}

fn battery() -> Vec<Observable> {
    let mut fs = Vec::new();
    for k in 1..=4 {
        let k = k as f64;
        fs.push(Observable::new(format!("sin({k}x)"), 1.0, move |x| {
            (k * x).sin()
        }));
        fs.push(Observable::new(format!("cos({k}x)"), 1.0, move |x| {
            (k * x).cos()
        }));
    }
    for (lo, hi) in [(0.0, 0.5), (0.2, 0.4), (-1.0, 0.1), (0.6, 2.0), (-0.5, 0.5)] {
        fs.push(Observable::indicator(lo, hi));
    }
    fs.push(Observable::new("x", 1.6, |x| x));
    fs.push(Observable::new("x^2", 2.5, |x| x * x));
    fs.push(Observable::new("tanh(4x-1)", 1.0, |x| {
        (4.0 * x - 1.0).tanh()
    }));
    fs.push(Observable::new("1/(1+x^2)", 1.0, |x| 1.0 / (1.0 + x * x)));
    fs.push(
        Observable::new("sign(x-0.3)", 1.0, |x| if x > 0.3 { 1.0 } else { -1.0 })
            .with_breakpoints([0.3]),
    );
    fs.push(Observable::new("exp(-x)", 4.9, |x| (-x).exp()));
    fs.push(Observable::new("|x-0.5|", 2.1, |x| (x - 0.5).abs()).with_breakpoints([0.5]));
    assert_eq!(fs.len(), 20);
    fs
}

#[test]
fn solution_norm_within_twice_average_hitting_time() {
    let specs = [
        DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap(),
        DiffusionSpec::jacobi(0.6, 1.5, 1.0).unwrap(),
        DiffusionSpec::tan_ou(0.5).unwrap(),
    ];
    for spec in &specs {
        let bound_per_unit = q_sharp_norm_bound(t_av(spec));
        for f in battery() {
            let gf = solve_poisson(spec, &f, 1024).unwrap();
            let norm = sup_norm(&gf);
            assert!(
                norm <= bound_per_unit * f.sup_norm() + 1e-6,
                "{} {}: |Q f| = {norm}, 2 t_av |f| = {}",
                spec.id(),
                f.label(),
                bound_per_unit * f.sup_norm()
            );
        }
    }
}

#[test]
fn discrete_stationary_mean_vanishes() {
    let cases = [
        (
            DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap(),
            Observable::indicator(0.0, 0.5),
        ),
        (
            DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap(),
            Observable::new("x^3", 1.0, |x| x * x * x),
        ),
        (
            DiffusionSpec::jacobi(2.0, 3.0, 1.0).unwrap(),
            Observable::new("cos(5x)", 1.0, |x| (5.0 * x).cos()),
        ),
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::exp(1.0, std::f64::consts::FRAC_PI_2.exp()),
        ),
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::indicator(-0.3, 0.9),
        ),
    ];
    for (spec, f) in &cases {
        let gf = solve_poisson(spec, f, 4096).unwrap();
        let law = spec.stationary().unwrap();
        let iv = spec.interval();
        let widths = cell_widths(gf.grid(), iv.lower, iv.upper);
        let mean: f64 = gf
            .iter()
            .zip(&widths)
            .map(|((x, v), w)| v * law.density(x).unwrap() * w)
            .sum();
        assert!(mean.abs() <= 1e-6, "{} {}: {mean}", spec.id(), f.label());
    }
}

#[test]
fn residual_small_for_smooth_observables() {
    let cases = [
        (
            DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap(),
            Observable::new("x^3", 1.0, |x| x * x * x),
        ),
        (
            DiffusionSpec::jacobi(2.0, 3.0, 1.0).unwrap(),
            Observable::new("cos(5x)", 1.0, |x| (5.0 * x).cos()),
        ),
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::exp(1.0, std::f64::consts::FRAC_PI_2.exp()),
        ),
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::new("cos(x)", 1.0, f64::cos),
        ),
    ];
    for (spec, f) in &cases {
        let gf = solve_poisson(spec, f, 4096).unwrap();
        let r = poisson_residual(spec, f, &gf).unwrap();
        assert!(
            r.sup <= 1e-4 * (1.0 + f.sup_norm()),
            "{} {}: {r:?}",
            spec.id(),
            f.label()
        );
        assert_eq!(r.skipped, 0);
    }
}

#[test]
fn residual_away_from_jumps() {
    let spec = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
    let f = Observable::indicator(0.0, 0.5);
    let gf = solve_poisson(&spec, &f, 4096).unwrap();
    let r = poisson_residual(&spec, &f, &gf).unwrap();
    assert!(r.skipped > 0);
    assert!(r.sup <= 2e-4, "{r:?}");
}

#[test]
fn residual_converges_under_refinement() {
    let cases = [
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::new("sin", 1.0, f64::sin),
        ),
        (
            DiffusionSpec::tan_ou(0.5).unwrap(),
            Observable::new("cos(2x)", 1.0, |x| (2.0 * x).cos()),
        ),
        (
            DiffusionSpec::jacobi(2.0, 3.0, 1.0).unwrap(),
            Observable::new("cos(5x)", 1.0, |x| (5.0 * x).cos()),
        ),
    ];
    for (spec, f) in &cases {
        let coarse = poisson_residual(spec, f, &solve_poisson(spec, f, 128).unwrap()).unwrap();
        let fine = poisson_residual(spec, f, &solve_poisson(spec, f, 256).unwrap()).unwrap();
        assert!(
            coarse.sup >= 3.0 * fine.sup,
            "{} {}: {coarse:?} -> {fine:?}",
            spec.id(),
            f.label()
        );
    }
}

#[test]
fn jacobi_linear_solution_norm() {
    let spec = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
    let f = Observable::new("x-1/2", 0.5, |x| x - 0.5);
    let gf = solve_poisson(&spec, &f, 4096).unwrap();
    assert!((sup_norm(&gf) - 0.25).abs() < 1e-4);
    assert!(sup_norm(&gf) <= 0.25 + 1e-9);
}

#[test]
fn mao_class_on_half_line() {
    let spec = DiffusionSpec::mao_class(3.0).unwrap();
    let f = Observable::new("1/(1+x)", 1.0, |x| 1.0 / (1.0 + x));
    let gf = solve_poisson(&spec, &f, 4096).unwrap();
    assert!(gf.grid()[0] > 0.0 && gf.grid().last().unwrap().is_finite());
    // σ² grows like x³, so the stencil error does too; check the bulk of
    // the stationary mass.
    let pi_f = spec.stationary().unwrap().expectation(&f).unwrap();
    let af = apply_generator(&spec, &gf).unwrap().values;
    let worst = af
        .iter()
        .filter(|&(x, _)| x < 20.0)
        .map(|(x, v)| (v + f.eval(x) - pi_f).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn generator_annihilates_constants() {
    let spec = DiffusionSpec::tan_ou(0.5).unwrap();
    let grid = endpoint_grid(spec.interval(), 100).unwrap();
    let gf = GridFunction::sample(grid, spec.id(), |_| 2.5).unwrap();
    let out = apply_generator(&spec, &gf).unwrap();
    assert!(sup_norm(&out.values) < 1e-6);
}

#[test]
fn csv_round_trip() {
    let spec = DiffusionSpec::jacobi(1.0, 2.0, 2.0).unwrap();
    let gf = solve_poisson(&spec, &Observable::new("x", 1.0, |x| x), 32).unwrap();
    let csv = gf.to_csv();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows, gf.iter().collect::<Vec<_>>());
}
