use anyhow::anyhow;
use ergodic_bounds::bounds::{
    hoeffding, jacobi_occupation_bound, tanou_expfunc_bound, BoundResult, ConstantMode,
    TANOU_HALF_T_AV,
};
use ergodic_bounds::ergodicity::{
    assess, eigentime, q_sharp_norm_bound, EigenSequence, DEFAULT_TOL,
};
use ergodic_bounds::mc::{
    ensemble_averages, estimate_tail_grid, mc_average_hitting_time, stationary_histogram,
    BoundaryPolicy, MeanEstimate, SimConfig,
};
use ergodic_bounds::models::ObservableKind;
use ergodic_bounds::poisson::{poisson_residual, solve_poisson};
use ergodic_bounds::{ClosedForm, DiffusionSpec};
use serde_json::{json, Value};

use crate::args::*;
use crate::model::{paper_tanou_constants, resolve_observable, resolve_spec};
use crate::output::{csv_num, csv_opt, csv_preamble, csv_text, Payload, SCHEMA_VERSION};
use crate::Failure;

/// A payload plus the failure (if any) to report after it is emitted.
pub struct Outcome {
    pub payload: Payload,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok(payload: Payload) -> Self {
        Self {
            payload,
            failure: None,
        }
    }
}

fn with_schema(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    v
}

fn bound_json(r: &BoundResult) -> Value {
    json!({
        "valid": r.valid,
        "threshold": r.threshold,
        "exponent": r.exponent,
        "bound": r.bound,
        "theta_star": r.theta_star,
        "bound_effective": r.bound_effective(),
    })
}

fn bound_csv(leading: &[(&str, f64)], r: &BoundResult) -> String {
    let mut head: Vec<&str> = leading.iter().map(|p| p.0).collect();
    head.extend(["valid", "threshold", "exponent", "bound", "theta_star"]);
    let mut row: Vec<String> = leading.iter().map(|p| csv_num(p.1)).collect();
    row.extend([
        r.valid.to_string(),
        csv_num(r.threshold),
        csv_opt(r.exponent),
        csv_opt(r.bound),
        csv_opt(r.theta_star),
    ]);
    format!(
        "{}{}\n{}\n",
        csv_preamble(&[]),
        head.join(","),
        row.join(",")
    )
}

fn bound_outcome(payload: Payload, valid: bool) -> Outcome {
    Outcome {
        payload,
        failure: (!valid).then_some(Failure::InvalidThreshold),
    }
}

pub fn bound(args: &BoundArgs) -> Result<Outcome, Failure> {
    let r = hoeffding(args.t, args.eps, args.f_norm, args.q_norm)?;
    let mut json = bound_json(&r);
    json["inputs"] =
        json!({"t": args.t, "eps": args.eps, "f_norm": args.f_norm, "q_norm": args.q_norm});
    let csv = bound_csv(
        &[
            ("t", args.t),
            ("eps", args.eps),
            ("f_norm", args.f_norm),
            ("q_norm", args.q_norm),
        ],
        &r,
    );
    Ok(bound_outcome(
        Payload {
            json: with_schema(json),
            csv,
            default_format: Format::Json,
        },
        r.valid,
    ))
}

pub fn jacobi_bound(args: &JacobiBoundArgs) -> Result<Outcome, Failure> {
    let t_av = match (args.t_av, args.b, args.sigma2) {
        (Some(t_av), _, _) => t_av,
        (None, Some(b), Some(sigma2)) => {
            eigentime(&EigenSequence::jacobi(b, sigma2)?, DEFAULT_TOL)?.value
        }
        _ => {
            return Err(Failure::Usage(anyhow!(
                "give --t-av, or both --b and --sigma2"
            )))
        }
    };
    let r = jacobi_occupation_bound(args.t, args.eps, t_av)?;
    let mut json = bound_json(&r);
    json["t_av"] = json!(t_av);
    json["q_norm"] = json!(q_sharp_norm_bound(t_av));
    let csv = bound_csv(&[("t", args.t), ("eps", args.eps), ("t_av", t_av)], &r);
    Ok(bound_outcome(
        Payload {
            json: with_schema(json),
            csv,
            default_format: Format::Json,
        },
        r.valid,
    ))
}

pub fn tanou_bound(args: &TanouBoundArgs) -> Result<Outcome, Failure> {
    let mode = if args.paper_constant {
        ConstantMode::Paper
    } else {
        ConstantMode::Computed
    };
    let b = tanou_expfunc_bound(args.t, args.eps, args.u, mode)?;
    let mut json = bound_json(&b.result);
    json["mode"] = json!(b.mode);
    json["u"] = json!(b.u);
    json["t_av"] = json!(b.t_av);
    json["f_norm"] = json!(b.f_norm);
    json["q_norm"] = json!(b.q_norm);
    json["centering_rate"] = json!(b.centering_rate);
    json["centering"] = json!(b.centering);
    let csv = bound_csv(
        &[
            ("t", args.t),
            ("eps", args.eps),
            ("u", args.u),
            ("f_norm", b.f_norm),
            ("centering", b.centering),
        ],
        &b.result,
    );
    Ok(bound_outcome(
        Payload {
            json: with_schema(json),
            csv,
            default_format: Format::Json,
        },
        b.result.valid,
    ))
}

pub fn check(args: &ModelOnly) -> Result<Outcome, Failure> {
    let spec = match (&args.model.model_file, args.model.model) {
        (None, ModelKind::Maoclass) => DiffusionSpec::mao_class_unchecked(args.model.gamma)?,
        _ => resolve_spec(&args.model)?,
    };
    let seq = EigenSequence::for_spec(&spec);
    let report = assess(&spec, seq.as_ref());
    let json = serde_json::to_value(&report).map_err(|e| Failure::Internal(e.into()))?;
    let field = |v: &Value| match v {
        Value::Number(n) => n.to_string(),
        Value::Null => String::new(),
        other => csv_text(&other.to_string()),
    };
    let csv = format!(
        "{}spec_id,integral_value,t_av,q_sharp_norm_bound,verdict\n{},{},{},{},{}\n",
        csv_preamble(&[]),
        csv_text(&report.spec_id),
        field(&json["integral_value"]),
        field(&json["t_av"]),
        field(&json["q_sharp_norm_bound"]),
        field(&json["verdict"]).trim_matches('"'),
    );
    Ok(Outcome::ok(Payload {
        json: with_schema(json),
        csv,
        default_format: Format::Json,
    }))
}

fn eigen_sequence(spec: &DiffusionSpec) -> Result<EigenSequence, Failure> {
    EigenSequence::for_spec(spec).ok_or_else(|| {
        Failure::Usage(anyhow!(
            "{} has no built-in eigenvalue sequence; the average hitting time is unavailable",
            spec.id()
        ))
    })
}

pub fn tav(args: &ModelOnly) -> Result<Outcome, Failure> {
    let spec = resolve_spec(&args.model)?;
    let est = eigentime(&eigen_sequence(&spec)?, DEFAULT_TOL)?;
    let json = json!({
        "spec_id": spec.id(),
        "t_av": est.value,
        "uncertainty": est.uncertainty,
        "terms": est.terms,
        "q_sharp_norm_bound": q_sharp_norm_bound(est.value),
    });
    let csv = format!(
        "{}spec_id,t_av,uncertainty,terms\n{},{},{},{}\n",
        csv_preamble(&[]),
        csv_text(&spec.id()),
        csv_num(est.value),
        csv_num(est.uncertainty),
        est.terms
    );
    Ok(Outcome::ok(Payload {
        json: with_schema(json),
        csv,
        default_format: Format::Json,
    }))
}

pub fn pi(args: &ModelAndObservable) -> Result<Outcome, Failure> {
    let spec = resolve_spec(&args.model)?;
    let f = resolve_observable(&spec, &args.observable)?;
    let law = spec.stationary()?;
    let value = law.expectation(&f)?;
    let quadrature = law.expectation_by_quadrature(&f)?;
    let json = json!({
        "spec_id": spec.id(),
        "observable": f.label(),
        "pi_f": value,
        "pi_f_quadrature": quadrature,
    });
    let csv = format!(
        "{}spec_id,observable,pi_f,pi_f_quadrature\n{},{},{},{}\n",
        csv_preamble(&[]),
        csv_text(&spec.id()),
        csv_text(f.label()),
        csv_num(value),
        csv_num(quadrature)
    );
    Ok(Outcome::ok(Payload {
        json: with_schema(json),
        csv,
        default_format: Format::Json,
    }))
}

pub fn poisson(args: &PoissonArgs) -> Result<Outcome, Failure> {
    let spec = resolve_spec(&args.model)?;
    let f = resolve_observable(&spec, &args.observable)?;
    let gf = solve_poisson(&spec, &f, args.n)?;
    let residual = poisson_residual(&spec, &f, &gf)?;
    let t_av = match EigenSequence::for_spec(&spec) {
        Some(seq) => Some(eigentime(&seq, DEFAULT_TOL)?.value),
        None => None,
    };
    let norm_bound = t_av.map(|t| q_sharp_norm_bound(t) * f.sup_norm());
    let json = json!({
        "spec_id": spec.id(),
        "observable": f.label(),
        "n": args.n,
        "sup_norm": gf.sup_norm(),
        "f_norm": f.sup_norm(),
        "t_av": t_av,
        "norm_bound": norm_bound,
        "residual": residual,
    });
    let csv = format!(
        "{}{}",
        csv_preamble(&[
            ("spec_id", spec.id()),
            ("observable", f.label().to_string())
        ]),
        gf.to_csv()
    );
    Ok(Outcome::ok(Payload {
        json: with_schema(json),
        csv,
        default_format: Format::Json,
    }))
}

fn sim_config(
    spec: &DiffusionSpec,
    sim: &SimArgs,
    t: f64,
    default_paths: u64,
    seed: u64,
) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::new(spec, t, sim.paths.unwrap_or(default_paths), seed).with_dt(sim.dt);
    if let Some(x0) = sim.x0 {
        cfg = cfg.with_x0(x0);
    }
    if let Some(delta) = sim.clamp {
        cfg = cfg.with_boundary(BoundaryPolicy::Clamp { delta });
    } else if sim.reflect {
        cfg = cfg.with_boundary(BoundaryPolicy::Reflect);
    }
    cfg.validate(spec)?;
    Ok(cfg)
}

fn boundary_label(b: BoundaryPolicy) -> String {
    match b {
        BoundaryPolicy::Reflect => "reflect".into(),
        BoundaryPolicy::Clamp { delta } => format!("clamp({delta})"),
    }
}

fn config_pairs(spec: &DiffusionSpec, cfg: &SimConfig) -> Vec<(&'static str, String)> {
    vec![
        ("seed", cfg.seed.to_string()),
        ("spec_id", spec.id()),
        ("dt", csv_num(cfg.dt)),
        ("n_paths", cfg.n_paths.to_string()),
        ("x0", csv_num(cfg.x0)),
        ("boundary", boundary_label(cfg.boundary)),
    ]
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<Outcome, Failure> {
    let spec = resolve_spec(&args.model)?;
    let default_paths = match args.mode {
        SimMode::Histogram => 200,
        _ => 1000,
    };
    let cfg = sim_config(&spec, &args.sim, args.t, default_paths, seed)?;
    let mut pairs = config_pairs(&spec, &cfg);
    pairs.push(("mode", format!("{:?}", args.mode).to_lowercase()));
    pairs.push(("t", csv_num(cfg.t_horizon)));
    let base = json!({
        "spec_id": spec.id(),
        "seed": cfg.seed,
        "dt": cfg.dt,
        "t": cfg.t_horizon,
        "n_paths": cfg.n_paths,
        "x0": cfg.x0,
        "boundary": boundary_label(cfg.boundary),
    });
    let (json, csv) = match args.mode {
        SimMode::Functional => {
            let f = resolve_observable(&spec, &args.observable)?;
            let pi_f = spec.stationary()?.expectation(&f)?;
            let values: Vec<f64> = ensemble_averages(&spec, &f, &cfg, &[cfg.t_horizon])?
                .into_iter()
                .map(|v| v[0])
                .collect();
            let m = MeanEstimate::from_samples(&values);
            let mut json = base;
            json["observable"] = json!(f.label());
            json["pi_f"] = json!(pi_f);
            json["mean"] = json!(m.mean);
            json["std_error"] = json!(m.std_error);
            pairs.push(("observable", f.label().to_string()));
            pairs.push(("pi_f", csv_num(pi_f)));
            let mut csv = csv_preamble(&pairs);
            csv.push_str("path,time_average\n");
            for (i, v) in values.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", csv_num(*v)));
            }
            (json, csv)
        }
        SimMode::HittingTime => {
            let h = mc_average_hitting_time(&spec, &cfg)?;
            let mut json = base;
            json["hitting_time"] =
                serde_json::to_value(h).map_err(|e| Failure::Internal(e.into()))?;
            let mut csv = csv_preamble(&pairs);
            csv.push_str("n,mean,std_error,capped_fraction,unreliable\n");
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                h.n,
                csv_num(h.mean),
                csv_num(h.std_error),
                csv_num(h.capped_fraction),
                h.unreliable
            ));
            (json, csv)
        }
        SimMode::Histogram => {
            let h = stationary_histogram(&spec, &cfg, args.bins)?;
            let mut json = base;
            json["histogram"] =
                serde_json::to_value(&h).map_err(|e| Failure::Internal(e.into()))?;
            let mut csv = csv_preamble(&pairs);
            csv.push_str("lo,hi,frequency\n");
            for (i, p) in h.frequencies.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    csv_num(h.edges[i]),
                    csv_num(h.edges[i + 1]),
                    csv_num(*p)
                ));
            }
            (json, csv)
        }
    };
    Ok(Outcome::ok(Payload {
        json: with_schema(json),
        csv,
        default_format: Format::Json,
    }))
}

struct VerifyRow {
    t: f64,
    eps: f64,
    threshold: f64,
    bound: f64,
    k: u64,
    n: u64,
    p_hat: f64,
    ci_upper: f64,
    dominated: bool,
    vacuous: bool,
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<Outcome, Failure> {
    let spec = resolve_spec(&args.model)?;
    let f = resolve_observable(&spec, &args.observable)?;
    if args.t.is_empty() || args.eps.is_empty() {
        return Err(Failure::Usage(anyhow!(
            "the grid needs at least one t and one eps"
        )));
    }
    if !(args.bound_scale > 0.0 && args.bound_scale.is_finite()) {
        return Err(Failure::Usage(anyhow!("--bound-scale must be positive")));
    }
    let t_max = args.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cfg = sim_config(&spec, &args.sim, t_max, 10_000, seed)?;

    let t_av = match spec.closed_form() {
        Some(ClosedForm::TanOu { rho: 0.5 }) => TANOU_HALF_T_AV,
        _ => eigentime(&eigen_sequence(&spec)?, DEFAULT_TOL)?.value,
    };
    let (f_norm, pi_f) = if args.paper_constant {
        match (spec.closed_form(), f.kind()) {
            (Some(ClosedForm::TanOu { rho: 0.5 }), ObservableKind::Exp { u }) => {
                paper_tanou_constants(u)
            }
            _ => {
                return Err(Failure::Usage(anyhow!(
                    "--paper-constant applies to the tan-OU (rho = 1/2) exponential functional only"
                )))
            }
        }
    } else {
        (
            f.sup_norm(),
            spec.stationary()?.expectation_by_quadrature(&f)?,
        )
    };
    let q_norm = q_sharp_norm_bound(t_av);

    let estimates = estimate_tail_grid(&spec, &f, &cfg, &args.t, &args.eps, pi_f, args.delta)?;
    let mut rows = Vec::with_capacity(estimates.len());
    for est in &estimates {
        let r = if f_norm == 1.0 && matches!(spec.closed_form(), Some(ClosedForm::Jacobi { .. })) {
            jacobi_occupation_bound(est.t, est.eps, t_av)?
        } else {
            hoeffding(est.t, est.eps, f_norm, q_norm)?
        };
        let scaled = r.bound.map(|b| b * args.bound_scale);
        let vacuous = scaled.is_none_or(|b| b >= 1.0);
        let bound = scaled.map_or(1.0, |b| b.min(1.0));
        rows.push(VerifyRow {
            t: est.t,
            eps: est.eps,
            threshold: r.threshold,
            bound,
            k: est.k,
            n: est.n,
            p_hat: est.p_hat,
            ci_upper: est.ci_upper,
            dominated: vacuous || est.ci_upper <= bound,
            vacuous,
        });
    }

    let mut pairs = config_pairs(&spec, &cfg);
    pairs.extend([
        ("observable", f.label().to_string()),
        ("pi_f", csv_num(pi_f)),
        ("f_norm", csv_num(f_norm)),
        ("t_av", csv_num(t_av)),
        ("q_norm", csv_num(q_norm)),
        ("delta", csv_num(args.delta)),
        (
            "constants",
            if args.paper_constant {
                "paper"
            } else {
                "computed"
            }
            .to_string(),
        ),
    ]);
    if args.bound_scale != 1.0 {
        pairs.push(("bound_scale", csv_num(args.bound_scale)));
    }
    let mut csv = csv_preamble(&pairs);
    csv.push_str("t,eps,threshold,bound,k,n,p_hat,ci_upper,dominated,vacuous\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            csv_num(r.t),
            csv_num(r.eps),
            csv_num(r.threshold),
            csv_num(r.bound),
            r.k,
            r.n,
            csv_num(r.p_hat),
            csv_num(r.ci_upper),
            r.dominated,
            r.vacuous
        ));
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "t": r.t, "eps": r.eps, "threshold": r.threshold, "bound": r.bound,
                "k": r.k, "n": r.n, "p_hat": r.p_hat, "ci_upper": r.ci_upper,
                "dominated": r.dominated, "vacuous": r.vacuous,
            })
        })
        .collect();
    let mut json = json!({
        "spec_id": spec.id(),
        "observable": f.label(),
        "seed": cfg.seed,
        "dt": cfg.dt,
        "n_paths": cfg.n_paths,
        "x0": cfg.x0,
        "boundary": boundary_label(cfg.boundary),
        "pi_f": pi_f,
        "f_norm": f_norm,
        "t_av": t_av,
        "q_norm": q_norm,
        "delta": args.delta,
        "rows": json_rows,
    });
    if args.bound_scale != 1.0 {
        json["bound_scale"] = json!(args.bound_scale);
    }
    let failing = rows.iter().filter(|r| !r.dominated).count();
    Ok(Outcome {
        payload: Payload {
            json: with_schema(json),
            csv,
            default_format: Format::Csv,
        },
        failure: (failing > 0).then_some(Failure::NotDominated(failing)),
    })
}
