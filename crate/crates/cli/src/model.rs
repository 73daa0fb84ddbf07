use std::f64::consts::PI;
use std::fs;

use anyhow::{anyhow, Context};
use ergodic_bounds::models::ModelFile;
use ergodic_bounds::{ClosedForm, DiffusionSpec, Observable};

use crate::args::{FKind, ModelArgs, ModelKind, ObservableArgs};
use crate::Failure;

pub fn resolve_spec(args: &ModelArgs) -> Result<DiffusionSpec, Failure> {
    if let Some(path) = &args.model_file {
        let src = fs::read_to_string(path)
            .with_context(|| format!("cannot read model file {}", path.display()))
            .map_err(Failure::Usage)?;
        return Ok(ModelFile::from_json(&src)?.to_spec()?);
    }
    Ok(match args.model {
        ModelKind::Jacobi => DiffusionSpec::jacobi(args.a, args.b, args.sigma2)?,
        ModelKind::Tanou => DiffusionSpec::tan_ou(args.rho)?,
        ModelKind::Maoclass => DiffusionSpec::mao_class(args.gamma)?,
    })
}

pub fn resolve_observable(
    spec: &DiffusionSpec,
    args: &ObservableArgs,
) -> Result<Observable, Failure> {
    let iv = spec.interval();
    let kind = args.f.unwrap_or(match spec.closed_form() {
        Some(ClosedForm::TanOu { .. }) => FKind::Exp,
        _ => FKind::Indicator,
    });
    let f = match kind {
        FKind::Const => Observable::constant(args.c),
        FKind::Indicator => {
            if args.lo.partial_cmp(&args.hi) != Some(std::cmp::Ordering::Less) {
                return Err(Failure::Usage(anyhow!(
                    "indicator needs lo < hi, got ({}, {})",
                    args.lo,
                    args.hi
                )));
            }
            Observable::indicator(args.lo, args.hi)
        }
        FKind::Exp => Observable::exp_on(args.u, iv)?,
        FKind::Identity => {
            if !iv.is_bounded() {
                return Err(Failure::Usage(anyhow!(
                    "x is unbounded on ({}, {})",
                    iv.lower,
                    iv.upper
                )));
            }
            Observable::new("x", iv.lower.abs().max(iv.upper.abs()), |x| x)
        }
        FKind::Sin => Observable::new("sin(x)", 1.0, f64::sin),
        FKind::Cos => Observable::new("cos(x)", 1.0, f64::cos),
    };
    f.check_on(iv)?;
    Ok(f)
}

/// `e^{uπ/2}` and `2cosh(uπ/2)/(1+u²)`, the alternative tan-OU constants.
pub fn paper_tanou_constants(u: f64) -> (f64, f64) {
    (
        (u * PI / 2.0).exp(),
        2.0 * (u * PI / 2.0).cosh() / (1.0 + u * u),
    )
}
