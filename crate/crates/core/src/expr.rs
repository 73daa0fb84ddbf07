//! Closed set of scalar expressions used to describe custom coefficients in
//! model files. Expressions are data, never evaluated code.
//!
//! JSON form (externally tagged):
//!
//! ```json
//! {"mul": [{"const": 2.0}, {"pow": {"base": {"poly": [1.0, 1.0]}, "exp": 3.0}}]}
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    X,
    /// Coefficients in increasing degree: `c0 + c1 x + c2 x^2 + ...`.
    Poly(Vec<f64>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Pow {
        base: Box<Expr>,
        exp: f64,
    },
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Tan(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            Expr::Add(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Expr::Mul(terms) => terms.iter().map(|t| t.eval(x)).product(),
            Expr::Neg(e) => -e.eval(x),
            Expr::Pow { base, exp } => base.eval(x).powf(*exp),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Ln(e) => e.eval(x).ln(),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Tan(e) => e.eval(x).tan(),
        }
    }

    pub fn scaled(self, k: f64) -> Expr {
        Expr::Mul(vec![Expr::Const(k), self])
    }

    pub fn tan_x() -> Expr {
        Expr::Tan(Box::new(Expr::X))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_polynomial() {
        let p = Expr::Poly(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
    }

    #[test]
    fn parses_nested_json() {
        let src =
            r#"{"mul": [{"const": 2.0}, {"pow": {"base": {"poly": [1.0, 1.0]}, "exp": 3.0}}]}"#;
        let e: Expr = serde_json::from_str(src).unwrap();
        assert_eq!(e.eval(1.0), 16.0);
        let tan: Expr = serde_json::from_str(r#"{"neg": {"tan": "x"}}"#).unwrap();
        assert!((tan.eval(0.25) + 0.25f64.tan()).abs() < 1e-15);
    }
}
