//! Coefficient expression language.
//!
//! A coefficient is a scalar field on `R^N` written in a small arithmetic
//! language: numeric literals, the coordinates `x1..xN`, the constants `pi`
//! and `N` (the dimension), the operators `+ - * / ^`, and the functions
//! `exp log sqrt sin cos abs min max norm(x)`. Gradients are exact, computed
//! by forward-mode dual numbers with one pass per coordinate.
//!
//! ```
//! use heatkernel::coeffparse::CoefficientField;
//!
//! let f = CoefficientField::parse("x1^2 + x2", 3).unwrap();
//! assert_eq!(f.eval(&[2.0, 3.0, 0.0]).unwrap(), 7.0);
//! assert_eq!(f.grad(&[3.0, 0.0, 0.0]).unwrap(), vec![6.0, 1.0, 0.0]);
//! ```

mod eval;
pub mod expr;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use expr::{BinOp, Expr, Func};

/// Smallest supported dimension.
pub const MIN_DIMENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("variable x{index} at position {position} is out of range for dimension {dimension}")]
    VariableOutOfRange { position: usize, index: usize, dimension: usize },
    #[error("dimension {0} is below the supported minimum of 3")]
    Dimension(usize),
}

impl ParseError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { position, message: message.into() }
    }

    pub(crate) fn unknown(position: usize, name: &str) -> ParseError {
        ParseError::UnknownIdentifier { position, name: name.to_string() }
    }

    pub(crate) fn out_of_range(position: usize, index: usize, dimension: usize) -> ParseError {
        ParseError::VariableOutOfRange { position, index, dimension }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in '{expr}': {reason}")]
    Domain { expr: String, reason: &'static str },
    #[error("'{expr}' is not differentiable at this point")]
    NonDifferentiable { expr: String },
    #[error("'{expr}' would need a second derivative, which is not supported")]
    SecondDerivative { expr: String },
    #[error("point has {got} coordinates, field lives in dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("divergence needs {expected} components, got {got}")]
    Components { expected: usize, got: usize },
}

/// Immutable scalar field on `R^N`. Cheap to clone.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    expr: Arc<Expr>,
    dim: usize,
}

impl CoefficientField {
    pub fn parse(text: &str, dim: usize) -> Result<CoefficientField, ParseError> {
        if dim < MIN_DIMENSION {
            return Err(ParseError::Dimension(dim));
        }
        let expr = parser::Parser::new(text, dim)?.parse_all()?;
        Ok(CoefficientField { expr: Arc::new(expr), dim })
    }

    /// Wraps an already built tree. Panics if the tree references a
    /// coordinate beyond `dim`.
    pub fn from_expr(expr: Expr, dim: usize) -> CoefficientField {
        assert!(dim >= MIN_DIMENSION, "dimension {dim} below minimum");
        if let Some(i) = expr.max_var() {
            assert!(i < dim, "expression references x{} in dimension {dim}", i + 1);
        }
        CoefficientField { expr: Arc::new(expr), dim }
    }

    pub fn constant(value: f64, dim: usize) -> CoefficientField {
        CoefficientField::from_expr(Expr::Num(value), dim)
    }

    pub fn coordinate(axis: usize, dim: usize) -> CoefficientField {
        CoefficientField::from_expr(Expr::Var(axis), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    /// Literal value, if the tree is a bare number.
    pub fn as_literal(&self) -> Option<f64> {
        match *self.expr {
            Expr::Num(v) => Some(v),
            _ => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_point(x)?;
        eval::eval(&self.expr, x)
    }

    /// Partial derivative along one coordinate.
    pub fn partial(&self, x: &[f64], axis: usize) -> Result<f64, EvalError> {
        self.check_point(x)?;
        Ok(eval::dual(&self.expr, x, axis)?.1)
    }

    /// Exact gradient, one dual-number pass per coordinate.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_point(x)?;
        if self.is_constant() {
            return Ok(vec![0.0; self.dim]);
        }
        (0..self.dim).map(|k| Ok(eval::dual(&self.expr, x, k)?.1)).collect()
    }

    fn combine(&self, op: BinOp, other: &CoefficientField) -> CoefficientField {
        assert_eq!(self.dim, other.dim, "fields of different dimension");
        CoefficientField::from_expr(
            Expr::binary(op, (*self.expr).clone(), (*other.expr).clone()),
            self.dim,
        )
    }

    pub fn add(&self, other: &CoefficientField) -> CoefficientField {
        self.combine(BinOp::Add, other)
    }

    pub fn sub(&self, other: &CoefficientField) -> CoefficientField {
        self.combine(BinOp::Sub, other)
    }

    pub fn mul(&self, other: &CoefficientField) -> CoefficientField {
        self.combine(BinOp::Mul, other)
    }

    pub fn negate(&self) -> CoefficientField {
        CoefficientField::from_expr(Expr::neg((*self.expr).clone()), self.dim)
    }

    /// Field whose value is the divergence of `fields` (one component per axis).
    pub fn divergence_of(fields: &[CoefficientField]) -> CoefficientField {
        let dim = fields.first().map_or(MIN_DIMENSION, |f| f.dim);
        assert_eq!(fields.len(), dim, "divergence needs one component per axis");
        let parts = fields.iter().map(|f| (*f.expr).clone()).collect();
        CoefficientField::from_expr(Expr::Divergence(parts), dim)
    }
}

impl fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// `sum_i d_i fields[i](x)`.
pub fn divergence(fields: &[CoefficientField], x: &[f64]) -> Result<f64, EvalError> {
    let n = x.len();
    if fields.len() != n {
        return Err(EvalError::Components { expected: n, got: fields.len() });
    }
    let mut total = 0.0;
    for (i, f) in fields.iter().enumerate() {
        total += f.partial(x, i)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> CoefficientField {
        CoefficientField::parse(s, 3).unwrap()
    }

    #[test]
    fn literal_and_arithmetic() {
        assert_eq!(field("0").eval(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(field("x1^2 + x2").eval(&[2.0, 3.0, 0.0]).unwrap(), 7.0);
        let v = field("exp(-norm(x)^2)").eval(&[1.0, 0.0, 0.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(field("x1*x2*x3").eval(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let v = field("-(N+2)*norm(x)^2").eval(&[1.0, 1.0, 1.0]).unwrap();
        assert!((v + 15.0).abs() < 1e-12);
    }

    #[test]
    fn precedence() {
        assert_eq!(field("-x1^2").eval(&[3.0, 0.0, 0.0]).unwrap(), -9.0);
        assert_eq!(field("2^3^2").eval(&[0.0; 3]).unwrap(), 512.0);
        assert_eq!(field("1 - 2 - 3").eval(&[0.0; 3]).unwrap(), -4.0);
        assert_eq!(field("8 / 4 / 2").eval(&[0.0; 3]).unwrap(), 1.0);
        assert_eq!(field("2 + 3 * 4").eval(&[0.0; 3]).unwrap(), 14.0);
        assert_eq!(field("2^-1").eval(&[0.0; 3]).unwrap(), 0.5);
        assert_eq!(field("1e-2 * 100").eval(&[0.0; 3]).unwrap(), 1.0);
        assert_eq!(field("max(x1, x2) - min(x1, x2)").eval(&[1.0, 4.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        match field("1/x1").eval(&[0.0, 1.0, 1.0]) {
            Err(EvalError::Domain { expr, .. }) => assert!(expr.contains("x1")),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(matches!(field("log(x1 - 1)").eval(&[1.0, 0.0, 0.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(field("sqrt(x1)").eval(&[-1.0, 0.0, 0.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(field("x1^0.5").eval(&[-1.0, 0.0, 0.0]), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            CoefficientField::parse("x4", 3),
            Err(ParseError::VariableOutOfRange { index: 4, .. })
        ));
        assert!(matches!(
            CoefficientField::parse("foo(x1)", 3),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(CoefficientField::parse("y + 1", 3), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(CoefficientField::parse("1 +", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(CoefficientField::parse("", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(CoefficientField::parse("(1 + 2", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(CoefficientField::parse("1 $ 2", 3), Err(ParseError::Syntax { position: 2, .. })));
        assert!(matches!(CoefficientField::parse("x1", 2), Err(ParseError::Dimension(2))));
        assert!(matches!(CoefficientField::parse("min(x1)", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(CoefficientField::parse("x0", 3), Err(ParseError::VariableOutOfRange { .. })));
    }

    #[test]
    fn gradients() {
        assert_eq!(field("x1^2").grad(&[3.0, 0.0, 0.0]).unwrap(), vec![6.0, 0.0, 0.0]);
        let g = field("norm(x)^2").grad(&[1.0, 2.0, 3.0]).unwrap();
        for (gi, want) in g.iter().zip([2.0, 4.0, 6.0]) {
            assert!((gi - want).abs() < 1e-12);
        }
        let g = field("exp(x2)").grad(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, std::f64::consts::E, 0.0]);
    }

    #[test]
    fn kinks_are_errors() {
        assert!(matches!(field("norm(x)").grad(&[0.0; 3]), Err(EvalError::NonDifferentiable { .. })));
        assert!(matches!(field("abs(x2)").grad(&[1.0, 0.0, 0.0]), Err(EvalError::NonDifferentiable { .. })));
        assert!(matches!(field("sqrt(x1^2)").grad(&[0.0; 3]), Err(EvalError::NonDifferentiable { .. })));
        assert!(matches!(field("max(x1, x2)").grad(&[1.0, 1.0, 0.0]), Err(EvalError::NonDifferentiable { .. })));
        // away from the kink the same fields are fine
        assert!(field("norm(x)").grad(&[0.0, 0.0, 2.0]).is_ok());
        assert!(field("abs(x2)").grad(&[0.0, -1.0, 0.0]).is_ok());
    }

    #[test]
    fn divergence_examples() {
        let minus_x: Vec<_> = ["-x1", "-x2", "-x3"].iter().map(|s| field(s)).collect();
        assert_eq!(divergence(&minus_x, &[0.3, -2.0, 5.0]).unwrap(), -3.0);
        let zero: Vec<_> = (0..3).map(|_| field("0")).collect();
        assert_eq!(divergence(&zero, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let cyclic: Vec<_> = ["x2", "x3", "x1"].iter().map(|s| field(s)).collect();
        assert_eq!(divergence(&cyclic, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(divergence(&cyclic[..2], &[1.0, 2.0, 3.0]), Err(EvalError::Components { .. })));
    }

    #[test]
    fn divergence_node_evaluates_but_cannot_be_differentiated() {
        let f: Vec<_> = ["-x1*x2^2", "-x2", "sin(x3)"].iter().map(|s| field(s)).collect();
        let d = CoefficientField::divergence_of(&f);
        let x = [0.5, 2.0, 1.0];
        let want = -4.0 - 1.0 + 1.0f64.cos();
        assert!((d.eval(&x).unwrap() - want).abs() < 1e-14);
        assert!(matches!(d.grad(&x), Err(EvalError::SecondDerivative { .. })));
        let reparsed = CoefficientField::parse(&d.to_string(), 3).unwrap();
        assert_eq!(reparsed.eval(&x).unwrap(), d.eval(&x).unwrap());
    }

    #[test]
    fn cutoff_nodes_roundtrip() {
        let f = field("cutoff(2) * x1 + cutoff_grad(2, 3) - cutoff_gradnorm(2)");
        let g = CoefficientField::parse(&f.to_string(), 3).unwrap();
        let x = [1.5, 2.0, -3.0];
        assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        assert!(CoefficientField::parse("cutoff(x1)", 3).is_err());
        assert!(CoefficientField::parse("cutoff_grad(1, 4)", 3).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(field("x1").eval(&[1.0, 2.0]), Err(EvalError::Dimension { .. })));
    }
}
