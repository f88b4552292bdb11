//! Plain and forward-mode (dual number) evaluation of expression trees.

use super::expr::{BinOp, Expr, Func};
use super::EvalError;
use crate::operators::cutoff;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn domain(e: &Expr, reason: &'static str) -> EvalError {
    EvalError::Domain { expr: e.to_string(), reason }
}

fn kink(e: &Expr) -> EvalError {
    EvalError::NonDifferentiable { expr: e.to_string() }
}

fn pow_value(e: &Expr, base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(domain(e, "zero raised to a negative power"));
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(domain(e, "negative base with non-integer exponent"));
    }
    if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

pub(crate) fn eval(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::Var(i) => x[*i],
        Expr::Norm => norm(x),
        Expr::Neg(a) => -eval(a, x)?,
        Expr::Binary(op, a, b) => {
            let (a_v, b_v) = (eval(a, x)?, eval(b, x)?);
            match op {
                BinOp::Add => a_v + b_v,
                BinOp::Sub => a_v - b_v,
                BinOp::Mul => a_v * b_v,
                BinOp::Div => {
                    if b_v == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    a_v / b_v
                }
                BinOp::Pow => pow_value(e, a_v, b_v)?,
            }
        }
        Expr::Call(f, args) => {
            let a = eval(&args[0], x)?;
            match f {
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(domain(e, "logarithm of a non-positive number"));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(e, "square root of a negative number"));
                    }
                    a.sqrt()
                }
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Abs => a.abs(),
                Func::Min => a.min(eval(&args[1], x)?),
                Func::Max => a.max(eval(&args[1], x)?),
            }
        }
        Expr::Cutoff { scale } => cutoff::profile(norm(x) / scale),
        Expr::CutoffGrad { scale, axis } => cutoff::cutoff_partial(*scale, x, *axis),
        Expr::CutoffGradNorm { scale } => cutoff::cutoff_grad_norm(*scale, x),
        Expr::Divergence(parts) => {
            let mut total = 0.0;
            for (i, part) in parts.iter().enumerate() {
                total += dual(part, x, i)?.1;
            }
            total
        }
    })
}

/// Value and directional derivative along coordinate `dir`.
pub(crate) fn dual(e: &Expr, x: &[f64], dir: usize) -> Result<(f64, f64), EvalError> {
    Ok(match e {
        Expr::Num(v) => (*v, 0.0),
        Expr::Var(i) => (x[*i], if *i == dir { 1.0 } else { 0.0 }),
        Expr::Norm => {
            let r = norm(x);
            if r == 0.0 {
                return Err(kink(e));
            }
            (r, x[dir] / r)
        }
        Expr::Neg(a) => {
            let (v, d) = dual(a, x, dir)?;
            (-v, -d)
        }
        Expr::Binary(op, a, b) => {
            let (av, ad) = dual(a, x, dir)?;
            let (bv, bd) = dual(b, x, dir)?;
            match op {
                BinOp::Add => (av + bv, ad + bd),
                BinOp::Sub => (av - bv, ad - bd),
                BinOp::Mul => (av * bv, ad * bv + av * bd),
                BinOp::Div => {
                    if bv == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    (av / bv, (ad * bv - av * bd) / (bv * bv))
                }
                BinOp::Pow => {
                    let v = pow_value(e, av, bv)?;
                    if bd == 0.0 {
                        // constant exponent along this direction
                        if ad == 0.0 {
                            (v, 0.0)
                        } else if av == 0.0 && bv < 1.0 {
                            return Err(kink(e));
                        } else {
                            (v, bv * pow_value(e, av, bv - 1.0)? * ad)
                        }
                    } else {
                        if av <= 0.0 {
                            return Err(domain(e, "variable exponent needs a positive base"));
                        }
                        (v, v * (bd * av.ln() + bv * ad / av))
                    }
                }
            }
        }
        Expr::Call(f, args) => {
            let (a, ad) = dual(&args[0], x, dir)?;
            match f {
                Func::Exp => {
                    let v = a.exp();
                    (v, v * ad)
                }
                Func::Log => {
                    if a <= 0.0 {
                        return Err(domain(e, "logarithm of a non-positive number"));
                    }
                    (a.ln(), ad / a)
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(e, "square root of a negative number"));
                    }
                    if a == 0.0 {
                        return Err(kink(e));
                    }
                    let v = a.sqrt();
                    (v, ad / (2.0 * v))
                }
                Func::Sin => (a.sin(), a.cos() * ad),
                Func::Cos => (a.cos(), -a.sin() * ad),
                Func::Abs => {
                    if a == 0.0 {
                        return Err(kink(e));
                    }
                    (a.abs(), a.signum() * ad)
                }
                Func::Min | Func::Max => {
                    let (b, bd) = dual(&args[1], x, dir)?;
                    if a == b && ad != bd {
                        return Err(kink(e));
                    }
                    let pick_a = if *f == Func::Min { a <= b } else { a >= b };
                    if pick_a {
                        (a, ad)
                    } else {
                        (b, bd)
                    }
                }
            }
        }
        Expr::Cutoff { scale } => cutoff::cutoff_dual(*scale, x, dir),
        Expr::CutoffGrad { scale, axis } => cutoff::cutoff_partial_dual(*scale, x, *axis, dir),
        Expr::CutoffGradNorm { scale } => cutoff::cutoff_grad_norm_dual(*scale, x, dir),
        Expr::Divergence(_) => return Err(EvalError::SecondDerivative { expr: e.to_string() }),
    })
}
