#![allow(dead_code)]

use std::path::PathBuf;

use heatkernel::coeffparse::CoefficientField;

/// Expressions in three variables that are smooth on the evaluation box.
pub const CORPUS: &[&str] = &[
    "1",
    "x1",
    "x1 + 2*x2 - x3/4",
    "x1*x2*x3",
    "x1^2 + x2^2 + x3^2",
    "x1^3 - 3*x1*x2^2",
    "-x1*(x1^2+x2^2+x3^2)",
    "(N+2)*(x1^2+x2^2+x3^2)",
    "exp(-x1^2 - x2^2)",
    "exp(x1) * sin(x2) + cos(x3)",
    "log(1 + x1^2 + x2^2)",
    "sqrt(1 + x1^2 + x2^2 + x3^2)",
    "sin(pi*x1) * cos(pi*x2/2)",
    "1 / (1 + x1^2)",
    "(x1 - x2) / (2 + x3^2)",
    "x1^2.5",
    "(1 + x2^2)^(-0.5)",
    "2^x1",
    "x1^x2",
    "abs(x1) + abs(x2 - 3)",
    "min(x1, x2) + max(x2, x3)",
    "norm(x)",
    "norm(x)^3 - N*norm(x)",
    "exp(-norm(x)^2 / 4) / (4*pi)^1.5",
    "2 + sin(x2)",
    "0.5*cos(x1)",
    "1 + 0.25*sin(x1*x2)",
    "-x1^2 + 5",
    "cutoff(2.0) * x1",
    "cutoff_grad(2.0, 2)",
    "cutoff_gradnorm(1.5) * (x1^2 + 1)",
];

/// Evaluation points chosen away from kinks of `abs`, `min`, `max`, `norm`,
/// and with `x1 > 0` so that fractional powers are defined.
pub const POINTS: &[[f64; 3]] = &[
    [0.7, -0.4, 1.3],
    [1.9, 0.55, -0.8],
    [0.35, 1.2, 2.1],
    [2.6, -1.7, 0.45],
    [1.1, 2.3, -2.9],
];

pub fn field(text: &str) -> CoefficientField {
    CoefficientField::parse(text, 3).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Largest relative error between the dual-number gradient and a central
/// difference, relative to `max(|g|, 1)`.
pub fn gradient_error(f: &CoefficientField, x: &[f64]) -> f64 {
    let g = f.grad(x).unwrap_or_else(|e| panic!("{f} at {x:?}: {e}"));
    let mut worst = 0.0f64;
    for axis in 0..x.len() {
        let step = 1e-5 * x[axis].abs().max(1.0);
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[axis] += step;
        down[axis] -= step;
        let fd = (f.eval(&up).unwrap() - f.eval(&down).unwrap()) / (2.0 * step);
        worst = worst.max((g[axis] - fd).abs() / g[axis].abs().max(1.0));
    }
    worst
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.cfg"))
}
