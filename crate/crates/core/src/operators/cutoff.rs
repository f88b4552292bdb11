//! Radial cutoff profile `eta`: equal to one on `[0, 1]`, zero on `[3, inf)`,
//! with a quintic smoothstep transition in between. The profile is C^2 and
//! `|eta'| <= 15/16`, so the scaled family `eta_n(y) = eta(|y| / n)` has
//! gradient magnitude at most `15 / (16 n) < 1 / n`.

pub const INNER_RADIUS: f64 = 1.0;
pub const OUTER_RADIUS: f64 = 3.0;
/// Sup of `|eta'|` over the transition.
pub const MAX_SLOPE: f64 = 15.0 / 16.0;

const WIDTH: f64 = OUTER_RADIUS - INNER_RADIUS;

/// `s(u) = 6u^5 - 15u^4 + 10u^3`.
pub fn smoothstep(u: f64) -> f64 {
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

/// `s'(u) = 30 u^2 (1 - u)^2`.
pub fn smoothstep_d(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

/// `s''(u) = 60 u (1 - u)(1 - 2u)`.
pub fn smoothstep_dd(u: f64) -> f64 {
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// Profile value at radius `r >= 0`.
pub fn profile(r: f64) -> f64 {
    if r <= INNER_RADIUS {
        1.0
    } else if r >= OUTER_RADIUS {
        0.0
    } else {
        1.0 - smoothstep((r - INNER_RADIUS) / WIDTH)
    }
}

/// First derivative in `r`. Non-positive.
pub fn profile_d(r: f64) -> f64 {
    if r <= INNER_RADIUS || r >= OUTER_RADIUS {
        0.0
    } else {
        -smoothstep_d((r - INNER_RADIUS) / WIDTH) / WIDTH
    }
}

/// Second derivative in `r`.
pub fn profile_dd(r: f64) -> f64 {
    if r <= INNER_RADIUS || r >= OUTER_RADIUS {
        0.0
    } else {
        -smoothstep_dd((r - INNER_RADIUS) / WIDTH) / (WIDTH * WIDTH)
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `eta_n(y)` and its gradient. Total: the gradient vanishes wherever the
/// profile is flat, including the origin.
pub fn cutoff_eta(n: f64, y: &[f64]) -> (f64, Vec<f64>) {
    let r = norm(y);
    let value = profile(r / n);
    let slope = profile_d(r / n) / n;
    let grad = if slope == 0.0 {
        vec![0.0; y.len()]
    } else {
        y.iter().map(|yi| slope * yi / r).collect()
    };
    (value, grad)
}

/// Partial derivative `d eta_n / d y_axis`.
pub fn cutoff_partial(n: f64, y: &[f64], axis: usize) -> f64 {
    let r = norm(y);
    let slope = profile_d(r / n) / n;
    if slope == 0.0 {
        0.0
    } else {
        slope * y[axis] / r
    }
}

/// `|D eta_n(y)|`.
pub fn cutoff_grad_norm(n: f64, y: &[f64]) -> f64 {
    let r = norm(y);
    -profile_d(r / n) / n
}

/// Directional derivative of `eta_n` along coordinate `dir`.
pub(crate) fn cutoff_dual(n: f64, y: &[f64], dir: usize) -> (f64, f64) {
    (profile(norm(y) / n), cutoff_partial(n, y, dir))
}

/// `(d_axis eta_n, d_dir d_axis eta_n)`.
pub(crate) fn cutoff_partial_dual(n: f64, y: &[f64], axis: usize, dir: usize) -> (f64, f64) {
    let r = norm(y);
    let d1 = profile_d(r / n) / n;
    if d1 == 0.0 && profile_dd(r / n) == 0.0 {
        return (0.0, 0.0);
    }
    let d2 = profile_dd(r / n) / (n * n);
    let (ya, yd) = (y[axis], y[dir]);
    let delta = if axis == dir { 1.0 } else { 0.0 };
    let value = d1 * ya / r;
    let deriv = d2 * ya * yd / (r * r) + d1 * (delta / r - ya * yd / (r * r * r));
    (value, deriv)
}

/// `(|D eta_n|, d_dir |D eta_n|)`.
pub(crate) fn cutoff_grad_norm_dual(n: f64, y: &[f64], dir: usize) -> (f64, f64) {
    let r = norm(y);
    let d1 = profile_d(r / n) / n;
    let d2 = profile_dd(r / n) / (n * n);
    if d1 == 0.0 && d2 == 0.0 {
        return (0.0, 0.0);
    }
    (-d1, -d2 * y[dir] / r)
}
