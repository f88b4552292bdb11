//! Deterministic quasi-random point sets.

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut scale = inv;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    inv = result;
    inv
}

/// Halton points in the open ball `B(0, radius)` of `R^dim`, by rejection
/// from the enclosing cube. The origin is always the first point.
pub fn halton_ball(count: usize, dim: usize, radius: f64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "dimension {dim} not supported by the Halton sampler");
    let mut points = Vec::with_capacity(count);
    if count == 0 {
        return points;
    }
    points.push(vec![0.0; dim]);
    let mut index = 1u64;
    while points.len() < count {
        let p: Vec<f64> = (0..dim)
            .map(|k| radius * (2.0 * radical_inverse(index, PRIMES[k]) - 1.0))
            .collect();
        index += 1;
        if p.iter().map(|v| v * v).sum::<f64>() < radius * radius {
            points.push(p);
        }
    }
    points
}
