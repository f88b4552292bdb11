use thiserror::Error;

/// Neighbor index for lattice points outside the ball (zero Dirichlet data).
pub const DIRICHLET: usize = usize::MAX;

/// Default cap on the dense lookup table, in bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("radius/spacing = {ratio} is below 4; refine h or enlarge the ball")]
    Degenerate { ratio: f64 },
    #[error("invalid grid parameters: radius {radius}, spacing {h}")]
    Parameters { radius: f64, h: f64 },
    #[error("grid needs about {needed} bytes, budget is {budget}")]
    Budget { needed: usize, budget: usize },
}

/// Lattice `hZ^N` anchored at the origin, restricted to the open ball `|x| < radius`.
///
/// Nodes are stored in lexicographic order of their integer coordinates.
#[derive(Debug, Clone)]
pub struct BallGrid {
    dim: usize,
    radius: f64,
    h: f64,
    extent: i64,
    coords: Vec<i32>,
    lookup: Vec<u32>,
}

fn squared_norm(k: &[i32], h: f64) -> f64 {
    k.iter().map(|&c| {
        let x = f64::from(c) * h;
        x * x
    }).sum()
}

impl BallGrid {
    pub fn new(dim: usize, radius: f64, h: f64) -> Result<BallGrid, GridError> {
        BallGrid::with_budget(dim, radius, h, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(dim: usize, radius: f64, h: f64, budget: usize) -> Result<BallGrid, GridError> {
        if !(radius > 0.0 && h > 0.0 && radius.is_finite() && h.is_finite()) || dim == 0 {
            return Err(GridError::Parameters { radius, h });
        }
        let ratio = radius / h;
        if ratio < 4.0 {
            return Err(GridError::Degenerate { ratio });
        }
        let extent = ratio.ceil() as i64;
        let side = (2 * extent + 1) as usize;
        let cells = (side as f64).powi(dim as i32);
        let needed = (cells * (4.0 + 4.0 * dim as f64)) as usize;
        if cells > usize::MAX as f64 / 16.0 || needed > budget {
            return Err(GridError::Budget { needed, budget });
        }
        let cells = cells as usize;
        let mut lookup = vec![u32::MAX; cells];
        let mut coords = Vec::new();
        let mut k = vec![-extent as i32; dim];
        let r2 = radius * radius;
        let mut count = 0u32;
        for cell in lookup.iter_mut() {
            if squared_norm(&k, h) < r2 {
                *cell = count;
                coords.extend_from_slice(&k);
                count += 1;
            }
            // odometer, last axis fastest
            for axis in (0..dim).rev() {
                k[axis] += 1;
                if i64::from(k[axis]) <= extent {
                    break;
                }
                k[axis] = -extent as i32;
            }
        }
        Ok(BallGrid { dim, radius, h, extent, coords, lookup })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn lattice(&self, node: usize) -> &[i32] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.lattice(node).iter().map(|&c| f64::from(c) * self.h).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn squared_norm(&self, node: usize) -> f64 {
        squared_norm(self.lattice(node), self.h)
    }

    /// Node index of an integer lattice point, if it lies in the ball.
    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        let side = 2 * self.extent + 1;
        let mut flat = 0i64;
        for &c in k {
            let c = i64::from(c);
            if c.abs() > self.extent {
                return None;
            }
            flat = flat * side + c + self.extent;
        }
        match self.lookup[flat as usize] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// Node nearest to `x` if that lattice point lies in the ball.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let k: Vec<i32> = x.iter().map(|v| (v / self.h).round() as i32).collect();
        self.index_of(&k)
    }

    /// Neighbor of `node` shifted by `offset` lattice steps, or [`DIRICHLET`].
    pub fn shifted(&self, node: usize, offset: &[i32]) -> usize {
        let k: Vec<i32> = self.lattice(node).iter().zip(offset).map(|(a, b)| a + b).collect();
        self.index_of(&k).unwrap_or(DIRICHLET)
    }

    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> usize {
        let mut offset = vec![0; self.dim];
        offset[axis] = if forward { 1 } else { -1 };
        self.shifted(node, &offset)
    }

    /// True when every axis neighbor is a grid node.
    pub fn is_interior(&self, node: usize) -> bool {
        (0..self.dim).all(|a| self.neighbor(node, a, true) != DIRICHLET && self.neighbor(node, a, false) != DIRICHLET)
    }

    /// Index map from this grid's nodes into a grid with the same spacing and
    /// at least the same radius.
    pub fn embed_into(&self, larger: &BallGrid) -> Option<Vec<usize>> {
        if larger.dim != self.dim || larger.h != self.h {
            return None;
        }
        (0..self.len()).map(|i| larger.index_of(self.lattice(i))).collect()
    }

    /// Grid nodes that lie in the ball of radius `r` around the origin.
    pub fn nodes_within(&self, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.squared_norm(i) < r * r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_count() {
        let g = BallGrid::new(3, 1.0, 0.25).unwrap();
        let mut brute = 0;
        for i in -4i32..=4 {
            for j in -4i32..=4 {
                for k in -4i32..=4 {
                    if i * i + j * j + k * k < 16 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 251);
        assert_eq!(g.len(), 251);
    }

    #[test]
    fn nesting() {
        let small = BallGrid::new(3, 1.0, 0.25).unwrap();
        let big = BallGrid::new(3, 2.0, 0.25).unwrap();
        let map = small.embed_into(&big).unwrap();
        for (i, &j) in map.iter().enumerate() {
            assert_eq!(small.lattice(i), big.lattice(j));
        }
    }

    #[test]
    fn lexicographic_order_and_lookup() {
        let g = BallGrid::new(3, 1.5, 0.25).unwrap();
        for i in 1..g.len() {
            assert!(g.lattice(i - 1) < g.lattice(i));
        }
        for i in 0..g.len() {
            assert_eq!(g.index_of(g.lattice(i)), Some(i));
            assert!(g.squared_norm(i) < 1.5 * 1.5);
        }
        let origin = g.index_of(&[0, 0, 0]).unwrap();
        assert!(g.is_interior(origin));
        assert_eq!(g.neighbor(origin, 0, true), g.index_of(&[1, 0, 0]).unwrap());
        assert_eq!(g.shifted(origin, &[6, 0, 0]), DIRICHLET);
    }

    #[test]
    fn degenerate_and_budget() {
        assert!(matches!(BallGrid::new(3, 0.5, 0.25), Err(GridError::Degenerate { .. })));
        assert!(matches!(BallGrid::with_budget(3, 4.0, 0.25, 1000), Err(GridError::Budget { .. })));
        assert!(BallGrid::new(3, 1.0, 0.0).is_err());
    }
}
