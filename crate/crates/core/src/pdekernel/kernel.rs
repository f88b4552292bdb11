use std::io::{self, Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::assemble::DiscreteOperator;
use super::evolve::{step_counts, Orientation, Stepper};
use super::grid::BallGrid;
use super::PdeError;

const MAGIC: &[u8; 4] = b"HKMX";
const VERSION: u32 = 1;

/// Smallest time at which a delta-seeded column is trusted: `4 h^2 / lambda`.
pub fn default_t_min(h: f64, lambda: f64) -> f64 {
    4.0 * h * h / lambda
}

#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    pub dt: f64,
    pub t_min: f64,
}

impl KernelOptions {
    pub fn for_operator(op: &DiscreteOperator, dt: f64) -> KernelOptions {
        KernelOptions { dt, t_min: default_t_min(op.grid().h(), op.lambda()) }
    }
}

fn check_times(times: &[f64], opts: &KernelOptions) -> Result<Vec<usize>, PdeError> {
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(PdeError::Unordered);
        }
    }
    for &t in times {
        if t < opts.t_min * (1.0 - 1e-12) {
            return Err(PdeError::BelowMinimumTime { t, t_min: opts.t_min });
        }
    }
    step_counts(times, opts.dt)
}

/// Scaled delta `h^-N e_source`.
pub fn point_mass(grid: &BallGrid, source: usize) -> Vec<f64> {
    let mut v = vec![0.0; grid.len()];
    v[source] = 1.0 / grid.cell_volume();
    v
}

/// Evolves the scaled delta at `source` in the given orientation.
///
/// `Transposed` returns `p(x_source, ., t)` as a density in the second
/// argument; `Forward` returns `p(., x_source, t)`.
pub fn kernel_column(
    op: &DiscreteOperator,
    source: usize,
    times: &[f64],
    opts: &KernelOptions,
    orientation: Orientation,
) -> Result<Vec<Vec<f64>>, PdeError> {
    if source >= op.len() {
        return Err(PdeError::Source { index: source, nodes: op.len() });
    }
    let steps = check_times(times, opts)?;
    let stepper = Stepper::new(op, opts.dt, orientation);
    stepper.run(&point_mass(op.grid(), source), &steps)
}

/// `p(x_source, ., t_k)` for each time: the density of the second argument.
pub fn green_column(
    op: &DiscreteOperator,
    source: usize,
    times: &[f64],
    opts: &KernelOptions,
) -> Result<Vec<Vec<f64>>, PdeError> {
    kernel_column(op, source, times, opts, Orientation::Transposed)
}

/// Discrete kernel values for a set of sources, stored source-major, then
/// time, then node.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Arc<BallGrid>,
    times: Vec<f64>,
    sources: Vec<usize>,
    orientation: Orientation,
    values: Vec<f64>,
}

pub fn kernel_matrix(
    op: &DiscreteOperator,
    sources: &[usize],
    times: &[f64],
    opts: &KernelOptions,
    orientation: Orientation,
) -> Result<KernelMatrix, PdeError> {
    let steps = check_times(times, opts)?;
    for &s in sources {
        if s >= op.len() {
            return Err(PdeError::Source { index: s, nodes: op.len() });
        }
    }
    let stepper = Stepper::new(op, opts.dt, orientation);
    let columns: Vec<Vec<Vec<f64>>> = sources
        .par_iter()
        .map(|&s| stepper.run(&point_mass(op.grid(), s), &steps))
        .collect::<Result<_, _>>()?;
    let mut values = Vec::with_capacity(sources.len() * times.len() * op.len());
    for col in columns {
        for v in col {
            values.extend_from_slice(&v);
        }
    }
    Ok(KernelMatrix {
        grid: op.grid().clone(),
        times: times.to_vec(),
        sources: sources.to_vec(),
        orientation,
        values,
    })
}

impl KernelMatrix {
    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node values for the `s`-th source at the `k`-th time.
    pub fn slice(&self, s: usize, k: usize) -> &[f64] {
        let n = self.grid.len();
        let start = (s * self.times.len() + k) * n;
        &self.values[start..start + n]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// `h^N sum_nodes`.
    pub fn mass(&self, s: usize, k: usize) -> f64 {
        self.grid.cell_volume() * self.slice(s, k).iter().sum::<f64>()
    }

    /// `h^N sum_nodes p^2`.
    pub fn l2_squared(&self, s: usize, k: usize) -> f64 {
        self.grid.cell_volume() * self.slice(s, k).iter().map(|v| v * v).sum::<f64>()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&self.grid.radius().to_le_bytes())?;
        w.write_all(&self.grid.h().to_le_bytes())?;
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        w.write_all(&[match self.orientation {
            Orientation::Forward => 0u8,
            Orientation::Transposed => 1u8,
        }])?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        w.write_all(&(self.sources.len() as u64).to_le_bytes())?;
        for s in &self.sources {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<KernelMatrix, PdeError> {
        fn bytes<const K: usize, R: Read>(r: &mut R) -> io::Result<[u8; K]> {
            let mut b = [0u8; K];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        let bad = |m: &str| PdeError::Format(m.to_string());
        if &bytes::<4, _>(&mut r)? != MAGIC {
            return Err(bad("missing HKMX magic"));
        }
        if u32::from_le_bytes(bytes(&mut r)?) != VERSION {
            return Err(bad("unsupported version"));
        }
        let dim = u32::from_le_bytes(bytes(&mut r)?) as usize;
        let radius = f64::from_le_bytes(bytes(&mut r)?);
        let h = f64::from_le_bytes(bytes(&mut r)?);
        let nodes = u64::from_le_bytes(bytes(&mut r)?) as usize;
        let orientation = match bytes::<1, _>(&mut r)?[0] {
            0 => Orientation::Forward,
            1 => Orientation::Transposed,
            _ => return Err(bad("unknown orientation")),
        };
        let grid = Arc::new(BallGrid::new(dim, radius, h)?);
        if grid.len() != nodes {
            return Err(bad("node count does not match the grid"));
        }
        let nt = u64::from_le_bytes(bytes(&mut r)?) as usize;
        let times = (0..nt).map(|_| Ok(f64::from_le_bytes(bytes(&mut r)?))).collect::<io::Result<Vec<_>>>()?;
        let ns = u64::from_le_bytes(bytes(&mut r)?) as usize;
        let sources =
            (0..ns).map(|_| Ok(u64::from_le_bytes(bytes(&mut r)?) as usize)).collect::<io::Result<Vec<_>>>()?;
        if sources.iter().any(|&s| s >= nodes) {
            return Err(bad("source index out of range"));
        }
        let values = (0..ns * nt * nodes)
            .map(|_| Ok(f64::from_le_bytes(bytes(&mut r)?)))
            .collect::<io::Result<Vec<_>>>()?;
        Ok(KernelMatrix { grid, times, sources, orientation, values })
    }

    /// CSV slices `x1..xN, y1..yN, t, p`: `x` is the first kernel argument.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.grid.dim();
        let header: Vec<String> = (1..=dim)
            .map(|i| format!("x{i}"))
            .chain((1..=dim).map(|i| format!("y{i}")))
            .chain(["t".to_string(), "p".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (s, &src) in self.sources.iter().enumerate() {
            let sp = self.grid.point(src);
            for (k, &t) in self.times.iter().enumerate() {
                for (node, &p) in self.slice(s, k).iter().enumerate() {
                    let np = self.grid.point(node);
                    let (x, y) = match self.orientation {
                        Orientation::Transposed => (&sp, &np),
                        Orientation::Forward => (&np, &sp),
                    };
                    let coords: Vec<String> = x.iter().chain(y.iter()).map(|v| v.to_string()).collect();
                    writeln!(w, "{},{},{:e}", coords.join(","), t, p)?;
                }
            }
        }
        Ok(())
    }
}

/// Result of evolving node samples of a bounded function.
#[derive(Debug, Clone)]
pub struct CauchySolution {
    pub values: Vec<f64>,
    /// `max |u|`.
    pub sup: f64,
    /// `e^(-H0 t) max |f|`.
    pub bound: f64,
}

impl CauchySolution {
    pub fn within_bound(&self, tolerance: f64) -> bool {
        self.sup <= self.bound + tolerance
    }
}

/// `u(t)` for initial data `f` sampled at the nodes.
pub fn solve_cauchy<F>(op: &DiscreteOperator, f: F, t: f64, steps: usize) -> Result<CauchySolution, PdeError>
where
    F: Fn(&[f64]) -> f64,
{
    let grid = op.grid();
    let v0: Vec<f64> = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
    let sup_f = v0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let values = super::evolve::evolve(op, &v0, t, steps)?;
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CauchySolution { values, sup, bound: (-op.h0() * t).exp() * sup_f })
}
