use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::assemble::DiscreteOperator;
use super::grid::BallGrid;
use super::kernel::{green_column, KernelOptions};
use super::PdeError;
use crate::operators::OperatorSpec;

/// Increments between consecutive balls, evaluated on the smaller grid.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonePair {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Per time: min over shared nodes of `p_outer - p_inner`.
    pub min_increment: Vec<f64>,
    /// Per time: max over shared nodes of `|p_outer - p_inner|`.
    pub sup_increment: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MonotoneFamily {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    pub grids: Vec<Arc<BallGrid>>,
    /// `columns[r][k]`: density of the second argument on grid `r` at time `k`.
    pub columns: Vec<Vec<Vec<f64>>>,
    pub pairs: Vec<MonotonePair>,
}

/// Green columns of the same source on nested balls sharing the spacing `h`.
pub fn monotone_family(
    spec: &OperatorSpec,
    h: f64,
    radii: &[f64],
    source: &[f64],
    times: &[f64],
    dt: f64,
) -> Result<MonotoneFamily, PdeError> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(PdeError::Radii(radii.to_vec()));
    }
    let grids: Vec<Arc<BallGrid>> = radii
        .iter()
        .map(|&r| BallGrid::new(spec.dim(), r, h).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let columns: Vec<Vec<Vec<f64>>> = grids
        .par_iter()
        .map(|g| {
            let op = DiscreteOperator::assemble(spec, g.clone())?;
            let src = g.locate(source).ok_or_else(|| PdeError::SourceOutside(source.to_vec()))?;
            let opts = KernelOptions::for_operator(&op, dt);
            green_column(&op, src, times, &opts)
        })
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    for r in 1..grids.len() {
        let map = grids[r - 1].embed_into(&grids[r]).ok_or(PdeError::Alignment)?;
        let mut min_increment = Vec::new();
        let mut sup_increment = Vec::new();
        for k in 0..times.len() {
            let (inner, outer) = (&columns[r - 1][k], &columns[r][k]);
            let mut lo = f64::INFINITY;
            let mut sup = 0.0f64;
            for (i, &j) in map.iter().enumerate() {
                let d = outer[j] - inner[i];
                lo = lo.min(d);
                sup = sup.max(d.abs());
            }
            min_increment.push(lo);
            sup_increment.push(sup);
        }
        pairs.push(MonotonePair { inner_radius: radii[r - 1], outer_radius: radii[r], min_increment, sup_increment });
    }
    Ok(MonotoneFamily { radii: radii.to_vec(), times: times.to_vec(), grids, columns, pairs })
}
