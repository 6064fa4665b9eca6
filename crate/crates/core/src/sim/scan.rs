use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, SimConfig};
use super::{classify_stability, SimVerdict};
use crate::channel::{CodeSpec, PcModel};
use crate::error::{domain, Error, Result};
use crate::stability::TrafficProfile;
use crate::throughput::{LinkSet, Protocol};

/// Inputs of an empirical boundary search over the total arrival rate, split
/// evenly between the sources with equal TDMA shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub protocol: Protocol,
    pub code: CodeSpec,
    pub links: LinkSet,
    pub model: PcModel,
    /// Strictly increasing total arrival rates.
    pub lambda_grid: Vec<f64>,
    pub slots: u64,
    /// The same seeds are reused at every grid point.
    pub seeds: Vec<u64>,
    pub max_bisections: usize,
    /// Bisection stops once the half-width falls below this fraction of the
    /// midpoint.
    pub rel_tol: f64,
}

impl ScanSpec {
    pub fn new(
        protocol: Protocol,
        code: CodeSpec,
        links: LinkSet,
        model: PcModel,
        lambda_grid: Vec<f64>,
        slots: u64,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            protocol,
            code,
            links,
            model,
            lambda_grid,
            slots,
            seeds,
            max_bisections: 6,
            rel_tol: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda_total: f64,
    pub verdict: SimVerdict,
    /// Per-seed verdicts in seed order.
    pub votes: Vec<SimVerdict>,
    pub mean_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub midpoint: f64,
    pub half_width: f64,
    pub grid: Vec<GridPoint>,
    pub bisection: Vec<GridPoint>,
}

/// The verdict held by more than half of the votes, else indeterminate.
pub fn majority(votes: &[SimVerdict]) -> SimVerdict {
    for v in [SimVerdict::Stable, SimVerdict::Unstable] {
        if 2 * votes.iter().filter(|&&x| x == v).count() > votes.len() {
            return v;
        }
    }
    SimVerdict::Indeterminate
}

fn evaluate(spec: &ScanSpec, engine: &Engine, lambda_total: f64) -> Result<GridPoint> {
    let traffic = TrafficProfile::symmetric(lambda_total)?;
    let reports: Vec<_> = spec
        .seeds
        .par_iter()
        .map(|&seed| engine.run(&traffic, spec.slots, 0.1, seed))
        .collect();
    let votes: Vec<_> = reports.iter().map(|r| classify_stability(r, lambda_total)).collect();
    Ok(GridPoint {
        lambda_total,
        verdict: majority(&votes),
        mean_drift: reports.iter().map(|r| r.drift_slope).sum::<f64>() / reports.len() as f64,
        votes,
    })
}

/// Brackets the empirical stability boundary on the grid, then bisects.
///
/// The bracket runs from the largest stable point below the first unstable
/// point up to that unstable point. Bisection halts early at an
/// indeterminate midpoint.
pub fn boundary_scan(spec: &ScanSpec) -> Result<BoundaryEstimate> {
    if spec.lambda_grid.is_empty() || spec.seeds.is_empty() {
        return Err(domain("boundary scan needs a non-empty grid and at least one seed"));
    }
    if spec.lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("lambda grid must be strictly increasing"));
    }
    // validates slots, warmup and protocol/batch consistency
    let first = TrafficProfile::symmetric(spec.lambda_grid[0])?;
    let cfg = SimConfig::new(spec.protocol, first, spec.code, spec.links, spec.model, spec.slots, 0)?;
    let engine = Engine::from_config(&cfg);

    let grid = spec
        .lambda_grid
        .iter()
        .map(|&l| evaluate(spec, &engine, l))
        .collect::<Result<Vec<_>>>()?;

    if grid.iter().all(|g| g.verdict == SimVerdict::Indeterminate) {
        return Err(Error::WidenGrid("every grid point is indeterminate".into()));
    }
    let upper = grid
        .iter()
        .position(|g| g.verdict == SimVerdict::Unstable)
        .ok_or_else(|| Error::WidenGrid("no unstable grid point".into()))?;
    let lower = grid[..upper]
        .iter()
        .rposition(|g| g.verdict == SimVerdict::Stable)
        .ok_or_else(|| Error::WidenGrid("no stable grid point below the first unstable one".into()))?;

    let mut lo = grid[lower].lambda_total;
    let mut hi = grid[upper].lambda_total;
    let mut bisection = Vec::new();
    for _ in 0..spec.max_bisections {
        let mid = 0.5 * (lo + hi);
        if 0.5 * (hi - lo) <= spec.rel_tol * mid {
            break;
        }
        let point = evaluate(spec, &engine, mid)?;
        let verdict = point.verdict;
        bisection.push(point);
        match verdict {
            SimVerdict::Stable => lo = mid,
            SimVerdict::Unstable => hi = mid,
            SimVerdict::Indeterminate => break,
        }
    }
    Ok(BoundaryEstimate {
        midpoint: 0.5 * (lo + hi),
        half_width: 0.5 * (hi - lo),
        grid,
        bisection,
    })
}
