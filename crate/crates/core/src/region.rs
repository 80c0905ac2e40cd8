//! Ground-truth rate regions for small instances: enumeration of binary
//! schedules, convex-hull and domination membership, Pareto boundaries,
//! power-control sampling and the floor-based time-sharing construction.

use std::collections::HashSet;
use std::io::Write;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::perturbed::{random_binary_allocation, MAX_ENUMERATION_BITS};
use crate::sinr::{link_rates, NetworkConfig, PowerAllocation, RateVector, RATE_TOL};

/// Per-coordinate tolerance used to merge enumerated rate vectors.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Single-slot on/off schedules.
    S1,
    /// Multi-slot on/off schedules.
    Sm,
    /// Grid sample of single-slot continuous power control.
    PcSample,
    /// Rates of sampled repulsive allocations.
    RepulsiveSample,
    /// Subset kept by a Pareto filter.
    Pareto,
    /// Evenly spaced points on the Pareto boundary of a convex hull.
    HullBoundary,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::S1 => "S1",
            Provenance::Sm => "SM",
            Provenance::PcSample => "PC_sample",
            Provenance::RepulsiveSample => "repulsive_sample",
            Provenance::Pareto => "pareto",
            Provenance::HullBoundary => "hull_boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub points: Vec<RateVector>,
    pub provenance: Provenance,
}

impl RegionSample {
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|p| p.len())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with one row per point: `r_0, ..., r_{N-1}, provenance`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.dim().unwrap_or(0);
        let mut header: Vec<String> = (0..dim).map(|i| format!("r_{i}")).collect();
        header.push("provenance".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec: Vec<String> = p.iter().map(f64::to_string).collect();
            rec.push(self.provenance.as_str().into());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn dedup(points: Vec<RateVector>) -> Vec<RateVector> {
    let mut seen = HashSet::new();
    points
        .into_iter()
        .filter(|p| {
            let key: Vec<i64> = p.iter().map(|v| (v / DEDUP_TOL).round() as i64).collect();
            seen.insert(key)
        })
        .collect()
}

/// Rates of all `2^N` single-slot on/off configurations, indexed by mask.
pub fn enumerate_s1(net: &NetworkConfig) -> Result<RegionSample> {
    net.validate()?;
    if net.n_links > MAX_ENUMERATION_BITS {
        return Err(Error::Unsupported(format!("2^{} schedules is too many", net.n_links)));
    }
    let points = Execution::default().map(1 << net.n_links, |mask| {
        link_rates(&PowerAllocation::from_mask(mask as u64, net.n_links, 1, net.p_max), net)
    });
    Ok(RegionSample {
        points,
        provenance: Provenance::S1,
    })
}

/// Distinct rates of all `2^(N M)` binary allocations.
pub fn enumerate_sm(net: &NetworkConfig, frame_size: usize) -> Result<RegionSample> {
    enumerate_sm_with(net, frame_size, Execution::default())
}

pub fn enumerate_sm_with(net: &NetworkConfig, frame_size: usize, exec: Execution) -> Result<RegionSample> {
    net.validate()?;
    let bits = net.n_links * frame_size;
    if frame_size == 0 || bits > MAX_ENUMERATION_BITS {
        return Err(Error::Unsupported(format!(
            "enumerating 2^{bits} allocations exceeds 2^{MAX_ENUMERATION_BITS}"
        )));
    }
    let points = exec.map(1 << bits, |mask| {
        link_rates(&PowerAllocation::from_mask(mask as u64, net.n_links, frame_size, net.p_max), net)
    });
    Ok(RegionSample {
        points: dedup(points),
        provenance: Provenance::Sm,
    })
}

fn check_dims(r: &[f64], sample: &RegionSample) -> Result<usize> {
    let dim = sample
        .dim()
        .ok_or_else(|| Error::InvalidParameter("empty region sample".into()))?;
    if r.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.len(),
        });
    }
    Ok(dim)
}

/// Mixing weights writing `r` as a convex combination of the sample points
/// (each coordinate matched to within [`RATE_TOL`]), or `None` when `r`
/// lies outside their hull.
pub fn conv_hull_weights(r: &[f64], sample: &RegionSample) -> Result<Option<Vec<f64>>> {
    let dim = check_dims(r, sample)?;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = sample.points.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for i in 0..dim {
        let row: Vec<_> = vars.iter().zip(&sample.points).map(|(&v, p)| (v, p[i])).collect();
        lp.add_constraint(row.clone(), ComparisonOp::Le, r[i] + RATE_TOL);
        lp.add_constraint(row, ComparisonOp::Ge, r[i] - RATE_TOL);
    }
    match lp.solve() {
        Ok(sol) => Ok(Some(vars.iter().map(|&v| sol[v].max(0.0)).collect())),
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Domain(format!("hull LP failed: {e}"))),
    }
}

pub fn in_conv_hull(r: &[f64], sample: &RegionSample) -> Result<bool> {
    Ok(conv_hull_weights(r, sample)?.is_some())
}

/// Whether some sample point dominates `r` coordinate-wise.
pub fn in_coord_convex(r: &[f64], sample: &RegionSample) -> bool {
    sample.points.iter().any(|p| p.dominates(r))
}

/// Smallest `d >= 0` such that `r - d 1` is dominated by a sample point.
pub fn domination_shortfall(r: &[f64], sample: &RegionSample) -> f64 {
    sample
        .points
        .iter()
        .map(|p| {
            p.iter()
                .zip(r)
                .map(|(&have, &want)| (want - have).max(0.0))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

fn strictly_dominates(y: &[f64], x: &[f64]) -> bool {
    y.iter().zip(x).all(|(&a, &b)| a >= b - RATE_TOL) && y.iter().zip(x).any(|(&a, &b)| a > b + RATE_TOL)
}

/// Points not strictly dominated by any other point.
pub fn pareto_boundary(sample: &RegionSample) -> RegionSample {
    pareto_boundary_with(sample, Execution::default())
}

pub fn pareto_boundary_with(sample: &RegionSample, exec: Execution) -> RegionSample {
    let pts = dedup(sample.points.clone());
    let keep = exec.map(pts.len(), |k| !pts.iter().any(|y| strictly_dominates(y, &pts[k])));
    RegionSample {
        points: pts.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect(),
        provenance: Provenance::Pareto,
    }
}

/// Single-slot rates on a `grid x grid` lattice of `(p_1, p_2)` in
/// `[0, P_max]^2`, corners included.
pub fn sample_pc_region(net: &NetworkConfig, grid: usize) -> Result<RegionSample> {
    net.validate()?;
    if net.n_links != 2 {
        return Err(Error::Unsupported(format!(
            "power-control sampling is for 2 links, got {}",
            net.n_links
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter("grid must be at least 2".into()));
    }
    let level = |k: usize| net.p_max * k as f64 / (grid - 1) as f64;
    let points = (0..grid * grid)
        .map(|idx| {
            let p = PowerAllocation::from_rows(vec![vec![level(idx / grid)], vec![level(idx % grid)]])
                .expect("two single-slot rows");
            link_rates(&p, net)
        })
        .collect();
    Ok(RegionSample {
        points,
        provenance: Provenance::PcSample,
    })
}

/// Frame that plays power profile `j` on `floor(M w_j)` slots (in profile
/// order) and stays silent on the leftover slots.
pub fn compose_frame_from_mixture(
    profiles: &[Vec<f64>],
    weights: &[f64],
    frame_size: usize,
) -> Result<PowerAllocation> {
    if profiles.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: profiles.len(),
            got: weights.len(),
        });
    }
    let n = profiles
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidParameter("no power profiles".into()))?;
    if let Some(bad) = profiles.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    if profiles.len() > n + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} profiles exceed the N + 1 = {} needed for any mixture",
            profiles.len(),
            n + 1
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("weights must be a probability vector".into()));
    }
    if frame_size == 0 {
        return Err(Error::InvalidParameter("frame size must be positive".into()));
    }
    let mut p = PowerAllocation::zeros(n, frame_size);
    let mut slot = 0;
    for (profile, &w) in profiles.iter().zip(weights) {
        let count = (frame_size as f64 * w + 1e-12).floor() as usize;
        for _ in 0..count.min(frame_size - slot) {
            for (i, &pw) in profile.iter().enumerate() {
                p.set(i, slot, pw);
            }
            slot += 1;
        }
    }
    Ok(p)
}

/// Pareto boundary of the convex hull of a planar point set, as the chain of
/// hull vertices from the top-left extreme to the bottom-right extreme.
pub fn hull_pareto_chain_2d(sample: &RegionSample) -> Result<Vec<[f64; 2]>> {
    if sample.dim() != Some(2) {
        return Err(Error::Unsupported("hull chains are planar".into()));
    }
    let mut pts: Vec<[f64; 2]> = sample.points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    // upper hull, left to right
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) >= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    let top = upper
        .iter()
        .enumerate()
        .max_by(|a, b| a.1[1].total_cmp(&b.1[1]).then(a.1[0].total_cmp(&b.1[0])))
        .map(|(k, _)| k)
        .unwrap_or(0);
    Ok(upper[top..].to_vec())
}

/// `count` points evenly spaced by arc length along a polyline.
pub fn points_along(chain: &[[f64; 2]], count: usize) -> Vec<[f64; 2]> {
    if chain.len() < 2 || count < 2 {
        return chain.iter().take(count.max(1)).copied().collect();
    }
    let seg = |a: [f64; 2], b: [f64; 2]| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let total: f64 = chain.windows(2).map(|w| seg(w[0], w[1])).sum();
    (0..count)
        .map(|k| {
            let mut s = total * k as f64 / (count - 1) as f64;
            for w in chain.windows(2) {
                let l = seg(w[0], w[1]);
                if s <= l || std::ptr::eq(w, chain.windows(2).last().unwrap()) {
                    let f = if l > 0.0 { (s / l).min(1.0) } else { 0.0 };
                    return [w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])];
                }
                s -= l;
            }
            *chain.last().unwrap()
        })
        .collect()
}

/// `count` evenly spaced points on the Pareto boundary of `conv(s1)`.
pub fn hull_boundary_sample(s1: &RegionSample, count: usize) -> Result<RegionSample> {
    let chain = hull_pareto_chain_2d(s1)?;
    Ok(RegionSample {
        points: points_along(&chain, count).into_iter().map(|p| RateVector(p.to_vec())).collect(),
        provenance: Provenance::HullBoundary,
    })
}

/// Worst domination shortfall of `inner` over `count` points spread along
/// the Pareto boundary of `conv(s1)`.
pub fn hull_boundary_shortfall(s1: &RegionSample, inner: &RegionSample, count: usize) -> Result<f64> {
    let boundary = hull_boundary_sample(s1, count)?;
    Ok(boundary
        .points
        .iter()
        .map(|p| domination_shortfall(p, inner))
        .fold(0.0, f64::max))
}

/// Target generator that is feasible by construction: rates of a random
/// binary allocation, scaled by `1 - margin`.
pub fn target_from_random_binary<R: Rng + ?Sized>(
    net: &NetworkConfig,
    frame_size: usize,
    margin: f64,
    rng: &mut R,
) -> Vec<f64> {
    let p = random_binary_allocation(net.n_links, frame_size, net.p_max, rng);
    link_rates(&p, net).iter().map(|r| r * (1.0 - margin)).collect()
}
