//! Experiment drivers: scenario configuration, repeated runs over targets
//! and initial allocations, the exploration-rate and frame-size sweeps, and
//! result export.
//!
//! Run rows are written as CSV with the columns
//! `target_index, repetition, seed, converged, updates_used`; aggregates
//! are JSON. Every experiment is a pure function of its config and seed.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::iterative::{ibpp_run, ipp_run, random_allocation, IterOptions, IterationResult};
use crate::perturbed::{check_a2, ipbpp_run, itipbpp_run, random_binary_allocation, PerturbParams};
use crate::queueing::StabilityConfig;
use crate::region::target_from_random_binary;
use crate::scenarios;
use crate::schedule::UpdateSchedule;
use crate::sinr::NetworkConfig;
use crate::topology::{random_topology, TopologySpec};
use crate::trace::SimTrace;

pub const DEFAULT_TARGETS: usize = 200;
pub const DEFAULT_REPETITIONS: usize = 100;
pub const DEFAULT_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedNet {
    TwoLinkSymmetric,
    TwoLinkAsymmetric,
    AccessPoint,
}

impl NamedNet {
    pub fn build(self) -> NetworkConfig {
        match self {
            NamedNet::TwoLinkSymmetric => scenarios::two_link_symmetric(),
            NamedNet::TwoLinkAsymmetric => scenarios::two_link_asymmetric(),
            NamedNet::AccessPoint => scenarios::access_point(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetSource {
    Explicit(NetworkConfig),
    Random(TopologySpec),
    Named(NamedNet),
}

impl NetSource {
    pub fn build(&self) -> Result<NetworkConfig> {
        match self {
            NetSource::Explicit(net) => {
                net.validate()?;
                Ok(net.clone())
            }
            NetSource::Random(spec) => random_topology(spec),
            NetSource::Named(name) => Ok(name.build()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ipp,
    Ibpp,
    Ipbpp,
    Itipbpp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    Explicit(Vec<f64>),
    /// The access-point reference targets (requires the named instance).
    AccessPoint,
    /// Rates of a random binary allocation scaled by `1 - margin`.
    FromRandomBinary {
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_targets() -> usize {
    DEFAULT_TARGETS
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

fn default_target_source() -> TargetSource {
    TargetSource::FromRandomBinary { margin: DEFAULT_MARGIN }
}

fn default_schedule() -> UpdateSchedule {
    UpdateSchedule::UniformRandom { seed: 0 }
}

fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.5, 0.9]
}

fn default_frame_sizes() -> Vec<usize> {
    vec![2, 4, 8]
}

fn default_pc_grid() -> usize {
    21
}

fn default_region_frames() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_stability_seeds() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    #[serde(default = "default_region_frames")]
    pub frame_sizes: Vec<usize>,
    #[serde(default = "default_pc_grid")]
    pub pc_grid: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            frame_sizes: default_region_frames(),
            pc_grid: default_pc_grid(),
        }
    }
}

/// Everything an experiment depends on besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub net: NetSource,
    pub algo: Algorithm,
    #[serde(default)]
    pub params: PerturbParams,
    /// Frame size `M`.
    pub m: usize,
    #[serde(default = "default_target_source")]
    pub targets: TargetSource,
    /// Target vectors drawn per cell (ignored for fixed targets).
    #[serde(default = "default_targets")]
    pub n_targets: usize,
    /// Initial allocations tried per target.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Link polling order. The seed of a random order is re-derived per
    /// run from the master seed.
    #[serde(default = "default_schedule")]
    pub schedule: UpdateSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_frame_sizes")]
    pub frame_sizes: Vec<usize>,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
    #[serde(default = "default_stability_seeds")]
    pub stability_seeds: usize,
    /// Keep the per-update trace of the first run.
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default)]
    pub output: Option<String>,
}

impl ScenarioConfig {
    pub fn new(net: NetSource, algo: Algorithm, m: usize) -> Self {
        Self {
            net,
            algo,
            params: PerturbParams::default(),
            m,
            targets: default_target_source(),
            n_targets: DEFAULT_TARGETS,
            repetitions: DEFAULT_REPETITIONS,
            schedule: default_schedule(),
            seed: 0,
            alphas: default_alphas(),
            frame_sizes: default_frame_sizes(),
            region: RegionConfig::default(),
            stability: None,
            stability_seeds: default_stability_seeds(),
            record_trace: false,
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("malformed scenario config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<NetworkConfig> {
        let net = self.net.build()?;
        if self.m == 0 {
            return Err(Error::InvalidParameter("frame size m must be positive".into()));
        }
        if self.repetitions == 0 || self.n_targets == 0 {
            return Err(Error::InvalidParameter("repetitions and n_targets must be positive".into()));
        }
        if self.params.budget == 0 {
            return Err(Error::InvalidParameter("budget must be positive".into()));
        }
        if matches!(self.algo, Algorithm::Ipp | Algorithm::Ibpp) && net.n_links != 2 {
            return Err(Error::Unsupported(format!(
                "{:?} is defined for two links, the network has {}",
                self.algo, net.n_links
            )));
        }
        match &self.targets {
            TargetSource::Explicit(t) if t.len() != net.n_links => {
                return Err(Error::DimensionMismatch {
                    expected: net.n_links,
                    got: t.len(),
                })
            }
            TargetSource::FromRandomBinary { margin } if !(0.0..1.0).contains(margin) => {
                return Err(Error::InvalidParameter(format!("margin {margin} must lie in [0, 1)")))
            }
            _ => {}
        }
        Ok(net)
    }

    fn fixed_targets(&self) -> bool {
        !matches!(self.targets, TargetSource::FromRandomBinary { .. })
    }

    fn target_count(&self) -> usize {
        if self.fixed_targets() {
            1
        } else {
            self.n_targets
        }
    }
}

/// splitmix64 finalizer folded over the parts, so every run gets its own
/// independent stream.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const TAG_TARGET: u64 = 1;
const TAG_INIT: u64 = 2;
const TAG_SCHEDULE: u64 = 3;
const TAG_EXPLORE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub target_index: usize,
    pub repetition: usize,
    pub seed: u64,
    pub converged: bool,
    pub updates_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub converged: usize,
    pub fraction_unconverged: f64,
    /// Mean updates over converged runs only; `None` when none converged.
    pub mean_updates_converged: Option<f64>,
    /// Mean updates with unconverged runs counted at the budget.
    pub mean_updates_censored: f64,
}

impl Aggregate {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let converged: Vec<u64> = runs.iter().filter(|r| r.converged).map(|r| r.updates_used).collect();
        let total: u64 = runs.iter().map(|r| r.updates_used).sum();
        Self {
            runs: runs.len(),
            converged: converged.len(),
            fraction_unconverged: if runs.is_empty() {
                0.0
            } else {
                (runs.len() - converged.len()) as f64 / runs.len() as f64
            },
            mean_updates_converged: (!converged.is_empty())
                .then(|| converged.iter().sum::<u64>() as f64 / converged.len() as f64),
            mean_updates_censored: if runs.is_empty() {
                0.0
            } else {
                total as f64 / runs.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algo: Algorithm,
    pub frame_size: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub budget: u64,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub runs: Vec<RunRecord>,
    #[serde(skip)]
    pub trace: Option<SimTrace>,
}

impl ExperimentReport {
    pub fn write_runs_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.runs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn runs_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_runs_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn targets_for(cfg: &ScenarioConfig, net: &NetworkConfig, k: usize) -> Result<Vec<f64>> {
    match &cfg.targets {
        TargetSource::Explicit(t) => Ok(t.clone()),
        TargetSource::AccessPoint => {
            if net.n_links != 3 || cfg.m != scenarios::AP_FRAME {
                return Err(Error::InvalidParameter(
                    "access-point targets need the 3-link instance with 3 slots".into(),
                ));
            }
            Ok(scenarios::access_point_targets(net))
        }
        TargetSource::FromRandomBinary { margin } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[TAG_TARGET, k as u64]));
            Ok(target_from_random_binary(net, cfg.m, *margin, &mut rng))
        }
    }
}

/// The target vectors a scenario runs against, in `target_index` order.
pub fn scenario_targets(cfg: &ScenarioConfig) -> Result<Vec<Vec<f64>>> {
    let net = cfg.validate()?;
    (0..cfg.target_count()).map(|k| targets_for(cfg, &net, k)).collect()
}

fn one_run(
    cfg: &ScenarioConfig,
    net: &NetworkConfig,
    targets: &[f64],
    k: usize,
    r: usize,
    trace: bool,
) -> Result<(RunRecord, IterationResult)> {
    let ids = [k as u64, r as u64];
    let run_seed = derive_seed(cfg.seed, &ids);
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, &[TAG_INIT]));
    let schedule = match cfg.schedule {
        UpdateSchedule::RoundRobin => UpdateSchedule::RoundRobin,
        UpdateSchedule::UniformRandom { seed } => UpdateSchedule::UniformRandom {
            seed: derive_seed(run_seed, &[TAG_SCHEDULE, seed]),
        },
    };
    let params = PerturbParams {
        seed: derive_seed(run_seed, &[TAG_EXPLORE]),
        ..cfg.params
    };
    let opts = IterOptions {
        budget: cfg.params.budget,
        record_trace: trace,
    };
    let result = match cfg.algo {
        Algorithm::Ipp => {
            let init = random_allocation(net.n_links, cfg.m, net.p_max, &mut init_rng);
            ipp_run(net, targets, &schedule, &init, &opts)?
        }
        Algorithm::Ibpp => {
            let init = random_binary_allocation(net.n_links, cfg.m, net.p_max, &mut init_rng);
            ibpp_run(net, targets, &schedule, &init, &opts)?
        }
        Algorithm::Ipbpp => {
            let init = random_binary_allocation(net.n_links, cfg.m, net.p_max, &mut init_rng);
            ipbpp_run(net, targets, &schedule, &init, None, &params, trace)?.result
        }
        Algorithm::Itipbpp => {
            let init = random_binary_allocation(net.n_links, cfg.m, net.p_max, &mut init_rng);
            itipbpp_run(net, targets, &schedule, &init, None, &params, trace)?.result
        }
    };
    let record = RunRecord {
        target_index: k,
        repetition: r,
        seed: run_seed,
        converged: result.converged,
        updates_used: result.updates_used,
    };
    Ok((record, result))
}

/// Runs `repetitions` random initial allocations for each target vector.
/// Rows are ordered by `(target_index, repetition)` whatever the execution
/// mode.
pub fn run_scenario(cfg: &ScenarioConfig, exec: Execution) -> Result<ExperimentReport> {
    let net = cfg.validate()?;
    let targets = scenario_targets(cfg)?;
    let n_targets = targets.len();
    let reps = cfg.repetitions;
    let outcomes = exec.map(n_targets * reps, |idx| {
        let (k, r) = (idx / reps, idx % reps);
        one_run(cfg, &net, &targets[k], k, r, cfg.record_trace && idx == 0)
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut trace = None;
    for outcome in outcomes {
        let (record, result) = outcome?;
        if trace.is_none() {
            trace = result.trace;
        }
        runs.push(record);
    }
    Ok(ExperimentReport {
        algo: cfg.algo,
        frame_size: cfg.m,
        alpha1: cfg.params.alpha1,
        alpha2: cfg.params.alpha2,
        budget: cfg.params.budget,
        seed: cfg.seed,
        aggregate: Aggregate::from_runs(&runs),
        runs,
        trace,
    })
}

/// One report per exploration rate, with `alpha2 = alpha1`.
pub fn sweep_alpha(cfg: &ScenarioConfig, alphas: &[f64], exec: Execution) -> Result<Vec<ExperimentReport>> {
    if !matches!(cfg.algo, Algorithm::Ipbpp | Algorithm::Itipbpp) {
        return Err(Error::Unsupported(format!("{:?} has no exploration rate", cfg.algo)));
    }
    alphas
        .iter()
        .map(|&a| {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("alpha = {a} must lie in [0, 1)")));
            }
            let mut c = cfg.clone();
            c.params.alpha1 = a;
            c.params.alpha2 = a;
            run_scenario(&c, exec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSweepRow {
    pub m: usize,
    /// Whether the interference-trigger condition holds at this frame size.
    pub a2_holds: bool,
    pub ipbpp: ExperimentReport,
    pub itipbpp: ExperimentReport,
}

/// Both randomized schedulers at every frame size, with targets redrawn
/// from `M`-slot binary allocations for each `M`.
pub fn sweep_frame_size(cfg: &ScenarioConfig, frame_sizes: &[usize], exec: Execution) -> Result<Vec<FrameSweepRow>> {
    let net = cfg.net.build()?;
    frame_sizes
        .iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.m = m;
            c.algo = Algorithm::Ipbpp;
            let ipbpp = run_scenario(&c, exec)?;
            c.algo = Algorithm::Itipbpp;
            let itipbpp = run_scenario(&c, exec)?;
            Ok(FrameSweepRow {
                m,
                a2_holds: check_a2(&net, cfg.params.delta, m)?,
                ipbpp,
                itipbpp,
            })
        })
        .collect()
}

/// `m, algo, runs, converged, fraction_unconverged, mean_updates_converged,
/// mean_updates_censored` per sweep row.
pub fn write_frame_sweep_csv<W: Write>(rows: &[FrameSweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "m",
        "algo",
        "runs",
        "converged",
        "fraction_unconverged",
        "mean_updates_converged",
        "mean_updates_censored",
    ])?;
    for row in rows {
        for (name, rep) in [("ipbpp", &row.ipbpp), ("itipbpp", &row.itipbpp)] {
            let a = &rep.aggregate;
            w.write_record([
                row.m.to_string(),
                name.to_string(),
                a.runs.to_string(),
                a.converged.to_string(),
                a.fraction_unconverged.to_string(),
                a.mean_updates_converged.map(|v| v.to_string()).unwrap_or_default(),
                a.mean_updates_censored.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `alpha, runs, converged, fraction_unconverged, mean_updates_converged,
/// mean_updates_censored` per exploration rate.
pub fn write_alpha_sweep_csv<W: Write>(reports: &[ExperimentReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "alpha",
        "runs",
        "converged",
        "fraction_unconverged",
        "mean_updates_converged",
        "mean_updates_censored",
    ])?;
    for rep in reports {
        let a = &rep.aggregate;
        w.write_record([
            rep.alpha1.to_string(),
            a.runs.to_string(),
            a.converged.to_string(),
            a.fraction_unconverged.to_string(),
            a.mean_updates_converged.map(|v| v.to_string()).unwrap_or_default(),
            a.mean_updates_censored.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
