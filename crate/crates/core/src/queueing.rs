//! Buffered transmitters: bounded arrivals, Lindley queue updates, arrival
//! rate estimation and the stability experiment that drives IT-IPB-PP with
//! known or estimated rates.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::perturbed::{random_binary_allocation, PerturbParams, PerturbedScheduler, Variant, MAX_ENUMERATION_BITS};
use crate::region::{enumerate_sm, in_coord_convex};
use crate::schedule::UpdateSchedule;
use crate::sinr::{link_rates, NetworkConfig};

pub const DEFAULT_A_MAX: f64 = 2.0;
pub const DEFAULT_HORIZON: u64 = 100_000;

fn default_a_max() -> f64 {
    DEFAULT_A_MAX
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

/// Two-point i.i.d. arrivals: a batch of `a_max` bits with probability
/// `lambda_i / a_max`, otherwise nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub lambda: Vec<f64>,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ArrivalProcess {
    pub fn new(lambda: Vec<f64>, a_max: f64, seed: u64) -> Result<Self> {
        let a = Self { lambda, a_max, seed };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("a_max = {} must be positive", self.a_max)));
        }
        if let Some(l) = self.lambda.iter().find(|&&l| !(0.0..=self.a_max).contains(&l)) {
            return Err(Error::InvalidParameter(format!(
                "arrival rate {l} must lie in [0, a_max = {}]",
                self.a_max
            )));
        }
        Ok(())
    }

    pub fn sampler(&self) -> ArrivalSampler {
        ArrivalSampler {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            probs: self.lambda.iter().map(|l| l / self.a_max).collect(),
            a_max: self.a_max,
        }
    }
}

pub struct ArrivalSampler {
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    a_max: f64,
}

impl ArrivalSampler {
    /// Arrivals of one frame, one entry per link.
    pub fn next_frame(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.probs.len());
        for &p in &self.probs {
            out.push(if self.rng.gen::<f64>() < p { self.a_max } else { 0.0 });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<f64>,
    pub t: u64,
}

impl QueueState {
    pub fn new(q: Vec<f64>) -> Self {
        Self { q, t: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.q.iter().all(|&q| q == 0.0)
    }
}

/// Lindley recursion `q' = max(0, q + a - s)` per link.
pub fn step_queues(state: &QueueState, arrivals: &[f64], served: &[f64]) -> Result<QueueState> {
    let n = state.q.len();
    for v in [arrivals, served] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    if arrivals.iter().chain(served).any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter("arrivals and service must be nonnegative".into()));
    }
    let q = state
        .q
        .iter()
        .zip(arrivals.iter().zip(served))
        .map(|(&q, (&a, &s))| (q + a - s).max(0.0))
        .collect();
    Ok(QueueState { q, t: state.t + 1 })
}

/// Target for an estimate falling in `[2(k-1) mu, 2k mu)`: `(4k+1) mu / 2`.
pub fn target_from_estimate(lambda_hat: f64, mu: f64) -> f64 {
    let k = (lambda_hat / (2.0 * mu)).floor() + 1.0;
    (4.0 * k + 1.0) * mu / 2.0
}

/// Running mean of the arrivals of one link and the target it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub sum: f64,
    pub t: u64,
    pub mu: f64,
    pub current_target: f64,
}

impl EstimatorState {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu = {mu} must be positive")));
        }
        Ok(Self {
            sum: 0.0,
            t: 0,
            mu,
            current_target: target_from_estimate(0.0, mu),
        })
    }

    pub fn lambda_hat(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.sum / self.t as f64
        }
    }

    /// Records one frame of arrivals; returns whether the target moved.
    pub fn observe(&mut self, arrival: f64) -> bool {
        self.sum += arrival;
        self.t += 1;
        let next = target_from_estimate(self.lambda_hat(), self.mu);
        let changed = next != self.current_target;
        self.current_target = next;
        changed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Targets fixed at `lambda + epsilon / 2`.
    KnownRates,
    /// Targets derived from running arrival estimates with `mu = epsilon / 8`.
    EstimatedRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub lambda: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    pub mode: RateMode,
    pub frame_size: usize,
    /// Frames simulated per seed.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// Bits in every queue at frame 0.
    #[serde(default)]
    pub initial_queue: f64,
    /// Exploration rates and `delta` of the scheduler; `budget` is unused
    /// since the horizon bounds the run.
    #[serde(default)]
    pub params: PerturbParams,
    /// Keep the full `q[t]` series of every seed.
    #[serde(default)]
    pub record_queues: bool,
}

impl StabilityConfig {
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        net.validate()?;
        if self.lambda.len() != net.n_links {
            return Err(Error::DimensionMismatch {
                expected: net.n_links,
                got: self.lambda.len(),
            });
        }
        ArrivalProcess::new(self.lambda.clone(), self.a_max, 0)?;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if self.frame_size == 0 {
            return Err(Error::InvalidParameter("frame size must be positive".into()));
        }
        if !(self.initial_queue >= 0.0) {
            return Err(Error::InvalidParameter("initial queue must be nonnegative".into()));
        }
        self.params.validate()
    }

    fn initial_targets(&self) -> Vec<f64> {
        match self.mode {
            RateMode::KnownRates => self.lambda.iter().map(|l| l + self.epsilon / 2.0).collect(),
            RateMode::EstimatedRates => vec![target_from_estimate(0.0, self.epsilon / 8.0); self.lambda.len()],
        }
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub seed: u64,
    /// First frame at which every queue is empty.
    pub emptying_time: Option<u64>,
    /// Frame from which the scheduler stayed absorbed to the end.
    pub absorbed_at: Option<u64>,
    /// Scheduler updates spent before `absorbed_at`.
    pub updates_to_absorption: Option<u64>,
    /// Frames from `absorbed_at` until every queue is empty.
    pub drain_after_absorption: Option<u64>,
    /// Per link, the frame of the last target change (0 if none).
    pub settle_time: Vec<u64>,
    pub final_targets: Vec<f64>,
    pub queue_max: f64,
    pub final_queue: Vec<f64>,
    /// Mean bits served per frame after `absorbed_at`.
    pub service_rate: Option<Vec<f64>>,
    /// Mean bits arrived per frame after `absorbed_at`.
    pub arrival_rate: Option<Vec<f64>>,
    /// The horizon ran out before the queues drained after absorption.
    pub horizon_exceeded: bool,
    #[serde(skip)]
    pub queue_series: Option<Vec<Vec<f64>>>,
}

impl StabilityRun {
    pub fn service_exceeds_arrivals(&self) -> bool {
        match (&self.service_rate, &self.arrival_rate) {
            (Some(s), Some(a)) => s.iter().zip(a).all(|(s, a)| s > a),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: StabilityConfig,
    /// Whether `lambda + epsilon / 2`, the largest target either mode can
    /// request, is dominated by an `M`-slot binary schedule; `None` when the
    /// instance is too large to enumerate.
    pub oracle_feasible: Option<bool>,
    pub runs: Vec<StabilityRun>,
}

impl StabilityReport {
    pub fn all_drained(&self) -> bool {
        self.runs.iter().all(|r| r.drain_after_absorption.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Independent substream seeds for init, schedule, exploration, arrivals.
fn substreams(seed: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [rng.gen(), rng.gen(), rng.gen(), rng.gen()]
}

/// Simulates one seed: per frame one scheduler update (while not absorbed),
/// then service at the current rates together with the frame's arrivals,
/// then the estimator update in estimated mode.
pub fn run_stability_seed(net: &NetworkConfig, cfg: &StabilityConfig, seed: u64) -> Result<StabilityRun> {
    cfg.validate(net)?;
    let n = net.n_links;
    let [init_seed, sched_seed, explore_seed, arrival_seed] = substreams(seed);
    let init = random_binary_allocation(n, cfg.frame_size, net.p_max, &mut ChaCha8Rng::seed_from_u64(init_seed));
    let params = PerturbParams {
        seed: explore_seed,
        ..cfg.params
    };
    let mut sched = PerturbedScheduler::new(
        net,
        Variant::Itipbpp,
        &cfg.initial_targets(),
        &UpdateSchedule::UniformRandom { seed: sched_seed },
        &init,
        None,
        None,
        &params,
    )?;
    let mut arrivals = ArrivalProcess::new(cfg.lambda.clone(), cfg.a_max, arrival_seed)?.sampler();
    let mut estimators = match cfg.mode {
        RateMode::KnownRates => Vec::new(),
        RateMode::EstimatedRates => (0..n)
            .map(|_| EstimatorState::new(cfg.epsilon / 8.0))
            .collect::<Result<Vec<_>>>()?,
    };

    let mut queues = QueueState::new(vec![cfg.initial_queue; n]);
    let mut emptying_time = queues.is_empty().then_some(0);
    let mut absorbed = sched.is_absorbed();
    let mut absorbed_at = absorbed.then_some(0);
    let mut updates_to_absorption = absorbed.then_some(0);
    let mut drained_at: Option<u64> = absorbed.then_some(0).filter(|_| queues.is_empty());
    let mut settle_time = vec![0; n];
    let mut queue_max = cfg.initial_queue;
    let mut served_sum = vec![0.0; n];
    let mut arrived_sum = vec![0.0; n];
    let mut series = cfg.record_queues.then(|| vec![queues.q.clone()]);
    let mut rates = link_rates(sched.allocation(), net).into_inner();

    for frame in 1..=cfg.horizon {
        if !absorbed {
            sched.step()?;
            rates = link_rates(sched.allocation(), net).into_inner();
            absorbed = sched.is_absorbed();
            if absorbed {
                absorbed_at = Some(frame);
                updates_to_absorption = Some(sched.updates());
                drained_at = None;
                served_sum.iter_mut().for_each(|s| *s = 0.0);
                arrived_sum.iter_mut().for_each(|s| *s = 0.0);
            }
        }
        let a = arrivals.next_frame();
        queues = step_queues(&queues, &a, &rates)?;
        queue_max = queues.q.iter().copied().fold(queue_max, f64::max);
        if absorbed {
            for i in 0..n {
                served_sum[i] += rates[i];
                arrived_sum[i] += a[i];
            }
            if drained_at.is_none() && queues.is_empty() {
                drained_at = Some(frame);
            }
        }
        if emptying_time.is_none() && queues.is_empty() {
            emptying_time = Some(frame);
        }
        if let Some(s) = series.as_mut() {
            s.push(queues.q.clone());
        }

        if !estimators.is_empty() {
            let mut changed = false;
            for (i, est) in estimators.iter_mut().enumerate() {
                if est.observe(a[i]) {
                    settle_time[i] = frame;
                    changed = true;
                }
            }
            if changed {
                let targets: Vec<f64> = estimators.iter().map(|e| e.current_target).collect();
                sched.set_targets(&targets)?;
                // warm start: keep the allocation, re-check absorption
                let still = sched.is_absorbed();
                if absorbed && !still {
                    absorbed_at = None;
                    updates_to_absorption = None;
                    drained_at = None;
                } else if !absorbed && still {
                    // a lowered target can absorb the current allocation
                    absorbed_at = Some(frame);
                    updates_to_absorption = Some(sched.updates());
                    drained_at = queues.is_empty().then_some(frame);
                    served_sum.iter_mut().for_each(|s| *s = 0.0);
                    arrived_sum.iter_mut().for_each(|s| *s = 0.0);
                }
                absorbed = still;
            }
        }
    }

    let window = absorbed_at.map(|t| (cfg.horizon - t) as f64);
    let mean = |sums: &[f64]| window.filter(|&w| w > 0.0).map(|w| sums.iter().map(|s| s / w).collect());
    Ok(StabilityRun {
        seed,
        emptying_time,
        absorbed_at,
        updates_to_absorption,
        drain_after_absorption: absorbed_at.zip(drained_at).map(|(a, d)| d - a),
        settle_time,
        final_targets: sched.targets().to_vec(),
        queue_max,
        final_queue: queues.q,
        service_rate: mean(&served_sum),
        arrival_rate: mean(&arrived_sum),
        horizon_exceeded: drained_at.is_none(),
        queue_series: series,
    })
}

/// Whether `lambda + margin 1` is dominated by some binary `M`-slot
/// schedule, or `None` when `N M` is too large to enumerate.
pub fn oracle_feasible(net: &NetworkConfig, lambda: &[f64], margin: f64, frame_size: usize) -> Result<Option<bool>> {
    if net.n_links * frame_size > MAX_ENUMERATION_BITS {
        return Ok(None);
    }
    let want: Vec<f64> = lambda.iter().map(|l| l + margin).collect();
    Ok(Some(in_coord_convex(&want, &enumerate_sm(net, frame_size)?)))
}

/// Runs every seed (in parallel when enabled); rows keep seed order. Fails
/// up front when the oracle proves `lambda + epsilon / 2` unreachable.
pub fn run_stability_experiment(
    net: &NetworkConfig,
    cfg: &StabilityConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<StabilityReport> {
    cfg.validate(net)?;
    let feasible = oracle_feasible(net, &cfg.lambda, cfg.epsilon / 2.0, cfg.frame_size)?;
    if feasible == Some(false) {
        return Err(Error::InvalidParameter(format!(
            "arrival rates {:?} plus margin {} are not achievable with {} slots",
            cfg.lambda,
            cfg.epsilon / 2.0,
            cfg.frame_size
        )));
    }
    let runs = exec
        .map(seeds.len(), |k| run_stability_seed(net, cfg, seeds[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport {
        config: cfg.clone(),
        oracle_feasible: feasible,
        runs,
    })
}

/// `t, seed, q_0, ..., q_{N-1}` rows for every seed that kept its series.
pub fn write_queue_csv<W: Write>(report: &StabilityReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = report.config.lambda.len();
    let mut header = vec!["t".to_string(), "seed".to_string()];
    header.extend((0..n).map(|i| format!("q_{i}")));
    w.write_record(&header)?;
    for run in &report.runs {
        for (t, q) in run.queue_series.iter().flatten().enumerate() {
            let mut rec = vec![t.to_string(), run.seed.to_string()];
            rec.extend(q.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
