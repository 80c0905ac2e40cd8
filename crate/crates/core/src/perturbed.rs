//! Randomized N-link schedulers: binary power packing with random
//! exploration (IPB-PP) and its interference-triggered variant
//! (IT-IPB-PP), plus exhaustive checkers for the structural conditions
//! under which they absorb almost surely.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::iterative::{check_targets, satisfied_flags, IterationResult, DEFAULT_BUDGET};
use crate::packing::{bpp_allocate, LinkView};
use crate::schedule::{UpdateSchedule, UpdateSequence};
use crate::sinr::{interference_into, link_rate_with_scratch, link_rates, meets, NetworkConfig, PowerAllocation};
use crate::trace::{Branch, SimTrace, TraceRow};

/// Largest `N * M` for which binary allocations are enumerated.
pub const MAX_ENUMERATION_BITS: usize = 20;

fn default_alpha() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    1.0
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbParams {
    /// Exploration probability of an unsatisfied transmitter.
    #[serde(default = "default_alpha")]
    pub alpha1: f64,
    /// Exploration probability of a satisfied transmitter that was
    /// triggered (by `beta = 0` or by an interference jump).
    #[serde(default = "default_alpha")]
    pub alpha2: f64,
    /// Interference-sum sensitivity of the triggered variant.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            alpha1: default_alpha(),
            alpha2: default_alpha(),
            delta: default_delta(),
            budget: default_budget(),
            seed: 0,
        }
    }
}

impl PerturbParams {
    pub fn new(alpha1: f64, alpha2: f64, delta: f64, budget: u64, seed: u64) -> Result<Self> {
        let p = Self {
            alpha1,
            alpha2,
            delta,
            budget,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Exploration rates must lie strictly inside `(0, 1)`.
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {a} must lie in (0, 1)")));
            }
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must be positive", self.delta)));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be positive".into()));
        }
        Ok(())
    }

    /// Same parameters with both exploration rates set to zero, which turns
    /// the randomized schedulers back into plain binary packing dynamics.
    /// Such parameters fail [`validate`](Self::validate) but are accepted by
    /// the run functions.
    pub fn without_exploration(mut self) -> Self {
        self.alpha1 = 0.0;
        self.alpha2 = 0.0;
        self
    }

    fn validate_for_run(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("{name} = {a} must lie in [0, 1)")));
            }
        }
        self.validate_common()
    }
}

/// Each slot independently at `P_max` with probability 1/2.
pub fn random_binary_row<R: Rng + ?Sized>(frame_size: usize, p_max: f64, rng: &mut R) -> Vec<f64> {
    (0..frame_size)
        .map(|_| if rng.gen::<bool>() { p_max } else { 0.0 })
        .collect()
}

/// Every row drawn with [`random_binary_row`].
pub fn random_binary_allocation<R: Rng + ?Sized>(
    n_links: usize,
    frame_size: usize,
    p_max: f64,
    rng: &mut R,
) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(n_links, frame_size);
    for i in 0..n_links {
        p.set_row(i, &random_binary_row(frame_size, p_max, rng));
    }
    p
}

/// Per-transmitter memory of the randomized schedulers.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub allocation_row: Vec<f64>,
    /// Satisfied by its own last decision (IPB-PP).
    pub beta: bool,
    /// Interference sum measured at the last update (IT-IPB-PP).
    pub i_last: f64,
}

/// Which exploration trigger a satisfied transmitter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// IPB-PP: explore while `beta = 0`.
    Ipbpp,
    /// IT-IPB-PP: explore while the interference sum moved by more than
    /// `delta`.
    Itipbpp,
}

/// Result of a randomized run together with the final agent memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedResult {
    pub result: IterationResult,
    pub agents: Vec<AgentState>,
}

fn check_binary(init: &PowerAllocation, net: &NetworkConfig) -> Result<()> {
    init.check(net)?;
    if !init.is_binary(net.p_max) {
        return Err(Error::InvalidParameter("initial allocation must be binary".into()));
    }
    Ok(())
}

/// One randomized scheduler advanced an update at a time. Targets may be
/// replaced between updates, which is how the queueing driver feeds in
/// re-estimated rates.
pub struct PerturbedScheduler<'a> {
    net: &'a NetworkConfig,
    variant: Variant,
    params: PerturbParams,
    targets: Vec<f64>,
    p: PowerAllocation,
    beta: Vec<bool>,
    i_last: Vec<f64>,
    scratch: Vec<f64>,
    rng: ChaCha8Rng,
    seq: UpdateSequence,
    updates: u64,
}

impl<'a> PerturbedScheduler<'a> {
    /// `beta0` defaults to all zeros and `i_last0` to the interference sums
    /// seen under `init`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        net: &'a NetworkConfig,
        variant: Variant,
        targets: &[f64],
        schedule: &UpdateSchedule,
        init: &PowerAllocation,
        beta0: Option<&[bool]>,
        i_last0: Option<&[f64]>,
        params: &PerturbParams,
    ) -> Result<Self> {
        net.validate()?;
        check_targets(net, targets)?;
        check_binary(init, net)?;
        params.validate_for_run()?;
        let n = net.n_links;
        let beta = match beta0 {
            Some(b) if b.len() != n => return Err(Error::DimensionMismatch { expected: n, got: b.len() }),
            Some(b) => b.to_vec(),
            None => vec![false; n],
        };
        let mut s = Self {
            net,
            variant,
            params: *params,
            targets: targets.to_vec(),
            p: init.clone(),
            beta,
            i_last: Vec::new(),
            scratch: vec![0.0; init.frame_size()],
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            seq: schedule.sequence(n),
            updates: 0,
        };
        s.i_last = match i_last0 {
            Some(v) if v.len() != n => return Err(Error::DimensionMismatch { expected: n, got: v.len() }),
            Some(v) => v.to_vec(),
            None => (0..n).map(|i| s.interference_sum(i)).collect(),
        };
        Ok(s)
    }

    fn interference_sum(&mut self, i: usize) -> f64 {
        interference_into(&self.p, self.net, i, &mut self.scratch);
        self.scratch.iter().sum()
    }

    fn rate(&mut self, i: usize) -> f64 {
        link_rate_with_scratch(&self.p, self.net, i, &mut self.scratch)
    }

    pub fn allocation(&self) -> &PowerAllocation {
        &self.p
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn set_targets(&mut self, targets: &[f64]) -> Result<()> {
        check_targets(self.net, targets)?;
        self.targets.copy_from_slice(targets);
        Ok(())
    }

    /// Every link satisfied and no exploration trigger armed, so no further
    /// update can change the allocation.
    pub fn is_absorbed(&mut self) -> bool {
        for i in 0..self.net.n_links {
            if !meets(self.rate(i), self.targets[i]) {
                return false;
            }
        }
        match self.variant {
            Variant::Ipbpp => self.beta.iter().all(|&b| b),
            Variant::Itipbpp => (0..self.net.n_links).all(|i| {
                let sum = self.interference_sum(i);
                (sum - self.i_last[i]).abs() <= self.params.delta
            }),
        }
    }

    /// Polls the next link and applies its update rule.
    pub fn step(&mut self) -> Result<(usize, Branch)> {
        let i = self.seq.next().expect("schedules are infinite");
        let own_rate = self.rate(i);
        let sum_now = self.interference_sum(i);
        let target = self.targets[i];

        let branch = if !meets(own_rate, target) {
            if self.rng.gen::<f64>() < self.params.alpha1 {
                Branch::Random
            } else {
                Branch::Bpp
            }
        } else {
            let triggered = match self.variant {
                Variant::Ipbpp => !self.beta[i],
                Variant::Itipbpp => (sum_now - self.i_last[i]).abs() > self.params.delta,
            };
            if triggered && self.rng.gen::<f64>() < self.params.alpha2 {
                Branch::Random
            } else {
                Branch::Keep
            }
        };
        match branch {
            Branch::Random => {
                let row = random_binary_row(self.p.frame_size(), self.net.p_max, &mut self.rng);
                self.p.set_row(i, &row);
            }
            Branch::Bpp => {
                let view = LinkView::observe(&self.p, self.net, i, target)?;
                self.p.set_row(i, &bpp_allocate(&view));
            }
            Branch::Keep => {}
        }
        match self.variant {
            Variant::Ipbpp => {
                let r = self.rate(i);
                self.beta[i] = meets(r, target);
            }
            // p_{-i} is untouched by this update, so the sum measured before
            // it is still I_i(p[t-1]).
            Variant::Itipbpp => self.i_last[i] = sum_now,
        }
        self.updates += 1;
        Ok((i, branch))
    }

    pub fn agents(&self) -> Vec<AgentState> {
        (0..self.net.n_links)
            .map(|i| AgentState {
                allocation_row: self.p.row(i).to_vec(),
                beta: self.beta[i],
                i_last: self.i_last[i],
            })
            .collect()
    }
}

/// Runs a scheduler until absorption or until `params.budget` updates.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_run(
    net: &NetworkConfig,
    variant: Variant,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    beta0: Option<&[bool]>,
    i_last0: Option<&[f64]>,
    params: &PerturbParams,
    record_trace: bool,
) -> Result<PerturbedResult> {
    let mut s = PerturbedScheduler::new(net, variant, targets, schedule, init, beta0, i_last0, params)?;
    let n = net.n_links;
    let mut trace = record_trace.then(|| SimTrace::new(n, init.frame_size()));
    let mut absorbed = s.is_absorbed();
    while !absorbed && s.updates < params.budget {
        let (link, branch) = s.step()?;
        absorbed = s.is_absorbed();
        if let Some(trace) = trace.as_mut() {
            let rates = link_rates(&s.p, net);
            trace.push(TraceRow {
                t: s.updates,
                link,
                powers: s.p.as_flat().to_vec(),
                satisfied: satisfied_flags(&rates, targets),
                rates: rates.into_inner(),
                beta: (variant == Variant::Ipbpp).then(|| s.beta.clone()),
                i_last: (variant == Variant::Itipbpp).then(|| s.i_last.clone()),
                branch: Some(branch),
            });
        }
    }
    let agents = s.agents();
    let final_rates = link_rates(&s.p, net);
    Ok(PerturbedResult {
        result: IterationResult {
            converged: absorbed,
            final_allocation: s.p,
            final_rates,
            updates_used: s.updates,
            trace,
        },
        agents,
    })
}

/// IPB-PP. Unsatisfied transmitters play BPP or, with probability
/// `alpha1`, a random row; satisfied ones with `beta = 0` re-randomize with
/// probability `alpha2`; satisfied ones with `beta = 1` keep their row.
/// Absorbed once every link is satisfied with `beta = 1`.
pub fn ipbpp_run(
    net: &NetworkConfig,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    beta0: Option<&[bool]>,
    params: &PerturbParams,
    record_trace: bool,
) -> Result<PerturbedResult> {
    perturbed_run(net, Variant::Ipbpp, targets, schedule, init, beta0, None, params, record_trace)
}

/// IT-IPB-PP. As [`ipbpp_run`], but a satisfied transmitter explores when
/// its interference sum moved by more than `delta` since its last update.
/// Absorbed once every link is satisfied and sees an interference sum
/// within `delta` of its record.
pub fn itipbpp_run(
    net: &NetworkConfig,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    i_last0: Option<&[f64]>,
    params: &PerturbParams,
    record_trace: bool,
) -> Result<PerturbedResult> {
    perturbed_run(net, Variant::Itipbpp, targets, schedule, init, None, i_last0, params, record_trace)
}

fn enumeration_guard(n_links: usize, frame_size: usize) -> Result<u32> {
    let bits = n_links * frame_size;
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::Unsupported(format!(
            "enumeration over 2^{bits} allocations exceeds 2^{MAX_ENUMERATION_BITS}"
        )));
    }
    Ok(bits as u32)
}

fn unsatisfied_mask(p: &PowerAllocation, net: &NetworkConfig, targets: &[f64], scratch: &mut [f64]) -> u32 {
    (0..net.n_links).fold(0, |acc, i| {
        if meets(link_rate_with_scratch(p, net, i, scratch), targets[i]) {
            acc
        } else {
            acc | 1 << i
        }
    })
}

/// First binary allocation (as a bit mask) that violates the unilateral
/// escape condition, if any.
pub fn find_a1_violation(
    net: &NetworkConfig,
    targets: &[f64],
    frame_size: usize,
    exec: Execution,
) -> Result<Option<u64>> {
    net.validate()?;
    check_targets(net, targets)?;
    let bits = enumeration_guard(net.n_links, frame_size)?;
    let n = net.n_links;
    let all = (1u32 << n) - 1;
    let full = vec![net.p_max; frame_size];
    let violates = |mask: u64| {
        let mut scratch = vec![0.0; frame_size];
        let p = PowerAllocation::from_mask(mask, n, frame_size, net.p_max);
        let unsat = unsatisfied_mask(&p, net, targets, &mut scratch);
        if unsat == 0 || unsat == all {
            return false;
        }
        let mut boosted = p.clone();
        for i in (0..n).filter(|&i| unsat >> i & 1 == 1) {
            let mut solo = p.clone();
            solo.set_row(i, &full);
            if meets(link_rate_with_scratch(&solo, net, i, &mut scratch), targets[i]) {
                return false;
            }
            boosted.set_row(i, &full);
        }
        let after = unsatisfied_mask(&boosted, net, targets, &mut scratch);
        let strictly_grows = after & unsat == unsat && after != unsat;
        !strictly_grows
    };
    let found = exec.filter_map(1u64 << bits, |mask| violates(mask).then_some(mask));
    Ok(found.into_iter().next())
}

/// For every binary allocation with a proper nonempty unsatisfied set,
/// either some unsatisfied link can satisfy itself at full power, or all
/// unsatisfied links at full power unsatisfy another link.
pub fn check_a1(net: &NetworkConfig, targets: &[f64], frame_size: usize) -> Result<bool> {
    check_a1_with(net, targets, frame_size, Execution::default())
}

pub fn check_a1_with(net: &NetworkConfig, targets: &[f64], frame_size: usize, exec: Execution) -> Result<bool> {
    Ok(find_a1_violation(net, targets, frame_size, exec)?.is_none())
}

/// Every proper nonempty set `U` of transmitters is heard by some receiver
/// outside it: `M P_max sum_{i in U} g_ij > delta` for some `j` not in `U`.
pub fn check_a2(net: &NetworkConfig, delta: f64, frame_size: usize) -> Result<bool> {
    net.validate()?;
    let n = net.n_links;
    if n > MAX_ENUMERATION_BITS {
        return Err(Error::Unsupported(format!(
            "subset enumeration over {n} links exceeds {MAX_ENUMERATION_BITS}"
        )));
    }
    let scale = frame_size as f64 * net.p_max;
    let all = (1u32 << n) - 1;
    Ok((1..all).all(|set| {
        (0..n).filter(|&j| set >> j & 1 == 0).any(|j| {
            let heard: f64 = (0..n).filter(|&i| set >> i & 1 == 1).map(|i| net.gain(i, j)).sum();
            scale * heard > delta
        })
    }))
}
