//! Two-link iterative power packing (IPP) and its binary variant (IBPP):
//! transmitters take turns playing their packing response.

use rand::Rng;

use crate::error::{Error, Result};
use crate::packing::{bpp_allocate, pp_allocate, LinkView};
use crate::schedule::UpdateSchedule;
use crate::sinr::{link_rates, meets, NetworkConfig, PowerAllocation, RateVector};
use crate::trace::{SimTrace, TraceRow};

/// Update budget used when none is given.
pub const DEFAULT_BUDGET: u64 = 10_000;

/// A row counts as unchanged when no entry moves by more than this times
/// `P_max`.
pub const CHANGE_TOL: f64 = 1e-12;

/// Relative tolerance used when classifying a power as `0` or `P_max`.
pub const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterOptions {
    pub budget: u64,
    pub record_trace: bool,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            record_trace: false,
        }
    }
}

impl IterOptions {
    pub fn with_budget(budget: u64) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    pub fn traced(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub converged: bool,
    pub final_allocation: PowerAllocation,
    pub final_rates: RateVector,
    pub updates_used: u64,
    pub trace: Option<SimTrace>,
}

pub(crate) fn check_targets(net: &NetworkConfig, targets: &[f64]) -> Result<()> {
    if targets.len() != net.n_links {
        return Err(Error::DimensionMismatch {
            expected: net.n_links,
            got: targets.len(),
        });
    }
    if let Some(t) = targets.iter().find(|&&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("target {t} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_two_links(net: &NetworkConfig) -> Result<()> {
    if net.n_links != 2 {
        return Err(Error::Unsupported(format!(
            "iterative power packing is defined for 2 links, got {}",
            net.n_links
        )));
    }
    Ok(())
}

pub(crate) fn satisfied_flags(rates: &[f64], targets: &[f64]) -> Vec<bool> {
    rates.iter().zip(targets).map(|(&r, &t)| meets(r, t)).collect()
}

fn row_changed(old: &[f64], new: &[f64], p_max: f64) -> bool {
    old.iter().zip(new).any(|(a, b)| (a - b).abs() > CHANGE_TOL * p_max)
}

/// Sequential best-response dynamics with an arbitrary response rule.
/// Stops once every link has been polled without any row changing since
/// the last change (a fixed point), or when the budget runs out.
pub fn best_response_run(
    net: &NetworkConfig,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    opts: &IterOptions,
    respond: impl Fn(&LinkView) -> Vec<f64>,
) -> Result<IterationResult> {
    net.validate()?;
    check_targets(net, targets)?;
    init.check(net)?;
    let n = net.n_links;
    let mut p = init.clone();
    let mut trace = opts.record_trace.then(|| SimTrace::new(n, p.frame_size()));
    let mut polled_quietly = vec![false; n];
    let mut quiet_count = 0;
    let mut updates = 0;
    let mut at_fixed_point = false;
    let mut seq = schedule.sequence(n);

    while updates < opts.budget {
        let i = seq.next().expect("schedules are infinite");
        let view = LinkView::observe(&p, net, i, targets[i])?;
        let new_row = respond(&view);
        updates += 1;
        if row_changed(p.row(i), &new_row, net.p_max) {
            p.set_row(i, &new_row);
            polled_quietly.fill(false);
            quiet_count = 0;
        }
        if !polled_quietly[i] {
            polled_quietly[i] = true;
            quiet_count += 1;
        }
        if let Some(trace) = trace.as_mut() {
            let rates = link_rates(&p, net);
            trace.push(TraceRow {
                t: updates,
                link: i,
                powers: p.as_flat().to_vec(),
                satisfied: satisfied_flags(&rates, targets),
                rates: rates.into_inner(),
                beta: None,
                i_last: None,
                branch: None,
            });
        }
        if quiet_count == n {
            at_fixed_point = true;
            break;
        }
    }

    let rates = link_rates(&p, net);
    let all_satisfied = satisfied_flags(&rates, targets).into_iter().all(|s| s);
    Ok(IterationResult {
        converged: at_fixed_point && all_satisfied,
        final_allocation: p,
        final_rates: rates,
        updates_used: updates,
        trace,
    })
}

/// IPP: transmitters alternate PP responses.
pub fn ipp_run(
    net: &NetworkConfig,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    opts: &IterOptions,
) -> Result<IterationResult> {
    check_two_links(net)?;
    best_response_run(net, targets, schedule, init, opts, pp_allocate)
}

/// IBPP: transmitters alternate BPP responses.
pub fn ibpp_run(
    net: &NetworkConfig,
    targets: &[f64],
    schedule: &UpdateSchedule,
    init: &PowerAllocation,
    opts: &IterOptions,
) -> Result<IterationResult> {
    check_two_links(net)?;
    best_response_run(net, targets, schedule, init, opts, bpp_allocate)
}

/// Whether a two-link allocation has the prefix/suffix structure: under some
/// slot order, link 0 is at `P_max` on a prefix and silent after at most one
/// boundary slot, and link 1 mirrors this from the end.
pub fn is_repulsive(p: &PowerAllocation, p_max: f64) -> Result<bool> {
    if p.n_links() != 2 {
        return Err(Error::Unsupported(format!(
            "repulsive allocations are defined for 2 links, got {}",
            p.n_links()
        )));
    }
    let is_full = |v: f64| (v - p_max).abs() <= LEVEL_TOL * p_max;
    let is_zero = |v: f64| v.abs() <= LEVEL_TOL * p_max;

    // A valid order has link 0 nonincreasing and link 1 nondecreasing, so the
    // lexicographic order below is valid whenever any order is.
    let mut slots: Vec<usize> = (0..p.frame_size()).collect();
    slots.sort_by(|&a, &b| {
        p.get(0, b)
            .total_cmp(&p.get(0, a))
            .then(p.get(1, a).total_cmp(&p.get(1, b)))
    });
    let first: Vec<f64> = slots.iter().map(|&m| p.get(0, m)).collect();
    let second: Vec<f64> = slots.iter().rev().map(|&m| p.get(1, m)).collect();

    let prefix_then_zero = |seq: &[f64]| {
        let k = seq.iter().position(|&v| !is_full(v)).unwrap_or(seq.len());
        seq.iter().skip(k + 1).all(|&v| is_zero(v))
    };
    Ok(prefix_then_zero(&first) && prefix_then_zero(&second))
}

/// Random repulsive allocation with slot order = identity: link 0 takes a
/// full prefix plus one fractional slot, link 1 a full suffix plus one
/// fractional slot; the two boundary slots may coincide.
pub fn sample_repulsive<R: Rng + ?Sized>(frame_size: usize, p_max: f64, rng: &mut R) -> PowerAllocation {
    let m = frame_size;
    let mut p = PowerAllocation::zeros(2, m);
    let full_first = rng.gen_range(0..=m);
    for slot in 0..full_first {
        p.set(0, slot, p_max);
    }
    if full_first == m {
        return p;
    }
    p.set(0, full_first, rng.gen_range(0.0..=p_max));
    let full_second = rng.gen_range(0..m - full_first);
    for slot in m - full_second..m {
        p.set(1, slot, p_max);
    }
    p.set(1, m - full_second - 1, rng.gen_range(0.0..=p_max));
    p
}

/// Uniform random allocation with every power in `[0, P_max]`.
pub fn random_allocation<R: Rng + ?Sized>(
    n_links: usize,
    frame_size: usize,
    p_max: f64,
    rng: &mut R,
) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(n_links, frame_size);
    for i in 0..n_links {
        for m in 0..frame_size {
            p.set(i, m, rng.gen_range(0.0..=p_max));
        }
    }
    p
}

/// `true` when no single link would change its row by playing `respond`.
pub fn is_nash_equilibrium(
    p: &PowerAllocation,
    net: &NetworkConfig,
    targets: &[f64],
    respond: impl Fn(&LinkView) -> Vec<f64>,
) -> Result<bool> {
    for i in 0..net.n_links {
        let view = LinkView::observe(p, net, i, targets[i])?;
        if row_changed(p.row(i), &respond(&view), net.p_max) {
            return Ok(false);
        }
    }
    Ok(true)
}
