//! Power packing: a transmitter's response to the interference it measures.
//!
//! Both rules fill slots in increasing order of interference until the
//! target rate is met. PP tops up the last slot with just enough power;
//! BPP uses full power on it.

use crate::error::{Error, Result};
use crate::sinr::{self, link_rate_given_interference, meets, NetworkConfig, PowerAllocation, RateFunction, Shannon};

/// What link `i`'s transmitter knows when it updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkView {
    pub own_gain: f64,
    pub target: f64,
    pub interference: Vec<f64>,
    pub p_max: f64,
    pub bandwidth: f64,
}

impl LinkView {
    /// View of link `i` against the other rows of `p`.
    pub fn observe(p: &PowerAllocation, net: &NetworkConfig, i: usize, target: f64) -> Result<Self> {
        Ok(Self {
            own_gain: net.own_gain(i),
            target,
            interference: sinr::interference(p, net, i)?,
            p_max: net.p_max,
            bandwidth: net.bandwidth,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.interference.is_empty() {
            return Err(Error::InvalidParameter("empty frame".into()));
        }
        if !(self.target >= 0.0) {
            return Err(Error::InvalidParameter(format!("target {} < 0", self.target)));
        }
        if self.interference.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("interference must be positive".into()));
        }
        if !(self.own_gain > 0.0 && self.p_max > 0.0 && self.bandwidth > 0.0) {
            return Err(Error::InvalidParameter("gain, p_max and bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_size(&self) -> usize {
        self.interference.len()
    }

    fn rate_fn(&self) -> Shannon {
        Shannon {
            bandwidth: self.bandwidth,
        }
    }

    /// Rate this link gets from `row` under the observed interference.
    pub fn rate_of(&self, row: &[f64]) -> f64 {
        link_rate_given_interference(&self.rate_fn(), self.own_gain, row, &self.interference)
    }

    /// Slots sorted by increasing interference, ties by slot index.
    pub fn slot_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.interference.len()).collect();
        order.sort_by(|&a, &b| self.interference[a].total_cmp(&self.interference[b]));
        order
    }
}

/// Outcome of the packing computation shared by PP and BPP.
struct Packing {
    order: Vec<usize>,
    /// Number of slots needed, or `None` when the target is unreachable
    /// (or zero).
    slots: Option<usize>,
    /// Rate accumulated by the full-power slots before the last one.
    rate_before_last: f64,
}

fn pack(view: &LinkView) -> Packing {
    let f = view.rate_fn();
    let m = view.frame_size() as f64;
    let order = view.slot_order();
    if view.target <= 0.0 {
        return Packing {
            order,
            slots: None,
            rate_before_last: 0.0,
        };
    }
    let mut acc = 0.0;
    for (k, &slot) in order.iter().enumerate() {
        let slot_rate = f.rate(view.p_max * view.own_gain / view.interference[slot]) / m;
        if meets(acc + slot_rate, view.target) {
            return Packing {
                order,
                slots: Some(k + 1),
                rate_before_last: acc,
            };
        }
        acc += slot_rate;
    }
    Packing {
        order,
        slots: None,
        rate_before_last: acc,
    }
}

/// PP: full power on the least-interfered slots, a fractional power on the
/// last one so the target is met exactly. All zeros if the target is zero or
/// out of reach even at full power everywhere.
pub fn pp_allocate(view: &LinkView) -> Vec<f64> {
    let mut row = vec![0.0; view.frame_size()];
    let packing = pack(view);
    let Some(used) = packing.slots else {
        return row;
    };
    let f = view.rate_fn();
    let m = view.frame_size() as f64;
    for &slot in &packing.order[..used - 1] {
        row[slot] = view.p_max;
    }
    let last = packing.order[used - 1];
    let missing = ((view.target - packing.rate_before_last) * m).max(0.0);
    let power = f.inverse(missing) * view.interference[last] / view.own_gain;
    row[last] = power.clamp(0.0, view.p_max);
    row
}

/// BPP: full power on the least-interfered slots until the target is met.
pub fn bpp_allocate(view: &LinkView) -> Vec<f64> {
    let mut row = vec![0.0; view.frame_size()];
    let packing = pack(view);
    if let Some(used) = packing.slots {
        for &slot in &packing.order[..used] {
            row[slot] = view.p_max;
        }
    }
    row
}

/// The constant `C` of the game utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    pub c: f64,
}

impl UtilityParams {
    /// Requires `C > M P_max g_ii / N0` for every link.
    pub fn new(c: f64, net: &NetworkConfig, frame_size: usize) -> Result<Self> {
        let bound = Self::bound(net, frame_size);
        if !(c > bound) {
            return Err(Error::InvalidParameter(format!(
                "utility constant {c} must exceed {bound}"
            )));
        }
        Ok(Self { c })
    }

    /// `1 + M P_max max_i(g_ii) / N0`.
    pub fn for_network(net: &NetworkConfig, frame_size: usize) -> Self {
        Self {
            c: 1.0 + Self::bound(net, frame_size),
        }
    }

    fn bound(net: &NetworkConfig, frame_size: usize) -> f64 {
        let g = (0..net.n_links).map(|i| net.own_gain(i)).fold(0.0, f64::max);
        frame_size as f64 * net.p_max * g / net.noise
    }
}

/// `C [R_i(p) >= target] - sum_m p_im g_ii / I_im(p)`.
pub fn utility(
    p: &PowerAllocation,
    i: usize,
    target: f64,
    net: &NetworkConfig,
    params: UtilityParams,
) -> Result<f64> {
    let view = LinkView::observe(p, net, i, target)?;
    Ok(utility_of_row(&view, p.row(i), params))
}

/// Utility of playing `row` against the interference in `view`.
pub fn utility_of_row(view: &LinkView, row: &[f64], params: UtilityParams) -> f64 {
    let reward = if meets(view.rate_of(row), view.target) {
        params.c
    } else {
        0.0
    };
    let penalty: f64 = row
        .iter()
        .zip(&view.interference)
        .map(|(&pw, &int)| pw * view.own_gain / int)
        .sum();
    reward - penalty
}

/// Number of slots with strictly positive power.
pub fn slots_used(row: &[f64]) -> usize {
    row.iter().filter(|&&v| v > 0.0).count()
}
