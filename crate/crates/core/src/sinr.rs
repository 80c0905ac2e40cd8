//! SINR arithmetic: channel gains, per-slot interference and frame-averaged
//! link rates.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every rate comparison (rates are O(1) here).
pub const RATE_TOL: f64 = 1e-9;

/// `true` when `rate` meets `target` up to [`RATE_TOL`].
#[inline]
pub fn meets(rate: f64, target: f64) -> bool {
    rate + RATE_TOL >= target
}

/// Increasing concave rate function `f` mapping SINR to rate, together with
/// its inverse. Everything downstream is written against this trait; only
/// [`Shannon`] ships.
pub trait RateFunction {
    fn rate(&self, sinr: f64) -> f64;
    fn inverse(&self, rate: f64) -> f64;
}

/// `f(x) = W ln(1 + x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shannon {
    pub bandwidth: f64,
}

impl RateFunction for Shannon {
    #[inline]
    fn rate(&self, sinr: f64) -> f64 {
        self.bandwidth * sinr.ln_1p()
    }

    #[inline]
    fn inverse(&self, rate: f64) -> f64 {
        (rate / self.bandwidth).exp_m1()
    }
}

pub fn shannon_rate(sinr: f64, w: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("sinr must be nonnegative, got {sinr}")));
    }
    if !(w > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {w}")));
    }
    Ok(Shannon { bandwidth: w }.rate(sinr))
}

pub fn shannon_rate_inverse(rate: f64, w: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::Domain(format!("rate must be nonnegative, got {rate}")));
    }
    if !(w > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {w}")));
    }
    Ok(Shannon { bandwidth: w }.inverse(rate))
}

fn default_bandwidth() -> f64 {
    1.0
}

/// Static description of the links: gains, noise floor, power cap.
///
/// `gains[j][i]` is the channel gain from transmitter `j` to receiver `i`,
/// which is also the JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_links: usize,
    pub gains: Vec<Vec<f64>>,
    pub noise: f64,
    pub p_max: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
}

impl NetworkConfig {
    pub fn new(gains: Vec<Vec<f64>>, noise: f64, p_max: f64, bandwidth: f64) -> Result<Self> {
        let net = Self {
            n_links: gains.len(),
            gains,
            noise,
            p_max,
            bandwidth,
        };
        net.validate()?;
        Ok(net)
    }

    /// Network where every gain (direct and cross) equals `gain`.
    pub fn uniform(n_links: usize, gain: f64, noise: f64, p_max: f64) -> Result<Self> {
        Self::new(vec![vec![gain; n_links]; n_links], noise, p_max, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_links;
        if n == 0 {
            return Err(Error::InvalidNetwork("n_links must be positive".into()));
        }
        if self.gains.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.gains.len(),
            });
        }
        for (j, row) in self.gains.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (i, &g) in row.iter().enumerate() {
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "gain g[{j}][{i}] = {g} must be finite and nonnegative"
                    )));
                }
            }
            if !(row[j] > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "direct gain g[{j}][{j}] must be positive"
                )));
            }
        }
        for (name, v) in [
            ("noise", self.noise),
            ("p_max", self.p_max),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Gain from transmitter `tx` to receiver `rx`.
    #[inline]
    pub fn gain(&self, tx: usize, rx: usize) -> f64 {
        self.gains[tx][rx]
    }

    #[inline]
    pub fn own_gain(&self, i: usize) -> f64 {
        self.gains[i][i]
    }

    pub fn rate_fn(&self) -> Shannon {
        Shannon {
            bandwidth: self.bandwidth,
        }
    }

    /// Zero-interference full-power rate of link `i`.
    pub fn rate_ceiling(&self, i: usize) -> f64 {
        self.rate_fn().rate(self.p_max * self.own_gain(i) / self.noise)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)
            .map_err(|e| Error::InvalidNetwork(format!("malformed JSON: {e}")))?;
        net.validate()?;
        Ok(net)
    }

    pub(crate) fn check_link(&self, i: usize) -> Result<()> {
        if i >= self.n_links {
            return Err(Error::LinkOutOfRange {
                index: i,
                n_links: self.n_links,
            });
        }
        Ok(())
    }
}

/// Per-link, per-slot transmit powers. Row `i` is link `i`'s power over the
/// `frame_size` slots of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    n_links: usize,
    frame_size: usize,
    powers: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(n_links: usize, frame_size: usize) -> Self {
        assert!(frame_size > 0, "frame size must be positive");
        Self {
            n_links,
            frame_size,
            powers: vec![0.0; n_links * frame_size],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_links = rows.len();
        let frame_size = rows.first().map_or(0, Vec::len);
        if frame_size == 0 {
            return Err(Error::InvalidParameter("frame size must be positive".into()));
        }
        let mut powers = Vec::with_capacity(n_links * frame_size);
        for row in rows {
            if row.len() != frame_size {
                return Err(Error::DimensionMismatch {
                    expected: frame_size,
                    got: row.len(),
                });
            }
            powers.extend(row);
        }
        Ok(Self {
            n_links,
            frame_size,
            powers,
        })
    }

    /// Rows taken from a bit mask: bit `i * frame_size + m` set means link `i`
    /// transmits at `p_max` in slot `m`.
    pub fn from_mask(mask: u64, n_links: usize, frame_size: usize, p_max: f64) -> Self {
        let mut p = Self::zeros(n_links, frame_size);
        for (k, v) in p.powers.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                *v = p_max;
            }
        }
        p
    }

    #[inline]
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    #[inline]
    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    #[inline]
    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.powers[i * self.frame_size + m]
    }

    #[inline]
    pub fn set(&mut self, i: usize, m: usize, v: f64) {
        self.powers[i * self.frame_size + m] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.powers[i * self.frame_size..(i + 1) * self.frame_size]
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        self.powers[i * self.frame_size..(i + 1) * self.frame_size].copy_from_slice(row);
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.powers
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.powers.chunks(self.frame_size).map(<[f64]>::to_vec).collect()
    }

    pub fn is_binary(&self, p_max: f64) -> bool {
        self.powers.iter().all(|&v| v == 0.0 || v == p_max)
    }

    /// Checks shape against `net` and the `[0, p_max]` box.
    pub fn check(&self, net: &NetworkConfig) -> Result<()> {
        if self.n_links != net.n_links {
            return Err(Error::DimensionMismatch {
                expected: net.n_links,
                got: self.n_links,
            });
        }
        if let Some(v) = self
            .powers
            .iter()
            .find(|&&v| !(0.0..=net.p_max).contains(&v))
        {
            return Err(Error::InvalidParameter(format!(
                "power {v} outside [0, {}]",
                net.p_max
            )));
        }
        Ok(())
    }
}

/// Frame-averaged rate per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Coordinate-wise `self >= other` up to [`RATE_TOL`].
    pub fn dominates(&self, other: &[f64]) -> bool {
        self.0.len() == other.len() && self.0.iter().zip(other).all(|(&a, &b)| meets(a, b))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Writes `N0 + sum_{j != i} g_ji p_jm` for every slot into `out`.
pub(crate) fn interference_into(p: &PowerAllocation, net: &NetworkConfig, i: usize, out: &mut [f64]) {
    out.fill(net.noise);
    for j in (0..p.n_links()).filter(|&j| j != i) {
        let g = net.gain(j, i);
        if g == 0.0 {
            continue;
        }
        for (o, &pw) in out.iter_mut().zip(p.row(j)) {
            *o += g * pw;
        }
    }
}

/// Interference (noise included) seen by receiver `i` in each slot.
pub fn interference(p: &PowerAllocation, net: &NetworkConfig, i: usize) -> Result<Vec<f64>> {
    net.check_link(i)?;
    if p.n_links() != net.n_links {
        return Err(Error::DimensionMismatch {
            expected: net.n_links,
            got: p.n_links(),
        });
    }
    let mut out = vec![0.0; p.frame_size()];
    interference_into(p, net, i, &mut out);
    Ok(out)
}

/// Rate of a link from its own row and the interference it perceives.
pub fn link_rate_given_interference<F: RateFunction>(
    f: &F,
    own_gain: f64,
    row: &[f64],
    interference: &[f64],
) -> f64 {
    let total: f64 = row
        .iter()
        .zip(interference)
        .map(|(&pw, &int)| f.rate(own_gain * pw / int))
        .sum();
    total / row.len() as f64
}

/// Frame-averaged rate of link `i`.
pub fn link_rate(p: &PowerAllocation, net: &NetworkConfig, i: usize) -> f64 {
    let mut scratch = vec![0.0; p.frame_size()];
    link_rate_with_scratch(p, net, i, &mut scratch)
}

pub(crate) fn link_rate_with_scratch(
    p: &PowerAllocation,
    net: &NetworkConfig,
    i: usize,
    scratch: &mut [f64],
) -> f64 {
    interference_into(p, net, i, scratch);
    link_rate_given_interference(&net.rate_fn(), net.own_gain(i), p.row(i), scratch)
}

pub fn link_rates_with<F: RateFunction>(p: &PowerAllocation, net: &NetworkConfig, f: &F) -> RateVector {
    let mut scratch = vec![0.0; p.frame_size()];
    let rates = (0..net.n_links)
        .map(|i| {
            interference_into(p, net, i, &mut scratch);
            link_rate_given_interference(f, net.own_gain(i), p.row(i), &scratch)
        })
        .collect();
    RateVector(rates)
}

pub fn link_rates(p: &PowerAllocation, net: &NetworkConfig) -> RateVector {
    link_rates_with(p, net, &net.rate_fn())
}
