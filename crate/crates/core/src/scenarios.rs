//! Reference networks used by the tests, the acceptance suite and the CLI.

use crate::sinr::{link_rates, NetworkConfig, PowerAllocation};

/// Two links, every gain 1, `N0 = 0.1`, `P_max = 1`.
pub fn two_link_symmetric() -> NetworkConfig {
    NetworkConfig::uniform(2, 1.0, 0.1, 1.0).expect("valid network")
}

/// Two links with a very strong first link: `g11 = 2000`, `g12 = g21 = 0.4`,
/// `g22 = 0.6`, `N0 = 0.1`, `P_max = 1`.
pub fn two_link_asymmetric() -> NetworkConfig {
    NetworkConfig::new(vec![vec![2000.0, 0.4], vec![0.4, 0.6]], 0.1, 1.0, 1.0).expect("valid network")
}

/// Cross gain from the far transmitter (link 2) to links 0 and 1.
pub const AP_WEAK_GAIN: f64 = 0.5;
/// Cross gain from the near transmitters (links 0, 1) to link 2.
pub const AP_STRONG_GAIN: f64 = 60.0;
/// Noise floor of the access-point instance. At `P_max / N0 = 1` two links
/// sharing two slots beat one link alone in one slot, which is what makes
/// the shared allocation the only feasible one.
pub const AP_NOISE: f64 = 1.0;
/// Frame size of the access-point instance.
pub const AP_FRAME: usize = 3;
/// Scale applied to the reference rates to obtain the targets.
pub const AP_TARGET_SCALE: f64 = 0.99;

/// Three links where transmitters 0 and 1 swamp link 2 and link 2 barely
/// disturbs them.
pub fn access_point_with_noise(noise: f64) -> NetworkConfig {
    let mut gains = vec![vec![1.0; 3]; 3];
    gains[0][2] = AP_STRONG_GAIN;
    gains[1][2] = AP_STRONG_GAIN;
    gains[2][0] = AP_WEAK_GAIN;
    gains[2][1] = AP_WEAK_GAIN;
    NetworkConfig::new(gains, noise, 1.0, 1.0).expect("valid network")
}

pub fn access_point() -> NetworkConfig {
    access_point_with_noise(AP_NOISE)
}

/// Links 0 and 1 share slots 0 and 1, link 2 is alone in slot 2.
pub fn access_point_reference_allocation(p_max: f64) -> PowerAllocation {
    PowerAllocation::from_rows(vec![
        vec![p_max, p_max, 0.0],
        vec![p_max, p_max, 0.0],
        vec![0.0, 0.0, p_max],
    ])
    .expect("valid allocation")
}

/// Rates of the reference allocation scaled by [`AP_TARGET_SCALE`].
pub fn access_point_targets(net: &NetworkConfig) -> Vec<f64> {
    link_rates(&access_point_reference_allocation(net.p_max), net)
        .iter()
        .map(|r| r * AP_TARGET_SCALE)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_targets_at_low_noise() {
        let net = access_point_with_noise(0.1);
        let t = access_point_targets(&net);
        assert!((t[2] - 0.99 * 11f64.ln() / 3.0).abs() < 1e-12);
        assert!((t[2] - 0.791).abs() < 1e-3);
        assert!((t[0] - 0.99 * 2.0 / 3.0 * (1.0 + 1.0 / 1.1f64).ln()).abs() < 1e-12);
        assert!((t[0] - 0.427).abs() < 1e-3);
    }

    #[test]
    fn ap_default_needs_shared_slots() {
        let net = access_point();
        let t = access_point_targets(&net);
        // one clean slot is not enough for links 0 and 1
        assert!(net.rate_ceiling(0) / 3.0 < t[0]);
        // link 2 cannot tolerate either near transmitter
        assert!((1.0 / (net.noise + AP_STRONG_GAIN)).ln_1p() < t[2]);
    }
}
