//! Resonant closed forms from the rotating-wave treatment of the Floquet
//! problem: detuning extraction, effective Rabi frequencies, the
//! second-order frequency shift of the inversion channel, and Lorentzian
//! averaged-probability profiles.
//!
//! Near an isolated multiphoton resonance the averaged transition
//! probability is a Lorentzian of the channel detuning,
//!
//! ```text
//! Pbar(delta) = (1/2) / (1 + ((delta - delta0) / (2 Omega0))^2),
//! ```
//!
//! peaking at 1/2 with half width at half maximum `2 |Omega0|`. The
//! single-flip channels (`1->2`, `1->3`) carry `Omega0 = (delta_q/2)
//! J_K(A/w)` and no shift; the inversion channel (`1->4`) has a
//! Bessel-product Rabi frequency proportional to `g delta_1 delta_2` and a
//! nonzero center shift `delta0`. A drive amplitude sitting on a zero of the
//! relevant Bessel factor suppresses the channel entirely (coherent
//! destruction of tunneling).

use thiserror::Error;

use crate::model::{Drive, Qubit, SystemParams};
use crate::numerics::bessel::bessel_j;

#[derive(Debug, Error)]
pub enum RwaError {
    #[error("pole in the inversion-channel sums: (eps{qubit} + k w)^2 - g^2 = {value:.3e} at k = {k}")]
    PoleProximity { qubit: usize, k: i64, value: f64 },
    #[error("harmonic cutoff must be positive, got {0}")]
    BadCutoff(i64),
}

/// Resonant channel family out of the ground state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// Flip of qubit 2: detuning built from `eps2 + g`.
    OneToTwo,
    /// Flip of qubit 1: detuning built from `eps1 + g`.
    OneToThree,
    /// Simultaneous flip of both: detuning built from `eps1 + eps2`.
    OneToFour,
}

/// A resonant channel: photon index, detuning and Lorentzian parameters.
#[derive(Clone, Copy, Debug)]
pub struct ResonantChannel {
    pub kind: ChannelKind,
    /// Photon index `K` minimizing the detuning magnitude.
    pub k: i64,
    /// Detuning `value + K w`, folded into `[-w/2, w/2)`.
    pub delta: f64,
    /// Effective Rabi frequency.
    pub omega0: f64,
    /// Center shift (zero for the single-flip channels).
    pub delta0: f64,
}

/// Split `value` into the nearest-harmonic photon index and residual
/// detuning: `K = -round(value/w)`, `delta = value + K w` in `[-w/2, w/2)`.
/// Exact half-integer ties round toward even, except where that would land
/// the detuning on the excluded `+w/2` endpoint.
pub fn detuning(value: f64, omega: f64) -> (i64, f64) {
    let mut k = -(value / omega).round_ties_even();
    let mut delta = value + k * omega;
    if delta >= omega / 2.0 {
        k -= 1.0;
        delta = value + k * omega;
    } else if delta < -omega / 2.0 {
        k += 1.0;
        delta = value + k * omega;
    }
    (k as i64, delta)
}

/// Effective Rabi frequency of a single-flip channel at its nearest
/// harmonic: `(delta_q / 2) J_K(A/w)`.
pub fn rabi_two_level(kind: ChannelKind, p: &SystemParams, d: &Drive) -> f64 {
    let (q, bias) = match kind {
        ChannelKind::OneToTwo => (Qubit::Two, p.eps2),
        ChannelKind::OneToThree => (Qubit::One, p.eps1),
        ChannelKind::OneToFour => panic!("inversion channel has its own constructor"),
    };
    let (k, _) = detuning(bias + p.g, d.omega);
    0.5 * p.delta(q) * bessel_j(k, d.a_over_omega())
}

/// Single-flip resonant channel (`1->2` on qubit 2, `1->3` on qubit 1).
pub fn single_flip_channel(kind: ChannelKind, p: &SystemParams, d: &Drive) -> ResonantChannel {
    let bias = match kind {
        ChannelKind::OneToTwo => p.eps2,
        ChannelKind::OneToThree => p.eps1,
        ChannelKind::OneToFour => panic!("inversion channel has its own constructor"),
    };
    let (k, delta) = detuning(bias + p.g, d.omega);
    ResonantChannel { kind, k, delta, omega0: rabi_two_level(kind, p, d), delta0: 0.0 }
}

/// Photon index for the inversion channel: minimize `|eps1 + eps2 + K w|`,
/// ties broken toward smaller `|K|`.
pub fn inversion_photon_index(p: &SystemParams, d: &Drive) -> i64 {
    let (k, delta) = detuning(p.eps1 + p.eps2, d.omega);
    // A tie (|delta| = w/2) resolved to the larger |K| flips back here.
    if (delta.abs() - d.omega / 2.0).abs() < 1e-15 * d.omega {
        let k_alt = if delta > 0.0 { k + 1 } else { k - 1 };
        if k_alt.abs() < k.abs() {
            return k_alt;
        }
    }
    k
}

/// Rabi frequency and center shift of the inversion channel at photon index
/// `k12`:
///
/// ```text
/// delta0    = -(1/2) sum_k J_k^2 [ d1^2 (e1+kw)/((e1+kw)^2-g^2)
///                                 + d2^2 (e2+kw)/((e2+kw)^2-g^2) ]
/// Omega0(4) = (g d1 d2 / 4) sum_k J_k J_{K-k} [ 1/((e1+kw)^2-g^2)
///                                             + 1/((e2+kw)^2-g^2) ]
/// ```
pub fn rabi_inverse_channel(
    p: &SystemParams,
    d: &Drive,
    k12: i64,
    k_max: i64,
) -> Result<(f64, f64), RwaError> {
    if k_max < 1 {
        return Err(RwaError::BadCutoff(k_max));
    }
    let a = d.a_over_omega();
    let g2 = p.g * p.g;
    let mut delta0 = 0.0;
    let mut omega0 = 0.0;
    for k in -k_max..=k_max {
        let kw = k as f64 * d.omega;
        let den1 = (p.eps1 + kw) * (p.eps1 + kw) - g2;
        let den2 = (p.eps2 + kw) * (p.eps2 + kw) - g2;
        if den1.abs() < 1e-9 {
            return Err(RwaError::PoleProximity { qubit: 1, k, value: den1 });
        }
        if den2.abs() < 1e-9 {
            return Err(RwaError::PoleProximity { qubit: 2, k, value: den2 });
        }
        let jk = bessel_j(k, a);
        let jk2 = jk * jk;
        delta0 -= 0.5
            * jk2
            * (p.delta1 * p.delta1 * (p.eps1 + kw) / den1
                + p.delta2 * p.delta2 * (p.eps2 + kw) / den2);
        omega0 += jk * bessel_j(k12 - k, a) * (1.0 / den1 + 1.0 / den2);
    }
    omega0 *= p.g * p.delta1 * p.delta2 / 4.0;
    Ok((omega0, delta0))
}

/// Inversion channel (`1->4`) at the nearest harmonic of `eps1 + eps2`.
pub fn inversion_channel(
    p: &SystemParams,
    d: &Drive,
    k_max: i64,
) -> Result<ResonantChannel, RwaError> {
    let k = inversion_photon_index(p, d);
    let delta = p.eps1 + p.eps2 + k as f64 * d.omega;
    let (omega0, delta0) = rabi_inverse_channel(p, d, k, k_max)?;
    Ok(ResonantChannel { kind: ChannelKind::OneToFour, k, delta, omega0, delta0 })
}

/// Averaged-probability profile of a resonant channel.
#[derive(Clone, Copy, Debug)]
pub enum Profile {
    /// `0.5 / (1 + ((delta - delta0)/(2 omega0))^2)`
    Lorentzian { omega0: f64, delta0: f64 },
    /// Suppressed channel (`Omega0 = 0`, coherent destruction of tunneling).
    Zero,
}

impl Profile {
    pub fn evaluate(&self, delta: f64) -> f64 {
        match *self {
            Profile::Lorentzian { omega0, delta0 } => {
                let x = (delta - delta0) / (2.0 * omega0);
                0.5 / (1.0 + x * x)
            }
            Profile::Zero => 0.0,
        }
    }

    /// Half width at half maximum in the detuning variable.
    pub fn hwhm(&self) -> f64 {
        match *self {
            Profile::Lorentzian { omega0, .. } => 2.0 * omega0.abs(),
            Profile::Zero => 0.0,
        }
    }
}

/// The Lorentzian profile of a channel, degenerate to an explicit zero
/// marker when the Rabi frequency vanishes.
pub fn lorentzian_profile(channel: &ResonantChannel) -> Profile {
    if channel.omega0 == 0.0 {
        Profile::Zero
    } else {
        Profile::Lorentzian { omega0: channel.omega0, delta0: channel.delta0 }
    }
}

/// RWA prediction of the channel's averaged probability at its current
/// detuning.
pub fn channel_probability(channel: &ResonantChannel) -> f64 {
    lorentzian_profile(channel).evaluate(channel.delta)
}
