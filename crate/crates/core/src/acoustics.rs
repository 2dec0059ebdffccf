//! Closed-form underwater acoustic channel.
//!
//! Spreading plus Thorp absorption for path loss, the four-source ambient
//! noise model (turbulence, shipping, wind, thermal), the eavesdropper SNR
//! and the KL-divergence covertness test built on it.
//!
//! Units: distances in meters, frequency in kHz, bandwidth in Hz, powers in
//! watts. Noise is in normalized units; `noise_offset_db` sets the reference
//! level so that received powers and noise are comparable.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticParams {
    /// Carrier frequency (kHz).
    pub frequency_khz: f64,
    /// Spreading exponent k.
    pub spreading: f64,
    /// Bandwidth (Hz).
    pub bandwidth_hz: f64,
    /// Shipping activity factor s in [0, 1].
    pub shipping: f64,
    /// Wind speed (m/s).
    pub wind_speed: f64,
    /// Reference level of the noise PSD, added to every component (dB).
    pub noise_offset_db: f64,
}

impl Default for AcousticParams {
    fn default() -> Self {
        Self {
            frequency_khz: 30.0,
            spreading: 1.5,
            bandwidth_hz: 10.0e6,
            shipping: 0.5,
            wind_speed: 5.0,
            noise_offset_db: -138.8,
        }
    }
}

impl AcousticParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.frequency_khz > 0.0) {
            return Err(DomainError::range("frequency_khz", "> 0", self.frequency_khz));
        }
        if !(1.0..=2.0).contains(&self.spreading) {
            return Err(DomainError::range("spreading", "in [1, 2]", self.spreading));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(DomainError::range("bandwidth_hz", "> 0", self.bandwidth_hz));
        }
        if !(0.0..=1.0).contains(&self.shipping) {
            return Err(DomainError::range("shipping", "in [0, 1]", self.shipping));
        }
        if !(self.wind_speed >= 0.0) {
            return Err(DomainError::range("wind_speed", ">= 0", self.wind_speed));
        }
        if !self.noise_offset_db.is_finite() {
            return Err(DomainError::range("noise_offset_db", "finite", self.noise_offset_db));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovertnessParams {
    pub epsilon_c: f64,
}

impl Default for CovertnessParams {
    fn default() -> Self {
        Self { epsilon_c: 0.05 }
    }
}

impl CovertnessParams {
    /// Largest admissible KL divergence, 2·ε_c².
    pub fn kl_budget(&self) -> f64 {
        2.0 * self.epsilon_c * self.epsilon_c
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.epsilon_c > 0.0) {
            return Err(DomainError::range("epsilon_c", "> 0", self.epsilon_c));
        }
        Ok(())
    }
}

/// Thorp absorption coefficient in dB/km for a frequency in kHz.
pub fn thorp_absorption(f_khz: f64) -> Result<f64, DomainError> {
    if !(f_khz > 0.0) {
        return Err(DomainError::range("frequency", "> 0 kHz", f_khz));
    }
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Linear attenuation A(f, d) = d^k · 10^(α·d/10), with α converted to dB/m.
pub fn path_loss(d: f64, p: &AcousticParams) -> Result<f64, DomainError> {
    if !(d > 0.0) {
        return Err(DomainError::range("distance", "> 0 m", d));
    }
    let alpha_db_per_m = thorp_absorption(p.frequency_khz)? / 1000.0;
    Ok(d.powf(p.spreading) * 10f64.powf(alpha_db_per_m * d / 10.0))
}

pub fn channel_gain(d: f64, p: &AcousticParams) -> Result<f64, DomainError> {
    Ok(1.0 / path_loss(d, p)?)
}

/// The four ambient-noise PSD components at one frequency, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponents {
    pub turbulence_db: f64,
    pub shipping_db: f64,
    pub wind_db: f64,
    pub thermal_db: f64,
}

impl NoiseComponents {
    pub fn at(f_khz: f64, shipping: f64, wind_speed: f64) -> Self {
        let lg = f64::log10;
        Self {
            turbulence_db: 17.0 - 30.0 * lg(f_khz),
            shipping_db: 30.0 + 20.0 * shipping + 26.0 * lg(f_khz) - 60.0 * lg(f_khz + 0.03),
            wind_db: 50.0 + 7.5 * wind_speed.sqrt() + 20.0 * lg(f_khz) - 40.0 * lg(f_khz + 0.4),
            thermal_db: -15.0 + 20.0 * lg(f_khz),
        }
    }

    /// Sum of the components in the linear domain.
    pub fn total_linear(&self) -> f64 {
        [self.turbulence_db, self.shipping_db, self.wind_db, self.thermal_db]
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .sum()
    }
}

/// In-band noise power: flat PSD at the carrier times the bandwidth, shifted
/// by the configured reference level.
pub fn noise_power(p: &AcousticParams) -> f64 {
    let psd = NoiseComponents::at(p.frequency_khz, p.shipping, p.wind_speed).total_linear();
    psd * p.bandwidth_hz * 10f64.powf(p.noise_offset_db / 10.0)
}

/// SNR at the eavesdropper from every selected transmitter (incoherent sum).
pub fn eavesdropper_snr(
    selection: &[bool],
    powers: &[f64],
    eav_distances: &[f64],
    p: &AcousticParams,
) -> Result<f64, DomainError> {
    if powers.len() != selection.len() {
        return Err(DomainError::LengthMismatch {
            what: "powers vs selection",
            expected: selection.len(),
            got: powers.len(),
        });
    }
    if eav_distances.len() != selection.len() {
        return Err(DomainError::LengthMismatch {
            what: "distances vs selection",
            expected: selection.len(),
            got: eav_distances.len(),
        });
    }
    let noise = noise_power(p);
    let mut gamma = 0.0;
    for ((&sel, &power), &d) in selection.iter().zip(powers).zip(eav_distances) {
        if !sel {
            continue;
        }
        let gain = channel_gain(d, p)?;
        gamma += power * gain / noise;
    }
    Ok(gamma)
}

/// Rate of one AUV's orthogonal sub-channel to the central AUV (bits/s). The
/// band is split equally between `active_count` transmitters.
pub fn link_rate(
    power: f64,
    d_nc: f64,
    active_count: usize,
    p: &AcousticParams,
) -> Result<f64, DomainError> {
    if active_count == 0 {
        return Err(DomainError::range("active_count", ">= 1", 0.0));
    }
    if !(power >= 0.0) {
        return Err(DomainError::range("power", ">= 0 W", power));
    }
    let share = 1.0 / active_count as f64;
    let snr = power * channel_gain(d_nc, p)? / (noise_power(p) * share);
    Ok(p.bandwidth_hz * share * (1.0 + snr).log2())
}

/// KL divergence D(P0 || P1) in nats as a function of the eavesdropper SNR.
pub fn kl_divergence(gamma_e: f64) -> Result<f64, DomainError> {
    if !(gamma_e >= 0.0) {
        return Err(DomainError::range("gamma_e", ">= 0", gamma_e));
    }
    if gamma_e < 1e-3 {
        // ln(1+x) - x/(1+x) = sum_{k>=2} (-1)^k (k-1)/k x^k; the direct form cancels badly here.
        let mut term = gamma_e * gamma_e;
        let mut acc = 0.0;
        for k in 2..12 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * (kf - 1.0) / kf * term;
            term *= gamma_e;
        }
        return Ok(0.5 * acc);
    }
    Ok(0.5 * (gamma_e.ln_1p() - gamma_e / (1.0 + gamma_e)))
}

pub fn covertness_satisfied(kl: f64, c: &CovertnessParams) -> bool {
    kl <= c.kl_budget()
}
