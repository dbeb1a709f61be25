//! Radio-level primitives: log-distance channel gain and the energy of one
//! power-controlled packet transmission.
//!
//! A transmission of `K` bits in a slot of `T` seconds over bandwidth `B`
//! needs capacity `K/T`, so the transmit power solves
//! `B·log2(1 + P·g/(B·σ²))·T = K`. The energy `P·T` is then
//! `(1/g)·B·σ²·(2^(K/(B·T)) − 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a level in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Link parameters shared by every transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    bandwidth_hz: f64,
    slot_duration_s: f64,
    packet_bits: f64,
    noise_psd_dbm_hz: f64,
    noise_figure_db: f64,
    noise_power_density: f64,
}

impl RadioConfig {
    pub fn new(
        bandwidth_hz: f64,
        slot_duration_s: f64,
        packet_bits: f64,
        noise_psd_dbm_hz: f64,
        noise_figure_db: f64,
    ) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth_hz}")));
        }
        if !(slot_duration_s > 0.0 && slot_duration_s.is_finite()) {
            return Err(Error::Domain(format!(
                "slot duration must be positive, got {slot_duration_s}"
            )));
        }
        if !(packet_bits > 0.0 && packet_bits.is_finite()) {
            return Err(Error::Domain(format!("packet size must be positive, got {packet_bits}")));
        }
        if !noise_psd_dbm_hz.is_finite() || !noise_figure_db.is_finite() {
            return Err(Error::Domain("noise parameters must be finite".into()));
        }
        // The noise figure is a dimensionless ratio, so it adds in dB.
        let noise_power_density = db_to_linear(noise_psd_dbm_hz + noise_figure_db) * 1e-3;
        if !(noise_power_density > 0.0) {
            return Err(Error::Domain("noise power density underflows to zero".into()));
        }
        Ok(Self {
            bandwidth_hz,
            slot_duration_s,
            packet_bits,
            noise_psd_dbm_hz,
            noise_figure_db,
            noise_power_density,
        })
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_duration_s
    }

    pub fn packet_bits(&self) -> f64 {
        self.packet_bits
    }

    pub fn noise_psd_dbm_hz(&self) -> f64 {
        self.noise_psd_dbm_hz
    }

    pub fn noise_figure_db(&self) -> f64 {
        self.noise_figure_db
    }

    /// σ² in W/Hz.
    pub fn noise_power_density(&self) -> f64 {
        self.noise_power_density
    }

    /// Energy of a transmission over a unit-gain channel, `B·σ²·(2^(K/(B·T)) − 1)`.
    pub fn unit_gain_energy(&self) -> f64 {
        let spectral_efficiency = self.packet_bits / (self.bandwidth_hz * self.slot_duration_s);
        // 2^x − 1 without cancellation for small x.
        let growth = (spectral_efficiency * std::f64::consts::LN_2).exp_m1();
        self.bandwidth_hz * self.noise_power_density * growth
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self::new(1e6, 1.0, 1e6, -174.0, 11.0).expect("default radio parameters are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkType {
    D2d,
    I2d,
}

/// Log-distance attenuation for one link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkPathLoss {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub carrier_ghz: f64,
    /// Distances below this are clamped to it.
    pub reference_distance_m: f64,
}

impl LinkPathLoss {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_db_per_decade > 0.0) {
            return Err(Error::Domain("path-loss slope must be positive".into()));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(Error::Domain("carrier frequency must be positive".into()));
        }
        if !(self.reference_distance_m > 0.0) {
            return Err(Error::Domain("reference distance must be positive".into()));
        }
        if !self.intercept_db.is_finite() {
            return Err(Error::Domain("path-loss intercept must be finite".into()));
        }
        Ok(())
    }

    /// Path loss in dB at distance `r` (clamped below at the reference distance).
    pub fn path_loss_db(&self, r: f64) -> f64 {
        let d = r.max(self.reference_distance_m);
        self.intercept_db + self.slope_db_per_decade * d.log10() + 20.0 * self.carrier_ghz.log10()
    }

    pub fn gain(&self, r: f64) -> f64 {
        db_to_linear(-self.path_loss_db(r))
    }

    /// The distance exponent `slope/10`: beyond the reference distance the
    /// inverse gain grows as `r^exponent`.
    pub fn distance_exponent(&self) -> f64 {
        self.slope_db_per_decade / 10.0
    }
}

/// Per-link-type path-loss configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub d2d: LinkPathLoss,
    pub i2d: LinkPathLoss,
}

impl PathLossModel {
    pub fn link(&self, link: LinkType) -> &LinkPathLoss {
        match link {
            LinkType::D2d => &self.d2d,
            LinkType::I2d => &self.i2d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.d2d.validate()?;
        self.i2d.validate()
    }
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            d2d: LinkPathLoss {
                intercept_db: 28.0,
                slope_db_per_decade: 22.7,
                carrier_ghz: 2.0,
                reference_distance_m: 1.0,
            },
            i2d: LinkPathLoss {
                intercept_db: 28.0,
                slope_db_per_decade: 22.0,
                carrier_ghz: 2.0,
                reference_distance_m: 1.0,
            },
        }
    }
}

/// Channel gain (inverse path loss) of a `link` at distance `r` meters.
pub fn channel_gain(model: &PathLossModel, link: LinkType, r: f64) -> f64 {
    model.link(link).gain(r)
}

/// Energy in joules of one packet transmission over a channel with `gain`.
pub fn tx_energy(gain: f64, radio: &RadioConfig) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::Domain(format!("channel gain must be positive, got {gain}")));
    }
    Ok(radio.unit_gain_energy() / gain)
}

/// Transmission energy as a function of distance for one link type.
///
/// Equivalent to `tx_energy(channel_gain(..))` but computed in the dB domain
/// so that very large path losses do not underflow the gain.
#[derive(Debug, Clone, Copy)]
pub struct LinkEnergy {
    unit_energy: f64,
    path_loss: LinkPathLoss,
}

impl LinkEnergy {
    pub fn new(radio: &RadioConfig, model: &PathLossModel, link: LinkType) -> Self {
        Self {
            unit_energy: radio.unit_gain_energy(),
            path_loss: *model.link(link),
        }
    }

    #[inline]
    pub fn at(&self, r: f64) -> f64 {
        self.unit_energy * db_to_linear(self.path_loss.path_loss_db(r))
    }

    pub fn path_loss(&self) -> &LinkPathLoss {
        &self.path_loss
    }
}
