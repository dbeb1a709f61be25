//! Closed-form/quadrature energy model for non-delay-tolerant classes.
//!
//! At time `t` the UEs that already hold the content form a Poisson process
//! of density `ρ_thin(t) = ρ·φ·F_T(t)`. A request at `t` is offloaded when the
//! nearest holder lies within `r_max`, which happens with probability
//! `1 − exp(−ρ_thin(t)·π·r_max²)`. Averaging over the request profile gives
//! the per-delivery D2D and I2D energies.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::layout::{outer_ring_substitution, NetworkLayout};
use crate::quadrature::{integrate_converged, QuadratureSettings};
use crate::radio::{LinkEnergy, LinkType, PathLossModel, RadioConfig};
use crate::traffic::{intensity, thinned_density, ContentClass};

// Beyond ρπr² = 60 the Rayleigh tail weighs less than e^-60.
const RAYLEIGH_TAIL_CUTOFF: f64 = 60.0;

/// Average energies per delivered content.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub e_total_j: f64,
    pub e_d2d_j: f64,
    pub e_i2d_j: f64,
    pub offload_fraction: f64,
}

impl EnergyBreakdown {
    pub fn new(e_d2d_j: f64, e_i2d_j: f64, offload_fraction: f64) -> Self {
        Self {
            e_total_j: e_d2d_j + e_i2d_j,
            e_d2d_j,
            e_i2d_j,
            offload_fraction,
        }
    }

    /// `w·E_D2D + (1 − w)·E_I2D`.
    pub fn cost(&self, w: f64) -> f64 {
        w * self.e_d2d_j + (1.0 - w) * self.e_i2d_j
    }
}

pub(crate) fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::Domain(format!("cost weight {w} outside [0, 1]")))
    }
}

/// Probability that a request at `t` finds a holder within `r_max`.
pub fn offload_probability(r_max: f64, t: f64, class: &ContentClass, rho: f64) -> f64 {
    let lambda = thinned_density(t, class, rho) * PI;
    -(-lambda * r_max * r_max).exp_m1()
}

/// Density of the D2D link distance given that the nearest holder is within `r_max`.
pub fn d2d_distance_pdf(
    r: f64,
    r_max: f64,
    t: f64,
    class: &ContentClass,
    rho: f64,
) -> Result<f64> {
    let lambda = thinned_density(t, class, rho) * PI;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "no holders at t = {t} s: the conditional D2D distance law is undefined"
        )));
    }
    let p_within = -(-lambda * r_max * r_max).exp_m1();
    if !(p_within > 0.0) {
        return Err(Error::Domain("r_max = 0 leaves no D2D distance law".into()));
    }
    if r < 0.0 || r > r_max {
        return Ok(0.0);
    }
    Ok(2.0 * lambda * r * (-lambda * r * r).exp() / p_within)
}

/// `∫₀^{r_max} 2λr·e^{−λr²}·ε(r) dr` for a holder process with `λ = π·ρ_thin`.
fn unconditional_d2d_energy(
    lambda: f64,
    r_max: f64,
    link: &LinkEnergy,
    quad: &QuadratureSettings,
) -> Result<f64> {
    if !(lambda > 0.0) || !(r_max > 0.0) {
        return Ok(0.0);
    }
    let d0 = link.path_loss().reference_distance_m;
    // Energy is flat below the reference distance.
    let flat_end = d0.min(r_max);
    let flat = link.at(d0) * -(-lambda * flat_end * flat_end).exp_m1();
    let upper = r_max.min((RAYLEIGH_TAIL_CUTOFF / lambda).sqrt());
    if upper <= d0 {
        return Ok(flat);
    }
    let ramp = integrate_converged(
        |r| Ok(2.0 * lambda * r * (-lambda * r * r).exp() * link.at(r)),
        d0,
        upper,
        quad.range_nodes,
        quad.relative_tolerance,
        quad.max_nodes,
    )?;
    Ok(flat + ramp)
}

/// Average D2D energy per delivery.
pub fn expected_d2d_energy(
    r_max: f64,
    class: &ContentClass,
    rho: f64,
    radio: &RadioConfig,
    channel: &PathLossModel,
    quad: &QuadratureSettings,
) -> Result<f64> {
    check_range(r_max)?;
    if r_max == 0.0 || class.popularity() == 0.0 || rho == 0.0 {
        return Ok(0.0);
    }
    let link = LinkEnergy::new(radio, channel, LinkType::D2d);
    integrate_converged(
        |t| {
            let f = intensity(t, class);
            if f == 0.0 {
                return Ok(0.0);
            }
            let lambda = thinned_density(t, class, rho) * PI;
            Ok(f * unconditional_d2d_energy(lambda, r_max, &link, quad)?)
        },
        0.0,
        class.truncation_s(),
        quad.time_nodes,
        quad.relative_tolerance,
        quad.max_nodes,
    )
}

/// Average energy of one I2D transmission to a UE placed uniformly in a cell.
pub fn expected_i2d_tx_energy(
    layout: &NetworkLayout,
    radio: &RadioConfig,
    channel: &PathLossModel,
    quad: &QuadratureSettings,
) -> Result<f64> {
    let link = LinkEnergy::new(radio, channel, LinkType::I2d);
    let d0 = channel.i2d.reference_distance_m;
    let a = layout.apothem_m();
    let area = layout.cell_area();
    let tol = quad.relative_tolerance;

    // Disk of radius a: density 2πr/A, energy flat below d0.
    let flat_end = d0.min(a);
    let mut total = link.at(d0) * PI * flat_end * flat_end / area;
    if a > d0 {
        total += integrate_converged(
            |r| Ok(2.0 * PI * r / area * link.at(r)),
            d0,
            a,
            quad.range_nodes,
            tol,
            quad.max_nodes,
        )?;
    }

    // Outer ring a < r ≤ r_out in the smooth angular variable, split where r = d0.
    let ring = |phi: f64| {
        let (r, jac) = outer_ring_substitution(phi, a);
        let arc = (phi - PI / 3.0).max(0.0);
        Ok(12.0 * r / area * arc * jac * link.at(r))
    };
    let split = if d0 > a {
        (a / d0).min(1.0).asin().max(PI / 3.0)
    } else {
        PI / 2.0
    };
    total += integrate_converged(ring, PI / 3.0, split, quad.range_nodes, tol, quad.max_nodes)?;
    total += integrate_converged(ring, split, PI / 2.0, quad.range_nodes, tol, quad.max_nodes)?;
    Ok(total)
}

/// Fraction of requests that find no holder within `r_max`, averaged over the profile.
fn non_offload_fraction(
    r_max: f64,
    class: &ContentClass,
    rho: f64,
    quad: &QuadratureSettings,
) -> Result<f64> {
    if r_max == 0.0 || class.popularity() == 0.0 || rho == 0.0 {
        return Ok(1.0);
    }
    let area = PI * r_max * r_max;
    let v = integrate_converged(
        |t| Ok(intensity(t, class) * (-thinned_density(t, class, rho) * area).exp()),
        0.0,
        class.truncation_s(),
        quad.time_nodes,
        quad.relative_tolerance,
        quad.max_nodes,
    )?;
    Ok(v.clamp(0.0, 1.0))
}

fn check_range(r_max: f64) -> Result<()> {
    if r_max >= 0.0 && r_max.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("r_max must be a nonnegative distance, got {r_max}")))
    }
}

fn check_scope(class: &ContentClass) -> Result<()> {
    if class.is_delay_tolerant() {
        return Err(Error::Scope(format!(
            "timeout {} s > 0: use the simulator for delay-tolerant classes",
            class.timeout_s()
        )));
    }
    Ok(())
}

/// Evaluation context for the closed-form model.
///
/// Caches the per-transmission I2D energy, which depends only on the cell
/// geometry and the radio parameters.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    layout: NetworkLayout,
    radio: RadioConfig,
    channel: PathLossModel,
    quad: QuadratureSettings,
    i2d_tx_energy: f64,
}

impl AnalyticModel {
    pub fn new(
        layout: NetworkLayout,
        radio: RadioConfig,
        channel: PathLossModel,
        quad: QuadratureSettings,
    ) -> Result<Self> {
        channel.validate()?;
        quad.validate()?;
        let i2d_tx_energy = expected_i2d_tx_energy(&layout, &radio, &channel, &quad)?;
        Ok(Self {
            layout,
            radio,
            channel,
            quad,
            i2d_tx_energy,
        })
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    pub fn channel(&self) -> &PathLossModel {
        &self.channel
    }

    pub fn quadrature(&self) -> &QuadratureSettings {
        &self.quad
    }

    pub fn ue_density(&self) -> f64 {
        self.layout.ue_density()
    }

    pub fn i2d_tx_energy(&self) -> f64 {
        self.i2d_tx_energy
    }

    pub fn offload_probability(&self, r_max: f64, t: f64, class: &ContentClass) -> f64 {
        offload_probability(r_max, t, class, self.ue_density())
    }

    pub fn expected_d2d_energy(&self, r_max: f64, class: &ContentClass) -> Result<f64> {
        expected_d2d_energy(r_max, class, self.ue_density(), &self.radio, &self.channel, &self.quad)
    }

    pub fn expected_i2d_energy(&self, r_max: f64, class: &ContentClass) -> Result<f64> {
        check_range(r_max)?;
        Ok(non_offload_fraction(r_max, class, self.ue_density(), &self.quad)? * self.i2d_tx_energy)
    }

    pub fn energy_breakdown(&self, r_max: f64, class: &ContentClass) -> Result<EnergyBreakdown> {
        check_scope(class)?;
        check_range(r_max)?;
        let miss = non_offload_fraction(r_max, class, self.ue_density(), &self.quad)?;
        let d2d = self.expected_d2d_energy(r_max, class)?;
        Ok(EnergyBreakdown::new(d2d, miss * self.i2d_tx_energy, 1.0 - miss))
    }

    pub fn cost(&self, r_max: f64, class: &ContentClass, w: f64) -> Result<f64> {
        check_weight(w)?;
        Ok(self.energy_breakdown(r_max, class)?.cost(w))
    }
}
