//! JSON scenario files.
//!
//! Every section is optional except `classes`; omitted keys take the default
//! scenario values. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analytic::AnalyticModel;
use crate::error::{Error, Result};
use crate::layout::NetworkLayout;
use crate::optimizer::{uniform_grid, OptimizerSettings};
use crate::quadrature::QuadratureSettings;
use crate::radio::{PathLossModel, RadioConfig};
use crate::sim::SimContext;
use crate::traffic::{ContentClass, MixEntry, TrafficMix, DEFAULT_TRUNCATION_S};

pub const DEFAULT_BASE_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    cell_inner_radius_m: Option<f64>,
    cell_circumradius_m: Option<f64>,
    #[serde(default = "default_density")]
    ue_density_per_m2: f64,
    #[serde(default = "default_rings")]
    ring_count: u32,
}

fn default_density() -> f64 {
    1.1e-3
}

fn default_rings() -> u32 {
    1
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            cell_inner_radius_m: None,
            cell_circumradius_m: None,
            ue_density_per_m2: default_density(),
            ring_count: default_rings(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RadioSection {
    bandwidth_hz: f64,
    slot_duration_s: f64,
    packet_bits: f64,
    noise_psd_dbm_hz: f64,
    noise_figure_db: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioConfig::default();
        Self {
            bandwidth_hz: r.bandwidth_hz(),
            slot_duration_s: r.slot_duration_s(),
            packet_bits: r.packet_bits(),
            noise_psd_dbm_hz: r.noise_psd_dbm_hz(),
            noise_figure_db: r.noise_figure_db(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    d2d: Option<crate::radio::LinkPathLoss>,
    i2d: Option<crate::radio::LinkPathLoss>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassSection {
    id: String,
    phi: f64,
    #[serde(default = "default_beta")]
    beta_s: f64,
    #[serde(default = "default_kappa")]
    kappa: f64,
    #[serde(default)]
    timeout_s: f64,
    #[serde(default = "default_truncation")]
    truncation_s: f64,
    load_share: Option<f64>,
}

fn default_beta() -> f64 {
    900.0
}

fn default_kappa() -> f64 {
    5.0
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION_S
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    n_realizations: Option<usize>,
    base_seed: Option<u64>,
    rmax_grid_m: Option<Vec<f64>>,
    #[serde(default)]
    dump_records: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    network: NetworkSection,
    #[serde(default)]
    radio: RadioSection,
    channel: Option<ChannelSection>,
    classes: Vec<ClassSection>,
    #[serde(default)]
    quadrature: QuadratureSettings,
    #[serde(default)]
    optimizer: OptimizerSettings,
    #[serde(default)]
    simulation: SimulationSection,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub n_realizations: usize,
    pub base_seed: u64,
    /// Ranges simulated by `sweep`, `optimize` and `compare`.
    pub rmax_grid_m: Vec<f64>,
    /// Write every delivery record of every realization to CSV.
    pub dump_records: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            n_realizations: 100,
            base_seed: DEFAULT_BASE_SEED,
            rmax_grid_m: uniform_grid(300.0, 10.0),
            dump_records: false,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: NetworkLayout,
    pub radio: RadioConfig,
    pub channel: PathLossModel,
    pub mix: TrafficMix,
    pub quadrature: QuadratureSettings,
    pub optimizer: OptimizerSettings,
    pub simulation: SimulationSettings,
    pub output_dir: PathBuf,
}

impl Scenario {
    /// Default network, radio and numerics with the given mix.
    pub fn with_mix(mix: TrafficMix) -> Result<Self> {
        Ok(Self {
            layout: NetworkLayout::from_inner_radius(300.0, default_density(), default_rings())?,
            radio: RadioConfig::default(),
            channel: PathLossModel::default(),
            mix,
            quadrature: QuadratureSettings::default(),
            optimizer: OptimizerSettings::default(),
            simulation: SimulationSettings::default(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        })
    }

    /// Two equally loaded non-delay-tolerant classes with φ = 0.2 and 0.8.
    pub fn baseline() -> Self {
        let entry = |id: &str, phi: f64| MixEntry {
            id: id.into(),
            class: ContentClass::with_defaults(phi, default_beta(), default_kappa(), 0.0)
                .expect("valid default class"),
            load_share: 0.5,
        };
        let mix = TrafficMix::new(vec![entry("phi0.2", 0.2), entry("phi0.8", 0.8)])
            .expect("valid default mix");
        Self::with_mix(mix).expect("valid default scenario")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(if key == "." { "<root>".into() } else { key }, e.into_inner().to_string())
        })?;
        file.into_scenario()
    }

    pub fn analytic_model(&self) -> Result<AnalyticModel> {
        AnalyticModel::new(
            self.layout.clone(),
            self.radio,
            self.channel,
            self.quadrature,
        )
    }

    pub fn sim_context(&self) -> SimContext<'_> {
        SimContext {
            layout: &self.layout,
            radio: &self.radio,
            channel: &self.channel,
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Usage(format!("cannot read scenario `{}`: {e}", path.display()))
    })?;
    Scenario::from_json_str(&text)
}

fn at(key: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let key = key.into();
    move |e| match e {
        Error::Domain(m) => Error::config(key, m),
        other => other,
    }
}

pub(crate) fn check_rmax_grid(key: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(key, "must not be empty"));
    }
    if let Some(r) = grid.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::config(key, format!("ranges must be nonnegative, got {r}")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config(key, "ranges must be strictly increasing"));
    }
    Ok(())
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let net = &self.network;
        let layout = match (net.cell_inner_radius_m, net.cell_circumradius_m) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "network",
                    "give either cell_inner_radius_m or cell_circumradius_m, not both",
                ))
            }
            (None, Some(r_out)) => NetworkLayout::new(r_out, net.ue_density_per_m2, net.ring_count),
            (inner, None) => NetworkLayout::from_inner_radius(
                inner.unwrap_or(300.0),
                net.ue_density_per_m2,
                net.ring_count,
            ),
        }
        .map_err(at("network"))?;

        let r = &self.radio;
        let radio = RadioConfig::new(
            r.bandwidth_hz,
            r.slot_duration_s,
            r.packet_bits,
            r.noise_psd_dbm_hz,
            r.noise_figure_db,
        )
        .map_err(at("radio"))?;

        let mut channel = PathLossModel::default();
        if let Some(c) = self.channel {
            if let Some(d2d) = c.d2d {
                d2d.validate().map_err(at("channel.d2d"))?;
                channel.d2d = d2d;
            }
            if let Some(i2d) = c.i2d {
                i2d.validate().map_err(at("channel.i2d"))?;
                channel.i2d = i2d;
            }
        }

        let mix = build_mix(self.classes)?;

        self.quadrature.validate()?;
        self.optimizer.validate()?;

        let defaults = SimulationSettings::default();
        let s = self.simulation;
        let n_realizations = s.n_realizations.unwrap_or(defaults.n_realizations);
        if n_realizations == 0 {
            return Err(Error::config("simulation.n_realizations", "must be at least 1"));
        }
        let rmax_grid_m = s
            .rmax_grid_m
            .unwrap_or_else(|| uniform_grid(self.optimizer.r_grid_max_m, 10.0));
        check_rmax_grid("simulation.rmax_grid_m", &rmax_grid_m)?;

        Ok(Scenario {
            layout,
            radio,
            channel,
            mix,
            quadrature: self.quadrature,
            optimizer: self.optimizer,
            simulation: SimulationSettings {
                n_realizations,
                base_seed: s.base_seed.unwrap_or(defaults.base_seed),
                rmax_grid_m,
                dump_records: s.dump_records,
            },
            output_dir: self
                .output_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }
}

// Classes without a load share split the load equally; mixing given and
// omitted shares is rejected.
fn build_mix(classes: Vec<ClassSection>) -> Result<TrafficMix> {
    if classes.is_empty() {
        return Err(Error::config("classes", "at least one class is required"));
    }
    let given = classes.iter().filter(|c| c.load_share.is_some()).count();
    if given != 0 && given != classes.len() {
        return Err(Error::config(
            "classes",
            "load_share must be given for every class or for none",
        ));
    }
    let equal = 1.0 / classes.len() as f64;
    let mut entries = Vec::with_capacity(classes.len());
    let mut seen = std::collections::BTreeSet::new();
    for (i, c) in classes.into_iter().enumerate() {
        if !seen.insert(c.id.clone()) {
            return Err(Error::config(format!("classes[{i}].id"), format!("duplicate id `{}`", c.id)));
        }
        if !(0.0..=1.0).contains(&c.phi) {
            return Err(Error::config(format!("classes[{i}].phi"), "must lie in [0, 1]"));
        }
        let class = ContentClass::new(c.phi, c.beta_s, c.kappa, c.timeout_s, c.truncation_s)
            .map_err(at(format!("classes[{i}]")))?;
        entries.push(MixEntry {
            id: c.id,
            class,
            load_share: c.load_share.unwrap_or(equal),
        });
    }
    if given == entries.len() {
        let total: f64 = entries.iter().map(|e| e.load_share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "classes",
                format!("load shares sum to {total}, expected 1"),
            ));
        }
    } else {
        // Equal shares may miss 1 by rounding; absorb it in the last entry.
        let rest: f64 = entries[..entries.len() - 1].iter().map(|e| e.load_share).sum();
        entries.last_mut().expect("nonempty").load_share = 1.0 - rest;
    }
    TrafficMix::new(entries).map_err(at("classes"))
}
