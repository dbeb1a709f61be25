//! Discrete-event Monte Carlo simulation of D2D-assisted delivery of one content.
//!
//! Interested UEs request the content at times drawn from the request
//! profile. A request is served over D2D by the nearest UE already holding
//! the content within `r_max`. Otherwise it is served by the base station,
//! either at once or, for delay-tolerant classes, when the timeout expires
//! without a holder having come within range. Every delivery creates a new
//! holder, which may in turn serve waiting UEs at the same instant.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::layout::{generate_ue_field, NetworkLayout, UEField};
use crate::radio::{LinkEnergy, LinkType, PathLossModel, RadioConfig};
use crate::spatial::SpatialIndex;
use crate::traffic::{sample_request_time, ContentClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestEvent {
    pub ue_index: usize,
    pub request_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeliveryMode {
    D2d,
    I2d,
}

impl DeliveryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeliveryMode::D2d => "D2D",
            DeliveryMode::I2d => "I2D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord {
    pub ue_index: usize,
    pub request_time_s: f64,
    pub delivery_time_s: f64,
    pub mode: DeliveryMode,
    /// Link length: to the serving UE for D2D, to the cell center for I2D.
    pub distance_m: f64,
    pub energy_j: f64,
    pub in_central_cell: bool,
    /// Serving UE of a D2D delivery.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// Sorted by delivery time, then UE index.
    pub records: Vec<DeliveryRecord>,
    pub seed: u64,
    pub class: ContentClass,
    pub r_max_m: f64,
}

/// Geometry and radio parameters shared by all realizations.
#[derive(Debug, Clone, Copy)]
pub struct SimContext<'a> {
    pub layout: &'a NetworkLayout,
    pub radio: &'a RadioConfig,
    pub channel: &'a PathLossModel,
}

/// Seed of realization `r` under `base_seed`.
pub fn realization_seed(base_seed: u64, realization: u64) -> u64 {
    base_seed ^ realization
}

/// Thins the field by Bernoulli(φ) draws in UE order, then draws a request
/// time for each retained UE in the same order.
pub fn draw_requests<R: Rng + ?Sized>(
    field: &UEField,
    class: &ContentClass,
    rng: &mut R,
) -> Vec<RequestEvent> {
    let phi = class.popularity();
    let interested: Vec<usize> = (0..field.len())
        .filter(|_| rng.random::<f64>() < phi)
        .collect();
    interested
        .into_iter()
        .map(|ue_index| RequestEvent {
            ue_index,
            request_time_s: sample_request_time(class, rng),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UeState {
    Idle,
    Pending,
    Delivered,
}

// Request events sort before expiry events at equal times, so a delivery
// (and its cascade) is resolved before a simultaneous timeout.
const REQUEST: u8 = 0;
const EXPIRY: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: u8,
    ue: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.ue.cmp(&other.ue))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Protocol<'a> {
    field: &'a UEField,
    layout: &'a NetworkLayout,
    r_max: f64,
    timeout: f64,
    d2d: LinkEnergy,
    i2d: LinkEnergy,
    state: Vec<UeState>,
    request_time: Vec<f64>,
    deadline: Vec<f64>,
    holders: SpatialIndex,
    pending: SpatialIndex,
    records: Vec<DeliveryRecord>,
}

impl Protocol<'_> {
    fn record(&mut self, ue: usize, time: f64, mode: DeliveryMode, distance: f64, source: Option<usize>) {
        let energy_j = match mode {
            DeliveryMode::D2d => self.d2d.at(distance),
            DeliveryMode::I2d => self.i2d.at(distance),
        };
        self.records.push(DeliveryRecord {
            ue_index: ue,
            request_time_s: self.request_time[ue],
            delivery_time_s: time,
            mode,
            distance_m: distance,
            energy_j,
            in_central_cell: self.field.central_cell_mask()[ue],
            source,
        });
        self.state[ue] = UeState::Delivered;
    }

    fn serve_i2d(&mut self, ue: usize, time: f64) {
        let p = self.field.positions()[ue];
        let bs = self.layout.cell_centers()[self.field.cells()[ue]];
        self.record(ue, time, DeliveryMode::I2d, p.distance(&bs), None);
        self.become_holder(ue, time);
    }

    fn on_request(&mut self, ue: usize, time: f64) {
        let p = self.field.positions()[ue];
        if let Some((h, d)) = self.holders.nearest(p, self.r_max) {
            self.record(ue, time, DeliveryMode::D2d, d, Some(h));
            self.become_holder(ue, time);
        } else if self.timeout > 0.0 {
            self.state[ue] = UeState::Pending;
            self.deadline[ue] = time + self.timeout;
            self.pending.insert(ue, p);
        } else {
            self.serve_i2d(ue, time);
        }
    }

    // Adds a holder and serves every pending UE it brings within range,
    // including those reached through newly served UEs.
    fn become_holder(&mut self, ue: usize, time: f64) {
        let mut frontier = BTreeSet::new();
        self.holders.insert(ue, self.field.positions()[ue]);
        self.enqueue_pending_near(ue, &mut frontier);
        while let Some((_, next)) = frontier.pop_first() {
            if self.state[next] != UeState::Pending {
                continue;
            }
            let p = self.field.positions()[next];
            let (h, d) = self
                .holders
                .nearest(p, self.r_max)
                .expect("queued UE has a holder in range");
            self.pending.remove(next);
            self.record(next, time, DeliveryMode::D2d, d, Some(h));
            self.holders.insert(next, p);
            self.enqueue_pending_near(next, &mut frontier);
        }
    }

    fn enqueue_pending_near(&self, ue: usize, frontier: &mut BTreeSet<(u64, usize)>) {
        if self.pending.is_empty() {
            return;
        }
        let p = self.field.positions()[ue];
        for i in self.pending.within(p, self.r_max) {
            // Deadlines are nonnegative, so their bit patterns sort like the values.
            frontier.insert((self.deadline[i].to_bits(), i));
        }
    }
}

// Buckets of about the mean UE spacing keep both short- and long-range
// queries cheap.
fn index_cell_size(r_max: f64) -> f64 {
    r_max.clamp(1.0, 25.0)
}

/// Runs the delivery protocol for fixed requests over a fixed field.
pub fn deliver(
    field: &UEField,
    requests: &[RequestEvent],
    class: &ContentClass,
    r_max: f64,
    ctx: &SimContext<'_>,
) -> Result<Vec<DeliveryRecord>> {
    if !(r_max >= 0.0 && r_max.is_finite()) {
        return Err(Error::Domain(format!("r_max must be a nonnegative distance, got {r_max}")));
    }
    let n = field.len();
    let mut proto = Protocol {
        field,
        layout: ctx.layout,
        r_max,
        timeout: class.timeout_s(),
        d2d: LinkEnergy::new(ctx.radio, ctx.channel, LinkType::D2d),
        i2d: LinkEnergy::new(ctx.radio, ctx.channel, LinkType::I2d),
        state: vec![UeState::Idle; n],
        request_time: vec![f64::NAN; n],
        deadline: vec![f64::INFINITY; n],
        holders: SpatialIndex::new(index_cell_size(r_max), n),
        pending: SpatialIndex::new(index_cell_size(r_max), n),
        records: Vec::with_capacity(requests.len()),
    };
    let mut queue = BinaryHeap::with_capacity(requests.len());
    for req in requests {
        if req.ue_index >= n {
            return Err(Error::Domain(format!("request for unknown UE {}", req.ue_index)));
        }
        proto.request_time[req.ue_index] = req.request_time_s;
        queue.push(Reverse(Event {
            time: req.request_time_s,
            kind: REQUEST,
            ue: req.ue_index,
        }));
    }
    while let Some(Reverse(ev)) = queue.pop() {
        match ev.kind {
            REQUEST => {
                if proto.state[ev.ue] != UeState::Idle {
                    return Err(Error::Domain(format!("UE {} requested twice", ev.ue)));
                }
                proto.on_request(ev.ue, ev.time);
                if proto.state[ev.ue] == UeState::Pending {
                    queue.push(Reverse(Event {
                        time: proto.deadline[ev.ue],
                        kind: EXPIRY,
                        ue: ev.ue,
                    }));
                }
            }
            _ => {
                if proto.state[ev.ue] == UeState::Pending {
                    proto.pending.remove(ev.ue);
                    proto.serve_i2d(ev.ue, ev.time);
                }
            }
        }
    }
    let mut records = proto.records;
    records.sort_by(|a, b| {
        a.delivery_time_s
            .total_cmp(&b.delivery_time_s)
            .then(a.ue_index.cmp(&b.ue_index))
    });
    Ok(records)
}

/// Draws requests over `field` and runs the protocol.
pub fn run_content_delivery<R: Rng + ?Sized>(
    field: &UEField,
    class: &ContentClass,
    r_max: f64,
    ctx: &SimContext<'_>,
    rng: &mut R,
) -> Result<Vec<DeliveryRecord>> {
    let requests = draw_requests(field, class, rng);
    deliver(field, &requests, class, r_max, ctx)
}

/// One seeded realization: a fresh UE field and request set.
#[derive(Debug, Clone)]
pub struct Realization {
    pub seed: u64,
    pub field: UEField,
    pub requests: Vec<RequestEvent>,
}

impl Realization {
    pub fn draw(class: &ContentClass, layout: &NetworkLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = generate_ue_field(layout, &mut rng);
        let requests = draw_requests(&field, class, &mut rng);
        Self {
            seed,
            field,
            requests,
        }
    }

    pub fn outcome(&self, class: &ContentClass, r_max: f64, ctx: &SimContext<'_>) -> Result<SimOutcome> {
        Ok(SimOutcome {
            records: deliver(&self.field, &self.requests, class, r_max, ctx)?,
            seed: self.seed,
            class: class.clone(),
            r_max_m: r_max,
        })
    }
}

/// Central-cell totals of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RealizationStats {
    pub central_records: u64,
    pub central_d2d: u64,
    pub d2d_energy_j: f64,
    pub i2d_energy_j: f64,
}

impl RealizationStats {
    pub fn from_records(records: &[DeliveryRecord]) -> Self {
        let mut s = Self::default();
        for r in records.iter().filter(|r| r.in_central_cell) {
            s.central_records += 1;
            match r.mode {
                DeliveryMode::D2d => {
                    s.central_d2d += 1;
                    s.d2d_energy_j += r.energy_j;
                }
                DeliveryMode::I2d => s.i2d_energy_j += r.energy_j,
            }
        }
        s
    }

    pub fn central_i2d(&self) -> u64 {
        self.central_records - self.central_d2d
    }

    /// Per-delivery energies; `None` without central-cell deliveries.
    pub fn breakdown(&self) -> Option<EnergyBreakdown> {
        if self.central_records == 0 {
            return None;
        }
        let n = self.central_records as f64;
        Some(EnergyBreakdown::new(
            self.d2d_energy_j / n,
            self.i2d_energy_j / n,
            self.central_d2d as f64 / n,
        ))
    }
}

/// Mean breakdown over realizations with standard errors of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedBreakdown {
    pub r_max_m: f64,
    pub mean: EnergyBreakdown,
    pub stderr_d2d_j: f64,
    pub stderr_i2d_j: f64,
    pub stderr_total_j: f64,
    pub stderr_offload: f64,
    pub realizations: usize,
    /// Realizations without any central-cell delivery; they are left out of the means.
    pub empty_realizations: usize,
    pub central_records: u64,
    pub central_i2d_deliveries: u64,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl SimulatedBreakdown {
    /// Aggregates per-realization stats in the given (index) order.
    pub fn from_stats(r_max_m: f64, stats: &[RealizationStats]) -> Self {
        let parts: Vec<EnergyBreakdown> = stats.iter().filter_map(|s| s.breakdown()).collect();
        let col = |f: fn(&EnergyBreakdown) -> f64| -> (f64, f64) {
            mean_and_stderr(&parts.iter().map(f).collect::<Vec<_>>())
        };
        let (d2d, se_d2d) = col(|b| b.e_d2d_j);
        let (i2d, se_i2d) = col(|b| b.e_i2d_j);
        let (_, se_total) = col(|b| b.e_total_j);
        let (off, se_off) = col(|b| b.offload_fraction);
        Self {
            r_max_m,
            mean: EnergyBreakdown::new(d2d, i2d, off),
            stderr_d2d_j: se_d2d,
            stderr_i2d_j: se_i2d,
            stderr_total_j: se_total,
            stderr_offload: se_off,
            realizations: stats.len(),
            empty_realizations: stats.len() - parts.len(),
            central_records: stats.iter().map(|s| s.central_records).sum(),
            central_i2d_deliveries: stats.iter().map(|s| s.central_i2d()).sum(),
        }
    }
}

fn check_realizations(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("at least one realization is required".into()));
    }
    Ok(())
}

/// Simulates `class` at every range in `r_values`, reusing each realization's
/// field and requests across ranges.
pub fn simulate_class_sweep(
    class: &ContentClass,
    r_values: &[f64],
    n_realizations: usize,
    ctx: &SimContext<'_>,
    base_seed: u64,
) -> Result<Vec<SimulatedBreakdown>> {
    check_realizations(n_realizations)?;
    let per_realization: Vec<Vec<RealizationStats>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let real = Realization::draw(class, ctx.layout, realization_seed(base_seed, r));
            r_values
                .iter()
                .map(|&r_max| {
                    let records = deliver(&real.field, &real.requests, class, r_max, ctx)?;
                    Ok(RealizationStats::from_records(&records))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(r_values
        .iter()
        .enumerate()
        .map(|(j, &r_max)| {
            let column: Vec<RealizationStats> = per_realization.iter().map(|row| row[j]).collect();
            SimulatedBreakdown::from_stats(r_max, &column)
        })
        .collect())
}

/// Simulates `class` at one range.
pub fn simulate_class(
    class: &ContentClass,
    r_max: f64,
    n_realizations: usize,
    ctx: &SimContext<'_>,
    base_seed: u64,
) -> Result<SimulatedBreakdown> {
    Ok(simulate_class_sweep(class, &[r_max], n_realizations, ctx, base_seed)?.remove(0))
}
