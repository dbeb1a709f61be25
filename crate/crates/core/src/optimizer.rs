//! Minimization of the weighted energy cost over `r_max`.
//!
//! Every search first scans a coarse grid to bracket the global minimum and
//! then refines inside the bracket with golden-section search, so the
//! unimodality that golden-section relies on is only assumed locally.

use serde::{Deserialize, Serialize};

use crate::analytic::{check_weight, AnalyticModel, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::traffic::{ContentClass, TrafficMix};

/// Relative tolerance on the D2D energy when matching a budget.
pub const BUDGET_RELATIVE_TOLERANCE: f64 = 0.005;
// Bisection stops once the bracket on r is this narrow.
const BUDGET_RANGE_TOLERANCE_M: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub r_grid_max_m: f64,
    pub grid_step_m: f64,
    pub golden_tol_m: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            r_grid_max_m: 300.0,
            grid_step_m: 2.0,
            golden_tol_m: 0.1,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_grid_max_m > 0.0 && self.r_grid_max_m.is_finite()) {
            return Err(Error::config("optimizer.r_grid_max_m", "must be positive"));
        }
        if !(self.grid_step_m > 0.0 && self.grid_step_m <= self.r_grid_max_m) {
            return Err(Error::config(
                "optimizer.grid_step_m",
                "must be positive and at most r_grid_max_m",
            ));
        }
        if !(self.golden_tol_m > 0.0) {
            return Err(Error::config("optimizer.golden_tol_m", "must be positive"));
        }
        Ok(())
    }

    /// `0, step, 2·step, …` up to and including `r_grid_max_m`.
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.r_grid_max_m, self.grid_step_m)
    }
}

pub fn uniform_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step - 1e-9).ceil() as usize;
    (0..=n).map(|i| (i as f64 * step).min(max)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Coarse grid followed by golden-section refinement.
    GridGolden,
    /// Argmin over tabulated points only.
    Grid,
}

impl SearchMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SearchMethod::GridGolden => "grid_golden",
            SearchMethod::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub r_hat_m: f64,
    pub cost_value: f64,
    pub breakdown: EnergyBreakdown,
    pub weight: f64,
    pub method: SearchMethod,
}

/// Per-delivery energies as a function of `r_max`.
pub trait EnergyCurve: Sync {
    fn breakdown(&self, r_max: f64) -> Result<EnergyBreakdown>;

    fn cost(&self, r_max: f64, w: f64) -> Result<f64> {
        Ok(self.breakdown(r_max)?.cost(w))
    }
}

/// Closed-form curve of one non-delay-tolerant class.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticCurve<'a> {
    pub model: &'a AnalyticModel,
    pub class: &'a ContentClass,
}

impl EnergyCurve for AnalyticCurve<'_> {
    fn breakdown(&self, r_max: f64) -> Result<EnergyBreakdown> {
        self.model.energy_breakdown(r_max, self.class)
    }
}

/// Curve known at a set of ranges (typically simulated), linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    ranges: Vec<f64>,
    values: Vec<EnergyBreakdown>,
}

impl TabulatedCurve {
    pub fn new(ranges: Vec<f64>, values: Vec<EnergyBreakdown>) -> Result<Self> {
        if ranges.is_empty() || ranges.len() != values.len() {
            return Err(Error::Domain(
                "tabulated curve needs one value per range and at least one point".into(),
            ));
        }
        if ranges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("tabulated ranges must be strictly increasing".into()));
        }
        Ok(Self { ranges, values })
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn values(&self) -> &[EnergyBreakdown] {
        &self.values
    }

    /// Argmin of the cost over the tabulated points; ties go to the smallest range.
    pub fn grid_argmin(&self, w: f64) -> Result<OptimizationResult> {
        check_weight(w)?;
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.cost(w) < self.values[best].cost(w) {
                best = i;
            }
        }
        Ok(OptimizationResult {
            r_hat_m: self.ranges[best],
            cost_value: self.values[best].cost(w),
            breakdown: self.values[best],
            weight: w,
            method: SearchMethod::Grid,
        })
    }
}

impl EnergyCurve for TabulatedCurve {
    fn breakdown(&self, r_max: f64) -> Result<EnergyBreakdown> {
        let first = self.ranges[0];
        let last = *self.ranges.last().expect("nonempty");
        if !(r_max >= first && r_max <= last) {
            return Err(Error::Domain(format!(
                "r_max = {r_max} outside tabulated range [{first}, {last}]"
            )));
        }
        let j = self.ranges.partition_point(|&r| r < r_max);
        if self.ranges[j] == r_max {
            return Ok(self.values[j]);
        }
        let (r0, r1) = (self.ranges[j - 1], self.ranges[j]);
        let (a, b) = (&self.values[j - 1], &self.values[j]);
        let s = (r_max - r0) / (r1 - r0);
        let lerp = |x: f64, y: f64| x + s * (y - x);
        Ok(EnergyBreakdown::new(
            lerp(a.e_d2d_j, b.e_d2d_j),
            lerp(a.e_i2d_j, b.e_i2d_j),
            lerp(a.offload_fraction, b.offload_fraction),
        ))
    }
}

/// Per-class weights for averaging over deliveries of an aggregate load.
///
/// A class with load share `s` and popularity `φ` accounts for a fraction
/// proportional to `s·φ` of all deliveries.
pub fn aggregate_weights(mix: &TrafficMix) -> Result<Vec<f64>> {
    let raw: Vec<f64> = mix
        .entries()
        .iter()
        .map(|e| e.load_share * e.class.popularity())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("traffic mix generates no deliveries".into()));
    }
    Ok(raw.into_iter().map(|x| x / total).collect())
}

/// Delivery-weighted average of several class curves.
pub struct AggregateCurve<'a> {
    parts: Vec<(&'a dyn EnergyCurve, f64)>,
}

impl<'a> AggregateCurve<'a> {
    /// `curves[i]` must describe `mix.entries()[i]`.
    pub fn new(mix: &TrafficMix, curves: Vec<&'a dyn EnergyCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Domain("empty traffic mix".into()));
        }
        if curves.len() != mix.len() {
            return Err(Error::Domain(format!(
                "{} curves for {} classes",
                curves.len(),
                mix.len()
            )));
        }
        let weights = aggregate_weights(mix)?;
        Ok(Self {
            parts: curves.into_iter().zip(weights).collect(),
        })
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.parts.iter().map(|(_, w)| *w)
    }

    /// Aggregate of per-class breakdowns evaluated at class-specific ranges.
    pub fn combine(&self, per_class: &[EnergyBreakdown]) -> EnergyBreakdown {
        let mut d2d = 0.0;
        let mut i2d = 0.0;
        let mut off = 0.0;
        for ((_, w), b) in self.parts.iter().zip(per_class) {
            d2d += w * b.e_d2d_j;
            i2d += w * b.e_i2d_j;
            off += w * b.offload_fraction;
        }
        EnergyBreakdown::new(d2d, i2d, off)
    }
}

impl EnergyCurve for AggregateCurve<'_> {
    fn breakdown(&self, r_max: f64) -> Result<EnergyBreakdown> {
        let per_class = self
            .parts
            .iter()
            .map(|(c, _)| c.breakdown(r_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.combine(&per_class))
    }
}

/// Golden-section search for a minimum of `f` on `[lo, hi]` down to a bracket
/// of width `tol`. Returns the best point evaluated.
pub fn golden_section_minimize<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f2 < f1 { (x2, f2) } else { (x1, f1) };
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

/// Grid scan over `[0, r_grid_max]` followed by golden-section refinement
/// around the best grid point.
pub fn minimize_cost(
    curve: &dyn EnergyCurve,
    w: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    check_weight(w)?;
    let grid = settings.grid();
    let mut costs = Vec::with_capacity(grid.len());
    for &r in &grid {
        costs.push(curve.cost(r, w)?);
    }
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = i;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let mut r_hat = grid[best];
    if hi > lo {
        let (x, c) = golden_section_minimize(|r| curve.cost(r, w), lo, hi, settings.golden_tol_m)?;
        if c < costs[best] {
            r_hat = x;
        }
    }
    let breakdown = curve.breakdown(r_hat)?;
    Ok(OptimizationResult {
        r_hat_m: r_hat,
        cost_value: breakdown.cost(w),
        breakdown,
        weight: w,
        method: SearchMethod::GridGolden,
    })
}

/// Cost-minimizing `r_max` of one non-delay-tolerant class.
pub fn optimal_rmax(
    model: &AnalyticModel,
    class: &ContentClass,
    w: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    minimize_cost(&AnalyticCurve { model, class }, w, settings)
}

/// Best single `r_max` for the whole mix, minimizing the delivery-weighted
/// aggregate cost.
pub fn optimal_common_rmax(
    aggregate: &AggregateCurve<'_>,
    w: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    minimize_cost(aggregate, w, settings)
}

/// `optimal_common_rmax` for a mix of non-delay-tolerant classes.
pub fn optimal_common_rmax_analytic(
    model: &AnalyticModel,
    mix: &TrafficMix,
    w: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let curves: Vec<AnalyticCurve<'_>> = mix
        .entries()
        .iter()
        .map(|e| AnalyticCurve { model, class: &e.class })
        .collect();
    let refs: Vec<&dyn EnergyCurve> = curves.iter().map(|c| c as &dyn EnergyCurve).collect();
    let aggregate = AggregateCurve::new(mix, refs)?;
    optimal_common_rmax(&aggregate, w, settings)
}

/// Common `r_max` whose aggregate D2D energy meets `budget_j`.
///
/// Bisects for the smallest range whose aggregate D2D energy reaches the
/// budget, so that the result is within `BUDGET_RELATIVE_TOLERANCE` of it.
pub fn rmax_for_d2d_budget(
    aggregate: &AggregateCurve<'_>,
    budget_j: f64,
    settings: &OptimizerSettings,
) -> Result<f64> {
    if !(budget_j >= 0.0 && budget_j.is_finite()) {
        return Err(Error::Domain(format!("D2D budget must be nonnegative, got {budget_j}")));
    }
    let d2d = |r: f64| -> Result<f64> { Ok(aggregate.breakdown(r)?.e_d2d_j) };
    let mut lo = 0.0;
    let mut hi = settings.r_grid_max_m;
    let at_lo = d2d(lo)?;
    let at_hi = d2d(hi)?;
    if budget_j <= at_lo {
        return Ok(lo);
    }
    if budget_j > at_hi * (1.0 + BUDGET_RELATIVE_TOLERANCE) {
        return Err(Error::BudgetRange {
            budget_j,
            min_j: at_lo,
            max_j: at_hi,
        });
    }
    if budget_j >= at_hi {
        return Ok(hi);
    }
    while hi - lo > BUDGET_RANGE_TOLERANCE_M {
        let mid = 0.5 * (lo + hi);
        if d2d(mid)? >= budget_j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Parabola {
        center: f64,
    }

    impl EnergyCurve for Parabola {
        fn breakdown(&self, r: f64) -> Result<EnergyBreakdown> {
            // D2D grows, I2D falls; at w = 0.5 the total is minimized at `center`.
            let d = (r / self.center).powi(2);
            let i = 2.0 - 2.0 * r / self.center;
            Ok(EnergyBreakdown::new(d, i.max(0.0) + 0.0 * r, 0.0))
        }
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) =
            golden_section_minimize(|x| Ok((x - 1.234).powi(2) + 3.0), 0.0, 5.0, 1e-6).unwrap();
        assert!((x - 1.234).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-11);
    }

    #[test]
    fn grid_plus_golden_on_synthetic_curve() {
        let s = OptimizerSettings::default();
        let res = minimize_cost(&Parabola { center: 77.7 }, 0.5, &s).unwrap();
        assert!((res.r_hat_m - 77.7).abs() < 0.1, "{}", res.r_hat_m);
        assert_eq!(res.method, SearchMethod::GridGolden);
    }

    #[test]
    fn boundary_minima() {
        let s = OptimizerSettings::default();
        let c = Parabola { center: 77.7 };
        // w = 1: only D2D counts, minimized at zero range.
        assert_eq!(minimize_cost(&c, 1.0, &s).unwrap().r_hat_m, 0.0);
        assert!(minimize_cost(&c, 1.1, &s).is_err());
        assert!(minimize_cost(&c, -0.1, &s).is_err());
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = uniform_grid(300.0, 7.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 300.0);
        assert_eq!(uniform_grid(300.0, 2.0).len(), 151);
    }

    #[test]
    fn tabulated_interpolation_and_argmin() {
        let pts = vec![0.0, 10.0, 20.0];
        let vals = vec![
            EnergyBreakdown::new(0.0, 10.0, 0.0),
            EnergyBreakdown::new(1.0, 4.0, 0.5),
            EnergyBreakdown::new(5.0, 3.0, 0.8),
        ];
        let t = TabulatedCurve::new(pts, vals).unwrap();
        let mid = t.breakdown(5.0).unwrap();
        assert_eq!(mid.e_d2d_j, 0.5);
        assert_eq!(mid.e_i2d_j, 7.0);
        assert!(t.breakdown(25.0).is_err());
        let r = t.grid_argmin(0.5).unwrap();
        assert_eq!(r.r_hat_m, 10.0);
        assert_eq!(r.method, SearchMethod::Grid);
        assert!(TabulatedCurve::new(vec![1.0, 1.0], vec![mid, mid]).is_err());
    }

    #[test]
    fn tabulated_argmin_prefers_smallest_range_on_ties() {
        let v = EnergyBreakdown::new(1.0, 1.0, 0.5);
        let t = TabulatedCurve::new(vec![0.0, 5.0, 10.0], vec![v, v, v]).unwrap();
        assert_eq!(t.grid_argmin(0.3).unwrap().r_hat_m, 0.0);
    }
}
