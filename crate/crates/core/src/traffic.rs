//! Content classes and their request-time law.
//!
//! An interested user requests a content at a random instant after its
//! generation. The instant follows a Gamma law with shape `κ` and scale `β`,
//! truncated at `t_max` and renormalized. Combined with the popularity `φ`,
//! the requesters up to time `t` form a thinned Poisson process of density
//! `ρ·φ·F_T(t)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{ln_gamma, regularized_gamma_p};

pub const DEFAULT_TRUNCATION_S: f64 = 20_000.0;

/// A content class `(φ, β, κ, τ_c)` with the profile truncation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentClass {
    popularity: f64,
    scale_s: f64,
    shape: f64,
    timeout_s: f64,
    truncation_s: f64,
    // Gamma CDF at the truncation horizon.
    normalizer: f64,
    // ln(β^κ·Γ(κ)·Z)
    log_density_offset: f64,
}

impl ContentClass {
    pub fn new(
        popularity: f64,
        scale_s: f64,
        shape: f64,
        timeout_s: f64,
        truncation_s: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&popularity) {
            return Err(Error::Domain(format!("popularity {popularity} outside [0, 1]")));
        }
        if !(scale_s > 0.0 && scale_s.is_finite()) {
            return Err(Error::Domain(format!("profile scale must be positive, got {scale_s}")));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::Domain(format!("profile shape must be positive, got {shape}")));
        }
        if !(timeout_s >= 0.0 && timeout_s.is_finite()) {
            return Err(Error::Domain(format!("timeout must be nonnegative, got {timeout_s}")));
        }
        if !(truncation_s > 0.0 && truncation_s.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation horizon must be positive, got {truncation_s}"
            )));
        }
        let normalizer = regularized_gamma_p(shape, truncation_s / scale_s);
        if !(normalizer > 0.0) {
            return Err(Error::Domain(
                "truncation horizon leaves no probability mass in the profile".into(),
            ));
        }
        let log_density_offset = shape * scale_s.ln() + ln_gamma(shape) + normalizer.ln();
        Ok(Self {
            popularity,
            scale_s,
            shape,
            timeout_s,
            truncation_s,
            normalizer,
            log_density_offset,
        })
    }

    /// Class with the default 20000 s truncation.
    pub fn with_defaults(popularity: f64, scale_s: f64, shape: f64, timeout_s: f64) -> Result<Self> {
        Self::new(popularity, scale_s, shape, timeout_s, DEFAULT_TRUNCATION_S)
    }

    pub fn popularity(&self) -> f64 {
        self.popularity
    }

    pub fn scale_s(&self) -> f64 {
        self.scale_s
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn timeout_s(&self) -> f64 {
        self.timeout_s
    }

    pub fn truncation_s(&self) -> f64 {
        self.truncation_s
    }

    pub fn is_delay_tolerant(&self) -> bool {
        self.timeout_s > 0.0
    }

    /// Copy of this class with a different popularity.
    pub fn with_popularity(&self, popularity: f64) -> Result<Self> {
        Self::new(popularity, self.scale_s, self.shape, self.timeout_s, self.truncation_s)
    }

    pub fn with_timeout(&self, timeout_s: f64) -> Result<Self> {
        Self::new(self.popularity, self.scale_s, self.shape, timeout_s, self.truncation_s)
    }

    /// Gamma CDF at `t` before truncation and renormalization.
    pub fn untruncated_cumulative(&self, t: f64) -> f64 {
        regularized_gamma_p(self.shape, t.max(0.0) / self.scale_s)
    }
}

/// Request intensity profile `f(t)`: the truncated, renormalized Gamma density.
pub fn intensity(t: f64, class: &ContentClass) -> f64 {
    if t < 0.0 || t > class.truncation_s {
        return 0.0;
    }
    if t == 0.0 {
        return match class.shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Greater) => 0.0,
            Some(std::cmp::Ordering::Equal) => (-class.log_density_offset).exp(),
            _ => f64::INFINITY,
        };
    }
    ((class.shape - 1.0) * t.ln() - t / class.scale_s - class.log_density_offset).exp()
}

/// `F_T(t)`: share of interested users that have requested by `t`.
pub fn cumulative(t: f64, class: &ContentClass) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= class.truncation_s {
        return 1.0;
    }
    (regularized_gamma_p(class.shape, t / class.scale_s) / class.normalizer).min(1.0)
}

/// Inverts `cumulative` at probability `u` to within 1e-6 s.
///
/// Newton steps on the density, safeguarded by a shrinking bisection bracket.
pub fn inverse_cumulative(u: f64, class: &ContentClass) -> f64 {
    const TOL_S: f64 = 1e-6;
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return class.truncation_s;
    }
    let mut lo = 0.0;
    let mut hi = class.truncation_s;
    // Start at the untruncated mean, clamped into the bracket.
    let mut t = (class.shape * class.scale_s).min(0.5 * hi);
    for _ in 0..200 {
        let residual = cumulative(t, class) - u;
        if residual > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo <= TOL_S {
            break;
        }
        let slope = intensity(t, class);
        let newton = if slope > 0.0 && slope.is_finite() {
            t - residual / slope
        } else {
            f64::NAN
        };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 0.25 * TOL_S {
            t = next;
            break;
        }
        t = next;
    }
    t.clamp(0.0, class.truncation_s)
}

/// Draws one request instant with CDF `cumulative`.
pub fn sample_request_time<R: Rng + ?Sized>(class: &ContentClass, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    inverse_cumulative(u, class)
}

/// Density of UEs that have requested by `t`: `ρ·φ·F_T(t)`.
pub fn thinned_density(t: f64, class: &ContentClass, rho: f64) -> f64 {
    rho * class.popularity * cumulative(t, class)
}

/// One class of a heterogeneous traffic load.
#[derive(Debug, Clone, PartialEq)]
pub struct MixEntry {
    pub id: String,
    pub class: ContentClass,
    /// Share of generated contents belonging to this class.
    pub load_share: f64,
}

/// A set of classes whose load shares sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMix {
    entries: Vec<MixEntry>,
}

impl TrafficMix {
    pub fn new(entries: Vec<MixEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("traffic mix has no classes".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for e in &entries {
            if !(e.load_share >= 0.0 && e.load_share.is_finite()) {
                return Err(Error::Domain(format!("class `{}` has a negative load share", e.id)));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Domain(format!("duplicate class id `{}`", e.id)));
            }
        }
        let total: f64 = entries.iter().map(|e| e.load_share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("load shares sum to {total}, expected 1")));
        }
        Ok(Self { entries })
    }

    /// Single-class mix.
    pub fn single(id: impl Into<String>, class: ContentClass) -> Self {
        Self {
            entries: vec![MixEntry {
                id: id.into(),
                class,
                load_share: 1.0,
            }],
        }
    }

    pub fn entries(&self) -> &[MixEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_converged;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_class() -> ContentClass {
        ContentClass::with_defaults(0.2, 900.0, 5.0, 0.0).unwrap()
    }

    #[test]
    fn profile_peaks_at_one_hour() {
        let c = default_class();
        let (mut best_t, mut best) = (0.0, 0.0);
        for i in 0..=20_000 {
            let t = i as f64;
            let f = intensity(t, &c);
            if f > best {
                best = f;
                best_t = t;
            }
        }
        assert!((best_t - 3600.0).abs() <= 1.0, "{best_t}");
    }

    #[test]
    fn intensity_vanishes_at_origin_and_beyond_horizon() {
        let c = default_class();
        assert_eq!(intensity(0.0, &c), 0.0);
        assert_eq!(intensity(20_000.5, &c), 0.0);
        assert_eq!(cumulative(0.0, &c), 0.0);
        assert_eq!(cumulative(20_000.0, &c), 1.0);
        assert_eq!(cumulative(25_000.0, &c), 1.0);
    }

    #[test]
    fn intensity_integrates_to_one() {
        let c = default_class();
        let total = integrate_converged(|t| Ok(intensity(t, &c)), 0.0, 20_000.0, 32, 1e-12, 4096)
            .unwrap();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        // A short horizon exercises the renormalization.
        let short = ContentClass::new(0.5, 900.0, 5.0, 0.0, 3000.0).unwrap();
        let total = integrate_converged(|t| Ok(intensity(t, &short)), 0.0, 3000.0, 32, 1e-12, 4096)
            .unwrap();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn cumulative_matches_erlang_oracle() {
        // Horizon far enough out that truncation is invisible.
        let c = ContentClass::new(0.2, 900.0, 5.0, 0.0, 1e7).unwrap();
        let x: f64 = 4.0;
        let erlang = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0 + x.powi(3) / 6.0 + x.powi(4) / 24.0);
        assert!((cumulative(3600.0, &c) - erlang).abs() < 1e-12);
        assert!((cumulative(3600.0, &c) - 0.3712).abs() < 1e-4);
    }

    #[test]
    fn ninety_nine_percent_by_174_minutes() {
        let c = default_class();
        assert!((c.untruncated_cumulative(10_440.0) - 0.990).abs() < 0.002);
    }

    #[test]
    fn intensity_is_derivative_of_cumulative() {
        let c = default_class();
        for i in 1..1000 {
            let t = 20.0 * i as f64;
            let h = 1e-4 * t.max(1.0);
            let fd = (cumulative(t + h, &c) - cumulative(t - h, &c)) / (2.0 * h);
            let f = intensity(t, &c);
            // Absolute floor covers the far tail where f is ~1e-15 and F rounds near 1.
            assert!((fd - f).abs() <= 1e-6 * f + 1e-15, "t={t}: {fd} vs {f}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        let c = default_class();
        assert_eq!(inverse_cumulative(0.0, &c), 0.0);
        for &u in &[1e-9, 1e-4, 0.01, 0.3712, 0.5, 0.9, 0.99, 0.999_999] {
            let t = inverse_cumulative(u, &c);
            let back = cumulative(t, &c);
            // |ΔF| ≤ f_max · 1e-6 s
            assert!((back - u).abs() < 1e-9, "u={u} t={t} back={back}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let c = default_class();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_request_time(&c, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn thinned_density_edges() {
        let c = default_class();
        let none = c.with_popularity(0.0).unwrap();
        for t in [0.0, 100.0, 3600.0, 1e5] {
            assert_eq!(thinned_density(t, &none, 1.1e-3), 0.0);
        }
        assert_eq!(thinned_density(0.0, &c, 1.1e-3), 0.0);
        assert!((thinned_density(20_000.0, &c, 1.1e-3) - 1.1e-3 * 0.2).abs() < 1e-18);
        assert!((thinned_density(30_000.0, &c, 1.1e-3) - 2.2e-4).abs() < 1e-18);
        // Half the interested users have requested at the median.
        let median = inverse_cumulative(0.5, &c);
        assert!((thinned_density(median, &c, 1.1e-3) - 1.1e-4).abs() < 1e-12);
    }

    #[test]
    fn class_validation() {
        assert!(ContentClass::with_defaults(1.2, 900.0, 5.0, 0.0).is_err());
        assert!(ContentClass::with_defaults(0.5, 0.0, 5.0, 0.0).is_err());
        assert!(ContentClass::with_defaults(0.5, 900.0, -1.0, 0.0).is_err());
        assert!(ContentClass::with_defaults(0.5, 900.0, 5.0, -1.0).is_err());
        assert!(ContentClass::new(0.5, 900.0, 5.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mix_validation() {
        let c = default_class();
        let entry = |id: &str, share| MixEntry {
            id: id.into(),
            class: c.clone(),
            load_share: share,
        };
        assert!(TrafficMix::new(vec![]).is_err());
        assert!(TrafficMix::new(vec![entry("a", 0.5), entry("b", 0.4)]).is_err());
        assert!(TrafficMix::new(vec![entry("a", 0.5), entry("a", 0.5)]).is_err());
        assert!(TrafficMix::new(vec![entry("a", 1.2), entry("b", -0.2)]).is_err());
        assert_eq!(TrafficMix::new(vec![entry("a", 0.5), entry("b", 0.5)]).unwrap().len(), 2);
    }

    proptest::proptest! {
        #[test]
        fn thinned_density_bounded_and_monotone(
            t in 0.0f64..25_000.0,
            dt in 0.0f64..5_000.0,
            phi in 0.0f64..=1.0,
            rho in 0.0f64..1e-2,
        ) {
            let c = default_class().with_popularity(phi).unwrap();
            let a = thinned_density(t, &c, rho);
            let b = thinned_density(t + dt, &c, rho);
            proptest::prop_assert!(a <= b);
            proptest::prop_assert!(b <= rho * (1.0 + 1e-15));
        }
    }
}
