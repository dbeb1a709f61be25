//! Gauss–Legendre quadrature with node-doubling convergence control.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node counts and tolerance for the nested time/range integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    /// Starting node count for integrals over the request profile.
    pub time_nodes: usize,
    /// Starting node count for integrals over distance.
    pub range_nodes: usize,
    pub relative_tolerance: f64,
    /// Node cap per axis; exceeding it is a convergence failure.
    pub max_nodes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            time_nodes: 32,
            range_nodes: 16,
            relative_tolerance: 1e-6,
            max_nodes: 4096,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if self.time_nodes < 16 || self.range_nodes < 16 {
            return Err(Error::config("quadrature", "node counts must be at least 16"));
        }
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance <= 1e-3) {
            return Err(Error::config(
                "quadrature.relative_tolerance",
                "must lie in (0, 1e-3]",
            ));
        }
        if self.max_nodes < self.time_nodes.max(self.range_nodes) {
            return Err(Error::config("quadrature.max_nodes", "below the starting node count"));
        }
        Ok(())
    }

    /// Same settings with both starting node counts doubled.
    pub fn doubled(&self) -> Self {
        Self {
            time_nodes: self.time_nodes * 2,
            range_nodes: self.range_nodes * 2,
            max_nodes: self.max_nodes * 2,
            ..*self
        }
    }
}

/// Nodes and weights on [−1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let dp = loop {
                let (p, d) = legendre(n, z);
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break legendre(n, z).1;
                }
            };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared, lazily computed rule of size `n`.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussLegendre::new(n));
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .entry(n)
            .or_insert(rule)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x)?;
        }
        Ok(sum * half)
    }
}

// P_n(z) and P_n'(z).
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Integrates `f` over `[a, b]`, doubling the node count from `start_nodes`
/// until two successive estimates agree to `tolerance` (relative) or the
/// `max_nodes` cap is hit.
pub fn integrate_converged<F>(
    mut f: F,
    a: f64,
    b: f64,
    start_nodes: usize,
    tolerance: f64,
    max_nodes: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if b <= a {
        return Ok(0.0);
    }
    let mut n = start_nodes;
    let mut previous = GaussLegendre::cached(n).integrate(a, b, &mut f)?;
    loop {
        let next_n = n * 2;
        if next_n > max_nodes {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                nodes: n,
                last_change: f64::NAN,
                tolerance,
            });
        }
        let current = GaussLegendre::cached(next_n).integrate(a, b, &mut f)?;
        let change = (current - previous).abs();
        if change <= tolerance * current.abs() || change <= f64::MIN_POSITIVE {
            return Ok(current);
        }
        if next_n * 2 > max_nodes {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                nodes: next_n,
                last_change: change / current.abs(),
                tolerance,
            });
        }
        previous = current;
        n = next_n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(5);
        for deg in 0..10 {
            let got = rule.integrate(-1.0, 1.0, |x| Ok(x.powi(deg))).unwrap();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "deg {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [16, 64, 512, 4096] {
            let rule = GaussLegendre::cached(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-12, "n={n}: {s}");
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn converges_on_smooth_integrand() {
        let got = integrate_converged(|x| Ok(x.exp()), 0.0, 3.0, 16, 1e-10, 4096).unwrap();
        assert!((got - (3f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_on_cap() {
        // A discontinuous integrand never settles to 1e-14 within 64 nodes.
        let err = integrate_converged(
            |x| Ok(if x < 0.3 { 0.0 } else { 1.0 }),
            0.0,
            1.0,
            16,
            1e-14,
            64,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate_converged(|_| Ok(1.0), 2.0, 2.0, 16, 1e-6, 64).unwrap(), 0.0);
    }
}
