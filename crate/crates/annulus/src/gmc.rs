//! Regularized Gaussian multiplicative chaos on the annulus and the
//! Seiberg-bound classification of partition functions.

use crate::error::{Error, Result};
use crate::geometry::{MetricSpec, Point};
use crate::gff::CircleAverageSet;
use crate::greens::{g_p, h_boundary, h_bulk, GreenSeriesConfig};
use crate::lattice::{Lattice, RingKind};
use crate::lqft::{InsertionSet, LqftParams};
use crate::mcstats::{Estimate, MeanAccumulator, RngStream};
use crate::quad::adaptive_gk;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Cell masses of a regularized chaos measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcApprox {
    pub epsilon: f64,
    pub gamma: f64,
    pub centers: Vec<Point>,
    pub masses: Vec<f64>,
    pub metric: String,
}

impl GmcApprox {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("γ = {gamma} outside (0, 2)")))
    }
}

fn chaos(avg: &CircleAverageSet, gamma: f64, m: &MetricSpec, cells: &[f64], bulk: bool) -> Result<GmcApprox> {
    check_gamma(gamma)?;
    if cells.len() != avg.values.len() {
        return Err(Error::Usage("one cell size per circle average is required".into()));
    }
    if avg.metric.name() != m.name() {
        return Err(Error::Usage("circle averages were drawn in a different metric".into()));
    }
    let (power, coupling, scale) = if bulk { (gamma * gamma / 2.0, gamma, 1.0) } else { (gamma * gamma / 4.0, gamma / 2.0, 0.5) };
    let lead = avg.epsilon.powf(power);
    let masses = avg
        .centers
        .iter()
        .zip(&avg.values)
        .zip(cells)
        .map(|((c, x), w)| {
            if *w < 0.0 {
                return Err(Error::Domain("negative cell size".into()));
            }
            Ok(lead * (coupling * x + scale * m.phi_at(c)).exp() * w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GmcApprox { epsilon: avg.epsilon, gamma, centers: avg.centers.clone(), masses, metric: m.name() })
}

/// `ε^{γ²/2} e^{γX_{g,ε}(x_c)}` times the `g`-area of each cell, given flat cell areas.
pub fn bulk_measure(avg: &CircleAverageSet, gamma: f64, m: &MetricSpec, cell_areas: &[f64]) -> Result<GmcApprox> {
    chaos(avg, gamma, m, cell_areas, true)
}

/// `ε^{γ²/4} e^{γX_{g,ε}(x_c)/2}` times the `g`-length of each boundary arc, given flat lengths.
pub fn boundary_measure(avg: &CircleAverageSet, gamma: f64, m: &MetricSpec, arc_lengths: &[f64]) -> Result<GmcApprox> {
    if avg.centers.iter().any(|c| !(c.r - 1.0).abs().min((c.r - outer_radius(avg)).abs()).lt(&1e-12)) {
        return Err(Error::Domain("boundary measure needs centers on ∂Ω".into()));
    }
    chaos(avg, gamma, m, arc_lengths, false)
}

fn outer_radius(avg: &CircleAverageSet) -> f64 {
    avg.centers.iter().map(|c| c.r).fold(1.0, f64::max)
}

/// Flat-metric masses from averages taken on circles of the given
/// per-cell radii `ε_c`.
pub fn flat_masses_with_radii(values: &[f64], radii: &[f64], gamma: f64, cells: &[f64], bulk: bool) -> Vec<f64> {
    let (power, coupling) = if bulk { (gamma * gamma / 2.0, gamma) } else { (gamma * gamma / 4.0, gamma / 2.0) };
    values.iter().zip(radii).zip(cells).map(|((x, e), w)| e.powf(power) * (coupling * x).exp() * w).collect()
}

/// `E[M^∂_γ(∂Ω)] = ∫_{∂Ω} e^{γ²h_∂/8} dλ_∂`. By rotation invariance `h_∂` is
/// constant on each circle; `order` is the arc quadrature order of `h_∂`.
pub fn expected_boundary_mass(gamma: f64, tau: f64, order: usize) -> Result<f64> {
    let cfg = GreenSeriesConfig::default();
    let hi = h_boundary(&Point::new(1.0, 0.0), tau, &cfg, order)?;
    let ho = h_boundary(&Point::new(tau, 0.0), tau, &cfg, order)?;
    let k = gamma * gamma / 8.0;
    Ok(2.0 * PI * ((k * hi).exp() + tau * (k * ho).exp()))
}

/// `∫ g_P^{γ²/2} e^{γ²h/2} dλ` over `1 + δ < |x| < τ − δ`: the expected bulk
/// mass away from a boundary layer of width δ.
pub fn expected_bulk_mass(gamma: f64, tau: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && 2.0 * delta < tau - 1.0) {
        return Err(Error::Domain("boundary layer must leave a nonempty annulus".into()));
    }
    let cfg = GreenSeriesConfig::default();
    let k = gamma * gamma / 2.0;
    let f = |r: f64| 2.0 * PI * r * (k * (g_p(r, tau).ln() + h_bulk(r, tau, &cfg))).exp();
    let res = adaptive_gk(f, 1.0 + delta, tau - delta, 0.0, 1e-10, 2000);
    Ok(res.value)
}

/// Total bulk and boundary masses of one lattice draw, skipping bulk cells
/// whose center lies within `boundary_layer` of ∂Ω.
pub fn lattice_masses(lattice: &Lattice, x: &[f64], gamma: f64, boundary_layer: f64) -> (f64, f64) {
    let eps = lattice.epsilon;
    let (mut bulk, mut bdry) = (0.0, 0.0);
    for (ri, ring) in lattice.rings.iter().enumerate() {
        let skip = ring.kind == RingKind::Bulk && (ring.radius - lattice.geom.a < boundary_layer || lattice.geom.b - ring.radius < boundary_layer);
        if skip {
            continue;
        }
        for j in 0..lattice.m {
            let xv = x[lattice.index(ri, j)];
            let phi = lattice.metric.phi_at(&lattice.point(ri, j));
            match ring.kind {
                RingKind::Bulk => bulk += eps.powf(gamma * gamma / 2.0) * (gamma * xv + phi).exp() * ring.weight,
                _ => bdry += eps.powf(gamma * gamma / 4.0) * (gamma / 2.0 * xv + phi / 2.0).exp() * ring.weight,
            }
        }
    }
    (bulk, bdry)
}

/// Exact expectation of the lattice masses (lognormal cell by cell).
pub fn lattice_expected_masses(lattice: &Lattice, gamma: f64, boundary_layer: f64) -> (f64, f64) {
    let eps = lattice.epsilon;
    let (mut bulk, mut bdry) = (0.0, 0.0);
    for (ri, ring) in lattice.rings.iter().enumerate() {
        let v = lattice.variance(ri);
        let phi = lattice.metric.phi_at(&lattice.point(ri, 0));
        match ring.kind {
            RingKind::Bulk => {
                if ring.radius - lattice.geom.a >= boundary_layer && lattice.geom.b - ring.radius >= boundary_layer {
                    bulk += lattice.m as f64 * eps.powf(gamma * gamma / 2.0) * (gamma * gamma * v / 2.0 + phi).exp() * ring.weight;
                }
            }
            _ => bdry += lattice.m as f64 * eps.powf(gamma * gamma / 4.0) * (gamma * gamma * v / 8.0 + phi / 2.0).exp() * ring.weight,
        }
    }
    (bulk, bdry)
}

/// Summary of sampled total masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub mean: Estimate,
    pub median: f64,
    /// `(level, quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

impl MassSummary {
    pub fn from_samples(v: &[f64], seed: u64) -> Self {
        let mut acc = MeanAccumulator::default();
        v.iter().for_each(|x| acc.push(*x));
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| if s.is_empty() { f64::NAN } else { s[((s.len() - 1) as f64 * p).round() as usize] };
        Self { mean: acc.estimate(seed), median: q(0.5), quantiles: [0.05, 0.25, 0.75, 0.95].iter().map(|&p| (p, q(p))).collect() }
    }
}

/// Monte-Carlo total bulk and boundary masses on a lattice.
pub fn sample_total_masses(lattice: &Lattice, gamma: f64, n: usize, boundary_layer: f64, stream: &RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
    check_gamma(gamma)?;
    let mut rng = stream.rng();
    Ok(lattice.samples(n, &mut rng).iter().map(|x| lattice_masses(lattice, x, gamma, boundary_layer)).unzip())
}

/// Outcome of the existence theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ConvergesNontrivial,
    ZeroOrInfinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeibergVerdict {
    pub classification: Classification,
    /// Violated bounds among `sei1` (`s > 0`), `sei2` (`αᵢ < Q`), `sei3` (`βⱼ < Q`).
    pub violated: Vec<String>,
}

/// Three-way classification of the partition function by the Seiberg bounds.
pub fn seiberg_classify(ins: &InsertionSet, params: &LqftParams) -> Result<SeibergVerdict> {
    if !(params.mu >= 0.0 && params.mu_boundary >= 0.0) {
        return Err(Error::Parameter("cosmological constants must be nonnegative".into()));
    }
    if params.mu == 0.0 && params.mu_boundary == 0.0 {
        return Err(Error::Parameter("μ + μ∂ must be positive".into()));
    }
    let q = params.q();
    let mut violated = Vec::new();
    if !(ins.s() > 0.0) {
        violated.push("sei1".to_string());
    }
    if params.mu > 0.0 && ins.bulk.iter().any(|b| !(b.weight < q)) {
        violated.push("sei2".to_string());
    }
    if params.mu_boundary > 0.0 && ins.boundary.iter().any(|b| !(b.weight < q)) {
        violated.push("sei3".to_string());
    }
    let classification = if violated.is_empty() { Classification::ConvergesNontrivial } else { Classification::ZeroOrInfinite };
    Ok(SeibergVerdict { classification, violated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcs::ArcQuadrature;
    use crate::lattice::LatticeSpec;
    use crate::lqft::Insertion;
    use proptest::prelude::*;

    fn bulk_at(alpha: f64) -> InsertionSet {
        InsertionSet::single_bulk(Point::new(1.5, 0.0), alpha, 2.0).unwrap()
    }

    #[test]
    fn seiberg_examples() {
        let p = LqftParams::new(1.0, 1.0, 1.0).unwrap();
        let v = seiberg_classify(&bulk_at(1.0), &p).unwrap();
        assert_eq!(v.classification, Classification::ConvergesNontrivial);
        let v = seiberg_classify(&InsertionSet::default(), &p).unwrap();
        assert_eq!(v.violated, vec!["sei1"]);
        let v = seiberg_classify(&bulk_at(2.5), &p).unwrap();
        assert_eq!(v.violated, vec!["sei2"]);
        let v = seiberg_classify(&bulk_at(2.5), &LqftParams { gamma: 1.0, mu: 0.0, mu_boundary: 1.0 }).unwrap();
        assert_eq!(v.classification, Classification::ConvergesNontrivial);
        assert!(seiberg_classify(&bulk_at(1.0), &LqftParams { gamma: 1.0, mu: 0.0, mu_boundary: 0.0 }).is_err());
    }

    #[test]
    fn seiberg_table_is_exhaustive() {
        let q = 2.5;
        for &mu in &[0.0, 1.0] {
            for &mub in &[0.0, 1.0] {
                for &a in &[-1.0, 1.0, q, 3.0] {
                    for &b in &[-3.0, 1.0, q, 3.0] {
                        let p = LqftParams { gamma: 1.0, mu, mu_boundary: mub };
                        let ins = InsertionSet::new(vec![Insertion { point: Point::new(1.5, 0.0), weight: a }], vec![Insertion { point: Point::new(1.0, 1.0), weight: b }], 2.0).unwrap();
                        let r = seiberg_classify(&ins, &p);
                        if mu == 0.0 && mub == 0.0 {
                            assert!(r.is_err());
                            continue;
                        }
                        let ok1 = a + b / 2.0 > 0.0;
                        let ok2 = mu == 0.0 || a < q;
                        let ok3 = mub == 0.0 || b < q;
                        let v = r.unwrap();
                        assert_eq!(v.classification == Classification::ConvergesNontrivial, ok1 && ok2 && ok3);
                        assert_eq!(v.violated.len(), [ok1, ok2, ok3].iter().filter(|x| !**x).count());
                    }
                }
            }
        }
    }

    fn averages(metric: MetricSpec, centers: Vec<Point>) -> CircleAverageSet {
        CircleAverageSet::draw(centers, 0.05, metric, 2.0, &GreenSeriesConfig::default(), &ArcQuadrature::default(), &RngStream::new(1, 0)).unwrap()
    }

    #[test]
    fn shift_identity_holds_per_cell() {
        let m = MetricSpec::custom("bump", |r, t| 0.4 * (r - 1.5) + 0.2 * t.sin());
        let centers: Vec<Point> = (0..6).map(|k| Point::new(1.2 + 0.1 * k as f64, k as f64)).collect();
        let avg = averages(m.clone(), centers.clone());
        let cells = vec![0.01; centers.len()];
        let gamma = 1.3;
        let g = bulk_measure(&avg, gamma, &m, &cells).unwrap();
        let radii: Vec<f64> = centers.iter().map(|c| 0.05 * (-m.phi_at(c) / 2.0).exp()).collect();
        let flat = flat_masses_with_radii(&avg.values, &radii, gamma, &cells, true);
        for ((a, b), c) in g.masses.iter().zip(&flat).zip(&centers) {
            assert!((a / b - ((1.0 + gamma * gamma / 4.0) * m.phi_at(c)).exp()).abs() < 1e-12);
        }
        let bc: Vec<Point> = (0..4).map(|k| Point::new(if k % 2 == 0 { 1.0 } else { 2.0 }, k as f64)).collect();
        let avg = averages(m.clone(), bc.clone());
        let lens = vec![0.02; 4];
        let g = boundary_measure(&avg, gamma, &m, &lens).unwrap();
        let radii: Vec<f64> = bc.iter().map(|c| 0.05 * (-m.phi_at(c) / 2.0).exp()).collect();
        let flat = flat_masses_with_radii(&avg.values, &radii, gamma, &lens, false);
        for ((a, b), c) in g.masses.iter().zip(&flat).zip(&bc) {
            assert!((a / b - (0.5 * (1.0 + gamma * gamma / 4.0) * m.phi_at(c)).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_chaos_limits() {
        let centers = vec![Point::new(1.5, 0.0), Point::new(1.7, 1.0)];
        let avg = averages(MetricSpec::Flat, centers);
        let g = bulk_measure(&avg, 1e-9, &MetricSpec::Flat, &[0.3, 0.2]).unwrap();
        assert!((g.total() - 0.5).abs() < 1e-6);
        assert!(bulk_measure(&avg, 2.0, &MetricSpec::Flat, &[0.3, 0.2]).is_err());
    }

    #[test]
    fn expected_boundary_mass_examples() {
        assert!((expected_boundary_mass(1e-6, 2.0, 64).unwrap() - 6.0 * PI).abs() < 1e-9);
        let a = expected_boundary_mass(1.0, 2.0, 48).unwrap();
        let b = expected_boundary_mass(1.0, 2.0, 96).unwrap();
        assert!(a > 0.0 && (a - b).abs() < 1e-6);
        let vals: Vec<f64> = [0.5, 1.0, 1.5, 1.9].iter().map(|g| expected_boundary_mass(*g, 2.0, 64).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bulk_expectation_diverges_for_large_gamma() {
        let g = 2f64.sqrt() * 1.05;
        let v: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|d| expected_bulk_mass(g, 2.0, *d).unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < v[2]);
        // below the threshold the truncated integrals converge like δ^{1 − γ²/2}
        let small: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|d| expected_bulk_mass(1.0, 2.0, *d).unwrap()).collect();
        let ratio = (small[2] - small[1]) / (small[1] - small[0]);
        assert!((ratio - 10f64.powf(-0.5)).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn lattice_masses_are_positive_and_finite() {
        for eps in [0.1, 0.05] {
            let lat = Lattice::build(2.0, eps, &MetricSpec::Flat, &LatticeSpec::uniform(4, 16), &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap();
            for gamma in [0.5, 1.0, 1.5] {
                let (b, s) = sample_total_masses(&lat, gamma, 20, 0.0, &RngStream::new(3, 0)).unwrap();
                assert!(b.iter().chain(&s).all(|v| v.is_finite() && *v > 0.0));
            }
        }
    }

    #[test]
    fn boundary_mass_expectation_matches_lattice_mean() {
        let lat = Lattice::build(2.0, 0.05, &MetricSpec::Flat, &LatticeSpec::boundary_only(32), &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap();
        let (_, s) = sample_total_masses(&lat, 1.0, 4000, 0.0, &RngStream::new(8, 0)).unwrap();
        let est = MassSummary::from_samples(&s, 8).mean;
        let exact = lattice_expected_masses(&lat, 1.0, 0.0).1;
        assert!((est.value - exact).abs() < 3.5 * est.stderr, "{est:?} {exact}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn seiberg_is_total(a in -4.0f64..4.0, b in -4.0f64..4.0, mu in 0.0f64..2.0, mub in 0.0f64..2.0) {
            let p = LqftParams { gamma: 1.0, mu, mu_boundary: mub };
            let ins = InsertionSet::new(vec![Insertion { point: Point::new(1.5, 0.0), weight: a }], vec![Insertion { point: Point::new(2.0, 0.5), weight: b }], 2.0).unwrap();
            let r = seiberg_classify(&ins, &p);
            prop_assert_eq!(r.is_err(), mu == 0.0 && mub == 0.0);
        }
    }
}
