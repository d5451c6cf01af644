//! Rotation-invariant lattices of averaging arcs and their exact Gaussian
//! sampler.
//!
//! A lattice is a set of rings (interior cell rings and boundary rings), each
//! carrying `M` equally spaced arc centers. For a radial metric the covariance
//! of the arc averages is block circulant; it is diagonalised by a DFT in the
//! angular index and sampled frequency by frequency with Hermitian Cholesky
//! factors. Real and imaginary parts of one complex draw give two
//! independent samples.

use crate::arcs::{arc_covariance, clipped_arc, Arc, ArcQuadrature};
use crate::error::{Error, Result};
use crate::geometry::{Annulus, MetricSpec, Point};
use crate::greens::GreenSeriesConfig;
use crate::mcstats::cholesky_with_jitter;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Kind of a lattice ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingKind {
    Bulk,
    InnerBoundary,
    OuterBoundary,
}

/// One ring of arc centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub radius: f64,
    pub kind: RingKind,
    /// Flat area (bulk) or flat arc length (boundary) represented by each cell.
    pub weight: f64,
    pub offset: f64,
    /// Averaging radius at this ring (metric-rescaled).
    pub eps: f64,
}

/// Lattice layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub n_radial: usize,
    pub n_angular: usize,
    pub bulk: bool,
    pub boundary: bool,
    /// Geometric radial edges `a (b/a)^{k/n}` instead of uniform ones.
    pub geometric: bool,
}

impl LatticeSpec {
    pub fn uniform(n_radial: usize, n_angular: usize) -> Self {
        Self { n_radial, n_angular, bulk: true, boundary: true, geometric: false }
    }

    pub fn boundary_only(n_angular: usize) -> Self {
        Self { n_radial: 0, n_angular, bulk: false, boundary: true, geometric: false }
    }

    pub fn with_boundary(mut self, b: bool) -> Self {
        self.boundary = b;
        self
    }

    pub fn geometric(mut self) -> Self {
        self.geometric = true;
        self
    }

    /// Bulk and boundary rings for the annulus `(1, τ)`: geometric rings of
    /// relative width at most `kappa`, never fewer than `min_rings`.
    pub fn for_tau(tau: f64, n_angular: usize, min_rings: usize, kappa: f64) -> Self {
        let n = ((tau.ln() / kappa.ln_1p()).ceil() as usize).max(min_rings).max(1);
        Self { n_radial: n, n_angular, bulk: true, boundary: true, geometric: true }
    }
}

/// Radial cell edges.
fn radial_edges(geom: &Annulus, spec: &LatticeSpec) -> Vec<f64> {
    let n = spec.n_radial;
    let mut e: Vec<f64> = if spec.geometric {
        let ratio = geom.b / geom.a;
        (0..=n).map(|k| geom.a * ratio.powf(k as f64 / n as f64)).collect()
    } else {
        let h0 = (geom.b - geom.a) / n as f64;
        (0..=n).map(|k| geom.a + h0 * k as f64).collect()
    };
    e[n] = geom.b;
    e
}

/// Lattice with its factorized block-circulant covariance.
pub struct Lattice {
    pub geom: Annulus,
    pub epsilon: f64,
    pub metric: MetricSpec,
    pub rings: Vec<Ring>,
    pub m: usize,
    /// `lags[i][k][d] = Cov(X(i, 0), X(k, d))`.
    lags: Vec<Vec<Vec<f64>>>,
    factors: Vec<DMatrix<Complex64>>,
    pub max_jitter: f64,
}

impl std::fmt::Debug for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Lattice(rings={}, m={}, eps={})", self.rings.len(), self.m, self.epsilon)
    }
}

impl Lattice {
    pub fn build(tau: f64, epsilon: f64, metric: &MetricSpec, spec: &LatticeSpec, cfg: &GreenSeriesConfig, q: &ArcQuadrature) -> Result<Self> {
        if !metric.is_radial() {
            return Err(Error::Usage("the circulant lattice needs a radial metric; use the dense circle-average path".into()));
        }
        if spec.n_angular < 2 || !(spec.bulk || spec.boundary) || (spec.bulk && spec.n_radial == 0) {
            return Err(Error::Usage("lattice needs at least two angles and one ring".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain("ε must be positive".into()));
        }
        let geom = Annulus::standard(tau)?;
        let m = spec.n_angular;
        let dth = 2.0 * PI / m as f64;
        let eps_at = |r: f64| epsilon * (-metric.phi(r, 0.0) / 2.0).exp();
        let mut rings = Vec::new();
        if spec.boundary {
            rings.push(Ring { radius: geom.a, kind: RingKind::InnerBoundary, weight: geom.a * dth, offset: 0.0, eps: eps_at(geom.a) });
        }
        if spec.bulk {
            let e = radial_edges(&geom, spec);
            for (k, w) in e.windows(2).enumerate() {
                let r = 0.5 * (w[0] + w[1]);
                let offset = if k % 2 == 1 { 0.5 * dth } else { 0.0 };
                rings.push(Ring { radius: r, kind: RingKind::Bulk, weight: 0.5 * (w[1] * w[1] - w[0] * w[0]) * dth, offset, eps: eps_at(r) });
            }
        }
        if spec.boundary {
            rings.push(Ring { radius: geom.b, kind: RingKind::OuterBoundary, weight: geom.b * dth, offset: 0.5 * dth, eps: eps_at(geom.b) });
        }
        let arcs: Vec<Arc> = rings.iter().map(|rg| clipped_arc(&Point::new(rg.radius, rg.offset), rg.eps, &geom)).collect::<Result<_>>()?;
        let nr = rings.len();
        let mut lags = vec![vec![vec![0.0; m]; nr]; nr];
        for i in 0..nr {
            for k in i..nr {
                for d in 0..m {
                    let mut ak = arcs[k].clone();
                    let rot = dth * d as f64;
                    ak.center.theta += rot;
                    for iv in ak.intervals.iter_mut() {
                        iv.0 += rot;
                        iv.1 += rot;
                    }
                    lags[i][k][d] = arc_covariance(&arcs[i], &ak, &geom, cfg, q)?;
                }
                if k != i {
                    for d in 0..m {
                        lags[k][i][d] = lags[i][k][(m - d) % m];
                    }
                }
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(m);
        let mut blocks = vec![DMatrix::<Complex64>::zeros(nr, nr); m];
        for i in 0..nr {
            for k in 0..nr {
                let mut buf: Vec<Complex64> = lags[i][k].iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft.process(&mut buf);
                for (f, v) in buf.into_iter().enumerate() {
                    blocks[f][(i, k)] = v;
                }
            }
        }
        let mut factors = Vec::with_capacity(m);
        let mut max_jitter = 0.0f64;
        for mut b in blocks {
            // enforce exact Hermitian symmetry
            let bh = b.adjoint();
            b = (b + bh).scale(0.5);
            let (l, j) = cholesky_with_jitter(&b)?;
            max_jitter = max_jitter.max(j);
            factors.push(l);
        }
        Ok(Self { geom, epsilon, metric: metric.clone(), rings, m, lags, factors, max_jitter })
    }

    pub fn len(&self) -> usize {
        self.rings.len() * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened index of cell `(ring, angle)`.
    pub fn index(&self, ring: usize, j: usize) -> usize {
        ring * self.m + j
    }

    pub fn point(&self, ring: usize, j: usize) -> Point {
        let rg = &self.rings[ring];
        Point::new(rg.radius, rg.offset + 2.0 * PI * j as f64 / self.m as f64)
    }

    /// Averaging arc of a cell.
    pub fn arc(&self, ring: usize, j: usize) -> Result<Arc> {
        clipped_arc(&self.point(ring, j), self.rings[ring].eps, &self.geom)
    }

    pub fn covariance(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.lags[i][k][(l + self.m - j) % self.m]
    }

    pub fn variance(&self, ring: usize) -> f64 {
        self.lags[ring][ring][0]
    }

    /// Two independent draws of all arc averages, flattened ring-major.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let nr = self.rings.len();
        let m = self.m;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut spec = vec![vec![Complex64::new(0.0, 0.0); m]; nr];
        for f in 0..m {
            let xi: Vec<Complex64> = (0..nr).map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)).collect();
            let l = &self.factors[f];
            for i in 0..nr {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=i {
                    acc += l[(i, k)] * xi[k];
                }
                spec[i][f] = acc;
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(m);
        let norm = (2.0 / m as f64).sqrt();
        let mut a = Vec::with_capacity(nr * m);
        let mut b = Vec::with_capacity(nr * m);
        for row in spec.iter_mut() {
            fft.process(row);
            a.extend(row.iter().map(|z| z.re * norm));
            b.extend(row.iter().map(|z| z.im * norm));
        }
        (a, b)
    }

    /// `Σ⁻¹ v` for the full cell covariance `Σ`, with `v` flattened ring-major.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let nr = self.rings.len();
        let m = self.m;
        if v.len() != nr * m {
            return Err(Error::Usage(format!("expected {} entries, got {}", nr * m, v.len())));
        }
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut hat: Vec<Vec<Complex64>> = v.chunks(m).map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        for row in hat.iter_mut() {
            fwd.process(row);
        }
        for f in 0..m {
            let l = &self.factors[(m - f) % m];
            let rhs = nalgebra::DVector::from_iterator(nr, (0..nr).map(|i| hat[i][f]));
            let y = l.solve_lower_triangular(&rhs).ok_or_else(|| Error::Numeric("singular lattice factor".into()))?;
            let w = l.adjoint().solve_upper_triangular(&y).ok_or_else(|| Error::Numeric("singular lattice factor".into()))?;
            for i in 0..nr {
                hat[i][f] = w[i];
            }
        }
        let mut out = Vec::with_capacity(nr * m);
        for row in hat.iter_mut() {
            inv.process(row);
            out.extend(row.iter().map(|z| z.re / m as f64));
        }
        Ok(out)
    }

    /// `n` draws, produced in pairs.
    pub fn samples<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n + 1);
        while out.len() < n {
            let (a, b) = self.sample_pair(rng);
            out.push(a);
            out.push(b);
        }
        out.truncate(n);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcstats::RngStream;

    fn small() -> Lattice {
        Lattice::build(2.0, 0.1, &MetricSpec::Flat, &LatticeSpec::uniform(4, 16), &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap()
    }

    #[test]
    fn lag_table_is_symmetric() {
        let l = small();
        let nr = l.rings.len();
        for i in 0..nr {
            for k in 0..nr {
                for j in 0..l.m {
                    assert!((l.covariance(i, 0, k, j) - l.covariance(k, j, i, 0)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn empirical_covariance_matches_table() {
        let l = small();
        let mut rng = RngStream::new(5, 0).rng();
        let n = 20_000;
        let s = l.samples(n, &mut rng);
        let pairs = [(0, 0, 0, 0), (1, 3, 2, 4), (0, 0, 5, 9), (2, 1, 2, 2), (5, 7, 5, 15)];
        for (i, j, k, m) in pairs {
            let (a, b) = (l.index(i, j), l.index(k, m));
            let emp = s.iter().map(|v| v[a] * v[b]).sum::<f64>() / n as f64;
            let exact = l.covariance(i, j, k, m);
            let se = ((l.covariance(i, j, i, j) * l.covariance(k, m, k, m) + exact * exact) / n as f64).sqrt();
            assert!((emp - exact).abs() < 4.0 * se, "{i},{j},{k},{m}: {emp} vs {exact}");
        }
    }

    #[test]
    fn solve_inverts_the_covariance() {
        let l = small();
        let n = l.len();
        let v: Vec<f64> = (0..n).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let w = l.solve(&v).unwrap();
        for a in [0, 5, 17, n - 1] {
            let (i, j) = (a / l.m, a % l.m);
            let back: f64 = (0..n).map(|b| l.covariance(i, j, b / l.m, b % l.m) * w[b]).sum();
            assert!((back - v[a]).abs() < 1e-6 * (1.0 + v[a].abs()), "{back} {}", v[a]);
        }
    }

    #[test]
    fn graded_edges_cover_the_annulus() {
        let g = Annulus::standard(50.0).unwrap();
        let e = radial_edges(&g, &LatticeSpec::for_tau(50.0, 32, 4, 0.2));
        assert_eq!(e.len(), 23);
        assert_eq!(e[0], 1.0);
        assert_eq!(*e.last().unwrap(), 50.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }
}
