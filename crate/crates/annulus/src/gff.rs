//! Gaussian free field with vanishing boundary mean: a per-mode sampler on a
//! polar grid, covariances of circle averages, and Girsanov shifts.

use crate::arcs::{arc_covariance, clipped_arc, Arc, ArcQuadrature};
use crate::error::{Error, Result};
use crate::geometry::{radial_rule, Annulus, MetricSpec, Point};
use crate::greens::{g0, g_tilde, BoundaryAverager, GreenSeriesConfig};
use crate::mcstats::{cholesky_with_jitter, gaussian_from_factor, RngStream};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One draw of the field on a polar grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub radial_nodes: Vec<f64>,
    pub angular_nodes: Vec<f64>,
    /// `values[k][j]` is the field at `(radial_nodes[k], angular_nodes[j])`.
    pub values: Vec<Vec<f64>>,
    pub n_modes: usize,
    pub seed: u64,
}

impl FieldSample {
    /// Flat boundary average by the angular trapezoid on the two boundary rows.
    pub fn boundary_average(&self) -> f64 {
        let (a, b) = (self.radial_nodes[0], *self.radial_nodes.last().expect("nonempty grid"));
        let mean = |row: &Vec<f64>| row.iter().sum::<f64>() / row.len() as f64;
        (a * mean(&self.values[0]) + b * mean(self.values.last().expect("nonempty grid"))) / (a + b)
    }
}

/// Factorized mode covariances for repeated sampling on one grid.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub geom: Annulus,
    pub radial_nodes: Vec<f64>,
    pub angular_nodes: Vec<f64>,
    pub n_modes: usize,
    /// Zero-mode factor on all radial nodes except the outer boundary.
    zero: DMatrix<f64>,
    modes: Vec<DMatrix<f64>>,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    pub max_jitter: f64,
}

impl FieldSampler {
    /// Radial nodes equally spaced on `[a, b]` (both boundaries included),
    /// angular nodes equally spaced on `[0, 2π)`. Modes `n ≥ n_angular` alias
    /// onto lower ones on the grid.
    pub fn new(geom: &Annulus, n_radial: usize, n_angular: usize, n_modes: usize) -> Result<Self> {
        if n_radial < 2 || n_modes == 0 || n_angular == 0 {
            return Err(Error::Usage("need n_radial ≥ 2, n_angular ≥ 1 and n_modes ≥ 1".into()));
        }
        let (a, b) = (geom.a, geom.b);
        let radial_nodes: Vec<f64> = (0..n_radial).map(|k| a + (b - a) * k as f64 / (n_radial - 1) as f64).collect();
        let angular_nodes: Vec<f64> = (0..n_angular).map(|j| 2.0 * PI * j as f64 / n_angular as f64).collect();
        let inner = &radial_nodes[..n_radial - 1];
        let z = DMatrix::from_fn(inner.len(), inner.len(), |i, j| g0(inner[i], inner[j], a, b));
        let (zero, mut max_jitter) = cholesky_with_jitter(&z)?;
        let mut modes = Vec::with_capacity(n_modes);
        for n in 1..=n_modes {
            let c = DMatrix::from_fn(n_radial, n_radial, |i, j| 2.0 * g_tilde(n, radial_nodes[i], radial_nodes[j], a, b));
            let (l, j) = cholesky_with_jitter(&c)?;
            max_jitter = max_jitter.max(j);
            modes.push(l);
        }
        let cos = (1..=n_modes).map(|n| angular_nodes.iter().map(|t| (n as f64 * t).cos()).collect()).collect();
        let sin = (1..=n_modes).map(|n| angular_nodes.iter().map(|t| (n as f64 * t).sin()).collect()).collect();
        Ok(Self { geom: *geom, radial_nodes, angular_nodes, n_modes, zero, modes, cos, sin, max_jitter })
    }

    /// Covariance of the truncated field between grid points.
    pub fn kernel(&self, r: f64, rho: f64, dtheta: f64) -> f64 {
        let (a, b) = (self.geom.a, self.geom.b);
        g0(r, rho, a, b) + (1..=self.n_modes).map(|n| 2.0 * g_tilde(n, r, rho, a, b) * (n as f64 * dtheta).cos()).sum::<f64>()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let nr = self.radial_nodes.len();
        let na = self.angular_nodes.len();
        let mut y0 = gaussian_from_factor(&self.zero, rng);
        y0.push(-self.geom.a * y0[0] / self.geom.b);
        let mut values: Vec<Vec<f64>> = y0.iter().map(|&v| vec![v; na]).collect();
        for (n, l) in self.modes.iter().enumerate() {
            let yc = gaussian_from_factor(l, rng);
            let ys = gaussian_from_factor(l, rng);
            let (cn, sn) = (&self.cos[n], &self.sin[n]);
            for k in 0..nr {
                let row = &mut values[k];
                for j in 0..na {
                    row[j] += yc[k] * cn[j] + ys[k] * sn[j];
                }
            }
        }
        values
    }
}

/// One field draw from the stream.
pub fn sample_field(geom: &Annulus, n_radial: usize, n_angular: usize, n_modes: usize, stream: &RngStream) -> Result<FieldSample> {
    let s = FieldSampler::new(geom, n_radial, n_angular, n_modes)?;
    let mut rng = stream.rng();
    let values = s.sample(&mut rng);
    Ok(FieldSample { radial_nodes: s.radial_nodes, angular_nodes: s.angular_nodes, values, n_modes, seed: stream.master_seed })
}

/// Averaging arc of `x` at nominal radius `ε` in the metric `m`
/// (Euclidean radius `ε e^{−φ(x)/2}`), clipped to the annulus.
pub fn metric_arc(x: &Point, epsilon: f64, m: &MetricSpec, geom: &Annulus) -> Result<Arc> {
    clipped_arc(x, epsilon * (-m.phi_at(x) / 2.0).exp(), geom)
}

/// Covariance matrix of the circle averages `X_{g,ε}(x_i)` of the field with
/// covariance `G_g`.
pub fn circle_average_covariance(centers: &[Point], epsilon: f64, m: &MetricSpec, tau: f64, cfg: &GreenSeriesConfig, q: &ArcQuadrature) -> Result<DMatrix<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain("ε must be positive".into()));
    }
    let geom = Annulus::standard(tau)?;
    let arcs: Vec<Arc> = centers.iter().map(|x| metric_arc(x, epsilon, m, &geom)).collect::<Result<_>>()?;
    let n = arcs.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = arc_covariance(&arcs[i], &arcs[j], &geom, cfg, q)?;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    if !m.is_flat() {
        let avg = BoundaryAverager::new(m, tau);
        let means: Vec<f64> = arcs.iter().map(|a| a.mean_of(|p| avg.mean(p), q.order)).collect();
        let dm = avg.double_mean();
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += dm - means[i] - means[j];
            }
        }
    }
    Ok(c)
}

/// Circle averages at a set of centers with one Gaussian draw.
#[derive(Debug, Clone)]
pub struct CircleAverageSet {
    pub centers: Vec<Point>,
    pub epsilon: f64,
    pub metric: MetricSpec,
    pub covariance: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl CircleAverageSet {
    pub fn draw(centers: Vec<Point>, epsilon: f64, metric: MetricSpec, tau: f64, cfg: &GreenSeriesConfig, q: &ArcQuadrature, stream: &RngStream) -> Result<Self> {
        let covariance = circle_average_covariance(&centers, epsilon, &metric, tau, cfg, q)?;
        let values = sample_circle_averages(&covariance, stream)?;
        Ok(Self { centers, epsilon, metric, covariance, values })
    }
}

/// Zero-mean Gaussian vector with covariance `cov`.
pub fn sample_circle_averages(cov: &DMatrix<f64>, stream: &RngStream) -> Result<Vec<f64>> {
    let (l, _) = cholesky_with_jitter(cov)?;
    Ok(gaussian_from_factor(&l, &mut stream.rng()))
}

/// Support of a test function in Girsanov computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Bulk,
    Boundary,
}

/// Angular Fourier coefficients `(a₀, [(a_n, b_n)])` of `f` on the circle of
/// radius `r`, with `f = a₀ + Σ a_n cos nθ + b_n sin nθ`.
fn fourier<F: Fn(&Point) -> f64>(f: &F, r: f64, nodes: usize) -> (f64, Vec<(f64, f64)>) {
    let h = 2.0 * PI / nodes as f64;
    let vals: Vec<f64> = (0..nodes).map(|k| f(&Point::new(r, h * k as f64))).collect();
    let a0 = vals.iter().sum::<f64>() / nodes as f64;
    let coeffs = (1..nodes / 2)
        .map(|n| {
            let (mut c, mut s) = (0.0, 0.0);
            for (k, v) in vals.iter().enumerate() {
                let t = h * (n * k) as f64;
                c += v * t.cos();
                s += v * t.sin();
            }
            (2.0 * c / nodes as f64, 2.0 * s / nodes as f64)
        })
        .collect();
    (a0, coeffs)
}

/// Radial nodes (radius, weight including the `ρ` Jacobian) of the support,
/// with the bulk rule split at `split`.
fn support_nodes(geom: &Annulus, support: Support, split: Option<f64>, order: usize) -> Vec<(f64, f64)> {
    match support {
        Support::Boundary => vec![(geom.a, geom.a), (geom.b, geom.b)],
        Support::Bulk => {
            let mut out = Vec::new();
            let pieces: Vec<(f64, f64)> = match split {
                Some(r) if r > geom.a && r < geom.b => vec![(geom.a, r), (r, geom.b)],
                _ => vec![(geom.a, geom.b)],
            };
            for (lo, hi) in pieces {
                let sub = Annulus::new(lo, hi).expect("ordered radii");
                out.extend(radial_rule(&sub, order).into_iter().map(|(r, w)| (r, w * r)));
            }
            out
        }
    }
}

/// Angular coefficients of the shift `∫ f(x) G(·, x) dλ(x)` on the circle of
/// radius `r`: `(σ₀, [(σ_n^c, σ_n^s)])`.
fn shift_coefficients<F: Fn(&Point) -> f64>(r: f64, f: &F, support: Support, geom: &Annulus, order: usize) -> (f64, Vec<(f64, f64)>) {
    let nodes = 2 * order;
    let mut s0 = 0.0;
    let mut sn = vec![(0.0, 0.0); nodes / 2 - 1];
    for (rho, w) in support_nodes(geom, support, Some(r), order) {
        let (a0, coeffs) = fourier(f, rho, nodes);
        s0 += w * 2.0 * PI * a0 * g0(r, rho, geom.a, geom.b);
        for (n, ((an, bn), acc)) in coeffs.iter().zip(sn.iter_mut()).enumerate() {
            if *an == 0.0 && *bn == 0.0 {
                continue;
            }
            let k = w * 2.0 * PI * g_tilde(n + 1, r, rho, geom.a, geom.b);
            acc.0 += k * an;
            acc.1 += k * bn;
        }
    }
    (s0, sn)
}

/// `E[X(z) Y]` for `Y = ∫ f X dλ` (bulk) or `∫ f X dλ_∂` (boundary), by
/// Gauss-Legendre in the radius and exact angular mode integration.
pub fn girsanov_shift<F: Fn(&Point) -> f64>(z: &Point, f: F, support: Support, tau: f64, order: usize) -> Result<f64> {
    let geom = Annulus::standard(tau)?;
    geom.check(z)?;
    let (s0, sn) = shift_coefficients(z.r, &f, support, &geom, order);
    Ok(s0 + sn.iter().enumerate().map(|(n, (c, s))| c * ((n + 1) as f64 * z.theta).cos() + s * ((n + 1) as f64 * z.theta).sin()).sum::<f64>())
}

/// `E[Y²]` for the functional of [`girsanov_shift`].
pub fn girsanov_variance<F: Fn(&Point) -> f64>(f: F, support: Support, tau: f64, order: usize) -> Result<f64> {
    let geom = Annulus::standard(tau)?;
    let nodes = 2 * order;
    let mut total = 0.0;
    for (r, w) in support_nodes(&geom, support, None, order) {
        let (a0, coeffs) = fourier(&f, r, nodes);
        let (s0, sn) = shift_coefficients(r, &f, support, &geom, order);
        let mut v = 2.0 * PI * a0 * s0;
        for ((an, bn), (sc, ss)) in coeffs.iter().zip(&sn) {
            v += PI * (an * sc + bn * ss);
        }
        total += w * v;
    }
    Ok(total)
}

/// Shift of `X` by the flat curvature term `−(Q/2π)∫ K X dλ_∂`:
/// `−Q(τ ln(|x|/τ) + ln|x|)/(τ + 1)`.
pub fn curvature_shift(r: f64, tau: f64, q: f64) -> f64 {
    -q * (tau * (r / tau).ln() + r.ln()) / (tau + 1.0)
}

/// `Σ_k w_k X(node_k)` over the two boundary rows of a grid draw.
pub fn boundary_functional(sample: &[Vec<f64>], weights_inner: &[f64], weights_outer: &[f64]) -> f64 {
    let last = sample.len() - 1;
    sample[0].iter().zip(weights_inner).map(|(x, w)| x * w).sum::<f64>() + sample[last].iter().zip(weights_outer).map(|(x, w)| x * w).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{g_p, green_flat, h_bulk, h_boundary, ARC_ORDER};
    use crate::mcstats::MeanAccumulator;

    fn geom2() -> Annulus {
        Annulus::standard(2.0).unwrap()
    }

    #[test]
    fn curvature_shift_example() {
        let q = 2.5;
        let f = |p: &Point| -q / (2.0 * PI) * if (p.r - 1.0).abs() < 1e-12 { -1.0 } else { 0.5 };
        let s = girsanov_shift(&Point::new(1.0, 0.3), f, Support::Boundary, 2.0, 16).unwrap();
        assert!((s - 5.0 * 2f64.ln() / 3.0).abs() < 1e-12, "{s}");
        for r in [1.0, 1.3, 1.7, 2.0] {
            let s = girsanov_shift(&Point::new(r, 1.0), f, Support::Boundary, 2.0, 16).unwrap();
            assert!((s - curvature_shift(r, 2.0, q)).abs() < 1e-12);
        }
        let v = girsanov_variance(f, Support::Boundary, 2.0, 16).unwrap();
        assert!(((v / 2.0).exp() - 2f64.powf(3.125)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn constant_boundary_function_has_no_shift() {
        let s = girsanov_shift(&Point::new(1.4, 2.0), |_| 1.7, Support::Boundary, 2.0, 16).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn bulk_shift_matches_direct_quadrature() {
        let f = |p: &Point| (p.r - 1.5) * (1.0 + 0.5 * p.theta.cos());
        let z = Point::new(1.2, 0.4);
        let s = girsanov_shift(&z, f, Support::Bulk, 2.0, 48).unwrap();
        let s2 = girsanov_shift(&z, f, Support::Bulk, 2.0, 96).unwrap();
        assert!((s - s2).abs() < 1e-6, "{s} {s2}");
        // direct: GL in r with the angular integral by the trapezoid off the singular circle
        let cfg = GreenSeriesConfig::default();
        let mut direct = 0.0;
        for (lo, hi) in [(1.0, 1.2), (1.2, 2.0)] {
            for (rho, w) in crate::quad::breakpoint_nodes(lo, hi, &[1.2], 12, 0.25, 16) {
                let n = 2048;
                let h = 2.0 * PI / n as f64;
                let mut a = 0.0;
                for k in 0..n {
                    let x = Point::new(rho, h * (k as f64 + 0.5));
                    a += f(&x) * green_flat(&z, &x, 2.0, &cfg).unwrap();
                }
                direct += w * rho * a * h;
            }
        }
        assert!((s - direct).abs() < 2e-3, "{s} {direct}");
    }

    #[test]
    fn zero_mode_constraint_kills_boundary_mean() {
        let s = FieldSampler::new(&geom2(), 6, 64, 40).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..50 {
            let v = s.sample(&mut rng);
            let fs = FieldSample { radial_nodes: s.radial_nodes.clone(), angular_nodes: s.angular_nodes.clone(), values: v, n_modes: 40, seed: 3 };
            assert!(fs.boundary_average().abs() < 1e-12);
        }
        // analytic: g0(1,1) + 2τ g0(1,τ) + τ² g0(τ,τ) = 0
        let t: f64 = 2.0;
        let v = g0(1.0, 1.0, 1.0, t) + 2.0 * t * g0(1.0, t, 1.0, t) + t * t * g0(t, t, 1.0, t);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_field(&geom2(), 5, 16, 8, &RngStream::new(11, 2)).unwrap();
        let b = sample_field(&geom2(), 5, 16, 8, &RngStream::new(11, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_covariance_matches_green() {
        let s = FieldSampler::new(&geom2(), 6, 32, 96).unwrap();
        let mut rng = RngStream::new(8, 1).rng();
        let pairs = [((1, 0), (3, 5)), ((0, 0), (5, 16)), ((2, 3), (4, 20)), ((1, 7), (2, 9))];
        let n = 4000;
        let mut acc = vec![MeanAccumulator::default(); pairs.len()];
        for _ in 0..n {
            let v = s.sample(&mut rng);
            for (p, a) in pairs.iter().zip(acc.iter_mut()) {
                a.push(v[p.0 .0][p.0 .1] * v[p.1 .0][p.1 .1]);
            }
        }
        let cfg = GreenSeriesConfig::default();
        for (p, a) in pairs.iter().zip(&acc) {
            let z = Point::new(s.radial_nodes[p.0 .0], s.angular_nodes[p.0 .1]);
            let w = Point::new(s.radial_nodes[p.1 .0], s.angular_nodes[p.1 .1]);
            let g = green_flat(&z, &w, 2.0, &cfg).unwrap();
            assert!((a.mean() - g).abs() < 4.0 * a.stderr(), "{p:?}: {} vs {g}", a.mean());
        }
    }

    #[test]
    fn circle_average_diagonal_limits() {
        let cfg = GreenSeriesConfig::default();
        let q = ArcQuadrature::default();
        for r in [1.3, 1.5] {
            let x = Point::new(r, 0.2);
            let c = circle_average_covariance(&[x], 0.05, &MetricSpec::Flat, 2.0, &cfg, &q).unwrap();
            let gap = c[(0, 0)] + 0.05f64.ln() - (g_p(r, 2.0).ln() + h_bulk(r, 2.0, &cfg));
            assert!(gap.abs() < 1e-8, "{gap}");
        }
        let x = Point::new(1.0, 0.0);
        let c = circle_average_covariance(&[x], 0.025, &MetricSpec::Flat, 2.0, &cfg, &q).unwrap();
        let gap = c[(0, 0)] + 2.0 * 0.025f64.ln() - h_boundary(&x, 2.0, &cfg, ARC_ORDER).unwrap();
        assert!(gap.abs() < 0.05, "{gap}");
    }

    #[test]
    fn metric_circle_average_includes_half_log_metric() {
        let cfg = GreenSeriesConfig::default();
        let q = ArcQuadrature::default();
        let m = MetricSpec::parse("constant:0.3").unwrap();
        let x = Point::new(1.5, 0.0);
        let c = circle_average_covariance(&[x], 0.05, &m, 2.0, &cfg, &q).unwrap();
        let gap = c[(0, 0)] + 0.05f64.ln() - (0.15 + g_p(1.5, 2.0).ln() + h_bulk(1.5, 2.0, &cfg));
        assert!(gap.abs() < 1e-8, "{gap}");
    }

    #[test]
    fn far_circle_averages_match_green() {
        let cfg = GreenSeriesConfig::default();
        let q = ArcQuadrature::default();
        let (x, y) = (Point::new(1.3, 0.0), Point::new(1.7, 2.0));
        let c = circle_average_covariance(&[x, y], 0.01, &MetricSpec::Flat, 2.0, &cfg, &q).unwrap();
        assert!((c[(0, 1)] - green_flat(&x, &y, 2.0, &cfg).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn circle_average_draws() {
        let id = DMatrix::<f64>::identity(3, 3);
        let v = sample_circle_averages(&id, &RngStream::new(1, 1)).unwrap();
        assert_eq!(v.len(), 3);
        let rank1 = DMatrix::from_element(3, 3, 2.0);
        let v = sample_circle_averages(&rank1, &RngStream::new(1, 2)).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-4 && (v[1] - v[2]).abs() < 1e-4);
    }

    #[test]
    fn girsanov_end_to_end() {
        // Y = Q(Y0(1) − Y0(τ)) read off the boundary rows; F bounded.
        let q = 1.0;
        let s = FieldSampler::new(&geom2(), 5, 16, 7).unwrap();
        let na = s.angular_nodes.len();
        let wi = vec![q / na as f64; na];
        let wo = vec![-q / na as f64; na];
        let shift: Vec<f64> = s.radial_nodes.iter().map(|&r| curvature_shift(r, 2.0, q)).collect();
        let var = q * q * 2f64.ln();
        let f = |v: &Vec<Vec<f64>>| 1.0 / (1.0 + (0.7 * v[2][0]).exp());
        let mut rng = RngStream::new(21, 0).rng();
        let (mut lhs, mut rhs) = (MeanAccumulator::default(), MeanAccumulator::default());
        for _ in 0..40_000 {
            let v = s.sample(&mut rng);
            let y = boundary_functional(&v, &wi, &wo);
            lhs.push(f(&v) * y.exp());
            let shifted: Vec<Vec<f64>> = v.iter().zip(&shift).map(|(row, d)| row.iter().map(|x| x + d).collect()).collect();
            rhs.push(f(&shifted) * (var / 2.0).exp());
        }
        let se = (lhs.stderr().powi(2) + rhs.stderr().powi(2)).sqrt();
        assert!((lhs.mean() - rhs.mean()).abs() < 3.0 * se, "{} {} {se}", lhs.mean(), rhs.mean());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn identical_streams_give_identical_fields(seed in any::<u64>(), id in any::<u64>()) {
                let g = Annulus::standard(2.0).unwrap();
                let a = sample_field(&g, 4, 8, 6, &RngStream::new(seed, id)).unwrap();
                let b = sample_field(&g, 4, 8, 6, &RngStream::new(seed, id)).unwrap();
                prop_assert_eq!(&a.values, &b.values);
                prop_assert!(a.boundary_average().abs() < 1e-12);
            }
        }
    }
}
