//! Circle and arc averages of the Green's function.
//!
//! An averaging arc is the part of the circle `x + ρ e^{iu}` lying in the
//! closed annulus. Covariances of two arc averages are computed as
//!
//! * full circles with both discs inside the annulus: `R(x, y)` (mean value
//!   property of the regular part) plus the closed-form circle average of
//!   `−ln|z − w|`;
//! * well separated arcs: tensor Gauss-Legendre of `G`;
//! * otherwise: `G = K − ln|z−w| − ln|1/z̄−w| − ln|τ²/z̄−w|` with the smooth
//!   `K` by tensor Gauss-Legendre and each logarithm integrated in closed form
//!   along the second arc (dilogarithm) and by graded quadrature along the
//!   first.

use crate::error::{Error, Result};
use crate::geometry::{Annulus, Point};
use crate::greens::{green_flat, green_regular, green_smooth, GreenSeriesConfig};
use crate::quad;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Arc of the circle `center + radius·e^{iu}` over the listed angle intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub center: Point,
    pub radius: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl Arc {
    pub fn angle_measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Euclidean length `l_ε(x)`.
    pub fn length(&self) -> f64 {
        self.radius * self.angle_measure()
    }

    pub fn is_full(&self) -> bool {
        (self.angle_measure() - 2.0 * PI).abs() < 1e-14
    }

    /// Mean of `f` over the arc by Gauss-Legendre with `order` nodes per interval.
    pub fn mean_of<F: Fn(&Point) -> f64>(&self, f: F, order: usize) -> f64 {
        let rule = quad::gl(order);
        let mut s = 0.0;
        for &(a, b) in &self.intervals {
            for (u, w) in rule.mapped(a, b) {
                s += w * f(&point_of(self.at(u)));
            }
        }
        s / self.angle_measure()
    }

    fn c(&self) -> Complex64 {
        Complex64::from_polar(self.center.r, self.center.theta)
    }

    fn at(&self, u: f64) -> Complex64 {
        self.c() + Complex64::from_polar(self.radius, u)
    }

    fn endpoints(&self) -> Vec<Complex64> {
        if self.is_full() {
            return Vec::new();
        }
        self.intervals.iter().flat_map(|&(a, b)| [self.at(a), self.at(b)]).collect()
    }

    /// Whether the closed disc lies inside the closed annulus.
    fn disc_inside(&self, geom: &Annulus) -> bool {
        self.center.r - self.radius >= geom.a - 1e-14 && self.center.r + self.radius <= geom.b + 1e-14
    }
}

/// The averaging arc of radius `radius` around `x`, clipped to the closed
/// annulus. Fails when nothing of the circle remains.
pub fn clipped_arc(x: &Point, radius: f64, geom: &Annulus) -> Result<Arc> {
    geom.check(x)?;
    if !(radius > 0.0) {
        return Err(Error::Domain("averaging radius must be positive".into()));
    }
    let (r, rho) = (x.r, radius);
    let c1 = (geom.a * geom.a - r * r - rho * rho) / (2.0 * r * rho);
    let c2 = (geom.b * geom.b - r * r - rho * rho) / (2.0 * r * rho);
    let a1 = c1.clamp(-1.0, 1.0).acos();
    let a2 = c2.clamp(-1.0, 1.0).acos();
    if c1 > 1.0 || c2 < -1.0 || a2 >= a1 {
        return Err(Error::Domain(format!("averaging circle of radius {radius} around r={r} misses the annulus")));
    }
    let t = x.theta;
    let intervals = if a2 <= 0.0 { vec![(t - a1, t + a1)] } else { vec![(t - a1, t - a2), (t + a2, t + a1)] };
    Ok(Arc { center: *x, radius, intervals })
}

const LI2_B2K: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// Complex dilogarithm on the closed unit disc.
pub fn li2(z: Complex64) -> Complex64 {
    assert!(z.norm() <= 1.0 + 1e-12, "li2 is implemented on the closed unit disc");
    if z.norm() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if z.re > 0.5 {
        let w = Complex64::new(1.0, 0.0) - z;
        if w.norm() == 0.0 {
            return Complex64::new(PI * PI / 6.0, 0.0);
        }
        return -li2_bernoulli(w) + PI * PI / 6.0 - z.ln() * w.ln();
    }
    li2_bernoulli(z)
}

/// Series in `u = −ln(1 − z)`, convergent for `|u| < 2π`.
fn li2_bernoulli(z: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - z).ln();
    let u2 = u * u;
    let mut sum = u - u2 / 4.0;
    let mut pow = u; // u^{2k+1}
    let mut fact = 1.0; // (2k+1)!
    for (k, b) in LI2_B2K.iter().enumerate() {
        let kk = (k + 1) as f64;
        pow *= u2;
        fact *= (2.0 * kk) * (2.0 * kk + 1.0);
        let term = pow * (b / fact);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// `∫_{v1}^{v2} ln|p − c − ρ e^{iv}| dv` in closed form.
pub fn log_circle_integral(p: Complex64, c: Complex64, rho: f64, v1: f64, v2: f64) -> f64 {
    let d = (p - c).norm();
    let vstar = if d > 0.0 { (p - c).arg() } else { 0.0 };
    let big = d.max(rho);
    let q = (d.min(rho) / big).min(1.0);
    let im = |t: f64| li2(Complex64::from_polar(q, t)).im;
    (v2 - v1) * big.ln() - (im(v2 - vstar) - im(v1 - vstar))
}

/// Mean of `ln max(|x + ρ_x e^{it} − y|, ρ_y)` over `t`, in closed form.
fn mean_log_max(x: Complex64, rho_x: f64, y: Complex64, rho_y: f64) -> f64 {
    let d = (x - y).norm();
    let base = d.max(rho_x).ln();
    // set where |x + ρ_x e^{it} − y| < ρ_y
    let (t1, t2) = if d == 0.0 {
        if rho_x < rho_y {
            (0.0, 2.0 * PI)
        } else {
            (0.0, 0.0)
        }
    } else {
        let c = (rho_y * rho_y - d * d - rho_x * rho_x) / (2.0 * d * rho_x);
        let psi = (x - y).arg();
        if c >= 1.0 {
            (0.0, 2.0 * PI)
        } else if c <= -1.0 {
            (0.0, 0.0)
        } else {
            let a = c.acos();
            (psi + a, psi + 2.0 * PI - a)
        }
    };
    if t2 <= t1 {
        return base;
    }
    let inside = log_circle_integral(y, x, rho_x, t1, t2);
    base + ((t2 - t1) * rho_y.ln() - inside) / (2.0 * PI)
}

/// Numerical settings for arc covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcQuadrature {
    /// Gauss-Legendre order per interval for smooth tensor parts.
    pub order: usize,
    /// Grading levels toward breakpoints of the outer integral.
    pub levels: usize,
    pub ratio: f64,
    pub panel_order: usize,
}

impl Default for ArcQuadrature {
    fn default() -> Self {
        Self { order: 24, levels: 14, ratio: 0.25, panel_order: 8 }
    }
}

fn point_of(z: Complex64) -> Point {
    Point::new(z.norm(), z.arg())
}

/// Mean of `G` over two arcs (covariance of the two arc averages of the field).
pub fn arc_covariance(x: &Arc, y: &Arc, geom: &Annulus, cfg: &GreenSeriesConfig, q: &ArcQuadrature) -> Result<f64> {
    let tau = geom.b / geom.a;
    if (geom.a - 1.0).abs() > 1e-15 {
        return Err(Error::Usage("arc covariances are implemented on the standard annulus".into()));
    }
    let (cx, cy) = (x.c(), y.c());
    if x.is_full() && y.is_full() && x.disc_inside(geom) && y.disc_inside(geom) {
        let reg = green_regular(&x.center, &y.center, tau, cfg);
        return Ok(reg - mean_log_max(cx, x.radius, cy, y.radius));
    }
    let gap = (cx - cy).norm() - x.radius - y.radius;
    let scale = x.radius.max(y.radius);
    if gap >= scale {
        let order = if gap >= 4.0 * scale { q.order / 3 } else { q.order * 2 / 3 };
        return tensor_mean(x, y, order.max(4), |z, w| green_flat(&point_of(z), &point_of(w), tau, cfg));
    }
    let smooth = tensor_mean(x, y, q.order, |z, w| Ok(green_smooth(&point_of(z), &point_of(w), tau, cfg)))?;
    let maps: [&dyn Fn(Complex64) -> Complex64; 3] = [&|z| z, &|z: Complex64| 1.0 / z.conj(), &|z: Complex64| tau * tau / z.conj()];
    let mut logs = 0.0;
    for map in maps {
        logs += nested_log_mean(x, y, map, q);
    }
    Ok(smooth - logs)
}

fn tensor_mean<F: Fn(Complex64, Complex64) -> Result<f64>>(x: &Arc, y: &Arc, order: usize, f: F) -> Result<f64> {
    let rule = quad::gl(order);
    let mut s = 0.0;
    for &(a, b) in &x.intervals {
        for (u, wu) in rule.mapped(a, b) {
            let z = x.at(u);
            for &(c, d) in &y.intervals {
                for (v, wv) in rule.mapped(c, d) {
                    s += wu * wv * f(z, y.at(v))?;
                }
            }
        }
    }
    Ok(s / (x.angle_measure() * y.angle_measure()))
}

/// Mean over `u ∈ x`, `v ∈ y` of `ln|P(z(u)) − w(v)|`.
fn nested_log_mean(x: &Arc, y: &Arc, map: &dyn Fn(Complex64) -> Complex64, q: &ArcQuadrature) -> f64 {
    let cy = y.c();
    let inner = |u: f64| -> f64 {
        let p = map(x.at(u));
        y.intervals.iter().map(|&(v1, v2)| log_circle_integral(p, cy, y.radius, v1, v2)).sum()
    };
    let ends = y.endpoints();
    let mut total = 0.0;
    for &(a, b) in &x.intervals {
        let breaks = outer_breakpoints(a, b, |u| map(x.at(u)), cy, y.radius, &ends);
        for (u, w) in quad::breakpoint_nodes(a, b, &breaks, q.levels, q.ratio, q.panel_order) {
            total += w * inner(u);
        }
    }
    total / (x.angle_measure() * y.angle_measure())
}

/// Points where the image crosses the circle of `y` or passes closest to an
/// endpoint of `y`.
fn outer_breakpoints(a: f64, b: f64, p: impl Fn(f64) -> Complex64, cy: Complex64, rho: f64, ends: &[Complex64]) -> Vec<f64> {
    const N: usize = 256;
    let h = (b - a) / N as f64;
    let us: Vec<f64> = (0..=N).map(|k| a + h * k as f64).collect();
    let pts: Vec<Complex64> = us.iter().map(|&u| p(u)).collect();
    let mut out = Vec::new();
    let g: Vec<f64> = pts.iter().map(|z| (z - cy).norm() - rho).collect();
    if g.iter().any(|v| v.abs() > 1e-10 * rho) {
        for k in 0..N {
            if g[k] == 0.0 {
                out.push(us[k]);
            } else if g[k] * g[k + 1] < 0.0 {
                let (mut lo, mut hi) = (us[k], us[k + 1]);
                let glo = g[k];
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let gm = (p(mid) - cy).norm() - rho;
                    if gm * glo > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
    }
    for &e in ends {
        let dist: Vec<f64> = pts.iter().map(|z| (z - e).norm()).collect();
        for k in 0..=N {
            let left = if k == 0 { f64::INFINITY } else { dist[k - 1] };
            let right = if k == N { f64::INFINITY } else { dist[k + 1] };
            if dist[k] <= left && dist[k] <= right {
                let (mut lo, mut hi) = (us[k.saturating_sub(1)], us[(k + 1).min(N)]);
                let gr = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let m1 = hi - gr * (hi - lo);
                    let m2 = lo + gr * (hi - lo);
                    if (p(m1) - e).norm() < (p(m2) - e).norm() {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{g_p, h_boundary, h_bulk, log_kernel, ARC_ORDER};
    use proptest::prelude::*;

    fn cfg() -> GreenSeriesConfig {
        GreenSeriesConfig::default()
    }

    #[test]
    fn li2_reference_values() {
        let c = |x: f64, y: f64| Complex64::new(x, y);
        assert!((li2(c(1.0, 0.0)).re - PI * PI / 6.0).abs() < 1e-14);
        assert!((li2(c(-1.0, 0.0)).re + PI * PI / 12.0).abs() < 1e-14);
        assert!((li2(c(0.5, 0.0)).re - (PI * PI / 12.0 - 0.5 * 2f64.ln().powi(2))).abs() < 1e-14);
        // Clausen function Cl₂(π/2) is Catalan's constant
        assert!((li2(Complex64::from_polar(1.0, PI / 2.0)).im - 0.915_965_594_177_219).abs() < 1e-13);
        // direct power series inside the disc
        for &z in &[c(0.3, 0.2), c(-0.4, 0.5), c(0.45, -0.6), c(0.9, 0.3)] {
            let direct: Complex64 = (1..4000).map(|n| z.powi(n) / (n * n) as f64).sum();
            assert!((li2(z) - direct).norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn log_circle_integral_matches_quadrature() {
        let c = Complex64::new(0.2, -0.1);
        for &p in &[Complex64::new(1.0, 0.4), Complex64::new(0.3, 0.0), Complex64::new(0.2, 0.4)] {
            let exact = log_circle_integral(p, c, 0.5, -0.4, 2.3);
            let num: f64 = quad::breakpoint_nodes(-0.4, 2.3, &[(p - c).arg()], 30, 0.2, 16)
                .iter()
                .map(|(v, w)| w * (p - c - Complex64::from_polar(0.5, *v)).norm().ln())
                .sum();
            assert!((exact - num).abs() < 1e-10, "{p}: {exact} vs {num}");
        }
    }

    #[test]
    fn smooth_part_reassembles_green() {
        let tau = 2.0;
        let z = Point::new(1.3, 0.4);
        let w = Point::new(1.8, 2.0);
        let (zc, wc) = (Complex64::from_polar(z.r, z.theta), Complex64::from_polar(w.r, w.theta));
        let k = green_smooth(&z, &w, tau, &cfg());
        let g = k - (zc - wc).norm().ln() - (1.0 / zc.conj() - wc).norm().ln() - (tau * tau / zc.conj() - wc).norm().ln();
        assert!((g - green_flat(&z, &w, tau, &cfg()).unwrap()).abs() < 1e-12);
        assert!(log_kernel(&z, &w, tau).is_ok());
    }

    #[test]
    fn clipping_intervals() {
        let g = Annulus::standard(2.0).unwrap();
        let a = clipped_arc(&Point::new(1.5, 0.3), 0.1, &g).unwrap();
        assert!(a.is_full());
        let b = clipped_arc(&Point::new(1.0, 0.0), 0.1, &g).unwrap();
        assert_eq!(b.intervals.len(), 1);
        assert!(b.angle_measure() > PI && b.angle_measure() < 1.1 * PI);
        for &(lo, hi) in &b.intervals {
            for u in [lo, hi] {
                assert!(((b.at(u)).norm() - 1.0).abs() < 1e-12);
            }
        }
        let c = clipped_arc(&Point::new(1.5, 0.0), 0.6, &g).unwrap();
        assert_eq!(c.intervals.len(), 2);
        assert!(clipped_arc(&Point::new(1.5, 0.0), 5.0, &g).is_err());
    }

    #[test]
    fn nested_path_reproduces_exact_full_circle_formula() {
        let g = Annulus::standard(2.0).unwrap();
        let q = ArcQuadrature::default();
        let pairs = [
            (Point::new(1.5, 0.0), 0.1, Point::new(1.5, 0.0), 0.1),
            (Point::new(1.5, 0.0), 0.1, Point::new(1.55, 0.05), 0.08),
            (Point::new(1.3, 0.2), 0.05, Point::new(1.4, 0.25), 0.1),
        ];
        for (x, rx, y, ry) in pairs {
            let (ax, ay) = (clipped_arc(&x, rx, &g).unwrap(), clipped_arc(&y, ry, &g).unwrap());
            let exact = arc_covariance(&ax, &ay, &g, &cfg(), &q).unwrap();
            let smooth = tensor_mean(&ax, &ay, q.order, |z, w| Ok(green_smooth(&point_of(z), &point_of(w), 2.0, &cfg()))).unwrap();
            let maps: [&dyn Fn(Complex64) -> Complex64; 3] = [&|z| z, &|z: Complex64| 1.0 / z.conj(), &|z: Complex64| 4.0 / z.conj()];
            let logs: f64 = maps.iter().map(|m| nested_log_mean(&ax, &ay, *m, &q)).sum();
            assert!((smooth - logs - exact).abs() < 1e-8, "{} vs {}", smooth - logs, exact);
        }
    }

    #[test]
    fn interior_variance_is_exact_regular_part() {
        let g = Annulus::standard(2.0).unwrap();
        for &r in &[1.3, 1.5, 1.7] {
            let x = Point::new(r, 0.9);
            let a = clipped_arc(&x, 0.05, &g).unwrap();
            let v = arc_covariance(&a, &a, &g, &cfg(), &ArcQuadrature::default()).unwrap();
            let target = g_p(r, 2.0).ln() + h_bulk(r, 2.0, &cfg());
            assert!((v + 0.05f64.ln() - target).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_arc_variance_approaches_h_boundary() {
        let g = Annulus::standard(2.0).unwrap();
        let mut gaps = Vec::new();
        for &eps in &[0.1, 0.05, 0.025] {
            let x = Point::new(1.0, 0.0);
            let a = clipped_arc(&x, eps, &g).unwrap();
            let v = arc_covariance(&a, &a, &g, &cfg(), &ArcQuadrature::default()).unwrap();
            let hb = h_boundary(&x, 2.0, &cfg(), ARC_ORDER).unwrap();
            gaps.push((v + 2.0 * eps.ln() - hb).abs());
        }
        assert!(gaps[2] < gaps[0], "{gaps:?}");
        assert!(gaps[2] < 0.05, "{gaps:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn arc_covariance_is_symmetric(r1 in 1.0f64..2.0, t1 in 0.0f64..6.28, r2 in 1.0f64..2.0, dt in -0.3f64..0.3, e1 in 0.02f64..0.15, e2 in 0.02f64..0.15) {
            let g = Annulus::standard(2.0).unwrap();
            let (x, y) = (Point::new(r1, t1), Point::new(r2, t1 + dt));
            let (ax, ay) = (clipped_arc(&x, e1, &g).unwrap(), clipped_arc(&y, e2, &g).unwrap());
            let q = ArcQuadrature::default();
            let a = arc_covariance(&ax, &ay, &g, &cfg(), &q).unwrap();
            let b = arc_covariance(&ay, &ax, &g, &cfg(), &q).unwrap();
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
    }
}
