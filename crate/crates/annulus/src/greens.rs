//! Neumann Green's function of the annulus: mode kernels, the closed-form log
//! kernel, the metric variant, the boundary weight and the regularization
//! constants.

use crate::error::{Error, Result};
use crate::geometry::{AnnulusGeometry, Location, MetricSpec, Point, PolarPoint};
use crate::quad;
use crate::scalar::Real;
use std::f64::consts::PI;

/// Truncation control for the mode sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenSeriesConfig {
    pub n_modes: usize,
    pub tail_tolerance: f64,
}

impl Default for GreenSeriesConfig {
    fn default() -> Self {
        Self { n_modes: 64, tail_tolerance: 1e-10 }
    }
}

/// Hard cap on the automatically increased truncation.
pub const MAX_MODES: usize = 200_000;

impl GreenSeriesConfig {
    pub fn new(n_modes: usize, tail_tolerance: f64) -> Result<Self> {
        if n_modes == 0 || !(tail_tolerance > 0.0) {
            return Err(Error::Usage("n_modes must be ≥ 1 and tail_tolerance > 0".into()));
        }
        Ok(Self { n_modes, tail_tolerance })
    }

    /// Truncation meeting the tail bound of `2 Σ_{n>N} g_n(r, ρ)` on the
    /// standard annulus.
    pub fn modes_for(&self, r: f64, rho: f64, tau: f64) -> usize {
        let (lo, hi) = if r <= rho { (r, rho) } else { (rho, r) };
        let t2 = tau * tau;
        let q = [lo / (hi * t2), 1.0 / (lo * hi * t2), lo * hi / (t2 * t2), hi / (lo * t2 * t2)]
            .into_iter()
            .fold(0.0f64, f64::max)
            .min(1.0 / t2);
        let pref = 4.0 / ((1.0 - 1.0 / t2) * (1.0 - q));
        let mut n = self.n_modes;
        while n < MAX_MODES && pref * q.powi(n as i32 + 1) / (n as f64 + 1.0) > self.tail_tolerance {
            n = (n * 2).min(MAX_MODES);
        }
        n
    }

    /// Upper bound on the neglected tail at truncation `n`.
    pub fn tail_bound(n: usize, tau: f64) -> f64 {
        let q = 1.0 / (tau * tau);
        4.0 * q.powi(n as i32 + 1) / ((n as f64 + 1.0) * (1.0 - q) * (1.0 - q))
    }
}

fn check_radius<T: Real>(x: T, geom: &AnnulusGeometry<T>) -> Result<()> {
    let tol = T::lit(1e-12);
    if x < geom.a - tol || x > geom.b + tol {
        Err(Error::Domain(format!("radius {x:?} outside [{:?}, {:?}]", geom.a, geom.b)))
    } else {
        Ok(())
    }
}

/// Zero mode `g₀(r, ρ)` for radii `(a, b)` with the symmetric constant `α = 1/(a+b)`.
pub fn g0<T: Real>(r: T, rho: T, a: T, b: T) -> T {
    let (lo, hi) = if r <= rho { (r, rho) } else { (rho, r) };
    let s = a + b;
    (a * a * (lo / a).ln() + b * b * (b / hi).ln() + a * b * (lo / hi).ln()) / (s * s)
}

/// Zero mode for an arbitrary Neumann constant `α`, with `β = (αa − 1)/b`.
/// Only `α = 1/(a+b)` yields a symmetric kernel.
pub fn g0_general(r: f64, rho: f64, a: f64, b: f64, alpha: f64) -> f64 {
    let common = alpha * a * (a * (r / a).ln() + b * (r / b).ln()) / (a + b) - b / (a + b) * (rho / b).ln();
    if r <= rho {
        common
    } else {
        (rho / r).ln() + common
    }
}

/// `g̃_n(r, ρ)` for radii `(a, b)`, in a form whose ratios never exceed 1.
pub fn g_tilde<T: Real>(n: usize, r: T, rho: T, a: T, b: T) -> T {
    let (lo, hi) = if r <= rho { (r, rho) } else { (rho, r) };
    let k = n as i32;
    let nn = T::from_usize(n).expect("mode index");
    let two = T::lit(2.0);
    let one = T::one();
    ((lo / hi).powi(k) + (a * a / (lo * hi)).powi(k)) * (one + (hi / b).powi(2 * k)) / (two * nn * (one - (a / b).powi(2 * k)))
}

/// Regular part `g_n = (a/b)^{2n} g̃_n`.
pub fn g_reg<T: Real>(n: usize, r: T, rho: T, a: T, b: T) -> T {
    (a / b).powi(2 * n as i32) * g_tilde(n, r, rho, a, b)
}

/// Radial covariance of angular mode `n`: `g₀` for `n = 0`, `g̃_n` otherwise.
pub fn mode_covariance<T: Real>(n: usize, r: T, rho: T, geom: &AnnulusGeometry<T>) -> Result<T> {
    check_radius(r, geom)?;
    check_radius(rho, geom)?;
    Ok(if n == 0 { g0(r, rho, geom.a, geom.b) } else { g_tilde(n, r, rho, geom.a, geom.b) })
}

/// Regular mode `g_n(r, ρ)` on the standard annulus.
pub fn regular_mode<T: Real>(n: usize, r: T, rho: T, tau: T) -> Result<T> {
    if n == 0 {
        return Err(Error::Usage("regular_mode needs n ≥ 1; use mode_covariance for n = 0".into()));
    }
    let geom = AnnulusGeometry::standard(tau)?;
    check_radius(r, &geom)?;
    check_radius(rho, &geom)?;
    Ok(g_reg(n, r, rho, T::one(), tau))
}

/// Squared moduli `|1 − z w̄|², |τ² − z w̄|², |z − w|², D²` in cancellation-free form.
fn kernel_moduli<T: Real>(z: &PolarPoint<T>, w: &PolarPoint<T>, tau: T) -> [T; 4] {
    let (r, rho) = (z.r, w.r);
    let half = T::lit(0.5);
    let s = ((z.theta - w.theta) * half).sin();
    let s2 = T::lit(4.0) * s * s;
    let t2 = tau * tau;
    let sq = |x: T| x * x;
    let one = T::one();
    let d = if r < rho { sq(t2 * r - rho) + t2 * r * rho * s2 } else { sq(r - t2 * rho) + t2 * r * rho * s2 };
    [sq(one - r * rho) + r * rho * s2, sq(t2 - r * rho) + t2 * r * rho * s2, sq(r - rho) + r * rho * s2, d]
}

/// Closed-form log kernel of the flat Green's function on the standard annulus.
pub fn log_kernel<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T) -> Result<T> {
    let m = kernel_moduli(z, zp, tau);
    if m[2] <= T::zero() {
        return Err(Error::Singularity("log kernel evaluated on the diagonal".into()));
    }
    let half = T::lit(0.5);
    let num = (tau.powi(4) * z.r * z.r * zp.r * zp.r).ln();
    Ok(num - half * (m[0].ln() + m[1].ln() + m[2].ln() + m[3].ln()))
}

fn mode_sum<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T, n_modes: usize) -> T {
    // g_n = τ^{-2n}((lo/hi)^n + (lo·hi)^{-n})(1 + (hi/τ)^{2n}) / (2n(1 − τ^{-2n})),
    // with all powers and cos nΔ advanced by recurrence.
    let one = T::one();
    let (lo, hi) = if z.r <= zp.r { (z.r, zp.r) } else { (zp.r, z.r) };
    let t2 = tau * tau;
    let (q1, q2, q3, q4) = (lo / hi, one / (lo * hi), hi * hi / t2, one / t2);
    let (mut p1, mut p2, mut p3, mut p4) = (one, one, one, one);
    let c1 = (z.theta - zp.theta).cos();
    let (mut c_prev, mut c) = (one, c1);
    let two = T::lit(2.0);
    let mut s = T::zero();
    for n in 1..=n_modes {
        p1 = p1 * q1;
        p2 = p2 * q2;
        p3 = p3 * q3;
        p4 = p4 * q4;
        let nn = T::from_usize(n).expect("mode index");
        s = s + p4 * (p1 + p2) * (one + p3) / (two * nn * (one - p4)) * c;
        let next = two * c1 * c - c_prev;
        c_prev = c;
        c = next;
    }
    g0(z.r, zp.r, one, tau) + (s + s)
}

fn modes<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T, cfg: &GreenSeriesConfig) -> usize {
    cfg.modes_for(z.r.to_f64_lossy(), zp.r.to_f64_lossy(), tau.to_f64_lossy())
}

/// Flat Green's function `G(z, z')` on the standard annulus (mode sum plus log kernel).
pub fn green_flat<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T, cfg: &GreenSeriesConfig) -> Result<T> {
    let geom = AnnulusGeometry::standard(tau)?;
    geom.check(z)?;
    geom.check(zp)?;
    let lk = log_kernel(z, zp, tau)?;
    Ok(mode_sum(z, zp, tau, modes(z, zp, tau, cfg)) + lk)
}

/// Regular part `G(z, z') + ln|z − z'|`, finite on the diagonal away from the boundary.
pub fn green_regular<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T, cfg: &GreenSeriesConfig) -> T {
    let m = kernel_moduli(z, zp, tau);
    let half = T::lit(0.5);
    let num = (tau.powi(4) * z.r * z.r * zp.r * zp.r).ln();
    mode_sum(z, zp, tau, modes(z, zp, tau, cfg)) + num - half * (m[0].ln() + m[1].ln() + m[3].ln())
}

/// Smooth part `K(z, w) = G(z, w) + ln|z − w| + ln|1/z̄ − w| + ln|τ²/z̄ − w|`,
/// evaluated without cancellation. The three subtracted logarithms carry
/// every singularity of `G` on the closed annulus.
pub fn green_smooth(z: &Point, w: &Point, tau: f64, cfg: &GreenSeriesConfig) -> f64 {
    let m = kernel_moduli(z, w, tau);
    mode_sum(z, w, tau, modes(z, w, tau, cfg)) + (tau.powi(4) * w.r * w.r).ln() - 0.5 * m[3].ln()
}

/// Geometric rate of the `g̃_n` sum at radii `(r, ρ)` on the standard annulus.
pub fn tilde_rate(r: f64, rho: f64, tau: f64) -> f64 {
    let (lo, hi) = if r <= rho { (r, rho) } else { (rho, r) };
    let t2 = tau * tau;
    [lo / hi, 1.0 / (lo * hi), lo * hi / t2, hi / (lo * t2)].into_iter().fold(0.0, f64::max)
}

/// Alternative assembly `g₀ + 2 Σ g̃_n cos n(θ − θ')`. Requires distinct radii
/// away from the boundary reflections so that the series converges
/// geometrically.
pub fn green_flat_tilde<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, tau: T, cfg: &GreenSeriesConfig) -> Result<T> {
    let q = tilde_rate(z.r.to_f64_lossy(), zp.r.to_f64_lossy(), tau.to_f64_lossy());
    if q >= 1.0 {
        return Err(Error::Domain("g̃ series does not converge geometrically at this pair".into()));
    }
    let mut n = cfg.n_modes;
    let bound = |n: usize| 8.0 * q.powi(n as i32 + 1) / ((n as f64 + 1.0) * (1.0 - q) * (1.0 - 1.0 / (tau.to_f64_lossy().powi(2))));
    while n < MAX_MODES && bound(n) > cfg.tail_tolerance {
        n = (n * 2).min(MAX_MODES);
    }
    let one = T::one();
    let d = z.theta - zp.theta;
    let mut s = T::zero();
    for k in 1..=n {
        let kk = T::from_usize(k).expect("mode index");
        s = s + g_tilde(k, z.r, zp.r, one, tau) * (kk * d).cos();
    }
    Ok(g0(z.r, zp.r, one, tau) + s + s)
}

/// Green's function of the annulus with radii `(a, b)`, by scaling to the standard case.
pub fn green_general<T: Real>(z: &PolarPoint<T>, zp: &PolarPoint<T>, geom: &AnnulusGeometry<T>, cfg: &GreenSeriesConfig) -> Result<T> {
    let s = |p: &PolarPoint<T>| PolarPoint { r: p.r / geom.a, theta: p.theta };
    green_flat(&s(z), &s(zp), geom.tau(), cfg)
}

/// Neumann constants `(α, β) = (∂_r g₀|_{r=a}, ∂_r g₀|_{r=b})` recovered by
/// one-sided finite differences of the symmetric zero mode.
pub fn neumann_constants(a: f64, b: f64) -> (f64, f64) {
    let h = 1e-5 * (b - a);
    let mid = 0.5 * (a + b);
    let f = |r: f64| g0(r, mid, a, b);
    let alpha = (-3.0 * f(a) + 4.0 * f(a + h) - f(a + 2.0 * h)) / (2.0 * h);
    let beta = (3.0 * f(b) - 4.0 * f(b - h) + f(b - 2.0 * h)) / (2.0 * h);
    (alpha, beta)
}

/// Fourier data of `w = e^{φ/2}` on a boundary circle: `(ŵ₀, [(ŵ_n^c, ŵ_n^s)])`
/// with `ŵ_n^c = (1/2π)∫ w cos nθ dθ`.
#[derive(Debug, Clone)]
struct CircleWeight {
    radius: f64,
    c0: f64,
    coeffs: Vec<(f64, f64)>,
}

const WEIGHT_NODES: usize = 256;

impl CircleWeight {
    fn new(m: &MetricSpec, radius: f64) -> Self {
        let n = WEIGHT_NODES;
        let h = 2.0 * PI / n as f64;
        let w: Vec<f64> = (0..n).map(|k| (m.phi(radius, h * k as f64) / 2.0).exp()).collect();
        let c0 = w.iter().sum::<f64>() / n as f64;
        let coeffs = if m.is_radial() {
            Vec::new()
        } else {
            (1..n / 2)
                .map(|j| {
                    let (mut c, mut s) = (0.0, 0.0);
                    for (k, wk) in w.iter().enumerate() {
                        let t = h * (j * k) as f64;
                        c += wk * t.cos();
                        s += wk * t.sin();
                    }
                    (c / n as f64, s / n as f64)
                })
                .collect()
        };
        Self { radius, c0, coeffs }
    }

    fn length(&self) -> f64 {
        2.0 * PI * self.radius * self.c0
    }
}

/// Boundary data of a metric needed by `G_g` and `c_g`.
#[derive(Debug, Clone)]
pub struct BoundaryAverager {
    tau: f64,
    circles: [CircleWeight; 2],
}

impl BoundaryAverager {
    pub fn new(m: &MetricSpec, tau: f64) -> Self {
        Self { tau, circles: [CircleWeight::new(m, 1.0), CircleWeight::new(m, tau)] }
    }

    /// `(λ_∂g(∂Ω₁), λ_∂g(∂Ω_τ))`.
    pub fn lengths(&self) -> (f64, f64) {
        (self.circles[0].length(), self.circles[1].length())
    }

    pub fn total_length(&self) -> f64 {
        self.circles[0].length() + self.circles[1].length()
    }

    /// `∫_{∂Ω} G(z, ·) dλ_∂g`.
    pub fn integral(&self, z: &Point) -> f64 {
        let mut total = 0.0;
        for c in &self.circles {
            let mut s = g0(z.r, c.radius, 1.0, self.tau) * c.c0;
            for (j, (wc, ws)) in c.coeffs.iter().enumerate() {
                let n = j + 1;
                let t = n as f64 * z.theta;
                s += 2.0 * g_tilde(n, z.r, c.radius, 1.0, self.tau) * (wc * t.cos() + ws * t.sin());
            }
            total += 2.0 * PI * c.radius * s;
        }
        total
    }

    /// `m_∂g(G(z, ·))`.
    pub fn mean(&self, z: &Point) -> f64 {
        self.integral(z) / self.total_length()
    }

    /// `m_∂g(G(·, ·))`.
    pub fn double_mean(&self) -> f64 {
        let mut total = 0.0;
        for ci in &self.circles {
            for cj in &self.circles {
                let mut s = g0(ci.radius, cj.radius, 1.0, self.tau) * ci.c0 * cj.c0;
                for (j, ((a, b), (c, d))) in ci.coeffs.iter().zip(&cj.coeffs).enumerate() {
                    s += 2.0 * g_tilde(j + 1, ci.radius, cj.radius, 1.0, self.tau) * (a * c + b * d);
                }
                total += 4.0 * PI * PI * ci.radius * cj.radius * s;
            }
        }
        total / self.total_length().powi(2)
    }
}

/// Green's function `G_g` of the metric `g = e^φ dx²`.
pub fn green_metric(z: &Point, zp: &Point, m: &MetricSpec, tau: f64, cfg: &GreenSeriesConfig) -> Result<f64> {
    let g = green_flat(z, zp, tau, cfg)?;
    if m.is_flat() {
        return Ok(g);
    }
    let avg = BoundaryAverager::new(m, tau);
    Ok(g - avg.mean(z) - avg.mean(zp) + avg.double_mean())
}

/// Boundary weight `c_g(z)`. Boundary lengths enter relative to the total
/// boundary length in `g`, which is the normalization that makes the Neumann
/// compatibility identity hold for non-constant metrics.
pub fn c_weight(z: &Point, m: &MetricSpec, tau: f64) -> Result<f64> {
    let geom = AnnulusGeometry::standard(tau)?;
    let avg = BoundaryAverager::new(m, tau);
    let (l1, lt) = avg.lengths();
    let total = l1 + lt;
    let (s1, st) = (l1 / total, lt / total);
    let e = (-m.phi_at(z) / 2.0).exp();
    match geom.location(z) {
        Location::Inner => Ok(e * (1.0 + tau * s1 - st)),
        Location::Outer => Ok(e * (1.0 - s1 + st / tau)),
        Location::Interior => Err(Error::Usage("c_g is defined on the boundary only".into())),
    }
}

/// Regularization constants at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConstants {
    /// `g_P(x)`; `None` on the boundary where it is infinite.
    pub g_p: Option<f64>,
    pub h: f64,
    pub h_boundary: Option<f64>,
}

/// `Σ_{n≥1} g_n(r, r)` with the configured tail tolerance.
pub fn diagonal_mode_sum(r: f64, tau: f64, cfg: &GreenSeriesConfig) -> f64 {
    let n = cfg.modes_for(r, r, tau);
    (1..=n).map(|k| g_reg(k, r, r, 1.0, tau)).sum()
}

pub fn g_p(r: f64, tau: f64) -> f64 {
    1.0 / ((1.0 - r * r).abs() * (tau * tau - r * r).abs())
}

/// `h(x) = g₀(r,r) + 2Σg_n(r,r) + ln(τ⁴r³/(τ²−1))`.
pub fn h_bulk(r: f64, tau: f64, cfg: &GreenSeriesConfig) -> f64 {
    g0(r, r, 1.0, tau) + 2.0 * diagonal_mode_sum(r, tau, cfg) + (tau.powi(4) * r.powi(3) / (tau * tau - 1.0)).ln()
}

/// Normalized half-arc double integral
/// `(1/π²)∫₀^π∫₀^π ln|2 sin((u−v)/2)·2 sin((u+v)/2)| du dv`, by singularity
/// subtraction: the logarithmic parts integrate in closed form and the smooth
/// remainders by tensor Gauss-Legendre with `order` nodes per axis.
pub fn boundary_arc_integral(order: usize) -> f64 {
    let l = PI;
    // ∫∫ ln|u−v| and ∫∫ ln(u+v) over [0,L]²
    let diff = l * l * (l.ln() - 1.5);
    let sum = l * l * (2.0 * 2f64.ln() + l.ln() - 1.5);
    let rule = quad::gl(order);
    let mut smooth = 0.0;
    for (u, wu) in rule.mapped(0.0, l) {
        for (v, wv) in rule.mapped(0.0, l) {
            let d = u - v;
            let s = u + v;
            let f1 = if d.abs() < 1e-8 { 0.0 } else { (2.0 * (d / 2.0).sin() / d).abs().ln() };
            let f2 = (2.0 * (s / 2.0).sin() / (s * (2.0 * PI - s))).ln();
            smooth += wu * wv * (f1 + f2);
        }
    }
    // ln(2π − u − v) integrates to the same closed form as ln(u + v)
    (diff + 2.0 * sum + smooth) / (PI * PI)
}

/// `h_∂(x)` for a boundary point of the standard annulus.
pub fn h_boundary(x: &Point, tau: f64, cfg: &GreenSeriesConfig, arc_order: usize) -> Result<f64> {
    let geom = AnnulusGeometry::standard(tau)?;
    let arc = boundary_arc_integral(arc_order);
    match geom.location(x) {
        Location::Inner => Ok(g0(1.0, 1.0, 1.0, tau) + 2.0 * diagonal_mode_sum(1.0, tau, cfg) + (tau.powi(4) / (tau * tau - 1.0).powi(2)).ln() - arc),
        Location::Outer => Ok(g0(tau, tau, 1.0, tau) + 2.0 * diagonal_mode_sum(tau, tau, cfg) + (tau.powi(6) / (tau * tau - 1.0).powi(2)).ln() - arc),
        Location::Interior => Err(Error::Usage("h_∂ is defined on the boundary only".into())),
    }
}

/// Default arc quadrature order for `h_∂`.
pub const ARC_ORDER: usize = 48;

/// `g_P`, `h` and (on the boundary) `h_∂` at `x`.
pub fn regularization_constants(x: &Point, tau: f64, cfg: &GreenSeriesConfig) -> Result<RegularizationConstants> {
    let geom = AnnulusGeometry::standard(tau)?;
    geom.check(x)?;
    let loc = geom.location(x);
    let h = h_bulk(x.r, tau, cfg);
    Ok(match loc {
        Location::Interior => RegularizationConstants { g_p: Some(g_p(x.r, tau)), h, h_boundary: None },
        _ => RegularizationConstants { g_p: None, h, h_boundary: Some(h_boundary(x, tau, cfg, ARC_ORDER)?) },
    })
}

/// `∫_{∂Ω} G(·, z') dλ_∂` by the periodic trapezoid with `nodes` points per circle.
pub fn boundary_integral(zp: &Point, tau: f64, cfg: &GreenSeriesConfig, nodes: usize) -> Result<f64> {
    let mut total = 0.0;
    for &rb in &[1.0, tau] {
        let mut err = None;
        let v = quad::periodic_trapezoid(nodes, 0.0, |t| match green_flat(&Point::new(rb, t), zp, tau, cfg) {
            Ok(g) => g,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        total += rb * v;
    }
    Ok(total)
}

/// Residual of the Green-Riemann identity for `f = Re z` at an interior `z`:
/// `−∫_{∂Ω} G(z,·) ∂_n f dλ_∂ + 2π f(z)` (here `Δf = 0`, `m_∂(f) = 0`).
pub fn green_riemann_residual_re_z(z: &Point, tau: f64, cfg: &GreenSeriesConfig, nodes: usize) -> Result<f64> {
    let mut bnd = 0.0;
    for &(rb, sign) in &[(1.0, -1.0), (tau, 1.0)] {
        let v = quad::periodic_trapezoid(nodes, 0.0, |t| {
            green_flat(z, &Point::new(rb, t), tau, cfg).unwrap_or(f64::NAN) * sign * t.cos()
        });
        bnd += rb * v;
    }
    let res = -bnd + 2.0 * PI * z.x();
    if res.is_finite() {
        Ok(res)
    } else {
        Err(Error::Evaluation("non-finite Green-Riemann residual".into()))
    }
}

/// `∂G/∂r` at a boundary radius `r_b ∈ {1, τ}` by one-sided second-order
/// differences. For `ρ` on the same circle the finite-difference is applied
/// to `g₀` alone, the only term carrying the case split.
pub fn boundary_radial_derivative(rb: f64, zp: &Point, tau: f64, cfg: &GreenSeriesConfig) -> Result<f64> {
    let geom = Geometry::standard(tau)?;
    let same = (zp.r - rb).abs() < 1e-12;
    let h = 1e-4 * (tau - 1.0);
    let dir = if geom.location(&Point::new(rb, 0.0)) == Location::Inner { 1.0 } else { -1.0 };
    let f = |r: f64| -> Result<f64> {
        if same {
            Ok(g0(r, zp.r, 1.0, tau))
        } else {
            green_flat(&Point::new(r, zp.theta + 0.7), zp, tau, cfg)
        }
    };
    let d = (-3.0 * f(rb)? + 4.0 * f(rb + dir * h)? - f(rb + 2.0 * dir * h)?) / (2.0 * h);
    Ok(dir * d)
}

type Geometry = AnnulusGeometry<f64>;
