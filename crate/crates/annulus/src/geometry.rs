//! Annulus domain, conformal metrics, automorphisms, the reference map and
//! bulk/boundary quadrature.

use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::Real;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Annulus `{a < |z| < b}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGeometry<T: Real> {
    pub a: T,
    pub b: T,
}

impl<T: Real> AnnulusGeometry<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b > a && b.is_finite()) {
            return Err(Error::Domain(format!("radii must satisfy 0 < a < b, got a={a:?}, b={b:?}")));
        }
        Ok(Self { a, b })
    }

    /// Standard annulus `{1 < |z| < τ}`.
    pub fn standard(tau: T) -> Result<Self> {
        Self::new(T::one(), tau)
    }

    /// Conformal modulus τ = b/a.
    pub fn tau(&self) -> T {
        self.b / self.a
    }

    fn tol(&self) -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(8.0) * self.b)
    }

    pub fn contains(&self, p: &PolarPoint<T>) -> bool {
        p.r >= self.a - self.tol() && p.r <= self.b + self.tol()
    }

    pub fn location(&self, p: &PolarPoint<T>) -> Location {
        if (p.r - self.a).abs() < self.tol() {
            Location::Inner
        } else if (p.r - self.b).abs() < self.tol() {
            Location::Outer
        } else {
            Location::Interior
        }
    }

    pub fn check(&self, p: &PolarPoint<T>) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point r={:?} outside [{:?}, {:?}]", p.r, self.a, self.b)))
        }
    }
}

pub type Annulus = AnnulusGeometry<f64>;

/// Position of a point relative to the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inner,
    Outer,
    Interior,
}

/// Point in polar coordinates with angle normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolarPoint<T: Real> {
    pub r: T,
    pub theta: T,
}

impl<T: Real> PolarPoint<T> {
    pub fn new(r: T, theta: T) -> Self {
        Self { r, theta: normalize_angle(theta) }
    }

    pub fn from_cartesian(x: T, y: T) -> Self {
        Self::new(x.hypot(y), y.atan2(x))
    }

    pub fn x(&self) -> T {
        self.r * self.theta.cos()
    }

    pub fn y(&self) -> T {
        self.r * self.theta.sin()
    }
}

pub type Point = PolarPoint<f64>;

pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut t = theta % two_pi;
    if t < T::zero() {
        t = t + two_pi;
    }
    if t >= two_pi {
        t = t - two_pi;
    }
    t
}

/// Conformal automorphism `z ↦ e^{iθ₀} z` or `z ↦ e^{iθ₀} ab / z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalAutomorphism<T: Real> {
    pub rotation_angle: T,
    pub invert: bool,
}

impl<T: Real> ConformalAutomorphism<T> {
    pub fn rotation(angle: T) -> Self {
        Self { rotation_angle: angle, invert: false }
    }

    pub fn inversion() -> Self {
        Self { rotation_angle: T::zero(), invert: true }
    }

    /// Image of `z` and `|ψ'(z)|`.
    pub fn apply(&self, z: &PolarPoint<T>, geom: &AnnulusGeometry<T>) -> Result<(PolarPoint<T>, T)> {
        geom.check(z)?;
        if self.invert {
            let ab = geom.a * geom.b;
            Ok((PolarPoint::new(ab / z.r, self.rotation_angle - z.theta), ab / (z.r * z.r)))
        } else {
            Ok((PolarPoint::new(z.r, z.theta + self.rotation_angle), T::one()))
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        match (self.invert, other.invert) {
            (false, false) => Self::rotation(self.rotation_angle + other.rotation_angle),
            (false, true) => Self { rotation_angle: self.rotation_angle + other.rotation_angle, invert: true },
            (true, false) => Self { rotation_angle: self.rotation_angle - other.rotation_angle, invert: true },
            (true, true) => Self::rotation(self.rotation_angle - other.rotation_angle),
        }
    }
}

pub type Automorphism = ConformalAutomorphism<f64>;

/// Radial-affine identification of the reference annulus `(1, 2)` with `(1, τ)`.
pub fn f_tau_map<T: Real>(tau: T, z: &PolarPoint<T>) -> Result<PolarPoint<T>> {
    let one = T::one();
    let tol = T::lit(1e-12);
    if z.r < one - tol || z.r > one + one + tol {
        return Err(Error::Domain(format!("reference radius {:?} outside [1, 2]", z.r)));
    }
    Ok(PolarPoint::new((tau - one) * (z.r - one) + one, z.theta))
}

pub fn f_tau_inverse<T: Real>(tau: T, z: &PolarPoint<T>) -> Result<PolarPoint<T>> {
    let one = T::one();
    let tol = T::lit(1e-12);
    if z.r < one - tol || z.r > tau + tol {
        return Err(Error::Domain(format!("radius {:?} outside [1, τ]", z.r)));
    }
    Ok(PolarPoint::new((z.r - one) / (tau - one) + one, z.theta))
}

/// User-supplied conformal log-factor.
pub type PhiFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Tabulated φ on a tensor grid, bilinear in `(r, θ)` and periodic in θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGrid {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// Row-major `values[i * angles.len() + j]` at `(radii[i], angles[j])`.
    pub values: Vec<f64>,
}

impl PhiGrid {
    /// Parses CSV rows `r,theta,phi` (an optional header line is skipped).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Data(format!("expected 3 columns, got `{line}`")));
            }
            match (fields[0].parse::<f64>(), fields[1].parse::<f64>(), fields[2].parse::<f64>()) {
                (Ok(r), Ok(t), Ok(p)) => rows.push((r, normalize_angle(t), p)),
                _ if rows.is_empty() => continue,
                _ => return Err(Error::Data(format!("unparseable row `{line}`"))),
            }
        }
        let mut radii: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut angles: Vec<f64> = rows.iter().map(|r| r.1).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        if radii.len() < 2 || angles.is_empty() || radii.len() * angles.len() != rows.len() {
            return Err(Error::Data("grid must be a full tensor product with at least two radii".into()));
        }
        let mut values = vec![f64::NAN; radii.len() * angles.len()];
        for (r, t, p) in rows {
            let i = radii.iter().position(|&x| (x - r).abs() < 1e-12).expect("radius present");
            let j = angles.iter().position(|&x| (x - t).abs() < 1e-12).expect("angle present");
            values[i * angles.len() + j] = p;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite or missing φ values".into()));
        }
        Ok(Self { radii, angles, values })
    }

    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        let nr = self.radii.len();
        let na = self.angles.len();
        let r = r.clamp(self.radii[0], self.radii[nr - 1]);
        let i = match self.radii.iter().position(|&x| x > r) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => nr - 2,
        };
        let fr = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        let t = normalize_angle(theta);
        let (j0, j1, ft) = if na == 1 {
            (0, 0, 0.0)
        } else {
            let j = self.angles.iter().rposition(|&x| x <= t).unwrap_or(na - 1);
            let j1 = (j + 1) % na;
            let lo = self.angles[j];
            let mut span = self.angles[j1] - lo;
            let mut dt = t - lo;
            if span <= 0.0 {
                span += 2.0 * PI;
            }
            if dt < 0.0 {
                dt += 2.0 * PI;
            }
            (j, j1, dt / span)
        };
        let v = |a: usize, b: usize| self.values[a * na + b];
        let lo = v(i, j0) * (1.0 - ft) + v(i, j1) * ft;
        let hi = v(i + 1, j0) * (1.0 - ft) + v(i + 1, j1) * ft;
        lo * (1.0 - fr) + hi * fr
    }
}

/// Conformal log-factor φ of the metric `g = e^φ dx²`.
#[derive(Clone)]
pub enum MetricSpec {
    Flat,
    /// φ = −2 ln(2π|z|), the flat cylinder seen on the annulus.
    CylinderPullback,
    Constant(f64),
    /// φ = p ln|z|.
    RadialPower(f64),
    Grid(Arc<PhiGrid>),
    Custom { name: String, phi: PhiFn },
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricSpec({})", self.name())
    }
}

impl MetricSpec {
    /// Parses `flat`, `cylinder-pullback`, `constant:c`, `radial-power:p`.
    /// Grid files are loaded with [`MetricSpec::from_grid_csv`].
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        if s == "flat" {
            return Ok(Self::Flat);
        }
        if s == "cylinder-pullback" {
            return Ok(Self::CylinderPullback);
        }
        let parse_num = |v: &str| v.parse::<f64>().map_err(|_| Error::Usage(format!("bad metric parameter in `{spec}`")));
        if let Some(v) = s.strip_prefix("constant:") {
            return Ok(Self::Constant(parse_num(v)?));
        }
        if let Some(v) = s.strip_prefix("radial-power:") {
            return Ok(Self::RadialPower(parse_num(v)?));
        }
        Err(Error::Usage(format!("unknown metric `{spec}`")))
    }

    pub fn from_grid_csv(text: &str) -> Result<Self> {
        Ok(Self::Grid(Arc::new(PhiGrid::from_csv(text)?)))
    }

    pub fn custom(name: &str, phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom { name: name.to_string(), phi: Arc::new(phi) }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Flat => "flat".into(),
            Self::CylinderPullback => "cylinder-pullback".into(),
            Self::Constant(c) => format!("constant:{c}"),
            Self::RadialPower(p) => format!("radial-power:{p}"),
            Self::Grid(_) => "grid".into(),
            Self::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Self::Flat) || matches!(self, Self::Constant(c) if *c == 0.0) || matches!(self, Self::RadialPower(p) if *p == 0.0)
    }

    /// True when φ depends on |z| only.
    pub fn is_radial(&self) -> bool {
        matches!(self, Self::Flat | Self::CylinderPullback | Self::Constant(_) | Self::RadialPower(_))
            || matches!(self, Self::Grid(g) if g.angles.len() == 1)
    }

    pub fn phi(&self, r: f64, theta: f64) -> f64 {
        match self {
            Self::Flat => 0.0,
            Self::CylinderPullback => -2.0 * (2.0 * PI * r).ln(),
            Self::Constant(c) => *c,
            Self::RadialPower(p) => p * r.ln(),
            Self::Grid(g) => g.eval(r, theta),
            Self::Custom { phi, .. } => phi(r, theta),
        }
    }

    pub fn phi_at(&self, p: &Point) -> f64 {
        self.phi(p.r, p.theta)
    }

    fn fd_step(geom: &Annulus) -> f64 {
        1e-5 * (geom.b - geom.a)
    }

    fn fd2_step(geom: &Annulus) -> f64 {
        1e-3 * (geom.b - geom.a)
    }

    /// `(∂_r φ, r⁻¹ ∂_θ φ)`.
    pub fn grad(&self, geom: &Annulus, r: f64, theta: f64) -> (f64, f64) {
        match self {
            Self::Flat | Self::Constant(_) => (0.0, 0.0),
            Self::CylinderPullback => (-2.0 / r, 0.0),
            Self::RadialPower(p) => (p / r, 0.0),
            _ => {
                let h = Self::fd_step(geom);
                let dr = (self.phi(r + h, theta) - self.phi(r - h, theta)) / (2.0 * h);
                let ht = h / r;
                let dt = (self.phi(r, theta + ht) - self.phi(r, theta - ht)) / (2.0 * ht);
                (dr, dt / r)
            }
        }
    }

    /// Flat Laplacian of φ.
    pub fn laplacian(&self, geom: &Annulus, r: f64, theta: f64) -> f64 {
        match self {
            Self::Flat | Self::Constant(_) | Self::CylinderPullback | Self::RadialPower(_) => 0.0,
            _ => {
                let h = Self::fd2_step(geom);
                let f0 = self.phi(r, theta);
                let frr = (self.phi(r + h, theta) - 2.0 * f0 + self.phi(r - h, theta)) / (h * h);
                let fr = (self.phi(r + h, theta) - self.phi(r - h, theta)) / (2.0 * h);
                let ht = h / r;
                let ftt = (self.phi(r, theta + ht) - 2.0 * f0 + self.phi(r, theta - ht)) / (ht * ht);
                frr + fr / r + ftt / (r * r)
            }
        }
    }

    /// Flat outward normal derivative ∂_n φ at a boundary point.
    pub fn normal_derivative(&self, geom: &Annulus, p: &Point) -> Result<f64> {
        let (dr, _) = self.grad(geom, p.r, p.theta);
        match geom.location(p) {
            Location::Inner => Ok(-dr),
            Location::Outer => Ok(dr),
            Location::Interior => Err(Error::Usage("normal derivative requested at an interior point".into())),
        }
    }
}

/// Curvatures and measure scalings of `g = e^φ dx²` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    pub r_g: f64,
    pub k_g: Option<f64>,
    pub volume_scale: f64,
    pub line_scale: f64,
}

/// Flat geodesic curvature of the boundary circle through `p`.
pub fn flat_geodesic_curvature(geom: &Annulus, p: &Point) -> Result<f64> {
    match geom.location(p) {
        Location::Inner => Ok(-1.0 / geom.a),
        Location::Outer => Ok(1.0 / geom.b),
        Location::Interior => Err(Error::Usage("geodesic curvature requested at an interior point".into())),
    }
}

/// Scalar curvature, geodesic curvature (boundary only) and scale factors of `g`.
pub fn transformed_quantities(m: &MetricSpec, geom: &Annulus, x: &Point, on_boundary: bool) -> Result<Transformed> {
    geom.check(x)?;
    let phi = m.phi_at(x);
    let r_g = (-phi).exp() * (0.0 - m.laplacian(geom, x.r, x.theta));
    let k_g = if on_boundary {
        let k = flat_geodesic_curvature(geom, x)?;
        let dn = m.normal_derivative(geom, x)?;
        Some((-phi / 2.0).exp() * (k + dn / 2.0))
    } else {
        None
    };
    Ok(Transformed { r_g, k_g, volume_scale: phi.exp(), line_scale: (phi / 2.0).exp() })
}

/// Integration domain for [`quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Bulk,
    InnerBoundary,
    OuterBoundary,
    FullBoundary,
}

/// Radial panel size of the composite Gauss-Legendre rule.
const RADIAL_PANEL: usize = 16;

/// Radial nodes and weights of the composite rule with `order` nodes in total.
pub fn radial_rule(geom: &Annulus, order: usize) -> Vec<(f64, f64)> {
    let panels = order.div_ceil(RADIAL_PANEL).max(1);
    let per = order.div_ceil(panels).max(2);
    let h = (geom.b - geom.a) / panels as f64;
    (0..panels)
        .flat_map(|k| {
            let lo = geom.a + h * k as f64;
            quad::gl(per).mapped(lo, lo + h).collect::<Vec<_>>()
        })
        .collect()
}

/// ∫ f dλ_g over the bulk or ∫ f dλ_∂g over boundary circles: composite
/// Gauss-Legendre radially (`order` nodes) times the periodic trapezoid
/// angularly (`2·order` nodes).
pub fn quadrature<F: Fn(&Point) -> f64>(f: F, geom: &Annulus, m: &MetricSpec, domain: Domain, order: usize) -> Result<f64> {
    if order < 2 {
        return Err(Error::Usage("quadrature order must be at least 2".into()));
    }
    let na = 2 * order;
    let h = 2.0 * PI / na as f64;
    let eval = |p: Point| -> Result<f64> {
        let v = f(&p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("non-finite integrand at r={}, θ={}", p.r, p.theta)))
        }
    };
    let circle = |r: f64| -> Result<f64> {
        let mut s = 0.0;
        for k in 0..na {
            let p = Point::new(r, h * k as f64);
            s += eval(p)? * (m.phi_at(&p) / 2.0).exp();
        }
        Ok(s * h * r)
    };
    match domain {
        Domain::Bulk => {
            let mut total = 0.0;
            for (r, w) in radial_rule(geom, order) {
                let mut s = 0.0;
                for k in 0..na {
                    let p = Point::new(r, h * k as f64);
                    s += eval(p)? * m.phi_at(&p).exp();
                }
                total += w * r * s * h;
            }
            Ok(total)
        }
        Domain::InnerBoundary => circle(geom.a),
        Domain::OuterBoundary => circle(geom.b),
        Domain::FullBoundary => Ok(circle(geom.a)? + circle(geom.b)?),
    }
}

/// Boundary lengths `(λ_∂g(∂Ω_a), λ_∂g(∂Ω_b))`.
pub fn boundary_lengths(geom: &Annulus, m: &MetricSpec, order: usize) -> Result<(f64, f64)> {
    Ok((
        quadrature(|_| 1.0, geom, m, Domain::InnerBoundary, order)?,
        quadrature(|_| 1.0, geom, m, Domain::OuterBoundary, order)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> Annulus {
        Annulus::standard(2.0).unwrap()
    }

    #[test]
    fn flat_geodesic_curvatures() {
        let g = g2();
        let t = transformed_quantities(&MetricSpec::Flat, &g, &Point::new(1.0, 0.3), true).unwrap();
        assert_eq!(t.k_g, Some(-1.0));
        let t = transformed_quantities(&MetricSpec::Flat, &g, &Point::new(2.0, 0.3), true).unwrap();
        assert_eq!(t.k_g, Some(0.5));
        let t = transformed_quantities(&MetricSpec::Constant(0.7), &g, &Point::new(1.5, 0.3), false).unwrap();
        assert_eq!(t.r_g, 0.0);
        assert!((t.volume_scale - 0.7f64.exp()).abs() < 1e-15);
        assert!(transformed_quantities(&MetricSpec::Flat, &g, &Point::new(1.5, 0.0), true).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let g = g2();
        let flat = MetricSpec::Flat;
        let k = |p: &Point| if p.r < 1.5 { -1.0 } else { 0.5 };
        assert!(quadrature(k, &g, &flat, Domain::FullBoundary, 64).unwrap().abs() < 1e-13);
        let area = quadrature(|_| 1.0, &g, &flat, Domain::Bulk, 128).unwrap();
        assert!((area - 3.0 * PI).abs() < 1e-12);
        let cyl = MetricSpec::CylinderPullback;
        let grad2 = |p: &Point| {
            let (dr, dt) = cyl.grad(&g, p.r, p.theta);
            dr * dr + dt * dt
        };
        let v = quadrature(grad2, &g, &flat, Domain::Bulk, 128).unwrap();
        assert!((v - 8.0 * PI * 2f64.ln()).abs() < 1e-8);
        assert!(quadrature(|_| f64::NAN, &g, &flat, Domain::Bulk, 8).is_err());
    }

    #[test]
    fn automorphism_examples() {
        let g = g2();
        let (img, d) = Automorphism::rotation(PI / 2.0).apply(&Point::new(1.5, 0.0), &g).unwrap();
        assert!((img.r - 1.5).abs() < 1e-15 && (img.theta - PI / 2.0).abs() < 1e-15 && d == 1.0);
        let (img, d) = Automorphism::inversion().apply(&Point::new(1.5, 0.0), &g).unwrap();
        assert!((img.r - 4.0 / 3.0).abs() < 1e-15 && (d - 8.0 / 9.0).abs() < 1e-15);
        // centered finite difference of |ψ(z)| along the radial direction
        let h = 1e-6;
        let fd = ((2.0 / (1.5 - h)) - (2.0 / (1.5 + h))) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
        let (img, d) = Automorphism::inversion().apply(&Point::new(1.0, 0.0), &g).unwrap();
        assert!((img.r - 2.0).abs() < 1e-15 && d == 2.0);
    }

    #[test]
    fn f_tau_examples() {
        let z = f_tau_map(3.0, &Point::new(1.5, 0.4)).unwrap();
        assert!((z.r - 2.0).abs() < 1e-15 && (z.theta - 0.4).abs() < 1e-15);
        let z = f_tau_map(2.0, &Point::new(1.37, 0.4)).unwrap();
        assert!((z.r - 1.37).abs() < 1e-15);
        assert_eq!(f_tau_map(7.0, &Point::new(1.0, 1.0)).unwrap().r, 1.0);
        assert!(f_tau_map(7.0, &Point::new(2.5, 1.0)).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert!(matches!(MetricSpec::parse("constant:0.3").unwrap(), MetricSpec::Constant(c) if c == 0.3));
        assert!(matches!(MetricSpec::parse("radial-power:0.2").unwrap(), MetricSpec::RadialPower(p) if p == 0.2));
        assert!(MetricSpec::parse("nope").is_err());
        let grid = MetricSpec::from_grid_csv("r,theta,phi\n1,0,0\n2,0,1\n1,3.14159,0\n2,3.14159,1\n").unwrap();
        assert!((grid.phi(1.5, 1.0) - 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inversion_is_an_involution(r in 1.0f64..3.0, t in -7.0f64..7.0, tau in 1.1f64..3.0) {
                let g = Annulus::standard(tau).unwrap();
                let z = Point::new(1.0 + (tau - 1.0) * (r - 1.0) / 2.0, t);
                let inv = Automorphism::inversion();
                let (w, d) = inv.apply(&z, &g).unwrap();
                prop_assert!(g.contains(&w));
                let (back, d2) = inv.apply(&w, &g).unwrap();
                prop_assert!((back.r - z.r).abs() < 1e-12);
                prop_assert!(normalize_angle(back.theta - z.theta).abs() < 1e-12 || (normalize_angle(back.theta - z.theta).abs() - 2.0 * PI).abs() < 1e-12);
                prop_assert!((d * d2 - 1.0).abs() < 1e-12);
            }

            #[test]
            fn rotations_preserve_radius(r in 1.0f64..2.0, t in -7.0f64..7.0, a in -7.0f64..7.0) {
                let g = Annulus::standard(2.0).unwrap();
                let (w, d) = Automorphism::rotation(a).apply(&Point::new(r, t), &g).unwrap();
                prop_assert!(w.r == r && d == 1.0);
            }

            #[test]
            fn f_tau_round_trip(r in 1.0f64..2.0, t in 0.0f64..6.3, tau in 1.01f64..100.0) {
                let z = Point::new(r, t);
                let back = f_tau_inverse(tau, &f_tau_map(tau, &z).unwrap()).unwrap();
                prop_assert!((back.r - r).abs() < 1e-12 && back.theta == t);
            }
        }
    }
}
