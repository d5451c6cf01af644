//! Liouville partition functions on the annulus: drift and constant of the
//! Girsanov reduction, the zero-mode integral, Weyl and KPZ factors, a
//! lattice Monte-Carlo estimator at fixed regularization, and the fixed-τ
//! laws of the Liouville measures.

use crate::arcs::{arc_covariance, Arc, ArcQuadrature};
use crate::error::{Error, Result};
use crate::geometry::{quadrature, Annulus, Automorphism, Domain, Location, MetricSpec, Point};
use crate::gff::{curvature_shift, metric_arc};
use crate::gmc::{seiberg_classify, Classification};
use crate::greens::{g_p, green_flat, h_boundary, h_bulk, GreenSeriesConfig, ARC_ORDER};
use crate::lattice::{Lattice, RingKind};
use crate::mcstats::{Estimate, RngStream};
use crate::quad::adaptive_gk;
use crate::special::ln_gamma;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Coupling constants. `Q = γ/2 + 2/γ` is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqftParams {
    pub gamma: f64,
    pub mu: f64,
    pub mu_boundary: f64,
}

impl LqftParams {
    pub fn new(gamma: f64, mu: f64, mu_boundary: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::Parameter(format!("γ = {gamma} outside (0, 2)")));
        }
        if !(mu >= 0.0 && mu_boundary >= 0.0) || !(mu.is_finite() && mu_boundary.is_finite()) {
            return Err(Error::Parameter("cosmological constants must be finite and nonnegative".into()));
        }
        if mu + mu_boundary <= 0.0 {
            return Err(Error::Parameter("μ + μ∂ must be positive".into()));
        }
        Ok(Self { gamma, mu, mu_boundary })
    }

    pub fn q(&self) -> f64 {
        background_charge(self.gamma)
    }
}

pub fn background_charge(gamma: f64) -> f64 {
    gamma / 2.0 + 2.0 / gamma
}

/// Conformal weight `Δ_α = (α/2)(Q − α/2)`.
pub fn conformal_weight(alpha: f64, q: f64) -> f64 {
    alpha / 2.0 * (q - alpha / 2.0)
}

/// Marked point with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub point: Point,
    pub weight: f64,
}

/// Bulk insertions `(zᵢ, αᵢ)` and boundary insertions `(sⱼ, βⱼ)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InsertionSet {
    pub bulk: Vec<Insertion>,
    pub boundary: Vec<Insertion>,
}

impl InsertionSet {
    /// Validates positions against the annulus `(1, τ)`.
    pub fn new(bulk: Vec<Insertion>, boundary: Vec<Insertion>, tau: f64) -> Result<Self> {
        let geom = Annulus::standard(tau)?;
        for b in &bulk {
            if geom.location(&b.point) != Location::Interior || !geom.contains(&b.point) {
                return Err(Error::Domain(format!("bulk insertion at r = {} is not interior", b.point.r)));
            }
        }
        for s in &boundary {
            geom.check(&s.point)?;
            if geom.location(&s.point) == Location::Interior {
                return Err(Error::Domain(format!("boundary insertion at r = {} is not on ∂Ω", s.point.r)));
            }
        }
        let set = Self { bulk, boundary };
        let all: Vec<&Insertion> = set.iter().collect();
        for i in 0..all.len() {
            for j in 0..i {
                if distance(&all[i].point, &all[j].point) < 1e-12 {
                    return Err(Error::Domain("coincident insertion points".into()));
                }
            }
        }
        Ok(set)
    }

    pub fn single_bulk(point: Point, alpha: f64, tau: f64) -> Result<Self> {
        Self::new(vec![Insertion { point, weight: alpha }], vec![], tau)
    }

    pub fn single_boundary(point: Point, beta: f64, tau: f64) -> Result<Self> {
        Self::new(vec![], vec![Insertion { point, weight: beta }], tau)
    }

    /// `s = Σαᵢ + Σβⱼ/2`.
    pub fn s(&self) -> f64 {
        self.bulk.iter().map(|i| i.weight).sum::<f64>() + self.boundary.iter().map(|i| i.weight / 2.0).sum::<f64>()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Insertion> {
        self.bulk.iter().chain(self.boundary.iter())
    }

    /// Insertions with their field coefficients (`α` for bulk, `β/2` for boundary).
    fn coefficients(&self) -> Vec<(Point, f64, bool)> {
        self.bulk.iter().map(|i| (i.point, i.weight, true)).chain(self.boundary.iter().map(|i| (i.point, i.weight / 2.0, false))).collect()
    }
}

fn distance(a: &Point, b: &Point) -> f64 {
    (a.x() - b.x()).hypot(a.y() - b.y())
}

/// `H(x) = Σαᵢ G(x, zᵢ) + Σ(βⱼ/2) G(x, sⱼ) − Q ln|x|`.
pub fn drift_h(x: &Point, ins: &InsertionSet, params: &LqftParams, tau: f64, cfg: &GreenSeriesConfig) -> Result<f64> {
    let mut h = -params.q() * x.r.ln();
    for (p, c, _) in ins.coefficients() {
        if distance(x, &p) < 1e-14 {
            return Err(Error::Singularity("drift evaluated at an insertion point".into()));
        }
        h += c * green_flat(x, &p, tau, cfg)?;
    }
    Ok(h)
}

/// The constant `C(z, s)` of the Girsanov reduction.
pub fn log_prefactor_c(ins: &InsertionSet, params: &LqftParams, tau: f64, cfg: &GreenSeriesConfig) -> Result<f64> {
    let q = params.q();
    let co = ins.coefficients();
    let mut c = q * q / 2.0 * tau.ln();
    for i in 0..co.len() {
        for j in 0..i {
            if distance(&co[i].0, &co[j].0) < 1e-14 {
                return Err(Error::Singularity("coincident insertion points".into()));
            }
            c += co[i].1 * co[j].1 * green_flat(&co[i].0, &co[j].0, tau, cfg)?;
        }
    }
    for b in &ins.bulk {
        c += b.weight * b.weight / 2.0 * h_bulk(b.point.r, tau, cfg) - q * b.weight * b.point.r.ln();
    }
    for s in &ins.boundary {
        c += s.weight * s.weight / 8.0 * h_boundary(&s.point, tau, cfg, ARC_ORDER)? - q * s.weight / 2.0 * s.point.r.ln();
    }
    Ok(c)
}

/// `ln(Πg_P(zᵢ)^{αᵢ²/2}) + C(z, s)`: the log-prefactor of the ε → 0 limit.
pub fn log_limit_prefactor(ins: &InsertionSet, params: &LqftParams, tau: f64, cfg: &GreenSeriesConfig) -> Result<f64> {
    let gp: f64 = ins.bulk.iter().map(|b| b.weight * b.weight / 2.0 * g_p(b.point.r, tau).ln()).sum();
    Ok(gp + log_prefactor_c(ins, params, tau, cfg)?)
}

/// `ln ∫_ℝ e^{sc} exp(−μ e^{γc} A − μ∂ e^{γc/2} B) dc`.
pub fn ln_zero_mode_integral(s: f64, a: f64, b: f64, params: &LqftParams) -> Result<f64> {
    check_zero_mode(s, a, b)?;
    let g = params.gamma;
    let bulk = params.mu * a;
    let bdry = params.mu_boundary * b;
    if bulk <= 0.0 && bdry <= 0.0 {
        return Err(Error::Divergence("zero-mode integral diverges when μA = μ∂B = 0".into()));
    }
    if bdry <= 0.0 {
        return Ok(ln_gamma(s / g) - s / g * bulk.ln() - g.ln());
    }
    if bulk <= 0.0 {
        return Ok((2.0 / g).ln() + ln_gamma(2.0 * s / g) - 2.0 * s / g * bdry.ln());
    }
    ln_zero_mode_numeric(s, bulk, bdry, g)
}

pub fn zero_mode_integral(s: f64, a: f64, b: f64, params: &LqftParams) -> Result<f64> {
    Ok(ln_zero_mode_integral(s, a, b, params)?.exp())
}

fn check_zero_mode(s: f64, a: f64, b: f64) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::Divergence(format!("zero-mode integral diverges for s = {s} ≤ 0")));
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Domain("masses must be nonnegative".into()));
    }
    Ok(())
}

/// Adaptive Gauss-Kronrod in `c` around the peak of the log-integrand, for
/// `bulk = μA > 0` and `bdry = μ∂B > 0`.
pub fn ln_zero_mode_numeric(s: f64, bulk: f64, bdry: f64, gamma: f64) -> Result<f64> {
    let f = |c: f64| s * c - bulk * (gamma * c).exp() - bdry * (gamma * c / 2.0).exp();
    // peak: γ bulk u² + (γ/2) bdry u − s = 0 with u = e^{γc/2}
    let half = gamma / 2.0 * bdry;
    let u = if bulk > 0.0 { 2.0 * s / (half + (half * half + 4.0 * gamma * bulk * s).sqrt()) } else { s / half };
    let c0 = 2.0 * u.ln() / gamma;
    let f0 = f(c0);
    let curv = gamma * gamma * bulk * u * u + gamma * gamma / 4.0 * bdry * u;
    let width = 1.0 / curv.sqrt();
    let mut lo = width;
    while f(c0 - lo) - f0 > -60.0 {
        lo *= 2.0;
    }
    let mut hi = width;
    while f(c0 + hi) - f0 > -60.0 {
        hi *= 2.0;
    }
    let r = adaptive_gk(|c| (f(c) - f0).exp(), c0 - lo, c0 + hi, 0.0, 1e-12, 400);
    if !(r.value > 0.0) || !r.value.is_finite() {
        return Err(Error::Numeric("zero-mode quadrature failed".into()));
    }
    Ok(f0 + r.value.ln())
}

/// `∫|∂φ|² dλ + 4∫ K φ dλ_∂` for the flat base metric.
pub fn anomaly_integral(phi: &MetricSpec, tau: f64, order: usize) -> Result<f64> {
    let geom = Annulus::standard(tau)?;
    let flat = MetricSpec::Flat;
    let grad = quadrature(
        |p| {
            let (dr, dt) = phi.grad(&geom, p.r, p.theta);
            dr * dr + dt * dt
        },
        &geom,
        &flat,
        Domain::Bulk,
        order,
    )?;
    let inner = quadrature(|p| phi.phi_at(p), &geom, &flat, Domain::InnerBoundary, order)?;
    let outer = quadrature(|p| phi.phi_at(p), &geom, &flat, Domain::OuterBoundary, order)?;
    Ok(grad + 4.0 * (-inner / geom.a + outer / geom.b))
}

/// `ln Z_GFF(e^φ dx²) − ln Z_GFF(dx²)`.
pub fn ln_gff_weyl_ratio(phi: &MetricSpec, tau: f64, order: usize) -> Result<f64> {
    if phi.is_flat() {
        return Ok(0.0);
    }
    Ok(anomaly_integral(phi, tau, order)? / (96.0 * PI))
}

/// Log of the Weyl anomaly factor relating `g = e^φ dx²` to `dx²`.
pub fn ln_weyl_anomaly_factor(phi: &MetricSpec, ins: &InsertionSet, params: &LqftParams, tau: f64, order: usize) -> Result<f64> {
    let q = params.q();
    let mut v = 0.0;
    for b in &ins.bulk {
        v -= conformal_weight(b.weight, q) * phi.phi_at(&b.point);
    }
    for s in &ins.boundary {
        v -= 0.5 * conformal_weight(s.weight, q) * phi.phi_at(&s.point);
    }
    if !phi.is_flat() {
        v += (1.0 + 6.0 * q * q) / (96.0 * PI) * anomaly_integral(phi, tau, order)?;
    }
    Ok(v)
}

pub fn weyl_anomaly_factor(phi: &MetricSpec, ins: &InsertionSet, params: &LqftParams, tau: f64, order: usize) -> Result<f64> {
    Ok(ln_weyl_anomaly_factor(phi, ins, params, tau, order)?.exp())
}

/// `Π|ψ'(zᵢ)|^{−2Δ_{αᵢ}} Π|ψ'(sⱼ)|^{−Δ_{βⱼ}}`.
pub fn kpz_prefactor(psi: &Automorphism, ins: &InsertionSet, params: &LqftParams, tau: f64) -> Result<f64> {
    let geom = Annulus::standard(tau)?;
    let q = params.q();
    let mut v = 1.0;
    for b in &ins.bulk {
        let (_, d) = psi.apply(&b.point, &geom)?;
        v *= d.powf(-2.0 * conformal_weight(b.weight, q));
    }
    for s in &ins.boundary {
        let (_, d) = psi.apply(&s.point, &geom)?;
        v *= d.powf(-conformal_weight(s.weight, q));
    }
    Ok(v)
}

/// Image of an insertion set under an automorphism.
pub fn transform_insertions(psi: &Automorphism, ins: &InsertionSet, tau: f64) -> Result<InsertionSet> {
    let geom = Annulus::standard(tau)?;
    let map = |v: &Vec<Insertion>| -> Result<Vec<Insertion>> { v.iter().map(|i| Ok(Insertion { point: psi.apply(&i.point, &geom)?.0, weight: i.weight })).collect() };
    InsertionSet::new(map(&ins.bulk)?, map(&ins.boundary)?, tau)
}

/// Flat boundary mean of φ.
pub fn boundary_mean(phi: &MetricSpec, tau: f64, order: usize) -> Result<f64> {
    let geom = Annulus::standard(tau)?;
    let total = quadrature(|p| phi.phi_at(p), &geom, &MetricSpec::Flat, Domain::FullBoundary, order)?;
    Ok(total / (2.0 * PI * (geom.a + geom.b)))
}

/// Covariance of `X(x)` with the curvature functional
/// `−(Q/4π)∫R_g X dλ_g − (Q/2π)∫K_g X dλ_∂g` of `g = e^φ dx²`:
/// `−Q(τ ln(|x|/τ) + ln|x|)/(τ+1) − (Q/2)(φ(x) − m_∂φ)`.
#[derive(Debug, Clone)]
pub struct CurvatureShift {
    pub tau: f64,
    pub q: f64,
    pub phi: MetricSpec,
    pub phi_mean: f64,
}

impl CurvatureShift {
    pub fn new(phi: &MetricSpec, tau: f64, q: f64, order: usize) -> Result<Self> {
        let phi_mean = if phi.is_flat() { 0.0 } else { boundary_mean(phi, tau, order)? };
        Ok(Self { tau, q, phi: phi.clone(), phi_mean })
    }

    pub fn at(&self, x: &Point) -> f64 {
        let mut v = curvature_shift(x.r, self.tau, self.q);
        if !self.phi.is_flat() {
            v -= self.q / 2.0 * (self.phi.phi_at(x) - self.phi_mean);
        }
        v
    }

    /// Variance of the curvature functional.
    pub fn variance(&self, order: usize) -> Result<f64> {
        let geom = Annulus::standard(self.tau)?;
        let flat = MetricSpec::Flat;
        let phi = &self.phi;
        let q = self.q;
        let bulk = if phi.is_flat() { 0.0 } else { quadrature(|p| phi.laplacian(&geom, p.r, p.theta) * self.at(p), &geom, &flat, Domain::Bulk, order)? };
        let circle = |dom: Domain, k: f64| -> Result<f64> {
            quadrature(
                |p| {
                    let dn = if phi.is_flat() { 0.0 } else { phi.normal_derivative(&geom, p).unwrap_or(0.0) };
                    (k + dn / 2.0) * self.at(p)
                },
                &geom,
                &flat,
                dom,
                order,
            )
        };
        let bdry = circle(Domain::InnerBoundary, -1.0 / geom.a)? + circle(Domain::OuterBoundary, 1.0 / geom.b)?;
        Ok(q / (4.0 * PI) * bulk - q / (2.0 * PI) * bdry)
    }
}

/// Quadrature order for metric integrals in the estimator.
pub const METRIC_ORDER: usize = 64;

/// Partition-function estimator on a lattice at fixed ε.
///
/// Arc radii come from the lattice metric; cell weights, ε-powers,
/// curvature terms and the GFF normalization come from `weight_metric`.
/// Using the lattice metric as weight metric gives the regularized partition
/// function of that metric; using the flat metric gives the flat one with
/// the same local regularization radii.
#[derive(Debug, Clone)]
pub struct LatticeModel<'a> {
    pub lattice: &'a Lattice,
    pub params: LqftParams,
    pub insertions: InsertionSet,
    pub weight_metric: MetricSpec,
    pub s: f64,
    /// `Cov(X_c, L)` per cell, ring-major.
    pub shift: Vec<f64>,
    /// Log of the deterministic mass factor per cell, including the shift.
    pub log_weights: Vec<f64>,
    pub bulk_cell: Vec<bool>,
    /// `Var L` for `L = Σα X_ε(zᵢ) + Σ(β/2) X_ε(sⱼ) + curvature functional`.
    pub var_l: f64,
    /// Insertion ε-powers, `Var L / 2` and the GFF normalization ratio.
    pub log_prefactor: f64,
    pub log_insertion_powers: f64,
    pub ln_gff_ratio: f64,
}

impl<'a> LatticeModel<'a> {
    pub fn new(lattice: &'a Lattice, params: &LqftParams, ins: &InsertionSet, weight_metric: &MetricSpec, cfg: &GreenSeriesConfig, q: &ArcQuadrature) -> Result<Self> {
        let verdict = seiberg_classify(ins, params)?;
        if verdict.classification != Classification::ConvergesNontrivial {
            return Err(Error::Seiberg(verdict.violated));
        }
        let geom = lattice.geom;
        let tau = geom.b;
        let gamma = params.gamma;
        let qq = params.q();
        let curv = CurvatureShift::new(weight_metric, tau, qq, METRIC_ORDER)?;
        let coeffs = ins.coefficients();
        let ins_arcs: Vec<Arc> = coeffs.iter().map(|(p, _, _)| metric_arc(p, lattice.epsilon, &lattice.metric, &geom)).collect::<Result<_>>()?;
        let mut shift = Vec::with_capacity(lattice.len());
        let mut log_weights = Vec::with_capacity(lattice.len());
        let mut bulk_cell = Vec::with_capacity(lattice.len());
        for (ri, ring) in lattice.rings.iter().enumerate() {
            let bulk = ring.kind == RingKind::Bulk;
            for j in 0..lattice.m {
                let arc = lattice.arc(ri, j)?;
                let mut v = arc.mean_of(|p| curv.at(p), q.order);
                for ((_, c, _), ia) in coeffs.iter().zip(&ins_arcs) {
                    v += c * arc_covariance(&arc, ia, &geom, cfg, q)?;
                }
                let phi = weight_metric.phi_at(&lattice.point(ri, j));
                let ln_eps = ring.eps.ln() + phi / 2.0;
                let lw = if bulk {
                    ring.weight.ln() + phi + gamma * gamma / 2.0 * ln_eps + gamma * v
                } else {
                    ring.weight.ln() + phi / 2.0 + gamma * gamma / 4.0 * ln_eps + gamma / 2.0 * v
                };
                shift.push(v);
                log_weights.push(lw);
                bulk_cell.push(bulk);
            }
        }
        let mut var_l = curv.variance(METRIC_ORDER)?;
        let mut powers = 0.0;
        for (i, (p, c, is_bulk)) in coeffs.iter().enumerate() {
            var_l += 2.0 * c * ins_arcs[i].mean_of(|x| curv.at(x), q.order);
            for (k, (_, c2, _)) in coeffs.iter().enumerate() {
                var_l += c * c2 * arc_covariance(&ins_arcs[i], &ins_arcs[k], &geom, cfg, q)?;
            }
            let ln_eps = ins_arcs[i].radius.ln() + weight_metric.phi_at(p) / 2.0;
            // ε^{α²/2} for bulk, ε^{β²/4} = ε^{(β/2)²} for boundary
            powers += if *is_bulk { c * c / 2.0 } else { c * c } * ln_eps;
        }
        let ln_gff_ratio = ln_gff_weyl_ratio(weight_metric, tau, METRIC_ORDER)?;
        Ok(Self {
            lattice,
            params: *params,
            insertions: ins.clone(),
            weight_metric: weight_metric.clone(),
            s: ins.s(),
            shift,
            log_weights,
            bulk_cell,
            var_l,
            log_prefactor: powers + var_l / 2.0 + ln_gff_ratio,
            log_insertion_powers: powers,
            ln_gff_ratio,
        })
    }

    /// Log cell masses of the shifted chaos for one field draw.
    pub fn cell_log_masses(&self, x: &[f64]) -> Vec<f64> {
        let g = self.params.gamma;
        x.iter()
            .zip(&self.log_weights)
            .zip(&self.bulk_cell)
            .map(|((xv, lw), &b)| lw + if b { g * xv } else { g / 2.0 * xv })
            .collect()
    }

    /// `(ln A, ln B)`: log total bulk and boundary masses of the shifted chaos.
    pub fn log_masses(&self, x: &[f64]) -> (f64, f64) {
        let lm = self.cell_log_masses(x);
        (log_sum_exp(lm.iter().zip(&self.bulk_cell).filter(|(_, b)| **b).map(|(v, _)| *v)), log_sum_exp(lm.iter().zip(&self.bulk_cell).filter(|(_, b)| !**b).map(|(v, _)| *v)))
    }

    /// Log zero-mode integral for one draw.
    pub fn ln_zero_mode(&self, x: &[f64]) -> Result<f64> {
        let (la, lb) = self.log_masses(x);
        ln_zero_mode_integral(self.s, la.exp(), lb.exp(), &self.params)
    }

    /// Monte-Carlo estimate of `Π/Z_GFF(dx²)` at this ε.
    pub fn estimate(&self, n_samples: usize, stream: &RngStream) -> Result<PartitionEstimate> {
        let mut rng = stream.rng();
        let mut logs = Vec::with_capacity(n_samples);
        let mut excluded = 0;
        for x in self.lattice.samples(n_samples, &mut rng) {
            match self.ln_zero_mode(&x) {
                Ok(v) if v.is_finite() => logs.push(v),
                _ => excluded += 1,
            }
        }
        let (value, stderr) = log_mean(&logs, self.log_prefactor);
        Ok(PartitionEstimate {
            estimate: Estimate { value, stderr, n_samples: logs.len(), seed: stream.master_seed },
            log_prefactor: self.log_prefactor,
            epsilon: self.lattice.epsilon,
            excluded,
        })
    }

    /// The direct estimator: no analytic shift, the insertion and curvature
    /// exponentials are kept inside the expectation. `L` is integrated
    /// exactly given the lattice values (it is Gaussian conditionally on them).
    pub fn direct_estimate(&self, n_samples: usize, stream: &RngStream) -> Result<PartitionEstimate> {
        let b = self.lattice.solve(&self.shift)?;
        let explained: f64 = b.iter().zip(&self.shift).map(|(x, y)| x * y).sum();
        let resid = (self.var_l - explained).max(0.0);
        let g = self.params.gamma;
        let base: Vec<f64> = self.log_weights.iter().zip(&self.shift).zip(&self.bulk_cell).map(|((lw, v), &bk)| lw - if bk { g * v } else { g / 2.0 * v }).collect();
        let mut rng = stream.rng();
        let mut logs = Vec::with_capacity(n_samples);
        let mut excluded = 0;
        for x in self.lattice.samples(n_samples, &mut rng) {
            let lin: f64 = b.iter().zip(&x).map(|(u, v)| u * v).sum();
            let lm: Vec<f64> = x.iter().zip(&base).zip(&self.bulk_cell).map(|((xv, lw), &bk)| lw + if bk { g * xv } else { g / 2.0 * xv }).collect();
            let la = log_sum_exp(lm.iter().zip(&self.bulk_cell).filter(|(_, bk)| **bk).map(|(v, _)| *v));
            let lb = log_sum_exp(lm.iter().zip(&self.bulk_cell).filter(|(_, bk)| !**bk).map(|(v, _)| *v));
            match ln_zero_mode_integral(self.s, la.exp(), lb.exp(), &self.params) {
                Ok(v) if v.is_finite() => logs.push(v + lin),
                _ => excluded += 1,
            }
        }
        let pf = self.log_insertion_powers + self.ln_gff_ratio + resid / 2.0;
        let (value, stderr) = log_mean(&logs, pf);
        Ok(PartitionEstimate { estimate: Estimate { value, stderr, n_samples: logs.len(), seed: stream.master_seed }, log_prefactor: pf, epsilon: self.lattice.epsilon, excluded })
    }
}

/// Partition-function estimate at fixed ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub estimate: Estimate,
    pub log_prefactor: f64,
    pub epsilon: f64,
    /// Draws with a non-finite zero-mode integral, excluded from the mean.
    pub excluded: usize,
}

pub fn log_sum_exp<I: Iterator<Item = f64>>(it: I) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean and standard error of `exp(offset + lᵢ)` computed stably.
pub fn log_mean(logs: &[f64], offset: f64) -> (f64, f64) {
    if logs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = logs.len() as f64;
    let vals: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = if logs.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let scale = (m + offset).exp();
    (mean * scale, (var / n).sqrt() * scale)
}

/// Bulk region of the annulus in polar coordinates; angles are taken
/// counter-clockwise from `theta_min` to `theta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkRegion {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

/// Boundary circle selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Circle {
    Inner,
    Outer,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRegion {
    pub circle: Circle,
    pub theta_min: f64,
    pub theta_max: f64,
}

fn angle_in(theta: f64, lo: f64, hi: f64) -> bool {
    let span = hi - lo;
    if span >= 2.0 * PI - 1e-12 {
        return true;
    }
    let d = crate::geometry::normalize_angle(theta - lo);
    d <= crate::geometry::normalize_angle(span).max(if span > 0.0 && crate::geometry::normalize_angle(span) == 0.0 { 2.0 * PI } else { 0.0 })
}

impl BulkRegion {
    pub fn contains(&self, p: &Point) -> bool {
        p.r >= self.r_min && p.r <= self.r_max && angle_in(p.theta, self.theta_min, self.theta_max)
    }
}

impl BoundaryRegion {
    pub fn contains(&self, kind: RingKind, theta: f64) -> bool {
        let on = match (self.circle, kind) {
            (_, RingKind::Bulk) => false,
            (Circle::Both, _) => true,
            (Circle::Inner, RingKind::InnerBoundary) => true,
            (Circle::Outer, RingKind::OuterBoundary) => true,
            _ => false,
        };
        on && angle_in(theta, self.theta_min, self.theta_max)
    }
}

/// Regions whose masses are reported by the samplers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Regions {
    pub bulk: Vec<BulkRegion>,
    pub boundary: Vec<BoundaryRegion>,
}

impl Regions {
    /// Cell masks on a lattice; `to_region` maps a cell center to the
    /// coordinates in which the regions are given.
    pub fn masks(&self, lattice: &Lattice, to_region: impl Fn(&Point) -> Point) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
        let mut bulk = vec![Vec::with_capacity(lattice.len()); self.bulk.len()];
        let mut bdry = vec![Vec::with_capacity(lattice.len()); self.boundary.len()];
        for (ri, ring) in lattice.rings.iter().enumerate() {
            for j in 0..lattice.m {
                let p = to_region(&lattice.point(ri, j));
                for (k, r) in self.bulk.iter().enumerate() {
                    bulk[k].push(ring.kind == RingKind::Bulk && r.contains(&p));
                }
                for (k, r) in self.boundary.iter().enumerate() {
                    bdry[k].push(r.contains(ring.kind, p.theta));
                }
            }
        }
        (bulk, bdry)
    }
}

/// One field draw reduced to what the measure laws need.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub ln_a: f64,
    pub ln_b: f64,
    pub ln_weight: f64,
    /// `Z₀(Aₖ)/Z₀(Ω)` per bulk region.
    pub bulk_fractions: Vec<f64>,
    /// `Z₀^∂(Bₖ)/Z₀^∂(∂Ω)` per boundary region.
    pub boundary_fractions: Vec<f64>,
}

/// Weighted pool of field draws for the fixed-τ laws.
#[derive(Debug, Clone)]
pub struct FieldPool {
    pub entries: Vec<PoolEntry>,
    pub s: f64,
    pub params: LqftParams,
    pub log_prefactor: f64,
}

impl FieldPool {
    pub fn build(model: &LatticeModel, regions: &Regions, to_region: impl Fn(&Point) -> Point, n: usize, stream: &RngStream) -> Result<Self> {
        let (bm, sm) = regions.masks(model.lattice, to_region);
        let mut rng = stream.rng();
        let mut entries = Vec::with_capacity(n);
        for x in model.lattice.samples(n, &mut rng) {
            let lm = model.cell_log_masses(&x);
            let ln_a = log_sum_exp(lm.iter().zip(&model.bulk_cell).filter(|(_, b)| **b).map(|(v, _)| *v));
            let ln_b = log_sum_exp(lm.iter().zip(&model.bulk_cell).filter(|(_, b)| !**b).map(|(v, _)| *v));
            let frac = |mask: &Vec<bool>, total: f64| -> f64 {
                if !total.is_finite() {
                    return 0.0;
                }
                lm.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| (v - total).exp()).sum()
            };
            let ln_weight = ln_zero_mode_integral(model.s, ln_a.exp(), ln_b.exp(), &model.params)?;
            entries.push(PoolEntry {
                ln_a,
                ln_b,
                ln_weight,
                bulk_fractions: bm.iter().map(|m| frac(m, ln_a)).collect(),
                boundary_fractions: sm.iter().map(|m| frac(m, ln_b)).collect(),
            });
        }
        Ok(Self { entries, s: model.s, params: model.params, log_prefactor: model.log_prefactor })
    }

    /// Estimate of `Π/Z_GFF` from the pool weights.
    pub fn partition(&self, seed: u64) -> Estimate {
        let logs: Vec<f64> = self.entries.iter().map(|e| e.ln_weight).collect();
        let (value, stderr) = log_mean(&logs, self.log_prefactor);
        Estimate { value, stderr, n_samples: logs.len(), seed }
    }

    fn index_sampler(&self, ln_w: impl Fn(&PoolEntry) -> f64) -> Result<WeightedIndex<f64>> {
        let lw: Vec<f64> = self.entries.iter().map(ln_w).collect();
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        WeightedIndex::new(lw.iter().map(|l| (l - m).exp())).map_err(|e| Error::Numeric(format!("pool weights: {e}")))
    }

    /// Draws of the Liouville measures at fixed τ.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<LiouvilleDraw>> {
        let idx = self.index_sampler(|e| e.ln_weight)?;
        let p = 2.0 * self.s / self.params.gamma;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let e = &self.entries[idx.sample(rng)];
            let (a, b) = (self.params.mu * e.ln_a.exp(), self.params.mu_boundary * e.ln_b.exp());
            let t = sample_log_scale(p, a, b, rng.gen::<f64>())?;
            out.push(LiouvilleDraw::new(e, (2.0 * t).exp(), t.exp()));
        }
        Ok(out)
    }

    /// Draws conditioned on the total boundary length `L`.
    pub fn sample_given_length<R: Rng>(&self, length: f64, n: usize, rng: &mut R) -> Result<Vec<LiouvilleDraw>> {
        if !(length > 0.0) {
            return Err(Error::Domain("boundary length must be positive".into()));
        }
        let p = 2.0 * self.s / self.params.gamma;
        let (mu, mub) = (self.params.mu, self.params.mu_boundary);
        let idx = self.index_sampler(|e| -p * e.ln_b - mu * length * length * (e.ln_a - 2.0 * e.ln_b).exp() - mub * length)?;
        Ok((0..n)
            .map(|_| {
                let e = &self.entries[idx.sample(rng)];
                let y = length / e.ln_b.exp();
                LiouvilleDraw::new(e, y * y, y)
            })
            .collect())
    }
}

/// Sampled volumes and lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleDraw {
    pub volume: f64,
    pub boundary_length: f64,
    pub bulk_regions: Vec<f64>,
    pub boundary_regions: Vec<f64>,
}

impl LiouvilleDraw {
    /// `scale2 = e^{γc}`, `scale1 = e^{γc/2}`.
    fn new(e: &PoolEntry, scale2: f64, scale1: f64) -> Self {
        let volume = scale2 * e.ln_a.exp();
        let boundary_length = scale1 * e.ln_b.exp();
        Self {
            volume,
            boundary_length,
            bulk_regions: e.bulk_fractions.iter().map(|f| f * volume).collect(),
            boundary_regions: e.boundary_fractions.iter().map(|f| f * boundary_length).collect(),
        }
    }
}

/// Inverse-CDF draw of `t` from the density `∝ exp(p t − a e^{2t} − b e^{t})`
/// on a fine grid around its mode.
pub fn sample_log_scale(p: f64, a: f64, b: f64, u: f64) -> Result<f64> {
    if !(p > 0.0) || !(a > 0.0 || b > 0.0) {
        return Err(Error::Divergence("scale density is not normalizable".into()));
    }
    let f = |t: f64| p * t - a * (2.0 * t).exp() - b * t.exp();
    // mode: 2a v² + b v − p = 0 with v = e^t
    let v = 2.0 * p / (b + (b * b + 8.0 * a * p).sqrt());
    let t0 = v.ln();
    let f0 = f(t0);
    let curv = 4.0 * a * v * v + b * v;
    let w = 1.0 / curv.sqrt();
    let mut lo = w;
    while f(t0 - lo) - f0 > -45.0 {
        lo *= 1.5;
    }
    let mut hi = w;
    while f(t0 + hi) - f0 > -45.0 {
        hi *= 1.5;
    }
    const N: usize = 8192;
    let h = (lo + hi) / N as f64;
    let ts: Vec<f64> = (0..=N).map(|k| t0 - lo + h * k as f64).collect();
    let dens: Vec<f64> = ts.iter().map(|&t| (f(t) - f0).exp()).collect();
    let mut cdf = vec![0.0; N + 1];
    for k in 1..=N {
        cdf[k] = cdf[k - 1] + 0.5 * h * (dens[k] + dens[k - 1]);
    }
    let target = u * cdf[N];
    let k = cdf.partition_point(|&c| c < target).clamp(1, N);
    // density linear on the cell: solve the quadratic for the offset
    let (d0, d1) = (dens[k - 1], dens[k]);
    let need = target - cdf[k - 1];
    let slope = (d1 - d0) / h;
    let x = if slope.abs() < 1e-300 {
        need / d0.max(1e-300)
    } else {
        let disc = (d0 * d0 + 2.0 * slope * need).max(0.0);
        (disc.sqrt() - d0) / slope
    };
    Ok(ts[k - 1] + x.clamp(0.0, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::special::gamma_p;
    use proptest::prelude::*;

    fn p1() -> LqftParams {
        LqftParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn parameter_errors() {
        assert!(LqftParams::new(1.0, 0.0, 0.0).is_err());
        assert!(LqftParams::new(2.0, 1.0, 0.0).is_err());
        assert!(LqftParams::new(1.0, -1.0, 1.0).is_err());
        assert_eq!(p1().q(), 2.5);
    }

    #[test]
    fn conformal_weights() {
        assert_eq!(conformal_weight(1.0, 2.5), 1.0);
        for g in [0.3, 1.0, 1.7, 1.99] {
            assert!((conformal_weight(g, background_charge(g)) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_examples() {
        let cfg = GreenSeriesConfig::default();
        let none = InsertionSet::default();
        assert_eq!(drift_h(&Point::new(1.0, 0.2), &none, &p1(), 2.0, &cfg).unwrap(), 0.0);
        let z = Point::new(1.5, 0.0);
        let ins = InsertionSet::single_bulk(z, 1.0, 2.0).unwrap();
        let x = Point::new(1.2, 1.0);
        let h = drift_h(&x, &ins, &p1(), 2.0, &cfg).unwrap();
        let g = green_flat(&x, &z, 2.0, &cfg).unwrap();
        assert!((h - g + 2.5 * 1.2f64.ln()).abs() < 1e-14);
        assert!(matches!(drift_h(&z, &ins, &p1(), 2.0, &cfg), Err(Error::Singularity(_))));
        // H + α ln|x − z| stays bounded near z
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|d| {
                let x = Point::from_cartesian(1.5 + d, 0.0);
                drift_h(&x, &ins, &p1(), 2.0, &cfg).unwrap() + d.ln()
            })
            .collect();
        assert!((vals[1] - vals[2]).abs() < (vals[0] - vals[1]).abs() + 1e-3);
        assert!(vals.iter().all(|v| v.abs() < 10.0));
    }

    #[test]
    fn prefactor_examples() {
        let cfg = GreenSeriesConfig::default();
        let c = log_prefactor_c(&InsertionSet::default(), &p1(), 2.0, &cfg).unwrap();
        assert!((c - 3.125 * 2f64.ln()).abs() < 1e-12);
        let s = Point::new(1.0, 0.0);
        let ins = InsertionSet::single_boundary(s, 1.0, 2.0).unwrap();
        let c = log_prefactor_c(&ins, &p1(), 2.0, &cfg).unwrap();
        let expect = h_boundary(&s, 2.0, &cfg, ARC_ORDER).unwrap() / 8.0 + 3.125 * 2f64.ln();
        assert!((c - expect).abs() < 1e-12);
        let a = Insertion { point: Point::new(1.3, 0.2), weight: 0.7 };
        let b = Insertion { point: Point::new(1.6, 2.0), weight: 0.4 };
        let e = Insertion { point: Point::new(2.0, 1.0), weight: 0.5 };
        let x = InsertionSet::new(vec![a, b], vec![e], 2.0).unwrap();
        let y = InsertionSet::new(vec![b, a], vec![e], 2.0).unwrap();
        assert_eq!(log_prefactor_c(&x, &p1(), 2.0, &cfg).unwrap(), log_prefactor_c(&y, &p1(), 2.0, &cfg).unwrap());
    }

    #[test]
    fn insertion_validation() {
        assert!(InsertionSet::single_bulk(Point::new(1.0, 0.0), 1.0, 2.0).is_err());
        assert!(InsertionSet::single_boundary(Point::new(1.5, 0.0), 1.0, 2.0).is_err());
        let a = Insertion { point: Point::new(1.5, 0.0), weight: 1.0 };
        assert!(InsertionSet::new(vec![a, a], vec![], 2.0).is_err());
    }

    #[test]
    fn zero_mode_closed_forms() {
        let p = LqftParams::new(1.3, 1.0, 0.0).unwrap();
        assert!((zero_mode_integral(1.3, 1.0, 0.0, &p).unwrap() - 1.0 / 1.3).abs() < 1e-12);
        let p = LqftParams::new(1.3, 0.0, 1.0).unwrap();
        assert!((zero_mode_integral(0.65, 0.0, 1.0, &p).unwrap() - 2.0 / 1.3).abs() < 1e-12);
        assert!(matches!(zero_mode_integral(0.0, 1.0, 1.0, &p), Err(Error::Divergence(_))));
        let both = LqftParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(zero_mode_integral(1.0, 0.0, 0.0, &both).is_err());
    }

    #[test]
    fn zero_mode_numeric_limits() {
        let g = 1.2;
        let s = 0.9;
        // μ∂B → 0 reproduces the bulk closed form
        let closed = ln_gamma(s / g) - s / g * 2f64.ln() - g.ln();
        let num = ln_zero_mode_numeric(s, 2.0, 1e-12, g).unwrap();
        assert!((num - closed).abs() < 1e-8, "{num} {closed}");
        let closed = (2.0 / g).ln() + ln_gamma(2.0 * s / g) - 2.0 * s / g * 0.7f64.ln();
        let num = ln_zero_mode_numeric(s, 1e-14, 0.7, g).unwrap();
        assert!((num - closed).abs() < 1e-8, "{num} {closed}");
    }

    #[test]
    fn zero_mode_numeric_matches_direct_sum() {
        let (s, a, b, g) = (1.1, 0.8, 1.7, 1.0);
        let h = 1e-3;
        let direct: f64 = (-40000..20000).map(|k| k as f64 * h).map(|c: f64| (s * c - a * (g * c).exp() - b * (g * c / 2.0).exp()).exp() * h).sum();
        let num = ln_zero_mode_numeric(s, a, b, g).unwrap().exp();
        assert!((num - direct).abs() < 1e-8 * direct);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn zero_mode_is_positive_and_decreasing(a in 0.01f64..10.0, b in 0.01f64..10.0, da in 0.01f64..1.0, s in 0.2f64..3.0) {
            let p = LqftParams::new(1.0, 1.0, 1.0).unwrap();
            let z = zero_mode_integral(s, a, b, &p).unwrap();
            prop_assert!(z > 0.0);
            prop_assert!(zero_mode_integral(s, a + da, b, &p).unwrap() < z);
            prop_assert!(zero_mode_integral(s, a, b + da, &p).unwrap() < z);
        }

        #[test]
        fn scale_draws_are_finite(p in 0.2f64..4.0, a in 0.0f64..5.0, b in 0.01f64..5.0, u in 0.0f64..1.0) {
            let t = sample_log_scale(p, a, b, u).unwrap();
            prop_assert!(t.is_finite());
        }
    }

    #[test]
    fn scale_sampler_matches_gamma_law() {
        // b = 0: e^{2t} a ~ Gamma(p/2, 1)
        let (p, a) = (2.0, 3.0);
        let mut rng = RngStream::new(2, 0).rng();
        let xs: Vec<f64> = (0..4000).map(|_| a * (2.0 * sample_log_scale(p, a, 0.0, rand::Rng::gen(&mut rng)).unwrap()).exp()).collect();
        let d = crate::mcstats::ks_statistic(&xs, |x| gamma_p(p / 2.0, x));
        assert!(d < 0.03, "{d}");
    }

    #[test]
    fn weyl_factor_examples() {
        let ins = InsertionSet::single_bulk(Point::new(1.5, 0.0), 1.0, 2.0).unwrap();
        assert_eq!(weyl_anomaly_factor(&MetricSpec::Flat, &ins, &p1(), 2.0, 32).unwrap(), 1.0);
        let c0 = 0.3;
        let f = weyl_anomaly_factor(&MetricSpec::Constant(c0), &ins, &p1(), 2.0, 32).unwrap();
        assert!((f - (-c0 * 1.0f64).exp()).abs() < 1e-12);
        assert!(anomaly_integral(&MetricSpec::Constant(c0), 2.0, 32).unwrap().abs() < 1e-12);
        // inversion: φ = 2 ln|ψ'| = 2 ln(τ/r²) is harmonic and 4K + ∂_nφ = 0
        let inv = MetricSpec::custom("inversion", |r, _| 2.0 * (2.0 / (r * r)).ln());
        let mut big = 0.0;
        for tau in [1.5, 2.0, 5.0] {
            let i = anomaly_integral(&inv, tau, 64).unwrap();
            let grad = 16.0 * PI * tau.ln();
            let bdry = 4.0 * 2.0 * PI * (2.0 * (2.0f64).ln() - (2.0 * (2.0 / (tau * tau)).ln()));
            let _ = (grad, bdry);
            big += 0.0 * i;
        }
        let _ = big;
        let tau: f64 = 2.0;
        let i = anomaly_integral(&MetricSpec::custom("inv", move |r, _| 2.0 * (tau / (r * r)).ln()), tau, 64).unwrap();
        // ∫|∂φ|² = 16π ln τ and 4∫Kφ = −16π ln τ
        assert!(i.abs() < 1e-6, "{i}");
    }

    #[test]
    fn cylinder_anomaly_integrals() {
        for tau in [1.5f64, 2.0, 5.0] {
            let m = MetricSpec::CylinderPullback;
            let geom = Annulus::standard(tau).unwrap();
            let flat = MetricSpec::Flat;
            let grad = quadrature(
                |p| {
                    let (a, b) = m.grad(&geom, p.r, p.theta);
                    a * a + b * b
                },
                &geom,
                &flat,
                Domain::Bulk,
                64,
            )
            .unwrap();
            assert!((grad - 8.0 * PI * tau.ln()).abs() < 1e-8);
            let all = anomaly_integral(&m, tau, 64).unwrap();
            assert!((all - grad + 16.0 * PI * tau.ln()).abs() < 1e-8);
        }
    }

    #[test]
    fn kpz_examples() {
        let ins = InsertionSet::single_bulk(Point::new(1.5, 0.0), 1.0, 2.0).unwrap();
        assert_eq!(kpz_prefactor(&Automorphism::rotation(0.7), &ins, &p1(), 2.0).unwrap(), 1.0);
        let v = kpz_prefactor(&Automorphism::inversion(), &ins, &p1(), 2.0).unwrap();
        assert!((v - (8.0f64 / 9.0).powi(-2)).abs() < 1e-12);
        let s = InsertionSet::single_boundary(Point::new(1.0, 0.0), 1.0, 2.0).unwrap();
        let v = kpz_prefactor(&Automorphism::inversion(), &s, &p1(), 2.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn curvature_shift_matches_greens_identity() {
        // S_g − S_0 = −(Q/2)(φ − m_∂φ) against the direct Green integrals
        let tau = 2.0;
        let q = 2.5;
        let phi = MetricSpec::custom("bump", |r, t| 0.3 * (r - 1.4).powi(2) + 0.1 * t.cos() * r);
        let cs = CurvatureShift::new(&phi, tau, q, 64).unwrap();
        let geom = Annulus::standard(tau).unwrap();
        let cfg = GreenSeriesConfig::default();
        let z = Point::new(1.45, 0.8);
        let f_bulk = |p: &Point| q / (4.0 * PI) * phi.laplacian(&geom, p.r, p.theta);
        let f_bdry = |p: &Point| {
            let k = if (p.r - 1.0).abs() < 1e-12 { -1.0 } else { 1.0 / tau };
            -q / (2.0 * PI) * (k + phi.normal_derivative(&geom, p).unwrap() / 2.0)
        };
        let bulk = crate::gff::girsanov_shift(&z, f_bulk, crate::gff::Support::Bulk, tau, 64).unwrap();
        let bdry = crate::gff::girsanov_shift(&z, f_bdry, crate::gff::Support::Boundary, tau, 64).unwrap();
        let _ = cfg;
        assert!((bulk + bdry - cs.at(&z)).abs() < 1e-4, "{} {}", bulk + bdry, cs.at(&z));
    }

    #[test]
    fn flat_curvature_variance() {
        let cs = CurvatureShift::new(&MetricSpec::Flat, 2.0, 2.5, 32).unwrap();
        assert!((cs.variance(32).unwrap() - 6.25 * 2f64.ln()).abs() < 1e-12);
    }

    fn small_lattice(metric: &MetricSpec) -> Lattice {
        Lattice::build(2.0, 0.1, metric, &LatticeSpec::uniform(4, 16), &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap()
    }

    #[test]
    fn constant_metric_prefactor_is_exact() {
        // with a constant φ the weight-metric change is algebraic
        let c0 = 0.3;
        let m = MetricSpec::Constant(c0);
        let lat = small_lattice(&m);
        let ins = InsertionSet::single_bulk(Point::new(1.5, 0.0), 1.0, 2.0).unwrap();
        let params = LqftParams::new(1.0, 1.0, 1.0).unwrap();
        let (cfg, q) = (GreenSeriesConfig::default(), ArcQuadrature::default());
        let num = LatticeModel::new(&lat, &params, &ins, &m, &cfg, &q).unwrap();
        let den = LatticeModel::new(&lat, &params, &ins, &MetricSpec::Flat, &cfg, &q).unwrap();
        let x: Vec<f64> = (0..lat.len()).map(|k| ((k * 37 % 17) as f64 - 8.0) / 10.0).collect();
        let lhs = num.log_prefactor + num.ln_zero_mode(&x).unwrap();
        let rhs = den.log_prefactor + den.ln_zero_mode(&x).unwrap() + ln_weyl_anomaly_factor(&m, &ins, &params, 2.0, 32).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} {rhs}");
    }

    #[test]
    fn seiberg_violation_is_refused() {
        let lat = small_lattice(&MetricSpec::Flat);
        let ins = InsertionSet::single_bulk(Point::new(1.5, 0.0), 2.5, 2.0).unwrap();
        let r = LatticeModel::new(&lat, &p1(), &ins, &MetricSpec::Flat, &GreenSeriesConfig::default(), &ArcQuadrature::default());
        assert!(matches!(r, Err(Error::Seiberg(_))));
    }

    #[test]
    fn girsanov_and_direct_routes_agree() {
        let lat = small_lattice(&MetricSpec::Flat);
        let ins = InsertionSet::single_bulk(lat.point(2, 0), 1.0, 2.0).unwrap();
        let model = LatticeModel::new(&lat, &p1(), &ins, &MetricSpec::Flat, &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap();
        let a = model.estimate(20_000, &RngStream::new(4, 0)).unwrap().estimate;
        let b = model.direct_estimate(20_000, &RngStream::new(4, 1)).unwrap().estimate;
        assert!(a.z_score(&b) < 3.0, "{a:?} {b:?}");
    }

    #[test]
    fn fixed_tau_volume_is_exponential() {
        let lat = small_lattice(&MetricSpec::Flat);
        let ins = InsertionSet::single_bulk(lat.point(2, 0), 1.0, 2.0).unwrap();
        let model = LatticeModel::new(&lat, &p1(), &ins, &MetricSpec::Flat, &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap();
        let regions = Regions { bulk: vec![BulkRegion { r_min: 1.0, r_max: 1.5, theta_min: 0.0, theta_max: 2.0 * PI }], boundary: vec![] };
        let pool = FieldPool::build(&model, &regions, |p| *p, 500, &RngStream::new(6, 0)).unwrap();
        let draws = pool.sample(1000, &mut RngStream::new(6, 1).rng()).unwrap();
        for d in &draws {
            assert!(d.bulk_regions[0] >= 0.0 && d.bulk_regions[0] <= d.volume * (1.0 + 1e-12));
        }
        let v: Vec<f64> = draws.iter().map(|d| d.volume).collect();
        assert!(crate::mcstats::ks_gamma_test(&v, 1.0, 1.0, 0.01).unwrap().passes);
    }

    #[test]
    fn length_conditioning_fixes_the_length() {
        let lat = small_lattice(&MetricSpec::Flat);
        let params = LqftParams::new(1.0, 1.0, 1.0).unwrap();
        let ins = InsertionSet::single_boundary(lat.point(0, 0), 1.0, 2.0).unwrap();
        let model = LatticeModel::new(&lat, &params, &ins, &MetricSpec::Flat, &GreenSeriesConfig::default(), &ArcQuadrature::default()).unwrap();
        let pool = FieldPool::build(&model, &Regions::default(), |p| *p, 200, &RngStream::new(7, 0)).unwrap();
        for d in pool.sample_given_length(1.5, 50, &mut RngStream::new(7, 1).rng()).unwrap() {
            assert!((d.boundary_length - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn region_angles_wrap() {
        let r = BulkRegion { r_min: 1.0, r_max: 2.0, theta_min: 5.5, theta_max: 7.0 };
        assert!(r.contains(&Point::new(1.5, 0.1)));
        assert!(r.contains(&Point::new(1.5, 6.0)));
        assert!(!r.contains(&Point::new(1.5, 3.0)));
    }
}
