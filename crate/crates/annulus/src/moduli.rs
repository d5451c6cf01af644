//! Moduli weights, the LQG integrand over τ, its integration, and the joint
//! law of the Liouville measures with the random modulus.
//!
//! Constant factors that do not depend on τ are dropped: `1/√2` in the GFF
//! partition function, `2π` from `dl = dτ/(2πτ)` and `4π` from integrating
//! the boundary insertion over ∂Ω.

use crate::arcs::ArcQuadrature;
use crate::error::{Error, Result};
use crate::geometry::{f_tau_inverse, MetricSpec, Point};
use crate::greens::GreenSeriesConfig;
use crate::lattice::{Lattice, LatticeSpec};
use crate::lqft::{background_charge, FieldPool, InsertionSet, LatticeModel, LiouvilleDraw, LqftParams, Regions};
use crate::mcstats::{Estimate, RngStream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `η(τ) = τ^{−1/12} Π(1 − τ^{−2n})`, truncated once the remaining factors
/// change the value by less than `tol` (relative).
pub fn dedekind_eta(tau: f64, tol: f64) -> Result<f64> {
    if !(tau > 1.0) {
        return Err(Error::Domain(format!("η needs τ > 1, got {tau}")));
    }
    let q = tau.powi(-2);
    let mut ln = -tau.ln() / 12.0;
    let mut t = q;
    // the remaining log-factors sum to at most about t/(1 − q)
    while t / (1.0 - q) >= tol && t > 0.0 {
        ln += (-t).ln_1p();
        t *= q;
    }
    Ok(ln.exp())
}

pub const ETA_TOL: f64 = 1e-16;

/// Central charge of the matter fields, `c_m = 25 − 6Q²`.
pub fn matter_central_charge(gamma: f64) -> f64 {
    let q = background_charge(gamma);
    25.0 - 6.0 * q * q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliWeight {
    pub tau: f64,
    pub eta: f64,
    pub z_gff: f64,
    pub z_ghost: f64,
    pub z_matter: f64,
    pub c_matter: f64,
}

pub fn moduli_weights(tau: f64, gamma: f64) -> Result<ModuliWeight> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::Parameter(format!("γ = {gamma} outside (0, 2]")));
    }
    let eta = dedekind_eta(tau, ETA_TOL)?;
    let z_gff = tau.powf(1.0 / 12.0) / eta;
    let c_matter = matter_central_charge(gamma);
    Ok(ModuliWeight { tau, eta, z_gff, z_ghost: tau.powf(-1.0 - 13.0 / 6.0) * eta * eta, z_matter: z_gff.powf(c_matter), c_matter })
}

/// GFF partition function of the flat cylinder of length `l`, `1/(√2 η(e^{2πl}))`.
pub fn cylinder_z_gff(l: f64) -> Result<f64> {
    Ok(1.0 / (2f64.sqrt() * dedekind_eta((2.0 * PI * l).exp(), ETA_TOL)?))
}

/// `det′Δ = 2l η(e^{2πl})²` on the cylinder.
pub fn cylinder_determinant(l: f64) -> Result<f64> {
    let e = dedekind_eta((2.0 * PI * l).exp(), ETA_TOL)?;
    Ok(2.0 * l * e * e)
}

/// Log of the deterministic part of the integrand,
/// `(c_m − 25)/12 · ln τ − ln τ + (1 − c_m) ln η(τ)`.
pub fn ln_moduli_weight(tau: f64, gamma: f64) -> Result<f64> {
    let c = matter_central_charge(gamma);
    Ok((c - 25.0) / 12.0 * tau.ln() - tau.ln() + (1.0 - c) * dedekind_eta(tau, ETA_TOL)?.ln())
}

/// Large-τ exponent of the integrand, `−1 − (1 − c_m)/12`.
pub fn tail_exponent(gamma: f64) -> f64 {
    -1.0 - (1.0 - matter_central_charge(gamma)) / 12.0
}

/// Lattice and Monte-Carlo settings for integrand evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliConfig {
    /// Regularization at large τ; `ε(τ) = min(ε₀, (τ − 1)/4)`.
    pub epsilon0: f64,
    pub n_angular: usize,
    pub min_rings: usize,
    /// Largest relative width of a bulk ring.
    pub kappa: f64,
    pub samples: usize,
}

impl Default for ModuliConfig {
    fn default() -> Self {
        Self { epsilon0: 0.05, n_angular: 32, min_rings: 4, kappa: 0.25, samples: 2000 }
    }
}

impl ModuliConfig {
    pub fn epsilon(&self, tau: f64) -> f64 {
        self.epsilon0.min((tau - 1.0) / 4.0)
    }

    /// Lattice at τ; bulk rings are omitted when μ = 0.
    pub fn lattice(&self, tau: f64, params: &LqftParams) -> Result<Lattice> {
        let spec = if params.mu > 0.0 { LatticeSpec::for_tau(tau, self.n_angular, self.min_rings, self.kappa) } else { LatticeSpec::boundary_only(self.n_angular) };
        Lattice::build(tau, self.epsilon(tau), &MetricSpec::Flat, &spec, &GreenSeriesConfig::default(), &ArcQuadrature::default())
    }
}

fn check_moduli_params(params: &LqftParams) -> Result<()> {
    if !(params.mu_boundary > 0.0) {
        return Err(Error::Parameter("the moduli integral needs μ∂ > 0".into()));
    }
    Ok(())
}

/// Boundary insertion of weight γ at `s = 1`.
pub fn boundary_insertion(params: &LqftParams, tau: f64) -> Result<InsertionSet> {
    InsertionSet::single_boundary(Point::new(1.0, 0.0), params.gamma, tau)
}

/// Integrand value at one τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrandNode {
    pub tau: f64,
    pub epsilon: f64,
    pub ln_weight: f64,
    /// `Π^{(1,γ)}/Z_GFF` at `ε(τ)`.
    pub partition: Estimate,
    pub value: Estimate,
    pub excluded: usize,
}

/// Stream of the node at τ, shared by every run with the same master seed.
pub fn node_stream(seed: u64, tau: f64) -> RngStream {
    RngStream::new(seed, tau.to_bits())
}

/// Integrand `τ^{(c_m−25)/12−1}|η|^{1−c_m} Π^{(1,γ)}/Z_GFF` at one τ.
pub fn lqg_integrand(tau: f64, params: &LqftParams, config: &ModuliConfig, stream: &RngStream) -> Result<IntegrandNode> {
    Ok(integrand_with_pool(tau, params, config, &Regions::default(), stream)?.0)
}

/// Integrand at τ together with the field pool it was estimated from.
/// Pool regions are given on the reference annulus `(1, 2)`.
pub fn integrand_with_pool(tau: f64, params: &LqftParams, config: &ModuliConfig, regions: &Regions, stream: &RngStream) -> Result<(IntegrandNode, FieldPool)> {
    check_moduli_params(params)?;
    let lattice = config.lattice(tau, params)?;
    let ins = boundary_insertion(params, tau)?;
    let model = LatticeModel::new(&lattice, params, &ins, &MetricSpec::Flat, &GreenSeriesConfig::default(), &ArcQuadrature::default())?;
    let to_ref = |p: &Point| {
        let r = f_tau_inverse(tau, p).map(|q| q.r).unwrap_or(p.r.clamp(1.0, tau));
        // f_τ maps (1, 2) onto (1, τ)
        Point::new(r, p.theta)
    };
    let pool = FieldPool::build(&model, regions, to_ref, config.samples, stream)?;
    let partition = pool.partition(stream.master_seed);
    let ln_weight = ln_moduli_weight(tau, params.gamma)?;
    let excluded = config.samples - pool.entries.len();
    let value = partition.scale(ln_weight.exp());
    Ok((IntegrandNode { tau, epsilon: lattice.epsilon, ln_weight, partition, value, excluded }, pool))
}

/// Geometric τ grid `τ₀ ρ^k`, `k = 0..n−1`, with `ρ = (τ_end/τ₀)^{1/(n−1)}`.
pub fn geometric_grid(tau0: f64, tau_end: f64, n: usize) -> Result<Vec<f64>> {
    if !(tau0 > 1.0 && tau_end > tau0) || n < 2 {
        return Err(Error::Domain("grid needs 1 < τ₀ < τ_end and at least two nodes".into()));
    }
    let rho = (tau_end / tau0).powf(1.0 / (n - 1) as f64);
    let mut g: Vec<f64> = (0..n).map(|k| tau0 * rho.powi(k as i32)).collect();
    g[n - 1] = tau_end;
    Ok(g)
}

/// Grid with ratio `rho` from `tau0`, cut at `tau_max`.
pub fn ratio_grid(tau0: f64, rho: f64, tau_max: f64) -> Vec<f64> {
    let mut g = Vec::new();
    let mut k = 0;
    loop {
        let t = tau0 * rho.powi(k);
        if t > tau_max * (1.0 + 1e-12) {
            break;
        }
        g.push(t);
        k += 1;
    }
    g
}

/// Power-law tail beyond the last node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub value: f64,
    pub stderr: f64,
    /// The fitted exponent was not below −1 and the theoretical one was used.
    pub fallback: bool,
}

/// Weighted least squares of `ln f` on `ln τ` over the given nodes.
/// Returns the intercept, the slope and their covariance `(var a, var p, cov)`.
pub fn log_log_fit(nodes: &[IntegrandNode]) -> Result<(f64, f64, (f64, f64, f64))> {
    if nodes.len() < 2 {
        return Err(Error::Usage("a slope needs at least two nodes".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for n in nodes {
        if !(n.value.value > 0.0) {
            return Err(Error::Numeric(format!("nonpositive integrand at τ = {}", n.tau)));
        }
        let rel = (n.value.stderr / n.value.value).max(1e-6);
        let w = 1.0 / (rel * rel);
        let (x, y) = (n.tau.ln(), n.value.value.ln());
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::Numeric("degenerate slope fit".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    Ok((intercept, slope, (sxx / det, sw / det, -sx / det)))
}

/// Default span of the tail fit: nodes with `τ ≥ τ_m/4`.
pub const TAIL_FIT_SPAN: f64 = 4.0;

/// Tail `∫_{τ_m}^∞ e^a τ^p dτ` from a fit over the nodes with `τ ≥ τ_m/span`
/// (at least two).
pub fn tail_estimate(nodes: &[IntegrandNode], span: f64, gamma: f64) -> Result<TailFit> {
    let last = nodes.last().ok_or_else(|| Error::Usage("no nodes".into()))?;
    let tm = last.tau;
    let first = nodes.partition_point(|n| n.tau < tm / span).min(nodes.len().saturating_sub(2));
    let fit = &nodes[first..];
    let (a, p, (va, vp, cap)) = log_log_fit(fit)?;
    if p < -1.0 {
        let k = -p - 1.0;
        let t = (a + (p + 1.0) * tm.ln()).exp() / k;
        let ja = t;
        let jp = t * (tm.ln() + 1.0 / k);
        let var = ja * ja * va + jp * jp * vp + 2.0 * ja * jp * cap;
        Ok(TailFit { exponent: p, exponent_stderr: vp.sqrt(), value: t, stderr: var.max(0.0).sqrt(), fallback: false })
    } else {
        let p = tail_exponent(gamma);
        let k = -p - 1.0;
        Ok(TailFit { exponent: p, exponent_stderr: 0.0, value: last.value.value * tm / k, stderr: last.value.stderr * tm / k, fallback: true })
    }
}

/// Result of the τ integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgIntegral {
    pub estimate: Estimate,
    /// Contribution of `(1, τ_max]`.
    pub body: Estimate,
    pub tail: TailFit,
    pub nodes: Vec<IntegrandNode>,
    pub warnings: Vec<String>,
}

/// Trapezoid in `ln τ` over the nodes plus `f(τ₀)(τ₀ − 1)` for `(1, τ₀)`.
pub fn trapezoid(nodes: &[IntegrandNode], seed: u64) -> Estimate {
    let n = nodes.len();
    let mut coef = vec![0.0; n];
    if n > 0 {
        coef[0] += nodes[0].tau - 1.0;
    }
    for k in 0..n.saturating_sub(1) {
        let h = nodes[k + 1].tau.ln() - nodes[k].tau.ln();
        coef[k] += 0.5 * h * nodes[k].tau;
        coef[k + 1] += 0.5 * h * nodes[k + 1].tau;
    }
    let value = nodes.iter().zip(&coef).map(|(v, c)| c * v.value.value).sum();
    let var: f64 = nodes.iter().zip(&coef).map(|(v, c)| (c * v.value.stderr).powi(2)).sum();
    Estimate { value, stderr: var.sqrt(), n_samples: nodes.iter().map(|v| v.value.n_samples).sum(), seed }
}

/// `∫₁^∞` of the LQG integrand: composite trapezoid on the grid and a fitted
/// power-law tail beyond its last node.
pub fn integrate_z_lqg(params: &LqftParams, grid: &[f64], span: f64, config: &ModuliConfig, seed: u64) -> Result<LqgIntegral> {
    let nodes = grid.iter().map(|&t| lqg_integrand(t, params, config, &node_stream(seed, t))).collect::<Result<Vec<_>>>()?;
    integrate_nodes(nodes, span, params.gamma, seed)
}

pub fn integrate_nodes(nodes: Vec<IntegrandNode>, span: f64, gamma: f64, seed: u64) -> Result<LqgIntegral> {
    let mut warnings = Vec::new();
    for n in &nodes {
        // the weight may underflow near τ = 1; positivity is checked on Π
        if !(n.partition.value > 0.0 && n.value.value.is_finite()) {
            return Err(Error::Numeric(format!("integrand not positive and finite at τ = {}", n.tau)));
        }
        if n.excluded > 0 {
            warnings.push(format!("{} draws excluded at τ = {}", n.excluded, n.tau));
        }
    }
    let body = trapezoid(&nodes, seed);
    let tail = tail_estimate(&nodes, span, gamma)?;
    if tail.fallback {
        warnings.push(format!("fitted tail exponent not below −1; used {}", tail.exponent));
    }
    let estimate = Estimate { value: body.value + tail.value, stderr: body.stderr.hypot(tail.stderr), n_samples: body.n_samples, seed };
    Ok(LqgIntegral { estimate, body, tail, nodes, warnings })
}

/// One draw of the joint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDraw {
    pub tau: f64,
    /// Index of the node whose pool produced the measures.
    pub node: usize,
    pub draw: LiouvilleDraw,
}

/// Tabulated τ marginal with one field pool per node.
#[derive(Debug, Clone)]
pub struct JointLaw {
    pub nodes: Vec<IntegrandNode>,
    pub pools: Vec<FieldPool>,
    cdf: Vec<f64>,
}

impl JointLaw {
    /// Tabulates the integrand on `grid`; regions are on the reference annulus `(1, 2)`.
    pub fn build(params: &LqftParams, grid: &[f64], regions: &Regions, config: &ModuliConfig, seed: u64) -> Result<Self> {
        let mut nodes = Vec::with_capacity(grid.len());
        let mut pools = Vec::with_capacity(grid.len());
        for &t in grid {
            let (n, p) = integrand_with_pool(t, params, config, regions, &node_stream(seed, t))?;
            nodes.push(n);
            pools.push(p);
        }
        Self::from_parts(nodes, pools)
    }

    pub fn from_parts(nodes: Vec<IntegrandNode>, pools: Vec<FieldPool>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Usage("the τ table needs at least two nodes".into()));
        }
        let cdf = table_cdf(&nodes);
        Ok(Self { nodes, pools, cdf })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.nodes[0].tau, self.nodes[self.nodes.len() - 1].tau)
    }

    /// Tabulated density at τ, normalized on the table range.
    pub fn density(&self, tau: f64) -> f64 {
        table_density(&self.nodes, tau) / self.cdf[self.cdf.len() - 1]
    }

    /// Tabulated probability of `[lo, hi]`.
    pub fn probability(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf_at(hi) - self.cdf_at(lo)) / self.cdf[self.cdf.len() - 1]
    }

    fn cdf_at(&self, tau: f64) -> f64 {
        let (t0, t1) = self.tau_range();
        let t = tau.clamp(t0, t1);
        let k = self.nodes.partition_point(|n| n.tau <= t).clamp(1, self.nodes.len() - 1);
        let (a, b) = (&self.nodes[k - 1], &self.nodes[k]);
        let (fa, fb) = (a.value.value, b.value.value);
        let h = b.tau - a.tau;
        let x = t - a.tau;
        self.cdf[k - 1] + fa * x + 0.5 * (fb - fa) / h * x * x
    }

    /// τ from the piecewise-linear marginal on the table range.
    pub fn sample_tau<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = self.cdf[self.cdf.len() - 1];
        let u = rng.gen::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.nodes.len() - 1);
        let (a, b) = (&self.nodes[k - 1], &self.nodes[k]);
        let (fa, fb) = (a.value.value, b.value.value);
        let h = b.tau - a.tau;
        let need = u - self.cdf[k - 1];
        let slope = (fb - fa) / h;
        let x = if slope.abs() < 1e-300 { need / fa } else { ((fa * fa + 2.0 * slope * need).max(0.0).sqrt() - fa) / slope };
        a.tau + x.clamp(0.0, h)
    }

    fn nearest(&self, tau: f64) -> usize {
        let lt = tau.ln();
        (0..self.nodes.len()).min_by(|&i, &j| (self.nodes[i].tau.ln() - lt).abs().total_cmp(&(self.nodes[j].tau.ln() - lt).abs())).unwrap_or(0)
    }

    /// Draws of `(τ, Z, Z^∂)`; measures come from the pool of the nearest node.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<JointDraw>> {
        (0..n)
            .map(|_| {
                let tau = self.sample_tau(rng);
                let node = self.nearest(tau);
                let draw = self.pools[node].sample(1, rng)?.remove(0);
                Ok(JointDraw { tau, node, draw })
            })
            .collect()
    }

    /// Draws conditioned on the total boundary length.
    pub fn sample_given_length<R: Rng>(&self, length: f64, n: usize, rng: &mut R) -> Result<Vec<JointDraw>> {
        (0..n)
            .map(|_| {
                let tau = self.sample_tau(rng);
                let node = self.nearest(tau);
                let draw = self.pools[node].sample_given_length(length, 1, rng)?.remove(0);
                Ok(JointDraw { tau, node, draw })
            })
            .collect()
    }
}

fn table_cdf(nodes: &[IntegrandNode]) -> Vec<f64> {
    let mut c = vec![0.0; nodes.len()];
    for k in 1..nodes.len() {
        c[k] = c[k - 1] + 0.5 * (nodes[k].tau - nodes[k - 1].tau) * (nodes[k].value.value + nodes[k - 1].value.value);
    }
    c
}

fn table_density(nodes: &[IntegrandNode], tau: f64) -> f64 {
    if tau < nodes[0].tau || tau > nodes[nodes.len() - 1].tau {
        return 0.0;
    }
    let k = nodes.partition_point(|n| n.tau <= tau).clamp(1, nodes.len() - 1);
    let (a, b) = (&nodes[k - 1], &nodes[k]);
    a.value.value + (b.value.value - a.value.value) * (tau - a.tau) / (b.tau - a.tau)
}
