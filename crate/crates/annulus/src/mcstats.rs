//! Random streams, Monte-Carlo estimates and the statistical tests used by
//! the checks.
//!
//! Stream derivation: `ChaCha8Rng::seed_from_u64(master_seed)` followed by
//! `set_stream(stream_id)`. `seed_from_u64` expands the 64-bit seed into the
//! 256-bit ChaCha key with the PCG32 output function documented by
//! `rand_core` 0.6; the stream id is the 64-bit ChaCha nonce. Any ChaCha8
//! implementation with the same key expansion reproduces the sequences.

use crate::error::{Error, Result};
use crate::special;
use nalgebra::{ComplexField, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Identifier of the pinned generator family, echoed in every output.
pub const GENERATOR_ID: &str = "ChaCha8Rng";

/// A reproducible random stream `(master_seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Stream with the same seed and another id.
    pub fn substream(&self, offset: u64) -> Self {
        Self { master_seed: self.master_seed, stream_id: self.stream_id.wrapping_add(offset) }
    }
}

/// Monte-Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, n_samples: 0, seed: 0 }
    }

    /// Product with a deterministic factor.
    pub fn scale(&self, k: f64) -> Self {
        Self { value: self.value * k, stderr: self.stderr * k.abs(), ..*self }
    }

    /// Number of combined standard errors separating two estimates.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let se = self.stderr.hypot(other.stderr);
        if se == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value).abs() / se
        }
    }

    /// Ratio with first-order error propagation for independent estimates.
    pub fn ratio(&self, den: &Estimate) -> Estimate {
        let v = self.value / den.value;
        let rel = (self.stderr / self.value).hypot(den.stderr / den.value);
        Estimate { value: v, stderr: v.abs() * rel, n_samples: self.n_samples.min(den.n_samples), seed: self.seed }
    }
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate { value: self.mean, stderr: self.stderr(), n_samples: self.n, seed }
    }
}

/// Sample-count weighted combination; associative under fixed ordering.
pub fn combine_estimates(list: &[Estimate]) -> Result<Estimate> {
    if list.is_empty() {
        return Err(Error::Usage("cannot combine an empty list of estimates".into()));
    }
    let weights: Vec<f64> = list.iter().map(|e| e.n_samples.max(1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let value = list.iter().zip(&weights).map(|(e, w)| w * e.value).sum::<f64>() / total;
    let var = list.iter().zip(&weights).map(|(e, w)| (w * e.stderr).powi(2)).sum::<f64>();
    Ok(Estimate {
        value,
        stderr: var.sqrt() / total,
        n_samples: list.iter().map(|e| e.n_samples).sum(),
        seed: list[0].seed,
    })
}

/// Outcome of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub passes: bool,
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value with Stephens' finite-sample correction.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    special::kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

/// KS test against the Gamma law with the given shape and rate.
pub fn ks_gamma_test(samples: &[f64], shape: f64, rate: f64, level: f64) -> Result<TestOutcome> {
    if samples.is_empty() {
        return Err(Error::Data("no samples".into()));
    }
    if let Some(x) = samples.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Data(format!("nonpositive sample {x}")));
    }
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::Parameter("Gamma shape and rate must be positive".into()));
    }
    let d = ks_statistic(samples, |x| special::gamma_p(shape, rate * x));
    let p = ks_p_value(d, samples.len() as f64);
    Ok(TestOutcome { statistic: d, p_value: p, passes: p > level })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("two-sample KS needs nonempty samples".into()));
    }
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
        s
    };
    let (x, y) = (sort(a), sort(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let p = ks_p_value(d, n * m / (n + m));
    Ok(TestOutcome { statistic: d, p_value: p, passes: p > level })
}

/// Pearson χ² test of observed counts against expected counts.
pub fn chi_square_test(observed: &[f64], expected: &[f64], ddof: usize, level: f64) -> Result<TestOutcome> {
    if observed.len() != expected.len() || observed.len() <= ddof + 1 {
        return Err(Error::Data("χ² test needs matching bins and positive degrees of freedom".into()));
    }
    if expected.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Data("expected counts must be positive".into()));
    }
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (observed.len() - 1 - ddof) as f64;
    let p = special::chi_square_survival(stat, dof);
    Ok(TestOutcome { statistic: stat, p_value: p, passes: p > level })
}

/// Cholesky factor of a Hermitian positive semidefinite matrix with additive
/// diagonal jitter `1e-12·tr/n`, multiplied by 10 per retry up to `1e-6·tr/n`.
/// Returns the lower factor and the jitter used.
pub fn cholesky_with_jitter<T>(m: &DMatrix<T>) -> Result<(DMatrix<T>, f64)>
where
    T: ComplexField<RealField = f64>,
{
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Numeric("Cholesky needs a nonempty square matrix".into()));
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let trace: f64 = (0..n).map(|i| m[(i, i)].clone().real()).sum::<f64>();
    let scale = (trace / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = 1e-12;
    while rel <= 1e-6 * (1.0 + 1e-9) {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += T::from_real(rel * scale);
        }
        if let Some(c) = a.cholesky() {
            return Ok((c.l(), rel * scale));
        }
        rel *= 10.0;
    }
    let min_diag = (0..n).map(|i| m[(i, i)].clone().real()).fold(f64::INFINITY, f64::min);
    Err(Error::Numeric(format!(
        "Cholesky failed after maximal jitter (dim {n}, trace/dim {:.3e}, min diagonal {min_diag:.3e})",
        trace / n as f64
    )))
}

/// Draws a zero-mean Gaussian vector `L ξ`.
pub fn gaussian_from_factor<R: rand::Rng>(l: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = l.nrows();
    let xi: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * xi[j]).sum()).collect()
}

/// Result of the Kahane convexity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahaneVerdict {
    pub convex_small: Estimate,
    pub convex_large: Estimate,
    pub concave_small: Estimate,
    pub concave_large: Estimate,
    pub holds: bool,
}

/// Compares `E[F(Σ w_i e^{Y_i − E[Y_i²]/2})]` for fields with covariances
/// `small ≤ large` (entrywise), for `F(x) = x²` and `F(x) = √x`.
pub fn kahane_order_check(
    cov_small: &DMatrix<f64>,
    cov_large: &DMatrix<f64>,
    weights: &[f64],
    n: usize,
    stream: RngStream,
) -> Result<KahaneVerdict> {
    let d = cov_small.nrows();
    if cov_large.shape() != cov_small.shape() || weights.len() != d {
        return Err(Error::Usage("covariances and weights must have matching sizes".into()));
    }
    for i in 0..d {
        for j in 0..d {
            if cov_small[(i, j)] > cov_large[(i, j)] + 1e-12 {
                return Err(Error::Usage(format!("entrywise domination fails at ({i},{j})")));
            }
        }
    }
    let run = |cov: &DMatrix<f64>, s: RngStream| -> Result<(Estimate, Estimate)> {
        let (l, _) = cholesky_with_jitter(cov)?;
        let mut rng = s.rng();
        let (mut a, mut b) = (MeanAccumulator::default(), MeanAccumulator::default());
        for _ in 0..n {
            let y = gaussian_from_factor(&l, &mut rng);
            let m: f64 = (0..d).map(|i| weights[i] * (y[i] - cov[(i, i)] / 2.0).exp()).sum();
            a.push(m * m);
            b.push(m.sqrt());
        }
        Ok((a.estimate(s.master_seed), b.estimate(s.master_seed)))
    };
    let (cs, ks) = run(cov_small, stream)?;
    let (cl, kl) = run(cov_large, stream.substream(1))?;
    let holds = cs.value - cl.value <= 3.0 * cs.stderr.hypot(cl.stderr) && kl.value - ks.value <= 3.0 * ks.stderr.hypot(kl.stderr);
    Ok(KahaneVerdict { convex_small: cs, convex_large: cl, concave_small: ks, concave_large: kl, holds })
}
