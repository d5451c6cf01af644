//! One-dimensional quadrature rules: Gauss-Legendre, geometric grading toward
//! logarithmic endpoint singularities, periodic trapezoid and adaptive
//! Gauss-Kronrod.

use std::sync::OnceLock;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared cached rules for the orders used throughout the crate.
pub fn gl(n: usize) -> &'static GaussLegendre {
    static CACHE: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=64).map(|k| GaussLegendre::new(k.max(1))).collect());
    if n <= 64 {
        &cache[n]
    } else {
        static BIG: OnceLock<std::sync::Mutex<Vec<(usize, &'static GaussLegendre)>>> = OnceLock::new();
        let big = BIG.get_or_init(|| std::sync::Mutex::new(Vec::new()));
        let mut guard = big.lock().expect("rule cache poisoned");
        if let Some((_, r)) = guard.iter().find(|(k, _)| *k == n) {
            return r;
        }
        let rule: &'static GaussLegendre = Box::leak(Box::new(GaussLegendre::new(n)));
        guard.push((n, rule));
        rule
    }
}

/// Composite rule on `[a, b]` with geometrically shrinking panels toward `a`
/// (when `toward_a`) or `b`. Handles integrable logarithmic endpoint
/// singularities and near-singular features at any scale above
/// `(b - a) * ratio^levels`. Grading toward `b` (or an interior breakpoint) is
/// limited by the floating-point resolution of `b`, so keep `ratio^levels`
/// above about `1e-14` there.
pub fn graded_nodes(a: f64, b: f64, toward_a: bool, levels: usize, ratio: f64, order: usize) -> Vec<(f64, f64)> {
    let rule = gl(order);
    let len = b - a;
    let mut out = Vec::with_capacity((levels + 1) * order);
    let mut outer = 1.0;
    for k in 0..=levels {
        let inner = if k == levels { 0.0 } else { outer * ratio };
        let (lo, hi) = if toward_a {
            (a + inner * len, a + outer * len)
        } else {
            (b - outer * len, b - inner * len)
        };
        out.extend(rule.mapped(lo, hi));
        outer = inner;
    }
    out
}

/// Nodes on `[a, b]` split at the supplied breakpoints, each panel graded
/// toward both of its ends.
pub fn breakpoint_nodes(a: f64, b: f64, breaks: &[f64], levels: usize, ratio: f64, order: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = vec![a, b];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-14 * (b - a).abs().max(1.0));
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        out.extend(graded_nodes(w[0], m, true, levels, ratio, order));
        out.extend(graded_nodes(m, w[1], false, levels, ratio, order));
    }
    out
}

/// Trapezoid rule for a `2π`-periodic integrand (exact for trigonometric
/// polynomials of degree below `n`).
pub fn periodic_trapezoid<F: FnMut(f64) -> f64>(n: usize, offset: f64, mut f: F) -> f64 {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    (0..n).map(|k| f(offset + h * k as f64)).sum::<f64>() * h
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive 7-15 Gauss-Kronrod on `[a, b]` until the error estimate
/// falls below `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> AdaptiveResult {
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let value: f64 = intervals.iter().map(|t| t.2).sum();
        let error: f64 = intervals.iter().map(|t| t.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || intervals.len() >= max_intervals {
            return AdaptiveResult { value, error, evaluations: evals };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evals += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}
