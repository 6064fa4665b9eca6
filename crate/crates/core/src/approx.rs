//! Piecewise linear and quadratic surrogates for the success probability.
//!
//! Both surrogates are functions of the normalized margin `chi` only and are
//! odd-symmetric about `(0, 1/2)`. Because they are piecewise polynomial, the
//! throughput `(b/n) * P(b)` has closed-form stationary points, which give the
//! approximate optimal packet sizes computed here.

use serde::{Deserialize, Serialize};

use crate::channel::{chi, ChannelParams};
use crate::error::{domain, Error, Result};
use crate::qfunc::normal_cdf;

/// Linear ramp: `chi / (2 delta1) + delta0`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearApprox {
    pub delta0: f64,
    pub delta1: f64,
}

impl Default for LinearApprox {
    fn default() -> Self {
        Self {
            delta0: 0.5,
            delta1: 1.545,
        }
    }
}

impl LinearApprox {
    pub fn new(delta0: f64, delta1: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1.is_finite() && delta0.is_finite()) {
            return Err(domain(format!("delta1 must be positive, got {delta1}")));
        }
        Ok(Self { delta0, delta1 })
    }

    /// Surrogate success probability at margin `chi`.
    pub fn at_margin(&self, chi: f64) -> f64 {
        if chi >= self.delta1 {
            1.0
        } else if chi >= -self.delta1 {
            (chi / (2.0 * self.delta1) + self.delta0).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Blocklength above which the optimum sits on the `chi = delta1` kink,
    /// `9 delta1² V / C²`.
    pub fn threshold_n(&self, channel: &ChannelParams) -> f64 {
        let c = channel.capacity();
        9.0 * self.delta1 * self.delta1 * channel.dispersion() / (c * c)
    }
}

/// Quadratic-in-the-middle surrogate with a continuous first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadApprox {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl Default for QuadApprox {
    fn default() -> Self {
        Self::with_support(2.35).expect("default support is positive")
    }
}

impl QuadApprox {
    /// Builds the surrogate with `theta0 = 1/2` and `theta2 = 1/(2 theta1²)`.
    pub fn with_support(theta1: f64) -> Result<Self> {
        Self::new(0.5, theta1)
    }

    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        if !(theta1 > 0.0 && theta1.is_finite() && theta0.is_finite()) {
            return Err(domain(format!("theta1 must be positive, got {theta1}")));
        }
        Ok(Self {
            theta0,
            theta1,
            theta2: 0.5 / (theta1 * theta1),
        })
    }

    pub fn at_margin(&self, chi: f64) -> f64 {
        let (t0, t1, t2) = (self.theta0, self.theta1, self.theta2);
        if chi >= t1 {
            1.0
        } else if chi >= 0.0 {
            t2 * chi * (2.0 * t1 - chi) + t0
        } else if chi > -t1 {
            t2 * chi * (2.0 * t1 + chi) + t0
        } else {
            0.0
        }
    }

    /// Blocklength separating the upper-region optimum from the lower-region
    /// one, `theta1² V / (4 C²)`.
    pub fn threshold_n(&self, channel: &ChannelParams) -> f64 {
        let c = channel.capacity();
        self.theta1 * self.theta1 * channel.dispersion() / (4.0 * c * c)
    }
}

pub fn linear_pc(bits: f64, n: u64, channel: &ChannelParams, params: &LinearApprox) -> f64 {
    params.at_margin(chi(bits, n, channel))
}

pub fn quad_pc(bits: f64, n: u64, channel: &ChannelParams, params: &QuadApprox) -> f64 {
    params.at_margin(chi(bits, n, channel))
}

/// Round half away from zero, then clamp to at least one bit.
fn to_bits(x: f64) -> u64 {
    if x.is_finite() && x >= 1.0 {
        x.round() as u64
    } else {
        1
    }
}

/// Closed-form optimal packet size under the linear surrogate.
pub fn linear_opt_k(n: u64, channel: &ChannelParams, params: &LinearApprox) -> u64 {
    let nf = n as f64;
    let mean = nf * channel.capacity();
    let spread = (nf * channel.dispersion()).sqrt();
    let k = if nf >= params.threshold_n(channel) {
        mean - params.delta1 * spread
    } else {
        0.5 * (mean + params.delta1 * spread)
    };
    to_bits(k)
}

/// Which closed form to use for the quadratic optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadForm {
    /// Stationary points re-derived from the cubic `d/dk [k P(k)] = 0`:
    /// upper region `(2/3)(nC - t1 s) + (1/3) sqrt((nC)² - 2 t1 nC s + 7 t1² s²)`,
    /// lower region `(nC + t1 s)/3`, with `s = sqrt(nV)`.
    #[default]
    Derived,
    /// The commonly printed variant: `-7 t1² V` under the radical and
    /// `(nC - t1 s)/3` in the lower region. Kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadBranch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadOptimum {
    pub k: u64,
    pub branch: QuadBranch,
    /// Set when the closed form was unusable and an integer scan was used.
    pub diagnostic: Option<String>,
}

/// Closed-form optimal packet size under the quadratic surrogate.
pub fn quad_opt_k(n: u64, channel: &ChannelParams, params: &QuadApprox) -> u64 {
    quad_opt_k_with(n, channel, params, QuadForm::Derived).k
}

pub fn quad_opt_k_with(
    n: u64,
    channel: &ChannelParams,
    params: &QuadApprox,
    form: QuadForm,
) -> QuadOptimum {
    let nf = n as f64;
    let c = channel.capacity();
    let v = channel.dispersion();
    let t1 = params.theta1;
    let mean = nf * c;
    let spread = (nf * v).sqrt();

    let branch = if nf >= params.threshold_n(channel) {
        QuadBranch::Upper
    } else {
        QuadBranch::Lower
    };
    let (k, radicand) = match (branch, form) {
        (QuadBranch::Upper, QuadForm::Derived) => {
            let r = nf * c * c + 7.0 * t1 * t1 * v - 2.0 * t1 * c * spread;
            (2.0 / 3.0 * (mean - t1 * spread) + nf.sqrt() / 3.0 * r.max(0.0).sqrt(), r)
        }
        (QuadBranch::Upper, QuadForm::Printed) => {
            let r = nf * c * c - 7.0 * t1 * t1 * v - 2.0 * t1 * c * spread;
            (2.0 / 3.0 * (mean - t1 * spread) + nf.sqrt() / 3.0 * r.max(0.0).sqrt(), r)
        }
        (QuadBranch::Lower, QuadForm::Derived) => ((mean + t1 * spread) / 3.0, 0.0),
        (QuadBranch::Lower, QuadForm::Printed) => ((mean - t1 * spread) / 3.0, 0.0),
    };

    if radicand < 0.0 {
        let upper = (mean + t1 * spread).ceil().max(1.0) as u64 + 1;
        let k = scan_argmax(upper, |b| b * quad_pc(b, n, channel, params));
        return QuadOptimum {
            k,
            branch,
            diagnostic: Some(format!(
                "negative radicand {radicand:.6e} at n={n}; used integer scan over [1, {upper}]"
            )),
        };
    }
    QuadOptimum {
        k: to_bits(k),
        branch,
        diagnostic: None,
    }
}

/// Smallest integer in `[1, upper]` maximizing `objective`.
pub(crate) fn scan_argmax(upper: u64, objective: impl Fn(f64) -> f64) -> u64 {
    let mut best = (1u64, f64::NEG_INFINITY);
    for b in 1..=upper.max(1) {
        let u = objective(b as f64);
        if u > best.1 {
            best = (b, u);
        }
    }
    best.0
}

/// Approximate optimal throughput `(k/n) * P(k)` under the linear surrogate.
pub fn linear_opt_throughput(n: u64, channel: &ChannelParams, params: &LinearApprox) -> (u64, f64) {
    let k = linear_opt_k(n, channel, params);
    (k, k as f64 / n as f64 * linear_pc(k as f64, n, channel, params))
}

/// Approximate optimal throughput `(k/n) * P(k)` under the quadratic surrogate.
pub fn quad_opt_throughput(n: u64, channel: &ChannelParams, params: &QuadApprox) -> (u64, f64) {
    let k = quad_opt_k(n, channel, params);
    (k, k as f64 / n as f64 * quad_pc(k as f64, n, channel, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxFamily {
    Linear,
    Quadratic,
}

/// Error norm minimized by [`fit_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitNorm {
    /// Integral of the absolute error. Optimum: `delta1 ≈ 1.487`, `theta1 ≈ 2.331`.
    Absolute,
    /// Integral of the squared error. Optimum: `delta1 ≈ 1.545`, `theta1 ≈ 2.350`,
    /// which are the default constants of [`LinearApprox`] and [`QuadApprox`].
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub norm: FitNorm,
    /// Quadrature covers `chi` in `[-window, window]`.
    pub window: f64,
    /// Quadrature step, at most `1e-3`.
    pub step: f64,
    /// Fit the intercept as well (linear family only); otherwise it is pinned at `1/2`.
    pub free_intercept: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            norm: FitNorm::Squared,
            window: 8.0,
            step: 1e-3,
            free_intercept: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: ApproxFamily,
    pub norm: FitNorm,
    /// `delta0` or `theta0`.
    pub intercept: f64,
    /// `delta1` or `theta1`.
    pub support: f64,
    /// Value of the error integral at the optimum.
    pub objective: f64,
}

struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    target: Vec<f64>,
}

impl Quadrature {
    /// Composite Simpson rule over `[-w, w]` with `intervals` (even) panels.
    fn simpson(w: f64, intervals: usize) -> Self {
        let h = 2.0 * w / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|i| -w + i as f64 * h).collect();
        let weights = (0..=intervals)
            .map(|i| {
                let c = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        let target = nodes.iter().map(|&x| normal_cdf(x)).collect();
        Self {
            nodes,
            weights,
            target,
        }
    }

    fn error(&self, norm: FitNorm, approx: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.target)
            .map(|((&x, &w), &t)| {
                let e = approx(x) - t;
                w * match norm {
                    FitNorm::Absolute => e.abs(),
                    FitNorm::Squared => e * e,
                }
            })
            .sum()
    }
}

/// Golden-section minimization on `[lo, hi]`.
fn golden_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn family_curve(family: ApproxFamily, intercept: f64, support: f64) -> impl Fn(f64) -> f64 {
    move |x| match family {
        ApproxFamily::Linear => LinearApprox {
            delta0: intercept,
            delta1: support,
        }
        .at_margin(x),
        ApproxFamily::Quadratic => {
            let mut q = QuadApprox::with_support(support).expect("positive support");
            q.theta0 = intercept;
            q.at_margin(x)
        }
    }
}

/// Fits the free constants of a surrogate family to the exact normal CDF by
/// minimizing the chosen error integral over `chi`.
pub fn fit_constants(family: ApproxFamily, options: &FitOptions) -> Result<FitResult> {
    if !(options.step > 0.0 && options.step <= 1e-3) {
        return Err(domain(format!("quadrature step must lie in (0, 1e-3], got {}", options.step)));
    }
    if !(options.window > 0.0 && options.window.is_finite()) {
        return Err(domain("quadrature window must be positive"));
    }
    if options.free_intercept && family == ApproxFamily::Quadratic {
        return Err(domain("the quadratic intercept is pinned at 1/2"));
    }
    let mut intervals = (2.0 * options.window / options.step).ceil() as usize;
    intervals += intervals % 2;
    let quad = Quadrature::simpson(options.window, intervals);
    let norm = options.norm;
    let (lo, hi) = match family {
        ApproxFamily::Linear => (0.25, 4.0),
        ApproxFamily::Quadratic => (0.5, 5.0),
    };
    let fit_support = |intercept: f64| {
        golden_min(lo, hi, 1e-8, |s| quad.error(norm, family_curve(family, intercept, s)))
    };

    let (intercept, support, objective) = if options.free_intercept {
        let (c, _) = golden_min(0.0, 1.0, 1e-7, |c| fit_support(c).1);
        let (s, obj) = fit_support(c);
        (c, s, obj)
    } else {
        let (s, obj) = fit_support(0.5);
        (0.5, s, obj)
    };

    if !objective.is_finite() {
        return Err(Error::Numerical("error integral is not finite".into()));
    }
    // halving the node count must not move the integral appreciably
    let coarse = Quadrature::simpson(options.window, intervals / 2 + (intervals / 2) % 2);
    let check = coarse.error(norm, family_curve(family, intercept, support));
    if (check - objective).abs() > 1e-5 * objective.max(1e-3) {
        return Err(Error::Numerical(format!(
            "quadrature did not converge: {objective:.9e} vs {check:.9e} at half resolution"
        )));
    }
    Ok(FitResult {
        family,
        norm,
        intercept,
        support,
        objective,
    })
}

/// Largest absolute gap between a surrogate and the exact CDF on a uniform
/// `chi` grid over `[-window, window]`.
pub fn max_abs_deviation(curve: impl Fn(f64) -> f64, window: f64, step: f64) -> f64 {
    let count = (2.0 * window / step).round() as usize;
    (0..=count)
        .map(|i| {
            let x = -window + i as f64 * step;
            (curve(x) - normal_cdf(x)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ChannelParams {
        ChannelParams::new(1.0).unwrap()
    }

    #[test]
    fn linear_examples() {
        let lin = LinearApprox::default();
        assert_eq!(lin.at_margin(0.0), 0.5);
        assert_eq!(lin.at_margin(lin.delta1), 1.0);
        assert_eq!(lin.at_margin(-2.0), 0.0);
        assert!(LinearApprox::new(0.5, 0.0).is_err());
    }

    #[test]
    fn quad_examples() {
        let q = QuadApprox::default();
        assert_eq!(q.theta2, 0.5 / (2.35 * 2.35));
        assert_eq!(q.at_margin(0.0), 0.5);
        assert_eq!(q.at_margin(q.theta1), 1.0);
        assert!((q.at_margin(q.theta1 / 2.0) - 0.875).abs() < 1e-15);
        assert!((q.at_margin(-q.theta1 / 2.0) - 0.125).abs() < 1e-15);
        assert_eq!(q.at_margin(-q.theta1), 0.0);
    }

    #[test]
    fn linear_opt_k_examples() {
        let ch = unit();
        let lin = LinearApprox::default();
        assert_eq!(linear_opt_k(1000, &ch, &lin), 457);
        assert_eq!(linear_opt_k(16, &ch, &lin), 7);
        // 9 * 1.545² * 0.780513 / 0.25
        assert!((lin.threshold_n(&ch) - 67.071_78).abs() < 1e-4);
    }

    #[test]
    fn quad_threshold_example() {
        let q = QuadApprox::default();
        // 2.35² * 0.780513 / (4 * 0.25)
        assert!((q.threshold_n(&unit()) - 4.3104).abs() < 1e-3);
    }

    #[test]
    fn quad_large_n_consistency() {
        let ch = unit();
        let n = 100_000;
        let k = quad_opt_k(n, &ch, &QuadApprox::default());
        let rel = (ch.capacity() - k as f64 / n as f64) / ch.capacity();
        assert!(rel > 0.0 && rel < 0.05, "{rel}");
    }

    #[test]
    fn printed_form_falls_back_on_negative_radicand() {
        // very low snr and small n make nC² - 7 t1² V negative
        let ch = ChannelParams::new(0.2).unwrap();
        let q = QuadApprox::default();
        let n = 30;
        assert!(n as f64 >= q.threshold_n(&ch));
        let printed = quad_opt_k_with(n, &ch, &q, QuadForm::Printed);
        assert!(printed.diagnostic.is_some());
        let derived = quad_opt_k_with(n, &ch, &q, QuadForm::Derived);
        assert!(derived.diagnostic.is_none());
        assert!(printed.k.abs_diff(derived.k) <= 1);
    }

    #[test]
    fn printed_lower_branch_is_clamped() {
        let ch = unit();
        let q = QuadApprox::default();
        let out = quad_opt_k_with(3, &ch, &q, QuadForm::Printed);
        assert_eq!(out.branch, QuadBranch::Lower);
        assert_eq!(out.k, 1);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let (x, fx) = golden_min(-3.0, 5.0, 1e-10, |x| (x - 1.25) * (x - 1.25) + 2.0);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_coarse_step() {
        let opts = FitOptions {
            step: 1e-2,
            ..FitOptions::default()
        };
        assert!(fit_constants(ApproxFamily::Linear, &opts).is_err());
    }
}
