#![allow(dead_code)]

use fblmac::throughput::LinkSet;

/// Standard normal density.
pub fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson integral of `f` over `[a, b]` with step near `h`.
pub fn simpson(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut m = ((b - a).abs() / h).ceil() as usize;
    m += m % 2;
    let step = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * step);
    }
    acc * step / 3.0
}

/// Gaussian tail `Q(x)` by direct quadrature of the density.
pub fn q_oracle(x: f64) -> f64 {
    0.5 - simpson(0.0, x, 1e-3, phi)
}

pub fn triple_a() -> LinkSet {
    LinkSet::from_snr(0.2, 0.35, 1.0).unwrap()
}

pub fn triple_b() -> LinkSet {
    LinkSet::from_snr(0.2, 0.5, 1.0).unwrap()
}
