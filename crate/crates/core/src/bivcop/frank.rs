//! Frank family, `C(u,v) = -ln(1 + (e^-tu - 1)(e^-tv - 1)/(e^-t - 1)) / t`.

use crate::special::{bisect_increasing, debye1};

pub fn cdf(u: f64, v: f64, t: f64) -> f64 {
    let a = (-t * u).exp_m1();
    let b = (-t * v).exp_m1();
    -(a * b / (-t).exp_m1()).ln_1p() / t
}

// (e^-t - 1) + (e^-tu - 1)(e^-tv - 1), regrouped into two terms of equal sign
fn denom(u: f64, v: f64, t: f64) -> f64 {
    (-t * v).exp() * (-t * u).exp_m1() + (-t * u).exp() * (-t * (1.0 - u)).exp_m1()
}

pub fn h2(u: f64, v: f64, t: f64) -> f64 {
    (-t * v).exp() * (-t * u).exp_m1() / denom(u, v, t)
}

pub fn hinv2(p: f64, v: f64, t: f64) -> f64 {
    let ev = (-t * v).exp();
    let a = p * (-t).exp_m1() / (p + (1.0 - p) * ev);
    if a.abs() < 0.5 {
        -a.ln_1p() / t
    } else {
        // 1 + a without cancellation
        let one_plus_a = ((1.0 - p) * ev + p * (-t).exp()) / (p + (1.0 - p) * ev);
        -one_plus_a.ln() / t
    }
}

pub fn log_density(u: f64, v: f64, t: f64) -> f64 {
    (t * -(-t).exp_m1()).ln() - t * (u + v) - 2.0 * denom(u, v, t).abs().ln()
}

pub fn score(u: f64, v: f64, t: f64) -> f64 {
    if t.abs() < 1e-5 {
        // first-order expansion around independence
        return 0.5 * (1.0 - 2.0 * u) * (1.0 - 2.0 * v);
    }
    let eu = (-t * u).exp();
    let ev = (-t * v).exp();
    // derivative of D = -denom
    let dd = (-t).exp() + u * eu * (-t * v).exp_m1() + v * ev * (-t * u).exp_m1();
    1.0 / t + 1.0 / t.exp_m1() - (u + v) + 2.0 * dd / denom(u, v, t)
}

pub fn tau(t: f64) -> f64 {
    if t.abs() < 1e-5 {
        return t / 9.0;
    }
    1.0 - 4.0 / t * (1.0 - debye1(t))
}

/// Inverse of [`tau`] on `[-35, 35]`; `None` when `tau` is out of reach.
pub fn from_tau(target: f64) -> Option<f64> {
    let (lo, hi) = (-35.0, 35.0);
    if target <= tau(lo) || target >= tau(hi) {
        return None;
    }
    let t = bisect_increasing(tau, target, lo, hi);
    (t.abs() >= 1e-5).then_some(t)
}
