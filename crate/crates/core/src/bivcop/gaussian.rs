//! Gaussian family with correlation `r` in `(-1, 1)`.

use crate::special::{bvn_cdf, norm_cdf, norm_quantile};
use std::f64::consts::PI;

pub fn cdf(u: f64, v: f64, r: f64) -> f64 {
    bvn_cdf(norm_quantile(u), norm_quantile(v), r)
}

pub fn h2(u: f64, v: f64, r: f64) -> f64 {
    let (x, y) = (norm_quantile(u), norm_quantile(v));
    norm_cdf((x - r * y) / (1.0 - r * r).sqrt())
}

pub fn hinv2(p: f64, v: f64, r: f64) -> f64 {
    norm_cdf(norm_quantile(p) * (1.0 - r * r).sqrt() + r * norm_quantile(v))
}

pub fn log_density(u: f64, v: f64, r: f64) -> f64 {
    let (x, y) = (norm_quantile(u), norm_quantile(v));
    let s = 1.0 - r * r;
    -0.5 * s.ln() - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * s)
}

pub fn score(u: f64, v: f64, r: f64) -> f64 {
    let (x, y) = (norm_quantile(u), norm_quantile(v));
    let s = 1.0 - r * r;
    r / s + (x * y * (1.0 + r * r) - r * (x * x + y * y)) / (s * s)
}

pub fn tau(r: f64) -> f64 {
    2.0 / PI * r.asin()
}

pub fn from_tau(tau: f64) -> f64 {
    (PI * tau / 2.0).sin()
}
