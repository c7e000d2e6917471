//! Gumbel family, `C(u,v) = exp(-((-ln u)^t + (-ln v)^t)^(1/t))` for `t >= 1`.

use crate::error::{Error, Result};

// x = -ln u, y = -ln v, returns (ln x, ln y, ln A) with A = x^t + y^t
fn parts(u: f64, v: f64, t: f64) -> (f64, f64, f64) {
    let lx = (-u.ln()).ln();
    let ly = (-v.ln()).ln();
    let (a, b) = (t * lx, t * ly);
    let m = a.max(b);
    (lx, ly, m + ((a - m).exp() + (b - m).exp()).ln())
}

pub fn cdf(u: f64, v: f64, t: f64) -> f64 {
    let (_, _, la) = parts(u, v, t);
    (-(la / t).exp()).exp()
}

pub fn h2(u: f64, v: f64, t: f64) -> f64 {
    let (_, ly, la) = parts(u, v, t);
    let w = (la / t).exp();
    (-w + (1.0 / t - 1.0) * la + (t - 1.0) * ly - v.ln()).exp()
}

pub fn log_density(u: f64, v: f64, t: f64) -> f64 {
    let (lx, ly, la) = parts(u, v, t);
    let w = (la / t).exp();
    -w + lx.exp() + ly.exp() + (t - 1.0) * (lx + ly) + (1.0 / t - 2.0) * la + (w + t - 1.0).ln()
}

pub fn score(u: f64, v: f64, t: f64) -> f64 {
    let (lx, ly, la) = parts(u, v, t);
    let w = (la / t).exp();
    let da_over_a = lx * (t * lx - la).exp() + ly * (t * ly - la).exp();
    let dw = w * (-la / (t * t) + da_over_a / t);
    -dw + lx + ly - la / (t * t) + (1.0 / t - 2.0) * da_over_a + (dw + 1.0) / (w + t - 1.0)
}

/// Solves `h2(u | v) = p` for `u` by Newton steps safeguarded with bisection.
pub fn hinv2(p: f64, v: f64, t: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut u = p;
    let mut resid = f64::NAN;
    for _ in 0..200 {
        resid = h2(u, v, t) - p;
        if resid.abs() < 1e-14 {
            return Ok(u);
        }
        if resid > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let step = resid / log_density(u, v, t).exp();
        let next = u - step;
        u = if next > lo && next < hi && next.is_finite() {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            break;
        }
    }
    if resid.abs() < 1e-10 {
        Ok(u)
    } else {
        Err(Error::Numeric(format!(
            "gumbel h-inverse did not converge (p={p}, v={v}, theta={t}, residual={resid:e})"
        )))
    }
}

pub fn tau(t: f64) -> f64 {
    1.0 - 1.0 / t
}

pub fn from_tau(tau: f64) -> f64 {
    1.0 / (1.0 - tau)
}
