//! Clayton family, `C(u,v) = (u^-t + v^-t - 1)^(-1/t)` for `t > 0`.

/// `ln(u^-t + v^-t - 1)` without overflow for small arguments or large `t`.
fn ln_a(lu: f64, lv: f64, t: f64) -> f64 {
    let (x, y) = (-t * lu, -t * lv);
    let m = x.max(y);
    if m > 30.0 {
        m + ((x - m).exp() + (y - m).exp() - (-m).exp()).ln()
    } else {
        (x.exp_m1() + y.exp_m1()).ln_1p()
    }
}

pub fn cdf(u: f64, v: f64, t: f64) -> f64 {
    (-ln_a(u.ln(), v.ln(), t) / t).exp()
}

/// Conditional cdf of the first argument given the second.
pub fn h2(u: f64, v: f64, t: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    ((-t - 1.0) * lv - (1.0 / t + 1.0) * ln_a(lu, lv, t)).exp()
}

pub fn hinv2(p: f64, v: f64, t: f64) -> f64 {
    // A = 1 + v^-t (p^(-t/(1+t)) - 1), u = A^(-1/t)
    let e = (-t / (1.0 + t) * p.ln()).exp_m1();
    let s = -t * v.ln() + e.ln();
    let ln_a = if s > 30.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    };
    (-ln_a / t).exp()
}

pub fn log_density(u: f64, v: f64, t: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    t.ln_1p() - (1.0 + t) * (lu + lv) - (2.0 + 1.0 / t) * ln_a(lu, lv, t)
}

pub fn score(u: f64, v: f64, t: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    let la = ln_a(lu, lv, t);
    // dA/dt / A, with u^-t = exp(-t ln u)
    let da_over_a = -lu * (-t * lu - la).exp() - lv * (-t * lv - la).exp();
    1.0 / (1.0 + t) - lu - lv + la / (t * t) - (2.0 + 1.0 / t) * da_over_a
}

pub fn tau(t: f64) -> f64 {
    t / (t + 2.0)
}

pub fn from_tau(tau: f64) -> f64 {
    2.0 * tau / (1.0 - tau)
}
