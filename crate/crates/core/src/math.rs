//! Float helpers that work with and without `std`.
//!
//! `core` has no `exp`/`ln`/`sqrt`; route them through here so the rest of
//! the crate never cares which backend is active.

#[cfg(feature = "std")]
mod backend {
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    pub fn round(x: f64) -> f64 {
        x.round()
    }
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
}

#[cfg(not(feature = "std"))]
mod backend {
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}

pub(crate) use backend::{abs, exp, floor, ln, round, sqrt};

/// Error function, Abramowitz & Stegun 7.1.26 rational approximation.
/// Absolute error below 1.5e-7, plenty for the distribution analytics here.
pub(crate) fn erf(x: f64) -> f64 {
    const A1: f64 = 0.254829592;
    const A2: f64 = -0.284496736;
    const A3: f64 = 1.421413741;
    const A4: f64 = -1.453152027;
    const A5: f64 = 1.061405429;
    const P: f64 = 0.3275911;

    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = abs(x);
    let t = 1.0 / (1.0 + P * x);
    let y = 1.0 - (((((A5 * t + A4) * t) + A3) * t + A2) * t + A1) * t * exp(-x * x);
    sign * y
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / core::f64::consts::SQRT_2))
}

/// Standard normal density.
pub(crate) fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.3989422804014327;
    INV_SQRT_2PI * exp(-0.5 * z * z)
}

/// ln(k!) — exact product below 20, Stirling series above.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        let mut f = 1.0f64;
        for i in 2..=k {
            f *= i as f64;
        }
        ln(f)
    } else {
        // Stirling with the first two correction terms; relative error is
        // far below 1e-10 for k >= 20.
        let kf = k as f64;
        const HALF_LN_2PI: f64 = 0.9189385332046727;
        (kf + 0.5) * ln(kf) - kf + HALF_LN_2PI + 1.0 / (12.0 * kf) - 1.0 / (360.0 * kf * kf * kf)
    }
}
