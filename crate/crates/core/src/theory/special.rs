//! Error function family.
//!
//! `erf`/`erfc` come from `libm`, a port of FreeBSD msun `s_erf.c` whose
//! rational approximations are accurate to under one ulp on the whole real
//! line. The inverse is computed here: a single-precision polynomial seed
//! (Giles, "Approximating the erfinv function", 2010) followed by Halley
//! iterations against `erf`/`erfc`. The Halley step converges cubically, so
//! two or three steps take the ~1e-7 seed to full double precision.

use crate::error::{Error, Result};
use crate::real::Real;

pub fn erf<F: Real>(x: F) -> F {
    x.erf()
}

pub fn erfc<F: Real>(x: F) -> F {
    x.erfc()
}

/// Standard normal CDF, `½·erfc(-x/√2)`.
pub fn normal_cdf<F: Real>(x: F) -> F {
    F::lit(0.5) * erfc(-x / F::SQRT_2())
}

/// Inverse error function on the open interval `(-1, 1)`.
pub fn erf_inv<F: Real>(y: F) -> Result<F> {
    let y64 = y.as_f64();
    if y64.is_nan() || y64.abs() >= 1.0 {
        return Err(Error::domain(format!("erf_inv needs |y| < 1, got {y}")));
    }
    Ok(F::lit(erf_inv_f64(y64)))
}

fn erf_inv_f64(y: f64) -> f64 {
    if y == 0.0 {
        return y;
    }
    let a = y.abs();
    let mut x = giles_seed(a);
    // Residual erf(x) - a. Past 0.5 it is evaluated as (1 - a) - erfc(x);
    // 1 - a is exact there and erfc keeps the tail digits that erf loses.
    let residual = |x: f64| {
        if a <= 0.5 {
            libm::erf(x) - a
        } else {
            (1.0 - a) - libm::erfc(x)
        }
    };
    for _ in 0..4 {
        let slope = std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp();
        let r = residual(x) / slope;
        let step = r / (1.0 + x * r);
        x -= step;
        if step.abs() <= 1e-17 * x.abs() {
            break;
        }
    }
    x.copysign(y)
}

fn giles_seed(a: f64) -> f64 {
    let w = -(f64::ln_1p(-a) + f64::ln_1p(a));
    let p = if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        1.501_409_41 + p * w
    } else {
        let w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        2.832_976_82 + p * w
    };
    p * a
}
