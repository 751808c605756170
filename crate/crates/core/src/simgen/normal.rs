//! Standard normal and bivariate normal distribution functions.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile; `-inf`/`inf` at 0 and 1.
#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        // Newton polish of the starting value against the accurate CDF.
        let mut x = -SQRT_2 * erfc_inv(2.0 * p);
        for _ in 0..2 {
            let f = norm_pdf(x);
            if !x.is_finite() || f < 1e-300 {
                break;
            }
            let err = if x <= 0.0 { norm_cdf(x) - p } else { (1.0 - p) - norm_cdf(-x) };
            x -= err / f;
        }
        x
    }
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Gauss-Legendre half rules (nodes in (-1, 0), matching weights) with 6,
// 12 and 20 points.
const GL6: ([f64; 3], [f64; 3]) = (
    [-0.932469514203152, -0.6612093864662645, -0.23861918608319693],
    [0.17132449237916975, 0.36076157304813894, 0.46791393457269137],
);
const GL12: ([f64; 6], [f64; 6]) = (
    [
        -0.9815606342467192,
        -0.9041172563704748,
        -0.7699026741943047,
        -0.5873179542866175,
        -0.3678314989981802,
        -0.1252334085114689,
    ],
    [
        0.04717533638651202,
        0.10693932599531888,
        0.1600783285433461,
        0.20316742672306565,
        0.23349253653835464,
        0.2491470458134027,
    ],
);
const GL20: ([f64; 10], [f64; 10]) = (
    [
        -0.9931285991850949,
        -0.9639719272779138,
        -0.9122344282513258,
        -0.8391169718222188,
        -0.7463319064601508,
        -0.636053680726515,
        -0.5108670019508271,
        -0.37370608871541955,
        -0.2277858511416451,
        -0.07652652113349734,
    ],
    [
        0.017614007139153273,
        0.04060142980038622,
        0.06267204833410944,
        0.08327674157670467,
        0.10193011981724026,
        0.11819453196151825,
        0.13168863844917653,
        0.14209610931838187,
        0.14917298647260366,
        0.15275338713072578,
    ],
);

/// `P(Z1 <= h, Z2 <= k)` for a standard bivariate normal with correlation
/// `rho`, by Genz's refinement of the Drezner-Wesolowsky method (absolute
/// error well below 1e-12 in double precision). `|rho| = 1` is handled
/// exactly.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if rho >= 1.0 {
        return norm_cdf(h.min(k));
    }
    if rho <= -1.0 {
        return (norm_cdf(h) - norm_cdf(-k)).max(0.0);
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return norm_cdf(k);
    }
    if k == f64::INFINITY {
        return norm_cdf(h);
    }
    bvn_upper(-h, -k, rho).clamp(0.0, 1.0)
}

/// `P(Z1 > h, Z2 > k)`.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let (x, w): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6.0, &GL6.1)
    } else if r.abs() < 0.75 {
        (&GL12.0, &GL12.1)
    } else {
        (&GL20.0, &GL20.1)
    };
    let two_pi = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (xi, wi) in x.iter().zip(w) {
            for s in [1.0, -1.0] {
                let sn = (asr * (s * xi + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
    }
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let a_s = (1.0 - r) * (1.0 + r);
    let mut a = a_s.sqrt();
    let bs = (h - k).powi(2);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    bvn = a
        * (-(bs / a_s + hk) / 2.0).exp()
        * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    if hk > -160.0 {
        let b = bs.sqrt();
        bvn -= (-hk / 2.0).exp()
            * two_pi.sqrt()
            * norm_cdf(-b / a)
            * b
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (xi, wi) in x.iter().zip(w) {
        let xs = (a * (xi + 1.0)).powi(2);
        let rs = (1.0 - xs).sqrt();
        bvn += a
            * wi
            * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
        let xs = a_s * (1.0 - xi).powi(2) / 4.0;
        let rs = (1.0 - xs).sqrt();
        bvn += a
            * wi
            * (-(bs / xs + hk) / 2.0).exp()
            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / two_pi;
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0)
    }
}
