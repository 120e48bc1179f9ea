//! Standard-normal special functions and the generalized mean `m_alpha`.
//!
//! The CDF follows W. J. Cody's rational Chebyshev approximations
//! ("Rational Chebyshev approximations for the error function", Math. Comp.
//! 23, 1969), with the coefficient set distributed in Cody's ANORM routine
//! (also used by R's `pnorm`). Three regimes are used:
//!
//! * `|z| <= 0.67448975`: odd rational function of degree (4, 4) in `z^2`
//!   (coefficients `A`, `B`);
//! * `0.67448975 < |z| <= sqrt(32)`: rational function of degree (8, 8) in
//!   `|z|` multiplying `exp(-z^2/2)` (coefficients `C`, `D`);
//! * `|z| > sqrt(32)`: asymptotic rational function of degree (5, 5) in
//!   `1/z^2` (coefficients `P`, `Q`).
//!
//! In the two tail regimes `exp(-z^2/2)` is evaluated as
//! `exp(-s^2/2) * exp(-(z-s)(z+s)/2)` with `s = trunc(16 z)/16`, which keeps
//! full relative precision out to `|z| ~ 38` where the result becomes
//! subnormal.
//!
//! The quantile uses P. J. Acklam's rational initializer (relative error
//! about 1.15e-9) refined by two Newton steps on [`std_cdf`].

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A probability strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProbLevel(f64);

impl ProbLevel {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidLevel(p))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 - p`, itself a valid level.
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl TryFrom<f64> for ProbLevel {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

/// VaR, CVaR and the upper partial expectation of a standard normal at a
/// CDF level `p` (so the tail mass is `1 - p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdGaussianStats {
    pub level: ProbLevel,
    pub var: f64,
    pub cvar: f64,
    pub partial_expectation: f64,
}

impl StdGaussianStats {
    pub fn at(level: ProbLevel) -> Self {
        let var = std_quantile(level);
        let partial_expectation = upper_partial_expectation(var);
        // Tail mass computed from the complement so small tails keep precision.
        let tail = 1.0 - level.get();
        Self {
            level,
            var,
            cvar: partial_expectation / tail,
            partial_expectation,
        }
    }
}

/// Standard normal density.
#[inline]
pub fn std_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] = [
    47.202_581_904_688_241_87,
    976.098_551_737_776_693_22,
    10_260.932_208_618_978_205,
    45_507.789_335_026_729_956,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// `exp(-y^2/2)` split to avoid losing relative precision in the tails.
#[inline]
fn gauss_kernel(y: f64) -> f64 {
    let s = (y * 16.0).trunc() / 16.0;
    let del = (y - s) * (y + s);
    (-0.5 * s * s).exp() * (-0.5 * del).exp()
}

/// Upper tail `P[Y > y]` for `y >= sqrt(0.67448975^2)`.
#[inline]
fn upper_tail(y: f64) -> f64 {
    if y <= 32f64.sqrt() {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let r = (num + C[7]) / (den + D[7]);
        gauss_kernel(y) * r
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        let r = ysq * (num + P[4]) / (den + Q[4]);
        let r = (FRAC_1_SQRT_2PI - r) / y;
        gauss_kernel(y) * r
    }
}

/// Standard normal CDF.
pub fn std_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let y = z.abs();
    if y <= 0.674_489_75 {
        let zsq = z * z;
        let (mut num, mut den) = if y > f64::EPSILON * 0.5 {
            (A[4] * zsq, zsq)
        } else {
            (0.0, 0.0)
        };
        if y > f64::EPSILON * 0.5 {
            for i in 0..3 {
                num = (num + A[i]) * zsq;
                den = (den + B[i]) * zsq;
            }
        }
        0.5 + z * (num + A[3]) / (den + B[3])
    } else {
        let tail = upper_tail(y);
        if z > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Upper tail `1 - std_cdf(z)` without cancellation for large `z`.
pub fn std_sf(z: f64) -> f64 {
    std_cdf(-z)
}

/// `1 - r + 3 r^2 - 15 r^3 + 105 r^4 - 945 r^5` with `r = 1/z^2`, from the
/// asymptotic expansion of the Mills ratio.
fn asymptotic_series(r: f64) -> f64 {
    1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * (105.0 - 945.0 * r))))
}

/// `ln std_cdf(z)`, finite far into the lower tail.
pub fn log_std_cdf(z: f64) -> f64 {
    if z > -30.0 {
        std_cdf(z).ln()
    } else {
        -0.5 * z * z - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + asymptotic_series(1.0 / (z * z)).ln()
    }
}

/// `std_pdf(z) / std_cdf(z)`, the derivative of [`log_std_cdf`].
pub fn pdf_over_cdf(z: f64) -> f64 {
    if z > -30.0 {
        std_pdf(z) / std_cdf(z)
    } else {
        let r = 1.0 / (z * z);
        -z / asymptotic_series(r)
    }
}

// Acklam's initializer.
const AK_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const AK_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const AK_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const AK_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const AK_LOW: f64 = 0.024_25;

/// Initial guess for `p <= 0.5`.
fn acklam_lower(p: f64) -> f64 {
    if p < AK_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((AK_C[0] * q + AK_C[1]) * q + AK_C[2]) * q + AK_C[3]) * q + AK_C[4]) * q + AK_C[5])
            / ((((AK_D[0] * q + AK_D[1]) * q + AK_D[2]) * q + AK_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((AK_A[0] * r + AK_A[1]) * r + AK_A[2]) * r + AK_A[3]) * r + AK_A[4]) * r + AK_A[5])
            * q
            / (((((AK_B[0] * r + AK_B[1]) * r + AK_B[2]) * r + AK_B[3]) * r + AK_B[4]) * r + 1.0)
    }
}

fn quantile_lower(p: f64) -> f64 {
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let dens = std_pdf(x);
        if dens <= 0.0 {
            break;
        }
        x -= (std_cdf(x) - p) / dens;
    }
    x
}

/// Standard normal quantile (inverse CDF).
pub fn std_quantile(p: ProbLevel) -> f64 {
    let p = p.get();
    if p == 0.5 {
        0.0
    } else if p < 0.5 {
        quantile_lower(p)
    } else {
        // 1 - p is exact for p >= 0.5.
        -quantile_lower(1.0 - p)
    }
}

/// `CVaR_{1-eps}(Y) = pdf(Phi^{-1}(1-eps)) / eps` for a standard normal `Y`,
/// where `tail` carries the tail mass `eps`.
pub fn gaussian_cvar(tail: ProbLevel) -> f64 {
    // pdf is even, so pdf(q(1 - eps)) = pdf(q(eps)) without forming 1 - eps.
    std_pdf(std_quantile(tail)) / tail.get()
}

/// `E[Y 1{Y >= t}]` for a standard normal `Y`, which equals the density at `t`.
#[inline]
pub fn upper_partial_expectation(t: f64) -> f64 {
    std_pdf(t)
}

/// Generalized mean `m_alpha(a, b; theta)` over the extended reals.
///
/// Returns 0 when `a * b = 0`; otherwise the geometric mean for `alpha = 0`,
/// `max`/`min` for `alpha = +inf`/`-inf`, and the power mean otherwise.
/// Power means are evaluated in the log domain. For `|alpha| < 1e-3` the
/// `expm1`/`ln_1p` form is used, and below `1e-12` the geometric branch.
pub fn m_alpha(a: f64, b: f64, theta: f64, alpha: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0, "m_alpha needs nonnegative arguments");
    debug_assert!((0.0..=1.0).contains(&theta));
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if alpha == f64::INFINITY {
        return a.max(b);
    }
    if alpha == f64::NEG_INFINITY {
        return a.min(b);
    }
    let (la, lb) = (a.ln(), b.ln());
    if alpha.abs() < 1e-12 {
        return (theta * la + (1.0 - theta) * lb).exp();
    }
    if alpha.abs() < 1e-3 {
        let s = theta * (alpha * la).exp_m1() + (1.0 - theta) * (alpha * lb).exp_m1();
        return (s.ln_1p() / alpha).exp();
    }
    // log(theta a^alpha + (1 - theta) b^alpha) by log-sum-exp.
    let ta = if theta > 0.0 {
        theta.ln() + alpha * la
    } else {
        f64::NEG_INFINITY
    };
    let tb = if theta < 1.0 {
        (1.0 - theta).ln() + alpha * lb
    } else {
        f64::NEG_INFINITY
    };
    let hi = ta.max(tb);
    let lse = hi + ((ta - hi).exp() + (tb - hi).exp()).ln();
    (lse / alpha).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(p: f64) -> ProbLevel {
        ProbLevel::new(p).unwrap()
    }

    #[test]
    fn level_rejects_endpoints() {
        assert!(ProbLevel::new(0.0).is_err());
        assert!(ProbLevel::new(1.0).is_err());
        assert!(ProbLevel::new(f64::NAN).is_err());
        assert!(ProbLevel::new(0.3).is_ok());
    }

    #[test]
    fn pdf_values() {
        assert!((std_pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(std_pdf(1.7), std_pdf(-1.7));
        // mpmath, 40 digits: 0.23315877271481933834...
        assert!((std_pdf(1.036_433_4) - 0.233_158_8).abs() < 5e-8);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_cdf(0.0), 0.5);
        // mpmath: ncdf(1.0364334) = 0.85000000244961514...
        assert!((std_cdf(1.036_433_4) - 0.85).abs() < 1e-8);
        assert!(std_cdf(-38.0) > 0.0);
        assert!(std_cdf(-37.0) > 0.0);
        for z in [-30.0, -5.5, -1.0, -0.3, 0.2, 0.9, 4.0, 8.0] {
            assert!((std_cdf(z) + std_cdf(-z) - 1.0).abs() <= 1e-15, "z = {z}");
        }
    }

    #[test]
    fn quantile_values() {
        assert_eq!(std_quantile(lvl(0.5)), 0.0);
        // mpmath: sqrt(2) erfinv(0.7) = 1.03643338949378957971...
        assert!((std_quantile(lvl(0.85)) - 1.036_433_389_493_79).abs() < 1e-13);
        // 1 - 0.85 is not exactly 0.15 in binary.
        assert!((std_quantile(lvl(0.15)) + std_quantile(lvl(0.85))).abs() < 1e-15);
        for p in [1e-300, 1e-20, 1e-5, 0.02, 0.3, 0.7, 0.999, 1.0 - 1e-12] {
            let q = std_quantile(lvl(p));
            assert!((std_cdf(q) - p).abs() <= 1e-12, "p = {p}");
        }
    }

    #[test]
    fn cvar_values() {
        assert!((gaussian_cvar(lvl(0.5)) - 2.0 * std_pdf(0.0)).abs() < 1e-15);
        // mpmath: npdf(q(0.85)) / 0.15 = 1.55439183502454849709...
        assert!((gaussian_cvar(lvl(0.15)) - 1.554_391_835_024_548_5).abs() < 1e-13);
        let st = StdGaussianStats::at(lvl(0.85));
        assert!(st.cvar >= st.var);
        assert!((st.partial_expectation - std_pdf(st.var)).abs() <= 1e-12);
        assert!((st.cvar - gaussian_cvar(lvl(0.15))).abs() < 1e-12);
    }

    #[test]
    fn log_cdf_branches_meet() {
        for z in [-29.999, -30.0, -30.001] {
            assert!((log_std_cdf(z) - std_cdf(z).ln()).abs() < 1e-10);
            assert!((pdf_over_cdf(z) - std_pdf(z) / std_cdf(z)).abs() < 1e-8);
        }
        assert!(log_std_cdf(-100.0).is_finite());
    }

    #[test]
    fn partial_expectation_values() {
        assert!((upper_partial_expectation(0.0) - 0.398_942_3).abs() < 1e-7);
        assert!(upper_partial_expectation(40.0) <= 1e-300);
    }

    #[test]
    fn m_alpha_branches() {
        assert_eq!(m_alpha(0.0, 5.0, 0.3, 1.0), 0.0);
        assert!((m_alpha(2.0, 8.0, 0.5, 0.0) - 4.0).abs() < 1e-14);
        assert!((m_alpha(2.0, 8.0, 0.5, -1.0) - 3.2).abs() < 1e-14);
        assert!((m_alpha(2.0, 8.0, 0.5, 1.0) - 5.0).abs() < 1e-14);
        assert_eq!(m_alpha(2.0, 8.0, 0.5, f64::INFINITY), 8.0);
        assert_eq!(m_alpha(2.0, 8.0, 0.5, f64::NEG_INFINITY), 2.0);
        // continuity through alpha = 0
        let g = m_alpha(2.0, 8.0, 0.3, 0.0);
        assert!((m_alpha(2.0, 8.0, 0.3, 1e-8) - g).abs() < 1e-7);
        assert!((m_alpha(2.0, 8.0, 0.3, -1e-5) - g).abs() < 1e-4);
        // no overflow for large alpha
        assert!(m_alpha(1e10, 2e10, 0.5, 400.0).is_finite());
    }
}
