//! Monotone links `g: R -> (0, 1)` used to turn Gaussian states into stick fractions.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Below this point `erfc` underflows and the asymptotic tail series takes over.
const PHI_ASYMPTOTIC_CUTOFF: f64 = -30.0;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal CDF, accurate to a few ulps in relative terms over the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Phi(x)`, finite for every finite `x`.
pub fn normal_ln_cdf(x: f64) -> f64 {
    if x < PHI_ASYMPTOTIC_CUTOFF {
        // Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - ...)
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - 105.0 * r)));
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
    } else if x > 0.0 {
        (-normal_cdf(-x)).ln_1p()
    } else {
        normal_cdf(x).ln()
    }
}

/// Inverse Mills ratio `phi(x) / Phi(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - normal_ln_cdf(x)).exp()
}

/// Standard normal quantile.
///
/// Acklam's rational approximation refined by two Halley steps against `erfc`.
/// For `p > 0.5` the computation runs on `1 - p`, which is exact in binary
/// floating point, so lower and upper tails are equally accurate relative to
/// the information present in `p`.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        -lower_quantile(1.0 - p)
    } else {
        lower_quantile(p)
    }
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Link function for the stick-breaking fractions.
///
/// Probit is the default and the only link with the latent-variable
/// augmentation in the sampler; other links go through a Metropolis-Hastings
/// update of the states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    #[default]
    Probit,
    Logit,
}

impl LinkFunction {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "probit" => Ok(LinkFunction::Probit),
            "logit" => Ok(LinkFunction::Logit),
            other => Err(Error::validation(format!("unknown link function '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Probit => "probit",
            LinkFunction::Logit => "logit",
        }
    }

    /// `g(x)`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_cdf(x),
            LinkFunction::Logit => logistic(x),
        }
    }

    /// `1 - g(x)`, computed without cancellation.
    pub fn survival(self, x: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_cdf(-x),
            LinkFunction::Logit => logistic(-x),
        }
    }

    /// `g^{-1}(p)`.
    pub fn inverse(self, p: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_quantile(p),
            LinkFunction::Logit => (p / (1.0 - p)).ln(),
        }
    }

    /// Inverse of the survival function: the `x` with `1 - g(x) = q`.
    pub fn inverse_survival(self, q: f64) -> f64 {
        match self {
            LinkFunction::Probit => -normal_quantile(q),
            LinkFunction::Logit => ((1.0 - q) / q).ln(),
        }
    }

    /// `g'(x)`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_pdf(x),
            LinkFunction::Logit => {
                let g = logistic(x);
                g * (1.0 - g)
            }
        }
    }

    /// `ln g(x)`.
    pub fn ln_eval(self, x: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_ln_cdf(x),
            LinkFunction::Logit => -softplus(-x),
        }
    }

    /// `ln(1 - g(x))`.
    pub fn ln_survival(self, x: f64) -> f64 {
        match self {
            LinkFunction::Probit => normal_ln_cdf(-x),
            LinkFunction::Logit => -softplus(x),
        }
    }

    /// `(ln g, d/dx ln g, d^2/dx^2 ln g)` at `x`.
    pub fn ln_eval_derivatives(self, x: f64) -> (f64, f64, f64) {
        match self {
            LinkFunction::Probit => {
                let lam = inverse_mills(x);
                (normal_ln_cdf(x), lam, -lam * (x + lam))
            }
            LinkFunction::Logit => {
                let g = logistic(x);
                (-softplus(-x), 1.0 - g, -g * (1.0 - g))
            }
        }
    }

    /// `(ln(1-g), d/dx ln(1-g), d^2/dx^2 ln(1-g))` at `x`.
    pub fn ln_survival_derivatives(self, x: f64) -> (f64, f64, f64) {
        match self {
            LinkFunction::Probit => {
                let lam = inverse_mills(-x);
                (normal_ln_cdf(-x), -lam, -lam * (lam - x))
            }
            LinkFunction::Logit => {
                let g = logistic(x);
                (-softplus(x), -g, -g * (1.0 - g))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // Reference values from the closed form 0.5*erfc(-x/sqrt 2), tabulated to 16 digits.
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15, "{:e}", normal_cdf(1.0) - 0.841_344_746_068_542_9);
        assert!((normal_cdf(-5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-12);
        assert!((normal_cdf(-8.0) / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_cdf_is_continuous_across_the_asymptotic_cutoff() {
        let below = normal_ln_cdf(PHI_ASYMPTOTIC_CUTOFF - 1e-9);
        let above = normal_ln_cdf(PHI_ASYMPTOTIC_CUTOFF + 1e-9);
        assert!((below - above).abs() < 1e-7, "{below} vs {above}");
        assert!(normal_ln_cdf(-200.0).is_finite());
        assert!(normal_ln_cdf(40.0) <= 0.0);
    }

    #[test]
    fn probit_round_trip_over_eight_sigma() {
        let link = LinkFunction::Probit;
        for i in 0..=1600 {
            let x = -8.0 + i as f64 * 0.01;
            let back = if x <= 0.0 {
                link.inverse(link.eval(x))
            } else {
                link.inverse_survival(link.survival(x))
            };
            assert!((back - x).abs() < 1e-10, "x={x} back={back}");
        }
    }

    #[test]
    fn quantile_is_symmetric_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let q = normal_quantile(p);
            assert!(q > prev);
            prev = q;
            assert!((q + normal_quantile(1.0 - p)).abs() < 1e-12);
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn logit_round_trip() {
        let link = LinkFunction::Logit;
        for i in 0..=160 {
            let x = -8.0 + i as f64 * 0.1;
            assert!((link.inverse(link.eval(x)) - x).abs() < 1e-10);
        }
    }

    #[test]
    fn links_are_increasing_with_correct_limits() {
        for link in [LinkFunction::Probit, LinkFunction::Logit] {
            assert!(link.eval(-40.0) < 1e-16);
            assert!(link.eval(40.0) > 1.0 - 1e-16);
            let mut prev = 0.0;
            for i in 0..200 {
                let g = link.eval(-10.0 + 0.1 * i as f64);
                assert!(g >= prev);
                prev = g;
            }
        }
    }

    #[test]
    fn log_derivatives_match_finite_differences() {
        let h = 1e-5;
        for link in [LinkFunction::Probit, LinkFunction::Logit] {
            for &x in &[-12.0, -3.0, -0.4, 0.0, 0.7, 2.5, 9.0] {
                let (f, d1, d2) = link.ln_eval_derivatives(x);
                let fd1 = (link.ln_eval(x + h) - link.ln_eval(x - h)) / (2.0 * h);
                let fd2 = (link.ln_eval(x + h) - 2.0 * f + link.ln_eval(x - h)) / (h * h);
                assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()), "{link:?} x={x}");
                assert!((d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()), "{link:?} x={x}");

                let (f, d1, d2) = link.ln_survival_derivatives(x);
                let fd1 = (link.ln_survival(x + h) - link.ln_survival(x - h)) / (2.0 * h);
                let fd2 = (link.ln_survival(x + h) - 2.0 * f + link.ln_survival(x - h)) / (h * h);
                assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()), "{link:?} x={x}");
                assert!((d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()), "{link:?} x={x}");
            }
        }
    }

    #[test]
    fn derivative_matches_density() {
        let link = LinkFunction::Probit;
        let h = 1e-6;
        let x = 0.3;
        let fd = (link.eval(x + h) - link.eval(x - h)) / (2.0 * h);
        assert!((fd - link.derivative(x)).abs() < 1e-9);
    }
}
