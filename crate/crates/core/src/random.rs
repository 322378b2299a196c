//! Seeded random-variate generation for the sampler.
//!
//! Every draw goes through [`SeededRng`], a ChaCha20 stream keyed by a 64-bit
//! seed and a stream index. Equal `(seed, stream)` pairs give bitwise-equal
//! sequences on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ProbabilityVector;

/// Identifier of the generator algorithm written into output headers.
pub const GENERATOR_ALGORITHM: &str = "chacha20-v1";

/// ChaCha20 generator with an explicit seed and stream index.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn algorithm(&self) -> &'static str {
        GENERATOR_ALGORITHM
    }

    /// Independent generator on another stream of the same seed.
    pub fn fork(&self, stream: u64) -> Self {
        SeededRng::new(self.seed, stream)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Uniform on the open interval (0, 1).
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean + sd * sample_standard_normal(rng)
}

/// Which half-line a truncated normal lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationSide {
    /// `(-inf, 0]`
    Lower,
    /// `(0, inf)`
    Upper,
}

/// Standard normal truncated to `(a, inf)`.
///
/// Plain rejection when `a < 0`; otherwise the exponential-proposal rejection
/// sampler with the optimal rate `(a + sqrt(a^2 + 4)) / 2`, which stays
/// efficient arbitrarily far in the tail.
fn standard_normal_above<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a < 0.0 {
        loop {
            let x = sample_standard_normal(rng);
            if x > a {
                return x;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / rate;
        let d = x - rate;
        if uniform_open(rng) <= (-0.5 * d * d).exp() {
            return x;
        }
    }
}

/// Normal with the given mean and variance truncated to one half-line at 0.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    variance: f64,
    side: TruncationSide,
) -> f64 {
    debug_assert!(variance > 0.0);
    let sd = variance.sqrt();
    loop {
        let draw = match side {
            TruncationSide::Upper => mean + sd * standard_normal_above(rng, -mean / sd),
            TruncationSide::Lower => mean - sd * standard_normal_above(rng, mean / sd),
        };
        let ok = match side {
            TruncationSide::Upper => draw > 0.0,
            TruncationSide::Lower => draw <= 0.0,
        };
        if ok {
            return draw;
        }
    }
}

/// Standard normal truncated to `[a, b]` with `0 <= a < b`.
fn standard_normal_right_interval<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let root = (a * a + 4.0).sqrt();
    let threshold =
        a + 2.0 * std::f64::consts::E.sqrt() / (a + root) * ((a * a - a * root) / 4.0).exp();
    if b > threshold {
        loop {
            let x = standard_normal_above(rng, a);
            if x <= b {
                return x;
            }
        }
    }
    loop {
        let x = a + (b - a) * uniform_open(rng);
        if uniform_open(rng) <= (0.5 * (a * a - x * x)).exp() {
            return x;
        }
    }
}

/// Normal `N(mean, sd^2)` truncated to `[lo, hi]`.
pub fn sample_truncated_normal_interval<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(sd > 0.0) || !(lo < hi) || !mean.is_finite() {
        return Err(Error::domain(format!(
            "truncated normal needs sd > 0 and lo < hi (mean {mean}, sd {sd}, [{lo}, {hi}])"
        )));
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a >= 0.0 {
        standard_normal_right_interval(rng, a, b)
    } else if b <= 0.0 {
        -standard_normal_right_interval(rng, -b, -a)
    } else if b - a >= (2.0 * std::f64::consts::PI).sqrt() {
        loop {
            let x = sample_standard_normal(rng);
            if x >= a && x <= b {
                break x;
            }
        }
    } else {
        loop {
            let x = a + (b - a) * uniform_open(rng);
            if uniform_open(rng) <= (-0.5 * x * x).exp() {
                break x;
            }
        }
    };
    Ok((mean + sd * z).clamp(lo, hi))
}

/// `ln` of a Gamma(shape, 1) draw, stable for tiny shapes.
fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("validated shape").sample(rng);
        g.ln()
    } else {
        // Gamma(a) = Gamma(a + 1) * U^{1/a}
        let g: f64 = Gamma::new(shape + 1.0, 1.0)
            .expect("validated shape")
            .sample(rng);
        g.ln() + uniform_open(rng).ln() / shape
    }
}

/// Gamma with the given shape and scale.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!(
            "gamma parameters must be positive (shape {shape}, scale {scale})"
        )));
    }
    Ok(ln_gamma_variate(rng, shape).exp() * scale)
}

/// Inverse gamma with density proportional to `x^{-shape-1} exp(-scale / x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!(
            "inverse gamma parameters must be positive (shape {shape}, scale {scale})"
        )));
    }
    Ok(scale * (-ln_gamma_variate(rng, shape)).exp())
}

pub fn sample_dirichlet<R: Rng + ?Sized>(
    rng: &mut R,
    concentrations: &[f64],
) -> Result<ProbabilityVector<f64>> {
    if concentrations.is_empty() {
        return Err(Error::domain("Dirichlet needs at least one concentration"));
    }
    if let Some(bad) = concentrations.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::domain(format!(
            "Dirichlet concentration must be positive, got {bad}"
        )));
    }
    let logs: Vec<f64> = concentrations
        .iter()
        .map(|&a| ln_gamma_variate(rng, a))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut entries: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = entries.iter().sum();
    entries.iter_mut().for_each(|e| *e /= total);
    ProbabilityVector::normalized(entries)
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!(
            "beta parameters must be positive (a {a}, b {b})"
        )));
    }
    let la = ln_gamma_variate(rng, a);
    let lb = ln_gamma_variate(rng, b);
    // x = 1 / (1 + exp(lb - la)), kept strictly inside (0, 1)
    let x = 1.0 / (1.0 + (lb - la).exp());
    Ok(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

/// Index drawn with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("categorical weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("categorical weights sum to zero"));
    }
    let target = uniform_open(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// Categorical draw from unnormalised log weights; `-inf` entries are never chosen.
pub fn sample_categorical_ln<R: Rng + ?Sized>(rng: &mut R, ln_weights: &[f64]) -> Result<usize> {
    let max = ln_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::domain("log weights have no finite maximum"));
    }
    let weights: Vec<f64> = ln_weights.iter().map(|l| (l - max).exp()).collect();
    sample_categorical(rng, &weights)
}
