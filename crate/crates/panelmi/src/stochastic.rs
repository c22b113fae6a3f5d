//! Seeded, reproducible random streams and the distribution samplers the
//! Gibbs steps require.
//!
//! Every source of randomness in the crate flows through an [`RngStream`],
//! addressed by a `(seed, stream_id)` pair. Identical pairs replay identical
//! draw sequences; distinct stream ids give statistically independent
//! streams, so replications and chains can run in parallel without coupling
//! their draw order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};

/// Lower clamp for probability draws so downstream logs stay finite.
pub const PROB_FLOOR: f64 = 1e-300;

/// Upper clamp for probability draws, the largest f64 strictly below 1.
const PROB_CEIL: f64 = 1.0 - 1e-16;

/// A seeded, splittable random stream.
///
/// Built on a counter-based generator: the same master seed with different
/// `stream_id`s yields independent streams, which is how replications and
/// chains obtain their own reproducible randomness from a single CLI seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive a sibling stream under the same master seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, PROB_CEIL)
}

/// Draw an index with probability `weights[h] / sum(weights)`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() {
            return Err(Error::NonFiniteWeight);
        }
        if w < 0.0 {
            return Err(Error::Domain(format!("negative weight {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (h, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = h;
            acc += w;
            if u < acc {
                return Ok(h);
            }
        }
    }
    // Rounding can leave u == total; attribute the draw to the last
    // positive-weight index.
    Ok(last_positive)
}

/// Draw from a Dirichlet distribution with arbitrary (runtime) dimension.
///
/// Components are clamped away from exact zero and renormalized, so the
/// output always lies strictly inside the simplex.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; alphas.len()];
    sample_dirichlet_into(alphas, &mut out, rng)?;
    Ok(out)
}

/// Allocation-free variant of [`sample_dirichlet`] for sampler inner loops.
pub fn sample_dirichlet_into<R: Rng + ?Sized>(
    alphas: &[f64],
    out: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if alphas.len() != out.len() {
        return Err(Error::LengthMismatch(format!(
            "alphas {} vs out {}",
            alphas.len(),
            out.len()
        )));
    }
    for &a in alphas {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::NonPositiveAlpha);
        }
    }
    if alphas.len() == 1 {
        out[0] = 1.0;
        return Ok(());
    }
    let mut sum = 0.0;
    for (o, &a) in out.iter_mut().zip(alphas) {
        let g = rand_distr::Gamma::new(a, 1.0)
            .map_err(|e| Error::Domain(format!("gamma({a}, 1): {e}")))?
            .sample(rng);
        *o = g;
        sum += g;
    }
    if sum <= 0.0 {
        // All gamma draws underflowed (tiny alphas); fall back to uniform.
        let p = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|o| *o = p);
        return Ok(());
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = clamp_prob(*o / sum);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

/// Draw from Beta(a, b), clamped into the open unit interval.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("Beta({a}, {b}) requires a, b > 0")));
    }
    let d = rand_distr::Beta::new(a, b).map_err(|e| Error::Domain(format!("Beta: {e}")))?;
    Ok(clamp_prob(d.sample(rng)))
}

/// Draw from Gamma with SHAPE-RATE parameterization (mean = shape / rate).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "Gamma({shape}, {rate}) requires shape, rate > 0"
        )));
    }
    let d = rand_distr::Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Domain(format!("Gamma: {e}")))?;
    Ok(d.sample(rng))
}

/// Draw from Bernoulli(p); returns true with probability p.
pub fn sample_bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("Bernoulli({p}) requires p in [0,1]")));
    }
    Ok(rng.random::<f64>() < p)
}

/// Exp-normalize log weights via max subtraction.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; log_weights.len()];
    normalize_log_weights_into(log_weights, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`normalize_log_weights`].
pub fn normalize_log_weights_into(log_weights: &[f64], out: &mut [f64]) -> Result<()> {
    if log_weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    if log_weights.len() != out.len() {
        return Err(Error::LengthMismatch(format!(
            "log_weights {} vs out {}",
            log_weights.len(),
            out.len()
        )));
    }
    let mut max = f64::NEG_INFINITY;
    for &lw in log_weights {
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(Error::NonFiniteWeight);
        }
        if lw > max {
            max = lw;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::AllNegInfinite);
    }
    let mut sum = 0.0;
    for (o, &lw) in out.iter_mut().zip(log_weights) {
        *o = (lw - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    Ok(())
}
