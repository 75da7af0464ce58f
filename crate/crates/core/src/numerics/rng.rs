//! Reproducible random sampling. One `RngStream` per simulation replicate:
//! identical (seed, stream) replays the identical sequence, distinct streams
//! are independent by construction, so sweep parallelism never shares state.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::{Error, Result};

/// A seeded, stream-addressed random number generator.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { inner, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream under the same seed; used to derive per-replicate and
    /// per-purpose streams from one experiment seed.
    pub fn substream(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }

    pub fn next_f64(&mut self) -> f64 {
        // 53-bit uniform in [0, 1).
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Bernoulli(1/2) from a single bit.
    pub fn fair_coin(&mut self) -> bool {
        self.inner.next_u64() & 1 == 1
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Sample from Exp(rate).
pub fn sample_exponential(rng: &mut RngStream, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "exponential rate must be positive and finite, got {rate}"
        )));
    }
    let exp = Exp::new(rate).map_err(|e| Error::Domain(format!("exponential: {e}")))?;
    Ok(exp.sample(&mut rng.inner))
}

/// Sample from the non-central chi-square distribution with `dof` degrees of
/// freedom and noncentrality `nc`, by its definition: the sum of `dof` squared
/// unit-variance normals where one carries mean sqrt(nc). This definition is
/// itself the oracle against which the cube-root normal approximation of the
/// channel module is validated.
pub fn sample_noncentral_chisq(rng: &mut RngStream, dof: u32, nc: f64) -> Result<f64> {
    if dof < 1 {
        return Err(Error::Domain("chi-square dof must be >= 1".into()));
    }
    if !(nc >= 0.0 && nc.is_finite()) {
        return Err(Error::Domain(format!(
            "noncentrality must be nonnegative, got {nc}"
        )));
    }
    let z0: f64 = rng.standard_normal() + nc.sqrt();
    let mut sum = z0 * z0;
    for _ in 1..dof {
        let z: f64 = rng.standard_normal();
        sum += z * z;
    }
    Ok(sum)
}
