//! Random spectra: exact sequential sampling through the suffix table, and
//! plain rejection sampling as an independent check.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`), seeded
//! from a 64-bit seed. Parallel runs split work into fixed blocks, each with
//! its own ChaCha stream index, so output does not depend on thread count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{ExactEngine, Spectrum, SpectrumLaw};
use crate::model::Model;
use crate::pmf::Pmf;

/// Name of the generator, recorded alongside sample dumps.
pub const RNG_NAME: &str = "chacha20";

const BLOCK: usize = 4096;

/// A single-owner random stream.
#[derive(Debug, Clone)]
pub struct SamplerState {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream `index` derived from `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        SamplerState { seed, stream: index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// One spectrum from the conditional law, drawing `C_1, C_2, ..` in turn
/// given the weight still to be placed.
pub fn sample_spectrum_exact(engine: &ExactEngine, state: &mut SamplerState) -> Result<Spectrum> {
    let n = engine.n();
    let suffix = engine.suffix();
    let species = engine.species();
    let mut counts = vec![0usize; n];
    let mut t = n;
    let mut j = 1;
    while t > 0 {
        if j > t {
            return Err(Error::Internal(format!("weight {t} left over past size {}", j - 1)));
        }
        let here = suffix.column(j);
        let next = suffix.column(j + 1);
        let denom = here.v[t];
        if denom == 0.0 {
            return Err(Error::Internal(format!("suffix table is zero at j = {j}, t = {t}")));
        }
        let factor = (next.ln_scale - here.ln_scale).exp() / denom;
        let u = state.uniform();
        let mut acc = 0.0;
        let mut pick = None;
        for (y, py) in species[j - 1].iter() {
            if j * y > t {
                break;
            }
            let w = py * next.v[t - j * y] * factor;
            if w > 0.0 {
                acc += w;
                pick = Some(y);
                if u < acc {
                    break;
                }
            }
        }
        let y = pick.ok_or_else(|| Error::Internal(format!("no admissible count at j = {j}, t = {t}")))?;
        counts[j - 1] = y;
        t -= j * y;
        j += 1;
    }
    Ok(Spectrum::from_counts(&counts))
}

/// `count` exact samples; block `k` of 4096 uses stream `k` of `seed`.
pub fn sample_many_exact(engine: &ExactEngine, seed: u64, count: usize) -> Result<Vec<Spectrum>> {
    let blocks = count.div_ceil(BLOCK);
    let parts: Vec<Result<Vec<Spectrum>>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut state = SamplerState::substream(seed, k as u64);
            let len = BLOCK.min(count - k * BLOCK);
            (0..len).map(|_| sample_spectrum_exact(engine, &mut state)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Accepted { spectrum: Spectrum, tries: u64 },
    Exhausted { tries: u64 },
}

fn draw(law: &Pmf, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (s, p) in law.iter() {
        acc += p;
        if u < acc {
            return Some(s);
        }
    }
    // u fell in the truncated tail
    None
}

/// Samples independent `Z_1..Z_n` until `sum j Z_j = n`. A draw landing in
/// a truncated tail counts as a rejected try.
pub fn sample_spectrum_rejection(
    model: &Model,
    n: usize,
    state: &mut SamplerState,
    max_tries: u64,
) -> Result<Rejection> {
    if max_tries == 0 {
        return Err(Error::domain("max_tries must be >= 1"));
    }
    let species = model.species_laws(n)?;
    let mut counts = vec![0usize; n];
    for tries in 1..=max_tries {
        let mut weight = 0usize;
        let mut ok = true;
        for (i, law) in species.iter().enumerate() {
            match draw(law, state.uniform()) {
                Some(y) => {
                    counts[i] = y;
                    weight += (i + 1) * y;
                }
                None => ok = false,
            }
        }
        if ok && weight == n {
            return Ok(Rejection::Accepted { spectrum: Spectrum::from_counts(&counts), tries });
        }
    }
    Ok(Rejection::Exhausted { tries: max_tries })
}

/// Total variation between the empirical law of `samples` and `law`'s
/// enumerated entries.
pub fn empirical_tv(samples: &[Spectrum], law: &SpectrumLaw) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("need at least one sample"));
    }
    let freq = frequencies(samples);
    let n = samples.len() as f64;
    let mut sum = 0.0;
    for (s, &c) in &freq {
        sum += (c as f64 / n - law.prob(s)).abs();
    }
    for (s, &p) in &law.entries {
        if !freq.contains_key(s) {
            sum += p;
        }
    }
    Ok(0.5 * sum)
}

pub fn frequencies(samples: &[Spectrum]) -> HashMap<Spectrum, usize> {
    let mut freq = HashMap::new();
    for s in samples {
        *freq.entry(s.clone()).or_insert(0) += 1;
    }
    freq
}
