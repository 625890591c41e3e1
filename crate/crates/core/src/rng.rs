//! Seed-stream derivation.
//!
//! Every source of randomness in an experiment is a named sub-stream of the
//! single top-level seed. A stream is fully identified by
//! `(seed, stream id, round, unit)`, so independent units (clients, rounds,
//! components) can be evaluated in any order — or in parallel — without
//! changing the numbers they draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named randomness consumers within one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Synthetic dataset generation.
    DatasetSynth,
    /// Sample-to-client partitioning.
    Partition,
    /// Global model weight initialization.
    ModelInit,
    /// Per-round participant sampling.
    Participation,
    /// Attack-side randomness (surrogate training, crafting).
    Attack,
    /// Contrastive-model training (init, shuffling, augmentation noise).
    Contrastive,
    /// Defense-side randomness (DnC coordinate sampling, FLTrust server update).
    Defense,
    /// Per-client mini-batch sampling during local updates.
    Client,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::DatasetSynth => 0x01,
            Stream::Partition => 0x02,
            Stream::ModelInit => 0x03,
            Stream::Participation => 0x04,
            Stream::Attack => 0x05,
            Stream::Contrastive => 0x06,
            Stream::Defense => 0x07,
            Stream::Client => 0x08,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the deterministic RNG for one `(seed, stream, round, unit)` tuple.
pub fn stream_rng(seed: u64, stream: Stream, round: u64, unit: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ stream.tag().wrapping_mul(0xa076_1d64_78bd_642f)
        ^ round.wrapping_mul(0xe703_7ed1_a0b4_28db)
        ^ unit.wrapping_mul(0x8ebc_6af0_9c88_c6e3);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard-normal draw via Box-Muller on the given stream.
pub fn normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    use rand::Rng;
    // Uniform in (0, 1] so ln() is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    mean + std * r * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_tuple_same_stream() {
        let mut a = stream_rng(7, Stream::Client, 3, 12);
        let mut b = stream_rng(7, Stream::Client, 3, 12);
        let xs: Vec<u64> = (0..8).map(|_| a.gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn different_units_differ() {
        let mut a = stream_rng(7, Stream::Client, 3, 12);
        let mut b = stream_rng(7, Stream::Client, 3, 13);
        let mut c = stream_rng(7, Stream::Client, 4, 12);
        let mut d = stream_rng(7, Stream::Attack, 3, 12);
        let x: u64 = a.gen();
        assert_ne!(x, b.gen());
        assert_ne!(x, c.gen());
        assert_ne!(x, d.gen());
    }

    #[test]
    fn normal_moments_roughly_match() {
        let mut rng = stream_rng(11, Stream::DatasetSynth, 0, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| normal(&mut rng, 1.0, 2.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!((var - 4.0).abs() < 0.08, "var {var}");
    }
}
