//! Counter-based random streams.
//!
//! Every random quantity in a simulation is drawn from a [`RngStream`] keyed by
//! `(master seed, stream id)`. Stream ids are derived from the replication
//! index, the horizon and a [`Role`], so a replication's arm parameters,
//! contexts, noises and tie-breaks do not depend on which thread ran it or on
//! what other replications exist.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    ArmParams,
    Contexts,
    Noise,
    PolicyTies,
    Diagnostics,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::ArmParams => 0x6172_6d73,
            Role::Contexts => 0x6374_7874,
            Role::Noise => 0x6e6f_6973,
            Role::PolicyTies => 0x7469_6573,
            Role::Diagnostics => 0x6469_6167,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into a single stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seeded, splittable random stream backed by ChaCha8.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
            spare: None,
        }
    }

    /// Stream for `role` in replication `rep` at horizon `horizon`; `index`
    /// separates sub-streams of one role (e.g. one noise stream per arm).
    pub fn for_role(seed: u64, rep: u64, horizon: u64, role: Role, index: u64) -> Self {
        RngStream::new(seed, stream_id(&[rep, horizon, role.tag(), index]))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw (Box–Muller; the sine branch is kept for the next call).
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = self.box_muller();
        self.spare = Some(z1);
        z0
    }

    /// Standard normal draw number `index` of this stream, independent of
    /// any other draw made from it. Repositions the stream.
    pub fn gaussian_at(&mut self, index: u64) -> f64 {
        // Two u64 per draw, two 32-bit words per u64.
        self.rng.set_word_pos(u128::from(index) * 4);
        self.spare = None;
        self.box_muller().0
    }

    fn box_muller(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_reproduce() {
        let mut a = RngStream::new(5, 9);
        let mut b = RngStream::new(5, 9);
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(5, 9);
        let mut b = RngStream::new(5, 10);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn role_ids_are_distinct() {
        let roles = [
            Role::ArmParams,
            Role::Contexts,
            Role::Noise,
            Role::PolicyTies,
            Role::Diagnostics,
        ];
        let mut ids: Vec<u64> = roles.iter().map(|r| stream_id(&[0, 0, r.tag(), 0])).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), roles.len());
    }

    #[test]
    fn gaussian_at_is_position_independent() {
        let mut a = RngStream::new(1, 2);
        let mut b = RngStream::new(1, 2);
        let x = a.gaussian_at(17);
        for i in 0..30 {
            b.gaussian_at(i);
        }
        assert_eq!(x.to_bits(), b.gaussian_at(17).to_bits());
    }

    #[test]
    fn uniform_ranges() {
        let mut r = RngStream::new(0, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_open();
            assert!(v > 0.0 && v <= 1.0);
            assert!(r.below(3) < 3);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut r = RngStream::new(42, 1);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.gaussian();
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }
}
