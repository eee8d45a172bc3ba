//! Reproducible standard-normal streams.
//!
//! A stream is keyed by `(seed, stream_id)`: the seed expands to a ChaCha12
//! key and the stream id is the ChaCha nonce. Normals are produced in
//! Box–Muller pairs, pair `m` consuming the four 32-bit words at offset
//! `4m` of the keystream, so draw number `k` is a pure function of
//! `(seed, stream_id, k)` and [`GaussianStream::seek`] is O(1).
//!
//! Layout string recorded in run metadata: [`GENERATOR_ID`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Identifies generator and normal transform for run metadata.
pub const GENERATOR_ID: &str = "chacha12-boxmuller-v1";

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Keyed, seekable stream of i.i.d. standard normal draws.
#[derive(Clone)]
pub struct GaussianStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl std::fmt::Debug for GaussianStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianStream")
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .field("counter", &self.counter)
            .finish()
    }
}

impl GaussianStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        rng.set_word_pos(0);
        Self {
            seed,
            stream_id,
            counter: 0,
            rng,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of normals drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Repositions the stream so the next draw is draw number `counter`.
    pub fn seek(&mut self, counter: u64) {
        let pair = counter / 2;
        self.rng.set_word_pos(u128::from(pair) * 4);
        self.spare = None;
        self.counter = counter;
        if counter % 2 == 1 {
            let (_, z1) = self.next_pair();
            self.spare = Some(z1);
        }
    }

    fn next_pair(&mut self) -> (f64, f64) {
        let u1 = open_unit(self.rng.next_u64());
        let u2 = open_unit(self.rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TWO_PI * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn next_normal(&mut self) -> f64 {
        self.counter += 1;
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = self.next_pair();
        self.spare = Some(z1);
        z0
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.next_normal();
        }
    }

    pub fn next_vector(&mut self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill(&mut v);
        v
    }

    /// Consumes the stream and returns `k` substreams with fresh ids derived
    /// from this stream's id. The parent cannot be drawn from afterwards.
    pub fn split(self, k: usize) -> Vec<GaussianStream> {
        assert!(k >= 1, "split needs at least one substream");
        (0..k as u64)
            .map(|i| GaussianStream::new(self.seed, child_id(self.stream_id, i)))
            .collect()
    }

    /// Fixed-size variant of [`split`](Self::split).
    pub fn split_n<const K: usize>(self) -> [GaussianStream; K] {
        let v = self.split(K);
        v.try_into().expect("split returned K streams")
    }
}

/// Maps 64 random bits to the open interval (0, 1).
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn child_id(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0x5EED)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = GaussianStream::new(42, 7);
        let mut b = GaussianStream::new(42, 7);
        assert_eq!(a.next_vector(101), b.next_vector(101));
        assert_eq!(a.counter(), 101);
    }

    #[test]
    fn seek_matches_sequential() {
        let mut a = GaussianStream::new(3, 0);
        let all = a.next_vector(50);
        for start in [0u64, 1, 2, 17, 49] {
            let mut b = GaussianStream::new(3, 0);
            b.seek(start);
            assert_eq!(b.next_normal(), all[start as usize]);
        }
    }

    #[test]
    fn split_changes_id_and_is_deterministic() {
        let mut parent_copy = GaussianStream::new(9, 0);
        let first = parent_copy.next_vector(10);
        let mut one = GaussianStream::new(9, 0).split(1).remove(0);
        assert_ne!(one.stream_id(), 0);
        assert_ne!(one.next_vector(10), first);

        let a: Vec<Vec<f64>> = GaussianStream::new(9, 0)
            .split(3)
            .into_iter()
            .map(|mut s| s.next_vector(5))
            .collect();
        let b: Vec<Vec<f64>> = GaussianStream::new(9, 0)
            .split(3)
            .into_iter()
            .map(|mut s| s.next_vector(5))
            .collect();
        assert_eq!(a, b);
        let ids: std::collections::HashSet<u64> = GaussianStream::new(9, 0)
            .split(8)
            .iter()
            .map(|s| s.stream_id())
            .collect();
        assert_eq!(ids.len(), 8);
    }

    #[test]
    fn open_unit_bounds() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) < 1.0);
    }
}
