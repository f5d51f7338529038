//! Splittable random streams.
//!
//! Every Monte Carlo loop is cut into fixed-size chunks; chunk `i` draws from
//! ChaCha8 stream `i` of a seed derived from the master seed and a purpose
//! tag. Chunk results are merged in index order, so the output does not
//! depend on how rayon schedules the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per chunk. Fixed so results are identical across thread counts.
pub const CHUNK: usize = 4096;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent family for a sub-task.
    pub fn derive(&self, tag: u64) -> Streams {
        Streams {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5eed))),
        }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(index);
        r
    }
}

/// Run `n` samples in chunks of [`CHUNK`]; `f(rng, count)` handles one chunk.
/// Results come back in chunk order.
pub fn chunked<T, F>(streams: &Streams, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            let mut rng = streams.rng(c as u64);
            f(&mut rng, count)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunk_results_do_not_depend_on_thread_count() {
        let s = Streams::new(11).derive(2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| chunked(&s, 50_000, |r, c| (0..c).map(|_| r.random::<f64>()).sum::<f64>()))
        };
        let a = run(1);
        let b = run(7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50_000usize.div_ceil(CHUNK));
    }

    #[test]
    fn derived_streams_differ() {
        let s = Streams::new(1);
        let a: f64 = s.derive(1).rng(0).random();
        let b: f64 = s.derive(2).rng(0).random();
        let c: f64 = s.derive(1).rng(1).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
