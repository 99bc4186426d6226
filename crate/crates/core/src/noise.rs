//! Reproducible Wiener increments.
//!
//! Trajectory `k` of an ensemble with master seed `s` draws from ChaCha
//! stream `k` of generators keyed by `s`, so ensembles are independent of
//! scheduling. Increments are produced on a coarse grid of width
//! `dt * 2^levels` and refined by Brownian bridges, one generator per
//! refinement level. Halving `dt` while adding one level therefore yields a
//! refinement of the same Wiener path, which is what step-size convergence
//! checks need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(master_seed, purpose, trajectory)`.
pub fn stream(master_seed: u64, purpose: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master_seed ^ splitmix(purpose)));
    rng.set_stream(trajectory);
    rng
}

/// Increments of a `channels`-dimensional Wiener process on a uniform grid.
pub struct BrownianPath {
    channels: usize,
    dt: f64,
    levels: u32,
    base: ChaCha8Rng,
    refiners: Vec<ChaCha8Rng>,
    /// Fine increments of the current coarse interval, `[step][channel]`.
    buffer: Vec<f64>,
    pos: usize,
}

impl BrownianPath {
    pub fn new(master_seed: u64, trajectory: u64, channels: usize, dt: f64, levels: u32) -> Self {
        Self {
            channels,
            dt,
            levels,
            base: stream(master_seed, 0, trajectory),
            refiners: (1..=levels as u64)
                .map(|l| stream(master_seed, l, trajectory))
                .collect(),
            buffer: Vec::new(),
            pos: 0,
        }
    }

    fn refill(&mut self) {
        let fine = 1usize << self.levels;
        let coarse_dt = self.dt * fine as f64;
        let mut cur: Vec<f64> = (0..self.channels)
            .map(|_| coarse_dt.sqrt() * self.base.sample::<f64, _>(StandardNormal))
            .collect();
        let mut width = 1usize;
        let mut h = coarse_dt;
        for rng in &mut self.refiners {
            // each increment over h splits into halves with the bridge law
            let mut next = vec![0.0; cur.len() * 2];
            for step in 0..width {
                for c in 0..self.channels {
                    let w = cur[step * self.channels + c];
                    let z: f64 = rng.sample(StandardNormal);
                    let left = 0.5 * w + 0.5 * h.sqrt() * z;
                    next[2 * step * self.channels + c] = left;
                    next[(2 * step + 1) * self.channels + c] = w - left;
                }
            }
            cur = next;
            width *= 2;
            h *= 0.5;
        }
        self.buffer = cur;
        self.pos = 0;
    }

    /// Increments for the next step, one per channel.
    pub fn next_increments(&mut self) -> &[f64] {
        if self.pos * self.channels >= self.buffer.len() {
            self.refill();
        }
        let start = self.pos * self.channels;
        self.pos += 1;
        &self.buffer[start..start + self.channels]
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}
