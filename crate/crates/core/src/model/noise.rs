//! Reproducible Brownian increments.
//!
//! Every increment is addressed by `(seed, stream, path, step)`. The seed and
//! stream id form a ChaCha8 key, the path index selects the ChaCha stream and
//! the step fixes the word position, so any single increment can be
//! regenerated without replaying the ones before it. Each coordinate consumes
//! exactly two `u64` draws (Box–Muller, cosine branch only), which keeps the
//! word position of step `i` at `i·dim·4`.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Stream id of the per-path forward noise `ΔB`.
pub const FORWARD_STREAM: u64 = 0;
/// Stream id of the shared backward noise `ΔW`.
pub const BACKWARD_STREAM: u64 = 1;

const WORDS_PER_COORD: u128 = 4;

fn keyed_rng(seed: u64, stream: u64, path: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Sequential generator of the increments of one path.
pub struct IncrementStream {
    rng: ChaCha8Rng,
    scale: f64,
}

impl IncrementStream {
    /// Increments of variance `h` for `path` of `stream`, starting at step 0.
    pub fn new(seed: u64, stream: u64, path: u64, h: f64) -> Self {
        Self {
            rng: keyed_rng(seed, stream, path),
            scale: h.sqrt(),
        }
    }

    /// Positions the stream at `step` for increments of dimension `dim`.
    pub fn seek(&mut self, step: usize, dim: usize) {
        self.rng
            .set_word_pos(step as u128 * dim as u128 * WORDS_PER_COORD);
    }

    /// Writes the next increment.
    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.scale * standard_normal(&mut self.rng);
        }
    }
}

/// Regenerates a single increment in isolation.
pub fn regenerate(seed: u64, stream: u64, path: u64, step: usize, h: f64, out: &mut [f64]) {
    let mut s = IncrementStream::new(seed, stream, path, h);
    s.seek(step, out.len());
    s.fill(out);
}

/// Forward increments for `M` paths plus one shared backward path.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    seed: u64,
    paths: usize,
    steps: usize,
    d: usize,
    l: usize,
    forward: Vec<f64>,
    backward: Vec<f64>,
}

impl NoiseBundle {
    pub fn sample(seed: u64, paths: usize, grid: &TimeGrid, d: usize, l: usize) -> Result<Self> {
        Self::sample_split(seed, seed, paths, grid, d, l)
    }

    /// Like [`NoiseBundle::sample`] but draws the backward path from its own
    /// seed, so several runs can share one realisation of `W`.
    pub fn sample_split(
        seed: u64,
        backward_seed: u64,
        paths: usize,
        grid: &TimeGrid,
        d: usize,
        l: usize,
    ) -> Result<Self> {
        if paths == 0 {
            return Err(Error::invalid("M", "path count must be at least 1"));
        }
        if d == 0 || l == 0 {
            return Err(Error::invalid("d/l", "noise dimensions must be at least 1"));
        }
        let steps = grid.steps();
        let h = grid.h();
        let mut forward = vec![0.0; paths * steps * d];
        forward
            .par_chunks_mut(steps * d)
            .enumerate()
            .for_each(|(m, row)| {
                let mut s = IncrementStream::new(seed, FORWARD_STREAM, m as u64, h);
                for step in row.chunks_mut(d) {
                    s.fill(step);
                }
            });
        let backward = Self::sample_backward(backward_seed, grid, l);
        Ok(Self {
            seed,
            paths,
            steps,
            d,
            l,
            forward,
            backward,
        })
    }

    /// Backward path `ΔW_0..ΔW_{N-1}` for a seed, flattened `N×l`.
    pub fn sample_backward(seed: u64, grid: &TimeGrid, l: usize) -> Vec<f64> {
        let mut backward = vec![0.0; grid.steps() * l];
        let mut s = IncrementStream::new(seed, BACKWARD_STREAM, 0, grid.h());
        for step in backward.chunks_mut(l) {
            s.fill(step);
        }
        backward
    }

    /// Builds a bundle from explicit increments (`forward` is `M×N×d`,
    /// `backward` is `N×l`, both row-major).
    pub fn from_parts(
        seed: u64,
        paths: usize,
        steps: usize,
        d: usize,
        l: usize,
        forward: Vec<f64>,
        backward: Vec<f64>,
    ) -> Result<Self> {
        if paths == 0 {
            return Err(Error::invalid("M", "path count must be at least 1"));
        }
        if forward.len() != paths * steps * d {
            return Err(Error::Shape(format!(
                "forward increments: expected {} values, got {}",
                paths * steps * d,
                forward.len()
            )));
        }
        if backward.len() != steps * l {
            return Err(Error::Shape(format!(
                "backward increments: expected {} values, got {}",
                steps * l,
                backward.len()
            )));
        }
        Ok(Self {
            seed,
            paths,
            steps,
            d,
            l,
            forward,
            backward,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// `ΔB_i` of path `m`.
    pub fn forward(&self, m: usize, i: usize) -> &[f64] {
        let at = (m * self.steps + i) * self.d;
        &self.forward[at..at + self.d]
    }

    /// All forward increments of path `m`, `N×d`.
    pub fn forward_path(&self, m: usize) -> &[f64] {
        let at = m * self.steps * self.d;
        &self.forward[at..at + self.steps * self.d]
    }

    /// `ΔW_i`.
    pub fn backward(&self, i: usize) -> &[f64] {
        &self.backward[i * self.l..(i + 1) * self.l]
    }

    pub fn backward_path(&self) -> &[f64] {
        &self.backward
    }

    /// Same forward noise with a different backward path.
    pub fn with_backward(&self, backward: Vec<f64>) -> Result<Self> {
        Self::from_parts(
            self.seed,
            self.paths,
            self.steps,
            self.d,
            self.l,
            self.forward.clone(),
            backward,
        )
    }

    /// Reorders forward paths so that new path `j` is old path `order[j]`.
    pub fn permute_paths(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.paths {
            return Err(Error::Shape(format!(
                "permutation of length {} for {} paths",
                order.len(),
                self.paths
            )));
        }
        let forward = order
            .iter()
            .flat_map(|&m| self.forward_path(m).iter().copied())
            .collect();
        Self::from_parts(
            self.seed,
            self.paths,
            self.steps,
            self.d,
            self.l,
            forward,
            self.backward.clone(),
        )
    }

    /// FNV-1a hash of the backward path bits.
    pub fn backward_fingerprint(&self) -> u64 {
        fingerprint(&self.backward)
    }
}

/// FNV-1a hash of the bit patterns of a slice.
pub fn fingerprint(values: &[f64]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}
