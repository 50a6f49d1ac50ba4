//! Key-indexed random streams and the noise couplings used by the
//! convergence experiments.
//!
//! Every stream is a ChaCha8 keystream addressed by `(seed, channel)` as the
//! cipher key and `path_index` as the stream id. A path's draws therefore
//! depend only on its key, never on how many paths run or in which order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Separates the independent draws a single path needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Channel {
    /// Position noise γ. Shared between coupled passive and inertial runs.
    Gamma = 0,
    /// Independent complement ξ of the inertial noise increment.
    Xi = 1,
    /// Second normal of the exact OU sample for coloured noise.
    Eta = 2,
    /// Initial conditions.
    Init = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub path_index: u64,
    pub channel: Channel,
}

impl StreamKey {
    pub fn new(seed: u64, path_index: u64, channel: Channel) -> Self {
        Self { seed, path_index, channel }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream of random numbers for one `StreamKey`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(key: StreamKey) -> Self {
        let words = [
            splitmix64(key.seed),
            splitmix64(key.seed ^ 0x5851_f42d_4c95_7f2d),
            splitmix64(key.channel as u64 ^ 0xd1b5_4a32_d192_ed03),
            splitmix64(!key.seed ^ ((key.channel as u64) << 56)),
        ];
        let mut bytes = [0u8; 32];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(key.path_index);
        Self { rng }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.normal();
        }
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

impl RngCore for NoiseStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `dim` i.i.d. standard normals, advancing the stream.
pub fn gaussian_vector(stream: &mut NoiseStream, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    stream.fill_gaussian(&mut v);
    v
}

/// The γ and ξ streams of one path.
///
/// γ drives the passive step `σ√Δt γ` and the `δ_g γ` part of the inertial
/// position increment, so passive and inertial runs built from the same
/// `(seed, path_index)` see the same Brownian increments in `x`.
#[derive(Debug, Clone)]
pub struct CoupledNoise {
    gamma: NoiseStream,
    xi: NoiseStream,
}

impl CoupledNoise {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self {
            gamma: NoiseStream::new(StreamKey::new(seed, path_index, Channel::Gamma)),
            xi: NoiseStream::new(StreamKey::new(seed, path_index, Channel::Xi)),
        }
    }

    #[inline]
    pub fn fill(&mut self, gamma: &mut [f64], xi: &mut [f64]) {
        self.gamma.fill_gaussian(gamma);
        self.xi.fill_gaussian(xi);
    }

    pub fn gamma_stream(&mut self) -> &mut NoiseStream {
        &mut self.gamma
    }

    pub fn xi_stream(&mut self) -> &mut NoiseStream {
        &mut self.xi
    }
}

/// Draws one `(γ, ξ)` pair of standard normal vectors.
pub fn coupled_increments(noise: &mut CoupledNoise, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gamma = vec![0.0; dim];
    let mut xi = vec![0.0; dim];
    noise.fill(&mut gamma, &mut xi);
    (gamma, xi)
}

/// Brownian increments on a uniform grid, stored flat (`n_steps × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dim: usize,
    dt: f64,
    increments: Vec<f64>,
}

impl BrownianPath {
    /// `n_steps` increments distributed as `N(0, dt I)`.
    pub fn generate(stream: &mut NoiseStream, dim: usize, dt: f64, n_steps: usize) -> Self {
        let scale = dt.sqrt();
        let increments = (0..n_steps * dim).map(|_| scale * stream.normal()).collect();
        Self { dim, dt, increments }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.increments.len() / self.dim
        }
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// Sums consecutive pairs of increments: the same path on a grid of step `2 dt`.
    pub fn coarsen(&self) -> Result<Self> {
        let n = self.n_steps();
        if n % 2 != 0 {
            return Err(Error::MismatchedGrid(format!("cannot pair {n} increments")));
        }
        let dim = self.dim;
        let mut increments = Vec::with_capacity(n / 2 * dim);
        for k in 0..n / 2 {
            let a = self.increment(2 * k);
            let b = self.increment(2 * k + 1);
            increments.extend(a.iter().zip(b).map(|(x, y)| x + y));
        }
        Ok(Self { dim, dt: 2.0 * self.dt, increments })
    }

    /// Coarsens `log2(factor)` times; `factor` must be a power of two.
    pub fn coarsen_by(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::MismatchedGrid(format!("refinement factor {factor} is not a power of two")));
        }
        let mut path = self.clone();
        for _ in 0..factor.trailing_zeros() {
            path = path.coarsen()?;
        }
        Ok(path)
    }
}

/// A coarse path together with the half-step path it was summed from.
#[derive(Debug, Clone)]
pub struct RefinedIncrements {
    pub coarse: BrownianPath,
    pub fine: BrownianPath,
}

/// Generates `2 n_coarse` half-step increments and the `n_coarse` coarse
/// increments obtained by summing them pairwise.
pub fn brownian_refine(stream: &mut NoiseStream, dim: usize, coarse_dt: f64, n_coarse: usize) -> RefinedIncrements {
    let fine = BrownianPath::generate(stream, dim, coarse_dt / 2.0, 2 * n_coarse);
    let coarse = fine.coarsen().expect("even number of fine increments");
    RefinedIncrements { coarse, fine }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn standard_normal_moments() {
        let mut s = NoiseStream::new(StreamKey::new(11, 0, Channel::Gamma));
        let xs = gaussian_vector(&mut s, 1_000_000);
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 4.0 / 1000.0, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn same_key_same_sequence() {
        let key = StreamKey::new(42, 17, Channel::Xi);
        let a = gaussian_vector(&mut NoiseStream::new(key), 1000);
        let b = gaussian_vector(&mut NoiseStream::new(key), 1000);
        assert_eq!(a, b);
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let (ma, va) = mean_var(a);
        let (mb, vb) = mean_var(b);
        let n = a.len() as f64;
        let c = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
        c / (va * vb).sqrt()
    }

    #[test]
    fn channels_are_uncorrelated() {
        let n = 1_000_000;
        let a = gaussian_vector(&mut NoiseStream::new(StreamKey::new(3, 5, Channel::Gamma)), n);
        let b = gaussian_vector(&mut NoiseStream::new(StreamKey::new(3, 5, Channel::Xi)), n);
        assert!(correlation(&a, &b).abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn distinct_keys_are_uncorrelated() {
        let n = 100_000;
        let keys = [
            StreamKey::new(1, 0, Channel::Gamma),
            StreamKey::new(1, 1, Channel::Gamma),
            StreamKey::new(2, 0, Channel::Gamma),
            StreamKey::new(1, 0, Channel::Eta),
            StreamKey::new(1, 0, Channel::Init),
        ];
        let draws: Vec<_> = keys.iter().map(|k| gaussian_vector(&mut NoiseStream::new(*k), n)).collect();
        for i in 0..draws.len() {
            for j in i + 1..draws.len() {
                let r = correlation(&draws[i], &draws[j]);
                assert!(r.abs() <= 4.0 / (n as f64).sqrt(), "keys {i},{j}: {r}");
            }
        }
    }

    #[test]
    fn coupled_marginals_are_standard() {
        let mut noise = CoupledNoise::new(9, 0);
        let mut g = Vec::new();
        let mut x = Vec::new();
        for _ in 0..200_000 {
            let (a, b) = coupled_increments(&mut noise, 2);
            g.extend(a);
            x.extend(b);
        }
        for s in [&g, &x] {
            let (m, v) = mean_var(s);
            assert!(m.abs() < 4.0 / (s.len() as f64).sqrt());
            assert!((v - 1.0).abs() < 0.01);
        }
        // γ of the coupled pair is the plain γ channel of the same path
        let mut plain = NoiseStream::new(StreamKey::new(9, 0, Channel::Gamma));
        assert_eq!(&g[..4], &gaussian_vector(&mut plain, 4)[..]);
    }

    #[test]
    fn refinement_sums_bit_exactly() {
        let mut s = NoiseStream::new(StreamKey::new(1, 2, Channel::Gamma));
        let r = brownian_refine(&mut s, 2, 0.1, 500);
        assert_eq!(r.fine.n_steps(), 1000);
        assert_eq!(r.coarse.dt(), 0.1);
        for k in 0..500 {
            for i in 0..2 {
                assert_eq!(r.coarse.increment(k)[i], r.fine.increment(2 * k)[i] + r.fine.increment(2 * k + 1)[i]);
            }
        }
    }

    #[test]
    fn fine_increments_have_half_step_variance() {
        let mut s = NoiseStream::new(StreamKey::new(5, 0, Channel::Gamma));
        let r = brownian_refine(&mut s, 1, 0.2, 500_000);
        let fine: Vec<f64> = (0..r.fine.n_steps()).map(|k| r.fine.increment(k)[0]).collect();
        let (m, v) = mean_var(&fine);
        assert!(m.abs() < 4.0 * (0.1f64 / 1e6).sqrt());
        assert!((v / 0.1 - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn refining_twice_is_consistent() {
        let mut s = NoiseStream::new(StreamKey::new(8, 1, Channel::Gamma));
        let quarter = BrownianPath::generate(&mut s, 2, 0.025, 64);
        let two_steps = quarter.coarsen().unwrap().coarsen().unwrap();
        assert_eq!(quarter.coarsen_by(4).unwrap(), two_steps);
        assert_eq!(two_steps.n_steps(), 16);
        assert!((two_steps.dt() - 0.1).abs() < 1e-15);
        assert!(quarter.coarsen_by(3).is_err());
        assert_eq!(quarter.coarsen_by(1).unwrap(), quarter);
    }
}
