//! Quantum counting: the closed-form outcome distribution, an exact sampler
//! for it, and a statevector simulation of the full circuit.
//!
//! For a Boolean function with `S` marked items out of `N`, the Grover
//! iteration `G = (2|psi><psi| - I) O_f` has eigenphases `+-theta` with
//! `theta = asin(sqrt(S/N)) / pi`. Phase estimation with `T = 2^t` counting
//! qubits, followed by folding the measured `m` onto `min(m, T - m) / T`,
//! produces the distribution evaluated by [`counting_distribution`].

mod statevector;

pub use statevector::{
    counting_circuit_pmf, grover_iteration, inverse_qft, simulate_counting_circuit, StateVector,
    DEFAULT_QUBIT_CAP,
};

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

/// Distance below which a phase difference counts as sitting exactly on the
/// 1/T grid (removable singularity of the Fejér kernel).
pub const GRID_PROXIMITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountingConfig {
    /// Id register width n (N = 2^n).
    pub n_bits: u32,
    /// Counting register width t (T = 2^t).
    pub t_bits: u32,
    /// Independent repetitions B of the counting circuit.
    pub reps: usize,
    pub seed: u64,
}

impl CountingConfig {
    pub fn new(n_bits: u32, t_bits: u32, reps: usize, seed: u64) -> Result<Self> {
        if n_bits == 0 || t_bits == 0 {
            return Err(Error::config("counting needs n >= 1 and t >= 1"));
        }
        if n_bits > 62 || t_bits > 30 {
            return Err(Error::config(format!(
                "register widths n = {n_bits}, t = {t_bits} are out of range"
            )));
        }
        if reps == 0 {
            return Err(Error::config("at least one repetition (B >= 1) is required"));
        }
        Ok(CountingConfig {
            n_bits,
            t_bits,
            reps,
            seed,
        })
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.n_bits
    }

    pub fn resolution(&self) -> u64 {
        1u64 << self.t_bits
    }

    /// Grover iterations per repetition: sum of 2^j for j < t.
    pub fn queries_per_rep(&self) -> u64 {
        self.resolution() - 1
    }

    pub fn total_queries(&self) -> u64 {
        self.queries_per_rep() * self.reps as u64
    }
}

/// Marked set of a phase oracle, stored as a bit table over `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanOracle {
    words: Vec<u64>,
    len: u64,
}

impl BooleanOracle {
    pub fn from_fn(len: u64, mut marked: impl FnMut(u64) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(64) as usize];
        for id in 0..len {
            if marked(id) {
                words[(id / 64) as usize] |= 1 << (id % 64);
            }
        }
        BooleanOracle { words, len }
    }

    /// Oracle over `[0, len)` marking the first `count` ids.
    pub fn first_marked(len: u64, count: u64) -> Self {
        Self::from_fn(len, |id| id < count)
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_marked(&self, id: u64) -> bool {
        debug_assert!(id < self.len);
        self.words[(id / 64) as usize] >> (id % 64) & 1 == 1
    }

    /// S: number of marked ids.
    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// A folded counting measurement `theta_tilde = numerator / T` in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountingOutcome {
    pub numerator: u64,
    pub resolution: u64,
}

impl CountingOutcome {
    pub fn new(numerator: u64, resolution: u64) -> Self {
        assert!(
            2 * numerator <= resolution,
            "outcome {numerator}/{resolution} exceeds 1/2"
        );
        CountingOutcome {
            numerator,
            resolution,
        }
    }

    /// Folds a raw counting-register value `m` in `[0, T)`.
    pub fn from_measurement(m: u64, resolution: u64) -> Self {
        debug_assert!(m < resolution);
        CountingOutcome::new(m.min(resolution - m), resolution)
    }

    pub fn theta_tilde(&self) -> f64 {
        self.numerator as f64 / self.resolution as f64
    }

    /// Plug-in count estimate `N sin^2(pi theta_tilde)`.
    pub fn count_estimate(&self, domain_size: u64) -> f64 {
        count_from_theta(self.theta_tilde(), domain_size)
    }
}

/// `theta = asin(sqrt(S / N)) / pi`, in `[0, 1/2]`.
pub fn theta_from_count(count: u64, domain_size: u64) -> Result<f64> {
    if domain_size == 0 || count > domain_size {
        return Err(Error::config(format!(
            "count S = {count} outside [0, N = {domain_size}]"
        )));
    }
    Ok(theta_from_count_unchecked(count, domain_size))
}

pub(crate) fn theta_from_count_unchecked(count: u64, domain_size: u64) -> f64 {
    if count == domain_size {
        return 0.5;
    }
    (count as f64 / domain_size as f64).sqrt().asin() / PI
}

/// `S = N sin^2(pi theta)`.
pub fn count_from_theta(theta: f64, domain_size: u64) -> f64 {
    let s = (PI * theta).sin();
    domain_size as f64 * s * s
}

/// Maps any phase onto `[0, 1/2]` (period 1, reflection about 0).
pub fn fold_phase(theta: f64) -> f64 {
    let x = theta.rem_euclid(1.0);
    if x > 0.5 {
        1.0 - x
    } else {
        x
    }
}

/// Squared Fejér ratio `(sin(T pi x) / (T sin(pi x)))^2`, with the removable
/// singularities resolved explicitly: value 1 when `x` is an integer, 0 when
/// `T x` is an integer but `x` is not.
pub fn fejer(x: f64, resolution: u64) -> f64 {
    let t = resolution as f64;
    let grid = (x * t).round();
    if (x - grid / t).abs() < GRID_PROXIMITY {
        return if grid.rem_euclid(t) == 0.0 { 1.0 } else { 0.0 };
    }
    let ratio = (t * PI * x).sin() / (t * (PI * x).sin());
    ratio * ratio
}

/// Probability of the folded outcome `k / T` given phase `theta`.
pub fn outcome_probability(numerator: u64, theta: f64, resolution: u64) -> f64 {
    let tt = numerator as f64 / resolution as f64;
    if numerator == 0 || 2 * numerator == resolution {
        fejer(tt - theta, resolution)
    } else {
        fejer(tt - theta, resolution) + fejer(tt + theta, resolution)
    }
}

/// Closed-form pmf over `theta_tilde in {0, 1/T, ..., 1/2}`.
pub fn counting_distribution(theta: f64, resolution: u64) -> Vec<f64> {
    assert!(
        resolution >= 2 && resolution.is_power_of_two(),
        "T = {resolution} must be a power of two >= 2"
    );
    (0..=resolution / 2)
        .map(|k| outcome_probability(k, theta, resolution))
        .collect()
}

/// Precomputed pmf and cdf for inverse-CDF sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingDistribution {
    resolution: u64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl CountingDistribution {
    pub fn new(theta: f64, resolution: u64) -> Self {
        Self::from_pmf(counting_distribution(theta, resolution), resolution)
    }

    pub fn from_pmf(pmf: Vec<f64>, resolution: u64) -> Self {
        assert_eq!(pmf.len() as u64, resolution / 2 + 1);
        let cdf = pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        CountingDistribution {
            resolution,
            pmf,
            cdf,
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CountingOutcome {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        // rounding can leave the final cdf entry a hair below 1
        let k = if k == self.cdf.len() {
            self.pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        } else {
            k
        };
        CountingOutcome::new(k as u64, self.resolution)
    }
}

/// One exact draw from [`counting_distribution`].
pub fn sample_outcome<R: Rng + ?Sized>(theta: f64, resolution: u64, rng: &mut R) -> CountingOutcome {
    CountingDistribution::new(theta, resolution).sample(rng)
}

/// Right-hand side of the counting error bound `2 pi sqrt(S) / T + pi^2 / T^2`.
pub fn counting_error_bound(count: f64, resolution: u64) -> f64 {
    let t = resolution as f64;
    2.0 * PI * count.max(0.0).sqrt() / t + PI * PI / (t * t)
}

/// True iff `|S_est - S| < 2 pi sqrt(S) / T + pi^2 / T^2`.
///
/// The inequality is scale-sensitive: with `S` a raw count it is much
/// tighter than with `S` the marked fraction `S / N`.
pub fn error_bound_check(estimate: f64, count: f64, resolution: u64) -> bool {
    (estimate - count).abs() < counting_error_bound(count, resolution)
}
