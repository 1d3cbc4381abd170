//! Mean estimation by counting.
//!
//! A table of bounded colors is turned into a Boolean function over
//! `(path, comparator)` pairs: the pair is marked when the path color exceeds
//! the comparator threshold `comparator * 2^(b-c)`. The marked count `S`
//! scaled by `2^(b - r - c)` approximates the table mean, and `S` itself is
//! estimated by repeated quantum counting followed by a maximum a posteriori
//! search over the discrete set of possible counts.

use rand::Rng;

use crate::counting::{
    outcome_probability, simulate_counting_circuit, theta_from_count_unchecked, BooleanOracle,
    CountingConfig, CountingDistribution, CountingOutcome, GRID_PROXIMITY,
};
use crate::error::{Error, Result};

/// Values live in `[0, 2^b)` on a grid of spacing `2^(b-c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    pub integer_bits: i32,
    pub comparator_bits: u32,
}

impl FixedPointFormat {
    pub fn new(integer_bits: i32, comparator_bits: u32) -> Result<Self> {
        if comparator_bits == 0 {
            return Err(Error::config("comparator bits c must be at least 1"));
        }
        if comparator_bits > 40 || integer_bits.abs() > 60 {
            return Err(Error::config(format!(
                "fixed-point format (b = {integer_bits}, c = {comparator_bits}) out of range"
            )));
        }
        Ok(FixedPointFormat {
            integer_bits,
            comparator_bits,
        })
    }

    /// Number of comparators C = 2^c.
    pub fn comparators(&self) -> u64 {
        1u64 << self.comparator_bits
    }

    /// Comparator spacing 2^(b-c).
    pub fn spacing(&self) -> f64 {
        pow2(self.integer_bits - self.comparator_bits as i32)
    }

    pub fn upper(&self) -> f64 {
        pow2(self.integer_bits)
    }

    /// Largest representable value, `2^b - 2^(b-c)`.
    pub fn max_value(&self) -> f64 {
        self.upper() - self.spacing()
    }

    pub fn threshold(&self, comparator: u64) -> f64 {
        comparator as f64 * self.spacing()
    }

    /// The half-step error bound `2^(b-c-1)`.
    pub fn half_step(&self) -> f64 {
        0.5 * self.spacing()
    }

    /// Number of thresholds strictly below `x`.
    pub fn comparators_below(&self, x: f64) -> u64 {
        if !(x > 0.0) {
            return 0;
        }
        // spacing is a power of two, so the division is exact
        let k = (x / self.spacing()).ceil();
        (k as u64).min(self.comparators())
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// `f(x, y) = 1` iff `x > y`.
pub fn comparator_f(x: f64, y: f64) -> bool {
    x > y
}

/// A color table clamped into `[0, 2^b - 2^(b-c)]`, ready for the comparator
/// oracle. The table length `2^r` fixes the path-register width.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorOracleSpec {
    table: Vec<f64>,
    format: FixedPointFormat,
    clamp_count: usize,
}

impl ComparatorOracleSpec {
    pub fn new(color_table: &[f64], format: FixedPointFormat) -> Result<Self> {
        if color_table.is_empty() || !color_table.len().is_power_of_two() {
            return Err(Error::config(format!(
                "color table length {} is not a power of two",
                color_table.len()
            )));
        }
        let hi = format.max_value();
        let mut clamp_count = 0;
        let table = color_table
            .iter()
            .map(|&x| {
                let clamped = if x.is_nan() { 0.0 } else { x.clamp(0.0, hi) };
                if clamped != x {
                    clamp_count += 1;
                }
                clamped
            })
            .collect();
        Ok(ComparatorOracleSpec {
            table,
            format,
            clamp_count,
        })
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    /// Entries that were moved by clamping.
    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    pub fn path_bits(&self) -> u32 {
        self.table.len().trailing_zeros()
    }

    /// n = r + c.
    pub fn id_bits(&self) -> u32 {
        self.path_bits() + self.format.comparator_bits
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.id_bits()
    }

    /// Exact marked count, summed per path without materializing the oracle.
    pub fn marked_count(&self) -> u64 {
        self.table
            .iter()
            .map(|&x| self.format.comparators_below(x))
            .sum()
    }

    /// Mean of the clamped table.
    pub fn clamped_mean(&self) -> f64 {
        self.table.iter().sum::<f64>() / self.table.len() as f64
    }
}

/// Bit table over `id = (path << c) | comparator`, marking `color[path] > threshold`.
pub fn build_comparator_oracle(spec: &ComparatorOracleSpec) -> BooleanOracle {
    let c = spec.format.comparator_bits;
    let mask = (1u64 << c) - 1;
    BooleanOracle::from_fn(spec.domain_size(), |id| {
        let x = spec.table[(id >> c) as usize];
        comparator_f(x, spec.format.threshold(id & mask))
    })
}

/// `2^(b - (r + c)) * S`.
pub fn mean_from_count(count: f64, path_bits: u32, format: FixedPointFormat) -> f64 {
    count * pow2(format.integer_bits - (path_bits + format.comparator_bits) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    pub s_map: u64,
    pub theta_map: f64,
    /// Log-likelihood (= unnormalized log posterior) at the mode.
    pub log_likelihood: f64,
}

/// Outcomes grouped by value, sorted by numerator.
fn group_outcomes(outcomes: &[CountingOutcome]) -> Vec<(u64, f64)> {
    let mut nums: Vec<u64> = outcomes.iter().map(|o| o.numerator).collect();
    nums.sort_unstable();
    let mut groups: Vec<(u64, f64)> = Vec::new();
    for k in nums {
        match groups.last_mut() {
            Some((last, w)) if *last == k => *w += 1.0,
            _ => groups.push((k, 1.0)),
        }
    }
    groups
}

fn validate_outcomes(outcomes: &[CountingOutcome], domain_size: u64, resolution: u64) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::config("posterior needs at least one counting outcome"));
    }
    if domain_size == 0 {
        return Err(Error::config("domain size N must be positive"));
    }
    if resolution < 2 || !resolution.is_power_of_two() {
        return Err(Error::config(format!("T = {resolution} is not a power of two >= 2")));
    }
    if let Some(o) = outcomes
        .iter()
        .find(|o| o.resolution != resolution || 2 * o.numerator > resolution)
    {
        return Err(Error::config(format!(
            "outcome {}/{} is not on the 1/{resolution} grid in [0, 1/2]",
            o.numerator, o.resolution
        )));
    }
    Ok(())
}

fn log_likelihood(groups: &[(u64, f64)], theta: f64, resolution: u64) -> f64 {
    let mut ll = 0.0;
    for &(k, w) in groups {
        let p = outcome_probability(k, theta, resolution);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += w * p.ln();
    }
    ll
}

/// Sum of outcome log-likelihoods at every grid count `S = 0..=N`.
pub fn log_likelihood_grid(
    outcomes: &[CountingOutcome],
    domain_size: u64,
    resolution: u64,
) -> Result<Vec<f64>> {
    validate_outcomes(outcomes, domain_size, resolution)?;
    let groups = group_outcomes(outcomes);
    Ok((0..=domain_size)
        .map(|s| log_likelihood(&groups, theta_from_count_unchecked(s, domain_size), resolution))
        .collect())
}

/// Normalized log posterior over `S = 0..=N` under the uniform prior.
/// Diagnostic only; the mode is found by [`bayesian_map`].
pub fn log_posterior(
    outcomes: &[CountingOutcome],
    domain_size: u64,
    resolution: u64,
) -> Result<Vec<f64>> {
    let ll = log_likelihood_grid(outcomes, domain_size, resolution)?;
    let max = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + ll.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(ll.into_iter().map(|v| v - log_z).collect())
}

/// Smallest distance from `[lo, hi]` to an integer (0 if it contains one).
fn distance_to_integer(lo: f64, hi: f64) -> f64 {
    let f = lo.floor();
    if hi >= f + 1.0 || lo - f < GRID_PROXIMITY || f + 1.0 - hi < GRID_PROXIMITY {
        return 0.0;
    }
    (lo - f).min(f + 1.0 - hi)
}

/// Upper bound of the Fejér term over phase differences in `[lo, hi]`,
/// using `K(x) <= min(1, 1 / (T sin(pi d))^2)`.
fn fejer_upper(lo: f64, hi: f64, resolution: u64) -> f64 {
    let d = distance_to_integer(lo, hi);
    if d == 0.0 {
        return 1.0;
    }
    let s = resolution as f64 * (std::f64::consts::PI * d).sin();
    (1.0 / (s * s)).min(1.0)
}

fn log_likelihood_upper(groups: &[(u64, f64)], theta_lo: f64, theta_hi: f64, resolution: u64) -> f64 {
    let t = resolution as f64;
    groups
        .iter()
        .map(|&(k, w)| {
            let tt = k as f64 / t;
            let mut bound = fejer_upper(tt - theta_hi, tt - theta_lo, resolution);
            if k != 0 && 2 * k != resolution {
                bound += fejer_upper(tt + theta_lo, tt + theta_hi, resolution);
            }
            w * bound.min(1.0).ln()
        })
        .sum()
}

const LEAF_SIZE: u64 = 64;

/// Maximum a posteriori count under a uniform prior on `S = 0..=N`.
///
/// Exact over the whole grid: a branch-and-bound over count intervals
/// discards only intervals whose likelihood upper bound is below the best
/// value found. Ties go to the smaller `S`; zero-likelihood points are
/// `-inf` and never win against a positive likelihood.
pub fn bayesian_map(
    outcomes: &[CountingOutcome],
    domain_size: u64,
    resolution: u64,
) -> Result<PosteriorEstimate> {
    validate_outcomes(outcomes, domain_size, resolution)?;
    let groups = group_outcomes(outcomes);
    let theta = |s: u64| theta_from_count_unchecked(s, domain_size);

    let mut best_s = 0u64;
    let mut best = log_likelihood(&groups, theta(0), resolution);
    let consider = |s: u64, value: f64, best_s: &mut u64, best: &mut f64| {
        if value > *best || (value == *best && s < *best_s) {
            *best = value;
            *best_s = s;
        }
    };

    // seed with the counts nearest to each observed phase
    for &(k, _) in &groups {
        let guess = crate::counting::count_from_theta(k as f64 / resolution as f64, domain_size)
            .round()
            .clamp(0.0, domain_size as f64) as u64;
        for s in guess.saturating_sub(1)..=(guess + 1).min(domain_size) {
            consider(s, log_likelihood(&groups, theta(s), resolution), &mut best_s, &mut best);
        }
    }

    let mut stack = vec![(0u64, domain_size)];
    while let Some((lo, hi)) = stack.pop() {
        let upper = log_likelihood_upper(&groups, theta(lo), theta(hi), resolution);
        if upper < best - 1e-9 * (1.0 + best.abs()) {
            continue;
        }
        if hi - lo < LEAF_SIZE {
            for s in lo..=hi {
                consider(s, log_likelihood(&groups, theta(s), resolution), &mut best_s, &mut best);
            }
            continue;
        }
        let mid = lo + (hi - lo) / 2;
        // left half popped first
        stack.push((mid + 1, hi));
        stack.push((lo, mid));
    }

    Ok(PosteriorEstimate {
        s_map: best_s,
        theta_map: theta(best_s),
        log_likelihood: best,
    })
}

/// How counting outcomes are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountingBackend {
    /// Exact draws from the closed-form outcome distribution.
    #[default]
    Analytic,
    /// Full statevector simulation (small registers only).
    Statevector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanDiagnostics {
    pub s_true: u64,
    pub s_map: u64,
    pub theta_map: f64,
    pub outcomes: Vec<CountingOutcome>,
    pub clamp_count: usize,
    /// Mean of the clamped table minus mean of the raw table.
    pub clamp_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub diagnostics: MeanDiagnostics,
}

/// Clamp, build the comparator oracle, run `B` counting repetitions, take
/// the posterior mode and rescale it to a mean.
pub fn estimate_mean<R: Rng + ?Sized>(
    color_table: &[f64],
    format: FixedPointFormat,
    cfg: &CountingConfig,
    backend: CountingBackend,
    rng: &mut R,
) -> Result<MeanEstimate> {
    let spec = ComparatorOracleSpec::new(color_table, format)?;
    if spec.id_bits() != cfg.n_bits {
        return Err(Error::config(format!(
            "counting register n = {} but table needs r + c = {} + {}",
            cfg.n_bits,
            spec.path_bits(),
            format.comparator_bits
        )));
    }
    let n = spec.domain_size();
    let t = cfg.resolution();
    let s_true = spec.marked_count();

    let outcomes: Vec<CountingOutcome> = match backend {
        CountingBackend::Analytic => {
            let dist = CountingDistribution::new(theta_from_count_unchecked(s_true, n), t);
            (0..cfg.reps).map(|_| dist.sample(rng)).collect()
        }
        CountingBackend::Statevector => {
            let oracle = build_comparator_oracle(&spec);
            (0..cfg.reps)
                .map(|_| simulate_counting_circuit(&oracle, cfg, rng))
                .collect::<Result<_>>()?
        }
    };
    let posterior = bayesian_map(&outcomes, n, t)?;
    let raw_mean = color_table.iter().sum::<f64>() / color_table.len() as f64;
    Ok(MeanEstimate {
        mean: mean_from_count(posterior.s_map as f64, spec.path_bits(), format),
        diagnostics: MeanDiagnostics {
            s_true,
            s_map: posterior.s_map,
            theta_map: posterior.theta_map,
            outcomes,
            clamp_count: spec.clamp_count(),
            clamp_bias: spec.clamped_mean() - raw_mean,
        },
    })
}
