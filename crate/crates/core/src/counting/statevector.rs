//! Dense statevector simulation of the counting circuit.
//!
//! Basis index layout: bit `q` of the index is qubit `q`. The id register
//! holds qubits `0..n`; counting qubit `j` is qubit `n + j`, so each value of
//! the counting register owns a contiguous block of `N` amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{BooleanOracle, CountingConfig, CountingDistribution, CountingOutcome};
use crate::error::{Error, Result};

/// Largest total register (t + n) the dense simulation accepts.
pub const DEFAULT_QUBIT_CAP: u32 = 22;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    qubits: u32,
}

impl StateVector {
    /// |00...0>
    pub fn zero(qubits: u32) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps, qubits }
    }

    /// Uniform superposition over all basis states.
    pub fn uniform(qubits: u32) -> Self {
        let dim = 1usize << qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        StateVector {
            amps: vec![a; dim],
            qubits,
        }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two(), "dimension must be a power of two");
        let qubits = amps.len().trailing_zeros();
        StateVector { amps, qubits }
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn hadamard(&mut self, q: u32) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    /// diag(1, 1, 1, e^{i angle}) on qubits (a, b); symmetric in a and b.
    pub fn controlled_phase(&mut self, a: u32, b: u32, angle: f64) {
        let mask = (1usize << a) | (1usize << b);
        let phase = Complex64::from_polar(1.0, angle);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp *= phase;
            }
        }
    }

    pub fn swap(&mut self, a: u32, b: u32) {
        if a == b {
            return;
        }
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amps.swap(i, (i & !ba) | bb);
            }
        }
    }

    /// Applies `G^power` to the id register (the low `n` qubits) of every
    /// block whose `control` qubit is set.
    fn controlled_grover_power(&mut self, control: u32, oracle: &BooleanOracle, power: u64) {
        let block = oracle.len() as usize;
        let bit = 1usize << control;
        for (k, chunk) in self.amps.chunks_exact_mut(block).enumerate() {
            if (k * block) & bit != 0 {
                for _ in 0..power {
                    grover_in_place(chunk, oracle);
                }
            }
        }
    }
}

/// `(2|psi><psi| - I) O_f` on a slice spanning the whole id register.
fn grover_in_place(amps: &mut [Complex64], oracle: &BooleanOracle) {
    debug_assert_eq!(amps.len() as u64, oracle.len());
    let mut sum = Complex64::new(0.0, 0.0);
    for (id, a) in amps.iter_mut().enumerate() {
        if oracle.is_marked(id as u64) {
            *a = -*a;
        }
        sum += *a;
    }
    let twice_mean = sum * (2.0 / amps.len() as f64);
    for a in amps.iter_mut() {
        *a = twice_mean - *a;
    }
}

/// One Grover iteration: phase-flip the marked ids, then reflect about the
/// uniform state.
pub fn grover_iteration(state: &StateVector, oracle: &BooleanOracle) -> StateVector {
    assert_eq!(
        state.amps.len() as u64,
        oracle.len(),
        "oracle domain must match the register"
    );
    let mut out = state.clone();
    grover_in_place(&mut out.amps, oracle);
    out
}

/// Gate-level inverse QFT on qubits `first..first + width` (the first qubit
/// least significant): bit-reversal swaps, then controlled phases and
/// Hadamards in reverse order of the forward transform.
pub fn inverse_qft(state: &mut StateVector, first: u32, width: u32) {
    for i in 0..width / 2 {
        state.swap(first + i, first + width - 1 - i);
    }
    for i in 0..width {
        for j in 0..i {
            let angle = -2.0 * PI / (1u64 << (i - j + 1)) as f64;
            state.controlled_phase(first + j, first + i, angle);
        }
        state.hadamard(first + i);
    }
}

fn check_cap(oracle: &BooleanOracle, t_bits: u32, cap: u32) -> Result<u32> {
    let len = oracle.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::config(format!(
            "oracle domain {len} is not a power of two >= 2"
        )));
    }
    if t_bits == 0 {
        return Err(Error::config("counting register needs t >= 1"));
    }
    let n_bits = len.trailing_zeros();
    if n_bits + t_bits > cap {
        return Err(Error::config(format!(
            "t + n = {} qubits exceeds the statevector cap of {cap}",
            n_bits + t_bits
        )));
    }
    Ok(n_bits)
}

/// Runs the counting circuit and returns the exact folded pmf of the
/// measured phase over `{0, 1/T, ..., 1/2}`.
pub fn counting_circuit_pmf(oracle: &BooleanOracle, t_bits: u32, cap: u32) -> Result<Vec<f64>> {
    let n_bits = check_cap(oracle, t_bits, cap)?;
    let total = n_bits + t_bits;
    let mut state = StateVector::zero(total);
    for q in 0..total {
        state.hadamard(q);
    }
    for j in 0..t_bits {
        state.controlled_grover_power(n_bits + j, oracle, 1u64 << j);
    }
    inverse_qft(&mut state, n_bits, t_bits);

    let resolution = 1u64 << t_bits;
    let block = 1usize << n_bits;
    let mut folded = vec![0.0; (resolution / 2 + 1) as usize];
    for (m, chunk) in state.amps.chunks_exact(block).enumerate() {
        let p: f64 = chunk.iter().map(|a| a.norm_sqr()).sum();
        folded[CountingOutcome::from_measurement(m as u64, resolution).numerator as usize] += p;
    }
    Ok(folded)
}

/// Full statevector run of the counting circuit followed by one measurement.
pub fn simulate_counting_circuit<R: Rng + ?Sized>(
    oracle: &BooleanOracle,
    cfg: &CountingConfig,
    rng: &mut R,
) -> Result<CountingOutcome> {
    if oracle.len() != cfg.domain_size() {
        return Err(Error::config(format!(
            "oracle domain {} does not match N = 2^{}",
            oracle.len(),
            cfg.n_bits
        )));
    }
    let pmf = counting_circuit_pmf(oracle, cfg.t_bits, DEFAULT_QUBIT_CAP)?;
    Ok(CountingDistribution::from_pmf(pmf, cfg.resolution()).sample(rng))
}
