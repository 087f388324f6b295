use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::StateVector;
use crate::error::{Error, Result};

/// Bitstring counts keyed by outcome, first listed qubit leftmost.
pub type Histogram = BTreeMap<String, u64>;

/// Branch probabilities below this are treated as impossible.
const DEGENERATE: f64 = 1e-15;

impl StateVector {
    /// Measures `qubit` in the computational basis, consuming one uniform draw.
    /// The state is projected onto the observed outcome and renormalized.
    pub fn collapse<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<u8> {
        let p1 = self.marginal_prob_one(qubit)?;
        let u: f64 = rng.random();
        let outcome = if p1 < DEGENERATE {
            0
        } else if 1.0 - p1 < DEGENERATE {
            1
        } else {
            u8::from(u < p1)
        };
        let p = if outcome == 1 { p1 } else { 1.0 - p1 };
        self.project(qubit, outcome)?;
        self.scale(1.0 / p.sqrt());
        Ok(outcome)
    }

    /// Joint distribution of the listed qubits; entry `j` is the probability of
    /// the bitstring whose first listed qubit is the most significant bit of `j`.
    pub fn joint_marginal(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        if qubits.is_empty() {
            return Err(Error::config("empty qubit list"));
        }
        for &q in qubits {
            self.check(q)?;
        }
        let k = qubits.len();
        let n = self.n_qubits;
        let mut dist = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let mut key = 0usize;
            for &q in qubits {
                key = (key << 1) | ((i >> (n - 1 - q)) & 1);
            }
            dist[key] += a.norm_sqr();
        }
        Ok(dist)
    }

    /// Draws `shots` measurements of the listed qubits.
    pub fn sample_counts<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        shots: u64,
        rng: &mut R,
    ) -> Result<Histogram> {
        if shots == 0 {
            return Err(Error::config("shot count must be at least 1"));
        }
        let dist = self.joint_marginal(qubits)?;
        let counts = sample_multinomial(&dist, shots, rng);
        let width = qubits.len();
        Ok(counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(key, c)| (format!("{key:0width$b}"), c))
            .collect())
    }
}

/// Number of ones in `shots` Bernoulli(p) trials.
pub fn sample_bernoulli<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> u64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(shots, p)
        .expect("p clamped to [0, 1]")
        .sample(rng)
}

/// Multinomial draw over `dist` (need not be normalized) by sequential
/// conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(dist: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; dist.len()];
    let mut remaining = shots;
    let mut mass: f64 = dist.iter().sum();
    for (i, &p) in dist.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == dist.len() || mass <= p {
            counts[i] = remaining;
            break;
        }
        let c = sample_bernoulli(p / mass, remaining, rng);
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn collapse_certain_outcome() {
        let mut s =
            StateVector::from_amplitudes(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.collapse(0, &mut rng).unwrap(), 1);
        assert_eq!(s.amplitudes()[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn collapse_frequency_on_equal_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut base = StateVector::new_zero_state(1).unwrap();
        base.apply_ry(0, PI / 2.0).unwrap();
        let n = 100_000;
        let mut ones = 0u64;
        for _ in 0..n {
            let mut s = base.clone();
            ones += u64::from(s.collapse(0, &mut rng).unwrap());
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!(
            (ones as f64 - n as f64 / 2.0).abs() < 3.0 * sigma,
            "ones = {ones}"
        );
    }

    #[test]
    fn counts_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StateVector::new_zero_state(2).unwrap();
        let h = s.sample_counts(&[0, 1], 1000, &mut rng).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h["00"], 1000);
        assert!(s.sample_counts(&[], 10, &mut rng).is_err());
        assert!(s.sample_counts(&[0], 0, &mut rng).is_err());
    }

    #[test]
    fn counts_equal_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = StateVector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        let shots = 1_000_000;
        let h = s.sample_counts(&[0], shots, &mut rng).unwrap();
        assert_eq!(h.values().sum::<u64>(), shots);
        let sigma = (shots as f64 * 0.25).sqrt();
        for key in ["0", "1"] {
            assert!((h[key] as f64 - 500_000.0).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn joint_marginal_bit_order() {
        // |0110>: qubit 1 and 2 are set
        let mut amps = vec![Complex64::new(0.0, 0.0); 16];
        amps[0b0110] = Complex64::new(1.0, 0.0);
        let s = StateVector::from_amplitudes(amps).unwrap();
        let d = s.joint_marginal(&[2, 0]).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
