use rand::Rng;

use super::{ModelSpec, ModelVariant};
use crate::error::{Error, Result};
use crate::sim::{gate_matrix, matmul2, sample_bernoulli, Matrix2, StateVector};

impl ModelSpec {
    pub(crate) fn check_inputs(&self, features: &[f64], params: &[f64]) -> Result<()> {
        if features.len() != self.n_data_qubits {
            return Err(Error::input(format!(
                "expected {} features, got {}",
                self.n_data_qubits,
                features.len()
            )));
        }
        if params.len() != self.n_params() {
            return Err(Error::input(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("feature {i} is not finite")));
        }
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    /// Runs the program once without collapse and returns the marginal
    /// `P(qubit = 1)` at each `(qubit, position)` probe, plus the final state.
    ///
    /// Single-qubit gates are multiplied into a pending matrix per qubit and
    /// only applied when a CNOT or a probe needs that qubit. Gates on other
    /// qubits cannot change a qubit's marginal, so deferring them is exact.
    pub fn probe(
        &self,
        features: &[f64],
        params: &[f64],
        probes: &[(usize, usize)],
    ) -> Result<(Vec<f64>, StateVector)> {
        self.check_inputs(features, params)?;
        let mut state = StateVector::new_zero_state(self.n_total_qubits)?;
        let mut pending: Vec<Option<Matrix2>> = vec![None; self.n_total_qubits];
        let flush = |state: &mut StateVector, pending: &mut [Option<Matrix2>], q: usize| {
            pending[q]
                .take()
                .map_or(Ok(()), |m| state.apply_matrix(q, &m))
        };
        let mut out = vec![0.0; probes.len()];
        for pos in 0..=self.program.len() {
            for (slot, &(q, p)) in out.iter_mut().zip(probes) {
                if p == pos {
                    flush(&mut state, &mut pending, q)?;
                    *slot = state.marginal_prob_one(q)?;
                }
            }
            let Some(gate) = self.program.get(pos) else {
                break;
            };
            match gate_matrix(gate, features, params) {
                Some((q, m)) => {
                    pending[q] = Some(match &pending[q] {
                        Some(prev) => matmul2(&m, prev),
                        None => m,
                    });
                }
                None => {
                    for q in gate.qubits() {
                        flush(&mut state, &mut pending, q)?;
                    }
                    state.apply_gate(gate, features, params)?;
                }
            }
        }
        for q in 0..self.n_total_qubits {
            flush(&mut state, &mut pending, q)?;
        }
        Ok((out, state))
    }

    /// Exact class-1 probability of every classifier.
    ///
    /// Layerwise classifiers read prefixes of one program, so a single pass
    /// yields the same values as rerunning each truncated circuit from `|0>`.
    pub fn forward(&self, features: &[f64], params: &[f64]) -> Result<Vec<f64>> {
        let model = self.analytic_model();
        let probes: Vec<(usize, usize)> = model
            .readouts
            .iter()
            .map(|r| (r.qubit, r.position))
            .collect();
        model.probe(features, params, &probes).map(|(p, _)| p)
    }

    /// Circuit executions needed to gather `shots` samples of every classifier.
    pub fn circuit_executions(&self, shots: u64) -> u64 {
        match self.variant {
            ModelVariant::Layerwise => shots * self.n_classifiers() as u64,
            _ => shots,
        }
    }

    /// Class-1 probabilities estimated from `shots` measurement samples.
    ///
    /// Layerwise spends `shots` on each truncated circuit. Blocking follows
    /// measurement trajectories, collapsing qubit 0 at every readout.
    pub fn forward_sampled<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        params: &[f64],
        shots: u64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if shots == 0 {
            return Err(Error::config("shot count must be at least 1"));
        }
        let m = self.n_classifiers();
        let total = shots as f64;
        match self.variant {
            ModelVariant::Layerwise => {
                let exact = self.forward(features, params)?;
                Ok(exact
                    .into_iter()
                    .map(|p| sample_bernoulli(p, shots, rng) as f64 / total)
                    .collect())
            }
            ModelVariant::Blocking => {
                let ones = self.blocking_trajectories(features, params, shots, rng)?;
                Ok(ones.into_iter().map(|c| c as f64 / total).collect())
            }
            ModelVariant::Ancilla | ModelVariant::Funnel | ModelVariant::Plain => {
                let (_, state) = self.probe(features, params, &[])?;
                let qubits: Vec<usize> = self.readouts.iter().map(|r| r.qubit).collect();
                let dist = state.joint_marginal(&qubits)?;
                let counts = crate::sim::sample_multinomial(&dist, shots, rng);
                let mut ones = vec![0u64; m];
                for (key, &count) in counts.iter().enumerate() {
                    for (c, slot) in ones.iter_mut().enumerate() {
                        if (key >> (m - 1 - c)) & 1 == 1 {
                            *slot += count;
                        }
                    }
                }
                Ok(ones.into_iter().map(|c| c as f64 / total).collect())
            }
        }
    }

    /// Number of shots reading 1 at each mid-circuit measurement.
    ///
    /// Shots that share an outcome history share their simulation: at each
    /// measurement the surviving shots split binomially between the two
    /// collapsed branches, which is distributed exactly as running every
    /// trajectory separately.
    pub fn blocking_trajectories<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        params: &[f64],
        shots: u64,
        rng: &mut R,
    ) -> Result<Vec<u64>> {
        self.check_inputs(features, params)?;
        let mut ones = vec![0u64; self.n_classifiers()];
        let state = StateVector::new_zero_state(self.n_total_qubits)?;
        self.branch(state, 0, 0, shots, features, params, rng, &mut ones)?;
        Ok(ones)
    }

    #[allow(clippy::too_many_arguments)]
    fn branch<R: Rng + ?Sized>(
        &self,
        mut state: StateVector,
        mut pos: usize,
        readout: usize,
        shots: u64,
        features: &[f64],
        params: &[f64],
        rng: &mut R,
        ones: &mut [u64],
    ) -> Result<()> {
        let Some(r) = self.readouts.get(readout) else {
            return Ok(());
        };
        while pos < r.position {
            state.apply_gate(&self.program[pos], features, params)?;
            pos += 1;
        }
        let p1 = state.marginal_prob_one(r.qubit)?;
        let n1 = sample_bernoulli(p1, shots, rng);
        ones[readout] += n1;
        let n0 = shots - n1;
        if n1 > 0 && n0 > 0 {
            let mut one = state.clone();
            one.project(r.qubit, 1)?;
            one.scale(1.0 / p1.sqrt());
            self.branch(one, pos, readout + 1, n1, features, params, rng, ones)?;
            state.project(r.qubit, 0)?;
            state.scale(1.0 / (1.0 - p1).sqrt());
            self.branch(state, pos, readout + 1, n0, features, params, rng, ones)
        } else {
            let outcome = u8::from(n1 > 0);
            let p = if outcome == 1 { p1 } else { 1.0 - p1 };
            state.project(r.qubit, outcome)?;
            state.scale(1.0 / p.sqrt());
            self.branch(state, pos, readout + 1, shots, features, params, rng, ones)
        }
    }
}
