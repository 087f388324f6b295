//! Exact derivatives of classifier probabilities with respect to the
//! trainable rotation angles.
//!
//! The production path is an adjoint sweep: one forward pass, then one
//! backward pass that uncomputes the state gate by gate while carrying the
//! co-state `lambda = U^dagger O psi`. A rotation `exp(-i theta G / 2)` then
//! contributes `Im <lambda|G|psi>` to the derivative. Readouts taken in the
//! middle of the program are injected into the co-state when the sweep
//! passes their position. Parameter shift and central differences are
//! independent checks of the same quantities.

use std::f64::consts::FRAC_PI_2;

use crate::ansatz::ModelSpec;
use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::sim::{
    contract2, dagger2, matmul2, rot_matrix, ry_matrix, rz_matrix, GateOp, Matrix2, StateVector,
};

/// `d p_c / d theta_k`, rows indexed by classifier, columns by flat parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbJacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProbJacobian {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Flips the sign of one parameter's column.
    pub fn negate_column(&mut self, col: usize) {
        for r in 0..self.rows {
            self.data[r * self.cols + col] *= -1.0;
        }
    }

    /// `w^T J`.
    pub fn vjp(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &w) in weights.iter().enumerate().take(self.rows) {
            for (o, &j) in out.iter_mut().zip(self.row(r)) {
                *o += w * j;
            }
        }
        out
    }

    /// Largest elementwise absolute difference and where it occurs.
    pub fn max_abs_diff(&self, other: &ProbJacobian) -> (f64, usize, usize) {
        let mut best = (0.0, 0, 0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = (self.get(r, c) - other.get(r, c)).abs();
                if d > best.0 || d.is_nan() {
                    best = (d, r, c);
                }
            }
        }
        best
    }
}

/// Probabilities and `sum_c weights[c] * d p_c / d theta` from one adjoint sweep.
pub fn vjp(
    model: &ModelSpec,
    features: &[f64],
    params: &[f64],
    weights: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    vjp_with(model, features, params, |_| Ok(weights.to_vec()))
}

/// As [`vjp`], with the readout weights computed from the probabilities of
/// the same forward pass.
pub fn vjp_with<F>(
    model: &ModelSpec,
    features: &[f64],
    params: &[f64],
    weights_of: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let model = model.analytic_model();
    let readouts = model.readouts();
    let program = model.program();
    let probes: Vec<(usize, usize)> = readouts.iter().map(|r| (r.qubit, r.position)).collect();
    let (probs, mut psi) = model.probe(features, params, &probes)?;
    let weights = weights_of(&probs)?;
    if weights.len() != readouts.len() {
        return Err(Error::input(format!(
            "expected {} readout weights, got {}",
            readouts.len(),
            weights.len()
        )));
    }

    // Inverse gates are queued per qubit and applied to both states only when
    // that qubit is next needed. A queued unitary on other qubits acts on psi
    // and lambda alike, so it cancels in every single-qubit overlap and
    // commutes with single-qubit projectors.
    let n = psi.n_qubits();
    let mut pending: Vec<Option<Matrix2>> = vec![None; n];
    let flush = |psi: &mut StateVector,
                 lambda: &mut StateVector,
                 pending: &mut [Option<Matrix2>],
                 q: usize|
     -> Result<()> {
        if let Some(m) = pending[q].take() {
            psi.apply_matrix(q, &m)?;
            lambda.apply_matrix(q, &m)?;
        }
        Ok(())
    };
    let queue = |pending: &mut [Option<Matrix2>], q: usize, m: Matrix2| {
        pending[q] = Some(match &pending[q] {
            Some(prev) => matmul2(&m, prev),
            None => m,
        });
    };

    let mut grad = vec![0.0; params.len()];
    let mut lambda = StateVector::from_amplitudes(vec![Default::default(); psi.dim()])?;
    let inject = |psi: &mut StateVector,
                  lambda: &mut StateVector,
                  pending: &mut [Option<Matrix2>],
                  pos: usize|
     -> Result<()> {
        for (r, &w) in readouts.iter().zip(&weights) {
            if r.position == pos && w != 0.0 {
                flush(psi, lambda, pending, r.qubit)?;
                lambda.add_projected_one(w, r.qubit, psi)?;
            }
        }
        Ok(())
    };
    inject(&mut psi, &mut lambda, &mut pending, program.len())?;

    let pauli_y = ry_generator();
    let pauli_z = rz_generator();
    for (pos, gate) in program.iter().enumerate().rev() {
        match *gate {
            GateOp::Ry { qubit, angle } => {
                if let Some(k) = angle.param() {
                    flush(&mut psi, &mut lambda, &mut pending, qubit)?;
                    grad[k] += lambda.expect_y(qubit, &psi)?.im;
                }
                queue(
                    &mut pending,
                    qubit,
                    ry_matrix(-angle.resolve(features, params)),
                );
            }
            GateOp::Rz { qubit, angle } => {
                if let Some(k) = angle.param() {
                    flush(&mut psi, &mut lambda, &mut pending, qubit)?;
                    grad[k] += lambda.expect_z(qubit, &psi)?.im;
                }
                queue(
                    &mut pending,
                    qubit,
                    rz_matrix(-angle.resolve(features, params)),
                );
            }
            GateOp::Rot { qubit, angles } => {
                let [alpha, beta, gamma] = angles.map(|a| a.resolve(features, params));
                if angles.iter().any(|a| a.param().is_some()) {
                    flush(&mut psi, &mut lambda, &mut pending, qubit)?;
                    // each generator moved to the output side of the whole gate:
                    // Z, Rz(g) Y Rz(g)^+, Rz(g) Ry(b) Z Ry(b)^+ Rz(g)^+
                    let rz_g = rz_matrix(gamma);
                    let outer = matmul2(&rz_g, &ry_matrix(beta));
                    let g_beta = matmul2(&matmul2(&rz_g, &pauli_y), &dagger2(&rz_g));
                    let g_alpha = matmul2(&matmul2(&outer, &pauli_z), &dagger2(&outer));
                    let corr = lambda.pair_correlations(qubit, &psi)?;
                    for (src, gen) in angles.iter().zip([&g_alpha, &g_beta, &pauli_z]) {
                        if let Some(k) = src.param() {
                            grad[k] += contract2(gen, &corr).im;
                        }
                    }
                }
                queue(
                    &mut pending,
                    qubit,
                    dagger2(&rot_matrix(alpha, beta, gamma)),
                );
            }
            GateOp::Cnot { control, target } => {
                flush(&mut psi, &mut lambda, &mut pending, control)?;
                flush(&mut psi, &mut lambda, &mut pending, target)?;
                psi.apply_cnot(control, target)?;
                lambda.apply_cnot(control, target)?;
            }
        }
        inject(&mut psi, &mut lambda, &mut pending, pos)?;
    }
    Ok((probs, grad))
}

fn ry_generator() -> Matrix2 {
    let z = Complex64::new(0.0, 0.0);
    [
        [z, Complex64::new(0.0, -1.0)],
        [Complex64::new(0.0, 1.0), z],
    ]
}

fn rz_generator() -> Matrix2 {
    let z = Complex64::new(0.0, 0.0);
    [
        [Complex64::new(1.0, 0.0), z],
        [z, Complex64::new(-1.0, 0.0)],
    ]
}

/// Full probability Jacobian by reverse mode, one adjoint sweep per classifier.
pub fn grad_probs(model: &ModelSpec, features: &[f64], params: &[f64]) -> Result<ProbJacobian> {
    let m = model.n_classifiers();
    let mut jac = ProbJacobian::zeros(m, model.n_params());
    let mut weights = vec![0.0; m];
    for c in 0..m {
        weights.fill(0.0);
        weights[c] = 1.0;
        let (_, g) = vjp(model, features, params, &weights)?;
        jac.row_mut(c).copy_from_slice(&g);
    }
    Ok(jac)
}

fn column_by<F>(model: &ModelSpec, params: &[f64], mut column: F) -> Result<ProbJacobian>
where
    F: FnMut(&mut Vec<f64>, usize) -> Result<Vec<f64>>,
{
    let mut jac = ProbJacobian::zeros(model.n_classifiers(), model.n_params());
    let mut work = params.to_vec();
    for k in 0..params.len() {
        let col = column(&mut work, k)?;
        for (c, v) in col.into_iter().enumerate() {
            jac.row_mut(c)[k] = v;
        }
    }
    Ok(jac)
}

/// Two-point shift rule, `[p(theta + pi/2) - p(theta - pi/2)] / 2`, per angle.
pub fn grad_param_shift(
    model: &ModelSpec,
    features: &[f64],
    params: &[f64],
) -> Result<ProbJacobian> {
    model.check_inputs(features, params)?;
    column_by(model, params, |work, k| {
        let orig = work[k];
        work[k] = orig + FRAC_PI_2;
        let plus = model.forward(features, work)?;
        work[k] = orig - FRAC_PI_2;
        let minus = model.forward(features, work)?;
        work[k] = orig;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| 0.5 * (a - b))
            .collect())
    })
}

/// Central differences with step `h`, which must lie in `[1e-6, 1e-2]`.
pub fn grad_finite_diff(
    model: &ModelSpec,
    features: &[f64],
    params: &[f64],
    h: f64,
) -> Result<ProbJacobian> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::config(format!(
            "finite-difference step {h} outside [1e-6, 1e-2]"
        )));
    }
    model.check_inputs(features, params)?;
    column_by(model, params, |work, k| {
        let orig = work[k];
        work[k] = orig + h;
        let plus = model.forward(features, work)?;
        work[k] = orig - h;
        let minus = model.forward(features, work)?;
        work[k] = orig;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    })
}
