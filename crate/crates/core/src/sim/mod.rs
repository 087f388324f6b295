//! Exact statevector simulation.
//!
//! Amplitude index `k` with binary expansion `b0 b1 ... b(n-1)` (b0 most
//! significant) is the basis state `|b0 b1 ... b(n-1)>`, so qubit 0 is the
//! leftmost ket and owns the highest bit of the index. Every module that
//! builds or reads circuits relies on this ordering.

mod gate;
mod measure;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use gate::{AngleSource, GateOp};
pub use measure::{sample_bernoulli, sample_multinomial, Histogram};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 20;

/// A 2x2 complex matrix in row-major order.
pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense amplitudes of an `n`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn new_zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the vector is
    /// taken as is, without renormalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::config(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "{n_qubits} qubits exceeds {MAX_QUBITS}"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Resets to `|0...0>` without reallocating.
    pub fn reset(&mut self) {
        self.amps.fill(ZERO);
        self.amps[0] = ONE;
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    #[inline]
    fn check(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Index stride of `qubit` under the MSB-first convention.
    #[inline]
    fn stride(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Visits every amplitude pair `(i0, i1)` that differs only in `qubit`,
    /// with `i0` holding bit 0.
    #[inline]
    fn for_pairs(&mut self, qubit: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = self.stride(qubit);
        for block in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    /// Applies an arbitrary 2x2 matrix to `qubit`.
    pub fn apply_matrix(&mut self, qubit: usize, m: &Matrix2) -> Result<()> {
        self.check(qubit)?;
        let [[m00, m01], [m10, m11]] = *m;
        self.for_pairs(qubit, |a, b| {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        });
        Ok(())
    }

    /// `R_y(theta) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check(qubit)?;
        let (s, c) = (0.5 * theta).sin_cos();
        self.for_pairs(qubit, |a, b| {
            let (x, y) = (*a, *b);
            *a = x * c - y * s;
            *b = x * s + y * c;
        });
        Ok(())
    }

    /// `R_z(phi) = diag(e^{-i phi/2}, e^{i phi/2})`.
    pub fn apply_rz(&mut self, qubit: usize, phi: f64) -> Result<()> {
        self.check(qubit)?;
        let (s, c) = (0.5 * phi).sin_cos();
        let lo = Complex64::new(c, -s);
        let hi = Complex64::new(c, s);
        self.for_pairs(qubit, |a, b| {
            *a *= lo;
            *b *= hi;
        });
        Ok(())
    }

    /// `Rot(alpha, beta, gamma) = R_z(gamma) R_y(beta) R_z(alpha)`, applied as
    /// one fused matrix.
    pub fn apply_rot(&mut self, qubit: usize, alpha: f64, beta: f64, gamma: f64) -> Result<()> {
        self.apply_matrix(qubit, &rot_matrix(alpha, beta, gamma))
    }

    /// Flips `target` on every basis state whose `control` bit is 1.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check(control)?;
        self.check(target)?;
        if control == target {
            return Err(Error::config(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        let (lo, hi) = (cmask.min(tmask), cmask.max(tmask));
        // runs of `lo` consecutive indices share every bit at or above `lo`
        for outer in (0..self.amps.len()).step_by(2 * hi) {
            for run in (outer..outer + hi).step_by(2 * lo) {
                let a = run + cmask;
                let (left, right) = self.amps.split_at_mut(a + tmask);
                left[a..a + lo].swap_with_slice(&mut right[..lo]);
            }
        }
        Ok(())
    }

    /// `S[a][b] = sum over pairs of conj(self_a) * other_b`, where `a`, `b`
    /// are the values of `qubit`. Any single-qubit operator `M` then gives
    /// `<self| M |other> = sum_ab M[a][b] S[a][b]`.
    pub fn pair_correlations(&self, qubit: usize, other: &StateVector) -> Result<Matrix2> {
        self.check(qubit)?;
        let stride = self.stride(qubit);
        let mut s = [[ZERO; 2]; 2];
        for (l, r) in self
            .amps
            .chunks_exact(2 * stride)
            .zip(other.amps.chunks_exact(2 * stride))
        {
            let (l0, l1) = l.split_at(stride);
            let (r0, r1) = r.split_at(stride);
            for i in 0..stride {
                let (a0, a1) = (l0[i].conj(), l1[i].conj());
                s[0][0] += a0 * r0[i];
                s[0][1] += a0 * r1[i];
                s[1][0] += a1 * r0[i];
                s[1][1] += a1 * r1[i];
            }
        }
        Ok(s)
    }

    /// Applies a circuit instruction, resolving its angle sources.
    pub fn apply_gate(&mut self, gate: &GateOp, features: &[f64], params: &[f64]) -> Result<()> {
        match *gate {
            GateOp::Ry { qubit, angle } => self.apply_ry(qubit, angle.resolve(features, params)),
            GateOp::Rz { qubit, angle } => self.apply_rz(qubit, angle.resolve(features, params)),
            GateOp::Rot { qubit, angles } => self.apply_rot(
                qubit,
                angles[0].resolve(features, params),
                angles[1].resolve(features, params),
                angles[2].resolve(features, params),
            ),
            GateOp::Cnot { control, target } => self.apply_cnot(control, target),
        }
    }

    /// Applies the inverse of `gate`.
    pub fn apply_gate_inverse(
        &mut self,
        gate: &GateOp,
        features: &[f64],
        params: &[f64],
    ) -> Result<()> {
        match *gate {
            GateOp::Ry { qubit, angle } => self.apply_ry(qubit, -angle.resolve(features, params)),
            GateOp::Rz { qubit, angle } => self.apply_rz(qubit, -angle.resolve(features, params)),
            GateOp::Rot { qubit, angles } => {
                let [a, b, g] = angles.map(|s| s.resolve(features, params));
                self.apply_rz(qubit, -g)?;
                self.apply_ry(qubit, -b)?;
                self.apply_rz(qubit, -a)
            }
            GateOp::Cnot { control, target } => self.apply_cnot(control, target),
        }
    }

    /// Probability that `qubit` reads 1.
    pub fn marginal_prob_one(&self, qubit: usize) -> Result<f64> {
        self.check(qubit)?;
        let stride = self.stride(qubit);
        let p: f64 = self
            .amps
            .chunks_exact(2 * stride)
            .flat_map(|block| &block[stride..])
            .map(|a| a.norm_sqr())
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    /// Zeroes every amplitude whose `qubit` bit differs from `outcome`,
    /// leaving the (unnormalized) projected vector.
    pub fn project(&mut self, qubit: usize, outcome: u8) -> Result<()> {
        self.check(qubit)?;
        self.for_pairs(qubit, |a, b| {
            if outcome == 0 {
                *b = ZERO;
            } else {
                *a = ZERO;
            }
        });
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, w: f64, other: &StateVector) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * w;
        }
    }

    /// `self += w * P1(qubit) other`, where `P1` projects onto bit value 1.
    pub fn add_projected_one(&mut self, w: f64, qubit: usize, other: &StateVector) -> Result<()> {
        self.check(qubit)?;
        let stride = self.stride(qubit);
        for (dst, src) in self
            .amps
            .chunks_exact_mut(2 * stride)
            .zip(other.amps.chunks_exact(2 * stride))
        {
            for (a, b) in dst[stride..].iter_mut().zip(&src[stride..]) {
                *a += b * w;
            }
        }
        Ok(())
    }

    /// `<self| Z_qubit |other>`.
    pub fn expect_z(&self, qubit: usize, other: &StateVector) -> Result<Complex64> {
        self.check(qubit)?;
        let stride = self.stride(qubit);
        let mut acc = ZERO;
        for (l, r) in self
            .amps
            .chunks_exact(2 * stride)
            .zip(other.amps.chunks_exact(2 * stride))
        {
            for i in 0..stride {
                acc += l[i].conj() * r[i] - l[stride + i].conj() * r[stride + i];
            }
        }
        Ok(acc)
    }

    /// `<self| Y_qubit |other>`.
    pub fn expect_y(&self, qubit: usize, other: &StateVector) -> Result<Complex64> {
        self.check(qubit)?;
        let stride = self.stride(qubit);
        let mut acc = ZERO;
        for (l, r) in self
            .amps
            .chunks_exact(2 * stride)
            .zip(other.amps.chunks_exact(2 * stride))
        {
            for i in 0..stride {
                // Y|0> = i|1>, Y|1> = -i|0>
                let (r0, r1) = (r[i], r[stride + i]);
                acc += l[i].conj() * Complex64::new(r1.im, -r1.re)
                    + l[stride + i].conj() * Complex64::new(-r0.im, r0.re);
            }
        }
        Ok(acc)
    }
}

pub fn ry_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (0.5 * theta).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(phi: f64) -> Matrix2 {
    let (s, c) = (0.5 * phi).sin_cos();
    [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]]
}

pub fn matmul2(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `R_z(gamma) R_y(beta) R_z(alpha)` as a single matrix.
pub fn rot_matrix(alpha: f64, beta: f64, gamma: f64) -> Matrix2 {
    matmul2(
        &rz_matrix(gamma),
        &matmul2(&ry_matrix(beta), &rz_matrix(alpha)),
    )
}

/// Conjugate transpose.
pub fn dagger2(m: &Matrix2) -> Matrix2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

/// `sum_ab m[a][b] s[a][b]`.
pub fn contract2(m: &Matrix2, s: &Matrix2) -> Complex64 {
    m[0][0] * s[0][0] + m[0][1] * s[0][1] + m[1][0] * s[1][0] + m[1][1] * s[1][1]
}

/// Matrix of a single-qubit instruction, or `None` for CNOT.
pub fn gate_matrix(gate: &GateOp, features: &[f64], params: &[f64]) -> Option<(usize, Matrix2)> {
    match *gate {
        GateOp::Ry { qubit, angle } => Some((qubit, ry_matrix(angle.resolve(features, params)))),
        GateOp::Rz { qubit, angle } => Some((qubit, rz_matrix(angle.resolve(features, params)))),
        GateOp::Rot { qubit, angles } => {
            let [a, b, g] = angles.map(|s| s.resolve(features, params));
            Some((qubit, rot_matrix(a, b, g)))
        }
        GateOp::Cnot { .. } => None,
    }
}
