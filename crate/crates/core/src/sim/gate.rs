use std::fmt;

use serde::{Deserialize, Serialize};

/// Where a rotation angle comes from at execution time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AngleSource {
    /// A literal angle in radians.
    Fixed(f64),
    /// Index into the input feature vector (data encoding).
    Feature(usize),
    /// Index into the flat trainable parameter vector.
    Param(usize),
}

impl AngleSource {
    #[inline]
    pub fn resolve(self, features: &[f64], params: &[f64]) -> f64 {
        match self {
            AngleSource::Fixed(v) => v,
            AngleSource::Feature(i) => features[i],
            AngleSource::Param(i) => params[i],
        }
    }

    pub fn param(self) -> Option<usize> {
        match self {
            AngleSource::Param(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for AngleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleSource::Fixed(v) => write!(f, "{v}"),
            AngleSource::Feature(i) => write!(f, "x{i}"),
            AngleSource::Param(i) => write!(f, "p{i}"),
        }
    }
}

/// One instruction of the supported gate set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Ry {
        qubit: usize,
        angle: AngleSource,
    },
    Rz {
        qubit: usize,
        angle: AngleSource,
    },
    /// `R_z(angles[2]) R_y(angles[1]) R_z(angles[0])`.
    Rot {
        qubit: usize,
        angles: [AngleSource; 3],
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Ry { qubit, .. } | GateOp::Rz { qubit, .. } | GateOp::Rot { qubit, .. } => {
                vec![qubit]
            }
            GateOp::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn touches(&self, q: usize) -> bool {
        self.qubits().contains(&q)
    }

    /// Checks the structural invariants against a register size.
    pub fn validate(&self, n_qubits: usize) -> crate::Result<()> {
        if let Some(&q) = self.qubits().iter().find(|&&q| q >= n_qubits) {
            return Err(crate::Error::QubitIndex { index: q, n_qubits });
        }
        if let GateOp::Cnot { control, target } = *self {
            if control == target {
                return Err(crate::Error::config(format!(
                    "CNOT with control == target == {control}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateOp::Ry { qubit, angle } => write!(f, "RY q{qubit} {angle}"),
            GateOp::Rz { qubit, angle } => write!(f, "RZ q{qubit} {angle}"),
            GateOp::Rot { qubit, angles } => {
                write!(f, "ROT q{qubit} {} {} {}", angles[0], angles[1], angles[2])
            }
            GateOp::Cnot { control, target } => write!(f, "CNOT q{control} q{target}"),
        }
    }
}
