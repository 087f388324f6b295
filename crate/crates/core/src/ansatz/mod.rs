//! Circuit compilation for the layered classifier families.
//!
//! Every layer applies, in order, an `R_y` data encoding on each active qubit,
//! a trainable `Rot` on each active qubit, and the shape's CNOT entangler over
//! the active qubits. Layers are 1-based in public-facing names and reports and
//! 0-based in indices.

mod entangler;
mod forward;

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{AngleSource, GateOp, MAX_QUBITS};

pub use entangler::build_entangler;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzShape {
    Staircase,
    VShape,
    /// Staircase on odd layers, V-shape on even layers (1-based).
    Alternating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// One readout of qubit 0 per classifier, each on its own truncated circuit.
    Layerwise,
    /// Qubit 0 is copied onto a fresh ancilla after each classifier layer.
    Ancilla,
    /// Qubit 0 is measured mid-circuit after each classifier layer.
    Blocking,
    /// One qubit is read and dropped after each stage.
    Funnel,
    /// Single end-of-circuit readout of qubit 0.
    Plain,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Layerwise,
        ModelVariant::Ancilla,
        ModelVariant::Blocking,
        ModelVariant::Funnel,
        ModelVariant::Plain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Layerwise => "layerwise",
            ModelVariant::Ancilla => "ancilla",
            ModelVariant::Blocking => "blocking",
            ModelVariant::Funnel => "funnel",
            ModelVariant::Plain => "plain",
        }
    }
}

impl AnsatzShape {
    pub const ALL: [AnsatzShape; 3] = [
        AnsatzShape::Staircase,
        AnsatzShape::VShape,
        AnsatzShape::Alternating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzShape::Staircase => "staircase",
            AnsatzShape::VShape => "vshape",
            AnsatzShape::Alternating => "alternating",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for AnsatzShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model variant `{s}`")))
    }
}

impl FromStr for AnsatzShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AnsatzShape::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ansatz shape `{s}`")))
    }
}

/// A trainable angle: `layer` is 0-based, `component` is 0 = alpha, 1 = beta, 2 = gamma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamSlot {
    pub layer: usize,
    pub qubit: usize,
    pub component: usize,
}

/// Where classifier outputs are read: the marginal of `qubit` after the first
/// `position` program instructions. `collapse` marks a mid-circuit measurement
/// whose outcome conditions the rest of the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Readout {
    pub qubit: usize,
    pub position: usize,
    pub collapse: bool,
}

/// A compiled classifier circuit for one (variant, shape, depth) triple.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    variant: ModelVariant,
    shape: AnsatzShape,
    n_data_qubits: usize,
    depth: usize,
    n_total_qubits: usize,
    program: Vec<GateOp>,
    layer_ops: Vec<Range<usize>>,
    active: Vec<Vec<usize>>,
    readouts: Vec<Readout>,
    slots: Vec<ParamSlot>,
    layer_params: Vec<Range<usize>>,
    /// Blocking circuits are evaluated analytically through their ancilla twin.
    analytic: Option<Box<ModelSpec>>,
}

/// Active qubits of 1-based `layer` in a funnel circuit.
fn funnel_active(n: usize, layer: usize) -> Vec<usize> {
    let first = layer.saturating_sub(2);
    (first..n).collect()
}

pub fn build_model(
    variant: ModelVariant,
    shape: AnsatzShape,
    n_data_qubits: usize,
    depth: usize,
) -> Result<ModelSpec> {
    if depth < 2 {
        return Err(Error::config(format!(
            "depth {depth} leaves no classifier; at least 2 layers are required"
        )));
    }
    if n_data_qubits == 0 {
        return Err(Error::config("at least one data qubit is required"));
    }
    let m = depth - 1;
    if variant == ModelVariant::Funnel && depth - 2 >= n_data_qubits {
        return Err(Error::config(format!(
            "funnel depth {depth} drops every one of {n_data_qubits} qubits"
        )));
    }
    let n_total = match variant {
        ModelVariant::Ancilla => n_data_qubits + m,
        _ => n_data_qubits,
    };
    if n_total > MAX_QUBITS {
        return Err(Error::config(format!(
            "{n_total} qubits exceeds the simulator limit of {MAX_QUBITS}"
        )));
    }

    let mut program = Vec::new();
    let mut layer_ops = Vec::with_capacity(depth);
    let mut active_sets = Vec::with_capacity(depth);
    let mut slots = Vec::new();
    let mut layer_params = Vec::with_capacity(depth);
    let mut readouts = Vec::new();

    for layer in 1..=depth {
        let active: Vec<usize> = match variant {
            ModelVariant::Funnel => funnel_active(n_data_qubits, layer),
            _ => (0..n_data_qubits).collect(),
        };
        let op_start = program.len();
        for &q in &active {
            program.push(GateOp::Ry {
                qubit: q,
                angle: AngleSource::Feature(q),
            });
        }
        let param_start = slots.len();
        for &q in &active {
            let base = slots.len();
            for component in 0..3 {
                slots.push(ParamSlot {
                    layer: layer - 1,
                    qubit: q,
                    component,
                });
            }
            program.push(GateOp::Rot {
                qubit: q,
                angles: [
                    AngleSource::Param(base),
                    AngleSource::Param(base + 1),
                    AngleSource::Param(base + 2),
                ],
            });
        }
        program.extend(build_entangler(shape, &active, layer));
        if variant == ModelVariant::Ancilla && layer >= 2 {
            program.push(GateOp::Cnot {
                control: 0,
                target: n_data_qubits + layer - 2,
            });
        }
        layer_ops.push(op_start..program.len());
        layer_params.push(param_start..slots.len());

        if layer >= 2 {
            match variant {
                ModelVariant::Layerwise | ModelVariant::Blocking => readouts.push(Readout {
                    qubit: 0,
                    position: program.len(),
                    collapse: variant == ModelVariant::Blocking,
                }),
                _ => {}
            }
        }
        active_sets.push(active);
    }

    let end = program.len();
    match variant {
        ModelVariant::Ancilla => {
            readouts.extend((0..m).map(|c| Readout {
                qubit: n_data_qubits + c,
                position: end,
                collapse: false,
            }));
        }
        ModelVariant::Funnel => {
            readouts.extend((0..m).map(|c| Readout {
                qubit: c,
                position: end,
                collapse: false,
            }));
        }
        ModelVariant::Plain => readouts.push(Readout {
            qubit: 0,
            position: end,
            collapse: false,
        }),
        ModelVariant::Layerwise | ModelVariant::Blocking => {}
    }

    let analytic = match variant {
        ModelVariant::Blocking => Some(Box::new(build_model(
            ModelVariant::Ancilla,
            shape,
            n_data_qubits,
            depth,
        )?)),
        _ => None,
    };

    for op in &program {
        op.validate(n_total)?;
    }

    Ok(ModelSpec {
        variant,
        shape,
        n_data_qubits,
        depth,
        n_total_qubits: n_total,
        program,
        layer_ops,
        active: active_sets,
        readouts,
        slots,
        layer_params,
        analytic,
    })
}

impl ModelSpec {
    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn shape(&self) -> AnsatzShape {
        self.shape
    }

    pub fn n_data_qubits(&self) -> usize {
        self.n_data_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_total_qubits(&self) -> usize {
        self.n_total_qubits
    }

    pub fn program(&self) -> &[GateOp] {
        &self.program
    }

    /// Instruction range of each layer (0-based), including any ancilla CNOT.
    pub fn layer_ops(&self) -> &[Range<usize>] {
        &self.layer_ops
    }

    pub fn active_qubits(&self, layer: usize) -> &[usize] {
        &self.active[layer]
    }

    pub fn readouts(&self) -> &[Readout] {
        &self.readouts
    }

    pub fn n_classifiers(&self) -> usize {
        self.readouts.len()
    }

    pub fn n_params(&self) -> usize {
        self.slots.len()
    }

    /// Parameter count of each layer.
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layer_params.iter().map(|r| r.len()).collect()
    }

    /// Flat parameter range of 0-based `layer`.
    pub fn layer_params(&self, layer: usize) -> Range<usize> {
        self.layer_params[layer].clone()
    }

    pub fn param_slot(&self, index: usize) -> Option<ParamSlot> {
        self.slots.get(index).copied()
    }

    /// Flat index of a rotation component, `None` for slots this layout drops.
    pub fn param_index(&self, layer: usize, qubit: usize, component: usize) -> Option<usize> {
        if component >= 3 || layer >= self.depth {
            return None;
        }
        let active = &self.active[layer];
        let pos = active.iter().position(|&q| q == qubit)?;
        Some(self.layer_params[layer].start + 3 * pos + component)
    }

    /// The circuit used for exact probabilities. Identical to `self` except for
    /// Blocking, whose mid-circuit measurements are replaced by ancilla copies.
    pub fn analytic_model(&self) -> &ModelSpec {
        self.analytic.as_deref().unwrap_or(self)
    }

    /// One line per instruction, with readouts listed where they occur.
    pub fn circuit_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# variant={} shape={} data_qubits={} depth={} total_qubits={} params={} classifiers={}",
            self.variant,
            self.shape,
            self.n_data_qubits,
            self.depth,
            self.n_total_qubits,
            self.n_params(),
            self.n_classifiers()
        );
        let emit_readouts = |out: &mut String, pos: usize| {
            for (c, r) in self.readouts.iter().enumerate() {
                if r.position == pos {
                    let kind = if r.collapse { "MEASURE" } else { "READOUT" };
                    let _ = writeln!(out, "{kind} q{} c{}", r.qubit, c + 1);
                }
            }
        };
        for (layer, ops) in self.layer_ops.iter().enumerate() {
            let _ = writeln!(out, "LAYER {}", layer + 1);
            for pos in ops.clone() {
                let _ = writeln!(out, "{}", self.program[pos]);
                if pos + 1 != self.program.len() {
                    emit_readouts(&mut out, pos + 1);
                }
            }
        }
        emit_readouts(&mut out, self.program.len());
        out
    }
}
