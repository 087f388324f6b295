use super::AnsatzShape;
use crate::sim::GateOp;

fn staircase(active: &[usize]) -> impl Iterator<Item = GateOp> + '_ {
    (0..active.len().saturating_sub(1))
        .rev()
        .map(move |i| GateOp::Cnot {
            control: active[i + 1],
            target: active[i],
        })
}

fn descent(active: &[usize]) -> impl Iterator<Item = GateOp> + '_ {
    (0..active.len().saturating_sub(1)).map(move |i| GateOp::Cnot {
        control: active[i],
        target: active[i + 1],
    })
}

/// CNOT pattern of one layer over the ordered `active` qubits; `layer` is 1-based.
///
/// Staircase climbs from the last qubit to the first. V-shape descends from the
/// first to the last and then climbs back. Fewer than two active qubits yield
/// no gates.
pub fn build_entangler(shape: AnsatzShape, active: &[usize], layer: usize) -> Vec<GateOp> {
    if active.len() < 2 {
        return Vec::new();
    }
    let shape = match shape {
        AnsatzShape::Alternating if layer % 2 == 1 => AnsatzShape::Staircase,
        AnsatzShape::Alternating => AnsatzShape::VShape,
        s => s,
    };
    match shape {
        AnsatzShape::Staircase => staircase(active).collect(),
        _ => descent(active).chain(staircase(active)).collect(),
    }
}
