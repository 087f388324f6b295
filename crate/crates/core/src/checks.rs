//! Self-verification batteries: gradient agreement across three methods,
//! and the structural equivalences between classifier designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::ansatz::{build_model, AnsatzShape, ModelSpec, ModelVariant};
use crate::autodiff::{grad_finite_diff, grad_param_shift, grad_probs, ProbJacobian};
use crate::error::Result;
use crate::sim::StateVector;

pub const SHIFT_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-4;
pub const EXACT_TOL: f64 = 1e-12;
pub const TV_TOL: f64 = 0.01;

/// Random features in `[0, pi]` and parameters from `N(0, 1)`-like spread.
pub fn random_inputs<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let x = (0..model.n_data_qubits())
        .map(|_| rng.random_range(0.0..PI))
        .collect();
    let p = (0..model.n_params())
        .map(|_| rng.random_range(-PI..PI))
        .collect();
    (x, p)
}

/// Outcome of the gradient battery for one (variant, shape, depth) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCell {
    pub variant: ModelVariant,
    pub shape: AnsatzShape,
    pub depth: usize,
    pub max_shift_dev: f64,
    pub max_fd_dev: f64,
    /// Flat index of the parameter with the largest deviation from parameter shift.
    pub worst_param: usize,
    pub worst_classifier: usize,
}

impl GradCell {
    pub fn passed(&self) -> bool {
        self.max_shift_dev <= SHIFT_TOL && self.max_fd_dev <= FD_TOL
    }

    pub fn report_line(&self) -> String {
        format!(
            "{} {:<9} {:<11} depth={} shift_dev={:.3e} fd_dev={:.3e} worst=c{}/p{}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.variant.name(),
            self.shape.name(),
            self.depth,
            self.max_shift_dev,
            self.max_fd_dev,
            self.worst_classifier,
            self.worst_param
        )
    }
}

pub type GradFn<'a> = dyn Fn(&ModelSpec, &[f64], &[f64]) -> Result<ProbJacobian> + Sync + 'a;

/// Compares `grad` with parameter shift and with central differences over
/// every variant, shape and depth in `depths`, `draws` random inputs each.
pub fn gradcheck_battery(
    n_qubits: usize,
    depths: std::ops::RangeInclusive<usize>,
    draws: usize,
    seed: u64,
    grad: &GradFn<'_>,
) -> Result<Vec<GradCell>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    for variant in ModelVariant::ALL {
        for shape in AnsatzShape::ALL {
            for depth in depths.clone() {
                if variant == ModelVariant::Funnel && depth - 2 >= n_qubits {
                    continue;
                }
                let model = build_model(variant, shape, n_qubits, depth)?;
                let mut cell = GradCell {
                    variant,
                    shape,
                    depth,
                    max_shift_dev: 0.0,
                    max_fd_dev: 0.0,
                    worst_param: 0,
                    worst_classifier: 0,
                };
                for _ in 0..draws {
                    let (x, p) = random_inputs(&model, &mut rng);
                    let candidate = grad(&model, &x, &p)?;
                    let (d, c, k) = candidate.max_abs_diff(&grad_param_shift(&model, &x, &p)?);
                    if d > cell.max_shift_dev || d.is_nan() {
                        cell.max_shift_dev = d;
                        cell.worst_classifier = c;
                        cell.worst_param = k;
                    }
                    let (f, _, _) =
                        candidate.max_abs_diff(&grad_finite_diff(&model, &x, &p, FD_STEP)?);
                    cell.max_fd_dev = cell.max_fd_dev.max(f);
                }
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

/// The shipped reverse-mode gradient.
pub fn default_grad(model: &ModelSpec, x: &[f64], p: &[f64]) -> Result<ProbJacobian> {
    grad_probs(model, x, p)
}

/// Exact class-1 probabilities of a mid-circuit-measurement program by
/// explicit projector arithmetic: every outcome history is carried as an
/// unnormalized branch `P_b ... U psi`, and a readout's probability is the
/// summed squared norm of its branches projected onto 1.
pub fn blocking_projector_oracle(model: &ModelSpec, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    model.check_inputs(x, p)?;
    let mut branches = vec![StateVector::new_zero_state(model.n_total_qubits())?];
    let mut probs = Vec::with_capacity(model.n_classifiers());
    let mut pos = 0;
    for r in model.readouts() {
        while pos < r.position {
            for b in &mut branches {
                b.apply_gate(&model.program()[pos], x, p)?;
            }
            pos += 1;
        }
        let mut next = Vec::with_capacity(branches.len() * 2);
        let mut p1 = 0.0;
        for b in branches {
            let mut one = b.clone();
            one.project(r.qubit, 1)?;
            p1 += one.norm_sqr();
            let mut zero = b;
            zero.project(r.qubit, 0)?;
            next.push(zero);
            next.push(one);
        }
        branches = next;
        probs.push(p1);
    }
    Ok(probs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }

    pub fn report_line(&self) -> String {
        format!(
            "{} {} max_dev={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Analytic ancilla readouts against the projector oracle on the
/// measurement-based program, `cases` draws per depth and shape.
pub fn check_ancilla_blocking_exact(
    n_qubits: usize,
    depths: std::ops::RangeInclusive<usize>,
    cases: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for depth in depths {
        for shape in AnsatzShape::ALL {
            let ancilla = build_model(ModelVariant::Ancilla, shape, n_qubits, depth)?;
            let blocking = build_model(ModelVariant::Blocking, shape, n_qubits, depth)?;
            let mut worst = 0.0f64;
            for _ in 0..cases {
                let (x, p) = random_inputs(&ancilla, &mut rng);
                let a = ancilla.forward(&x, &p)?;
                let oracle = blocking_projector_oracle(&blocking, &x, &p)?;
                worst = worst.max(max_dev(&a, &oracle));
                worst = worst.max(max_dev(&blocking.forward(&x, &p)?, &oracle));
            }
            lines.push(CheckLine {
                name: format!("ancilla=blocking exact {} depth={depth}", shape.name()),
                value: worst,
                tolerance: EXACT_TOL,
            });
        }
    }
    Ok(lines)
}

/// Per-classifier total-variation distance between sampled mid-circuit
/// trajectories and the ancilla marginals.
pub fn check_blocking_trajectories(
    n_qubits: usize,
    depth: usize,
    shape: AnsatzShape,
    shots: u64,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ancilla = build_model(ModelVariant::Ancilla, shape, n_qubits, depth)?;
    let blocking = build_model(ModelVariant::Blocking, shape, n_qubits, depth)?;
    let (x, p) = random_inputs(&ancilla, &mut rng);
    let exact = ancilla.forward(&x, &p)?;
    let sampled = blocking.forward_sampled(&x, &p, shots, &mut rng)?;
    Ok(exact
        .iter()
        .zip(&sampled)
        .enumerate()
        .map(|(c, (e, s))| CheckLine {
            name: format!(
                "blocking trajectories {} depth={depth} classifier={} shots={shots} tv",
                shape.name(),
                c + 1
            ),
            value: (e - s).abs(),
            tolerance: TV_TOL,
        })
        .collect())
}

/// A funnel classifier's end-of-circuit marginal equals its marginal right
/// after its own stage.
pub fn check_funnel_locality(
    n_qubits: usize,
    depth: usize,
    cases: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for shape in AnsatzShape::ALL {
        let model = build_model(ModelVariant::Funnel, shape, n_qubits, depth)?;
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (x, p) = random_inputs(&model, &mut rng);
            let end = model.forward(&x, &p)?;
            let probes: Vec<(usize, usize)> = model
                .readouts()
                .iter()
                .enumerate()
                .map(|(c, r)| (r.qubit, model.layer_ops()[c + 1].end))
                .collect();
            let (early, _) = model.probe(&x, &p, &probes)?;
            worst = worst.max(max_dev(&end, &early));
        }
        lines.push(CheckLine {
            name: format!("funnel locality {} depth={depth}", shape.name()),
            value: worst,
            tolerance: EXACT_TOL,
        });
    }
    Ok(lines)
}

/// Layerwise classifier `c` equals the single output of the plain model
/// holding the first `c + 2` layers.
pub fn check_layerwise_truncation(
    n_qubits: usize,
    depth: usize,
    cases: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for shape in AnsatzShape::ALL {
        let model = build_model(ModelVariant::Layerwise, shape, n_qubits, depth)?;
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (x, p) = random_inputs(&model, &mut rng);
            let probs = model.forward(&x, &p)?;
            for (c, &pc) in probs.iter().enumerate() {
                let layers = c + 2;
                let plain = build_model(ModelVariant::Plain, shape, n_qubits, layers)?;
                let prefix = &p[..model.layer_params(layers - 1).end];
                let q = plain.forward(&x, prefix)?[0];
                worst = worst.max((pc - q).abs());
            }
        }
        lines.push(CheckLine {
            name: format!("layerwise truncation {} depth={depth}", shape.name()),
            value: worst,
            tolerance: EXACT_TOL,
        });
    }
    Ok(lines)
}

/// Everything the equivalence battery runs.
pub fn equivalence_battery(
    n_qubits: usize,
    cases: usize,
    shots: u64,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let mut lines = check_ancilla_blocking_exact(n_qubits, 2..=6, cases, seed)?;
    for depth in 2..=6 {
        lines.extend(check_blocking_trajectories(
            n_qubits,
            depth,
            AnsatzShape::VShape,
            shots,
            seed + depth as u64,
        )?);
    }
    lines.extend(check_funnel_locality(
        n_qubits,
        6.min(n_qubits + 1),
        cases,
        seed,
    )?);
    lines.extend(check_layerwise_truncation(n_qubits, 6, cases, seed)?);
    Ok(lines)
}
