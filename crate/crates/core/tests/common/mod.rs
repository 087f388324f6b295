//! Independent oracles shared by the integration tests. Nothing here calls the
//! simulator kernels: states are plain `Vec<Complex64>` and gates are built
//! from explicit Kronecker products or per-row index arithmetic.

#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64;
use qfl_core::data::ClientDataset;
use qfl_core::sim::{AngleSource, GateOp};
use qfl_core::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;
pub type Dense = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn oracle_ry(theta: f64) -> [[C; 2]; 2] {
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn oracle_rz(phi: f64) -> [[C; 2]; 2] {
    let z = c(0.0, 0.0);
    [
        [C::from_polar(1.0, -phi / 2.0), z],
        [z, C::from_polar(1.0, phi / 2.0)],
    ]
}

pub fn mat2_mul(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `Rz(g) Ry(b) Rz(a)`.
pub fn oracle_rot(a: f64, b: f64, g: f64) -> [[C; 2]; 2] {
    mat2_mul(&oracle_rz(g), &mat2_mul(&oracle_ry(b), &oracle_rz(a)))
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| c(f64::from(u8::from(i == j)), 0.0))
                .collect()
        })
        .collect()
}

/// `I ⊗ ... ⊗ m ⊗ ... ⊗ I` with qubit 0 as the leftmost factor.
pub fn dense_single(n: usize, qubit: usize, m: &[[C; 2]; 2]) -> Dense {
    let m: Dense = m.iter().map(|r| r.to_vec()).collect();
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        let factor = if q == qubit { m.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

/// `|0><0| ⊗ I + |1><1| ⊗ X` on (control, target), embedded by projector sums.
pub fn dense_cnot(n: usize, control: usize, target: usize) -> Dense {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let p0 = [[o, z], [z, z]];
    let p1 = [[z, z], [z, o]];
    let x = [[z, o], [o, z]];
    let mut a = vec![vec![o]];
    let mut b = vec![vec![o]];
    for q in 0..n {
        let (fa, fb): (Dense, Dense) = if q == control {
            (
                p0.iter().map(|r| r.to_vec()).collect(),
                p1.iter().map(|r| r.to_vec()).collect(),
            )
        } else if q == target {
            (identity(2), x.iter().map(|r| r.to_vec()).collect())
        } else {
            (identity(2), identity(2))
        };
        a = kron(&a, &fa);
        b = kron(&b, &fb);
    }
    a.iter()
        .zip(&b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn matvec(m: &Dense, v: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<C> {
    let v: Vec<C> = (0..1usize << n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

fn bit(n: usize, index: usize, qubit: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Row `i` of `I ⊗ .. ⊗ m ⊗ .. ⊗ I` has two nonzeros, at the column indices
/// that agree with `i` everywhere except possibly `qubit`.
pub fn rowwise_single(n: usize, qubit: usize, m: &[[C; 2]; 2], v: &[C]) -> Vec<C> {
    let mask = 1 << (n - 1 - qubit);
    (0..v.len())
        .map(|i| {
            let r = bit(n, i, qubit);
            m[r][0] * v[i & !mask] + m[r][1] * v[i | mask]
        })
        .collect()
}

pub fn rowwise_cnot(n: usize, control: usize, target: usize, v: &[C]) -> Vec<C> {
    let tmask = 1 << (n - 1 - target);
    (0..v.len())
        .map(|i| {
            if bit(n, i, control) == 1 {
                v[i ^ tmask]
            } else {
                v[i]
            }
        })
        .collect()
}

pub fn prob_one(n: usize, v: &[C], qubit: usize) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| bit(n, *i, qubit) == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

fn resolve(a: AngleSource, x: &[f64], p: &[f64]) -> f64 {
    match a {
        AngleSource::Fixed(v) => v,
        AngleSource::Feature(i) => x[i],
        AngleSource::Param(i) => p[i],
    }
}

pub fn oracle_gate(n: usize, gate: &GateOp, x: &[f64], p: &[f64], v: &[C]) -> Vec<C> {
    match *gate {
        GateOp::Ry { qubit, angle } => {
            rowwise_single(n, qubit, &oracle_ry(resolve(angle, x, p)), v)
        }
        GateOp::Rz { qubit, angle } => {
            rowwise_single(n, qubit, &oracle_rz(resolve(angle, x, p)), v)
        }
        GateOp::Rot { qubit, angles } => {
            let [a, b, g] = angles.map(|s| resolve(s, x, p));
            rowwise_single(n, qubit, &oracle_rot(a, b, g), v)
        }
        GateOp::Cnot { control, target } => rowwise_cnot(n, control, target, v),
    }
}

/// Readout probabilities of a non-collapsing program, from the oracle
/// simulator.
pub fn oracle_forward(model: &ModelSpec, x: &[f64], p: &[f64]) -> Vec<f64> {
    let n = model.n_total_qubits();
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    let mut out = vec![0.0; model.n_classifiers()];
    let program = model.program();
    for pos in 0..=program.len() {
        for (slot, r) in out.iter_mut().zip(model.readouts()) {
            if r.position == pos {
                assert!(!r.collapse, "oracle_forward handles unitary programs only");
                *slot = prob_one(n, &v, r.qubit);
            }
        }
        if pos < program.len() {
            v = oracle_gate(n, &program[pos], x, p, &v);
        }
    }
    out
}

/// Classifier marginals of a program with mid-circuit measurements, by
/// enumerating every outcome branch with explicit projectors.
pub fn branching_oracle(model: &ModelSpec, x: &[f64], p: &[f64]) -> Vec<f64> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        model: &ModelSpec,
        x: &[f64],
        p: &[f64],
        v: Vec<C>,
        pos: usize,
        readout: usize,
        weight: f64,
        out: &mut [f64],
    ) {
        let n = model.n_total_qubits();
        let Some(r) = model.readouts().get(readout) else {
            return;
        };
        let mut v = v;
        for gate in &model.program()[pos..r.position] {
            v = oracle_gate(n, gate, x, p, &v);
        }
        let p1 = prob_one(n, &v, r.qubit);
        out[readout] += weight * p1;
        for (outcome, prob) in [(0usize, 1.0 - p1), (1, p1)] {
            if prob < 1e-300 {
                continue;
            }
            let norm = prob.sqrt();
            let projected: Vec<C> = v
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if (i >> (n - 1 - r.qubit)) & 1 == outcome {
                        a / norm
                    } else {
                        c(0.0, 0.0)
                    }
                })
                .collect();
            go(
                model,
                x,
                p,
                projected,
                r.position,
                readout + 1,
                weight * prob,
                out,
            );
        }
    }
    let n = model.n_total_qubits();
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    let mut out = vec![0.0; model.n_classifiers()];
    go(model, x, p, v, 0, 0, 1.0, &mut out);
    out
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Eigenvectors are the columns of the second value.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = cs * vp - sn * vq;
                    row[q] = sn * vp + cs * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// Linearly separable toy data: two features in `[0, pi]`, label set by which
/// side of the diagonal the point falls on, kept away from the boundary.
pub fn toy_dataset(n: usize, n_features: usize, seed: u64) -> ClientDataset {
    let mut r = rng(seed);
    let mut set = ClientDataset::default();
    while set.len() < n {
        let a: f64 = r.random_range(0.0..std::f64::consts::PI);
        let b: f64 = r.random_range(0.0..std::f64::consts::PI);
        if (a - b).abs() < 0.4 {
            continue;
        }
        let mut f = vec![a, b];
        f.resize(n_features, 0.0);
        set.features.push(f);
        set.labels.push(u8::from(a > b));
    }
    set
}

/// Dataset root for tests that read MNIST or Fashion-MNIST.
pub fn data_dir() -> PathBuf {
    std::env::var_os("QFL_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}
