use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest count as rank deficiency.
const RANK_TOL: f64 = 1e-12;

/// Principal axes plus the per-feature range used for angle scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of input dimension, by descending variance.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Covariance (divided by `n - 1`) of row samples.
pub fn covariance(samples: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let n = samples.len();
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| samples[i][j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    (mean, cov)
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut [f64]) {
    let lead = v.iter().copied().fold(
        0.0f64,
        |best, x| if x.abs() > best.abs() { x } else { best },
    );
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`k` principal components of `samples` (rows) by covariance eigendecomposition.
pub fn pca_fit(samples: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    if k == 0 || samples.len() <= k {
        return Err(Error::config(format!(
            "PCA with {k} components needs more than {k} samples, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if k > dim || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::input(
            "PCA samples must share a dimension of at least k",
        ));
    }
    let (mean, cov) = covariance(samples);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let mut components = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &i in &order[..k] {
        let lambda = eig.eigenvalues[i];
        if lambda.is_nan() || lambda <= RANK_TOL * top.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "data rank is below {k}: eigenvalue {} is {lambda:e}",
                components.len() + 1
            )));
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut v);
        components.push(v);
        eigenvalues.push(lambda);
    }
    let mut model = PcaModel {
        mean,
        components,
        eigenvalues,
        lower: vec![f64::INFINITY; k],
        upper: vec![f64::NEG_INFINITY; k],
    };
    for s in samples {
        for (j, z) in model.project(s).into_iter().enumerate() {
            model.lower[j] = model.lower[j].min(z);
            model.upper[j] = model.upper[j].max(z);
        }
    }
    Ok(model)
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Coordinates of `x` along the principal axes.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centered =
            DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
        self.components
            .iter()
            .map(|c| c.iter().zip(centered.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Projection min-max scaled to `[0, pi]` with the fitted bounds; values
    /// outside are clipped. Also returns how many features were clipped.
    pub fn transform(&self, x: &[f64]) -> (Vec<f64>, usize) {
        let mut clipped = 0;
        let out = self
            .project(x)
            .into_iter()
            .enumerate()
            .map(|(j, z)| {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                let t = if hi > lo { (z - lo) / (hi - lo) } else { 0.0 };
                if !(0.0..=1.0).contains(&t) {
                    clipped += 1;
                }
                t.clamp(0.0, 1.0) * PI
            })
            .collect();
        (out, clipped)
    }

    /// Mean squared reconstruction error of `samples` from the projections.
    pub fn reconstruction_error(&self, samples: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for s in samples {
            let z = self.project(s);
            for (d, (&x, &m)) in s.iter().zip(&self.mean).enumerate() {
                let r: f64 = m + z
                    .iter()
                    .zip(&self.components)
                    .map(|(a, c)| a * c[d])
                    .sum::<f64>();
                total += (x - r).powi(2);
            }
        }
        total / samples.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_axes() {
        // variance only along axes 2 (large) and 0 (small) of a 5-d space, on a
        // grid so the two coordinates are exactly uncorrelated
        let mut samples = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0] {
                samples.push(vec![a, 0.0, b, 0.0, 0.0]);
            }
        }
        let m = pca_fit(&samples, 2).unwrap();
        let e2 = [0.0, 0.0, 1.0, 0.0, 0.0];
        let e0 = [1.0, 0.0, 0.0, 0.0, 0.0];
        for (c, e) in m.components.iter().zip([e2, e0]) {
            for (a, b) in c.iter().zip(e) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
        assert!(pca_fit(&samples, 3).is_err());
    }

    #[test]
    fn scaling_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let m = pca_fit(&samples, 3).unwrap();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for s in &samples {
            let (t, clipped) = m.transform(s);
            assert_eq!(clipped, 0);
            for j in 0..3 {
                lo[j] = lo[j].min(t[j]);
                hi[j] = hi[j].max(t[j]);
            }
        }
        assert_eq!(lo, [0.0; 3]);
        for h in hi {
            assert!((h - PI).abs() < 1e-15);
        }
        let (t, clipped) = m.transform(&[100.0; 6]);
        assert!(clipped > 0);
        assert!(t.iter().all(|&v| (0.0..=PI).contains(&v)));
    }

    #[test]
    fn sign_rule() {
        let mut v = vec![0.1, -0.9, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
