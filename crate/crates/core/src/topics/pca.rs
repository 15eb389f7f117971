//! Dimensionality reduction behind a small interface. The default
//! implementation is exact PCA: mean-centered projection onto the leading
//! principal axes, with eigenpairs from a cyclic Jacobi sweep over the
//! covariance matrix. Fully deterministic; the seed parameter exists for
//! stochastic reducers plugged in behind [`Reducer`].

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

pub trait Reducer {
    fn reduce(
        &self,
        x: &EmbeddingMatrix,
        n_components: usize,
        seed: u64,
    ) -> Result<EmbeddingMatrix>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PcaReducer;

impl Reducer for PcaReducer {
    fn reduce(
        &self,
        x: &EmbeddingMatrix,
        n_components: usize,
        _seed: u64,
    ) -> Result<EmbeddingMatrix> {
        pca_reduce(x, n_components).map(|(matrix, _)| matrix)
    }
}

/// Reduce with the default PCA implementation.
pub fn reduce_dimensions(
    x: &EmbeddingMatrix,
    n_components: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    PcaReducer.reduce(x, n_components, seed)
}

/// Variance bookkeeping for tests and diagnostics.
#[derive(Debug, Clone)]
pub struct PcaInfo {
    /// All eigenvalues of the covariance matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Sum of all eigenvalues (total variance).
    pub total_variance: f64,
    /// Selected principal axes, row-major `n_components x dim`.
    pub axes: Vec<f64>,
}

impl PcaInfo {
    pub fn explained_variance_ratio(&self, n_components: usize) -> f64 {
        if self.total_variance <= 0.0 {
            // Degenerate input: no variance at all, the projection is exact.
            return 1.0;
        }
        self.eigenvalues.iter().take(n_components).sum::<f64>() / self.total_variance
    }
}

pub fn pca_reduce(x: &EmbeddingMatrix, n_components: usize) -> Result<(EmbeddingMatrix, PcaInfo)> {
    let (rows, dim) = (x.rows(), x.dim());
    if n_components < 1 {
        return Err(Error::Contract("n_components must be >= 1".into()));
    }
    if n_components > dim {
        return Err(Error::Contract(format!(
            "n_components {n_components} exceeds embedding dim {dim}"
        )));
    }
    if rows < n_components {
        return Err(Error::Contract(format!(
            "need at least {n_components} rows for {n_components} components, got {rows}"
        )));
    }

    // Column means, then covariance in f64.
    let mut means = vec![0.0f64; dim];
    for i in 0..rows {
        for (j, v) in x.row(i).iter().enumerate() {
            means[j] += f64::from(*v);
        }
    }
    for m in &mut means {
        *m /= rows as f64;
    }

    let denom = if rows > 1 { (rows - 1) as f64 } else { 1.0 };
    let mut cov = vec![0.0f64; dim * dim];
    for i in 0..rows {
        let row = x.row(i);
        for a in 0..dim {
            let da = f64::from(row[a]) - means[a];
            for b in a..dim {
                cov[a * dim + b] += da * (f64::from(row[b]) - means[b]);
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / denom;
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }

    let (mut eigenvalues, eigenvectors) = jacobi_eigen(cov, dim);

    // Order eigenpairs by eigenvalue descending; ties keep original index
    // order so the result is stable.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();
    let total_variance: f64 = eigenvalues.iter().sum();

    // Selected axes with the sign convention: the largest-magnitude loading
    // of each axis is positive.
    let mut axes = vec![0.0f64; n_components * dim];
    for (k, &col) in order.iter().take(n_components).enumerate() {
        let axis = &mut axes[k * dim..(k + 1) * dim];
        for j in 0..dim {
            axis[j] = eigenvectors[j * dim + col];
        }
        let mut lead = 0;
        for j in 1..dim {
            if axis[j].abs() > axis[lead].abs() {
                lead = j;
            }
        }
        if axis[lead] < 0.0 {
            for v in axis.iter_mut() {
                *v = -*v;
            }
        }
    }

    let mut out = vec![0.0f32; rows * n_components];
    for i in 0..rows {
        let row = x.row(i);
        for k in 0..n_components {
            let axis = &axes[k * dim..(k + 1) * dim];
            let mut acc = 0.0f64;
            for j in 0..dim {
                acc += (f64::from(row[j]) - means[j]) * axis[j];
            }
            out[i * n_components + k] = acc as f32;
        }
    }

    // EmbeddingMatrix requires dim >= 2; pad a zero column when a single
    // component was requested so the invariant holds downstream.
    let matrix = if n_components >= 2 {
        EmbeddingMatrix::new(rows, n_components, out)?
    } else {
        let mut padded = vec![0.0f32; rows * 2];
        for i in 0..rows {
            padded[i * 2] = out[i];
        }
        EmbeddingMatrix::new(rows, 2, padded)?
    };

    Ok((
        matrix,
        PcaInfo {
            eigenvalues,
            total_variance,
            axes,
        },
    ))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, row-major `d x d`.
/// Returns eigenvalues and eigenvectors (column `k` of the returned matrix
/// pairs with eigenvalue `k`).
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0f64; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    if d == 1 {
        return (vec![a[0]], v);
    }

    let frobenius: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (frobenius * 1e-14).max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in p + 1..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..d - 1 {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues = (0..d).map(|i| a[i * d + i]).collect();
    (eigenvalues, v)
}
