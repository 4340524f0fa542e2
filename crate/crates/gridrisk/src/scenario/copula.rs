//! Gaussian copula fitting and sampling.
//!
//! Pairwise Kendall's tau on ranks, inverted to the Gaussian-copula
//! correlation `rho = sin(pi * tau / 2)`, then repaired to positive
//! semi-definite by eigenvalue clipping and rescaled to unit diagonal.

use statrs::distribution::{ContinuousCDF, Normal};

use super::ScenarioError;

const EIG_CLIP: f64 = 1e-8;

/// Symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub dim: usize,
    data: Vec<f64>,
}

impl Correlation {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for d in 0..dim {
            data[d * dim + d] = 1.0;
        }
        Correlation { dim, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }
}

/// A fitted copula correlation plus fitting diagnostics.
#[derive(Debug, Clone)]
pub struct CorrelationFit {
    pub correlation: Correlation,
    /// Dimension pairs whose tau was undefined (constant column); their
    /// correlation entry was set to 0.
    pub warnings: Vec<(usize, usize)>,
}

/// Fits the Gaussian-copula correlation from a `[sample][dimension]` matrix
/// of pseudo-observations in (0, 1). Requires at least 3 samples.
pub fn fit_copula(uniforms: &[Vec<f64>]) -> Result<CorrelationFit, ScenarioError> {
    let n = uniforms.len();
    if n < 3 {
        return Err(ScenarioError::TooFewSamples { needed: 3, got: n });
    }
    let dim = uniforms[0].len();
    if uniforms.iter().any(|row| row.len() != dim) {
        return Err(ScenarioError::RaggedMatrix);
    }
    let mut corr = Correlation::identity(dim);
    let mut warnings = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            let xi: Vec<f64> = uniforms.iter().map(|r| r[i]).collect();
            let xj: Vec<f64> = uniforms.iter().map(|r| r[j]).collect();
            match kendall_tau_b(&xi, &xj) {
                Some(tau) => {
                    let rho = (std::f64::consts::PI * tau / 2.0).sin();
                    corr.set(i, j, rho.clamp(-1.0, 1.0));
                }
                None => {
                    corr.set(i, j, 0.0);
                    warnings.push((i, j));
                }
            }
        }
    }
    repair_psd(&mut corr);
    Ok(CorrelationFit {
        correlation: corr,
        warnings,
    })
}

/// Kendall's tau-b; `None` when either column is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for a in 0..n {
        for b in a + 1..n {
            let dx = x[a] - x[b];
            let dy = y[a] - y[b];
            if dx == 0.0 && dy == 0.0 {
                ties_x += 1;
                ties_y += 1;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if dx * dy > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    if denom <= 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / denom)
}

/// Clips eigenvalues at `EIG_CLIP` and rescales the result back to unit
/// diagonal, in place.
fn repair_psd(corr: &mut Correlation) {
    let dim = corr.dim;
    if dim <= 1 {
        return;
    }
    let (mut vals, vecs) = jacobi_eigen(&corr.data, dim);
    let mut clipped = false;
    for v in vals.iter_mut() {
        if *v < EIG_CLIP {
            *v = EIG_CLIP;
            clipped = true;
        }
    }
    if !clipped {
        return;
    }
    // Reconstruct V diag(vals) V^T.
    let mut rebuilt = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += vecs[i * dim + k] * vals[k] * vecs[j * dim + k];
            }
            rebuilt[i * dim + j] = acc;
            rebuilt[j * dim + i] = acc;
        }
    }
    // Rescale to unit diagonal.
    let scale: Vec<f64> = (0..dim).map(|d| rebuilt[d * dim + d].sqrt()).collect();
    for i in 0..dim {
        for j in 0..dim {
            rebuilt[i * dim + j] /= scale[i] * scale[j];
        }
    }
    corr.data = rebuilt;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the column-eigenvector matrix `V` (row-major).
fn jacobi_eigen(a: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; dim * dim];
    for d in 0..dim {
        v[d * dim + d] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..dim {
            for j in i + 1..dim {
                off += m[i * dim + j] * m[i * dim + j];
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * dim + p];
                let aqq = m[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let mkp = m[k * dim + p];
                    let mkq = m[k * dim + q];
                    m[k * dim + p] = c * mkp - s * mkq;
                    m[k * dim + q] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[p * dim + k];
                    let mqk = m[q * dim + k];
                    m[p * dim + k] = c * mpk - s * mqk;
                    m[q * dim + k] = s * mpk + c * mqk;
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..dim).map(|d| m[d * dim + d]).collect();
    (vals, v)
}

/// Lower Cholesky factor of the (repaired) correlation; adds a small ridge
/// once before giving up.
pub fn cholesky(corr: &Correlation) -> Result<Vec<f64>, ScenarioError> {
    for ridge in [0.0, 1e-10] {
        if let Some(l) = try_cholesky(corr, ridge) {
            return Ok(l);
        }
    }
    Err(ScenarioError::CholeskyFailure)
}

fn try_cholesky(corr: &Correlation, ridge: f64) -> Option<Vec<f64>> {
    let dim = corr.dim;
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = corr.get(i, j) + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                acc -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if acc <= 0.0 {
                    return None;
                }
                l[i * dim + i] = acc.sqrt();
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Correlates a standard-normal vector in place: `z <- L z`.
pub fn correlate(l: &[f64], z: &mut [f64], dim: usize) {
    let mut out = vec![0.0; dim];
    for i in 0..dim {
        let mut acc = 0.0;
        for k in 0..=i {
            acc += l[i * dim + k] * z[k];
        }
        out[i] = acc;
    }
    z.copy_from_slice(&out);
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

pub fn std_normal_inv_cdf(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}
