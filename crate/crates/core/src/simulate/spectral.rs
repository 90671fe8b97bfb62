//! Second-chaos surrogate on a u-domain cell grid.
//!
//! ∫ f dZ^H is represented as ∫ f(u) :V(u)²: du for a centred Gaussian
//! field with Cov(V(u), V(v)) = κ|u-v|^{H-1}, κ² = H(2H-1)/2. On cells the
//! field is replaced by its cell averages V̄ (covariance κ·M1, M1 the cell
//! average of |u-v|^{H-1}), giving
//!
//!   F = Σ_j a_j (V̄_j² - E V̄_j²),   a_j = ∫_{cell j} f.
//!
//! Its cumulants of every order equal the trace backend on the same cells.
//! The variance it misses, H(2H-1) aᵀ(M2 - M1∘M1)a with M2 the cell average
//! of |u-v|^{2H-2}, is optionally restored by an independent Gaussian term
//! shared consistently across functionals.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{accuracy, Result};
use crate::galerkin::{cell_integrals, riesz_average_matrix};
use crate::kernel::{HurstIndex, KernelSpec};
use crate::rng::RngSeed;

const BATCH: usize = 256;

pub struct SpectralModel {
    pub edges: Vec<f64>,
    hv: f64,
    /// lower Cholesky factor of κ·M1
    chol: DMatrix<f64>,
    field_var: DVector<f64>,
    /// PSD part of M2 - M1∘M1
    defect: Option<DMatrix<f64>>,
    /// sqrt(H(2H-1)) times the symmetric square root of `defect`
    defect_root: Option<DMatrix<f64>>,
    m1: DMatrix<f64>,
}

pub(crate) fn psd_parts(e: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(e);
    let q = &eig.eigenvectors;
    let clip = eig.eigenvalues.map(|l| l.max(0.0));
    let root = clip.map(f64::sqrt);
    let part = q * DMatrix::from_diagonal(&clip) * q.transpose();
    let sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
    (part, sqrt)
}

impl SpectralModel {
    pub fn new(h: HurstIndex, edges: Vec<f64>, compensate: bool) -> Result<Self> {
        let hv = h.require_process()?;
        let kappa = (hv * (2.0 * hv - 1.0) / 2.0).sqrt();
        let m1 = riesz_average_matrix(&edges, hv - 1.0);
        let sigma = &m1 * kappa;
        let field_var = sigma.diagonal();
        let Some(ch) = Cholesky::new(sigma) else {
            return accuracy("cell covariance of the Gaussian field is not positive definite");
        };
        let chol = ch.l();
        let (defect, defect_root) = if compensate {
            let m2 = riesz_average_matrix(&edges, 2.0 * hv - 2.0);
            let e = m2 - m1.component_mul(&m1);
            let (part, root) = psd_parts(e);
            (Some(part), Some(root * (hv * (2.0 * hv - 1.0)).sqrt()))
        } else {
            (None, None)
        };
        Ok(Self { edges, hv, chol, field_var, defect, defect_root, m1 })
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn compensated(&self) -> bool {
        self.defect.is_some()
    }

    pub fn weights(&self, f: &KernelSpec) -> DVector<f64> {
        cell_integrals(f, &self.edges)
    }

    /// Covariance of the surrogates of two functionals with cell weights a, b.
    pub fn discrete_covariance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let c = self.hv * (2.0 * self.hv - 1.0);
        let base = a.dot(&(self.m1.component_mul(&self.m1) * b));
        let extra = self.defect.as_ref().map_or(0.0, |d| a.dot(&(d * b)));
        c * (base + extra)
    }

    /// Variance missing from the chaos part, H(2H-1) aᵀ E a.
    pub fn compensation_variance(&self, a: &DVector<f64>) -> f64 {
        let c = self.hv * (2.0 * self.hv - 1.0);
        self.defect.as_ref().map_or(0.0, |d| c * a.dot(&(d * a)))
    }

    /// Eigenvalues λ_i of the quadratic form of a single functional, so that
    /// the chaos part is Σ λ_i (ζ_i² - 1).
    pub fn quadratic_spectrum(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut b = self.chol.transpose();
        for (j, aj) in a.iter().enumerate() {
            b.column_mut(j).scale_mut(*aj);
        }
        let form = &b * &self.chol;
        let sym = (&form + form.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues
    }

    /// n samples of one functional through its eigen-decomposition.
    pub fn sample_single(&self, a: &DVector<f64>, n: usize, seed: RngSeed) -> Vec<f64> {
        let lam = self.quadratic_spectrum(a);
        let comp = self.compensation_variance(a).sqrt();
        sample_spectrum(lam.as_slice(), comp, n, seed)
    }

    /// n joint samples of the functionals whose cell weights are the rows
    /// of `a` (K × N). Returns n × K.
    pub fn sample_family(&self, a: &DMatrix<f64>, n: usize, seed: RngSeed) -> DMatrix<f64> {
        let nc = self.cells();
        let k = a.nrows();
        let starts: Vec<usize> = (0..n).step_by(BATCH).collect();
        let blocks: Vec<DMatrix<f64>> = starts
            .par_iter()
            .map(|&s0| {
                let b = BATCH.min(n - s0);
                let mut z1 = DMatrix::zeros(nc, b);
                let mut z2 = DMatrix::zeros(nc, b);
                let mut buf = vec![0.0; 2 * nc];
                for col in 0..b {
                    seed.fill_normals((s0 + col) as u64, &mut buf);
                    z1.column_mut(col).copy_from_slice(&buf[..nc]);
                    z2.column_mut(col).copy_from_slice(&buf[nc..]);
                }
                let mut w = &self.chol * &z1;
                for col in 0..b {
                    for i in 0..nc {
                        let v = w[(i, col)];
                        w[(i, col)] = v * v - self.field_var[i];
                    }
                }
                if let Some(root) = &self.defect_root {
                    w += root * &z2;
                }
                (a * w).transpose()
            })
            .collect();
        let mut out = DMatrix::zeros(n, k);
        for (blk, &s0) in blocks.iter().zip(&starts) {
            out.view_mut((s0, 0), (blk.nrows(), k)).copy_from(blk);
        }
        out
    }
}

/// Σ λ_i (ζ_i² - 1) + comp·η per sample.
pub(crate) fn sample_spectrum(lam: &[f64], comp: f64, n: usize, seed: RngSeed) -> Vec<f64> {
    let d = lam.len();
    (0..n)
        .into_par_iter()
        .map(|s| {
            let mut z = vec![0.0; d + 1];
            seed.fill_normals(s as u64, &mut z);
            let mut acc = 0.0;
            for (l, x) in lam.iter().zip(&z) {
                acc += l * (x * x - 1.0);
            }
            acc + comp * z[d]
        })
        .collect()
}
