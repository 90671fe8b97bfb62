//! Sample ensembles of second-chaos variables: Wiener-Rosenblatt integrals,
//! Rosenblatt paths, ROU and stationary ROU processes.

pub mod noise_grid;
pub mod ou;
pub mod spectral;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulant::check_symmetric;
use crate::error::{domain, Result};
use crate::kernel::{hh_inner, ExpIndicatorAtom, HurstIndex, KernelSpec};
use crate::quad::GridSpec;
use crate::rng::RngSeed;

pub use noise_grid::{discretize_operator, NoiseGrid, OperatorSource};
pub use ou::simulate_gaussian_ou;
pub use spectral::SpectralModel;

const BATCH: usize = 256;

/// Relative variance dropped when a stationary atom is cut on the left.
pub const STATIONARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub hurst: Option<f64>,
    pub seed: RngSeed,
    pub scheme: String,
    pub grid: String,
}

/// `values` is samples × times; each row comes from one Gaussian draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub values: DMatrix<f64>,
    pub times: Vec<f64>,
    pub meta: EnsembleMeta,
}

impl PathEnsemble {
    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.column(k).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scheme {
    /// Cell-averaged Gaussian field in the u-domain.
    Spectral {
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "yes")]
        compensate: bool,
    },
    /// Cell-averaged noise in the y-domain with a truncated left tail.
    NoiseGrid {
        #[serde(default = "default_cells")]
        inner_cells: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "yes")]
        compensate: bool,
    },
}

fn default_cells() -> usize {
    1024
}

fn yes() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Spectral { cells: default_cells(), compensate: true }
    }
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Spectral { .. } => "spectral",
            Scheme::NoiseGrid { .. } => "noise-grid",
        }
    }
}

/// Law of the ROU initial value ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialValue {
    Constant { value: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for InitialValue {
    fn default() -> Self {
        InitialValue::Constant { value: 0.0 }
    }
}

impl InitialValue {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialValue::Constant { value } => value,
            InitialValue::Normal { mean, .. } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitialValue::Constant { value } if value.is_finite() => Ok(()),
            InitialValue::Normal { mean, sd } if mean.is_finite() && sd >= 0.0 && sd.is_finite() => Ok(()),
            _ => domain(format!("invalid initial value {self:?}")),
        }
    }

    /// n draws from `seed.substream(1)`, independent of the chaos draw.
    pub fn sample(&self, n: usize, seed: RngSeed) -> Vec<f64> {
        match *self {
            InitialValue::Constant { value } => vec![value; n],
            InitialValue::Normal { mean, sd } => {
                let s = seed.substream(1);
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut z = [0.0];
                        s.fill_normals(i as u64, &mut z);
                        mean + sd * z[0]
                    })
                    .collect()
            }
        }
    }
}

/// Replace stationary atoms by atoms starting where the dropped part holds
/// at most `tol` of the variance of the atom.
fn truncate_stationary(f: &KernelSpec, tol: f64) -> Result<KernelSpec> {
    let atoms = f
        .atoms
        .iter()
        .map(|a| {
            if a.is_stationary() {
                ExpIndicatorAtom::new(a.weight, a.decay, a.right_end - (1.0 / tol).ln() / (2.0 * a.decay), a.right_end)
            } else {
                Ok(*a)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelSpec::new(atoms))
}

fn window(fs: &[KernelSpec]) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in fs.iter().flat_map(|f| &f.atoms) {
        lo = lo.min(a.left_end);
        hi = hi.max(a.right_end);
    }
    (lo < hi).then_some((lo, hi))
}

fn all_breakpoints(fs: &[KernelSpec]) -> Vec<f64> {
    let mut b: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// A discretisation ready to sample a fixed family of integrands.
enum Prepared {
    Spectral { model: SpectralModel, weights: DMatrix<f64> },
    Noise { grid: NoiseGrid, ops: Vec<DMatrix<f64>>, comp: Option<DMatrix<f64>> },
    Empty,
}

struct Plan {
    prepared: Prepared,
    summary: String,
    k: usize,
}

fn prepare(fs: &[KernelSpec], h: HurstIndex, scheme: Scheme) -> Result<Plan> {
    h.require_process()?;
    let k = fs.len();
    let kept: Vec<KernelSpec> = fs
        .iter()
        .map(|f| truncate_stationary(f, STATIONARY_TOLERANCE))
        .collect::<Result<_>>()?;
    let Some((lo, hi)) = window(&kept) else {
        return Ok(Plan { prepared: Prepared::Empty, summary: "empty".into(), k });
    };
    match scheme {
        Scheme::Spectral { cells, compensate } => {
            if cells < 4 {
                return domain("spectral scheme needs at least 4 cells");
            }
            let edges = GridSpec::uniform(lo, hi, cells)?.edges_with_breakpoints(&all_breakpoints(&kept));
            let summary = format!("spectral cells={} on [{lo}, {hi}] compensate={compensate}", edges.len() - 1);
            let model = SpectralModel::new(h, edges, compensate)?;
            let mut weights = DMatrix::zeros(k, model.cells());
            for (i, f) in kept.iter().enumerate() {
                weights.row_mut(i).copy_from(&model.weights(f).transpose());
            }
            Ok(Plan { prepared: Prepared::Spectral { model, weights }, summary, k })
        }
        Scheme::NoiseGrid { inner_cells, tolerance, compensate } => {
            let mut grid = NoiseGrid::new(h, lo, hi, inner_cells, tolerance / 4.0)?;
            grid.tolerance = tolerance;
            // the window already holds the truncated stationary atoms, so the
            // operators see the original integrands restricted to it
            let cuts = all_breakpoints(&kept);
            let ops = fs
                .iter()
                .map(|f| noise_grid::discretize_with_cuts(&OperatorSource::Kernel(f.clone()), h, &grid, &cuts))
                .collect::<Result<Vec<_>>>()?;
            let comp = if compensate {
                // covariance the cell averaging misses, restored by a
                // Gaussian vector shared across the family
                let mut d = DMatrix::zeros(k, k);
                for i in 0..k {
                    for j in 0..=i {
                        let v = hh_inner(&fs[i], &fs[j], h)? - 2.0 * ops[i].component_mul(&ops[j]).sum();
                        d[(i, j)] = v;
                        d[(j, i)] = v;
                    }
                }
                Some(spectral::psd_parts(d).1)
            } else {
                None
            };
            let summary = format!(
                "noise-grid cells={} on [{}, {hi}] tail_bound={:e} compensate={compensate}",
                grid.len(),
                grid.truncation_lower,
                grid.tail_bound
            );
            Ok(Plan { prepared: Prepared::Noise { grid, ops, comp }, summary, k })
        }
    }
}

impl Plan {
    fn sample(&self, n: usize, seed: RngSeed) -> DMatrix<f64> {
        match &self.prepared {
            Prepared::Empty => DMatrix::zeros(n, self.k),
            Prepared::Spectral { model, weights } => model.sample_family(weights, n, seed),
            Prepared::Noise { grid, ops, comp } => {
                let mut out = sample_operators(ops, grid.len(), n, seed);
                if let Some(root) = comp {
                    out += gaussian_block(root, n, seed);
                }
                out
            }
        }
    }

    fn sample_one(&self, n: usize, seed: RngSeed) -> Vec<f64> {
        match &self.prepared {
            Prepared::Empty => vec![0.0; n],
            Prepared::Spectral { model, weights } => {
                let a: DVector<f64> = weights.row(0).transpose();
                model.sample_single(&a, n, seed)
            }
            Prepared::Noise { ops, comp, .. } => {
                let eig = SymmetricEigen::new(ops[0].clone());
                let c = comp.as_ref().map_or(0.0, |r| r[(0, 0)]);
                spectral::sample_spectrum(eig.eigenvalues.as_slice(), c, n, seed)
            }
        }
    }

    fn covariance(&self) -> DMatrix<f64> {
        match &self.prepared {
            Prepared::Empty => DMatrix::zeros(self.k, self.k),
            Prepared::Spectral { model, weights } => DMatrix::from_fn(self.k, self.k, |i, j| {
                model.discrete_covariance(&weights.row(i).transpose(), &weights.row(j).transpose())
            }),
            Prepared::Noise { ops, comp, .. } => {
                let extra = comp.as_ref().map(|r| r * r);
                DMatrix::from_fn(self.k, self.k, |i, j| {
                    2.0 * ops[i].component_mul(&ops[j]).sum() + extra.as_ref().map_or(0.0, |e| e[(i, j)])
                })
            }
        }
    }
}

/// n rows of root·η with η standard normal from `seed.substream(2)`.
fn gaussian_block(root: &DMatrix<f64>, n: usize, seed: RngSeed) -> DMatrix<f64> {
    let k = root.nrows();
    let s = seed.substream(2);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut z = vec![0.0; k];
            s.fill_normals(i as u64, &mut z);
            (0..k).map(|r| (0..k).map(|c| root[(r, c)] * z[c]).sum()).collect()
        })
        .collect();
    DMatrix::from_fn(n, k, |i, j| rows[i][j])
}

/// ξᵀA_kξ - tr A_k for every operator, under one draw ξ per sample.
fn sample_operators(ops: &[DMatrix<f64>], dim: usize, n: usize, seed: RngSeed) -> DMatrix<f64> {
    let k = ops.len();
    let traces: Vec<f64> = ops.iter().map(|a| a.trace()).collect();
    let starts: Vec<usize> = (0..n).step_by(BATCH).collect();
    let blocks: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&s0| {
            let b = BATCH.min(n - s0);
            let mut xi = DMatrix::zeros(dim, b);
            let mut buf = vec![0.0; dim];
            for col in 0..b {
                seed.fill_normals((s0 + col) as u64, &mut buf);
                xi.column_mut(col).copy_from_slice(&buf);
            }
            let mut out = DMatrix::zeros(b, k);
            for (kk, a) in ops.iter().enumerate() {
                let w = a * &xi;
                for col in 0..b {
                    out[(col, kk)] = xi.column(col).dot(&w.column(col)) - traces[kk];
                }
            }
            out
        })
        .collect();
    let mut out = DMatrix::zeros(n, k);
    for (blk, &s0) in blocks.iter().zip(&starts) {
        out.view_mut((s0, 0), (blk.nrows(), k)).copy_from(blk);
    }
    out
}

/// n joint samples of ∫ f_k dZ^H, one column per integrand.
pub fn simulate_functionals(fs: &[KernelSpec], h: HurstIndex, scheme: Scheme, n: usize, seed: RngSeed) -> Result<DMatrix<f64>> {
    Ok(prepare(fs, h, scheme)?.sample(n, seed))
}

/// Exact covariance matrix of the discrete surrogates of the integrands.
pub fn surrogate_covariance(fs: &[KernelSpec], h: HurstIndex, scheme: Scheme) -> Result<DMatrix<f64>> {
    Ok(prepare(fs, h, scheme)?.covariance())
}

/// n samples of ∫ f dZ^H.
pub fn simulate_wr_integral(f: &KernelSpec, h: HurstIndex, scheme: Scheme, n: usize, seed: RngSeed) -> Result<Vec<f64>> {
    Ok(prepare(std::slice::from_ref(f), h, scheme)?.sample_one(n, seed))
}

/// n samples of ξᵀAξ - tr A for a symmetric A.
pub fn sample_second_chaos(a: &DMatrix<f64>, n: usize, seed: RngSeed) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    if a.nrows() == 0 {
        return Ok(vec![0.0; n]);
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(spectral::sample_spectrum(eig.eigenvalues.as_slice(), 0.0, n, seed))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return domain("at least one evaluation time is needed");
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return domain("times must be finite and strictly increasing");
    }
    Ok(())
}

fn check_rates(lambda: f64, sigma: f64) -> Result<()> {
    if !(lambda > 0.0 && sigma > 0.0 && lambda.is_finite() && sigma.is_finite()) {
        return domain(format!("λ and σ must be positive, got λ={lambda}, σ={sigma}"));
    }
    Ok(())
}

fn meta(h: HurstIndex, seed: RngSeed, scheme: Scheme, summary: String) -> EnsembleMeta {
    EnsembleMeta { hurst: Some(h.value()), seed, scheme: scheme.name().into(), grid: summary }
}

/// Z^H at the given times, jointly from one draw per sample.
pub fn simulate_rosenblatt_paths(h: HurstIndex, times: &[f64], scheme: Scheme, n: usize, seed: RngSeed) -> Result<PathEnsemble> {
    check_times(times)?;
    if times[0] < 0.0 {
        return domain("times must be nonnegative");
    }
    let fs = times.iter().map(|&t| KernelSpec::indicator(t)).collect::<Result<Vec<_>>>()?;
    let plan = prepare(&fs, h, scheme)?;
    let values = plan.sample(n, seed);
    Ok(PathEnsemble { values, times: times.to_vec(), meta: meta(h, seed, scheme, plan.summary) })
}

fn rou_kernel(t: f64, lambda: f64, sigma: f64) -> Result<KernelSpec> {
    if t == 0.0 {
        return Ok(KernelSpec::zero());
    }
    Ok(KernelSpec::new(vec![ExpIndicatorAtom::new(sigma, lambda, 0.0, t)?]))
}

/// Joint draw of the ROU Y^H, its driver Z^H and the initial values.
pub struct RouDraw {
    pub rou: PathEnsemble,
    pub driver: PathEnsemble,
    pub initial: Vec<f64>,
}

/// Y^H(t) = e^{-λt} ξ + σ ∫_0^t e^{-λ(t-u)} dZ^H(u) together with Z^H(t)
/// from the same chaos draw.
#[allow(clippy::too_many_arguments)]
pub fn simulate_rou_with_driver(
    xi: InitialValue,
    lambda: f64,
    sigma: f64,
    h: HurstIndex,
    times: &[f64],
    scheme: Scheme,
    n: usize,
    seed: RngSeed,
) -> Result<RouDraw> {
    rou_draw(xi, lambda, sigma, h, times, scheme, n, seed, true)
}

#[allow(clippy::too_many_arguments)]
fn rou_draw(
    xi: InitialValue,
    lambda: f64,
    sigma: f64,
    h: HurstIndex,
    times: &[f64],
    scheme: Scheme,
    n: usize,
    seed: RngSeed,
    with_driver: bool,
) -> Result<RouDraw> {
    check_times(times)?;
    check_rates(lambda, sigma)?;
    xi.validate()?;
    if times[0] < 0.0 {
        return domain("times must be nonnegative");
    }
    let m = times.len();
    let mut fs = times.iter().map(|&t| rou_kernel(t, lambda, sigma)).collect::<Result<Vec<_>>>()?;
    if with_driver {
        for &t in times {
            fs.push(KernelSpec::indicator(t)?);
        }
    }
    let plan = prepare(&fs, h, scheme)?;
    let chaos = plan.sample(n, seed);
    let initial = xi.sample(n, seed);
    let mut values = chaos.columns(0, m).into_owned();
    for (j, &t) in times.iter().enumerate() {
        let decay = (-lambda * t).exp();
        for i in 0..n {
            values[(i, j)] += decay * initial[i];
        }
    }
    let m_meta = meta(h, seed, scheme, plan.summary);
    let driver = if with_driver { chaos.columns(m, m).into_owned() } else { DMatrix::zeros(n, 0) };
    Ok(RouDraw {
        rou: PathEnsemble { values, times: times.to_vec(), meta: m_meta.clone() },
        driver: PathEnsemble { values: driver, times: if with_driver { times.to_vec() } else { Vec::new() }, meta: m_meta },
        initial,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_rou(
    xi: InitialValue,
    lambda: f64,
    sigma: f64,
    h: HurstIndex,
    times: &[f64],
    scheme: Scheme,
    n: usize,
    seed: RngSeed,
) -> Result<PathEnsemble> {
    Ok(rou_draw(xi, lambda, sigma, h, times, scheme, n, seed, false)?.rou)
}

/// X^H(t) = σ ∫_{-∞}^t e^{-λ(t-u)} dZ^H(u), with each atom cut where the
/// dropped part holds at most 1e-6 of its variance.
pub fn simulate_stationary_rou(
    lambda: f64,
    sigma: f64,
    h: HurstIndex,
    times: &[f64],
    scheme: Scheme,
    n: usize,
    seed: RngSeed,
) -> Result<PathEnsemble> {
    check_times(times)?;
    check_rates(lambda, sigma)?;
    let fs = times
        .iter()
        .map(|&t| Ok(KernelSpec::new(vec![ExpIndicatorAtom::new(sigma, lambda, f64::NEG_INFINITY, t)?])))
        .collect::<Result<Vec<_>>>()?;
    let plan = prepare(&fs, h, scheme)?;
    let values = plan.sample(n, seed);
    Ok(PathEnsemble { values, times: times.to_vec(), meta: meta(h, seed, scheme, plan.summary) })
}
