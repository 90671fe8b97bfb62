//! Experiment documents.

use rosenblatt_core::kernel::{HurstIndex, KernelSpec};
use rosenblatt_core::limits::DEFAULT_TRACE_CELLS;
use rosenblatt_core::power_counting::FunctionalSet;
use rosenblatt_core::simulate::{InitialValue, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Cumulants,
    Simulate,
    Sweep,
    PowerCount,
    Verify,
}

impl Command {
    fn section(self) -> &'static str {
        match self {
            Command::Cumulants => "cumulants",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::PowerCount => "power_count",
            Command::Verify => "verify",
        }
    }
}

/// Integrand shorthand; `atoms` gives full control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    Zero,
    Indicator {
        t: f64,
    },
    Rou {
        alphas: Vec<f64>,
        times: Vec<f64>,
        lambda: f64,
        sigma: f64,
        #[serde(default)]
        stationary: bool,
    },
    Atoms(KernelSpec),
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Indicator { t: 1.0 }
    }
}

impl KernelConfig {
    pub fn build(&self) -> rosenblatt_core::Result<KernelSpec> {
        match self {
            KernelConfig::Zero => Ok(KernelSpec::zero()),
            KernelConfig::Indicator { t } => KernelSpec::indicator(*t),
            KernelConfig::Rou { alphas, times, lambda, sigma, stationary: false } => {
                KernelSpec::rou_combination(alphas, times, *lambda, *sigma)
            }
            KernelConfig::Rou { alphas, times, lambda, sigma, stationary: true } => {
                KernelSpec::stationary_rou_combination(alphas, times, *lambda, *sigma)
            }
            KernelConfig::Atoms(k) => Ok(k.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Trace,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CumulantsConfig {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

impl Default for CumulantsConfig {
    fn default() -> Self {
        Self { orders: default_orders(), backend: default_backend(), cells: default_cells() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { orders: default_orders(), cells: default_cells() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// k_m against 2^{m/2-1}(m-1)!(∫f)^m, relative deviation
    ChiSquare,
    /// k₂ against the Gaussian limit variance, k_m/σ^m against 0 for m ≥ 3
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_recipe")]
    pub recipe: Recipe,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_verify_tolerance")]
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            recipe: default_recipe(),
            orders: default_orders(),
            cells: default_cells(),
            tolerance: default_verify_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    /// ∫ f dZ^H for the configured kernel
    WrIntegral,
    Rosenblatt,
    Rou,
    StationaryRou,
    GaussianOu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_process")]
    pub process: Process,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub initial: InitialValue,
    #[serde(default)]
    pub scheme: Scheme,
    /// also write every sample to the samples file
    #[serde(default)]
    pub write_samples: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            process: default_process(),
            samples: default_samples(),
            times: default_times(),
            lambda: 1.0,
            sigma: 1.0,
            initial: InitialValue::default(),
            scheme: Scheme::default(),
            write_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// the fixed exponent: β for the Hurst scan, α for the decay scan
    pub fixed: f64,
    pub range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCountConfig {
    /// the cyclic difference set on R^m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functionals: Option<FunctionalSet>,
    /// exponents near the origin, one per functional (or one for all)
    pub alpha: Vec<f64>,
    /// exponents at infinity, one per functional (or one for all)
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst_scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_scan: Option<ScanConfig>,
    /// fail with status 2 unless the verdict matches
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_integrable: Option<bool>,
}

impl PowerCountConfig {
    pub fn functional_set(&self) -> rosenblatt_core::Result<FunctionalSet> {
        match (&self.functionals, self.cyclic) {
            (Some(f), _) => Ok(f.clone()),
            (None, Some(m)) => FunctionalSet::cyclic_differences(m),
            (None, None) => unreachable!("checked by validate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_results")]
    pub results: String,
    #[serde(default = "default_manifest")]
    pub manifest: String,
    #[serde(default = "default_plot")]
    pub plot: String,
    #[serde(default = "default_samples_file")]
    pub samples: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            results: default_results(),
            manifest: default_manifest(),
            plot: default_plot(),
            samples: default_samples_file(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hurst")]
    pub hurst: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulants: Option<CumulantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_count: Option<PowerCountConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_orders() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_backend() -> Backend {
    Backend::Trace
}
fn default_cells() -> usize {
    DEFAULT_TRACE_CELLS
}
fn default_recipe() -> Recipe {
    Recipe::ChiSquare
}
fn default_verify_tolerance() -> f64 {
    0.02
}
fn default_process() -> Process {
    Process::Rosenblatt
}
fn default_samples() -> usize {
    10_000
}
fn default_times() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}
fn one() -> f64 {
    1.0
}
fn default_hurst() -> Vec<f64> {
    vec![0.7]
}
fn default_results() -> String {
    "results.csv".into()
}
fn default_manifest() -> String {
    "manifest.toml".into()
}
fn default_plot() -> String {
    "convergence.svg".into()
}
fn default_samples_file() -> String {
    "samples.csv".into()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Fills in the section of the active command and checks every domain
    /// the run depends on.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let active = self.command.section();
        let present = [
            ("cumulants", self.cumulants.is_some()),
            ("sweep", self.sweep.is_some()),
            ("verify", self.verify.is_some()),
            ("simulate", self.simulate.is_some()),
            ("power_count", self.power_count.is_some()),
        ];
        for (name, there) in present {
            if there && name != active {
                return Err(CliError::Config(format!("section [{name}] is not used by command {active:?}")));
            }
        }
        match self.command {
            Command::Cumulants => {
                self.cumulants.get_or_insert_with(Default::default);
            }
            Command::Sweep => {
                self.sweep.get_or_insert_with(Default::default);
            }
            Command::Verify => {
                self.verify.get_or_insert_with(Default::default);
            }
            Command::Simulate => {
                self.simulate.get_or_insert_with(Default::default);
            }
            Command::PowerCount => {
                if self.power_count.is_none() {
                    return Err(CliError::Config("command power-count needs a [power_count] section".into()));
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        self.kernel.build()?;
        let uses_hurst = match (&self.command, &self.simulate) {
            (Command::PowerCount, _) => false,
            (Command::Simulate, Some(s)) => s.process != Process::GaussianOu,
            _ => true,
        };
        if uses_hurst {
            if self.hurst.is_empty() {
                return cfg("hurst needs at least one value".into());
            }
            for &h in &self.hurst {
                HurstIndex::new(h).map_err(|e| CliError::Config(format!("hurst: {e}")))?;
            }
        }
        let check_orders = |orders: &[usize], hi: usize| -> Result<(), CliError> {
            if orders.is_empty() || orders.iter().any(|&m| m < 1 || m > hi) {
                return Err(CliError::Config(format!("orders must be nonempty and lie in 1..={hi}, got {orders:?}")));
            }
            Ok(())
        };
        let check_cells = |cells: usize| -> Result<(), CliError> {
            if !(4..=16384).contains(&cells) {
                return Err(CliError::Config(format!("cells must lie in 4..=16384, got {cells}")));
            }
            Ok(())
        };
        if let Some(c) = &self.cumulants {
            check_orders(&c.orders, if c.backend == Backend::Trace { 4 } else { 3 })?;
            check_cells(c.cells)?;
        }
        if let Some(s) = &self.sweep {
            check_orders(&s.orders, 4)?;
            check_cells(s.cells)?;
        }
        if let Some(v) = &self.verify {
            check_orders(&v.orders, 4)?;
            check_cells(v.cells)?;
            if !(v.tolerance > 0.0) {
                return cfg(format!("verify.tolerance must be positive, got {}", v.tolerance));
            }
        }
        if let Some(s) = &self.simulate {
            if s.samples == 0 {
                return cfg("simulate.samples must be positive".into());
            }
            if s.process != Process::WrIntegral && s.times.is_empty() {
                return cfg("simulate.times needs at least one time".into());
            }
            if !(s.lambda > 0.0 && s.sigma > 0.0) {
                return cfg(format!("simulate.lambda and simulate.sigma must be positive, got {} and {}", s.lambda, s.sigma));
            }
        }
        if let Some(p) = &self.power_count {
            let n = match (&p.functionals, p.cyclic) {
                (Some(_), Some(_)) => return cfg("power_count takes either cyclic or functionals, not both".into()),
                (None, None) => return cfg("power_count needs cyclic or functionals".into()),
                _ => p.functional_set()?.len(),
            };
            for (name, v) in [("alpha", &p.alpha), ("beta", &p.beta)] {
                if v.len() != 1 && v.len() != n {
                    return cfg(format!("power_count.{name} needs 1 or {n} entries, got {}", v.len()));
                }
            }
            for scan in [&p.hurst_scan, &p.decay_scan].into_iter().flatten() {
                if !(scan.range.0 < scan.range.1) {
                    return cfg(format!("scan range needs lo < hi, got {:?}", scan.range));
                }
            }
        }
        Ok(())
    }
}
