//! Command dispatch.

use rayon::prelude::*;
use rosenblatt_core::cumulant::{
    chi2_limit_cumulants, cumulant_wr_quadrature, cumulants_wr_trace, gaussian_limit_variance, trace_grid,
};
use rosenblatt_core::kernel::{HurstIndex, KernelSpec};
use rosenblatt_core::limits::cumulant_sweep;
use rosenblatt_core::power_counting::{
    check_integrability, critical_exponent_scan, describe, ExponentAssignment, ExponentFamily, ScanOutcome,
};
use rosenblatt_core::rng::RngSeed;
use rosenblatt_core::simulate::{
    simulate_gaussian_ou, simulate_rosenblatt_paths, simulate_rou, simulate_stationary_rou, simulate_wr_integral,
    PathEnsemble,
};
use rosenblatt_core::stats::{covariance_with_error, empirical_cumulants};

use crate::config::{Backend, ExperimentConfig, Process, Recipe};
use crate::error::CliError;
use crate::output::{format_value, Cell, Series, Table};

pub struct Report {
    pub table: Table,
    pub samples: Option<Table>,
    pub plot: Option<(String, String, String, Vec<Series>)>,
    pub summary: Vec<(String, String)>,
    pub pass: bool,
}

impl Report {
    fn new(table: Table) -> Self {
        Self { table, samples: None, plot: None, summary: Vec::new(), pass: true }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let f = cfg.kernel.build()?;
    let mut hursts = cfg.hurst.clone();
    hursts.sort_by(f64::total_cmp);
    hursts.dedup();
    match cfg.command {
        crate::config::Command::Cumulants => cumulants(cfg, &f, &hursts),
        crate::config::Command::Sweep => sweep(cfg, &f, &hursts),
        crate::config::Command::Verify => verify(cfg, &f, &hursts),
        crate::config::Command::Simulate => simulate(cfg, &f, &hursts),
        crate::config::Command::PowerCount => power_count(cfg),
    }
}

fn curves(table: &Table, value: &str) -> Vec<Series> {
    let (ih, im, iv) = (table.column("H").unwrap(), table.column("m").unwrap(), table.column(value).unwrap());
    let mut orders: Vec<i64> = table.rows.iter().filter_map(|r| r[im].as_f64()).map(|m| m as i64).collect();
    orders.dedup();
    orders.sort_unstable();
    orders.dedup();
    orders
        .into_iter()
        .map(|m| Series {
            label: format!("k{m}"),
            points: table
                .rows
                .iter()
                .filter(|r| r[im].as_f64() == Some(m as f64))
                .map(|r| (r[ih].as_f64().unwrap(), r[iv].as_f64().unwrap()))
                .collect(),
        })
        .collect()
}

fn cumulants(cfg: &ExperimentConfig, f: &KernelSpec, hursts: &[f64]) -> Result<Report, CliError> {
    let c = cfg.cumulants.as_ref().unwrap();
    let grid = trace_grid(f, c.cells)?;
    let rows = hursts
        .par_iter()
        .map(|&hv| {
            let h = HurstIndex::new(hv)?;
            let mut out = Vec::new();
            match c.backend {
                Backend::Trace => {
                    let cv = cumulants_wr_trace(f, h, &grid)?;
                    for &m in &c.orders {
                        out.push((m, cv.get(m).unwrap(), cv.error(m).unwrap()));
                    }
                }
                Backend::Quadrature => {
                    for &m in &c.orders {
                        if m == 1 {
                            out.push((1, 0.0, 0.0));
                        } else {
                            let e = cumulant_wr_quadrature(f, h, m)?;
                            out.push((m, e.value, e.error));
                        }
                    }
                }
            }
            out.sort_by_key(|r| r.0);
            Ok((hv, out))
        })
        .collect::<rosenblatt_core::Result<Vec<_>>>()?;
    let mut table = Table::new(&["H", "m", "k_m", "error"]);
    for (hv, out) in rows {
        for (m, k, e) in out {
            table.push(vec![Cell::Num(hv), Cell::Int(m as i64), Cell::Num(k), Cell::Num(e)]);
        }
    }
    let mut report = Report::new(table);
    report.plot = Some(("cumulants".into(), "H".into(), "k_m".into(), curves(&report.table, "k_m")));
    Ok(report)
}

fn sorted_orders(orders: &[usize]) -> Vec<usize> {
    let mut o = orders.to_vec();
    o.sort_unstable();
    o.dedup();
    o
}

fn sweep(cfg: &ExperimentConfig, f: &KernelSpec, hursts: &[f64]) -> Result<Report, CliError> {
    let s = cfg.sweep.as_ref().unwrap();
    let orders = sorted_orders(&s.orders);
    let res = cumulant_sweep(f, hursts, &orders, s.cells)?;
    let mut table = Table::new(&["H", "m", "k_m", "error", "chi2_target", "gaussian_target"]);
    for p in &res.points {
        for &m in &orders {
            let g = res.gaussian_targets.get(&m).map_or(Cell::Empty, |&v| Cell::Num(v));
            table.push(vec![
                Cell::Num(p.hurst),
                Cell::Int(m as i64),
                Cell::Num(p.cumulants.get(m).unwrap()),
                Cell::Num(p.cumulants.error(m).unwrap()),
                Cell::Num(res.chi2_targets[&m]),
                g,
            ]);
        }
    }
    let mut report = Report::new(table);
    report.plot = Some(("cumulant sweep".into(), "H".into(), "k_m".into(), curves(&report.table, "k_m")));
    Ok(report)
}

fn verify(cfg: &ExperimentConfig, f: &KernelSpec, hursts: &[f64]) -> Result<Report, CliError> {
    let v = cfg.verify.as_ref().unwrap();
    let orders = sorted_orders(&v.orders);
    let res = cumulant_sweep(f, hursts, &orders, v.cells)?;
    let gauss_var = match v.recipe {
        Recipe::Gaussian => Some(gaussian_limit_variance(f, None)?),
        Recipe::ChiSquare => None,
    };
    let mut table = Table::new(&["H", "m", "k_m", "target", "deviation"]);
    // worst deviation over m at each H, in ascending H
    let mut worst = Vec::new();
    for p in &res.points {
        let mut w: f64 = 0.0;
        for &m in &orders {
            let k = p.cumulants.get(m).unwrap();
            let (target, dev) = match gauss_var {
                None => {
                    let t = chi2_limit_cumulants(f, m);
                    (t, relative(k, t))
                }
                Some(var) if m == 2 => (var, relative(k, var)),
                Some(var) => (0.0, if var > 0.0 { k.abs() / var.powf(m as f64 / 2.0) } else { k.abs() }),
            };
            w = w.max(dev);
            table.push(vec![Cell::Num(p.hurst), Cell::Int(m as i64), Cell::Num(k), Cell::Num(target), Cell::Num(dev)]);
        }
        worst.push(w);
    }
    // the limit is H → 1 for the chi-square recipe and H → 1/2 otherwise
    if v.recipe == Recipe::Gaussian {
        worst.reverse();
    }
    let last = *worst.last().unwrap();
    let monotone = worst.windows(2).all(|w| w[1] <= w[0]);
    let mut report = Report::new(table);
    report.pass = last <= v.tolerance && monotone;
    report.summary.push(("deviation_at_limit_end".into(), format_value(last)));
    report.summary.push(("monotone_toward_limit".into(), monotone.to_string()));
    report.summary.push(("tolerance".into(), format_value(v.tolerance)));
    report.plot = Some(("deviation from the limit".into(), "H".into(), "deviation".into(), curves(&report.table, "deviation")));
    Ok(report)
}

fn relative(k: f64, t: f64) -> f64 {
    if t == 0.0 {
        k.abs()
    } else {
        (k - t).abs() / t.abs()
    }
}

/// Times (NaN for a single functional) and one sample column per time.
fn ensemble(cfg: &ExperimentConfig, f: &KernelSpec, hv: Option<f64>, seed: RngSeed) -> Result<(Vec<f64>, Vec<Vec<f64>>), CliError> {
    let s = cfg.simulate.as_ref().unwrap();
    let n = s.samples;
    let h = || HurstIndex::new(hv.unwrap());
    let paths = |e: PathEnsemble| (e.times.clone(), (0..e.times.len()).map(|j| e.column(j)).collect());
    Ok(match s.process {
        Process::WrIntegral => (vec![f64::NAN], vec![simulate_wr_integral(f, h()?, s.scheme, n, seed)?]),
        Process::Rosenblatt => paths(simulate_rosenblatt_paths(h()?, &s.times, s.scheme, n, seed)?),
        Process::Rou => paths(simulate_rou(s.initial, s.lambda, s.sigma, h()?, &s.times, s.scheme, n, seed)?),
        Process::StationaryRou => paths(simulate_stationary_rou(s.lambda, s.sigma, h()?, &s.times, s.scheme, n, seed)?),
        Process::GaussianOu => paths(simulate_gaussian_ou(s.initial, s.lambda, s.sigma, &s.times, n, seed, false)?),
    })
}

fn simulate(cfg: &ExperimentConfig, f: &KernelSpec, hursts: &[f64]) -> Result<Report, CliError> {
    let s = cfg.simulate.as_ref().unwrap();
    let points: Vec<Option<f64>> =
        if s.process == Process::GaussianOu { vec![None] } else { hursts.iter().map(|&h| Some(h)).collect() };
    let mut table = Table::new(&["H", "t", "samples", "mean", "mean_se", "variance", "variance_se", "k3", "k4"]);
    let mut samples = s.write_samples.then(|| {
        let mut head = vec!["H".to_string(), "sample".to_string()];
        if s.process == Process::WrIntegral {
            head.push("value".into());
        } else {
            head.extend(s.times.iter().map(|t| format!("t={}", format_value(*t))));
        }
        Table { header: head, rows: Vec::new() }
    });
    let mut series = Vec::new();
    for (i, &hv) in points.iter().enumerate() {
        let (times, cols) = ensemble(cfg, f, hv, RngSeed::new(cfg.seed, i as u64))?;
        let hcell = hv.map_or(Cell::Empty, Cell::Num);
        let mut curve = Vec::new();
        for (&t, col) in times.iter().zip(&cols) {
            let k = empirical_cumulants(col);
            let (var, var_se) = covariance_with_error(col, col);
            let tcell = if t.is_nan() { Cell::Empty } else { Cell::Num(t) };
            table.push(vec![
                hcell.clone(),
                tcell,
                Cell::Int(col.len() as i64),
                Cell::Num(k.get(1).unwrap()),
                Cell::Num((var / col.len() as f64).sqrt()),
                Cell::Num(var),
                Cell::Num(var_se),
                Cell::Num(k.get(3).unwrap()),
                Cell::Num(k.get(4).unwrap()),
            ]);
            curve.push((t, var));
        }
        series.push(Series { label: hv.map_or("OU".into(), |h| format!("H={h}")), points: curve });
        if let Some(st) = samples.as_mut() {
            for r in 0..s.samples {
                let mut row = vec![hcell.clone(), Cell::Int(r as i64)];
                row.extend(cols.iter().map(|c| Cell::Num(c[r])));
                st.rows.push(row);
            }
        }
    }
    let mut report = Report::new(table);
    report.samples = samples;
    if s.process != Process::WrIntegral {
        report.plot = Some(("empirical variance".into(), "t".into(), "variance".into(), series));
    }
    Ok(report)
}

fn power_count(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let p = cfg.power_count.as_ref().unwrap();
    let t = p.functional_set()?;
    let n = t.len();
    let spread = |v: &[f64]| if v.len() == 1 { vec![v[0]; n] } else { v.to_vec() };
    let e = ExponentAssignment::new(spread(&p.alpha), spread(&p.beta))?;
    let verdict = check_integrability(&t, &e)?;
    let mut table = Table::new(&["subset", "rank", "padded", "d0", "d_inf", "checks_d0", "checks_d_inf", "pass"]);
    for r in &verdict.reports {
        let w = rosenblatt_core::power_counting::Subset::from_indices(&r.subset);
        table.push(vec![
            Cell::Text(w.to_string()),
            Cell::Int(r.rank as i64),
            Cell::Text(r.padded.to_string()),
            Cell::Num(r.d0),
            Cell::Num(r.d_inf),
            Cell::Text(r.checks_d0.to_string()),
            Cell::Text(r.checks_d_inf.to_string()),
            Cell::Text(r.passes().to_string()),
        ]);
    }
    let mut report = Report::new(table);
    for (k, func) in t.functionals().iter().enumerate() {
        report.summary.push((format!("functional_{k}"), describe(func)));
    }
    report.summary.push(("integrable".into(), verdict.integrable.to_string()));
    let padded: Vec<String> =
        rosenblatt_core::power_counting::padded_subsets(&t).iter().map(|w| w.to_string()).collect();
    report.summary.push(("padded_subsets".into(), padded.join(" ")));
    let scans = [
        ("hurst_scan", &p.hurst_scan, ExponentFamily::hurst_scan as fn(usize, f64) -> ExponentFamily),
        ("decay_scan", &p.decay_scan, ExponentFamily::decay_scan),
    ];
    for (name, scan, family) in scans {
        if let Some(sc) = scan {
            let text = match critical_exponent_scan(&t, &family(n, sc.fixed), sc.range)? {
                ScanOutcome::Threshold { value, integrable_above } => format!(
                    "threshold {} (integrable {})",
                    format_value(value),
                    if integrable_above { "above" } else { "below" }
                ),
                ScanOutcome::Monotone { integrable } => format!("no threshold in range (integrable={integrable})"),
            };
            report.summary.push((name.into(), text));
        }
    }
    if let Some(want) = p.expect_integrable {
        report.pass = want == verdict.integrable;
    }
    Ok(report)
}
