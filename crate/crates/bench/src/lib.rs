//! Experiment harness: runs solvers on built-in problems, writes traces and
//! summaries, checks certificates and fits empirical rates.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ahpe_core::ahpe::{
    self, certificate_report, check_potential, check_rate_bound, iteration_factor, CertificateReport,
    PotentialReport, RateReport, RunTrace, SolverConfig, Termination,
};
use ahpe_core::ats::AtsStrategy;
use ahpe_core::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use ahpe_core::bisection::{lambda_bar, step_count_report, StepCountRow};
use ahpe_core::oracle::{builtin_problem, Problem, ProblemParams};

/// Target accuracy for the informational outer-iteration count.
pub const K_EPS_TARGET: f64 = 1e-8;
/// Gaps at or below this (relative to `max(1, |F*|)`) are treated as rounding noise by [`fit_rate`].
pub const GAP_FLOOR: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("certificate violations: {0}")]
    Certificate(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Certificate(_) => 3,
            Self::Solver(_) | Self::Io(_) | Self::Csv(_) | Self::Json(_) => 4,
        }
    }
}

impl From<ahpe_core::Error> for BenchError {
    fn from(e: ahpe_core::Error) -> Self {
        match e {
            ahpe_core::Error::InvalidConfig(_)
            | ahpe_core::Error::InvalidArgument(_)
            | ahpe_core::Error::UnsupportedOrder { .. }
            | ahpe_core::Error::DimensionMismatch { .. } => Self::Usage(e.to_string()),
            other => Self::Solver(other.to_string()),
        }
    }
}

pub type BenchResult<T> = Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// The accelerated tensor method of the given order.
    Optimal(usize),
    Gd,
    Agd,
    Basic(usize),
}

impl Method {
    /// Parses `optimal`, `optimal-d2`, `gd`, `agd`, `basic`, `basic-d3`; bare names take `d`.
    pub fn parse(s: &str, d: usize) -> BenchResult<Self> {
        let s = s.trim().to_ascii_lowercase();
        let order = |rest: &str| -> BenchResult<usize> {
            match rest {
                "" => Ok(d),
                r => r
                    .strip_prefix("-d")
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| BenchError::Usage(format!("cannot parse method order in '{s}'"))),
            }
        };
        if let Some(rest) = s.strip_prefix("optimal") {
            Ok(Self::Optimal(order(rest)?))
        } else if let Some(rest) = s.strip_prefix("basic") {
            Ok(Self::Basic(order(rest)?))
        } else if s == "gd" {
            Ok(Self::Gd)
        } else if s == "agd" {
            Ok(Self::Agd)
        } else {
            Err(BenchError::Usage(format!(
                "unknown method '{s}' (available: optimal[-dN], gd, agd, basic[-dN])"
            )))
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Optimal(d) => format!("optimal-d{d}"),
            Self::Gd => "gd".into(),
            Self::Agd => "agd".into(),
            Self::Basic(d) => format!("basic-d{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Report {
    Potential,
    Rate,
    Bisect,
}

/// Everything that determines one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub seed: u64,
    pub method: Method,
    pub sigma_hat: Option<f64>,
    pub sigma_l: Option<f64>,
    pub sigma_u: Option<f64>,
    pub reg: Option<f64>,
    pub rho_bar: Option<f64>,
    pub eps_bar: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_bisect: Option<usize>,
    pub max_inner: Option<usize>,
    pub kappa: Option<f64>,
    pub inner_sigma: Option<f64>,
    pub generic_ats: bool,
    pub out: Option<PathBuf>,
    pub check_certificates: bool,
    pub reports: Vec<Report>,
}

impl ExperimentSpec {
    pub fn new(problem: impl Into<String>, method: Method) -> Self {
        Self {
            problem: problem.into(),
            n: None,
            m: None,
            seed: 42,
            method,
            sigma_hat: None,
            sigma_l: None,
            sigma_u: None,
            reg: None,
            rho_bar: None,
            eps_bar: None,
            max_outer: None,
            max_bisect: None,
            max_inner: None,
            kappa: None,
            inner_sigma: None,
            generic_ats: false,
            out: None,
            check_certificates: false,
            reports: Vec::new(),
        }
    }

    pub fn build_problem(&self) -> BenchResult<Problem> {
        let params = ProblemParams {
            n: self.n,
            m: self.m,
            seed: self.seed,
        };
        builtin_problem(&self.problem, &params).map_err(|e| BenchError::Usage(e.to_string()))
    }

    /// Solver configuration for an optimal-method run, defaults overridden by the spec.
    pub fn solver_config(&self, p: &Problem, d: usize) -> SolverConfig {
        let mut c = SolverConfig::defaults(p, d);
        if let Some(k) = self.kappa {
            c.ats.kappa = k;
            c.reg = ahpe::default_reg(p, d, k);
        }
        if let Some(v) = self.sigma_hat {
            c.sigma_hat = v;
        }
        if let Some(v) = self.sigma_l {
            c.sigma_l = v;
        }
        if let Some(v) = self.sigma_u {
            c.sigma_u = v;
        }
        if let Some(v) = self.reg {
            c.reg = v;
        }
        if let Some(v) = self.rho_bar {
            c.rho_bar = v;
        }
        if let Some(v) = self.eps_bar {
            c.eps_bar = v;
        }
        if let Some(v) = self.max_outer {
            c.max_outer = v;
        }
        if let Some(v) = self.max_bisect {
            c.max_bisect = v;
        }
        if let Some(v) = self.max_inner {
            c.ats.max_inner = v;
        }
        c.ats.inner_sigma = self.inner_sigma;
        if self.generic_ats {
            c.ats.strategy = AtsStrategy::Generic;
        }
        c
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        let method = match self.method {
            Method::Gd => BaselineMethod::Gd,
            Method::Agd => BaselineMethod::Agd,
            Method::Basic(d) => BaselineMethod::BasicTensor { d },
            Method::Optimal(_) => unreachable!("not a baseline"),
        };
        let mut c = BaselineConfig::new(method);
        if let Some(v) = self.max_outer {
            c.max_iter = v;
        }
        if let Some(v) = self.rho_bar {
            c.tol = v;
        }
        if let Some(v) = self.kappa {
            c.ats.kappa = v;
        }
        if let Some(v) = self.max_inner {
            c.ats.max_inner = v;
        }
        if let Some(v) = self.sigma_hat {
            c.ats.sigma_hat = v;
        }
        c.reg = self.reg;
        c
    }

    /// Runs the spec and returns its trace.
    pub fn execute(&self) -> BenchResult<(Problem, RunTrace)> {
        let p = self.build_problem()?;
        let trace = match self.method {
            Method::Optimal(d) => {
                let c = self.solver_config(&p, d);
                ahpe::run(&p, &p.start, &c)?
            }
            _ => run_baseline(&p, &p.start, &self.baseline_config())?,
        };
        Ok((p, trace))
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "k",
    "A_k",
    "lambda_k",
    "beta_k",
    "bisect_steps",
    "ats_inner",
    "norm_v",
    "eps",
    "F_gap",
    "step_norm",
    "residual_ratio",
];

/// Round-trippable float text (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per outer iteration; `F_gap` is `F(y_k) - F*`, or `F(y_k)` without a known optimum.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, w: W) -> BenchResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    let fs = trace.f_star.unwrap_or(0.0);
    for r in &trace.records {
        wr.write_record([
            r.k.to_string(),
            fmt_float(r.a_total),
            fmt_float(r.lambda),
            fmt_float(r.beta),
            r.bisect_steps.to_string(),
            r.ats_inner.to_string(),
            fmt_float(r.norm_v),
            fmt_float(r.eps),
            fmt_float(r.f_y - fs),
            fmt_float(r.step_norm),
            fmt_float(r.residual_ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Least-squares fit of `log gap` against `log k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Affine least squares `y ~ slope x + intercept`; `r2 = 1` when the data have no spread.
pub fn fit_affine(points: &[(f64, f64)]) -> Option<RateFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(RateFit {
        slope,
        intercept,
        r2,
        points: points.len(),
    })
}

/// Fits `log(F(y_k) - F*)` against `log k` over `k_lo..=k_hi`, restricted to the
/// records present and to gaps above the rounding floor.
pub fn fit_rate(trace: &RunTrace, k_range: (usize, usize)) -> BenchResult<RateFit> {
    let fs = trace
        .f_star
        .ok_or_else(|| BenchError::Usage("rate fit needs a known optimum".into()))?;
    let floor = GAP_FLOOR * fs.abs().max(1.0);
    let gaps: Vec<(usize, f64)> = trace
        .records
        .iter()
        .filter(|r| r.k >= k_range.0 && r.k <= k_range.1)
        .map(|r| (r.k, r.f_y - fs))
        .collect();
    fit_gaps(&gaps, floor)
}

/// [`fit_rate`] on explicit `(k, gap)` pairs; gaps at or below `floor` are skipped.
pub fn fit_gaps(gaps: &[(usize, f64)], floor: f64) -> BenchResult<RateFit> {
    if let Some((k, g)) = gaps.iter().find(|(_, g)| *g <= 0.0 && floor <= 0.0) {
        return Err(BenchError::Usage(format!("nonpositive gap {g:e} at k = {k}")));
    }
    let points: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|(_, g)| *g > floor)
        .map(|&(k, g)| ((k as f64).ln(), g.ln()))
        .collect();
    fit_affine(&points).ok_or_else(|| BenchError::Usage("fewer than two usable points for the rate fit".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub violations: usize,
    pub flagged: usize,
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub problem_hash: String,
    pub method: String,
    pub termination: Termination,
    pub failure: Option<String>,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_gap: Option<f64>,
    pub oracle_calls: usize,
    pub gradient_calls: usize,
    pub ats_inner: usize,
    pub bisect_steps: usize,
    pub config: Option<SolverConfig>,
    /// Outer-iteration factor of the oracle-complexity bound at [`K_EPS_TARGET`].
    pub k_eps_factor: Option<f64>,
    pub k_eps_target: f64,
    pub lambda_bar: Option<f64>,
    pub certificates: Option<CertificateSummary>,
    pub potential: Option<PotentialReport>,
    pub rate: Option<RateReport>,
    pub bisect: Option<Vec<StepCountRow>>,
}

/// FNV-1a over the problem name and the bits of its optimal value.
pub fn problem_hash(p: &Problem) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    feed(p.name.as_bytes());
    if let Some(v) = p.optimal_value() {
        feed(&v.to_bits().to_le_bytes());
    }
    format!("{h:016x}")
}

pub fn summarize(p: &Problem, trace: &RunTrace, spec: &ExperimentSpec) -> Summary {
    let final_objective = trace.records.last().map(|r| r.f_y).unwrap_or(trace.f_x0);
    let (k_eps_factor, lb) = match (&trace.config, trace.distance) {
        (Some(c), Some(dist)) => (
            Some(iteration_factor(c, trace.lipschitz, dist, K_EPS_TARGET)),
            lambda_bar(p, c),
        ),
        (Some(c), None) => (None, lambda_bar(p, c)),
        _ => (None, None),
    };
    let certificates = trace.config.as_ref().map(|_| {
        let r = certificate_report(trace, p);
        CertificateSummary {
            violations: r.violations,
            flagged: r.flagged,
        }
    });
    let wants = |r: Report| spec.reports.contains(&r);
    Summary {
        problem: p.name.clone(),
        problem_hash: problem_hash(p),
        method: trace.method.clone(),
        termination: trace.termination,
        failure: trace.failure.clone(),
        iterations: trace.records.len(),
        final_objective,
        final_gap: trace.final_gap(),
        oracle_calls: trace.oracle_calls,
        gradient_calls: trace.gradient_calls,
        ats_inner: trace.ats_inner,
        bisect_steps: trace.bisect_steps,
        config: trace.config.clone(),
        k_eps_factor,
        k_eps_target: K_EPS_TARGET,
        lambda_bar: lb,
        certificates,
        potential: if wants(Report::Potential) { check_potential(trace, p) } else { None },
        rate: if wants(Report::Rate) { check_rate_bound(trace, p) } else { None },
        bisect: wants(Report::Bisect).then(|| step_count_report(std::slice::from_ref(trace))),
    }
}

fn with_ext(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub const DEFAULT_OUT: &str = "ahpe_trace";

/// Executes a run, writes `<out>.csv` and `<out>.json`, and applies the requested checks.
/// Human-readable report lines go to `log`.
pub fn cmd_run(spec: &ExperimentSpec, log: &mut dyn Write) -> BenchResult<Summary> {
    let (p, trace) = spec.execute()?;
    let out = spec.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    write_trace_csv(&trace, File::create(with_ext(&out, "csv"))?)?;
    let summary = summarize(&p, &trace, spec);
    serde_json::to_writer_pretty(File::create(with_ext(&out, "json"))?, &summary)?;

    writeln!(
        log,
        "{} {}: {:?} after {} iterations, final gap {}",
        summary.problem,
        summary.method,
        summary.termination,
        summary.iterations,
        summary.final_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into())
    )?;
    print_reports(&summary, log)?;

    if spec.check_certificates {
        let report: CertificateReport = certificate_report(&trace, &p);
        if trace.config.is_none() {
            writeln!(log, "certificates: not applicable to {}", trace.method)?;
        } else if !report.all_pass() {
            let bad: Vec<String> = report
                .rows
                .iter()
                .filter(|r| {
                    !r.approx_solution
                        || r.large_step == Some(false)
                        || r.extragradient == Some(false)
                        || r.eps_subgradient == Some(false)
                })
                .map(|r| r.k.to_string())
                .collect();
            return Err(BenchError::Certificate(format!(
                "{} of {} iterations (k = {})",
                report.violations,
                report.rows.len(),
                bad.join(",")
            )));
        } else {
            writeln!(
                log,
                "certificates: all {} iterations pass ({} flagged)",
                report.rows.len(),
                report.flagged
            )?;
        }
    }
    match trace.termination {
        Termination::BisectFailed | Termination::SubproblemFailed | Termination::Diverged => Err(BenchError::Solver(
            format!(
                "{:?}: {}",
                trace.termination,
                trace.failure.clone().unwrap_or_default()
            ),
        )),
        _ => Ok(summary),
    }
}

fn print_reports(s: &Summary, log: &mut dyn Write) -> io::Result<()> {
    if let Some(p) = &s.potential {
        writeln!(log, "potential: {} rows, {} violations", p.rows.len(), p.violations)?;
        for r in &p.rows {
            writeln!(
                log,
                "  k={:>4} potential={:.6e} <= {:.6e} sum={:.6e} <= {:.6e} A={:.6e} >= {:.6e}{}",
                r.k,
                r.potential,
                r.half_d2,
                r.sum,
                r.sum_bound,
                r.a_total,
                r.sqrt_lambda_bound,
                if r.in_hypothesis { "" } else { " (outside hypothesis)" }
            )?;
        }
    }
    if let Some(r) = &s.rate {
        writeln!(log, "rate: {} rows, {} violations", r.rows.len(), r.violations)?;
        for row in &r.rows {
            writeln!(
                log,
                "  k={:>4} gap={:.6e} <= {:.6e}{}",
                row.k,
                row.gap,
                row.bound,
                if row.in_hypothesis { "" } else { " (outside hypothesis)" }
            )?;
        }
    }
    if let Some(rows) = &s.bisect {
        for r in rows {
            writeln!(
                log,
                "bisect: log2(1/rho)={:.2} log2(1/eps)={:.2} max={} mean={:.2} over {} iterations",
                r.log2_inv_rho, r.log2_inv_eps, r.max_steps, r.mean_steps, r.iterations
            )?;
        }
    }
    Ok(())
}

/// Iterations-to-tolerance per method of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub problem: String,
    pub problem_hash: String,
    pub tol: f64,
    pub methods: Vec<String>,
    /// First `k` with `F(y_k) - F* <= tol`, per method.
    pub iterations_to_tol: Vec<Option<usize>>,
    pub terminations: Vec<Termination>,
}

/// Runs every spec, writes an aligned `<out>.csv` of gaps (column per method) and `<out>.json`.
pub fn cmd_compare(specs: &[ExperimentSpec], tol: f64, out: &Path) -> BenchResult<CompareSummary> {
    if specs.len() < 2 {
        return Err(BenchError::Usage("compare needs at least two methods".into()));
    }
    let mut runs = Vec::new();
    for s in specs {
        runs.push(s.execute()?);
    }
    let hash = problem_hash(&runs[0].0);
    if let Some((p, _)) = runs.iter().find(|(p, _)| problem_hash(p) != hash) {
        return Err(BenchError::Usage(format!(
            "mismatched problems: {} vs {}",
            runs[0].0.name, p.name
        )));
    }
    let p = &runs[0].0;
    let fs = p
        .optimal_value()
        .ok_or_else(|| BenchError::Usage("compare needs a known optimum".into()))?;
    let rows = runs.iter().map(|(_, t)| t.records.len()).max().unwrap_or(0);
    let mut wr = csv::Writer::from_writer(File::create(with_ext(out, "csv"))?);
    let mut header = vec!["k".to_string()];
    header.extend(runs.iter().map(|(_, t)| t.method.clone()));
    wr.write_record(&header)?;
    for i in 0..rows {
        let mut rec = vec![(i + 1).to_string()];
        for (_, t) in &runs {
            rec.push(t.records.get(i).map(|r| fmt_float(r.f_y - fs)).unwrap_or_default());
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    let summary = CompareSummary {
        problem: p.name.clone(),
        problem_hash: hash,
        tol,
        methods: runs.iter().map(|(_, t)| t.method.clone()).collect(),
        iterations_to_tol: runs.iter().map(|(_, t)| t.iterations_to(tol)).collect(),
        terminations: runs.iter().map(|(_, t)| t.termination).collect(),
    };
    serde_json::to_writer_pretty(File::create(with_ext(out, "json"))?, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        assert_eq!(Method::parse("optimal", 3).unwrap(), Method::Optimal(3));
        assert_eq!(Method::parse("optimal-d2", 3).unwrap(), Method::Optimal(2));
        assert_eq!(Method::parse("AGD", 1).unwrap(), Method::Agd);
        assert_eq!(Method::parse("basic-d1", 2).unwrap(), Method::Basic(1));
        assert!(Method::parse("newton", 2).is_err());
        assert!(Method::parse("optimal-dx", 2).is_err());
    }

    #[test]
    fn exact_power_law_slope() {
        let gaps: Vec<(usize, f64)> = (1..=50).map(|k| (k, (k as f64).powf(-3.5))).collect();
        let fit = fit_gaps(&gaps, 0.0).unwrap();
        assert!((fit.slope + 3.5).abs() < 1e-9);
        assert!(fit.intercept.abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_gaps_have_zero_slope() {
        let gaps: Vec<(usize, f64)> = (1..=10).map(|k| (k, 0.25)).collect();
        let fit = fit_gaps(&gaps, 0.0).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn nonpositive_gap_is_an_error() {
        assert!(fit_gaps(&[(1, 1.0), (2, 0.0), (3, 0.5)], 0.0).is_err());
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
