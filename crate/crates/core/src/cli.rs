//! Batch driver: sweeps, CSV output and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::SystemConfig;
use crate::scattering::{self, SeriesOptions};
use crate::spectra::{self, EigenOptions, EndpointCondition};
use crate::sweep::{self, ScatterPoint, SweepOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Overrides `options.compare_series` when set.
    pub series: Option<bool>,
    /// Forces the divergence diagnostic on.
    pub diagnostics: bool,
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "lambda",
    "channels",
    "exclusion",
    "ReS11",
    "ImS11",
    "ReS12",
    "ImS12",
    "ReS21",
    "ImS21",
    "ReS22",
    "ImS22",
    "R11",
    "R12",
    "R21",
    "R22",
    "T",
    "series_error",
];

/// Shortest-round-trip-free fixed formatting: 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

struct Output {
    header: String,
}

impl Output {
    fn file(&self, body_columns: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(body_columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in rows {
            w.write_record(&r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(self.header.clone() + &String::from_utf8(body).expect("csv output is UTF-8"))
    }
}

fn sweep_row(p: &ScatterPoint) -> Vec<String> {
    let mut row =
        vec![fmt_num(p.lambda), p.channels.to_string(), p.exclusion.map(|e| e.label()).unwrap_or("").to_string()];
    let mut s_cells = vec![String::new(); 8];
    let mut r_cells = vec![String::new(); 4];
    if let (Some(s), Some(r)) = (&p.s, &p.r) {
        let n = s.dim();
        for i in 0..n {
            for j in 0..n {
                let slot = 2 * i + j;
                s_cells[2 * slot] = fmt_num(s.entries[(i, j)].re);
                s_cells[2 * slot + 1] = fmt_num(s.entries[(i, j)].im);
                r_cells[slot] = fmt_num(r.entries[(i, j)]);
            }
        }
    }
    row.extend(s_cells);
    row.extend(r_cells);
    row.push(opt_num(p.transmission()));
    row.push(opt_num(p.series_error));
    row
}

/// Grid indices nearest to the fractions 1/4, 1/2, 3/4 that hold valid points.
fn probe_indices(points: &[ScatterPoint]) -> Vec<usize> {
    let n = points.len();
    let mut out = Vec::new();
    for f in [0.25, 0.5, 0.75] {
        let target = ((n - 1) as f64 * f).round() as usize;
        let found = (0..n)
            .flat_map(|d| [target.checked_sub(d), Some(target + d)])
            .flatten()
            .find(|&i| i < n && points[i].is_valid() && points[i].s.is_some());
        if let Some(i) = found {
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out
}

fn convergence_terms(n_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [10, 20, 50, 100, 200].into_iter().filter(|&n| n <= n_max).collect();
    let mut n = 400;
    while n <= n_max {
        v.push(n);
        n *= 2;
    }
    if v.last() != Some(&n_max) {
        v.push(n_max);
    }
    v
}

pub const DIAGNOSTIC_TERMS: [usize; 5] = [10, 20, 50, 100, 200];

/// Runs a sweep and writes its outputs into `args.out`.
pub fn run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let cfg = SystemConfig::parse(&text).map_err(|e| CliError::Config(e.0))?;
    let valid = cfg.validate().map_err(|e| CliError::Config(e.0))?;
    let compare = args.series.unwrap_or(valid.options.compare_series);
    let diagnostics = args.diagnostics || valid.options.diagnostics;
    let opts = valid.sweep_options(compare);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Numerical(e.to_string()))?;
    let points = pool
        .install(|| sweep::sweep(&valid.system, &valid.grid, &opts))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(p) = points.iter().find(|p| p.failure.is_some()) {
        return Err(CliError::Numerical(format!(
            "numerical failure at lambda = {}: {}",
            p.lambda,
            p.failure.as_ref().unwrap()
        )));
    }

    let hash = Sha256::digest(text.as_bytes());
    let mut header = format!("# rmatrix {VERSION}\n# config sha256 ");
    for b in hash {
        write!(header, "{b:02x}").unwrap();
    }
    header.push('\n');
    let out = Output { header };

    let mut files: Vec<(&str, String)> = Vec::new();
    files.push(("sweep.csv", out.file(&SWEEP_COLUMNS, points.iter().map(sweep_row).collect())?));

    if compare {
        let rows = points
            .iter()
            .filter(|p| p.is_valid())
            .flat_map(|p| {
                p.frozen.iter().enumerate().map(move |(k, (l, a, b))| {
                    vec![fmt_num(p.lambda), (k + 1).to_string(), fmt_num(*l), fmt_num(*a), fmt_num(*b)]
                })
            })
            .collect();
        files.push(("eigen.csv", out.file(&["lambda", "k", "eigenvalue", "trace_left", "trace_right"], rows)?));
        files.push((
            "convergence.csv",
            out.file(
                &["lambda", "n_terms", "error_raw", "error_corrected", "tail_estimate"],
                convergence_rows(&valid.system, &points, &opts)?,
            )?,
        ));
    }
    if diagnostics {
        files.push((
            "diagnostics.csv",
            out.file(
                &["lambda", "n_terms", "trace_norm", "trace_norm_per_term"],
                diagnostic_rows(&valid.system.internal)?,
            )?,
        ));
    }

    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = args.out.join(name);
        if let Err(e) = fs::write(&path, content) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(io_err(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

fn convergence_rows(
    system: &sweep::ScatteringSystem,
    points: &[ScatterPoint],
    opts: &SweepOptions,
) -> Result<Vec<Vec<String>>, CliError> {
    let series = opts.series.unwrap_or_default();
    let terms = convergence_terms(series.n_terms);
    let eig = EigenOptions { solver: opts.solver, with_mesh: false, ..EigenOptions::default() };
    let mut rows = Vec::new();
    for i in probe_indices(points) {
        let p = &points[i];
        let (tau, r) = (p.tau.as_ref().unwrap(), p.r.as_ref().unwrap());
        let fam = spectra::frozen_family_from_tau(&system.internal, tau, series.n_terms, &eig)
            .map_err(|e| CliError::Numerical(format!("convergence probe at lambda = {}: {e}", p.lambda)))?;
        for &n in &terms {
            let o = SeriesOptions { n_terms: n, ..series };
            let (_, report) = scattering::r_series(p.lambda, &fam.pairs, tau, &o)
                .map_err(|e| CliError::Numerical(format!("convergence probe at lambda = {}: {e}", p.lambda)))?;
            let raw = (&report.partial - &r.entries).amax();
            let corrected = (report.corrected() - &r.entries).amax();
            let tail = report.tail_estimate.is_finite().then_some(report.tail_estimate);
            rows.push(vec![fmt_num(p.lambda), n.to_string(), fmt_num(raw), fmt_num(corrected), opt_num(tail)]);
        }
    }
    Ok(rows)
}

fn diagnostic_rows(internal: &crate::profile::CoefficientProfile) -> Result<Vec<Vec<String>>, CliError> {
    let opts = EigenOptions { with_mesh: false, ..EigenOptions::default() };
    let ground =
        spectra::eigen_scan_with(internal, EndpointCondition::Dirichlet, EndpointCondition::Dirichlet, 1, &opts)
            .map_err(|e| CliError::Numerical(format!("diagnostics: {e}")))?[0]
            .lambda;
    let lambda = ground - 2.0;
    let norms = scattering::divergence_diagnostic(internal, lambda, &DIAGNOSTIC_TERMS)
        .map_err(|e| CliError::Numerical(format!("diagnostics: {e}")))?;
    Ok(norms
        .into_iter()
        .map(|(n, t)| vec![fmt_num(lambda), n.to_string(), fmt_num(t), fmt_num(t / n as f64)])
        .collect())
}

/// Two-column `.dat` files per numeric sweep column, skipping excluded rows.
pub fn emit_plotdata(input: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let malformed = |msg: String| CliError::Config(format!("{}: {msg}", input.display()));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != SWEEP_COLUMNS {
        return Err(malformed("unexpected column layout".into()));
    }
    let quantities = &SWEEP_COLUMNS[3..];
    let mut data: Vec<String> = quantities
        .iter()
        .map(|q| format!("# {q} against lambda, from {}\n# column 1: lambda, column 2: {q}\n", input.display()))
        .collect();
    let mut kept = 0usize;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        let lambda: f64 = rec[0].parse().map_err(|_| malformed(format!("row {}: bad lambda", line + 1)))?;
        let excl = &rec[2];
        if !excl.is_empty() {
            if sweep::Exclusion::parse(excl).is_none() {
                return Err(malformed(format!("row {}: unknown exclusion {excl:?}", line + 1)));
            }
            continue;
        }
        kept += 1;
        for (k, _) in quantities.iter().enumerate() {
            let cell = &rec[3 + k];
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| malformed(format!("row {}: bad number {cell:?}", line + 1)))?;
            if v.is_finite() {
                writeln!(data[k], "{} {}", fmt_num(lambda), fmt_num(v)).unwrap();
            }
        }
    }
    if kept == 0 {
        eprintln!("warning: every row of {} is excluded; plot files are empty", input.display());
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut written = Vec::new();
    for (q, content) in quantities.iter().zip(data) {
        let path = out.join(format!("{q}.dat"));
        fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_twelve_digits() {
        assert_eq!(fmt_num(0.25), "2.50000000000e-1");
        assert_eq!(fmt_num(-1.0 / 3.0), "-3.33333333333e-1");
    }

    #[test]
    fn convergence_term_ladder() {
        assert_eq!(convergence_terms(200), vec![10, 20, 50, 100, 200]);
        assert_eq!(convergence_terms(500), vec![10, 20, 50, 100, 200, 400, 500]);
        assert_eq!(convergence_terms(30), vec![10, 20, 30]);
    }
}
