//! Artifact rendering and the output directory writer.
//!
//! CSV files carry no timings so that they are byte-stable for a given
//! configuration and seed; wall times go to `manifest.txt` only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gavg_core::ergogen::{GeneratorSample, GeneratorTable};
use gavg_core::fnpde::{GridSolution, SolutionKind};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};
use crate::experiments::{Report, SolveSummary};

const SLAB_MAGIC: &[u8; 8] = b"GAVGSLAB";
const TABLE_MAGIC: &[u8; 8] = b"GAVGTABL";
const FORMAT_VERSION: u32 = 1;

/// One file of a run, path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(path: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact { path: path.into(), bytes }
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| AppError::Config(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| AppError::Config(format!("csv: {e}")))
}

fn key_values(pairs: Vec<(&str, String)>) -> AppResult<Vec<u8>> {
    csv_bytes(&["key", "value"], pairs.into_iter().map(|(k, v)| vec![k.to_string(), v]))
}

fn summary_cols(s: &SolveSummary) -> Vec<String> {
    vec![s.steps.to_string(), num(s.dt), num(s.dpp), num(s.cfl_ratio), num(s.viscosity_max)]
}

const SUMMARY_HEADER: [&str; 5] = ["steps", "dt", "dpp_discrepancy", "cfl_ratio", "viscosity_max"];

fn with_summary<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SUMMARY_HEADER).collect()
}

fn kind_code(k: SolutionKind) -> u32 {
    match k {
        SolutionKind::TwoScale => 0,
        SolutionKind::GHeat => 1,
        SolutionKind::Averaged => 2,
        SolutionKind::Fast => 3,
    }
}

/// Binary slab: magic, version, kind, dims `(slices, slow, fast)`, axis
/// origins and spacings, ε (NaN if none), dt, slice times, then the values
/// slice-major then slow-major, all little-endian.
pub fn write_slab(sol: &GridSolution) -> Vec<u8> {
    let spec = &sol.spec;
    let nf = spec.fast_nodes();
    let mut b = Vec::with_capacity(96 + 8 * sol.slices.len() * (1 + spec.len()));
    b.extend_from_slice(SLAB_MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&kind_code(sol.kind).to_le_bytes());
    for n in [sol.slices.len(), spec.slow.nodes, nf] {
        b.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let (flo, fh) = spec.fast.map_or((0.0, 0.0), |f| (f.lo, f.h()));
    for v in [spec.slow.lo, spec.slow.h(), flo, fh, sol.epsilon.unwrap_or(f64::NAN), sol.dt()] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for s in &sol.slices {
        b.extend_from_slice(&s.t.to_le_bytes());
    }
    for s in &sol.slices {
        for v in &s.values {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

/// Decoded slab.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub kind: u32,
    pub n_slow: usize,
    pub n_fast: usize,
    pub slow_lo: f64,
    pub slow_h: f64,
    pub fast_lo: f64,
    pub fast_h: f64,
    pub epsilon: Option<f64>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// One vector per slice.
    pub values: Vec<Vec<f64>>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> AppResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| AppError::Config(format!("{}: truncated at byte {}", self.what, self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> AppResult<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| AppError::Config(format!("{}: size out of range", self.what)))
    }
    fn f64(&mut self) -> AppResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> AppResult<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn header(&mut self, magic: &[u8; 8]) -> AppResult<()> {
        if self.take(8)? != magic {
            return Err(AppError::Config(format!("{}: bad magic", self.what)));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(AppError::Config(format!("{}: unsupported version {v}", self.what)));
        }
        Ok(())
    }
    fn finish(&self) -> AppResult<()> {
        if self.pos != self.bytes.len() {
            return Err(AppError::Config(format!("{}: trailing bytes", self.what)));
        }
        Ok(())
    }
}

pub fn read_slab(bytes: &[u8]) -> AppResult<Slab> {
    let mut r = Reader { bytes, pos: 0, what: "slab" };
    r.header(SLAB_MAGIC)?;
    let kind = r.u32()?;
    let (ns, n_slow, n_fast) = (r.usize()?, r.usize()?, r.usize()?);
    let (slow_lo, slow_h, fast_lo, fast_h, eps, dt) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let times = r.f64s(ns)?;
    let values = (0..ns).map(|_| r.f64s(n_slow * n_fast)).collect::<AppResult<Vec<_>>>()?;
    r.finish()?;
    let epsilon = if eps.is_nan() { None } else { Some(eps) };
    Ok(Slab { kind, n_slow, n_fast, slow_lo, slow_h, fast_lo, fast_h, epsilon, dt, times, values })
}

const SAMPLE_FIELDS: usize = 9;

/// Versioned binary table: grid, η, horizon, largest tolerance, stored values
/// and one record per ergodic sample.
pub fn write_table(t: &GeneratorTable) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(TABLE_MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for n in [t.x_grid().len(), t.n_directions(), t.samples.len()] {
        b.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let mut put = |v: f64| b.extend_from_slice(&v.to_le_bytes());
    put(t.eta);
    put(t.horizon);
    put(t.max_tolerance());
    t.x_grid().iter().for_each(|v| put(*v));
    t.values().iter().for_each(|v| put(*v));
    for s in &t.samples {
        for v in [
            s.x_tilde,
            s.p,
            s.a,
            s.lambda_cesaro,
            s.lambda_discounted.unwrap_or(f64::NAN),
            s.xbar_spread,
            s.tolerance_estimate,
            s.grid_proxy,
            s.horizon_proxy,
        ] {
            put(v);
        }
    }
    b
}

pub fn read_table(bytes: &[u8]) -> AppResult<GeneratorTable> {
    let mut r = Reader { bytes, pos: 0, what: "table" };
    r.header(TABLE_MAGIC)?;
    let (nx, nd, nsamp) = (r.usize()?, r.usize()?, r.usize()?);
    let (eta, horizon, _max_tol) = (r.f64()?, r.f64()?, r.f64()?);
    let x_grid = r.f64s(nx)?;
    let values = r.f64s(nx.saturating_mul(nd))?;
    let mut samples = Vec::with_capacity(nsamp);
    for _ in 0..nsamp {
        let f = r.f64s(SAMPLE_FIELDS)?;
        samples.push(GeneratorSample {
            x_tilde: f[0],
            p: f[1],
            a: f[2],
            lambda_cesaro: f[3],
            lambda_discounted: if f[4].is_nan() { None } else { Some(f[4]) },
            slope_history: Vec::new(),
            per_start: Vec::new(),
            xbar_spread: f[5],
            tolerance_estimate: f[6],
            grid_proxy: f[7],
            horizon_proxy: f[8],
        });
    }
    r.finish()?;
    GeneratorTable::from_parts(x_grid, nd, values, samples, eta, horizon).map_err(|e| AppError::Config(format!("table: {e}")))
}

fn table_artifacts(t: &GeneratorTable) -> AppResult<Vec<Artifact>> {
    let mut rows = Vec::new();
    for (ix, x) in t.x_grid().iter().enumerate() {
        for k in 0..t.n_directions() {
            let (c, s) = t.direction(k);
            rows.push(vec![num(*x), k.to_string(), num(c), num(s), num(t.stored(ix, k))]);
        }
    }
    let table_csv = csv_bytes(&["x_tilde", "direction", "p", "a", "value"], rows)?;
    let samples = csv_bytes(
        &["x_tilde", "p", "a", "lambda_cesaro", "lambda_discounted", "xbar_spread", "tolerance", "grid_proxy", "horizon_proxy"],
        t.samples.iter().map(|s| {
            vec![
                num(s.x_tilde),
                num(s.p),
                num(s.a),
                num(s.lambda_cesaro),
                s.lambda_discounted.map(num).unwrap_or_default(),
                num(s.xbar_spread),
                num(s.tolerance_estimate),
                num(s.grid_proxy),
                num(s.horizon_proxy),
            ]
        }),
    )?;
    Ok(vec![
        Artifact::new("table.bin", write_table(t)),
        Artifact::new("table.csv", table_csv),
        Artifact::new("samples.csv", samples),
    ])
}

fn final_slice_csv(sol: &GridSolution) -> AppResult<Vec<u8>> {
    let last = sol.last();
    let nf = sol.spec.fast_nodes();
    let mut rows = Vec::with_capacity(last.values.len());
    for i in 0..sol.spec.slow.nodes {
        for j in 0..nf {
            let y = sol.spec.fast.map_or(0.0, |f| f.x(j));
            rows.push(vec![num(last.t), num(sol.spec.slow.x(i)), num(y), num(last.values[i * nf + j])]);
        }
    }
    csv_bytes(&["t", "x_tilde", "x_bar", "u"], rows)
}

fn eps_slab(eps: f64) -> String {
    format!("slabs/eps_{}.slab", num(eps))
}

fn plot(data: &str, xlabel: &str, ylabel: &str, log: bool, series: &[(usize, usize)]) -> Vec<u8> {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    if log {
        let _ = writeln!(s, "set logscale xy");
    }
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let _ = writeln!(s, "set output '{}.png'", data.trim_end_matches(".csv"));
    let plots: Vec<String> =
        series.iter().enumerate().map(|(n, (x, y))| format!("{} using {x}:{y} with linespoints", if n == 0 { format!("'{data}'") } else { "''".into() })).collect();
    let _ = writeln!(s, "plot {}", plots.join(", "));
    s.into_bytes()
}

/// Every file of a report, in a fixed order.
pub fn render(report: &Report) -> AppResult<Vec<Artifact>> {
    let mut out = Vec::new();
    match report {
        Report::Check(_) => {}
        Report::Solve(r) => {
            out.push(Artifact::new("summary.csv", csv_bytes(&SUMMARY_HEADER, [summary_cols(&r.summary)])?));
            out.push(Artifact::new("solution.csv", final_slice_csv(&r.solution)?));
            out.push(Artifact::new("slabs/solution.slab", write_slab(&r.solution)));
        }
        Report::Converge(r) => {
            let rows = r.rows.iter().map(|row| {
                let mut v = vec![num(row.epsilon), num(row.error), num(row.spread)];
                v.extend(summary_cols(&row.solve));
                v
            });
            out.push(Artifact::new("errors.csv", csv_bytes(&with_summary(&["epsilon", "error", "spread"]), rows)?));
            let a = &r.averaged;
            out.push(Artifact::new(
                "summary.csv",
                key_values(vec![
                    ("horizon", num(r.horizon)),
                    ("t_min", num(r.window.t_min_fraction * r.horizon)),
                    ("window", r.window.half_width.map(num).unwrap_or_else(|| "all".into())),
                    ("slices", r.window.slices.iter().map(|y| num(*y)).collect::<Vec<_>>().join(" ")),
                    ("oscillation", num(r.oscillation)),
                    ("tolerance", num(r.tolerance)),
                    ("final_error", num(r.final_error())),
                    ("error_decreasing", r.error_decreasing.to_string()),
                    ("spread_decreasing", r.spread_decreasing.to_string()),
                    ("final_within_tolerance", r.final_within_tolerance.to_string()),
                    ("averaged_steps", a.steps.to_string()),
                    ("averaged_dt", num(a.dt)),
                    ("averaged_dpp", num(a.dpp)),
                    ("table_max_tolerance", num(r.table.max_tolerance())),
                ])?,
            ));
            out.extend(table_artifacts(&r.table)?);
            out.push(Artifact::new("slabs/averaged.slab", write_slab(&r.averaged_solution)));
            for (sol, row) in r.solutions.iter().zip(&r.rows) {
                out.push(Artifact::new(eps_slab(row.epsilon), write_slab(sol)));
            }
            out.push(Artifact::new("plot.gp", plot("errors.csv", "epsilon", "sup error", true, &[(1, 2), (1, 3)])));
        }
        Report::GheatOracle(r) => {
            let mut v = vec![num(r.error)];
            v.extend(summary_cols(&r.solve));
            out.push(Artifact::new("errors.csv", csv_bytes(&with_summary(&["error"]), [v])?));
            out.push(Artifact::new("solution.csv", final_slice_csv(&r.solution)?));
            out.push(Artifact::new("slabs/gheat.slab", write_slab(&r.solution)));
            out.push(Artifact::new("plot.gp", plot("solution.csv", "x", "u", false, &[(2, 4)])));
        }
        Report::MaxOracle(r) => {
            let mut rows = vec![{
                let mut v = vec!["averaged".to_string(), String::new(), num(r.averaged_error), String::new()];
                v.extend(summary_cols(&r.averaged));
                v
            }];
            for row in &r.rows {
                let mut v = vec!["two_scale".to_string(), num(row.epsilon), num(row.error), num(row.spread)];
                v.extend(summary_cols(&row.solve));
                rows.push(v);
            }
            out.push(Artifact::new("errors.csv", csv_bytes(&with_summary(&["route", "epsilon", "error", "spread"]), rows)?));
            out.push(Artifact::new(
                "summary.csv",
                key_values(vec![
                    ("mu_lo", num(r.mu_lo)),
                    ("mu_hi", num(r.mu_hi)),
                    ("mu_spread", num(r.mu_spread)),
                    ("averaged_error", num(r.averaged_error)),
                    ("decreasing", r.decreasing.to_string()),
                ])?,
            ));
            out.extend(table_artifacts(&r.table)?);
            out.push(Artifact::new("slabs/averaged.slab", write_slab(&r.averaged_solution)));
            for (sol, row) in r.solutions.iter().zip(&r.rows) {
                out.push(Artifact::new(eps_slab(row.epsilon), write_slab(sol)));
            }
            out.push(Artifact::new("plot.gp", plot("errors.csv", "epsilon", "sup error", true, &[(2, 3)])));
        }
        Report::Findim(r) => {
            let rows = r.rows.iter().map(|row| vec![num(row.epsilon), num(row.discrepancy), row.steps.to_string(), num(row.dt), num(row.dpp)]);
            out.push(Artifact::new("findim.csv", csv_bytes(&["epsilon", "discrepancy", "steps", "dt", "dpp_discrepancy"], rows)?));
            let route = match &r.route {
                crate::experiments::FindimRoute::Additive => "additive".to_string(),
                crate::experiments::FindimRoute::Nested { nodes } => format!("nested({} nodes)", nodes.len()),
            };
            out.push(Artifact::new(
                "summary.csv",
                key_values(vec![
                    ("t1", num(r.t1)),
                    ("t2", num(r.t2)),
                    ("route", route),
                    ("averaged_steps", r.averaged_steps.to_string()),
                    ("averaged_dt", num(r.averaged_dt)),
                    ("averaged_dpp", num(r.averaged_dpp)),
                    ("decreasing", r.decreasing.to_string()),
                ])?,
            ));
            let b_rows = r.route_b.iter().enumerate().map(|(i, v)| vec![num(r.spec.slow.x(i)), num(*v)]);
            out.push(Artifact::new("route_b.csv", csv_bytes(&["x_tilde", "value"], b_rows)?));
            out.push(Artifact::new("plot.gp", plot("findim.csv", "epsilon", "discrepancy", true, &[(1, 2)])));
        }
        Report::Generator(r) => {
            if let Some(t) = &r.table {
                out.extend(table_artifacts(t)?);
            }
            if let Some(p) = &r.properties {
                out.push(Artifact::new(
                    "properties.csv",
                    key_values(vec![
                        ("tolerance", num(p.tolerance)),
                        ("subadditivity_excess", num(p.subadditivity_excess)),
                        ("monotonicity_excess", num(p.monotonicity_excess)),
                        ("homogeneity_rel_error", num(p.homogeneity_rel_error)),
                        ("continuity_quotient", num(p.continuity_quotient)),
                    ])?,
                ));
            }
            if !r.probes.is_empty() {
                let rows = r.probes.iter().map(|pr| {
                    let s = &pr.sample;
                    vec![
                        num(s.x_tilde),
                        num(s.p),
                        num(s.a),
                        num(s.lambda_cesaro),
                        num(pr.ladder.limit),
                        num(s.xbar_spread),
                        num(s.tolerance_estimate),
                        num(pr.rate.fit_slope),
                        num(pr.rate.max_residual),
                        pr.rate.bounded.to_string(),
                    ]
                });
                out.push(Artifact::new(
                    "probes.csv",
                    csv_bytes(
                        &[
                            "x_tilde",
                            "p",
                            "a",
                            "lambda_cesaro",
                            "lambda_discounted",
                            "xbar_spread",
                            "tolerance",
                            "fit_slope",
                            "max_residual",
                            "bounded",
                        ],
                        rows,
                    )?,
                ));
                let mut rows = Vec::new();
                for (n, pr) in r.probes.iter().enumerate() {
                    let l = &pr.ladder;
                    for k in 0..l.alphas.len() {
                        rows.push(vec![n.to_string(), num(l.alphas[k]), num(l.values[k]), l.iterations[k].to_string(), num(l.residuals[k])]);
                    }
                }
                out.push(Artifact::new("ladder.csv", csv_bytes(&["probe", "alpha", "alpha_v", "iterations", "residual"], rows)?));
            }
        }
        Report::Contraction(r) => {
            let rows = r.rows.iter().map(|w| vec![num(w.t), num(w.mean_gap_sq), num(w.se), num(w.bound), num(w.allowed), w.passes.to_string()]);
            out.push(Artifact::new("contraction.csv", csv_bytes(&["t", "mean_gap_sq", "se", "bound", "allowed", "passes"], rows)?));
            out.push(Artifact::new("plot.gp", plot("contraction.csv", "t", "E gap^2", false, &[(1, 2), (1, 4)])));
        }
        Report::Khasminskii(r) => {
            let rows = r.rows.iter().map(|w| {
                vec![
                    num(w.epsilon),
                    num(w.delta),
                    w.steps_per_block.to_string(),
                    num(w.gap),
                    num(w.gap_se),
                    num(w.c_guess),
                    num(w.rho),
                    num(w.allowed),
                    w.passes.to_string(),
                ]
            });
            out.push(Artifact::new(
                "khasminskii.csv",
                csv_bytes(&["epsilon", "delta", "steps_per_block", "gap", "gap_se", "c_guess", "rho", "allowed", "passes"], rows)?,
            ));
            out.push(Artifact::new("plot.gp", plot("khasminskii.csv", "epsilon", "gap", true, &[(1, 4)])));
        }
        Report::Moments(r) => {
            let rows = r.rows.iter().map(|w| vec![num(w.epsilon), w.policy.to_string(), num(w.slow_m2), num(w.fast_m2), num(w.holder)]);
            out.push(Artifact::new("moments.csv", csv_bytes(&["epsilon", "policy", "slow_m2", "fast_m2", "holder"], rows)?));
        }
        Report::Simulate(r) => {
            let b = &r.batch;
            let mut text = format!(
                "# seed={} policy={} dt_sim={} paths={}\n",
                b.settings.seed,
                b.policy.describe(),
                num(b.settings.dt_sim),
                b.settings.n_paths
            )
            .into_bytes();
            let mut rows = Vec::with_capacity(b.paths.len() * b.times.len());
            for (p, path) in b.paths.iter().enumerate() {
                for (t, (x, y)) in b.times.iter().zip(path) {
                    rows.push(vec![p.to_string(), num(*t), num(*x), num(*y)]);
                }
            }
            text.extend(csv_bytes(&["path", "t", "x_tilde", "x_bar"], rows)?);
            out.push(Artifact::new("paths.csv", text));
            out.push(Artifact::new(
                "summary.csv",
                key_values(vec![("phi_mean", num(r.phi_mean.0)), ("phi_se", num(r.phi_mean.1)), ("dt_guard", num(b.dt_guard))])?,
            ));
        }
    }
    Ok(out)
}

fn wall_times(report: &Report) -> Vec<(String, f64)> {
    let mut w = Vec::new();
    match report {
        Report::Converge(r) => {
            w.push(("table".into(), r.table_wall_s));
            w.push(("averaged".into(), r.averaged.wall_s));
            for row in &r.rows {
                w.push((format!("eps_{}", num(row.epsilon)), row.solve.wall_s));
            }
        }
        Report::MaxOracle(r) => {
            w.push(("averaged".into(), r.averaged.wall_s));
            for row in &r.rows {
                w.push((format!("eps_{}", num(row.epsilon)), row.solve.wall_s));
            }
        }
        Report::GheatOracle(r) => w.push(("gheat".into(), r.solve.wall_s)),
        Report::Solve(r) => w.push(("solve".into(), r.summary.wall_s)),
        _ => {}
    }
    w
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes every artifact of `report` and a manifest listing each with its
/// sha256. Returns the manifest entries.
pub fn emit_outputs(report: &Report, cfg: &ExperimentConfig, dir: &Path, total_wall_s: f64) -> AppResult<Vec<(String, String)>> {
    let artifacts = render(report)?;
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut entries = Vec::with_capacity(artifacts.len());
    for a in &artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
        fs::write(&path, &a.bytes).map_err(|e| AppError::io(&path, e))?;
        entries.push((a.path.clone(), sha256_hex(&a.bytes)));
    }

    let mut m = String::new();
    let _ = writeln!(m, "kind = {}", report.kind());
    let _ = writeln!(m, "config_sha256 = {}", cfg.config_sha256);
    let _ = writeln!(m, "seed = {}", cfg.seed);
    let _ = writeln!(m, "threads = {}", cfg.threads);
    let _ = writeln!(m, "gavg = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "gavg-core = {}", gavg_core::VERSION);
    let _ = writeln!(m, "verdict = {}", report.verdict().err().unwrap_or_else(|| "pass".into()));
    let _ = writeln!(m, "wall_s.total = {total_wall_s:.3}");
    for (k, v) in wall_times(report) {
        let _ = writeln!(m, "wall_s.{k} = {v:.3}");
    }
    for (p, h) in &entries {
        let _ = writeln!(m, "file {p} sha256 {h}");
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, m).map_err(|e| AppError::io(&path, e))?;
    Ok(entries)
}
