//! Sweep orchestration: batch spectra over (h, ε) grids, FD↔WKB comparison
//! reports, empirical bifurcation-threshold measurement, and CSV/SVG output.
//!
//! Everything here is driven by a [`RunConfig`] loaded from a TOML file.  A
//! run is reproducible from its config alone: solver seeds and shift grids
//! are deterministic, output rows are sorted by (h, ε, Re λ, Im λ), and every
//! CSV row carries a 16-hex-digit hash of the canonical config so that rows
//! from different experiments cannot be mixed up silently.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actions::action_j;
use crate::error::{Error, Result};
use crate::fdsolve::{assemble, default_grid, eigs_near, eigs_window, Grid};
use crate::numerics::Rectangle;
use crate::potential::{classify_wells, PerturbedPotential, WellStructure};
use crate::quantization::{bs_levels, find_f_roots, localization_radius, SpectralParams};
use crate::turning::turning_points;
use crate::{bifurcation, WellSide};

pub const SPECTRUM_HEADER: &str = "method,h,epsilon,re_lambda,im_lambda,residual,config_hash";
pub const THRESHOLD_HEADER: &str = "E1,h,eps_c_model,eps_star_fd,ratio,config_hash";
pub const ERRORS_HEADER: &str = "h,epsilon,engine,message";

/// Absolute radius around the ε=0 doublet center inside which eigenvalues
/// count as "the tracked pair" during threshold bisection.  Far below the
/// level spacing, far above both the pair splitting and its drift under the
/// sub-threshold perturbation strengths probed.
const TRACK_RADIUS: f64 = 1e-3;
const BISECTION_STEPS: usize = 40;

/// Caps the sweep worker pool.  A no-op once any parallel work has run.
pub fn set_worker_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// coefficients of V0, ascending powers
    pub v0: Vec<f64>,
    /// coefficients of W, ascending powers
    pub w: Vec<f64>,
    #[serde(default = "default_true")]
    pub pt_enforced: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// half-width of the computational box; derived from the turning points
    /// when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// grid size; ceil(40/h) rounded up to even (min 200) when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// box size as a multiple of the outermost turning point
    #[serde(default = "default_factor")]
    pub factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub h: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub center_re: f64,
    #[serde(default)]
    pub center_im: f64,
    pub half_width: f64,
    pub half_height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_restart")]
    pub max_restart: usize,
    /// estimated eigenvalue spacing, used to pitch the window shift grid
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_spacing: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            m: default_m(),
            max_restart: default_restart(),
            level_spacing: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { n_nodes: default_nodes() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

// scalar fields first: TOML requires values before tables when serializing
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// reference energy at which the double-well structure is classified
    pub e0: f64,
    #[serde(default = "default_c")]
    pub localization_c: f64,
    pub potential: PotentialSection,
    #[serde(default)]
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub window: WindowSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

fn default_true() -> bool {
    true
}
fn default_factor() -> f64 {
    1.5
}
fn default_tol() -> f64 {
    1e-10
}
fn default_m() -> usize {
    8
}
fn default_restart() -> usize {
    4
}
fn default_nodes() -> usize {
    96
}
fn default_c() -> f64 {
    10.0
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "svg".into()]
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks every module precondition that the run will rely on, so a bad
    /// experiment dies at load time rather than mid-sweep.
    pub fn validate(&self) -> Result<()> {
        let pot = self.potential()?;
        classify_wells(&pot, self.e0)?;
        self.window()?;
        if self.sweep.h.is_empty() || self.sweep.eps.is_empty() {
            return Err(Error::Config("sweep.h and sweep.eps must be non-empty".into()));
        }
        for &h in &self.sweep.h {
            SpectralParams::new(h, 0.0)?;
        }
        for &eps in &self.sweep.eps {
            if !eps.is_finite() {
                return Err(Error::Config(format!("sweep.eps contains {eps}")));
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(Error::Config(format!("solver.tol must be positive, got {}", s.tol)));
        }
        if s.m == 0 || s.m > 40 {
            return Err(Error::Config(format!("solver.m must lie in 1..=40, got {}", s.m)));
        }
        if s.max_restart == 0 {
            return Err(Error::Config("solver.max_restart must be at least 1".into()));
        }
        if let Some(d) = s.level_spacing {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("solver.level_spacing must be positive, got {d}")));
            }
        }
        if self.quadrature.n_nodes == 0 {
            return Err(Error::Config("quadrature.n_nodes must be at least 1".into()));
        }
        if !(self.localization_c > 0.0) {
            return Err(Error::Config(format!(
                "localization_c must be positive, got {}",
                self.localization_c
            )));
        }
        if let Some(l) = self.grid.l {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("grid.l must be positive, got {l}")));
            }
        }
        if let Some(n) = self.grid.n {
            if n < 200 || n % 2 != 0 {
                return Err(Error::Config(format!("grid.n must be even and at least 200, got {n}")));
            }
        }
        if !(self.grid.factor >= 1.0) {
            return Err(Error::Config(format!("grid.factor must be at least 1, got {}", self.grid.factor)));
        }
        for f in &self.output.formats {
            if f != "csv" && f != "svg" {
                return Err(Error::Config(format!("unknown output format {f:?}")));
            }
        }
        if self.output.directory.as_os_str().is_empty() {
            return Err(Error::Config("output.directory must be set".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical re-serialization.
    /// Stable across whitespace/comment/ordering differences in the source
    /// file; sensitive to every field value.
    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn potential(&self) -> Result<PerturbedPotential> {
        PerturbedPotential::new(
            self.potential.v0.clone(),
            self.potential.w.clone(),
            self.potential.pt_enforced,
        )
    }

    pub fn wells(&self) -> Result<WellStructure> {
        classify_wells(&self.potential()?, self.e0)
    }

    pub fn window(&self) -> Result<Rectangle> {
        Rectangle::new(
            Complex64::new(self.window.center_re, self.window.center_im),
            self.window.half_width,
            self.window.half_height,
        )
    }

    /// Grid for one sweep cell: explicit l/n win over the turning-point
    /// policy.
    pub fn grid_for(&self, pot: &PerturbedPotential, h: f64) -> Result<Grid> {
        let e_top = self.window.center_re + self.window.half_width;
        let auto = default_grid(pot, h, e_top, self.grid.factor)?;
        let l = self.grid.l.unwrap_or(auto.l);
        let n = self.grid.n.unwrap_or(auto.n);
        Grid::new(l, n)
    }
}

// ---------------------------------------------------------------------------
// spectrum rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Fd,
    Wkb,
    Bs,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fd => "fd",
            Method::Wkb => "wkb",
            Method::Bs => "bs",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "fd" => Ok(Method::Fd),
            "wkb" => Ok(Method::Wkb),
            "bs" => Ok(Method::Bs),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub method: Method,
    pub h: f64,
    pub eps: f64,
    pub lambda: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CellError {
    pub h: f64,
    pub eps: f64,
    pub engine: String,
    pub message: String,
}

#[derive(Debug)]
pub struct SweepResult {
    pub rows: Vec<SpectrumRow>,
    pub errors: Vec<CellError>,
    pub config_hash: String,
}

fn sort_rows(rows: &mut [SpectrumRow]) {
    rows.sort_by(|a, b| {
        a.h.total_cmp(&b.h)
            .then(a.eps.total_cmp(&b.eps))
            .then(a.lambda.re.total_cmp(&b.lambda.re))
            .then(a.lambda.im.total_cmp(&b.lambda.im))
            .then(a.method.cmp(&b.method))
    });
}

fn sort_errors(errors: &mut [CellError]) {
    errors.sort_by(|a, b| {
        a.h.total_cmp(&b.h).then(a.eps.total_cmp(&b.eps)).then(a.engine.cmp(&b.engine))
    });
}

/// Finite-difference spectra over the whole (h, ε) grid.  Cells run on the
/// worker pool; any cell that fails is recorded and the sweep continues.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let pot = cfg.potential()?;
    let window = cfg.window()?;
    let hash = cfg.hash();
    let cells: Vec<(f64, f64)> = cfg
        .sweep
        .h
        .iter()
        .flat_map(|&h| cfg.sweep.eps.iter().map(move |&eps| (h, eps)))
        .collect();

    let per_cell: Vec<(Vec<SpectrumRow>, Vec<CellError>)> = cells
        .par_iter()
        .map(|&(h, eps)| {
            let mut rows = Vec::new();
            let mut errors = Vec::new();
            match fd_cell(cfg, &pot, &window, h, eps) {
                Ok((cell_rows, incomplete)) => {
                    rows.extend(cell_rows);
                    if incomplete {
                        errors.push(CellError {
                            h,
                            eps,
                            engine: "fd".into(),
                            message: "window sweeps disagreed; eigenvalue list may be incomplete"
                                .into(),
                        });
                    }
                }
                Err(e) => errors.push(CellError { h, eps, engine: "fd".into(), message: e.to_string() }),
            }
            (rows, errors)
        })
        .collect();

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (r, e) in per_cell {
        rows.extend(r);
        errors.extend(e);
    }
    sort_rows(&mut rows);
    sort_errors(&mut errors);
    Ok(SweepResult { rows, errors, config_hash: hash })
}

fn fd_cell(
    cfg: &RunConfig,
    pot: &PerturbedPotential,
    window: &Rectangle,
    h: f64,
    eps: f64,
) -> Result<(Vec<SpectrumRow>, bool)> {
    let grid = cfg.grid_for(pot, h)?;
    let opr = assemble(pot, grid, h, eps);
    let set = eigs_window(&opr, window, cfg.solver.tol, cfg.solver.level_spacing)?;
    let rows = set
        .pairs
        .iter()
        .map(|&(lambda, residual)| SpectrumRow { method: Method::Fd, h, eps, lambda, residual })
        .collect();
    Ok((rows, set.incomplete))
}

/// Quantization-condition spectra (certified roots of f plus the raw
/// Bohr–Sommerfeld ladder) over the same grid, same row schema.
pub fn wkb_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let pot = cfg.potential()?;
    let wells = cfg.wells()?;
    let window = cfg.window()?;
    let hash = cfg.hash();
    let cells: Vec<(f64, f64)> = cfg
        .sweep
        .h
        .iter()
        .flat_map(|&h| cfg.sweep.eps.iter().map(move |&eps| (h, eps)))
        .collect();

    let per_cell: Vec<(Vec<SpectrumRow>, Vec<CellError>)> = cells
        .par_iter()
        .map(|&(h, eps)| {
            let mut rows = Vec::new();
            let mut errors = Vec::new();
            let params = match SpectralParams::new(h, eps) {
                Ok(p) => p,
                Err(e) => {
                    errors.push(CellError { h, eps, engine: "wkb".into(), message: e.to_string() });
                    return (rows, errors);
                }
            };
            match find_f_roots(&pot, &params, &window, &wells) {
                Ok(roots) => {
                    for r in roots {
                        for _ in 0..r.multiplicity.max(1) {
                            rows.push(SpectrumRow {
                                method: Method::Wkb,
                                h,
                                eps,
                                lambda: r.e,
                                residual: r.newton_residual,
                            });
                        }
                    }
                }
                Err(e) => errors.push(CellError { h, eps, engine: "wkb".into(), message: e.to_string() }),
            }
            for side in [WellSide::Left, WellSide::Right] {
                match bs_levels(&pot, &params, &window, side, &wells) {
                    Ok(levels) => {
                        for lvl in levels {
                            rows.push(SpectrumRow {
                                method: Method::Bs,
                                h,
                                eps,
                                lambda: lvl.e,
                                residual: lvl.residual,
                            });
                        }
                    }
                    Err(e) => {
                        errors.push(CellError { h, eps, engine: "bs".into(), message: e.to_string() })
                    }
                }
            }
            (rows, errors)
        })
        .collect();

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (r, e) in per_cell {
        rows.extend(r);
        errors.extend(e);
    }
    sort_rows(&mut rows);
    sort_errors(&mut errors);
    Ok(SweepResult { rows, errors, config_hash: hash })
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_spectrum_csv(out: &mut dyn std::io::Write, rows: &[SpectrumRow], hash: &str) -> Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            fmt_f(r.h),
            fmt_f(r.eps),
            fmt_f(r.lambda.re),
            fmt_f(r.lambda.im),
            fmt_f(r.residual),
            hash
        )?;
    }
    Ok(())
}

pub fn write_errors_csv(out: &mut dyn std::io::Write, errors: &[CellError]) -> Result<()> {
    writeln!(out, "{ERRORS_HEADER}")?;
    for e in errors {
        // commas in messages would shear the row apart
        let msg = e.message.replace(',', ";");
        writeln!(out, "{},{},{},{}", fmt_f(e.h), fmt_f(e.eps), e.engine, msg)?;
    }
    Ok(())
}

/// Writes spectrum.csv (and errors.csv when anything failed) into the
/// configured output directory; returns the spectrum path.
pub fn emit_sweep(cfg: &RunConfig, result: &SweepResult) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output.directory)?;
    let spectrum = cfg.output.directory.join("spectrum.csv");
    let mut buf = Vec::new();
    write_spectrum_csv(&mut buf, &result.rows, &result.config_hash)?;
    fs::write(&spectrum, buf)?;
    if !result.errors.is_empty() {
        let mut buf = Vec::new();
        write_errors_csv(&mut buf, &result.errors)?;
        fs::write(cfg.output.directory.join("errors.csv"), buf)?;
    }
    Ok(spectrum)
}

/// Reads a spectrum.csv back; refuses files whose rows carry more than one
/// config hash.
pub fn read_spectrum_csv(path: &Path) -> Result<(Vec<SpectrumRow>, String)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SPECTRUM_HEADER => {}
        other => return Err(Error::Config(format!("bad spectrum header: {other:?}"))),
    }
    let mut rows = Vec::new();
    let mut hash: Option<String> = None;
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!("row {}: expected 7 fields", k + 2)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Config(format!("row {}: bad number {s:?}", k + 2)))
        };
        rows.push(SpectrumRow {
            method: fields[0].parse()?,
            h: parse(fields[1])?,
            eps: parse(fields[2])?,
            lambda: Complex64::new(parse(fields[3])?, parse(fields[4])?),
            residual: parse(fields[5])?,
        });
        match &hash {
            None => hash = Some(fields[6].to_string()),
            Some(prev) if prev == fields[6] => {}
            Some(prev) => {
                return Err(Error::Config(format!(
                    "mixed config hashes in {}: {prev} vs {}",
                    path.display(),
                    fields[6]
                )))
            }
        }
    }
    Ok((rows, hash.unwrap_or_default()))
}

// ---------------------------------------------------------------------------
// FD ↔ WKB comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct MatchedPair {
    pub lambda_fd: Complex64,
    pub e_wkb: Complex64,
    pub delta: f64,
    /// lies in some localization disc D(E_k, C·r) or its conjugate
    pub contained: bool,
}

#[derive(Debug, Clone)]
pub struct CellReport {
    pub h: f64,
    pub eps: f64,
    pub matched: Vec<MatchedPair>,
    pub unmatched_fd: Vec<(Complex64, bool)>,
    pub unmatched_wkb: Vec<Complex64>,
    pub max_delta: f64,
    pub cardinality_mismatch: bool,
}

#[derive(Debug)]
pub struct CompareReport {
    pub cells: Vec<CellReport>,
    pub config_hash: String,
}

/// Greedy globally-nearest matching between two eigenvalue lists: repeatedly
/// pair the closest remaining (fd, wkb) couple.
fn greedy_match(fd: &[Complex64], wkb: &[Complex64]) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let mut pairs = Vec::new();
    let mut fd_free: Vec<usize> = (0..fd.len()).collect();
    let mut wkb_free: Vec<usize> = (0..wkb.len()).collect();
    while !fd_free.is_empty() && !wkb_free.is_empty() {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (a, &i) in fd_free.iter().enumerate() {
            for (b, &j) in wkb_free.iter().enumerate() {
                let d = (fd[i] - wkb[j]).norm();
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        pairs.push((fd_free.remove(best.0), wkb_free.remove(best.1)));
    }
    (pairs, fd_free, wkb_free)
}

/// Runs both engines over every sweep cell and reports nearest-match
/// distances plus localization-disc containment of each FD eigenvalue.
/// Count disagreements are recorded per cell, not fatal.
pub fn compare_spectrum(cfg: &RunConfig) -> Result<CompareReport> {
    let pot = cfg.potential()?;
    let wells = cfg.wells()?;
    let window = cfg.window()?;
    let hash = cfg.hash();
    let cells: Vec<(f64, f64)> = cfg
        .sweep
        .h
        .iter()
        .flat_map(|&h| cfg.sweep.eps.iter().map(move |&eps| (h, eps)))
        .collect();

    let reports: Vec<Result<CellReport>> = cells
        .par_iter()
        .map(|&(h, eps)| {
            let (fd_rows, _) = fd_cell(cfg, &pot, &window, h, eps)?;
            let fd: Vec<Complex64> = fd_rows.iter().map(|r| r.lambda).collect();
            let params = SpectralParams::new(h, eps)?;
            let roots = find_f_roots(&pot, &params, &window, &wells)?;
            let mut wkb = Vec::new();
            for r in &roots {
                for _ in 0..r.multiplicity.max(1) {
                    wkb.push(r.e);
                }
            }

            // one localization disc per root, radius from the tunneling
            // action at that energy
            let mut radii = Vec::with_capacity(roots.len());
            for r in &roots {
                let tp = turning_points(&pot, r.e, eps, &wells)?;
                let j = action_j(&pot, &tp, cfg.quadrature.n_nodes)?;
                radii.push(localization_radius(eps, h, j, cfg.localization_c));
            }
            let contained = |lambda: Complex64| -> bool {
                roots.iter().zip(&radii).any(|(r, &rad)| {
                    (lambda - r.e).norm() <= rad || (lambda - r.e.conj()).norm() <= rad
                })
            };

            let (pairs, fd_rest, wkb_rest) = greedy_match(&fd, &wkb);
            let matched: Vec<MatchedPair> = pairs
                .iter()
                .map(|&(i, j)| MatchedPair {
                    lambda_fd: fd[i],
                    e_wkb: wkb[j],
                    delta: (fd[i] - wkb[j]).norm(),
                    contained: contained(fd[i]),
                })
                .collect();
            let max_delta = matched.iter().map(|m| m.delta).fold(0.0, f64::max);
            Ok(CellReport {
                h,
                eps,
                unmatched_fd: fd_rest.iter().map(|&i| (fd[i], contained(fd[i]))).collect(),
                unmatched_wkb: wkb_rest.iter().map(|&j| wkb[j]).collect(),
                cardinality_mismatch: fd.len() != wkb.len(),
                matched,
                max_delta,
            })
        })
        .collect();

    let mut cells: Vec<CellReport> = reports.into_iter().collect::<Result<_>>()?;
    cells.sort_by(|a, b| a.h.total_cmp(&b.h).then(a.eps.total_cmp(&b.eps)));
    Ok(CompareReport { cells, config_hash: hash })
}

pub fn write_compare_csv(out: &mut dyn std::io::Write, report: &CompareReport) -> Result<()> {
    writeln!(
        out,
        "h,epsilon,re_lambda_fd,im_lambda_fd,re_e_wkb,im_e_wkb,delta,contained,config_hash"
    )?;
    for cell in &report.cells {
        for m in &cell.matched {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f(cell.h),
                fmt_f(cell.eps),
                fmt_f(m.lambda_fd.re),
                fmt_f(m.lambda_fd.im),
                fmt_f(m.e_wkb.re),
                fmt_f(m.e_wkb.im),
                fmt_f(m.delta),
                m.contained,
                report.config_hash
            )?;
        }
        for &(l, contained) in &cell.unmatched_fd {
            writeln!(
                out,
                "{},{},{},{},,,,{},{}",
                fmt_f(cell.h),
                fmt_f(cell.eps),
                fmt_f(l.re),
                fmt_f(l.im),
                contained,
                report.config_hash
            )?;
        }
        for &e in &cell.unmatched_wkb {
            writeln!(
                out,
                "{},{},,,{},{},,,{}",
                fmt_f(cell.h),
                fmt_f(cell.eps),
                fmt_f(e.re),
                fmt_f(e.im),
                report.config_hash
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// empirical bifurcation threshold
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ThresholdMeasurement {
    pub e1: f64,
    pub h: f64,
    /// leading-order model threshold h·ε̃_c
    pub eps_c_model: f64,
    /// bisected FD threshold
    pub eps_star: f64,
    pub ratio: f64,
}

/// Measures the perturbation strength at which the real doublet nearest E1
/// turns into a complex-conjugate pair, by bisection on the FD oracle.
///
/// The pair is re-identified at every probed ε as the eigenvalues within a
/// fixed small radius of the ε=0 doublet center; losing *both* members is a
/// tracking failure.  The reality test is relative: Im parts are compared
/// against the ε=0 splitting plus the h·e^{-J/h} coupling scale, because at
/// threshold the two are comparable.
pub fn empirical_threshold(cfg: &RunConfig, e1: f64, h: f64) -> Result<ThresholdMeasurement> {
    let pot = cfg.potential()?;
    let wells = cfg.wells()?;
    let model = bifurcation::build_model(&pot, e1, h, &wells, 0.0)?;
    let grid = cfg.grid_for(&pot, h)?;
    let tol = cfg.solver.tol;
    let restarts = cfg.solver.max_restart;

    // identify the doublet at ε = 0: the closest pair among the four
    // eigenvalues nearest E1
    let op0 = assemble(&pot, grid, h, 0.0);
    let near = eigs_near(&op0, Complex64::new(e1, 0.0), 4, tol, restarts)?;
    let ls = near.lambdas();
    if ls.len() < 2 {
        return Err(Error::PairLost);
    }
    let mut best = (0usize, 1usize, f64::INFINITY);
    for i in 0..ls.len() {
        for j in i + 1..ls.len() {
            let d = (ls[i] - ls[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    let splitting0 = best.2;
    if splitting0 > TRACK_RADIUS {
        return Err(Error::PairLost);
    }
    let center = 0.5 * (ls[best.0] + ls[best.1]);
    let coupling = if model.j_val / h > 700.0 { 0.0 } else { h * (-model.j_val / h).exp() };
    let scale = 1e-3 * (splitting0 + coupling);

    let pair_is_complex = |eps: f64| -> Result<bool> {
        let opr = assemble(&pot, grid, h, eps);
        let set = eigs_near(&opr, center, 4, tol, restarts)?;
        let members: Vec<Complex64> =
            set.lambdas().into_iter().filter(|l| (l - center).norm() <= TRACK_RADIUS).collect();
        if members.is_empty() {
            return Err(Error::PairLost);
        }
        Ok(members.iter().map(|l| l.im.abs()).fold(0.0, f64::max) > scale)
    };

    let mut lo = 0.0;
    let mut hi = 10.0 * model.eps_c;
    if !pair_is_complex(hi)? {
        return Err(Error::NoConvergence { context: "threshold bracket" });
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if pair_is_complex(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eps_star = 0.5 * (lo + hi);
    Ok(ThresholdMeasurement {
        e1,
        h,
        eps_c_model: model.eps_c,
        eps_star,
        ratio: eps_star / model.eps_c,
    })
}

pub fn write_threshold_csv(
    out: &mut dyn std::io::Write,
    rows: &[ThresholdMeasurement],
    hash: &str,
) -> Result<()> {
    writeln!(out, "{THRESHOLD_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f(r.e1),
            fmt_f(r.h),
            fmt_f(r.eps_c_model),
            fmt_f(r.eps_star),
            fmt_f(r.ratio),
            hash
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scatter figure (native SVG)
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct FigureOutput {
    pub svg: PathBuf,
    pub csv: PathBuf,
    pub panels: usize,
    pub points: usize,
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 170.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const PANEL_GAP: f64 = 26.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

/// Runs the sweep and renders one scatter panel per (h, ε) cell: Re λ
/// horizontal, Im λ vertical, a circle per eigenvalue.  Panel ranges are
/// auto-scaled from the data and recorded in the SVG's desc element.
pub fn figure1(cfg: &RunConfig) -> Result<FigureOutput> {
    let result = run_sweep(cfg)?;
    let csv = emit_sweep(cfg, &result)?;

    let mut panels: Vec<(f64, f64, Vec<Complex64>)> = Vec::new();
    for row in &result.rows {
        match panels.last_mut() {
            Some(p) if p.0 == row.h && p.1 == row.eps => p.2.push(row.lambda),
            _ => panels.push((row.h, row.eps, vec![row.lambda])),
        }
    }

    let width = MARGIN_L + PANEL_W + MARGIN_R;
    let height = MARGIN_T + panels.len() as f64 * (PANEL_H + PANEL_GAP) + MARGIN_B;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));

    let mut meta = format!("{{\"config_hash\":\"{}\",\"panels\":[", result.config_hash);
    let mut points = 0usize;
    let mut body = String::new();
    for (k, (h, eps, lambdas)) in panels.iter().enumerate() {
        let top = MARGIN_T + k as f64 * (PANEL_H + PANEL_GAP);
        let (x0, x1) = pad_range(
            lambdas.iter().map(|l| l.re),
            cfg.window.center_re - cfg.window.half_width,
            cfg.window.center_re + cfg.window.half_width,
        );
        let ymax = lambdas.iter().map(|l| l.im.abs()).fold(1e-6, f64::max) * 1.15;
        let (y0, y1) = (-ymax, ymax);
        if k > 0 {
            meta.push(',');
        }
        meta.push_str(&format!(
            "{{\"h\":{h:e},\"eps\":{eps:e},\"x\":[{x0:e},{x1:e}],\"y\":[{y0:e},{y1:e}],\"points\":{}}}",
            lambdas.len()
        ));

        let sx = |re: f64| MARGIN_L + (re - x0) / (x1 - x0) * PANEL_W;
        let sy = |im: f64| top + (y1 - im) / (y1 - y0) * PANEL_H;
        body.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{top}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" \
             fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n"
        ));
        // real axis
        body.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ccc\" stroke-width=\"1\"/>\n",
            sy(0.0),
            MARGIN_L + PANEL_W,
            sy(0.0)
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">h = {h}, eps = {eps:e}</text>\n",
            MARGIN_L,
            top - 6.0
        ));
        for t in 0..5 {
            let re = x0 + (x1 - x0) * t as f64 / 4.0;
            body.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"9\" font-family=\"sans-serif\" text-anchor=\"middle\">{re:.3}</text>\n",
                sx(re),
                top + PANEL_H + 12.0
            ));
        }
        for (t, im) in [(0, y1), (1, 0.0), (2, y0)] {
            body.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"9\" font-family=\"sans-serif\" text-anchor=\"end\">{im:.1e}</text>\n",
                MARGIN_L - 5.0,
                top + PANEL_H * t as f64 / 2.0 + 3.0
            ));
        }
        for l in lambdas {
            body.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#1f6fb2\"/>\n",
                sx(l.re),
                sy(l.im)
            ));
            points += 1;
        }
    }
    meta.push_str("]}");
    svg.push_str(&format!("<desc>{meta}</desc>\n"));
    svg.push_str(&body);
    svg.push_str("</svg>\n");

    let svg_path = cfg.output.directory.join("figure1.svg");
    fs::write(&svg_path, svg)?;
    Ok(FigureOutput { svg: svg_path, csv, panels: panels.len(), points })
}

fn pad_range(values: impl Iterator<Item = f64>, fallback_lo: f64, fallback_hi: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo < hi) {
        (lo, hi) = (fallback_lo, fallback_hi);
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    (lo - pad, hi + pad)
}
