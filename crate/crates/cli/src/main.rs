//! `ptwell` — spectra of PT-symmetric perturbed double-well operators from
//! the command line.  Every subcommand is driven by a TOML experiment config;
//! numeric output goes into CSV/SVG files under the configured (or
//! overridden) output directory, small results print as JSON on stdout.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use ptwell_core::harness::{
    self, compare_spectrum, emit_sweep, empirical_threshold, figure1, run_sweep, wkb_sweep,
    write_compare_csv, write_threshold_csv, RunConfig,
};
use ptwell_core::stokes::{seed_angles, trace_stokes, StokesCurve, StokesKind};
use ptwell_core::{action_set, build_model, classify, turning_points, Error, Rectangle};

#[derive(Parser)]
#[command(name = "ptwell", version, about = "Double-well PT spectra: finite differences cross-validated against complex-WKB quantization")]
struct Cli {
    /// experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override the configured output directory
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// worker threads for sweep cells (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// exit 4 when compare/threshold results land outside their bands
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Finite-difference spectra over the configured (h, eps) grid
    Spectrum,
    /// Quantization-condition roots and Bohr-Sommerfeld ladders as CSV
    WkbRoots {
        /// single h instead of the configured sweep list
        #[arg(long)]
        h: Option<f64>,
        /// single eps instead of the configured sweep list
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
    },
    /// Action integrals and their derivatives at one complex energy
    Actions {
        /// energy as re or re,im
        #[arg(long = "E", value_parser = parse_complex, allow_hyphen_values = true)]
        e: Complex64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps: f64,
        /// echoed into the output; the integrals themselves do not depend on it
        #[arg(long)]
        h: Option<f64>,
    },
    /// Leading-order eigenvalue-collision model at (E1, h)
    Bifurcation {
        #[arg(long = "E1", allow_hyphen_values = true)]
        e1: f64,
        #[arg(long)]
        h: f64,
    },
    /// Stokes / anti-Stokes curve families from the four turning points
    Stokes {
        /// energy as re or re,im
        #[arg(long = "E", value_parser = parse_complex, allow_hyphen_values = true)]
        e: Complex64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps: f64,
        /// also render the curve family as SVG
        #[arg(long)]
        svg: bool,
    },
    /// Nearest-match FD vs WKB report per sweep cell
    Compare,
    /// Empirical PT-breaking threshold for each configured h
    Threshold {
        /// anchor energy; defaults to the config's e0
        #[arg(long = "E1", allow_hyphen_values = true)]
        e1: Option<f64>,
    },
    /// Full scatter figure over the configured sweep
    Figure1,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse(re)?, parse(im)?)),
        None => Ok(Complex64::new(parse(s)?, 0.0)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        harness::set_worker_threads(n);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.out_dir {
        cfg.output.directory = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.cmd {
        Cmd::Spectrum => {
            let cfg = load_config(cli)?;
            let result = run_sweep(&cfg)?;
            let path = emit_sweep(&cfg, &result)?;
            println!(
                "{} rows ({} cell errors) -> {}",
                result.rows.len(),
                result.errors.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::WkbRoots { h, eps } => {
            let mut cfg = load_config(cli)?;
            if let Some(h) = h {
                cfg.sweep.h = vec![*h];
            }
            if let Some(eps) = eps {
                cfg.sweep.eps = vec![*eps];
            }
            cfg.validate()?;
            let result = wkb_sweep(&cfg)?;
            fs::create_dir_all(&cfg.output.directory)?;
            let path = cfg.output.directory.join("wkb_roots.csv");
            let mut buf = Vec::new();
            harness::write_spectrum_csv(&mut buf, &result.rows, &result.config_hash)?;
            fs::write(&path, buf)?;
            println!(
                "{} rows ({} cell errors) -> {}",
                result.rows.len(),
                result.errors.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Actions { e, eps, h } => {
            let cfg = load_config(cli)?;
            let pot = cfg.potential()?;
            let wells = cfg.wells()?;
            let set = action_set(&pot, *e, *eps, &wells, cfg.quadrature.n_nodes)?;
            let mut out = json!({
                "E_re": set.e.re, "E_im": set.e.im, "eps": set.eps,
                "I_l_re": set.i_l.re, "I_l_im": set.i_l.im,
                "I_r_re": set.i_r.re, "I_r_im": set.i_r.im,
                "J_re": set.j.re, "J_im": set.j.im,
                "dIl_dE_re": set.dil_de.re, "dIl_dE_im": set.dil_de.im,
                "dIr_dE_re": set.dir_de.re, "dIr_dE_im": set.dir_de.im,
                "dIl_deps_re": set.dil_deps.re, "dIl_deps_im": set.dil_deps.im,
                "dIr_deps_re": set.dir_deps.re, "dIr_deps_im": set.dir_deps.im,
                "dJ_dE_re": set.dj_de.re, "dJ_dE_im": set.dj_de.im,
                "residual": set.residual,
            });
            if let Some(h) = h {
                out["h"] = json!(h);
            }
            println!("{out}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bifurcation { e1, h } => {
            let cfg = load_config(cli)?;
            let pot = cfg.potential()?;
            let wells = cfg.wells()?;
            let model = build_model(&pot, *e1, *h, &wells, 0.0)?;
            println!(
                "{}",
                json!({
                    "E1": model.e1, "h": model.h,
                    "eps_c": model.eps_c, "eps_tilde_c": model.eps_tilde_c,
                    "q0": model.q0, "m0": model.m0,
                    "J": model.j_val, "dI_dE": model.di_de,
                    "dI_deps_abs": model.di_deps_abs, "F_c": model.f_c,
                })
            );
            for &eps in &cfg.sweep.eps {
                let class = classify(eps / h, &model);
                println!("eps={eps:e} eps_tilde={:e} class={class:?}", eps / h);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Stokes { e, eps, svg } => {
            let cfg = load_config(cli)?;
            let curves = trace_families(&cfg, *e, *eps)?;
            fs::create_dir_all(&cfg.output.directory)?;
            let path = cfg.output.directory.join("stokes.csv");
            fs::write(&path, stokes_csv(&curves))?;
            println!(
                "convention: stokes = level curves of Re phi, anti-stokes = level curves of Im phi"
            );
            println!("{} curves -> {}", curves.len(), path.display());
            if *svg {
                let svg_path = cfg.output.directory.join("stokes.svg");
                fs::write(&svg_path, stokes_svg(&curves))?;
                println!("figure -> {}", svg_path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare => {
            let cfg = load_config(cli)?;
            let report = compare_spectrum(&cfg)?;
            fs::create_dir_all(&cfg.output.directory)?;
            let path = cfg.output.directory.join("compare.csv");
            let mut buf = Vec::new();
            write_compare_csv(&mut buf, &report)?;
            fs::write(&path, buf)?;
            let mut violated = false;
            for cell in &report.cells {
                let uncontained = cell.matched.iter().any(|m| !m.contained)
                    || cell.unmatched_fd.iter().any(|&(_, c)| !c);
                println!(
                    "h={} eps={:e}: {} matched (max |delta| {:.3e}), {} fd / {} wkb unmatched{}{}",
                    cell.h,
                    cell.eps,
                    cell.matched.len(),
                    cell.max_delta,
                    cell.unmatched_fd.len(),
                    cell.unmatched_wkb.len(),
                    if cell.cardinality_mismatch { ", count mismatch" } else { "" },
                    if uncontained { ", eigenvalues outside localization discs" } else { "" },
                );
                violated |= cell.cardinality_mismatch
                    || cell.max_delta > 0.05 * cell.h
                    || uncontained;
            }
            println!("report -> {}", path.display());
            if cli.strict && violated {
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Threshold { e1 } => {
            let cfg = load_config(cli)?;
            let e1 = e1.unwrap_or(cfg.e0);
            let mut rows = Vec::new();
            for &h in &cfg.sweep.h {
                let t = empirical_threshold(&cfg, e1, h)?;
                println!(
                    "h={h}: eps* = {:e}, model eps_c = {:e}, ratio = {:.3}",
                    t.eps_star, t.eps_c_model, t.ratio
                );
                rows.push(t);
            }
            fs::create_dir_all(&cfg.output.directory)?;
            let path = cfg.output.directory.join("threshold.csv");
            let mut buf = Vec::new();
            write_threshold_csv(&mut buf, &rows, &cfg.hash())?;
            fs::write(&path, buf)?;
            println!("report -> {}", path.display());
            if cli.strict && rows.iter().any(|t| !(0.7..=1.3).contains(&t.ratio)) {
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Figure1 => {
            let cfg = load_config(cli)?;
            let fig = figure1(&cfg)?;
            println!(
                "{} panels, {} points -> {} (rows in {})",
                fig.panels,
                fig.points,
                fig.svg.display(),
                fig.csv.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

// ---------------------------------------------------------------------------
// stokes family tracing and emission
// ---------------------------------------------------------------------------

const TURNING_LABELS: [&str; 4] = ["alpha_l", "beta_l", "beta_r", "alpha_r"];

fn trace_families(
    cfg: &RunConfig,
    e: Complex64,
    eps: f64,
) -> Result<Vec<(String, StokesCurve)>, Error> {
    let pot = cfg.potential()?;
    let wells = cfg.wells()?;
    let tps = turning_points(&pot, e, eps, &wells)?;
    let reach = tps
        .quadruple()
        .iter()
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    let domain = Rectangle::new(Complex64::new(0.0, 0.0), 3.0 * reach, 3.0 * reach)?;
    let step = 2e-3 * reach;
    let max_arc = 10.0 * reach;

    let mut curves = Vec::new();
    for (label, tp) in TURNING_LABELS.iter().zip(tps.quadruple()) {
        for kind in [StokesKind::Stokes, StokesKind::AntiStokes] {
            for angle in seed_angles(&pot, e, eps, tp, kind)? {
                let curve = trace_stokes(&pot, e, eps, tp, kind, angle, step, max_arc, &domain)?;
                curves.push((label.to_string(), curve));
            }
        }
    }
    Ok(curves)
}

fn stokes_csv(curves: &[(String, StokesCurve)]) -> String {
    let mut out = String::from("curve_id,origin,kind,k,s,re_z,im_z\n");
    for (id, (origin, curve)) in curves.iter().enumerate() {
        let mut s = 0.0;
        let mut prev = curve.points.first().copied();
        for (k, z) in curve.points.iter().enumerate() {
            if let Some(p) = prev {
                s += (z - p).norm();
            }
            prev = Some(*z);
            out.push_str(&format!(
                "{id},{origin},{},{k},{s:e},{:e},{:e}\n",
                curve.kind.label(),
                z.re,
                z.im
            ));
        }
    }
    out
}

fn stokes_svg(curves: &[(String, StokesCurve)]) -> String {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_im, mut hi_im) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, c) in curves {
        for z in &c.points {
            lo = lo.min(z.re);
            hi = hi.max(z.re);
            lo_im = lo_im.min(z.im);
            hi_im = hi_im.max(z.im);
        }
    }
    let pad = 0.05 * ((hi - lo).max(hi_im - lo_im)).max(1e-6);
    (lo, hi, lo_im, hi_im) = (lo - pad, hi + pad, lo_im - pad, hi_im + pad);
    let w = 760.0;
    let h = w * (hi_im - lo_im) / (hi - lo);
    let sx = |re: f64| (re - lo) / (hi - lo) * w;
    let sy = |im: f64| (hi_im - im) / (hi_im - lo_im) * h;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <desc>stokes = level curves of Re phi (solid), anti-stokes = level curves of Im phi (dashed)</desc>\n"
    );
    for (_, c) in curves {
        let pts: Vec<String> =
            c.points.iter().map(|z| format!("{:.2},{:.2}", sx(z.re), sy(z.im))).collect();
        let (color, dash) = match c.kind {
            StokesKind::Stokes => ("#b2321f", ""),
            StokesKind::AntiStokes => ("#1f6fb2", " stroke-dasharray=\"4 3\""),
        };
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"{dash}/>\n",
            pts.join(" ")
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (label, c) in curves {
        if seen.insert(label.clone()) {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#222\"/>\n",
                sx(c.origin.re),
                sy(c.origin.im)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
