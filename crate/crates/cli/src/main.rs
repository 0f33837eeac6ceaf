//! `padres`: resonance positions and widths from stabilization curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use padres_core::config::{Config, GridSpec};
use padres_core::continuation::TrajectoryKind;
use padres_core::io::{self, fmt_f64, ImportFormat};
use padres_core::model::{BasisSpec, ModelSpec};
use padres_core::pipeline::{self, FitRequest, LandscapeRequest, ResonanceRequest, TrajectoryRequest};
use padres_core::session::{Session, Source};
use padres_core::{Error, Result, C64};

#[derive(Parser)]
#[command(name = "padres", version, about = "Resonance energies from stabilization curves by Schlessinger continuation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Global {
    /// Session file; loaded when it exists, written after the command.
    #[arg(long, global = true)]
    session: Option<PathBuf>,
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single `key=value` override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print JSON records instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Write the step's data file here (CSV or JSON by extension).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// benchmark | gaussian:J,lambda | harmonic | custom:lambda,offset,c0,c1,...
    #[arg(long, global = true, default_value = "benchmark")]
    model: String,
    /// ho:N[:width] | et:N:base:ratio
    #[arg(long, global = true, default_value = "ho:60")]
    basis: String,
    /// Stabilization grid start:stop:count.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Stabilization data file (CSV `alpha,root,energy` or JSON) instead of a model.
    #[arg(long = "import", global = true)]
    import: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Real-scaling sweep (stabilization plot data).
    Stabilize,
    /// Avoided crossings and stable windows.
    Windows,
    /// Schlessinger fit over a window.
    Fit {
        /// Window id, or a stabilization file whose first curve is the window.
        #[arg(long)]
        window: Option<String>,
        /// Fraction order M.
        #[arg(long, visible_alias = "points")]
        order: Option<usize>,
        /// Comma-separated grid indices to fit.
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
        /// Fit even when the points straddle a detected crossing.
        #[arg(long)]
        force: bool,
    },
    /// θ- or α-trajectory of a fit.
    Trajectory {
        #[arg(long)]
        fit: Option<String>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, conflicts_with = "fixed_theta")]
        fixed_alpha: Option<f64>,
        #[arg(long)]
        fixed_theta: Option<f64>,
        /// Swept grid start:stop:count.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Window, fit and stationary points end to end.
    Resonance {
        #[arg(long)]
        window: Option<String>,
        #[arg(long, visible_alias = "points")]
        order: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Complex-scaling check of the stationary points.
    Crosscheck {
        #[arg(long)]
        window: Option<String>,
        #[arg(long, visible_alias = "points")]
        order: Option<usize>,
    },
    /// |dE/dtheta| and |dE/dalpha| landscape of the complex-scaled eigenvalue.
    Landscape {
        #[arg(long)]
        alpha_grid: Option<String>,
        #[arg(long)]
        theta_grid: Option<String>,
        #[arg(long)]
        reference: Option<f64>,
    },
    /// Branch point behind a detected avoided crossing.
    BranchPoint {
        /// Index into the detected crossings.
        #[arg(long, default_value_t = 0)]
        crossing: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory receiving session files.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn nums(s: &str, field: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::validation(field, format!("not a number: {x:?}"))))
        .collect()
}

fn parse_model(s: &str) -> Result<ModelSpec> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let m = match kind {
        "benchmark" => ModelSpec::benchmark(),
        "harmonic" => ModelSpec::pure_harmonic(),
        "gaussian" => match nums(rest, "model")?.as_slice() {
            [j, lambda] => ModelSpec::gaussian_well_barrier(*j, *lambda),
            _ => return Err(Error::validation("model", "gaussian takes J,lambda")),
        },
        "custom" => match nums(rest, "model")?.as_slice() {
            [lambda, offset, c @ ..] if !c.is_empty() => ModelSpec::custom(*lambda, *offset, c),
            _ => return Err(Error::validation("model", "custom takes lambda,offset,c0[,c1...]")),
        },
        _ => return Err(Error::validation("model", format!("unknown model {kind:?}"))),
    };
    m.validate()?;
    Ok(m)
}

fn parse_basis(s: &str) -> Result<BasisSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let int = |x: &str| x.parse::<usize>().map_err(|_| Error::validation("basis", format!("not a size: {x:?}")));
    let num = |x: &str| x.parse::<f64>().map_err(|_| Error::validation("basis", format!("not a number: {x:?}")));
    let b = match parts.as_slice() {
        ["ho", n] => BasisSpec::harmonic_oscillator(int(n)?, 1.0),
        ["ho", n, w] => BasisSpec::harmonic_oscillator(int(n)?, num(w)?),
        ["et", n, base, ratio] => BasisSpec::even_tempered(int(n)?, num(base)?, num(ratio)?),
        _ => return Err(Error::validation("basis", "expected ho:N[:width] or et:N:base:ratio")),
    };
    b.validate()?;
    Ok(b)
}

fn load_config(g: &Global) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(p) = &g.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &g.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::validation("set", format!("expected key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(a) = &g.alpha {
        cfg.stabilize_alpha = a.parse().map_err(|e| rename(e, "alpha"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rename(e: Error, field: &str) -> Error {
    match e {
        Error::Validation { message, .. } => Error::validation(field, message),
        other => other,
    }
}

fn import_session(path: &Path) -> Result<Session> {
    let format = ImportFormat::from_path(path);
    let imported = io::import_stabilization(path, format)?;
    Ok(pipeline::import_session(imported, &path.display().to_string(), format, ""))
}

fn open_session(g: &Global) -> Result<Session> {
    if let Some(p) = &g.session {
        if p.exists() {
            return Session::load(p);
        }
    }
    match &g.import {
        Some(path) => import_session(path),
        None => {
            let source = Source::Model { model: parse_model(&g.model)?, basis: parse_basis(&g.basis)? };
            Ok(Session::new(source, Default::default(), ""))
        }
    }
}

/// Stabilization data, sweeping first when the session has none.
fn ensure_stabilized(s: &mut Session, cfg: &Config) -> Result<()> {
    if s.stabilization.is_some() && matches!(s.source, Source::Import { .. }) {
        return Ok(());
    }
    let rec = pipeline::stabilize(s, &cfg.stabilize_alpha, cfg)?;
    s.add_stabilization(rec)
}

fn ensure_windows(s: &mut Session, cfg: &Config) -> Result<padres_core::session::WindowsRecord> {
    ensure_stabilized(s, cfg)?;
    let w = pipeline::windows(s, cfg)?;
    s.add_windows(w.clone())?;
    Ok(w)
}

fn complex(z: C64) -> String {
    if z.im == 0.0 {
        return fmt_f64(z.re);
    }
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", fmt_f64(z.re), fmt_f64(z.im.abs()))
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text)
}

fn is_json(path: &Path) -> bool {
    ImportFormat::from_path(path) == ImportFormat::Json
}

/// Fit for follow-up steps: the given id, else the default window's fit.
fn fit_for(s: &mut Session, cfg: &Config, fit: Option<String>, window: Option<String>) -> Result<String> {
    if let Some(id) = fit {
        s.fit(&id)?;
        return Ok(id);
    }
    let w = ensure_windows(s, cfg)?;
    let window_id = match window {
        Some(id) => id,
        None => pipeline::default_window(s, &w)?,
    };
    let f = pipeline::fit(s, &FitRequest { window_id, point_indices: None, order: None, force: false }, cfg)?;
    let id = f.id.clone();
    s.add_fit(f)?;
    Ok(id)
}

fn run(cli: Cli) -> Result<String> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    if g.show_config {
        return Ok(cfg.render());
    }
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(Error::validation("threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation("threads", e.to_string()))?;
    }
    let Some(command) = cli.command else {
        return Err(Error::validation("command", "missing subcommand (see --help)"));
    };
    if let Command::Serve { port, host, data_dir } = command {
        return serve(&host, port, data_dir, cfg);
    }

    // `fit --window <file>`: the file is the data and its first curve is the window.
    let file_window = match &command {
        Command::Fit { window: Some(w), .. } if Path::new(w).is_file() => Some(PathBuf::from(w)),
        _ => None,
    };
    let mut s = match &file_window {
        Some(p) => {
            if g.session.as_ref().is_some_and(|s| s.exists()) || g.import.is_some() {
                return Err(Error::validation("window", "a window file cannot be combined with --session or --import"));
            }
            import_session(p)?
        }
        None => open_session(g)?,
    };

    let mut out = String::new();
    match command {
        Command::Stabilize => {
            ensure_stabilized(&mut s, &cfg)?;
            let rec = s.stabilization()?;
            let d = &rec.data;
            if let Some(p) = &g.output {
                let annotations = match &s.source {
                    Source::Import { annotations, .. } => annotations.clone(),
                    Source::Model { .. } => Vec::new(),
                };
                let text = if is_json(p) { io::stabilization_json(d) } else { io::stabilization_csv(d, &annotations) };
                write_output(p, &text)?;
            }
            if g.json {
                out = io::to_json(rec);
            } else {
                let minq = d.tracking_quality.iter().copied().fold(1.0, f64::min);
                let _ = writeln!(out, "stabilization {}: {} roots x {} alpha points", rec.id, d.num_roots(), d.alpha_grid.len());
                let _ = writeln!(out, "  alpha in [{}, {}]", fmt_f64(d.alpha_grid[0]), fmt_f64(*d.alpha_grid.last().expect("grid")));
                let _ = writeln!(out, "  worst tracking overlap {}", fmt_f64(minq));
                if d.nearest_energy_tracking {
                    let _ = writeln!(out, "  curves assembled by nearest-energy tracking (no root column)");
                }
            }
        }
        Command::Windows => {
            let w = ensure_windows(&mut s, &cfg)?;
            if let Some(p) = &g.output {
                write_output(p, &io::to_json(&w))?;
            }
            if g.json {
                out = io::to_json(&w);
            } else {
                let _ = writeln!(out, "windows {} (flattest first), crossing gap tolerance {}", w.id, fmt_f64(w.report.gap_tol));
                for win in &w.report.windows {
                    let _ = writeln!(
                        out,
                        "  {} root {} alpha [{}, {}] {} points flatness {}",
                        win.id,
                        win.root_index,
                        fmt_f64(win.alpha_range.0),
                        fmt_f64(win.alpha_range.1),
                        win.len(),
                        fmt_f64(win.flatness)
                    );
                }
                if let Some(d) = &w.report.diagnostic {
                    let _ = writeln!(out, "  {d}");
                }
                let _ = writeln!(out, "avoided crossings");
                for (i, c) in w.report.crossings.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "  [{i}] roots {}-{} alpha {} gap {}{}",
                        c.root_pair.0,
                        c.root_pair.1,
                        fmt_f64(c.alpha_at_min_gap),
                        fmt_f64(c.min_gap),
                        if c.sign_change { " (curves swap order)" } else { "" }
                    );
                }
            }
        }
        Command::Fit { window, order, indices, force } => {
            let w = ensure_windows(&mut s, &cfg)?;
            let window_id = match (&file_window, window) {
                (Some(_), _) => {
                    let n = s.stabilization()?.data.alpha_grid.len();
                    format!("w0-0-{}", n - 1)
                }
                (None, Some(id)) => id,
                (None, None) => pipeline::default_window(&s, &w)?,
            };
            let f = pipeline::fit(&s, &FitRequest { window_id, point_indices: indices, order, force }, &cfg)?;
            s.add_fit(f.clone())?;
            if let Some(p) = &g.output {
                write_output(p, &io::to_json(&f))?;
            }
            if g.json {
                out = io::to_json(&f);
            } else {
                let cf = &f.fraction;
                let _ = writeln!(out, "fit {} window {} M = {}", f.id, f.window.id, cf.m());
                if f.forced {
                    let _ = writeln!(out, "  forced over {} avoided crossing(s)", f.crossings.len());
                }
                let _ = writeln!(out, "  E_1 = {}", fmt_f64(cf.values[0]));
                for (i, z) in cf.coefficients.iter().enumerate() {
                    let _ = writeln!(out, "  z_{} = {}", i + 1, complex(*z));
                }
                if cf.coefficients.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    let _ = writeln!(out, "  C(eta) = {} for every eta", fmt_f64(cf.values[0]));
                }
                let d = &f.diagnostics;
                let _ = writeln!(out, "  interpolation residual {}", fmt_f64(d.interpolation_residual));
                let _ = writeln!(out, "  leave-one-out residual {}", fmt_f64(d.leave_one_out_residual));
                for warn in &d.warnings {
                    let _ = writeln!(out, "  warning: {warn:?}");
                }
            }
        }
        Command::Trajectory { fit, window, fixed_alpha, fixed_theta, grid } => {
            let fit_id = fit_for(&mut s, &cfg, fit, window)?;
            let (kind, fixed_value) = match (fixed_alpha, fixed_theta) {
                (Some(a), None) => (TrajectoryKind::ThetaTrajectory, a),
                (None, Some(t)) => (TrajectoryKind::AlphaTrajectory, t),
                _ => return Err(Error::validation("fixed_alpha", "give exactly one of --fixed-alpha or --fixed-theta")),
            };
            let grid = grid.map(|g| g.parse::<GridSpec>().map_err(|e| rename(e, "grid"))).transpose()?;
            let t = pipeline::trajectory(&s, &TrajectoryRequest { fit_id, kind, fixed_value, grid }, &cfg)?;
            s.add_trajectory(t.clone())?;
            let csv = io::trajectory_csv(&t.trajectory);
            if let Some(p) = &g.output {
                write_output(p, &if is_json(p) { io::to_json(&t) } else { csv.clone() })?;
            }
            out = if g.json { io::to_json(&t) } else { csv };
        }
        Command::Resonance { window, order, force } => {
            ensure_stabilized(&mut s, &cfg)?;
            let r = pipeline::resonance(&mut s, &ResonanceRequest { window_id: window, order, force, region: None }, &cfg)?;
            if let Some(p) = &g.output {
                write_output(p, &io::to_json(&r))?;
            }
            out = if g.json { io::to_json(&r) } else { pipeline::render_stationary(&r) };
        }
        Command::Crosscheck { window, order } => {
            ensure_stabilized(&mut s, &cfg)?;
            let r = pipeline::resonance(&mut s, &ResonanceRequest { window_id: window, order, force: false, region: None }, &cfg)?;
            if r.points.is_empty() {
                return Err(Error::NonConvergence { rounds: 0, trace: "no Pade stationary point to check".into() });
            }
            let mut recs = Vec::new();
            for p in &r.points {
                let c = pipeline::crosscheck(&s, &p.point.id, &cfg)?;
                s.add_crosscheck(c.clone())?;
                recs.push(c);
            }
            if let Some(p) = &g.output {
                write_output(p, &io::to_json(&recs))?;
            }
            if g.json {
                out = io::to_json(&recs);
            } else {
                for (p, c) in r.points.iter().zip(&recs) {
                    let _ = writeln!(out, "stationary point {}", p.point.id);
                    let _ = writeln!(out, "  E_pade   = {}", complex(p.point.energy));
                    let _ = writeln!(out, "  E_ucs    = {}", complex(c.ucs.energy));
                    let _ = writeln!(out, "  distance = {}", fmt_f64(c.distance));
                    let _ = writeln!(
                        out,
                        "  ucs eta* = alpha {}, theta {} after {} rounds",
                        fmt_f64(c.ucs.eta_star.alpha),
                        fmt_f64(c.ucs.eta_star.theta),
                        c.ucs.rounds
                    );
                }
            }
        }
        Command::Landscape { alpha_grid, theta_grid, reference } => {
            if reference.is_none() && s.stationary_points.is_empty() {
                ensure_windows(&mut s, &cfg)?;
            }
            let alpha = alpha_grid.map(|g| g.parse::<GridSpec>().map_err(|e| rename(e, "alpha_grid"))).transpose()?;
            let theta = theta_grid.map(|g| g.parse::<GridSpec>().map_err(|e| rename(e, "theta_grid"))).transpose()?;
            let l = pipeline::landscape(&s, &LandscapeRequest { alpha, theta, reference_energy: reference }, &cfg)?;
            s.add_landscape(l.clone())?;
            let csv = io::landscape_csv(&l.landscape);
            if let Some(p) = &g.output {
                write_output(p, &if is_json(p) { io::to_json(&l) } else { csv.clone() })?;
            }
            out = if g.json { io::to_json(&l) } else { csv };
        }
        Command::BranchPoint { crossing } => {
            ensure_windows(&mut s, &cfg)?;
            let b = pipeline::branch_point(&s, crossing)?;
            s.add_branch_point(b.clone())?;
            if let Some(p) = &g.output {
                write_output(p, &io::to_json(&b))?;
            }
            if g.json {
                out = io::to_json(&b);
            } else {
                let e = &b.estimate;
                let _ = writeln!(out, "branch point {} (crossing of roots {}-{})", b.id, b.crossing.root_pair.0, b.crossing.root_pair.1);
                let _ = writeln!(out, "  alpha_BP = {}", fmt_f64(e.alpha_bp()));
                let _ = writeln!(out, "  theta_BP = {}", fmt_f64(e.theta_bp()));
                let _ = writeln!(out, "  E_BP     = {}", complex(e.energy_bp));
                let _ = writeln!(out, "  b        = {}", complex(e.coefficient_b));
                let _ = writeln!(out, "  residual = {} (reliable: {})", fmt_f64(e.residual), e.reliable);
                let _ = writeln!(out, "  gap exponent = {}", fmt_f64(b.gap_exponent));
            }
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
    if let Some(p) = &g.session {
        s.save(p)?;
    }
    Ok(out)
}

fn serve(host: &str, port: u16, data_dir: Option<PathBuf>, cfg: Config) -> Result<String> {
    let addr: std::net::SocketAddr =
        format!("{host}:{port}").parse().map_err(|_| Error::validation("host", format!("bad address {host}:{port}")))?;
    if let Some(d) = &data_dir {
        std::fs::create_dir_all(d)?;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(padres_service::serve(addr, padres_service::AppState::new(cfg, data_dir)))?;
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("hint: {h}");
            }
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
