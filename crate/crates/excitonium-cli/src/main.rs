//! Command-line runner: scenario configs, figure-reproduction presets,
//! CSV/SVG emission, solver comparison, and parameter sweeps.

mod config;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use config::{parse_config, preset, Scenario, PRESET_NAMES};
use excitonium::heom::propagate_heom_partial;
use excitonium::redfield::{build_redfield_tensor, propagate_redfield_partial};
use excitonium::trajectory::{max_entanglement_deviation, max_population_deviation, peak};
use excitonium::{Error as LibError, SolverKind, Trajectory};

/// Probe times (fs) for the comparison summary.
const PROBE_TIMES_FS: [f64; 4] = [100.0, 200.0, 500.0, 1000.0];

#[derive(Parser)]
#[command(
    name = "excitonium",
    about = "Single-excitation open-system dynamics with entanglement tracking",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario config file (flat key = value sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset: fig2, fig3, fig4, figS1, figS2, figS3.
    #[arg(long)]
    preset: Option<String>,
    /// Override the solver (heom, redfield-full, redfield-secular).
    #[arg(long)]
    solver: Option<String>,
    /// Override the temperature in kelvin.
    #[arg(long)]
    temp: Option<f64>,
    /// Override the initial site (1-based).
    #[arg(long)]
    site: Option<usize>,
    /// Override the hierarchy truncation depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Override the horizon in fs.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the integrator step in fs.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (or every scenario of a preset) and write
    /// trajectory CSVs.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write an SVG plot per trajectory.
        #[arg(long)]
        svg: bool,
    },
    /// Run the same scenario under several solvers and summarize.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Solvers to compare (repeat the flag; at least two).
        #[arg(long = "with", required = true, num_args = 1..)]
        with: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Run a scenario once per value of a swept axis.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Axis to sweep: temperature, initial_site, or depth.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List the figure presets and their resolved scenarios.
    Presets,
    /// Parse and validate a config, printing the resolved scenario.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum CliError {
    Config(String),
    Numerical(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Other(m) => m,
        }
    }
}

fn from_lib(e: LibError) -> CliError {
    match e {
        LibError::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
        LibError::Io(_) => CliError::Other(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("EXCITONIUM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, out, svg } => {
            let scenarios = resolve_scenarios(&scenario)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Other(e.to_string()))?;
            for s in scenarios {
                run_and_write(&s, &out, svg)?;
            }
            Ok(())
        }
        Command::Compare {
            scenario,
            with,
            out,
            svg,
        } => {
            if with.len() < 2 {
                return Err(CliError::Config(
                    "compare needs at least two --with solvers".into(),
                ));
            }
            let base = resolve_scenarios(&scenario)?
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Config("no scenario resolved".into()))?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Other(e.to_string()))?;
            compare(&base, &with, &out, svg)
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => {
            let base = resolve_scenarios(&scenario)?
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Config("no scenario resolved".into()))?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Other(e.to_string()))?;
            sweep(&base, &axis, &values, &out)
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}:");
                for s in preset(name).unwrap() {
                    println!(
                        "  {} (solver {}, site {}, {} K, {} fs at dt = {} fs, depth {})",
                        s.name,
                        s.solver,
                        s.initial_site,
                        s.temperature_k,
                        s.horizon_fs,
                        s.dt_fs,
                        s.depth
                    );
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let s = load_config(&config)?;
            s.validate().map_err(CliError::Config)?;
            print!("{}", s.describe());
            println!("ok");
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolve_scenarios(args: &ScenarioArgs) -> Result<Vec<Scenario>, CliError> {
    let mut scenarios = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either --config or --preset, not both".into(),
            ))
        }
        (Some(path), None) => vec![load_config(path)?],
        (None, Some(name)) => preset(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            ))
        })?,
        (None, None) => vec![Scenario::default()],
    };
    for s in &mut scenarios {
        if let Some(solver) = &args.solver {
            s.solver = solver
                .parse()
                .map_err(|e: LibError| CliError::Config(e.to_string()))?;
            s.name = format!("{}_{}", s.name, s.solver);
        }
        if let Some(t) = args.temp {
            s.temperature_k = t;
            s.name = format!("{}_T{t:.0}K", s.name);
        }
        if let Some(site) = args.site {
            s.initial_site = site;
            s.name = format!("{}_site{site}", s.name);
        }
        if let Some(d) = args.depth {
            s.depth = d;
        }
        if let Some(h) = args.horizon {
            s.horizon_fs = h;
        }
        if let Some(dt) = args.dt {
            s.dt_fs = dt;
        }
        s.validate().map_err(CliError::Config)?;
    }
    Ok(scenarios)
}

/// Execute one scenario; a mid-run validity failure still yields the
/// recorded prefix along with the error.
fn execute(scenario: &Scenario) -> Result<(Trajectory, Option<LibError>), CliError> {
    let h = scenario.hamiltonian.load().map_err(from_lib)?;
    let rho0 = scenario.initial_state(h.n_sites()).map_err(from_lib)?;
    let grid = scenario.record_grid().map_err(from_lib)?;
    let bath = scenario.bath();
    let trapping = scenario.trapping();
    let opts = scenario.integrator();
    match scenario.solver {
        SolverKind::Heom => propagate_heom_partial(
            &h,
            &bath,
            &trapping,
            &rho0,
            &grid,
            &scenario.heom_config(),
            &opts,
        )
        .map_err(from_lib),
        SolverKind::RedfieldFull | SolverKind::RedfieldSecular => {
            let tensor = build_redfield_tensor(&h, &bath).map_err(from_lib)?;
            let tensor = if scenario.solver == SolverKind::RedfieldSecular {
                tensor.secularize()
            } else {
                tensor
            };
            propagate_redfield_partial(&tensor, &trapping, &rho0, &grid, &opts).map_err(from_lib)
        }
    }
}

fn timestamp_line() -> String {
    let unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("generated_unix = {unix}")
}

/// Write bytes atomically: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Other(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(())
}

fn csv_bytes(
    trajectory: &Trajectory,
    scenario: &Scenario,
    failure: &Option<LibError>,
) -> Result<Vec<u8>, CliError> {
    let mut metadata = vec![timestamp_line()];
    metadata.extend(scenario.provenance());
    if let Some(e) = failure {
        metadata.push(format!("PARTIAL: {e}"));
    }
    let mut bytes = Vec::new();
    trajectory
        .write_csv(&mut bytes, &metadata)
        .map_err(|e| CliError::Other(e.to_string()))?;
    Ok(bytes)
}

fn write_svg(trajectory: &Trajectory, scenario: &Scenario, path: &Path) -> Result<(), CliError> {
    let times = trajectory.times();
    let e = trajectory.entanglement_series();
    let trace = trajectory.trace_series();
    let mut series = vec![
        svg::Series {
            label: "E".into(),
            values: &e,
        },
        svg::Series {
            label: "trace".into(),
            values: &trace,
        },
    ];
    // The three largest concurrence curves by peak value.
    let n = trajectory.n_sites;
    let mut pairs: Vec<(usize, usize, Vec<f64>, f64)> = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let c = trajectory.concurrence_series(i, j).map_err(from_lib)?;
            let m = c.iter().cloned().fold(0.0, f64::max);
            pairs.push((i, j, c, m));
        }
    }
    pairs.sort_by(|a, b| b.3.total_cmp(&a.3));
    pairs.truncate(3);
    for (i, j, c, _) in &pairs {
        series.push(svg::Series {
            label: format!("C_{i}{j}"),
            values: c,
        });
    }
    let svg_text = svg::line_plot(&times, &series, "t (fs)", &scenario.name);
    write_atomic(path, svg_text.as_bytes())
}

fn run_and_write(scenario: &Scenario, out: &Path, svg: bool) -> Result<(), CliError> {
    let (trajectory, failure) = execute(scenario)?;
    let csv_path = out.join(format!("{}.csv", scenario.name));
    write_atomic(&csv_path, &csv_bytes(&trajectory, scenario, &failure)?)?;
    if svg && !trajectory.is_empty() {
        write_svg(&trajectory, scenario, &out.join(format!("{}.svg", scenario.name)))?;
    }
    let times = trajectory.times();
    let e = trajectory.entanglement_series();
    if let Some((pt, pv)) = peak(&times, &e) {
        println!(
            "{}: {} points -> {} (peak E = {pv:.4} at {pt:.0} fs)",
            scenario.name,
            trajectory.len(),
            csv_path.display()
        );
    }
    if let Some(e) = failure {
        return Err(CliError::Numerical(format!(
            "{}: partial trajectory written; {e}",
            scenario.name
        )));
    }
    Ok(())
}

fn compare(base: &Scenario, with: &[String], out: &Path, svg: bool) -> Result<(), CliError> {
    let mut solvers = Vec::new();
    for name in with {
        let solver: SolverKind = name
            .parse()
            .map_err(|e: LibError| CliError::Config(e.to_string()))?;
        if !solvers.contains(&solver) {
            solvers.push(solver);
        }
    }

    let mut runs: Vec<(SolverKind, Trajectory)> = Vec::new();
    for &solver in &solvers {
        let mut s = base.clone();
        s.solver = solver;
        s.name = format!("{}_{}", base.name, solver);
        let (trajectory, failure) = execute(&s)?;
        write_atomic(
            &out.join(format!("{}.csv", s.name)),
            &csv_bytes(&trajectory, &s, &failure)?,
        )?;
        if svg && !trajectory.is_empty() {
            write_svg(&trajectory, &s, &out.join(format!("{}.svg", s.name)))?;
        }
        if let Some(e) = failure {
            return Err(CliError::Numerical(format!("{}: {e}", s.name)));
        }
        runs.push((solver, trajectory));
    }

    // Side-by-side CSV on the common grid.
    let times = runs[0].1.times();
    let mut side = String::new();
    side.push_str(&format!("# {}\n", timestamp_line()));
    for line in base.provenance() {
        side.push_str(&format!("# {line}\n"));
    }
    side.push_str("t_fs");
    for (solver, _) in &runs {
        side.push_str(&format!(",E_{solver},trace_{solver}"));
    }
    side.push('\n');
    for (k, &t) in times.iter().enumerate() {
        side.push_str(&format!("{t:.12e}"));
        for (_, tr) in &runs {
            let p = &tr.points[k];
            side.push_str(&format!(
                ",{:.12e},{:.12e}",
                p.report.global_entanglement, p.report.trace
            ));
        }
        side.push('\n');
    }
    let side_path = out.join(format!("{}_compare.csv", base.name));
    write_atomic(&side_path, side.as_bytes())?;

    // Summary: peaks and probe-time values with ordering relations.
    let mut summary = String::new();
    summary.push_str("solver,peak_E,peak_t_fs");
    for t in PROBE_TIMES_FS {
        summary.push_str(&format!(",E_at_{t:.0}fs"));
    }
    summary.push('\n');
    for (solver, tr) in &runs {
        let times = tr.times();
        let e = tr.entanglement_series();
        let (pt, pv) = peak(&times, &e).unwrap_or((0.0, 0.0));
        summary.push_str(&format!("{solver},{pv:.6},{pt:.1}"));
        for t in PROBE_TIMES_FS {
            summary.push_str(&format!(",{:.6}", tr.entanglement_at(t).unwrap_or(f64::NAN)));
        }
        summary.push('\n');
    }
    for t in PROBE_TIMES_FS {
        if t > base.horizon_fs {
            continue;
        }
        let mut order: Vec<(SolverKind, f64)> = runs
            .iter()
            .map(|(s, tr)| (*s, tr.entanglement_at(t).unwrap_or(f64::NAN)))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        let chain = order
            .iter()
            .map(|(s, v)| format!("{s} ({v:.4})"))
            .collect::<Vec<_>>()
            .join(" >= ");
        summary.push_str(&format!("# ordering at {t:.0} fs: {chain}\n"));
    }
    let summary_path = out.join(format!("{}_summary.csv", base.name));
    write_atomic(&summary_path, summary.as_bytes())?;
    print!("{summary}");
    println!("wrote {} and {}", side_path.display(), summary_path.display());
    Ok(())
}

fn sweep(base: &Scenario, axis: &str, values: &str, out: &Path) -> Result<(), CliError> {
    let values: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Config("sweep needs a nonempty value list".into()));
    }

    let mut manifest = String::from("value,file\n");
    let mut runs: Vec<(String, Trajectory)> = Vec::new();
    for v in &values {
        let mut s = base.clone();
        match axis {
            "temperature" => {
                s.temperature_k = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad temperature {v:?}")))?
            }
            "initial_site" => {
                s.initial_site = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad site {v:?}")))?
            }
            "depth" => {
                s.depth = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad depth {v:?}")))?
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep axis {other:?}; expected temperature, initial_site, or depth"
                )))
            }
        }
        s.name = format!("{}_{axis}_{v}", base.name);
        s.validate().map_err(CliError::Config)?;
        let (trajectory, failure) = execute(&s)?;
        let file = format!("{}.csv", s.name);
        write_atomic(&out.join(&file), &csv_bytes(&trajectory, &s, &failure)?)?;
        if let Some(e) = failure {
            return Err(CliError::Numerical(format!("{}: {e}", s.name)));
        }
        println!("{}: wrote {file}", s.name);
        manifest.push_str(&format!("{v},{file}\n"));
        runs.push((v.to_string(), trajectory));
    }

    // Depth sweeps double as a convergence scan.
    if axis == "depth" && runs.len() >= 2 {
        let mut table = String::from("pair,max_E_deviation,max_population_deviation\n");
        for w in runs.windows(2) {
            let (la, ta) = &w[0];
            let (lb, tb) = &w[1];
            let de = max_entanglement_deviation(ta, tb).map_err(from_lib)?;
            let dp = max_population_deviation(ta, tb).map_err(from_lib)?;
            table.push_str(&format!("depth {la} vs {lb},{de:.6e},{dp:.6e}\n"));
        }
        write_atomic(&out.join(format!("{}_convergence.csv", base.name)), table.as_bytes())?;
        print!("{table}");
    }

    write_atomic(&out.join(format!("{}_manifest.csv", base.name)), manifest.as_bytes())?;
    Ok(())
}
