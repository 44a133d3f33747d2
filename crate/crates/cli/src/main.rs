// SPDX-License-Identifier: Apache-2.0 OR MIT

//! `uatg`: plan, validate, benchmark and export drone light shows.
//!
//! Exit status: 0 on success, 1 when planning or validation fails, 2 when an
//! input cannot be read or parsed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uatg::bench::{run_scaling_suite, to_csv, to_table};
use uatg::collision::DEFAULT_CHECK_DT;
use uatg::formation::rasterize_text;
use uatg::show::{export_frames, plan_show, ShowConfig, ShowPlan};
use uatg::{DroneParams, Plane, Point3};

#[derive(Parser)]
#[command(name = "uatg", version, about = "Plan and check drone light shows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a show from a JSON show document.
    Plan {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sampling step of the separation checks, seconds.
        #[arg(long, default_value_t = DEFAULT_CHECK_DT)]
        dt: f64,
        /// Seed for random layouts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-check pairwise separation of a stored plan.
    Validate {
        plan: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHECK_DT)]
        dt: f64,
    },
    /// Plan synthetic shows of the given sizes and report timings.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write fixed-step frames of a stored plan as CSV.
    Export {
        plan: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize text into a point-cloud JSON file.
    Glyph {
        text: String,
        #[arg(long)]
        cell_size: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "xz")]
        plane: Plane,
        /// Bottom-left corner of the first character, `x,y,z`.
        #[arg(long, value_parser = parse_point, default_value = "0,0,0")]
        anchor: Point3,
    },
}

enum Failure {
    /// Planning, validation or any other domain failure.
    Domain(String),
    /// Unreadable or unparsable input.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

/// Read and parse failures are input errors; everything else is a domain
/// failure.
fn classify(err: uatg::Error) -> Failure {
    match err {
        uatg::Error::Json(e) => Failure::Input(format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        )),
        uatg::Error::Io(e) => Failure::Input(format!("cannot read input: {e}")),
        other => Failure::Domain(other.to_string()),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))
}

fn read_plan(path: &Path) -> Result<ShowPlan, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    ShowPlan::from_json(&text).map_err(|e| match classify(e) {
        Failure::Domain(msg) => Failure::Input(format!("invalid plan: {msg}")),
        input => input,
    })
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("UATG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Input(format!("UATG_THREADS={raw:?} is not a thread count")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Domain(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn cmd_plan(config: &Path, out: &Path, dt: f64, seed: u64) -> Result<(), Failure> {
    let mut config = ShowConfig::from_json_file(config, seed).map_err(classify)?;
    config.check_dt = dt;
    let plan = plan_show(&config).map_err(classify)?;
    write_output(out, &plan.to_json().map_err(classify)?)?;

    println!("{} drones, {} stages, {:.2} s show", plan.n_drones(), plan.stages.len(), plan.tf - plan.t0);
    for s in &plan.stages {
        let assigned = s.assignment.drone_to_goal.iter().filter(|g| g.is_some()).count();
        println!(
            "  stage {} {:>10}: {:>4} goals, cost {:>12.3} m^2, arrive {:>8.2} s, delay {:.2} s, repairs {}",
            s.index + 1,
            s.label,
            assigned,
            s.assignment.total_cost,
            s.arrival,
            s.delay,
            s.repair_iterations
        );
    }
    let t = plan.metrics.timings;
    println!(
        "plan time {:.4} s (assignment {:.4}, trajectories {:.4}, collision {:.4})",
        t.t_total, t.t_assignment, t.t_trajectory, t.t_collision
    );
    match plan.metrics.separation.min_distance {
        d if d.is_finite() => println!("min separation {d:.4} m"),
        _ => println!("min separation n/a (single drone)"),
    }
    Ok(())
}

fn cmd_validate(plan: &Path, dt: f64) -> Result<(), Failure> {
    let plan = read_plan(plan)?;
    let report = plan.validate(dt).map_err(classify)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.is_clear() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "{} separation violation(s) below {} m",
            report.violations.len(),
            report.threshold
        )))
    }
}

fn cmd_bench(sizes: &[usize], seed: u64, out: &Path) -> Result<(), Failure> {
    let results = run_scaling_suite(sizes, seed, &DroneParams::default()).map_err(classify)?;
    write_output(out, &to_csv(&results))?;
    print!("{}", to_table(&results));
    Ok(())
}

fn cmd_export(plan: &Path, dt: f64, out: &Path) -> Result<(), Failure> {
    let plan = read_plan(plan)?;
    let file = File::create(out).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", out.display())))?;
    let mut writer = BufWriter::new(file);
    let rows = export_frames(&plan, dt, &mut writer).map_err(classify_output)?;
    writer.flush().map_err(|e| Failure::Domain(format!("cannot write {}: {e}", out.display())))?;
    println!("{rows} rows");
    Ok(())
}

/// Errors raised while writing are never input errors.
fn classify_output(err: uatg::Error) -> Failure {
    Failure::Domain(err.to_string())
}

fn parse_point(s: &str) -> Result<Point3, String> {
    let coords: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match coords[..] {
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {} values", coords.len())),
    }
}

fn cmd_glyph(text: &str, cell_size: f64, out: &Path, plane: Plane, anchor: Point3) -> Result<(), Failure> {
    let cloud = rasterize_text(text, cell_size, anchor, plane).map_err(classify)?;
    cloud.write_json(out).map_err(classify_output)?;
    println!("{} points", cloud.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Plan { config, out, dt, seed } => cmd_plan(&config, &out, dt, seed),
        Command::Validate { plan, dt } => cmd_validate(&plan, dt),
        Command::Bench { sizes, seed, out } => cmd_bench(&sizes, seed, &out),
        Command::Export { plan, dt, out } => cmd_export(&plan, dt, &out),
        Command::Glyph {
            text,
            cell_size,
            out,
            plane,
            anchor,
        } => cmd_glyph(&text, cell_size, &out, plane, anchor),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Domain(msg) | Failure::Input(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
