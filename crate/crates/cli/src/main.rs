//! Command-line driver: convergence studies, operator-identity verification
//! and mesh export.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bslie::harness::{
    csv_string, emit_csv, emit_plot, parse_config_text, run_convergence, RunConfig,
};
use bslie::mesh::build_disk_mesh;
use bslie::oracle::{offset_wheel_mesh, DenseFramework, DEFAULT_SIZE_CAP};
use bslie::problems::ProblemKind;

#[derive(Parser)]
#[command(
    name = "bslie",
    about = "Bulk-surface Lie splitting solver on the unit disk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (mesh level) x (time step) convergence study and emit CSV/SVG.
    RunConvergence(RunArgs),
    /// Check the dense operator identities and rate bounds on tiny meshes.
    VerifyOracle(OracleArgs),
    /// Generate a disk mesh and write it in plain-text format.
    ExportMesh(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// allen-cahn | mixing | dynbc-allen-cahn | dynbc-mixing
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tau_levels: Option<usize>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    mesh_levels: Option<usize>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    expmv_tol: Option<f64>,
    /// CSV output path
    #[arg(long, default_value = "convergence.csv")]
    out: PathBuf,
    /// also write a log-log SVG plot to this path
    #[arg(long)]
    plot: Option<PathBuf>,
    /// additionally report H1-type errors on stdout
    #[arg(long)]
    h1: bool,
    /// key = value config file applied before the explicit flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// largest admissible bulk node count for the dense framework
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    mesh_size_cap: usize,
    /// write the report to this file as well
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// target mesh width
    #[arg(long)]
    h: f64,
    #[arg(long, default_value = "mesh.txt")]
    out: PathBuf,
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig, bslie::Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in parse_config_text(&text)? {
            cfg.apply_kv(&k, &v)?;
        }
    }
    if let Some(p) = &args.problem {
        cfg.problem = ProblemKind::from_name(p)?;
    }
    if let Some(v) = args.tau0 {
        cfg.tau0 = v;
    }
    if let Some(v) = args.tau_levels {
        cfg.tau_levels = v;
    }
    if let Some(v) = args.h0 {
        cfg.h0 = v;
    }
    if let Some(v) = args.mesh_levels {
        cfg.mesh_levels = v;
    }
    if let Some(v) = args.tmax {
        cfg.t_max = v;
    }
    if let Some(v) = args.expmv_tol {
        cfg.expmv_tol = v;
    }
    cfg.h1_errors = cfg.h1_errors || args.h1;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run_convergence(args: &RunArgs) -> ExitCode {
    let cfg = match build_run_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run_convergence(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(1);
        }
    };
    print!("{}", csv_string(&report));
    for row in &report.rows {
        if let (Some(b), Some(s)) = (row.err_bulk_h1, row.err_surf_h1) {
            println!(
                "# H1 level {} tau {}: err_bulk_h1 {} err_surf_h1 {}",
                row.mesh_level, row.tau, b, s
            );
        }
    }
    let levels: Vec<usize> = {
        let mut l: Vec<usize> = report.rows.iter().map(|r| r.mesh_level).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    for level in levels {
        let orders = report.observed_orders(level);
        let fmt: Vec<String> = orders
            .iter()
            .map(|(tau, ob, os)| format!("tau {tau:.5}: {ob:.3}/{os:.3}"))
            .collect();
        println!(
            "# observed orders (bulk/surf), level {level}: {}",
            fmt.join("  ")
        );
    }
    if let Err(e) = emit_csv(&report, &args.out) {
        eprintln!("cannot write {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    if let Some(plot) = &args.plot {
        if let Err(e) = emit_plot(&report, plot) {
            eprintln!("cannot write {}: {e}", plot.display());
            return ExitCode::from(1);
        }
    }
    for f in &report.failures {
        eprintln!(
            "row failed: level {} tau {}: {}",
            f.mesh_level, f.tau, f.message
        );
    }
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

struct OracleReport {
    lines: Vec<String>,
    all_pass: bool,
}

impl OracleReport {
    fn record(&mut self, name: &str, value: f64, bound: f64, upper: bool) {
        let pass = if upper {
            value <= bound
        } else {
            value >= bound
        };
        let rel = if upper { "<=" } else { ">=" };
        self.lines.push(format!(
            "  {name:<34} {value:13.6e} {rel} {bound:9.1e}  {}",
            if pass { "PASS" } else { "FAIL" }
        ));
        self.all_pass &= pass;
    }
}

fn cmd_verify_oracle(args: &OracleArgs) -> ExitCode {
    let mut report = OracleReport {
        lines: Vec::new(),
        all_pass: true,
    };
    let taus: Vec<f64> = (0..6).map(|k| 0.1 / 2f64.powi(k)).collect();

    for h in [0.75, 0.35, 0.22] {
        let mesh = match build_disk_mesh(h) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("mesh generation failed: {e}");
                return ExitCode::from(1);
            }
        };
        report.lines.push(format!(
            "disk mesh h={:.3} (bulk nodes {}, surface nodes {})",
            mesh.h,
            mesh.n_nodes(),
            mesh.n_boundary()
        ));
        let fw = match DenseFramework::from_mesh_capped(&mesh, args.mesh_size_cap) {
            Ok(fw) => fw,
            Err(e) => {
                eprintln!("dense framework: {e}");
                return ExitCode::from(1);
            }
        };
        match fw.verify_q_identity(0.5, 1e-9) {
            Ok(dev) => report.record("convolution identity (t=0.5)", dev, 1e-8, true),
            Err(e) => {
                eprintln!("quadrature failed: {e}");
                return ExitCode::from(1);
            }
        }
        report.record(
            "splitting factorization (tau=0.1)",
            fw.verify_splitting_factorization(0.1),
            1e-10,
            true,
        );
        for k in [2usize, 20] {
            report.record(
                &format!("powers formula (k={k}, tau=0.05)"),
                fw.verify_powers_formula(0.05, k),
                k as f64 * 1e-10,
                true,
            );
        }
        let norms = fw.measure_stability_growth(0.01, 200);
        let ratios: Vec<f64> = norms
            .iter()
            .enumerate()
            .skip(3)
            .map(|(idx, n)| n / (1.0 + ((idx + 1) as f64).ln()))
            .collect();
        let spread = ratios.iter().copied().fold(0.0, f64::max)
            / ratios.iter().copied().fold(f64::INFINITY, f64::min);
        report.record("stability growth ratio spread", spread, 10.0, true);
    }

    // the rate window needs the softest admissible generator spectrum
    let wheel = offset_wheel_mesh(16, [0.15, 0.08]).expect("fixture mesh");
    report
        .lines
        .push("offset wheel mesh (one-step defect rate)".to_string());
    let fw =
        DenseFramework::from_mesh_capped(&wheel, args.mesh_size_cap).expect("fixture fits cap");
    match fw.measure_local_error_rate(&taus) {
        Ok((slope, _)) => report.record("one-step defect slope", slope, 1.9, false),
        Err(e) => {
            eprintln!("rate measurement failed: {e}");
            return ExitCode::from(1);
        }
    }

    let text = report.lines.join("\n");
    println!("{text}");
    println!(
        "verify-oracle: {}",
        if report.all_pass {
            "all identities PASS"
        } else {
            "FAILURES present"
        }
    );
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, format!("{text}\n")) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_export_mesh(args: &ExportArgs) -> ExitCode {
    match build_disk_mesh(args.h) {
        Ok(mesh) => {
            if let Err(e) = std::fs::write(&args.out, mesh.export_text()) {
                eprintln!("cannot write {}: {e}", args.out.display());
                return ExitCode::from(1);
            }
            println!(
                "wrote {} ({} nodes, {} triangles, h = {})",
                args.out.display(),
                mesh.n_nodes(),
                mesh.triangles.len(),
                mesh.h
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::RunConvergence(args) => cmd_run_convergence(&args),
        Command::VerifyOracle(args) => cmd_verify_oracle(&args),
        Command::ExportMesh(args) => cmd_export_mesh(&args),
    }
}
