//! Batch front end: load a robot description, run the solve pipeline,
//! optionally verify round trips on random seeds, and write the artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use symik::emit::EmitTarget;
use symik::pipeline::{run_pipeline, PipelineOutput};
use symik::robotfile::parse_robot_file;

/// Closed-form inverse kinematics compiler for serial chains.
#[derive(Parser, Debug)]
#[command(name = "symik", version, about)]
struct Args {
    /// Robot description file (JSON).
    #[arg(long)]
    robot: PathBuf,

    /// Output directory for generated artifacts.
    #[arg(long, default_value = "./out")]
    out: PathBuf,

    /// Artifacts to write (comma separated): latex, python, cpp, dot, json.
    #[arg(long, default_value = "latex,python,cpp,dot,json", value_delimiter = ',')]
    emit: Vec<String>,

    /// Verify this many random joint seeds by round-tripping every pose set
    /// through forward kinematics (0 = skip).
    #[arg(long, default_value_t = 0)]
    verify: usize,

    /// Seed for the verification sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Forward-kinematics residual tolerance for verification.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Behavior-tree pass limit.
    #[arg(long, default_value_t = 10)]
    max_iterations: usize,
}

/// Exit discipline: 0 = fully solved (and verification passed when asked),
/// 1 = input or I/O problem, 2 = incomplete solve or failed verification.
const EXIT_INPUT: u8 = 1;
const EXIT_UNSOLVED: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(args: &Args) -> Result<u8, String> {
    let targets = parse_targets(&args.emit)?;

    let text = std::fs::read_to_string(&args.robot)
        .map_err(|e| format!("{}: {e}", args.robot.display()))?;
    let robot = parse_robot_file(&text)
        .map_err(|e| format!("{}: {e}", args.robot.display()))?;

    let output = run_pipeline(robot, args.max_iterations)
        .map_err(|e| format!("solution graph: {e}"))?;
    print!("{}", output.summary());

    if !output.fully_solved() {
        return Ok(EXIT_UNSOLVED);
    }

    let mut code = 0u8;
    if args.verify > 0 {
        code = verify(args, &output)?;
    }

    emit(args, &output, &targets)?;
    Ok(code)
}

fn parse_targets(words: &[String]) -> Result<Vec<EmitTarget>, String> {
    let mut targets = Vec::new();
    for w in words {
        let t = EmitTarget::from_keyword(w).ok_or_else(|| {
            format!("unknown artifact {w:?}; expected latex, python, cpp, dot, or json")
        })?;
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    Ok(targets)
}

fn verify(args: &Args, output: &PipelineOutput) -> Result<u8, String> {
    if output.model.robot.constants.iter().any(|(_, v)| v.is_none()) {
        return Err("verification needs numeric values for every constant".into());
    }
    let summary = output
        .verify_samples(args.verify, args.seed, args.tol)
        .map_err(|e| format!("verification: {e}"))?;
    println!(
        "verification: {}/{} seeds passed (worst residual {:.3e}, tol {:.1e})",
        summary.passed, summary.samples, summary.worst_residual, args.tol
    );
    Ok(if summary.all_passed() { 0 } else { EXIT_UNSOLVED })
}

fn emit(args: &Args, output: &PipelineOutput, targets: &[EmitTarget]) -> Result<(), String> {
    if targets.is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    let view = output.solved_view();
    for &target in targets {
        let path = args.out.join(target.file_name(&output.model.robot.name));
        std::fs::write(&path, view.emit(target))
            .map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
