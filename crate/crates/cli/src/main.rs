mod args;

use std::path::Path;
use std::process::ExitCode;

use args::{expand_config, Cli, Command, EvalArgs, FailAbove};
use clap::Parser;
use log::{info, warn};
use segmetrics::harness::{
    evaluate_dataset, pair_directories, read_manifest, render_report, render_sweep, sweep_confidence, MetricReport,
};
use segmetrics::synthetic::{check_case, export_panels, fuzz_case, ScenarioParams};
use segmetrics::Error;

const USAGE: u8 = 1;
const DATA: u8 = 2;
const INTERNAL: u8 = 3;

fn status_of(e: &Error) -> u8 {
    match e {
        Error::Config(_) => USAGE,
        Error::Generation(_) | Error::NoEligibleRegion(_) | Error::RetriesExhausted(_) | Error::Serialize(_) => {
            INTERNAL
        }
        _ => DATA,
    }
}

fn write_output(text: &str, out: &Path) -> Result<(), Error> {
    if out == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    std::fs::write(out, text).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })
}

/// Gates that the report violates, as messages.
fn gate_failures(report: &MetricReport, gates: &[FailAbove], label: &str) -> Vec<String> {
    let mut out = Vec::new();
    for gate in gates {
        match report.overall.get(gate.metric) {
            Some(&v) if v > gate.limit => out.push(format!("{label}{} = {v:.6} exceeds {}", gate.metric, gate.limit)),
            Some(_) => {}
            None => warn!("{label}{} is undefined for this dataset; gate skipped", gate.metric),
        }
    }
    out
}

fn eval(args: &EvalArgs) -> Result<u8, Error> {
    let cfg = args.to_config();
    cfg.validate()?;
    let pairs = match (&args.manifest, &args.gt, &args.pred) {
        (Some(m), _, _) => read_manifest(m)?,
        (None, Some(gt), Some(pred)) => pair_directories(gt, pred, args.conf.as_deref(), cfg.skip_unpaired)?,
        _ => return Err(Error::Config("give --gt and --pred, or --manifest".into())),
    };
    info!("{} image pairs", pairs.len());

    let failures = if cfg.sweep.is_some() {
        let (sweep, reports) = sweep_confidence(&pairs, &cfg)?;
        write_output(&render_sweep(&sweep, args.format)?, &args.out)?;
        sweep
            .points
            .iter()
            .zip(&reports)
            .flat_map(|(p, r)| gate_failures(r, &args.fail_above, &format!("threshold {}: ", p.threshold)))
            .collect()
    } else {
        let report = evaluate_dataset(&pairs, &cfg)?;
        write_output(&render_report(&report, args.format)?, &args.out)?;
        gate_failures(&report, &args.fail_above, "")
    };
    if args.out != Path::new("-") {
        eprintln!(
            "evaluated {} images, report written to {}",
            pairs.len(),
            args.out.display()
        );
    }
    for f in &failures {
        eprintln!("fail-above: {f}");
    }
    Ok(if failures.is_empty() { 0 } else { INTERNAL })
}

fn check(seeds: u64, start: u64, size: usize, classes: u16, tolerance: f64) -> Result<u8, Error> {
    let params = ScenarioParams {
        width: size,
        height: size,
        num_classes: classes,
        ..ScenarioParams::default()
    };
    let mut mismatched = 0;
    for seed in start..start + seeds {
        let diffs = check_case(&fuzz_case(seed, &params), tolerance)?;
        if !diffs.is_empty() {
            mismatched += 1;
            eprintln!("seed {seed}: {} differences", diffs.len());
            for d in diffs.iter().take(5) {
                eprintln!("  {d}");
            }
        }
    }
    println!("{seeds} seeds checked, {mismatched} mismatches");
    Ok(if mismatched == 0 { 0 } else { INTERNAL })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Eval(args) => eval(&args),
        Command::Panels { out } => {
            let written = export_panels(&out)?;
            println!("wrote {} files under {}", written.len(), out.display());
            Ok(0)
        }
        Command::Check {
            seeds,
            start,
            size,
            classes,
            tolerance,
        } => check(seeds, start, size as usize, classes, tolerance),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status_of(&e))
        }
    }
}
