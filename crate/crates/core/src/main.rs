//! `ppm-lab`: posted-price mechanism laboratory.
//!
//! Commands: `simulate`, `sweep`, `bounds`, `verify`. Exit codes: 0 on
//! success / all checks passing, 1 on verification failure, 2 on usage
//! errors, 3 on runtime or numeric errors.

use ppm_lab::config::{parse_config, Command, OutputFormat, RunConfig};
use ppm_lab::error::Error;
use ppm_lab::mechanism::{Mechanism, MechanismConfig};
use ppm_lab::report;
use ppm_lab::sim::{run_trials, sweep, OracleKind, SimOptions};
use ppm_lab::verify;
use ppm_lab::ValuationModel;

const USAGE: &str = "\
ppm-lab: posted-price mechanism laboratory

USAGE:
  ppm-lab simulate --model SPEC --mech ID --n N [--trials T] [--seed S]
                   [--out PATH] [--format csv|json] [--track-alloc] [--q-trials T]
  ppm-lab sweep    --model SPEC --mech ID --ns N1,N2,... [--trials T] [--seed S]
                   [--out PATH] [--format csv|json]
  ppm-lab bounds   --claim mdp|static-opt [--nmax N] [--out PATH]
  ppm-lab verify   [--claim ID[,ID...]]

Any command accepts --config FILE (flat key = value lines under a
[command] section; flags override the file).

MODELS
  independent: [exp(1), unif(0,2), ...]     unit-demand, independent items
  separable: alphas=[1,0.5], type=exp(1)    v_ij = alpha_j * type_i
  additive: [exp(1), exp(1)]                additive buyers

MECHANISMS
  ladder mdp static-ind dyn-ind static-sep dyn-sep sub-dyn sub-static
  add-static add-dyn vcg

ENVIRONMENT
  PPM_LAB_THREADS caps the worker count.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        std::process::exit(if args.is_empty() { 2 } else { 0 });
    }
    configure_threads();
    match run(&args) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("PPM_LAB_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            if threads >= 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .ok();
            }
        }
    }
}

fn run(args: &[String]) -> Result<i32, Error> {
    let cfg = parse_config(args)?;
    match cfg.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Bounds => cmd_bounds(&cfg),
        Command::Verify => cmd_verify(&cfg),
    }
}

fn mech_config(cfg: &RunConfig) -> MechanismConfig {
    MechanismConfig {
        q_trials: cfg.q_trials,
        ..Default::default()
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32, Error> {
    let model = ValuationModel::parse(cfg.model.as_ref().unwrap())?;
    let n = cfg.n.unwrap();
    let (mech, effective) = Mechanism::build(cfg.mech.as_ref().unwrap(), &model, n, mech_config(cfg))?;
    let options = SimOptions {
        track_allocations: cfg.track_alloc,
        ..Default::default()
    };
    let summary = run_trials(
        &effective,
        &mech,
        n,
        OracleKind::Auto,
        cfg.trials,
        cfg.seed,
        &options,
    )?;
    emit_summaries(&[summary], cfg)?;
    Ok(0)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32, Error> {
    let model = ValuationModel::parse(cfg.model.as_ref().unwrap())?;
    let rows = sweep(
        &model,
        cfg.mech.as_ref().unwrap(),
        &mech_config(cfg),
        &cfg.ns,
        OracleKind::Auto,
        cfg.trials,
        cfg.seed,
        &SimOptions::default(),
    )?;
    emit_summaries(&rows, cfg)?;
    Ok(0)
}

fn emit_summaries(rows: &[ppm_lab::SimulationSummary], cfg: &RunConfig) -> Result<(), Error> {
    let content = match cfg.format {
        OutputFormat::Csv => report::summaries_to_csv(rows),
        OutputFormat::Json => report::summaries_to_json(rows)?,
    };
    report::emit(&content, cfg.out.as_deref())
}

fn cmd_bounds(cfg: &RunConfig) -> Result<i32, Error> {
    let claim = cfg.claim.as_ref().unwrap();
    let report_data = verify::bound_claim(claim, cfg.nmax)?;
    let content = report::bound_report_to_json(&report_data)?;
    report::emit(&content, cfg.out.as_deref())?;
    Ok(if report_data.pass { 0 } else { 1 })
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32, Error> {
    let filter: Vec<String> = cfg
        .claim
        .as_deref()
        .map(|c| c.split(',').map(|s| s.trim().to_string()).collect())
        .unwrap_or_default();
    for f in &filter {
        if !verify::CLAIM_IDS.contains(&f.as_str()) {
            return Err(Error::usage(format!(
                "unknown claim `{f}`; valid claims: {}",
                verify::CLAIM_IDS.join(", ")
            )));
        }
    }
    let results = verify::run_claims(&filter)?;
    let mut all_pass = true;
    for r in &results {
        println!("{}", r.line());
        all_pass &= r.pass;
    }
    Ok(if all_pass { 0 } else { 1 })
}
