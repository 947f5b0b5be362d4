//! Command line frontend over the pair-density library. Every run writes a
//! manifest next to its outputs with the inputs, seeds, tolerances, and
//! library version needed to reproduce it.
//!
//! Exit codes: 0 success, 1 rule violation or non-representable verdict,
//! 2 invalid input, 3 resource or convergence failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdm_core::basis::Configuration;
use gdm_core::continuation::{ground_state_search, lowest_block_assembly, scan_curves};
use gdm_core::dynamics::{
    pair_lift_unitary, propagate_coupled, propagate_gdm, sudden_density, NucleiState, Schedule,
    ScheduleKind,
};
use gdm_core::gdm::{
    change_basis, check_nrep_matrix, slater_gdm, tag_orbital_pairs, tag_site_pairs, Gdm,
    NrepReport, RuleVerdict, RULE_TOL,
};
use gdm_core::io::{self, Manifest, ScheduleSpec};
use gdm_core::model::{build_model, Model, ModelConfig};
use gdm_core::oracle::fci_solve;
use gdm_core::{CoreError, Result};

/// Pair-density toolbox: representability checks, exact-diagonalization
/// oracles, eigencurve continuation, and driven density dynamics on
/// one-dimensional lattice models.
#[derive(Parser)]
#[command(name = "gdm", version)]
struct JobConfig {
    #[command(subcommand)]
    command: JobCommand,
}

#[derive(Subcommand)]
enum JobCommand {
    /// Grade a stored pair density matrix against the necessary rules
    Check(CheckArgs),
    /// Exact low-lying spectrum of the interacting problem
    Oracle(OracleArgs),
    /// Track eigenvalue curves over the coupling ramp and assemble
    /// adiabatic ground-state candidates
    Solve(SolveArgs),
    /// Propagate the pair density under a switching schedule
    Propagate(PropagateArgs),
    /// Density statistics after an instantaneous interaction switch
    Sudden(SuddenArgs),
    /// Mean-field nuclear motion coupled to the electronic density
    Thermalize(ThermalizeArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Pair density matrix JSON to grade
    #[arg(long)]
    gdm: PathBuf,
    /// Model JSON, recorded in the manifest when given
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also run the generability cross-check on saturated diagonals
    #[arg(long)]
    oracle: bool,
    /// Directory for report.json and the manifest
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    electrons: usize,
    /// Symmetry-breaking strength of the one-body perturbation
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Interaction coupling at which to diagonalize
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Number of low-lying states
    #[arg(long, default_value_t = 8)]
    states: usize,
    /// Override the model's perturbation seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    electrons: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Number of coupling intervals; the grid has this many steps plus one point
    #[arg(long, default_value_t = 100)]
    lambda_steps: usize,
    /// Number of tracked eigenvalue curves
    #[arg(long, default_value_t = 12)]
    states: usize,
    /// Number of enumerated starting determinants
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    /// Also diagonalize at full coupling and report deviations
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PropagateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    electrons: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Builtin schedule (ramp, sudden, constant) or path to a schedule JSON;
    /// a file brings its own dt and t_final
    #[arg(long, default_value = "ramp")]
    schedule: String,
    /// Coupling strength for the constant schedule
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 100.0)]
    t_final: f64,
    /// Steps between trajectory rows
    #[arg(long, default_value_t = 10)]
    sample_every: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SuddenArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    electrons: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Spacing of the sampled time grid
    #[arg(long, default_value_t = 0.5)]
    dt: f64,
    #[arg(long, default_value_t = 1.0e4)]
    t_final: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThermalizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    electrons: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_final: f64,
    #[arg(long, default_value_t = 1)]
    sample_every: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let config = JobConfig::parse();
    match dispatch(config.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: JobCommand) -> Result<u8> {
    match command {
        JobCommand::Check(a) => run_check(a),
        JobCommand::Oracle(a) => run_oracle(a),
        JobCommand::Solve(a) => run_solve(a),
        JobCommand::Propagate(a) => run_propagate(a),
        JobCommand::Sudden(a) => run_sudden(a),
        JobCommand::Thermalize(a) => run_thermalize(a),
    }
}

fn load_model(path: &Path, seed: Option<u64>) -> Result<Model> {
    let mut config: ModelConfig = serde_json::from_str(&io::read_text(path)?)?;
    if let Some(s) = seed {
        config.perturbation_seed = s;
    }
    build_model(config)
}

/// Lowest determinant over the one-body eigenorbitals, expressed over
/// site pairs. The standard launch state for propagation commands.
fn aufbau_pair_gdm(model: &Model, epsilon: f64, n_electrons: usize) -> Result<Gdm> {
    let config = Configuration::new((1..=n_electrons).collect())?;
    let d_orb = slater_gdm(&config, model.n_orbitals(), tag_orbital_pairs(epsilon))?;
    let (_, x) = model.one_body_eigen(epsilon)?;
    let p = pair_lift_unitary(&x)?;
    change_basis(&d_orb, &p, tag_site_pairs())
}

fn rule_line(name: &str, v: &RuleVerdict) {
    let verdict = if v.passed { "pass" } else { "FAIL" };
    println!("{name:<14} residual {:>10.3e}  {verdict}", v.residual);
}

fn report_json(r: &NrepReport) -> serde_json::Value {
    let rule = |v: &RuleVerdict| serde_json::json!({"residual": v.residual, "passed": v.passed});
    serde_json::json!({
        "hermiticity": rule(&r.hermiticity),
        "diagonal_range": rule(&r.diagonal_range),
        "trace": rule(&r.trace),
        "trace_value": r.trace_value,
        "trace_squared": rule(&r.trace_squared),
        "trace_squared_value": r.trace_squared_value,
        "exclusion": rule(&r.exclusion),
        "generability": r.generability.as_ref().map(|g| serde_json::json!({
            "flat_ones": g.flat_ones,
            "orbital_union": g.orbital_union,
            "generable": g.generable,
            "configuration": g.configuration.as_ref().map(|c| c.orbitals().to_vec()),
        })),
        "passes_necessary_rules": r.passes_necessary_rules,
    })
}

fn run_check(a: CheckArgs) -> Result<u8> {
    let (matrix, n_electrons, basis_tag) = io::gdm_parts_from_json(&io::read_text(&a.gdm)?)?;
    if n_electrons < 2 {
        return Err(CoreError::InvalidInput(format!(
            "stored matrix claims {n_electrons} electrons, need at least 2"
        )));
    }
    let report = check_nrep_matrix(&matrix, n_electrons, a.oracle);

    println!("basis {basis_tag}, {n_electrons} electrons, {} pair states", matrix.nrows());
    rule_line("hermiticity", &report.hermiticity);
    rule_line("diagonal", &report.diagonal_range);
    rule_line("trace", &report.trace);
    rule_line("trace squared", &report.trace_squared);
    rule_line("exclusion", &report.exclusion);
    match &report.generability {
        Some(gen) if gen.generable => {
            let config = gen.configuration.as_ref().expect("generable implies a configuration");
            println!("generability   pass  configuration {:?}", config.orbitals());
        }
        Some(gen) => {
            println!(
                "generability   FAIL  saturated pairs {:?} span orbitals {:?}, no single configuration",
                gen.flat_ones, gen.orbital_union
            );
        }
        None if a.oracle => {
            println!("generability   skipped  diagonal is not a saturated pair pattern");
        }
        None => {}
    }
    let verdict = report.passes_necessary_rules;
    println!("verdict: {}", if verdict { "pass" } else { "fail" });

    if let Some(out) = &a.out {
        io::write_text(
            &out.join("report.json"),
            &serde_json::to_string_pretty(&report_json(&report))?,
        )?;
        let mut m = Manifest::new("check");
        m.input("gdm", serde_json::json!(a.gdm.display().to_string()))
            .input("oracle", serde_json::json!(a.oracle))
            .tolerance("rule", RULE_TOL);
        if let Some(model) = &a.model {
            m.input("model", serde_json::json!(model.display().to_string()));
        }
        io::write_text(&out.join("manifest.json"), &m.to_json()?)?;
    }
    Ok(if verdict { 0 } else { 1 })
}

fn run_oracle(a: OracleArgs) -> Result<u8> {
    let model = load_model(&a.model, a.seed)?;
    let solution = fci_solve(&model, a.electrons, a.epsilon, a.lambda, a.states)?;
    let doc = serde_json::json!({
        "n_electrons": a.electrons,
        "epsilon": a.epsilon,
        "lambda": a.lambda,
        "energies": solution.energies,
        "residuals": solution.residuals,
    });
    io::write_text(&a.out.join("spectrum.json"), &serde_json::to_string_pretty(&doc)?)?;

    let mut m = Manifest::new("oracle");
    m.input("model", serde_json::json!(a.model.display().to_string()))
        .input("electrons", serde_json::json!(a.electrons))
        .input("epsilon", serde_json::json!(a.epsilon))
        .input("lambda", serde_json::json!(a.lambda))
        .input("states", serde_json::json!(a.states))
        .seed("perturbation", model.config().perturbation_seed);
    io::write_text(&a.out.join("manifest.json"), &m.to_json()?)?;
    println!(
        "{} states, ground energy {:.12}",
        solution.energies.len(),
        solution.energies[0]
    );
    Ok(0)
}

fn run_solve(a: SolveArgs) -> Result<u8> {
    let model = load_model(&a.model, a.seed)?;
    if a.lambda_steps == 0 {
        return Err(CoreError::InvalidInput("lambda-steps must be positive".into()));
    }
    let grid: Vec<f64> = (0..=a.lambda_steps)
        .map(|i| i as f64 / a.lambda_steps as f64)
        .collect();
    let curves = scan_curves(&model, a.electrons, a.epsilon, &grid, a.states)?;
    let fci = if a.oracle {
        Some(fci_solve(&model, a.electrons, a.epsilon, 1.0, a.states)?)
    } else {
        None
    };
    let spectrum = fci.as_ref().map(|s| s.energies.as_slice());
    let solutions = ground_state_search(&curves, a.candidates, spectrum)?;
    let block = lowest_block_assembly(&curves, spectrum)?;

    let seed = model.config().perturbation_seed;
    let docs: Vec<_> = solutions
        .iter()
        .map(|s| io::solution_document(s, seed))
        .collect();
    io::write_text(&a.out.join("curves.csv"), &io::curves_csv(&curves))?;
    io::write_text(&a.out.join("solutions.json"), &serde_json::to_string_pretty(&docs)?)?;
    io::write_text(
        &a.out.join("lowest_block.json"),
        &serde_json::to_string_pretty(&io::solution_document(&block, seed))?,
    )?;

    let mut m = Manifest::new("solve");
    m.input("model", serde_json::json!(a.model.display().to_string()))
        .input("electrons", serde_json::json!(a.electrons))
        .input("epsilon", serde_json::json!(a.epsilon))
        .input("lambda_steps", serde_json::json!(a.lambda_steps))
        .input("states", serde_json::json!(a.states))
        .input("candidates", serde_json::json!(a.candidates))
        .input("oracle", serde_json::json!(a.oracle))
        .seed("perturbation", seed)
        .tolerance("rule", RULE_TOL);
    io::write_text(&a.out.join("manifest.json"), &m.to_json()?)?;

    println!(
        "{} candidates, best final energy {:.12}, {} crossings, lowest block {}",
        solutions.len(),
        solutions
            .iter()
            .map(|s| s.final_energy)
            .fold(f64::INFINITY, f64::min),
        curves.crossings().len(),
        if block.representable { "representable" } else { "NOT representable" }
    );
    Ok(if block.representable { 0 } else { 1 })
}

fn resolve_schedule(
    name: &str,
    epsilon: f64,
    lambda: f64,
    dt: f64,
    t_final: f64,
) -> Result<Schedule> {
    let kind = match name {
        "ramp" => ScheduleKind::Ramp { t1: 0.0, t2: t_final, t3: t_final },
        "sudden" => ScheduleKind::Sudden { t_switch: 0.0 },
        "constant" => ScheduleKind::Constant { lambda },
        path => {
            let spec: ScheduleSpec = serde_json::from_str(&io::read_text(Path::new(path))?)?;
            return spec.to_schedule(epsilon);
        }
    };
    let schedule = Schedule { kind, epsilon, dt, t_final };
    schedule.validate()?;
    Ok(schedule)
}

fn run_propagate(a: PropagateArgs) -> Result<u8> {
    let model = load_model(&a.model, a.seed)?;
    let schedule = resolve_schedule(&a.schedule, a.epsilon, a.lambda, a.dt, a.t_final)?;
    let d0 = aufbau_pair_gdm(&model, a.epsilon, a.electrons)?;
    let traj = propagate_gdm(&d0, &model, &schedule, a.sample_every)?;
    io::write_text(&a.out.join("trajectory.csv"), &io::trajectory_csv(&traj))?;

    let mut m = Manifest::new("propagate");
    m.input("model", serde_json::json!(a.model.display().to_string()))
        .input("electrons", serde_json::json!(a.electrons))
        .input("epsilon", serde_json::json!(a.epsilon))
        .input("schedule", serde_json::json!(a.schedule))
        .input("lambda", serde_json::json!(a.lambda))
        .input("dt", serde_json::json!(schedule.dt))
        .input("t_final", serde_json::json!(schedule.t_final))
        .input("sample_every", serde_json::json!(a.sample_every))
        .seed("perturbation", model.config().perturbation_seed);
    io::write_text(&a.out.join("manifest.json"), &m.to_json()?)?;

    let last = traj.samples.last().expect("at least the initial sample");
    println!("{} rows, final energy {:.12}", traj.samples.len(), last.energy);
    Ok(0)
}

fn run_sudden(a: SuddenArgs) -> Result<u8> {
    let model = load_model(&a.model, a.seed)?;
    if !(a.dt > 0.0) || !(a.t_final > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "need positive dt and t-final, got ({}, {})",
            a.dt, a.t_final
        )));
    }
    let config = Configuration::new((1..=a.electrons).collect())?;
    let d_slater = slater_gdm(&config, model.n_orbitals(), tag_orbital_pairs(a.epsilon))?;
    let n_t = (a.t_final / a.dt).floor() as usize + 1;
    let t_grid: Vec<f64> = (0..n_t).map(|i| i as f64 * a.dt).collect();
    let report = sudden_density(&d_slater, &model, a.epsilon, &t_grid)?;
    io::write_text(&a.out.join("sudden.csv"), &io::sudden_csv(&report))?;
    io::write_text(
        &a.out.join("sudden_summary.json"),
        &serde_json::to_string_pretty(&io::sudden_summary(&report))?,
    )?;

    let mut m = Manifest::new("sudden");
    m.input("model", serde_json::json!(a.model.display().to_string()))
        .input("electrons", serde_json::json!(a.electrons))
        .input("epsilon", serde_json::json!(a.epsilon))
        .input("dt", serde_json::json!(a.dt))
        .input("t_final", serde_json::json!(a.t_final))
        .seed("perturbation", model.config().perturbation_seed);
    io::write_text(&a.out.join("manifest.json"), &m.to_json()?)?;
    println!(
        "{} samples, {} oscillation frequencies",
        report.times.len(),
        report.n_frequencies
    );
    Ok(0)
}

fn run_thermalize(a: ThermalizeArgs) -> Result<u8> {
    let model = load_model(&a.model, a.seed)?;
    if !(a.dt > 0.0) || !(a.t_final > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "need positive dt and t-final, got ({}, {})",
            a.dt, a.t_final
        )));
    }
    let d0 = aufbau_pair_gdm(&model, a.epsilon, a.electrons)?;
    let steps = (a.t_final / a.dt).round() as usize;
    let traj = propagate_coupled(
        &d0,
        &NucleiState::from_model(&model),
        &model,
        a.epsilon,
        a.lambda,
        a.dt,
        steps,
        a.sample_every,
    )?;
    io::write_text(&a.out.join("coupled.csv"), &io::coupled_csv(&traj))?;

    let mut m = Manifest::new("thermalize");
    m.input("model", serde_json::json!(a.model.display().to_string()))
        .input("electrons", serde_json::json!(a.electrons))
        .input("epsilon", serde_json::json!(a.epsilon))
        .input("lambda", serde_json::json!(a.lambda))
        .input("dt", serde_json::json!(a.dt))
        .input("t_final", serde_json::json!(a.t_final))
        .input("sample_every", serde_json::json!(a.sample_every))
        .seed("perturbation", model.config().perturbation_seed);
    io::write_text(&a.out.join("manifest.json"), &m.to_json()?)?;

    let last = traj.samples.last().expect("at least the initial sample");
    println!(
        "{} rows, force mismatch {:.3e}, final total energy {:.12}",
        traj.samples.len(),
        traj.max_force_mismatch,
        last.total_energy
    );
    Ok(0)
}
