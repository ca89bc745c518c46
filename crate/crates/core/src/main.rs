use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optcar::io::{
    load_game, parse_problem, read_trajectory_csv, write_trajectory_csv, AbstractionDump, Problem, RunOutput,
};
use optcar::synthesis::cost_is_sound;
use optcar::wts::Strategy;
use optcar::{
    canonical_refinement_witness, check_simulation, cons_abs, lemma7_check, optcar, simulate, solve_finite_game,
    Error, Lattice, Result, Trajectory,
};

#[derive(Parser)]
#[command(name = "optcar", version, about = "Optimal controller synthesis for piecewise linear systems")]
struct Cli {
    /// Seed for every sampling step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, env = "OPTCAR_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refinement loop and write reports and trajectories.
    Synthesize {
        problem: PathBuf,
        /// Overrides max_iterations from the problem file.
        #[arg(long)]
        iterations: Option<usize>,
        /// Output directory; the report goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the abstraction at the initial grid.
    Abstract {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a serialized finite game.
    Solve { game: PathBuf },
    /// Replay an input sequence on the concrete system.
    Simulate {
        problem: PathBuf,
        /// `zeros(N)` or a JSON list of input vectors.
        #[arg(long, conflicts_with = "table")]
        inputs: Option<String>,
        /// Take the inputs from a trajectory table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sampled soundness, simulation and perturbation checks.
    Check {
        problem: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synthesize {
            problem,
            iterations,
            out,
        } => synthesize(&problem, iterations, out.as_deref(), cli.seed),
        Command::Abstract { problem, out } => {
            let p = load(&problem)?;
            let state = Lattice::new(&p.system.state_space, &p.config.epsilon0)?;
            let input = Lattice::with_counts(&p.system.input_space, &p.config.input_cells)?;
            let abs = cons_abs(&p.system, &state, &input, &p.x0)?;
            let text = serde_json::to_string_pretty(&AbstractionDump::new(&abs)).expect("dump serializes") + "\n";
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Solve { game } => {
            let (game, start) = load_game(&game)?;
            let solution = solve_finite_game(&game, start)?;
            let cost = if solution.cost.is_finite() {
                solution.cost.to_string()
            } else {
                "inf".into()
            };
            println!("cost {cost}");
            println!("iterations {}", solution.iterations);
            if let Some(strategy) = &solution.strategy {
                let horizon = strategy.horizon();
                let choices: Vec<String> = (0..game.num_states())
                    .map(|s| strategy.choice(horizon, s).map_or("-".into(), |u| u.to_string()))
                    .collect();
                println!("choices {}", choices.join(" "));
            }
            Ok(if solution.cost.is_finite() { 0 } else { 2 })
        }
        Command::Simulate {
            problem,
            inputs,
            table,
            out,
        } => {
            let p = load(&problem)?;
            let (x0, inputs) = match (inputs, table) {
                (_, Some(path)) => {
                    let t = read_trajectory_csv(fs::File::open(&path)?)?;
                    (t.states[0].clone(), t.inputs)
                }
                (Some(text), None) => (p.x0.clone(), parse_inputs(&text, p.system.input_dim())?),
                (None, None) => (p.x0.clone(), Vec::new()),
            };
            let trajectory = simulate(&p.system, &x0, &inputs)?;
            emit(out.as_deref(), &csv_text(&trajectory)?)?;
            Ok(0)
        }
        Command::Check { problem, samples } => check(&problem, samples, cli.seed),
    }
}

fn load(path: &Path) -> Result<Problem> {
    let p = parse_problem(path)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_text(trajectory: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, trajectory)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn parse_inputs(text: &str, p: usize) -> Result<Vec<Vec<f64>>> {
    let text = text.trim();
    if let Some(n) = text.strip_prefix("zeros(").and_then(|r| r.strip_suffix(')')) {
        let n: usize = n.trim().parse().map_err(|_| Error::Parse {
            location: "--inputs".into(),
            message: format!("bad step count `{n}`"),
        })?;
        return Ok(vec![vec![0.0; p]; n]);
    }
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: "--inputs".into(),
        message: e.to_string(),
    })
}

fn synthesize(path: &Path, iterations: Option<usize>, out: Option<&Path>, seed: u64) -> Result<u8> {
    let mut p = load(path)?;
    if let Some(k) = iterations {
        p.config.max_iterations = k;
    }
    let reports = optcar(&p.system, &p.automaton, &p.x0, &p.config)?;
    for r in &reports {
        let cost = r.concrete_cost.map_or("-".into(), |c| c.to_string());
        eprintln!(
            "iteration {}: cells {:?}, abstract cost {}, concrete cost {}, steps {}, {:.2}s",
            r.iteration,
            r.state_cells,
            r.abstract_cost,
            cost,
            r.trajectory.as_ref().map_or(0, Trajectory::steps),
            r.timings.solve + r.timings.extraction
        );
    }
    let winning = reports.last().is_some_and(|r| r.winning);
    let output = RunOutput {
        problem: if p.name.is_empty() {
            path.display().to_string()
        } else {
            p.name.clone()
        },
        seed,
        reports,
    };
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.json"), output.to_json())?;
            fs::write(dir.join("timings.json"), output.timings_json())?;
            for r in &output.reports {
                if let Some(t) = &r.trajectory {
                    fs::write(dir.join(format!("trajectory_{}.csv", r.iteration)), csv_text(t)?)?;
                }
            }
        }
        None => print!("{}", output.to_json()),
    }
    Ok(if winning { 0 } else { 2 })
}

fn check(path: &Path, samples: usize, seed: u64) -> Result<u8> {
    let p = load(path)?;
    let state = Lattice::new(&p.system.state_space, &p.config.epsilon0)?;
    let input = Lattice::with_counts(&p.system.input_space, &p.config.input_cells)?;
    let coarse = cons_abs(&p.system, &state, &input, &p.x0)?;
    let fine = cons_abs(&p.system, &state.halved(), &input, &p.x0)?;
    let mut failures = 0;

    let soundness = optcar::abstraction::sample_soundness(&p.system, &coarse, samples, seed);
    report_line(
        &mut failures,
        "abstraction soundness",
        soundness.is_sound(),
        format!(
            "{} samples, {} missing transitions, {} weight violations, {} missing sinks",
            samples,
            soundness.missing_transitions.len(),
            soundness.weight_violations.len(),
            soundness.missing_sinks.len()
        ),
    );

    let witness = canonical_refinement_witness(&fine, &coarse)?;
    let sim = check_simulation(&fine.wts, &coarse.wts, &witness);
    report_line(
        &mut failures,
        "refinement simulation",
        sim.is_ok(),
        sim.err().map_or("fine grid simulated by coarse grid".into(), |v| v.to_string()),
    );

    let mut config = p.config.clone();
    config.max_iterations = 2;
    let reports = optcar(&p.system, &p.automaton, &p.x0, &config)?;
    let monotone = reports[1].abstract_cost <= reports[0].abstract_cost;
    report_line(
        &mut failures,
        "refinement monotonicity",
        monotone,
        format!("{} then {}", reports[0].abstract_cost, reports[1].abstract_cost),
    );
    let sound = reports.iter().all(cost_is_sound);
    report_line(&mut failures, "concrete cost bound", sound, "concrete cost <= abstract cost".into());

    if let Some(t) = reports[0].trajectory.as_ref().filter(|t| t.steps() > 0) {
        let eps_x = p.config.epsilon0.iter().map(optcar::geometry::rational_to_f64).fold(0.0, f64::max);
        let eps_u = input.widths().iter().map(optcar::geometry::rational_to_f64).fold(0.0, f64::max);
        let l7 = lemma7_check(&p.system, t, eps_x, eps_u, samples, seed);
        report_line(
            &mut failures,
            "perturbation bound",
            l7.holds(),
            format!(
                "{} trials, {} skipped, {} violations, max ratio {:.3}",
                l7.trials, l7.skipped, l7.violations, l7.max_ratio
            ),
        );
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn report_line(failures: &mut usize, name: &str, ok: bool, detail: String) {
    if !ok {
        *failures += 1;
    }
    println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
}
