//! `necklace`: solve and verify fair divisions of measures on the unit cube,
//! split bead necklaces exactly, and analyse rainbow complexes.
//!
//! Exit codes: 0 success, 1 no solution found (or a check failed), 2 invalid
//! input.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use necklace::formats::{BeadSpec, DivisionJson, Instance, InstanceJson, NecklaceJson};
use necklace::generator::generate_instance;
use necklace::measures::MAX_DIM;
use necklace::rainbow::{
    euler_comparison, homology_mod2, lex_shelling_check, sphere_count_crosscheck, zp_action_check,
    DEFAULT_MAX_CELLS,
};
use necklace::{
    bead_necklace_to_measures, solve, solve_discrete_1d, verify, FaceLattice, RainbowComplex, RainbowError,
    SolveError, SolverConfig, VerificationReport,
};

#[derive(Parser)]
#[command(name = "necklace", version, about = "Fair division of multidimensional necklaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a fair division for an instance file.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        /// Write the division here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check a division against an instance.
    Verify {
        instance: PathBuf,
        division: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Analyse the rainbow complex of a polytope.
    Complex {
        analysis: Analysis,
        /// e.g. simplex:2, cube:3, xpoly:2, polygon:5, square, point,
        /// prod:simplex:2,simplex:1
        #[arg(long)]
        polytope: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_CELLS)]
        max_cells: usize,
        #[arg(long)]
        json: bool,
    },
    /// Split a bead necklace exactly with the fewest cuts.
    Necklace1d {
        /// Bead letters such as AABB, or a JSON file {"beads": ...}.
        beads: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded random instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        /// Maximum number of cells per axis.
        #[arg(long, default_value_t = 8)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Euler,
    Homology,
    Shelling,
    Action,
}

enum Failure {
    /// Well-formed input for which no solution was found or a check failed.
    Unsolved(anyhow::Error),
    Invalid(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { instance, tol, seed, restarts, budget, out, json } => {
            cmd_solve(&instance, tol, seed, restarts, budget, out.as_deref(), json)
        }
        Command::Verify { instance, division, tol, json } => cmd_verify(&instance, &division, tol, json),
        Command::Complex { analysis, polytope, k, max_cells, json } => {
            cmd_complex(analysis, &polytope, k, max_cells, json)
        }
        Command::Necklace1d { beads, k, json } => cmd_necklace1d(&beads, k, json),
        Command::Gen { seed, n, d, k, resolution, out } => cmd_gen(seed, n, d, k, resolution, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unsolved(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Reads JSON, reporting parse errors as `path:line:column: message`.
fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        let message = e.to_string();
        let message = message.split(" at line ").next().unwrap_or(&message).to_string();
        anyhow!("{}:{}:{}: {message}", path.display(), e.line(), e.column())
    })
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let raw: InstanceJson = read_json(path)?;
    raw.into_instance().with_context(|| format!("invalid instance {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn fmt_row<T: Display>(cells: impl IntoIterator<Item = T>, width: usize) -> String {
    cells.into_iter().map(|c| format!("{c:>width$}")).collect::<Vec<_>>().join(" ")
}

fn print_verification(report: &VerificationReport) {
    println!("cuts per axis   {:?} (expected {:?})", report.cut_counts, report.expected_counts);
    println!("residual norm   {:.3e} (tolerance {:.1e})", report.residual_norm, report.tolerance);
    println!("masses, one row per measure, one column per thief:");
    println!("{:>8} {}", "", fmt_row((1..=report.k).map(|c| format!("thief {c}")), 12));
    for (j, row) in report.masses.iter().enumerate() {
        println!("{:>8} {}", format!("μ{}", j + 1), fmt_row(row.iter().map(|m| format!("{m:.9}")), 12));
    }
    for p in &report.problems {
        println!("problem: {p}");
    }
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
}

fn cmd_solve(
    path: &Path,
    tol: Option<f64>,
    seed: u64,
    restarts: Option<usize>,
    budget: Option<usize>,
    out: Option<&Path>,
    json: bool,
) -> Outcome {
    let instance = load_instance(path)?;
    let defaults = SolverConfig::default();
    let config = SolverConfig {
        tolerance: tol.unwrap_or(defaults.tolerance),
        restarts: restarts.unwrap_or(defaults.restarts),
        budget: budget.unwrap_or(defaults.budget),
        seed,
        mode: instance.mode,
        ..defaults
    };
    let division = match solve(&instance.measures, instance.k, &instance.m, &config) {
        Ok(d) => d,
        Err(e @ SolveError::SearchExhausted { .. }) => return Err(Failure::Unsolved(e.into())),
        Err(e) => return Err(Failure::Invalid(e.into())),
    };
    let report = verify(&division, &instance.measures, config.acceptance_tolerance(instance.k), &instance.m);
    let division_json = DivisionJson::from(&division);
    if let Some(out) = out {
        std::fs::write(out, serde_json::to_string_pretty(&division_json)? + "\n")
            .with_context(|| format!("cannot write {}", out.display()))?;
    }
    if json {
        print_json(&serde_json::json!({ "division": division_json, "report": report }))?;
    } else {
        if out.is_none() {
            println!("{}", serde_json::to_string(&division_json)?);
        }
        print_verification(&report);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unsolved(anyhow!("division failed verification")))
    }
}

fn cmd_verify(instance: &Path, division: &Path, tol: Option<f64>, json: bool) -> Outcome {
    let instance = load_instance(instance)?;
    let raw: DivisionJson = read_json(division)?;
    let division = raw.to_division().with_context(|| format!("invalid division {}", division.display()))?;
    if division.k() != instance.k {
        return Err(Failure::Invalid(anyhow!("division is for k = {}, instance has k = {}", division.k(), instance.k)));
    }
    if division.cuts().dim() != instance.measures.dim() {
        return Err(Failure::Invalid(anyhow!(
            "division has dimension {}, instance has dimension {}",
            division.cuts().dim(),
            instance.measures.dim()
        )));
    }
    let tol = tol.unwrap_or_else(|| SolverConfig::default().acceptance_tolerance(instance.k));
    let report = verify(&division, &instance.measures, tol, &instance.m);
    if json {
        print_json(&report)?;
    } else {
        print_verification(&report);
        for d in report.deviations.iter().filter(|d| d.deviation.abs() > tol) {
            println!("  measure {} thief {}: mass {:.9}, off by {:+.3e}", d.measure, d.color, d.mass, d.deviation);
        }
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unsolved(anyhow!("division is not fair within {tol:e}")))
    }
}

fn rainbow_failure(e: RainbowError) -> Failure {
    match e {
        RainbowError::FixedCellFound(_) | RainbowError::Mismatch(_) => Failure::Unsolved(e.into()),
        _ => Failure::Invalid(e.into()),
    }
}

fn cmd_complex(analysis: Analysis, spec: &str, k: usize, max_cells: usize, json: bool) -> Outcome {
    let q = FaceLattice::parse(spec)?;
    let build = || RainbowComplex::build(&q, k, max_cells).map_err(rainbow_failure);
    match analysis {
        Analysis::Euler => {
            if k < 2 {
                return Err(Failure::Invalid(RainbowError::TooFewLabels(k).into()));
            }
            let r = euler_comparison(&q, k);
            if json {
                print_json(&r)?;
            } else {
                println!("polytope        {spec}, f-vector {:?}", r.f_vector);
                println!("euler (direct)  {}", r.direct);
                match &r.formula {
                    Some(f) => println!("euler (formula) {f}"),
                    None => println!("euler (formula) n/a, base is not simplicial"),
                }
                if let Some(note) = &r.note {
                    println!("note: {note}");
                }
            }
        }
        Analysis::Homology => {
            let complex = build()?;
            let r = homology_mod2(&complex);
            if json {
                print_json(&r)?;
            } else {
                println!("cells per dimension  {}", fmt_row(&r.cell_counts, 6));
                println!("GF(2) Betti numbers  {}", fmt_row(&r.betti, 6));
                println!("euler characteristic {}", r.euler);
                println!("(degree 0 is reduced; {})", r.note);
            }
        }
        Analysis::Shelling => {
            let r = lex_shelling_check(&q, k).map_err(rainbow_failure)?;
            let cross = if json || r.passed { Some(sphere_count_crosscheck(&q, k)) } else { None };
            if json {
                let cross = match &cross {
                    Some(Ok(c)) => serde_json::to_value(c)?,
                    Some(Err(e)) => serde_json::json!({ "error": e.to_string() }),
                    None => serde_json::Value::Null,
                };
                print_json(&serde_json::json!({ "shelling": r, "crosscheck": cross }))?;
            } else {
                println!("top cells       {}", r.top_cells);
                println!("contractible    {}", r.contractible);
                println!("full boundary   {}", r.full_boundary);
                println!("spheres         {}", r.sphere_count);
                println!("literal unions  {}", if r.literal_checked { "checked" } else { "skipped (too many cells)" });
                for v in &r.violations {
                    println!("violation: {v}");
                }
                match &cross {
                    Some(Ok(c)) => println!(
                        "crosscheck      spheres {} = top Betti {} = euler {}",
                        c.sphere_count, c.top_betti, c.euler_prediction
                    ),
                    Some(Err(e)) => println!("crosscheck      {e}"),
                    None => {}
                }
            }
            if !r.passed {
                return Err(Failure::Unsolved(anyhow!("shelling check failed")));
            }
            if let Some(Err(e)) = cross {
                return Err(rainbow_failure(e));
            }
        }
        Analysis::Action => {
            let complex = build()?;
            let r = zp_action_check(&complex, k).map_err(rainbow_failure)?;
            if json {
                print_json(&r)?;
            } else {
                println!("Z_{} acting on {} cells: {} orbits", r.p, r.cells, r.orbits);
                println!("free            {}", r.free);
                println!("facets kept     {}", r.facets_preserved);
            }
            if !(r.free && r.facets_preserved) {
                return Err(Failure::Unsolved(anyhow!("action check failed")));
            }
        }
    }
    Ok(())
}

fn cmd_necklace1d(beads: &str, k: usize, json: bool) -> Outcome {
    let path = Path::new(beads);
    let spec = if path.is_file() {
        read_json::<NecklaceJson>(path)?.beads
    } else {
        BeadSpec::Letters(beads.to_string())
    };
    let colors = spec.colors()?;
    let split = solve_discrete_1d(&colors, k)?;
    let n = colors.iter().copied().max().unwrap_or(0);
    let measures = bead_necklace_to_measures(&colors, n)?;
    let division = split.to_division(k)?;
    let report = verify(&division, &measures, 1e-12, &division.cuts().counts());
    if json {
        print_json(&serde_json::json!({ "split": split, "cut_bound": n * (k - 1), "report": report }))?;
    } else {
        println!("cuts after beads {:?} ({} of at most {})", split.cuts, split.cuts.len(), n * (k - 1));
        println!("piece owners     {:?}", split.assignment);
        println!("{}", if report.passed { "PASS" } else { "FAIL" });
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unsolved(anyhow!("split is not exact")))
    }
}

fn cmd_gen(seed: u64, n: usize, d: usize, k: usize, resolution: usize, out: Option<&Path>) -> Outcome {
    if n == 0 || d == 0 || d > MAX_DIM || k < 2 || resolution == 0 {
        return Err(Failure::Invalid(anyhow!("need n ≥ 1, 1 ≤ d ≤ {MAX_DIM}, k ≥ 2 and resolution ≥ 1")));
    }
    let text = serde_json::to_string_pretty(&generate_instance(seed, n, d, k, resolution).to_json())? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
