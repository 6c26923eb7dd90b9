//! Command-line front end: solve, verify, convert, influence, gap, generate,
//! experiment.
//!
//! Exit codes: 0 success, 1 input or guard error, 2 principled negative
//! verdict (no stable outcome / not representable / not applicable),
//! 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use market_eq::equilibrium::{
    balanced_pspe, build_stability_lp, check_outcome, find_pspe_with,
    homogeneous_min_delta, synergy_two_firm_pspe, two_firm_weighted_pspe, BalancedPspe,
    DeviationTag, OutcomeReport, PspeSearch, StabilityObjective,
};
use market_eq::experiments::{
    existence_census, generate_dataset, revenue_csv, revenue_study, stability_csv,
    stability_study, survival_csv, GeneratorSpec,
};
use market_eq::game::{game_from_json, game_to_json, mask_members, InfluenceMode};
use market_eq::network::{
    moebius_decomposition, network_to_synergy, synergy_to_network, NetworkFile, SynergyMatrixFile,
};
use market_eq::partition::configuration_lp;
use market_eq::rational::{format_rat, parse_rat, to_f64, Rat};
use market_eq::{
    CompetitionGame, Error, InfluenceNetwork, Limits, Outcome, Partition, SynergyMatrix, Valuation,
};

const EXIT_INPUT: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "market-eq",
    about = "Solvers for two-stage firm/worker competition games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find stable payments for a game, or refute their existence
    Solve(SolveArgs),
    /// Check an outcome file against a game: rationality, envy, fairness,
    /// marginal bounds, and the exact deviation gap
    Verify(VerifyArgs),
    /// Convert between network, synergy-matrix, and joint-influence forms
    Convert(ConvertArgs),
    /// Exact or sampled independent-cascade influence of a seed set
    Influence(InfluenceArgs),
    /// Integrality gap of the fractional allocation relaxation
    Gap(GapArgs),
    /// Generate a dataset of random games as JSON files
    Generate(GenerateArgs),
    /// Run the stability / census / revenue studies and emit CSVs
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Feasible,
    MinPay,
    MaxPay,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstructionArg {
    /// search every optimal partition with the stability LP
    Auto,
    /// proportional construction for two weighted firms
    TwoFirm,
    /// proportional construction on an almost-balanced partition
    Balanced,
    /// uniform payment for unit-weight workers
    Homogeneous,
    /// max-cut construction for a symmetric two-firm synergy game
    Synergy,
}

#[derive(Args)]
struct SolveArgs {
    /// game JSON file
    game: PathBuf,
    #[arg(long, value_enum, default_value = "feasible")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "auto")]
    construction: ConstructionArg,
    /// constrain payments to a common per-unit-of-weight rate
    #[arg(long)]
    proportional: bool,
    /// write the outcome JSON here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// write the stability LP listing of the first optimal partition here
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// lift the desk-scale enumeration guards
    #[arg(long)]
    unsafe_limits: bool,
}

#[derive(Args)]
struct VerifyArgs {
    game: PathBuf,
    outcome: PathBuf,
    #[arg(long)]
    unsafe_limits: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    /// influence network to synergy matrix (2-sparse networks)
    Net2syn,
    /// integer synergy matrix to a deterministic network
    Syn2net,
    /// joint-influence decomposition with a representability verdict
    Moebius,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    direction: DirectionArg,
    input: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    unsafe_limits: bool,
}

#[derive(Args)]
struct InfluenceArgs {
    /// network JSON file
    network: PathBuf,
    /// comma-separated worker indices forming the seed set
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<usize>,
    #[arg(long, default_value = "exact")]
    mode: String,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    unsafe_limits: bool,
}

#[derive(Args)]
struct GapArgs {
    game: PathBuf,
    #[arg(long)]
    unsafe_limits: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// generator spec JSON file
    #[arg(long)]
    spec: PathBuf,
    /// output directory for the game files
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// worker threads (default: rayon's choice)
    #[arg(long)]
    threads: Option<usize>,
    /// additionally search all optimal partitions for the census
    #[arg(long)]
    strict_census: bool,
}

// === outcome / report documents ===

#[derive(Serialize, Deserialize)]
struct OutcomeFile {
    assignment: Vec<u8>,
    payments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profits: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_pay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verdicts: Option<serde_json::Value>,
}

fn outcome_document(
    game: &CompetitionGame,
    outcome: &Outcome,
    report: &OutcomeReport,
    total: &Rat,
) -> Result<serde_json::Value, Error> {
    let profits = outcome.firm_profits(game)?;
    let doc = OutcomeFile {
        assignment: outcome.partition.assignment.clone(),
        payments: outcome.payments.iter().map(format_rat).collect(),
        profits: Some(profits.iter().map(format_rat).collect()),
        gap: Some(format_rat(&report.gap)),
        total_pay: Some(format_rat(total)),
        verdicts: Some(serde_json::to_value(report)?),
    };
    Ok(serde_json::to_value(&doc)?)
}

#[derive(Serialize)]
struct RefutationDoc {
    assignment: Vec<u8>,
    certificate: Vec<CertRow>,
}

#[derive(Serialize)]
struct CertRow {
    firm: usize,
    dismissed: Vec<usize>,
    recruited: Vec<usize>,
}

fn certificate_doc(tags: &[DeviationTag]) -> Vec<CertRow> {
    tags.iter()
        .filter(|t| t.firm != usize::MAX)
        .map(|t| CertRow {
            firm: t.firm,
            dismissed: t.dismissed.clone(),
            recruited: t.recruited.clone(),
        })
        .collect()
}

/// standalone valuation document for the joint-influence decomposition
#[derive(Deserialize)]
struct ValuationFile {
    weights: Vec<u32>,
    firm: serde_json::Value,
}

fn emit(output: &Option<PathBuf>, doc: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(doc)?;
    match output {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn limits_for(unsafe_limits: bool) -> Limits {
    if unsafe_limits {
        Limits::unlimited()
    } else {
        Limits::default()
    }
}

fn read_game(path: &Path, limits: &Limits) -> Result<CompetitionGame, Error> {
    game_from_json(&fs::read_to_string(path)?, limits)
}

fn run_solve(args: &SolveArgs) -> Result<u8, Error> {
    let limits = limits_for(args.unsafe_limits);
    let game = read_game(&args.game, &limits)?;
    let objective = match args.objective {
        ObjectiveArg::Feasible => StabilityObjective::Feasibility,
        ObjectiveArg::MinPay => StabilityObjective::MinimizeTotalPay,
        ObjectiveArg::MaxPay => StabilityObjective::MaximizeTotalPay,
    };

    if let Some(path) = &args.dump_lp {
        let parts = market_eq::partition::enumerate_optimal_partitions(&game, &limits)?;
        let lp = build_stability_lp(&game, &parts[0], true, objective, args.proportional, &limits)?;
        fs::write(path, lp.listing())?;
    }

    let found: Option<Outcome> = match args.construction {
        ConstructionArg::Auto => {
            match find_pspe_with(&game, objective, args.proportional, &limits)? {
                PspeSearch::Found { outcome, .. } => Some(outcome),
                PspeSearch::Nonexistent { refutations } => {
                    let doc = serde_json::json!({
                        "verdict": "nonexistence",
                        "partitions_tried": refutations.len(),
                        "refutations": refutations
                            .iter()
                            .map(|(p, cert)| RefutationDoc {
                                assignment: p.assignment.clone(),
                                certificate: certificate_doc(cert),
                            })
                            .collect::<Vec<_>>(),
                    });
                    emit(&args.output, &doc)?;
                    return Ok(EXIT_NEGATIVE);
                }
            }
        }
        ConstructionArg::TwoFirm => {
            let (outcome, construction) = two_firm_weighted_pspe(&game, &limits)?;
            let report = check_outcome(&game, &outcome, &limits)?;
            let total: Rat = outcome.payments.iter().sum();
            let mut doc = outcome_document(&game, &outcome, &report, &total)?;
            doc["construction"] = serde_json::to_value(&construction)?;
            emit(&args.output, &doc)?;
            return Ok(0);
        }
        ConstructionArg::Balanced => match balanced_pspe(&game, &limits)? {
            BalancedPspe::Found { outcome, .. } => Some(outcome),
            BalancedPspe::NotApplicable => {
                let doc = serde_json::json!({
                    "verdict": "not-applicable",
                    "reason": "no almost-balanced partition is realizable",
                });
                emit(&args.output, &doc)?;
                return Ok(EXIT_NEGATIVE);
            }
        },
        ConstructionArg::Homogeneous => match homogeneous_min_delta(&game, &limits)? {
            Some((outcome, _)) => Some(outcome),
            None => {
                let doc = serde_json::json!({
                    "verdict": "nonexistence",
                    "reason": "no uniform payment stabilizes any optimal size profile",
                });
                emit(&args.output, &doc)?;
                return Ok(EXIT_NEGATIVE);
            }
        },
        ConstructionArg::Synergy => {
            if game.k() != 2 || !game.is_symmetric() {
                return Err(Error::precondition(
                    "cut construction needs a symmetric two-firm synergy game",
                ));
            }
            let m = match &game.valuations[0] {
                Valuation::Synergy(m) => m.clone(),
                _ => {
                    return Err(Error::precondition("cut construction needs synergy valuations"))
                }
            };
            let (outcome, _) = synergy_two_firm_pspe(&m, &limits)?;
            Some(outcome)
        }
    };

    let outcome = found.expect("all negative paths returned above");
    let report = check_outcome(&game, &outcome, &limits)?;
    let total: Rat = outcome.payments.iter().sum();
    let doc = outcome_document(&game, &outcome, &report, &total)?;
    emit(&args.output, &doc)?;
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let limits = limits_for(args.unsafe_limits);
    let game = read_game(&args.game, &limits)?;
    let file: OutcomeFile = serde_json::from_str(&fs::read_to_string(&args.outcome)?)?;
    if file.assignment.len() != game.n() || file.payments.len() != game.n() {
        return Err(Error::parse("outcome dimensions do not match the game"));
    }
    let outcome = Outcome {
        partition: Partition::new(file.assignment, game.k())?,
        payments: file.payments.iter().map(|s| parse_rat(s)).collect::<Result<_, _>>()?,
    };
    let report = check_outcome(&game, &outcome, &limits)?;
    let total: Rat = outcome.payments.iter().sum();
    let doc = outcome_document(&game, &outcome, &report, &total)?;
    emit(&None, &doc)?;
    Ok(if report.all_pass() { 0 } else { EXIT_VERIFY })
}

fn run_convert(args: &ConvertArgs) -> Result<u8, Error> {
    let limits = limits_for(args.unsafe_limits);
    let text = fs::read_to_string(&args.input)?;
    match args.direction {
        DirectionArg::Net2syn => {
            let file: NetworkFile = serde_json::from_str(&text)?;
            let h = InfluenceNetwork::from_file(&file)?;
            let t = h.sparsity();
            if t > 2 {
                let doc = serde_json::json!({
                    "verdict": "not-2-sparse",
                    "sparsity": t,
                });
                emit(&args.output, &doc)?;
                return Ok(EXIT_NEGATIVE);
            }
            let m = network_to_synergy(&h, &limits)?;
            emit(&args.output, &serde_json::to_value(m.to_file())?)?;
            Ok(0)
        }
        DirectionArg::Syn2net => {
            let file: SynergyMatrixFile = serde_json::from_str(&text)?;
            let m = SynergyMatrix::from_file(&file)?;
            let h = synergy_to_network(&m)?;
            emit(&args.output, &serde_json::to_value(h.to_file())?)?;
            Ok(0)
        }
        DirectionArg::Moebius => {
            let file: ValuationFile = serde_json::from_str(&text)?;
            let game_doc = serde_json::json!({
                "weights": file.weights,
                "firms": [file.firm, file.firm],
            });
            let game = game_from_json(&game_doc.to_string(), &limits)?;
            let table =
                moebius_decomposition(&game.valuations[0], game.n(), &game.weights, &limits)?;
            let masses: serde_json::Map<String, serde_json::Value> = (1u32..(1 << table.n))
                .map(|t| {
                    let key =
                        mask_members(t).map(|j| j.to_string()).collect::<Vec<_>>().join(",");
                    (key, serde_json::Value::String(format_rat(&table.f[t as usize])))
                })
                .collect();
            let doc = serde_json::json!({
                "n": table.n,
                "representable": table.representable,
                "negative_witness": table
                    .negative_witness
                    .map(|w| mask_members(w).collect::<Vec<_>>()),
                "joint_influence_mass": masses,
            });
            emit(&args.output, &doc)?;
            Ok(if table.representable { 0 } else { EXIT_NEGATIVE })
        }
    }
}

fn run_influence(args: &InfluenceArgs) -> Result<u8, Error> {
    let limits = limits_for(args.unsafe_limits);
    let file: NetworkFile = serde_json::from_str(&fs::read_to_string(&args.network)?)?;
    let h = InfluenceNetwork::from_file(&file)?;
    for &s in &args.seeds {
        if s >= h.workers.len() {
            return Err(Error::precondition(format!("seed worker {s} out of range")));
        }
    }
    let mode = match args.mode.as_str() {
        "exact" => InfluenceMode::Exact,
        "monte-carlo" | "mc" => {
            InfluenceMode::MonteCarlo { samples: args.samples, seed: args.seed }
        }
        other => return Err(Error::parse(format!("unknown mode `{other}`"))),
    };
    let doc = match mode {
        InfluenceMode::Exact => {
            let v = h.influence_exact(&args.seeds, &limits)?;
            serde_json::json!({
                "mode": "exact",
                "influence": format_rat(&v),
                "influence_decimal": to_f64(&v),
            })
        }
        InfluenceMode::MonteCarlo { samples, seed } => {
            let (est, se) = h.influence_monte_carlo(&args.seeds, samples, seed)?;
            serde_json::json!({
                "mode": "monte-carlo",
                "samples": samples,
                "seed": seed,
                "estimate": format_rat(&est),
                "estimate_decimal": to_f64(&est),
                "standard_error": se,
            })
        }
    };
    emit(&None, &doc)?;
    Ok(0)
}

fn run_gap(args: &GapArgs) -> Result<u8, Error> {
    let limits = limits_for(args.unsafe_limits);
    let game = read_game(&args.game, &limits)?;
    let gap = configuration_lp(&game, &limits)?;
    emit(&None, &serde_json::to_value(&gap)?)?;
    Ok(0)
}

fn master_seed_default() -> u64 {
    std::env::var("MARKET_EQ_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

fn read_spec(path: &Path) -> Result<GeneratorSpec, Error> {
    let mut spec: GeneratorSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
    if spec.master_seed.is_none() {
        spec.master_seed = Some(master_seed_default());
    }
    spec.validate()?;
    Ok(spec)
}

fn run_generate(args: &GenerateArgs) -> Result<u8, Error> {
    let spec = read_spec(&args.spec)?;
    fs::create_dir_all(&args.out)?;
    let instances = generate_dataset(&spec)?;
    let mut manifest = Vec::new();
    for inst in &instances {
        let name = format!("instance_{:05}.json", inst.id);
        fs::write(args.out.join(&name), game_to_json(&inst.game)?)?;
        manifest.push(serde_json::json!({
            "id": inst.id,
            "file": name,
            "alpha": inst.alpha.as_ref().map(format_rat),
        }));
    }
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "spec": &spec,
            "instances": manifest,
        }))?,
    )?;
    println!("wrote {} instances to {}", instances.len(), args.out.display());
    Ok(0)
}

fn run_experiment(args: &ExperimentArgs) -> Result<u8, Error> {
    let spec = read_spec(&args.spec)?;
    let limits = Limits::default();
    fs::create_dir_all(&args.out)?;
    let instances = generate_dataset(&spec)?;

    let study = stability_study(&instances, &limits, args.threads);
    fs::write(args.out.join("stability.csv"), stability_csv(&study.records))?;
    fs::write(args.out.join("survival.csv"), survival_csv(&study.records))?;

    let census = existence_census(&instances, args.strict_census, &limits, args.threads);
    let revenue = revenue_study(&instances, &limits, args.threads);
    fs::write(args.out.join("revenue.csv"), revenue_csv(&revenue.records))?;

    let summary = serde_json::json!({
        "spec": &spec,
        "stability": &study.summary,
        "census": &census,
        "revenue_skipped": revenue.skipped,
    });
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "instances {}  balanced {:.1}%  h=0 {:.1}%  h<=5% {:.1}%  census infeasible {}",
        study.summary.instances,
        study.summary.balanced_fraction * 100.0,
        study.summary.h_zero_fraction * 100.0,
        study.summary.h_le_5pct_fraction * 100.0,
        census.infeasible_on_chosen_partition,
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Verify(a) => run_verify(a),
        Command::Convert(a) => run_convert(a),
        Command::Influence(a) => run_influence(a),
        Command::Gap(a) => run_gap(a),
        Command::Generate(a) => run_generate(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
