//! Command-line front end: validate networks, report signs and
//! eligibility, run exact queries, stream anytime bound traces, prune
//! decisions, and generate seeded test networks.
//!
//! Exit codes: 0 success, 1 validation failure, 2 inference failure
//! (impossible evidence), 3 decision precondition failure, 64 usage.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qbounds::network::{network_to_json, parse_network_unchecked};
use qbounds::{
    admissible_decisions, check_theorem1, check_theorem2, detect_generalized_sign, detect_sign,
    expected_value_interval, generate_network, interval_probability, is_supermodular, posterior,
    run_issa_with, supermodularity_witness, AbstractionPlan, BayesianNetwork, Cdf,
    EligibilityOutcome, Error, Evidence, GeneralizedSignResult, GeneratorConfig, IssaEvent,
    IssaOptions, SplitStrategy, UtilityTable, VarId,
};

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_INFERENCE: i32 = 2;
const EXIT_DECISION: i32 = 3;
const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "qbounds",
    version,
    about = "Anytime lower/upper bounds on conditional CDFs in discrete Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against every structural and numeric invariant.
    Validate(ValidateArgs),
    /// Report per-arc qualitative signs and per-node abstraction eligibility.
    Signs(SignsArgs),
    /// Exact conditional distribution of a query variable.
    Query(QueryArgs),
    /// Stream anytime lower/upper CDF bounds for a query.
    Bound(BoundArgs),
    /// Prune decision alternatives from tightening expected-value intervals.
    Decide(DecideArgs),
    /// Emit a seeded random network to stdout.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    WidestMidpoint,
    FirstSplittable,
}

impl From<Strategy> for SplitStrategy {
    fn from(s: Strategy) -> SplitStrategy {
        match s {
            Strategy::WidestMidpoint => SplitStrategy::WidestMidpoint,
            Strategy::FirstSplittable => SplitStrategy::FirstSplittable,
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SignsArgs {
    #[arg(long)]
    network: PathBuf,
    /// Query variable; enables per-node eligibility reporting.
    #[arg(long)]
    query: Option<String>,
    /// Evidence as comma-separated NAME=STATE pairs (state by label).
    #[arg(long)]
    evidence: Option<String>,
    #[arg(long)]
    strict_t2: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    evidence: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    evidence: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: Option<u64>,
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Early-stop gap between the bounds.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "widest-midpoint")]
    strategy: Strategy,
    /// Abstraction plan file overriding automatic node selection.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Numeric value per query state (JSON array, nondecreasing) for the
    /// expected-value interval in the summary.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long)]
    strict_t2: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct DecideArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    evidence: Option<String>,
    /// Utility table JSON: decisions, outcomes, values (row-major by decision).
    #[arg(long)]
    utility: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: Option<u64>,
    #[arg(long)]
    deadline_ms: Option<u64>,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "widest-midpoint")]
    strategy: Strategy,
    #[arg(long)]
    strict_t2: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    max_states: usize,
    #[arg(long, default_value_t = 2)]
    max_parents: usize,
    /// Fraction of arcs forced to carry a decisive sign.
    #[arg(long, default_value_t = 0.8)]
    monotone_fraction: f64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    };
    std::process::exit(code);
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::ZeroProbabilityEvidence
            | Error::QueryAssigned(_)
            | Error::JointTooLarge { .. } => EXIT_INFERENCE,
            Error::NotSupermodular { .. } | Error::DecreasingValues => EXIT_DECISION,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Signs(args) => cmd_signs(args),
        Command::Query(args) => cmd_query(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Decide(args) => cmd_decide(args),
        Command::Generate(args) => cmd_generate(args),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|err| Failure {
        code: EXIT_VALIDATION,
        message: format!("cannot read {}: {err}", path.display()),
    })
}

fn load_network(path: &Path) -> Result<BayesianNetwork, Failure> {
    let text = read_file(path)?;
    let net = parse_network_unchecked(&text)?;
    let report = net.validate();
    if !report.is_clean() {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("{} failed validation:\n{report}", path.display()),
        });
    }
    Ok(net)
}

/// Parses `A=a2,E=true` style evidence by state label.
fn parse_evidence(net: &BayesianNetwork, spec: &Option<String>) -> Result<Evidence, Failure> {
    let Some(spec) = spec else {
        return Ok(Evidence::new());
    };
    let mut pairs = Vec::new();
    for item in spec.split(',').filter(|s| !s.is_empty()) {
        let Some((var, state)) = item.split_once('=') else {
            return Err(Failure::usage(format!(
                "evidence `{item}` is not NAME=STATE"
            )));
        };
        pairs.push((var.trim(), state.trim()));
    }
    Ok(net.evidence_from_labels(pairs)?)
}

fn query_id(net: &BayesianNetwork, name: &str) -> Result<VarId, Failure> {
    net.var_id(name)
        .ok_or_else(|| Error::UnknownVariable(name.to_string()).into())
}

fn check_tolerance(tolerance: f64) -> Result<(), Failure> {
    if tolerance > 0.0 && tolerance.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage("--tolerance must be positive"))
    }
}

fn print_line(line: &str) {
    // One write per line keeps killed runs from leaving partial lines.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.write_all(b"\n");
    let _ = out.flush();
}

fn cmd_validate(args: ValidateArgs) -> Result<i32, Failure> {
    let text = read_file(&args.network)?;
    let violations: Vec<String> = match parse_network_unchecked(&text) {
        Ok(net) => net
            .validate()
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect(),
        // Structural defects (bad references, malformed tables) land in
        // the same report as semantic ones.
        Err(err) => vec![err.to_string()],
    };
    let ok = violations.is_empty();
    match args.format {
        Format::Json => {
            print_line(&serde_json::json!({ "ok": ok, "violations": violations }).to_string())
        }
        Format::Csv => {
            print_line("violation");
            for v in &violations {
                print_line(&format!("{v:?}"));
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_VALIDATION })
}

fn sign_str(sign: qbounds::Sign) -> String {
    sign.to_string()
}

fn cmd_signs(args: SignsArgs) -> Result<i32, Failure> {
    let net = load_network(&args.network)?;
    let e = parse_evidence(&net, &args.evidence)?;

    let arcs: Vec<serde_json::Value> = net
        .arcs()
        .iter()
        .map(|arc| {
            let detected = detect_sign(net.cpt(arc.to), arc.from)
                .map(sign_str)
                .unwrap_or_else(|_| "?".into());
            let n = match detect_generalized_sign(net.cpt(arc.to), arc.from) {
                Ok(GeneralizedSignResult::Decisive(g)) => Some(g.n),
                Ok(GeneralizedSignResult::Zero) => Some(1),
                _ => None,
            };
            serde_json::json!({
                "from": net.var(arc.from).name,
                "to": net.var(arc.to).name,
                "declared": arc.sign.map(sign_str),
                "sign": detected,
                "n": n,
            })
        })
        .collect();

    let mut doc = serde_json::json!({ "arcs": arcs });
    if let Some(query) = &args.query {
        let z = query_id(&net, query)?;
        if e.contains(z) {
            return Err(Error::QueryAssigned(query.clone()).into());
        }
        let mut nodes = Vec::new();
        for a in net.var_ids() {
            if a == z || e.contains(a) {
                continue;
            }
            let outcome = if net.children(a).contains(&z) {
                check_theorem2(&net, a, z, &e, args.strict_t2)?
            } else {
                check_theorem1(&net, a, z, &e)?
            };
            nodes.push(match outcome {
                EligibilityOutcome::Eligible(elig) => serde_json::json!({
                    "node": net.var(a).name,
                    "eligible": true,
                    "theorem": format!("{:?}", elig.theorem),
                    "children": elig.children.iter().map(|r| serde_json::json!({
                        "child": net.var(r.child).name,
                        "sign": sign_str(r.sign),
                        "method": serde_json::to_value(r.method).unwrap(),
                        "n": r.generalized.map(|g| g.n),
                    })).collect::<Vec<_>>(),
                    "query_is_child": elig.z_in_children,
                }),
                EligibilityOutcome::Rejected(r) => serde_json::json!({
                    "node": r.node,
                    "eligible": false,
                    "rejection": { "condition": r.condition, "detail": r.detail },
                }),
            });
        }
        doc["nodes"] = serde_json::Value::Array(nodes);
    }

    match args.format {
        Format::Json => print_line(&doc.to_string()),
        Format::Csv => {
            print_line("from,to,declared,sign,n");
            for arc in doc["arcs"].as_array().unwrap() {
                print_line(&format!(
                    "{},{},{},{},{}",
                    arc["from"].as_str().unwrap(),
                    arc["to"].as_str().unwrap(),
                    arc["declared"].as_str().unwrap_or(""),
                    arc["sign"].as_str().unwrap(),
                    arc["n"].as_u64().map(|n| n.to_string()).unwrap_or_default(),
                ));
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_query(args: QueryArgs) -> Result<i32, Failure> {
    let net = load_network(&args.network)?;
    let e = parse_evidence(&net, &args.evidence)?;
    let z = query_id(&net, &args.query)?;
    let pmf = posterior(&net, z, &e)?;
    let cdf = qbounds::cdf_from_pmf(&pmf);
    match args.format {
        Format::Json => print_line(
            &serde_json::json!({
                "query": args.query,
                "states": net.var(z).states,
                "pmf": pmf.values(),
                "cdf": cdf.values(),
            })
            .to_string(),
        ),
        Format::Csv => {
            print_line("state,label,probability,cdf");
            for (i, label) in net.var(z).states.iter().enumerate() {
                print_line(&format!(
                    "{i},{label},{},{}",
                    pmf.values()[i],
                    cdf.values()[i]
                ));
            }
        }
    }
    Ok(EXIT_OK)
}

fn load_values(path: &Path, expected_len: usize) -> Result<Vec<f64>, Failure> {
    let text = read_file(path)?;
    let values: Vec<f64> = serde_json::from_str(&text).map_err(Error::from)?;
    if values.len() != expected_len {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!(
                "value map has {} entries, query has {expected_len} states",
                values.len()
            ),
        });
    }
    Ok(values)
}

fn issa_options(
    max_iterations: Option<u64>,
    deadline_ms: Option<u64>,
    tolerance: f64,
    strategy: Strategy,
    plan: Option<AbstractionPlan>,
    strict_t2: bool,
) -> IssaOptions {
    IssaOptions {
        max_iterations: max_iterations.map(|n| n as usize),
        deadline: deadline_ms.map(Duration::from_millis),
        plan,
        strategy: strategy.into(),
        early_stop_gap: Some(tolerance),
        strict_t2,
    }
}

fn summarize_intervals(lower: &Cdf, upper: &Cdf) -> Vec<serde_json::Value> {
    // Single-state events: Pr(X = x_i) as the interval (x_{i-1}, x_i].
    (0..lower.len())
        .map(|i| {
            let from = i.checked_sub(1);
            let p =
                interval_probability(lower, upper, from, i).expect("trace bounds always bracket");
            serde_json::json!({ "state": i, "lower": p.lower, "upper": p.upper })
        })
        .collect()
}

fn cmd_bound(args: BoundArgs) -> Result<i32, Failure> {
    check_tolerance(args.tolerance)?;
    let net = load_network(&args.network)?;
    let e = parse_evidence(&net, &args.evidence)?;
    let z = query_id(&net, &args.query)?;
    let values = match &args.values {
        Some(path) => Some(load_values(path, net.state_count(z))?),
        None => None,
    };
    let plan = match &args.plan {
        Some(path) => Some(AbstractionPlan::from_json(&net, &read_file(path)?)?),
        None => None,
    };
    let options = issa_options(
        args.max_iterations,
        args.deadline_ms,
        args.tolerance,
        args.strategy,
        plan,
        args.strict_t2,
    );

    let csv = args.format == Format::Csv;
    if csv {
        print_line("iteration,bound,state_index,cdf_value,wall_ms");
    }
    let trace = run_issa_with(&net, z, &e, &options, |event| match (&event, csv) {
        (IssaEvent::Selected(head), false) => {
            print_line(&serde_json::to_string(head).unwrap());
        }
        (IssaEvent::Selected(head), true) => {
            if head.abstracted.is_empty() {
                print_line("# exact-fallback: no eligible abstraction nodes");
            }
        }
        (IssaEvent::Iteration(record), false) => {
            print_line(&serde_json::to_string(record).unwrap());
        }
        (IssaEvent::Iteration(record), true) => {
            for (name, cdf) in [("lower", &record.lower), ("upper", &record.upper)] {
                for (i, v) in cdf.values().iter().enumerate() {
                    print_line(&format!(
                        "{},{name},{i},{v},{}",
                        record.index, record.wall_ms
                    ));
                }
            }
        }
    })?;

    let (lower, upper) = trace
        .last_bounds()
        .expect("at least one iteration always runs");
    let mut summary = serde_json::json!({
        "converged": trace.converged,
        "exact_fallback": trace.exact_fallback(),
        "interval_probabilities": summarize_intervals(lower, upper),
    });
    if let Some(values) = values {
        let (lo, hi) = expected_value_interval(lower, upper, &values)?;
        summary["expected_value"] = serde_json::json!([lo, hi]);
    }
    if csv {
        print_line(&format!("# summary: {summary}"));
    } else {
        print_line(&summary.to_string());
    }
    Ok(EXIT_OK)
}

fn cmd_decide(args: DecideArgs) -> Result<i32, Failure> {
    check_tolerance(args.tolerance)?;
    let net = load_network(&args.network)?;
    let e = parse_evidence(&net, &args.evidence)?;
    let z = query_id(&net, &args.query)?;
    let utility: UtilityTable =
        serde_json::from_str(&read_file(&args.utility)?).map_err(Error::from)?;
    if !is_supermodular(&utility) {
        let (d1, d2, x1, x2) = supermodularity_witness(&utility).unwrap();
        eprintln!(
            "utility is not supermodular: u(d{d1},x{x2}) + u(d{d2},x{x1}) > u(d{d1},x{x1}) + u(d{d2},x{x2})"
        );
        return Ok(EXIT_DECISION);
    }
    if utility.outcomes().len() != net.state_count(z) {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!(
                "utility has {} outcomes, query `{}` has {} states",
                utility.outcomes().len(),
                args.query,
                net.state_count(z)
            ),
        });
    }

    let options = issa_options(
        args.max_iterations,
        args.deadline_ms,
        args.tolerance,
        args.strategy,
        None,
        args.strict_t2,
    );
    let csv = args.format == Format::Csv;
    if csv {
        print_line("iteration,ev_low,ev_high,decision_lo,decision_hi");
    }
    let mut failure: Option<Error> = None;
    let trace = run_issa_with(&net, z, &e, &options, |event| {
        if failure.is_some() {
            return;
        }
        if let IssaEvent::Iteration(record) = event {
            let step = expected_value_interval(&record.lower, &record.upper, utility.outcomes())
                .and_then(|interval| {
                    admissible_decisions(&utility, interval).map(|set| (interval, set))
                });
            match step {
                Ok(((lo, hi), set)) => {
                    if csv {
                        print_line(&format!("{},{lo},{hi},{},{}", record.index, set.lo, set.hi));
                    } else {
                        let decisions: Vec<f64> = utility.decisions()[set.lo..=set.hi].to_vec();
                        print_line(
                            &serde_json::json!({
                                "iteration": record.index,
                                "expected_value": [lo, hi],
                                "admissible": { "lo": set.lo, "hi": set.hi, "decisions": decisions },
                            })
                            .to_string(),
                        );
                    }
                }
                Err(err) => failure = Some(err),
            }
        }
    })?;
    if let Some(err) = failure {
        return Err(err.into());
    }
    if !csv {
        print_line(&serde_json::json!({ "converged": trace.converged }).to_string());
    }
    Ok(EXIT_OK)
}

fn cmd_generate(args: GenerateArgs) -> Result<i32, Failure> {
    if !(0.0..=1.0).contains(&args.monotone_fraction) {
        return Err(Failure::usage("--monotone-fraction must lie in [0, 1]"));
    }
    if args.nodes == 0 || args.max_states < 2 {
        return Err(Failure::usage("--nodes must be >= 1 and --max-states >= 2"));
    }
    let cfg = GeneratorConfig {
        nodes: args.nodes,
        max_states: args.max_states,
        max_parents: args.max_parents,
        monotone_fraction: args.monotone_fraction,
    };
    let net = generate_network(args.seed, &cfg)?;
    print_line(&network_to_json(&net));
    Ok(EXIT_OK)
}
