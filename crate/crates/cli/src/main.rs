//! Command-line interface: rational identity testing, evaluation, invariant
//! generator extraction, freeness checking, and the bundled example
//! scenarios.
//!
//! Exit codes: 0 for a passing verdict (probably zero, all relations vanish,
//! scenario checks pass), 1 for a negative verdict (certified nonzero,
//! relations present, failed checks), 2 for any error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use skewfield::linrep::{is_zero_in, rep_dim_estimate, RitVerdict, RunConfig};
use skewfield::scenarios::{run_scenario, ScenarioParams, SCENARIO_NAMES};
use skewfield::{
    algorithm_general, algorithm_linear, block_relations, evaluate, freeness_check,
    fundamental_relations, parse_expr, relations_hold_on_generators, ActionSpec, Error, Expr,
    FieldSpec, FreenessVerdict, MatrixTuple, Presentation, Result, RitCtx,
};

#[derive(Parser)]
#[command(name = "skewfield", version, about = "Noncommutative rational functions: identity testing and invariant skew subfields")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Root seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Random tuples tried per zero test.
    #[arg(long, global = true, default_value_t = 8)]
    trials: u32,

    /// Upper bound on matrix sizes used in evaluations.
    #[arg(long, global = true, default_value_t = 64)]
    size_cap: usize,

    /// Word-length cap for basis enumeration (default: group order + 2).
    #[arg(long, global = true)]
    max_degree: Option<usize>,

    /// Ground field: Q, F(p), or F(p,k).
    #[arg(long, global = true)]
    field: Option<String>,

    /// Emit the report as JSON, to stdout or to the given file.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "-")]
    json: Option<String>,

    /// Worker thread budget; results are independent of its value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test whether an expression is zero in the free skew field.
    Rit {
        /// Expression text, e.g. "x1*x2 - x2*x1".
        #[arg(long, conflicts_with = "file")]
        expr: Option<String>,
        /// File containing the expression text.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Number of variables (default: inferred from the expression).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Evaluate an expression at a matrix tuple read from a JSON file.
    Eval {
        #[arg(long)]
        expr: String,
        /// JSON file with {"mats": [[[entries]]], ...} as emitted in witnesses.
        #[arg(long)]
        at: PathBuf,
    },
    /// Extract generators of the invariant skew subfield of a group action.
    Invariants {
        /// JSON action file: field, m, group table, images per element.
        action_file: PathBuf,
        /// Algorithm choice; auto picks the linear variant when applicable.
        #[arg(long, value_enum, default_value_t = Algo::Auto)]
        algorithm: Algo,
    },
    /// Test whether a presentation's generators are free.
    Freeness {
        /// JSON presentation file, as emitted by `invariants`.
        presentation_file: PathBuf,
    },
    /// Run a bundled example scenario; with no name, list the scenarios.
    Examples {
        name: Option<String>,
        /// Monic cubic for the de Jonquieres scenario, e.g. "x^3 - x".
        #[arg(long)]
        f: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Auto,
    General,
    Linear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    if cli.threads == 0 {
        return Err(Error::ParamError("--threads must be at least 1".into()));
    }
    let cfg = RunConfig {
        seed: cli.seed,
        trials: cli.trials,
        size_cap: cli.size_cap,
        max_degree: cli.max_degree,
    };
    let field = match &cli.field {
        Some(text) => Some(FieldSpec::parse(text)?),
        None => None,
    };
    match &cli.cmd {
        Cmd::Rit { expr, file, m } => cmd_rit(cli, &cfg, &field, expr.as_deref(), file, *m),
        Cmd::Eval { expr, at } => cmd_eval(cli, &field, expr, at),
        Cmd::Invariants {
            action_file,
            algorithm,
        } => cmd_invariants(cli, &cfg, action_file, *algorithm),
        Cmd::Freeness { presentation_file } => cmd_freeness(cli, &cfg, presentation_file),
        Cmd::Examples { name, f } => cmd_examples(cli, &cfg, &field, name.as_deref(), f),
    }
}

fn emit(cli: &Cli, report: &serde_json::Value, human: &str) -> Result<()> {
    match &cli.json {
        None => println!("{human}"),
        Some(target) if target == "-" => {
            println!("{}", serde_json::to_string_pretty(report).unwrap())
        }
        Some(path) => {
            std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(report).unwrap()))
                .map_err(|e| Error::ParamError(format!("cannot write {path}: {e}")))?;
            println!("{human}");
        }
    }
    Ok(())
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParamError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::ParamError(format!("{} is not valid JSON: {e}", path.display())))
}

fn witness_json(w: &skewfield::NonzeroWitness) -> serde_json::Value {
    json!({ "tuple": w.tuple.to_json(), "prime": w.prime })
}

fn parse_in(text: &str, field: &Option<FieldSpec>) -> Result<Expr> {
    let spec = field.clone().unwrap_or_else(FieldSpec::rationals);
    parse_expr(text, &spec)
}

fn cmd_rit(
    cli: &Cli,
    cfg: &RunConfig,
    field: &Option<FieldSpec>,
    expr: Option<&str>,
    file: &Option<PathBuf>,
    m: Option<usize>,
) -> Result<u8> {
    let text = match (expr, file) {
        (Some(t), _) => t.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Error::ParamError(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => {
            return Err(Error::ParamError("rit needs --expr or --file".into()));
        }
    };
    let spec = field.clone().unwrap_or_else(FieldSpec::rationals);
    let e = parse_expr(text.trim(), &spec)?;
    if let Some(m) = m {
        if e.num_vars() > m {
            return Err(Error::ParamError(format!(
                "expression uses {} variables but --m is {m}",
                e.num_vars()
            )));
        }
    }
    let verdict = is_zero_in(&e, &spec, cfg, 0)?;
    let size = rep_dim_estimate(&e);
    let (label, witness, code) = match &verdict {
        RitVerdict::ProbablyZero => ("probably_zero", None, 0),
        RitVerdict::Nonzero(w) => ("nonzero", Some(witness_json(w)), 1),
    };
    let report = json!({
        "verdict": label,
        "witness": witness,
        "trials": cfg.trials,
        "size": size,
    });
    emit(cli, &report, &format!("verdict: {label} (size {size})"))?;
    Ok(code)
}

fn cmd_eval(cli: &Cli, field: &Option<FieldSpec>, expr: &str, at: &PathBuf) -> Result<u8> {
    let e = parse_in(expr, field)?;
    let spec = field.clone().unwrap_or_else(FieldSpec::rationals);
    let tuple = MatrixTuple::from_json(&spec, &read_json(at)?)?;
    let value = evaluate(&e, &tuple)?;
    let grid: Vec<Vec<String>> = (0..value.rows())
        .map(|i| (0..value.cols()).map(|j| value.at(i, j).to_string()).collect())
        .collect();
    let report = json!({ "rows": value.rows(), "cols": value.cols(), "entries": grid });
    let human = grid
        .iter()
        .map(|row| row.join("\t"))
        .collect::<Vec<_>>()
        .join("\n");
    emit(cli, &report, &human)?;
    Ok(0)
}

fn cmd_invariants(cli: &Cli, cfg: &RunConfig, action_file: &PathBuf, algo: Algo) -> Result<u8> {
    let action = ActionSpec::from_json(&read_json(action_file)?)?;
    let order = action.group.order() as u64;
    let linear_ok = action.linear_part().is_some()
        && (action.spec.characteristic() == 0 || order % action.spec.characteristic() != 0);
    let pres = match algo {
        Algo::General => algorithm_general(&action, cfg)?,
        Algo::Linear => algorithm_linear(&action, cfg)?,
        Algo::Auto => {
            if linear_ok {
                algorithm_linear(&action, cfg)?
            } else {
                algorithm_general(&action, cfg)?
            }
        }
    };
    let d = pres.dim();
    let t = pres.z.len();
    let bound = d * d * (pres.m - 1) + d;
    let report = json!({
        "action": action.to_json(),
        "presentation": pres.to_json(),
        "summary": {
            "d": d,
            "z_len": t,
            "d_within_group_order": d <= action.group.order(),
            "z_within_bound": t <= bound,
        },
    });
    let human = format!(
        "basis dimension d = {d}\ngenerators |z| = {t}\nbounds: d <= |G| {}, |z| <= d^2(m-1)+d {}\nz = [{}]",
        d <= action.group.order(),
        t <= bound,
        pres.z.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(", "),
    );
    emit(cli, &report, &human)?;
    Ok(0)
}

fn cmd_freeness(cli: &Cli, cfg: &RunConfig, presentation_file: &PathBuf) -> Result<u8> {
    let v = read_json(presentation_file)?;
    // Accept either a bare presentation or the `invariants` report wrapper.
    let (pres_v, action) = match v.get("presentation") {
        Some(p) => {
            let action = match v.get("action") {
                Some(a) => Some(ActionSpec::from_json(a)?),
                None => None,
            };
            (p.clone(), action)
        }
        None => (v.clone(), None),
    };
    let pres = Presentation::from_json(&pres_v)?;
    let rel = fundamental_relations(&pres, cfg)?;
    let verdict = freeness_check(&rel, cfg)?;
    let hold = relations_hold_on_generators(&rel, &pres, cfg)?;
    let block = match &action {
        Some(a) if pres.dim() == a.group.order() => {
            let blocks = block_relations(a, &pres, &rel, cfg)?;
            let mut ctx = RitCtx::new(&pres.spec, cfg);
            let mut vanish = true;
            for b in &blocks {
                for i in 0..b.rows() {
                    for j in 0..b.cols() {
                        if !ctx.is_probably_zero(b.at(i, j))? {
                            vanish = false;
                        }
                    }
                }
            }
            Some(vanish)
        }
        _ => None,
    };
    let (label, indices, witnesses, code) = match &verdict {
        FreenessVerdict::AllVanish => ("all_vanish", vec![], vec![], 0),
        FreenessVerdict::RelationsPresent { indices, witnesses } => (
            "relations_present",
            indices.clone(),
            witnesses.iter().map(witness_json).collect(),
            1,
        ),
    };
    let report = json!({
        "verdict": label,
        "nonzero_relations": indices,
        "witnesses": witnesses,
        "relations_hold_on_generators": hold,
        "block_form_vanishes": block,
        "relations": rel.to_json(),
    });
    let human = match &verdict {
        FreenessVerdict::AllVanish => "free: all fundamental relations vanish".to_string(),
        FreenessVerdict::RelationsPresent { indices, .. } => format!(
            "not free: {} nonvanishing relation(s) at indices {:?}",
            indices.len(),
            indices
        ),
    };
    emit(cli, &report, &human)?;
    Ok(code)
}

fn cmd_examples(
    cli: &Cli,
    cfg: &RunConfig,
    field: &Option<FieldSpec>,
    name: Option<&str>,
    f: &Option<String>,
) -> Result<u8> {
    let Some(name) = name else {
        let report = json!({ "scenarios": SCENARIO_NAMES });
        emit(cli, &report, &SCENARIO_NAMES.join("\n"))?;
        return Ok(0);
    };
    let params = ScenarioParams {
        field: field.clone(),
        f: f.clone(),
    };
    let rep = run_scenario(name, &params, cfg)?;
    let mut human = String::new();
    for c in &rep.checks {
        human.push_str(&format!(
            "[{}] {} (expected {})\n",
            if c.passed { "pass" } else { "FAIL" },
            c.description,
            c.expected
        ));
    }
    human.push_str(&format!(
        "{}: {}",
        rep.name,
        if rep.passed() { "all checks passed" } else { "some checks FAILED" }
    ));
    emit(cli, &rep.to_json(), &human)?;
    Ok(if rep.passed() { 0 } else { 1 })
}
