use std::path::PathBuf;
use std::process::ExitCode;

use approxsqo::blp::Combination;
use approxsqo::eval::ExtensionStore;
use approxsqo::miner::{mine, to_text, MinerConfig};
use approxsqo::session::{Session, SessionConfig};
use approxsqo::synth::{planted, PlantedConfig};
use approxsqo::text::{self, Document};
use approxsqo::transform::RewriteConfig;
use approxsqo::{Error, Query};
use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Phi {
    Ds,
    Max,
    Min,
}

impl From<Phi> for Combination {
    fn from(p: Phi) -> Self {
        match p {
            Phi::Ds => Combination::Dempster,
            Phi::Max => Combination::Max,
            Phi::Min => Combination::Min,
        }
    }
}

/// Approximate query answering with uncertain integrity constraints.
#[derive(Debug, Parser)]
#[command(name = "approxsqo", version)]
struct Cli {
    /// Database file in the text format.
    #[arg(long, value_name = "PATH")]
    db: Option<PathBuf>,

    /// Query text, `@FILE`, or the name of a query defined in the database.
    #[arg(long, value_name = "STR|@FILE")]
    query: Option<String>,

    /// Correctness threshold.
    #[arg(long, value_name = "R", default_value_t = 0.8)]
    tcorr: f64,

    /// Completeness threshold.
    #[arg(long, value_name = "R", default_value_t = 0.8)]
    tcomp: f64,

    /// Combination function.
    #[arg(long, value_enum, default_value_t = Phi::Ds)]
    phi: Phi,

    /// Minimum extension size of an atom the rewriter may remove.
    #[arg(long, value_name = "N")]
    large_cutoff: Option<usize>,

    /// Maximum extension size of an atom the rewriter may insert.
    #[arg(long, value_name = "N")]
    small_cutoff: Option<usize>,

    /// Also run the original query and report precision, recall and speedup.
    #[arg(long)]
    compare: bool,

    /// Print the proof DAG of every answer in DOT.
    #[arg(long)]
    explain: bool,

    /// Print the compiled residue table.
    #[arg(long)]
    dump_residues: bool,

    /// Print the rewriting with its bound DAG in DOT.
    #[arg(long)]
    dump_rewrite: bool,

    /// Print the expansion tree of the query.
    #[arg(long)]
    dump_expansion: bool,

    /// Mine constraints from the database.
    #[arg(long)]
    mine: bool,

    /// Minimum confidence of mined constraints.
    #[arg(long, value_name = "R", default_value_t = 0.8)]
    min_conf: f64,

    /// Maximum number of body atoms of mined constraints.
    #[arg(long, value_name = "N", default_value_t = 2)]
    max_body: usize,

    /// Emit a synthetic database with N items and planted constraints.
    #[arg(long, value_name = "N")]
    synthesize: Option<usize>,

    /// Confidence of the planted constraint.
    #[arg(long, value_name = "R", default_value_t = 0.9)]
    planted_conf: f64,

    /// Seed for synthetic generation.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,

    /// Refine per-answer correctness only up to this many answers.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    refine_limit: usize,

    /// Structured JSON output.
    #[arg(long)]
    json: bool,
}

enum Failure {
    Usage(String),
    Input(String),
    Eval(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Eval(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Eval(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            Error::Parse { .. } | Error::Invalid(_) | Error::BadInterval { .. } | Error::NegatedIntensional(_) => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Eval(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            match out {
                Output::Text(s) => print!("{s}"),
                Output::Json(v) => println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize")),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if json {
                println!("{}", json!({ "error": f.message(), "exit_code": f.code() }));
            }
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

enum Output {
    Text(String),
    Json(Value),
}

fn load_db(path: &PathBuf) -> Result<Document, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(text::load(&src)?)
}

fn resolve_query(arg: &str, doc: &Document) -> Result<Query, Failure> {
    if let Some(path) = arg.strip_prefix('@') {
        let src = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
        return Ok(text::parse_query(&src)?);
    }
    let name = arg.trim();
    if name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return doc.query(name).cloned().ok_or_else(|| Failure::Usage(format!("no query named {name} in the database")));
    }
    Ok(text::parse_query(arg)?)
}

fn run(cli: Cli) -> Result<Output, Failure> {
    let mut text_out = String::new();
    let mut json_out = Map::new();

    if let Some(items) = cli.synthesize {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let cfg = PlantedConfig { items, confidence: cli.planted_conf, ..PlantedConfig::default() };
        let p = planted(&cfg, &mut rng)?;
        let queries: Vec<Query> = (1..=5).map(|i| p.random_query(&format!("q{i}"), &mut rng)).collect();
        let rendered = text::dump(&p.db, &queries);
        return Ok(if cli.json { Output::Json(json!({ "database": rendered })) } else { Output::Text(rendered) });
    }

    let Some(db_path) = &cli.db else {
        return Err(Failure::Usage("--db is required (see --help)".into()));
    };
    if cli.query.is_none() && !cli.mine && !cli.dump_residues {
        return Err(Failure::Usage("nothing to do: give --query, --mine or --dump-residues".into()));
    }
    let doc = load_db(db_path)?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    let session = Session::new(doc.db.clone())?;

    if cli.dump_residues {
        let dump = session.residues();
        if cli.json {
            json_out.insert("residues".into(), json!(dump.lines().collect::<Vec<_>>()));
        } else {
            text_out.push_str(&dump);
        }
    }

    if cli.mine {
        let cfg = MinerConfig { min_conf: cli.min_conf, max_body: cli.max_body, ..MinerConfig::default() };
        let store = ExtensionStore::from_database(&doc.db)?;
        let rules = mine(&doc.db, &store, &cfg)?;
        if cli.json {
            let list: Vec<Value> = rules
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    json!({
                        "id": format!("M{}", i + 1),
                        "constraint": r.clause.to_string(),
                        "support": r.support,
                        "body_count": r.body_count,
                        "confidence": r.confidence,
                    })
                })
                .collect();
            json_out.insert("mined".into(), Value::Array(list));
        } else {
            text_out.push_str(&to_text(&rules));
        }
    }

    if let Some(arg) = &cli.query {
        let q = resolve_query(arg, &doc)?;
        let rewrite = RewriteConfig {
            t_corr: cli.tcorr,
            t_comp: cli.tcomp,
            phi: cli.phi.into(),
            large_cutoff: cli.large_cutoff,
            small_cutoff: cli.small_cutoff,
        };
        let cfg = SessionConfig { rewrite, compare: cli.compare, refine_limit: cli.refine_limit, ..Default::default() };
        let report = session.run(&q, &cfg)?;

        if cli.dump_expansion && !cli.json {
            text_out.push_str(&report.expansion);
        }
        if cli.dump_rewrite {
            let rendered = Session::describe_rewrites(&report.rewrites);
            if cli.json {
                json_out.insert("rewrite".into(), json!(rendered));
            } else {
                text_out.push_str(&rendered);
            }
        }
        if cli.explain {
            let mut dags = Vec::new();
            for a in &report.answers {
                let o = &report.rewrites[a.rewrites[0]];
                let dot = session.explain(&a.values, o, cfg.refine)?;
                dags.push((a.tuple.join(", "), dot));
            }
            if cli.json {
                let list: Vec<Value> = dags.iter().map(|(t, d)| json!({ "answer": t, "dot": d })).collect();
                json_out.insert("explain".into(), Value::Array(list));
            } else {
                for (t, d) in &dags {
                    text_out.push_str(&format!("% proof of ({t})\n{d}"));
                }
            }
        }
        if cli.json {
            json_out.insert("report".into(), serde_json::to_value(&report).expect("report serializes"));
        } else {
            text_out.push_str(&report.to_string());
        }
    }

    Ok(if cli.json { Output::Json(Value::Object(json_out)) } else { Output::Text(text_out) })
}
