use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lace_core::asp::emit_program;
use lace_core::engine::{Engine, EngineError, Pair, SolutionState, Verdict, DEFAULT_BUDGET};
use lace_core::globalize::globalize_spec;
use lace_core::model::{Constant, Database, Kind};
use lace_core::parse::{
    parse_cell, parse_database, parse_query, parse_schema, parse_sim_table, parse_solution, parse_spec,
    parse_workspace, ParseError, Workspace,
};
use lace_core::render::{render_solution, render_workspace};

const ANSWERED: u8 = 0;
const NEGATIVE: u8 = 1;
const USAGE: u8 = 2;
const BUDGET: u8 = 3;
const NO_SOLUTION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "lace", version, about = "Entity resolution with object and value merges")]
struct Cli {
    /// Print a JSON report instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// Maximum number of search states.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Reserved; has no effect on results.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Schema file (repeatable); replaces the workspace argument.
    #[arg(long, global = true)]
    schema: Vec<PathBuf>,
    /// Fact file (repeatable).
    #[arg(long, global = true)]
    data: Vec<PathBuf>,
    /// Similarity table (repeatable).
    #[arg(long, global = true)]
    sim: Vec<PathBuf>,
    /// Rule and constraint file (repeatable).
    #[arg(long, global = true)]
    spec: Vec<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Is the solution file a solution?
    Check(Files),
    /// Is the solution file a maximal solution?
    Maxcheck(Files),
    /// Does any solution exist?
    Exists(Files),
    /// List solutions in canonical order.
    Solve {
        #[command(flatten)]
        files: Files,
        /// Only maximal solutions.
        #[arg(long)]
        max: bool,
        /// Print at most this many.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Possible or certain merge of a pair: "obj a b" or "cell t1.2 t2.2".
    Merge {
        #[command(flatten)]
        files: Files,
        /// `obj A B` or `cell T.I U.J`.
        #[arg(long)]
        pair: String,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Possible or certain answer of a query.
    Ask {
        #[command(flatten)]
        files: Files,
        /// Query file (`.q`).
        #[arg(long)]
        query: PathBuf,
        /// Comma-separated constants, one per answer variable.
        #[arg(long, allow_hyphen_values = true)]
        tuple: String,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Print the equivalent workspace without object rules.
    Globalize(Files),
    /// Print the answer set program.
    EmitAsp {
        #[command(flatten)]
        files: Files,
        /// Write the program here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Files {
    /// Workspace file (omit when using --schema/--data/--sim/--spec),
    /// followed by the solution file for check and maxcheck.
    files: Vec<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Possible,
    Certain,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Possible => "possible",
            Mode::Certain => "certain",
        }
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    payload: Value,
    text: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        let message = message.into();
        Failure { code: USAGE, payload: json!({ "message": message }), text: message }
    }

    fn parse(file: &Path, e: &ParseError) -> Self {
        Failure {
            code: USAGE,
            payload: json!({
                "file": file.display().to_string(),
                "code": e.code.to_string(),
                "line": e.line,
                "col": e.col,
                "message": e.message,
            }),
            text: format!("{}: {e}", file.display()),
        }
    }

    fn engine(e: EngineError) -> Self {
        match e {
            EngineError::Budget { limit, explored } => Failure {
                code: BUDGET,
                payload: json!({ "message": e.to_string(), "limit": limit, "explored": explored }),
                text: e.to_string(),
            },
            other => Failure::usage(other.to_string()),
        }
    }
}

struct Outcome {
    code: u8,
    result: Value,
    text: String,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_all(paths: &[PathBuf]) -> Result<(String, PathBuf), Failure> {
    let mut text = String::new();
    for p in paths {
        text.push_str(&read(p)?);
        text.push('\n');
    }
    Ok((text, paths.first().cloned().unwrap_or_default()))
}

/// The workspace plus the remaining positional files.
fn load(cli: &Cli, files: &Files) -> Result<(Workspace, Vec<PathBuf>), Failure> {
    let separate = !(cli.schema.is_empty() && cli.data.is_empty() && cli.sim.is_empty() && cli.spec.is_empty());
    if !separate {
        let (ws, rest) = files
            .files
            .split_first()
            .ok_or_else(|| Failure::usage("missing workspace file"))?;
        let text = read(ws)?;
        let parsed = parse_workspace(&text).map_err(|e| Failure::parse(ws, &e))?;
        return Ok((parsed, rest.to_vec()));
    }
    if cli.schema.is_empty() {
        return Err(Failure::usage("--data, --sim and --spec need --schema"));
    }
    let (text, first) = read_all(&cli.schema)?;
    let schema = parse_schema(&text).map_err(|e| Failure::parse(&first, &e))?;
    let (text, first) = read_all(&cli.data)?;
    let db = if cli.data.is_empty() {
        Database::empty(schema.clone())
    } else {
        parse_database(&text, &schema).map_err(|e| Failure::parse(&first, &e))?
    };
    let (text, first) = read_all(&cli.sim)?;
    let oracle = parse_sim_table(&text).map_err(|e| Failure::parse(&first, &e))?;
    let (text, first) = read_all(&cli.spec)?;
    let spec = parse_spec(&text, &schema).map_err(|e| Failure::parse(&first, &e))?;
    Ok((Workspace { db, oracle, spec }, files.files.clone()))
}

fn expect_files(rest: &[PathBuf], n: usize, what: &str) -> Result<(), Failure> {
    if rest.len() == n {
        Ok(())
    } else {
        Err(Failure::usage(format!("expected {what}, got {} extra file(s)", rest.len())))
    }
}

fn yes_no(b: bool) -> (u8, &'static str) {
    if b {
        (ANSWERED, "yes")
    } else {
        (NEGATIVE, "no")
    }
}

fn verdict(v: Verdict) -> u8 {
    match v {
        Verdict::Yes => ANSWERED,
        Verdict::No => NEGATIVE,
        Verdict::NoSolution => NO_SOLUTION,
    }
}

fn solution_json(db: &Database, s: &SolutionState) -> Value {
    let eqo: Vec<Vec<String>> = s
        .e
        .nontrivial_classes(db)
        .iter()
        .map(|c| c.iter().map(|o| o.lexeme.to_string()).collect())
        .collect();
    let eqv: Vec<Vec<String>> = s
        .v
        .nontrivial_classes(db)
        .iter()
        .map(|c| c.iter().map(|cell| cell.to_string()).collect())
        .collect();
    json!({ "eqo": eqo, "eqv": eqv })
}

fn parse_pair(text: &str) -> Result<Pair, Failure> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let cell = |s: &str| parse_cell(s).map_err(|e| Failure::usage(format!("--pair: {e}")));
    match parts.as_slice() {
        ["obj", a, b] => Ok(Pair::Objects(Constant::obj(*a), Constant::obj(*b))),
        ["cell", a, b] => Ok(Pair::Cells(cell(a)?, cell(b)?)),
        _ => Err(Failure::usage(format!("--pair expects `obj A B` or `cell T.I T.J`, got `{text}`"))),
    }
}

fn parse_tuple(text: &str) -> Result<Vec<String>, Failure> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    match reader.records().next() {
        Some(Ok(r)) => Ok(r.iter().map(str::to_string).collect()),
        Some(Err(e)) => Err(Failure::usage(format!("--tuple: {e}"))),
        None => Ok(Vec::new()),
    }
}

fn engine(ws: &Workspace, budget: u64) -> Result<Engine<'_>, Failure> {
    Ok(Engine::new(&ws.db, &ws.spec, &ws.oracle).map_err(Failure::engine)?.with_budget(budget))
}

fn run(cli: &Cli) -> Result<(Outcome, u64), Failure> {
    let outcome = match &cli.command {
        Cmd::Check(files) | Cmd::Maxcheck(files) => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 1, "one solution file")?;
            let text = read(&rest[0])?;
            let (e, v) = parse_solution(&text, &ws.db).map_err(|e| Failure::parse(&rest[0], &e))?;
            let eng = engine(&ws, cli.budget)?;
            let s = SolutionState { e, v };
            let (key, ok) = if matches!(cli.command, Cmd::Check(_)) {
                ("solution", eng.rec_check(&s))
            } else {
                ("maximal", eng.max_rec_check(&s))
            };
            let ok = ok.map_err(Failure::engine)?;
            let (code, word) = yes_no(ok);
            (Outcome { code, result: json!({ key: ok }), text: format!("{word}\n") }, eng.states_explored())
        }
        Cmd::Exists(files) => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let eng = engine(&ws, cli.budget)?;
            let ok = eng.existence().map_err(Failure::engine)?;
            let (code, word) = yes_no(ok);
            (Outcome { code, result: json!({ "exists": ok }), text: format!("{word}\n") }, eng.states_explored())
        }
        Cmd::Solve { files, max, limit } => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let eng = engine(&ws, cli.budget)?;
            let all = if *max { eng.enumerate_max_solutions() } else { eng.enumerate_solutions() }
                .map_err(Failure::engine)?;
            let total = all.len();
            let shown = &all[..limit.unwrap_or(total).min(total)];
            let mut text = String::new();
            for (k, s) in shown.iter().enumerate() {
                if k > 0 {
                    text.push('\n');
                }
                text.push_str(&format!("# solution {}\n", k + 1));
                text.push_str(&render_solution(&ws.db, &s.e, &s.v));
            }
            let result = json!({
                "maximal_only": max,
                "count": total,
                "truncated": shown.len() < total,
                "solutions": shown.iter().map(|s| solution_json(&ws.db, s)).collect::<Vec<_>>(),
            });
            (Outcome { code: ANSWERED, result, text }, eng.states_explored())
        }
        Cmd::Merge { files, pair, mode } => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let p = parse_pair(pair)?;
            let eng = engine(&ws, cli.budget)?;
            let v = match mode {
                Mode::Possible => eng.poss_merge(&p),
                Mode::Certain => eng.cert_merge(&p),
            }
            .map_err(Failure::engine)?;
            let result = json!({ "pair": pair.split_whitespace().collect::<Vec<_>>().join(" "), "mode": mode.name(), "verdict": v.to_string() });
            (Outcome { code: verdict(v), result, text: format!("{v}\n") }, eng.states_explored())
        }
        Cmd::Ask { files, query, tuple, mode } => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let text = read(query)?;
            let q = parse_query(&text, ws.db.schema()).map_err(|e| Failure::parse(query, &e))?;
            let raw = parse_tuple(tuple)?;
            if raw.len() != q.free.len() {
                return Err(Failure::usage(format!(
                    "query has {} answer variables, --tuple has {} values",
                    q.free.len(),
                    raw.len()
                )));
            }
            let kinds = q.var_kinds(ws.db.schema());
            let constants: Vec<Constant> = q
                .free
                .iter()
                .zip(&raw)
                .map(|(x, s)| {
                    let kind = kinds.get(x).and_then(|k| k.iter().next().copied()).unwrap_or(Kind::Val);
                    Constant::new(kind, s.as_str())
                })
                .collect();
            let eng = engine(&ws, cli.budget)?;
            let v = match mode {
                Mode::Possible => eng.poss_ans_maximal(&q, &constants),
                Mode::Certain => eng.cert_ans(&q, &constants),
            }
            .map_err(Failure::engine)?;
            let result = json!({ "tuple": raw, "mode": mode.name(), "verdict": v.to_string() });
            (Outcome { code: verdict(v), result, text: format!("{v}\n") }, eng.states_explored())
        }
        Cmd::Globalize(files) => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let g = globalize_spec(&ws.db, &ws.spec).map_err(|e| Failure::usage(e.to_string()))?;
            let global_rules = g.global_rules;
            let out = Workspace { db: g.db, oracle: ws.oracle.clone(), spec: g.spec };
            let text = render_workspace(&out);
            let result = json!({
                "value_rules": out.spec.value_rules.len(),
                "global_rules": global_rules,
                "workspace": text,
            });
            (Outcome { code: ANSWERED, result, text }, 0)
        }
        Cmd::EmitAsp { files, out } => {
            let (ws, rest) = load(cli, files)?;
            expect_files(&rest, 0, "no solution file")?;
            let program = emit_program(&ws.db, &ws.spec, &ws.oracle).map_err(|e| Failure::usage(e.to_string()))?;
            let text = program.render();
            let rules = program.rules().count();
            match out {
                Some(path) => {
                    std::fs::write(path, &text)
                        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                    let result = json!({ "rules": rules, "out": path.display().to_string(), "program": Value::Null });
                    (Outcome { code: ANSWERED, result, text: String::new() }, 0)
                }
                None => {
                    let result = json!({ "rules": rules, "out": Value::Null, "program": text });
                    (Outcome { code: ANSWERED, result, text }, 0)
                }
            }
        }
    };
    Ok(outcome)
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Check(_) => "check",
        Cmd::Maxcheck(_) => "maxcheck",
        Cmd::Exists(_) => "exists",
        Cmd::Solve { .. } => "solve",
        Cmd::Merge { .. } => "merge",
        Cmd::Ask { .. } => "ask",
        Cmd::Globalize(_) => "globalize",
        Cmd::EmitAsp { .. } => "emit-asp",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { ANSWERED };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let outcome = run(&cli);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
    let (code, report) = match outcome {
        Ok((o, explored)) => {
            if !cli.json {
                print!("{}", o.text);
            }
            let report = json!({
                "command": command_name(&cli.command),
                "exit_code": o.code,
                "elapsed_ms": elapsed_ms,
                "states_explored": explored,
                "budget": { "limit": cli.budget, "exceeded": false },
                "result": o.result,
            });
            (o.code, report)
        }
        Err(f) => {
            if !cli.json {
                eprintln!("error: {}", f.text);
            }
            let explored = f.payload.get("explored").and_then(Value::as_u64).unwrap_or(0);
            let report = json!({
                "command": command_name(&cli.command),
                "exit_code": f.code,
                "elapsed_ms": elapsed_ms,
                "states_explored": explored,
                "budget": { "limit": cli.budget, "exceeded": f.code == BUDGET },
                "error": f.payload,
            });
            (f.code, report)
        }
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
    }
    ExitCode::from(code)
}
