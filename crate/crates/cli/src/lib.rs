//! Command-line front end: argument parsing, input grammars for Weyl
//! elements and valuation functions, and output rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rootval::exactfield::{fmt_rational, parse_rational, rat};
use rootval::rootsys::{
    build_root_system, conjugacy_classes, coxeter_element, element_from_word, invariant_degrees, RootSystem,
    RootType, WeylElement, DEFAULT_WEYL_CAP, SCHEMA_VERSION,
};
use rootval::strata::{StrataContext, StratumReport, ValuationFunction};
use rootval::verify::{run_plan, CheckKind, VerificationPlan, VerificationReport, DEFAULT_JET_CAP};
use rootval::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rootval", version, about = "Root-valuation strata of the adjoint quotient")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Largest Weyl group that will be enumerated.
    #[arg(long, global = true, default_value_t = DEFAULT_WEYL_CAP)]
    pub weyl_cap: usize,
    /// Largest number of candidates or jets a single computation may visit.
    #[arg(long, global = true, default_value_t = DEFAULT_JET_CAP)]
    pub jet_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Root data, Weyl group order, conjugacy classes and degrees.
    Roots(SystemArgs),
    /// Full report for one stratum.
    Check(StratumArgs),
    /// Codimension fields for one stratum.
    Codim(StratumArgs),
    /// All orbit strata up to a bound on δ and on denominators.
    Enumerate(EnumerateArgs),
    /// Run finite-field verification checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SystemArgs {
    /// Cartan type (A–G).
    #[arg(long = "type")]
    pub type_label: String,
    #[arg(long)]
    pub rank: usize,
}

#[derive(Args, Debug)]
pub struct StratumArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// "id", "coxeter" or a word such as "s1 s2 s1".
    #[arg(long)]
    pub w: String,
    /// "const a/b" or "alpha1=3/2,alpha2=0,..." (unlisted positive roots are 0).
    #[arg(long)]
    pub r: String,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, default_value_t = 6)]
    pub max_delta: u64,
    #[arg(long, default_value_t = 6)]
    pub max_denominator: u64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Restrict to one stratum (needs --r as well).
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    /// Jet truncation N.
    #[arg(short = 'N', long = "truncation", default_value_t = 3)]
    pub truncation: usize,
    /// Prime q; defaults to the smallest admissible prime.
    #[arg(short = 'q', long = "prime")]
    pub prime: Option<u64>,
    /// Comma-separated checks.
    #[arg(long, default_value = "closure_count,fiber_size,partition,jacobian,freeness,separation")]
    pub checks: String,
    #[arg(long, default_value_t = 4)]
    pub max_delta: u64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Result of a run: rendered output and exit code.
#[derive(Debug)]
pub struct RunOutput {
    pub text: String,
    pub code: i32,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CapExceeded(_) => 3,
        Error::Internal(_) | Error::NoSolution(_) | Error::FractionalResidue(_) => 1,
        _ => 2,
    }
}

pub fn parse_type(s: &str) -> Result<RootType> {
    RootType::from_str(s)
}

/// Parses "id", "coxeter" or a word in simple reflections.
pub fn parse_weyl_element(rs: &RootSystem, s: &str) -> Result<WeylElement> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "id" | "1" | "e" | "" => return element_from_word(rs, &[]),
        "coxeter" | "cox" => return Ok(coxeter_element(rs)),
        _ => {}
    }
    let mut word = Vec::new();
    for tok in t.split(|c: char| c.is_whitespace() || c == ',' || c == '*').filter(|x| !x.is_empty()) {
        let k = tok
            .strip_prefix('s')
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad generator '{tok}' (expected s1..s{})", rs.rank)))?;
        if k == 0 || k > rs.rank {
            return Err(Error::Parse(format!("generator s{k} out of range 1..{}", rs.rank)));
        }
        word.push(k);
    }
    element_from_word(rs, &word)
}

/// Parses "const a/b" or "alpha1=…,alpha2=…" into a valuation function.
pub fn parse_valuation(rs: &RootSystem, s: &str) -> Result<ValuationFunction> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("const") {
        let q = parse_rational(rest.trim()).ok_or_else(|| Error::Parse(format!("bad rational '{}'", rest.trim())))?;
        return ValuationFunction::constant(rs, q).map_err(|e| Error::Parse(e.to_string()));
    }
    let mut pos = vec![rat(0, 1); rs.num_positive()];
    let mut seen = vec![false; rs.num_positive()];
    for part in t.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected alphaK=value, got '{part}'")))?;
        let k = name
            .trim()
            .strip_prefix("alpha")
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad root name '{}'", name.trim())))?;
        if k == 0 || k > rs.num_positive() {
            return Err(Error::Parse(format!("alpha{k} out of range 1..{}", rs.num_positive())));
        }
        if seen[k - 1] {
            return Err(Error::Parse(format!("alpha{k} assigned twice")));
        }
        seen[k - 1] = true;
        pos[k - 1] = parse_rational(value.trim()).ok_or_else(|| Error::Parse(format!("bad rational '{}'", value.trim())))?;
    }
    if !seen.iter().any(|&b| b) {
        return Err(Error::Parse(format!("empty valuation '{t}'")));
    }
    ValuationFunction::from_positive(rs, &pos).map_err(|e| Error::Parse(e.to_string()))
}

fn system(args: &SystemArgs) -> Result<RootSystem> {
    build_root_system(parse_type(&args.type_label)?, args.rank)
}

/// Positive-root values as "alpha1=…,…".
fn r_positive(rs: &RootSystem, r: &ValuationFunction) -> String {
    (0..rs.num_positive())
        .map(|i| format!("alpha{}={}", i + 1, fmt_rational(&r.values[i])))
        .collect::<Vec<_>>()
        .join(",")
}

fn document(config: Value, key: &str, body: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "config": config, key: body })
}

fn base_config(cli: &Cli, sub: &str, sys: &SystemArgs) -> Result<serde_json::Map<String, Value>> {
    let mut m = serde_json::Map::new();
    m.insert("subcommand".into(), json!(sub));
    m.insert("type".into(), json!(parse_type(&sys.type_label)?.to_string()));
    m.insert("rank".into(), json!(sys.rank));
    m.insert("format".into(), json!(cli.format));
    m.insert("weyl_cap".into(), json!(cli.weyl_cap));
    m.insert("jet_cap".into(), json!(cli.jet_cap));
    Ok(m)
}

fn config_comment(config: &Value) -> String {
    let mut s = String::new();
    if let Value::Object(m) = config {
        for (k, v) in m {
            let v = match v {
                Value::String(x) => x.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "# {k} = {v}");
        }
    }
    s
}

/// Fixed CSV columns for stratum reports.
pub const REPORT_COLUMNS: [&str; 15] = [
    "w", "r", "l", "cond1", "cond2", "cond3", "cond4", "nonempty", "delta_r", "c_w", "e_wr", "d_wr", "codim",
    "stabilizer_order", "eigenspace_dims",
];

fn report_row(rep: &StratumReport) -> Vec<String> {
    let opt = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
    vec![
        rep.w.word_string(),
        rep.r.display(),
        rep.l.to_string(),
        rep.condition_flags[0].to_string(),
        rep.condition_flags[1].to_string(),
        rep.condition_flags[2].to_string(),
        rep.condition_flags[3].to_string(),
        rep.nonempty.to_string(),
        fmt_rational(&rep.delta_r),
        rep.c_w.to_string(),
        fmt_rational(&rep.e_wr),
        opt(rep.d_wr),
        opt(rep.codim),
        rep.stabilizer_order.to_string(),
        rep.eigenspace_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "),
    ]
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Internal(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn table_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out
}

fn render(format: Format, config: &Value, key: &str, body: Value, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&document(config.clone(), key, body)).map_err(|e| Error::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => format!("# schema_version = {SCHEMA_VERSION}\n{}{}", config_comment(config), csv_text(header, rows)?),
        Format::Table => format!("# schema_version = {SCHEMA_VERSION}\n{}{}", config_comment(config), table_text(header, rows)),
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(e.to_string()))
}

pub fn run(cli: &Cli) -> Result<RunOutput> {
    match &cli.command {
        Command::Roots(sys) => run_roots(cli, sys),
        Command::Check(args) => run_check(cli, args, false),
        Command::Codim(args) => run_check(cli, args, true),
        Command::Enumerate(args) => run_enumerate(cli, args),
        Command::Verify(args) => run_verify(cli, args),
    }
}

fn run_roots(cli: &Cli, sys: &SystemArgs) -> Result<RunOutput> {
    let rs = system(sys)?;
    let config = Value::Object(base_config(cli, "roots", sys)?);
    let ctx = StrataContext::with_cap(rs.clone(), cli.weyl_cap)?;
    let degrees = invariant_degrees(&rs, cli.weyl_cap)?;
    let classes: Vec<Value> = conjugacy_classes(&ctx.group)
        .iter()
        .map(|c| {
            json!({
                "representative": ctx.group.element(c.representative).word_string(),
                "size": c.size,
                "order": c.order,
            })
        })
        .collect();
    let mut body = rs.to_json();
    if let Value::Object(m) = &mut body {
        m.remove("schema_version");
        m.insert("weyl_order".into(), json!(ctx.group.len()));
        m.insert("degrees".into(), json!(degrees.degrees));
        m.insert("conjugacy_classes".into(), Value::Array(classes));
        m.insert(
            "positive_root_names".into(),
            json!((1..=rs.num_positive()).map(|i| format!("alpha{i}")).collect::<Vec<_>>()),
        );
        m.insert("simple_coefficients".into(), json!(rs.simple_coeffs[..rs.num_positive()].to_vec()));
    }
    let header = ["name", "index", "simple_coefficients", "height", "root"];
    let rows: Vec<Vec<String>> = (0..rs.num_positive())
        .map(|i| {
            let fmt = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            vec![
                format!("alpha{}", i + 1),
                i.to_string(),
                fmt(&rs.simple_coeffs[i]),
                rs.simple_coeffs[i].iter().sum::<i64>().to_string(),
                fmt(&rs.roots[i]),
            ]
        })
        .collect();
    let mut text = render(cli.format, &config, "roots", body, &header, &rows)?;
    if cli.format != Format::Json {
        text = format!(
            "# weyl_order = {}\n# degrees = {:?}\n{text}",
            ctx.group.len(),
            degrees.degrees
        );
    }
    Ok(RunOutput { text, code: 0 })
}

fn run_check(cli: &Cli, args: &StratumArgs, codim_only: bool) -> Result<RunOutput> {
    let rs = system(&args.system)?;
    let ctx = StrataContext::with_cap(rs.clone(), cli.weyl_cap)?;
    let w = parse_weyl_element(&rs, &args.w)?;
    let r = parse_valuation(&rs, &args.r)?;
    let idx = ctx.index_of(&w)?;
    let report = ctx.evaluate(idx, &r)?;
    let mut config = base_config(cli, if codim_only { "codim" } else { "check" }, &args.system)?;
    config.insert("w".into(), json!(report.w.word_string()));
    config.insert("r".into(), json!(r_positive(&rs, &r)));
    let config = Value::Object(config);
    let (body, header, row): (Value, Vec<&str>, Vec<String>) = if codim_only {
        let opt = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
        let body = json!({
            "w": report.w.word_string(),
            "r": report.r.display(),
            "nonempty": report.nonempty,
            "delta_r": fmt_rational(&report.delta_r),
            "c_w": report.c_w,
            "e_wr": fmt_rational(&report.e_wr),
            "d_wr": report.d_wr,
            "codim": report.codim,
        });
        let row = vec![
            report.w.word_string(),
            report.r.display(),
            report.nonempty.to_string(),
            fmt_rational(&report.delta_r),
            report.c_w.to_string(),
            fmt_rational(&report.e_wr),
            opt(report.d_wr),
            opt(report.codim),
        ];
        (body, vec!["w", "r", "nonempty", "delta_r", "c_w", "e_wr", "d_wr", "codim"], row)
    } else {
        (to_value(&report)?, REPORT_COLUMNS.to_vec(), report_row(&report))
    };
    let text = render(cli.format, &config, "report", body, &header, &[row])?;
    Ok(RunOutput { text, code: 0 })
}

fn run_enumerate(cli: &Cli, args: &EnumerateArgs) -> Result<RunOutput> {
    let rs = system(&args.system)?;
    let ctx = StrataContext::with_cap(rs, cli.weyl_cap)?;
    let reports = ctx.enumerate_strata(args.max_delta, args.max_denominator, cli.jet_cap)?;
    let mut config = base_config(cli, "enumerate", &args.system)?;
    config.insert("max_delta".into(), json!(args.max_delta));
    config.insert("max_denominator".into(), json!(args.max_denominator));
    let config = Value::Object(config);
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    let text = render(cli.format, &config, "reports", to_value(&reports)?, &REPORT_COLUMNS, &rows)?;
    Ok(RunOutput { text, code: 0 })
}

pub fn parse_checks(s: &str) -> Result<Vec<CheckKind>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let c = CheckKind::from_str(part)?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no checks selected".into()));
    }
    Ok(out)
}

fn run_verify(cli: &Cli, args: &VerifyArgs) -> Result<RunOutput> {
    let rs = system(&args.system)?;
    let strata = match (&args.w, &args.r) {
        (Some(w), Some(r)) => vec![(parse_weyl_element(&rs, w)?, parse_valuation(&rs, r)?)],
        (None, None) => Vec::new(),
        _ => return Err(Error::Parse("--w and --r must be given together".into())),
    };
    let plan = VerificationPlan {
        type_label: rs.type_label,
        rank: rs.rank,
        strata,
        truncation: args.truncation,
        prime: args.prime,
        checks: parse_checks(&args.checks)?,
        max_delta: args.max_delta,
        samples: args.samples,
        cap: cli.jet_cap,
        seed: args.seed,
    };
    let report: VerificationReport = run_plan(&plan)?;
    let mut config = base_config(cli, "verify", &args.system)?;
    config.insert("truncation".into(), json!(args.truncation));
    config.insert("prime".into(), json!(report.prime));
    config.insert("checks".into(), json!(plan.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>()));
    config.insert("max_delta".into(), json!(args.max_delta));
    config.insert("samples".into(), json!(args.samples));
    config.insert("seed".into(), json!(args.seed));
    if let (Some(w), Some(r)) = (plan.strata.first().map(|s| &s.0), plan.strata.first().map(|s| &s.1)) {
        config.insert("w".into(), json!(w.word_string()));
        config.insert("r".into(), json!(r_positive(&rs, r)));
    }
    let config = Value::Object(config);
    let join = |m: &std::collections::BTreeMap<String, String>| m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
    let rows: Vec<Vec<String>> = report
        .outcomes
        .iter()
        .map(|o| {
            let status = if o.skipped.is_some() {
                "SKIP"
            } else if o.passed {
                "PASS"
            } else {
                "FAIL"
            };
            vec![
                o.check.to_string(),
                status.to_string(),
                o.instance.clone(),
                join(&o.counted),
                join(&o.expected),
                o.skipped.clone().or_else(|| o.note.clone()).unwrap_or_default(),
            ]
        })
        .collect();
    let header = ["check", "status", "instance", "counted", "expected", "note"];
    let text = render(cli.format, &config, "verification", to_value(&report)?, &header, &rows)?;
    Ok(RunOutput {
        text,
        code: if report.passed { 0 } else { 1 },
    })
}
