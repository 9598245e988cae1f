use std::process::Command;

use rootval::rootsys::{build_root_system, RootType};
use rootval::strata::{StrataContext, StratumReport};
use rootval_cli::{parse_checks, parse_valuation, parse_weyl_element};
use serde_json::Value;

fn rootval(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rootval")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = rootval(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn check_nonempty_codim_three() {
    let v = json(&["check", "--type", "A", "--rank", "1", "--w", "s1", "--r", "const 3/2"]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["report"]["nonempty"], true);
    assert_eq!(v["report"]["codim"], 3);
    assert_eq!(v["config"]["w"], "s1");
    assert_eq!(v["config"]["r"], "alpha1=3/2");
}

#[test]
fn check_empty_for_fractional_identity() {
    let v = json(&["check", "--type", "A", "--rank", "1", "--w", "id", "--r", "const 1/2"]);
    assert_eq!(v["report"]["nonempty"], false);
    assert_eq!(v["report"]["condition_flags"][0], false);
    assert!(v["report"]["codim"].is_null());
}

#[test]
fn codim_subset() {
    let v = json(&["codim", "--type", "B", "--rank", "2", "--w", "id", "--r", "alpha1=1,alpha2=1,alpha3=1,alpha4=1"]);
    assert_eq!(v["report"]["codim"], 6);
    assert!(v["report"].get("condition_flags").is_none());
}

#[test]
fn enumerate_contains_coxeter_stratum_and_round_trips() {
    let v = json(&["enumerate", "--type", "A", "--rank", "2", "--max-delta", "6", "--max-denominator", "3", "--format", "json"]);
    let reports: Vec<StratumReport> = serde_json::from_value(v["reports"].clone()).unwrap();
    assert!(reports.iter().any(|r| r.l == 3 && r.r.display() == "1/3,1/3,1/3,1/3,1/3,1/3"));
    let ctx = StrataContext::new(build_root_system(RootType::A, 2).unwrap()).unwrap();
    let direct = ctx.enumerate_strata(6, 3, 2_000_000).unwrap();
    assert_eq!(reports, direct);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["verify", "--type", "A", "--rank", "1", "-N", "3", "-q", "3", "--seed", "11", "--samples", "20"];
    let (c1, a, _) = rootval(&args);
    let (c2, b, _) = rootval(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let (_, e1, _) = rootval(&["enumerate", "--type", "G", "--rank", "2", "--max-delta", "6", "--format", "csv"]);
    let (_, e2, _) = rootval(&["enumerate", "--type", "G", "--rank", "2", "--max-delta", "6", "--format", "csv"]);
    assert_eq!(e1, e2);
}

#[test]
fn exit_codes() {
    assert_eq!(rootval(&["check", "--type", "Q", "--rank", "1", "--w", "id", "--r", "const 0"]).0, 2);
    assert_eq!(rootval(&["check", "--type", "A", "--rank", "1", "--w", "s7", "--r", "const 0"]).0, 2);
    assert_eq!(rootval(&["check", "--type", "A", "--rank", "1", "--w", "id", "--r", "const x"]).0, 2);
    assert_eq!(rootval(&["check", "--type", "A", "--rank", "1"]).0, 2);
    assert_eq!(rootval(&["roots", "--type", "E", "--rank", "8", "--weyl-cap", "1000"]).0, 3);
    assert_eq!(rootval(&["verify", "--type", "A", "--rank", "2", "-N", "6", "--jet-cap", "1000"]).0, 3);
    assert_eq!(rootval(&["roots", "--type", "A", "--rank", "2"]).0, 0);
}

#[test]
fn csv_and_table_echo_config() {
    let (code, out, _) = rootval(&["check", "--type", "A", "--rank", "1", "--w", "s1", "--r", "const 1/2", "--format", "csv"]);
    assert_eq!(code, 0);
    assert!(out.contains("# subcommand = check"));
    let body: String = out.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.len(), rootval_cli::REPORT_COLUMNS.len());
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[12], "1");
    let (_, table, _) = rootval(&["roots", "--type", "G", "--rank", "2", "--format", "table"]);
    assert!(table.contains("# weyl_order = 12"));
    assert!(table.contains("alpha6"));
}

#[test]
fn roots_reports_degrees() {
    let v = json(&["roots", "--type", "F", "--rank", "4"]);
    assert_eq!(v["roots"]["weyl_order"], 1152);
    assert_eq!(v["roots"]["degrees"], serde_json::json!([2, 6, 8, 12]));
}

#[test]
fn input_grammars() {
    let rs = build_root_system(RootType::A, 3).unwrap();
    assert!(parse_weyl_element(&rs, "id").unwrap().is_identity());
    assert_eq!(parse_weyl_element(&rs, "s1 s2 s1").unwrap().matrix, parse_weyl_element(&rs, "s2,s1,s2").unwrap().matrix);
    assert!(parse_weyl_element(&rs, "t1").is_err());
    assert!(parse_weyl_element(&rs, "s0").is_err());
    let r = parse_valuation(&rs, "alpha2=3/2, alpha6=1").unwrap();
    assert_eq!(r.display(), "0,3/2,0,0,0,1,0,3/2,0,0,0,1");
    assert!(parse_valuation(&rs, "alpha7=1").is_err());
    assert!(parse_valuation(&rs, "alpha1=1,alpha1=2").is_err());
    assert!(parse_valuation(&rs, "const -1").is_err());
    assert!(parse_valuation(&rs, "").is_err());
    assert_eq!(parse_checks("partition, hensel,partition").unwrap().len(), 2);
    assert!(parse_checks("bogus").is_err());
}

#[test]
fn verify_passes_on_a1() {
    // A1 at N = 4, q = 5 passes every check.
    let (code, out, _) = rootval(&["verify", "--type", "A", "--rank", "1", "-N", "4", "-q", "5", "--samples", "10"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verification"]["passed"], true);
}
