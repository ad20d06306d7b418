//! End-to-end runs of the `causal-audit` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_causal-audit");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/visa_audit.json");
const GOLDEN_EXACT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/visa_exact.json");

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("causal-audit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn generate(dir: &Path, scenario: &str, n: &str, seed: &str) {
    let o = run(
        dir,
        &[
            "generate",
            "--scenario",
            scenario,
            "--n",
            n,
            "--seed",
            seed,
            "--out",
            "data.csv",
            "--emit-spec",
            "model.cg",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

/// The golden report: visa data audited with the plug-in backend.
fn golden_run(dir: &Path) -> Output {
    generate(dir, "visa", "2000", "7");
    run(
        dir,
        &[
            "audit",
            "--spec",
            "model.cg",
            "--data",
            "data.csv",
            "--sensitive",
            "Nationality=0,1",
            "--outcome",
            "Visa=1",
            "--backend",
            "plugin",
            "--bootstrap",
            "200",
            "--seed",
            "3",
        ],
    )
}

#[test]
fn golden_visa_report() {
    let dir = scratch("golden");
    let o = golden_run(&dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = std::fs::read_to_string(GOLDEN).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn golden_exact_visa_report() {
    let dir = scratch("golden-exact");
    generate(&dir, "visa", "10", "0");
    let o = run(
        &dir,
        &[
            "audit",
            "--spec",
            "model.cg",
            "--sensitive",
            "Nationality=0,1",
            "--outcome",
            "Visa=1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = std::fs::read_to_string(GOLDEN_EXACT).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn generate_then_audit_is_byte_identical() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let (oa, ob) = (golden_run(&a), golden_run(&b));
    assert_eq!(
        std::fs::read(a.join("data.csv")).unwrap(),
        std::fs::read(b.join("data.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("model.cg")).unwrap(),
        std::fs::read(b.join("model.cg")).unwrap()
    );
    assert_eq!(oa.stdout, ob.stdout);

    generate(&b, "visa", "2000", "8");
    assert_ne!(
        std::fs::read(a.join("data.csv")).unwrap(),
        std::fs::read(b.join("data.csv")).unwrap()
    );
}

#[test]
fn paths_on_hiring() {
    let dir = scratch("paths");
    generate(&dir, "hiring", "10", "0");
    let o = run(
        &dir,
        &[
            "paths",
            "--spec",
            "model.cg",
            "--sensitive",
            "Race",
            "--outcome",
            "Hired",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("| Race")).collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(out.contains("| Race -> LastName -> Hired | indirect-proxy |"));
    assert!(out.contains("| Race -> Skill -> Hired | indirect-explaining |"));
    assert!(out.contains("| Race -> Hired | direct |"));
}

#[test]
fn exact_audit_markdown() {
    let dir = scratch("markdown");
    generate(&dir, "visa", "500", "1");
    let o = run(
        &dir,
        &[
            "audit",
            "--spec",
            "model.cg",
            "--sensitive",
            "Nationality=0,1",
            "--outcome",
            "Visa=1",
            "--format",
            "markdown",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = stdout(&o);
    for needle in [
        "| te | eq2 | 0.400000 |",
        "| nde | eq4 | 0.200000 |",
        "| pse | eq6 | 0.100000 |",
        "Business Necessity",
    ] {
        assert!(md.contains(needle), "missing {needle}");
    }
    assert!(md.contains("| positivity | Untestable |"));
}

#[test]
fn hidden_confounder_exits_two() {
    let dir = scratch("hidden");
    generate(&dir, "visa", "3000", "2");
    // Same graph, Age unobserved and no model: the data lack the Age column.
    let spec = "node Age { domain: [0, 1], observed: false }\n\
                node Nationality { domain: [0, 1] }\nnode SkillLevel { domain: [0, 1] }\n\
                node FamilyStatus { domain: [0, 1] }\nnode Visa { domain: [0, 1] }\n\
                edge Age -> Nationality\nedge Age -> Visa\nedge Nationality -> SkillLevel\n\
                edge Nationality -> FamilyStatus\nedge Nationality -> Visa\nedge SkillLevel -> Visa\n\
                edge FamilyStatus -> Visa\n";
    std::fs::write(dir.join("hidden.cg"), spec).unwrap();
    let csv = std::fs::read_to_string(dir.join("data.csv")).unwrap();
    let trimmed: String = csv
        .lines()
        .map(|l| l.split(',').skip(1).collect::<Vec<_>>().join(",") + "\r\n")
        .collect();
    assert!(csv.starts_with("Age,"));
    std::fs::write(dir.join("observed.csv"), trimmed).unwrap();
    let o = run(
        &dir,
        &[
            "audit",
            "--spec",
            "hidden.cg",
            "--data",
            "observed.csv",
            "--sensitive",
            "Nationality=0,1",
            "--outcome",
            "Visa=1",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let te = report["metrics"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["metric"] == "te")
        .unwrap();
    assert_eq!(te["status"], "unidentifiable");
    assert!(te["value"].is_null());
    assert!(stderr(&o).contains("Age"));
}

#[test]
fn input_errors_exit_one() {
    let dir = scratch("errors");
    generate(&dir, "visa", "100", "0");
    let audit = |extra: &[&str]| {
        let mut args = vec![
            "audit",
            "--sensitive",
            "Nationality=0,1",
            "--outcome",
            "Visa=1",
        ];
        args.extend_from_slice(extra);
        run(&dir, &args)
    };

    let o = audit(&["--spec", "missing.cg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.cg"));

    std::fs::write(
        dir.join("bad.cg"),
        "node A { domain: [0, 1] }\nedge A => B\n",
    )
    .unwrap();
    let o = audit(&["--spec", "bad.cg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2:"), "{}", stderr(&o));

    std::fs::write(dir.join("wrong.csv"), "Age,Nationality\n1,0\n").unwrap();
    let o = audit(&["--spec", "model.cg", "--data", "wrong.csv"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(
        &dir,
        &[
            "audit",
            "--spec",
            "model.cg",
            "--sensitive",
            "Nationality=0,7",
            "--outcome",
            "Visa=1",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        &dir,
        &[
            "audit",
            "--spec",
            "model.cg",
            "--sensitive",
            "Nationality",
            "--outcome",
            "Visa=1",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = audit(&["--spec", "model.cg", "--metrics", "te,bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&dir, &["audit", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        &dir,
        &[
            "generate",
            "--scenario",
            "nope",
            "--n",
            "5",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn effects_and_check_subcommands() {
    let dir = scratch("subcommands");
    generate(&dir, "popularity-mediation", "3000", "4");
    let o = run(
        &dir,
        &[
            "effects",
            "--spec",
            "model.cg",
            "--sensitive",
            "Happy=0,1",
            "--outcome",
            "Popular=1",
            "--metrics",
            "te,nde",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["metrics"].as_array().unwrap().len(), 2);
    assert!(r["checks"].as_array().unwrap().is_empty());

    let o = run(&dir, &["check", "--spec", "model.cg", "--data", "data.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let checks: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let markov = checks
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["assumption"] == "causal-markov")
        .unwrap();
    assert_eq!(markov["status"], "pass");

    let o = run(
        &dir,
        &[
            "generate",
            "--scenario",
            "visa",
            "--n",
            "50",
            "--out",
            "p.csv",
            "--param",
            "p_Age=0.9",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = run(
        &dir,
        &[
            "generate",
            "--scenario",
            "visa",
            "--n",
            "50",
            "--out",
            "p.csv",
            "--param",
            "p_Nope=0.9",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}
