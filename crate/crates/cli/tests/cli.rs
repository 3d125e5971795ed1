//! End-to-end runs of the `arabi` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn arabi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arabi")).args(args).output().expect("spawn arabi")
}

fn ok(args: &[&str]) -> String {
    let o = arabi(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn data_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_lambda05.csv")
}

/// Header `# section k=v ...` lines and the CSV body as column → values.
struct Csv {
    header: Vec<(String, Vec<(String, String)>)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Csv {
        let mut header = vec![];
        let mut lines = text.lines().peekable();
        while let Some(l) = lines.peek() {
            let Some(rest) = l.strip_prefix("# ") else { break };
            let mut it = rest.split(' ');
            let section = it.next().unwrap().to_string();
            let kv = it
                .map(|t| {
                    let (k, v) = t.split_once('=').unwrap_or_else(|| panic!("bad header token `{t}`"));
                    (k.to_string(), v.to_string())
                })
                .collect();
            header.push((section, kv));
            lines.next();
        }
        let columns = lines.next().expect("column line").split(',').map(str::to_string).collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Csv { header, columns, rows }
    }

    fn meta(&self, section: &str, key: &str) -> Option<&str> {
        self.header
            .iter()
            .filter(|(s, _)| s == section)
            .flat_map(|(_, kv)| kv.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn col(&self, name: &str) -> usize {
        self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    fn num(&self, row: usize, name: &str) -> f64 {
        self.rows[row][self.col(name)].parse().unwrap()
    }
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in `{line}`"))
        .parse()
        .unwrap()
}

#[test]
fn crossing_prints_closed_form() {
    let out = ok(&["crossing", "--delta", "0.4", "--lambda", "0.5", "--verify"]);
    assert!(out.starts_with("g_c=1.0327955589"), "{out}");
    assert!((field(&out, "g_c") - 4.0 / 15f64.sqrt()).abs() < 1e-15);
    assert!((field(&out, "E") + 2.0 / 3.0).abs() < 1e-15);
    assert!(field(&out, "oracle_gap") < 1e-8);
}

#[test]
fn crossing_rejects_isotropic() {
    let o = arabi(&["crossing", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gscan_reports_pole_positions() {
    let out = ok(&["gscan", "--g", "0.7", "--lambda", "0.5", "--sweep", "x:-1:6:141"]);
    let csv = Csv::parse(&out);
    assert_eq!(csv.meta("arabi", "command"), Some("gscan"));
    assert_eq!(csv.meta("params", "g"), Some("0.69999999999999996"));
    let poles: Vec<f64> = csv.meta("poles", "x").unwrap().split(';').map(|v| v.parse().unwrap()).collect();
    for n in 0..=5 {
        let want = n as f64 - 0.06125;
        assert!(poles.iter().any(|p| (p - want).abs() < 5e-4), "no pole near {want}: {poles:?}");
    }
    assert_eq!(csv.columns, ["x", "re_G", "im_G", "sector", "near_pole"]);
    assert_eq!(csv.rows.len(), 2 * 141);
}

#[test]
fn gscan_zeros_sit_on_oracle_levels() {
    let base = ["--g", "0.1", "--lambda", "0.5", "--delta", "0.4", "--epsilon", "0.2", "--theta", "-pi/2"];
    let mut args = vec!["oracle", "--levels", "4"];
    args.extend(base);
    let o = Csv::parse(&ok(&args));
    let shift = 0.5 * 0.1 * 0.1;
    for i in 0..4 {
        let x = o.num(i, "energy") + shift;
        let (xs, xf) = (x.to_string(), (x + 0.05).to_string());
        let sweep = format!("x:{xs}:{xf}:2");
        let mut a = vec!["gscan", "--sweep", &sweep];
        a.extend(base);
        let g = Csv::parse(&ok(&a));
        let m = |r: usize| g.num(r, "re_G").hypot(g.num(r, "im_G"));
        assert!(m(0) < 1e-6 * m(1), "|G| at level {i}: {} vs {}", m(0), m(1));
    }
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["gscan", "--sweep", "x:0:1:1"][..],
        &["gscan", "--x-min", "2", "--x-max", "1"],
        &["spectrum", "--sweep", "g:0:1:1"],
        &["spectrum", "--sweep", "bogus:0:1:3"],
        &["spectrum", "--omega", "-1"],
        &["gscan", "--epsilon", "0.2", "--sector", "plus"],
        &["fit", "--data", "/nonexistent/file.csv"],
        &["nosuchcommand"],
    ] {
        let o = arabi(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(arabi(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_failure_exits_2() {
    // far too small a cutoff for g = 2: the state's Fock tail is not negligible
    let o = arabi(&["entropy", "--g", "2", "--nmax", "10"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn broken_symmetry_sweep_matches_oracle_without_degeneracies() {
    let out = ok(&[
        "spectrum", "--delta", "0.4", "--epsilon", "0.2", "--lambda", "0.5", "--theta", "-pi/2", "--sweep",
        "g:0.1:1:4", "--levels", "6", "--method", "oracle",
    ]);
    let csv = Csv::parse(&out);
    let worst: f64 = csv.meta("summary", "max_abs_diff").unwrap().parse().unwrap();
    assert!(worst < 1e-7, "max |ΔE| = {worst}");
    assert_eq!(csv.meta("summary", "flagged"), Some("0"));
    let (gi, ei) = (csv.col("g"), csv.col("energy"));
    for w in csv.rows.windows(2) {
        if w[0][gi] == w[1][gi] {
            let (a, b): (f64, f64) = (w[0][ei].parse().unwrap(), w[1][ei].parse().unwrap());
            assert!(b - a > 1e-6, "degenerate levels {a} {b}");
        }
    }
    assert!(csv.rows.iter().all(|r| r[csv.col("degeneracy")] == "1"));
}

#[test]
fn crossing_row_in_symmetric_spectrum() {
    let out = ok(&["spectrum", "--delta", "0.4", "--lambda", "0.5", "--g", "1.0327955589886444", "--levels", "2"]);
    let csv = Csv::parse(&out);
    assert_eq!(csv.rows[0][csv.col("kind")], "exceptional");
    assert_eq!(csv.rows[0][csv.col("degeneracy")], "2");
    assert!((csv.num(0, "energy") + 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn entropy_jumps_across_the_crossing() {
    let out = ok(&["entropy", "--delta", "0.4", "--lambda", "0.5", "--sweep", "g:1.02:1.05:4"]);
    let csv = Csv::parse(&out);
    let s: Vec<f64> = (0..csv.rows.len()).map(|i| csv.num(i, "entropy")).collect();
    let p: Vec<f64> = (0..csv.rows.len()).map(|i| csv.num(i, "parity")).collect();
    let jump = s.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(jump > 0.1, "entropies {s:?}");
    assert!(p[0] > 0.999 && p[p.len() - 1] < -0.999, "parities {p:?}");
    assert!(s.iter().all(|v| (0.0..=std::f64::consts::LN_2 + 1e-15).contains(v)));
}

#[test]
fn fit_recovers_lambda_from_shipped_data() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("fit.json");
    let line = ok(&["fit", "--data", data_file().to_str().unwrap(), "--out", report.to_str().unwrap(), "--format", "json"]);
    let l = field(&line, "lambda_hat");
    assert!((0.48..=0.52).contains(&l), "{line}");
    assert!(field(&line, "rss_0.5") < field(&line, "rss_0").min(field(&line, "rss_1")));
    assert_eq!(field(&line, "sigma_z_change"), 0.0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["meta"]["arabi"]["command"], "fit");
    assert_eq!(v["rows"].as_array().unwrap().len(), 726);
    assert_eq!(v["rss_grid"].as_array().unwrap().len(), 101);
}

#[test]
fn synth_reproduces_shipped_dataset() {
    let out = ok(&["synth", "--lambda-true", "0.5", "--seed", "20240501"]);
    let shipped = std::fs::read_to_string(data_file()).unwrap();
    assert_eq!(out, shipped);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        ok(&["spectrum", "--sweep", "g:0.2:0.8:3", "--levels", "4", "--out", p.to_str().unwrap()]);
        std::fs::read(p).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn headers_carry_parameters_and_version() {
    let out = ok(&["oracle", "--g", "0.25", "--lambda", "0.75", "--theta", "0.5", "--levels", "3", "--nmax", "30"]);
    let csv = Csv::parse(&out);
    assert_eq!(csv.meta("arabi", "version"), Some(env!("CARGO_PKG_VERSION")));
    assert_eq!(csv.meta("arabi", "command"), Some("oracle"));
    let g: f64 = csv.meta("params", "g").unwrap().parse().unwrap();
    let l: f64 = csv.meta("params", "lambda").unwrap().parse().unwrap();
    assert_eq!((g, l), (0.25, 0.75));
    assert_eq!(csv.meta("oracle", "nmax"), Some("30"));
    assert_eq!(csv.rows.len(), 3);
    let h: f64 = csv.meta("summary", "hermiticity").unwrap().parse().unwrap();
    assert!(h < 1e-14);
}

#[test]
fn json_format_is_structured() {
    let out = ok(&["spectrum", "--levels", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["meta"]["params"]["lambda"], "0.5");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["energy"].as_f64().unwrap() < rows[1]["energy"].as_f64().unwrap());
    assert_eq!(rows[0]["sector"], "plus");
}
