//! End-to-end checks of the command-line surface: exit codes, output
//! formats, determinism, and the anytime parse-back contract.

use std::io::Write;
use std::process::{Command, Output};

use qbounds::network::parse_network;
use qbounds::{brute_force_posterior, cdf_from_pmf, detect_sign, BoundsTrace, Evidence};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qbounds"))
}

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const FAN: &str = r#"{
  "variables": [
    {"name": "E", "states": ["e0", "e1"]},
    {"name": "A", "states": ["a0", "a1", "a2", "a3"]},
    {"name": "Y1", "states": ["y0", "y1"]},
    {"name": "Y2", "states": ["y0", "y1"]},
    {"name": "Z", "states": ["z0", "z1"]}
  ],
  "arcs": [
    {"from": "E", "to": "A"},
    {"from": "A", "to": "Y1", "sign": "+"},
    {"from": "A", "to": "Y2", "sign": "-"},
    {"from": "Y1", "to": "Z", "sign": "+"},
    {"from": "Y2", "to": "Z", "sign": "-"}
  ],
  "cpts": [
    {"child": "E", "parents": [], "rows": [{"given": [], "p": [0.5, 0.5]}]},
    {"child": "A", "parents": ["E"], "rows": [
      {"given": [0], "p": [0.1, 0.2, 0.3, 0.4]},
      {"given": [1], "p": [0.4, 0.3, 0.2, 0.1]}
    ]},
    {"child": "Y1", "parents": ["A"], "rows": [
      {"given": [0], "p": [0.9, 0.1]},
      {"given": [1], "p": [0.7, 0.3]},
      {"given": [2], "p": [0.4, 0.6]},
      {"given": [3], "p": [0.2, 0.8]}
    ]},
    {"child": "Y2", "parents": ["A"], "rows": [
      {"given": [0], "p": [0.2, 0.8]},
      {"given": [1], "p": [0.4, 0.6]},
      {"given": [2], "p": [0.6, 0.4]},
      {"given": [3], "p": [0.9, 0.1]}
    ]},
    {"child": "Z", "parents": ["Y1", "Y2"], "rows": [
      {"given": [0, 0], "p": [0.6, 0.4]},
      {"given": [0, 1], "p": [0.9, 0.1]},
      {"given": [1, 0], "p": [0.2, 0.8]},
      {"given": [1, 1], "p": [0.5, 0.5]}
    ]}
  ]
}"#;

const CYCLIC: &str = r#"{
  "variables": [
    {"name": "A", "states": ["0", "1"]},
    {"name": "B", "states": ["0", "1"]}
  ],
  "arcs": [{"from": "A", "to": "B"}, {"from": "B", "to": "A"}],
  "cpts": [
    {"child": "A", "parents": ["B"], "rows": [
      {"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}
    ]},
    {"child": "B", "parents": ["A"], "rows": [
      {"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}
    ]}
  ]
}"#;

#[test]
fn validate_exit_codes() {
    let good = write_temp(FAN);
    let out = run(&["validate", "--network", good.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stdout: {}", stdout_of(&out));

    let bad = write_temp(CYCLIC);
    let out = run(&["validate", "--network", bad.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("cycle"));
}

#[test]
fn usage_errors_exit_64_and_help_exits_0() {
    let out = run(&["bound", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(64));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let net = write_temp(FAN);
    let out = run(&[
        "bound",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "garbage",
    ]);
    assert_eq!(out.status.code(), Some(64));
    let out = run(&[
        "bound",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
        "--tolerance",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn impossible_evidence_exits_2() {
    let text = r#"{
      "variables": [
        {"name": "X", "states": ["0", "1"]},
        {"name": "Z", "states": ["0", "1"]}
      ],
      "arcs": [{"from": "X", "to": "Z"}],
      "cpts": [
        {"child": "X", "parents": [], "rows": [{"given": [], "p": [1.0, 0.0]}]},
        {"child": "Z", "parents": ["X"], "rows": [
          {"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}
        ]}
      ]
    }"#;
    let net = write_temp(text);
    let out = run(&[
        "bound",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "X=1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_supermodular_utility_exits_3_with_witness() {
    let net = write_temp(FAN);
    let utility = write_temp(
        r#"{
          "decisions": [1.0, 2.0],
          "outcomes": [1.0, 2.0],
          "values": [[0.0, -1.0], [-1.0, -5.0]]
        }"#,
    );
    let out = run(&[
        "decide",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
        "--utility",
        utility.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not supermodular"), "stderr: {err}");
}

#[test]
fn unknown_query_variable_exits_1() {
    let net = write_temp(FAN);
    let out = run(&[
        "query",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Q",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_is_deterministic_and_validates() {
    let a = run(&["generate", "--seed", "12", "--nodes", "6"]);
    let b = run(&["generate", "--seed", "12", "--nodes", "6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let file = write_temp(&stdout_of(&a));
    let out = run(&["validate", "--network", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn generate_full_monotone_fraction_signs_every_arc() {
    let out = run(&[
        "generate",
        "--seed",
        "5",
        "--nodes",
        "6",
        "--monotone-fraction",
        "1.0",
    ]);
    let net = parse_network(&stdout_of(&out)).unwrap();
    assert!(!net.arcs().is_empty());
    for arc in net.arcs() {
        let declared = arc.sign.expect("all arcs are flagged at fraction 1.0");
        assert_eq!(detect_sign(net.cpt(arc.to), arc.from).unwrap(), declared);
    }
}

#[test]
fn bound_stream_parses_back_with_valid_invariants() {
    let net_file = write_temp(FAN);
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=e0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = BoundsTrace::from_ndjson(&stdout_of(&out)).unwrap();
    assert_eq!(trace.query, "Z");
    assert_eq!(trace.abstracted, vec!["A"]);
    assert!(trace.converged);

    let net = parse_network(FAN).unwrap();
    let z = net.var_id("Z").unwrap();
    let e = Evidence::from_pairs([(net.var_id("E").unwrap(), 0)]);
    let exact = cdf_from_pmf(&brute_force_posterior(&net, z, &e).unwrap());
    for it in &trace.iterations {
        for i in 0..exact.len() {
            assert!(it.lower.values()[i] <= exact.values()[i] + 1e-9);
            assert!(exact.values()[i] <= it.upper.values()[i] + 1e-9);
        }
    }
}

#[test]
fn bound_max_iterations_one_emits_single_bracketing_row() {
    let net_file = write_temp(FAN);
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=e0",
        "--max-iterations",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = BoundsTrace::from_ndjson(&stdout_of(&out)).unwrap();
    assert_eq!(trace.iterations.len(), 1);
    assert!(!trace.converged);
    let it = &trace.iterations[0];
    for i in 0..it.lower.len() {
        assert!(it.lower.values()[i] <= it.upper.values()[i] + 1e-9);
    }
}

#[test]
fn bound_exact_fallback_is_flagged() {
    // Z's only parent arc is ambiguous and the evidence hangs below Z,
    // so nothing is eligible.
    let text = r#"{
      "variables": [
        {"name": "Y", "states": ["y0", "y1", "y2"]},
        {"name": "Z", "states": ["0", "1"]},
        {"name": "E", "states": ["0", "1"]}
      ],
      "arcs": [{"from": "Y", "to": "Z"}, {"from": "Z", "to": "E"}],
      "cpts": [
        {"child": "Y", "parents": [], "rows": [{"given": [], "p": [0.3, 0.4, 0.3]}]},
        {"child": "Z", "parents": ["Y"], "rows": [
          {"given": [0], "p": [0.8, 0.2]},
          {"given": [1], "p": [0.1, 0.9]},
          {"given": [2], "p": [0.5, 0.5]}
        ]},
        {"child": "E", "parents": ["Z"], "rows": [
          {"given": [0], "p": [0.5, 0.5]},
          {"given": [1], "p": [0.4, 0.6]}
        ]}
      ]
    }"#;
    let net_file = write_temp(text);
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text_out = stdout_of(&out);
    let trace = BoundsTrace::from_ndjson(&text_out).unwrap();
    assert!(trace.exact_fallback());
    assert_eq!(trace.iterations.len(), 1);
    let summary_line = text_out.lines().last().unwrap();
    assert!(
        summary_line.contains("\"exact_fallback\":true"),
        "{summary_line}"
    );
}

#[test]
fn bound_csv_has_expected_shape() {
    let net_file = write_temp(FAN);
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,bound,state_index,cdf_value,wall_ms"
    );
    let data: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .collect();
    // Two bounds times two states per iteration.
    assert_eq!(data.len() % 4, 0);
    assert!(text.lines().any(|l| l.starts_with("# summary:")));
}

#[test]
fn bound_values_attach_expected_value_interval() {
    let net_file = write_temp(FAN);
    let values = write_temp("[0.0, 1.0]");
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--values",
        values.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let ev = summary["expected_value"].as_array().unwrap();
    assert!(ev[0].as_f64().unwrap() <= ev[1].as_f64().unwrap() + 1e-12);
}

#[test]
fn decide_emits_nested_decision_ranges() {
    let net_file = write_temp(FAN);
    // Z is binary: a 2-point grid with the squared-error utility.
    let utility = write_temp(
        r#"{
          "decisions": [0.0, 1.0],
          "outcomes": [0.0, 1.0],
          "values": [[0.0, -1.0], [-1.0, 0.0]]
        }"#,
    );
    let out = run(&[
        "decide",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=e0",
        "--utility",
        utility.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout_of(&out);
    let mut prev: Option<(usize, usize)> = None;
    for line in text.lines() {
        let doc: serde_json::Value = serde_json::from_str(line).unwrap();
        let Some(adm) = doc.get("admissible") else {
            continue;
        };
        let lo = adm["lo"].as_u64().unwrap() as usize;
        let hi = adm["hi"].as_u64().unwrap() as usize;
        if let Some((plo, phi)) = prev {
            assert!(lo >= plo && hi <= phi, "ranges must shrink");
        }
        prev = Some((lo, hi));
    }
    assert!(prev.is_some());
}

#[test]
fn signs_reports_arcs_and_eligibility_on_chain() {
    let text = r#"{
      "variables": [
        {"name": "X", "states": ["false", "true"]},
        {"name": "Y", "states": ["false", "true"]},
        {"name": "Z", "states": ["false", "true"]}
      ],
      "arcs": [{"from": "X", "to": "Y"}, {"from": "Y", "to": "Z", "sign": "+"}],
      "cpts": [
        {"child": "X", "parents": [], "rows": [{"given": [], "p": [0.6, 0.4]}]},
        {"child": "Y", "parents": ["X"], "rows": [
          {"given": [0], "p": [0.7, 0.3]}, {"given": [1], "p": [0.2, 0.8]}
        ]},
        {"child": "Z", "parents": ["Y"], "rows": [
          {"given": [0], "p": [0.9, 0.1]}, {"given": [1], "p": [0.3, 0.7]}
        ]}
      ]
    }"#;
    let net = write_temp(text);
    let out = run(&[
        "signs",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "X=true",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let yz = doc["arcs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["from"] == "Y" && a["to"] == "Z")
        .unwrap();
    assert_eq!(yz["sign"], "+");
    assert_eq!(yz["n"], 1);
    // X is evidence; the remaining candidate on the chain is Y via the
    // parent route.
    let y_node = doc["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["node"] == "Y")
        .unwrap();
    assert_eq!(y_node["eligible"], true);
    assert_eq!(y_node["theorem"], "T2");
}

#[test]
fn signs_reports_zero_on_uniform_cpts() {
    let text = r#"{
      "variables": [
        {"name": "X", "states": ["0", "1"]},
        {"name": "Y", "states": ["0", "1"]}
      ],
      "arcs": [{"from": "X", "to": "Y"}],
      "cpts": [
        {"child": "X", "parents": [], "rows": [{"given": [], "p": [0.5, 0.5]}]},
        {"child": "Y", "parents": ["X"], "rows": [
          {"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}
        ]}
      ]
    }"#;
    let net = write_temp(text);
    let out = run(&["signs", "--network", net.path().to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    for arc in doc["arcs"].as_array().unwrap() {
        assert_eq!(arc["sign"], "0");
    }
}

#[test]
fn signs_annotates_numeric_fallback_on_mixed_paths() {
    // Y reaches Z through a strong positive leg and a weak negative one:
    // the path algebra is ambiguous and numeric verification decides.
    let text = r#"{
      "variables": [
        {"name": "E", "states": ["0", "1"]},
        {"name": "Y", "states": ["0", "1"]},
        {"name": "P1", "states": ["0", "1"]},
        {"name": "P2", "states": ["0", "1"]},
        {"name": "Z", "states": ["0", "1"]}
      ],
      "arcs": [
        {"from": "E", "to": "Y"},
        {"from": "Y", "to": "P1"},
        {"from": "Y", "to": "P2"},
        {"from": "P1", "to": "Z"},
        {"from": "P2", "to": "Z"}
      ],
      "cpts": [
        {"child": "E", "parents": [], "rows": [{"given": [], "p": [0.5, 0.5]}]},
        {"child": "Y", "parents": ["E"], "rows": [
          {"given": [0], "p": [0.6, 0.4]}, {"given": [1], "p": [0.3, 0.7]}
        ]},
        {"child": "P1", "parents": ["Y"], "rows": [
          {"given": [0], "p": [0.9, 0.1]}, {"given": [1], "p": [0.1, 0.9]}
        ]},
        {"child": "P2", "parents": ["Y"], "rows": [
          {"given": [0], "p": [0.55, 0.45]}, {"given": [1], "p": [0.45, 0.55]}
        ]},
        {"child": "Z", "parents": ["P1", "P2"], "rows": [
          {"given": [0, 0], "p": [0.85, 0.15]},
          {"given": [0, 1], "p": [0.9, 0.1]},
          {"given": [1, 0], "p": [0.25, 0.75]},
          {"given": [1, 1], "p": [0.3, 0.7]}
        ]}
      ]
    }"#;
    let net = write_temp(text);
    let out = run(&[
        "signs",
        "--network",
        net.path().to_str().unwrap(),
        "--query",
        "Z",
    ]);
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let e_node = doc["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["node"] == "E")
        .unwrap();
    assert_eq!(e_node["eligible"], true);
    let child = &e_node["children"].as_array().unwrap()[0];
    assert_eq!(child["child"], "Y");
    assert_eq!(child["sign"], "+");
    assert_eq!(child["method"], "numeric-verification");
}

#[test]
fn bound_deadline_cuts_the_run_short() {
    let net_file = write_temp(FAN);
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--deadline-ms",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = BoundsTrace::from_ndjson(&stdout_of(&out)).unwrap();
    // The deadline is checked after each evaluation, so exactly the
    // anytime minimum of one iteration lands in the trace.
    assert_eq!(trace.iterations.len(), 1);
    assert!(!trace.converged);
}

#[test]
fn query_matches_library_inference() {
    let net_file = write_temp(FAN);
    let out = run(&[
        "query",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=e1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let net = parse_network(FAN).unwrap();
    let z = net.var_id("Z").unwrap();
    let e = Evidence::from_pairs([(net.var_id("E").unwrap(), 1)]);
    let expect = brute_force_posterior(&net, z, &e).unwrap();
    let got: Vec<f64> = doc["pmf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (a, b) in got.iter().zip(expect.values()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn bound_accepts_plan_override() {
    let net_file = write_temp(FAN);
    // Parent-route plan abstracting Y1 toward a lower bound.
    let plan = write_temp(
        r#"{
          "target": "lower",
          "entries": [{
            "node": "Y1",
            "blocks": [[0, 1]],
            "directions": {"Z": "strengthen"},
            "theorem": "T2"
          }]
        }"#,
    );
    let out = run(&[
        "bound",
        "--network",
        net_file.path().to_str().unwrap(),
        "--query",
        "Z",
        "--evidence",
        "E=e0",
        "--plan",
        plan.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = BoundsTrace::from_ndjson(&stdout_of(&out)).unwrap();
    assert_eq!(trace.abstracted, vec!["Y1"]);
}
