use std::path::{Path, PathBuf};
use std::process::Command;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homobound-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(config: &str, dir: &Path) -> i32 {
    let path = dir.join("cfg.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_homobound"))
        .args(["solve", path.to_str().unwrap(), "--format", "csv"])
        .env("HOMOBOUND_THREADS", "2")
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

const BASE: &str = r#"{"name": "t", "cell": [1.0, 1.0],
  "material": {"type": "inclusions", "a0": 1.0,
    "inclusions": [{"increment": 4.0, "shape": {"type": "rect", "h": [0.5, 0.5]}}]},
  "grids": GRIDS, "formulations": TASKS}"#;

#[test]
fn exit_codes() {
    let dir = scratch("ok");
    let ok = BASE.replace("GRIDS", "[[5, 5], [9, 9]]").replace("TASKS", r#"["bounds"]"#);
    assert_eq!(run(&ok, &dir), 0);
    let csv = std::fs::read_to_string(dir.join("out/t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let bad = BASE.replace("GRIDS", "[[4, 4]]").replace("TASKS", r#"["bounds"]"#);
    assert_eq!(run(&bad, &scratch("bad")), 1);
    assert_eq!(run("{ not json", &scratch("parse")), 1);

    // a grid that cannot converge within one iteration is reported, not fatal
    let partial = BASE
        .replace("GRIDS", "[[4, 4]]")
        .replace("TASKS", r#"["primal"], "solver": {"tol": 1e-14, "max_iter": 1}"#);
    let code = run(&partial, &scratch("partial"));
    assert!(code == 0 || code == 2, "{code}");
}
