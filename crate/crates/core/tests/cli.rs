use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_packed-forest"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("packed-forest-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn compile_demo(dir: &Path) -> PathBuf {
    let out = dir.join("demo.copse");
    let (code, stdout, _) = run(bin()
        .arg("compile")
        .arg(data("demo.forest"))
        .arg("-o")
        .arg(&out));
    assert_eq!(code, 0);
    assert!(stdout.contains("b=5 d=3 K=3 q=6 p=8"), "{stdout}");
    out
}

#[test]
fn compile_is_byte_stable() {
    let dir = scratch("compile");
    let first = std::fs::read(compile_demo(&dir)).unwrap();
    let second = std::fs::read(compile_demo(&dir)).unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("branching = 5") && text.contains("quantized_branching = 6"));
}

#[test]
fn input_errors_exit_2() {
    let dir = scratch("errors");
    let bad = dir.join("bad.forest");
    std::fs::write(&bad, "labels A B\nbranch 0 3.5 leaf 0\n").unwrap();
    let (code, _, stderr) = run(bin().arg("compile").arg(&bad));
    assert_eq!(code, 2);
    assert!(stderr.contains("2:20"), "{stderr}");

    let empty = dir.join("empty.forest");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(bin().arg("check").arg(&empty)).0, 2);
    assert_eq!(
        run(bin().arg("compile").arg(dir.join("missing.forest"))).0,
        2
    );
    assert_eq!(
        run(bin()
            .arg("compile")
            .arg(data("demo.forest"))
            .args(["--precision", "0"]))
        .0,
        2
    );
}

#[test]
fn infer_demo_in_both_modes() {
    let dir = scratch("infer");
    let model = compile_demo(&dir);
    for mode in ["encrypted", "plaintext"] {
        let (code, stdout, _) = run(bin()
            .arg("infer")
            .arg(&model)
            .arg(data("demo.query"))
            .args(["--mode", mode, "--kdeclared", "4"]));
        assert_eq!(code, 0);
        assert!(stdout.contains("bitvector = \"000010\""), "{stdout}");
        assert!(stdout.contains("plurality = \"L4\""));
        assert!(stdout.contains("[ledger]"));
    }
}

#[test]
fn tight_depth_budget_exits_3() {
    let dir = scratch("budget");
    let model = compile_demo(&dir);
    let (code, _, stderr) = run(bin()
        .arg("infer")
        .arg(&model)
        .arg(data("demo.query"))
        .args(["--max-depth", "1"]));
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn random_check_matches() {
    let (code, stdout, _) = run(bin().args(["check", "--random", "200", "--seed", "7"]));
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "200/200 match");
}

#[test]
fn mutated_manifest_fails_the_check() {
    let dir = scratch("fault");
    let model = compile_demo(&dir);
    let text = std::fs::read_to_string(&model).unwrap();
    assert_eq!(
        run(bin()
            .arg("check")
            .arg(data("demo.forest"))
            .arg("--manifest")
            .arg(&model))
        .0,
        0
    );
    let mutated = dir.join("mutated.copse");
    std::fs::write(&mutated, text.replacen("\"101010\"", "\"101011\"", 1)).unwrap();
    let (code, stdout, _) = run(bin()
        .arg("check")
        .arg(data("demo.forest"))
        .arg("--manifest")
        .arg(&mutated));
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("0/1 match"));
}

#[test]
fn bench_reports_both_ledgers() {
    let (code, stdout, _) =
        run(bin()
            .arg("bench")
            .arg(data("demo.forest"))
            .args(["--baseline", "--reps", "5"]));
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("deterministic: true"));
    assert!(stdout.contains("packed ") && stdout.contains("baseline "));
    assert!(stdout.contains("flag accumulate_mults"));
    let (code, stdout, _) = run(bin().args(["bench", "--micro", "--format", "toml"]));
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("[[trends]]"));
}
