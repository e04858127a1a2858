use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anatomy-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cli")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Phantom sources, bank and anchors, built once through the CLI itself.
struct Inputs {
    dir: TempDir,
}

impl Inputs {
    fn sources(&self) -> PathBuf {
        self.dir.path().join("src")
    }
    fn bank(&self) -> PathBuf {
        self.dir.path().join("bank.bank")
    }
    fn anchors(&self) -> PathBuf {
        self.dir.path().join("anchors.txt")
    }
    fn classes(&self) -> PathBuf {
        self.sources().join("classes.txt")
    }
}

fn inputs() -> &'static Inputs {
    static CELL: OnceLock<Inputs> = OnceLock::new();
    CELL.get_or_init(|| {
        let inp = Inputs { dir: tempfile::tempdir().unwrap() };
        let o = run(&["phantoms", "--out-dir", s(&inp.sources()), "--count", "5", "--dims", "64", "--seed", "3"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&[
            "build-bank", "--sources", s(&inp.sources()), "--classes", s(&inp.classes()), "--out", s(&inp.bank()),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&[
            "fit-anchors", "--sources", s(&inp.sources()), "--classes", s(&inp.classes()), "--out", s(&inp.anchors()),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        inp
    })
}

fn synthesize(out: &Path, extra: &[&str]) -> Output {
    let inp = inputs();
    let (bank, anchors) = (inp.bank(), inp.anchors());
    let mut args = vec!["synthesize", "--bank", s(&bank), "--anchors", s(&anchors), "--out-dir", s(out)];
    args.extend_from_slice(extra);
    run(&args)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn build_bank_reports_32_classes_from_5_subjects() {
    let inp = inputs();
    let out = inp.dir.path().join("again.bank");
    let o = run(&["build-bank", "--sources", s(&inp.sources()), "--classes", s(&inp.classes()), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("32 classes"), "{text}");
    let rows: Vec<Vec<usize>> = text
        .lines()
        .map(|l| l.split_whitespace().map_while(|t| t.parse().ok()).collect::<Vec<usize>>())
        .filter(|r| r.len() == 3)
        .collect();
    assert_eq!(rows.len(), 32, "{text}");
    assert!(rows.iter().all(|r| r[2] >= 1));
    assert!(Path::new(&format!("{}.classes.txt", s(&out))).exists());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(inp.bank()).unwrap());
}

#[test]
fn build_bank_minimal_and_missing_class() {
    let inp = inputs();
    let one = inp.sources().join("phantom_000.nii.gz");
    let out = inp.dir.path().join("min.bank");
    let o = run(&["build-bank", "--sources", s(&one), "--classes", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1 classes"));

    let o = run(&["build-bank", "--sources", s(&one), "--classes", "5,77,90", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("77") && err.contains("90"), "{err}");
}

#[test]
fn synthesize_is_deterministic_and_indexed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = synthesize(out, &["--count", "3", "--seed", "7", "--dims", "48", "--jobs", "2"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("volumes/s"));
    }
    let fa = files(&a);
    assert_eq!(fa.len(), 3 * 3 + 1);
    assert_eq!(fa, files(&b));
    for n in ["img_000002.nii", "lab_000002.nii", "scene_000002.json", "dataset.json"] {
        assert!(fa.iter().any(|(f, _)| f == n), "{n} missing");
    }

    // scene i depends only on (seed, i): a single-job run of 2 scenes matches
    let c = dir.path().join("c");
    let o = synthesize(&c, &["--count", "2", "--seed", "7", "--dims", "48", "--jobs", "1"]);
    assert_eq!(code(&o), 0);
    for (name, bytes) in files(&c) {
        if name != "dataset.json" {
            assert_eq!(&fa.iter().find(|(f, _)| *f == name).unwrap().1, &bytes, "{name}");
        }
    }
}

#[test]
fn jobs_env_var_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let inp = inputs();
    let o = bin()
        .args(["synthesize", "--bank", s(&inp.bank()), "--anchors", s(&inp.anchors())])
        .args(["--out-dir", s(dir.path()), "--count", "1", "--dims", "32"])
        .env("ANATOMY_FORGE_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin()
        .args(["synthesize", "--bank", s(&inp.bank()), "--anchors", s(&inp.anchors())])
        .args(["--out-dir", s(dir.path()), "--count", "1", "--dims", "32"])
        .env("ANATOMY_FORGE_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn small_scenes_are_refused_or_skip_oversized_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let o = synthesize(dir.path(), &["--dims", "16,16,16"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(">= 32"), "{}", stderr(&o));

    // 64³ sources in a 32³ scene at 1.25-1.5x: large organs cannot fit
    let out = dir.path().join("tight");
    let o = synthesize(&out, &["--dims", "32", "--scale-range", "1.25,1.5", "--count", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scene_000000.json")).unwrap()).unwrap();
    let skips = m["skips"].as_array().unwrap();
    assert!(skips.iter().any(|s| s["reason"] == "shape_too_large"), "{skips:?}");
}

#[test]
fn validate_clean_faulty_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&synthesize(&out, &["--count", "2", "--dims", "48", "--seed", "1"])), 0);
    let o = run(&["validate", "--scenes", s(&out)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("exclusion violations: 0"));

    // plant a fault: move a vertebra onto the liver
    let path = out.join("scene_000000.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let placements = m["placements"].as_array_mut().unwrap();
    let liver = placements.iter().position(|p| p["class_id"] == 5).unwrap();
    let bone = placements.iter().position(|p| p["class_id"] == 22).unwrap();
    assert!(liver < bone, "liver is placed before the vertebra");
    let (mask, offset) = (placements[liver]["mask"].clone(), placements[liver]["offset"].clone());
    placements[bone]["mask"] = mask;
    placements[bone]["offset"] = offset;
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let o = run(&["validate", "--scenes", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("class 22 vs 5"), "{}", stdout(&o));

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let o = run(&["validate", "--scenes", s(&empty)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no scene manifests"));
}

#[test]
fn stats_flags_low_n_and_mismatched_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    assert_eq!(code(&synthesize(&out, &["--count", "1", "--dims", "48"])), 0);
    let json = dir.path().join("stats.json");
    let o = run(&["stats", "--scenes", s(&out), "--anchors", s(&inputs().anchors()), "--json", s(&json)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("(n<2)"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["classes"].as_array().unwrap().iter().all(|c| c["low_n"] == true));

    let partial = dir.path().join("partial.txt");
    let text = std::fs::read_to_string(inputs().anchors()).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("32 ")).collect();
    std::fs::write(&partial, kept.join("\n")).unwrap();
    let o = run(&["stats", "--scenes", s(&out), "--anchors", s(&partial)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("warning: class 32"), "{}", stdout(&o));
}

#[test]
fn help_cites_defaults_and_usage_errors_exit_1() {
    let o = run(&["synthesize", "--help"]);
    assert_eq!(code(&o), 0);
    let h = stdout(&o);
    for d in ["[default: 40]", "[default: 0.12]", "[default: 128,128,128]", "0.30", "0.35", "[default: 5]", "0.8"] {
        assert!(h.contains(d), "help lacks {d}:\n{h}");
    }
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["synthesize"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["build-bank", "--sources", "x", "--classes", "0", "--out", "y"])), 1);
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "synthesize", "--bank", "/nonexistent.bank", "--anchors", s(&inputs().anchors()), "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    let garbage = dir.path().join("g.bank");
    std::fs::write(&garbage, b"not a bank").unwrap();
    let o = run(&[
        "synthesize", "--bank", s(&garbage), "--anchors", s(&inputs().anchors()), "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn five_hundred_scenes_at_96_validate_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("big");
    let o = synthesize(&out, &["--count", "500", "--dims", "96", "--seed", "500"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["validate", "--scenes", s(&out), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["scenes"], 500);
    assert_eq!(v["report"]["exclusion_violations"].as_array().unwrap().len(), 0);
    assert!(v["label_mismatches"].as_array().unwrap().is_empty());
}
