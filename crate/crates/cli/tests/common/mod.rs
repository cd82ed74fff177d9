#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const GOLDEN_SEED: &str = "11";

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn liecomm(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_liecomm"))
        .args(args)
        .output()
        .expect("spawn liecomm");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/su2")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// generate, decompose, solve and verify on su(2); returns every output file
/// (verify's stdout as `verify.txt`) keyed by name.
pub fn su2_pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let gen = liecomm(&[
        "generate",
        "--spec",
        "su:2",
        "--seed",
        GOLDEN_SEED,
        "--out",
        s(dir),
    ]);
    assert_eq!(gen.code, 0, "generate: {}", gen.stderr);
    let frame = dir.join("frame.json");
    let dec = liecomm(&[
        "decompose",
        "--spec",
        "su:2",
        "--seed",
        GOLDEN_SEED,
        "--out",
        s(&frame),
    ]);
    assert_eq!(dec.code, 0, "decompose: {}", dec.stderr);
    let (a, b) = (dir.join("A.json"), dir.join("B.json"));
    let solve = liecomm(&[
        "solve",
        "--spec",
        "su:2",
        "--seed",
        GOLDEN_SEED,
        "--a",
        s(&a),
        "--b",
        s(&b),
        "--out",
        s(dir),
    ]);
    assert_eq!(solve.code, 0, "solve: {}", solve.stderr);
    let cert = dir.join("certificate.json");
    let verify = liecomm(&[
        "verify",
        "--certificate",
        s(&cert),
        "--a",
        s(&a),
        "--b",
        s(&b),
    ]);
    assert_eq!(verify.code, 0, "verify: {}", verify.stdout);
    fs::write(dir.join("verify.txt"), &verify.stdout).unwrap();

    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, fs::read(&path).unwrap());
    }
    files
}

/// Compares against the checked-in golden files; `LIECOMM_BLESS=1` rewrites them.
pub fn golden_mismatches(files: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let dir = golden_dir();
    if std::env::var_os("LIECOMM_BLESS").is_some() {
        fs::create_dir_all(&dir).unwrap();
        for (name, bytes) in files {
            fs::write(dir.join(name), bytes).unwrap();
        }
    }
    let mut bad = Vec::new();
    for (name, bytes) in files {
        match fs::read(dir.join(name)) {
            Ok(expected) if &expected == bytes => {}
            _ => bad.push(name.clone()),
        }
    }
    bad
}
