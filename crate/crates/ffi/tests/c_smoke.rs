//! Compiles `smoke.c` against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // the test binary lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libmetaharm_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let header = crate_dir.join("include/metaharm.h");
    assert!(header.exists());

    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap_or_else(|e| panic!("cannot run {cc}: {e}"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let std = dir.path().join("std.csv");
    std::fs::write(&std, metaharm::fixture::marine_litter_csv()).unwrap();
    let run = Command::new(&exe).arg(&std).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("Used Plates\te0001\tMetal\t55\t"), "{stdout}");
    assert!(lines[1].starts_with("straw\te0007\tplastics|soft plastics\t100\t2"), "{stdout}");
    assert!(lines[2].starts_with("zzzz\t"));
    assert_eq!(lines[3], "error: set");
    assert_eq!(lines[4], concat!("version ", env!("CARGO_PKG_VERSION")));
}
