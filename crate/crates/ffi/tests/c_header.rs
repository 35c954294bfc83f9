//! Compiles a small C program against the generated header and, when the static library
//! is present next to the test binary, links and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libhalpern_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = crate_dir().join("include");
    let source = crate_dir().join("tests/c/smoke.c");
    let syntax = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&source)
        .status()
        .unwrap();
    assert!(syntax.success());

    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping link step");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe: &Path = &dir.path().join("smoke");
    let link = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(exe)
        .status()
        .unwrap();
    assert!(link.success());
    let out = Command::new(exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "Exact 36");
}
