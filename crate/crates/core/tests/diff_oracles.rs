mod common;

use std::fs;
use std::process::Command;

use common::fixtures_dir;
use warp_core::diff::{apply_diff, parse_unified_diff, render_diff};

fn patch_with_gnu(source: &str, diff_text: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("main.c");
    fs::write(&file, source).unwrap();
    let out = Command::new("patch")
        .args(["--quiet", "--forward", "--fuzz=0", "-p1", "-i", "-"])
        .current_dir(dir.path())
        .stdin(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut child| {
            use std::io::Write;
            child.stdin.take().unwrap().write_all(diff_text.as_bytes())?;
            child.wait_with_output()
        })
        .unwrap();
    assert!(out.status.success(), "patch failed");
    fs::read_to_string(file).unwrap()
}

#[test]
fn semicolon_fix_agrees_with_gnu_patch() {
    let source = fs::read_to_string(fixtures_dir().join("diff/semicolon.c")).unwrap();
    let text = fs::read_to_string(fixtures_dir().join("diff/semicolon.diff")).unwrap();
    let diff = parse_unified_diff(&text).unwrap();
    let h = &diff.hunks[0];
    assert_eq!((diff.hunks.len(), h.old_len, h.new_len), (1, 1, 1));
    assert_eq!(apply_diff(&source, &diff).unwrap(), patch_with_gnu(&source, &text));
}

#[test]
fn patched_semicolon_fixture_compiles() {
    let source = fs::read_to_string(fixtures_dir().join("diff/semicolon.c")).unwrap();
    let diff = parse_unified_diff(&fs::read_to_string(fixtures_dir().join("diff/semicolon.diff")).unwrap()).unwrap();
    let fixed = apply_diff(&source, &diff).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("main.c"), &fixed).unwrap();
    let status = Command::new("gcc")
        .args(["-fsyntax-only", "main.c"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn rendered_diffs_accepted_by_gnu_patch() {
    let before = "#include <stdio.h>\nint main(void)\n{\n    int a = 1\n    printf(\"%d\\n\", a);\n    return 0;\n}\n";
    let after = "#include <stdio.h>\n\nint main(void)\n{\n    int a = 1;\n    printf(\"%d\\n\", a);\n}\n";
    let diff = render_diff(before, after, "main.c");
    assert_eq!(patch_with_gnu(before, &diff.to_string()), after);
}
