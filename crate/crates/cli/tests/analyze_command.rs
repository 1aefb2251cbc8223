use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn dfdtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfdtrace")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn json_only_writes_one_file() {
    let out = tempfile::tempdir().unwrap();
    let o = dfdtrace(&["analyze", "--path", fixture("golden").to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(files(out.path()), ["golden.json"]);
    assert!(stdout(&o).starts_with("golden: 6 nodes, 6 flows from "), "{}", stdout(&o));
}

#[test]
fn all_documents_and_metrics() {
    let run = || {
        let out = tempfile::tempdir().unwrap();
        let o = dfdtrace(&[
            "analyze",
            "--path",
            fixture("piggymetrics").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--format",
            "json,trace,dot",
            "--eval-truth",
            fixture("piggymetrics.truth.json").to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
        assert!(stdout(&o).contains("overall precision 0.9"), "{}", stdout(&o));
        out
    };
    let (a, b) = (run(), run());
    let names = files(a.path());
    assert_eq!(
        names,
        ["piggymetrics.dot", "piggymetrics.json", "piggymetrics_metrics.json", "piggymetrics_traceability.json"]
    );
    for n in &names {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap(), "{n}");
    }
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("piggymetrics_metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["counts"]["services"]["tp"], 14);
    assert_eq!(metrics["counts"]["services"]["fp"], 0);
}

#[test]
fn missing_path_fails() {
    let o = dfdtrace(&["analyze", "--path", "/no/such/app", "--out", "/tmp"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a readable directory"));
}

#[test]
fn bad_repository_url_fails() {
    let out = tempfile::tempdir().unwrap();
    let o = dfdtrace(&["analyze", "--repo-url", "file:///no/such/repo.git", "--out", out.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cloning file:///no/such/repo.git"));
    assert!(files(out.path()).is_empty());
}

#[test]
fn ref_needs_a_repository() {
    let o = dfdtrace(&["analyze", "--path", ".", "--ref", "main"]);
    assert!(!o.status.success());
}

fn git(dir: &Path, args: &[&str]) {
    let s = Command::new("git")
        .args(["-c", "user.name=t", "-c", "user.email=t@t", "-c", "init.defaultBranch=main"])
        .args(args)
        .current_dir(dir)
        .status()
        .unwrap();
    assert!(s.success(), "git {args:?}");
}

fn copy_tree(from: &Path, to: &Path) {
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
            copy_tree(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn clones_a_pinned_ref() {
    let repo = tempfile::tempdir().unwrap();
    let app = repo.path().join("golden");
    std::fs::create_dir(&app).unwrap();
    copy_tree(&fixture("golden"), &app);
    git(&app, &["init", "--quiet"]);
    git(&app, &["add", "."]);
    git(&app, &["commit", "--quiet", "-m", "snapshot"]);
    git(&app, &["tag", "v1"]);

    let cloned = tempfile::tempdir().unwrap();
    let url = format!("file://{}", app.display());
    let o = dfdtrace(&["analyze", "--repo-url", &url, "--ref", "v1", "--out", cloned.path().to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("commit "), "{}", stdout(&o));

    let local = tempfile::tempdir().unwrap();
    let o = dfdtrace(&["analyze", "--path", fixture("golden").to_str().unwrap(), "--out", local.path().to_str().unwrap()]);
    assert!(o.status.success());
    for n in ["golden.json", "golden_traceability.json", "golden.dot"] {
        assert_eq!(std::fs::read(cloned.path().join(n)).unwrap(), std::fs::read(local.path().join(n)).unwrap(), "{n}");
    }
}

#[test]
fn png_without_graphviz_is_not_fatal() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dfdtrace"))
        .args(["analyze", "--path", fixture("golden").to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--format", "png"])
        .env("PATH", "")
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("no PNG written"));
}
