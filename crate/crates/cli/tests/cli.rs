use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn varseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varseq"))
        .args(args)
        .current_dir(root())
        .env_remove("VARSEQ_FORMAT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Symbolic commands whose output is pinned byte for byte.
const GOLDEN: &[(&str, &str, &str)] = &[
    ("el", "wave", "text"),
    ("el", "maxwell", "text"),
    ("el", "sphere", "latex"),
    ("momenta", "quadratic", "text"),
    ("noether", "pendulum", "text"),
    ("noether", "wave", "text"),
    ("noether", "proca", "text"),
    ("secondvar", "quadratic", "text"),
    ("jacobi", "sphere", "text"),
    ("bianchi", "maxwell", "json"),
    ("bianchi", "proca", "text"),
    ("bianchi", "metric", "text"),
    ("hamiltonian", "maxwell", "text"),
];

fn golden_path(cmd: &str, file: &str, format: &str) -> PathBuf {
    let ext = match format {
        "json" => "json",
        "latex" => "tex",
        _ => "txt",
    };
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{cmd}-{file}.{ext}"))
}

#[test]
fn outputs_match_golden_files() {
    let update = std::env::var_os("VARSEQ_UPDATE_GOLDEN").is_some();
    for &(cmd, file, format) in GOLDEN {
        let path = format!("corpus/{file}.vp");
        let out = stdout(&varseq(&[cmd, &path, "--format", format]));
        let golden = golden_path(cmd, file, format);
        if update {
            std::fs::write(&golden, &out).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&golden).unwrap_or_else(|_| panic!("missing {}", golden.display()));
        assert_eq!(out, want, "{cmd} {file} --format {format}");
    }
}

#[test]
fn output_is_deterministic() {
    for cmd in ["verify", "jacobi", "hamiltonian"] {
        for file in ["maxwell", "sphere"] {
            let path = format!("corpus/{file}.vp");
            let a = varseq(&[cmd, &path]);
            let b = varseq(&[cmd, &path]);
            assert_eq!(a.stdout, b.stdout, "{cmd} {file}");
            assert_eq!(a.status.code(), b.status.code());
        }
    }
}

#[test]
fn el_on_wave() {
    let o = varseq(&["el", "corpus/wave.vp"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("E_u = u_{xx} - u_{tt}"));
}

#[test]
fn bianchi_on_maxwell_reports_vanishing_in_json() {
    let o = varseq(&["bianchi", "corpus/maxwell.vp", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("\"schema\": \"varseq-report/v1\""));
    assert!(text.contains("\"label\": \"beta[eps] = 0\",\n          \"passed\": true"), "{text}");
}

#[test]
fn bianchi_on_proca_fails_with_beta_printed() {
    let o = varseq(&["bianchi", "corpus/proca.vp"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("beta[eps] = -A1[1,0] - A2[0,1]"), "{text}");
    assert!(text.contains("[FAIL] beta[eps] = 0"));
}

#[test]
fn hamiltonian_on_proca_is_rejected() {
    let o = varseq(&["hamiltonian", "corpus/proca.vp"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Bianchi"));
}

#[test]
fn verify_passes_on_the_whole_corpus() {
    for entry in std::fs::read_dir(root().join("corpus")).unwrap() {
        let path = entry.unwrap().path();
        let rel = format!("corpus/{}", path.file_name().unwrap().to_string_lossy());
        let o = varseq(&["verify", &rel]);
        assert_eq!(o.status.code(), Some(0), "{rel}:\n{}", stdout(&o));
    }
}

#[test]
fn exit_codes_follow_the_documented_mapping() {
    let dir = std::env::temp_dir().join(format!("varseq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    };
    let bad = write("bad.vp", "[bundle]\nbase = x\nfields = u\norder = 1\n[lagrangian]\nu_x^2 + w\n");
    let o = varseq(&["el", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undeclared name `w`"));

    let deep = write("deep.vp", "[bundle]\nbase = x\nfields = u\norder = 2\n[lagrangian]\nu_xx^2\n");
    assert_eq!(varseq(&["el", &deep]).status.code(), Some(0));
    assert_eq!(varseq(&["el", &deep, "--max-order", "3"]).status.code(), Some(3));

    let no_bg = write("nobg.vp", "[bundle]\nbase = x\nfields = u\norder = 1\n[lagrangian]\nu_x^2\n");
    assert_eq!(varseq(&["hamiltonian", &no_bg]).status.code(), Some(0));
    assert_eq!(varseq(&["el", "corpus/does-not-exist.vp"]).status.code(), Some(4));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn format_defaults_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_varseq"))
        .args(["el", "corpus/wave.vp"])
        .current_dir(root())
        .env("VARSEQ_FORMAT", "json")
        .output()
        .unwrap();
    assert!(stdout(&o).starts_with('{'));
    let o = varseq(&["el", "corpus/wave.vp", "--format", "latex"]);
    assert!(stdout(&o).starts_with("% varseq el"));
}
