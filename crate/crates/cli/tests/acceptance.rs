//! Acceptance gate: one line per criterion, then a hard failure if any
//! criterion did not pass. Tolerances are pinned here.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varseq_core::commands::{run_command, Options};
use varseq_core::dsl::{self, parse_problem, print_problem, Problem};
use varseq_core::jacobi::{linearize_el, second_variation, verify_comparison_theorem, vertical_part};
use varseq_core::noether::{bianchi_decompose, check_symmetry, hamiltonian_current, noether_current};
use varseq_core::oracle::{fd_gradient_check, GridSection};
use varseq_core::report::Item;
use varseq_core::variational::{euler_operator, first_variation, integrate_by_parts, Bank};
use varseq_core::{random, BundleSpec, Error, Expr, MultiIndex};

const SEED: u64 = 0x5eed_2026;
const IDENTITY_CASES: usize = 120;
const NULL_CASES: usize = 100;
const GRADIENT_REL_FIRST_ORDER: f64 = 1e-5;
const GRADIENT_REL_HIGHER_ORDER: f64 = 1e-4;
const MAX_NODES_PER_DIRECTION: usize = 256;
const CONJUGATE_POINT_TOL: f64 = 1e-6;

const CORPUS: &[&str] =
    &["quadratic", "biharmonic", "wave", "pendulum", "potential", "maxwell", "proca", "sphere", "metric", "null"];
const GRADIENT_CORPUS: &[&str] = &["quadratic", "biharmonic", "wave", "pendulum", "maxwell", "sphere"];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn source(name: &str) -> String {
    std::fs::read_to_string(root().join("corpus").join(format!("{name}.vp"))).unwrap()
}

fn load(name: &str) -> Problem {
    dsl::load(&source(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn calculus_identities() -> Outcome {
    let start = Instant::now();
    let spec = BundleSpec::new(&["x", "y"], &["u", "v"], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for case in 0..IDENTITY_CASES {
        let w = random::form(&spec, &mut rng, 3, 2);
        let f = random::expr(&spec, &mut rng, 3, 3);
        let dh = w.d_h(&spec).map_err(|e| e.to_string())?;
        let dv = w.d_v(&spec).map_err(|e| e.to_string())?;
        let checks = [
            ("d_H^2", dh.d_h(&spec).map_err(|e| e.to_string())?.is_zero()),
            ("d_V^2", dv.d_v(&spec).map_err(|e| e.to_string())?.is_zero()),
            (
                "d_H d_V + d_V d_H",
                (dv.d_h(&spec).map_err(|e| e.to_string())? + dh.d_v(&spec).map_err(|e| e.to_string())?).is_zero(),
            ),
            ("D_x D_y - D_y D_x", {
                let xy = spec.total_derivative(&spec.total_derivative(&f, 0).unwrap(), 1).unwrap();
                let yx = spec.total_derivative(&spec.total_derivative(&f, 1).unwrap(), 0).unwrap();
                (xy - yx).is_zero()
            }),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(format!("{name} is not zero in case {case}"));
        }
    }
    let t = start.elapsed();
    if t > Duration::from_secs(30) {
        return Err(format!("took {:.1} s (limit 30 s)", t.as_secs_f64()));
    }
    Ok(format!("{IDENTITY_CASES} seeded cases, order <= 3, {:.2} s", t.as_secs_f64()))
}

fn euler_lagrange_gradient() -> Outcome {
    let start = Instant::now();
    let mut worst = Vec::new();
    for name in GRADIENT_CORPUS {
        let p = load(name);
        let o = p.oracle.as_ref().ok_or(format!("{name} has no oracle section"))?;
        if o.nodes > MAX_NODES_PER_DIRECTION {
            return Err(format!("{name}: {} nodes per direction", o.nodes));
        }
        let h = (o.hi[0] - o.lo[0]) / (o.nodes as f64 - 1.0);
        let shape: Vec<usize> = o.lo.iter().zip(&o.hi).map(|(lo, hi)| ((hi - lo) / h).round() as usize + 1).collect();
        let grid = GridSection::sample(&o.section, o.lo.clone(), h, shape, o.accuracy).map_err(|e| e.to_string())?;
        let check =
            fd_gradient_check(&p.spec, &p.lagrangian, &grid, Some(&o.section), 200).map_err(|e| e.to_string())?;
        let tol =
            if p.lagrangian.density.jet_order() <= 1 { GRADIENT_REL_FIRST_ORDER } else { GRADIENT_REL_HIGHER_ORDER };
        if check.max_relative_error.is_nan() || check.max_relative_error >= tol {
            return Err(format!("{name}: relative error {:.3e} >= {tol:e}", check.max_relative_error));
        }
        worst.push(format!("{name} {:.1e}", check.max_relative_error));
    }
    let t = start.elapsed();
    if t > Duration::from_secs(60) {
        return Err(format!("took {:.1} s (limit 60 s)", t.as_secs_f64()));
    }
    Ok(format!("max relative error: {}; {:.2} s", worst.join(", "), t.as_secs_f64()))
}

fn null_lagrangians() -> Outcome {
    let spec = BundleSpec::new(&["x", "y"], &["u", "v"], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    for case in 0..NULL_CASES {
        let w = random::current(&spec, &mut rng, 2, 2);
        let div = spec.divergence(&w).map_err(|e| e.to_string())?;
        let e = euler_operator(&spec, &div, &Bank::all_fields(&spec)).map_err(|e| e.to_string())?;
        if !e.iter().all(Expr::is_zero) {
            return Err(format!("E(Div W) != 0 in case {case}"));
        }
    }
    Ok(format!("{NULL_CASES} random currents of order <= 2"))
}

fn strong_noether() -> Outcome {
    let mut verified = Vec::new();
    for name in CORPUS {
        let p = load(name);
        for lift in &p.lifts {
            if !check_symmetry(&p.spec, &p.lagrangian, lift).map_err(|e| e.to_string())?.is_symmetry() {
                continue;
            }
            let nc = noether_current(&p.spec, &p.lagrangian, lift).map_err(|e| e.to_string())?;
            if !nc.residual(&p.spec).map_err(|e| e.to_string())?.is_zero() {
                return Err(format!("{name}/{}: residual is not the zero expression", lift.name));
            }
            verified.push(format!("{name}/{}", lift.name));
        }
    }
    Ok(format!("{} symmetries: {}", verified.len(), verified.join(", ")))
}

fn self_adjointness() -> Outcome {
    for name in CORPUS {
        let p = load(name);
        let j = linearize_el(&p.spec, &p.lagrangian).map_err(|e| e.to_string())?;
        let adj = j.adjoint(&p.spec).map_err(|e| e.to_string())?;
        if !adj.equals(&j) {
            return Err(format!("{name}: adjoint differs"));
        }
    }
    Ok(format!("{} Lagrangians", CORPUS.len()))
}

fn comparison_theorem() -> Outcome {
    let mut count = 0;
    for name in CORPUS {
        let p = load(name);
        for lift in p.lifts.iter().filter(|l| !l.bank.is_empty()) {
            let phi = vertical_part(&p.spec, &lift.field).map_err(|e| e.to_string())?;
            let r = verify_comparison_theorem(&p.spec, &p.lagrangian, &phi, &Bank::params(lift.bank.clone()))
                .map_err(|e| e.to_string())?;
            if !r.passed() {
                return Err(format!("{name}/{}: residual is not a divergence", lift.name));
            }
            count += 1;
        }
    }
    Ok(format!("{count} lift vertical parts"))
}

fn bianchi_identities() -> Outcome {
    let maxwell = load("maxwell");
    let b = bianchi_decompose(&maxwell.spec, &maxwell.lagrangian, &maxwell.lifts[0]).map_err(|e| e.to_string())?;
    if !b.beta.iter().all(Expr::is_zero) {
        return Err("Maxwell: beta is not zero".into());
    }
    let start = Instant::now();
    let metric = load("metric");
    let b = bianchi_decompose(&metric.spec, &metric.lagrangian, &metric.lifts[0]).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    if !b.beta.iter().all(Expr::is_zero) {
        return Err("metric density: beta is not zero".into());
    }
    if t > Duration::from_secs(120) {
        return Err(format!("metric case took {:.1} s", t.as_secs_f64()));
    }
    let proca = load("proca");
    let b = bianchi_decompose(&proca.spec, &proca.lagrangian, &proca.lifts[0]).map_err(|e| e.to_string())?;
    let div = -(Expr::field(0, MultiIndex::from_slice(&[1, 0])) + Expr::field(1, MultiIndex::from_slice(&[0, 1])));
    if b.beta != vec![div] {
        return Err("Proca: beta differs from -D_mu A^mu".into());
    }
    Ok(format!("Maxwell and metric beta = 0, Proca beta = -D_mu A^mu; metric {:.2} s", t.as_secs_f64()))
}

fn conjugate_point() -> Outcome {
    let p = load("sphere");
    let doc = run_command("jacobi", "sphere.vp", &p, &Options::default()).map_err(|e| e.to_string())?;
    let t = doc
        .sections
        .iter()
        .flat_map(|s| &s.items)
        .find_map(|i| match i {
            Item::Number { label, value } if label == "conjugate point 1" => Some(*value),
            _ => None,
        })
        .ok_or("no conjugate point found")?;
    let err = (t - std::f64::consts::PI).abs();
    if err >= CONJUGATE_POINT_TOL {
        return Err(format!("t* = {t}, |t* - pi| = {err:.2e}"));
    }
    Ok(format!("t* = {t:.12}, |t* - pi| = {err:.1e}"))
}

fn hamiltonian_conservation() -> Outcome {
    let maxwell = load("maxwell");
    let h = hamiltonian_current(&maxwell.spec, &maxwell.lagrangian, &maxwell.lifts[0]).map_err(|e| e.to_string())?;
    if !h.divergence.is_zero() {
        return Err("Maxwell: D_mu H^mu is not the zero expression".into());
    }
    let proca = load("proca");
    match hamiltonian_current(&proca.spec, &proca.lagrangian, &proca.lifts[0]) {
        Err(Error::BianchiNonzero) => Ok("Maxwell D_mu H^mu = 0; Proca rejected with BianchiNonzero".into()),
        Err(e) => Err(format!("Proca: unexpected error {e}")),
        Ok(_) => Err("Proca was not rejected".into()),
    }
}

fn certificates() -> Outcome {
    let mut count = 0usize;
    let zero = |what: String, e: varseq_core::Result<Expr>| -> Result<(), String> {
        match e {
            Ok(r) if r.is_zero() => Ok(()),
            Ok(_) => Err(format!("{what}: residual is not the zero expression")),
            Err(err) => Err(format!("{what}: {err}")),
        }
    };
    for name in CORPUS {
        let p = load(name);
        let (spec, lag) = (&p.spec, &p.lagrangian);
        for lift in &p.lifts {
            let fv = first_variation(spec, lag, &lift.field).map_err(|e| e.to_string())?;
            zero(format!("{name}/{}: first variation", lift.name), fv.residual(spec))?;
            count += 1;
            if !lift.bank.is_empty() {
                let b = bianchi_decompose(spec, lag, lift).map_err(|e| e.to_string())?;
                zero(format!("{name}/{}: Bianchi decomposition", lift.name), b.residual(spec))?;
                let ibp =
                    integrate_by_parts(spec, &b.omega, &Bank::params(lift.bank.clone())).map_err(|e| e.to_string())?;
                zero(format!("{name}/{}: integration by parts of omega", lift.name), ibp.residual(spec, &b.omega))?;
                count += 2;
            }
        }
        for a in &p.variations {
            let fv = first_variation(spec, lag, &a.field).map_err(|e| e.to_string())?;
            zero(format!("{name}/{}: first variation", a.name), fv.residual(spec))?;
            count += 1;
            if !a.bank.is_empty() {
                // The variation density is linear in the variation's parameters.
                let density = &fv.lie_derivative;
                let ibp =
                    integrate_by_parts(spec, density, &Bank::params(a.bank.clone())).map_err(|e| e.to_string())?;
                zero(format!("{name}/{}: integration by parts", a.name), ibp.residual(spec, density))?;
                count += 1;
            }
            for b in &p.variations {
                let sv = second_variation(spec, lag, &a.field, &b.field).map_err(|e| e.to_string())?;
                zero(format!("{name}/{}/{}: second variation", a.name, b.name), sv.residual(spec))?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} certificates re-expand to the literal zero"))
}

fn cli_contract() -> Outcome {
    for name in CORPUS {
        let ast = parse_problem(&source(name)).map_err(|e| format!("{name}: {e}"))?;
        if parse_problem(&print_problem(&ast)).map_err(|e| format!("{name} reprinted: {e}"))? != ast {
            return Err(format!("{name}: parse . print . parse != parse"));
        }
    }
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_varseq"))
            .args(args)
            .current_dir(root())
            .env_remove("VARSEQ_FORMAT")
            .output()
            .unwrap()
    };
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut pinned = 0;
    for entry in std::fs::read_dir(&golden).map_err(|e| e.to_string())? {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let (cmd, file) = stem.split_once('-').ok_or(format!("bad golden name {stem}"))?;
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => "json",
            Some("tex") => "latex",
            _ => "text",
        };
        let file = format!("corpus/{file}.vp");
        let a = run(&[cmd, &file, "--format", format]);
        let b = run(&[cmd, &file, "--format", format]);
        if a.stdout != b.stdout {
            return Err(format!("{stem}: output differs between runs"));
        }
        if a.stdout != std::fs::read(&path).unwrap() {
            return Err(format!("{stem}: output differs from the golden file"));
        }
        pinned += 1;
    }
    let code = run(&["bianchi", "corpus/proca.vp"]).status.code();
    if code != Some(1) {
        return Err(format!("Proca bianchi exited with {code:?}"));
    }
    if run(&["bianchi", "corpus/maxwell.vp"]).status.code() != Some(0) {
        return Err("Maxwell bianchi did not exit 0".into());
    }
    let dir = std::env::temp_dir().join(format!("varseq-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.vp");
    std::fs::write(&bad, "[bundle]\nbase = x\nfields = u\norder = 1\n[lagrangian]\nu_x + w\n").unwrap();
    let parse_code = run(&["el", bad.to_str().unwrap()]).status.code();
    let overflow_code = run(&["el", "corpus/biharmonic.vp", "--max-order", "3"]).status.code();
    std::fs::remove_dir_all(&dir).ok();
    if parse_code != Some(2) || overflow_code != Some(3) {
        return Err(format!("parse error exited {parse_code:?}, order overflow exited {overflow_code:?}"));
    }
    Ok(format!(
        "{} files round-trip, {pinned} golden outputs byte-identical, exit codes 0/1/2/3 honoured",
        CORPUS.len()
    ))
}

/// Writes past the test harness's output capture so the criterion lines
/// appear in every run, not only on failure.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("calculus identities", calculus_identities),
        ("Euler-Lagrange vs finite-difference action gradient", euler_lagrange_gradient),
        ("null Lagrangians are annihilated", null_lagrangians),
        ("strong Noether identity", strong_noether),
        ("Jacobi operator self-adjointness", self_adjointness),
        ("comparison theorem with lift vertical parts", comparison_theorem),
        ("generalized Bianchi identities", bianchi_identities),
        ("conjugate point on the sphere equator", conjugate_point),
        ("Hamiltonian current conservation", hamiltonian_conservation),
        ("certificates re-expand to zero", certificates),
        ("CLI round-trip, determinism and exit codes", cli_contract),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => report(&format!("criterion {:>2} PASS  {name}: {detail}", k + 1)),
            Err(detail) => {
                report(&format!("criterion {:>2} FAIL  {name}: {detail}", k + 1));
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
