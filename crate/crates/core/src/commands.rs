//! Command dispatch: runs module operations on a resolved problem and
//! collects the results in a [`ReportDocument`].

use crate::bundle::{BundleSpec, MultiIndex};
use crate::dsl::{Problem, Variation};
use crate::error::{Error, Result};
use crate::expr::{Expr, JetVar, Names};
use crate::fields::ParamVectorField;
use crate::forms::Form;
use crate::jacobi::{
    kernel_test, linearize_el, scalar_ode_coefficients, second_variation, verify_comparison_theorem, vertical_part,
    KernelVerdict,
};
use crate::noether::{
    bianchi_decompose, check_symmetry, hamiltonian_current, lift_second_variation_is_divergence, noether_current,
    verify_horizontal_invariance, SymmetryVerdict,
};
use crate::oracle::{
    self, eval_at, eval_on_section, fd_gradient_check, GridSection, OdeState, TestSection, Tolerances,
};
use crate::report::{ReportDocument, ReportSection};
use crate::variational::{
    euler_lagrange, first_variation, integrate_by_parts, is_divergence, momenta, source_form, Bank,
};

pub const COMMANDS: &[&str] = &["el", "momenta", "noether", "secondvar", "jacobi", "bianchi", "hamiltonian", "verify"];

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Overrides the numeric tolerance for kernel membership.
    pub tolerance: Option<f64>,
}

/// Process exit status for a finished command or an error.
pub fn exit_code(outcome: &Result<ReportDocument>) -> i32 {
    match outcome {
        Ok(doc) if doc.failed => 1,
        Ok(_) => 0,
        Err(Error::NotASymmetry | Error::BianchiNonzero) => 1,
        Err(Error::Parse(_)) => 2,
        Err(Error::OrderOverflow { .. }) => 3,
        Err(_) => 4,
    }
}

pub fn run_command(cmd: &str, file: &str, problem: &Problem, opts: &Options) -> Result<ReportDocument> {
    let mut doc = ReportDocument::new(cmd, file, problem.spec.names());
    match cmd {
        "el" => el(problem, &mut doc)?,
        "momenta" => momenta_cmd(problem, &mut doc)?,
        "noether" => noether(problem, &mut doc)?,
        "secondvar" => secondvar(problem, &mut doc)?,
        "jacobi" => jacobi(problem, opts, &mut doc)?,
        "bianchi" => bianchi(problem, &mut doc)?,
        "hamiltonian" => hamiltonian(problem, &mut doc)?,
        "verify" => verify(problem, opts, &mut doc)?,
        _ => return Err(Error::Precondition(format!("unknown command `{cmd}`"))),
    }
    if cmd == "verify" || cmd == "secondvar" || cmd == "momenta" {
        let any_failed = doc.checks().any(|(_, passed)| !passed);
        doc.failed = any_failed;
    }
    Ok(doc)
}

fn jet_label(names: &Names, i: usize, alpha: &MultiIndex) -> String {
    names.jet_name(&JetVar::field(i, alpha.clone()))
}

fn derivative_letters(spec: &BundleSpec, beta: &MultiIndex) -> String {
    (0..spec.n()).map(|s| spec.base[s].repeat(beta.get(s) as usize)).collect()
}

fn current_items(section: &mut ReportSection, spec: &BundleSpec, stem: &str, comps: &[Expr]) {
    for (mu, c) in comps.iter().enumerate() {
        section.expr(format!("{stem}^{}", spec.base[mu]), c.clone());
    }
}

fn zero_check(section: &mut ReportSection, label: &str, residual: &Expr, names: &Names) {
    let ok = residual.is_zero_exact();
    let detail = (!ok).then(|| format!("residual {}", residual.render(names, crate::RenderStyle::Plain)));
    section.check(label, ok, detail);
}

fn el(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    let e = euler_lagrange(&p.spec, &p.lagrangian)?;
    let mut s = ReportSection::new("Euler-Lagrange expressions");
    for (i, ei) in e.0.iter().enumerate() {
        s.expr(format!("E_{}", p.spec.fields[i]), ei.clone());
    }
    doc.push(s);
    Ok(())
}

fn momenta_cmd(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let names = spec.names();
    let mom = momenta(spec, &p.lagrangian)?;
    let mut s = ReportSection::new("Momenta");
    for ((mu, i, alpha), c) in &mom.coefficients {
        s.expr(format!("p^{}[{}]", spec.base[*mu], jet_label(&names, *i, alpha)), c.clone());
    }
    if mom.coefficients.is_empty() {
        s.text("momenta", "none (the Lagrangian has no derivative dependence)");
    }
    doc.push(s);
    let mut c = ReportSection::new("Certificate");
    let n = spec.n();
    let lhs = Form::density(p.lagrangian.density.clone(), n).d_v(spec)?;
    let rhs = source_form(&mom.euler_lagrange, n) + mom.form(n).d_h(spec)?;
    c.check("d_V L = E_i theta^i ds + d_H P", (lhs - rhs).is_zero_exact(), None);
    doc.push(c);
    Ok(())
}

fn noether(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let names = spec.names();
    if p.lifts.is_empty() {
        let mut s = ReportSection::new("Noether currents");
        s.text("lifts", "none declared");
        doc.push(s);
    }
    for lift in &p.lifts {
        let mut s = ReportSection::new(format!("Noether current for `{}`", lift.name));
        match check_symmetry(spec, &p.lagrangian, lift)? {
            SymmetryVerdict::Broken { residual, obstruction } => {
                s.text("symmetry", "broken");
                s.expr("L_X L", residual);
                for (k, o) in obstruction.iter().enumerate() {
                    if o.is_zero() {
                        continue;
                    }
                    let label = if k < spec.m() {
                        format!("obstruction[{}]", spec.fields[k])
                    } else {
                        format!("obstruction[{}]", spec.params[lift.bank[k - spec.m()]])
                    };
                    s.expr(label, o.clone());
                }
                s.check("symmetry", false, None);
                doc.failed = true;
            }
            verdict => {
                let kind = if verdict == SymmetryVerdict::Exact { "exact" } else { "divergence" };
                s.text("symmetry", kind);
                let nc = noether_current(spec, &p.lagrangian, lift)?;
                current_items(&mut s, spec, "J", &nc.components);
                if let Some(w) = &nc.divergence_term {
                    current_items(&mut s, spec, "W", &w.0);
                }
                s.expr("omega", nc.omega.clone());
                let residual = nc.residual(spec)?;
                zero_check(&mut s, "D_mu J^mu = omega", &residual, &names);
                if !residual.is_zero_exact() {
                    doc.failed = true;
                }
            }
        }
        doc.push(s);
    }
    Ok(())
}

fn comparison_item(
    s: &mut ReportSection,
    p: &Problem,
    label: &str,
    field: &crate::fields::VectorField,
    bank: &[usize],
) -> Result<()> {
    if bank.is_empty() {
        s.text(label, "skipped (no parameter functions)");
        return Ok(());
    }
    let report = verify_comparison_theorem(&p.spec, &p.lagrangian, field, &Bank::params(bank.to_vec()))?;
    s.expr(format!("{label}: contracted"), report.contracted.clone());
    s.expr(format!("{label}: second variation"), report.second_variation.clone());
    let mut detail = None;
    if !report.residual.is_zero() {
        let r = report.certificate.residual(&p.spec, &report.residual)?;
        if !r.is_zero_exact() {
            detail = Some("polarization certificate does not re-expand".to_string());
        }
    }
    s.check(format!("{label}: residual is a divergence"), report.passed() && detail.is_none(), detail);
    Ok(())
}

fn second_variation_section(p: &Problem, a: &Variation, b: &Variation) -> Result<ReportSection> {
    let spec = &p.spec;
    let names = spec.names();
    let mut s = ReportSection::new(format!("Second variation along `{}`, `{}`", a.name, b.name));
    let sv = second_variation(spec, &p.lagrangian, &a.field, &b.field)?;
    s.expr("B", sv.density.clone());
    s.expr("H", sv.h_part.clone());
    current_items(&mut s, spec, "G", &sv.boundary.0);
    zero_check(&mut s, "B = H + D_mu G^mu", &sv.residual(spec)?, &names);
    if a.name != b.name {
        let swapped = second_variation(spec, &p.lagrangian, &b.field, &a.field)?;
        let diff = &sv.density - &swapped.density;
        s.check("B(a,b) - B(b,a) is a divergence", is_divergence(spec, &diff)?, None);
    }
    Ok(s)
}

fn secondvar(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    if p.variations.is_empty() && p.lifts.iter().all(|l| l.bank.is_empty()) {
        let mut s = ReportSection::new("Second variation");
        s.text("variations", "none declared");
        doc.push(s);
    }
    for (k, a) in p.variations.iter().enumerate() {
        for b in &p.variations[k..] {
            doc.push(second_variation_section(p, a, b)?);
        }
    }
    let mut s = ReportSection::new("Comparison theorem");
    for v in &p.variations {
        comparison_item(&mut s, p, &format!("variation `{}`", v.name), &v.field, &v.bank)?;
    }
    for lift in p.lifts.iter().filter(|l| !l.bank.is_empty()) {
        let v = vertical_part(&p.spec, &lift.field)?;
        comparison_item(&mut s, p, &format!("lift `{}`", lift.name), &v, &lift.bank)?;
    }
    if !s.items.is_empty() {
        doc.push(s);
    }
    Ok(())
}

fn jacobi(p: &Problem, opts: &Options, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let j = linearize_el(spec, &p.lagrangian)?;
    let mut s = ReportSection::new("Jacobi operator");
    for ((i, jj, beta), c) in &j.coeffs {
        let d = if beta.is_zero() { String::new() } else { format!(" D_{}", derivative_letters(spec, beta)) };
        s.expr(format!("J[{},{}]{d}", spec.fields[*i], spec.fields[*jj]), c.clone());
    }
    let adj = j.adjoint(spec)?;
    let self_adjoint = adj.equals(&j);
    let certified = j.adjoint_certificate(spec, &adj)?.is_some();
    s.check("adjoint(J) = J", self_adjoint, None);
    s.check("Phi.J Psi - Psi.J* Phi is a divergence", certified, None);
    if !(self_adjoint && certified) {
        doc.failed = true;
    }
    doc.push(s);
    let Some(bg) = &p.background else { return Ok(()) };
    let tol = Tolerances::default();
    let mut k = ReportSection::new("Kernel along the background");
    for v in p.variations.iter().filter(|v| v.bank.is_empty()) {
        let report = kernel_test(
            spec,
            &p.lagrangian,
            &v.field.components,
            &bg.section,
            opts.tolerance.unwrap_or(tol.background),
        )?;
        let verdict = match &report.verdict {
            KernelVerdict::Exact => "in kernel (exact)".to_string(),
            KernelVerdict::Numeric { max_abs } => {
                format!("in kernel (numeric, max |J Phi| = {})", crate::report::fmt_number(*max_abs))
            }
            KernelVerdict::NotInKernel { max_abs, .. } => {
                format!("not in kernel (max |J Phi| = {})", crate::report::fmt_number(*max_abs))
            }
        };
        k.text(format!("variation `{}`", v.name), verdict);
        for (i, r) in report.j_phi.iter().enumerate() {
            k.expr(format!("(J Phi)_{} [{}]", spec.fields[i], v.name), r.clone());
        }
    }
    if let Some(setup) = &bg.jacobi {
        let along = j.along_section(spec, &bg.section)?;
        let f = setup.field;
        for ((i, jj, _), c) in &along.coeffs {
            if (*i == f) != (*jj == f) && !c.is_zero_exact() {
                return Err(Error::Precondition(format!(
                    "the `{}` block is coupled to other fields along the background",
                    spec.fields[f]
                )));
            }
        }
        let [a0, a1, a2] = scalar_ode_coefficients(&along.block(f, f))?;
        k.expr("a0", a0.clone());
        k.expr("a1", a1.clone());
        k.expr("a2", a2.clone());
        let rhs = |t: f64, w: f64, dw: f64| -> Result<f64> {
            let lead = eval_at(&a2, &[t])?;
            if lead.abs() < 1e-14 {
                return Err(Error::IntegrationFailure(format!("leading coefficient vanishes at t = {t}")));
            }
            Ok(-(eval_at(&a1, &[t])? * dw + eval_at(&a0, &[t])? * w) / lead)
        };
        let start = OdeState { t: setup.interval.0, w: setup.initial.0, dw: setup.initial.1 };
        let traj = oracle::jacobi_ode_solve(&rhs, start, setup.interval.1, tol)?;
        k.text("steps", traj.states.len().to_string());
        if traj.conjugate_points.is_empty() {
            k.text("conjugate points", "none on the interval");
        }
        for (n, t) in traj.conjugate_points.iter().enumerate() {
            k.number(format!("conjugate point {}", n + 1), *t);
        }
    }
    if !k.items.is_empty() {
        doc.push(k);
    }
    Ok(())
}

fn bianchi(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let names = spec.names();
    let lifts: Vec<&ParamVectorField> = p.lifts.iter().filter(|l| !l.bank.is_empty()).collect();
    if lifts.is_empty() {
        let mut s = ReportSection::new("Bianchi identities");
        s.text("lifts", "none with parameter functions");
        doc.push(s);
    }
    for lift in lifts {
        let r = bianchi_decompose(spec, &p.lagrangian, lift)?;
        let mut s = ReportSection::new(format!("Bianchi identities for `{}`", lift.name));
        s.expr("omega", r.omega.clone());
        for (a, b) in r.bank.iter().zip(&r.beta) {
            s.expr(format!("beta[{}]", spec.params[*a]), b.clone());
        }
        current_items(&mut s, spec, "M", &r.superpotential.0);
        for (a, v) in r.bank.iter().zip(&r.vanishing) {
            s.check(format!("beta[{}] = 0", spec.params[*a]), *v, None);
        }
        zero_check(&mut s, "omega = beta.eps + D_mu M^mu", &r.residual(spec)?, &names);
        if !r.all_vanish() || !r.residual(spec)?.is_zero_exact() {
            doc.failed = true;
        }
        doc.push(s);
    }
    Ok(())
}

fn hamiltonian(p: &Problem, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let names = spec.names();
    let lifts: Vec<&ParamVectorField> = p.lifts.iter().filter(|l| !l.bank.is_empty()).collect();
    if lifts.is_empty() {
        let mut s = ReportSection::new("Hamiltonian current");
        s.text("lifts", "none with parameter functions");
        doc.push(s);
    }
    for lift in lifts {
        let h = hamiltonian_current(spec, &p.lagrangian, lift)?;
        let mut s = ReportSection::new(format!("Hamiltonian current for `{}`", lift.name));
        current_items(&mut s, spec, "H", &h.components);
        s.expr("D_mu H^mu", h.divergence.clone());
        let verdict = if h.is_conserved() { "conserved identically" } else { "not conserved off-shell" };
        s.text("conservation", verdict);
        zero_check(&mut s, "first-variation certificate", &h.certificate, &names);
        let hi = verify_horizontal_invariance(spec, &p.lagrangian, lift)?;
        s.expr("horizontal invariance residual", hi.residual.clone());
        s.check("L_{X_H} omega = -D_H H", hi.passed(), None);
        if !(h.certificate.is_zero_exact() && hi.passed()) {
            doc.failed = true;
        }
        doc.push(s);
    }
    Ok(())
}

fn verify(p: &Problem, opts: &Options, doc: &mut ReportDocument) -> Result<()> {
    let spec = &p.spec;
    let names = spec.names();
    let lag = &p.lagrangian;
    let mut s = ReportSection::new("Identities");
    let mom = momenta(spec, lag)?;
    let n = spec.n();
    let lhs = Form::density(lag.density.clone(), n).d_v(spec)?;
    let rhs = source_form(&mom.euler_lagrange, n) + mom.form(n).d_h(spec)?;
    s.check("d_V L = E_i theta^i ds + d_H P", (lhs - rhs).is_zero_exact(), None);
    let j = linearize_el(spec, lag)?;
    let adj = j.adjoint(spec)?;
    s.check("Jacobi operator is self-adjoint", adj.equals(&j) && j.adjoint_certificate(spec, &adj)?.is_some(), None);
    for lift in &p.lifts {
        let tag = format!("lift `{}`", lift.name);
        if lift.bank.is_empty() {
            s.text(tag.clone(), "fixed vector field (no parameter functions)");
        } else {
            let props = lift.check_lift_properties(spec)?;
            s.check(format!("{tag}: linear, projectable, closed"), props.passed(), None);
        }
        let fv = first_variation(spec, lag, &lift.field)?;
        zero_check(&mut s, &format!("{tag}: first variation certificate"), &fv.residual(spec)?, &names);
        let verdict = check_symmetry(spec, lag, lift)?;
        if verdict.is_symmetry() {
            let nc = noether_current(spec, lag, lift)?;
            zero_check(&mut s, &format!("{tag}: strong Noether identity"), &nc.residual(spec)?, &names);
        } else {
            s.text(format!("{tag}: symmetry"), "broken");
        }
        if !lift.bank.is_empty() {
            let b = bianchi_decompose(spec, lag, lift)?;
            zero_check(&mut s, &format!("{tag}: Bianchi decomposition certificate"), &b.residual(spec)?, &names);
            let ibp = integrate_by_parts(spec, &b.omega, &Bank::params(lift.bank.clone()))?;
            zero_check(
                &mut s,
                &format!("{tag}: integration by parts certificate"),
                &ibp.residual(spec, &b.omega)?,
                &names,
            );
            let kernel = lift_second_variation_is_divergence(spec, lag, lift)?;
            s.check(format!("{tag}: Bianchi verdict agrees with the kernel test"), kernel == b.all_vanish(), None);
            s.text(format!("{tag}: Bianchi identities"), if b.all_vanish() { "vanish" } else { "do not vanish" });
            if b.all_vanish() {
                let h = hamiltonian_current(spec, lag, lift)?;
                zero_check(&mut s, &format!("{tag}: Hamiltonian current certificate"), &h.certificate, &names);
                let hi = verify_horizontal_invariance(spec, lag, lift)?;
                s.check(format!("{tag}: horizontal invariance"), hi.passed(), None);
            }
        }
    }
    doc.push(s);
    secondvar(p, doc)?;
    if let Some(o) = &p.oracle {
        doc.push(oracle_section(p, o)?);
    }
    if p.background.is_some() {
        jacobi(p, opts, doc)?;
    }
    Ok(())
}

fn oracle_section(p: &Problem, o: &crate::dsl::OracleSetup) -> Result<ReportSection> {
    let spec = &p.spec;
    let tol = Tolerances::default();
    let mut s = ReportSection::new("Numeric oracle");
    let h = (o.hi[0] - o.lo[0]) / (o.nodes as f64 - 1.0);
    let shape: Vec<usize> = o.lo.iter().zip(&o.hi).map(|(lo, hi)| ((hi - lo) / h).round() as usize + 1).collect();
    let grid = GridSection::sample(&o.section, o.lo.clone(), h, shape, o.accuracy)?;
    let check = fd_gradient_check(spec, &p.lagrangian, &grid, Some(&o.section), 200)?;
    let relative =
        if p.lagrangian.density.jet_order() <= 1 { tol.gradient_first_order } else { tol.gradient_higher_order };
    if check.max_relative_error.is_finite() {
        s.number("max relative error", check.max_relative_error);
    }
    s.number("max absolute error", check.max_abs_error);
    s.number("max |E|", check.max_abs_euler);
    s.check(
        "action gradient matches Euler-Lagrange",
        check.passes(relative, tol.gradient_null),
        Some(format!("{} nodes checked", check.nodes_checked)),
    );
    let section = TestSection::Analytic(o.section.clone());
    let mut worst = 0.0f64;
    for sigma in 0..spec.n() {
        let symbolic = spec.total_derivative(&p.lagrangian.density, sigma)?;
        let f = |x: &[f64]| eval_on_section(spec, &p.lagrangian.density, &section, x);
        for point in oracle::sample_points(spec.n()) {
            let exact = eval_on_section(spec, &symbolic, &section, &point)?;
            let numeric = oracle::numeric_partial(&f, &point, sigma, 1e-3)?;
            worst = worst.max((exact - numeric).abs() / exact.abs().max(1.0));
        }
    }
    s.number("max total-derivative discrepancy", worst);
    s.check("total derivatives match numeric differentiation", worst < 1e-6, None);
    Ok(s)
}
