//! Noether currents, the contracted Lagrangian `ω = £^i E_i`, its
//! decomposition into Bianchi expressions plus a divergence, and the
//! Hamiltonian current built from the momenta of `ω`.
//!
//! Sign conventions: `£^i = ξ^μ y^i_μ − Ξ^i`; the Noether current is
//! `ε^μ = −Σ p^{μ,α}_i D_α£^i + ξ^μ L`, certified by `D_μ ε^μ = £^i E_i`.

use crate::bundle::BundleSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{ParamVectorField, VectorField};
use crate::jacobi::{formal_variation, vertical_part};
use crate::variational::{
    divergence_potential, euler_lagrange, euler_operator, first_variation, integrate_by_parts, is_divergence,
    momenta_of, polarize, Bank, BoundaryCurrent, Lagrangian,
};

/// Outcome of testing `L_X λ` for invariance.
#[derive(Clone, Debug, PartialEq)]
pub enum SymmetryVerdict {
    Exact,
    /// `L_X λ = D_μ W^μ`.
    Divergence(BoundaryCurrent),
    /// `residual = L_X λ`; `obstruction` is its Euler operator over the
    /// fields followed by the parameter bank.
    Broken {
        residual: Expr,
        obstruction: Vec<Expr>,
    },
}

impl SymmetryVerdict {
    pub fn is_symmetry(&self) -> bool {
        !matches!(self, SymmetryVerdict::Broken { .. })
    }
}

pub fn check_symmetry(spec: &BundleSpec, lagrangian: &Lagrangian, x: &ParamVectorField) -> Result<SymmetryVerdict> {
    x.field.validate(spec)?;
    let residual = x.field.lie_derivative_density(spec, &lagrangian.density)?;
    if residual.is_zero_exact() {
        return Ok(SymmetryVerdict::Exact);
    }
    if is_divergence(spec, &residual)? {
        if let Some(w) = divergence_potential(spec, &residual)? {
            return Ok(SymmetryVerdict::Divergence(w));
        }
        return Err(Error::Precondition("divergence symmetry whose potential is not polynomial in the jets".into()));
    }
    let mut obstruction = euler_operator(spec, &residual, &Bank::all_fields(spec))?;
    obstruction.extend(euler_operator(spec, &residual, &Bank::params(x.bank.clone()))?);
    Ok(SymmetryVerdict::Broken { residual: residual.simplify(), obstruction })
}

/// A conserved current together with its strong identity.
#[derive(Clone, Debug, PartialEq)]
pub struct NoetherCurrent {
    pub components: Vec<Expr>,
    /// Name of the field it is attached to.
    pub symmetry: String,
    /// `£^i E_i`, the right-hand side of the strong identity.
    pub omega: Expr,
    /// `W` subtracted for divergence symmetries.
    pub divergence_term: Option<BoundaryCurrent>,
}

impl NoetherCurrent {
    /// `D_μ ε^μ − £^i E_i`; the literal zero for a verified symmetry.
    pub fn residual(&self, spec: &BundleSpec) -> Result<Expr> {
        Ok((&BoundaryCurrent(self.components.clone()).divergence(spec)? - &self.omega).simplify())
    }
}

pub fn noether_current(spec: &BundleSpec, lagrangian: &Lagrangian, x: &ParamVectorField) -> Result<NoetherCurrent> {
    let verdict = check_symmetry(spec, lagrangian, x)?;
    let divergence_term = match verdict {
        SymmetryVerdict::Exact => None,
        SymmetryVerdict::Divergence(w) => Some(w),
        SymmetryVerdict::Broken { .. } => return Err(Error::NotASymmetry),
    };
    let fv = first_variation(spec, lagrangian, &x.field)?;
    let mut components = fv.boundary.0;
    if let Some(w) = &divergence_term {
        for (c, w) in components.iter_mut().zip(&w.0) {
            *c -= w;
        }
    }
    Ok(NoetherCurrent {
        components: components.iter().map(Expr::simplify).collect(),
        symmetry: x.name.clone(),
        omega: (-fv.contracted).simplify(),
        divergence_term,
    })
}

/// `ω = £^i E_i(λ)`, linear in the parameter bank of `x`.
pub fn omega_lagrangian(spec: &BundleSpec, lagrangian: &Lagrangian, x: &ParamVectorField) -> Result<Expr> {
    let lie = x.field.lie_derivative_section(spec)?;
    let el = euler_lagrange(spec, lagrangian)?;
    Ok(Expr::sum(lie.0.iter().zip(&el.0).map(|(l, e)| l * e)))
}

/// `ω = Σ_A β_A ε^A + D_μ M^μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BianchiReport {
    pub omega: Expr,
    /// Parameter indices, aligned with `beta`.
    pub bank: Vec<usize>,
    pub beta: Vec<Expr>,
    pub superpotential: BoundaryCurrent,
    pub vanishing: Vec<bool>,
}

impl BianchiReport {
    pub fn all_vanish(&self) -> bool {
        self.vanishing.iter().all(|&v| v)
    }

    /// `Σ β_A ε^A + D_μ M^μ − ω`.
    pub fn residual(&self, spec: &BundleSpec) -> Result<Expr> {
        let volume = Expr::sum(self.bank.iter().zip(&self.beta).map(|(&a, b)| b * &spec.param(a)));
        Ok((&(&volume + &self.superpotential.divergence(spec)?) - &self.omega).simplify())
    }
}

pub fn bianchi_decompose(spec: &BundleSpec, lagrangian: &Lagrangian, x: &ParamVectorField) -> Result<BianchiReport> {
    let omega = omega_lagrangian(spec, lagrangian, x)?;
    if x.bank.is_empty() {
        return Ok(BianchiReport {
            omega,
            bank: Vec::new(),
            beta: Vec::new(),
            superpotential: BoundaryCurrent::zero(spec.n()),
            vanishing: Vec::new(),
        });
    }
    let ibp = integrate_by_parts(spec, &omega, &Bank::params(x.bank.clone()))?;
    let beta: Vec<Expr> = ibp.adjoint.iter().map(Expr::simplify).collect();
    let vanishing = beta.iter().map(Expr::is_zero_exact).collect();
    Ok(BianchiReport { omega, bank: x.bank.clone(), beta, superpotential: ibp.boundary, vanishing })
}

/// `ℋ^μ = Σ p^{μ,α}_i[ω] D_α(−£^i)`, with momenta of `ω` taken over the
/// field bank and the parameters held as given functions.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianCurrent {
    pub components: Vec<Expr>,
    /// `D_μ ℋ^μ`.
    pub divergence: Expr,
    /// `D_μ ℋ^μ − (−£)_pro(ω) − £^i E_i[ω]`; the literal zero.
    pub certificate: Expr,
}

impl HamiltonianCurrent {
    pub fn is_conserved(&self) -> bool {
        self.divergence.is_zero_exact()
    }
}

fn hamiltonian_parts(spec: &BundleSpec, omega: &Expr, x: &ParamVectorField) -> Result<(HamiltonianCurrent, Expr)> {
    let lie = x.field.lie_derivative_section(spec)?;
    let mom = momenta_of(spec, omega, &Bank::all_fields(spec))?;
    let components = mom.contract(spec.n(), &mut |i, alpha| Ok(-spec.iterated_total_derivative(&lie.0[i], alpha)?))?;
    let components: Vec<Expr> = components.iter().map(Expr::simplify).collect();
    let divergence = BoundaryCurrent(components.clone()).divergence(spec)?.simplify();
    let down = VectorField::vertical(spec, lie.0.iter().map(|l| -l).collect());
    let along = down.apply_prolonged(spec, omega)?;
    let contracted = Expr::sum(lie.0.iter().zip(&mom.euler_lagrange.0).map(|(l, e)| l * e));
    let certificate = (&(&divergence - &along) - &contracted).simplify();
    Ok((HamiltonianCurrent { components, divergence, certificate }, contracted))
}

pub fn hamiltonian_current(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    x: &ParamVectorField,
) -> Result<HamiltonianCurrent> {
    let report = bianchi_decompose(spec, lagrangian, x)?;
    if !report.all_vanish() {
        return Err(Error::BianchiNonzero);
    }
    Ok(hamiltonian_parts(spec, &report.omega, x)?.0)
}

/// Horizontal invariance of `ω`: `residual = L_{X_H} ω + D_μ ℋ^μ − L_X ω`
/// with `L_{X_H} ω = D_γ(ξ^γ ω)`. By the first-variation identity along
/// the vertical part the residual equals `£^i E_i[ω]`, which is checked.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalInvariance {
    pub horizontal: Expr,
    pub hamiltonian_divergence: Expr,
    /// `L_X ω` with the parameters held fixed.
    pub invariance: Expr,
    pub residual: Expr,
    /// Whether the residual equals `£^i E_i[ω]` exactly.
    pub identity_holds: bool,
    pub bianchi_vanish: bool,
}

impl HorizontalInvariance {
    pub fn passed(&self) -> bool {
        self.identity_holds && self.residual.is_zero_exact()
    }
}

pub fn verify_horizontal_invariance(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    x: &ParamVectorField,
) -> Result<HorizontalInvariance> {
    let report = bianchi_decompose(spec, lagrangian, x)?;
    let omega = &report.omega;
    let (h, contracted) = hamiltonian_parts(spec, omega, x)?;
    let flow = BoundaryCurrent(x.field.xi.iter().map(|xi| xi * omega).collect());
    let horizontal = flow.divergence(spec)?.simplify();
    let invariance = x.field.lie_derivative_density(spec, omega)?.simplify();
    let residual = (&(&horizontal + &h.divergence) - &invariance).simplify();
    let identity_holds = (&residual - &contracted).is_zero_exact() && h.certificate.is_zero_exact();
    Ok(HorizontalInvariance {
        horizontal,
        hamiltonian_divergence: h.divergence,
        invariance,
        residual,
        identity_holds,
        bianchi_vanish: report.all_vanish(),
    })
}

/// Whether the second variation of `λ` along the vertical part of the
/// lift, `δ²λ`, is a total divergence in the parameter bank. Paired with
/// [`bianchi_decompose`] this tests the kernel characterization.
pub fn lift_second_variation_is_divergence(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    x: &ParamVectorField,
) -> Result<bool> {
    if x.bank.is_empty() {
        return Ok(true);
    }
    let v = vertical_part(spec, &x.field)?;
    let second = formal_variation(spec, &lagrangian.density, &[v.clone(), v])?;
    if second.is_zero_exact() {
        return Ok(true);
    }
    Ok(polarize(spec, &second, &Bank::params(x.bank.clone()))?.is_divergence())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gauge_lift, metric_lift, BracketKind};

    fn maxwell(mass: bool) -> (BundleSpec, Lagrangian, ParamVectorField) {
        let s = BundleSpec::new(&["x", "y"], &["A1", "A2"], 2).unwrap().with_params(&["eps"]);
        let f = s.field_jet(1, &[1, 0]) - s.field_jet(0, &[0, 1]);
        let mut l = f.powi(2) * Expr::ratio(-1, 2);
        if mass {
            l = l - (s.field(0).powi(2) + s.field(1).powi(2)) * Expr::ratio(1, 2);
        }
        let lift = gauge_lift(&s, &[0, 1], 0);
        let lag = Lagrangian::new(&s, l).unwrap();
        (s, lag, lift)
    }

    #[test]
    fn maxwell_gauge_is_exact_and_bianchi_vanishes() {
        let (s, l, x) = maxwell(false);
        assert_eq!(check_symmetry(&s, &l, &x).unwrap(), SymmetryVerdict::Exact);
        let b = bianchi_decompose(&s, &l, &x).unwrap();
        assert!(b.all_vanish());
        assert!(b.residual(&s).unwrap().is_zero());
        let h = hamiltonian_current(&s, &l, &x).unwrap();
        assert!(h.is_conserved() && h.certificate.is_zero());
        let hi = verify_horizontal_invariance(&s, &l, &x).unwrap();
        assert!(hi.passed(), "{hi:?}");
        assert!(lift_second_variation_is_divergence(&s, &l, &x).unwrap());
        let nc = noether_current(&s, &l, &x).unwrap();
        assert!(nc.residual(&s).unwrap().is_zero());
    }

    #[test]
    fn proca_breaks_everything() {
        let (s, l, x) = maxwell(true);
        match check_symmetry(&s, &l, &x).unwrap() {
            SymmetryVerdict::Broken { residual, .. } => {
                let expect = -(s.field(0) * s.param_jet(0, &[1, 0]) + s.field(1) * s.param_jet(0, &[0, 1]));
                assert_eq!(residual, expect);
            }
            v => panic!("{v:?}"),
        }
        let b = bianchi_decompose(&s, &l, &x).unwrap();
        let div_a = s.field_jet(0, &[1, 0]) + s.field_jet(1, &[0, 1]);
        assert_eq!(b.beta, vec![-div_a]);
        assert!(b.residual(&s).unwrap().is_zero());
        assert_eq!(hamiltonian_current(&s, &l, &x), Err(Error::BianchiNonzero));
        assert_eq!(noether_current(&s, &l, &x), Err(Error::NotASymmetry));
        let hi = verify_horizontal_invariance(&s, &l, &x).unwrap();
        assert!(hi.identity_holds && !hi.residual.is_zero() && !hi.bianchi_vanish);
        assert!(!lift_second_variation_is_divergence(&s, &l, &x).unwrap());
    }

    #[test]
    fn pendulum_energy() {
        let s = BundleSpec::new(&["t"], &["u"], 2).unwrap();
        let u = s.field(0);
        let l = s.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2) - (Expr::one() - Expr::cos(u.clone()));
        let lag = Lagrangian::new(&s, l).unwrap();
        let x = ParamVectorField::new("time", vec![], VectorField::translation(&s, 0), BracketKind::Abelian);
        let nc = noether_current(&s, &lag, &x).unwrap();
        let expect = -(s.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2) + Expr::one() - Expr::cos(u));
        assert_eq!(nc.components, vec![expect]);
        assert!(nc.residual(&s).unwrap().is_zero());
        let b = bianchi_decompose(&s, &lag, &x).unwrap();
        assert!(b.beta.is_empty() && b.superpotential.0.iter().all(Expr::is_zero));
        assert_eq!(b.omega, omega_lagrangian(&s, &lag, &x).unwrap());
    }

    #[test]
    fn wave_momentum_current() {
        let s = BundleSpec::new(&["t", "x"], &["u"], 2).unwrap();
        let (ut, ux) = (s.field_jet(0, &[1, 0]), s.field_jet(0, &[0, 1]));
        let l = (ut.powi(2) - ux.powi(2)) * Expr::ratio(1, 2);
        let lag = Lagrangian::new(&s, l).unwrap();
        let x = ParamVectorField::new("space", vec![], VectorField::translation(&s, 1), BracketKind::Abelian);
        let nc = noether_current(&s, &lag, &x).unwrap();
        assert_eq!(nc.components[0], -(&ut * &ux));
        assert_eq!(nc.components[1], (ut.powi(2) + ux.powi(2)) * Expr::ratio(1, 2));
        assert!(nc.residual(&s).unwrap().is_zero());
        let zero = ParamVectorField::new("zero", vec![], VectorField::zero(&s), BracketKind::Abelian);
        assert!(noether_current(&s, &lag, &zero).unwrap().components.iter().all(Expr::is_zero));
    }

    #[test]
    fn scalar_omega() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let lag = Lagrangian::new(&s, s.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2)).unwrap();
        let x =
            ParamVectorField::new("shift", vec![0], VectorField::vertical(&s, vec![s.param(0)]), BracketKind::Abelian);
        assert_eq!(omega_lagrangian(&s, &lag, &x).unwrap(), s.param(0) * s.field_jet(0, &[2]));
    }

    #[test]
    fn metric_density_bianchi() {
        let s = BundleSpec::new(&["x", "y"], &["g11", "g12", "g22"], 1).unwrap().with_params(&["e1", "e2"]);
        let det = s.field(0) * s.field(2) - s.field(1).powi(2);
        let lag = Lagrangian::new(&s, Expr::sqrt(det)).unwrap();
        let x = metric_lift(&s, &|a, b| a + b, &[0, 1]);
        assert!(check_symmetry(&s, &lag, &x).unwrap().is_symmetry());
        let b = bianchi_decompose(&s, &lag, &x).unwrap();
        assert!(b.all_vanish(), "{:?}", b.beta);
        assert!(b.residual(&s).unwrap().is_zero());
    }
}
