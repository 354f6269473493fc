//! Second variation, linearized Euler–Lagrange operators, formal adjoints,
//! the comparison of iterated contractions with the second variation, and
//! Jacobi-field (kernel) tests.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::bundle::{enumerate_multiindices, BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Coeff, Expr, Family, JetVar, VarKey};
use crate::fields::VectorField;
use crate::oracle;
use crate::variational::{
    euler_lagrange, euler_operator, integrate_by_parts, momenta, polarize, Bank, BoundaryCurrent, Lagrangian,
    Polarization,
};

/// Matrix linear differential operator `(JΦ)_i = Σ_{j,β} J^β_{ij} D_β Φ^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinDiffOp {
    pub rows: usize,
    pub cols: usize,
    /// Nonzero coefficients keyed by `(i, j, β)`.
    pub coeffs: BTreeMap<(usize, usize, MultiIndex), Expr>,
}

impl LinDiffOp {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, coeffs: BTreeMap::new() }
    }

    pub fn get(&self, i: usize, j: usize, beta: &MultiIndex) -> Expr {
        self.coeffs.get(&(i, j, beta.clone())).cloned().unwrap_or_default()
    }

    pub fn insert(&mut self, i: usize, j: usize, beta: MultiIndex, c: Expr) {
        let key = (i, j, beta);
        let total = self.coeffs.remove(&key).unwrap_or_default() + c;
        if !total.is_zero() {
            self.coeffs.insert(key, total);
        }
    }

    /// Highest `|β|` with a nonzero coefficient.
    pub fn order(&self) -> usize {
        self.coeffs.keys().map(|(_, _, b)| b.order()).max().unwrap_or(0)
    }

    pub fn apply(&self, spec: &BundleSpec, phi: &[Expr]) -> Result<Vec<Expr>> {
        let mut out = vec![Expr::zero(); self.rows];
        let mut cache: BTreeMap<(usize, MultiIndex), Expr> = BTreeMap::new();
        for ((i, j, beta), c) in &self.coeffs {
            let key = (*j, beta.clone());
            if !cache.contains_key(&key) {
                cache.insert(key.clone(), spec.iterated_total_derivative(&phi[*j], beta)?);
            }
            out[*i] += &(c * &cache[&key]);
        }
        Ok(out)
    }

    /// Formal adjoint `J*^γ_{ji} = Σ_{β≥γ} (−1)^{|β|} C(β,γ) D_{β−γ} J^β_{ij}`.
    pub fn adjoint(&self, spec: &BundleSpec) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::new(self.cols, self.rows);
        for ((i, j, beta), c) in &self.coeffs {
            for gamma in beta.sub_indices() {
                spec.cancel.check()?;
                let rest = beta.checked_sub(&gamma).expect("gamma below beta");
                let d = spec.iterated_total_derivative(c, &rest)?;
                let sign: BigInt = if beta.order() % 2 == 0 { 1.into() } else { (-1).into() };
                let k = Coeff::from_integer(sign * beta.binomial(&gamma));
                out.insert(*j, *i, gamma, d.scale(&k));
            }
        }
        Ok(out)
    }

    /// Coefficient-wise exact equality.
    pub fn equals(&self, other: &LinDiffOp) -> bool {
        let keys: std::collections::BTreeSet<_> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        self.rows == other.rows
            && self.cols == other.cols
            && keys.into_iter().all(|(i, j, b)| (self.get(*i, *j, b) - other.get(*i, *j, b)).is_zero_exact())
    }

    /// Certifies `Φ·(JΨ) − Ψ·(J*Φ)` as an exact divergence over fresh banks,
    /// returning the boundary current.
    pub fn adjoint_certificate(&self, spec: &BundleSpec, adjoint: &LinDiffOp) -> Result<Option<BoundaryCurrent>> {
        let mut work = spec.clone();
        let phi: Vec<usize> = (0..self.rows).map(|_| work.fresh_param("Phi")).collect();
        let psi: Vec<usize> = (0..self.cols).map(|_| work.fresh_param("Psi")).collect();
        let phi_e: Vec<Expr> = phi.iter().map(|&a| work.param(a)).collect();
        let psi_e: Vec<Expr> = psi.iter().map(|&a| work.param(a)).collect();
        let j_psi = self.apply(&work, &psi_e)?;
        let js_phi = adjoint.apply(&work, &phi_e)?;
        let density = Expr::sum(phi_e.iter().zip(&j_psi).map(|(a, b)| a * b))
            - Expr::sum(psi_e.iter().zip(&js_phi).map(|(a, b)| a * b));
        let ibp = integrate_by_parts(&work, &density, &Bank::params(psi))?;
        if ibp.adjoint.iter().all(Expr::is_zero_exact) && ibp.residual(&work, &density)?.is_zero() {
            Ok(Some(ibp.boundary))
        } else {
            Ok(None)
        }
    }

    /// Evaluates every coefficient along a section.
    pub fn along_section(&self, spec: &BundleSpec, section: &[Expr]) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::new(self.rows, self.cols);
        for ((i, j, b), c) in &self.coeffs {
            out.insert(*i, *j, b.clone(), spec.substitute_section(c, section)?);
        }
        Ok(out)
    }

    /// The `(i, j)` block as a scalar operator.
    pub fn block(&self, i: usize, j: usize) -> LinDiffOp {
        let mut out = LinDiffOp::new(1, 1);
        for ((a, b, beta), c) in &self.coeffs {
            if *a == i && *b == j {
                out.insert(0, 0, beta.clone(), c.clone());
            }
        }
        out
    }
}

/// `J^β_{ij} = ∂E_i/∂y^j_β`.
pub fn linearize(spec: &BundleSpec, source: &[Expr]) -> Result<LinDiffOp> {
    let mut out = LinDiffOp::new(source.len(), spec.m());
    for (i, e) in source.iter().enumerate() {
        for v in e.jet_vars() {
            if v.family != Family::Field {
                continue;
            }
            spec.cancel.check()?;
            let c = e.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
            out.insert(i, v.index as usize, v.alpha.clone(), c);
        }
    }
    Ok(out)
}

pub fn linearize_el(spec: &BundleSpec, lagrangian: &Lagrangian) -> Result<LinDiffOp> {
    linearize(spec, &euler_lagrange(spec, lagrangian)?.0)
}

/// `δ^k f = L_{X_k} … L_{X_1} f` on densities.
pub fn formal_variation(spec: &BundleSpec, density: &Expr, fields: &[VectorField]) -> Result<Expr> {
    let mut out = density.clone();
    for x in fields {
        out = x.lie_derivative_density(spec, &out)?;
    }
    Ok(out)
}

/// `B(Φ,Ψ) = δ_Ψ δ_Φ λ = H + D_μ G^μ` with
/// `H = Φ^i (JΨ)_i + Ψ(Φ^i) E_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondVariation {
    pub density: Expr,
    pub h_part: Expr,
    pub boundary: BoundaryCurrent,
}

impl SecondVariation {
    pub fn residual(&self, spec: &BundleSpec) -> Result<Expr> {
        Ok((&self.h_part + &self.boundary.divergence(spec)? - &self.density).simplify())
    }
}

fn require_vertical(x: &VectorField, spec: &BundleSpec) -> Result<()> {
    x.validate(spec)?;
    if !x.is_vertical() {
        return Err(Error::Precondition("variation fields must be vertical".into()));
    }
    Ok(())
}

pub fn second_variation(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    phi: &VectorField,
    psi: &VectorField,
) -> Result<SecondVariation> {
    require_vertical(phi, spec)?;
    require_vertical(psi, spec)?;
    let n = spec.n();
    let density = formal_variation(spec, &lagrangian.density, &[phi.clone(), psi.clone()])?;
    let mom = momenta(spec, lagrangian)?;
    let e = &mom.euler_lagrange.0;
    let j = linearize(spec, e)?;
    let j_psi = j.apply(spec, &psi.components)?;
    let mut h_parts = Vec::new();
    for i in 0..spec.m() {
        h_parts.push(&phi.components[i] * &j_psi[i]);
        let moved = psi.apply_prolonged(spec, &phi.components[i])?;
        if !moved.is_zero() {
            h_parts.push(&moved * &e[i]);
        }
    }
    // G^μ = Ψ(Σ p^{μ,α}_i D_α Φ^i)
    let m_phi = mom.contract(n, &mut |i, alpha| spec.iterated_total_derivative(&phi.components[i], alpha))?;
    let boundary = m_phi.iter().map(|c| psi.apply_prolonged(spec, c)).collect::<Result<Vec<_>>>()?;
    Ok(SecondVariation { density, h_part: Expr::sum(h_parts), boundary: BoundaryCurrent(boundary) })
}

/// Outcome of comparing the iterated contraction `Φ⌋E(Φ⌋E(λ))` with the
/// second variation `δ²λ` along the same vertical field.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub contracted: Expr,
    pub second_variation: Expr,
    /// `contracted − second_variation`.
    pub residual: Expr,
    pub certificate: Polarization,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.certificate.is_divergence()
    }
}

/// `bank` lists the parameter functions on which `Φ` depends linearly; the
/// residual is quadratic in them and is decided by polarization.
pub fn verify_comparison_theorem(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    phi: &VectorField,
    bank: &Bank,
) -> Result<ComparisonReport> {
    require_vertical(phi, spec)?;
    let e = euler_lagrange(spec, lagrangian)?.0;
    let once = Expr::sum(phi.components.iter().zip(&e).map(|(a, b)| a * b));
    let e2 = euler_operator(spec, &once, &Bank::all_fields(spec))?;
    let contracted = Expr::sum(phi.components.iter().zip(&e2).map(|(a, b)| a * b));
    let second = formal_variation(spec, &lagrangian.density, &[phi.clone(), phi.clone()])?;
    let residual = &contracted - &second;
    let certificate = if residual.is_zero() {
        Polarization {
            degree: 2,
            euler: vec![Expr::zero(); bank.indices.len()],
            volume: Expr::zero(),
            boundary: BoundaryCurrent::zero(spec.n()),
        }
    } else {
        polarize(spec, &residual, bank)?
    };
    Ok(ComparisonReport { contracted, second_variation: second, residual, certificate })
}

/// Result of evaluating `JΦ` along a background solution.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelVerdict {
    /// `JΦ` reduces to the zero expression.
    Exact,
    /// `JΦ` vanishes at every sample point within the tolerance.
    Numeric {
        max_abs: f64,
    },
    NotInKernel {
        residual: Vec<Expr>,
        max_abs: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub background_residual: f64,
    pub j_phi: Vec<Expr>,
    pub verdict: KernelVerdict,
}

impl KernelReport {
    pub fn in_kernel(&self) -> bool {
        !matches!(self.verdict, KernelVerdict::NotInKernel { .. })
    }
}

/// Tests whether `Φ` (components in the base coordinates) is a Jacobi
/// field along `background`. Numeric checks sample the box
/// `[0.1, 2.9]^n`.
pub fn kernel_test(
    spec: &BundleSpec,
    lagrangian: &Lagrangian,
    phi: &[Expr],
    background: &[Expr],
    tolerance: f64,
) -> Result<KernelReport> {
    let e = euler_lagrange(spec, lagrangian)?.0;
    let samples = oracle::sample_points(spec.n());
    let mut background_residual = 0.0f64;
    for ei in &e {
        let on = spec.substitute_section(ei, background)?;
        if on.is_zero_exact() {
            continue;
        }
        for p in &samples {
            background_residual = background_residual.max(oracle::eval_at(&on, p)?.abs());
        }
    }
    if background_residual > oracle::Tolerances::default().background {
        return Err(Error::BackgroundNotCritical { residual: background_residual });
    }
    let j = linearize(spec, &e)?.along_section(spec, background)?;
    let mut j_phi = vec![Expr::zero(); j.rows];
    for ((i, jj, beta), c) in &j.coeffs {
        j_phi[*i] += &(c * &spec.coordinate_derivative(&phi[*jj], beta)?);
    }
    if j_phi.iter().all(Expr::is_zero_exact) {
        return Ok(KernelReport { background_residual, j_phi, verdict: KernelVerdict::Exact });
    }
    let mut max_abs = 0.0f64;
    for r in &j_phi {
        for p in &samples {
            max_abs = max_abs.max(oracle::eval_at(r, p)?.abs());
        }
    }
    let verdict = if max_abs <= tolerance {
        KernelVerdict::Numeric { max_abs }
    } else {
        KernelVerdict::NotInKernel { residual: j_phi.clone(), max_abs }
    };
    Ok(KernelReport { background_residual, j_phi, verdict })
}

/// Coefficients `(a_0, a_1, a_2)` of a scalar second-order operator
/// `a_2 D² + a_1 D + a_0` on a one-dimensional base.
pub fn scalar_ode_coefficients(op: &LinDiffOp) -> Result<[Expr; 3]> {
    if op.rows != 1 || op.cols != 1 || op.order() > 2 {
        return Err(Error::Precondition("expected a scalar operator of order at most two".into()));
    }
    if op.coeffs.keys().any(|(_, _, b)| b.dim() != 1) {
        return Err(Error::Precondition("expected a one-dimensional base".into()));
    }
    let c = |k: u8| op.get(0, 0, &MultiIndex::from_slice(&[k]));
    Ok([c(0), c(1), c(2)])
}

/// Multi-indices up to the operator order, for rendering.
pub fn support(op: &LinDiffOp, n: usize) -> Vec<MultiIndex> {
    let present: std::collections::BTreeSet<_> = op.coeffs.keys().map(|(_, _, b)| b.clone()).collect();
    enumerate_multiindices(n, op.order()).into_iter().filter(|b| present.contains(b)).collect()
}

/// Vertical components `−£^i` of a (possibly lifted) field, as a vertical
/// field.
pub fn vertical_part(spec: &BundleSpec, x: &VectorField) -> Result<VectorField> {
    let lie = x.lie_derivative_section(spec)?;
    Ok(VectorField::vertical(spec, lie.0.into_iter().map(|l| -l).collect()))
}

/// Jet variables of a family present in an operator's coefficients.
pub fn coefficient_vars(op: &LinDiffOp) -> std::collections::BTreeSet<JetVar> {
    op.coeffs.values().flat_map(|c| c.jet_vars()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(e: Expr) -> Expr {
        e * Expr::ratio(1, 2)
    }

    fn mi(v: &[u8]) -> MultiIndex {
        MultiIndex::from_slice(v)
    }

    #[test]
    fn formal_variation_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let l = half(s.field_jet(0, &[1]).powi(2));
        let x = VectorField::vertical(&s, vec![s.param(0)]);
        assert_eq!(
            formal_variation(&s, &l, std::slice::from_ref(&x)).unwrap(),
            s.param_jet(0, &[1]) * s.field_jet(0, &[1])
        );
        assert_eq!(formal_variation(&s, &l, &[x.clone(), x]).unwrap(), s.param_jet(0, &[1]).powi(2));
        assert!(formal_variation(&s, &l, &[VectorField::zero(&s)]).unwrap().is_zero());
    }

    #[test]
    fn linearize_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2))).unwrap();
        let j = linearize_el(&s, &l).unwrap();
        assert_eq!(j.coeffs.len(), 1);
        assert_eq!(j.get(0, 0, &mi(&[2])), Expr::int(-1));
    }

    #[test]
    fn adjoint_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let mut j = LinDiffOp::new(1, 1);
        j.insert(0, 0, mi(&[2]), Expr::int(-1));
        assert!(j.adjoint(&s).unwrap().equals(&j));
        let mut d = LinDiffOp::new(1, 1);
        d.insert(0, 0, mi(&[1]), Expr::one());
        let mut minus_d = LinDiffOp::new(1, 1);
        minus_d.insert(0, 0, mi(&[1]), Expr::int(-1));
        assert!(d.adjoint(&s).unwrap().equals(&minus_d));
        let a = Expr::sin(Expr::coord(0));
        let mut ad = LinDiffOp::new(1, 1);
        ad.insert(0, 0, mi(&[1]), a.clone());
        let star = ad.adjoint(&s).unwrap();
        assert_eq!(star.get(0, 0, &mi(&[1])), -a);
        assert_eq!(star.get(0, 0, &mi(&[0])), -Expr::cos(Expr::coord(0)));
        assert!(ad.adjoint_certificate(&s, &star).unwrap().is_some());
        assert!(ad.adjoint_certificate(&s, &ad).unwrap().is_none());
    }

    #[test]
    fn second_variation_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2))).unwrap();
        let x = VectorField::vertical(&s, vec![s.param(0)]);
        let b = second_variation(&s, &l, &x, &x).unwrap();
        assert_eq!(b.density, s.param_jet(0, &[1]).powi(2));
        assert_eq!(b.h_part, -(s.param(0) * s.param_jet(0, &[2])));
        assert_eq!(b.boundary.0, vec![s.param(0) * s.param_jet(0, &[1])]);
        assert!(b.residual(&s).unwrap().is_zero());
        let lin = Lagrangian::new(&s, Expr::coord(0) * s.field(0)).unwrap();
        assert!(second_variation(&s, &lin, &x, &x).unwrap().density.is_zero());
        let zero = VectorField::zero(&s);
        assert!(second_variation(&s, &l, &zero, &x).unwrap().density.is_zero());
    }

    #[test]
    fn second_variation_with_field_dependent_direction() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2)) + s.field(0).powi(3)).unwrap();
        let phi = VectorField::vertical(&s, vec![s.field(0) * s.param(0)]);
        let psi = VectorField::vertical(&s, vec![s.field_jet(0, &[1])]);
        assert!(second_variation(&s, &l, &phi, &psi).unwrap().residual(&s).unwrap().is_zero());
    }

    #[test]
    fn comparison_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2))).unwrap();
        let x = VectorField::vertical(&s, vec![s.param(0)]);
        let r = verify_comparison_theorem(&s, &l, &x, &Bank::params(vec![0])).unwrap();
        assert_eq!(r.contracted, -(s.param(0) * s.param_jet(0, &[2])));
        assert_eq!(r.second_variation, s.param_jet(0, &[1]).powi(2));
        assert!(r.passed());
        assert_eq!(r.certificate.boundary.0, vec![-(s.param(0) * s.param_jet(0, &[1]))]);
    }
}
