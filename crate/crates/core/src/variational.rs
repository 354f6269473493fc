//! First-variation machinery: integration by parts with boundary
//! certificates, the Euler–Lagrange operator, momenta, the first variation
//! formula and the divergence decision.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::bundle::{BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Atom, Coeff, Exponent, Expr, Family, JetVar, VarKey};
use crate::fields::VectorField;
use crate::forms::{Form, Generator};

/// A set of jet families (fields or parameter functions) singled out as
/// the variables of an integration by parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bank {
    pub family: Family,
    pub indices: Vec<usize>,
}

impl Bank {
    pub fn params(indices: Vec<usize>) -> Self {
        Self { family: Family::Param, indices }
    }

    pub fn fields(indices: Vec<usize>) -> Self {
        Self { family: Family::Field, indices }
    }

    pub fn all_fields(spec: &BundleSpec) -> Self {
        Self::fields((0..spec.m()).collect())
    }

    pub fn contains(&self, v: &JetVar) -> bool {
        v.family == self.family && self.indices.contains(&(v.index as usize))
    }

    fn var(&self, k: usize, alpha: MultiIndex) -> JetVar {
        match self.family {
            Family::Field => JetVar::field(self.indices[k], alpha),
            Family::Param => JetVar::param(self.indices[k], alpha),
        }
    }
}

/// A Lagrangian density `L` of the top form `λ = L ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrangian {
    pub density: Expr,
}

impl Lagrangian {
    /// Validates that `L` has no parameter functions and order at most the
    /// bundle's declared jet order.
    pub fn new(spec: &BundleSpec, density: Expr) -> Result<Self> {
        if density.contains_family(Family::Param) {
            return Err(Error::Precondition("a Lagrangian may not depend on parameter functions".into()));
        }
        let order = density.jet_order();
        if order > spec.max_order {
            return Err(Error::OrderOverflow { order, cap: spec.max_order });
        }
        Ok(Self { density })
    }
}

/// Components `E_i` of the source form `E_i θ^i ∧ ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceExpression(pub Vec<Expr>);

/// Components `P^μ` of a horizontal `(n−1)`-form `P^μ ds_μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurrent(pub Vec<Expr>);

impl BoundaryCurrent {
    pub fn zero(n: usize) -> Self {
        Self(vec![Expr::zero(); n])
    }

    pub fn divergence(&self, spec: &BundleSpec) -> Result<Expr> {
        spec.divergence(&self.0)
    }
}

/// `density = Σ_A adjoint_A ε^A + D_μ boundary^μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IbpResult {
    pub bank: Bank,
    /// Coefficient of the undifferentiated bank variable, per bank entry.
    pub adjoint: Vec<Expr>,
    pub boundary: BoundaryCurrent,
}

impl IbpResult {
    /// `Σ adjoint_A ε^A + D_μ boundary^μ − density`; zero for a valid
    /// certificate.
    pub fn residual(&self, spec: &BundleSpec, density: &Expr) -> Result<Expr> {
        let n = spec.n();
        let volume = Expr::sum(
            self.adjoint.iter().enumerate().map(|(k, a)| a * &Expr::jet(self.bank.var(k, MultiIndex::zero(n)))),
        );
        Ok((volume + self.boundary.divergence(spec)? - density).simplify())
    }
}

fn check_linear(density: &Expr, bank: &Bank) -> Result<()> {
    let degrees = density
        .degrees_in(&|v| bank.contains(v))
        .ok_or_else(|| Error::NotLinear("bank variable inside a non-polynomial factor".into()))?;
    if let Some(d) = degrees.iter().find(|&&d| d != 1) {
        return Err(Error::NotLinear(format!("a term has degree {d} in the bank")));
    }
    Ok(())
}

/// Integrates a density linear in `bank` by parts, peeling the
/// highest-order bank derivative first (lexicographically largest
/// multi-index among those, splitting along the smallest direction).
pub fn integrate_by_parts(spec: &BundleSpec, density: &Expr, bank: &Bank) -> Result<IbpResult> {
    check_linear(density, bank)?;
    let n = spec.n();
    let mut remaining = density.clone();
    let mut boundary = vec![Expr::zero(); n];
    loop {
        spec.cancel.check()?;
        let target = remaining.jet_vars().into_iter().filter(|v| bank.contains(v) && v.order() > 0).max_by(|a, b| {
            a.order().cmp(&b.order()).then_with(|| a.alpha.cmp(&b.alpha)).then_with(|| b.index.cmp(&a.index))
        });
        let Some(v) = target else { break };
        let c = remaining.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
        let sigma = v.alpha.first_direction().expect("positive order");
        let lower = Expr::jet(v.with_alpha(v.alpha.lower(sigma).expect("positive component")));
        // c ε_α = D_σ(c ε_{α−σ}) − D_σ(c) ε_{α−σ}
        let dc = spec.total_derivative(&c, sigma)?;
        remaining = remaining - &c * &Expr::jet(v.clone()) - &dc * &lower;
        boundary[sigma] += &(&c * &lower);
    }
    let adjoint = (0..bank.indices.len())
        .map(|k| remaining.partial(&VarKey::Jet(bank.var(k, MultiIndex::zero(n))), &spec.symbols))
        .collect::<Result<Vec<_>>>()?;
    Ok(IbpResult { bank: bank.clone(), adjoint, boundary: BoundaryCurrent(boundary) })
}

/// `Σ_α (−1)^{|α|} D_α (∂f/∂v_α)` for each variable of `bank`.
pub fn euler_operator(spec: &BundleSpec, density: &Expr, bank: &Bank) -> Result<Vec<Expr>> {
    let vars = density.jet_vars();
    let mut out = Vec::with_capacity(bank.indices.len());
    for k in 0..bank.indices.len() {
        let mut parts = Vec::new();
        for v in vars.iter().filter(|v| v.family == bank.family && v.index as usize == bank.indices[k]) {
            spec.cancel.check()?;
            let p = density.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
            let d = spec.iterated_total_derivative(&p, &v.alpha)?;
            parts.push(if v.order() % 2 == 0 { d } else { -d });
        }
        out.push(Expr::sum(parts));
    }
    Ok(out)
}

pub fn euler_lagrange(spec: &BundleSpec, lagrangian: &Lagrangian) -> Result<SourceExpression> {
    Ok(SourceExpression(euler_operator(spec, &lagrangian.density, &Bank::all_fields(spec))?))
}

/// Momenta `p^{μ,α}_i` of `d_V λ` together with the Euler–Lagrange
/// expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct Momenta {
    /// `(μ, i, α) ↦ p^{μ,α}_i`, nonzero entries only.
    pub coefficients: BTreeMap<(usize, usize, MultiIndex), Expr>,
    pub euler_lagrange: SourceExpression,
}

impl Momenta {
    pub fn get(&self, mu: usize, i: usize, alpha: &MultiIndex) -> Expr {
        self.coefficients.get(&(mu, i, alpha.clone())).cloned().unwrap_or_default()
    }

    /// Contracts the momenta with vertical components `φ^i_α`, giving the
    /// current `Σ p^{μ,α}_i φ^i_α`.
    pub fn contract(&self, n: usize, comp: &mut dyn FnMut(usize, &MultiIndex) -> Result<Expr>) -> Result<Vec<Expr>> {
        let mut out = vec![Expr::zero(); n];
        let mut cache: BTreeMap<(usize, MultiIndex), Expr> = BTreeMap::new();
        for ((mu, i, alpha), p) in &self.coefficients {
            let key = (*i, alpha.clone());
            if !cache.contains_key(&key) {
                let v = comp(*i, alpha)?;
                cache.insert(key.clone(), v);
            }
            out[*mu] += &(p * &cache[&key]);
        }
        Ok(out)
    }

    /// The momentum form `P = −Σ p^{μ,α}_i θ^i_α ∧ ds_μ`, for which
    /// `d_V λ = E_i θ^i ∧ ds + d_H P`.
    pub fn form(&self, n: usize) -> Form {
        let mut out = Form::zero();
        for ((mu, i, alpha), p) in &self.coefficients {
            let t = Form::theta(*i, alpha.clone()).wedge(&Form::volume_contracted(n, *mu));
            out = out + t.scale(&-p);
        }
        out
    }
}

/// Replaces a bank of jet variables by a fresh bank of parameter functions,
/// one per entry, returning the working bundle and the fresh indices.
fn fresh_copy(spec: &BundleSpec, count: usize, stem: &str) -> (BundleSpec, Vec<usize>) {
    let mut work = spec.clone();
    let fresh = (0..count).map(|_| work.fresh_param(stem)).collect();
    (work, fresh)
}

/// Momenta of a density with respect to the jets of `bank`, by integrating
/// `Σ ∂f/∂v^k_α φ^k_α` by parts over a fresh bank `φ`.
pub fn momenta_of(spec: &BundleSpec, density: &Expr, bank: &Bank) -> Result<Momenta> {
    let (work, fresh) = fresh_copy(spec, bank.indices.len(), "phi");
    let mut linear = Vec::new();
    for v in density.jet_vars() {
        if !bank.contains(&v) {
            continue;
        }
        let k = bank.indices.iter().position(|&i| i == v.index as usize).expect("bank member");
        let p = density.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
        linear.push(&p * &Expr::param(fresh[k], v.alpha.clone()));
    }
    let linear = Expr::sum(linear);
    let fresh_bank = Bank::params(fresh.clone());
    let ibp = integrate_by_parts(&work, &linear, &fresh_bank)?;
    let mut coefficients = BTreeMap::new();
    for (mu, b) in ibp.boundary.0.iter().enumerate() {
        for v in b.jet_vars() {
            if !fresh_bank.contains(&v) {
                continue;
            }
            let k = fresh.iter().position(|&f| f == v.index as usize).expect("fresh member");
            let p = b.partial(&VarKey::Jet(v.clone()), &work.symbols)?;
            if !p.is_zero() {
                coefficients.insert((mu, bank.indices[k], v.alpha.clone()), p);
            }
        }
    }
    Ok(Momenta { coefficients, euler_lagrange: SourceExpression(ibp.adjoint) })
}

pub fn momenta(spec: &BundleSpec, lagrangian: &Lagrangian) -> Result<Momenta> {
    momenta_of(spec, &lagrangian.density, &Bank::all_fields(spec))
}

/// `L_X λ = (−£^i E_i + D_μ P^μ) ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstVariation {
    /// `−£^i E_i`.
    pub contracted: Expr,
    /// `P^μ = −Σ p^{μ,α}_i D_α £^i + ξ^μ L`.
    pub boundary: BoundaryCurrent,
    /// The density of `L_X λ`.
    pub lie_derivative: Expr,
}

impl FirstVariation {
    /// `contracted + D_μ P^μ − L_X λ`.
    pub fn residual(&self, spec: &BundleSpec) -> Result<Expr> {
        Ok((&self.contracted + &self.boundary.divergence(spec)? - &self.lie_derivative).simplify())
    }
}

pub fn first_variation(spec: &BundleSpec, lagrangian: &Lagrangian, x: &VectorField) -> Result<FirstVariation> {
    let n = spec.n();
    let lie = x.lie_derivative_section(spec)?;
    let mom = momenta(spec, lagrangian)?;
    let contracted = -Expr::sum(lie.0.iter().zip(&mom.euler_lagrange.0).map(|(l, e)| l * e));
    let mut current = mom.contract(n, &mut |i, alpha| Ok(-spec.iterated_total_derivative(&lie.0[i], alpha)?))?;
    for (mu, xi) in x.xi.iter().enumerate() {
        if !xi.is_zero() {
            current[mu] += &(xi * &lagrangian.density);
        }
    }
    let lie_derivative = x.lie_derivative_density(spec, &lagrangian.density)?;
    Ok(FirstVariation { contracted, boundary: BoundaryCurrent(current), lie_derivative })
}

/// Whether `density` is a total divergence: its Euler operator vanishes
/// with respect to every field and every parameter function.
pub fn is_divergence(spec: &BundleSpec, density: &Expr) -> Result<bool> {
    let fields = euler_operator(spec, density, &Bank::all_fields(spec))?;
    let params = euler_operator(spec, density, &Bank::params((0..spec.params.len()).collect()))?;
    Ok(fields.iter().chain(&params).all(Expr::is_zero_exact))
}

/// Reconstructs `W` with `D_μ W^μ = density` for densities polynomial in
/// all jet variables; `None` if the density is not of that shape or not a
/// divergence.
pub fn divergence_potential(spec: &BundleSpec, density: &Expr) -> Result<Option<BoundaryCurrent>> {
    let n = spec.n();
    let jet = |_: &JetVar| true;
    let Some(parts) = density.homogeneous_parts(&jet) else { return Ok(None) };
    let (m, p) = (spec.m(), spec.params.len());
    let (work, fresh) = fresh_copy(spec, m + p, "w");
    let copy_of = |v: &JetVar| match v.family {
        Family::Field => fresh[v.index as usize],
        Family::Param => fresh[m + v.index as usize],
    };
    let mut total = vec![Expr::zero(); n];
    for (degree, part) in parts {
        if degree == 0 {
            match integrate_in_first_coordinate(&part) {
                Some(w) => total[0] += &w,
                None => return Ok(None),
            }
            continue;
        }
        let mut linear = Vec::new();
        for v in part.jet_vars() {
            let c = part.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
            linear.push(&c * &Expr::param(copy_of(&v), v.alpha.clone()));
        }
        let ibp = integrate_by_parts(&work, &Expr::sum(linear), &Bank::params(fresh.clone()))?;
        if !ibp.adjoint.iter().all(Expr::is_zero_exact) {
            return Ok(None);
        }
        let inv = Coeff::new(1.into(), (degree as i64).into());
        for (mu, b) in ibp.boundary.0.iter().enumerate() {
            let back = b.replace_leaves(&mut |a| match a {
                Atom::Jet(v) if v.family == Family::Param && fresh.contains(&(v.index as usize)) => {
                    let k = fresh.iter().position(|&f| f == v.index as usize).expect("fresh member");
                    Some(if k < m { Expr::field(k, v.alpha.clone()) } else { Expr::param(k - m, v.alpha.clone()) })
                }
                _ => None,
            })?;
            total[mu] += &back.scale(&inv);
        }
    }
    let current = BoundaryCurrent(total);
    if (current.divergence(spec)? - density).is_zero_exact() {
        Ok(Some(current))
    } else {
        Ok(None)
    }
}

/// Splitting `density = volume + D_μ boundary^μ` of a density homogeneous
/// of degree `k ≥ 1` in a bank, with `volume = (1/k) Σ_A E_A(density) ε^A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polarization {
    pub degree: u32,
    /// `E_A(density)` for each bank entry.
    pub euler: Vec<Expr>,
    pub volume: Expr,
    pub boundary: BoundaryCurrent,
}

impl Polarization {
    /// Whether the density is an exact divergence.
    pub fn is_divergence(&self) -> bool {
        self.volume.is_zero_exact()
    }

    pub fn residual(&self, spec: &BundleSpec, density: &Expr) -> Result<Expr> {
        Ok((&self.volume + &self.boundary.divergence(spec)? - density).simplify())
    }
}

/// Uses Euler homogeneity `Σ ε_α ∂f/∂ε_α = k f`: one factor is moved to a
/// fresh copy of the bank, the result is integrated by parts over the copy
/// and the copy is identified with the bank again.
pub fn polarize(spec: &BundleSpec, density: &Expr, bank: &Bank) -> Result<Polarization> {
    let n = spec.n();
    let degrees = density
        .degrees_in(&|v| bank.contains(v))
        .ok_or_else(|| Error::NotLinear("bank variable inside a non-polynomial factor".into()))?;
    let degree = degrees.first().copied().unwrap_or(1);
    if degree == 0 || degrees.iter().any(|&d| d != degree) {
        return Err(Error::NotLinear(format!(
            "density is not homogeneous of positive degree in the bank: {degrees:?}"
        )));
    }
    let (work, fresh) = fresh_copy(spec, bank.indices.len(), "psi");
    let mut linear = Vec::new();
    for v in density.jet_vars() {
        if !bank.contains(&v) {
            continue;
        }
        let k = bank.indices.iter().position(|&i| i == v.index as usize).expect("bank member");
        let c = density.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
        linear.push(&c * &Expr::param(fresh[k], v.alpha.clone()));
    }
    let ibp = integrate_by_parts(&work, &Expr::sum(linear), &Bank::params(fresh.clone()))?;
    let back = |e: &Expr| {
        e.replace_leaves(&mut |a| match a {
            Atom::Jet(v) if v.family == Family::Param && fresh.contains(&(v.index as usize)) => {
                let k = fresh.iter().position(|&f| f == v.index as usize).expect("fresh member");
                Some(Expr::jet(bank.var(k, v.alpha.clone())))
            }
            _ => None,
        })
    };
    let inv = Coeff::new(1.into(), (degree as i64).into());
    let volume =
        Expr::sum(ibp.adjoint.iter().enumerate().map(|(k, a)| a * &Expr::jet(bank.var(k, MultiIndex::zero(n)))))
            .scale(&inv);
    let boundary = ibp.boundary.0.iter().map(|b| Ok(back(b)?.scale(&inv))).collect::<Result<Vec<_>>>()?;
    Ok(Polarization { degree, euler: ibp.adjoint, volume, boundary: BoundaryCurrent(boundary) })
}

/// Antiderivative in `x^1` of an expression polynomial in `x^1`.
fn integrate_in_first_coordinate(e: &Expr) -> Option<Expr> {
    let mut parts = Vec::new();
    for t in e.terms() {
        let mut k: Option<Exponent> = None;
        let mut rest = Vec::new();
        for (a, p) in t.mono.factors() {
            match a {
                Atom::Coord(0) => k = Some(*p),
                other => {
                    let mut hit = false;
                    Expr::from_atom_power(other.clone(), *p).visit_atoms(&mut |x| hit |= matches!(x, Atom::Coord(0)));
                    if hit {
                        return None;
                    }
                    rest.push(Expr::from_atom_power(other.clone(), *p));
                }
            }
        }
        let k = k.unwrap_or_else(Exponent::zero);
        if !k.is_integer() || *k.numer() < 0 {
            return None;
        }
        let next = k.to_integer() + 1;
        let c = &t.coeff / Coeff::from_integer(next.into());
        parts.push(Expr::product(rest).scale(&c) * Expr::coord(0).powi(next));
    }
    Some(Expr::sum(parts))
}

/// The source form `E_i θ^i ∧ ds`.
pub fn source_form(source: &SourceExpression, n: usize) -> Form {
    let mut out = Form::zero();
    for (i, e) in source.0.iter().enumerate() {
        out = out + Form::theta(i, MultiIndex::zero(n)).wedge(&Form::volume(n)).scale(e);
    }
    out
}

/// Coefficient of `θ^i_α ∧ ds` in a `(1, n)`-form.
pub fn contact_density_coefficient(form: &Form, var: &JetVar, n: usize) -> Expr {
    let mut word = vec![Generator::Contact(var.clone())];
    word.extend((0..n as u16).map(Generator::Horizontal));
    form.coefficient(&word)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(params: &[&str]) -> BundleSpec {
        BundleSpec::new(&["x"], &["u", "w"], 2).unwrap().with_params(params)
    }

    fn half(e: Expr) -> Expr {
        e * Expr::ratio(1, 2)
    }

    #[test]
    fn ibp_one_step() {
        let s = line(&["phi"]);
        let d = s.param_jet(0, &[1]) * s.field_jet(0, &[1]);
        let r = integrate_by_parts(&s, &d, &Bank::params(vec![0])).unwrap();
        assert_eq!(r.adjoint, vec![-s.field_jet(0, &[2])]);
        assert_eq!(r.boundary.0, vec![s.param(0) * s.field_jet(0, &[1])]);
        assert!(r.residual(&s, &d).unwrap().is_zero());
    }

    #[test]
    fn ibp_two_steps() {
        let s = line(&["phi"]);
        let w = s.field(1);
        let d = s.param_jet(0, &[2]) * &w;
        let r = integrate_by_parts(&s, &d, &Bank::params(vec![0])).unwrap();
        assert_eq!(r.adjoint, vec![s.field_jet(1, &[2])]);
        assert_eq!(r.boundary.0, vec![s.param_jet(0, &[1]) * &w - s.param(0) * s.field_jet(1, &[1])]);
        assert!(r.residual(&s, &d).unwrap().is_zero());
    }

    #[test]
    fn ibp_two_directions() {
        let s = BundleSpec::new(&["x", "y"], &["V1", "V2"], 2).unwrap().with_params(&["eps"]);
        let (v1, v2) = (s.field(0), s.field(1));
        let d = s.param_jet(0, &[1, 0]) * &v1 + s.param_jet(0, &[0, 1]) * &v2;
        let r = integrate_by_parts(&s, &d, &Bank::params(vec![0])).unwrap();
        assert_eq!(r.adjoint, vec![-(s.field_jet(0, &[1, 0]) + s.field_jet(1, &[0, 1]))]);
        assert_eq!(r.boundary.0, vec![s.param(0) * &v1, s.param(0) * &v2]);
    }

    #[test]
    fn ibp_rejects_nonlinear() {
        let s = line(&["phi"]);
        let d = s.param_jet(0, &[1]).powi(2);
        assert!(matches!(integrate_by_parts(&s, &d, &Bank::params(vec![0])), Err(Error::NotLinear(_))));
    }

    #[test]
    fn euler_lagrange_examples() {
        let s = BundleSpec::new(&["t", "x"], &["u"], 2).unwrap();
        let l = half(s.field_jet(0, &[1, 0]).powi(2)) - half(s.field_jet(0, &[0, 1]).powi(2));
        let e = euler_lagrange(&s, &Lagrangian::new(&s, l).unwrap()).unwrap();
        assert_eq!(e.0, vec![s.field_jet(0, &[0, 2]) - s.field_jet(0, &[2, 0])]);
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let l = half(s.field_jet(0, &[2]).powi(2));
        let e = euler_lagrange(&s, &Lagrangian::new(&s, l).unwrap()).unwrap();
        assert_eq!(e.0, vec![s.field_jet(0, &[4])]);
    }

    #[test]
    fn momenta_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2))).unwrap();
        let p = momenta(&s, &l).unwrap();
        assert_eq!(p.coefficients.len(), 1);
        assert_eq!(p.get(0, 0, &MultiIndex::from_slice(&[0])), s.field_jet(0, &[1]));
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[2]).powi(2))).unwrap();
        let p = momenta(&s, &l).unwrap();
        assert_eq!(p.get(0, 0, &MultiIndex::from_slice(&[0])), -s.field_jet(0, &[3]));
        assert_eq!(p.get(0, 0, &MultiIndex::from_slice(&[1])), s.field_jet(0, &[2]));
        let l = Lagrangian::new(&s, Expr::coord(0)).unwrap();
        assert!(momenta(&s, &l).unwrap().coefficients.is_empty());
    }

    #[test]
    fn momentum_form_identity() {
        let s = BundleSpec::new(&["t", "x"], &["u"], 2).unwrap();
        let l = s.field_jet(0, &[0, 2]).powi(2) * s.field(0) + Expr::sin(s.field_jet(0, &[1, 0]));
        let lag = Lagrangian::new(&s, l.clone()).unwrap();
        let p = momenta(&s, &lag).unwrap();
        let lhs = Form::density(l, 2).d_v(&s).unwrap();
        let rhs = source_form(&p.euler_lagrange, 2) + p.form(2).d_h(&s).unwrap();
        assert!((lhs - rhs).is_zero_exact());
    }

    #[test]
    fn first_variation_examples() {
        let m = BundleSpec::new(&["t"], &["u"], 2).unwrap();
        let l = Lagrangian::new(&m, half(m.field_jet(0, &[1]).powi(2))).unwrap();
        let fv = first_variation(&m, &l, &VectorField::translation(&m, 0)).unwrap();
        assert!(fv.lie_derivative.is_zero());
        assert!(fv.residual(&m).unwrap().is_zero());
        assert_eq!(fv.boundary.0, vec![-half(m.field_jet(0, &[1]).powi(2))]);

        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let l = Lagrangian::new(&s, half(s.field_jet(0, &[1]).powi(2))).unwrap();
        let x = VectorField::vertical(&s, vec![s.param(0)]);
        let fv = first_variation(&s, &l, &x).unwrap();
        assert_eq!(fv.lie_derivative, s.param_jet(0, &[1]) * s.field_jet(0, &[1]));
        assert!(fv.residual(&s).unwrap().is_zero());

        let fv = first_variation(&s, &l, &VectorField::zero(&s)).unwrap();
        assert!(fv.contracted.is_zero() && fv.boundary.0.iter().all(Expr::is_zero));
    }

    #[test]
    fn divergence_reconstruction() {
        let s = BundleSpec::new(&["x", "y"], &["u"], 3).unwrap();
        let w = vec![s.field(0) * s.field_jet(0, &[0, 1]), Expr::coord(0) * s.field_jet(0, &[1, 0]).powi(2)];
        let d = s.divergence(&w).unwrap() + Expr::coord(1);
        assert!(is_divergence(&s, &d).unwrap());
        let pot = divergence_potential(&s, &d).unwrap().expect("polynomial divergence");
        assert!((pot.divergence(&s).unwrap() - d).is_zero());
        assert!(!is_divergence(&s, &s.field(0).powi(2)).unwrap());
    }

    #[test]
    fn polarization_of_quadratic_divergence() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let phi = s.param(0);
        // −φφ″ − φ′² = D(−φφ′)
        let d = -(&phi * &s.param_jet(0, &[2])) - s.param_jet(0, &[1]).powi(2);
        let p = polarize(&s, &d, &Bank::params(vec![0])).unwrap();
        assert!(p.is_divergence());
        assert!(p.residual(&s, &d).unwrap().is_zero());
        assert_eq!(p.boundary.0, vec![-(&phi * &s.param_jet(0, &[1]))]);
        let q = polarize(&s, &phi.powi(2), &Bank::params(vec![0])).unwrap();
        assert!(!q.is_divergence());
        assert!(q.residual(&s, &phi.powi(2)).unwrap().is_zero());
    }
}
