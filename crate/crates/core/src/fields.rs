//! Projectable and parameter-dependent vector fields, their jet
//! prolongation, the horizontal/vertical split, generalized Lie derivatives
//! and gauge-natural lift rules.

use std::collections::BTreeMap;

use crate::bundle::{enumerate_multiindices, BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Atom, Expr, Family, JetVar, VarKey};

/// A projectable vector field `ξ^σ ∂_σ + Ξ^i ∂_i`.
///
/// The components may depend linearly on parameter functions `ε^A` and
/// their derivatives; this is how lifted fields are represented.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub xi: Vec<Expr>,
    pub components: Vec<Expr>,
}

pub type ProjVectorField = VectorField;

/// Components `£^i = ξ^μ y^i_μ − Ξ^i` of the generalized Lie derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct LieDerivativeSection(pub Vec<Expr>);

/// Jet prolongation of a vector field up to a fixed order.
#[derive(Clone, Debug)]
pub struct Prolonged {
    pub xi: Vec<Expr>,
    /// `Ξ^i_α` for every field `i` and `|α| ≤ order`.
    pub components: BTreeMap<(usize, MultiIndex), Expr>,
    pub order: usize,
}

/// Horizontal and vertical parts of a prolonged field.
#[derive(Clone, Debug)]
pub struct Split {
    pub horizontal: Vec<Expr>,
    pub vertical: BTreeMap<(usize, MultiIndex), Expr>,
}

impl VectorField {
    pub fn new(xi: Vec<Expr>, components: Vec<Expr>) -> Self {
        Self { xi, components }
    }

    pub fn zero(spec: &BundleSpec) -> Self {
        Self { xi: vec![Expr::zero(); spec.n()], components: vec![Expr::zero(); spec.m()] }
    }

    /// The coordinate translation `∂_σ`.
    pub fn translation(spec: &BundleSpec, sigma: usize) -> Self {
        let mut x = Self::zero(spec);
        x.xi[sigma] = Expr::one();
        x
    }

    /// A vertical field `Φ^i ∂_i`.
    pub fn vertical(spec: &BundleSpec, components: Vec<Expr>) -> Self {
        Self { xi: vec![Expr::zero(); spec.n()], components }
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().chain(&self.components).all(Expr::is_zero)
    }

    pub fn is_vertical(&self) -> bool {
        self.xi.iter().all(Expr::is_zero)
    }

    /// Checks shapes and projectability: `ξ` must not depend on field
    /// variables.
    pub fn validate(&self, spec: &BundleSpec) -> Result<()> {
        if self.xi.len() != spec.n() || self.components.len() != spec.m() {
            return Err(Error::Precondition(format!(
                "vector field has {} base and {} fiber components, bundle needs {} and {}",
                self.xi.len(),
                self.components.len(),
                spec.n(),
                spec.m()
            )));
        }
        if self.xi.iter().any(|x| x.contains_family(Family::Field)) {
            return Err(Error::Precondition("base components depend on fields: the field is not projectable".into()));
        }
        Ok(())
    }

    pub fn lie_derivative_section(&self, spec: &BundleSpec) -> Result<LieDerivativeSection> {
        self.validate(spec)?;
        let n = spec.n();
        let comps = (0..spec.m())
            .map(|i| {
                let flow = Expr::sum((0..n).map(|mu| &self.xi[mu] * &spec.field_jet(i, spec.unit(mu).as_slice())));
                flow - &self.components[i]
            })
            .collect();
        Ok(LieDerivativeSection(comps))
    }

    /// `Ξ^i_α` for `|α| ≤ s` by the recursion
    /// `Ξ^i_{α+σ} = D_σ Ξ^i_α − y^i_{α+μ} D_σ ξ^μ`.
    pub fn prolong(&self, spec: &BundleSpec, s: usize) -> Result<Prolonged> {
        self.validate(spec)?;
        if s > spec.order_cap {
            return Err(Error::OrderOverflow { order: s, cap: spec.order_cap });
        }
        let n = spec.n();
        let dxi: Vec<Vec<Expr>> = (0..n)
            .map(|sigma| self.xi.iter().map(|x| spec.total_derivative(x, sigma)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut components = BTreeMap::new();
        for i in 0..spec.m() {
            for alpha in enumerate_multiindices(n, s) {
                spec.cancel.check()?;
                let value = match alpha.first_direction() {
                    None => self.components[i].clone(),
                    Some(sigma) => {
                        let prev = alpha.lower(sigma).expect("direction is nonzero");
                        let base = spec.total_derivative(&components[&(i, prev.clone())], sigma)?;
                        let correction = Expr::sum((0..n).map(|mu| &Expr::field(i, prev.bump(mu)) * &dxi[sigma][mu]));
                        base - correction
                    }
                };
                components.insert((i, alpha), value);
            }
        }
        Ok(Prolonged { xi: self.xi.clone(), components, order: s })
    }

    /// `Ξ^i_α − y^i_{α+γ} ξ^γ`, computed as `−D_α £^i`.
    pub fn vertical_component(
        &self,
        spec: &BundleSpec,
        lie: &LieDerivativeSection,
        i: usize,
        alpha: &MultiIndex,
    ) -> Result<Expr> {
        let _ = self;
        Ok(-spec.iterated_total_derivative(&lie.0[i], alpha)?)
    }

    /// Action of the infinite prolongation on a function of jets:
    /// `ξ^σ D_σ f + Σ (Ξ^i_α − y^i_{α+γ}ξ^γ) ∂f/∂y^i_α`.
    pub fn apply_prolonged(&self, spec: &BundleSpec, f: &Expr) -> Result<Expr> {
        let lie = self.lie_derivative_section(spec)?;
        let mut parts = Vec::new();
        for (sigma, x) in self.xi.iter().enumerate() {
            if !x.is_zero() {
                parts.push(x * &spec.total_derivative(f, sigma)?);
            }
        }
        for v in f.jet_vars() {
            if v.family != Family::Field {
                continue;
            }
            spec.cancel.check()?;
            let vc = self.vertical_component(spec, &lie, v.index as usize, &v.alpha)?;
            if vc.is_zero() {
                continue;
            }
            parts.push(&vc * &f.partial(&VarKey::Jet(v), &spec.symbols)?);
        }
        Ok(Expr::sum(parts))
    }

    /// Lie derivative of the density `L` of `λ = L ds`:
    /// `X(L) + L D_σ ξ^σ`.
    pub fn lie_derivative_density(&self, spec: &BundleSpec, density: &Expr) -> Result<Expr> {
        let mut out = self.apply_prolonged(spec, density)?;
        for (sigma, x) in self.xi.iter().enumerate() {
            if !x.is_zero() {
                out += &(density * &spec.total_derivative(x, sigma)?);
            }
        }
        Ok(out)
    }

    /// Bracket of prolonged fields, restricted to the base and fiber
    /// components.
    pub fn bracket(&self, other: &VectorField, spec: &BundleSpec) -> Result<VectorField> {
        let xi = self
            .xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| Ok(self.apply_prolonged(spec, b)? - other.apply_prolonged(spec, a)?))
            .collect::<Result<_>>()?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| Ok(self.apply_prolonged(spec, b)? - other.apply_prolonged(spec, a)?))
            .collect::<Result<_>>()?;
        Ok(VectorField { xi, components })
    }

    /// Applies `f` to every component.
    pub fn map(&self, f: &mut dyn FnMut(&Expr) -> Result<Expr>) -> Result<VectorField> {
        Ok(VectorField {
            xi: self.xi.iter().map(&mut *f).collect::<Result<_>>()?,
            components: self.components.iter().map(&mut *f).collect::<Result<_>>()?,
        })
    }
}

impl Prolonged {
    pub fn split(&self, spec: &BundleSpec) -> Split {
        let n = spec.n();
        let vertical = self
            .components
            .iter()
            .map(|((i, alpha), c)| {
                let flow = Expr::sum((0..n).map(|g| &Expr::field(*i, alpha.bump(g)) * &self.xi[g]));
                ((*i, alpha.clone()), c - &flow)
            })
            .collect();
        Split { horizontal: self.xi.clone(), vertical }
    }
}

/// How the parameter bank of a lift composes under the Lie bracket.
#[derive(Clone, Debug, PartialEq)]
pub enum BracketKind {
    /// `[ε_1, ε_2] = 0` (abelian gauge parameters).
    Abelian,
    /// The bank is a base vector field `ε^μ` with the bracket
    /// `ε_1^ν ∂_ν ε_2^μ − ε_2^ν ∂_ν ε_1^μ`.
    Natural,
    /// One template per bank parameter in which parameter `k < bank.len()`
    /// stands for the first copy and `bank.len() + k` for the second.
    Template(Vec<Expr>),
    /// Bracket closure is not checked.
    Unchecked,
}

/// A lift rule: a vector field linear in a bank of parameter functions.
#[derive(Clone, Debug)]
pub struct ParamVectorField {
    pub name: String,
    /// Parameter indices (into `BundleSpec::params`) forming the bank.
    pub bank: Vec<usize>,
    pub field: VectorField,
    pub bracket: BracketKind,
}

/// Outcome of [`ParamVectorField::check_lift_properties`].
#[derive(Clone, Debug)]
pub struct LiftReport {
    pub linear: bool,
    pub projectable: bool,
    pub bracket_checked: bool,
    /// `[X_a, X_b] − X_{[a,b]}` per base and fiber component.
    pub bracket_residual: Option<VectorField>,
    pub lift_order: usize,
}

impl LiftReport {
    pub fn passed(&self) -> bool {
        self.linear
            && self.projectable
            && self.bracket_residual.as_ref().is_none_or(|r| r.xi.iter().chain(&r.components).all(Expr::is_zero_exact))
    }
}

impl ParamVectorField {
    pub fn new(name: impl Into<String>, bank: Vec<usize>, field: VectorField, bracket: BracketKind) -> Self {
        Self { name: name.into(), bank, field, bracket }
    }

    /// Whether the lift moves the base (carries the flow `ξ`).
    pub fn carries_base_flow(&self) -> bool {
        !self.field.is_vertical()
    }

    fn in_bank(&self, v: &JetVar) -> bool {
        v.family == Family::Param && self.bank.contains(&(v.index as usize))
    }

    /// Highest derivative order of a bank parameter in the rule.
    pub fn lift_order(&self) -> usize {
        self.field
            .xi
            .iter()
            .chain(&self.field.components)
            .flat_map(|e| e.jet_vars())
            .filter(|v| self.in_bank(v))
            .map(|v| v.order())
            .max()
            .unwrap_or(0)
    }

    /// Every term of every component has degree exactly one in the bank.
    pub fn is_linear(&self) -> bool {
        let pred = |v: &JetVar| self.in_bank(v);
        self.field
            .xi
            .iter()
            .chain(&self.field.components)
            .all(|e| e.degrees_in(&pred).is_some_and(|d| d.iter().all(|&k| k == 1)))
    }

    /// Rewrites bank parameter `bank[k]` through `f(k, α)`.
    pub fn substitute_bank(&self, f: &mut dyn FnMut(usize, &MultiIndex) -> Result<Expr>) -> Result<VectorField> {
        let bank = self.bank.clone();
        self.field.map(&mut |e| {
            let mut err = None;
            let out = e.replace_leaves(&mut |a| match a {
                Atom::Jet(v) if v.family == Family::Param => {
                    let k = bank.iter().position(|&b| b == v.index as usize)?;
                    match f(k, &v.alpha) {
                        Ok(x) => Some(x),
                        Err(e) => {
                            err = Some(e);
                            Some(Expr::zero())
                        }
                    }
                }
                _ => None,
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
    }

    /// Linearity, projectability and bracket closure of the rule.
    pub fn check_lift_properties(&self, spec: &BundleSpec) -> Result<LiftReport> {
        let linear = self.is_linear();
        let projectable = self.field.validate(spec).is_ok()
            && self.field.xi.iter().all(|x| x.jet_vars().iter().all(|v| self.in_bank(v)));
        let mut report = LiftReport {
            linear,
            projectable,
            bracket_checked: false,
            bracket_residual: None,
            lift_order: self.lift_order(),
        };
        if !linear || !projectable || self.bracket == BracketKind::Unchecked {
            return Ok(report);
        }
        // Two independent copies of the bank.
        let mut work = spec.clone();
        let k = self.bank.len();
        let a: Vec<usize> = (0..k).map(|_| work.fresh_param("a")).collect();
        let b: Vec<usize> = (0..k).map(|_| work.fresh_param("b")).collect();
        let xa = self.substitute_bank(&mut |j, alpha| Ok(Expr::param(a[j], alpha.clone())))?;
        let xb = self.substitute_bank(&mut |j, alpha| Ok(Expr::param(b[j], alpha.clone())))?;
        let commutator = xa.bracket(&xb, &work)?;
        let brackets: Vec<Expr> = match &self.bracket {
            BracketKind::Abelian => vec![Expr::zero(); k],
            BracketKind::Natural => {
                if k != spec.n() {
                    return Err(Error::Precondition(format!(
                        "natural bracket needs a bank of {} parameters, lift `{}` has {k}",
                        spec.n(),
                        self.name
                    )));
                }
                (0..k)
                    .map(|mu| {
                        Expr::sum((0..k).map(|nu| {
                            let unit = spec.unit(nu);
                            Expr::param(a[nu], spec.zero_index()) * Expr::param(b[mu], unit.clone())
                                - Expr::param(b[nu], spec.zero_index()) * Expr::param(a[mu], unit)
                        }))
                    })
                    .collect()
            }
            BracketKind::Template(t) => {
                if t.len() != k {
                    return Err(Error::Precondition("bracket template has the wrong length".into()));
                }
                let pa = spec.params.len();
                let mut out = Vec::with_capacity(k);
                for e in t {
                    let r = e.replace_leaves(&mut |x| match x {
                        Atom::Jet(v) if v.family == Family::Param && (v.index as usize) >= pa => {
                            let j = v.index as usize - pa;
                            let target = if j < k { a[j] } else { b[j - k] };
                            Some(Expr::param(target, v.alpha.clone()))
                        }
                        _ => None,
                    })?;
                    out.push(r);
                }
                out
            }
            BracketKind::Unchecked => unreachable!(),
        };
        let expected = self.substitute_bank(&mut |j, alpha| work.iterated_total_derivative(&brackets[j], alpha))?;
        let residual = VectorField {
            xi: commutator.xi.iter().zip(&expected.xi).map(|(c, e)| (c - e).simplify()).collect(),
            components: commutator
                .components
                .iter()
                .zip(&expected.components)
                .map(|(c, e)| (c - e).simplify())
                .collect(),
        };
        report.bracket_checked = true;
        report.bracket_residual = Some(residual);
        Ok(report)
    }
}

/// Abelian gauge lift `δA_μ = ∂_μ ε` on connection-type fields: `fields[μ]`
/// is the field index of `A_μ`.
pub fn gauge_lift(spec: &BundleSpec, fields: &[usize], eps: usize) -> ParamVectorField {
    let mut x = VectorField::zero(spec);
    for (mu, &f) in fields.iter().enumerate() {
        x.components[f] = Expr::param(eps, spec.unit(mu));
    }
    ParamVectorField::new("gauge", vec![eps], x, BracketKind::Abelian)
}

/// Natural lift of base vector fields `ε^μ` to symmetric two-tensors;
/// `index(μ, ν)` gives the field index of `g_{μν}`.
pub fn metric_lift(spec: &BundleSpec, index: &dyn Fn(usize, usize) -> usize, eps: &[usize]) -> ParamVectorField {
    let n = spec.n();
    let xi: Vec<Expr> = eps.iter().map(|&e| spec.param(e)).collect();
    let mut x = VectorField { xi, components: vec![Expr::zero(); spec.m()] };
    for mu in 0..n {
        for nu in mu..n {
            let c = Expr::sum((0..n).flat_map(|rho| {
                let g_rn = spec.field(index(rho, nu));
                let g_mr = spec.field(index(mu, rho));
                [&g_rn * &Expr::param(eps[rho], spec.unit(mu)), &g_mr * &Expr::param(eps[rho], spec.unit(nu))]
            }));
            x.components[index(mu, nu)] = -c;
        }
    }
    ParamVectorField::new("diffeo", eps.to_vec(), x, BracketKind::Natural)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mech() -> BundleSpec {
        BundleSpec::new(&["t"], &["u"], 2).unwrap()
    }

    #[test]
    fn prolong_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap().with_params(&["phi"]);
        let p = VectorField::translation(&s, 0).prolong(&s, 2).unwrap();
        assert!(p.components.values().all(Expr::is_zero));
        let scaling = VectorField::vertical(&s, vec![s.field(0)]).prolong(&s, 1).unwrap();
        assert_eq!(scaling.components[&(0, MultiIndex::from_slice(&[1]))], s.field_jet(0, &[1]));
        let phi = VectorField::vertical(&s, vec![s.param(0)]).prolong(&s, 2).unwrap();
        let got: Vec<Expr> = phi.components.values().cloned().collect();
        assert_eq!(got, vec![s.param(0), s.param_jet(0, &[1]), s.param_jet(0, &[2])]);
    }

    #[test]
    fn split_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let sp = VectorField::translation(&s, 0).prolong(&s, 1).unwrap().split(&s);
        assert_eq!(sp.horizontal, vec![Expr::one()]);
        assert_eq!(sp.vertical[&(0, MultiIndex::from_slice(&[0]))], -s.field_jet(0, &[1]));
        assert_eq!(sp.vertical[&(0, MultiIndex::from_slice(&[1]))], -s.field_jet(0, &[2]));
        let x = VectorField::new(vec![Expr::coord(0)], vec![Expr::zero()]);
        let sp = x.prolong(&s, 0).unwrap().split(&s);
        assert_eq!(sp.vertical[&(0, MultiIndex::from_slice(&[0]))], -(Expr::coord(0) * s.field_jet(0, &[1])));
    }

    #[test]
    fn lie_section_examples() {
        let s = mech().with_params(&["phi"]);
        let lie = VectorField::translation(&s, 0).lie_derivative_section(&s).unwrap();
        assert_eq!(lie.0, vec![s.field_jet(0, &[1])]);
        let lie = VectorField::vertical(&s, vec![s.param(0)]).lie_derivative_section(&s).unwrap();
        assert_eq!(lie.0, vec![-s.param(0)]);
        let lie = VectorField::new(vec![Expr::one()], vec![s.field(0)]).lie_derivative_section(&s).unwrap();
        assert_eq!(lie.0, vec![s.field_jet(0, &[1]) - s.field(0)]);
    }

    #[test]
    fn vertical_component_matches_split() {
        let s = BundleSpec::new(&["t", "x"], &["u"], 2).unwrap();
        let x = VectorField::new(vec![Expr::coord(1), Expr::coord(0).powi(2)], vec![s.field(0).powi(2)]);
        let lie = x.lie_derivative_section(&s).unwrap();
        let sp = x.prolong(&s, 2).unwrap().split(&s);
        for ((i, alpha), v) in &sp.vertical {
            assert_eq!(&x.vertical_component(&s, &lie, *i, alpha).unwrap(), v);
        }
    }

    #[test]
    fn lie_density_examples() {
        let s = BundleSpec::new(&["x"], &["u"], 2).unwrap();
        let l = s.field_jet(0, &[1]).powi(2).scale_int(1) * Expr::ratio(1, 2);
        assert!(VectorField::translation(&s, 0).lie_derivative_density(&s, &l).unwrap().is_zero());
        let m = mech();
        let l = m.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2);
        let scaling = VectorField::vertical(&m, vec![m.field(0)]);
        assert_eq!(scaling.lie_derivative_density(&m, &l).unwrap(), m.field_jet(0, &[1]).powi(2));
        assert_eq!(VectorField::translation(&s, 0).lie_derivative_density(&s, &Expr::coord(0)).unwrap(), Expr::one());
    }

    #[test]
    fn gauge_lift_closes() {
        let s = BundleSpec::new(&["x", "y"], &["A1", "A2"], 1).unwrap().with_params(&["eps"]);
        let lift = gauge_lift(&s, &[0, 1], 0);
        let r = lift.check_lift_properties(&s).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.lift_order, 1);
    }

    #[test]
    fn metric_lift_closes_and_typo_is_caught() {
        let s = BundleSpec::new(&["x", "y"], &["g11", "g12", "g22"], 1).unwrap().with_params(&["e1", "e2"]);
        let idx = |a: usize, b: usize| a + b;
        let lift = metric_lift(&s, &idx, &[0, 1]);
        let r = lift.check_lift_properties(&s).unwrap();
        assert!(r.passed(), "{r:?}");
        let mut broken = lift.clone();
        broken.field.components[1] = broken.field.components[1].scale_int(2);
        let r = broken.check_lift_properties(&s).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn nonlinear_rule_is_flagged() {
        let s = mech().with_params(&["eps"]);
        let lift = ParamVectorField::new(
            "bad",
            vec![0],
            VectorField::vertical(&s, vec![s.param(0).powi(2)]),
            BracketKind::Abelian,
        );
        assert!(!lift.check_lift_properties(&s).unwrap().passed());
    }
}
