//! Differential forms on jet space in the contact/horizontal splitting.
//!
//! Forms are sums of `coefficient · g_1 ∧ … ∧ g_k` where each generator is a
//! contact form `θ^i_α = dy^i_α − y^i_{α+λ} dx^λ` or a horizontal `dx^σ`.
//! Generators are kept strictly sorted (contacts first) with the sign folded
//! into the coefficient.

use std::collections::BTreeMap;
use std::fmt;

use crate::bundle::{BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Expr, Family, JetVar, Names, RenderStyle, VarKey};
use crate::fields::VectorField;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    Contact(JetVar),
    Horizontal(u16),
}

impl Generator {
    fn is_contact(&self) -> bool {
        matches!(self, Generator::Contact(_))
    }
}

/// Key of a term: contact degree, horizontal degree and the sorted word.
/// Ordering by the degrees first keeps terms grouped by bidegree.
type Key = (usize, usize, Vec<Generator>);

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Form {
    terms: BTreeMap<Key, Expr>,
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&Names::default(), RenderStyle::Plain))
    }
}

fn key_of(word: Vec<Generator>) -> Key {
    let c = word.iter().filter(|g| g.is_contact()).count();
    (c, word.len() - c, word)
}

/// Sorts a word, returning the permutation sign, or `None` if a generator
/// repeats.
fn sort_word(mut word: Vec<Generator>) -> Option<(Vec<Generator>, bool)> {
    let mut negative = false;
    // Insertion sort keeps the inversion count simple to track.
    for i in 1..word.len() {
        let mut j = i;
        while j > 0 && word[j - 1] > word[j] {
            word.swap(j - 1, j);
            negative = !negative;
            j -= 1;
        }
        if j > 0 && word[j - 1] == word[j] {
            return None;
        }
    }
    if word.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((word, negative))
}

impl Form {
    pub fn zero() -> Self {
        Self::default()
    }

    /// A 0-form.
    pub fn function(f: Expr) -> Self {
        Self::term(f, Vec::new())
    }

    pub fn dx(sigma: usize) -> Self {
        Self::term(Expr::one(), vec![Generator::Horizontal(sigma as u16)])
    }

    pub fn theta(field: usize, alpha: MultiIndex) -> Self {
        Self::term(Expr::one(), vec![Generator::Contact(JetVar::field(field, alpha))])
    }

    /// `dy^i_α = θ^i_α + y^i_{α+λ} dx^λ`.
    pub fn dy(spec: &BundleSpec, field: usize, alpha: MultiIndex) -> Self {
        let mut out = Self::theta(field, alpha.clone());
        for lambda in 0..spec.n() {
            out = out + Self::dx(lambda).scale(&Expr::field(field, alpha.bump(lambda)));
        }
        out
    }

    /// The volume form `ds = dx^1 ∧ … ∧ dx^n`.
    pub fn volume(n: usize) -> Self {
        Self::term(Expr::one(), (0..n as u16).map(Generator::Horizontal).collect())
    }

    /// `L ds`.
    pub fn density(l: Expr, n: usize) -> Self {
        Self::volume(n).scale(&l)
    }

    /// `ds_σ = ∂_σ ⌋ ds`.
    pub fn volume_contracted(n: usize, sigma: usize) -> Self {
        let sign = if sigma.is_multiple_of(2) { Expr::one() } else { Expr::int(-1) };
        Self::term(sign, (0..n as u16).filter(|&s| s as usize != sigma).map(Generator::Horizontal).collect())
    }

    /// Coefficient times a word, sorting and absorbing the sign.
    pub fn term(coeff: Expr, word: Vec<Generator>) -> Self {
        let mut out = Self::zero();
        out.add_term(coeff, word);
        out
    }

    fn add_term(&mut self, coeff: Expr, word: Vec<Generator>) {
        if coeff.is_zero() {
            return;
        }
        let Some((word, negative)) = sort_word(word) else { return };
        let coeff = if negative { -coeff } else { coeff };
        let key = key_of(word);
        let entry = self.terms.remove(&key).unwrap_or_default() + coeff;
        if !entry.is_zero() {
            self.terms.insert(key, entry);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exact zero test clearing group denominators in every coefficient.
    pub fn is_zero_exact(&self) -> bool {
        self.terms.values().all(Expr::is_zero_exact)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Generator], &Expr)> {
        self.terms.iter().map(|((_, _, w), c)| (w.as_slice(), c))
    }

    /// The bidegrees `(contact, horizontal)` present.
    pub fn bidegrees(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.terms.keys().map(|(c, h, _)| (*c, *h)).collect();
        v.dedup();
        v
    }

    /// Coefficient of a given sorted word.
    pub fn coefficient(&self, word: &[Generator]) -> Expr {
        self.terms.get(&key_of(word.to_vec())).cloned().unwrap_or_default()
    }

    pub fn scale(&self, f: &Expr) -> Self {
        let mut out = Self::zero();
        for ((_, _, w), c) in &self.terms {
            out.add_term(c * f, w.clone());
        }
        out
    }

    pub fn wedge(&self, other: &Form) -> Form {
        let mut out = Self::zero();
        for ((_, _, wa), ca) in &self.terms {
            for ((_, _, wb), cb) in &other.terms {
                let mut word = wa.clone();
                word.extend(wb.iter().cloned());
                out.add_term(ca * cb, word);
            }
        }
        out
    }

    /// Keeps the part of contact degree `k`; `k = 0` is the horizontal
    /// projection.
    pub fn horizontalize(&self, k: usize) -> Form {
        Form {
            terms: self.terms.iter().filter(|((c, _, _), _)| *c == k).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// Extends a generator-level derivation of degree one as a graded
    /// derivation: `D(f w) = D(f) ∧ w + f Σ (−1)^j g_1 ∧ … ∧ D(g_j) ∧ …`.
    fn derivation(
        &self,
        on_coeff: &mut dyn FnMut(&Expr) -> Result<Form>,
        on_gen: &mut dyn FnMut(&Generator) -> Result<Form>,
    ) -> Result<Form> {
        let mut out = Form::zero();
        for ((_, _, word), c) in &self.terms {
            let w = Form::term(Expr::one(), word.clone());
            out = out + on_coeff(c)?.wedge(&w);
            for j in 0..word.len() {
                let dg = on_gen(&word[j])?;
                if dg.is_zero() {
                    continue;
                }
                let head = Form::term(if j % 2 == 0 { c.clone() } else { -c }, word[..j].to_vec());
                let tail = Form::term(Expr::one(), word[j + 1..].to_vec());
                out = out + head.wedge(&dg).wedge(&tail);
            }
        }
        Ok(out)
    }

    /// Horizontal differential: `d_H f = D_σ f dx^σ`,
    /// `d_H θ^i_α = −θ^i_{α+λ} ∧ dx^λ`, `d_H dx^σ = 0`.
    pub fn d_h(&self, spec: &BundleSpec) -> Result<Form> {
        let n = spec.n();
        self.derivation(
            &mut |f| {
                let mut out = Form::zero();
                for sigma in 0..n {
                    out = out + Form::dx(sigma).scale(&spec.total_derivative(f, sigma)?);
                }
                Ok(out)
            },
            &mut |g| match g {
                Generator::Horizontal(_) => Ok(Form::zero()),
                Generator::Contact(v) => {
                    let mut out = Form::zero();
                    for lambda in 0..n {
                        let next = v.with_alpha(v.alpha.bump(lambda));
                        if next.order() > spec.order_cap {
                            return Err(Error::OrderOverflow { order: next.order(), cap: spec.order_cap });
                        }
                        out = out
                            + Form::term(
                                Expr::int(-1),
                                vec![Generator::Contact(next), Generator::Horizontal(lambda as u16)],
                            );
                    }
                    Ok(out)
                }
            },
        )
    }

    /// Vertical differential: `d_V f = Σ ∂f/∂y^i_α θ^i_α` over field jets;
    /// all generators are `d_V`-closed.
    pub fn d_v(&self, spec: &BundleSpec) -> Result<Form> {
        self.derivation(
            &mut |f| {
                let mut out = Form::zero();
                for v in f.jet_vars() {
                    if v.family != Family::Field {
                        continue;
                    }
                    let c = f.partial(&VarKey::Jet(v.clone()), &spec.symbols)?;
                    out.add_term(c, vec![Generator::Contact(v)]);
                }
                Ok(out)
            },
            &mut |_| Ok(Form::zero()),
        )
    }

    /// Exterior differential `d = d_H + d_V`.
    pub fn d(&self, spec: &BundleSpec) -> Result<Form> {
        Ok(self.d_h(spec)? + self.d_v(spec)?)
    }

    /// Interior product with the prolongation of `x`: `dx^σ ↦ ξ^σ`,
    /// `θ^i_α ↦ Ξ^i_α − y^i_{α+γ} ξ^γ`.
    pub fn interior_product(&self, x: &VectorField, spec: &BundleSpec) -> Result<Form> {
        let lie = x.lie_derivative_section(spec)?;
        let mut out = Form::zero();
        for ((_, _, word), c) in &self.terms {
            for j in 0..word.len() {
                let value = match &word[j] {
                    Generator::Horizontal(s) => x.xi[*s as usize].clone(),
                    Generator::Contact(v) => x.vertical_component(spec, &lie, v.index as usize, &v.alpha)?,
                };
                if value.is_zero() {
                    continue;
                }
                let sign = if j % 2 == 0 { c * &value } else { -(c * &value) };
                let mut rest = word[..j].to_vec();
                rest.extend_from_slice(&word[j + 1..]);
                out.add_term(sign, rest);
            }
        }
        Ok(out)
    }

    /// Lie derivative by Cartan's formula `X ⌋ dω + d(X ⌋ ω)`.
    pub fn lie_derivative(&self, x: &VectorField, spec: &BundleSpec) -> Result<Form> {
        let a = self.d(spec)?.interior_product(x, spec)?;
        let b = self.interior_product(x, spec)?.d(spec)?;
        Ok(a + b)
    }

    pub fn render(&self, names: &Names, style: RenderStyle) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let wedge = match style {
            RenderStyle::Plain => "^",
            RenderStyle::Latex => " \\wedge ",
        };
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|((_, _, word), c)| {
                let gens: Vec<String> = word
                    .iter()
                    .map(|g| match (g, style) {
                        (Generator::Horizontal(s), RenderStyle::Plain) => format!("d{}", names.base_name(*s as usize)),
                        (Generator::Horizontal(s), RenderStyle::Latex) => format!("dx^{{{}}}", s + 1),
                        (Generator::Contact(v), RenderStyle::Plain) => format!("theta[{}]", names.jet_name(v)),
                        (Generator::Contact(v), RenderStyle::Latex) => {
                            let alpha: Vec<String> = v.alpha.as_slice().iter().map(|a| a.to_string()).collect();
                            format!("\\vartheta^{{{}}}_{{({})}}", v.index + 1, alpha.join(","))
                        }
                    })
                    .collect();
                let coeff = c.render(names, style);
                if gens.is_empty() {
                    coeff
                } else {
                    format!("({coeff}) {}", gens.join(wedge))
                }
            })
            .collect();
        parts.join(" + ")
    }
}

impl std::ops::Add for Form {
    type Output = Form;
    fn add(mut self, rhs: Form) -> Form {
        for ((_, _, w), c) in rhs.terms {
            self.add_term(c, w);
        }
        self
    }
}

impl std::ops::Neg for Form {
    type Output = Form;
    fn neg(self) -> Form {
        self.scale(&Expr::int(-1))
    }
}

impl std::ops::Sub for Form {
    type Output = Form;
    fn sub(self, rhs: Form) -> Form {
        self + (-rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> BundleSpec {
        BundleSpec::new(&["x"], &["u"], 2).unwrap()
    }

    fn mi(v: &[u8]) -> MultiIndex {
        MultiIndex::from_slice(v)
    }

    #[test]
    fn wedge_examples() {
        assert!(Form::dx(0).wedge(&Form::dx(0)).is_zero());
        let t = Form::theta(0, mi(&[0]));
        assert_eq!(t.wedge(&Form::dx(0)), -Form::dx(0).wedge(&t));
        let s = line();
        let lhs = Form::dx(0).scale(&s.field(0)).wedge(&t);
        let rhs = t.wedge(&Form::dx(0)).scale(&-s.field(0));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_h_examples() {
        let s = line();
        assert_eq!(Form::function(s.field(0)).d_h(&s).unwrap(), Form::dx(0).scale(&s.field_jet(0, &[1])));
        assert!(Form::dx(0).scale(&s.field_jet(0, &[1])).d_h(&s).unwrap().is_zero());
    }

    #[test]
    fn d_v_examples() {
        let s = line();
        let f = Form::function(s.field(0).powi(2)).d_v(&s).unwrap();
        assert_eq!(f, Form::theta(0, mi(&[0])).scale(&s.field(0).scale_int(2)));
        assert!(Form::function(Expr::coord(0)).d_v(&s).unwrap().is_zero());
    }

    #[test]
    fn horizontalize_examples() {
        let s = line();
        let t = Form::theta(0, mi(&[0]));
        assert!(t.wedge(&Form::dx(0)).horizontalize(0).is_zero());
        let h = Form::dx(0).scale(&s.field(0));
        assert_eq!(h.horizontalize(0), h);
        assert_eq!(Form::dy(&s, 0, mi(&[0])).horizontalize(0), Form::dx(0).scale(&s.field_jet(0, &[1])));
    }

    #[test]
    fn interior_examples() {
        let s = line().with_params(&["phi"]);
        let dx = VectorField::translation(&s, 0);
        assert_eq!(Form::dx(0).interior_product(&dx, &s).unwrap(), Form::function(Expr::one()));
        let phi = VectorField::vertical(&s, vec![s.param(0)]);
        assert_eq!(Form::theta(0, mi(&[0])).interior_product(&phi, &s).unwrap(), Form::function(s.param(0)));
        // ∂_x ⌋ (u dx ∧ θ) = u (∂_x ⌋ dx) θ − u dx (∂_x ⌋ θ) = u θ + u u_x dx
        let u = s.field(0);
        let w = Form::dx(0).wedge(&Form::theta(0, mi(&[0]))).scale(&u);
        let got = w.interior_product(&dx, &s).unwrap();
        let want = Form::theta(0, mi(&[0])).scale(&u) + Form::dx(0).scale(&(&u * &s.field_jet(0, &[1])));
        assert_eq!(got, want);
    }

    #[test]
    fn lie_derivative_examples() {
        let s = line();
        let dx = VectorField::translation(&s, 0);
        let l = Form::density(s.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2), 1);
        assert!(l.lie_derivative(&dx, &s).unwrap().horizontalize(0).is_zero());
        let xdx = Form::dx(0).scale(&Expr::coord(0));
        assert_eq!(xdx.lie_derivative(&dx, &s).unwrap(), Form::dx(0));
        let m = BundleSpec::new(&["t"], &["u"], 2).unwrap();
        let scaling = VectorField::vertical(&m, vec![m.field(0)]);
        let l = Form::density(m.field_jet(0, &[1]).powi(2) * Expr::ratio(1, 2), 1);
        let got = l.lie_derivative(&scaling, &m).unwrap().horizontalize(0);
        assert_eq!(got, Form::density(m.field_jet(0, &[1]).powi(2), 1));
    }

    #[test]
    fn splitting_of_d() {
        let s = line();
        let f = Expr::sin(s.field(0)) * s.field_jet(0, &[1]) + Expr::coord(0) * s.field(0);
        let d = Form::function(f.clone()).d(&s).unwrap();
        // df in (dx, dy) coordinates, rewritten through dy = θ + y dx.
        let mut manual = Form::dx(0).scale(&f.partial(&VarKey::coord(0), &s.symbols).unwrap());
        for v in f.jet_vars() {
            let c = f.partial(&VarKey::Jet(v.clone()), &s.symbols).unwrap();
            manual = manual + Form::dy(&s, v.index as usize, v.alpha.clone()).scale(&c);
        }
        assert_eq!(d, manual);
    }
}
