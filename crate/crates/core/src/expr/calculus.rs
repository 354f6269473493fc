use std::collections::{BTreeMap, HashMap};

use num_traits::{One, ToPrimitive, Zero};

use super::{coeff_to_f64, Atom, Coeff, Exponent, Expr, Func, JetVar, Monomial, SymApp, SymbolTable, Term};
use crate::error::{Error, Result};

/// A variable with respect to which an expression can be differentiated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKey {
    Coord(u16),
    Jet(JetVar),
    Slot(u16),
}

impl VarKey {
    pub fn coord(sigma: usize) -> Self {
        VarKey::Coord(sigma as u16)
    }

    fn matches(&self, a: &Atom) -> bool {
        match (self, a) {
            (VarKey::Coord(s), Atom::Coord(t)) => s == t,
            (VarKey::Jet(v), Atom::Jet(w)) => v == w,
            (VarKey::Slot(s), Atom::Slot(t)) => s == t,
            _ => false,
        }
    }
}

impl From<JetVar> for VarKey {
    fn from(v: JetVar) -> Self {
        VarKey::Jet(v)
    }
}

/// Applies a derivation: `leaf` gives the derivative of coordinate, jet and
/// slot atoms; compound atoms follow the chain rule.
pub(crate) struct Deriver<'a, F> {
    leaf: F,
    syms: &'a SymbolTable,
    memo: HashMap<Atom, Expr>,
}

impl<'a, F> Deriver<'a, F>
where
    F: FnMut(&Atom) -> Result<Expr>,
{
    pub(crate) fn new(syms: &'a SymbolTable, leaf: F) -> Self {
        Self { leaf, syms, memo: HashMap::new() }
    }

    pub(crate) fn expr(&mut self, e: &Expr) -> Result<Expr> {
        let mut parts = Vec::new();
        for t in e.terms() {
            for (k, (a, p)) in t.mono.factors().iter().enumerate() {
                let da = self.atom(a)?;
                if da.is_zero() {
                    continue;
                }
                let c = &t.coeff * Coeff::new((*p.numer()).into(), (*p.denom()).into());
                let rest = Expr::from_monomial(t.mono.lowered(k), c);
                parts.push(&rest * &da);
            }
        }
        Ok(Expr::sum(parts))
    }

    fn atom(&mut self, a: &Atom) -> Result<Expr> {
        if let Some(d) = self.memo.get(a) {
            return Ok(d.clone());
        }
        let d = match a {
            Atom::Pi => Expr::zero(),
            Atom::Coord(_) | Atom::Jet(_) | Atom::Slot(_) => (self.leaf)(a)?,
            Atom::Func(f, arg) => {
                let inner = self.expr(arg)?;
                if inner.is_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Sin => Expr::cos(arg.clone()),
                        Func::Cos => -Expr::sin(arg.clone()),
                        Func::Exp => Expr::exp(arg.clone()),
                        Func::Ln => arg.try_pow(Exponent::from_integer(-1)).ok_or(Error::DivisionByZero)?,
                    };
                    &outer * &inner
                }
            }
            Atom::Group(base) => self.expr(base)?,
            Atom::Sym(app) => {
                let mut parts = Vec::new();
                for k in 0..app.args.len() {
                    let inner = self.expr(&app.args[k])?;
                    if inner.is_zero() {
                        continue;
                    }
                    parts.push(&slot_derivative(self.syms, app, k)? * &inner);
                }
                Expr::sum(parts)
            }
        };
        self.memo.insert(a.clone(), d.clone());
        Ok(d)
    }
}

/// Partial derivative of a symbol application in its k-th argument.
fn slot_derivative(syms: &SymbolTable, app: &SymApp, k: usize) -> Result<Expr> {
    let def = syms.get(app.id).ok_or_else(|| Error::UnknownSymbol { symbol: format!("sym{}", app.id.0), slot: k })?;
    match &def.rules {
        None => {
            let mut d = app.clone();
            d.derivs[k] += 1;
            Ok(Expr::sym_app(d))
        }
        Some(rules) => match rules.get(k).and_then(|r| r.as_ref()) {
            Some(template) => template.instantiate(&app.args),
            None => Err(Error::UnknownSymbol { symbol: def.name.clone(), slot: k }),
        },
    }
}

impl Expr {
    /// Partial derivative with every other variable held fixed.
    pub fn partial(&self, v: &VarKey, syms: &SymbolTable) -> Result<Expr> {
        let mut d = Deriver::new(syms, |a: &Atom| Ok(if v.matches(a) { Expr::one() } else { Expr::zero() }));
        d.expr(self)
    }

    /// Replaces leaf atoms (coordinates, jets, slots, pi) for which `f`
    /// returns a value, recursing through compound atoms.
    pub fn replace_leaves(&self, f: &mut dyn FnMut(&Atom) -> Option<Expr>) -> Result<Expr> {
        let mut parts = Vec::with_capacity(self.terms().len());
        for t in self.terms() {
            let mut acc = Expr::constant(t.coeff.clone());
            let mut untouched = Vec::new();
            for (a, e) in t.mono.factors() {
                let value = match a {
                    Atom::Func(func, arg) => Some(Expr::func(*func, arg.replace_leaves(f)?)),
                    Atom::Group(base) => Some(base.replace_leaves(f)?),
                    Atom::Sym(app) => {
                        let args = app.args.iter().map(|x| x.replace_leaves(f)).collect::<Result<Vec<_>>>()?;
                        Some(Expr::sym_app(SymApp { id: app.id, derivs: app.derivs.clone(), args }))
                    }
                    leaf => f(leaf),
                };
                match value {
                    Some(v) => acc = &acc * &v.try_pow(*e).ok_or(Error::DivisionByZero)?,
                    None => untouched.push((a.clone(), *e)),
                }
            }
            if !untouched.is_empty() {
                acc = &acc * &Expr::from_monomial(Monomial::from_sorted(untouched), Coeff::one());
            }
            parts.push(acc);
        }
        Ok(Expr::sum(parts))
    }

    /// Simultaneous substitution of variables.
    pub fn substitute(&self, bindings: &BTreeMap<VarKey, Expr>) -> Result<Expr> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        self.replace_leaves(&mut |a| {
            let key = match a {
                Atom::Coord(s) => VarKey::Coord(*s),
                Atom::Jet(v) => VarKey::Jet(v.clone()),
                Atom::Slot(s) => VarKey::Slot(*s),
                _ => return None,
            };
            bindings.get(&key).cloned()
        })
    }

    /// Fills the slot placeholders of a rule template.
    pub fn instantiate(&self, args: &[Expr]) -> Result<Expr> {
        self.replace_leaves(&mut |a| match a {
            Atom::Slot(k) => args.get(*k as usize).cloned(),
            _ => None,
        })
    }

    /// Maximum derivative order over jet variables and parameter derivatives.
    pub fn jet_order(&self) -> usize {
        self.jet_vars().iter().map(JetVar::order).max().unwrap_or(0)
    }

    /// Exact zero test that also clears powers of group factors.
    ///
    /// For each group base `B` the expression is multiplied by the power of
    /// `B` that makes all its exponents non-negative, and powers of `B` of at
    /// least one are expanded. The result is zero only if the input is.
    pub fn is_zero_exact(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        let mut e = self.clone();
        let mut seen = std::collections::BTreeSet::new();
        loop {
            let next = e.terms().iter().flat_map(|t| t.mono.factors()).find_map(|(a, _)| match a {
                Atom::Group(b) if !seen.contains(b) => Some(b.clone()),
                _ => None,
            });
            let Some(base) = next else { break };
            seen.insert(base.clone());
            let group = Atom::Group(base.clone());
            let exps: Vec<Exponent> = e
                .terms()
                .iter()
                .map(|t| {
                    t.mono.factors().iter().find(|(a, _)| *a == group).map(|(_, p)| *p).unwrap_or_else(Exponent::zero)
                })
                .collect();
            let pmin = exps.iter().copied().min().unwrap_or_else(Exponent::zero);
            if exps.iter().all(|p| *p == exps[0]) {
                continue;
            }
            // Built raw: a positive power of the group must stay unexpanded here so
            // that it cancels against the negative powers.
            let shift = Expr(std::sync::Arc::from(vec![Term {
                mono: Monomial::single(group.clone(), -pmin),
                coeff: Coeff::one(),
            }]));
            e = &e * &shift;
            e = absorb_group(&e, &group, &base);
            if e.is_zero() {
                return true;
            }
        }
        e.is_zero()
    }

    /// The canonical zero if [`Expr::is_zero_exact`] holds, else `self`.
    pub fn simplify(&self) -> Expr {
        if self.is_zero_exact() {
            Expr::zero()
        } else {
            self.clone()
        }
    }

    /// Numeric evaluation; `env` supplies values for coordinates, jets,
    /// slots and symbol applications.
    pub fn eval(&self, env: &mut dyn FnMut(&Atom) -> Option<f64>) -> Result<f64> {
        let mut total = 0.0;
        for t in self.terms() {
            let mut v = coeff_to_f64(&t.coeff);
            for (a, p) in t.mono.factors() {
                let x = match a {
                    Atom::Pi => std::f64::consts::PI,
                    Atom::Func(f, arg) => f.eval(arg.eval(env)?),
                    Atom::Group(b) => b.eval(env)?,
                    leaf => env(leaf).ok_or_else(|| Error::Eval(format!("no value for {leaf:?}")))?,
                };
                v *=
                    if p.is_integer() { x.powi(p.to_integer() as i32) } else { x.powf(p.to_f64().unwrap_or(f64::NAN)) };
            }
            total += v;
        }
        Ok(total)
    }
}

/// Rewrites `G^q` with `q >= 1` as `B^floor(q) * G^(q - floor(q))`.
fn absorb_group(e: &Expr, group: &Atom, base: &Expr) -> Expr {
    let mut parts = Vec::with_capacity(e.terms().len());
    for t in e.terms() {
        let pos = t.mono.factors().iter().position(|(a, _)| a == group);
        match pos {
            Some(k) if t.mono.factors()[k].1 >= Exponent::one() => {
                let q = t.mono.factors()[k].1;
                let whole = q.floor();
                let mut f = t.mono.factors().to_vec();
                let frac = q - whole;
                if frac.is_zero() {
                    f.remove(k);
                } else {
                    f[k].1 = frac;
                }
                let rest = Expr::from_monomial(Monomial::from_sorted(f), t.coeff.clone());
                parts.push(&rest * &base.powi(whole.to_integer()));
            }
            _ => parts.push(Expr(std::sync::Arc::from(vec![Term { mono: t.mono.clone(), coeff: t.coeff.clone() }]))),
        }
    }
    Expr::sum(parts)
}
