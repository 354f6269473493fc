//! Fibered chart and jet coordinates: multi-indices, the bundle description
//! and the total derivative.

use std::cmp::Ordering;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use num_bigint::BigInt;
use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::expr::JetVar;
use crate::expr::{Atom, Deriver, Expr, Family, Names, SymbolTable, VarKey};

/// Symmetric derivative multi-index `α = (α_1, …, α_n)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(SmallVec<[u8; 4]>);

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, n))
    }

    /// The multi-index with a single 1 in direction `sigma`.
    pub fn unit(n: usize, sigma: usize) -> Self {
        let mut m = Self::zero(n);
        m.0[sigma] = 1;
        m
    }

    pub fn from_slice(v: &[u8]) -> Self {
        MultiIndex(SmallVec::from_slice(v))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn get(&self, sigma: usize) -> u8 {
        self.0[sigma]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `α + σ`.
    pub fn bump(&self, sigma: usize) -> Self {
        let mut m = self.clone();
        m.0[sigma] += 1;
        m
    }

    /// `α − σ`, if `α_σ > 0`.
    pub fn lower(&self, sigma: usize) -> Option<Self> {
        if self.0[sigma] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[sigma] -= 1;
        Some(m)
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        self.0.iter().zip(&other.0).map(|(a, b)| a.checked_sub(*b)).collect::<Option<SmallVec<_>>>().map(MultiIndex)
    }

    /// Componentwise `≤`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `α!`.
    pub fn factorial(&self) -> BigInt {
        self.0.iter().map(|&a| (1..=a as u64).product::<u64>()).map(BigInt::from).product()
    }

    /// Multi-binomial `(α choose γ)`.
    pub fn binomial(&self, gamma: &Self) -> BigInt {
        self.0
            .iter()
            .zip(&gamma.0)
            .map(|(&a, &g)| {
                let (a, g) = (a as u64, g as u64);
                let mut c = 1u64;
                for k in 0..g {
                    c = c * (a - k) / (k + 1);
                }
                BigInt::from(c)
            })
            .product()
    }

    /// Smallest direction with a nonzero component.
    pub fn first_direction(&self) -> Option<usize> {
        self.0.iter().position(|&a| a > 0)
    }

    /// Graded-lex order: by total order, then lexicographically descending,
    /// so that `(1,0)` precedes `(0,1)`.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| other.0.cmp(&self.0))
    }

    /// All `γ ≤ α` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(0)];
        for &a in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
            for m in &out {
                for k in 0..=a {
                    let mut v = m.0.clone();
                    v.push(k);
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }
}

/// All multi-indices of dimension `n` with `|α| ≤ max_order`, in graded-lex
/// order.
pub fn enumerate_multiindices(n: usize, max_order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for order in 0..=max_order {
        let mut level = Vec::new();
        fill(n, order, &mut SmallVec::new(), &mut level);
        level.sort_by(|a: &MultiIndex, b| b.0.cmp(&a.0));
        out.extend(level);
    }
    out
}

fn fill(n: usize, remaining: usize, prefix: &mut SmallVec<[u8; 4]>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == n - 1 {
        prefix.push(remaining as u8);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for k in 0..=remaining {
        prefix.push(k as u8);
        fill(n, remaining - k, prefix, out);
        prefix.pop();
    }
}

/// Cooperative cancellation flag shared between a caller and long-running
/// expansions.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn cancel(&self) {
        self.0.store(true, AtomicOrdering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(AtomicOrdering::Relaxed)
    }

    pub fn check(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Cancelled)
        } else {
            Ok(())
        }
    }
}

/// Description of the fibered chart: base coordinates, fields, parameter
/// functions, jet orders and declared symbols.
#[derive(Clone, Debug)]
pub struct BundleSpec {
    pub base: Vec<String>,
    pub fields: Vec<String>,
    pub params: Vec<String>,
    pub max_order: usize,
    pub order_cap: usize,
    pub symbols: SymbolTable,
    pub cancel: CancelToken,
}

impl BundleSpec {
    pub fn new(base: &[&str], fields: &[&str], max_order: usize) -> Result<Self> {
        Self::build(
            base.iter().map(|s| s.to_string()).collect(),
            fields.iter().map(|s| s.to_string()).collect(),
            Vec::new(),
            max_order,
        )
    }

    pub fn build(base: Vec<String>, fields: Vec<String>, params: Vec<String>, max_order: usize) -> Result<Self> {
        if base.is_empty() || fields.is_empty() || max_order == 0 {
            return Err(Error::Precondition("bundle needs n >= 1, m >= 1 and order >= 1".into()));
        }
        let mut all: Vec<&String> = base.iter().chain(&fields).chain(&params).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("bundle names must be distinct".into()));
        }
        Ok(BundleSpec {
            base,
            fields,
            params,
            max_order,
            order_cap: 4 * max_order + 2,
            symbols: SymbolTable::new(),
            cancel: CancelToken::default(),
        })
    }

    pub fn with_params(mut self, params: &[&str]) -> Self {
        self.params = params.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.order_cap = cap;
        self
    }

    /// Base dimension `n`.
    pub fn n(&self) -> usize {
        self.base.len()
    }

    /// Fiber dimension `m`.
    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn zero_index(&self) -> MultiIndex {
        MultiIndex::zero(self.n())
    }

    pub fn unit(&self, sigma: usize) -> MultiIndex {
        MultiIndex::unit(self.n(), sigma)
    }

    pub fn field(&self, i: usize) -> Expr {
        Expr::field(i, self.zero_index())
    }

    pub fn field_jet(&self, i: usize, alpha: &[u8]) -> Expr {
        Expr::field(i, MultiIndex::from_slice(alpha))
    }

    pub fn param(&self, a: usize) -> Expr {
        Expr::param(a, self.zero_index())
    }

    pub fn param_jet(&self, a: usize, alpha: &[u8]) -> Expr {
        Expr::param(a, MultiIndex::from_slice(alpha))
    }

    pub fn names(&self) -> Names {
        Names::from_table(&self.base, &self.fields, &self.params, &self.symbols)
    }

    /// Index of a fresh parameter function, appended to the table.
    pub fn fresh_param(&mut self, stem: &str) -> usize {
        let mut k = self.params.len();
        loop {
            let name = format!("{stem}{k}");
            if !self.params.contains(&name) && !self.base.contains(&name) && !self.fields.contains(&name) {
                self.params.push(name);
                return self.params.len() - 1;
            }
            k += 1;
        }
    }

    /// Canonical JSON description.
    pub fn to_json(&self) -> Value {
        let names = self.names();
        let symbols: Vec<Value> = self
            .symbols
            .iter()
            .map(|(_, s)| {
                json!({
                    "name": s.name,
                    "arity": s.arity,
                    "rules": s.rules.as_ref().map(|rs| rs.iter().map(|r| r.as_ref().map(|e| e.to_json(&names))).collect::<Vec<_>>()),
                })
            })
            .collect();
        json!({
            "base": self.base,
            "fields": self.fields,
            "params": self.params,
            "max_order": self.max_order,
            "order_cap": self.order_cap,
            "symbols": symbols,
        })
    }

    /// `D_σ e = ∂_σ e + Σ y^j_{α+σ} ∂e/∂y^j_α + Σ ε^A_{α+σ} ∂e/∂ε^A_α`.
    pub fn total_derivative(&self, e: &Expr, sigma: usize) -> Result<Expr> {
        if sigma >= self.n() {
            return Err(Error::Precondition(format!("direction {sigma} out of range")));
        }
        let cap = self.order_cap;
        let n = self.n();
        let mut d = Deriver::new(&self.symbols, move |a: &Atom| match a {
            Atom::Coord(t) => Ok(if *t as usize == sigma { Expr::one() } else { Expr::zero() }),
            Atom::Jet(v) => {
                if v.alpha.dim() != n {
                    return Err(Error::Precondition(format!(
                        "jet variable of dimension {} in a base of dimension {n}",
                        v.alpha.dim()
                    )));
                }
                let next = v.with_alpha(v.alpha.bump(sigma));
                if next.order() > cap {
                    return Err(Error::OrderOverflow { order: next.order(), cap });
                }
                Ok(Expr::jet(next))
            }
            _ => Ok(Expr::zero()),
        });
        d.expr(e)
    }

    /// `D_α e`, applying one direction at a time.
    pub fn iterated_total_derivative(&self, e: &Expr, alpha: &MultiIndex) -> Result<Expr> {
        let mut out = e.clone();
        for sigma in 0..alpha.dim() {
            for _ in 0..alpha.get(sigma) {
                self.cancel.check()?;
                out = self.total_derivative(&out, sigma)?;
            }
        }
        Ok(out)
    }

    /// Total divergence `D_μ W^μ`.
    pub fn divergence(&self, current: &[Expr]) -> Result<Expr> {
        let mut parts = Vec::with_capacity(current.len());
        for (mu, w) in current.iter().enumerate() {
            parts.push(self.total_derivative(w, mu)?);
        }
        Ok(Expr::sum(parts))
    }

    /// `∂_α f` for an expression in the base coordinates.
    pub fn coordinate_derivative(&self, f: &Expr, alpha: &MultiIndex) -> Result<Expr> {
        let mut out = f.clone();
        for sigma in 0..alpha.dim() {
            for _ in 0..alpha.get(sigma) {
                out = out.partial(&VarKey::coord(sigma), &self.symbols)?;
            }
        }
        Ok(out)
    }

    /// Evaluates `e` along the section `y^i = section[i](x)`: every field jet
    /// `y^i_α` becomes `∂_α section[i]`.
    pub fn substitute_section(&self, e: &Expr, section: &[Expr]) -> Result<Expr> {
        if section.len() != self.m() {
            return Err(Error::Precondition(format!(
                "section has {} components, bundle has {} fields",
                section.len(),
                self.m()
            )));
        }
        let mut jets = std::collections::BTreeMap::new();
        for v in e.jet_vars() {
            if v.family == Family::Field {
                let d = self.coordinate_derivative(&section[v.index as usize], &v.alpha)?;
                jets.insert(v, d);
            }
        }
        e.replace_leaves(&mut |a| match a {
            Atom::Jet(v) => jets.get(v).cloned(),
            _ => None,
        })
    }

    pub fn check_order(&self, e: &Expr) -> Result<()> {
        let order = jet_order(e);
        if order > self.order_cap {
            return Err(Error::OrderOverflow { order, cap: self.order_cap });
        }
        Ok(())
    }
}

pub fn jet_order(e: &Expr) -> usize {
    e.jet_order()
}

/// `y^i_α` as a jet variable key.
pub fn field_var(i: usize, alpha: MultiIndex) -> JetVar {
    JetVar::field(i, alpha)
}
