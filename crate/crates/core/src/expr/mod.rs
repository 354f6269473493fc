//! Canonical symbolic expressions over exact rationals.
//!
//! An [`Expr`] is stored as a sorted sum of terms, each term a rational
//! coefficient times a [`Monomial`]: a sorted product of [`Atom`]s raised to
//! rational exponents. Every constructor returns the canonical form, so two
//! expressions are equal exactly when their trees compare equal.
//!
//! Positive integer powers of sums are always expanded. Other powers of
//! non-atomic bases are kept as a [`Atom::Group`] factor.

mod calculus;
mod render;
mod symbol;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bundle::MultiIndex;

pub(crate) use calculus::Deriver;
pub use calculus::VarKey;
pub use render::{Names, RenderStyle};
pub use symbol::{DefinedSymbol, SymbolId, SymbolTable};

pub type Coeff = BigRational;
pub type Exponent = Rational64;

/// Whether a jet variable belongs to a field or to a parameter function.
///
/// Parameter functions depend on the base only, so total derivatives act on
/// them exactly as on fields, but vertical differentials ignore them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Field,
    Param,
}

/// `y^i_α` (field) or `ε^A_α` (parameter).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub family: Family,
    pub index: u16,
    pub alpha: MultiIndex,
}

impl JetVar {
    pub fn field(index: usize, alpha: MultiIndex) -> Self {
        Self { family: Family::Field, index: index as u16, alpha }
    }

    pub fn param(index: usize, alpha: MultiIndex) -> Self {
        Self { family: Family::Param, index: index as u16, alpha }
    }

    pub fn order(&self) -> usize {
        self.alpha.order()
    }

    pub fn with_alpha(&self, alpha: MultiIndex) -> Self {
        Self { family: self.family, index: self.index, alpha }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            _ => return None,
        })
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
        }
    }
}

/// Application of a user-declared symbol, possibly differentiated a number of
/// times in each argument slot (only for symbols without explicit rules).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymApp {
    pub id: SymbolId,
    pub derivs: Vec<u16>,
    pub args: Vec<Expr>,
}

/// Indivisible factor of a monomial. The derived ordering (variant first,
/// then indices, then children) is the canonical term order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Pi,
    Coord(u16),
    Jet(JetVar),
    /// Placeholder for the k-th argument inside a derivative rule template.
    Slot(u16),
    Func(Func, Expr),
    Sym(SymApp),
    /// A base that is not a single atom, raised to a power that cannot be
    /// expanded (non-integer or negative).
    Group(Expr),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Atom, Exponent)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn factors(&self) -> &[(Atom, Exponent)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn from_sorted(v: Vec<(Atom, Exponent)>) -> Self {
        Monomial(v)
    }

    fn single(atom: Atom, exp: Exponent) -> Self {
        Monomial(vec![(atom, exp)])
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if !e.is_zero() {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Group factors whose exponent became a positive integer must be expanded.
    fn needs_expansion(&self) -> bool {
        self.0.iter().any(|(a, e)| matches!(a, Atom::Group(_)) && e.is_integer() && e.is_positive())
    }

    /// Monomial with the factor at `k` lowered by one power.
    fn lowered(&self, k: usize) -> Monomial {
        let mut v = self.0.clone();
        let e = v[k].1 - Exponent::one();
        if e.is_zero() {
            v.remove(k);
        } else {
            v[k].1 = e;
        }
        Monomial(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub mono: Monomial,
    pub coeff: Coeff,
}

/// Canonical symbolic expression. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<[Term]>);

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&Names::default(), RenderStyle::Plain))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&Names::default(), RenderStyle::Plain))
    }
}

pub(crate) type TermMap = BTreeMap<Monomial, Coeff>;

fn accumulate(map: &mut TermMap, mono: Monomial, coeff: Coeff) {
    if coeff.is_zero() {
        return;
    }
    match map.entry(mono) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(coeff);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += coeff;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr(Arc::from(Vec::new()))
    }

    pub fn one() -> Self {
        Expr::constant(Coeff::one())
    }

    pub fn int(v: i64) -> Self {
        Expr::constant(Coeff::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Expr::constant(Coeff::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn constant(c: Coeff) -> Self {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr(Arc::from(vec![Term { mono: Monomial::one(), coeff: c }]))
    }

    pub fn pi() -> Self {
        Expr::atom(Atom::Pi)
    }

    pub fn coord(sigma: usize) -> Self {
        Expr::atom(Atom::Coord(sigma as u16))
    }

    pub fn jet(var: JetVar) -> Self {
        Expr::atom(Atom::Jet(var))
    }

    pub fn field(index: usize, alpha: MultiIndex) -> Self {
        Expr::jet(JetVar::field(index, alpha))
    }

    pub fn param(index: usize, alpha: MultiIndex) -> Self {
        Expr::jet(JetVar::param(index, alpha))
    }

    pub fn slot(k: usize) -> Self {
        Expr::atom(Atom::Slot(k as u16))
    }

    /// `a^p` as a canonical expression.
    pub fn from_atom_power(a: Atom, p: Exponent) -> Self {
        Expr::from_monomial(Monomial::single(a, p), Coeff::one())
    }

    /// Builds the expression for a single atom. `Group` atoms are only created
    /// through [`Expr::pow`].
    pub(crate) fn atom(a: Atom) -> Self {
        Expr(Arc::from(vec![Term { mono: Monomial::single(a, Exponent::one()), coeff: Coeff::one() }]))
    }

    pub fn func(f: Func, arg: Expr) -> Self {
        if let Some(c) = arg.as_constant() {
            match (f, c.is_zero(), c.is_one()) {
                (Func::Sin, true, _) => return Expr::zero(),
                (Func::Cos, true, _) | (Func::Exp, true, _) => return Expr::one(),
                (Func::Ln, _, true) => return Expr::zero(),
                _ => {}
            }
        }
        if let Some(k) = arg.half_pi_multiple() {
            // sin and cos at integer multiples of π/2.
            let r = k.rem_euclid(4);
            match f {
                Func::Sin => return Expr::int([0, 1, 0, -1][r as usize]),
                Func::Cos => return Expr::int([1, 0, -1, 0][r as usize]),
                _ => {}
            }
        }
        Expr::atom(Atom::Func(f, arg))
    }

    /// `k` when the expression is exactly `k π/2` for an integer `k`.
    fn half_pi_multiple(&self) -> Option<i64> {
        let [t] = &*self.0 else { return None };
        if t.mono.0.len() != 1 || t.mono.0[0] != (Atom::Pi, Exponent::one()) {
            return None;
        }
        let twice = &t.coeff * Coeff::from_integer(2.into());
        if twice.is_integer() {
            twice.to_integer().to_i64()
        } else {
            None
        }
    }

    pub fn sin(arg: Expr) -> Self {
        Expr::func(Func::Sin, arg)
    }

    pub fn cos(arg: Expr) -> Self {
        Expr::func(Func::Cos, arg)
    }

    pub fn exp(arg: Expr) -> Self {
        Expr::func(Func::Exp, arg)
    }

    pub fn ln(arg: Expr) -> Self {
        Expr::func(Func::Ln, arg)
    }

    pub fn sqrt(arg: Expr) -> Self {
        arg.pow(Exponent::new(1, 2))
    }

    pub fn sym(id: SymbolId, args: Vec<Expr>) -> Self {
        let derivs = vec![0; args.len()];
        Expr::atom(Atom::Sym(SymApp { id, derivs, args }))
    }

    pub(crate) fn sym_app(app: SymApp) -> Self {
        Expr::atom(Atom::Sym(app))
    }

    pub(crate) fn from_map(map: TermMap) -> Self {
        let v: Vec<Term> = map.into_iter().map(|(mono, coeff)| Term { mono, coeff }).collect();
        Expr(Arc::from(v))
    }

    /// Canonical expression for `coeff * mono`, expanding any group factor that
    /// reached a positive integer exponent.
    pub(crate) fn from_monomial(mono: Monomial, coeff: Coeff) -> Self {
        if coeff.is_zero() {
            return Expr::zero();
        }
        if !mono.needs_expansion() {
            return Expr(Arc::from(vec![Term { mono, coeff }]));
        }
        let mut rest = Vec::new();
        let mut expanded = Expr::constant(coeff);
        for (a, e) in mono.0 {
            match a {
                Atom::Group(base) if e.is_integer() && e.is_positive() => {
                    expanded = &expanded * &base.pow_int(e.to_integer() as u32);
                }
                a => rest.push((a, e)),
            }
        }
        let rest = Expr(Arc::from(vec![Term { mono: Monomial::from_sorted(rest), coeff: Coeff::one() }]));
        &expanded * &rest
    }

    pub fn terms(&self) -> &[Term] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// The rational value, if the expression is a constant.
    pub fn as_constant(&self) -> Option<Coeff> {
        match &*self.0 {
            [] => Some(Coeff::zero()),
            [t] if t.mono.is_one() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    /// The single atom, if the expression is exactly one atom with unit
    /// coefficient and exponent.
    pub fn as_atom(&self) -> Option<&Atom> {
        match &*self.0 {
            [t] if t.coeff.is_one() && t.mono.0.len() == 1 && t.mono.0[0].1.is_one() => Some(&t.mono.0[0].0),
            _ => None,
        }
    }

    pub fn as_jet(&self) -> Option<&JetVar> {
        match self.as_atom() {
            Some(Atom::Jet(v)) => Some(v),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        let v: Vec<Term> = self.0.iter().map(|t| Term { mono: t.mono.clone(), coeff: &t.coeff * c }).collect();
        Expr(Arc::from(v))
    }

    pub fn scale_int(&self, c: i64) -> Expr {
        self.scale(&Coeff::from_integer(BigInt::from(c)))
    }

    fn add_ref(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].mono.cmp(&b[j].mono) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = &a[i].coeff + &b[j].coeff;
                    if !c.is_zero() {
                        out.push(Term { mono: a[i].mono.clone(), coeff: c });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Expr(Arc::from(out))
    }

    fn mul_ref(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut map = TermMap::new();
        let mut deferred = Vec::new();
        for s in self.0.iter() {
            for o in other.0.iter() {
                let m = s.mono.mul(&o.mono);
                let c = &s.coeff * &o.coeff;
                if m.needs_expansion() {
                    deferred.push(Expr::from_monomial(m, c));
                } else {
                    accumulate(&mut map, m, c);
                }
            }
        }
        for e in deferred {
            for t in e.0.iter() {
                accumulate(&mut map, t.mono.clone(), t.coeff.clone());
            }
        }
        Expr::from_map(map)
    }

    fn pow_int(&self, k: u32) -> Expr {
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Rational power. Panics on a negative power of zero; use
    /// [`Expr::try_pow`] where the base may vanish.
    pub fn pow(&self, p: Exponent) -> Expr {
        self.try_pow(p).expect("negative power of zero")
    }

    pub fn powi(&self, k: i64) -> Expr {
        self.pow(Exponent::from_integer(k))
    }

    pub fn try_pow(&self, p: Exponent) -> Option<Expr> {
        if p.is_zero() {
            return Some(Expr::one());
        }
        if self.is_zero() {
            return if p.is_positive() { Some(Expr::zero()) } else { None };
        }
        if let [t] = &*self.0 {
            if p.is_integer() {
                let k = p.to_integer();
                let c = pow_coeff(&t.coeff, k);
                let mono = Monomial(t.mono.0.iter().map(|(a, e)| (a.clone(), e * p)).collect());
                return Some(Expr::from_monomial(mono, c));
            }
            if t.mono.is_one() {
                if let Some(c) = exact_root(&t.coeff, p) {
                    return Some(Expr::constant(c));
                }
            } else if t.coeff.is_one() && t.mono.0.len() == 1 && t.mono.0[0].1.is_one() {
                let a = t.mono.0[0].0.clone();
                return Some(Expr(Arc::from(vec![Term { mono: Monomial::single(a, p), coeff: Coeff::one() }])));
            }
            return Some(Expr(Arc::from(vec![Term {
                mono: Monomial::single(Atom::Group(self.clone()), p),
                coeff: Coeff::one(),
            }])));
        }
        if p.is_integer() && p.is_positive() {
            return Some(self.pow_int(p.to_integer() as u32));
        }
        Some(Expr(Arc::from(vec![Term { mono: Monomial::single(Atom::Group(self.clone()), p), coeff: Coeff::one() }])))
    }

    pub fn try_div(&self, other: &Expr) -> Option<Expr> {
        other.try_pow(Exponent::from_integer(-1)).map(|inv| self * &inv)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(iter: I) -> Expr {
        let mut map = TermMap::new();
        for e in iter {
            for t in e.0.iter() {
                accumulate(&mut map, t.mono.clone(), t.coeff.clone());
            }
        }
        Expr::from_map(map)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(iter: I) -> Expr {
        iter.into_iter().fold(Expr::one(), |acc, e| &acc * &e)
    }

    /// Visits every atom, including atoms nested in function arguments,
    /// symbol arguments and group bases.
    pub fn visit_atoms(&self, f: &mut dyn FnMut(&Atom)) {
        for t in self.0.iter() {
            for (a, _) in t.mono.0.iter() {
                f(a);
                match a {
                    Atom::Func(_, arg) | Atom::Group(arg) => arg.visit_atoms(f),
                    Atom::Sym(app) => app.args.iter().for_each(|x| x.visit_atoms(f)),
                    _ => {}
                }
            }
        }
    }

    pub fn jet_vars(&self) -> std::collections::BTreeSet<JetVar> {
        let mut set = std::collections::BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Jet(v) = a {
                set.insert(v.clone());
            }
        });
        set
    }

    pub fn contains_family(&self, family: Family) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| {
            if let Atom::Jet(v) = a {
                found |= v.family == family;
            }
        });
        found
    }

    pub fn depends_on_coord(&self) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| found |= matches!(a, Atom::Coord(_)));
        found
    }

    /// Total degree of each term in the jet variables accepted by `pred`,
    /// or `None` if such a variable occurs non-polynomially.
    pub fn degrees_in(&self, pred: &dyn Fn(&JetVar) -> bool) -> Option<Vec<u32>> {
        let mut out = Vec::with_capacity(self.0.len());
        for t in self.0.iter() {
            let mut d = 0u32;
            for (a, e) in t.mono.0.iter() {
                match a {
                    Atom::Jet(v) if pred(v) => {
                        if !e.is_integer() || e.is_negative() {
                            return None;
                        }
                        d += e.to_integer() as u32;
                    }
                    Atom::Jet(_) | Atom::Pi | Atom::Coord(_) | Atom::Slot(_) => {}
                    other => {
                        let mut hit = false;
                        let probe = Expr::atom(other.clone());
                        probe.visit_atoms(&mut |x| {
                            if let Atom::Jet(v) = x {
                                hit |= pred(v);
                            }
                        });
                        if hit {
                            return None;
                        }
                    }
                }
            }
            out.push(d);
        }
        Some(out)
    }

    /// Splits the expression by polynomial degree in the selected variables.
    pub fn homogeneous_parts(&self, pred: &dyn Fn(&JetVar) -> bool) -> Option<BTreeMap<u32, Expr>> {
        let degs = self.degrees_in(pred)?;
        let mut maps: BTreeMap<u32, TermMap> = BTreeMap::new();
        for (t, d) in self.0.iter().zip(degs) {
            maps.entry(d).or_default().insert(t.mono.clone(), t.coeff.clone());
        }
        Some(maps.into_iter().map(|(d, m)| (d, Expr::from_map(m))).collect())
    }
}

fn pow_coeff(c: &Coeff, k: i64) -> Coeff {
    if k >= 0 {
        num_traits::pow(c.clone(), k as usize)
    } else {
        num_traits::pow(c.recip(), (-k) as usize)
    }
}

/// `c^p` when it is rational, for positive `c`.
fn exact_root(c: &Coeff, p: Exponent) -> Option<Coeff> {
    if !c.is_positive() {
        return None;
    }
    let den = *p.denom() as u32;
    let num = c.numer().nth_root(den);
    let dnm = c.denom().nth_root(den);
    if num.pow(den) != *c.numer() || dnm.pow(den) != *c.denom() {
        return None;
    }
    let root = Coeff::new(num, dnm);
    Some(pow_coeff(&root, *p.numer()))
}

pub(crate) fn exponent_is_half(e: &Exponent) -> bool {
    *e.numer() == 1 && *e.denom() == 2
}

pub(crate) fn coeff_to_f64(c: &Coeff) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $tr::$m(&self, &rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $tr::$m(&self, rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $tr::$m(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.add_ref(b));
binop!(Sub, sub, |a, b| a.add_ref(&b.scale_int(-1)));
binop!(Mul, mul, |a, b| a.mul_ref(b));
binop!(Div, div, |a, b| a.try_div(b).expect("division by zero"));

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale_int(-1)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale_int(-1)
    }
}

impl AddAssign<&Expr> for Expr {
    fn add_assign(&mut self, rhs: &Expr) {
        *self = self.add_ref(rhs);
    }
}

impl AddAssign<Expr> for Expr {
    fn add_assign(&mut self, rhs: Expr) {
        *self = self.add_ref(&rhs);
    }
}

impl SubAssign<&Expr> for Expr {
    fn sub_assign(&mut self, rhs: &Expr) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Expr> for Expr {
    fn mul_assign(&mut self, rhs: &Expr) {
        *self = self.mul_ref(rhs);
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}
