//! Name resolution and construction of the bundle, Lagrangian and rule
//! sets from a syntax tree.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::ast::*;
use super::parser::is_function;
use super::ParseError;
use crate::bundle::{BundleSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::expr::{Coeff, DefinedSymbol, Exponent, Expr, Family, Func};
use crate::fields::{BracketKind, ParamVectorField, VectorField};
use crate::oracle::eval_at;
use crate::variational::Lagrangian;

/// A named vertical field used as a variation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Variation {
    pub name: String,
    pub field: VectorField,
    /// Parameter functions the components depend on.
    pub bank: Vec<usize>,
}

/// Scalar Jacobi equation set-up along the background.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiSetup {
    pub field: usize,
    pub interval: (f64, f64),
    /// `(w, w')` at the start of the interval.
    pub initial: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    pub section: Vec<Expr>,
    pub jacobi: Option<JacobiSetup>,
}

/// Data for the action-gradient oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSetup {
    pub section: Vec<Expr>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Nodes per base direction.
    pub nodes: usize,
    pub accuracy: usize,
}

/// A fully resolved problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: BundleSpec,
    pub lagrangian: Lagrangian,
    pub lifts: Vec<ParamVectorField>,
    pub variations: Vec<Variation>,
    pub background: Option<Background>,
    pub oracle: Option<OracleSetup>,
}

fn at(span: Span, msg: impl Into<String>) -> Error {
    Error::Parse(ParseError::new(span.line, span.column, msg))
}

/// Resolves a syntax tree. `cap` overrides the derivative-order cap.
pub fn lower(ast: &ProblemAst, cap: Option<usize>) -> Result<Problem> {
    let bundle = ast
        .sections
        .iter()
        .find_map(|s| match s {
            Section::Bundle(b) => Some(b),
            _ => None,
        })
        .ok_or_else(|| at(Span { line: 1, column: 1 }, "missing `[bundle]` section"))?;
    let mut spec = BundleSpec::build(bundle.base.clone(), bundle.fields.clone(), bundle.params.clone(), bundle.order)
        .map_err(|e| at(bundle.span, e.to_string()))?;
    if let Some(c) = bundle.cap {
        spec.order_cap = c;
    }
    if let Some(c) = cap {
        spec.order_cap = c;
    }
    for s in &ast.sections {
        if let Section::Symbols(symbols) = s {
            declare_symbols(&mut spec, symbols)?;
        }
    }
    let density = ast
        .sections
        .iter()
        .find_map(|s| match s {
            Section::Lagrangian(e) => Some(e),
            _ => None,
        })
        .ok_or_else(|| at(Span { line: 1, column: 1 }, "missing `[lagrangian]` section"))?;
    let density = Scope::new(&spec).lower(density)?;
    if density.contains_family(Family::Param) {
        return Err(at(Span { line: 1, column: 1 }, "the Lagrangian may not depend on parameter functions"));
    }
    let lagrangian = Lagrangian::new(&spec, density)?;
    let mut problem = Problem {
        spec: spec.clone(),
        lagrangian,
        lifts: Vec::new(),
        variations: Vec::new(),
        background: None,
        oracle: None,
    };
    for s in &ast.sections {
        match s {
            Section::Lift(l) => problem.lifts.push(lower_lift(&spec, l)?),
            Section::Variation(v) => {
                let comps = components(&spec, &v.components, v.span, false)?;
                let field = VectorField::vertical(&spec, comps);
                let bank = bank_of(&field);
                problem.variations.push(Variation { name: v.name.clone(), field, bank });
            }
            Section::Background(b) => problem.background = Some(lower_background(&spec, b)?),
            Section::Oracle(o) => problem.oracle = Some(lower_oracle(&spec, o)?),
            _ => {}
        }
    }
    Ok(problem)
}

fn declare_symbols(spec: &mut BundleSpec, symbols: &[SymbolDecl]) -> Result<()> {
    for s in symbols {
        if spec.symbols.lookup(&s.name).is_some() || is_function(&s.name) || declared_name(spec, &s.name) {
            return Err(at(s.span, format!("`{}` is already declared", s.name)));
        }
        spec.symbols.declare(DefinedSymbol::opaque(s.name.clone(), s.params.len()));
    }
    for s in symbols.iter().filter(|s| !s.rules.is_empty()) {
        let mut rules = vec![None; s.params.len()];
        for (param, template) in &s.rules {
            let k = s.params.iter().position(|p| p == param).expect("checked by the parser");
            let mut scope = Scope::new(spec);
            scope.slots = s.params.clone();
            rules[k] = Some(scope.lower(template)?);
        }
        let id = spec.symbols.lookup(&s.name).expect("declared above");
        spec.symbols.set_rules(id, rules);
    }
    spec.symbols.validate().map_err(|m| at(symbols.first().map(|s| s.span).unwrap_or_default(), m))
}

fn declared_name(spec: &BundleSpec, name: &str) -> bool {
    spec.base.iter().chain(&spec.fields).chain(&spec.params).any(|n| n == name)
}

fn field_index(spec: &BundleSpec, a: &Assignment) -> Result<usize> {
    spec.fields.iter().position(|f| *f == a.key).ok_or_else(|| {
        Error::Parse(
            ParseError::new(a.span.line, a.span.column, format!("`{}` is not a field", a.key))
                .expecting(spec.fields.iter().cloned()),
        )
    })
}

/// One expression per field; unspecified fields default to zero unless
/// `complete` is requested.
fn components(spec: &BundleSpec, list: &[Assignment], span: Span, complete: bool) -> Result<Vec<Expr>> {
    let mut out: Vec<Option<Expr>> = vec![None; spec.m()];
    for a in list {
        let i = field_index(spec, a)?;
        if out[i].is_some() {
            return Err(at(a.span, format!("`{}` assigned twice", a.key)));
        }
        out[i] = Some(Scope::new(spec).lower(&a.values[0])?);
    }
    if complete {
        if let Some(i) = out.iter().position(Option::is_none) {
            return Err(at(span, format!("missing component for field `{}`", spec.fields[i])));
        }
    }
    Ok(out.into_iter().map(Option::unwrap_or_default).collect())
}

fn bank_of(field: &VectorField) -> Vec<usize> {
    let mut bank = std::collections::BTreeSet::new();
    for e in field.xi.iter().chain(&field.components) {
        for v in e.jet_vars() {
            if v.family == Family::Param {
                bank.insert(v.index as usize);
            }
        }
    }
    bank.into_iter().collect()
}

fn lower_lift(spec: &BundleSpec, l: &LiftDecl) -> Result<ParamVectorField> {
    let xi = match &l.xi {
        Some(list) => {
            if list.len() != spec.n() {
                return Err(at(l.span, format!("`xi` needs {} components, found {}", spec.n(), list.len())));
            }
            list.iter().map(|e| Scope::new(spec).lower(e)).collect::<Result<Vec<_>>>()?
        }
        None => vec![Expr::zero(); spec.n()],
    };
    let comps = components(spec, &l.components, l.span, false)?;
    let field = VectorField { xi, components: comps };
    field.validate(spec).map_err(|e| at(l.span, e.to_string()))?;
    let bracket = match l.bracket {
        Some(BracketAst::Abelian) => BracketKind::Abelian,
        Some(BracketAst::Natural) => BracketKind::Natural,
        Some(BracketAst::Unchecked) | None => BracketKind::Unchecked,
    };
    let bank = bank_of(&field);
    Ok(ParamVectorField::new(l.name.clone(), bank, field, bracket))
}

fn numeric(spec: &BundleSpec, e: &ExprAst) -> Result<f64> {
    let v = Scope::new(spec).lower(e)?;
    eval_at(&v, &[]).map_err(|_| at(e.span(), "expected a numeric constant"))
}

fn coordinate_only(spec: &BundleSpec, list: &[Expr], span: Span) -> Result<()> {
    if list.iter().any(|e| !e.jet_vars().is_empty()) {
        return Err(at(span, "section components may depend on base coordinates only"));
    }
    let _ = spec;
    Ok(())
}

fn lower_background(spec: &BundleSpec, b: &BackgroundDecl) -> Result<Background> {
    let section = components(spec, &b.components, b.span, true)?;
    coordinate_only(spec, &section, b.span)?;
    let jacobi = match &b.jacobi {
        None => None,
        Some((name, span)) => {
            let field = spec.fields.iter().position(|f| f == name).ok_or_else(|| {
                Error::Parse(
                    ParseError::new(span.line, span.column, format!("`{name}` is not a field"))
                        .expecting(spec.fields.iter().cloned()),
                )
            })?;
            if spec.n() != 1 {
                return Err(at(*span, "the Jacobi equation is integrated on one-dimensional bases only"));
            }
            let range = b.interval.as_ref().ok_or_else(|| at(b.span, "`jacobi` needs `interval = a .. b`"))?;
            let interval = (numeric(spec, &range.lo)?, numeric(spec, &range.hi)?);
            let initial = match &b.initial {
                None => (0.0, 1.0),
                Some(v) if v.len() == 2 => (numeric(spec, &v[0])?, numeric(spec, &v[1])?),
                Some(_) => return Err(at(b.span, "`initial` takes two values: w, w'")),
            };
            Some(JacobiSetup { field, interval, initial })
        }
    };
    Ok(Background { section, jacobi })
}

fn lower_oracle(spec: &BundleSpec, o: &OracleDecl) -> Result<OracleSetup> {
    let section = components(spec, &o.components, o.span, true)?;
    coordinate_only(spec, &section, o.span)?;
    if o.domain.len() != spec.n() {
        return Err(at(o.span, format!("`domain` needs {} ranges, found {}", spec.n(), o.domain.len())));
    }
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for r in &o.domain {
        lo.push(numeric(spec, &r.lo)?);
        hi.push(numeric(spec, &r.hi)?);
    }
    let accuracy = o.accuracy.unwrap_or(6);
    if accuracy == 0 || accuracy % 2 == 1 {
        return Err(at(o.span, "`accuracy` must be a positive even integer"));
    }
    Ok(OracleSetup { section, lo, hi, nodes: o.nodes, accuracy })
}

/// Parses a decimal literal exactly.
pub fn decimal(text: &str) -> Option<Coeff> {
    match text.split_once('.') {
        None => text.parse::<BigInt>().ok().map(Coeff::from_integer),
        Some((int, frac)) => {
            let digits: BigInt = format!("{int}{frac}").parse().ok()?;
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            Some(Coeff::new(digits, scale))
        }
    }
}

struct Scope<'a> {
    spec: &'a BundleSpec,
    slots: Vec<String>,
    indices: Vec<(String, i64)>,
}

impl<'a> Scope<'a> {
    fn new(spec: &'a BundleSpec) -> Self {
        Self { spec, slots: Vec::new(), indices: Vec::new() }
    }

    fn index_value(&self, name: &str) -> Option<i64> {
        self.indices.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn known_names(&self) -> Vec<String> {
        let s = self.spec;
        let mut out: Vec<String> = s.base.iter().chain(&s.fields).chain(&s.params).cloned().collect();
        out.extend(self.slots.iter().cloned());
        out.extend(self.indices.iter().map(|(n, _)| n.clone()));
        out.push("pi".into());
        out
    }

    fn multi_index(&self, jet: &JetSuffix, span: Span) -> Result<MultiIndex> {
        let n = self.spec.n();
        match jet {
            JetSuffix::None => Ok(self.spec.zero_index()),
            JetSuffix::Counts(c) => {
                if c.len() != n {
                    return Err(at(span, format!("multi-index needs {n} entries, found {}", c.len())));
                }
                let bytes: Vec<u8> = c.iter().map(|&v| v.min(255) as u8).collect();
                Ok(MultiIndex::from_slice(&bytes))
            }
            JetSuffix::Letters(letters) => {
                let mut counts = vec![0u8; n];
                let mut rest = letters.as_str();
                while !rest.is_empty() {
                    let best = (0..n)
                        .filter(|&s| rest.starts_with(self.spec.base[s].as_str()))
                        .max_by_key(|&s| self.spec.base[s].len())
                        .ok_or_else(|| {
                            Error::Parse(
                                ParseError::new(span.line, span.column, format!("`{rest}` is not a base coordinate"))
                                    .expecting(self.spec.base.iter().cloned()),
                            )
                        })?;
                    counts[best] = counts[best].saturating_add(1);
                    rest = &rest[self.spec.base[best].len()..];
                }
                Ok(MultiIndex::from_slice(&counts))
            }
        }
    }

    fn lower(&mut self, e: &ExprAst) -> Result<Expr> {
        match e {
            ExprAst::Number { text, span } => {
                decimal(text).map(Expr::constant).ok_or_else(|| at(*span, format!("bad number `{text}`")))
            }
            ExprAst::Var { name, jet, span } => self.variable(name, jet, *span),
            ExprAst::Call { func, args, span } => self.call(func, args, *span),
            ExprAst::Sum { index, lo, hi, body, .. } => {
                let mut parts = Vec::new();
                for v in *lo..=*hi {
                    self.indices.push((index.clone(), v));
                    let part = self.lower(body);
                    self.indices.pop();
                    parts.push(part?);
                }
                Ok(Expr::sum(parts))
            }
            ExprAst::Neg { arg, .. } => Ok(-self.lower(arg)?),
            ExprAst::Binary { op, lhs, rhs, span } => {
                let a = self.lower(lhs)?;
                let b = self.lower(rhs)?;
                match op {
                    BinOp::Add => Ok(&a + &b),
                    BinOp::Sub => Ok(&a - &b),
                    BinOp::Mul => Ok(&a * &b),
                    BinOp::Div => a.try_div(&b).ok_or_else(|| at(*span, "division by zero")),
                    BinOp::Pow => {
                        let c =
                            b.as_constant().ok_or_else(|| at(rhs.span(), "exponents must be rational constants"))?;
                        let p = match (c.numer().to_i64(), c.denom().to_i64()) {
                            (Some(n), Some(d)) => Exponent::new(n, d),
                            _ => return Err(at(rhs.span(), "exponent out of range")),
                        };
                        a.try_pow(p).ok_or_else(|| at(*span, "negative power of zero"))
                    }
                }
            }
        }
    }

    fn resolve_name(&self, parts: &[NamePart], span: Span) -> Result<String> {
        let mut s = String::new();
        for p in parts {
            match p {
                NamePart::Lit(t) => s.push_str(t),
                NamePart::Index(i) => match self.index_value(i) {
                    Some(v) => s.push_str(&v.to_string()),
                    None => return Err(at(span, format!("`{i}` is not a summation index in scope"))),
                },
            }
        }
        Ok(s)
    }

    fn variable(&self, parts: &[NamePart], jet: &JetSuffix, span: Span) -> Result<Expr> {
        let name = self.resolve_name(parts, span)?;
        let plain = *jet == JetSuffix::None;
        if plain {
            if let Some(v) = self.index_value(&name) {
                return Ok(Expr::int(v));
            }
            if name == "pi" {
                return Ok(Expr::pi());
            }
            if let Some(k) = self.slots.iter().position(|s| *s == name) {
                return Ok(Expr::slot(k));
            }
            if let Some(s) = self.spec.base.iter().position(|b| *b == name) {
                return Ok(Expr::coord(s));
            }
        }
        let s = self.spec;
        let target = if let Some(i) = s.fields.iter().position(|f| *f == name) {
            Some((Family::Field, i))
        } else {
            s.params.iter().position(|p| *p == name).map(|a| (Family::Param, a))
        };
        match target {
            Some((family, index)) => {
                let alpha = self.multi_index(jet, span)?;
                Ok(match family {
                    Family::Field => Expr::field(index, alpha),
                    Family::Param => Expr::param(index, alpha),
                })
            }
            None if !plain && (s.base.contains(&name) || name == "pi") => {
                Err(at(span, format!("`{name}` cannot carry derivatives")))
            }
            None => Err(Error::Parse(
                ParseError::new(span.line, span.column, format!("undeclared name `{name}`"))
                    .expecting(self.known_names()),
            )),
        }
    }

    fn call(&mut self, func: &str, args: &[ExprAst], span: Span) -> Result<Expr> {
        if let Some(f) = Func::from_name(func) {
            let [arg] = args else { return Err(at(span, format!("`{func}` takes one argument"))) };
            return Ok(Expr::func(f, self.lower(arg)?));
        }
        if func == "sqrt" {
            let [arg] = args else { return Err(at(span, "`sqrt` takes one argument")) };
            return Ok(Expr::sqrt(self.lower(arg)?));
        }
        if func == "d" {
            if args.len() < 2 {
                return Err(at(span, "`d` takes an expression and at least one coordinate"));
            }
            let mut e = self.lower(&args[0])?;
            for a in &args[1..] {
                let sigma = match a {
                    ExprAst::Var { name, jet: JetSuffix::None, .. } => {
                        let n = self.resolve_name(name, a.span())?;
                        self.spec.base.iter().position(|b| *b == n)
                    }
                    _ => None,
                };
                let sigma = sigma.ok_or_else(|| {
                    Error::Parse(
                        ParseError::new(a.span().line, a.span().column, "expected a base coordinate")
                            .expecting(self.spec.base.iter().cloned()),
                    )
                })?;
                e = self.spec.total_derivative(&e, sigma)?;
            }
            return Ok(e);
        }
        let Some(id) = self.spec.symbols.lookup(func) else {
            let mut known: Vec<String> = ["sin", "cos", "exp", "ln", "sqrt", "d", "sum"].map(String::from).to_vec();
            known.extend(self.spec.symbols.iter().map(|(_, s)| s.name.clone()));
            return Err(Error::Parse(
                ParseError::new(span.line, span.column, format!("undeclared function `{func}`")).expecting(known),
            ));
        };
        let arity = self.spec.symbols.get(id).map(|s| s.arity).unwrap_or(0);
        if args.len() != arity {
            return Err(at(span, format!("`{func}` takes {arity} arguments, found {}", args.len())));
        }
        let lowered = args.iter().map(|a| self.lower(a)).collect::<Result<Vec<_>>>()?;
        Ok(Expr::sym(id, lowered))
    }
}
