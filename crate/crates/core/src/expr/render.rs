use num_traits::{One, Signed};
use serde_json::{json, Value};

use super::{exponent_is_half, Atom, Coeff, Exponent, Expr, Family, JetVar, SymbolTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderStyle {
    Plain,
    Latex,
}

/// Display names for coordinates, fields, parameters and symbols.
#[derive(Clone, Debug, Default)]
pub struct Names {
    pub base: Vec<String>,
    pub fields: Vec<String>,
    pub params: Vec<String>,
    pub symbols: Vec<String>,
}

impl Names {
    pub fn from_table(base: &[String], fields: &[String], params: &[String], syms: &SymbolTable) -> Self {
        Names {
            base: base.to_vec(),
            fields: fields.to_vec(),
            params: params.to_vec(),
            symbols: syms.iter().map(|(_, s)| s.name.clone()).collect(),
        }
    }

    pub fn base_name(&self, sigma: usize) -> String {
        self.base.get(sigma).cloned().unwrap_or_else(|| format!("x{}", sigma + 1))
    }

    pub fn family_name(&self, family: Family, index: usize) -> String {
        match family {
            Family::Field => self.fields.get(index).cloned().unwrap_or_else(|| format!("y{}", index + 1)),
            Family::Param => self.params.get(index).cloned().unwrap_or_else(|| format!("eps{}", index + 1)),
        }
    }

    fn symbol_name(&self, id: u32) -> String {
        self.symbols.get(id as usize).cloned().unwrap_or_else(|| format!("sym{id}"))
    }

    fn short_base(&self, n: usize) -> bool {
        (0..n).all(|s| self.base_name(s).chars().count() == 1)
    }

    /// Plain-text jet name: `u`, `u_x`, `u_{tx}` or `u[1,1]`.
    pub fn jet_name(&self, v: &JetVar) -> String {
        let name = self.family_name(v.family, v.index as usize);
        let alpha = &v.alpha;
        if alpha.order() == 0 {
            return name;
        }
        if self.short_base(alpha.dim()) {
            let suffix: String =
                (0..alpha.dim()).flat_map(|s| std::iter::repeat_n(self.base_name(s), alpha.get(s) as usize)).collect();
            if suffix.chars().count() == 1 {
                format!("{name}_{suffix}")
            } else {
                format!("{name}_{{{suffix}}}")
            }
        } else {
            let idx: Vec<String> = alpha.as_slice().iter().map(|a| a.to_string()).collect();
            format!("{name}[{}]", idx.join(","))
        }
    }
}

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu", "nu", "xi",
    "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega",
];

fn latex_name(name: &str) -> String {
    let (stem, digits) = match name.find(|c: char| c.is_ascii_digit()) {
        Some(i) => (&name[..i], &name[i..]),
        None => (name, ""),
    };
    let stem = if stem == "eps" { "varepsilon" } else { stem };
    let head = if GREEK.contains(&stem) {
        format!("\\{stem}")
    } else if stem.chars().count() > 1 {
        format!("\\mathrm{{{}}}", stem.replace('_', "\\_"))
    } else {
        stem.to_string()
    };
    if digits.is_empty() {
        head
    } else {
        format!("{head}_{{{digits}}}")
    }
}

fn coeff_plain(c: &Coeff) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn coeff_latex(c: &Coeff) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", c.numer(), c.denom())
    }
}

fn exponent_plain(e: &Exponent) -> String {
    if e.is_integer() && e.is_positive() {
        e.to_integer().to_string()
    } else if e.is_integer() {
        format!("({})", e.to_integer())
    } else {
        format!("({}/{})", e.numer(), e.denom())
    }
}

fn exponent_latex(e: &Exponent) -> String {
    if e.is_integer() {
        format!("{{{}}}", e.to_integer())
    } else {
        format!("{{{}/{}}}", e.numer(), e.denom())
    }
}

impl Expr {
    pub fn render(&self, names: &Names, style: RenderStyle) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, t) in self.terms().iter().enumerate() {
            let neg = t.coeff.is_negative();
            let mag = t.coeff.abs();
            match (i, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let factors: Vec<String> =
                t.mono.factors().iter().map(|(a, e)| render_factor(a, e, names, style)).collect();
            let coeff = match style {
                RenderStyle::Plain => coeff_plain(&mag),
                RenderStyle::Latex => coeff_latex(&mag),
            };
            let sep = match style {
                RenderStyle::Plain => "*",
                RenderStyle::Latex => " ",
            };
            if factors.is_empty() {
                out.push_str(&coeff);
            } else if mag.is_one() {
                out.push_str(&factors.join(sep));
            } else {
                out.push_str(&coeff);
                out.push_str(sep);
                out.push_str(&factors.join(sep));
            }
        }
        out
    }

    /// JSON tree of the expression (`op`-tagged nodes).
    pub fn to_json(&self, names: &Names) -> Value {
        let terms: Vec<Value> = self
            .terms()
            .iter()
            .map(|t| {
                let factors: Vec<Value> = t
                    .mono
                    .factors()
                    .iter()
                    .map(|(a, e)| {
                        let base = atom_json(a, names);
                        if e.is_one() {
                            base
                        } else {
                            json!({"op": "pow", "base": base, "exp": format!("{}", e)})
                        }
                    })
                    .collect();
                let coeff = json!({"op": "num", "value": coeff_plain(&t.coeff)});
                if factors.is_empty() {
                    coeff
                } else {
                    let mut args = Vec::new();
                    if !t.coeff.is_one() {
                        args.push(coeff);
                    }
                    args.extend(factors);
                    if args.len() == 1 {
                        args.pop().unwrap()
                    } else {
                        json!({"op": "mul", "args": args})
                    }
                }
            })
            .collect();
        match terms.len() {
            0 => json!({"op": "num", "value": "0"}),
            1 => terms.into_iter().next().unwrap(),
            _ => json!({"op": "add", "args": terms}),
        }
    }
}

fn atom_json(a: &Atom, names: &Names) -> Value {
    match a {
        Atom::Pi => json!({"op": "const", "name": "pi"}),
        Atom::Coord(s) => json!({"op": "coord", "index": s, "name": names.base_name(*s as usize)}),
        Atom::Jet(v) => json!({
            "op": "jet",
            "family": match v.family { Family::Field => "field", Family::Param => "param" },
            "index": v.index,
            "name": names.family_name(v.family, v.index as usize),
            "multi": v.alpha.as_slice(),
        }),
        Atom::Slot(k) => json!({"op": "slot", "index": k}),
        Atom::Func(f, arg) => json!({"op": "fn", "name": f.name(), "arg": arg.to_json(names)}),
        Atom::Sym(app) => json!({
            "op": "sym",
            "name": names.symbol_name(app.id.0),
            "derivs": app.derivs,
            "args": app.args.iter().map(|x| x.to_json(names)).collect::<Vec<_>>(),
        }),
        Atom::Group(b) => json!({"op": "group", "base": b.to_json(names)}),
    }
}

fn render_factor(a: &Atom, e: &Exponent, names: &Names, style: RenderStyle) -> String {
    if exponent_is_half(e) {
        let inner = match a {
            Atom::Group(b) => b.render(names, style),
            other => render_atom(other, names, style),
        };
        return match style {
            RenderStyle::Plain => format!("sqrt({inner})"),
            RenderStyle::Latex => format!("\\sqrt{{{inner}}}"),
        };
    }
    let base = render_atom(a, names, style);
    if e.is_one() {
        return base;
    }
    let base = match (style, a) {
        (RenderStyle::Latex, Atom::Jet(v)) if v.alpha.order() > 0 => format!("\\left({base}\\right)"),
        _ => base,
    };
    match style {
        RenderStyle::Plain => format!("{base}^{}", exponent_plain(e)),
        RenderStyle::Latex => format!("{base}^{}", exponent_latex(e)),
    }
}

fn render_atom(a: &Atom, names: &Names, style: RenderStyle) -> String {
    match style {
        RenderStyle::Plain => match a {
            Atom::Pi => "pi".into(),
            Atom::Coord(s) => names.base_name(*s as usize),
            Atom::Jet(v) => names.jet_name(v),
            Atom::Slot(k) => format!("#{k}"),
            Atom::Func(f, arg) => format!("{}({})", f.name(), arg.render(names, style)),
            Atom::Sym(app) => {
                let args: Vec<String> = app.args.iter().map(|x| x.render(names, style)).collect();
                let name = names.symbol_name(app.id.0);
                if app.derivs.iter().all(|d| *d == 0) {
                    format!("{name}({})", args.join(", "))
                } else {
                    let d: Vec<String> = app.derivs.iter().map(|d| d.to_string()).collect();
                    format!("{name}'[{}]({})", d.join(","), args.join(", "))
                }
            }
            Atom::Group(b) => format!("({})", b.render(names, style)),
        },
        RenderStyle::Latex => match a {
            Atom::Pi => "\\pi".into(),
            Atom::Coord(s) => latex_name(&names.base_name(*s as usize)),
            Atom::Jet(v) => {
                let name = latex_name(&names.family_name(v.family, v.index as usize));
                let mut parts = String::new();
                for s in 0..v.alpha.dim() {
                    match v.alpha.get(s) {
                        0 => {}
                        1 => parts.push_str(&format!("\\partial_{{{}}}", latex_name(&names.base_name(s)))),
                        k => parts.push_str(&format!("\\partial_{{{}}}^{{{k}}}", latex_name(&names.base_name(s)))),
                    }
                }
                if parts.is_empty() {
                    name
                } else {
                    format!("{parts} {name}")
                }
            }
            Atom::Slot(k) => format!("\\#_{{{k}}}"),
            Atom::Func(f, arg) => format!("\\{}\\left({}\\right)", f.name(), arg.render(names, style)),
            Atom::Sym(app) => {
                let args: Vec<String> = app.args.iter().map(|x| x.render(names, style)).collect();
                let name = latex_name(&names.symbol_name(app.id.0));
                let total: u16 = app.derivs.iter().sum();
                let head = if total == 0 {
                    name
                } else {
                    let d: Vec<String> = app.derivs.iter().map(|d| d.to_string()).collect();
                    format!("{name}^{{({})}}", d.join(","))
                };
                format!("{head}\\left({}\\right)", args.join(", "))
            }
            Atom::Group(b) => format!("\\left({}\\right)", b.render(names, style)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::MultiIndex;

    fn names() -> Names {
        Names { base: vec!["t".into(), "x".into()], fields: vec!["u".into()], ..Default::default() }
    }

    #[test]
    fn plain_jets() {
        let n = names();
        let e = Expr::field(0, MultiIndex::from_slice(&[1, 1])) - Expr::field(0, MultiIndex::from_slice(&[0, 2]));
        assert_eq!(e.render(&n, RenderStyle::Plain), "-u_{xx} + u_{tx}");
        let e = Expr::field(0, MultiIndex::from_slice(&[1, 0])).powi(2).scale(&Coeff::new(1.into(), 2.into()));
        assert_eq!(e.render(&n, RenderStyle::Plain), "1/2*u_t^2");
    }

    #[test]
    fn latex_jets() {
        let n = names();
        let e = Expr::field(0, MultiIndex::from_slice(&[2, 0])).scale_int(3);
        assert_eq!(e.render(&n, RenderStyle::Latex), "3 \\partial_{t}^{2} u");
    }
}
