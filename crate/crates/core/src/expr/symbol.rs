use super::{Atom, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

/// A named function symbol with optional derivative rules.
///
/// When `rules` is `None` the symbol is opaque: differentiating it in slot k
/// produces the formal derivative `name^(k)(args)`. When `rules` is present,
/// `rules[k]` is a template in the slot placeholders `#0..#arity-1`, and a
/// missing rule for a slot that actually varies is an error.
#[derive(Clone, Debug, PartialEq)]
pub struct DefinedSymbol {
    pub name: String,
    pub arity: usize,
    pub rules: Option<Vec<Option<Expr>>>,
}

impl DefinedSymbol {
    pub fn opaque(name: impl Into<String>, arity: usize) -> Self {
        Self { name: name.into(), arity, rules: None }
    }

    pub fn with_rules(name: impl Into<String>, rules: Vec<Option<Expr>>) -> Self {
        Self { name: name.into(), arity: rules.len(), rules: Some(rules) }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolTable {
    symbols: Vec<DefinedSymbol>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, sym: DefinedSymbol) -> SymbolId {
        if let Some(id) = self.lookup(&sym.name) {
            self.symbols[id.0 as usize] = sym;
            return id;
        }
        self.symbols.push(sym);
        SymbolId(self.symbols.len() as u32 - 1)
    }

    /// Replaces the rule set of an already declared symbol. Rules may refer to
    /// symbols declared after the symbol itself, so tables are usually built
    /// by declaring names first and attaching rules second.
    pub fn set_rules(&mut self, id: SymbolId, rules: Vec<Option<Expr>>) {
        let s = &mut self.symbols[id.0 as usize];
        s.arity = rules.len();
        s.rules = Some(rules);
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|s| s.name == name).map(|i| SymbolId(i as u32))
    }

    pub fn get(&self, id: SymbolId) -> Option<&DefinedSymbol> {
        self.symbols.get(id.0 as usize)
    }

    pub fn name(&self, id: SymbolId) -> String {
        self.get(id).map(|s| s.name.clone()).unwrap_or_else(|| format!("sym{}", id.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &DefinedSymbol)> {
        self.symbols.iter().enumerate().map(|(i, s)| (SymbolId(i as u32), s))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Checks that every rule template only mentions declared symbols and
    /// valid slots.
    pub fn validate(&self) -> Result<(), String> {
        for s in &self.symbols {
            let Some(rules) = &s.rules else { continue };
            for r in rules.iter().flatten() {
                let mut bad = None;
                r.visit_atoms(&mut |a| match a {
                    Atom::Sym(app) if self.get(app.id).is_none() => {
                        bad = Some(format!("rule of `{}` uses an undeclared symbol", s.name))
                    }
                    Atom::Slot(k) if *k as usize >= s.arity => {
                        bad = Some(format!("rule of `{}` uses slot #{k} beyond arity {}", s.name, s.arity))
                    }
                    _ => {}
                });
                if let Some(b) = bad {
                    return Err(b);
                }
            }
        }
        Ok(())
    }
}
