//! Syntax tree of problem files. Source positions are carried for
//! diagnostics but never take part in equality, so a file and its
//! pretty-printed form compare equal.

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// One piece of a variable name: literal text or a `{index}` placeholder
/// filled in by an enclosing `sum`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NamePart {
    Lit(String),
    Index(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JetSuffix {
    None,
    /// `u_x`, `u_{tx}`: base-coordinate names, one per derivative.
    Letters(String),
    /// `u[2,1]`: derivative counts per base direction.
    Counts(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprAst {
    Number {
        text: String,
        span: Span,
    },
    Var {
        name: Vec<NamePart>,
        jet: JetSuffix,
        span: Span,
    },
    Call {
        func: String,
        args: Vec<ExprAst>,
        span: Span,
    },
    /// `sum(index, lo..hi, body)` with inclusive bounds.
    Sum {
        index: String,
        lo: i64,
        hi: i64,
        body: Box<ExprAst>,
        span: Span,
    },
    Neg {
        arg: Box<ExprAst>,
        span: Span,
    },
    Binary {
        op: BinOp,
        lhs: Box<ExprAst>,
        rhs: Box<ExprAst>,
        span: Span,
    },
}

impl ExprAst {
    pub fn span(&self) -> Span {
        match self {
            ExprAst::Number { span, .. }
            | ExprAst::Var { span, .. }
            | ExprAst::Call { span, .. }
            | ExprAst::Sum { span, .. }
            | ExprAst::Neg { span, .. }
            | ExprAst::Binary { span, .. } => *span,
        }
    }
}

/// `name = value` inside a section.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub values: Vec<ExprAst>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Range {
    pub lo: ExprAst,
    pub hi: ExprAst,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleDecl {
    pub base: Vec<String>,
    pub fields: Vec<String>,
    pub params: Vec<String>,
    pub order: usize,
    pub cap: Option<usize>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolDecl {
    pub name: String,
    pub params: Vec<String>,
    /// `(parameter, derivative template)`; empty for opaque symbols.
    pub rules: Vec<(String, ExprAst)>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketAst {
    Abelian,
    Natural,
    Unchecked,
}

impl BracketAst {
    pub fn keyword(self) -> &'static str {
        match self {
            BracketAst::Abelian => "abelian",
            BracketAst::Natural => "natural",
            BracketAst::Unchecked => "unchecked",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftDecl {
    pub name: String,
    pub xi: Option<Vec<ExprAst>>,
    pub bracket: Option<BracketAst>,
    /// Field components `Ξ^i`, by field name.
    pub components: Vec<Assignment>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationDecl {
    pub name: String,
    pub components: Vec<Assignment>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundDecl {
    pub components: Vec<Assignment>,
    /// Field whose diagonal block of the Jacobi operator is integrated.
    pub jacobi: Option<(String, Span)>,
    pub interval: Option<Range>,
    pub initial: Option<Vec<ExprAst>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleDecl {
    pub components: Vec<Assignment>,
    pub domain: Vec<Range>,
    pub nodes: usize,
    pub accuracy: Option<usize>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Section {
    Bundle(BundleDecl),
    Symbols(Vec<SymbolDecl>),
    Lagrangian(ExprAst),
    Lift(LiftDecl),
    Variation(VariationDecl),
    Background(BackgroundDecl),
    Oracle(OracleDecl),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemAst {
    pub sections: Vec<Section>,
}
