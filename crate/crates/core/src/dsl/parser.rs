use super::ast::*;
use super::lexer::{lex_line, Tok, Token};
use super::ParseError;

/// Names that cannot be used for coordinates, fields or parameters.
pub const RESERVED: &[&str] = &[
    "pi", "d", "sum", "sin", "cos", "exp", "ln", "sqrt", "where", "xi", "bracket", "jacobi", "interval", "initial",
    "domain", "nodes", "accuracy",
];

const FUNCTIONS: &[&str] = &["sin", "cos", "exp", "ln", "sqrt"];

pub fn is_function(name: &str) -> bool {
    FUNCTIONS.contains(&name)
}

/// Parses a problem file into its syntax tree.
pub fn parse_problem(source: &str) -> Result<ProblemAst, ParseError> {
    let mut blocks: Vec<(Vec<Token>, Vec<Vec<Token>>)> = Vec::new();
    for (k, text) in source.lines().enumerate() {
        let tokens = lex_line(text, k + 1)?;
        if tokens.is_empty() {
            continue;
        }
        if tokens[0].tok == Tok::LBracket {
            blocks.push((tokens, Vec::new()));
            continue;
        }
        match blocks.last_mut() {
            Some((_, body)) => body.push(tokens),
            None => {
                let t = &tokens[0];
                return Err(
                    ParseError::new(t.line, t.column, "content before the first section header").expecting(["`[`"])
                );
            }
        }
    }
    let mut sections = Vec::new();
    let mut seen: Vec<&'static str> = Vec::new();
    for (header, body) in blocks {
        let section = parse_section(&header, &body)?;
        let unique = match &section {
            Section::Bundle(_) => Some("bundle"),
            Section::Symbols(_) => Some("symbols"),
            Section::Lagrangian(_) => Some("lagrangian"),
            Section::Background(_) => Some("background"),
            Section::Oracle(_) => Some("oracle"),
            Section::Lift(_) | Section::Variation(_) => None,
        };
        if let Some(kind) = unique {
            if seen.contains(&kind) {
                return Err(ParseError::new(header[0].line, header[0].column, format!("duplicate `[{kind}]` section")));
            }
            seen.push(kind);
        }
        sections.push(section);
    }
    Ok(ProblemAst { sections })
}

/// Parses a single expression (used by tests and tools).
pub fn parse_expr(text: &str) -> Result<ExprAst, ParseError> {
    let tokens = lex_line(text, 1)?;
    let mut c = Cursor::new(&tokens);
    let e = c.expr()?;
    c.finish(&["operator"])?;
    Ok(e)
}

fn span_of(t: &Token) -> Span {
    Span { line: t.line, column: t.column }
}

fn parse_section(header: &[Token], body: &[Vec<Token>]) -> Result<Section, ParseError> {
    let mut c = Cursor::new(header);
    c.expect(Tok::LBracket)?;
    let (kind, kind_span) = c.ident()?;
    let name = if matches!(c.peek(), Some(Tok::Ident(_))) { Some(c.ident()?.0) } else { None };
    c.expect(Tok::RBracket)?;
    c.finish(&["end of line"])?;
    let span = span_of(&header[0]);
    let named = |what: &str| {
        name.clone().ok_or_else(|| {
            ParseError::new(kind_span.line, kind_span.column, format!("`[{what}]` needs a name"))
                .expecting(["identifier"])
        })
    };
    let unnamed = |what: &str| match &name {
        Some(n) => {
            Err(ParseError::new(kind_span.line, kind_span.column, format!("`[{what}]` takes no name, found `{n}`"))
                .expecting(["`]`"]))
        }
        None => Ok(()),
    };
    match kind.as_str() {
        "bundle" => {
            unnamed("bundle")?;
            parse_bundle(body, span).map(Section::Bundle)
        }
        "symbols" => {
            unnamed("symbols")?;
            body.iter().map(|line| parse_symbol(line)).collect::<Result<_, _>>().map(Section::Symbols)
        }
        "lagrangian" => {
            unnamed("lagrangian")?;
            let tokens: Vec<Token> = body.iter().flatten().cloned().collect();
            if tokens.is_empty() {
                return Err(
                    ParseError::new(span.line, span.column, "empty `[lagrangian]` section").expecting(["expression"])
                );
            }
            let mut c = Cursor::new(&tokens);
            let e = c.expr()?;
            c.finish(&["operator"])?;
            Ok(Section::Lagrangian(e))
        }
        "lift" => {
            let name = named("lift")?;
            let mut decl = LiftDecl { name, xi: None, bracket: None, components: Vec::new(), span };
            for line in body {
                let mut c = Cursor::new(line);
                let (key, key_span) = c.ident()?;
                c.expect(Tok::Equals)?;
                match key.as_str() {
                    "xi" => decl.xi = Some(c.expr_list()?),
                    "bracket" => {
                        let (kw, at) = c.ident()?;
                        decl.bracket = Some(match kw.as_str() {
                            "abelian" => BracketAst::Abelian,
                            "natural" => BracketAst::Natural,
                            "unchecked" => BracketAst::Unchecked,
                            _ => {
                                return Err(ParseError::new(at.line, at.column, format!("unknown bracket kind `{kw}`"))
                                    .expecting(["abelian", "natural", "unchecked"]))
                            }
                        });
                    }
                    _ => decl.components.push(Assignment { key, values: vec![c.expr()?], span: key_span }),
                }
                c.finish(&["`,`", "end of line"])?;
            }
            Ok(Section::Lift(decl))
        }
        "variation" => {
            let name = named("variation")?;
            let mut components = Vec::new();
            for line in body {
                components.push(simple_assignment(line)?);
            }
            Ok(Section::Variation(VariationDecl { name, components, span }))
        }
        "background" => {
            unnamed("background")?;
            let mut decl = BackgroundDecl { components: Vec::new(), jacobi: None, interval: None, initial: None, span };
            for line in body {
                let mut c = Cursor::new(line);
                let (key, key_span) = c.ident()?;
                c.expect(Tok::Equals)?;
                match key.as_str() {
                    "jacobi" => decl.jacobi = Some(c.ident()?),
                    "interval" => decl.interval = Some(c.range()?),
                    "initial" => decl.initial = Some(c.expr_list()?),
                    _ => decl.components.push(Assignment { key, values: vec![c.expr()?], span: key_span }),
                }
                c.finish(&["end of line"])?;
            }
            Ok(Section::Background(decl))
        }
        "oracle" => {
            unnamed("oracle")?;
            let mut decl = OracleDecl { components: Vec::new(), domain: Vec::new(), nodes: 0, accuracy: None, span };
            for line in body {
                let mut c = Cursor::new(line);
                let (key, key_span) = c.ident()?;
                c.expect(Tok::Equals)?;
                match key.as_str() {
                    "domain" => {
                        decl.domain.push(c.range()?);
                        while c.eat(&Tok::Comma) {
                            decl.domain.push(c.range()?);
                        }
                    }
                    "nodes" => decl.nodes = c.integer()? as usize,
                    "accuracy" => decl.accuracy = Some(c.integer()? as usize),
                    _ => decl.components.push(Assignment { key, values: vec![c.expr()?], span: key_span }),
                }
                c.finish(&["end of line"])?;
            }
            if decl.nodes == 0 {
                return Err(ParseError::new(span.line, span.column, "`[oracle]` needs `nodes = N` with N > 0"));
            }
            Ok(Section::Oracle(decl))
        }
        _ => Err(ParseError::new(kind_span.line, kind_span.column, format!("unknown section `{kind}`")).expecting([
            "background",
            "bundle",
            "lagrangian",
            "lift",
            "oracle",
            "symbols",
            "variation",
        ])),
    }
}

fn simple_assignment(line: &[Token]) -> Result<Assignment, ParseError> {
    let mut c = Cursor::new(line);
    let (key, span) = c.ident()?;
    c.expect(Tok::Equals)?;
    let values = vec![c.expr()?];
    c.finish(&["operator", "end of line"])?;
    Ok(Assignment { key, values, span })
}

fn parse_bundle(body: &[Vec<Token>], span: Span) -> Result<BundleDecl, ParseError> {
    let mut decl = BundleDecl { base: Vec::new(), fields: Vec::new(), params: Vec::new(), order: 0, cap: None, span };
    for line in body {
        let mut c = Cursor::new(line);
        let (key, at) = c.ident()?;
        c.expect(Tok::Equals)?;
        match key.as_str() {
            "base" => decl.base = c.name_list()?,
            "fields" => decl.fields = c.name_list()?,
            "params" => decl.params = c.name_list()?,
            "order" => decl.order = c.integer()? as usize,
            "cap" => decl.cap = Some(c.integer()? as usize),
            _ => {
                return Err(ParseError::new(at.line, at.column, format!("unknown bundle key `{key}`"))
                    .expecting(["base", "cap", "fields", "order", "params"]))
            }
        }
        c.finish(&["`,`", "end of line"])?;
    }
    if decl.base.is_empty() || decl.fields.is_empty() || decl.order == 0 {
        return Err(ParseError::new(span.line, span.column, "`[bundle]` needs `base`, `fields` and `order >= 1`"));
    }
    Ok(decl)
}

fn parse_symbol(line: &[Token]) -> Result<SymbolDecl, ParseError> {
    let mut c = Cursor::new(line);
    let (name, span) = c.ident()?;
    c.expect(Tok::LParen)?;
    let mut params = vec![c.ident()?.0];
    while c.eat(&Tok::Comma) {
        params.push(c.ident()?.0);
    }
    c.expect(Tok::RParen)?;
    let mut rules = Vec::new();
    if c.peek() == Some(&Tok::Ident("where".into())) {
        c.next();
        loop {
            let (d, at) = c.ident()?;
            if d != "d" {
                return Err(
                    ParseError::new(at.line, at.column, format!("expected `d/d<param>`, found `{d}`")).expecting(["d"])
                );
            }
            c.expect(Tok::Slash)?;
            let (dp, at) = c.ident()?;
            let param = dp.strip_prefix('d').filter(|p| params.iter().any(|q| q == p)).ok_or_else(|| {
                ParseError::new(at.line, at.column, format!("`{dp}` does not name a parameter of `{name}`"))
                    .expecting(params.iter().map(|p| format!("d{p}")))
            })?;
            let param = param.to_string();
            c.expect(Tok::Equals)?;
            rules.push((param, c.expr()?));
            if !c.eat(&Tok::Semicolon) {
                break;
            }
        }
    }
    c.finish(&["`;`", "`where`", "end of line"])?;
    Ok(SymbolDecl { name, params, rules, span })
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Self { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Position of the current token, or just past the last one.
    fn here(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => span_of(t),
            None => match self.tokens.last() {
                Some(t) => Span { line: t.line, column: t.column + token_width(&t.tok) },
                None => Span { line: 1, column: 1 },
            },
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let at = self.here();
        let found = match self.tokens.get(self.pos) {
            Some(t) => t.tok.describe(),
            None => "end of line".to_string(),
        };
        ParseError::new(at.line, at.column, format!("unexpected {found}")).expecting(expected.iter().copied())
    }

    fn finish(&self, expected: &[&str]) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            Err(self.error(expected))
        } else {
            Ok(())
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        let at = self.here();
        if self.eat(&tok) {
            Ok(at)
        } else {
            let want = format!("`{}`", tok.symbol());
            Err(self.error(&[want.as_str()]))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        let at = self.here();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, at))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let at = self.here();
        match self.peek() {
            Some(Tok::Number(s)) if !s.contains('.') => {
                let v: i64 = s.parse().map_err(|_| ParseError::new(at.line, at.column, "integer out of range"))?;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        loop {
            let (name, at) = self.ident()?;
            if RESERVED.contains(&name.as_str()) {
                return Err(ParseError::new(at.line, at.column, format!("`{name}` is a reserved word")));
            }
            out.push(name);
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn expr_list(&mut self) -> Result<Vec<ExprAst>, ParseError> {
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn range(&mut self) -> Result<Range, ParseError> {
        let lo = self.expr()?;
        self.expect(Tok::DotDot)?;
        let hi = self.expr()?;
        Ok(Range { lo, hi })
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.here();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExprAst::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            let span = self.here();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = ExprAst::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        let span = self.here();
        if self.eat(&Tok::Minus) {
            return Ok(ExprAst::Neg { arg: Box::new(self.unary()?), span });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            let span = self.here();
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(ExprAst::Binary { op: BinOp::Pow, lhs: Box::new(base), rhs: Box::new(exp), span });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ExprAst, ParseError> {
        let span = self.here();
        match self.peek().cloned() {
            Some(Tok::Number(text)) => {
                self.pos += 1;
                Ok(ExprAst::Number { text, span })
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    if name == "sum" {
                        return self.sum_body(span);
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    if self.peek() != Some(&Tok::RParen) {
                        return Err(self.error(&["`)`", "`,`", "operator"]));
                    }
                    self.pos += 1;
                    return Ok(ExprAst::Call { func: name, args, span });
                }
                self.variable(name, span)
            }
            _ => Err(self.error(&["`(`", "`-`", "identifier", "number"])),
        }
    }

    fn sum_body(&mut self, span: Span) -> Result<ExprAst, ParseError> {
        let (index, _) = self.ident()?;
        self.expect(Tok::Comma)?;
        let lo = self.integer()?;
        self.expect(Tok::DotDot)?;
        let hi = self.integer()?;
        self.expect(Tok::Comma)?;
        let body = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(ExprAst::Sum { index, lo, hi, body: Box::new(body), span })
    }

    fn variable(&mut self, first: String, span: Span) -> Result<ExprAst, ParseError> {
        let mut name = vec![NamePart::Lit(first)];
        while self.peek() == Some(&Tok::LBrace) {
            self.pos += 1;
            let (index, _) = self.ident()?;
            self.expect(Tok::RBrace)?;
            name.push(NamePart::Index(index));
            // A literal tail glued to the placeholder, as in `g{mu}{nu}x`.
            if let (Some(prev), Some(next)) = (self.tokens.get(self.pos - 1), self.tokens.get(self.pos)) {
                if let Tok::Ident(tail) = &next.tok {
                    if next.line == prev.line && next.column == prev.column + 1 {
                        name.push(NamePart::Lit(tail.clone()));
                        self.pos += 1;
                    }
                }
            }
        }
        let jet = if self.eat(&Tok::Underscore) {
            if self.eat(&Tok::LBrace) {
                let (letters, _) = self.ident()?;
                self.expect(Tok::RBrace)?;
                JetSuffix::Letters(letters)
            } else {
                JetSuffix::Letters(self.ident()?.0)
            }
        } else if self.eat(&Tok::LBracket) {
            let mut counts = Vec::new();
            loop {
                let v = self.integer()?;
                if v < 0 {
                    let at = self.here();
                    return Err(ParseError::new(at.line, at.column, "derivative counts must be non-negative"));
                }
                counts.push(v as u32);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBracket)?;
            JetSuffix::Counts(counts)
        } else {
            JetSuffix::None
        };
        Ok(ExprAst::Var { name, jet, span })
    }
}

fn token_width(tok: &Tok) -> usize {
    match tok {
        Tok::Ident(s) | Tok::Number(s) => s.chars().count(),
        other => other.symbol().chars().count(),
    }
}
