use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Decimal literal, kept verbatim so that printing round-trips.
    Number(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Equals,
    Underscore,
    DotDot,
    Semicolon,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::Ident(_) => "identifier",
            Tok::Number(_) => "number",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Equals => "=",
            Tok::Underscore => "_",
            Tok::DotDot => "..",
            Tok::Semicolon => ";",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

/// Tokenizes one source line (1-based `line`); `#` starts a comment.
pub fn lex_line(text: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Equals),
            '_' => Some(Tok::Underscore),
            ';' => Some(Tok::Semicolon),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line, column });
            i += 1;
            continue;
        }
        if c == '.' && chars.get(i + 1) == Some(&'.') {
            out.push(Token { tok: Tok::DotDot, line, column });
            i += 2;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token { tok: Tok::Number(chars[start..i].iter().collect()), line, column });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line, column });
            continue;
        }
        return Err(ParseError::new(line, column, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_jets_ranges_and_comments() {
        let toks: Vec<Tok> =
            lex_line("u_{xt} + 0.5*u[2,1] 1..2 # note", 1).unwrap().into_iter().map(|t| t.tok).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("u".into()),
                Tok::Underscore,
                Tok::LBrace,
                Tok::Ident("xt".into()),
                Tok::RBrace,
                Tok::Plus,
                Tok::Number("0.5".into()),
                Tok::Star,
                Tok::Ident("u".into()),
                Tok::LBracket,
                Tok::Number("2".into()),
                Tok::Comma,
                Tok::Number("1".into()),
                Tok::RBracket,
                Tok::Number("1".into()),
                Tok::DotDot,
                Tok::Number("2".into()),
            ]
        );
        let err = lex_line("u $ v", 3).unwrap_err();
        assert_eq!((err.line, err.column), (3, 3));
    }
}
