use crate::ast::SourceSpan;
use crate::error::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase-initial identifier: predicate name or symbolic constant.
    Ident(String),
    /// Uppercase-initial variable.
    Var(String),
    /// `_`
    Anon,
    Int(i64),
    /// Double-quoted string constant, escapes resolved.
    Str(String),
    /// `#count`, `#maxint`, ...
    Hash(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    If,
    Query,
    Pipe,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Star,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Splits program text into tokens. `%` starts a comment running to the end
/// of the line.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = SourceSpan::new(line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let simple = match two.as_str() {
            ":-" => Some((Tok::If, 2)),
            "!=" | "<>" => Some((Tok::Ne, 2)),
            "<=" => Some((Tok::Le, 2)),
            ">=" => Some((Tok::Ge, 2)),
            "==" => Some((Tok::Eq, 2)),
            _ => match c {
                '(' => Some((Tok::LParen, 1)),
                ')' => Some((Tok::RParen, 1)),
                '{' => Some((Tok::LBrace, 1)),
                '}' => Some((Tok::RBrace, 1)),
                ',' => Some((Tok::Comma, 1)),
                '.' => Some((Tok::Dot, 1)),
                ':' => Some((Tok::Colon, 1)),
                '?' => Some((Tok::Query, 1)),
                '|' => Some((Tok::Pipe, 1)),
                '=' => Some((Tok::Eq, 1)),
                '<' => Some((Tok::Lt, 1)),
                '>' => Some((Tok::Gt, 1)),
                '+' => Some((Tok::Plus, 1)),
                '*' => Some((Tok::Star, 1)),
                _ => None,
            },
        };
        if let Some((tok, n)) = simple {
            for _ in 0..n {
                bump!();
            }
            out.push(Token { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                return Err(Diagnostic::at(
                    span,
                    "numeric constants must be plain integers (no decimal or thousands separator)",
                ));
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| Diagnostic::at(span, format!("integer constant `{digits}` out of range")))?;
            out.push(Token {
                tok: Tok::Int(value),
                span,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(Diagnostic::at(span, "unterminated string constant"));
                }
                let ch = chars[i];
                if ch == '"' {
                    bump!();
                    break;
                }
                if ch == '\\' && i + 1 < chars.len() {
                    bump!();
                    s.push(chars[i]);
                    bump!();
                    continue;
                }
                s.push(ch);
                bump!();
            }
            out.push(Token { tok: Tok::Str(s), span });
            continue;
        }
        if c == '#' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            if word.is_empty() {
                return Err(Diagnostic::at(span, "expected a name after `#`"));
            }
            out.push(Token {
                tok: Tok::Hash(word.to_ascii_lowercase()),
                span,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if word == "_" {
                Tok::Anon
            } else if c == '_' {
                return Err(Diagnostic::at(
                    span,
                    format!("`{word}`: variables must start with an uppercase letter"),
                ));
            } else if c.is_uppercase() {
                Tok::Var(word)
            } else {
                Tok::Ident(word)
            };
            out.push(Token { tok, span });
            continue;
        }
        return Err(Diagnostic::at(span, format!("unexpected character `{c}`")));
    }
    Ok(out)
}
