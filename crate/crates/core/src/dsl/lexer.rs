//! Tokenizer for the pipeline language: identifiers, quoted strings, decimal
//! numbers, braces, `=`, and `#` line comments.

use super::{DslError, Span};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum TokenKind {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub(super) fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    let is_ident_start = |c: char| c.is_ascii_alphabetic() || c == '_';
    let is_ident = |c: char| c.is_ascii_alphanumeric() || c == '_';

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '{' => {
                tokens.push(Token { kind: TokenKind::LBrace, span });
                i += 1;
                col += 1;
            }
            '}' => {
                tokens.push(Token { kind: TokenKind::RBrace, span });
                i += 1;
                col += 1;
            }
            '=' => {
                tokens.push(Token { kind: TokenKind::Eq, span });
                i += 1;
                col += 1;
            }
            '"' => {
                let mut value = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(DslError::new("unterminated string", span)),
                        Some('\n') => {
                            return Err(DslError::new("string runs past end of line", span))
                        }
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some(&ch) => {
                            value.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                tokens.push(Token { kind: TokenKind::Str(value), span });
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut raw = String::new();
                if c == '-' {
                    raw.push('-');
                    i += 1;
                    col += 1;
                    if !chars.get(i).is_some_and(|ch| ch.is_ascii_digit()) {
                        return Err(DslError::new("expected digits after '-'", span));
                    }
                }
                while chars.get(i).is_some_and(|ch| ch.is_ascii_digit()) {
                    raw.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                if chars.get(i) == Some(&'.') {
                    raw.push('.');
                    i += 1;
                    col += 1;
                    if !chars.get(i).is_some_and(|ch| ch.is_ascii_digit()) {
                        return Err(DslError::new(format!("bad number '{raw}'"), span));
                    }
                    while chars.get(i).is_some_and(|ch| ch.is_ascii_digit()) {
                        raw.push(chars[i]);
                        i += 1;
                        col += 1;
                    }
                }
                let value: f64 = raw
                    .parse()
                    .map_err(|_| DslError::new(format!("bad number '{raw}'"), span))?;
                tokens.push(Token { kind: TokenKind::Num(value), span });
            }
            c if is_ident_start(c) => {
                let mut name = String::new();
                while chars.get(i).copied().is_some_and(is_ident) {
                    name.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                tokens.push(Token { kind: TokenKind::Ident(name), span });
            }
            other => {
                return Err(DslError::new(format!("unexpected character '{other}'"), span));
            }
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        lex(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn tokenizes_every_kind() {
        let toks = kinds("pipeline \"demo\" { split 0.6 k=10 -1.5 }");
        assert_eq!(
            toks,
            vec![
                TokenKind::Ident("pipeline".into()),
                TokenKind::Str("demo".into()),
                TokenKind::LBrace,
                TokenKind::Ident("split".into()),
                TokenKind::Num(0.6),
                TokenKind::Ident("k".into()),
                TokenKind::Eq,
                TokenKind::Num(10.0),
                TokenKind::Num(-1.5),
                TokenKind::RBrace,
            ]
        );
    }

    #[test]
    fn spans_are_one_based_line_and_column() {
        let toks = lex("load \"a\"\n  split").unwrap();
        assert_eq!(toks[0].span, Span { line: 1, col: 1 });
        assert_eq!(toks[1].span, Span { line: 1, col: 6 });
        assert_eq!(toks[2].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn comments_run_to_end_of_line() {
        let toks = kinds("a # everything here is ignored { } \"x\"\nb");
        assert_eq!(toks, vec![TokenKind::Ident("a".into()), TokenKind::Ident("b".into())]);
    }

    #[test]
    fn string_errors_carry_the_opening_quote_span() {
        let err = lex("  \"never closed").unwrap_err();
        assert_eq!(err.span, Span { line: 1, col: 3 });
        assert!(err.message.contains("unterminated"));
        assert!(lex("\"split\nacross\"").is_err());
    }

    #[test]
    fn malformed_numbers_are_rejected() {
        assert!(lex("1.").is_err());
        assert!(lex("-x").is_err());
        assert!(lex("0.5.3").is_err()); // second dot starts a bad number
    }

    #[test]
    fn stray_characters_are_lexical_errors() {
        let err = lex("load @").unwrap_err();
        assert!(err.message.contains('@'));
        assert_eq!(err.span, Span { line: 1, col: 6 });
    }
}
