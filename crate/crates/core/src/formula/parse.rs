//! Recursive-descent parser for the query syntax.
//!
//! ```text
//! expr  := or
//! or    := and (("|" | "|ME" | "|CI") and)*
//! and   := unary ("&" unary)*
//! unary := "~" unary | "(" expr ")" | atom | "true" | "false"
//! atom  := [A-Za-z_][A-Za-z0-9_.]*
//! ```

use super::{AtomRegistry, Formula, OrKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or(OrKind),
    LParen,
    RParen,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'~' => {
                toks.push((Tok::Not, start));
                i += 1;
            }
            b'&' => {
                toks.push((Tok::And, start));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            b'|' => {
                i += 1;
                let rest = &bytes[i..];
                let suffix = |s: &[u8]| rest.starts_with(s) && rest.get(2).is_none_or(|&c| !is_ident_char(c));
                let kind = if suffix(b"ME") {
                    i += 2;
                    OrKind::Me
                } else if suffix(b"CI") {
                    i += 2;
                    OrKind::Ci
                } else {
                    OrKind::Unspecified
                };
                toks.push((Tok::Or(kind), start));
            }
            c if is_ident_start(c) => {
                while i < bytes.len() && is_ident_char(bytes[i]) {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    registry: &'a AtomRegistry,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn or(&mut self) -> Result<Formula> {
        let mut left = self.and()?;
        while let Some(Tok::Or(kind)) = self.peek() {
            let kind = *kind;
            self.pos += 1;
            let right = self.and()?;
            left = Formula::or_kind(kind, left, right);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut left = self.unary()?;
        while let Some(Tok::And) = self.peek() {
            self.pos += 1;
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.or()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.syntax("expected `)`"),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => Ok(Formula::True),
                    "false" => Ok(Formula::False),
                    _ => match self.registry.lookup(&name) {
                        Ok(id) => Ok(Formula::Atom(id)),
                        Err(candidates) if candidates.is_empty() => Err(Error::UnknownAtom { name, offset }),
                        Err(candidates) => Err(Error::AmbiguousAtom {
                            name,
                            offset,
                            candidates,
                        }),
                    },
                }
            }
            Some(_) => self.syntax("expected an atom, `~`, `(`, `true` or `false`"),
            None => self.syntax("unexpected end of input"),
        }
    }
}

/// Parses `text` against the atom names in `registry`.
pub fn parse_formula(text: &str, registry: &AtomRegistry) -> Result<Formula> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        registry,
    };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return p.syntax("trailing input");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::AtomId;

    fn cmnist() -> AtomRegistry {
        AtomRegistry::from_names([
            "digit.one",
            "digit.nine",
            "digit.d3",
            "digit.d7",
            "color.red",
            "color.blue",
        ])
        .unwrap()
    }

    fn atom(r: &AtomRegistry, n: &str) -> Formula {
        Formula::Atom(r.lookup(n).unwrap())
    }

    #[test]
    fn parses_or_of_ands() {
        let r = cmnist();
        let f = parse_formula("(red & d3) | (blue & d7)", &r).unwrap();
        let want = Formula::or(
            Formula::and(atom(&r, "red"), atom(&r, "d3")),
            Formula::and(atom(&r, "blue"), atom(&r, "d7")),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn parses_negation() {
        let r = cmnist();
        assert_eq!(parse_formula("~blue", &r).unwrap(), Formula::not(atom(&r, "blue")));
    }

    #[test]
    fn parses_worked_query() {
        let r = cmnist();
        let f = parse_formula("(one & blue) | (nine & red)", &r).unwrap();
        match f {
            Formula::Or(OrKind::Unspecified, l, rr) => {
                assert!(matches!(*l, Formula::And(..)));
                assert!(matches!(*rr, Formula::And(..)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_kind_suffixes_and_literals() {
        let r = cmnist();
        let f = parse_formula("red |ME blue |CI true | false", &r).unwrap();
        let want = Formula::or(
            Formula::or_kind(
                OrKind::Ci,
                Formula::or_kind(OrKind::Me, atom(&r, "red"), atom(&r, "blue")),
                Formula::True,
            ),
            Formula::False,
        );
        assert_eq!(f, want);
    }

    #[test]
    fn nary_desugars_left_nested() {
        let r = cmnist();
        let f = parse_formula("red & blue & one", &r).unwrap();
        assert_eq!(
            f,
            Formula::and(Formula::and(atom(&r, "red"), atom(&r, "blue")), atom(&r, "one"))
        );
    }

    #[test]
    fn full_names_resolve() {
        let r = cmnist();
        assert_eq!(parse_formula("color.red", &r).unwrap(), Formula::Atom(AtomId(4)));
    }

    #[test]
    fn errors_carry_offsets() {
        let r = cmnist();
        assert!(matches!(parse_formula("   ", &r), Err(Error::EmptyInput)));
        assert!(matches!(
            parse_formula("red & green", &r),
            Err(Error::UnknownAtom { offset: 6, .. })
        ));
        assert!(matches!(
            parse_formula("(red & blue", &r),
            Err(Error::Syntax { offset: 11, .. })
        ));
        assert!(matches!(
            parse_formula("red blue", &r),
            Err(Error::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            parse_formula("red # blue", &r),
            Err(Error::Syntax { offset: 4, .. })
        ));
    }
}
