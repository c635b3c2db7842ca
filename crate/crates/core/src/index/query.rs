use std::fmt;

/// Parsed search expression.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryAst {
    MatchAll,
    /// Bare word, possibly with `*`/`?` wildcards, matched against every searchable field.
    Term(String),
    /// Quoted text matched against every searchable field.
    Phrase(String),
    /// `field:pattern`; a quoted pattern is taken literally.
    FieldMatch {
        field: String,
        pattern: String,
        quoted: bool,
    },
    /// `field:[lo TO hi]` (inclusive) or `field:{lo TO hi}` (exclusive), brackets may be mixed; `*` leaves a side open.
    Range {
        field: String,
        lo: Option<String>,
        hi: Option<String>,
        lo_inclusive: bool,
        hi_inclusive: bool,
    },
    Not(Box<QueryAst>),
    And(Vec<QueryAst>),
    Or(Vec<QueryAst>),
}

impl QueryAst {
    pub fn field(field: &str, pattern: &str) -> Self {
        QueryAst::FieldMatch {
            field: field.to_string(),
            pattern: pattern.to_string(),
            quoted: false,
        }
    }

    pub fn exact(field: &str, value: &str) -> Self {
        QueryAst::FieldMatch {
            field: field.to_string(),
            pattern: value.to_string(),
            quoted: true,
        }
    }
}

/// Syntax error with a 0-based character position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at position {position}: expected {}", expected.join(" or "))]
pub struct QueryParseError {
    pub position: usize,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Quoted(String),
    Word(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    start: usize,
    end: usize,
}

fn is_special(c: char) -> bool {
    matches!(c, '(' | ')' | '[' | ']' | '{' | '}' | '"' | ':')
}

fn lex(input: &str) -> Result<Vec<Spanned>, QueryParseError> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ':' => Tok::Colon,
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(QueryParseError {
                                position: chars.len(),
                                expected: vec!["`\"`".into()],
                            })
                        }
                        Some('"') => break,
                        Some('\\') if matches!(chars.get(i + 1), Some('"') | Some('\\')) => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Quoted(s)
            }
            _ => {
                let mut s = String::new();
                while i < chars.len() && !chars[i].is_whitespace() && !is_special(chars[i]) {
                    s.push(chars[i]);
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Word(s),
                    start,
                    end: i,
                });
                continue;
            }
        };
        i += 1;
        out.push(Spanned { tok, start, end: i });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    len: usize,
}

const TERM_START: &[&str] = &["term", "`\"`", "`(`", "`NOT`"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |s| s.start)
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, QueryParseError> {
        Err(QueryParseError {
            position: self.here(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn starts_unary(&self) -> bool {
        match self.peek() {
            Some(Tok::LParen) | Some(Tok::Quoted(_)) => true,
            Some(Tok::Word(w)) => w != "OR" && w != "AND",
            _ => false,
        }
    }

    fn or(&mut self) -> Result<QueryAst, QueryParseError> {
        let mut items = vec![self.and()?];
        while self.peek_word("OR") {
            self.pos += 1;
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            QueryAst::Or(items)
        })
    }

    fn and(&mut self) -> Result<QueryAst, QueryParseError> {
        let mut items = vec![self.unary()?];
        loop {
            if self.peek_word("AND") {
                self.pos += 1;
                items.push(self.unary()?);
            } else if self.starts_unary() {
                items.push(self.unary()?);
            } else {
                break;
            }
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            QueryAst::And(items)
        })
    }

    fn unary(&mut self) -> Result<QueryAst, QueryParseError> {
        if self.peek_word("NOT") {
            self.pos += 1;
            return Ok(QueryAst::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<QueryAst, QueryParseError> {
        let Some(tok) = self.toks.get(self.pos).cloned() else {
            return self.error(TERM_START);
        };
        match tok.tok {
            Tok::LParen => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.error(&["`)`"]);
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Quoted(s) => {
                self.pos += 1;
                Ok(QueryAst::Phrase(s))
            }
            Tok::Word(w) if w != "OR" && w != "AND" => {
                self.pos += 1;
                let colon_follows = matches!(self.toks.get(self.pos), Some(s) if s.tok == Tok::Colon && s.start == tok.end);
                if colon_follows {
                    self.pos += 1;
                    return self.field_value(w);
                }
                if w == "*" {
                    return Ok(QueryAst::MatchAll);
                }
                Ok(QueryAst::Term(w))
            }
            _ => self.error(TERM_START),
        }
    }

    fn field_value(&mut self, field: String) -> Result<QueryAst, QueryParseError> {
        let Some(tok) = self.toks.get(self.pos).cloned() else {
            return self.error(&["pattern", "`\"`", "`[`", "`{`"]);
        };
        match tok.tok {
            Tok::Quoted(s) => {
                self.pos += 1;
                Ok(QueryAst::FieldMatch {
                    field,
                    pattern: s,
                    quoted: true,
                })
            }
            Tok::Word(w) => {
                self.pos += 1;
                let mut pattern = w;
                let mut end = tok.end;
                // `tags:qc:pass` keeps the inner colon as part of the value
                while let (Some(c), Some(next)) = (self.toks.get(self.pos), self.toks.get(self.pos + 1)) {
                    match (&c.tok, &next.tok) {
                        (Tok::Colon, Tok::Word(more)) if c.start == end && next.start == c.end => {
                            pattern.push(':');
                            pattern.push_str(more);
                            end = next.end;
                            self.pos += 2;
                        }
                        _ => break,
                    }
                }
                Ok(QueryAst::FieldMatch {
                    field,
                    pattern,
                    quoted: false,
                })
            }
            Tok::LBracket | Tok::LBrace => {
                let inclusive = tok.tok == Tok::LBracket;
                self.pos += 1;
                let lo = self.range_bound()?;
                if !self.peek_word("TO") {
                    return self.error(&["`TO`"]);
                }
                self.pos += 1;
                let hi = self.range_bound()?;
                let hi_inclusive = match self.peek() {
                    Some(Tok::RBracket) => true,
                    Some(Tok::RBrace) => false,
                    _ => return self.error(&["`]`", "`}`"]),
                };
                self.pos += 1;
                Ok(QueryAst::Range {
                    field,
                    lo,
                    hi,
                    lo_inclusive: inclusive,
                    hi_inclusive,
                })
            }
            _ => self.error(&["pattern", "`\"`", "`[`", "`{`"]),
        }
    }

    fn range_bound(&mut self) -> Result<Option<String>, QueryParseError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if w != "TO" => {
                self.pos += 1;
                Ok((w != "*").then_some(w))
            }
            Some(Tok::Quoted(s)) => {
                self.pos += 1;
                Ok(Some(s))
            }
            _ => self.error(&["range bound"]),
        }
    }
}

/// Parses a query; empty or blank input matches everything.
pub fn parse_query(input: &str) -> Result<QueryAst, QueryParseError> {
    let toks = lex(input)?;
    if toks.is_empty() {
        return Ok(QueryAst::MatchAll);
    }
    let mut p = Parser {
        toks,
        pos: 0,
        len: input.chars().count(),
    };
    let ast = p.or()?;
    if p.pos < p.toks.len() {
        return p.error(&["`AND`", "`OR`", "end of input"]);
    }
    Ok(ast)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || matches!(s, "AND" | "OR" | "NOT" | "TO" | "*")
        || s.chars().any(|c| c.is_whitespace() || is_special(c))
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str("\"")
}

fn write_bound(f: &mut fmt::Formatter<'_>, b: &Option<String>) -> fmt::Result {
    match b {
        None => f.write_str("*"),
        Some(s) if needs_quotes(s) => write_quoted(f, s),
        Some(s) => f.write_str(s),
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &QueryAst) -> fmt::Result {
    match child {
        QueryAst::And(_) | QueryAst::Or(_) => write!(f, "({child})"),
        _ => write!(f, "{child}"),
    }
}

/// Prints query syntax that parses back to the same tree.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryAst::MatchAll => f.write_str("*"),
            QueryAst::Term(t) => f.write_str(t),
            QueryAst::Phrase(p) => write_quoted(f, p),
            QueryAst::FieldMatch {
                field,
                pattern,
                quoted,
            } => {
                write!(f, "{field}:")?;
                if *quoted {
                    write_quoted(f, pattern)
                } else {
                    f.write_str(pattern)
                }
            }
            QueryAst::Range {
                field,
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            } => {
                write!(f, "{field}:{}", if *lo_inclusive { "[" } else { "{" })?;
                write_bound(f, lo)?;
                f.write_str(" TO ")?;
                write_bound(f, hi)?;
                f.write_str(if *hi_inclusive { "]" } else { "}" })
            }
            QueryAst::Not(inner) => {
                f.write_str("NOT ")?;
                write_child(f, inner)
            }
            QueryAst::And(items) | QueryAst::Or(items) => {
                let sep = if matches!(self, QueryAst::And(_)) { " AND " } else { " OR " };
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    match (self, item) {
                        (QueryAst::Or(_), QueryAst::And(_)) => write!(f, "{item}")?,
                        _ => write_child(f, item)?,
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn term(s: &str) -> QueryAst {
        QueryAst::Term(s.into())
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(
            parse_query("lung AND Modality:CT").unwrap(),
            QueryAst::And(vec![term("lung"), QueryAst::field("Modality", "CT")])
        );
        assert_eq!(
            parse_query("PatientName:Mu?ler*").unwrap(),
            QueryAst::field("PatientName", "Mu?ler*")
        );
        assert_eq!(parse_query("").unwrap(), QueryAst::MatchAll);
        assert_eq!(parse_query("   ").unwrap(), QueryAst::MatchAll);
        assert_eq!(parse_query("a b").unwrap(), QueryAst::And(vec![term("a"), term("b")]));
        assert_eq!(
            parse_query("a b OR c").unwrap(),
            QueryAst::Or(vec![QueryAst::And(vec![term("a"), term("b")]), term("c")])
        );
        assert_eq!(
            parse_query("NOT tags:qc:fail").unwrap(),
            QueryAst::Not(Box::new(QueryAst::field("tags", "qc:fail")))
        );
        assert_eq!(
            parse_query("anatomical_structures:\"lower lung lobe\"").unwrap(),
            QueryAst::exact("anatomical_structures", "lower lung lobe")
        );
        assert_eq!(
            parse_query("SliceThickness:{1 TO *}").unwrap(),
            QueryAst::Range {
                field: "SliceThickness".into(),
                lo: Some("1".into()),
                hi: None,
                lo_inclusive: false,
                hi_inclusive: false,
            }
        );
    }

    #[test]
    fn error_positions() {
        let e = parse_query("(a OR b").unwrap_err();
        assert_eq!(e.position, 7);
        assert_eq!(e.expected, vec!["`)`"]);
        assert_eq!(parse_query("(a OR").unwrap_err().position, 5);
        assert_eq!(parse_query("a )").unwrap_err().position, 2);
        assert_eq!(parse_query("x:[1 2]").unwrap_err().position, 5);
        assert_eq!(parse_query("\"open").unwrap_err().position, 5);
        assert_eq!(parse_query("AND a").unwrap_err().position, 0);
    }

    #[test]
    fn printer_quotes_when_needed() {
        let q = QueryAst::And(vec![
            QueryAst::Phrase("say \"hi\"".into()),
            QueryAst::exact("tags", "a b"),
            QueryAst::Or(vec![term("x"), QueryAst::Not(Box::new(term("y")))]),
        ]);
        let text = q.to_string();
        assert_eq!(text, r#""say \"hi\"" AND tags:"a b" AND (x OR NOT y)"#);
        assert_eq!(parse_query(&text).unwrap(), q);
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z0-9*?][a-z0-9*?.-]{0,6}".prop_filter("reserved", |w| w != "*")
    }

    fn ast() -> impl Strategy<Value = QueryAst> {
        let leaf = prop_oneof![
            word().prop_map(QueryAst::Term),
            "[ a-zA-Z\"\\\\]{0,8}".prop_map(QueryAst::Phrase),
            ("[A-Za-z_]{1,8}", word()).prop_map(|(f, p)| QueryAst::field(&f, &p)),
            ("[A-Za-z_]{1,8}", "[ a-z:]{0,6}").prop_map(|(f, p)| QueryAst::exact(&f, &p)),
            (
                "[A-Za-z]{1,8}",
                proptest::option::of("[0-9a-z -]{0,5}"),
                proptest::option::of("[0-9]{1,4}"),
                any::<bool>()
            )
                .prop_map(|(f, lo, hi, inc)| QueryAst::Range {
                    field: f,
                    lo,
                    hi,
                    lo_inclusive: inc,
                    hi_inclusive: inc,
                }),
            Just(QueryAst::MatchAll),
        ];
        leaf.prop_recursive(4, 24, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| QueryAst::Not(Box::new(a))),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(QueryAst::And),
                proptest::collection::vec(inner, 2..4).prop_map(QueryAst::Or),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_a_fixed_point(q in ast()) {
            let once = parse_query(&q.to_string()).unwrap();
            let twice = parse_query(&once.to_string()).unwrap();
            prop_assert_eq!(&once, &twice);
        }
    }
}
