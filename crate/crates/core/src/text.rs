//! The plain-text database format.
//!
//! ```text
//! % a comment
//! paper(oid1, logicProgramming).
//! rule "r1" coauthors(X, Y) :- author_paper(X, P), author_paper(Y, P).
//! [1, 1] likes(X) :- fan(X).
//! ic "IC4" [0.8, 0.8] A >= 20 :- author(N, A, C).
//! ic "IC0" :- paper(0, S).
//! ?- paper(O, S), S = logicProgramming.
//! answer(O) ?- paper(O, S), not bestseller(O).
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{AnnotatedClause, Atom, BeliefInterval, Clause, CmpOp, Const, Database, Literal, Query, Term};
use crate::validate::validate_database;

/// A parsed file: the database plus any queries it contains.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub db: Database,
    pub queries: Vec<Query>,
    pub warnings: Vec<String>,
}

impl Document {
    pub fn query(&self, name: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    If,
    Ask,
    Op(CmpOp),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Int(v) => format!("number {v}"),
            Tok::Float(v) => format!("number {v}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::If => "`:-`".into(),
            Tok::Ask => "`?-`".into(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let err = |line: usize, message: String| Error::Parse { line, message };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | '[' | ']' | ',' | '.' => {
                out.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '[' => Tok::LBrack,
                        ']' => Tok::RBrack,
                        ',' => Tok::Comma,
                        _ => Tok::Dot,
                    },
                    line,
                ));
                i += 1;
            }
            ':' | '?' => {
                if chars.get(i + 1) != Some(&'-') {
                    return Err(err(line, format!("expected `{c}-`")));
                }
                out.push((if c == ':' { Tok::If } else { Tok::Ask }, line));
                i += 2;
            }
            '<' | '>' | '=' | '!' => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let (op, len) = match two.as_str() {
                    "<=" | "=<" => (CmpOp::Le, 2),
                    ">=" => (CmpOp::Ge, 2),
                    "!=" => (CmpOp::Ne, 2),
                    _ => match c {
                        '<' => (CmpOp::Lt, 1),
                        '>' => (CmpOp::Gt, 1),
                        '=' => (CmpOp::Eq, 1),
                        _ => return Err(err(line, "expected `!=`".into())),
                    },
                };
                out.push((Tok::Op(op), line));
                i += len;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(line, "unterminated string".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                _ => return Err(err(line, "bad escape in string".into())),
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                if s.is_empty() {
                    return Err(err(line, "empty string constant".into()));
                }
                out.push((Tok::Str(s), line));
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let is_float = chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit);
                if is_float {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let tok = if is_float {
                    Tok::Float(text.parse().map_err(|_| err(line, format!("bad number {text}")))?)
                } else {
                    Tok::Int(text.parse().map_err(|_| err(line, format!("integer {text} out of range")))?)
                };
                out.push((tok, line));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push((if c.is_uppercase() || c == '_' { Tok::Var(word) } else { Tok::Ident(word) }, line));
            }
            c => return Err(err(line, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |(_, l)| *l)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line(), message: message.into() })
    }

    fn next(&mut self) -> Result<Tok> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.fail("unexpected end of input"),
        }
    }

    fn expect(&mut self, want: &Tok) -> Result<()> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let found = t.describe();
                self.fail(format!("expected {}, found {found}", want.describe()))
            }
            None => self.fail(format!("expected {}, found end of input", want.describe())),
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.next()? {
            Tok::Int(v) => Ok(v as f64),
            Tok::Float(v) => Ok(v),
            t => self.fail(format!("expected a number, found {}", t.describe())),
        }
    }

    fn interval(&mut self) -> Result<BeliefInterval> {
        self.expect(&Tok::LBrack)?;
        let v = self.number()?;
        self.expect(&Tok::Comma)?;
        let w = self.number()?;
        self.expect(&Tok::RBrack)?;
        BeliefInterval::new(v, w).or_else(|e| self.fail(e.to_string()))
    }

    fn term(&mut self) -> Result<Term> {
        match self.next()? {
            Tok::Var(v) => Ok(Term::var(&v)),
            Tok::Ident(s) | Tok::Str(s) => Ok(Term::Const(Const::sym(&s))),
            Tok::Int(v) => Ok(Term::int(v)),
            t => self.fail(format!("expected a term, found {}", t.describe())),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let name = match self.next()? {
            Tok::Ident(s) => s,
            t => return self.fail(format!("expected a predicate name, found {}", t.describe())),
        };
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(Atom::new(&name, args))
    }

    /// An atom or a comparison.
    fn head_like(&mut self) -> Result<Atom> {
        let starts_atom = matches!(self.peek(), Some(Tok::Ident(_))) && !matches!(self.peek2(), Some(Tok::Op(_)));
        if starts_atom {
            return self.atom();
        }
        let left = self.term()?;
        let op = match self.next()? {
            Tok::Op(op) => op,
            t => return self.fail(format!("expected a comparison operator, found {}", t.describe())),
        };
        let right = self.term()?;
        Ok(Atom::cmp(op, left, right))
    }

    fn literal(&mut self) -> Result<Literal> {
        let negated = matches!(self.peek(), Some(Tok::Ident(s)) if s == "not")
            && !matches!(self.peek2(), Some(Tok::LParen | Tok::Op(_) | Tok::Comma | Tok::Dot));
        if negated {
            self.pos += 1;
        }
        let atom = self.head_like()?;
        Ok(match (negated, atom.cmp_op()) {
            (true, Some(op)) => Literal::pos(Atom::cmp(op.negated(), atom.args[0].clone(), atom.args[1].clone())),
            (true, None) => Literal::neg(atom),
            (false, _) => Literal::pos(atom),
        })
    }

    fn body(&mut self) -> Result<Vec<Literal>> {
        let mut body = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            body.push(self.literal()?);
        }
        self.expect(&Tok::Dot)?;
        Ok(body)
    }

    fn label(&mut self, what: &str) -> Result<String> {
        match self.next()? {
            Tok::Str(s) => Ok(s),
            t => self.fail(format!("expected the {what} name as a quoted string, found {}", t.describe())),
        }
    }
}

#[derive(Default)]
struct Builder {
    doc: Document,
    seen_facts: HashSet<Atom>,
    rule_ids: HashSet<String>,
    pending_rules: Vec<(Option<String>, Clause, BeliefInterval, usize)>,
    ic_ids: HashSet<String>,
    unnamed_queries: usize,
}

impl Builder {
    fn statement(&mut self, p: &mut Parser) -> Result<()> {
        let line = p.line();
        match p.peek() {
            Some(Tok::Ident(k)) if k == "ic" && matches!(p.peek2(), Some(Tok::Str(_))) => {
                p.pos += 1;
                let id = p.label("constraint")?;
                let belief = if p.peek() == Some(&Tok::LBrack) { p.interval()? } else { BeliefInterval::CERTAIN };
                let head = if p.eat(&Tok::If) {
                    None
                } else {
                    let h = p.head_like()?;
                    p.expect(&Tok::If)?;
                    Some(h)
                };
                let body = p.body()?;
                if !self.ic_ids.insert(id.clone()) {
                    return Err(Error::Parse { line, message: format!("duplicate constraint name {id}") });
                }
                self.doc.db.ic.push(AnnotatedClause::constraint(id, Clause::new(head, body), belief));
            }
            Some(Tok::Ident(k)) if k == "rule" && matches!(p.peek2(), Some(Tok::Str(_))) => {
                p.pos += 1;
                let id = p.label("rule")?;
                let belief = if p.peek() == Some(&Tok::LBrack) { p.interval()? } else { BeliefInterval::CERTAIN };
                let head = p.atom()?;
                p.expect(&Tok::If)?;
                let body = p.body()?;
                if !self.rule_ids.insert(id.clone()) {
                    return Err(Error::Parse { line, message: format!("duplicate rule name {id}") });
                }
                self.pending_rules.push((Some(id), Clause::new(Some(head), body), belief, line));
            }
            Some(Tok::LBrack) => {
                let belief = p.interval()?;
                let head = p.atom()?;
                p.expect(&Tok::If)?;
                let body = p.body()?;
                self.pending_rules.push((None, Clause::new(Some(head), body), belief, line));
            }
            Some(Tok::Ask) => {
                p.pos += 1;
                let body = p.body()?;
                self.unnamed_queries += 1;
                let name = if self.unnamed_queries == 1 { "q".to_string() } else { format!("q{}", self.unnamed_queries) };
                self.doc.queries.push(Query::all_vars(name, body));
            }
            _ => {
                let head = p.atom()?;
                match p.next()? {
                    Tok::Dot => {
                        if self.seen_facts.insert(head.clone()) {
                            let id = format!("f{}", self.doc.db.edb.len() + 1);
                            self.doc.db.edb.push(AnnotatedClause::fact(id, head));
                        } else {
                            self.doc.warnings.push(format!("line {line}: duplicate fact {head} ignored"));
                        }
                    }
                    Tok::If => {
                        let body = p.body()?;
                        self.pending_rules.push((None, Clause::new(Some(head), body), BeliefInterval::CERTAIN, line));
                    }
                    Tok::Ask => {
                        let body = p.body()?;
                        let mut out = Vec::new();
                        for t in &head.args {
                            match t {
                                Term::Var(v) => out.push(v.clone()),
                                Term::Const(c) => {
                                    return Err(Error::Parse { line, message: format!("query head argument {c} is not a variable") })
                                }
                            }
                        }
                        self.doc.queries.push(Query::new(head.pred.to_string(), out, body));
                    }
                    t => return p.fail(format!("expected `.`, `:-` or `?-`, found {}", t.describe())),
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Document {
        let mut next = 0;
        for (id, clause, belief, _) in std::mem::take(&mut self.pending_rules) {
            let id = id.unwrap_or_else(|| loop {
                next += 1;
                let cand = format!("r{next}");
                if !self.rule_ids.contains(&cand) {
                    self.rule_ids.insert(cand.clone());
                    break cand;
                }
            });
            let mut rule = AnnotatedClause::rule(id, clause);
            rule.belief = belief;
            self.doc.db.idb.push(rule);
        }
        self.doc
    }
}

/// Parse a document without validating it.
pub fn parse(src: &str) -> Result<Document> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut b = Builder::default();
    while p.peek().is_some() {
        b.statement(&mut p)?;
    }
    Ok(b.finish())
}

/// Parse and validate a document. Validation errors are returned as
/// [`Error::Invalid`]; warnings are kept in the document.
pub fn load(src: &str) -> Result<Document> {
    let mut doc = parse(src)?;
    let report = validate_database(&doc.db);
    if !report.is_ok() {
        return Err(Error::Invalid(report.errors.iter().map(ToString::to_string).collect()));
    }
    doc.warnings.extend(report.warnings.iter().map(ToString::to_string));
    Ok(doc)
}

pub fn load_file(path: impl AsRef<Path>) -> Result<Document> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load(&src)
}

/// Parse a single query. Accepts `?- body.`, `name(X) ?- body.` or a bare
/// body, with or without the final dot.
pub fn parse_query(src: &str) -> Result<Query> {
    let trimmed = src.trim();
    let mut text = trimmed.to_string();
    if !text.ends_with('.') {
        text.push('.');
    }
    if !text.contains("?-") {
        text = format!("?- {text}");
    }
    let doc = parse(&text)?;
    match (doc.queries.len(), doc.db.edb.len() + doc.db.idb.len() + doc.db.ic.len()) {
        (1, 0) => Ok(doc.queries.into_iter().next().expect("one query")),
        _ => Err(Error::Parse { line: 1, message: format!("expected exactly one query in `{trimmed}`") }),
    }
}

/// Render a database and queries in the text format. Parsing the result
/// gives back the same database and queries.
pub fn dump(db: &Database, queries: &[Query]) -> String {
    let mut out = String::new();
    if !db.edb.is_empty() {
        out.push_str("% facts\n");
        for f in &db.edb {
            if let Some(h) = f.head() {
                let _ = writeln!(out, "{h}.");
            }
        }
    }
    if !db.idb.is_empty() {
        out.push_str("% rules\n");
        for r in &db.idb {
            let _ = write!(out, "rule {}", quote(&r.id));
            if r.belief != BeliefInterval::CERTAIN {
                let _ = write!(out, " [{}, {}]", r.belief.v, r.belief.w);
            }
            let _ = writeln!(out, " {}.", r.clause);
        }
    }
    if !db.ic.is_empty() {
        out.push_str("% constraints\n");
        for c in &db.ic {
            let _ = writeln!(out, "ic {} [{}, {}] {}.", quote(&c.id), c.belief.v, c.belief.w, c.clause);
        }
    }
    if !queries.is_empty() {
        out.push_str("% queries\n");
        for q in queries {
            let _ = writeln!(out, "{q}");
        }
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Var;

    const SAMPLE: &str = r#"
% sample
paper(oid1, logicProgramming).
author("Gelfond", 69, "Russian").
paper(oid1, logicProgramming).
rule "rA1" coauthors(X, Y) :- author_paper(X, P), author_paper(Y, P).
ic "IC4" [0.8, 0.8] A >= 20 :- author(N, A, C).
ic "IC0" :- paper(0, S).
answer(O) ?- paper(O, S), not bestseller(O), not S < 3.
?- author(N, A, C).
"#;

    #[test]
    fn parses_every_statement_kind() {
        let doc = load(SAMPLE).unwrap();
        assert_eq!(doc.db.edb.len(), 2);
        assert_eq!(doc.warnings.len(), 1);
        assert_eq!(doc.db.idb[0].id, "rA1");
        assert_eq!(doc.db.ic.len(), 2);
        assert_eq!(doc.db.ic[0].head().unwrap().to_string(), "A >= 20");
        assert!(doc.db.ic[1].head().is_none());
        let q = doc.query("answer").unwrap();
        assert_eq!(q.output_vars, vec![Var::new("O")]);
        assert!(!q.body[1].positive);
        assert_eq!(q.body[2].to_string(), "S >= 3");
        assert_eq!(doc.query("q").unwrap().output_vars.len(), 3);
    }

    #[test]
    fn dump_round_trips() {
        let doc = load(SAMPLE).unwrap();
        let text = dump(&doc.db, &doc.queries);
        let again = load(&text).unwrap();
        assert_eq!(again.db, doc.db);
        assert_eq!(again.queries, doc.queries);
    }

    #[test]
    fn bad_interval_is_rejected_with_a_line() {
        let err = parse("p(a).\nic \"x\" [0.9, 0.2] :- p(X).").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        assert!(matches!(parse("p(a).\n\nq(X :- r."), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("p(a) ; q."), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn validation_errors_are_reported() {
        assert!(matches!(load("p(X)."), Err(Error::Invalid(_))));
    }

    #[test]
    fn bare_query_text() {
        let q = parse_query("p(X), X > 2").unwrap();
        assert_eq!(q.name, "q");
        assert_eq!(q.body.len(), 2);
        let named = parse_query("ans(X) ?- p(X, Y).").unwrap();
        assert_eq!(named.output_vars.len(), 1);
        assert!(parse_query("?- p(a). q(b).").is_err());
    }
}
