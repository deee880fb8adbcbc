//! Recursive-descent parser for the three query forms.
//!
//! ```text
//! fo        := disj
//! disj      := conj (("OR" | "|") conj)*
//! conj      := unary (("AND" | "&") unary)*
//! unary     := ("NOT" | "!") unary | "EXISTS" ident ("," ident)* "." disj
//!            | "(" disj ")" | ident "(" term ("," term)* ")" | term "=" term
//! program   := (atom (":-" atom ("," atom)*)? ".")*
//! aggregate := "AGG" ("SUM" | "AVG") ident "." ident (cmp number)? ("FIXED" | "PERWORLD")?
//! ```

use std::collections::BTreeSet;

use super::{
    bind_open_query, AggregateKind, AggregateQuery, Atom, AvgMode, Binding, Comparator,
    DatalogProgram, FoQuery, Formula, Query, Rule, Term,
};
use crate::error::{Error, Position, Result};
use crate::rational::parse_rational;
use crate::relational::Schema;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Equals,
    ColonDash,
    Greater,
    GreaterEq,
    Amp,
    Pipe,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Number(s) => format!("`{s}`"),
            Tok::Quoted(s) => format!("'{s}'"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Equals => "`=`".into(),
            Tok::ColonDash => "`:-`".into(),
            Tok::Greater => "`>`".into(),
            Tok::GreaterEq => "`>=`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(position: Position, message: impl Into<String>) -> Error {
    Error::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Position)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let here = Position { line, column };
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    column = 1;
                } else {
                    column += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '%' || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i);
            }
            continue;
        }
        let digit_at = |k: usize| chars.get(k).is_some_and(|d| d.is_ascii_digit());
        let (tok, len) = if c.is_alphabetic() || c == '_' {
            let len = chars[i..]
                .iter()
                .take_while(|ch| ch.is_alphanumeric() || **ch == '_')
                .count();
            (Tok::Ident(chars[i..i + len].iter().collect()), len)
        } else if c.is_ascii_digit() || (c == '-' && digit_at(i + 1)) {
            let mut len = 1 + chars[i + 1..]
                .iter()
                .take_while(|d| d.is_ascii_digit())
                .count();
            if chars.get(i + len) == Some(&'.') && digit_at(i + len + 1) {
                len += 1 + chars[i + len + 1..]
                    .iter()
                    .take_while(|d| d.is_ascii_digit())
                    .count();
            }
            (Tok::Number(chars[i..i + len].iter().collect()), len)
        } else if c == '\'' {
            let Some(end) = chars[i + 1..].iter().position(|ch| *ch == '\'') else {
                return Err(syntax(here, "unterminated quoted constant"));
            };
            (
                Tok::Quoted(chars[i + 1..i + 1 + end].iter().collect()),
                end + 2,
            )
        } else {
            let next = chars.get(i + 1).copied();
            match (c, next) {
                (':', Some('-')) => (Tok::ColonDash, 2),
                ('>', Some('=')) => (Tok::GreaterEq, 2),
                ('\\', Some('+')) => (Tok::Bang, 2),
                ('>', _) => (Tok::Greater, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                ('=', _) => (Tok::Equals, 1),
                ('&', _) => (Tok::Amp, 1),
                ('|', _) => (Tok::Pipe, 1),
                ('!', _) => (Tok::Bang, 1),
                _ => return Err(syntax(here, format!("unexpected character `{c}`"))),
            }
        };
        out.push((tok, here));
        advance(len, &mut i);
    }
    out.push((Tok::Eof, Position { line, column }));
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<(Tok, Position)>,
    at: usize,
    schema: &'s Schema,
    scope: Vec<String>,
    free: BTreeSet<String>,
}

impl<'s> Parser<'s> {
    fn new(text: &str, schema: &'s Schema) -> Result<Self> {
        Ok(Parser {
            tokens: lex(text)?,
            at: 0,
            schema,
            scope: Vec::new(),
            free: BTreeSet::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.at + k).min(self.tokens.len() - 1)].0
    }

    fn position(&self) -> Position {
        self.tokens[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.at].0.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> Error {
        syntax(
            self.position(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn finish(&self) -> Result<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    // ---- first-order ----

    fn disjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.conjunction()?];
        while self.is_keyword("OR") || *self.peek() == Tok::Pipe {
            self.bump();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while self.is_keyword("AND") || *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.is_keyword("NOT") || *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.is_keyword("EXISTS") {
            self.bump();
            let mut vars = vec![self.ident()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                vars.push(self.ident()?);
            }
            self.expect(Tok::Dot)?;
            let depth = self.scope.len();
            self.scope.extend(vars.iter().cloned());
            let body = self.disjunction();
            self.scope.truncate(depth);
            let body = body?;
            return Ok(vars
                .into_iter()
                .rev()
                .fold(body, |f, x| Formula::Exists(x, Box::new(f))));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.disjunction()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LParen {
            return self.relation_atom().map(Formula::Atom);
        }
        let lhs = self.fo_term()?;
        self.expect(Tok::Equals)?;
        let rhs = self.fo_term()?;
        Ok(Formula::Eq(lhs, rhs))
    }

    fn relation_atom(&mut self) -> Result<Atom> {
        let name = self.ident()?;
        let arity = self
            .schema
            .predicate(&name)
            .map(|p| p.arity())
            .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
        self.expect(Tok::LParen)?;
        let mut args = vec![self.fo_term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.fo_term()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != arity {
            return Err(Error::ArityMismatch {
                predicate: name,
                expected: arity,
                found: args.len(),
            });
        }
        Ok(Atom {
            predicate: name,
            args,
        })
    }

    fn fo_term(&mut self) -> Result<Term> {
        let universe = self.schema.universe();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                if self.scope.contains(&s) || self.free.contains(&s) {
                    Ok(Term::Var(s))
                } else if universe.contains(&s) {
                    Ok(Term::Const(s))
                } else {
                    Err(Error::UnboundVariable(s))
                }
            }
            Tok::Number(s) | Tok::Quoted(s) => {
                self.bump();
                if universe.contains(&s) {
                    Ok(Term::Const(s))
                } else {
                    Err(Error::ConstantOutsideUniverse(s))
                }
            }
            _ => Err(self.unexpected("term")),
        }
    }

    // ---- Datalog ----

    fn program(&mut self) -> Result<DatalogProgram> {
        let mut rules = Vec::new();
        let mut heads = Vec::new();
        while *self.peek() != Tok::Eof {
            heads.push(self.position());
            rules.push(self.rule()?);
        }
        self.check_program(&rules, &heads)?;
        Ok(DatalogProgram {
            rules,
            goal: Atom::new("goal", Vec::new()),
        })
    }

    fn rule(&mut self) -> Result<Rule> {
        let head = self.datalog_atom()?;
        let mut body = Vec::new();
        if *self.peek() == Tok::ColonDash {
            self.bump();
            loop {
                if self.is_keyword("not") || self.is_keyword("NOT") || *self.peek() == Tok::Bang {
                    return Err(Error::NonPositiveRule(head.predicate));
                }
                body.push(self.datalog_atom()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Rule { head, body })
    }

    fn datalog_atom(&mut self) -> Result<Atom> {
        let predicate = self.ident()?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                args.push(match self.bump() {
                    Tok::Ident(s) if s.starts_with(|c: char| c.is_uppercase() || c == '_') => {
                        Term::Var(s)
                    }
                    Tok::Ident(s) | Tok::Number(s) | Tok::Quoted(s) => Term::Const(s),
                    _ => {
                        self.at -= 1;
                        return Err(self.unexpected("term"));
                    }
                });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(Atom { predicate, args })
    }

    fn check_program(&self, rules: &[Rule], heads: &[Position]) -> Result<()> {
        let mut idb_arity = std::collections::BTreeMap::new();
        for (rule, position) in rules.iter().zip(heads) {
            let name = &rule.head.predicate;
            if self.schema.predicate(name).is_some() {
                return Err(syntax(
                    *position,
                    format!("rule head `{name}` redefines an extensional relation"),
                ));
            }
            let arity = *idb_arity
                .entry(name.clone())
                .or_insert(rule.head.args.len());
            if arity != rule.head.args.len() {
                return Err(Error::ArityMismatch {
                    predicate: name.clone(),
                    expected: arity,
                    found: rule.head.args.len(),
                });
            }
            let body_vars: BTreeSet<&String> =
                rule.body.iter().flat_map(|a| a.variables()).collect();
            if let Some(v) = rule.head.variables().find(|v| !body_vars.contains(v)) {
                return Err(Error::UnsafeRule {
                    head: name.clone(),
                    variable: v.clone(),
                });
            }
        }
        for atom in rules.iter().flat_map(|r| &r.body) {
            let expected = match self.schema.predicate(&atom.predicate) {
                Some(p) => p.arity(),
                None => *idb_arity
                    .get(&atom.predicate)
                    .ok_or_else(|| Error::UnknownRelation(atom.predicate.clone()))?,
            };
            if expected != atom.args.len() {
                return Err(Error::ArityMismatch {
                    predicate: atom.predicate.clone(),
                    expected,
                    found: atom.args.len(),
                });
            }
        }
        match idb_arity.get("goal") {
            Some(0) => Ok(()),
            Some(_) => Err(syntax(heads[0], "`goal` must be 0-ary")),
            None => Err(syntax(
                self.tokens.last().unwrap().1,
                "program has no `goal :- ...` rule",
            )),
        }
    }

    // ---- aggregates ----

    fn aggregate(&mut self, keyword_required: bool) -> Result<AggregateQuery> {
        if self.is_keyword("AGG") {
            self.bump();
        } else if keyword_required {
            return Err(self.unexpected("`AGG`"));
        }
        let kind_pos = self.position();
        let kind = self.ident()?;
        let relation = self.ident()?;
        self.expect(Tok::Dot)?;
        let column = self.ident()?;
        let predicate = self
            .schema
            .predicate(&relation)
            .ok_or_else(|| Error::UnknownRelation(relation.clone()))?;
        let column_index = predicate.column(&column).ok_or(Error::UnknownColumn {
            relation: relation.clone(),
            column: column.clone(),
        })?;
        let kind = match kind.as_str() {
            "SUM" => match self.peek() {
                Tok::Greater | Tok::GreaterEq => {
                    let comparator = if self.bump() == Tok::Greater {
                        Comparator::Greater
                    } else {
                        Comparator::GreaterOrEqual
                    };
                    let position = self.position();
                    let threshold = match self.bump() {
                        Tok::Number(n) => parse_rational(&n),
                        _ => None,
                    }
                    .ok_or_else(|| syntax(position, "expected a numeric threshold"))?;
                    AggregateKind::SumThreshold {
                        comparator,
                        threshold,
                    }
                }
                _ => AggregateKind::Sum,
            },
            "AVG" => {
                let mode = if self.is_keyword("PERWORLD") {
                    self.bump();
                    AvgMode::PerWorld
                } else {
                    if self.is_keyword("FIXED") {
                        self.bump();
                    }
                    AvgMode::FixedDenominator
                };
                AggregateKind::Avg(mode)
            }
            other => return Err(syntax(kind_pos, format!("unknown aggregate `{other}`"))),
        };
        self.finish()?;
        Ok(AggregateQuery {
            relation,
            column,
            column_index,
            kind,
        })
    }
}

/// Parses a closed query, choosing the form from the text: a leading `AGG`
/// selects an aggregate, any `:-` a Datalog program, anything else FO.
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query> {
    parse_query_with_free(text, schema, &[])
}

/// Like [`parse_query`], with identifiers in `free` treated as free FO variables.
pub fn parse_query_with_free(text: &str, schema: &Schema, free: &[&str]) -> Result<Query> {
    let mut p = Parser::new(text, schema)?;
    if p.is_keyword("AGG") {
        return p.aggregate(true).map(Query::Aggregate);
    }
    if p.tokens.iter().any(|(t, _)| *t == Tok::ColonDash) {
        return p.program().map(Query::Datalog);
    }
    parse_fo(p, free)
}

fn parse_fo(mut p: Parser<'_>, free: &[&str]) -> Result<Query> {
    p.free = free.iter().map(|s| s.to_string()).collect();
    let formula = p.disjunction()?;
    p.finish()?;
    let free = formula.free_variables();
    Ok(Query::Fo(FoQuery { formula, free }))
}

/// Parses a query file: a `FO:`, `DATALOG:` or `AGG:` header, the query
/// text, and an optional `BIND x=a, y=b` line. The result is the bound,
/// Boolean query.
pub fn parse_query_file(text: &str, schema: &Schema) -> Result<Query> {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut header = None;
    let mut binding = Binding::new();
    for (n, line) in lines.iter_mut().enumerate() {
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        if header.is_none() && !trimmed.is_empty() {
            let (kind, len) = ["FO:", "DATALOG:", "AGG:"]
                .iter()
                .find(|h| trimmed.starts_with(**h))
                .map(|h| (h.trim_end_matches(':'), h.len()))
                .ok_or_else(|| {
                    syntax(
                        Position {
                            line: n + 1,
                            column: indent + 1,
                        },
                        "expected a `FO:`, `DATALOG:` or `AGG:` header",
                    )
                })?;
            header = Some(kind);
            line.replace_range(indent..indent + len, &" ".repeat(len));
        } else if let Some(rest) = trimmed.strip_prefix("BIND") {
            for pair in rest.split(',').filter(|s| !s.trim().is_empty()) {
                let (x, c) = pair.split_once('=').ok_or_else(|| {
                    syntax(
                        Position {
                            line: n + 1,
                            column: indent + 1,
                        },
                        format!("malformed binding `{}`", pair.trim()),
                    )
                })?;
                binding.insert(
                    x.trim().to_string(),
                    c.trim().trim_matches('\'').to_string(),
                );
            }
            line.clear();
        }
    }
    let body = lines.join("\n");
    let query = match header {
        Some("FO") => {
            let free: Vec<&str> = binding.keys().map(String::as_str).collect();
            parse_fo(Parser::new(&body, schema)?, &free)?
        }
        Some("DATALOG") => {
            let mut p = Parser::new(&body, schema)?;
            Query::Datalog(p.program()?)
        }
        Some(_) => Query::Aggregate(Parser::new(&body, schema)?.aggregate(false)?),
        None => return Err(syntax(Position { line: 1, column: 1 }, "empty query file")),
    };
    bind_open_query(&query, &binding)
}
