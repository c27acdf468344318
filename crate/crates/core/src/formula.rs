//! Propositional formulas: AST, text syntax and clause-form conversion.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! iff     := imp ("<->" imp)*        left-associative
//! imp     := or ("->" imp)?          right-associative
//! or      := and ("|" and)*
//! and     := unary ("&" unary)*
//! unary   := "!" unary | atom | "true" | "false" | "(" iff ")"
//! ```
//!
//! The lexer also accepts `¬ ∧ ∨ → ↔`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Prefix reserved for atoms introduced by clause conversion.
pub const AUX_PREFIX: &str = "__aux";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    /// Character offset into the input.
    pub position: usize,
    pub message: String,
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn parse(text: &str) -> Result<Formula, ParseError> {
        parse_formula(text)
    }

    /// Canonical text with minimal parentheses.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render_into(self, &mut out);
        out
    }

    /// Atom names in order of first occurrence (left to right).
    pub fn atoms(&self) -> Vec<String> {
        let mut seen = Vec::new();
        self.collect_atoms(&mut seen);
        seen
    }

    fn collect_atoms(&self, seen: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                if !seen.contains(a) {
                    seen.push(a.clone());
                }
            }
            Formula::Not(f) => f.collect_atoms(seen),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(seen);
                b.collect_atoms(seen);
            }
        }
    }

    /// Truth value under `value`, which maps atom names to booleans.
    pub fn eval(&self, value: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => value(a),
            Formula::Not(f) => !f.eval(value),
            Formula::And(a, b) => a.eval(value) && b.eval(value),
            Formula::Or(a, b) => a.eval(value) || b.eval(value),
            Formula::Implies(a, b) => !a.eval(value) || b.eval(value),
            Formula::Iff(a, b) => a.eval(value) == b.eval(value),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Implies(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(..) => 5,
            Formula::True | Formula::False | Formula::Atom(_) => 6,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

pub fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(AUX_PREFIX)
        && name != "true"
        && name != "false"
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let token = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' | '¬' => Token::Not,
            '&' | '∧' => Token::And,
            '|' | '∨' => Token::Or,
            '→' => Token::Implies,
            '↔' => Token::Iff,
            '(' => Token::LParen,
            ')' => Token::RParen,
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                Token::Implies
            }
            '<' if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') => {
                i += 2;
                Token::Iff
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let name: String = chars[i..j].iter().collect();
                i = j;
                tokens.push((start, Token::Ident(name)));
                continue;
            }
            other => {
                return Err(ParseError {
                    position: i,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        tokens.push((start, token));
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.offset(),
            message: message.into(),
        }
    }

    fn eat(&mut self, token: &Token) -> bool {
        if self.peek() == Some(token) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.implication()?;
        while self.eat(&Token::Iff) {
            let right = self.implication()?;
            left = Formula::iff(left, right);
        }
        Ok(left)
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let left = self.disjunction()?;
        if self.eat(&Token::Implies) {
            let right = self.implication()?;
            return Ok(Formula::implies(left, right));
        }
        Ok(left)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.conjunction()?;
        while self.eat(&Token::Or) {
            let right = self.conjunction()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.unary()?;
        while self.eat(&Token::And) {
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let position = self.offset();
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.iff()?;
                if !self.eat(&Token::RParen) {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => Ok(Formula::True),
                    "false" => Ok(Formula::False),
                    _ if name.starts_with(AUX_PREFIX) => Err(ParseError {
                        position,
                        message: format!("atom '{name}' uses the reserved prefix {AUX_PREFIX}"),
                    }),
                    _ => Ok(Formula::Atom(name)),
                }
            }
            Some(_) => Err(self.error("expected an atom, '!' or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError {
            position: 0,
            message: "empty formula".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let f = parser.iff()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Rendering

fn render_into(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(a) => out.push_str(a),
        Formula::Not(g) => {
            out.push('!');
            render_child(g, g.precedence() < f.precedence(), out);
        }
        Formula::And(a, b) => render_binary(f, a, b, " & ", false, out),
        Formula::Or(a, b) => render_binary(f, a, b, " | ", false, out),
        Formula::Implies(a, b) => render_binary(f, a, b, " -> ", true, out),
        Formula::Iff(a, b) => render_binary(f, a, b, " <-> ", false, out),
    }
}

fn render_binary(parent: &Formula, left: &Formula, right: &Formula, op: &str, right_assoc: bool, out: &mut String) {
    let p = parent.precedence();
    let (lp, rp) = (left.precedence(), right.precedence());
    let left_parens = lp < p || (lp == p && right_assoc);
    let right_parens = rp < p || (rp == p && !right_assoc);
    render_child(left, left_parens, out);
    out.push_str(op);
    render_child(right, right_parens, out);
}

fn render_child(f: &Formula, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        render_into(f, out);
        out.push(')');
    } else {
        render_into(f, out);
    }
}

// ---------------------------------------------------------------------------
// Clause form

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: String,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: &str) -> Literal {
        Literal {
            atom: atom.to_string(),
            positive: true,
        }
    }

    pub fn neg(atom: &str) -> Literal {
        Literal {
            atom: atom.to_string(),
            positive: false,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "¬{}", self.atom)
        }
    }
}

pub type Clause = BTreeSet<Literal>;

/// Conjunction of clauses over named atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClauseSet {
    pub clauses: Vec<Clause>,
}

impl ClauseSet {
    /// Atoms in order of first occurrence.
    pub fn atoms(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for clause in &self.clauses {
            for lit in clause {
                if !seen.contains(&lit.atom) {
                    seen.push(lit.atom.clone());
                }
            }
        }
        seen
    }

    pub fn extend(&mut self, other: ClauseSet) {
        self.clauses.extend(other.clauses);
    }

    /// Clauses as a set, ignoring order and repetition.
    pub fn as_set(&self) -> BTreeSet<Clause> {
        self.clauses.iter().cloned().collect()
    }
}

/// Variable of a clause produced by [`clausify`]: a user atom or the n-th auxiliary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Var<'a> {
    Named(&'a str),
    Aux(u32),
}

pub(crate) type RawLit<'a> = (Var<'a>, bool);

pub(crate) struct RawCnf<'a> {
    pub clauses: Vec<Vec<RawLit<'a>>>,
}

/// Converts `f` to clauses, naming auxiliaries `__aux0`, `__aux1`, ... in pre-order.
pub fn to_clauses(f: &Formula) -> ClauseSet {
    let raw = clausify(f);
    let name = |v: Var| match v {
        Var::Named(a) => a.to_string(),
        Var::Aux(n) => format!("{AUX_PREFIX}{n}"),
    };
    ClauseSet {
        clauses: raw
            .clauses
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|(v, positive)| Literal {
                        atom: name(v),
                        positive,
                    })
                    .collect()
            })
            .collect(),
    }
}

pub(crate) fn clausify(f: &Formula) -> RawCnf<'_> {
    let mut cnf = Clausifier {
        clauses: Vec::new(),
        next_aux: 0,
    };
    match simplify(f) {
        Simplified::Const(true) => {}
        Simplified::Const(false) => cnf.clauses.push(Vec::new()),
        Simplified::Formula(g) => {
            let mut conjuncts = Vec::new();
            split_conjuncts(&g, &mut conjuncts);
            for c in conjuncts {
                cnf.emit_top(c);
            }
        }
    }
    RawCnf { clauses: cnf.clauses }
}

/// Constant-free view of a formula; borrowed where nothing had to be folded.
enum Simplified<'a> {
    Const(bool),
    Formula(Node<'a>),
}

/// Constant-free formula tree referring back to the atoms of the source.
#[derive(Clone, Debug)]
enum Node<'a> {
    Atom(&'a str),
    Not(Box<Node<'a>>),
    And(Box<Node<'a>>, Box<Node<'a>>),
    Or(Box<Node<'a>>, Box<Node<'a>>),
    Implies(Box<Node<'a>>, Box<Node<'a>>),
    Iff(Box<Node<'a>>, Box<Node<'a>>),
}

fn negate_simplified(s: Simplified<'_>) -> Simplified<'_> {
    match s {
        Simplified::Const(b) => Simplified::Const(!b),
        Simplified::Formula(n) => Simplified::Formula(Node::Not(Box::new(n))),
    }
}

fn simplify(f: &Formula) -> Simplified<'_> {
    use Simplified::{Const, Formula as F};
    match f {
        Formula::True => Const(true),
        Formula::False => Const(false),
        Formula::Atom(a) => F(Node::Atom(a)),
        Formula::Not(g) => negate_simplified(simplify(g)),
        Formula::And(a, b) => match (simplify(a), simplify(b)) {
            (Const(false), _) | (_, Const(false)) => Const(false),
            (Const(true), x) | (x, Const(true)) => x,
            (F(x), F(y)) => F(Node::And(Box::new(x), Box::new(y))),
        },
        Formula::Or(a, b) => match (simplify(a), simplify(b)) {
            (Const(true), _) | (_, Const(true)) => Const(true),
            (Const(false), x) | (x, Const(false)) => x,
            (F(x), F(y)) => F(Node::Or(Box::new(x), Box::new(y))),
        },
        Formula::Implies(a, b) => match (simplify(a), simplify(b)) {
            (Const(false), _) | (_, Const(true)) => Const(true),
            (Const(true), x) => x,
            (x, Const(false)) => negate_simplified(x),
            (F(x), F(y)) => F(Node::Implies(Box::new(x), Box::new(y))),
        },
        Formula::Iff(a, b) => match (simplify(a), simplify(b)) {
            (Const(x), Const(y)) => Const(x == y),
            (Const(true), x) | (x, Const(true)) => x,
            (Const(false), x) | (x, Const(false)) => negate_simplified(x),
            (F(x), F(y)) => F(Node::Iff(Box::new(x), Box::new(y))),
        },
    }
}

fn split_conjuncts<'n, 'a>(n: &'n Node<'a>, out: &mut Vec<&'n Node<'a>>) {
    match n {
        Node::And(a, b) => {
            split_conjuncts(a, out);
            split_conjuncts(b, out);
        }
        _ => out.push(n),
    }
}

fn literal<'a>(n: &Node<'a>) -> Option<RawLit<'a>> {
    match n {
        Node::Atom(a) => Some((Var::Named(a), true)),
        Node::Not(g) => literal(g).map(|(v, p)| (v, !p)),
        _ => None,
    }
}

/// Literals of `n` if it is a single disjunction of literals.
fn as_clause<'a>(n: &Node<'a>, out: &mut Vec<RawLit<'a>>) -> bool {
    if let Some(l) = literal(n) {
        out.push(l);
        return true;
    }
    match n {
        Node::Or(a, b) => as_clause(a, out) && as_clause(b, out),
        Node::Implies(a, b) => {
            let mut premise = Vec::new();
            if !as_cube(a, &mut premise) {
                return false;
            }
            out.extend(premise.into_iter().map(|(v, p)| (v, !p)));
            as_clause(b, out)
        }
        Node::Not(g) => {
            let mut cube = Vec::new();
            if !as_cube(g, &mut cube) {
                return false;
            }
            out.extend(cube.into_iter().map(|(v, p)| (v, !p)));
            true
        }
        _ => false,
    }
}

/// Literals of `n` if it is a single conjunction of literals.
fn as_cube<'a>(n: &Node<'a>, out: &mut Vec<RawLit<'a>>) -> bool {
    if let Some(l) = literal(n) {
        out.push(l);
        return true;
    }
    match n {
        Node::And(a, b) => as_cube(a, out) && as_cube(b, out),
        Node::Not(g) => {
            let mut clause = Vec::new();
            if !as_clause(g, &mut clause) {
                return false;
            }
            out.extend(clause.into_iter().map(|(v, p)| (v, !p)));
            true
        }
        _ => false,
    }
}

struct Clausifier<'a> {
    clauses: Vec<Vec<RawLit<'a>>>,
    next_aux: u32,
}

impl<'a> Clausifier<'a> {
    fn push(&mut self, lits: Vec<RawLit<'a>>) {
        let mut clause: Vec<RawLit<'a>> = Vec::with_capacity(lits.len());
        for l in lits {
            if clause.contains(&(l.0, !l.1)) {
                return;
            }
            if !clause.contains(&l) {
                clause.push(l);
            }
        }
        self.clauses.push(clause);
    }

    fn emit_top(&mut self, n: &Node<'a>) {
        let mut lits = Vec::new();
        if as_clause(n, &mut lits) {
            self.push(lits);
            return;
        }
        let mut cube = Vec::new();
        if as_cube(n, &mut cube) {
            for l in cube {
                self.push(vec![l]);
            }
            return;
        }
        if let Node::Iff(a, b) = n {
            if let (Some(x), Some(y)) = (literal(a), literal(b)) {
                self.push(vec![(x.0, !x.1), y]);
                self.push(vec![x, (y.0, !y.1)]);
                return;
            }
        }
        let mut lits = Vec::new();
        self.top_disjuncts(n, &mut lits);
        self.push(lits);
    }

    /// Flattens a top-level disjunction, defining non-literal disjuncts.
    fn top_disjuncts(&mut self, n: &Node<'a>, out: &mut Vec<RawLit<'a>>) {
        match n {
            Node::Or(a, b) => {
                self.top_disjuncts(a, out);
                self.top_disjuncts(b, out);
            }
            Node::Implies(a, b) => {
                let (v, p) = self.define(a);
                out.push((v, !p));
                self.top_disjuncts(b, out);
            }
            _ => out.push(self.define(n)),
        }
    }

    /// Literal equivalent to `n`, adding definitional clauses for an auxiliary if needed.
    fn define(&mut self, n: &Node<'a>) -> RawLit<'a> {
        match n {
            Node::Atom(a) => (Var::Named(a), true),
            Node::Not(g) => {
                let (v, p) = self.define(g);
                (v, !p)
            }
            Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) | Node::Iff(a, b) => {
                let x = Var::Aux(self.next_aux);
                self.next_aux += 1;
                let la = self.define(a);
                let lb = self.define(b);
                let neg = |l: RawLit<'a>| (l.0, !l.1);
                let (px, nx) = ((x, true), (x, false));
                match n {
                    Node::And(..) => {
                        self.push(vec![nx, la]);
                        self.push(vec![nx, lb]);
                        self.push(vec![px, neg(la), neg(lb)]);
                    }
                    Node::Or(..) => {
                        self.push(vec![nx, la, lb]);
                        self.push(vec![px, neg(la)]);
                        self.push(vec![px, neg(lb)]);
                    }
                    Node::Implies(..) => {
                        self.push(vec![nx, neg(la), lb]);
                        self.push(vec![px, la]);
                        self.push(vec![px, neg(lb)]);
                    }
                    _ => {
                        self.push(vec![nx, neg(la), lb]);
                        self.push(vec![nx, la, neg(lb)]);
                        self.push(vec![px, la, lb]);
                        self.push(vec![px, neg(la), neg(lb)]);
                    }
                }
                px
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn a(s: &str) -> Formula {
        Formula::atom(s)
    }

    fn clauses(lits: &[&[(&str, bool)]]) -> BTreeSet<Clause> {
        lits.iter()
            .map(|c| {
                c.iter()
                    .map(|(a, pos)| Literal {
                        atom: a.to_string(),
                        positive: *pos,
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn parses_axioms_of_the_running_example() {
        assert_eq!(p("A -> !B"), Formula::implies(a("A"), Formula::not(a("B"))));
        assert_eq!(p("A"), a("A"));
        assert_eq!(p("A -> B | C"), Formula::implies(a("A"), Formula::or(a("B"), a("C"))));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            p("A -> B -> C"),
            Formula::implies(a("A"), Formula::implies(a("B"), a("C")))
        );
        assert_eq!(p("A & B & C"), Formula::and(Formula::and(a("A"), a("B")), a("C")));
        assert_eq!(
            p("!A & B | C <-> D"),
            Formula::iff(Formula::or(Formula::and(Formula::not(a("A")), a("B")), a("C")), a("D"))
        );
        assert_eq!(p("¬A ∧ B → C ∨ D"), p("!A & B -> C | D"));
        assert_eq!(p("A ↔ B"), p("A <-> B"));
        assert_eq!(p("true -> false"), Formula::implies(Formula::True, Formula::False));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = Formula::parse("A -> ").unwrap_err();
        assert_eq!(e.position, 5);
        let e = Formula::parse("A & (B | C").unwrap_err();
        assert!(e.message.contains("')'"));
        let e = Formula::parse("A $ B").unwrap_err();
        assert_eq!(e.position, 2);
        assert!(Formula::parse("").is_err());
        assert!(Formula::parse("A B").is_err());
        let e = Formula::parse("A -> __aux3").unwrap_err();
        assert_eq!(e.position, 5);
        assert!(e.message.contains("reserved"));
    }

    #[test]
    fn renders_with_minimal_parentheses() {
        assert_eq!(Formula::not(a("A")).render(), "!A");
        assert_eq!(
            Formula::implies(a("A"), Formula::or(a("B"), a("C"))).render(),
            "A -> B | C"
        );
        assert_eq!(Formula::or(Formula::and(a("A"), a("B")), a("C")).render(), "A & B | C");
        assert_eq!(
            Formula::and(a("A"), Formula::and(a("B"), a("C"))).render(),
            "A & (B & C)"
        );
        assert_eq!(
            Formula::implies(Formula::implies(a("A"), a("B")), a("C")).render(),
            "(A -> B) -> C"
        );
        assert_eq!(Formula::not(Formula::or(a("A"), a("B"))).render(), "!(A | B)");
        assert_eq!(Formula::not(Formula::not(a("A"))).render(), "!!A");
    }

    #[test]
    fn clause_shaped_formulas_need_no_auxiliaries() {
        let cs = to_clauses(&p("A -> !B"));
        assert_eq!(cs.as_set(), clauses(&[&[("A", false), ("B", false)]]));
        let cs = to_clauses(&p("A & !A"));
        assert_eq!(cs.as_set(), clauses(&[&[("A", true)], &[("A", false)]]));
        let cs = to_clauses(&p("A <-> B"));
        assert_eq!(
            cs.as_set(),
            clauses(&[&[("A", false), ("B", true)], &[("A", true), ("B", false)]])
        );
        let cs = to_clauses(&p("A & B -> C | !D"));
        assert_eq!(
            cs.as_set(),
            clauses(&[&[("A", false), ("B", false), ("C", true), ("D", false)]])
        );
        let cs = to_clauses(&p("!(A | B)"));
        assert_eq!(cs.as_set(), clauses(&[&[("A", false)], &[("B", false)]]));
    }

    #[test]
    fn constants_and_tautologies() {
        assert!(to_clauses(&Formula::True).clauses.is_empty());
        assert_eq!(to_clauses(&Formula::False).clauses, vec![Clause::new()]);
        assert!(to_clauses(&p("A | !A")).clauses.is_empty());
        assert_eq!(to_clauses(&p("A & true")).as_set(), clauses(&[&[("A", true)]]));
        assert_eq!(to_clauses(&p("false -> A")).clauses.len(), 0);
    }

    #[test]
    fn auxiliaries_are_numbered_in_pre_order() {
        let cs = to_clauses(&p("(A & B) | (C <-> D)"));
        let atoms = cs.atoms();
        assert!(atoms.contains(&"__aux0".to_string()));
        assert!(atoms.contains(&"__aux1".to_string()));
        assert!(!atoms.contains(&"__aux2".to_string()));
        // the first disjunct is defined first
        let first_def = cs.clauses.iter().find(|c| c.iter().any(|l| l.atom == "A")).unwrap();
        assert!(first_def.iter().any(|l| l.atom == "__aux0"));
        assert_eq!(to_clauses(&p("(A & B) | (C <-> D)")), cs);
    }

    #[test]
    fn eval_and_atoms() {
        let f = p("A -> B | C");
        assert_eq!(f.atoms(), vec!["A", "B", "C"]);
        assert!(f.eval(&|x| x == "C" || x == "A"));
        assert!(!f.eval(&|x| x == "A"));
    }

    #[test]
    fn atom_name_validation() {
        assert!(is_valid_atom_name("A_1"));
        assert!(is_valid_atom_name("_x"));
        assert!(!is_valid_atom_name("1A"));
        assert!(!is_valid_atom_name("__aux0"));
        assert!(!is_valid_atom_name("true"));
        assert!(!is_valid_atom_name(""));
    }
}
