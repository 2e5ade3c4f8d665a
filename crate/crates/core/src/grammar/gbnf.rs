//! Parser for the GBNF subset our emitters produce: `name ::= alternation`
//! rules, quoted literals, character classes (optionally negated), `.`,
//! parenthesised groups and the `? * + {m} {m,} {m,n}` repetition operators.
//! A newline ends a rule unless it appears inside parentheses; `#` starts a
//! comment.

use std::collections::BTreeMap;

use super::GrammarError;

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Literal(Vec<char>),
    Class { negated: bool, ranges: Vec<(char, char)> },
    Any,
    Rule(String),
    Group(Vec<Sequence>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repeat {
    pub min: usize,
    pub max: Option<usize>,
}

impl Repeat {
    pub const ONE: Repeat = Repeat { min: 1, max: Some(1) };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub atom: Atom,
    pub repeat: Repeat,
}

pub type Sequence = Vec<Item>;

/// Parsed grammar: rule name → alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub rules: BTreeMap<String, Vec<Sequence>>,
}

impl Atom {
    pub fn matches_char(&self, c: char) -> bool {
        match self {
            Atom::Class { negated, ranges } => ranges.iter().any(|(lo, hi)| (*lo..=*hi).contains(&c)) != *negated,
            Atom::Any => true,
            _ => false,
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> GrammarError {
        GrammarError::Parse { line: self.line, message: msg.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    /// Skips spaces, tabs, comments and (when `newlines`) line breaks.
    fn skip_space(&mut self, newlines: bool) {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' => {
                    self.bump();
                }
                '\r' | '\n' if newlines => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn name(&mut self) -> Result<String, GrammarError> {
        let start = self.pos;
        while self.peek().is_some_and(is_word) {
            self.bump();
        }
        if start == self.pos {
            return Err(self.err("expected rule name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn hex_escape(&mut self, digits: usize) -> Result<char, GrammarError> {
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self.bump().and_then(|c| c.to_digit(16)).ok_or_else(|| self.err("bad hex escape"))?;
            value = value * 16 + d;
        }
        char::from_u32(value).ok_or_else(|| self.err("escape is not a scalar value"))
    }

    fn escaped_char(&mut self) -> Result<char, GrammarError> {
        match self.bump() {
            Some('\\') => match self.bump() {
                Some('n') => Ok('\n'),
                Some('r') => Ok('\r'),
                Some('t') => Ok('\t'),
                Some('x') => self.hex_escape(2),
                Some('u') => self.hex_escape(4),
                Some('U') => self.hex_escape(8),
                Some(c @ ('\\' | '"' | '[' | ']' | '-' | '^')) => Ok(c),
                other => Err(self.err(format!("unknown escape {other:?}"))),
            },
            Some(c) => Ok(c),
            None => Err(self.err("unexpected end of grammar")),
        }
    }

    fn alternation(&mut self, nested: bool) -> Result<Vec<Sequence>, GrammarError> {
        let mut alts = vec![self.sequence(nested)?];
        while self.peek() == Some('|') {
            self.bump();
            self.skip_space(true);
            alts.push(self.sequence(nested)?);
        }
        Ok(alts)
    }

    fn sequence(&mut self, nested: bool) -> Result<Sequence, GrammarError> {
        let mut seq = Vec::new();
        loop {
            self.skip_space(nested);
            let atom = match self.peek() {
                None | Some('|') | Some(')') | Some('\n') | Some('\r') => break,
                Some('"') => {
                    self.bump();
                    let mut lit = Vec::new();
                    loop {
                        match self.peek() {
                            Some('"') => {
                                self.bump();
                                break;
                            }
                            Some(_) => lit.push(self.escaped_char()?),
                            None => return Err(self.err("unterminated literal")),
                        }
                    }
                    Atom::Literal(lit)
                }
                Some('[') => {
                    self.bump();
                    let negated = if self.peek() == Some('^') {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    let mut ranges = Vec::new();
                    loop {
                        match self.peek() {
                            Some(']') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                let lo = self.escaped_char()?;
                                let hi = if self.peek() == Some('-') && self.chars.get(self.pos + 1) != Some(&']') {
                                    self.bump();
                                    self.escaped_char()?
                                } else {
                                    lo
                                };
                                if hi < lo {
                                    return Err(self.err("inverted character range"));
                                }
                                ranges.push((lo, hi));
                            }
                            None => return Err(self.err("unterminated character class")),
                        }
                    }
                    Atom::Class { negated, ranges }
                }
                Some('.') => {
                    self.bump();
                    Atom::Any
                }
                Some('(') => {
                    self.bump();
                    self.skip_space(true);
                    let alts = self.alternation(true)?;
                    self.skip_space(true);
                    if self.bump() != Some(')') {
                        return Err(self.err("expected `)`"));
                    }
                    Atom::Group(alts)
                }
                Some(c) if is_word(c) => {
                    let name = self.name()?;
                    self.skip_space(false);
                    if self.chars[self.pos..].starts_with(&[':', ':', '=']) {
                        return Err(self.err(format!("missing newline before rule `{name}`")));
                    }
                    Atom::Rule(name)
                }
                Some(c) => return Err(self.err(format!("unexpected `{c}`"))),
            };
            let repeat = self.repeat()?;
            seq.push(Item { atom, repeat });
        }
        Ok(seq)
    }

    fn number(&mut self) -> Result<usize, GrammarError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err("expected a number"))
    }

    fn repeat(&mut self) -> Result<Repeat, GrammarError> {
        let rep = match self.peek() {
            Some('?') => Repeat { min: 0, max: Some(1) },
            Some('*') => Repeat { min: 0, max: None },
            Some('+') => Repeat { min: 1, max: None },
            Some('{') => {
                self.bump();
                self.skip_space(false);
                let min = self.number()?;
                self.skip_space(false);
                let max = if self.peek() == Some(',') {
                    self.bump();
                    self.skip_space(false);
                    if self.peek() == Some('}') {
                        None
                    } else {
                        Some(self.number()?)
                    }
                } else {
                    Some(min)
                };
                self.skip_space(false);
                if self.peek() != Some('}') {
                    return Err(self.err("expected `}`"));
                }
                if max.is_some_and(|m| m < min) {
                    return Err(self.err("repetition max below min"));
                }
                Repeat { min, max }
            }
            _ => return Ok(Repeat::ONE),
        };
        self.bump();
        Ok(rep)
    }
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut p = Parser { chars: text.chars().collect(), pos: 0, line: 1 };
        let mut rules: BTreeMap<String, Vec<Sequence>> = BTreeMap::new();
        loop {
            p.skip_space(true);
            if p.peek().is_none() {
                break;
            }
            let name = p.name()?;
            p.skip_space(false);
            if !p.chars[p.pos..].starts_with(&[':', ':', '=']) {
                return Err(p.err(format!("expected `::=` after `{name}`")));
            }
            p.pos += 3;
            p.skip_space(false);
            let alts = p.alternation(false)?;
            if rules.insert(name.clone(), alts).is_some() {
                return Err(p.err(format!("rule `{name}` defined twice")));
            }
        }
        let grammar = Grammar { rules };
        grammar.check_references()?;
        Ok(grammar)
    }

    fn check_references(&self) -> Result<(), GrammarError> {
        fn walk(seqs: &[Sequence], rules: &BTreeMap<String, Vec<Sequence>>) -> Result<(), GrammarError> {
            for item in seqs.iter().flatten() {
                match &item.atom {
                    Atom::Rule(name) if !rules.contains_key(name) => {
                        return Err(GrammarError::UndefinedRule(name.clone()))
                    }
                    Atom::Group(inner) => walk(inner, rules)?,
                    _ => {}
                }
            }
            Ok(())
        }
        for alts in self.rules.values() {
            walk(alts, &self.rules)?;
        }
        Ok(())
    }

    pub fn rule(&self, name: &str) -> Option<&[Sequence]> {
        self.rules.get(name).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_operators_and_escapes() {
        let g = Grammar::parse(
            "root ::= \"a\\\"b\" [^\"\\\\\\x00-\\x1F] (x | \"y\")* x{2,3} # trailing\nx ::= [a-z]+ .?\n",
        )
        .unwrap();
        let root = g.rule("root").unwrap();
        assert_eq!(root.len(), 1);
        assert_eq!(root[0][0].atom, Atom::Literal(vec!['a', '"', 'b']));
        assert_eq!(
            root[0][1].atom,
            Atom::Class { negated: true, ranges: vec![('"', '"'), ('\\', '\\'), ('\0', '\u{1f}')] }
        );
        assert_eq!(root[0][2].repeat, Repeat { min: 0, max: None });
        assert_eq!(root[0][3].repeat, Repeat { min: 2, max: Some(3) });
        assert_eq!(g.rule("x").unwrap()[0][1].repeat, Repeat { min: 0, max: Some(1) });
    }

    #[test]
    fn groups_may_span_lines() {
        let g = Grammar::parse("root ::= (\n  \"a\"\n  | \"b\"\n)\n").unwrap();
        match &g.rule("root").unwrap()[0][0].atom {
            Atom::Group(alts) => assert_eq!(alts.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undefined_rule_is_an_error() {
        assert_eq!(Grammar::parse("root ::= missing\n"), Err(GrammarError::UndefinedRule("missing".into())));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(Grammar::parse("root = \"a\""), Err(GrammarError::Parse { .. })));
        assert!(matches!(Grammar::parse("root ::= \"a"), Err(GrammarError::Parse { .. })));
        assert!(matches!(Grammar::parse("root ::= (\"a\""), Err(GrammarError::Parse { .. })));
        assert!(matches!(Grammar::parse("root ::= [z-a]"), Err(GrammarError::Parse { .. })));
        assert!(matches!(Grammar::parse("root ::= \"a\"\nroot ::= \"b\""), Err(GrammarError::Parse { .. })));
    }
}
