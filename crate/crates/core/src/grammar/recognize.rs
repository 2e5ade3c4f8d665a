//! Membership test for parsed GBNF grammars.
//!
//! Each construct is evaluated to the set of input positions where a match
//! starting at a given position can end; rule results are memoized per
//! start position. Left-recursive rules never match (the emitters do not
//! produce any).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use super::gbnf::{Atom, Grammar, Item, Sequence};

type Ends = Rc<BTreeSet<usize>>;

pub struct Recognizer<'g> {
    grammar: &'g Grammar,
    text: Vec<char>,
    memo: HashMap<(&'g str, usize), Ends>,
    active: HashSet<(&'g str, usize)>,
}

impl<'g> Recognizer<'g> {
    pub fn new(grammar: &'g Grammar, text: &str) -> Self {
        Self { grammar, text: text.chars().collect(), memo: HashMap::new(), active: HashSet::new() }
    }

    /// True iff the whole text derives from `root`.
    pub fn accepts(mut self, root: &str) -> bool {
        let Some((name, _)) = self.grammar.rules.get_key_value(root) else {
            return false;
        };
        let ends = self.rule_ends(name.as_str(), 0);
        ends.contains(&self.text.len())
    }

    fn rule_ends(&mut self, name: &'g str, start: usize) -> Ends {
        if let Some(hit) = self.memo.get(&(name, start)) {
            return hit.clone();
        }
        if !self.active.insert((name, start)) {
            return Rc::new(BTreeSet::new());
        }
        let alts: &'g [Sequence] = &self.grammar.rules[name];
        let ends = Rc::new(self.alternatives_ends(alts, start));
        self.active.remove(&(name, start));
        self.memo.insert((name, start), ends.clone());
        ends
    }

    fn alternatives_ends(&mut self, alts: &'g [Sequence], start: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for seq in alts {
            out.extend(self.sequence_ends(seq, start));
        }
        out
    }

    fn sequence_ends(&mut self, seq: &'g [Item], start: usize) -> BTreeSet<usize> {
        let mut positions = BTreeSet::from([start]);
        for item in seq {
            let mut next = BTreeSet::new();
            for p in positions {
                next.extend(self.item_ends(item, p));
            }
            if next.is_empty() {
                return next;
            }
            positions = next;
        }
        positions
    }

    fn item_ends(&mut self, item: &'g Item, start: usize) -> BTreeSet<usize> {
        let rep = item.repeat;
        let mut result = BTreeSet::new();
        if rep.min == 0 {
            result.insert(start);
        }
        let mut frontier = BTreeSet::from([start]);
        let mut count = 0;
        while !frontier.is_empty() {
            count += 1;
            if rep.max.is_some_and(|m| count > m) {
                break;
            }
            let mut next = BTreeSet::new();
            for p in &frontier {
                next.extend(self.atom_ends(&item.atom, *p).iter().copied());
            }
            if count >= rep.min {
                // positions already reached with fewer repetitions have at
                // least as much budget left, so only new ones need expanding
                frontier = next.difference(&result).copied().collect();
                result.extend(next);
            } else {
                frontier = next;
            }
        }
        result
    }

    fn atom_ends(&mut self, atom: &'g Atom, start: usize) -> Ends {
        match atom {
            Atom::Literal(chars) => {
                let end = start + chars.len();
                if end <= self.text.len() && self.text[start..end] == chars[..] {
                    Rc::new(BTreeSet::from([end]))
                } else {
                    Rc::new(BTreeSet::new())
                }
            }
            Atom::Class { .. } | Atom::Any => match self.text.get(start) {
                Some(c) if atom.matches_char(*c) => Rc::new(BTreeSet::from([start + 1])),
                _ => Rc::new(BTreeSet::new()),
            },
            Atom::Rule(name) => self.rule_ends(name.as_str(), start),
            Atom::Group(alts) => Rc::new(self.alternatives_ends(alts, start)),
        }
    }
}
