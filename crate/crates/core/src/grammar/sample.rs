//! Random strings from a grammar's language.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::gbnf::{Atom, Grammar, Item, Sequence};

#[derive(Debug, Clone)]
pub struct SampleOptions {
    /// Upper bound for unbounded repetitions (`*`, `+`, `{m,}`).
    pub max_repeat: usize,
    /// Beyond this derivation depth, repetitions take their minimum and
    /// alternatives their first branch.
    pub max_depth: usize,
    /// Fixed expansions for named rules. Callers must only supply strings in
    /// the rule's language.
    pub overrides: HashMap<String, Vec<String>>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { max_repeat: 4, max_depth: 32, overrides: HashMap::new() }
    }
}

/// Candidate characters for negated classes and `.`.
const POOL: &[char] = &[
    'a', 'b', 'k', 'z', 'A', 'Q', '0', '7', ' ', '-', '_', '.', ',', ':', '{', '}', '[', ']', '\'', '/', 'é', 'ß',
    '中', '😀', '"', '\\', '\n', '\u{1}',
];

pub fn sample<R: Rng + ?Sized>(grammar: &Grammar, root: &str, opts: &SampleOptions, rng: &mut R) -> Option<String> {
    let mut out = String::new();
    let alts = grammar.rule(root)?;
    expand_alts(grammar, alts, opts, rng, 0, &mut out)?;
    Some(out)
}

fn expand_alts<R: Rng + ?Sized>(
    g: &Grammar,
    alts: &[Sequence],
    opts: &SampleOptions,
    rng: &mut R,
    depth: usize,
    out: &mut String,
) -> Option<()> {
    let seq = if depth >= opts.max_depth { alts.first()? } else { alts.choose(rng)? };
    for item in seq {
        expand_item(g, item, opts, rng, depth, out)?;
    }
    Some(())
}

fn expand_item<R: Rng + ?Sized>(
    g: &Grammar,
    item: &Item,
    opts: &SampleOptions,
    rng: &mut R,
    depth: usize,
    out: &mut String,
) -> Option<()> {
    let min = item.repeat.min;
    let max = item.repeat.max.unwrap_or(min.max(opts.max_repeat)).max(min);
    let count = if depth >= opts.max_depth { min } else { rng.random_range(min..=max) };
    for _ in 0..count {
        expand_atom(g, &item.atom, opts, rng, depth + 1, out)?;
    }
    Some(())
}

fn expand_atom<R: Rng + ?Sized>(
    g: &Grammar,
    atom: &Atom,
    opts: &SampleOptions,
    rng: &mut R,
    depth: usize,
    out: &mut String,
) -> Option<()> {
    match atom {
        Atom::Literal(chars) => out.extend(chars),
        Atom::Class { negated: false, ranges } => {
            let (lo, hi) = *ranges.choose(rng)?;
            // resample until we land on a scalar value (skips surrogates)
            loop {
                if let Some(c) = char::from_u32(rng.random_range(lo as u32..=hi as u32)) {
                    out.push(c);
                    break;
                }
            }
        }
        Atom::Class { negated: true, .. } | Atom::Any => {
            let allowed: Vec<char> = POOL.iter().copied().filter(|c| atom.matches_char(*c)).collect();
            out.push(*allowed.choose(rng)?);
        }
        Atom::Rule(name) => {
            if let Some(fixed) = opts.overrides.get(name) {
                out.push_str(fixed.choose(rng)?);
            } else {
                expand_alts(g, g.rule(name)?, opts, rng, depth, out)?;
            }
        }
        Atom::Group(alts) => expand_alts(g, alts, opts, rng, depth, out)?,
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grammar::recognize::Recognizer;

    #[test]
    fn samples_are_in_the_language() {
        let g = Grammar::parse("root ::= \"<\" item (\",\" item)* \">\"\nitem ::= [a-c]{1,3} | [^<>,]+ | \"q\"?\n")
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let s = sample(&g, "root", &SampleOptions::default(), &mut rng).unwrap();
            assert!(Recognizer::new(&g, &s).accepts("root"), "{s:?}");
        }
    }

    #[test]
    fn overrides_replace_rule_expansion() {
        let g = Grammar::parse("root ::= id \"!\"\nid ::= [a-z]+\n").unwrap();
        let opts = SampleOptions {
            overrides: HashMap::from([("id".to_string(), vec!["x".to_string()])]),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample(&g, "root", &opts, &mut rng).unwrap(), "x!");
    }
}
