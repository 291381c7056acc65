//! Binary command codes for the aligned configuration: capacity, allocation
//! and wildcard matching (full and prefix).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest code length handled by the counting helpers.
pub const MAX_CODE_LENGTH: usize = 62;

/// A binary code of length at least 2, most significant (first traversed) bit first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Code(Vec<bool>);

impl Code {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::EmptyCode);
        }
        if bits.len() < 2 {
            return Err(Error::CodeTooShort(bits.len()));
        }
        Ok(Code(bits))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Code {
        Code(self.0.iter().rev().copied().collect())
    }

    pub fn is_palindrome(&self) -> bool {
        self.0.iter().eq(self.0.iter().rev())
    }

    fn from_value(value: u64, length: usize) -> Code {
        Code((0..length).rev().map(|k| (value >> k) & 1 == 1).collect())
    }
}

impl FromStr for Code {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidSymbol(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Code::from_bits(bits)
    }
}

impl TryFrom<String> for Code {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Code> for String {
    fn from(c: Code) -> String {
        c.to_string()
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

pub fn is_palindrome(code: &Code) -> bool {
    code.is_palindrome()
}

/// Number of palindromic binary strings of length `length`.
pub fn palindrome_count(length: usize) -> u64 {
    1u64 << length.div_ceil(2)
}

/// Number of assignable commands for codes of length `length`.
///
/// Bidirectional commands consume a code and its reversal, and palindromes
/// are excluded because they read the same in both directions.
pub fn capacity(length: usize, bidirectional: bool) -> Result<u64> {
    if length < 2 {
        return Err(Error::CodeTooShort(length));
    }
    if length > MAX_CODE_LENGTH {
        return Err(Error::InvalidCodebook(format!(
            "code length {length} exceeds {MAX_CODE_LENGTH}"
        )));
    }
    let all = 1u64 << length;
    Ok(if bidirectional {
        (all - palindrome_count(length)) / 2
    } else {
        all
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectionSemantics {
    Unidirectional,
    BidirectionalPair,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "EntryRepr", into = "EntryRepr")]
pub struct CodebookEntry {
    pub code: Code,
    pub command: String,
    pub semantics: DirectionSemantics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRepr {
    bits: Code,
    command: String,
    #[serde(default)]
    bidirectional: bool,
}

impl From<EntryRepr> for CodebookEntry {
    fn from(r: EntryRepr) -> Self {
        CodebookEntry {
            code: r.bits,
            command: r.command,
            semantics: if r.bidirectional {
                DirectionSemantics::BidirectionalPair
            } else {
                DirectionSemantics::Unidirectional
            },
        }
    }
}

impl From<CodebookEntry> for EntryRepr {
    fn from(e: CodebookEntry) -> Self {
        EntryRepr {
            bits: e.code,
            command: e.command,
            bidirectional: e.semantics == DirectionSemantics::BidirectionalPair,
        }
    }
}

/// One symbol of a latched bit pattern; `Wildcard` marks an ambiguous bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    Wildcard,
}

impl Symbol {
    fn admits(self, bit: bool) -> bool {
        match self {
            Symbol::Zero => !bit,
            Symbol::One => bit,
            Symbol::Wildcard => true,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Wildcard => '?',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ObservedPattern(Vec<Symbol>);

impl ObservedPattern {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        ObservedPattern(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn has_wildcards(&self) -> bool {
        self.0.contains(&Symbol::Wildcard)
    }

    pub fn reversed(&self) -> ObservedPattern {
        ObservedPattern(self.0.iter().rev().copied().collect())
    }
}

impl From<&Code> for ObservedPattern {
    fn from(c: &Code) -> Self {
        ObservedPattern(
            c.bits()
                .iter()
                .map(|&b| if b { Symbol::One } else { Symbol::Zero })
                .collect(),
        )
    }
}

impl FromStr for ObservedPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Symbol::Zero),
                '1' => Ok(Symbol::One),
                '?' => Ok(Symbol::Wildcard),
                other => Err(Error::InvalidSymbol(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        if symbols.is_empty() {
            return Err(Error::EmptyObservation);
        }
        Ok(ObservedPattern(symbols))
    }
}

impl fmt::Display for ObservedPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MatchOutcome {
    Command {
        command: String,
        direction: Direction,
    },
    NoMatch,
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PrefixOutcome {
    Command {
        command: String,
        direction: Direction,
    },
    Undecided,
    NoMatch,
}

/// A fixed-length set of command codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodebookRepr", into = "CodebookRepr")]
pub struct Codebook {
    length: usize,
    prefix_free: bool,
    entries: Vec<CodebookEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookRepr {
    length: usize,
    #[serde(default)]
    prefix_free: bool,
    entries: Vec<CodebookEntry>,
}

impl TryFrom<CodebookRepr> for Codebook {
    type Error = Error;
    fn try_from(r: CodebookRepr) -> Result<Self> {
        Codebook::new(r.length, r.prefix_free, r.entries)
    }
}

impl From<Codebook> for CodebookRepr {
    fn from(c: Codebook) -> Self {
        CodebookRepr {
            length: c.length,
            prefix_free: c.prefix_free,
            entries: c.entries,
        }
    }
}

struct Candidate<'a> {
    bits: std::borrow::Cow<'a, [bool]>,
    command: &'a str,
    direction: Direction,
}

impl Codebook {
    pub fn new(length: usize, prefix_free: bool, entries: Vec<CodebookEntry>) -> Result<Self> {
        if length < 2 {
            return Err(Error::CodeTooShort(length));
        }
        if entries.is_empty() {
            return Err(Error::InvalidCodebook("no entries".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.code.len() != length {
                return Err(Error::InvalidCodebook(format!(
                    "code {} does not have length {length}",
                    e.code
                )));
            }
            if !seen.insert(&e.code) {
                return Err(Error::InvalidCodebook(format!("duplicate code {}", e.code)));
            }
        }
        for e in &entries {
            if e.semantics == DirectionSemantics::BidirectionalPair {
                if e.code.is_palindrome() {
                    return Err(Error::InvalidCodebook(format!(
                        "palindrome {} cannot carry direction",
                        e.code
                    )));
                }
                if seen.contains(&e.code.reversed()) {
                    return Err(Error::InvalidCodebook(format!(
                        "reversal of bidirectional code {} is assigned separately",
                        e.code
                    )));
                }
            }
        }
        if prefix_free {
            for a in &entries {
                for b in &entries {
                    if a.code.len() < b.code.len() && b.code.bits().starts_with(a.code.bits()) {
                        return Err(Error::InvalidCodebook(format!(
                            "{} is a prefix of {}",
                            a.code, b.code
                        )));
                    }
                }
            }
        }
        Ok(Codebook {
            length,
            prefix_free,
            entries,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn prefix_free(&self) -> bool {
        self.prefix_free
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    fn candidates(&self) -> impl Iterator<Item = Candidate<'_>> {
        self.entries.iter().flat_map(|e| {
            let forward = Candidate {
                bits: std::borrow::Cow::Borrowed(e.code.bits()),
                command: &e.command,
                direction: Direction::Forward,
            };
            let reverse =
                (e.semantics == DirectionSemantics::BidirectionalPair).then(|| Candidate {
                    bits: std::borrow::Cow::Owned(e.code.reversed().0),
                    command: &e.command,
                    direction: Direction::Reverse,
                });
            std::iter::once(forward).chain(reverse)
        })
    }

    fn consistent<'a>(
        &'a self,
        observed: &'a ObservedPattern,
    ) -> impl Iterator<Item = Candidate<'a>> + 'a {
        self.candidates().filter(move |c| {
            observed
                .symbols()
                .iter()
                .zip(c.bits.iter())
                .all(|(s, &b)| s.admits(b))
        })
    }

    /// Resolve a full-length observation. Wildcards match either bit.
    pub fn match_code(&self, observed: &ObservedPattern) -> Result<MatchOutcome> {
        if observed.len() != self.length {
            return Err(Error::LengthMismatch {
                expected: self.length,
                got: observed.len(),
            });
        }
        let mut hits = self.consistent(observed);
        Ok(match (hits.next(), hits.next()) {
            (None, _) => MatchOutcome::NoMatch,
            (Some(c), None) => MatchOutcome::Command {
                command: c.command.to_owned(),
                direction: c.direction,
            },
            (Some(_), Some(_)) => MatchOutcome::Ambiguous,
        })
    }

    /// Resolve an observation of at most `length` symbols as early as possible.
    pub fn match_prefix(&self, observed: &ObservedPattern) -> PrefixOutcome {
        if observed.len() > self.length {
            return PrefixOutcome::NoMatch;
        }
        let mut hits = self.consistent(observed);
        match (hits.next(), hits.next()) {
            (None, _) => PrefixOutcome::NoMatch,
            (Some(c), None) => PrefixOutcome::Command {
                command: c.command.to_owned(),
                direction: c.direction,
            },
            (Some(_), Some(_)) => PrefixOutcome::Undecided,
        }
    }
}

/// Smallest-length codebook holding `n_commands`, filled in lexicographic order.
///
/// For bidirectional books each pair is represented by its lexicographically
/// smaller member. All codes share one length, so the result is prefix-free
/// whether or not `prefix_free` is requested.
pub fn allocate(n_commands: usize, bidirectional: bool, prefix_free: bool) -> Result<Codebook> {
    if n_commands == 0 {
        return Err(Error::InvalidCodebook(
            "at least one command is required".into(),
        ));
    }
    let mut length = 2;
    while capacity(length, bidirectional)? < n_commands as u64 {
        length += 1;
    }
    let semantics = if bidirectional {
        DirectionSemantics::BidirectionalPair
    } else {
        DirectionSemantics::Unidirectional
    };
    let entries = (0..1u64 << length)
        .map(|v| Code::from_value(v, length))
        .filter(|c| !bidirectional || (!c.is_palindrome() && *c < c.reversed()))
        .take(n_commands)
        .enumerate()
        .map(|(i, code)| CodebookEntry {
            code,
            command: format!("cmd{i}"),
            semantics,
        })
        .collect();
    Codebook::new(length, prefix_free, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_palindromes(length: usize) -> u64 {
        (0..1u64 << length)
            .filter(|&v| Code::from_value(v, length).is_palindrome())
            .count() as u64
    }

    fn brute_pairs(length: usize) -> u64 {
        let mut seen = std::collections::HashSet::new();
        let mut pairs = 0;
        for v in 0..1u64 << length {
            let c = Code::from_value(v, length);
            if c.is_palindrome() || seen.contains(&c) {
                continue;
            }
            seen.insert(c.reversed());
            seen.insert(c);
            pairs += 1;
        }
        pairs
    }

    fn book(entries: &[(&str, &str, bool)]) -> Codebook {
        let entries: Vec<CodebookEntry> = entries
            .iter()
            .map(|&(bits, cmd, bidi)| CodebookEntry {
                code: bits.parse().unwrap(),
                command: cmd.into(),
                semantics: if bidi {
                    DirectionSemantics::BidirectionalPair
                } else {
                    DirectionSemantics::Unidirectional
                },
            })
            .collect();
        Codebook::new(entries[0].code.len(), false, entries).unwrap()
    }

    fn obs(s: &str) -> ObservedPattern {
        s.parse().unwrap()
    }

    fn cmd(c: &str, d: Direction) -> MatchOutcome {
        MatchOutcome::Command {
            command: c.into(),
            direction: d,
        }
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(6, false).unwrap(), 64);
        assert_eq!(capacity(2, true).unwrap(), 1);
        assert_eq!(capacity(6, true).unwrap(), 28);
        assert!(matches!(capacity(1, false), Err(Error::CodeTooShort(1))));
    }

    #[test]
    fn palindrome_formula_matches_enumeration() {
        for length in 2..=16 {
            assert_eq!(
                palindrome_count(length),
                brute_palindromes(length),
                "L={length}"
            );
            assert_eq!(
                capacity(length, true).unwrap(),
                brute_pairs(length),
                "L={length}"
            );
        }
    }

    #[test]
    fn palindrome_examples() {
        assert!(is_palindrome(&"0110".parse().unwrap()));
        assert!(!is_palindrome(&"100011".parse().unwrap()));
        assert!(is_palindrome(&"11".parse().unwrap()));
    }

    #[test]
    fn allocation_examples() {
        let b = allocate(8, false, false).unwrap();
        assert_eq!(b.length(), 3);
        let codes: Vec<String> = b.entries().iter().map(|e| e.code.to_string()).collect();
        assert_eq!(
            codes,
            ["000", "001", "010", "011", "100", "101", "110", "111"]
        );

        let b = allocate(2, true, false).unwrap();
        assert_eq!(b.length(), 3);
        let codes: Vec<String> = b.entries().iter().map(|e| e.code.to_string()).collect();
        assert_eq!(codes, ["001", "011"]);

        let b = allocate(3, false, true).unwrap();
        assert_eq!(b.length(), 2);
        let codes: Vec<String> = b.entries().iter().map(|e| e.code.to_string()).collect();
        assert_eq!(codes, ["00", "01", "10"]);
        assert!(b.prefix_free());

        assert_eq!(allocate(5, true, false).unwrap().length(), 4);
    }

    #[test]
    fn allocation_is_self_consistent() {
        for n in 1..40 {
            for bidi in [false, true] {
                let b = allocate(n, bidi, false).unwrap();
                assert_eq!(b.entries().len(), n);
                for e in b.entries() {
                    assert_eq!(
                        b.match_code(&(&e.code).into()).unwrap(),
                        cmd(&e.command, Direction::Forward)
                    );
                    if bidi {
                        assert!(!e.code.is_palindrome());
                        assert_eq!(
                            b.match_code(&(&e.code.reversed()).into()).unwrap(),
                            cmd(&e.command, Direction::Reverse)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn full_match_examples() {
        let b = book(&[("100011", "A", false), ("010101", "B", false)]);
        assert_eq!(
            b.match_code(&obs("10001?")).unwrap(),
            cmd("A", Direction::Forward)
        );
        assert_eq!(
            b.match_code(&obs("??????")).unwrap(),
            MatchOutcome::Ambiguous
        );
        assert_eq!(b.match_code(&obs("111111")).unwrap(), MatchOutcome::NoMatch);
        assert!(matches!(
            b.match_code(&obs("1000")),
            Err(Error::LengthMismatch {
                expected: 6,
                got: 4
            })
        ));

        let b = book(&[("100011", "A", true)]);
        assert_eq!(
            b.match_code(&obs("110001")).unwrap(),
            cmd("A", Direction::Reverse)
        );
    }

    #[test]
    fn prefix_match_examples() {
        let b = book(&[("110101", "X", false), ("001010", "Y", false)]);
        assert_eq!(
            b.match_prefix(&obs("11")),
            PrefixOutcome::Command {
                command: "X".into(),
                direction: Direction::Forward
            }
        );
        let b = book(&[("100011", "A", false), ("101010", "B", false)]);
        assert_eq!(b.match_prefix(&obs("1")), PrefixOutcome::Undecided);
        let b = book(&[("100011", "A", false), ("110001", "B", false)]);
        assert_eq!(b.match_prefix(&obs("00")), PrefixOutcome::NoMatch);
    }

    #[test]
    fn rejects_invalid_codebooks() {
        let entry = |bits: &str, bidi| CodebookEntry {
            code: bits.parse().unwrap(),
            command: "c".into(),
            semantics: if bidi {
                DirectionSemantics::BidirectionalPair
            } else {
                DirectionSemantics::Unidirectional
            },
        };
        assert!(Codebook::new(4, false, vec![entry("0110", true)]).is_err());
        assert!(Codebook::new(3, false, vec![entry("001", true), entry("100", false)]).is_err());
        assert!(Codebook::new(3, false, vec![entry("001", false), entry("001", false)]).is_err());
        assert!(Codebook::new(3, false, vec![entry("0011", false)]).is_err());
        // palindromes are allowed for one-way commands
        assert!(Codebook::new(4, false, vec![entry("0110", false)]).is_ok());
    }

    #[test]
    fn json_format() {
        let b = allocate(2, true, true).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(
            json,
            r#"{"length":3,"prefix_free":true,"entries":[{"bits":"001","command":"cmd0","bidirectional":true},{"bits":"011","command":"cmd1","bidirectional":true}]}"#
        );
        assert_eq!(serde_json::from_str::<Codebook>(&json).unwrap(), b);
        assert!(serde_json::from_str::<Codebook>(
            r#"{"length":2,"entries":[{"bits":"0a","command":"x"}]}"#
        )
        .is_err());
    }
}
