//! Character and length-constrained BPE tokenization with whitespace kept
//! in-band as a marker symbol, plus the length regulator that repeats each
//! token once per character it covers.
//!
//! BPE training is the classic greedy loop: count adjacent pairs over the
//! whole corpus, merge the most frequent pair whose concatenation fits the
//! length limit, repeat. Lines are not split at spaces, so pairs such as
//! `("_", "t")` or `("e", "_")` compete with ordinary letter pairs. Ties go to
//! the lexicographically smallest `(left, right)` pair.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_SPACE_MARKER: char = '_';
/// Pairs seen fewer times than this are never merged.
pub const MIN_MERGE_FREQUENCY: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum TokenizeError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocab size {requested} is smaller than the base alphabet; at least {required} required")]
    VocabTooSmall { requested: usize, required: usize },
    #[error("max token length must be at least 1")]
    ZeroMaxLength,
    #[error("codepoint {codepoint:?} (U+{:04X}) at offset {offset} is not in the vocabulary", *.codepoint as u32)]
    OutOfVocabulary { codepoint: char, offset: usize },
    #[error("text contains the space marker {marker:?} at offset {offset}")]
    MarkerInText { marker: char, offset: usize },
    #[error("operation needs a {expected:?} model, got {found:?}")]
    WrongKind {
        expected: TokenizerKind,
        found: TokenizerKind,
    },
    #[error("token sequence is already length-regulated")]
    AlreadyRegulated,
    #[error("invalid model at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TokenizeError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Char,
    Bpe,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub regulated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Total characters covered, the marker counting as one.
    pub fn char_mass(&self) -> usize {
        self.tokens.iter().map(|t| t.chars().count()).sum()
    }

    /// Concatenates the tokens and turns markers back into spaces.
    pub fn decode(&self, marker: char) -> Result<String> {
        if self.regulated {
            return Err(TokenizeError::AlreadyRegulated);
        }
        Ok(self
            .tokens
            .iter()
            .flat_map(|t| t.chars())
            .map(|c| if c == marker { ' ' } else { c })
            .collect())
    }

    pub fn joined(&self, sep: &str) -> String {
        self.tokens.join(sep)
    }
}

fn to_symbols(s: &str, marker: char) -> Vec<char> {
    s.chars().map(|c| if c == ' ' { marker } else { c }).collect()
}

/// One token per codepoint, spaces written as `_`.
pub fn char_tokenize(s: &str) -> TokenSequence {
    TokenSequence {
        tokens: to_symbols(s, DEFAULT_SPACE_MARKER)
            .into_iter()
            .map(String::from)
            .collect(),
        regulated: false,
    }
}

/// Repeats every token as many times as it has characters.
pub fn length_regulate(ts: &TokenSequence) -> Result<TokenSequence> {
    if ts.regulated {
        return Err(TokenizeError::AlreadyRegulated);
    }
    let mut tokens = Vec::with_capacity(ts.char_mass());
    for t in &ts.tokens {
        for _ in 0..t.chars().count() {
            tokens.push(t.clone());
        }
    }
    Ok(TokenSequence {
        tokens,
        regulated: true,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizerModel {
    kind: TokenizerKind,
    vocab: Vec<String>,
    merges: Vec<(String, String)>,
    max_token_len: Option<usize>,
    space_marker: char,
    base_len: usize,
}

#[derive(Serialize)]
struct ModelFile<'a> {
    kind: TokenizerKind,
    vocab: &'a [String],
    merges: &'a [(String, String)],
    max_token_len: Option<usize>,
    space_marker: String,
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> TokenizeError {
    TokenizeError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl TokenizerModel {
    /// Builds a model and checks every invariant: single-character base
    /// symbols first, token lengths within the limit, and merges that replay
    /// to exactly the remaining vocabulary.
    pub fn new(
        kind: TokenizerKind,
        vocab: Vec<String>,
        merges: Vec<(String, String)>,
        max_token_len: Option<usize>,
        space_marker: char,
    ) -> Result<Self> {
        if max_token_len == Some(0) {
            return Err(schema("/max_token_len", "must be >= 1 or null"));
        }
        if kind == TokenizerKind::Char {
            if !merges.is_empty() {
                return Err(schema("/merges", "char models have no merges"));
            }
            if max_token_len != Some(1) {
                return Err(schema("/max_token_len", "char models require 1"));
            }
        }
        let limit = max_token_len.unwrap_or(usize::MAX);
        for (i, tok) in vocab.iter().enumerate() {
            let n = tok.chars().count();
            if n == 0 {
                return Err(schema(format!("/vocab/{i}"), "empty token"));
            }
            if n > limit {
                return Err(schema(
                    format!("/vocab/{i}"),
                    format!("token {tok:?} has length {n} > max_token_len {limit}"),
                ));
            }
        }
        let base_len = vocab.iter().take_while(|t| t.chars().count() == 1).count();
        let mut seen: HashSet<&str> = HashSet::new();
        for (i, tok) in vocab[..base_len].iter().enumerate() {
            if !seen.insert(tok) {
                return Err(schema(format!("/vocab/{i}"), format!("duplicate token {tok:?}")));
            }
        }
        let mut next = base_len;
        for (i, (left, right)) in merges.iter().enumerate() {
            if !seen.contains(left.as_str()) || !seen.contains(right.as_str()) {
                return Err(schema(
                    format!("/merges/{i}"),
                    "merges do not regenerate vocab (operand not yet in vocabulary)",
                ));
            }
            let merged = format!("{left}{right}");
            if seen.contains(merged.as_str()) {
                continue;
            }
            if vocab.get(next) != Some(&merged) {
                return Err(schema(
                    format!("/vocab/{next}"),
                    format!("merges do not regenerate vocab (expected {merged:?})"),
                ));
            }
            seen.insert(&vocab[next]);
            next += 1;
        }
        if next != vocab.len() {
            return Err(schema(
                format!("/vocab/{next}"),
                "merges do not regenerate vocab (token not produced by any merge)",
            ));
        }
        Ok(Self {
            kind,
            vocab,
            merges,
            max_token_len,
            space_marker,
            base_len,
        })
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn max_token_len(&self) -> Option<usize> {
        self.max_token_len
    }

    pub fn space_marker(&self) -> char {
        self.space_marker
    }

    pub fn base_symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.vocab[..self.base_len]
            .iter()
            .map(|t| t.chars().next().unwrap())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            kind: self.kind,
            vocab: &self.vocab,
            merges: &self.merges,
            max_token_len: self.max_token_len,
            space_marker: self.space_marker.to_string(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let obj = doc.as_object().ok_or_else(|| schema("", "expected an object"))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| schema(format!("/{name}"), "missing field"))
        };
        let kind: TokenizerKind = serde_json::from_value(field("kind")?.clone())
            .map_err(|e| schema("/kind", e.to_string()))?;
        let vocab = field("vocab")?
            .as_array()
            .ok_or_else(|| schema("/vocab", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("/vocab/{i}"), "expected a string"))
            })
            .collect::<Result<Vec<_>>>()?;
        let merges = field("merges")?
            .as_array()
            .ok_or_else(|| schema("/merges", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, v)| match v.as_array().map(Vec::as_slice) {
                Some([Value::String(l), Value::String(r)]) => Ok((l.clone(), r.clone())),
                _ => Err(schema(format!("/merges/{i}"), "expected a [left, right] string pair")),
            })
            .collect::<Result<Vec<_>>>()?;
        let max_token_len = match field("max_token_len")? {
            Value::Null => None,
            v => Some(
                v.as_u64()
                    .ok_or_else(|| schema("/max_token_len", "expected a positive integer or null"))?
                    as usize,
            ),
        };
        let marker_str = field("space_marker")?
            .as_str()
            .ok_or_else(|| schema("/space_marker", "expected a string"))?;
        let mut chars = marker_str.chars();
        let space_marker = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => return Err(schema("/space_marker", "expected exactly one character")),
        };
        Self::new(kind, vocab, merges, max_token_len, space_marker)
    }

    /// Maps text to base symbols, rejecting codepoints outside the alphabet.
    fn symbols(&self, s: &str) -> Result<Vec<char>> {
        let alphabet: HashSet<char> = self.base_symbols().collect();
        s.chars()
            .enumerate()
            .map(|(offset, c)| {
                if c == self.space_marker {
                    return Err(TokenizeError::MarkerInText {
                        marker: c,
                        offset,
                    });
                }
                let sym = if c == ' ' { self.space_marker } else { c };
                if alphabet.contains(&sym) {
                    Ok(sym)
                } else {
                    Err(TokenizeError::OutOfVocabulary {
                        codepoint: c,
                        offset,
                    })
                }
            })
            .collect()
    }

    /// Dispatches on the model kind.
    pub fn encode(&self, s: &str) -> Result<TokenSequence> {
        match self.kind {
            TokenizerKind::Char => Ok(TokenSequence {
                tokens: self.symbols(s)?.into_iter().map(String::from).collect(),
                regulated: false,
            }),
            TokenizerKind::Bpe => bpe_encode(s, self),
        }
    }

    pub fn decode(&self, ts: &TokenSequence) -> Result<String> {
        ts.decode(self.space_marker)
    }
}

/// Builds a character model whose vocabulary is the sorted corpus alphabet.
pub fn train_char<'a>(corpus: impl IntoIterator<Item = &'a str>) -> Result<TokenizerModel> {
    let alphabet = alphabet(corpus, DEFAULT_SPACE_MARKER)?;
    TokenizerModel::new(
        TokenizerKind::Char,
        alphabet.into_iter().map(String::from).collect(),
        Vec::new(),
        Some(1),
        DEFAULT_SPACE_MARKER,
    )
}

fn alphabet<'a>(corpus: impl IntoIterator<Item = &'a str>, marker: char) -> Result<Vec<char>> {
    let mut set = std::collections::BTreeSet::new();
    let mut any = false;
    for line in corpus {
        any = true;
        for (offset, c) in line.chars().enumerate() {
            if c == marker {
                return Err(TokenizeError::MarkerInText { marker, offset });
            }
            set.insert(if c == ' ' { marker } else { c });
        }
    }
    if !any || set.is_empty() {
        return Err(TokenizeError::EmptyCorpus);
    }
    Ok(set.into_iter().collect())
}

/// Adjacent symbol-pair counts over the raw corpus (spaces as markers).
pub fn pair_counts<'a>(corpus: impl IntoIterator<Item = &'a str>) -> BTreeMap<(String, String), u64> {
    let mut counts = BTreeMap::new();
    for line in corpus {
        let syms = to_symbols(line, DEFAULT_SPACE_MARKER);
        for w in syms.windows(2) {
            *counts.entry((w[0].to_string(), w[1].to_string())).or_insert(0) += 1;
        }
    }
    counts
}

/// Trains a BPE model up to `vocab_size` tokens (base symbols included)
/// without ever creating a token longer than `max_token_len` characters.
pub fn train_bpe<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    vocab_size: usize,
    max_token_len: Option<usize>,
) -> Result<TokenizerModel> {
    if max_token_len == Some(0) {
        return Err(TokenizeError::ZeroMaxLength);
    }
    let marker = DEFAULT_SPACE_MARKER;
    let lines: Vec<&str> = corpus.into_iter().collect();
    let base = alphabet(lines.iter().copied(), marker)?;
    if vocab_size < base.len() {
        return Err(TokenizeError::VocabTooSmall {
            requested: vocab_size,
            required: base.len(),
        });
    }
    let limit = max_token_len.unwrap_or(usize::MAX);

    let mut vocab: Vec<String> = base.iter().map(|c| c.to_string()).collect();
    let mut lengths: Vec<usize> = vec![1; vocab.len()];
    let mut index: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();

    // identical lines are counted once with a multiplicity
    let mut multiset: HashMap<Vec<u32>, u64> = HashMap::new();
    for line in &lines {
        let ids: Vec<u32> = to_symbols(line, marker)
            .into_iter()
            .map(|c| index[&c.to_string()])
            .collect();
        if ids.len() >= 2 {
            *multiset.entry(ids).or_insert(0) += 1;
        }
    }
    let mut seqs: Vec<(Vec<u32>, u64)> = multiset.into_iter().collect();

    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (seq, mult) in &seqs {
            for w in seq.windows(2) {
                if lengths[w[0] as usize] + lengths[w[1] as usize] <= limit {
                    *counts.entry((w[0], w[1])).or_insert(0) += mult;
                }
            }
        }
        let best = counts
            .into_iter()
            .filter(|&(_, n)| n >= MIN_MERGE_FREQUENCY)
            .max_by(|(pa, na), (pb, nb)| {
                na.cmp(nb).then_with(|| {
                    // smaller (left, right) wins a tie
                    let ka = (&vocab[pa.0 as usize], &vocab[pa.1 as usize]);
                    let kb = (&vocab[pb.0 as usize], &vocab[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            });
        let Some(((left, right), _)) = best else {
            break;
        };
        let merged = format!("{}{}", vocab[left as usize], vocab[right as usize]);
        let id = match index.get(&merged) {
            Some(&id) => id,
            None => {
                let id = vocab.len() as u32;
                lengths.push(lengths[left as usize] + lengths[right as usize]);
                index.insert(merged.clone(), id);
                vocab.push(merged);
                id
            }
        };
        merges.push((vocab[left as usize].clone(), vocab[right as usize].clone()));
        for (seq, _) in &mut seqs {
            apply_merge(seq, left, right, id);
        }
    }
    TokenizerModel::new(TokenizerKind::Bpe, vocab, merges, max_token_len, marker)
}

/// Replaces non-overlapping `(left, right)` occurrences, scanning left to right.
fn apply_merge<T: Copy + PartialEq>(seq: &mut Vec<T>, left: T, right: T, merged: T) {
    if seq.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    *seq = out;
}

/// Starts from characters and applies the merges in training order until
/// none applies.
pub fn bpe_encode(s: &str, model: &TokenizerModel) -> Result<TokenSequence> {
    if model.kind != TokenizerKind::Bpe {
        return Err(TokenizeError::WrongKind {
            expected: TokenizerKind::Bpe,
            found: model.kind,
        });
    }
    let mut tokens: Vec<&str> = Vec::new();
    let syms = model.symbols(s)?;
    let base: HashMap<char, &str> = model
        .vocab[..model.base_len]
        .iter()
        .map(|t| (t.chars().next().unwrap(), t.as_str()))
        .collect();
    tokens.extend(syms.iter().map(|c| base[c]));

    let interned: HashMap<&str, &str> = model.vocab.iter().map(|t| (t.as_str(), t.as_str())).collect();
    loop {
        let before = tokens.len();
        for (left, right) in &model.merges {
            if tokens.len() < 2 {
                break;
            }
            let merged = interned[format!("{left}{right}").as_str()];
            let mut out = Vec::with_capacity(tokens.len());
            let mut i = 0;
            while i < tokens.len() {
                if i + 1 < tokens.len() && tokens[i] == left && tokens[i + 1] == right {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(tokens[i]);
                    i += 1;
                }
            }
            tokens = out;
        }
        if tokens.len() == before {
            break;
        }
    }
    Ok(TokenSequence {
        tokens: tokens.into_iter().map(str::to_string).collect(),
        regulated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn pair(l: &str, r: &str) -> (String, String) {
        (l.to_string(), r.to_string())
    }

    #[test]
    fn char_tokens_for_the_example_sentence() {
        let ts = char_tokenize("the stars twinkle and shine bright");
        assert_eq!(ts.len(), 34);
        assert_eq!(ts.tokens[..9], strs(&["t", "h", "e", "_", "s", "t", "a", "r", "s"]));
        assert!(char_tokenize("").is_empty());
    }

    #[test]
    fn regulator_expands_by_length() {
        let ts = TokenSequence {
            tokens: strs(&["br", "i", "ght"]),
            regulated: false,
        };
        let out = length_regulate(&ts).unwrap();
        assert_eq!(out.tokens, strs(&["br", "br", "i", "ght", "ght", "ght"]));
        assert!(out.regulated);
        assert!(matches!(length_regulate(&out), Err(TokenizeError::AlreadyRegulated)));

        let chars = char_tokenize("a b");
        assert_eq!(length_regulate(&chars).unwrap().tokens, chars.tokens);
    }

    #[test]
    fn first_merge_on_repeated_letter() {
        let m = train_bpe(["aaaa"], 2, Some(2)).unwrap();
        assert_eq!(m.merges(), &[pair("a", "a")]);
        assert_eq!(m.vocab(), &strs(&["a", "aa"]));
        assert_eq!(bpe_encode("aaaa", &m).unwrap().tokens, strs(&["aa", "aa"]));
    }

    #[test]
    fn length_one_forbids_every_merge() {
        let m = train_bpe(["abab"], 4, Some(1)).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.vocab().len(), 2);
    }

    #[test]
    fn pairs_span_the_space_marker() {
        let counts = pair_counts(["ab ab"]);
        assert_eq!(counts[&pair("a", "b")], 2);
        assert_eq!(counts[&pair("b", "_")], 1);
        assert_eq!(counts[&pair("_", "a")], 1);
        assert_eq!(counts.len(), 3);
        let m = train_bpe(["ab ab"], 4, Some(2)).unwrap();
        assert_eq!(m.merges()[0], pair("a", "b"));
        // remaining pairs occur once, below the merge threshold
        assert_eq!(m.merges().len(), 1);
    }

    #[test]
    fn ties_break_lexicographically() {
        // (a,b) and (c,d) both occur twice
        let m = train_bpe(["ab cd", "cd ab"], 7, Some(2)).unwrap();
        assert_eq!(m.merges()[0], pair("a", "b"));
        assert_eq!(m.merges()[1], pair("c", "d"));
    }

    #[test]
    fn vocab_too_small_names_minimum() {
        let err = train_bpe(["abc"], 2, Some(2)).unwrap_err();
        assert!(matches!(err, TokenizeError::VocabTooSmall { required: 3, .. }));
        assert!(matches!(train_bpe([], 10, Some(2)), Err(TokenizeError::EmptyCorpus)));
    }

    fn bright_model() -> TokenizerModel {
        TokenizerModel::new(
            TokenizerKind::Bpe,
            strs(&["b", "g", "h", "i", "r", "t", "br", "gh", "ght"]),
            vec![pair("b", "r"), pair("g", "h"), pair("gh", "t")],
            None,
            '_',
        )
        .unwrap()
    }

    #[test]
    fn bright_segments_as_in_the_regulator_example() {
        let ts = bpe_encode("bright", &bright_model()).unwrap();
        assert_eq!(ts.tokens, strs(&["br", "i", "ght"]));
        assert_eq!(bright_model().decode(&ts).unwrap(), "bright");
    }

    #[test]
    fn oov_reports_codepoint_and_offset() {
        match bpe_encode("brixt", &bright_model()) {
            Err(TokenizeError::OutOfVocabulary { codepoint, offset }) => {
                assert_eq!((codepoint, offset), ('x', 3));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            bpe_encode("b_r", &bright_model()),
            Err(TokenizeError::MarkerInText { offset: 1, .. })
        ));
    }

    #[test]
    fn zero_merge_model_matches_char_tokenize() {
        let m = train_bpe(["the cat"], 6, Some(2)).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(bpe_encode("act the", &m).unwrap(), char_tokenize("act the"));
        let c = train_char(["the cat"]).unwrap();
        assert_eq!(c.encode("act the").unwrap(), char_tokenize("act the"));
        assert!(matches!(bpe_encode("a", &c), Err(TokenizeError::WrongKind { .. })));
    }

    #[test]
    fn json_round_trip() {
        let m = train_bpe(["the stars twinkle and shine bright", "the cat sat"], 30, Some(2))
            .unwrap();
        let back = TokenizerModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn tampered_vocab_is_rejected() {
        let m = train_bpe(["the the the the"], 10, Some(2)).unwrap();
        let mut doc: Value = serde_json::from_str(&m.to_json()).unwrap();
        doc["vocab"][0] = Value::String("xyz".into());
        let err = TokenizerModel::from_json(&doc.to_string()).unwrap_err();
        assert!(matches!(&err, TokenizeError::Schema { pointer, .. } if pointer == "/vocab/0"), "{err}");
    }

    #[test]
    fn reordered_merges_are_rejected() {
        let json = bright_model().to_json();
        let mut doc: Value = serde_json::from_str(&json).unwrap();
        let merges = doc["merges"].as_array_mut().unwrap();
        merges.swap(1, 2);
        let err = TokenizerModel::from_json(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("merges do not regenerate vocab"), "{err}");
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let cases = [
            (r#"{"kind":"bpe","vocab":[1],"merges":[],"max_token_len":2,"space_marker":"_"}"#, "/vocab/0"),
            (r#"{"kind":"bpe","vocab":["a"],"merges":[["a"]],"max_token_len":2,"space_marker":"_"}"#, "/merges/0"),
            (r#"{"kind":"x","vocab":["a"],"merges":[],"max_token_len":2,"space_marker":"_"}"#, "/kind"),
            (r#"{"kind":"bpe","vocab":["a"],"merges":[],"space_marker":"_"}"#, "/max_token_len"),
            (r#"{"kind":"char","vocab":["a"],"merges":[],"max_token_len":2,"space_marker":"_"}"#, "/max_token_len"),
            (r#"{"kind":"bpe","vocab":["a"],"merges":[],"max_token_len":2,"space_marker":"__"}"#, "/space_marker"),
        ];
        for (json, want) in cases {
            match TokenizerModel::from_json(json) {
                Err(TokenizeError::Schema { pointer, .. }) => assert_eq!(pointer, want, "{json}"),
                other => panic!("{json}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_merge_results_do_not_grow_vocab() {
        // "ab"+"c" and "a"+"bc" both spell "abc"
        let m = TokenizerModel::new(
            TokenizerKind::Bpe,
            strs(&["a", "b", "c", "ab", "bc", "abc"]),
            vec![pair("a", "b"), pair("b", "c"), pair("ab", "c"), pair("a", "bc")],
            None,
            '_',
        )
        .unwrap();
        assert_eq!(bpe_encode("abc", &m).unwrap().tokens, strs(&["abc"]));
    }

    proptest! {
        #[test]
        fn char_count_equals_codepoints(s in "\\PC{0,50}") {
            prop_assert_eq!(char_tokenize(&s).len(), s.chars().count());
        }

        #[test]
        fn regulation_preserves_mass(toks in proptest::collection::vec("[a-z_]{1,4}", 0..30)) {
            let ts = TokenSequence { tokens: toks, regulated: false };
            let out = length_regulate(&ts).unwrap();
            prop_assert_eq!(out.len(), ts.char_mass());
            prop_assert_eq!(out.char_mass(), ts.tokens.iter().map(|t| t.chars().count().pow(2)).sum::<usize>());
        }

        #[test]
        fn bpe_is_lossless_and_bounded(
            corpus in proptest::collection::vec("[abc ]{1,30}", 1..8),
            probe in "[abc ]{0,40}",
            limit in 1usize..4,
        ) {
            let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
            let all: String = corpus.concat();
            prop_assume!(probe.chars().all(|c| all.contains(c)));
            let m = train_bpe(refs.iter().copied(), 40, Some(limit)).unwrap();
            let ts = bpe_encode(&probe, &m).unwrap();
            prop_assert!(ts.tokens.iter().all(|t| t.chars().count() <= limit));
            prop_assert!(ts.len() <= probe.chars().count());
            prop_assert_eq!(m.decode(&ts).unwrap(), probe);
            // determinism
            prop_assert_eq!(train_bpe(refs.iter().copied(), 40, Some(limit)).unwrap(), m);
        }
    }
}
