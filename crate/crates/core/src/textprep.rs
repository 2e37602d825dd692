//! Tweet normalization at three cumulative levels and the engineered
//! feature families (text, metatext, user, time).
//!
//! Nothing language specific is built in: stopwords, lexicons and the emoji
//! map are supplied by the caller. Tokens are maximal runs of word
//! characters (alphabetic, numeric, or ZWNJ), lowercased.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Document;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepLevel {
    /// Emoji mapping, hashtag splitting, run collapse, digit/punctuation/short-token removal.
    L1,
    /// L1 plus stopword removal.
    L2,
    /// L2 plus removal of links and @-mentions.
    L3,
}

/// Caller-supplied word lists, normalized on construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepResources {
    stopwords: BTreeSet<String>,
    /// Emoji sequences in descending length order, with their replacement text.
    emoji_map: Vec<(String, String)>,
    insults: BTreeSet<String>,
    persons: Vec<Vec<String>>,
    orgs: Vec<Vec<String>>,
}

impl PrepResources {
    pub fn new<I, S>(
        stopwords: I,
        emoji_map: impl IntoIterator<Item = (String, String)>,
        insults: I,
        persons: I,
        orgs: I,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = |it: I| -> BTreeSet<String> {
            it.into_iter()
                .flat_map(|s| word_runs(&s.as_ref().to_lowercase()))
                .collect()
        };
        let names = |it: I| -> Vec<Vec<String>> {
            let set: BTreeSet<Vec<String>> = it
                .into_iter()
                .map(|s| word_runs(&s.as_ref().to_lowercase()))
                .filter(|v| !v.is_empty())
                .collect();
            set.into_iter().collect()
        };
        let mut emoji: Vec<(String, String)> = emoji_map
            .into_iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(k, v)| (k, v.to_lowercase()))
            .collect();
        emoji.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        emoji.dedup_by(|a, b| a.0 == b.0);
        PrepResources {
            stopwords: words(stopwords),
            emoji_map: emoji,
            insults: words(insults),
            persons: names(persons),
            orgs: names(orgs),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\u{200C}'
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2300..=0x23FF | 0x2B00..=0x2BFF
        | 0xFE0F | 0x200D | 0xE0020..=0xE007F)
}

fn word_runs(s: &str) -> Vec<String> {
    s.split(|c: char| !is_word_char(c))
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

/// Byte ranges of links: `http://`, `https://` or `www.` at a word
/// boundary, running to the next whitespace.
fn link_spans(s: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut prev: Option<char> = None;
    let mut skip_until = 0;
    for (i, c) in s.char_indices() {
        if i >= skip_until && !prev.is_some_and(is_word_char) {
            let rest = &s[i..];
            let starts = ["http://", "https://", "www."]
                .iter()
                .any(|p| rest.get(..p.len()).is_some_and(|h| h.eq_ignore_ascii_case(p)));
            if starts {
                let end = rest
                    .find(char::is_whitespace)
                    .map_or(s.len(), |e| i + e);
                spans.push((i, end));
                skip_until = end;
            }
        }
        prev = Some(c);
    }
    spans
}

/// Byte ranges of `@name` mentions: an `@` not preceded by a word character,
/// followed by word characters or underscores.
fn mention_spans(s: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut prev: Option<char> = None;
    for (i, c) in s.char_indices() {
        if c == '@' && !prev.is_some_and(is_word_char) {
            let rest = &s[i + 1..];
            let len = rest
                .find(|ch: char| !(is_word_char(ch) || ch == '_'))
                .unwrap_or(rest.len());
            if len > 0 {
                spans.push((i, i + 1 + len));
            }
        }
        prev = Some(c);
    }
    spans
}

fn hashtag_count(s: &str) -> usize {
    let mut prev: Option<char> = None;
    let mut n = 0;
    let mut it = s.chars().peekable();
    while let Some(c) = it.next() {
        if c == '#' && !prev.is_some_and(is_word_char) && it.peek().is_some_and(|&d| is_word_char(d)) {
            n += 1;
        }
        prev = Some(c);
    }
    n
}

fn blank_spans(s: &str, spans: &[(usize, usize)]) -> String {
    let mut out = String::with_capacity(s.len());
    let mut last = 0;
    for &(a, b) in spans {
        out.push_str(&s[last..a]);
        out.push(' ');
        last = b;
    }
    out.push_str(&s[last..]);
    out
}

fn remove_links_and_mentions(s: &str) -> String {
    let s = blank_spans(s, &link_spans(s));
    blank_spans(&s, &mention_spans(&s))
}

fn map_emojis(s: &str, map: &[(String, String)]) -> String {
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    'outer: while i < s.len() {
        let rest = &s[i..];
        for (k, v) in map {
            if rest.starts_with(k.as_str()) {
                out.push(' ');
                out.push_str(v);
                out.push(' ');
                i += k.len();
                continue 'outer;
            }
        }
        let c = rest.chars().next().expect("non-empty remainder");
        out.push(if is_emoji(c) { ' ' } else { c });
        i += c.len_utf8();
    }
    out
}

/// `#free_election` becomes `free election`.
fn split_hashtags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    let mut prev: Option<char> = None;
    let mut it = s.chars().peekable();
    while let Some(c) = it.next() {
        if c == '#' && !prev.is_some_and(is_word_char) && it.peek().is_some_and(|&d| is_word_char(d)) {
            in_tag = true;
            out.push(' ');
        } else if in_tag && c == '_' {
            out.push(' ');
        } else {
            if !(is_word_char(c) || c == '_') {
                in_tag = false;
            }
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Runs of three or more identical characters shrink to one.
fn collapse_runs(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        while j < chars.len() && chars[j] == chars[i] {
            j += 1;
        }
        let run = if j - i >= 3 { 1 } else { j - i };
        for _ in 0..run {
            out.push(chars[i]);
        }
        i = j;
    }
    out
}

/// Normalizes `text` and returns its surviving tokens (possibly none).
pub fn preprocess(text: &str, level: PrepLevel, res: &PrepResources) -> Vec<String> {
    let mut s = text.to_lowercase();
    if level >= PrepLevel::L3 {
        s = remove_links_and_mentions(&s);
    }
    s = map_emojis(&s, &res.emoji_map);
    s = split_hashtags(&s);
    s = collapse_runs(&s);
    word_runs(&s)
        .into_iter()
        .filter(|t| !t.chars().any(char::is_numeric))
        .filter(|t| t.chars().count() >= 3)
        .filter(|t| level < PrepLevel::L2 || !res.stopwords.contains(t))
        .collect()
}

/// A document whose normalized text is shorter than three characters.
pub fn is_removable(tokens: &[String]) -> bool {
    let chars: usize = tokens.iter().map(|t| t.chars().count()).sum::<usize>()
        + tokens.len().saturating_sub(1);
    chars < 3
}

/// Most frequent uni/bi/trigrams per class, plus the class-exclusive sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NgramVocab {
    pub k_per_class: usize,
    /// Top grams of class 0 and class 1 (all orders pooled).
    pub top: [BTreeSet<String>; 2],
    /// Grams in one class's top set but not the other's.
    pub exclusive: [BTreeSet<String>; 2],
}

impl NgramVocab {
    /// Union of both classes' top grams in lexicographic order.
    pub fn grams(&self) -> Vec<&str> {
        let mut all: BTreeSet<&str> = self.top[0].iter().map(String::as_str).collect();
        all.extend(self.top[1].iter().map(String::as_str));
        all.into_iter().collect()
    }
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(n).map(|w| w.join(" "))
}

/// Builds the n-gram vocabulary from labeled, preprocessed training token lists.
///
/// Per class and per order n ∈ {1, 2, 3} the `k_per_class` most frequent
/// grams are kept; ties go to the lexicographically smaller gram.
pub fn build_ngram_vocab<'a, I>(corpus: I, k_per_class: usize) -> Result<NgramVocab>
where
    I: IntoIterator<Item = (&'a [String], u8)>,
{
    let mut counts: [[BTreeMap<String, usize>; 3]; 2] = Default::default();
    let mut docs = 0usize;
    for (tokens, label) in corpus {
        if label > 1 {
            return Err(Error::NonBinaryLabel(label));
        }
        docs += 1;
        for n in 1..=3 {
            for g in ngrams(tokens, n) {
                *counts[label as usize][n - 1].entry(g).or_insert(0) += 1;
            }
        }
    }
    if docs == 0 {
        return Err(Error::Empty("n-gram training corpus"));
    }
    let mut top: [BTreeSet<String>; 2] = Default::default();
    for class in 0..2 {
        for per_order in &counts[class] {
            let mut v: Vec<(&String, &usize)> = per_order.iter().collect();
            v.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
            top[class].extend(v.into_iter().take(k_per_class).map(|(g, _)| g.clone()));
        }
    }
    let exclusive = [
        top[0].difference(&top[1]).cloned().collect(),
        top[1].difference(&top[0]).cloned().collect(),
    ];
    Ok(NgramVocab {
        k_per_class,
        top,
        exclusive,
    })
}

/// Which feature families to emit, and time anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub text: bool,
    pub metatext: bool,
    pub user: bool,
    pub time: bool,
    /// Pass through an externally computed `sentiment` feature.
    pub sentiment: bool,
    /// Election day, epoch seconds.
    pub election_date: i64,
    /// Offset added to publication timestamps before bucketing into day quarters.
    pub tz_offset_secs: i64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            text: true,
            metatext: true,
            user: true,
            time: true,
            sentiment: false,
            // 2021-06-18T00:00:00Z
            election_date: 1_623_974_400,
            tz_offset_secs: 0,
        }
    }
}

fn count_sequences(tokens: &[String], names: &[Vec<String>]) -> usize {
    names
        .iter()
        .map(|name| tokens.windows(name.len()).filter(|w| *w == name.as_slice()).count())
        .sum()
}

const DAY: f64 = 86_400.0;

/// Emits the configured feature families for one document.
///
/// `tokens` are the document's preprocessed tokens; link, mention and
/// hashtag counts are read from the raw text. Every configured feature is
/// present, with missing metadata contributing zero.
pub fn extract_features(
    doc: &Document,
    tokens: &[String],
    res: &PrepResources,
    vocab: &NgramVocab,
    cfg: &FeatureConfig,
) -> BTreeMap<String, f64> {
    let mut f = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        f.insert(k.to_string(), v);
    };
    let raw = doc.text.as_deref().unwrap_or("");
    let m = &doc.meta;
    let num = |x: Option<u64>| x.unwrap_or(0) as f64;
    if cfg.text {
        put("retweet_count", num(m.retweet_count));
        put("like_count", num(m.like_count));
        put("mentions_count", mention_spans(raw).len() as f64);
        put("links_count", link_spans(raw).len() as f64);
        put("hashtags_count", hashtag_count(raw) as f64);
        put("insult_count", tokens.iter().filter(|t| res.insults.contains(*t)).count() as f64);
        put("person_count", count_sequences(tokens, &res.persons) as f64);
        put("org_count", count_sequences(tokens, &res.orgs) as f64);
    }
    if cfg.sentiment {
        let s = doc.features.get("sentiment").copied().filter(|x| x.is_finite());
        put("sentiment", s.unwrap_or(0.0));
    }
    if cfg.metatext {
        let mut grams: BTreeMap<String, usize> = BTreeMap::new();
        for n in 1..=3 {
            for g in ngrams(tokens, n) {
                *grams.entry(g).or_insert(0) += 1;
            }
        }
        for g in vocab.grams() {
            put(&format!("ngram:{g}"), grams.get(g).copied().unwrap_or(0) as f64);
        }
        for class in 0..2 {
            let hits: usize = vocab.exclusive[class]
                .iter()
                .map(|g| grams.get(g).copied().unwrap_or(0))
                .sum();
            put(&format!("class{class}_exclusive_hits"), hits as f64);
        }
    }
    if cfg.user {
        put("follower_count", num(m.follower_count));
        put("following_count", num(m.following_count));
        put("tweet_count", num(m.tweet_count));
    }
    if cfg.time {
        let account_age = match (m.account_created_at, m.published_at) {
            (Some(c), Some(p)) => ((p - c) as f64 / DAY).max(0.0),
            _ => 0.0,
        };
        put("account_age_days", account_age);
        let to_election = m
            .published_at
            .map_or(0.0, |p| (cfg.election_date - p) as f64 / DAY);
        put("days_to_election", to_election);
        let quarter = m.published_at.map(|p| {
            let secs = (p + cfg.tz_offset_secs).rem_euclid(86_400);
            (secs / 21_600) as usize
        });
        for q in 0..4 {
            put(&format!("pub_quarter_{q}"), if quarter == Some(q) { 1.0 } else { 0.0 });
        }
    }
    f
}

/// Fixed, ordered feature names of a fitted pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub fn from_map(map: &BTreeMap<String, f64>) -> Self {
        FeatureSchema {
            names: map.keys().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Orders `map` by the schema, rejecting maps built from another vocabulary.
    pub fn vectorize(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if map.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                found: map.len(),
            });
        }
        self.names
            .iter()
            .map(|n| {
                map.get(n).copied().ok_or_else(|| {
                    Error::param("features", format!("feature `{n}` missing from the fitted schema"))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn l3_strips_links_and_mentions() {
        let r = PrepResources::empty();
        assert_eq!(preprocess("see http://t.co/x @user now!!!", PrepLevel::L3, &r), toks(&["see", "now"]));
        assert_eq!(
            preprocess("see http://t.co/x @user now!!!", PrepLevel::L1, &r),
            toks(&["see", "http", "user", "now"])
        );
    }

    #[test]
    fn short_only_input_is_empty() {
        let r = PrepResources::empty();
        for l in [PrepLevel::L1, PrepLevel::L2, PrepLevel::L3] {
            assert!(preprocess("hi", l, &r).is_empty());
        }
        assert!(is_removable(&[]));
    }

    #[test]
    fn hashtags_and_runs() {
        let r = PrepResources::empty();
        assert_eq!(
            preprocess("#free_election veeeery good", PrepLevel::L1, &r),
            toks(&["free", "election", "very", "good"])
        );
    }

    #[test]
    fn emoji_map_digits_and_stopwords() {
        let r = PrepResources::new(
            vec!["the"],
            vec![("😊".to_string(), "smile".to_string())],
            vec![],
            vec![],
            vec![],
        );
        assert_eq!(
            preprocess("The 😊 win2 🎉 crowd", PrepLevel::L1, &r),
            toks(&["the", "smile", "crowd"])
        );
        assert_eq!(preprocess("The 😊 win2 🎉 crowd", PrepLevel::L2, &r), toks(&["smile", "crowd"]));
    }

    #[test]
    fn persian_zwnj_stays_inside_words() {
        let r = PrepResources::empty();
        assert_eq!(preprocess("می\u{200C}خواهم", PrepLevel::L1, &r), toks(&["می\u{200C}خواهم"]));
    }

    #[test]
    fn counts_mentions_links_and_lexicons() {
        let res = PrepResources::new(vec![], vec![], vec!["badword"], vec!["John Smith"], vec!["Acme Corp"]);
        let text = "@a and @b_c see https://x.io badword by john smith at acme corp #vote";
        let doc = Document::new("d").with_text(text);
        let tokens = preprocess(text, PrepLevel::L3, &res);
        let vocab = build_ngram_vocab([(tokens.as_slice(), 1)], 0).unwrap();
        let f = extract_features(&doc, &tokens, &res, &vocab, &FeatureConfig::default());
        assert_eq!(f["mentions_count"], 2.0);
        assert_eq!(f["links_count"], 1.0);
        assert_eq!(f["hashtags_count"], 1.0);
        assert_eq!(f["insult_count"], 1.0);
        assert_eq!(f["person_count"], 1.0);
        assert_eq!(f["org_count"], 1.0);
        assert!(!f.keys().any(|k| k.starts_with("ngram:")));
    }

    #[test]
    fn time_features() {
        let mut doc = Document::new("t");
        doc.meta.account_created_at = Some(0);
        doc.meta.published_at = Some(10 * 86_400 + 13 * 3600);
        let cfg = FeatureConfig {
            election_date: 12 * 86_400 + 13 * 3600,
            ..FeatureConfig::default()
        };
        let vocab = build_ngram_vocab([(&[][..], 0)], 0).unwrap();
        let f = extract_features(&doc, &[], &PrepResources::empty(), &vocab, &cfg);
        assert_eq!(f["account_age_days"], 10.0 + 13.0 / 24.0);
        assert_eq!(f["days_to_election"], 2.0);
        assert_eq!(f["pub_quarter_2"], 1.0);
        assert_eq!(f["pub_quarter_0"] + f["pub_quarter_1"] + f["pub_quarter_3"], 0.0);
    }

    #[test]
    fn vocab_exclusive_and_tie_break() {
        let a = toks(&["fraud", "vote"]);
        let b = toks(&["vote", "peace"]);
        let c = toks(&["zeta", "alpha"]);
        let v = build_ngram_vocab([(a.as_slice(), 1), (b.as_slice(), 0)], 10).unwrap();
        assert!(v.exclusive[1].contains("fraud"));
        assert!(!v.exclusive[1].contains("vote"));
        assert!(v.exclusive[0].contains("peace"));
        let v = build_ngram_vocab([(c.as_slice(), 0)], 1).unwrap();
        assert!(v.top[0].contains("alpha"));
        assert!(!v.top[0].contains("zeta"));
        assert!(build_ngram_vocab(core::iter::empty::<(&[String], u8)>(), 3).is_err());
    }

    #[test]
    fn unseen_gram_indicators_are_zero_and_schema_guards_dimension() {
        let train = toks(&["fraud", "everywhere"]);
        let v = build_ngram_vocab([(train.as_slice(), 1)], 5).unwrap();
        let doc = Document::new("x");
        let cfg = FeatureConfig::default();
        let f = extract_features(&doc, &toks(&["unseen"]), &PrepResources::empty(), &v, &cfg);
        assert!(f.iter().filter(|(k, _)| k.starts_with("ngram:")).all(|(_, v)| *v == 0.0));
        let schema = FeatureSchema::from_map(&f);
        assert_eq!(schema.vectorize(&f).unwrap().len(), f.len());
        let other = build_ngram_vocab([(train.as_slice(), 1)], 1).unwrap();
        let g = extract_features(&doc, &[], &PrepResources::empty(), &other, &cfg);
        assert!(schema.vectorize(&g).is_err());
    }

    fn text_strategy() -> impl proptest::strategy::Strategy<Value = String> {
        proptest::collection::vec(
            proptest::sample::select(vec![
                "abc", "hello", "the", "@user", "http://a.b/c", "www.x.org", "#tag_me", "!!!",
                "heeeey", "x1y", "😊", "🎉", " ", ",", "_", "a", "foo@bar", "سلام", "\u{2014}",
            ]),
            0..12,
        )
        .prop_map(|v| v.concat())
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn preprocess_is_idempotent(text in text_strategy()) {
            let r = PrepResources::new(vec!["the"], vec![("😊".to_string(), "smile".to_string())], vec![], vec![], vec![]);
            for l in [PrepLevel::L1, PrepLevel::L2, PrepLevel::L3] {
                let once = preprocess(&text, l, &r);
                prop_assert_eq!(preprocess(&once.join(" "), l, &r), once);
            }
        }

        #[test]
        fn levels_are_nested(text in text_strategy()) {
            let r = PrepResources::new(vec!["the", "hello"], vec![], vec![], vec![], vec![]);
            let set = |l| preprocess(&text, l, &r).into_iter().collect::<BTreeSet<_>>();
            let (l1, l2, l3) = (set(PrepLevel::L1), set(PrepLevel::L2), set(PrepLevel::L3));
            prop_assert!(l3.is_subset(&l2));
            prop_assert!(l2.is_subset(&l1));
        }

        #[test]
        fn feature_maps_are_total_and_finite(text in text_strategy()) {
            let r = PrepResources::empty();
            let tokens = preprocess(&text, PrepLevel::L2, &r);
            let v = build_ngram_vocab([(tokens.as_slice(), 0)], 3).unwrap();
            let f = extract_features(&Document::new("p").with_text(text.clone()), &tokens, &r, &v, &FeatureConfig::default());
            let g = extract_features(&Document::new("q"), &[], &r, &v, &FeatureConfig::default());
            prop_assert!(f.values().all(|x| x.is_finite()));
            prop_assert_eq!(f.keys().collect::<Vec<_>>(), g.keys().collect::<Vec<_>>());
        }
    }
}
