//! Tokenization, frequency-thresholded vocabulary, and fixed-length
//! integer encoding of descriptions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const FIRST_TOKEN_ID: usize = 2;
const HEADER_PREFIX: &str = "#vocab";

/// Lowercases and splits on every maximal run of non-alphanumeric
/// characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    min_count: usize,
    /// Tokens in id order, starting at id 2.
    tokens: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps every token occurring at least `min_count` times. Ids are
    /// assigned by descending frequency, ties broken lexicographically.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::Contract("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in corpus {
            for token in tokenize(text.as_ref()) {
                *counts.entry(token).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        kept.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        Ok(Self::from_tokens(
            min_count,
            kept.into_iter().map(|(t, _)| t).collect(),
        ))
    }

    fn from_tokens(min_count: usize, tokens: Vec<String>) -> Self {
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + FIRST_TOKEN_ID))
            .collect();
        Self {
            min_count,
            tokens,
            token_to_id,
        }
    }

    /// Number of ids, including PAD and UNK.
    pub fn size(&self) -> usize {
        self.tokens.len() + FIRST_TOKEN_ID
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// Real tokens in id order (ids 2, 3, ...).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids (unknowns to UNK), truncating to `max_len` and
    /// right-padding with PAD.
    pub fn encode(&self, text: &str, max_len: usize) -> EncodedText {
        let mut ids: Vec<usize> = tokenize(text)
            .iter()
            .take(max_len)
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect();
        let true_length = ids.len();
        ids.resize(max_len, PAD);
        EncodedText { ids, true_length }
    }

    /// Text form: a header line `#vocab min_count=<n> size=<n>`, then one
    /// token per line in id order starting at id 2. Further `#` lines are
    /// comments.
    pub fn to_text(&self, comment: Option<&str>) -> String {
        let mut out = format!(
            "{HEADER_PREFIX} min_count={} size={}\n",
            self.min_count,
            self.size()
        );
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty vocabulary file"))?;
        let mut min_count = None;
        let mut size = None;
        let fields = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::format(path, "missing #vocab header"))?;
        for field in fields.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("bad header field {field:?}")))?;
            let value: usize = value
                .parse()
                .map_err(|_| Error::format(path, format!("bad header value {field:?}")))?;
            match key {
                "min_count" => min_count = Some(value),
                "size" => size = Some(value),
                _ => return Err(Error::format(path, format!("unknown header field {key:?}"))),
            }
        }
        let (Some(min_count), Some(size)) = (min_count, size) else {
            return Err(Error::format(path, "header needs min_count and size"));
        };
        let tokens: Vec<String> = lines
            .filter(|l| !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        let vocab = Self::from_tokens(min_count, tokens);
        if vocab.size() != size {
            return Err(Error::format(
                path,
                format!("header says size {size}, file holds {}", vocab.size()),
            ));
        }
        if vocab.token_to_id.len() != vocab.tokens.len() {
            return Err(Error::format(path, "duplicate token"));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_text(comment)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Token ids of one text, padded or truncated to a fixed length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedText {
    pub ids: Vec<usize>,
    pub true_length: usize,
}

impl EncodedText {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}
