use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const NUM_GENRES: usize = 15;

/// Canonical genres; the index of a genre is its class id and its position
/// on both confusion-matrix axes.
pub const GENRES: [&str; NUM_GENRES] = [
    "Adventure",
    "Arcade",
    "Fighting",
    "Indie",
    "Music",
    "Pinball",
    "Platform",
    "Puzzle",
    "Quiz/Trivia",
    "Racing",
    "Role-Playing",
    "Shooter",
    "Simulator",
    "Sport",
    "Strategy",
];

/// Sub-genres merged into a canonical genre by default.
const DEFAULT_MERGES: [(&str, &str); 2] = [
    ("Real Time Strategy", "Strategy"),
    ("Hack and slash/Beat'em up", "Fighting"),
];

pub fn genre_name(index: usize) -> &'static str {
    GENRES[index]
}

/// Lowercase with every non-alphanumeric character removed, so
/// "Role Playing", "role-playing" and "ROLE_PLAYING" share one key.
fn alias_key(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Raw genre string → canonical genre index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenreMap {
    aliases: HashMap<String, usize>,
}

impl Default for GenreMap {
    fn default() -> Self {
        let mut aliases: HashMap<String, usize> = GENRES
            .iter()
            .enumerate()
            .map(|(i, g)| (alias_key(g), i))
            .collect();
        for (raw, canonical) in DEFAULT_MERGES {
            aliases.insert(alias_key(raw), aliases[&alias_key(canonical)]);
        }
        Self { aliases }
    }
}

impl GenreMap {
    pub fn num_genres(&self) -> usize {
        NUM_GENRES
    }

    /// Adds `raw → canonical`. Re-adding an existing alias is allowed only
    /// if it points at the same genre.
    pub fn add_alias(&mut self, raw: &str, canonical: &str) -> Result<()> {
        let key = alias_key(raw);
        if key.is_empty() {
            return Err(Error::Config(format!("empty alias {raw:?}")));
        }
        let target = GENRES
            .iter()
            .position(|g| alias_key(g) == alias_key(canonical))
            .ok_or_else(|| Error::UnknownGenre(canonical.to_string()))?;
        match self.aliases.get(&key) {
            Some(&existing) if existing != target => Err(Error::Config(format!(
                "alias {raw:?} already maps to {}, cannot remap to {}",
                GENRES[existing], GENRES[target]
            ))),
            _ => {
                self.aliases.insert(key, target);
                Ok(())
            }
        }
    }

    /// Parses a two-column, tab-separated alias table (`raw<TAB>canonical`)
    /// on top of the defaults. Blank lines and `#` comments are skipped;
    /// all bad lines are reported together.
    pub fn with_alias_table(mut self, text: &str, path: &Path) -> Result<Self> {
        let mut problems = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((raw, canonical)) = line.split_once('\t') else {
                problems.push(format!(
                    "{}:{}: expected two tab-separated columns",
                    path.display(),
                    n + 1
                ));
                continue;
            };
            if let Err(e) = self.add_alias(raw.trim(), canonical.trim()) {
                problems.push(format!("{}:{}: {e}", path.display(), n + 1));
            }
        }
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::Manifest(problems))
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::default().with_alias_table(&text, p)
            }
        }
    }

    /// Case- and punctuation-insensitive lookup.
    pub fn canonicalize(&self, raw: &str) -> Result<usize> {
        self.aliases
            .get(&alias_key(raw))
            .copied()
            .ok_or_else(|| Error::UnknownGenre(raw.to_string()))
    }

    /// Canonical genres of `raw`, deduplicated and sorted. Any unknown
    /// string is an error.
    pub fn canonical_set(&self, raw: &[String]) -> Result<Vec<usize>> {
        if raw.is_empty() {
            return Err(Error::Contract("record has no genres".into()));
        }
        let mut set = raw
            .iter()
            .map(|g| self.canonicalize(g))
            .collect::<Result<Vec<_>>>()?;
        set.sort_unstable();
        set.dedup();
        Ok(set)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Generator salted with a record id, so each record's draw is independent
/// of the order records are processed in.
pub(crate) fn record_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(id.as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Picks one of the record's canonical genres uniformly at random.
pub fn resolve_single_genre(
    id: &str,
    raw_genres: &[String],
    map: &GenreMap,
    seed: u64,
) -> Result<usize> {
    let set = map.canonical_set(raw_genres)?;
    if set.len() == 1 {
        return Ok(set[0]);
    }
    let pick = record_rng(seed, id).gen_range(0..set.len());
    Ok(set[pick])
}
