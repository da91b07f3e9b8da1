use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::genre::{resolve_single_genre, GenreMap};
use crate::error::{Error, Result};

/// One game as listed in a manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: String,
    pub title: String,
    pub description: String,
    pub cover_path: PathBuf,
    pub raw_genres: Vec<String>,
    pub resolved_genre: Option<usize>,
}

/// On-disk manifest row (JSON Lines).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub id: String,
    pub title: String,
    pub description: String,
    pub genres: Vec<String>,
    pub cover_path: String,
}

impl From<&GameRecord> for ManifestRow {
    fn from(r: &GameRecord) -> Self {
        Self {
            id: r.id.clone(),
            title: r.title.clone(),
            description: r.description.clone(),
            genres: r.raw_genres.clone(),
            cover_path: r.cover_path.to_string_lossy().into_owned(),
        }
    }
}

/// Parses JSON Lines manifest text. Relative cover paths are resolved
/// against `base_dir`. Every malformed row is reported in one error.
pub fn parse_manifest(text: &str, source: &Path, base_dir: &Path) -> Result<Vec<GameRecord>> {
    let mut records = Vec::new();
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", source.display(), n + 1);
        let row: ManifestRow = match serde_json::from_str(line) {
            Ok(row) => row,
            Err(e) => {
                problems.push(format!("{at}: {e}"));
                continue;
            }
        };
        if row.id.trim().is_empty() {
            problems.push(format!("{at}: empty id"));
            continue;
        }
        if !seen.insert(row.id.clone()) {
            problems.push(format!("{at}: duplicate id {:?}", row.id));
        }
        if row.genres.is_empty() {
            problems.push(format!("{at}: record {:?} has no genres", row.id));
        }
        let cover = PathBuf::from(&row.cover_path);
        let cover_path = if cover.is_absolute() {
            cover
        } else {
            base_dir.join(cover)
        };
        records.push(GameRecord {
            id: row.id,
            title: row.title,
            description: row.description,
            cover_path,
            raw_genres: row.genres,
            resolved_genre: None,
        });
    }
    if problems.is_empty() {
        Ok(records)
    } else {
        Err(Error::Manifest(problems))
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<GameRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, path, base)
}

pub fn write_manifest(path: &Path, records: &[GameRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let row = ManifestRow::from(r);
        out.push_str(&serde_json::to_string(&row).expect("manifest rows serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Resolves every record's single genre, collecting all unknown genre
/// strings before failing.
pub fn resolve_genres(records: &mut [GameRecord], map: &GenreMap, seed: u64) -> Result<()> {
    let mut problems = Vec::new();
    for r in records.iter_mut() {
        match resolve_single_genre(&r.id, &r.raw_genres, map, seed) {
            Ok(g) => r.resolved_genre = Some(g),
            Err(e) => problems.push(format!("record {:?}: {e}", r.id)),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Manifest(problems))
    }
}
