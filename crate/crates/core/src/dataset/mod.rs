//! Manifest ingestion, genre canonicalisation, single-label resolution,
//! splitting, and synthetic corpora.

mod genre;
mod manifest;
mod split;
mod synthetic;

pub use genre::{genre_name, resolve_single_genre, GenreMap, GENRES, NUM_GENRES};
pub use manifest::{
    load_manifest, parse_manifest, resolve_genres, write_manifest, GameRecord, ManifestRow,
};
pub use split::{partition_sizes, split, split_stratified, DatasetSplit, MIN_SPLIT_RECORDS};
pub use synthetic::{
    generate_synthetic, write_synthetic, SignalLayout, SyntheticGame, SyntheticSpec,
};
