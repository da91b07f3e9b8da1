//! Generated corpora with controllable text and image signal.
//!
//! Each genre owns a text cue (a small keyword set) and an image cue (a
//! colour, plus a shape in the distinct layout). With probability `p_text`
//! a description carries its own genre's keywords, otherwise those of a
//! uniformly chosen *other* cue; images work the same way with `p_img`. At
//! `p = 1/num_cues` the cue is therefore independent of the label.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::genre::{record_rng, GENRES, NUM_GENRES};
use super::manifest::{write_manifest, GameRecord};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::imaging::{normalize, resize, write_ppm, PixelGrid};

/// How genre identity is spread over the two modalities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalLayout {
    /// Every genre has its own keywords and its own colour + shape.
    #[default]
    Distinct,
    /// Text names only `genre % 3`, the image only `genre / 3`; only the
    /// pair identifies the genre.
    Complementary,
}

impl std::str::FromStr for SignalLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distinct" => Ok(Self::Distinct),
            "complementary" => Ok(Self::Complementary),
            other => Err(Error::Config(format!("unknown signal layout {other:?}"))),
        }
    }
}

const TEXT_GROUPS: usize = 3;

const GENRE_KEYWORDS: [[&str; 3]; NUM_GENRES] = [
    ["quest", "explore", "treasure"],
    ["coins", "retro", "highscore"],
    ["combo", "punch", "brawl"],
    ["handmade", "quirky", "pixel"],
    ["rhythm", "melody", "beat"],
    ["flipper", "bumper", "tilt"],
    ["jump", "ledge", "platforms"],
    ["tiles", "riddle", "match"],
    ["trivia", "questions", "answer"],
    ["lap", "drift", "race"],
    ["dungeon", "party", "character"],
    ["shoot", "aim", "ammo"],
    ["manage", "realistic", "simulate"],
    ["team", "league", "ball"],
    ["army", "conquer", "tactics"],
];

const GROUP_KEYWORDS: [[&str; 3]; TEXT_GROUPS] = [
    ["crimson", "ember", "blaze"],
    ["azure", "tide", "frost"],
    ["verdant", "grove", "moss"],
];

const FILLER: [&str; 24] = [
    "the",
    "a",
    "game",
    "player",
    "you",
    "world",
    "new",
    "play",
    "levels",
    "mode",
    "friends",
    "fun",
    "story",
    "time",
    "features",
    "unique",
    "enjoy",
    "challenge",
    "with",
    "your",
    "in",
    "and",
    "of",
    "every",
];

const PALETTE: [[u8; 3]; NUM_GENRES] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
];

const SHAPES: usize = 5;

impl SignalLayout {
    pub fn text_cue(self, genre: usize) -> usize {
        match self {
            Self::Distinct => genre,
            Self::Complementary => genre % TEXT_GROUPS,
        }
    }

    pub fn image_cue(self, genre: usize) -> usize {
        match self {
            Self::Distinct => genre,
            Self::Complementary => genre / TEXT_GROUPS,
        }
    }

    pub fn text_cues(self, num_genres: usize) -> usize {
        match self {
            Self::Distinct => num_genres,
            Self::Complementary => num_genres.min(TEXT_GROUPS),
        }
    }

    pub fn image_cues(self, num_genres: usize) -> usize {
        match self {
            Self::Distinct => num_genres,
            Self::Complementary => num_genres.div_ceil(TEXT_GROUPS),
        }
    }

    /// Keywords that carry text cue `cue`.
    pub fn keywords(self, cue: usize) -> &'static [&'static str] {
        match self {
            Self::Distinct => &GENRE_KEYWORDS[cue],
            Self::Complementary => &GROUP_KEYWORDS[cue],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub num_genres: usize,
    pub p_text: f64,
    pub p_img: f64,
    pub seed: u64,
    pub layout: SignalLayout,
    /// Inclusive range of generated cover side lengths.
    pub min_side: usize,
    pub max_side: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1500,
            num_genres: NUM_GENRES,
            p_text: 1.0,
            p_img: 1.0,
            seed: 0,
            layout: SignalLayout::Distinct,
            min_side: 32,
            max_side: 64,
        }
    }
}

/// A generated game plus its cover pixels (interleaved RGB).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGame {
    pub record: GameRecord,
    pub label: usize,
    pub text_cue: usize,
    pub image_cue: usize,
    pub height: usize,
    pub width: usize,
    pub rgb: Vec<u8>,
}

impl SyntheticGame {
    /// The cover resized to `size`×`size` and normalised, without going
    /// through the file system.
    pub fn cover_tensor(&self, size: usize) -> Result<Tensor> {
        let grid = PixelGrid::from_rgb8(self.height, self.width, &self.rgb)?;
        Ok(normalize(&resize(&grid, size, size)?))
    }
}

/// Cue for one modality: own cue with probability `p`, else one of the
/// other cues uniformly.
fn draw_cue(own: usize, cues: usize, p: f64, rng: &mut impl Rng) -> usize {
    if cues <= 1 || rng.gen_bool(p) {
        return own;
    }
    let other = rng.gen_range(0..cues - 1);
    if other >= own {
        other + 1
    } else {
        other
    }
}

fn description(keywords: &[&str], rng: &mut impl Rng) -> String {
    let len = rng.gen_range(8..=14);
    let mut words: Vec<&str> = (0..len).map(|_| *FILLER.choose(rng).unwrap()).collect();
    for _ in 0..2 {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, keywords.choose(rng).unwrap());
    }
    let mut text = words.join(" ");
    text.push('.');
    text[..1].to_uppercase() + &text[1..]
}

fn inside(shape: usize, y: usize, x: usize, top: usize, left: usize, h: usize, w: usize) -> bool {
    if y < top || x < left || y >= top + h || x >= left + w {
        return false;
    }
    let (fy, fx) = ((y - top) as f64 / h as f64, (x - left) as f64 / w as f64);
    match shape {
        0 => true,
        1 => (fy - 0.5).powi(2) + (fx - 0.5).powi(2) <= 0.25,
        2 => ((y - top) / 3).is_multiple_of(2),
        3 => ((x - left) / 3).is_multiple_of(2),
        _ => (fy - fx).abs() < 0.2 || (fy + fx - 1.0).abs() < 0.2,
    }
}

fn cover(
    color: [u8; 3],
    shape: usize,
    rng: &mut impl Rng,
    min_side: usize,
    max_side: usize,
) -> (usize, usize, Vec<u8>) {
    let h = rng.gen_range(min_side..=max_side);
    let w = rng.gen_range(min_side..=max_side);
    let background: [u8; 3] = [
        rng.gen_range(0..60),
        rng.gen_range(0..60),
        rng.gen_range(0..60),
    ];
    let (mh, mw) = (rng.gen_range(h / 2..=h), rng.gen_range(w / 2..=w));
    let (top, left) = (rng.gen_range(0..=h - mh), rng.gen_range(0..=w - mw));
    let mut rgb = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let base = if inside(shape, y, x, top, left, mh, mw) {
                color
            } else {
                background
            };
            for c in base {
                let noise: i16 = rng.gen_range(-12..=12);
                rgb.push((c as i16 + noise).clamp(0, 255) as u8);
            }
        }
    }
    (h, w, rgb)
}

/// Generates `spec.n` games with labels balanced to within one record per
/// genre. Output depends only on `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<SyntheticGame>> {
    let SyntheticSpec {
        n,
        num_genres,
        p_text,
        p_img,
        seed,
        layout,
        min_side,
        max_side,
    } = *spec;
    if num_genres == 0 || num_genres > NUM_GENRES {
        return Err(Error::Config(format!(
            "num_genres must be in 1..={NUM_GENRES}"
        )));
    }
    if n < num_genres {
        return Err(Error::Contract(format!("need n >= num_genres, got n={n}")));
    }
    if !(0.0..=1.0).contains(&p_text) || !(0.0..=1.0).contains(&p_img) {
        return Err(Error::Config(
            "signal probabilities must be in [0, 1]".into(),
        ));
    }
    if min_side < 4 || min_side > max_side {
        return Err(Error::Config(
            "cover sides need 4 <= min_side <= max_side".into(),
        ));
    }

    let mut labels: Vec<usize> = (0..n).map(|i| i % num_genres).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let text_cues = layout.text_cues(num_genres);
    let image_cues = layout.image_cues(num_genres);
    let games = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let id = format!("syn{i:05}");
            let mut rng = record_rng(seed, &id);
            let text_cue = draw_cue(layout.text_cue(label), text_cues, p_text, &mut rng);
            let image_cue = draw_cue(layout.image_cue(label), image_cues, p_img, &mut rng);
            let shape = match layout {
                SignalLayout::Distinct => image_cue % SHAPES,
                SignalLayout::Complementary => rng.gen_range(0..SHAPES),
            };
            let desc = description(layout.keywords(text_cue), &mut rng);
            let (height, width, rgb) =
                cover(PALETTE[image_cue], shape, &mut rng, min_side, max_side);
            let raw_genres = match GENRES[label] {
                "Strategy" if rng.gen_bool(0.3) => vec!["Real Time Strategy".to_string()],
                "Fighting" if rng.gen_bool(0.3) => {
                    vec![
                        "Fighting".to_string(),
                        "Hack and slash/Beat'em up".to_string(),
                    ]
                }
                name => vec![name.to_string()],
            };
            SyntheticGame {
                record: GameRecord {
                    cover_path: PathBuf::from("covers").join(format!("{id}.ppm")),
                    id,
                    title: format!("Synthetic Game {i}"),
                    description: desc,
                    raw_genres,
                    resolved_genre: Some(label),
                },
                label,
                text_cue,
                image_cue,
                height,
                width,
                rgb,
            }
        })
        .collect();
    Ok(games)
}

/// Writes `manifest.jsonl` and `covers/*.ppm` under `out_dir`.
pub fn write_synthetic(games: &[SyntheticGame], out_dir: &Path) -> Result<PathBuf> {
    let covers = out_dir.join("covers");
    std::fs::create_dir_all(&covers).map_err(|e| Error::io(&covers, e))?;
    for g in games {
        write_ppm(
            &out_dir.join(&g.record.cover_path),
            g.height,
            g.width,
            &g.rgb,
        )?;
    }
    let records: Vec<GameRecord> = games.iter().map(|g| g.record.clone()).collect();
    let manifest = out_dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}
