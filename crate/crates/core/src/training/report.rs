use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{confusion_matrix, top_k_accuracy};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// k values reported by default.
pub const REPORT_KS: [usize; 2] = [1, 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenreAccuracy {
    pub genre: String,
    pub support: u64,
    pub correct: u64,
    /// `None` when the genre has no evaluated records.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: usize,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub per_genre: Vec<GenreAccuracy>,
    /// Mean of the defined per-genre accuracies.
    pub mean_genre_accuracy: Option<f64>,
    /// Rows are observed genres, columns predicted genres.
    pub confusion: Vec<Vec<u64>>,
}

impl EvaluationReport {
    pub fn new(probs: &Tensor, labels: &[usize], genres: &[&str]) -> Result<Self> {
        let (_, classes) = probs.dims2()?;
        if genres.len() != classes {
            return Err(Error::Contract(format!(
                "{} genre names for {classes} classes",
                genres.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Contract("cannot evaluate zero records".into()));
        }
        let confusion = confusion_matrix(probs, labels)?;
        let top_k_accuracy = REPORT_KS
            .iter()
            .filter(|&&k| k <= classes)
            .map(|&k| Ok((k, top_k_accuracy(probs, labels, k)?)))
            .collect::<Result<_>>()?;
        let per_genre: Vec<GenreAccuracy> = genres
            .iter()
            .zip(&confusion)
            .enumerate()
            .map(|(g, (name, row))| {
                let support = row.iter().sum();
                GenreAccuracy {
                    genre: name.to_string(),
                    support,
                    correct: row[g],
                    accuracy: (support > 0).then(|| row[g] as f64 / support as f64),
                }
            })
            .collect();
        let defined: Vec<f64> = per_genre.iter().filter_map(|g| g.accuracy).collect();
        let mean_genre_accuracy =
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Ok(Self {
            records: labels.len(),
            top_k_accuracy,
            per_genre,
            mean_genre_accuracy,
            confusion,
        })
    }

    pub fn top1(&self) -> f64 {
        self.top_k_accuracy[&1]
    }

    pub fn trace(&self) -> u64 {
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum()
    }

    /// Top-k summary followed by the per-genre table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .per_genre
            .iter()
            .map(|g| g.genre.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let header: Vec<String> = self
            .top_k_accuracy
            .keys()
            .map(|k| format!("Top {k} (%)"))
            .collect();
        let _ = writeln!(out, "Records  {}", header.join("  "));
        let values: Vec<String> = self
            .top_k_accuracy
            .iter()
            .map(|(k, acc)| format!("{:>w$.1}", acc * 100.0, w = format!("Top {k} (%)").len()))
            .collect();
        let _ = writeln!(out, "{:>7}  {}", self.records, values.join("  "));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  Support  Correct  Top 1 (%)", "Genre");
        for g in &self.per_genre {
            let acc = g
                .accuracy
                .map_or_else(|| "-".to_string(), |a| format!("{:.1}", a * 100.0));
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>7}  {:>9}",
                g.genre, g.support, g.correct, acc
            );
        }
        if let Some(mean) = self.mean_genre_accuracy {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>7}  {:>9.1}",
                "Mean",
                "",
                "",
                mean * 100.0
            );
        }
        out
    }

    /// `genre,support,correct,accuracy`, one row per genre; undefined
    /// accuracies are left empty.
    pub fn per_genre_csv(&self) -> String {
        let mut out = String::from("genre,support,correct,accuracy\n");
        for g in &self.per_genre {
            let acc = g.accuracy.map_or_else(String::new, |a| a.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&g.genre),
                g.support,
                g.correct,
                acc
            );
        }
        out
    }

    /// Observed genres down the first column, predicted genres across.
    pub fn confusion_csv(&self) -> String {
        let names: Vec<String> = self.per_genre.iter().map(|g| csv_field(&g.genre)).collect();
        let mut out = format!("observed\\predicted,{}\n", names.join(","));
        for (name, row) in names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{name},{}", cells.join(","));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
