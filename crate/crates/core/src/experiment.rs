//! Experiment records and the experiments CSV shared by campaigns and
//! data-trained oracles.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::QualityMetrics;
use crate::mixture::MixtureRecipe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RandomInit,
    BoProposal,
    ManualEntry,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::RandomInit => "random_init",
            Provenance::BoProposal => "bo_proposal",
            Provenance::ManualEntry => "manual_entry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: u64,
    pub batch_index: usize,
    pub recipe: MixtureRecipe,
    pub measured: Option<QualityMetrics>,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    id: u64,
    batch: usize,
    virgin_pp: f64,
    recycled: f64,
    filler: f64,
    impact_modifier: f64,
    mfr_g_per_10min: Option<f64>,
    youngs_mpa: Option<f64>,
    impact_kj_per_m2: Option<f64>,
    provenance: Provenance,
}

pub const CSV_HEADER: [&str; 10] = [
    "id",
    "batch",
    "virgin_pp",
    "recycled",
    "filler",
    "impact_modifier",
    "mfr_g_per_10min",
    "youngs_mpa",
    "impact_kj_per_m2",
    "provenance",
];

/// Writes experiments with the fixed column order; unmeasured metrics are
/// empty cells.
pub fn write_experiments_csv<W: Write>(out: W, experiments: &[Experiment]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    for e in experiments {
        let m = e.measured;
        w.serialize(CsvRow {
            id: e.id,
            batch: e.batch_index,
            virgin_pp: e.recipe.virgin_pp,
            recycled: e.recipe.recycled,
            filler: e.recipe.filler,
            impact_modifier: e.recipe.impact_modifier,
            mfr_g_per_10min: m.map(|m| m.mfr),
            youngs_mpa: m.map(|m| m.youngs_modulus),
            impact_kj_per_m2: m.map(|m| m.impact_strength),
            provenance: e.provenance,
        })?;
    }
    if experiments.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads experiments CSV. Metrics must be all present or all empty per row.
pub fn read_experiments_csv<R: Read>(input: R) -> Result<Vec<Experiment>, CsvError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    for col in CSV_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(CsvError::Schema {
                row: 0,
                message: format!("missing column {col}"),
            });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<CsvRow>().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let recipe = MixtureRecipe::new(rec.virgin_pp, rec.recycled, rec.filler, rec.impact_modifier).map_err(|e| {
            CsvError::Schema {
                row,
                message: e.to_string(),
            }
        })?;
        let measured = match (rec.mfr_g_per_10min, rec.youngs_mpa, rec.impact_kj_per_m2) {
            (Some(a), Some(b), Some(c)) => Some(QualityMetrics::new(a, b, c).map_err(|e| CsvError::Schema {
                row,
                message: e.to_string(),
            })?),
            (None, None, None) => None,
            _ => {
                return Err(CsvError::Schema {
                    row,
                    message: "metrics must be all present or all empty".into(),
                })
            }
        };
        out.push(Experiment {
            id: rec.id,
            batch_index: rec.batch,
            recipe,
            measured,
            provenance: rec.provenance,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let ex = vec![
            Experiment {
                id: 0,
                batch_index: 0,
                recipe: MixtureRecipe::new(0.7, 0.1, 0.1, 0.1).unwrap(),
                measured: Some(QualityMetrics::new(6.5, 1600.0, 8.5).unwrap()),
                provenance: Provenance::RandomInit,
            },
            Experiment {
                id: 1,
                batch_index: 1,
                recipe: MixtureRecipe::new(1.0, 0.0, 0.0, 0.0).unwrap(),
                measured: None,
                provenance: Provenance::BoProposal,
            },
        ];
        let mut buf = Vec::new();
        write_experiments_csv(&mut buf, &ex).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(read_experiments_csv(buf.as_slice()).unwrap(), ex);
    }

    #[test]
    fn partial_metrics_rejected() {
        let text = format!("{}\n0,0,1,0,0,0,5.0,,,manual_entry\n", CSV_HEADER.join(","));
        assert!(matches!(
            read_experiments_csv(text.as_bytes()),
            Err(CsvError::Schema { row: 1, .. })
        ));
    }
}
