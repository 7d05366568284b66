//! Three-annotator preference CSV: `prompt_id,system_x,system_y,r1,r2,r3`.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::stats::{collapse_to_direction, consensus, ConsensusLabel, ConsensusScale};

/// Ratings use 1 = "X is much better" .. 3 = "same" .. 5 = "Y is much better".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub prompt_id: String,
    pub system_x: String,
    pub system_y: String,
    pub ratings: [u8; 3],
}

impl AnnotationRecord {
    pub fn consensus(&self, scale: ConsensusScale) -> Result<ConsensusLabel> {
        consensus(self.ratings, scale)
    }
}

#[derive(Deserialize)]
struct Row {
    prompt_id: String,
    system_x: String,
    system_y: String,
    r1: u8,
    r2: u8,
    r3: u8,
}

pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| EvalError::Ingestion(format!("annotation header: {e}")))?;
    let expected = ["prompt_id", "system_x", "system_y", "r1", "r2", "r3"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(EvalError::Ingestion(format!(
            "annotation header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in csv.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| EvalError::Ingestion(format!("annotation line {line}: {e}")))?;
        let ratings = [row.r1, row.r2, row.r3];
        for r in ratings {
            collapse_to_direction(r)
                .map_err(|e| EvalError::Ingestion(format!("annotation line {line}: {e}")))?;
        }
        if !seen.insert(row.prompt_id.clone()) {
            return Err(EvalError::Ingestion(format!(
                "annotation line {line}: duplicate prompt {:?}",
                row.prompt_id
            )));
        }
        out.push(AnnotationRecord {
            prompt_id: row.prompt_id,
            system_x: row.system_x,
            system_y: row.system_y,
            ratings,
        });
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let file =
        std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    read_annotations(file)
}
