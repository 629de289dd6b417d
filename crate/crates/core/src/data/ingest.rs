use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{FeedbackMatrix, OrdinalScale};

pub const FEEDBACK_FILE: &str = "feedback.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Companion JSON for a feedback CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scale_labels: Vec<i32>,
    #[serde(default)]
    pub repeated_pairs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Task text per unit id; units with identical text count as repeats.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unit_text: BTreeMap<String, String>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

#[derive(Deserialize)]
struct Row {
    unit_id: String,
    worker_id: String,
    score: i32,
}

fn sort_worker_ids(ids: &mut [String]) {
    let numeric: Option<Vec<i64>> = ids.iter().map(|s| s.parse::<i64>().ok()).collect();
    if numeric.is_some() {
        ids.sort_by_key(|s| s.parse::<i64>().expect("checked numeric"));
    } else {
        ids.sort();
    }
}

/// Reads a long-format `unit_id,worker_id,score` CSV plus manifest.
/// Units keep their first-appearance order; workers are sorted by id
/// (numerically when every id is an integer).
pub fn ingest(csv_path: &Path, manifest_path: &Path) -> Result<FeedbackMatrix> {
    let manifest = read_manifest(manifest_path)?;
    let scale = OrdinalScale::new(manifest.scale_labels.clone())?;
    let ctx = || csv_path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|source| Error::Csv { context: ctx(), source })?;

    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut unit_ids: Vec<String> = Vec::new();
    let mut worker_set: HashMap<String, ()> = HashMap::new();
    let mut cells: HashMap<(usize, String), (i32, u64)> = HashMap::new();
    for rec in reader.deserialize::<Row>() {
        let row = rec.map_err(|source| Error::Csv { context: ctx(), source })?;
        // header is line 1
        let line = cells.len() as u64 + 2;
        if !scale.contains(row.score) {
            return Err(Error::data(format!(
                "{}:{line}: score {} for unit {} worker {} is not on the scale {:?}",
                csv_path.display(),
                row.score,
                row.unit_id,
                row.worker_id,
                scale.raw_labels()
            )));
        }
        let u = *unit_index.entry(row.unit_id.clone()).or_insert_with(|| {
            unit_ids.push(row.unit_id.clone());
            unit_ids.len() - 1
        });
        worker_set.insert(row.worker_id.clone(), ());
        if let Some((_, first)) = cells.insert((u, row.worker_id.clone()), (row.score, line)) {
            return Err(Error::data(format!(
                "{}:{line}: duplicate response for unit_id {} worker_id {} (first seen on line {first})",
                csv_path.display(),
                row.unit_id,
                row.worker_id
            )));
        }
    }
    if cells.is_empty() {
        return Err(Error::data(format!("{}: no responses", csv_path.display())));
    }
    let mut worker_ids: Vec<String> = worker_set.into_keys().collect();
    sort_worker_ids(&mut worker_ids);
    let expected = unit_ids.len() * worker_ids.len();
    if cells.len() != expected {
        return Err(Error::data(format!(
            "{}: {} of {expected} (unit, worker) responses are missing; missing responses are not supported",
            csv_path.display(),
            expected - cells.len()
        )));
    }
    let mut scores = Vec::with_capacity(expected);
    for u in 0..unit_ids.len() {
        for w in &worker_ids {
            scores.push(cells[&(u, w.clone())].0);
        }
    }
    let pairs = repeated_pairs(&manifest, &unit_index)?;
    FeedbackMatrix::new(scores, scale, unit_ids, worker_ids, pairs).map_err(|e| Error::data(e.to_string()))
}

fn repeated_pairs(manifest: &Manifest, unit_index: &HashMap<String, usize>) -> Result<Vec<(usize, usize)>> {
    let lookup = |id: &str| {
        unit_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::data(format!("manifest names unknown unit_id {id}")))
    };
    let mut pairs = Vec::new();
    for (a, b) in &manifest.repeated_pairs {
        let (a, b) = (lookup(a)?, lookup(b)?);
        if a == b {
            return Err(Error::data("a repeated pair names the same unit twice"));
        }
        pairs.push((a.min(b), a.max(b)));
    }
    let mut by_text: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (id, text) in &manifest.unit_text {
        by_text.entry(text.as_str()).or_default().push(lookup(id)?);
    }
    for group in by_text.values_mut() {
        group.sort_unstable();
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                pairs.push((group[i], group[j]));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Writes `feedback.csv` and `manifest.json` under `dir` in canonical form:
/// units in matrix order, workers in matrix order, explicit repeated pairs.
pub fn export_canonical(matrix: &FeedbackMatrix, split_seed: Option<u64>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(FEEDBACK_FILE);
    let ctx = || csv_path.display().to_string();
    let mut w = csv::Writer::from_path(&csv_path).map_err(|source| Error::Csv { context: ctx(), source })?;
    w.write_record(["unit_id", "worker_id", "score"])
        .map_err(|source| Error::Csv { context: ctx(), source })?;
    for (t, unit) in matrix.unit_ids().iter().enumerate() {
        for (k, worker) in matrix.worker_ids().iter().enumerate() {
            w.write_record([unit.as_str(), worker.as_str(), &matrix.score(t, k).to_string()])
                .map_err(|source| Error::Csv { context: ctx(), source })?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let ids = matrix.unit_ids();
    let manifest = Manifest {
        scale_labels: matrix.scale().raw_labels().to_vec(),
        repeated_pairs: matrix
            .repeated_pairs()
            .iter()
            .map(|&(a, b)| (ids[a].clone(), ids[b].clone()))
            .collect(),
        split_seed,
        unit_text: BTreeMap::new(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
