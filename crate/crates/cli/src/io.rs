use std::fs;
use std::path::{Path, PathBuf};

use fpgw_core::graphio::Graph;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub fn read_graph(path: &Path) -> Result<Graph, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Graph::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// `*.json` files of `dir` in file-name order, skipping `labels.json`.
pub fn graph_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::input(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != LABELS_FILE))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::input(format!("no graph files in {}", dir.display())));
    }
    Ok(files)
}

pub const LABELS_FILE: &str = "labels.json";

pub fn read_graphs(dir: &Path) -> Result<(Vec<String>, Vec<Graph>), Failure> {
    let files = graph_files(dir)?;
    let names =
        files.iter().map(|p| p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())).collect();
    let graphs = files.iter().map(|p| read_graph(p)).collect::<Result<_, _>>()?;
    Ok((names, graphs))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Writes `m` with an optional header row; values use the shortest repr that parses back exactly.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>, header: Option<&[String]>) -> Result<(), Failure> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    let err = |e: csv::Error| Failure::input(format!("cannot write {}: {e}", path.display()));
    if let Some(h) = header {
        w.write_record(h).map_err(err)?;
    }
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(err)?;
    }
    w.flush().map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// `<out without extension>.<suffix>` next to `out`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// File name of `path`, for references inside result files.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}
