//! Input discovery: series files named on the command line, found under
//! directories, or listed in a manifest CSV.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chaosforge::io::read_series;
use chaosforge::series::MultivariateSeries;
use serde::Deserialize;

use crate::error::{CliError, CliResult, Context};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesEntry {
    pub path: PathBuf,
    pub sample_id: String,
    pub source_id: String,
}

fn csv_files_under(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .context(dir.display().to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .context(dir.display().to_string())?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            csv_files_under(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn dir_name(p: Option<&Path>) -> String {
    p.and_then(Path::file_name).map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "default".into())
}

/// Files are taken as given; directories are walked in sorted order. Under
/// a directory the sample id is the relative path without extension and
/// the source id is the first path component (the directory itself for
/// files directly inside it).
pub fn discover(inputs: &[PathBuf]) -> CliResult<Vec<SeriesEntry>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files = Vec::new();
            csv_files_under(input, &mut files)?;
            for f in files {
                let rel = f.strip_prefix(input).expect("walked from input");
                let parts: Vec<String> =
                    rel.with_extension("").iter().map(|c| c.to_string_lossy().into_owned()).collect();
                let source_id = if parts.len() > 1 { parts[0].clone() } else { dir_name(Some(input)) };
                out.push(SeriesEntry { sample_id: parts.join("/"), source_id, path: f });
            }
        } else if input.is_file() {
            out.push(SeriesEntry { sample_id: stem(input), source_id: dir_name(input.parent()), path: input.clone() });
        } else {
            return Err(CliError::input(format!("{}: no such file or directory", input.display())));
        }
    }
    check_unique(&out)?;
    Ok(out)
}

#[derive(Deserialize)]
struct ManifestRow {
    path: String,
    sample_id: Option<String>,
    source_id: Option<String>,
}

/// Manifest CSV with a `path` column and optional `sample_id`, `source_id`.
/// Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> CliResult<Vec<SeriesEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ManifestRow>().enumerate() {
        let row = row.context(format!("{} row {}", path.display(), i + 2))?;
        let p = base.join(&row.path);
        out.push(SeriesEntry {
            sample_id: row.sample_id.unwrap_or_else(|| stem(&p)),
            source_id: row.source_id.unwrap_or_else(|| "default".into()),
            path: p,
        });
    }
    if out.is_empty() {
        return Err(CliError::input(format!("{}: manifest lists no series", path.display())));
    }
    check_unique(&out)?;
    Ok(out)
}

fn check_unique(entries: &[SeriesEntry]) -> CliResult<()> {
    let mut seen = BTreeSet::new();
    for e in entries {
        if !seen.insert(e.sample_id.as_str()) {
            return Err(CliError::input(format!("duplicate sample id {:?}", e.sample_id)));
        }
    }
    if entries.is_empty() {
        return Err(CliError::input("no series files found"));
    }
    Ok(())
}

pub fn csv_reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    let f = fs::File::open(path).context(path.display().to_string())?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(f))
}

pub fn load_series(path: &Path) -> CliResult<MultivariateSeries> {
    let f = fs::File::open(path).context(path.display().to_string())?;
    read_series(f).context(path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directories_give_relative_ids_and_sources() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("b")).unwrap();
        fs::create_dir_all(root.join("a")).unwrap();
        for f in ["b/s2.csv", "a/s1.csv", "top.csv", "a/notes.txt"] {
            fs::write(root.join(f), "").unwrap();
        }
        let got = discover(&[root.to_path_buf()]).unwrap();
        let ids: Vec<(&str, &str)> = got.iter().map(|e| (e.sample_id.as_str(), e.source_id.as_str())).collect();
        let top = dir_name(Some(root));
        assert_eq!(ids, vec![("a/s1", "a"), ("b/s2", "b"), ("top", top.as_str())]);
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        fs::write(&m, "path,sample_id,source_id\nx.csv,s1,src\ny.csv,,\n").unwrap();
        let got = read_manifest(&m).unwrap();
        assert_eq!(got[0].path, dir.path().join("x.csv"));
        assert_eq!((got[0].sample_id.as_str(), got[0].source_id.as_str()), ("s1", "src"));
        assert_eq!((got[1].sample_id.as_str(), got[1].source_id.as_str()), ("y", "default"));
    }

    #[test]
    fn missing_input_and_duplicates_are_rejected() {
        assert!(discover(&[PathBuf::from("/definitely/not/here")]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        fs::write(&m, "path,sample_id\nx.csv,s\ny.csv,s\n").unwrap();
        assert_eq!(read_manifest(&m).unwrap_err().exit_code(), 2);
    }
}
