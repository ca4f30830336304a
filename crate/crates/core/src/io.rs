//! Delimited-text ingestion and export of expression matrices and labels.
//!
//! A matrix file may carry a header row of gene ids and a leading column of
//! sample ids; both are detected by whether the cells parse as numbers.
//! Files exported with genes as rows are transposed on load.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{Dataset, ExpressionMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Field separator; `None` picks tab for `.tsv`/`.txt` and comma otherwise.
    pub delimiter: Option<char>,
    /// Token marking a missing cell. Empty cells are always missing.
    pub na_token: String,
    /// The file stores genes as rows and samples as columns.
    pub genes_as_rows: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: None,
            na_token: "NA".to_string(),
            genes_as_rows: false,
        }
    }
}

impl LoadOptions {
    fn delimiter_for(&self, path: &Path) -> char {
        self.delimiter.unwrap_or_else(|| delimiter_for_path(path))
    }
}

pub fn delimiter_for_path(path: &Path) -> char {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("txt") => '\t',
        _ => ',',
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

enum Cell {
    Value(f64),
    Missing,
    Text,
}

fn classify(raw: &str, na: &str) -> Cell {
    let s = raw.trim().trim_matches('"');
    if s.is_empty() || s == na {
        return Cell::Missing;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Value(v),
        _ => Cell::Text,
    }
}

fn unquote(s: &str) -> String {
    s.trim().trim_matches('"').to_string()
}

/// Parses matrix text in samples-as-rows orientation (before any transpose).
pub fn parse_matrix(text: &str, delimiter: char, na_token: &str) -> Result<ExpressionMatrix> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split(delimiter).collect()))
        .collect();
    if lines.is_empty() {
        return Err(Error::Shape("matrix file is empty".into()));
    }

    let is_texty = |cells: &[&str]| cells.iter().any(|c| matches!(classify(c, na_token), Cell::Text));
    let has_header = is_texty(&lines[0].1);
    let body = if has_header { &lines[1..] } else { &lines[..] };
    if body.is_empty() {
        return Err(Error::Shape("matrix file has a header but no data rows".into()));
    }
    let id_column = body
        .iter()
        .all(|(_, cells)| matches!(classify(cells[0], na_token), Cell::Text));

    let width = body[0].1.len();
    for (line, cells) in body {
        if cells.len() != width {
            return Err(Error::RaggedRow {
                line: *line,
                expected: width,
                found: cells.len(),
            });
        }
    }
    let first = usize::from(id_column);
    let p = width - first;
    if p == 0 {
        return Err(Error::Shape("matrix file has no value columns".into()));
    }
    let n = body.len();

    let gene_ids = if has_header {
        let (line, header) = &lines[0];
        match header.len() {
            w if w == width => header[first..].iter().map(|s| unquote(s)).collect(),
            // R-style export: header omits the corner cell above the row names.
            w if id_column && w == p => header.iter().map(|s| unquote(s)).collect(),
            w => {
                return Err(Error::RaggedRow {
                    line: *line,
                    expected: width,
                    found: w,
                })
            }
        }
    } else {
        (1..=p).map(|j| format!("g{j}")).collect()
    };
    let sample_ids = if id_column {
        body.iter().map(|(_, c)| unquote(c[0])).collect()
    } else {
        (1..=n).map(|i| format!("s{i}")).collect()
    };

    let mut values = DMatrix::zeros(n, p);
    let mut observed = DMatrix::from_element(n, p, true);
    for (i, (line, cells)) in body.iter().enumerate() {
        for j in 0..p {
            match classify(cells[first + j], na_token) {
                Cell::Value(v) => values[(i, j)] = v,
                Cell::Missing => observed[(i, j)] = false,
                Cell::Text => {
                    return Err(Error::Parse {
                        line: *line,
                        field: first + j + 1,
                        value: cells[first + j].to_string(),
                    })
                }
            }
        }
    }
    ExpressionMatrix::with_mask(values, observed, gene_ids, sample_ids)
}

pub fn load_matrix(path: &Path, options: &LoadOptions) -> Result<ExpressionMatrix> {
    let text = read_to_string(path)?;
    let m = parse_matrix(&text, options.delimiter_for(path), &options.na_token)?;
    Ok(if options.genes_as_rows { m.transposed() } else { m })
}

/// Parsed labels plus the original spelling of each class.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLabels {
    pub labels: LabelVector,
    pub class_names: Vec<String>,
}

/// One label per non-blank line.
///
/// If the labels are exactly the integers `0..C` they are used as is;
/// anything else is mapped to `0..C` in order of first appearance.
pub fn parse_labels(text: &str) -> Result<ParsedLabels> {
    let raw: Vec<String> = text
        .lines()
        .map(unquote)
        .filter(|l| !l.is_empty())
        .collect();

    let as_ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse().ok()).collect();
    if let Some(ints) = as_ints {
        let c = ints.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; c];
        ints.iter().for_each(|&l| seen[l] = true);
        if c >= 2 && seen.iter().all(|&s| s) {
            let labels = LabelVector::new(ints, c)?;
            return Ok(ParsedLabels {
                labels,
                class_names: (0..c).map(|k| k.to_string()).collect(),
            });
        }
    }

    let mut class_names: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| match class_names.iter().position(|c| c == s) {
            Some(k) => k,
            None => {
                class_names.push(s.clone());
                class_names.len() - 1
            }
        })
        .collect();
    let labels = LabelVector::new(labels, class_names.len())?;
    Ok(ParsedLabels {
        labels,
        class_names,
    })
}

pub fn load_labels(path: &Path) -> Result<ParsedLabels> {
    parse_labels(&read_to_string(path)?)
}

pub fn load_dataset(matrix_path: &Path, labels_path: &Path, options: &LoadOptions) -> Result<Dataset> {
    let x = load_matrix(matrix_path, options)?;
    let parsed = load_labels(labels_path)?;
    Dataset::with_class_names(x, parsed.labels, parsed.class_names)
}

/// Writes a header of gene ids and a leading sample-id column.
///
/// Values use the shortest representation that parses back to the same `f64`.
pub fn format_matrix(x: &ExpressionMatrix, delimiter: char, na_token: &str) -> String {
    let d = delimiter.to_string();
    let mut out = String::new();
    out.push_str("sample");
    for g in x.gene_ids() {
        out.push_str(&d);
        out.push_str(g);
    }
    out.push('\n');
    for i in 0..x.nrows() {
        out.push_str(&x.sample_ids()[i]);
        for j in 0..x.ncols() {
            out.push_str(&d);
            match x.get(i, j) {
                Some(v) => out.push_str(&v.to_string()),
                None => out.push_str(na_token),
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix(path: &Path, x: &ExpressionMatrix, options: &LoadOptions) -> Result<()> {
    let text = format_matrix(x, options.delimiter_for(path), &options.na_token);
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn format_labels(d: &Dataset) -> String {
    d.y.labels()
        .iter()
        .map(|&l| format!("{}\n", d.class_names[l]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_csv() {
        let m = parse_matrix("1,2\n3,4\n", ',', "NA").unwrap();
        assert_eq!(m.values(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(m.is_complete());
        assert_eq!(m.gene_ids(), ["g1", "g2"]);
    }

    #[test]
    fn na_and_empty_cells_are_missing() {
        let m = parse_matrix("1,NA\n3,\n", ',', "NA").unwrap();
        assert!(!m.is_observed(0, 1));
        assert!(!m.is_observed(1, 1));
        assert!(m.is_observed(0, 0) && m.is_observed(1, 0));
    }

    #[test]
    fn custom_na_token() {
        let m = parse_matrix("1\t?\n", '\t', "?").unwrap();
        assert_eq!(m.get(0, 1), None);
    }

    #[test]
    fn detects_header_and_id_column() {
        let m = parse_matrix("id,a,b\ns1,1,2\ns2,3,4\n", ',', "NA").unwrap();
        assert_eq!(m.gene_ids(), ["a", "b"]);
        assert_eq!(m.sample_ids(), ["s1", "s2"]);
        assert_eq!(m.get(1, 1), Some(4.0));
    }

    #[test]
    fn r_style_header_without_corner() {
        let m = parse_matrix("\"a\",\"b\"\n\"s1\",1,2\n", ',', "NA").unwrap();
        assert_eq!(m.gene_ids(), ["a", "b"]);
        assert_eq!(m.sample_ids(), ["s1"]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            parse_matrix("1,2\n3\n", ',', "NA"),
            Err(Error::RaggedRow { line: 2, .. })
        ));
    }

    #[test]
    fn unparseable_cell_is_rejected() {
        assert!(matches!(
            parse_matrix("1,2\n3,x\n", ',', "NA"),
            Err(Error::Parse { line: 2, field: 2, .. })
        ));
    }

    #[test]
    fn integer_labels_kept_when_dense() {
        let p = parse_labels("1\n0\n1\n").unwrap();
        assert_eq!(p.labels.labels(), [1, 0, 1]);
    }

    #[test]
    fn string_labels_by_first_appearance() {
        let p = parse_labels("tumor\nnormal\ntumor\n").unwrap();
        assert_eq!(p.labels.labels(), [0, 1, 0]);
        assert_eq!(p.class_names, ["tumor", "normal"]);
        let p = parse_labels("2\n1\n2\n").unwrap();
        assert_eq!(p.labels.labels(), [0, 1, 0]);
        assert_eq!(p.class_names, ["2", "1"]);
    }

    #[test]
    fn single_class_labels_fail() {
        assert!(parse_labels("a\na\n").is_err());
    }
}
