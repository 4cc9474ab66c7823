//! Line-oriented corpus file formats.
//!
//! CANONICAL: one document per line, `<label>\t<token>:<count> ...` with
//! `<label>` in {positive, negative, unlabeled}.
//!
//! BLITZER: space-separated `<token>:<count>` fields with a `#label#:positive`
//! or `#label#:negative` field (conventionally last).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{Corpus, CorpusError, Document, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Canonical,
    Blitzer,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" => Ok(CorpusFormat::Canonical),
            "blitzer" => Ok(CorpusFormat::Blitzer),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

/// Parses a corpus file, one document per non-empty line. The domain id is
/// the file stem.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let domain_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());

    let mut documents = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc = match format {
            CorpusFormat::Canonical => parse_canonical(&display, line_no, line)?,
            CorpusFormat::Blitzer => parse_blitzer(&display, line_no, line)?,
        };
        documents.push(doc);
    }
    if documents.is_empty() {
        return Err(CorpusError::EmptyFile { path: display });
    }
    Ok(Corpus::new(domain_id, documents))
}

/// Writes a corpus in CANONICAL format; tokens appear in sorted order so the
/// output is deterministic.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let display = path.display().to_string();
    let io_err = |source| CorpusError::Io {
        path: display.clone(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for doc in corpus.documents() {
        let label = match doc.label() {
            Some(Label::Positive) => "positive",
            Some(Label::Negative) => "negative",
            None => "unlabeled",
        };
        let fields: Vec<String> = doc
            .tokens()
            .iter()
            .map(|(token, count)| format!("{token}:{count}"))
            .collect();
        writeln!(out, "{label}\t{}", fields.join(" ")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn parse_canonical(path: &str, line_no: usize, line: &str) -> Result<Document, CorpusError> {
    let (label_str, rest) = line.split_once('\t').ok_or_else(|| CorpusError::Malformed {
        path: path.to_string(),
        line: line_no,
        what: "line (missing label/token separator)".into(),
    })?;
    let label = match label_str {
        "positive" => Some(Label::Positive),
        "negative" => Some(Label::Negative),
        "unlabeled" => None,
        other => {
            return Err(CorpusError::UnknownLabel {
                path: path.to_string(),
                line: line_no,
                token: other.to_string(),
            })
        }
    };
    let tokens = parse_token_fields(path, line_no, rest.split_whitespace())?;
    Document::new(tokens, label)
}

fn parse_blitzer(path: &str, line_no: usize, line: &str) -> Result<Document, CorpusError> {
    let mut label = None;
    let mut token_fields = Vec::new();
    for field in line.split_whitespace() {
        match field.rsplit_once(':') {
            Some(("#label#", value)) => {
                if label.is_some() {
                    return Err(CorpusError::Malformed {
                        path: path.to_string(),
                        line: line_no,
                        what: "duplicate label field".into(),
                    });
                }
                label = Some(match value {
                    "positive" => Label::Positive,
                    "negative" => Label::Negative,
                    other => {
                        return Err(CorpusError::UnknownLabel {
                            path: path.to_string(),
                            line: line_no,
                            token: other.to_string(),
                        })
                    }
                });
            }
            _ => token_fields.push(field),
        }
    }
    let tokens = parse_token_fields(path, line_no, token_fields.into_iter())?;
    Document::new(tokens, label)
}

fn parse_token_fields<'a>(
    path: &str,
    line_no: usize,
    fields: impl Iterator<Item = &'a str>,
) -> Result<BTreeMap<String, u32>, CorpusError> {
    let mut tokens: BTreeMap<String, u32> = BTreeMap::new();
    for field in fields {
        let (token, count_str) = field.rsplit_once(':').ok_or_else(|| CorpusError::Malformed {
            path: path.to_string(),
            line: line_no,
            what: format!("token field `{field}` (missing count)"),
        })?;
        if token.is_empty() {
            return Err(CorpusError::Malformed {
                path: path.to_string(),
                line: line_no,
                what: "token (empty string)".into(),
            });
        }
        let count: u32 = match count_str.parse() {
            Ok(c) if c >= 1 => c,
            _ => {
                return Err(CorpusError::Malformed {
                    path: path.to_string(),
                    line: line_no,
                    what: "count".into(),
                })
            }
        };
        *tokens.entry(token.to_string()).or_insert(0) += count;
    }
    Ok(tokens)
}
