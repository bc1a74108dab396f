use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 50;

/// Pretrained word vectors keyed by word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    casefold: bool,
    vectors: HashMap<String, Vec<f64>>,
    /// Lines skipped because their word was already present.
    pub duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize, casefold: bool) -> Self {
        EmbeddingTable {
            dim,
            casefold,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn key(&self, word: &str) -> String {
        if self.casefold {
            word.to_lowercase()
        } else {
            word.to_string()
        }
    }

    /// Inserts unless the word is already present; returns whether it was new.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Format(format!(
                "vector for `{word}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        let key = self.key(word);
        if self.vectors.contains_key(&key) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.vectors.insert(key, vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&self.key(word)).map(Vec::as_slice)
    }

    /// The table key under which `word` is stored, if present.
    pub fn resolve(&self, word: &str) -> Option<String> {
        let key = self.key(word);
        self.vectors.contains_key(&key).then_some(key)
    }
}

pub fn load_embeddings(path: &Path, expected_dim: usize, casefold: bool) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(std::io::BufReader::new(file), expected_dim, casefold, &path.display().to_string())
}

/// Reads whitespace-separated `word v1 ... v_dim` lines.
pub fn parse_embeddings<R: BufRead>(reader: R, dim: usize, casefold: bool, origin: &str) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim, casefold);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("bad number: {e}"),
            })?;
        if values.len() != dim {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("`{word}` has {} components, expected {dim}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("non-finite component in `{word}`"),
            });
        }
        table.insert(word, values)?;
    }
    if table.is_empty() {
        return Err(Error::Format(format!("{origin}: no vectors found")));
    }
    if table.duplicates > 0 {
        log::warn!("{origin}: {} duplicate words ignored", table.duplicates);
    }
    Ok(table)
}
