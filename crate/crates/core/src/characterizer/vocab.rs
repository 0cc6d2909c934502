use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Token to row mapping for the embedding matrix. Row 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Indexes tokens in order of first appearance.
    pub fn build<'a, I, T>(documents: I) -> Self
    where
        I: IntoIterator<Item = &'a T>,
        T: AsRef<[String]> + 'a + ?Sized,
    {
        let mut vocab = Vocabulary::from(Vec::new());
        for doc in documents {
            for token in doc.as_ref() {
                if !vocab.index.contains_key(token) {
                    vocab.index.insert(token.clone(), vocab.tokens.len());
                    vocab.tokens.push(token.clone());
                }
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        // the unknown row is always present
        false
    }

    /// Row of `token`, or 0 when unknown.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, row: usize) -> Option<&str> {
        self.tokens.get(row).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let mut all = vec![UNKNOWN_TOKEN.to_string()];
        all.extend(tokens.into_iter().filter(|t| t != UNKNOWN_TOKEN));
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens: all, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Self {
        vocab.tokens.into_iter().skip(1).collect()
    }
}

/// Pretrained vectors in the plain-text format: a `count dim` header, then
/// `token v1 .. vdim` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |message: String| Error::Parse {
            what: "word vectors",
            path: path.to_path_buf(),
            message,
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut fields = header.split_whitespace();
        let count: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(format!("bad header `{header}`")))?;
        let dim: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(format!("bad header `{header}`")))?;

        let mut vectors = HashMap::with_capacity(count);
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_string();
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(format!("line {}: {e}", n + 2)))?;
            if values.len() != dim {
                return Err(parse_err(format!(
                    "line {}: expected {dim} values, found {}",
                    n + 2,
                    values.len()
                )));
            }
            vectors.insert(token, values);
        }
        if vectors.len() != count {
            log::warn!(
                "{}: header announces {count} vectors, file holds {}",
                path.display(),
                vectors.len()
            );
        }
        Ok(WordVectors { dim, vectors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn first_appearance_order_and_unknown_row() {
        let docs = vec![toks("b a b"), toks("c a")];
        let vocab = Vocabulary::build(&docs);
        assert_eq!(vocab.tokens(), &["<unk>", "b", "a", "c"]);
        assert_eq!(vocab.lookup("a"), 2);
        assert_eq!(vocab.lookup("zzz"), 0);
    }

    #[test]
    fn serde_round_trip() {
        let vocab = Vocabulary::build(&[toks("x y z")]);
        let json = serde_json::to_string(&vocab).unwrap();
        assert_eq!(json, r#"["x","y","z"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
    }

    #[test]
    fn loads_word_vectors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "2 3\nhello 0.1 0.2 0.3\nworld -1 0 1.5").unwrap();
        let wv = WordVectors::load(f.path()).unwrap();
        assert_eq!(wv.dim, 3);
        assert_eq!(wv.vectors["world"], vec![-1.0, 0.0, 1.5]);
    }

    #[test]
    fn rejects_wrong_width() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1 3\nhello 0.1 0.2").unwrap();
        assert!(matches!(WordVectors::load(f.path()), Err(Error::Parse { .. })));
    }
}
