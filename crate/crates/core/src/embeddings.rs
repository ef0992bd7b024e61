//! Word embeddings in the plain-text GloVe format.
//!
//! Each line is `token v1 v2 ... vd`, fields separated by a single space.
//! Tokens may contain any non-space bytes.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Vocabulary plus an `n x d` row-major matrix of finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T: Scalar> {
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
    dim: usize,
}

/// Options for [`EmbeddingSet::load`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Keep at most this many rows (after filtering).
    pub limit: Option<usize>,
    /// Keep only tokens in this set.
    pub word_filter: Option<HashSet<String>>,
}

/// Result of [`EmbeddingSet::subset`].
#[derive(Debug, Clone)]
pub struct Subset<T: Scalar> {
    pub set: EmbeddingSet<T>,
    pub missing: Vec<String>,
}

impl<T: Scalar> EmbeddingSet<T> {
    /// Builds a set from tokens and a flat row-major buffer.
    pub fn new(words: Vec<String>, data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidEmbeddings("dimensionality must be >= 1".into()));
        }
        if data.len() != words.len() * dim {
            return Err(Error::InvalidEmbeddings(format!(
                "{} tokens but {} coordinates for d = {dim}",
                words.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbeddings(format!(
                "non-finite coordinate for token {:?}",
                words[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateToken {
                    token: w.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            words,
            index,
            data,
            dim,
        })
    }

    /// Builds a set from one vector per token.
    pub fn from_rows(words: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidEmbeddings(format!(
                "row {bad} has length {} but d = {dim}",
                rows[bad].len()
            )));
        }
        if words.len() != rows.len() {
            return Err(Error::InvalidEmbeddings(format!(
                "{} tokens for {} rows",
                words.len(),
                rows.len()
            )));
        }
        Self::new(words, rows.into_iter().flatten().collect(), dim)
    }

    /// Convenience constructor naming rows `w0`, `w1`, ...
    pub fn from_anonymous_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let words = (0..rows.len()).map(|i| format!("w{i}")).collect();
        Self::from_rows(words, rows)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Same vocabulary, new coordinates.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::Mismatch(format!(
                "expected {} coordinates, got {}",
                self.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbeddings("non-finite coordinate".into()));
        }
        Ok(Self {
            words: self.words.clone(),
            index: self.index.clone(),
            data,
            dim: self.dim,
        })
    }

    /// True when both sets carry the same tokens in the same order with the same `d`.
    pub fn same_vocabulary(&self, other: &Self) -> bool {
        self.dim == other.dim && self.words == other.words
    }

    /// Converts coordinates to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingSet<U> {
        EmbeddingSet {
            words: self.words.clone(),
            index: self.index.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            dim: self.dim,
        }
    }

    /// Loads a GloVe text file.
    pub fn load(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let limit = opts.limit.unwrap_or(usize::MAX);
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut dim: Option<usize> = None;

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            if words.len() >= limit {
                break;
            }
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message,
            };

            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default();
            if token.is_empty() {
                return Err(parse_err("empty token".into()));
            }
            let values: Vec<&str> = fields.collect();
            match dim {
                None if values.is_empty() => {
                    return Err(parse_err("line has no coordinates".into()));
                }
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(format!(
                        "expected {d} coordinates, found {}",
                        values.len()
                    )));
                }
                Some(_) => {}
            }

            if let Some(filter) = &opts.word_filter {
                if !filter.contains(token) {
                    continue;
                }
            }
            if let Some(first) = seen.get(token) {
                return Err(Error::DuplicateToken {
                    token: format!("{token} (first seen on line {first})"),
                    line: lineno,
                });
            }

            for (k, field) in values.iter().enumerate() {
                let v = T::parse_field(field).ok_or_else(|| {
                    parse_err(format!("coordinate {} is not a number: {field:?}", k + 1))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(format!("coordinate {} is not finite", k + 1)));
                }
                data.push(v);
            }
            seen.insert(token.to_string(), lineno);
            words.push(token.to_string());
        }

        match dim {
            Some(d) if !words.is_empty() => Self::new(words, data, d),
            _ => Err(Error::EmptyEmbeddings(path.to_path_buf())),
        }
    }

    /// Writes the set as GloVe text with `precision` decimal places.
    ///
    /// `precision >= 17` switches to the shortest representation that parses
    /// back to the identical value.
    pub fn save(&self, path: impl AsRef<Path>, precision: usize) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out, precision)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, out: &mut W, precision: usize) -> std::io::Result<()> {
        for (word, row) in self.words.iter().zip(self.rows()) {
            out.write_all(word.as_bytes())?;
            for v in row {
                // Avoid "-0.000" style output for values that round to zero.
                if precision >= 17 {
                    write!(out, " {v}")?;
                } else {
                    let s = format!("{v:.precision$}");
                    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
                        write!(out, " {}", &s[1..])?;
                    } else {
                        write!(out, " {s}")?;
                    }
                }
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Restricts to `tokens`, in request order. Unknown tokens are reported
    /// in `missing`; repeated requests for one token keep the first.
    pub fn subset<S: AsRef<str>>(&self, tokens: &[S]) -> Subset<T> {
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut missing = Vec::new();
        let mut taken = HashSet::new();
        for tok in tokens {
            let tok = tok.as_ref();
            match self.index_of(tok) {
                Some(i) => {
                    if taken.insert(i) {
                        words.push(tok.to_string());
                        data.extend_from_slice(self.row(i));
                    }
                }
                None => missing.push(tok.to_string()),
            }
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Subset {
            set: Self {
                words,
                index,
                data,
                dim: self.dim,
            },
            missing,
        }
    }

    /// Returns a copy with rows reordered so that row `i` of the result is
    /// row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::Mismatch("permutation length".into()));
        }
        let words = perm.iter().map(|&p| self.words[p].clone()).collect();
        let data = perm.iter().flat_map(|&p| self.row(p).iter().copied()).collect();
        Self::new(words, data, self.dim)
    }
}

/// Reads a vocabulary file: one token per line, surrounding whitespace ignored.
pub fn read_vocabulary(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}
