//! Dense program × test outcome matrix.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Bit (i, j) is set iff program i passed test j. Rows are packed into
/// 64-bit words so that identical rows compare as identical word slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl EvalMatrix {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>) -> Self {
        let rows = row_ids.len();
        let cols = col_ids.len();
        let words_per_row = cols.div_ceil(WORD);
        Self {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
            row_ids,
            col_ids,
        }
    }

    /// Builds a matrix from boolean rows, generating ids `p<i>` / `t<j>`.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let row_ids = (0..rows.len()).map(|i| format!("p{i}")).collect();
        let col_ids = (0..cols).map(|j| format!("t{j}")).collect();
        let mut m = Self::new(row_ids, col_ids);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        Ok(m)
    }

    /// Parses rows written as `0`/`1` strings, e.g. `["110", "011"]`.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|r| crate::types::bits_from_str(r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&parsed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        let w = self.bits[i * self.words_per_row + j / WORD];
        (w >> (j % WORD)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        let w = &mut self.bits[i * self.words_per_row + j / WORD];
        let mask = 1u64 << (j % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Packed words of row `i`; two rows are equal iff their word slices are.
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn row_bits(&self, i: usize) -> Vec<bool> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn row_count_ones(&self, i: usize) -> usize {
        self.row_words(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn column_count_ones(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j)).count()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut out = Self::new(
            keep.iter().map(|&i| self.row_ids[i].clone()).collect(),
            self.col_ids.clone(),
        );
        for (new_i, &i) in keep.iter().enumerate() {
            let src = self.row_words(i).to_vec();
            let start = new_i * out.words_per_row;
            out.bits[start..start + out.words_per_row].copy_from_slice(&src);
        }
        out
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_cols(&self, keep: &[usize]) -> Self {
        let mut out = Self::new(
            self.row_ids.clone(),
            keep.iter().map(|&j| self.col_ids[j].clone()).collect(),
        );
        for i in 0..self.rows {
            for (new_j, &j) in keep.iter().enumerate() {
                if self.get(i, j) {
                    out.set(i, new_j, true);
                }
            }
        }
        out
    }

    /// Text form: a `rows cols` header, then one `0`/`1` line per row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            s.push_str(&crate::types::bits_to_string(&self.row_bits(i)));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty matrix text".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad matrix header: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::InvalidArgument("matrix header needs rows and cols".into()));
        };
        let body: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        if body.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: body.len(),
            });
        }
        let mut m = Self::new(
            (0..rows).map(|i| format!("p{i}")).collect(),
            (0..cols).map(|j| format!("t{j}")).collect(),
        );
        for (i, line) in body.iter().enumerate() {
            let bits = crate::types::bits_from_str(line)?;
            if bits.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: bits.len(),
                });
            }
            for (j, b) in bits.into_iter().enumerate() {
                m.set(i, j, b);
            }
        }
        Ok(m)
    }
}
