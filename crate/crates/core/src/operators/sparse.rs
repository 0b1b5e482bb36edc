//! Compressed-sparse-row matrices with a binary container and Matrix Market
//! text I/O.
//!
//! Binary layout (all little-endian, 8 bytes per item):
//!
//! ```text
//! rows: u64, cols: u64, nnz: u64,
//! offsets: [u64; rows + 1], indices: [u64; nnz], values: [f64; nnz]
//! ```

use std::io::{BufRead, Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::spaces::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// A block of equations stored as matrix rows.
pub type SparseRowBlock = CsrMatrix;

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != rows + 1 {
            return Err(Error::Format(format!(
                "expected {} row offsets, found {}",
                rows + 1,
                offsets.len()
            )));
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("row offsets must start at 0 and be nondecreasing".into()));
        }
        let nnz = offsets[rows];
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::Format(format!(
                "nnz mismatch: offsets say {nnz}, indices {}, values {}",
                indices.len(),
                values.len()
            )));
        }
        if let Some(bad) = indices.iter().find(|c| **c >= cols) {
            return Err(Error::Format(format!("column index {bad} out of range for {cols} columns")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sparse matrix values"));
        }
        Ok(Self { rows, cols, offsets, indices, values })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// columns sorted within each row.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(t) = sorted.iter().find(|t| t.0 >= rows || t.1 >= cols) {
            return Err(Error::Format(format!("entry ({}, {}) outside {rows}x{cols}", t.0, t.1)));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            offsets[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Self::new(rows, cols, offsets, indices, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Selected rows of `A x`, each accumulated in stored column order.
    pub fn apply_rows(&self, rows: Range<usize>, x: &[f64]) -> Result<Vector> {
        if rows.start > rows.end || rows.end > self.rows {
            return Err(Error::RowRange { start: rows.start, end: rows.end, rows: self.rows });
        }
        Error::check_dim(self.cols, x.len())?;
        let out = rows
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut acc = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    acc += v * x[*c];
                }
                acc
            })
            .collect();
        Ok(Vector::from_raw(out))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vector> {
        self.apply_rows(0..self.rows, x)
    }

    /// `Aᵀ y`.
    pub fn transpose_apply(&self, y: &[f64]) -> Result<Vector> {
        Error::check_dim(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                out[*c] += v * yi;
            }
        }
        Ok(Vector::from_raw(out))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            triplets.extend(cols.iter().zip(vals).map(|(c, v)| (*c, i, *v)));
        }
        CsrMatrix::from_triplets(self.cols, self.rows, &triplets).expect("transpose of a valid matrix")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                row[*c] += v;
            }
        }
        dense
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for v in [self.rows, self.cols, self.nnz()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in self.offsets.iter().chain(&self.indices) {
            w.write_all(&(*v as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let rows = next_u64(&mut r)? as usize;
        let cols = next_u64(&mut r)? as usize;
        let nnz = next_u64(&mut r)? as usize;
        let offsets = (0..=rows).map(|_| next_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let indices = (0..nnz).map(|_| next_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let values = (0..nnz).map(|_| next_u64(&mut r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, offsets, indices, values)
    }

    /// Matrix Market `coordinate real general`, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let banner = lines.next().ok_or_else(|| Error::Format("empty Matrix Market file".into()))??;
        let lower = banner.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate") || !lower.contains("real") {
            return Err(Error::Format(format!("unsupported Matrix Market banner: {banner}")));
        }
        let symmetric = lower.contains("symmetric");
        let mut size: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let bad = || Error::Format(format!("line {}: cannot parse '{t}'", lineno + 2));
            if size.is_none() {
                if fields.len() != 3 {
                    return Err(bad());
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad());
                size = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
                continue;
            }
            if fields.len() != 3 {
                return Err(bad());
            }
            let i: usize = fields[0].parse().map_err(|_| bad())?;
            let j: usize = fields[1].parse().map_err(|_| bad())?;
            let v: f64 = fields[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 {
                return Err(bad());
            }
            triplets.push((i - 1, j - 1, v));
            if symmetric && i != j {
                triplets.push((j - 1, i - 1, v));
            }
        }
        let (rows, cols, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
        let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
        if stored != nnz {
            return Err(Error::Format(format!("expected {nnz} entries, found {stored}")));
        }
        Self::from_triplets(rows, cols, &triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 4, &[(0, 1, 2.0), (2, 3, -1.5), (0, 0, 1.0), (2, 3, 0.5), (1, 2, 0.25)])
            .unwrap()
    }

    #[test]
    fn triplets_are_sorted_and_merged() {
        let m = sample();
        assert_eq!(m.offsets(), &[0, 2, 3, 4]);
        assert_eq!(m.indices(), &[0, 1, 2, 3]);
        assert_eq!(m.values(), &[1.0, 2.0, 0.25, -1.0]);
    }

    #[test]
    fn validation_rejects_bad_structure() {
        assert!(CsrMatrix::new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::new(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        assert!(CsrMatrix::new(1, 2, vec![0], vec![], vec![]).is_err());
    }

    #[test]
    fn row_apply_examples() {
        let m = sample();
        assert!(m.apply(&[0.0; 4]).unwrap().iter().all(|v| *v == 0.0));
        let one_hot = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(m.apply(&one_hot).unwrap().as_slice(), &[2.0, 0.0, 0.0]);
        assert_eq!(m.apply_rows(1..3, &[1.0; 4]).unwrap().as_slice(), &[0.25, -1.0]);
        assert!(matches!(m.apply_rows(2..4, &[1.0; 4]), Err(Error::RowRange { .. })));
    }

    #[test]
    fn matrix_market_handles_comments_and_symmetry() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 4.0\n2 1 -1.0\n";
        let m = CsrMatrix::read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.to_dense(), vec![vec![4.0, -1.0], vec![-1.0, 0.0]]);
        assert!(CsrMatrix::read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_rejects_truncated_input() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        assert!(CsrMatrix::read_binary(&buf[..buf.len() - 3]).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = CsrMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..12)
                .prop_map(move |t| CsrMatrix::from_triplets(r, c, &t).unwrap())
        })
    }

    proptest! {
        #[test]
        fn binary_and_text_round_trip(m in arb_matrix()) {
            let mut bin = Vec::new();
            m.write_binary(&mut bin).unwrap();
            prop_assert_eq!(CsrMatrix::read_binary(bin.as_slice()).unwrap(), m.clone());
            let mut txt = Vec::new();
            m.write_matrix_market(&mut txt).unwrap();
            prop_assert_eq!(CsrMatrix::read_matrix_market(txt.as_slice()).unwrap(), m);
        }

        #[test]
        fn transpose_apply_is_adjoint(m in arb_matrix(), seed in 0u64..1000) {
            let x: Vec<f64> = (0..m.cols()).map(|k| ((k as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let y: Vec<f64> = (0..m.rows()).map(|k| ((k as u64 * 7 + seed) % 13) as f64 - 6.0).collect();
            let lhs = crate::spaces::dot(&m.apply(&x).unwrap(), &y);
            let rhs = crate::spaces::dot(&x, &m.transpose_apply(&y).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            prop_assert_eq!(m.transpose().transpose(), m);
        }
    }
}
