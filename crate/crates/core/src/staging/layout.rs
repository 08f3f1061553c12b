//! Packed layouts: transposed fixed-point bit-planes and diagonal-form matrices.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;

/// `precision` bitvectors of equal length; plane `i` holds bit `i` of every
/// slot value, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitPlanes {
    pub precision: u32,
    pub planes: Vec<Bits>,
}

impl BitPlanes {
    pub fn from_values(values: &[u64], precision: u32) -> BitPlanes {
        assert!(precision >= 1, "precision must be at least 1");
        let planes = (0..precision)
            .map(|i| {
                let shift = precision - 1 - i;
                values.iter().map(|&v| (v >> shift) & 1 == 1).collect()
            })
            .collect();
        BitPlanes { precision, planes }
    }

    pub fn slots(&self) -> usize {
        self.planes.first().map_or(0, Bits::len)
    }

    pub fn values(&self) -> Vec<u64> {
        (0..self.slots())
            .map(|s| {
                self.planes
                    .iter()
                    .fold(0u64, |acc, plane| (acc << 1) | plane.get(s) as u64)
            })
            .collect()
    }
}

/// A boolean `rows x cols` matrix stored as its `cols` generalized diagonals.
///
/// Diagonal `i` has length `rows`; entry `r` is `A[r][(r + i) mod cols]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagMatrix {
    pub rows: usize,
    pub cols: usize,
    pub diagonals: Vec<Bits>,
}

impl DiagMatrix {
    /// Builds from dense rows, each of length `cols`.
    pub fn from_dense(rows: &[Bits], cols: usize) -> DiagMatrix {
        for row in rows {
            assert_eq!(row.len(), cols, "ragged dense matrix");
        }
        let m = rows.len();
        let diagonals = (0..cols)
            .map(|i| Bits::from_fn(m, |r| rows[r].get((r + i) % cols)))
            .collect();
        DiagMatrix {
            rows: m,
            cols,
            diagonals,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        let i = (c + self.cols - r % self.cols) % self.cols;
        self.diagonals[i].get(r)
    }

    pub fn to_dense(&self) -> Vec<Bits> {
        (0..self.rows)
            .map(|r| Bits::from_fn(self.cols, |c| self.get(r, c)))
            .collect()
    }

    pub fn row_weight(&self, r: usize) -> usize {
        (0..self.cols).filter(|&c| self.get(r, c)).count()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, c)).count()
    }

    /// Checks the shape: exactly `cols` diagonals of length `rows`.
    pub fn is_well_formed(&self) -> bool {
        self.diagonals.len() == self.cols && self.diagonals.iter().all(|d| d.len() == self.rows)
    }
}
