//! Sparse linear algebra over exact rationals.
//!
//! Rows are sorted `(column, value)` lists with no explicit zeros. Elimination
//! is incremental: each new row is reduced against the current pivots and,
//! if anything survives, becomes a pivot at its leading column.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Sparse vector with strictly increasing column indices and nonzero values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseVec {
    entries: Vec<(usize, Q)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from unsorted, possibly repeated entries; duplicates are summed.
    pub fn from_entries<I: IntoIterator<Item = (usize, Q)>>(iter: I) -> Self {
        let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
        for (c, v) in iter {
            *acc.entry(c).or_insert_with(Q::zero) += v;
        }
        SparseVec {
            entries: acc.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, Q)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn leading(&self) -> Option<&(usize, Q)> {
        self.entries.first()
    }

    pub fn get(&self, col: usize) -> Q {
        match self.entries.binary_search_by_key(&col, |(c, _)| *c) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: &Q, other: &SparseVec) -> SparseVec {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i].clone());
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, factor * &b[j].1));
                j += 1;
            } else {
                let v = &a[i].1 + factor * &b[j].1;
                if !v.is_zero() {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        SparseVec { entries: out }
    }

    pub fn scale(&self, factor: &Q) -> SparseVec {
        if factor.is_zero() {
            return SparseVec::new();
        }
        SparseVec {
            entries: self
                .entries
                .iter()
                .map(|(c, v)| (*c, v * factor))
                .collect(),
        }
    }

    /// Dot product with a dense vector.
    pub fn dot_dense(&self, dense: &[Q]) -> Q {
        self.entries
            .iter()
            .fold(Q::zero(), |acc, (c, v)| acc + v * &dense[*c])
    }

    pub fn to_dense(&self, ncols: usize) -> Vec<Q> {
        let mut d = vec![Q::zero(); ncols];
        for (c, v) in &self.entries {
            d[*c] = v.clone();
        }
        d
    }
}

/// Row echelon form accumulated incrementally.
#[derive(Debug, Clone, Default)]
pub struct Echelon {
    ncols: usize,
    // pivot column -> row whose leading entry is 1 at that column
    pivots: BTreeMap<usize, SparseVec>,
}

impl Echelon {
    pub fn new(ncols: usize) -> Self {
        Echelon {
            ncols,
            pivots: BTreeMap::new(),
        }
    }

    pub fn from_rows<'a, I: IntoIterator<Item = &'a SparseVec>>(ncols: usize, rows: I) -> Self {
        let mut e = Echelon::new(ncols);
        for r in rows {
            e.insert(r.clone());
        }
        e
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    /// Reduces `row` against the current pivots (leading terms only).
    pub fn reduce(&self, mut row: SparseVec) -> SparseVec {
        // Walk the row's columns in order; a column with a pivot is eliminated.
        let mut cursor = 0usize;
        loop {
            let next = row.entries.iter().find(|(c, _)| *c >= cursor).cloned();
            let Some((c, v)) = next else { break };
            if let Some(p) = self.pivots.get(&c) {
                row = row.axpy(&-v, p);
            } else {
                cursor = c + 1;
            }
        }
        row
    }

    /// Adds a row; returns true when the rank increased.
    pub fn insert(&mut self, row: SparseVec) -> bool {
        let reduced = self.reduce(row);
        match reduced.leading().cloned() {
            None => false,
            Some((c, v)) => {
                let inv = v.recip();
                self.pivots.insert(c, reduced.scale(&inv));
                true
            }
        }
    }

    pub fn contains(&self, row: &SparseVec) -> bool {
        self.reduce(row.clone()).is_zero()
    }

    /// Fully reduced form: every pivot column is zero in all other pivot rows.
    pub fn reduced_rows(&self) -> BTreeMap<usize, SparseVec> {
        let mut rows = self.pivots.clone();
        let cols: Vec<usize> = rows.keys().copied().collect();
        for &pc in cols.iter().rev() {
            let prow = rows[&pc].clone();
            for &other in cols.iter().filter(|&&c| c < pc) {
                let coeff = rows[&other].get(pc);
                if !coeff.is_zero() {
                    let updated = rows[&other].axpy(&-coeff, &prow);
                    rows.insert(other, updated);
                }
            }
        }
        rows
    }

    /// Basis of `{ w : r . w = 0 for every inserted row r }`, one vector per free column.
    pub fn null_space(&self) -> Vec<Vec<Q>> {
        let rows = self.reduced_rows();
        let mut basis = Vec::new();
        for free in (0..self.ncols).filter(|c| !rows.contains_key(c)) {
            let mut w = vec![Q::zero(); self.ncols];
            w[free] = Q::one();
            for (pc, r) in &rows {
                let coeff = r.get(free);
                if !coeff.is_zero() {
                    w[*pc] = -coeff;
                }
            }
            basis.push(w);
        }
        basis
    }
}

pub fn rank<'a, I: IntoIterator<Item = &'a SparseVec>>(ncols: usize, rows: I) -> usize {
    Echelon::from_rows(ncols, rows).rank()
}

/// Rank by plain Gaussian elimination on a dense copy of the rows. Slow, and
/// kept separate from [`Echelon`] so the two can check each other.
pub fn dense_rank<'a, I: IntoIterator<Item = &'a SparseVec>>(ncols: usize, rows: I) -> usize {
    let mut m: Vec<Vec<Q>> = rows.into_iter().map(|r| r.to_dense(ncols)).collect();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col].clone();
        for i in rank + 1..m.len() {
            if m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] / &pivot;
            for j in col..ncols {
                let d = &f * &m[rank][j];
                m[i][j] -= d;
            }
        }
        rank += 1;
    }
    rank
}

/// Scales a rational vector so its entries are coprime integers with a positive leading entry.
pub fn primitive_integer_vector(v: &[Q]) -> Vec<Q> {
    use num_integer::Integer;
    let mut lcm = BigInt::one();
    for x in v.iter().filter(|x| !x.is_zero()) {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
    let mut g = BigInt::zero();
    for x in ints.iter().filter(|x| !x.is_zero()) {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return v.to_vec();
    }
    let lead_negative = ints.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    let sign = if lead_negative { -BigInt::one() } else { BigInt::one() };
    ints.into_iter()
        .map(|x| Q::from_integer(x / &g * &sign))
        .collect()
}
