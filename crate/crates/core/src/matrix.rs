//! S-permutation matrices in offset encoding, their dense bit images,
//! enumeration of the full set, and block-diagonal `C * A * D` composition.
//!
//! Indexing is 0-based throughout. For block `(k, l)` (block-row `k`,
//! block-column `l`) the single 1 sits at global cell
//! `(k*n + row_off[k][l], l*n + col_off[l][k])`. Each `row_off[k]` being a
//! permutation is exactly the "one 1 per global row" constraint inside
//! block-row `k`, and dually for `col_off[l]` and columns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::perm::{all_perms, theta_inv, Perm};

/// Largest `n` the exhaustive operations accept without an override.
pub const EXHAUSTIVE_LIMIT: usize = 3;

pub const FORMAT_VERSION: u32 = 1;

fn check_guard(n: usize, force: bool) -> Result<()> {
    if n > EXHAUSTIVE_LIMIT && !force {
        Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        })
    } else {
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SPermMatrix {
    n: usize,
    row_off: Vec<Perm>,
    col_off: Vec<Perm>,
}

impl SPermMatrix {
    pub fn new(row_off: Vec<Perm>, col_off: Vec<Perm>) -> Result<Self> {
        let n = row_off.len();
        if col_off.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: col_off.len(),
            });
        }
        if let Some(p) = row_off.iter().chain(&col_off).find(|p| p.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                found: p.len(),
            });
        }
        Ok(SPermMatrix {
            n,
            row_off,
            col_off,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_off(&self) -> &[Perm] {
        &self.row_off
    }

    pub fn col_off(&self) -> &[Perm] {
        &self.col_off
    }

    /// Local (row, column) offset of the 1 inside block `(k, l)`.
    #[inline]
    pub fn offset(&self, k: usize, l: usize) -> (usize, usize) {
        (self.row_off[k].apply(l), self.col_off[l].apply(k))
    }

    /// Global coordinates of the 1 inside block `(k, l)`.
    #[inline]
    pub fn cell(&self, k: usize, l: usize) -> (usize, usize) {
        let (r, c) = self.offset(k, l);
        (k * self.n + r, l * self.n + c)
    }

    /// The `n^2` cells holding a 1, in block row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |k| (0..n).map(move |l| self.cell(k, l)))
    }

    pub fn to_dense(&self) -> DenseBits {
        let mut d = DenseBits::zeros(self.n);
        for (i, j) in self.cells() {
            d.set(i, j, true);
        }
        d
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.to_dense().to_rows()
    }

    pub fn to_record(&self) -> MatrixRecord {
        MatrixRecord {
            format_version: FORMAT_VERSION,
            n: self.n,
            row_off: self.row_off.iter().map(|p| p.images().to_vec()).collect(),
            col_off: self.col_off.iter().map(|p| p.images().to_vec()).collect(),
        }
    }

    pub fn from_record(rec: &MatrixRecord) -> Result<Self> {
        if rec.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                rec.format_version
            )));
        }
        let perms = |rows: &[Vec<u8>]| -> Result<Vec<Perm>> {
            rows.iter().map(|r| Perm::new(r.clone())).collect()
        };
        let m = SPermMatrix::new(perms(&rec.row_off)?, perms(&rec.col_off)?)?;
        if m.n != rec.n {
            return Err(Error::SizeMismatch {
                expected: rec.n,
                found: m.n,
            });
        }
        Ok(m)
    }

    /// Uniform draw from the whole set: `2n` independent uniform permutations.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let row_off = (0..n).map(|_| Perm::random(n, rng)).collect();
        let col_off = (0..n).map(|_| Perm::random(n, rng)).collect();
        SPermMatrix {
            n,
            row_off,
            col_off,
        }
    }
}

/// Versioned text record for one matrix; offsets are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub format_version: u32,
    pub n: usize,
    pub row_off: Vec<Vec<u8>>,
    pub col_off: Vec<Vec<u8>>,
}

pub fn random_sperm<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SPermMatrix {
    SPermMatrix::random(n, rng)
}

/// Row-major packed image of an `n^2 x n^2` binary matrix.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct DenseBits {
    n: usize,
    words: Vec<u64>,
}

impl DenseBits {
    pub fn zeros(n: usize) -> Self {
        let bits = n.pow(4);
        DenseBits {
            n,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.n * self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let side = self.side();
        assert!(i < side && j < side, "cell ({i}, {j}) out of range");
        i * side + j
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let b = self.index(i, j);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let b = self.index(i, j);
        if v {
            self.words[b / 64] |= 1 << (b % 64);
        } else {
            self.words[b / 64] &= !(1 << (b % 64));
        }
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// True when no cell is set in both images.
    pub fn and_is_zero(&self, other: &DenseBits) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0))
    }

    /// The image as a single `u128`, available for `n <= 3` (81 bits).
    pub fn to_u128(&self) -> Option<u128> {
        match self.words.as_slice() {
            [] => Some(0),
            [lo] => Some(*lo as u128),
            [lo, hi] => Some(*lo as u128 | (*hi as u128) << 64),
            _ => None,
        }
    }

    pub fn from_rows(n: usize, rows: &[Vec<u8>]) -> Result<Self> {
        let side = n * n;
        if rows.len() != side {
            return Err(Error::Shape(format!(
                "expected {side} rows, found {}",
                rows.len()
            )));
        }
        let mut d = DenseBits::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != side {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {side}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => d.set(i, j, true),
                    _ => return Err(Error::Shape(format!("entry ({i}, {j}) is {x}, not 0/1"))),
                }
            }
        }
        Ok(d)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        let side = self.side();
        (0..side)
            .map(|i| (0..side).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }

    /// `n^2` lines of `n^2` characters `0`/`1`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.side() * (self.side() + 1));
        for row in self.to_rows() {
            s.extend(row.iter().map(|&b| if b == 1 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(n: usize, text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(Error::Format(format!("unexpected character {c:?}"))),
                    })
                    .collect::<Result<Vec<u8>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DenseBits::from_rows(n, &rows)
    }
}

/// Recovers the offset encoding of a dense image, reporting the first
/// violated constraint (rows, then columns, then blocks).
pub fn validate_sperm(d: &DenseBits) -> Result<SPermMatrix> {
    let n = d.n();
    let side = d.side();
    for i in 0..side {
        if (0..side).filter(|&j| d.get(i, j)).count() != 1 {
            return Err(Error::NotSPermutation(Violation::Row(i)));
        }
    }
    for j in 0..side {
        if (0..side).filter(|&i| d.get(i, j)).count() != 1 {
            return Err(Error::NotSPermutation(Violation::Column(j)));
        }
    }
    let mut row_off = vec![vec![0usize; n]; n];
    let mut col_off = vec![vec![0usize; n]; n];
    for k in 0..n {
        for l in 0..n {
            let mut hits = (0..n)
                .flat_map(|r| (0..n).map(move |c| (r, c)))
                .filter(|&(r, c)| d.get(k * n + r, l * n + c));
            match (hits.next(), hits.next()) {
                (Some((r, c)), None) => {
                    row_off[k][l] = r;
                    col_off[l][k] = c;
                }
                _ => return Err(Error::NotSPermutation(Violation::Block(k, l))),
            }
        }
    }
    // One 1 per row and per block forces every row_off[k] to be a bijection.
    let to_perms = |t: Vec<Vec<usize>>| -> Result<Vec<Perm>> {
        t.iter().map(|r| Perm::from_usizes(r)).collect()
    };
    SPermMatrix::new(to_perms(row_off)?, to_perms(col_off)?)
}

/// Odometer over `2n`-tuples of permutations of `[0, n)`, most significant
/// digit first, each digit in lexicographic permutation order.
#[derive(Clone, Debug)]
pub struct PermTuples {
    n: usize,
    perms: Vec<Perm>,
}

impl PermTuples {
    pub fn new(n: usize) -> Self {
        PermTuples {
            n,
            perms: all_perms(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perms(&self) -> &[Perm] {
        &self.perms
    }

    /// `(n!)^(2n)` when it fits in 64 bits.
    pub fn len(&self) -> Option<u64> {
        (self.perms.len() as u64).checked_pow(2 * self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn digits_at(&self, mut index: u64) -> Vec<usize> {
        let base = self.perms.len() as u64;
        let mut digits = vec![0usize; 2 * self.n];
        for d in digits.iter_mut().rev() {
            *d = (index % base) as usize;
            index /= base;
        }
        digits
    }

    fn split(&self, digits: &[usize]) -> (Vec<Perm>, Vec<Perm>) {
        let (a, b) = digits.split_at(self.n);
        (
            a.iter().map(|&i| self.perms[i].clone()).collect(),
            b.iter().map(|&i| self.perms[i].clone()).collect(),
        )
    }

    fn iter_digits(&self, start: u64, end: Option<u64>) -> DigitIter {
        let exhausted = self.len().is_some_and(|len| start >= len);
        DigitIter {
            base: self.perms.len(),
            digits: self.digits_at(start),
            remaining: end.map(|e| e.saturating_sub(start)),
            done: exhausted,
        }
    }
}

struct DigitIter {
    base: usize,
    digits: Vec<usize>,
    remaining: Option<u64>,
    done: bool,
}

impl DigitIter {
    fn step(&mut self) -> Option<Vec<usize>> {
        if self.done || self.remaining == Some(0) {
            return None;
        }
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        let out = self.digits.clone();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < self.base {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(out)
    }
}

/// The set of all `n^2 x n^2` S-permutation matrices, in the order
/// lexicographic over `(row_off[0..n], col_off[0..n])`.
#[derive(Clone, Debug)]
pub struct Sigma {
    tuples: PermTuples,
}

impl Sigma {
    pub fn new(n: usize, force: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        check_guard(n, force)?;
        Ok(Sigma {
            tuples: PermTuples::new(n),
        })
    }

    pub fn n(&self) -> usize {
        self.tuples.n
    }

    pub fn len(&self) -> Option<u64> {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn matrix_at(&self, index: u64) -> SPermMatrix {
        let (row_off, col_off) = self.tuples.split(&self.tuples.digits_at(index));
        SPermMatrix {
            n: self.n(),
            row_off,
            col_off,
        }
    }

    pub fn iter(&self) -> SigmaIter<'_> {
        self.range(0, self.len())
    }

    /// Matrices with stream index in `[start, end)`.
    pub fn range(&self, start: u64, end: Option<u64>) -> SigmaIter<'_> {
        SigmaIter {
            tuples: &self.tuples,
            inner: self.tuples.iter_digits(start, end),
        }
    }
}

pub struct SigmaIter<'a> {
    tuples: &'a PermTuples,
    inner: DigitIter,
}

impl Iterator for SigmaIter<'_> {
    type Item = SPermMatrix;

    fn next(&mut self) -> Option<SPermMatrix> {
        let digits = self.inner.step()?;
        let (row_off, col_off) = self.tuples.split(&digits);
        Some(SPermMatrix {
            n: self.tuples.n,
            row_off,
            col_off,
        })
    }
}

/// Stream of every S-permutation matrix for `n`; refuses `n > 3` unless forced.
pub fn enumerate_sigma(n: usize, force: bool) -> Result<Vec<SPermMatrix>> {
    let sigma = Sigma::new(n, force)?;
    Ok(sigma.iter().collect())
}

/// Permutation images of the diagonal blocks of the two block-diagonal
/// factors `C = diag(C_1..C_n)` and `D = diag(D_1..D_n)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CadFactors {
    pub c: Vec<Perm>,
    pub d: Vec<Perm>,
}

impl CadFactors {
    pub fn new(c: Vec<Perm>, d: Vec<Perm>) -> Result<Self> {
        let n = c.len();
        if d.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: d.len(),
            });
        }
        if let Some(p) = c.iter().chain(&d).find(|p| p.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                found: p.len(),
            });
        }
        Ok(CadFactors { c, d })
    }

    pub fn identity(n: usize) -> Self {
        CadFactors {
            c: vec![Perm::identity(n); n],
            d: vec![Perm::identity(n); n],
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        CadFactors {
            c: (0..n).map(|_| Perm::random(n, rng)).collect(),
            d: (0..n).map(|_| Perm::random(n, rng)).collect(),
        }
    }

    /// Block-diagonal dense `n^2 x n^2` matrices `(C, D)`.
    pub fn to_dense_pair(&self) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
        (block_diag(&self.c), block_diag(&self.d))
    }
}

fn block_diag(blocks: &[Perm]) -> Vec<Vec<u8>> {
    let n = blocks.len();
    let side = n * n;
    let mut m = vec![vec![0u8; side]; side];
    for (b, p) in blocks.iter().enumerate() {
        for (i, row) in theta_inv(p).into_iter().enumerate() {
            for (j, x) in row.into_iter().enumerate() {
                m[b * n + i][b * n + j] = x;
            }
        }
    }
    m
}

/// Every factor tuple for `n`, in the same odometer order as [`Sigma`].
pub fn all_factors(n: usize, force: bool) -> Result<impl Iterator<Item = CadFactors>> {
    check_guard(n, force)?;
    let tuples = PermTuples::new(n);
    let mut iter = tuples.iter_digits(0, tuples.len());
    Ok(std::iter::from_fn(move || {
        let digits = iter.step()?;
        let (c, d) = tuples.split(&digits);
        Some(CadFactors { c, d })
    }))
}

/// `B = C * A * D` computed on offsets.
///
/// Row `i` of `C_k * X` is row `θ(C_k)(i)` of `X`, so a 1 at local row `r`
/// moves to `θ(C_k)^{-1}(r)`. Column `c` of `X * D_l` moves to `θ(D_l)(c)`.
pub fn compose_cad(a: &SPermMatrix, f: &CadFactors) -> Result<SPermMatrix> {
    if f.n() != a.n {
        return Err(Error::SizeMismatch {
            expected: a.n,
            found: f.n(),
        });
    }
    let row_off = a
        .row_off
        .iter()
        .zip(&f.c)
        .map(|(r, c)| r.then(&c.inverse()))
        .collect();
    let col_off = a
        .col_off
        .iter()
        .zip(&f.d)
        .map(|(col, d)| col.then(d))
        .collect();
    Ok(SPermMatrix {
        n: a.n,
        row_off,
        col_off,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn mul(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
        let s = a.len();
        (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| (0..s).map(|m| a[i][m] * b[m][j]).sum())
                    .collect()
            })
            .collect()
    }

    /// Independent check of the three one-per-line families on a 0/1 table.
    fn brute_is_sperm(n: usize, rows: &[Vec<u8>]) -> bool {
        let s = n * n;
        let one = |it: &mut dyn Iterator<Item = u8>| it.map(u32::from).sum::<u32>() == 1;
        (0..s).all(|i| one(&mut rows[i].iter().copied()))
            && (0..s).all(|j| one(&mut (0..s).map(|i| rows[i][j])))
            && (0..n).all(|k| {
                (0..n).all(|l| {
                    one(&mut (0..n).flat_map(|r| (0..n).map(move |c| rows[k * n + r][l * n + c])))
                })
            })
    }

    #[test]
    fn n1_single_matrix() {
        let all = enumerate_sigma(1, false).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].to_rows(), vec![vec![1]]);
    }

    #[test]
    fn identity_offsets_are_not_representable_as_dense_diagonal() {
        // The 4x4 identity puts (0,0) and (1,1) in block (0,0).
        let mut d = DenseBits::zeros(2);
        for i in 0..4 {
            d.set(i, i, true);
        }
        assert_eq!(
            validate_sperm(&d),
            Err(Error::NotSPermutation(Violation::Block(0, 0)))
        );
        assert_eq!(
            validate_sperm(&DenseBits::zeros(2)),
            Err(Error::NotSPermutation(Violation::Row(0)))
        );
    }

    #[test]
    fn validate_reports_column_violation() {
        let mut d = DenseBits::zeros(2);
        for i in 0..4 {
            d.set(i, 0, true);
        }
        assert_eq!(
            validate_sperm(&d),
            Err(Error::NotSPermutation(Violation::Column(0)))
        );
    }

    #[test]
    fn n2_enumeration_is_exactly_the_definition() {
        // Brute force: every 4x4 permutation matrix passing the block test.
        let sigma = enumerate_sigma(2, false).unwrap();
        let from_offsets: HashSet<Vec<Vec<u8>>> = sigma.iter().map(|m| m.to_rows()).collect();
        let mut from_def = HashSet::new();
        for p in all_perms(4) {
            let rows = theta_inv(&p);
            if brute_is_sperm(2, &rows) {
                from_def.insert(rows);
            }
        }
        assert_eq!(sigma.len(), 16);
        assert_eq!(from_offsets.len(), 16);
        assert_eq!(from_offsets, from_def);
    }

    #[test]
    fn offset_permutation_iff_one_per_row() {
        // Any 0..n map as row_off[k] gives one 1 per global row exactly when it is a bijection.
        let n = 2;
        let col = vec![Perm::identity(n); n];
        for a in 0..n {
            for b in 0..n {
                let mut rows = vec![vec![0u8; 4]; 4];
                let r = [[a, b], [0, 1]];
                for k in 0..n {
                    for l in 0..n {
                        rows[k * n + r[k][l]][l * n + col[l].apply(k)] = 1;
                    }
                }
                assert_eq!(brute_is_sperm(n, &rows), a != b, "row_off[0] = [{a},{b}]");
            }
        }
    }

    #[test]
    fn dense_round_trip_exhaustive_n2_and_sampled_n3() {
        for m in enumerate_sigma(2, false).unwrap() {
            let d = m.to_dense();
            assert_eq!(d.popcount(), 4);
            assert_eq!(validate_sperm(&d).unwrap(), m);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let m = random_sperm(3, &mut rng);
            let d = m.to_dense();
            assert_eq!(d.popcount(), 9);
            assert!(brute_is_sperm(3, &d.to_rows()));
            assert_eq!(validate_sperm(&d).unwrap(), m);
        }
    }

    #[test]
    fn enumeration_counts_order_and_no_duplicates() {
        for (n, count) in [(1usize, 1usize), (2, 16), (3, 46_656)] {
            let s = Sigma::new(n, false).unwrap();
            assert_eq!(s.len(), Some(count as u64));
            let all: Vec<_> = s.iter().collect();
            assert_eq!(all.len(), count);
            assert!(
                all.windows(2).all(|w| w[0] < w[1]),
                "strictly increasing order"
            );
        }
        let s = Sigma::new(3, false).unwrap();
        assert_eq!(s.matrix_at(12_345), s.iter().nth(12_345).unwrap());
        assert_eq!(s.range(46_650, None).count(), 6);
        assert_eq!(s.range(10, Some(20)).count(), 10);
        assert_eq!(s.range(50_000, None).count(), 0);
    }

    #[test]
    fn guard_refuses_n4() {
        assert_eq!(
            Sigma::new(4, false).unwrap_err(),
            Error::TooLarge { n: 4, limit: 3 }
        );
        let forced = Sigma::new(4, true).unwrap();
        assert_eq!(forced.len(), Some(24u64.pow(8)));
        assert_eq!(forced.iter().take(3).count(), 3);
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let a = random_sperm(n, &mut rng);
            assert_eq!(compose_cad(&a, &CadFactors::identity(n)).unwrap(), a);
        }
    }

    #[test]
    fn compose_matches_dense_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 3] {
            for _ in 0..100 {
                let a = random_sperm(n, &mut rng);
                let f = CadFactors::random(n, &mut rng);
                let (c, d) = f.to_dense_pair();
                let expected = mul(&mul(&c, &a.to_rows()), &d);
                assert_eq!(compose_cad(&a, &f).unwrap().to_rows(), expected);
            }
        }
    }

    #[test]
    fn compose_swap_first_block_row() {
        let sigma = Sigma::new(2, false).unwrap();
        let a = sigma.matrix_at(6);
        let swap = Perm::new(vec![1, 0]).unwrap();
        let id = Perm::identity(2);
        let f = CadFactors::new(vec![swap, id.clone()], vec![id.clone(), id]).unwrap();
        let (c, d) = f.to_dense_pair();
        let expected = mul(&mul(&c, &a.to_rows()), &d);
        let b = compose_cad(&a, &f).unwrap();
        assert_eq!(b.to_rows(), expected);
        // Second block-row is untouched, the first has its two rows swapped.
        let (ar, br) = (a.to_rows(), b.to_rows());
        assert_eq!(ar[0], br[1]);
        assert_eq!(ar[1], br[0]);
        assert_eq!(ar[2..], br[2..]);
    }

    #[test]
    fn compose_is_injective_in_the_factors() {
        let a = Sigma::new(2, false).unwrap().matrix_at(9);
        let images: HashSet<_> = all_factors(2, false)
            .unwrap()
            .map(|f| compose_cad(&a, &f).unwrap())
            .collect();
        assert_eq!(images.len(), 16);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = random_sperm(3, &mut rng);
        let mut seen: HashMap<SPermMatrix, CadFactors> = HashMap::new();
        for _ in 0..100_000 {
            let f = CadFactors::random(3, &mut rng);
            let b = compose_cad(&a, &f).unwrap();
            if let Some(prev) = seen.insert(b, f.clone()) {
                assert_eq!(prev, f, "two factor tuples gave the same image");
            }
        }
    }

    #[test]
    fn random_sperm_is_uniform_on_n2() {
        let sigma = Sigma::new(2, false).unwrap();
        let index: HashMap<_, _> = sigma.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut counts = [0u32; 16];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..16_000 {
            counts[index[&random_sperm(2, &mut rng)]] += 1;
        }
        let sd = (16_000.0f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 4.0 * sd, "count {c}");
        }
    }

    #[test]
    fn random_sperm_seed_determinism() {
        let a = random_sperm(3, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_sperm(3, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(
            random_sperm(1, &mut ChaCha8Rng::seed_from_u64(8)).to_rows(),
            vec![vec![1]]
        );
    }

    #[test]
    fn record_and_text_formats() {
        let m = Sigma::new(2, false).unwrap().matrix_at(13);
        let json = serde_json::to_string(&m.to_record()).unwrap();
        let back: MatrixRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(SPermMatrix::from_record(&back).unwrap(), m);
        let text = m.to_dense().to_text();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.len() == 4));
        assert_eq!(DenseBits::from_text(2, &text).unwrap(), m.to_dense());

        let bad = MatrixRecord {
            format_version: 1,
            n: 2,
            row_off: vec![vec![0, 0], vec![0, 1]],
            col_off: vec![vec![0, 1], vec![0, 1]],
        };
        assert!(SPermMatrix::from_record(&bad).is_err());
    }
}
