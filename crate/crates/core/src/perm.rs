//! Permutations of `[0, n)` in one-line notation and the permutation-matrix
//! isomorphism `a[i][j] = 1 <=> p(i) = j`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `[0, n)`; position `i` holds the image of `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Perm(Vec<u8>);

impl Perm {
    pub fn new(images: Vec<u8>) -> Result<Self> {
        let n = images.len();
        if n > u8::MAX as usize + 1 {
            return Err(Error::NotPermutation(format!("length {n} exceeds 256")));
        }
        let mut seen = vec![false; n];
        for &x in &images {
            let x = x as usize;
            if x >= n || seen[x] {
                return Err(Error::NotPermutation(format!("{images:?}")));
            }
            seen[x] = true;
        }
        Ok(Perm(images))
    }

    pub fn from_usizes(images: &[usize]) -> Result<Self> {
        let bytes = images
            .iter()
            .map(|&x| u8::try_from(x).map_err(|_| Error::NotPermutation(format!("{images:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Perm::new(bytes)
    }

    pub fn identity(n: usize) -> Self {
        Perm((0..n).map(|i| i as u8).collect())
    }

    /// Uniform random permutation via Fisher-Yates.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut p = Perm::identity(n);
        p.0.shuffle(rng);
        p
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u8; self.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u8;
        }
        Perm(inv)
    }

    /// `self.then(other)` maps `i` to `other(self(i))`.
    pub fn then(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len());
        Perm(self.0.iter().map(|&x| other.0[x as usize]).collect())
    }

    pub fn fixed_points(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|&(i, &x)| i == x as usize)
            .count()
    }

    pub fn is_derangement(&self) -> bool {
        self.fixed_points() == 0
    }
}

impl TryFrom<Vec<u8>> for Perm {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Perm::new(v)
    }
}

impl From<Perm> for Vec<u8> {
    fn from(p: Perm) -> Self {
        p.0
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self.0.iter().map(u8::to_string).collect();
        write!(f, "[{}]", words.join(","))
    }
}

/// All permutations of `[0, n)` in lexicographic one-line order.
pub fn all_perms(n: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..n).map(|i| i as u8).collect();
    loop {
        out.push(Perm(cur.clone()));
        if !next_permutation(&mut cur) {
            return out;
        }
    }
}

fn next_permutation(v: &mut [u8]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Reads a permutation off an `n x n` permutation matrix.
pub fn theta(rows: &[Vec<u8>]) -> Result<Perm> {
    let n = rows.len();
    let mut images = Vec::with_capacity(n);
    let mut col_count = vec![0usize; n];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotPermutationMatrix(format!(
                "row {i} has length {}, expected {n}",
                row.len()
            )));
        }
        let mut hit = None;
        for (j, &x) in row.iter().enumerate() {
            match x {
                0 => {}
                1 => {
                    if hit.replace(j).is_some() {
                        return Err(Error::NotPermutationMatrix(format!("row {i} has two 1s")));
                    }
                    col_count[j] += 1;
                }
                _ => {
                    return Err(Error::NotPermutationMatrix(format!(
                        "entry ({i}, {j}) is {x}, not 0/1"
                    )))
                }
            }
        }
        match hit {
            Some(j) => images.push(j),
            None => return Err(Error::NotPermutationMatrix(format!("row {i} has no 1"))),
        }
    }
    if let Some(j) = col_count.iter().position(|&c| c != 1) {
        return Err(Error::NotPermutationMatrix(format!(
            "column {j} has {} 1s",
            col_count[j]
        )));
    }
    Perm::from_usizes(&images)
}

pub fn theta_inv(p: &Perm) -> Vec<Vec<u8>> {
    let n = p.len();
    (0..n)
        .map(|i| {
            let mut row = vec![0u8; n];
            row[p.apply(i)] = 1;
            row
        })
        .collect()
}
