//! Mutually disjoint families, Sudoku assembly `M = 1*A_1 + ... + n^2*A_{n^2}`
//! and a randomized family search.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{validate_sperm, DenseBits, MatrixRecord, SPermMatrix, Sigma};
use crate::oracle::{in_pool, is_disjoint};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisjointFamily {
    n: usize,
    members: Vec<SPermMatrix>,
}

fn first_overlap(members: &[SPermMatrix]) -> Option<(usize, usize)> {
    (0..members.len()).find_map(|i| {
        (i + 1..members.len())
            .find(|&j| !is_disjoint(&members[i], &members[j]).unwrap_or(false))
            .map(|j| (i, j))
    })
}

impl DisjointFamily {
    pub fn new(n: usize, members: Vec<SPermMatrix>) -> Result<Self> {
        if members.is_empty() || members.len() > n * n {
            return Err(Error::Domain(format!(
                "family size {} outside [1, {}]",
                members.len(),
                n * n
            )));
        }
        if let Some(m) = members.iter().find(|m| m.n() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                found: m.n(),
            });
        }
        if let Some((i, j)) = first_overlap(&members) {
            return Err(Error::NotDisjoint(i, j));
        }
        Ok(DisjointFamily { n, members })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[SPermMatrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.members.len() == self.n * self.n
    }

    /// Order-insensitive key: members sorted by their offset encoding.
    pub fn canonical(&self) -> Vec<SPermMatrix> {
        let mut v = self.members.clone();
        v.sort();
        v
    }

    pub fn to_record(&self) -> FamilyRecord {
        FamilyRecord {
            n: self.n,
            k: self.members.len(),
            members: self.members.iter().map(SPermMatrix::to_record).collect(),
        }
    }

    pub fn from_record(rec: &FamilyRecord) -> Result<Self> {
        if rec.k != rec.members.len() {
            return Err(Error::Format(format!(
                "k = {} but {} members listed",
                rec.k,
                rec.members.len()
            )));
        }
        let members = rec
            .members
            .iter()
            .map(SPermMatrix::from_record)
            .collect::<Result<Vec<_>>>()?;
        DisjointFamily::new(rec.n, members)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub n: usize,
    pub k: usize,
    pub members: Vec<MatrixRecord>,
}

/// An `n^2 x n^2` table over `[1, n^2]` whose rows, columns and blocks are
/// all permutations of `[1, n^2]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SudokuMatrix {
    n: usize,
    cells: Vec<Vec<u32>>,
}

impl SudokuMatrix {
    pub fn new(n: usize, cells: Vec<Vec<u32>>) -> Result<Self> {
        if !is_sudoku(n, &cells)? {
            return Err(Error::NotSudoku(
                "a row, column or block repeats a value".into(),
            ));
        }
        Ok(SudokuMatrix { n, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[Vec<u32>] {
        &self.cells
    }

    /// `n^2` lines of `n^2` space-separated values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in &self.cells {
            let words: Vec<String> = row.iter().map(u32::to_string).collect();
            s.push_str(&words.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(n: usize, text: &str) -> Result<Self> {
        let cells = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|w| {
                        w.parse::<u32>()
                            .map_err(|e| Error::Format(format!("{w:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SudokuMatrix::new(n, cells)
    }
}

/// Whether every row, column and block of an `n^2 x n^2` table is a
/// permutation of `[1, n^2]`.
pub fn is_sudoku(n: usize, table: &[Vec<u32>]) -> Result<bool> {
    let side = n * n;
    if table.len() != side || table.iter().any(|r| r.len() != side) {
        return Err(Error::Shape(format!("expected a {side}x{side} table")));
    }
    let is_perm = |vals: &mut dyn Iterator<Item = u32>| {
        let mut seen = vec![false; side + 1];
        for v in vals {
            let v = v as usize;
            if !(1..=side).contains(&v) || std::mem::replace(&mut seen[v], true) {
                return false;
            }
        }
        true
    };
    let rows = (0..side).all(|i| is_perm(&mut table[i].iter().copied()));
    let cols = (0..side).all(|j| is_perm(&mut (0..side).map(|i| table[i][j])));
    let blocks = (0..n).all(|k| {
        (0..n).all(|l| {
            is_perm(&mut (0..n).flat_map(|r| (0..n).map(move |c| table[k * n + r][l * n + c])))
        })
    });
    Ok(rows && cols && blocks)
}

/// Sums `v * A_v` over an ordered list of members.
pub fn assemble_members(n: usize, members: &[SPermMatrix]) -> Result<SudokuMatrix> {
    if members.len() != n * n {
        return Err(Error::IncompleteFamily {
            found: members.len(),
            needed: n * n,
        });
    }
    if let Some((i, j)) = first_overlap(members) {
        return Err(Error::NotDisjoint(i, j));
    }
    let side = n * n;
    let mut cells = vec![vec![0u32; side]; side];
    for (v, m) in members.iter().enumerate() {
        for (i, j) in m.cells() {
            cells[i][j] = v as u32 + 1;
        }
    }
    SudokuMatrix::new(n, cells)
}

pub fn assemble(family: &DisjointFamily) -> Result<SudokuMatrix> {
    assemble_members(family.n, &family.members)
}

/// Member `A_v` is the indicator of the cells holding `v`.
pub fn decompose(m: &SudokuMatrix) -> Result<DisjointFamily> {
    let n = m.n;
    let members = (1..=(n * n) as u32)
        .map(|v| {
            let mut d = DenseBits::zeros(n);
            for (i, row) in m.cells.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    if x == v {
                        d.set(i, j, true);
                    }
                }
            }
            validate_sperm(&d).map_err(|e| Error::NotSudoku(format!("value {v}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    DisjointFamily::new(n, members)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchParams {
    /// Total candidate draws allowed.
    pub budget: u64,
    /// Consecutive rejected draws before the newest member is dropped.
    pub stall_limit: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            budget: 1_000_000,
            stall_limit: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub family: DisjointFamily,
    pub draws: u64,
    pub backtracks: u64,
}

/// Grows a family from uniform random candidates, accepting any candidate
/// disjoint from every current member. After `stall_limit` consecutive
/// rejections the most recent member is removed. Fails with `Exhausted`
/// once `budget` draws have been spent.
pub fn find_family(n: usize, k: usize, seed: u64, params: SearchParams) -> Result<SearchOutcome> {
    if n == 0 || k == 0 || k > n * n {
        return Err(Error::Domain(format!(
            "need 1 <= k <= n^2, got n = {n}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<SPermMatrix> = Vec::with_capacity(k);
    let (mut draws, mut stall, mut backtracks) = (0u64, 0u64, 0u64);
    while members.len() < k {
        if draws >= params.budget {
            return Err(Error::Exhausted { draws });
        }
        draws += 1;
        let cand = SPermMatrix::random(n, &mut rng);
        if members
            .iter()
            .all(|m| is_disjoint(m, &cand).expect("same n"))
        {
            members.push(cand);
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_limit && !members.is_empty() {
                members.pop();
                backtracks += 1;
                stall = 0;
            }
        }
    }
    Ok(SearchOutcome {
        family: DisjointFamily::new(n, members)?,
        draws,
        backtracks,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Census {
    /// Unordered complete disjoint families.
    pub families: u64,
    /// Valid Sudoku tables among all labeled 4-subsets.
    pub sudoku_count: u64,
    /// Disjoint unordered pairs.
    pub disjoint_pairs: u64,
}

/// Exhaustive count over the 16 matrices of `n = 2`.
pub fn census_n2() -> Census {
    let all: Vec<SPermMatrix> = Sigma::new(2, false).expect("n = 2").iter().collect();
    let m = all.len();
    let adj: Vec<Vec<bool>> = all
        .iter()
        .map(|a| {
            all.iter()
                .map(|b| is_disjoint(a, b).expect("same n"))
                .collect()
        })
        .collect();
    let disjoint_pairs = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .filter(|&(i, j)| adj[i][j])
        .count() as u64;

    let mut families = 0u64;
    for a in 0..m {
        for b in (a + 1..m).filter(|&b| adj[a][b]) {
            for c in (b + 1..m).filter(|&c| adj[a][c] && adj[b][c]) {
                families += (c + 1..m)
                    .filter(|&d| adj[a][d] && adj[b][d] && adj[c][d])
                    .count() as u64;
            }
        }
    }

    // Independent route: label every 4-subset in every order and test the table.
    let mut sudoku_count = 0u64;
    let orders = crate::perm::all_perms(4);
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for d in c + 1..m {
                    let subset = [a, b, c, d];
                    for order in &orders {
                        let mut table = vec![vec![0u32; 4]; 4];
                        for (v, &pos) in order.images().iter().enumerate() {
                            for (i, j) in all[subset[pos as usize]].cells() {
                                table[i][j] += v as u32 + 1;
                            }
                        }
                        sudoku_count += is_sudoku(2, &table).expect("4x4") as u64;
                    }
                }
            }
        }
    }
    Census {
        families,
        sudoku_count,
        disjoint_pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateReport {
    pub runs: u64,
    pub successes: u64,
    pub distinct_families: u64,
    pub total_draws: u64,
}

/// Repeats the complete-family search for `n` with seeds `seed + i`.
pub fn family_rate_experiment(
    n: usize,
    runs: u64,
    seed: u64,
    params: SearchParams,
    workers: usize,
) -> Result<RateReport> {
    if runs == 0 {
        return Err(Error::Domain("runs must be at least 1".into()));
    }
    let outcomes: Vec<(u64, Option<Vec<SPermMatrix>>)> = in_pool(workers, || {
        (0..runs)
            .into_par_iter()
            .map(
                |i| match find_family(n, n * n, seed.wrapping_add(i), params) {
                    Ok(o) => (o.draws, Some(o.family.canonical())),
                    Err(Error::Exhausted { draws }) => (draws, None),
                    Err(e) => unreachable!("search cannot fail otherwise: {e}"),
                },
            )
            .collect()
    });
    let total_draws = outcomes.iter().map(|o| o.0).sum();
    let found: Vec<_> = outcomes.into_iter().filter_map(|o| o.1).collect();
    let distinct: BTreeSet<_> = found.iter().collect();
    Ok(RateReport {
        runs,
        successes: found.len() as u64,
        distinct_families: distinct.len() as u64,
        total_draws,
    })
}
