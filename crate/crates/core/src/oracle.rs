//! Exhaustive ground truth for disjointness counts.
//!
//! For `n <= 3` every dense image fits in a `u128` (81 bits), so the pair
//! sweeps reduce to `a & b == 0` over a cached table of all `(n!)^(2n)`
//! images. Work is split into fixed index-range shards; each shard produces
//! integer partials that are merged by addition, so results do not depend on
//! the worker count.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rayon::prelude::*;

use crate::counting::{nu, sigma_cardinality};
use crate::error::{Error, Result};
use crate::matrix::{all_factors, compose_cad, CadFactors, SPermMatrix, Sigma, EXHAUSTIVE_LIMIT};
use crate::Count;

/// Rows of the pair matrix handled per shard.
const SHARD_ROWS: usize = 128;

fn guard(n: usize) -> Result<()> {
    if n > EXHAUSTIVE_LIMIT {
        Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn same_n(a: &SPermMatrix, b: &SPermMatrix) -> Result<()> {
    if a.n() != b.n() {
        Err(Error::SizeMismatch {
            expected: a.n(),
            found: b.n(),
        })
    } else {
        Ok(())
    }
}

pub(crate) fn in_pool<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("worker pool")
        .install(job)
}

/// No block places its 1 at the same local offset in both matrices.
pub fn is_disjoint(a: &SPermMatrix, b: &SPermMatrix) -> Result<bool> {
    same_n(a, b)?;
    let n = a.n();
    Ok((0..n).all(|k| (0..n).all(|l| a.offset(k, l) != b.offset(k, l))))
}

/// The same test through the packed dense images.
pub fn is_disjoint_dense(a: &SPermMatrix, b: &SPermMatrix) -> Result<bool> {
    same_n(a, b)?;
    a.to_dense().and_is_zero(&b.to_dense())
}

/// Dense images of the whole set in enumeration order.
pub fn dense_table(n: usize) -> Result<Vec<u128>> {
    guard(n)?;
    let sigma = Sigma::new(n, false)?;
    Ok(sigma
        .iter()
        .map(|m| m.to_dense().to_u128().expect("n <= 3 fits in 128 bits"))
        .collect())
}

#[inline]
fn disjoint_count(a: u128, table: &[u128]) -> u64 {
    table.iter().filter(|&&b| a & b == 0).count() as u64
}

/// Number of members of the set disjoint with `a`, by full enumeration.
pub fn xi_exact(a: &SPermMatrix) -> Result<u64> {
    let table = dense_table(a.n())?;
    let bits = a.to_dense().to_u128().expect("guarded");
    Ok(disjoint_count(bits, &table))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiInvariance {
    pub constant: bool,
    /// The common value when `constant`, otherwise the minimum.
    pub value: u64,
    pub min: u64,
    pub max: u64,
    /// Sum of `xi(a)` over all `a`; twice the unordered pair count.
    pub total: u64,
    pub matrices: u64,
}

#[derive(Clone, Copy)]
struct RowStats {
    min: u64,
    max: u64,
    total: u64,
}

impl RowStats {
    const EMPTY: RowStats = RowStats {
        min: u64::MAX,
        max: 0,
        total: 0,
    };

    fn merge(self, o: RowStats) -> RowStats {
        RowStats {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
            total: self.total + o.total,
        }
    }
}

/// `xi_exact(a)` for every `a`, checking that it never changes.
pub fn xi_invariance_check(n: usize, workers: usize) -> Result<XiInvariance> {
    let table = dense_table(n)?;
    let stats = in_pool(workers, || {
        table
            .par_chunks(SHARD_ROWS)
            .map(|rows| {
                rows.iter().fold(RowStats::EMPTY, |s, &a| {
                    let c = disjoint_count(a, &table);
                    s.merge(RowStats {
                        min: c,
                        max: c,
                        total: c,
                    })
                })
            })
            .reduce(|| RowStats::EMPTY, RowStats::merge)
    });
    Ok(XiInvariance {
        constant: stats.min == stats.max,
        value: stats.min,
        min: stats.min,
        max: stats.max,
        total: stats.total,
        matrices: table.len() as u64,
    })
}

/// Unordered disjoint pairs, counted over the strict upper triangle.
pub fn eta_exact(n: usize, workers: usize) -> Result<u64> {
    let table = dense_table(n)?;
    let starts: Vec<usize> = (0..table.len()).step_by(SHARD_ROWS).collect();
    Ok(in_pool(workers, || {
        starts
            .par_iter()
            .map(|&start| {
                let end = (start + SHARD_ROWS).min(table.len());
                (start..end)
                    .map(|i| disjoint_count(table[i], &table[i + 1..]))
                    .sum::<u64>()
            })
            .sum()
    }))
}

/// `xi_n - nu_n`. Signed: the printed lower bound is not always below `xi_n`.
pub fn residual_exact(n: usize, workers: usize) -> Result<Count> {
    let inv = xi_invariance_check(n, workers)?;
    if !inv.constant {
        return Err(Error::InvarianceViolated {
            min: inv.min,
            max: inv.max,
        });
    }
    Ok(Count::from(inv.value) - nu::<Count>(n))
}

/// Which diagonal blocks of each factor are derangements; bit `k` of
/// `c_pattern` is set iff `θ(C_k)` is one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternClass {
    pub n: usize,
    pub c_pattern: u32,
    pub d_pattern: u32,
}

impl PatternClass {
    pub fn of(f: &CadFactors) -> Self {
        let word = |ps: &[crate::Perm]| {
            ps.iter()
                .enumerate()
                .fold(0u32, |w, (k, p)| w | (p.is_derangement() as u32) << k)
        };
        PatternClass {
            n: f.n(),
            c_pattern: word(&f.c),
            d_pattern: word(&f.d),
        }
    }

    fn full(&self) -> u32 {
        (1u32 << self.n) - 1
    }

    /// Every `C` block, or every `D` block, is a derangement.
    pub fn is_basic(&self) -> bool {
        self.c_pattern == self.full() || self.d_pattern == self.full()
    }

    pub fn c_word(&self) -> String {
        word_string(self.c_pattern, self.n)
    }

    pub fn d_word(&self) -> String {
        word_string(self.d_pattern, self.n)
    }

    /// Hand-analysis case label for `n = 3`, keyed by how many blocks of
    /// each factor are *not* derangements.
    pub fn case_label(&self) -> Option<&'static str> {
        if self.n != 3 {
            return None;
        }
        if self.is_basic() {
            return Some("basic");
        }
        let non_c = 3 - self.c_pattern.count_ones();
        let non_d = 3 - self.d_pattern.count_ones();
        Some(match (non_c, non_d) {
            (1, 1) => "i",
            (2, 2) => "ii",
            (2, 1) => "iii",
            (1, 2) => "iv",
            (3, 1) => "v",
            (1, 3) => "vi",
            (2, 3) => "vii",
            (3, 2) => "viii",
            _ => "unlisted",
        })
    }
}

fn word_string(w: u32, n: usize) -> String {
    (0..n)
        .map(|k| if w >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassTally {
    pub class: PatternClass,
    pub total_pairs: u64,
    pub disjoint_pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub n: usize,
    pub tallies: Vec<ClassTally>,
}

impl Classification {
    fn sum(&self, pick: impl Fn(&ClassTally) -> Option<u64>) -> u64 {
        self.tallies.iter().filter_map(pick).sum()
    }

    pub fn total(&self) -> u64 {
        self.sum(|t| Some(t.total_pairs))
    }

    pub fn disjoint(&self) -> u64 {
        self.sum(|t| Some(t.disjoint_pairs))
    }

    pub fn basic_total(&self) -> u64 {
        self.sum(|t| t.class.is_basic().then_some(t.total_pairs))
    }

    pub fn basic_disjoint(&self) -> u64 {
        self.sum(|t| t.class.is_basic().then_some(t.disjoint_pairs))
    }

    pub fn nonbasic_disjoint(&self) -> u64 {
        self.sum(|t| (!t.class.is_basic()).then_some(t.disjoint_pairs))
    }

    /// Disjoint tallies grouped by case label (`n = 3` only).
    pub fn by_case(&self) -> BTreeMap<&'static str, (u64, u64)> {
        let mut out = BTreeMap::new();
        for t in &self.tallies {
            if let Some(label) = t.class.case_label() {
                let e = out.entry(label).or_insert((0, 0));
                e.0 += t.total_pairs;
                e.1 += t.disjoint_pairs;
            }
        }
        out
    }
}

/// Runs every factor tuple `f` against `a`, tallying `a` vs `C*A*D` by the
/// derangement pattern of `f`.
pub fn cad_classify(a: &SPermMatrix, workers: usize) -> Result<Classification> {
    let n = a.n();
    guard(n)?;
    let factors: Vec<CadFactors> = all_factors(n, false)?.collect();
    let merged = in_pool(workers, || {
        factors
            .par_chunks(SHARD_ROWS)
            .map(|chunk| {
                let mut local: BTreeMap<PatternClass, (u64, u64)> = BTreeMap::new();
                for f in chunk {
                    let b = compose_cad(a, f).expect("same n");
                    let hit = is_disjoint(a, &b).expect("same n") as u64;
                    let e = local.entry(PatternClass::of(f)).or_insert((0, 0));
                    e.0 += 1;
                    e.1 += hit;
                }
                local
            })
            .reduce(BTreeMap::new, |mut x, y| {
                for (k, (t, d)) in y {
                    let e = x.entry(k).or_insert((0, 0));
                    e.0 += t;
                    e.1 += d;
                }
                x
            })
    });
    Ok(Classification {
        n,
        tallies: merged
            .into_iter()
            .map(|(class, (total_pairs, disjoint_pairs))| ClassTally {
                class,
                total_pairs,
                disjoint_pairs,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BijectionCheck {
    pub distinct: u64,
    pub expected: u64,
}

impl BijectionCheck {
    pub fn holds(&self) -> bool {
        self.distinct == self.expected
    }
}

/// Counts distinct images of `f -> C*A*D` over all factor tuples.
pub fn cad_bijection_check(a: &SPermMatrix) -> Result<BijectionCheck> {
    let n = a.n();
    guard(n)?;
    let mut seen = HashSet::new();
    for f in all_factors(n, false)? {
        seen.insert(compose_cad(a, &f)?);
    }
    let expected = sigma_cardinality::<u64>(n);
    Ok(BijectionCheck {
        distinct: seen.len() as u64,
        expected,
    })
}

/// Monte Carlo estimate of the disjointness probability for large `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEstimate {
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// 95% Wilson score interval.
    pub low: f64,
    pub high: f64,
}

pub fn p_sample<R: Rng + ?Sized>(n: usize, samples: u64, rng: &mut R) -> SampleEstimate {
    let hits = (0..samples)
        .filter(|_| {
            let a = SPermMatrix::random(n, rng);
            let b = SPermMatrix::random(n, rng);
            a != b && is_disjoint(&a, &b).expect("same n")
        })
        .count() as u64;
    let z = 1.959_963_984_540_054_f64;
    let m = samples.max(1) as f64;
    let p = hits as f64 / m;
    let denom = 1.0 + z * z / m;
    let centre = (p + z * z / (2.0 * m)) / denom;
    let half = z * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt() / denom;
    SampleEstimate {
        samples,
        hits,
        p_hat: p,
        low: (centre - half).max(0.0),
        high: (centre + half).min(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_sperm;
    use crate::perm::{all_perms, Perm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cell-set oracle built straight from the definition.
    fn cells(m: &SPermMatrix) -> HashSet<(usize, usize)> {
        let rows = m.to_rows();
        let mut s = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x == 1 {
                    s.insert((i, j));
                }
            }
        }
        s
    }

    #[test]
    fn antireflexive_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3 {
            let a = random_sperm(n, &mut rng);
            assert!(!is_disjoint(&a, &a).unwrap());
        }
        for _ in 0..10_000 {
            let a = random_sperm(3, &mut rng);
            let b = random_sperm(3, &mut rng);
            assert_eq!(is_disjoint(&a, &b).unwrap(), is_disjoint(&b, &a).unwrap());
        }
    }

    #[test]
    fn size_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sperm(2, &mut rng);
        let b = random_sperm(3, &mut rng);
        assert!(matches!(
            is_disjoint(&a, &b),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn kernels_agree_with_cell_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2usize, 3] {
            for _ in 0..100_000 {
                let a = random_sperm(n, &mut rng);
                let b = random_sperm(n, &mut rng);
                let off = is_disjoint(&a, &b).unwrap();
                assert_eq!(off, is_disjoint_dense(&a, &b).unwrap());
                if rng.gen_ratio(1, 50) {
                    assert_eq!(off, cells(&a).is_disjoint(&cells(&b)));
                }
            }
        }
    }

    #[test]
    fn all_derangement_left_factor_gives_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let der: Vec<Perm> = all_perms(3)
            .into_iter()
            .filter(Perm::is_derangement)
            .collect();
        for _ in 0..200 {
            let a = random_sperm(3, &mut rng);
            let c = (0..3)
                .map(|_| der[rng.gen_range(0..der.len())].clone())
                .collect();
            let d = (0..3).map(|_| Perm::random(3, &mut rng)).collect();
            let b = compose_cad(&a, &CadFactors::new(c, d).unwrap()).unwrap();
            assert!(is_disjoint(&a, &b).unwrap());
        }
    }

    #[test]
    fn xi_by_cell_set_brute_force_n2() {
        // Frozen from a cell-set enumeration independent of these kernels.
        let all: Vec<_> = Sigma::new(2, false).unwrap().iter().collect();
        for a in &all {
            let brute = all
                .iter()
                .filter(|b| cells(a).is_disjoint(&cells(b)))
                .count() as u64;
            assert_eq!(brute, 7);
            assert_eq!(xi_exact(a).unwrap(), brute);
        }
    }

    #[test]
    fn xi_small_cases() {
        let one = Sigma::new(1, false).unwrap().matrix_at(0);
        assert_eq!(xi_exact(&one).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            assert_eq!(xi_exact(&random_sperm(3, &mut rng)).unwrap(), 17_972);
        }
        let big = random_sperm(4, &mut rng);
        assert!(matches!(xi_exact(&big), Err(Error::TooLarge { n: 4, .. })));
    }

    #[test]
    fn invariance_and_eta_small() {
        let inv = xi_invariance_check(1, 1).unwrap();
        assert!(inv.constant);
        assert_eq!(inv.value, 0);
        let inv = xi_invariance_check(2, 2).unwrap();
        assert!(inv.constant);
        assert_eq!(inv.value, 7);
        assert_eq!(eta_exact(1, 1).unwrap(), 0);
        assert_eq!(eta_exact(2, 1).unwrap(), 56);
        assert_eq!(eta_exact(2, 3).unwrap() * 2, inv.total);
        assert_eq!(residual_exact(1, 1).unwrap(), Count::from(0));
        assert_eq!(residual_exact(2, 1).unwrap(), Count::from(-2));
    }

    #[test]
    fn classification_n2() {
        let a = Sigma::new(2, false).unwrap().matrix_at(5);
        let c = cad_classify(&a, 2).unwrap();
        assert_eq!(c.total(), 16);
        assert_eq!(c.basic_total(), 7);
        assert_eq!(c.basic_disjoint(), 7);
        assert_eq!(c.nonbasic_disjoint(), 0);
        assert_eq!(c.disjoint(), 7);
        for t in &c.tallies {
            assert!(t.disjoint_pairs <= t.total_pairs);
        }
    }

    #[test]
    fn classification_n3_is_a_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let first = cad_classify(&random_sperm(3, &mut rng), 1).unwrap();
        assert_eq!(first.total(), 46_656);
        assert_eq!(first.basic_total(), 3_392);
        assert_eq!(first.basic_disjoint(), 3_392);
        assert_eq!(first.nonbasic_disjoint(), 17_972 - 3_392);
        for _ in 0..4 {
            assert_eq!(
                cad_classify(&random_sperm(3, &mut rng), 4).unwrap().tallies,
                first.tallies
            );
        }
        let cases = first.by_case();
        assert_eq!(cases["basic"], (3_392, 3_392));
        assert_eq!(cases.values().map(|v| v.0).sum::<u64>(), 46_656);
    }

    #[test]
    fn bijection() {
        let one = Sigma::new(1, false).unwrap().matrix_at(0);
        assert!(cad_bijection_check(&one).unwrap().holds());
        for a in Sigma::new(2, false).unwrap().iter() {
            let b = cad_bijection_check(&a).unwrap();
            assert_eq!(b.distinct, 16);
        }
    }

    #[test]
    fn pattern_words() {
        let swap = Perm::new(vec![1, 0]).unwrap();
        let id = Perm::identity(2);
        let f = CadFactors::new(vec![swap.clone(), id.clone()], vec![swap.clone(), swap]).unwrap();
        let p = PatternClass::of(&f);
        assert_eq!((p.c_word(), p.d_word()), ("10".into(), "11".into()));
        assert!(p.is_basic());
        assert_eq!(p.case_label(), None);
    }

    #[test]
    fn sampling_interval_contains_small_n_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let est = p_sample(2, 20_000, &mut rng);
        // Uniform pairs include a == b; the conditional value is 7/15.
        let truth = 7.0 / 16.0;
        assert!(est.low <= truth && truth <= est.high, "{est:?}");
    }
}
