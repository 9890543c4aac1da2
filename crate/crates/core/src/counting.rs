//! Closed-form counts: rencontres, derangements, the size of the
//! S-permutation set, the basic-case count `ν_n` and the lower bounds built
//! on it.
//!
//! Every formula is generic over an exact integer type. Alternating sums are
//! accumulated from integral partial terms `m!/k!` in increasing `k`, so the
//! running total stays in `[0, m!]` and unsigned types work too.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{pow, FromPrimitive};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::{Count, Probability};

/// Exact integer carrier for the formulas (`u64`, `u128`, `BigInt`, ...).
pub trait ExactInt: Clone + Integer + FromPrimitive + fmt::Debug {}

impl<T: Clone + Integer + FromPrimitive + fmt::Debug> ExactInt for T {}

fn lift<T: ExactInt>(x: usize) -> T {
    T::from_usize(x).expect("small integer fits the target type")
}

pub fn factorial<T: ExactInt>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * lift(k))
}

pub fn binomial<T: ExactInt>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    // Each prefix product is itself a binomial, so the division is exact.
    (0..k).fold(T::one(), |acc, i| acc * lift(n - i) / lift(i + 1))
}

/// `Σ_{k=0}^{m} (-1)^k m!/k!`, i.e. the derangement count of `m`.
fn alternating_sum<T: ExactInt>(m: usize) -> T {
    let mut terms = vec![T::one(); m + 1];
    for k in (0..m).rev() {
        terms[k] = terms[k + 1].clone() * lift(k + 1);
    }
    terms.into_iter().enumerate().fold(
        T::zero(),
        |acc, (k, t)| if k % 2 == 0 { acc + t } else { acc - t },
    )
}

/// Number of permutations of `n` elements with exactly `p` fixed points.
pub fn rencontres<T: ExactInt>(n: usize, p: usize) -> Result<T> {
    if p > n {
        return Err(Error::Domain(format!(
            "fixed-point count {p} exceeds n = {n}"
        )));
    }
    // n!/p! * Σ_{k<=n-p} (-1)^k/k! = C(n, p) * (n-p)! * Σ (-1)^k/k!
    Ok(binomial::<T>(n, p) * alternating_sum::<T>(n - p))
}

pub fn derangements<T: ExactInt>(n: usize) -> T {
    alternating_sum(n)
}

/// `(n!)^(2n)`.
pub fn sigma_cardinality<T: ExactInt>(n: usize) -> T {
    pow(factorial::<T>(n), 2 * n)
}

/// `(d_n n! + n! d_n - d_n^2)^n`.
pub fn nu<T: ExactInt>(n: usize) -> T {
    let f = factorial::<T>(n);
    let d = derangements::<T>(n);
    let per_index = f.clone() * d.clone() + f * d.clone() - d.clone() * d;
    pow(per_index, n)
}

pub fn xi_lower<T: ExactInt>(n: usize) -> T {
    nu(n)
}

pub fn eta_lower<T: ExactInt>(n: usize) -> T {
    sigma_cardinality::<T>(n) * nu::<T>(n) / lift(2)
}

/// `ν_n / ((n!)^(2n) - 1)`; `0/1` at `n = 1` where no pair exists.
pub fn p_lower<T: ExactInt>(n: usize) -> Ratio<T> {
    probability_of(nu::<T>(n), n)
}

pub(crate) fn probability_of<T: ExactInt>(xi: T, n: usize) -> Ratio<T> {
    let others = sigma_cardinality::<T>(n) - T::one();
    if others.is_zero() {
        Ratio::new(T::zero(), T::one())
    } else {
        Ratio::new(xi, others)
    }
}

/// Number of Sudoku matrices from the number of complete unordered families:
/// each family has `(n^2)!` labelings.
pub fn sigma_from_mu<T: ExactInt>(n: usize, mu_nn: T) -> T {
    factorial::<T>(n * n) * mu_nn
}

/// Values printed in the source text. Reference data only; several of them
/// disagree with exhaustive enumeration (see the oracle module).
pub mod paper {
    use super::*;

    pub const SIGMA_2: u64 = 288;
    pub const MU_2_2: u64 = 12;
    pub const SIGMA_3: &str = "6670903752021072936960";
    pub const MU_3_3: &str = "18383222420692992";

    pub fn residual(n: usize) -> Option<Count> {
        match n {
            2 => Some(Count::from(0)),
            3 => Some(Count::from(19_008)),
            _ => None,
        }
    }

    pub fn xi(n: usize) -> Option<Count> {
        match n {
            2 => Some(Count::from(9)),
            3 => Some(Count::from(27_008)),
            _ => None,
        }
    }

    pub fn eta(n: usize) -> Option<Count> {
        match n {
            2 => Some(Count::from(72)),
            3 => Some(Count::from(630_042_624)),
            _ => None,
        }
    }

    pub fn p(n: usize) -> Option<Probability> {
        match n {
            2 => Some(Probability::new(3.into(), 5.into())),
            3 => Some(Probability::new(27_008.into(), 46_655.into())),
            _ => None,
        }
    }

    pub fn sigma_3() -> Count {
        SIGMA_3.parse().expect("constant parses")
    }

    pub fn mu_3_3() -> Count {
        MU_3_3.parse().expect("constant parses")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Formula,
    PaperConstant,
    Oracle,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Formula => "formula",
            Provenance::PaperConstant => "paper_constant",
            Provenance::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tagged<T> {
    pub value: T,
    pub provenance: Provenance,
}

impl<T> Tagged<T> {
    fn new(value: T, provenance: Provenance) -> Self {
        Tagged { value, provenance }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountReport {
    pub n: usize,
    pub sigma_count: Tagged<Count>,
    pub nu: Tagged<Count>,
    pub xi_lower: Tagged<Count>,
    pub xi_exact: Option<Tagged<Count>>,
    pub r: Option<Tagged<Count>>,
    pub eta_lower: Tagged<Count>,
    pub eta_exact: Option<Tagged<Count>>,
    pub p_lower: Tagged<Probability>,
    pub p_exact: Option<Tagged<Probability>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactSource {
    PaperConstants,
    Oracle { workers: usize },
}

impl CountReport {
    /// Formula-only report.
    pub fn lower_bounds(n: usize) -> Self {
        let f = Provenance::Formula;
        CountReport {
            n,
            sigma_count: Tagged::new(sigma_cardinality(n), f),
            nu: Tagged::new(nu(n), f),
            xi_lower: Tagged::new(xi_lower(n), f),
            xi_exact: None,
            r: None,
            eta_lower: Tagged::new(eta_lower(n), f),
            eta_exact: None,
            p_lower: Tagged::new(p_lower(n), f),
            p_exact: None,
        }
    }

    /// Lower bounds, plus the exact fields whenever printed constants exist.
    pub fn for_formulas(n: usize) -> Self {
        exact_report(n, ExactSource::PaperConstants).unwrap_or_else(|_| Self::lower_bounds(n))
    }

    fn with_exact(mut self, xi: Count, r: Count, eta: Count, source: Provenance) -> Self {
        self.p_exact = Some(Tagged::new(probability_of(xi.clone(), self.n), source));
        self.xi_exact = Some(Tagged::new(xi, source));
        self.r = Some(Tagged::new(r, source));
        self.eta_exact = Some(Tagged::new(eta, source));
        self
    }

    pub fn to_json(&self) -> Value {
        fn int(t: &Tagged<Count>) -> Value {
            json!({ "value": t.value.to_string(), "provenance": t.provenance.label() })
        }
        fn rat(t: &Tagged<Probability>) -> Value {
            json!({
                "value": { "num": t.value.numer().to_string(), "den": t.value.denom().to_string() },
                "provenance": t.provenance.label(),
            })
        }
        json!({
            "n": self.n,
            "sigma_count": int(&self.sigma_count),
            "nu": int(&self.nu),
            "xi_lower": int(&self.xi_lower),
            "xi_exact": self.xi_exact.as_ref().map(int),
            "r": self.r.as_ref().map(int),
            "eta_lower": int(&self.eta_lower),
            "eta_exact": self.eta_exact.as_ref().map(int),
            "p_lower": rat(&self.p_lower),
            "p_exact": self.p_exact.as_ref().map(rat),
        })
    }

    /// `(name, value, provenance)` rows for table output.
    pub fn rows(&self) -> Vec<(&'static str, String, &'static str)> {
        let mut out = Vec::new();
        let mut int =
            |name, t: &Tagged<Count>| out.push((name, t.value.to_string(), t.provenance.label()));
        int("sigma_count", &self.sigma_count);
        int("nu", &self.nu);
        int("xi_lower", &self.xi_lower);
        if let Some(t) = &self.xi_exact {
            int("xi_exact", t);
        }
        if let Some(t) = &self.r {
            int("r", t);
        }
        int("eta_lower", &self.eta_lower);
        if let Some(t) = &self.eta_exact {
            int("eta_exact", t);
        }
        let rat = |t: &Tagged<Probability>| format!("{} (~{})", t.value, decimal(&t.value, 3));
        out.push((
            "p_lower",
            rat(&self.p_lower),
            self.p_lower.provenance.label(),
        ));
        if let Some(t) = &self.p_exact {
            out.push(("p_exact", rat(t), t.provenance.label()));
        }
        out
    }
}

/// Fills the exact fields from printed constants (`n` in {2, 3}) or from
/// exhaustive enumeration.
pub fn exact_report(n: usize, source: ExactSource) -> Result<CountReport> {
    let base = CountReport::lower_bounds(n);
    match source {
        ExactSource::PaperConstants => {
            let r = paper::residual(n).ok_or_else(|| {
                Error::Unsupported(format!("no printed residual for n = {n} (only 2 and 3)"))
            })?;
            let xi = nu::<Count>(n) + r.clone();
            let eta = sigma_cardinality::<Count>(n) * xi.clone() / 2;
            Ok(base.with_exact(xi, r, eta, Provenance::PaperConstant))
        }
        ExactSource::Oracle { workers } => {
            let inv = crate::oracle::xi_invariance_check(n, workers)?;
            if !inv.constant {
                return Err(Error::InvarianceViolated {
                    min: inv.min,
                    max: inv.max,
                });
            }
            let xi = Count::from(inv.value);
            let r = xi.clone() - nu::<Count>(n);
            let eta = Count::from(crate::oracle::eta_exact(n, workers)?);
            Ok(base.with_exact(xi, r, eta, Provenance::Oracle))
        }
    }
}

/// Round-half-up decimal rendering of a nonnegative rational.
pub fn decimal(r: &Probability, places: u32) -> String {
    let scale = pow(BigInt::from(10), places as usize);
    let scaled: BigInt = (r.numer() * &scale * 2 + r.denom()) / (r.denom() * 2);
    let s = scaled.to_string();
    if places == 0 {
        return s;
    }
    let width = places as usize + 1;
    let s = format!("{s:0>width$}");
    let (int, frac) = s.split_at(s.len() - places as usize);
    format!("{int}.{frac}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::all_perms;
    use num_bigint::BigUint;
    use num_traits::{One, Zero};

    fn brute_rencontres(n: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n + 1];
        for p in all_perms(n) {
            counts[p.fixed_points()] += 1;
        }
        counts
    }

    #[test]
    fn rencontres_examples() {
        for n in 2..=8 {
            assert_eq!(rencontres::<u64>(n, n - 1).unwrap(), 0);
            assert_eq!(rencontres::<u64>(n, n).unwrap(), 1);
        }
        assert_eq!(rencontres::<u64>(3, 0).unwrap(), 2);
        assert_eq!(rencontres::<u64>(4, 0).unwrap(), 9);
        assert!(matches!(rencontres::<u64>(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn rencontres_match_brute_force() {
        for n in 0..=8 {
            let brute = brute_rencontres(n);
            for (p, &count) in brute.iter().enumerate() {
                assert_eq!(rencontres::<u64>(n, p).unwrap(), count, "e_{p}({n})");
            }
            let total: u64 = (0..=n).map(|p| rencontres::<u64>(n, p).unwrap()).sum();
            assert_eq!(total, factorial::<u64>(n));
        }
    }

    #[test]
    fn derangement_values_and_recurrence() {
        let expected = [1u64, 0, 1, 2, 9, 44, 265, 1854, 14833];
        for (n, &d) in expected.iter().enumerate() {
            assert_eq!(derangements::<u64>(n), d);
            assert_eq!(derangements::<u64>(n), rencontres::<u64>(n, 0).unwrap());
            assert_eq!(derangements::<u64>(n), brute_rencontres(n)[0]);
        }
        for n in 2..=8 {
            let lhs = derangements::<u64>(n);
            let rhs = (n as u64 - 1) * (derangements::<u64>(n - 1) + derangements::<u64>(n - 2));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn generic_over_integer_types() {
        assert_eq!(derangements::<u32>(8), 14_833);
        assert_eq!(
            derangements::<BigUint>(20),
            BigUint::from(895_014_631_192_902_121u64)
        );
        assert_eq!(nu::<u128>(3), 8_000);
        assert_eq!(sigma_cardinality::<BigInt>(4), BigInt::from(24u64.pow(8)));
    }

    #[test]
    fn sigma_cardinality_examples() {
        assert_eq!(sigma_cardinality::<u64>(1), 1);
        assert_eq!(sigma_cardinality::<u64>(2), 16);
        assert_eq!(sigma_cardinality::<u64>(3), 46_656);
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu::<u64>(1), 0);
        assert_eq!(nu::<u64>(2), 9);
        assert_eq!(nu::<u64>(3), 8_000);
        // second displayed form: (n!)^{2n} s^n (2 - s)^n with s = d_n / n!
        for n in 1..=6usize {
            let f = factorial::<BigInt>(n);
            let s = Probability::new(derangements::<BigInt>(n), f.clone());
            let two = Probability::from_integer(2.into());
            let value =
                Probability::from_integer(pow(f, 2 * n)) * pow(s.clone(), n) * pow(two - s, n);
            assert!(value.is_integer());
            assert_eq!(value.to_integer(), nu::<BigInt>(n));
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(eta_lower::<u64>(2), 72);
        assert_eq!(p_lower::<u64>(2), Ratio::new(3, 5));
        assert_eq!(eta_lower::<u64>(3), 186_624_000);
        assert_eq!(p_lower::<u64>(3), Ratio::new(8000, 46_655));
        assert_eq!(p_lower::<u64>(1), Ratio::new(0, 1));
        for n in 1..=5 {
            assert_eq!(
                eta_lower::<BigInt>(n) * 2,
                sigma_cardinality::<BigInt>(n) * nu::<BigInt>(n)
            );
            let p = p_lower::<BigInt>(n);
            assert!(
                p >= Probability::zero() && p <= Probability::one(),
                "n = {n}"
            );
        }
    }

    #[test]
    fn sigma_from_mu_examples() {
        assert_eq!(sigma_from_mu::<u64>(2, 12), 288);
        assert_eq!(sigma_from_mu::<u64>(2, paper::MU_2_2), paper::SIGMA_2);
        assert_eq!(sigma_from_mu::<Count>(3, paper::mu_3_3()), paper::sigma_3());
        assert_eq!(sigma_from_mu::<u64>(4, 0), 0);
        assert_eq!(sigma_from_mu::<Count>(5, Count::from(0)), Count::from(0));
    }

    #[test]
    fn printed_exact_reports() {
        let r2 = exact_report(2, ExactSource::PaperConstants).unwrap();
        assert_eq!(r2.xi_exact.unwrap().value, 9.into());
        assert_eq!(r2.eta_exact.unwrap().value, 72.into());
        assert_eq!(r2.r.unwrap().value, 0.into());
        assert_eq!(
            r2.p_exact.unwrap().value,
            Probability::new(3.into(), 5.into())
        );

        let r3 = exact_report(3, ExactSource::PaperConstants).unwrap();
        assert_eq!(r3.xi_exact.as_ref().unwrap().value, 27_008.into());
        assert_eq!(r3.eta_exact.as_ref().unwrap().value, 630_042_624.into());
        assert_eq!(r3.r.as_ref().unwrap().value, 19_008.into());
        let p = r3.p_exact.unwrap();
        assert_eq!(p.value, Probability::new(27_008.into(), 46_655.into()));
        assert_eq!(p.provenance, Provenance::PaperConstant);
        assert_eq!(decimal(&p.value, 3), "0.579");

        assert!(matches!(
            exact_report(4, ExactSource::PaperConstants),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn formulas_report_for_large_n_has_no_exact_fields() {
        let r = CountReport::for_formulas(5);
        assert!(r.xi_exact.is_none() && r.r.is_none() && r.p_exact.is_none());
        let v = r.to_json();
        assert!(v["xi_exact"].is_null());
        assert_eq!(v["nu"]["provenance"], "formula");
        assert!(v["sigma_count"]["value"].is_string());
    }

    #[test]
    fn decimal_rendering() {
        let r = |a: i64, b: i64| Probability::new(a.into(), b.into());
        assert_eq!(decimal(&r(3, 5), 3), "0.600");
        assert_eq!(decimal(&r(1, 3), 2), "0.33");
        assert_eq!(decimal(&r(2, 3), 2), "0.67");
        assert_eq!(decimal(&r(1, 200), 2), "0.01");
        assert_eq!(decimal(&r(7, 2), 0), "4");
        assert_eq!(decimal(&r(0, 1), 3), "0.000");
    }
}
