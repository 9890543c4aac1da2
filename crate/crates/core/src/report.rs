//! The verification suite behind `spmat verify`: every exhaustive check for a
//! given `n`, compared with printed values where they exist.

use std::time::Instant;

use num_integer::Integer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::counting::{nu, paper, probability_of, sigma_cardinality, sigma_from_mu};
use crate::error::{Error, Result};
use crate::matrix::{random_sperm, Sigma, EXHAUSTIVE_LIMIT};
use crate::oracle::{
    cad_bijection_check, cad_classify, eta_exact, is_disjoint, is_disjoint_dense, p_sample,
    xi_invariance_check,
};
use crate::sudoku::census_n2;
use crate::{Count, Probability};

pub const VERIFY_SCHEMA: &str = "spmat.verify/1";

/// Seed for the sampled parts of the suite, fixed so reports are reproducible.
const SUITE_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a pass/fail judgement.
    Info,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub n: usize,
    pub expected: Option<String>,
    pub actual: String,
    pub status: Status,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub n: usize,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Timings vary run to run, so they are only included on request.
    pub fn to_json(&self, timings: bool) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = json!({
                    "name": c.name,
                    "n": c.n,
                    "expected": c.expected,
                    "actual": c.actual,
                    "status": c.status.label(),
                });
                if timings {
                    v["elapsed_ms"] = json!(c.elapsed_ms as u64);
                }
                v
            })
            .collect();
        json!({
            "schema": VERIFY_SCHEMA,
            "n": self.n,
            "passed": self.passed(),
            "checks": checks,
        })
    }

    pub fn to_table(&self, timings: bool) -> String {
        let header = ["check", "expected", "actual", "status"];
        let rows: Vec<[String; 4]> = self
            .checks
            .iter()
            .map(|c| {
                [
                    c.name.clone(),
                    c.expected.clone().unwrap_or_else(|| "-".into()),
                    c.actual.clone(),
                    c.status.label().into(),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, cell) in width.iter_mut().zip(r) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: [&str; 4], extra: &str| {
            format!(
                "{:<w0$}  {:>w1$}  {:>w2$}  {:<w3$}{extra}\n",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = width[0],
                w1 = width[1],
                w2 = width[2],
                w3 = width[3]
            )
        };
        let mut out = line(header, if timings { "  ms" } else { "" });
        for (r, c) in rows.iter().zip(&self.checks) {
            let ms = if timings {
                format!("  {}", c.elapsed_ms)
            } else {
                String::new()
            };
            out.push_str(&line([&r[0], &r[1], &r[2], &r[3]], &ms));
        }
        out
    }
}

struct Suite {
    report: VerificationReport,
}

impl Suite {
    fn push(
        &mut self,
        name: &str,
        expected: Option<String>,
        actual: String,
        status: Status,
        started: Instant,
    ) {
        self.report.checks.push(Check {
            name: name.into(),
            n: self.report.n,
            expected,
            actual,
            status,
            elapsed_ms: started.elapsed().as_millis(),
        });
    }

    fn compare<T: PartialEq + ToString>(
        &mut self,
        name: &str,
        expected: Option<T>,
        actual: T,
        started: Instant,
    ) {
        let status = match &expected {
            Some(e) if *e == actual => Status::Pass,
            Some(_) => Status::Fail,
            None => Status::Info,
        };
        self.push(
            name,
            expected.map(|e| e.to_string()),
            actual.to_string(),
            status,
            started,
        );
    }
}

/// Printed value for `n` in {2, 3}; the trivial value at `n = 1`.
fn printed<T>(n: usize, one: T, f: impl Fn(usize) -> Option<T>) -> Option<T> {
    if n == 1 {
        Some(one)
    } else {
        f(n)
    }
}

/// Runs the full exhaustive suite (`n <= 3`), or a sampling suite when
/// `force` is set for larger `n`.
pub fn verify(n: usize, workers: usize, force: bool) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if n > EXHAUSTIVE_LIMIT {
        if !force {
            return Err(Error::TooLarge {
                n,
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        return Ok(verify_sampled(n));
    }
    let mut s = Suite {
        report: VerificationReport {
            n,
            checks: Vec::new(),
        },
    };
    let sigma = sigma_cardinality::<u64>(n);

    let t = Instant::now();
    let enumerated = Sigma::new(n, false)?.iter().count() as u64;
    s.compare("sigma_count", Some(sigma), enumerated, t);

    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let mut agree = true;
    for _ in 0..10_000 {
        let a = random_sperm(n, &mut rng);
        let b = random_sperm(n, &mut rng);
        agree &= is_disjoint(&a, &b)? == is_disjoint_dense(&a, &b)?;
    }
    s.compare("kernel_agreement", Some(true), agree, t);

    let t = Instant::now();
    let a = random_sperm(n, &mut rng);
    let bij = cad_bijection_check(&a)?;
    s.compare("cad_bijection", Some(bij.expected), bij.distinct, t);

    let t = Instant::now();
    let inv = xi_invariance_check(n, workers)?;
    s.compare("xi_invariance", Some(true), inv.constant, t);
    let xi = inv.value;
    s.compare(
        "xi_exact",
        printed(n, Count::from(0), paper::xi),
        Count::from(xi),
        Instant::now(),
    );

    let t = Instant::now();
    let eta = eta_exact(n, workers)?;
    s.compare(
        "eta_exact",
        printed(n, Count::from(0), paper::eta),
        Count::from(eta),
        t,
    );
    s.compare("eta_identity", Some(sigma * xi), 2 * eta, Instant::now());

    let nu_n = nu::<Count>(n);
    let r = Count::from(xi) - &nu_n;
    s.compare(
        "residual_exact",
        printed(n, Count::from(0), paper::residual),
        r.clone(),
        Instant::now(),
    );
    s.compare(
        "residual_nonnegative",
        Some(true),
        r >= Count::from(0),
        Instant::now(),
    );

    let t = Instant::now();
    let cls = cad_classify(&a, workers)?;
    let basic_all = cls
        .tallies
        .iter()
        .filter(|c| c.class.is_basic())
        .all(|c| c.disjoint_pairs == c.total_pairs);
    s.compare(
        "classify_basic_vs_nu",
        Some(nu_n),
        Count::from(cls.basic_disjoint()),
        t,
    );
    let t = Instant::now();
    s.compare("classify_basic_all_disjoint", Some(true), basic_all, t);
    s.compare(
        "classify_conservation",
        Some(format!("{sigma}/{xi}")),
        format!(
            "{}/{}",
            cls.total(),
            cls.basic_disjoint() + cls.nonbasic_disjoint()
        ),
        t,
    );
    s.compare(
        "classify_nonbasic_vs_residual",
        printed(n, Count::from(0), paper::residual),
        Count::from(cls.nonbasic_disjoint()),
        t,
    );

    let t = Instant::now();
    let p: Probability = probability_of(Count::from(xi), n);
    let p_printed = if n == 1 {
        Some(Probability::from_integer(0.into()))
    } else {
        paper::p(n)
    };
    s.compare("p_exact", p_printed, p.clone(), t);
    let pairs = Count::from(sigma) * Count::from(sigma - 1) / 2;
    let via_eta = if pairs == Count::from(0) {
        Probability::from_integer(0.into())
    } else {
        Probability::new(Count::from(eta), pairs)
    };
    s.compare("p_identity", Some(p), via_eta, t);

    match n {
        2 => {
            let t = Instant::now();
            let c = census_n2();
            s.compare("census_families", Some(paper::MU_2_2), c.families, t);
            s.compare("census_sudoku", Some(paper::SIGMA_2), c.sudoku_count, t);
            s.compare(
                "sigma_from_census",
                Some(paper::SIGMA_2),
                sigma_from_mu(2, c.families),
                t,
            );
            s.compare(
                "census_pairs",
                paper::eta(2),
                Count::from(c.disjoint_pairs),
                t,
            );
        }
        3 => {
            let t = Instant::now();
            s.compare(
                "sigma_from_mu",
                Some(paper::sigma_3()),
                sigma_from_mu(3, paper::mu_3_3()),
                t,
            );
            let (q, rem) = paper::sigma_3().div_rem(&crate::counting::factorial::<Count>(9));
            s.compare(
                "mu_from_sigma",
                Some(format!("{}/0", paper::mu_3_3())),
                format!("{q}/{rem}"),
                t,
            );
        }
        _ => {}
    }
    Ok(s.report)
}

const SAMPLES: u64 = 100_000;

fn verify_sampled(n: usize) -> VerificationReport {
    let mut s = Suite {
        report: VerificationReport {
            n,
            checks: Vec::new(),
        },
    };
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let est = p_sample(n, SAMPLES, &mut rng);
    s.push(
        "p_sampled",
        None,
        format!(
            "{}/{} = {:.5} (95% CI {:.5}..{:.5})",
            est.hits, est.samples, est.p_hat, est.low, est.high
        ),
        Status::Info,
        t,
    );
    s.push(
        "p_lower_formula",
        None,
        {
            let p = crate::counting::p_lower::<Count>(n);
            crate::counting::decimal(&p, 5)
        },
        Status::Info,
        Instant::now(),
    );
    s.report
}
