//! EC3 instances: clauses over three distinct variables, each satisfied when
//! exactly one of its bits is 1.
//!
//! Variable indices are 1-based everywhere they are visible to users (files,
//! `Clause` fields, CLI output) and 0-based inside vectors.

use std::collections::HashSet;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest instance the exhaustive oracle accepts by default (2^26 assignments).
pub const DEFAULT_ORACLE_CAP: usize = 26;

/// Hard ceiling on the oracle cap; the enumeration counter is a `u64` bitmask.
pub const MAX_ORACLE_CAP: usize = 40;

/// Largest variable count accepted from files.
pub const MAX_VARS: usize = 1 << 24;

/// One 1-in-3 constraint `z_k + z_m + z_n = 1` with 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Clause {
    pub k: usize,
    pub m: usize,
    pub n: usize,
}

impl Clause {
    /// Builds a clause, checking that the three indices are distinct and lie in `1..=n_vars`.
    pub fn new(k: usize, m: usize, n: usize, n_vars: usize) -> Result<Self> {
        for idx in [k, m, n] {
            if idx == 0 || idx > n_vars {
                return Err(Error::IndexOutOfRange { index: idx, n_vars });
            }
        }
        if k == m || m == n || k == n {
            return Err(Error::RepeatedIndex { clause: [k, m, n] });
        }
        Ok(Clause { k, m, n })
    }

    pub fn indices(&self) -> [usize; 3] {
        [self.k, self.m, self.n]
    }

    /// 0-based positions into a point or assignment vector.
    pub fn zero_based(&self) -> [usize; 3] {
        [self.k - 1, self.m - 1, self.n - 1]
    }

    /// Unordered identity of the clause, used for duplicate detection.
    pub fn sorted(&self) -> [usize; 3] {
        let mut s = self.indices();
        s.sort_unstable();
        s
    }

    pub fn contains(&self, var: usize) -> bool {
        self.k == var || self.m == var || self.n == var
    }
}

/// An EC3 problem: `n_vars` bits and an ordered list of clauses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instance {
    n_vars: usize,
    clauses: Vec<Clause>,
    clause_degree: Vec<usize>,
}

impl Instance {
    /// Builds an instance from already validated clauses.
    pub fn new(n_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        let mut clause_degree = vec![0usize; n_vars];
        for c in &clauses {
            // Re-validate: `Clause` fields are public.
            let c = Clause::new(c.k, c.m, c.n, n_vars)?;
            for j in c.zero_based() {
                clause_degree[j] += 1;
            }
        }
        Ok(Instance {
            n_vars,
            clauses,
            clause_degree,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// `C_k`: number of clauses containing each variable (0-based vector).
    pub fn clause_degree(&self) -> &[usize] {
        &self.clause_degree
    }

    /// Clauses-to-variables ratio `M / N`.
    pub fn ratio(&self) -> f64 {
        if self.n_vars == 0 {
            0.0
        } else {
            self.clauses.len() as f64 / self.n_vars as f64
        }
    }

    /// Pairs `(first, later)` of 0-based clause positions that hold the same
    /// unordered triple.
    pub fn duplicate_clauses(&self) -> Vec<(usize, usize)> {
        let mut seen = std::collections::HashMap::new();
        let mut dups = Vec::new();
        for (i, c) in self.clauses.iter().enumerate() {
            match seen.get(&c.sorted()) {
                Some(&first) => dups.push((first, i)),
                None => {
                    seen.insert(c.sorted(), i);
                }
            }
        }
        dups
    }

    /// Number of clauses with `z_k + z_m + z_n != 1`.
    pub fn check_assignment(&self, z: &Assignment) -> Result<CheckReport> {
        if z.len() != self.n_vars {
            return Err(Error::LengthMismatch {
                expected: self.n_vars,
                got: z.len(),
            });
        }
        let unsatisfied_count = self
            .clauses
            .iter()
            .filter(|c| {
                let ones: u8 = c.zero_based().iter().map(|&j| z.bits[j] as u8).sum();
                ones != 1
            })
            .count();
        Ok(CheckReport {
            satisfied: unsatisfied_count == 0,
            unsatisfied_count,
        })
    }
}

/// Writes the line-oriented instance format: `p ec3 N M` then one clause per line.
impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p ec3 {} {}", self.n_vars, self.clauses.len())?;
        for c in &self.clauses {
            writeln!(f, "{} {} {}", c.k, c.m, c.n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub satisfied: bool,
    pub unsatisfied_count: usize,
}

/// A bit vector `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    pub fn ones(n: usize) -> Self {
        Assignment {
            bits: vec![true; n],
        }
    }

    /// Bit `i` of `mask` becomes `z_{i+1}`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Assignment {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn from_01(values: &[u8]) -> Self {
        Assignment {
            bits: values.iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// The hypercube vertex for this assignment: `x_i = 1` iff `z_i = 0`.
    pub fn to_vertex(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|&b| if b { 0.0 } else { 1.0 })
            .collect()
    }
}

/// Space-separated `0`/`1` values on one line, the assignment file format.
impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses the instance file format.
///
/// ```text
/// c optional comments
/// p ec3 <N> <M>
/// <k> <m> <n>      (M lines, 1-based)
/// ```
///
/// Blank lines are ignored. Duplicate clauses are accepted; see
/// [`Instance::duplicate_clauses`].
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let Some((n_vars, n_clauses)) = header else {
            header = Some(parse_header(line, line_no)?);
            continue;
        };
        if line.starts_with('p') {
            return Err(Error::MalformedHeader {
                line: line_no,
                reason: "duplicate header".into(),
            });
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::MalformedClause {
                line: line_no,
                reason: format!("expected 3 indices, found {}", fields.len()),
            });
        }
        let mut idx = [0usize; 3];
        for (slot, field) in idx.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::MalformedClause {
                line: line_no,
                reason: format!("not a variable index: {field:?}"),
            })?;
        }
        if clauses.len() == n_clauses {
            return Err(Error::ClauseCountMismatch {
                declared: n_clauses,
                found: clauses.len() + 1,
            });
        }
        clauses.push(Clause::new(idx[0], idx[1], idx[2], n_vars)?);
    }

    let (n_vars, n_clauses) = header.ok_or(Error::MalformedHeader {
        line: 0,
        reason: "missing `p ec3 <N> <M>` header".into(),
    })?;
    if clauses.len() != n_clauses {
        return Err(Error::ClauseCountMismatch {
            declared: n_clauses,
            found: clauses.len(),
        });
    }
    Instance::new(n_vars, clauses)
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let bad = |reason: &str| Error::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.as_slice() {
        ["p", "ec3", n, m] => {
            let n = n.parse().map_err(|_| bad("N is not a count"))?;
            let m = m.parse().map_err(|_| bad("M is not a count"))?;
            if n > MAX_VARS {
                return Err(bad("N exceeds the supported maximum"));
            }
            Ok((n, m))
        }
        _ => Err(bad("expected `p ec3 <N> <M>`")),
    }
}

/// Parses a single line of `N` space-separated `0`/`1` values.
pub fn parse_assignment(text: &str) -> Result<Assignment> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('c'));
    let line = lines.next().unwrap_or("");
    if lines.next().is_some() {
        return Err(Error::MalformedAssignment(
            "expected a single line of 0/1 values".into(),
        ));
    }
    let bits = line
        .split_whitespace()
        .map(|tok| match tok {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::MalformedAssignment(format!(
                "expected 0 or 1, found {other:?}"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment::new(bits))
}

fn choose3(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Maps a colex rank in `0..C(n,3)` to the triple `a < b < c` (0-based) with
/// `rank = C(c,3) + C(b,2) + a`.
fn unrank_triple(rank: usize, n: usize) -> [usize; 3] {
    let mut r = rank as u128;
    let mut c = 2;
    while c + 1 < n && choose3(c + 1) <= r {
        c += 1;
    }
    r -= choose3(c);
    let choose2 = |x: u128| x * x.saturating_sub(1) / 2;
    let mut b = 1;
    while b + 1 < c && choose2(b as u128 + 1) <= r {
        b += 1;
    }
    r -= choose2(b as u128);
    [r as usize, b, c]
}

/// Draws `n_clauses` distinct unordered triples uniformly without replacement
/// from all `C(n_vars, 3)` triples. Each clause lists its indices ascending.
pub fn generate_instance(n_vars: usize, n_clauses: usize, seed: u64) -> Result<Instance> {
    let available = choose3(n_vars);
    if n_vars < 3 || n_clauses as u128 > available {
        return Err(Error::InfeasibleGeneration {
            n_vars,
            n_clauses,
            available: available.min(u64::MAX as u128) as u64,
        });
    }
    let available = usize::try_from(available).map_err(|_| Error::InfeasibleGeneration {
        n_vars,
        n_clauses,
        available: u64::MAX,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = index::sample(&mut rng, available, n_clauses)
        .into_iter()
        .map(|rank| {
            let [a, b, c] = unrank_triple(rank, n_vars);
            Clause {
                k: a + 1,
                m: b + 1,
                n: c + 1,
            }
        })
        .collect();
    Instance::new(n_vars, clauses)
}

/// Exact answer from exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum OracleVerdict {
    /// `witness` is the satisfying assignment with the smallest bitmask
    /// (bit `i` = `z_{i+1}`); `count` is the number of satisfying assignments.
    Sat { witness: Assignment, count: u64 },
    Unsat,
}

impl OracleVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, OracleVerdict::Sat { .. })
    }
}

const ORACLE_BLOCK_BITS: usize = 16;

/// Enumerates all `2^N` assignments and counts the satisfying ones.
pub fn brute_force_oracle(instance: &Instance, cap: usize) -> Result<OracleVerdict> {
    let n = instance.n_vars();
    let cap = cap.min(MAX_ORACLE_CAP);
    if n > cap {
        return Err(Error::OracleCapExceeded { n_vars: n, cap });
    }
    let masks: Vec<u64> = instance
        .clauses()
        .iter()
        .map(|c| c.zero_based().iter().fold(0u64, |acc, &j| acc | 1 << j))
        .collect();
    let satisfies = |z: u64| masks.iter().all(|&m| (z & m).count_ones() == 1);

    let total: u64 = 1 << n;
    let block_bits = ORACLE_BLOCK_BITS.min(n);
    let n_blocks = total >> block_bits;
    let (count, first) = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let start = block << block_bits;
            let mut count = 0u64;
            let mut first = None;
            for z in start..start + (1 << block_bits) {
                if satisfies(z) {
                    count += 1;
                    first.get_or_insert(z);
                }
            }
            (count, first)
        })
        .reduce(
            || (0, None),
            |(ca, fa), (cb, fb)| {
                let first = match (fa, fb) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                (ca + cb, first)
            },
        );
    Ok(match first {
        Some(z) => OracleVerdict::Sat {
            witness: Assignment::from_mask(z, n),
            count,
        },
        None => OracleVerdict::Unsat,
    })
}

/// Reference instance with N = 15, M = 8 whose published solution is
/// `Z = (1,0,1,1,1,0,0,0,0,1,0,1,0,1,0)`.
pub fn reference_instance_a() -> Instance {
    const PM: [[usize; 3]; 8] = [
        [3, 6, 15],
        [4, 7, 13],
        [11, 14, 15],
        [2, 6, 12],
        [7, 12, 15],
        [5, 13, 15],
        [1, 6, 8],
        [6, 9, 10],
    ];
    let clauses = PM
        .iter()
        .map(|&[k, m, n]| Clause { k, m, n })
        .collect();
    Instance::new(15, clauses).expect("reference instance is well formed")
}

/// The published solution of [`reference_instance_a`].
pub fn reference_solution_a() -> Assignment {
    Assignment::from_01(&[1, 0, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1, 0])
}

/// All four triples over four variables; no assignment satisfies them.
pub fn four_triples_unsat() -> Instance {
    let clauses = [[1, 2, 3], [1, 2, 4], [1, 3, 4], [2, 3, 4]]
        .iter()
        .map(|&[k, m, n]| Clause { k, m, n })
        .collect();
    Instance::new(4, clauses).expect("well formed")
}

/// Sorted triples of `instance`, for set comparisons in tests and tools.
pub fn clause_set(instance: &Instance) -> HashSet<[usize; 3]> {
    instance.clauses().iter().map(Clause::sorted).collect()
}
