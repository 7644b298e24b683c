//! The divisibility test that separates curves: two isogenous curves
//! have point counts with the same divisors at every place of common
//! good reduction, so a single place p and a single odd prime l with
//! l dividing exactly one of the two counts certifies that no isogeny
//! exists. The scan over p <= p_max either produces such a witness or
//! reports consistency up to the bound; it never claims an isogeny.
//! Alongside the scan live two refinements: the places where a curve
//! acquires full l-torsion, and the experiment showing that at such a
//! place every quadratic twist by a non-square is witnessed.

use std::fmt;

use crate::curves::{CurveError, CurveOverQ};
use crate::modmath::{is_prime, legendre_symbol, pow_mod, primes_in_range, PrimeModulus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CriterionError {
    Curve(CurveError),
    BadLambda(u64),
    EmptyLambda,
    EmptyScan,
}

impl fmt::Display for CriterionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionError::Curve(e) => e.fmt(f),
            CriterionError::BadLambda(l) => {
                write!(f, "lambda entries must be odd primes >= 3, got {l}")
            }
            CriterionError::EmptyLambda => write!(f, "lambda set is empty"),
            CriterionError::EmptyScan => {
                write!(f, "no prime of common good reduction below the bound")
            }
        }
    }
}

impl std::error::Error for CriterionError {}

impl From<CurveError> for CriterionError {
    fn from(e: CurveError) -> Self {
        CriterionError::Curve(e)
    }
}

/// Scan parameters: the place bound and the set of odd primes l to
/// test divisibility against. The set is kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionConfig {
    p_max: u64,
    lambda: Vec<u64>,
}

impl CriterionConfig {
    pub fn new(p_max: u64, lambda: &[u64]) -> Result<Self, CriterionError> {
        if lambda.is_empty() {
            return Err(CriterionError::EmptyLambda);
        }
        for &l in lambda {
            if l < 3 || l % 2 == 0 || !is_prime(l) {
                return Err(CriterionError::BadLambda(l));
            }
        }
        let mut lambda = lambda.to_vec();
        lambda.sort_unstable();
        lambda.dedup();
        Ok(CriterionConfig { p_max, lambda })
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    pub fn lambda(&self) -> &[u64] {
        &self.lambda
    }
}

/// Point counts of both curves at one common place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub p: u64,
    pub count_first: u64,
    pub count_second: u64,
}

/// Counts at every common good place up to the bound, plus the places
/// that had to be skipped because one of the curves reduces badly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountScan {
    pub rows: Vec<CountRow>,
    pub skipped: Vec<u64>,
}

pub fn count_pair(e1: &CurveOverQ, e2: &CurveOverQ, p: u64) -> Result<(u64, u64), CurveError> {
    Ok((e1.reduce(p)?.count_points(), e2.reduce(p)?.count_points()))
}

pub fn scan_counts(e1: &CurveOverQ, e2: &CurveOverQ, p_max: u64) -> CountScan {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for p in primes_in_range(5, p_max) {
        if e1.has_good_reduction(p) && e2.has_good_reduction(p) {
            let (count_first, count_second) = count_pair(e1, e2, p).expect("reduction was checked");
            rows.push(CountRow {
                p,
                count_first,
                count_second,
            });
        } else {
            skipped.push(p);
        }
    }
    CountScan { rows, skipped }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceCell {
    pub p: u64,
    pub ell: u64,
    pub count_first: u64,
    pub count_second: u64,
}

impl CoincidenceCell {
    pub fn divides_first(&self) -> bool {
        self.count_first.is_multiple_of(self.ell)
    }

    pub fn divides_second(&self) -> bool {
        self.count_second.is_multiple_of(self.ell)
    }

    /// True when l divides exactly one of the two counts.
    pub fn is_witness(&self) -> bool {
        self.divides_first() != self.divides_second()
    }
}

/// The full p x l grid of divisibility outcomes, rows ordered by p and
/// cells within a row by l.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceMatrix {
    cells: Vec<CoincidenceCell>,
    skipped: Vec<u64>,
    p_max: u64,
    lambda: Vec<u64>,
}

impl CoincidenceMatrix {
    pub fn cells(&self) -> &[CoincidenceCell] {
        &self.cells
    }

    pub fn skipped(&self) -> &[u64] {
        &self.skipped
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    pub fn lambda(&self) -> &[u64] {
        &self.lambda
    }

    pub fn places_scanned(&self) -> u64 {
        (self.cells.len() / self.lambda.len().max(1)) as u64
    }
}

pub fn matrix_from_scan(
    scan: &CountScan,
    config: &CriterionConfig,
) -> Result<CoincidenceMatrix, CriterionError> {
    if scan.rows.is_empty() {
        return Err(CriterionError::EmptyScan);
    }
    let mut cells = Vec::with_capacity(scan.rows.len() * config.lambda.len());
    for row in &scan.rows {
        for &ell in &config.lambda {
            cells.push(CoincidenceCell {
                p: row.p,
                ell,
                count_first: row.count_first,
                count_second: row.count_second,
            });
        }
    }
    Ok(CoincidenceMatrix {
        cells,
        skipped: scan.skipped.clone(),
        p_max: config.p_max,
        lambda: config.lambda.clone(),
    })
}

/// A place and a prime where divisibility disagrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessRecord {
    pub p: u64,
    pub ell: u64,
    pub count_first: u64,
    pub count_second: u64,
}

impl WitnessRecord {
    pub fn divides_first(&self) -> bool {
        self.count_first.is_multiple_of(self.ell)
    }

    /// 1 if l divides the first count, 2 if the second.
    pub fn side(&self) -> u8 {
        if self.divides_first() {
            1
        } else {
            2
        }
    }
}

/// Per-l bookkeeping over the whole scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaTally {
    pub ell: u64,
    pub both: u64,
    pub neither: u64,
    pub witnesses: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// The pair is certified non-isogenous by the recorded cell.
    Witness(WitnessRecord),
    /// Every scanned cell agreed. This is evidence, not a proof of
    /// isogeny.
    ConsistentUpTo { p_max: u64, lambda: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub tallies: Vec<LambdaTally>,
    pub places_scanned: u64,
    pub skipped: Vec<u64>,
}

/// Fold the grid into a verdict. The reported witness is the first in
/// the lexicographic order (p, l).
pub fn verdict_from_matrix(matrix: &CoincidenceMatrix) -> Verdict {
    let mut tallies: Vec<LambdaTally> = matrix
        .lambda()
        .iter()
        .map(|&ell| LambdaTally {
            ell,
            both: 0,
            neither: 0,
            witnesses: 0,
        })
        .collect();
    let mut first_witness: Option<WitnessRecord> = None;
    for cell in matrix.cells() {
        let tally = tallies
            .iter_mut()
            .find(|t| t.ell == cell.ell)
            .expect("cell from lambda");
        match (cell.divides_first(), cell.divides_second()) {
            (true, true) => tally.both += 1,
            (false, false) => tally.neither += 1,
            _ => {
                tally.witnesses += 1;
                if first_witness.is_none() {
                    first_witness = Some(WitnessRecord {
                        p: cell.p,
                        ell: cell.ell,
                        count_first: cell.count_first,
                        count_second: cell.count_second,
                    });
                }
            }
        }
    }
    let outcome = match first_witness {
        Some(w) => Outcome::Witness(w),
        None => Outcome::ConsistentUpTo {
            p_max: matrix.p_max(),
            lambda: matrix.lambda().to_vec(),
        },
    };
    Verdict {
        outcome,
        tallies,
        places_scanned: matrix.places_scanned(),
        skipped: matrix.skipped().to_vec(),
    }
}

pub fn run_criterion(
    e1: &CurveOverQ,
    e2: &CurveOverQ,
    config: &CriterionConfig,
) -> Result<Verdict, CriterionError> {
    let scan = scan_counts(e1, e2, config.p_max());
    let matrix = matrix_from_scan(&scan, config)?;
    Ok(verdict_from_matrix(&matrix))
}

fn require_odd_prime(ell: u64) -> Result<(), CriterionError> {
    if ell < 3 || ell.is_multiple_of(2) || !is_prime(ell) {
        return Err(CriterionError::BadLambda(ell));
    }
    Ok(())
}

/// Good places p <= p_max where the curve has full l-torsion over F_p.
/// Such a place forces l^2 | N, l | p - 1 and a_p = 2 mod l, so those
/// congruences prefilter the candidates before the rank is confirmed
/// on the actual point group.
pub fn splitting_places(e: &CurveOverQ, ell: u64, p_max: u64) -> Result<Vec<u64>, CriterionError> {
    require_odd_prime(ell)?;
    let mut places = Vec::new();
    for p in primes_in_range(5, p_max) {
        if !e.has_good_reduction(p) {
            continue;
        }
        let r = e.reduce(p)?;
        let n = r.count_points();
        let a = (p + 1) as i64 - n as i64;
        if p % ell != 1 || n % (ell * ell) != 0 || a.rem_euclid(ell as i64) != 2 {
            continue;
        }
        if r.ell_torsion_rank(ell) == 2 {
            places.push(p);
        }
    }
    Ok(places)
}

/// What the twist experiment found at the splitting places of the
/// original curve: at every place where the twist character is -1, the
/// twisted count is 4 mod l, which is nonzero, so the place witnesses
/// against the l-divisibility coincidence for the pair (E, E^d).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistWitnessReport {
    pub ell: u64,
    pub d: i64,
    pub p_max: u64,
    pub expected_residue: u64,
    pub splitting_places: Vec<u64>,
    pub witness_places: Vec<u64>,
    pub all_congruent: bool,
}

impl TwistWitnessReport {
    /// Fraction of splitting places that worked as witnesses; 0 when
    /// there were none to try.
    pub fn proportion(&self) -> f64 {
        if self.splitting_places.is_empty() {
            0.0
        } else {
            self.witness_places.len() as f64 / self.splitting_places.len() as f64
        }
    }
}

pub fn twist_witness_experiment(
    e: &CurveOverQ,
    d: i64,
    ell: u64,
    p_max: u64,
) -> Result<TwistWitnessReport, CriterionError> {
    require_odd_prime(ell)?;
    let twist = e.quadratic_twist(d)?;
    let expected_residue = pow_mod(2, 2, ell);
    debug_assert_ne!(expected_residue, 0);
    let splitting = splitting_places(e, ell, p_max)?;
    let mut witness_places = Vec::new();
    let mut all_congruent = true;
    for &p in &splitting {
        if d % p as i64 == 0 || !twist.has_good_reduction(p) {
            continue;
        }
        let chi = legendre_symbol(d, PrimeModulus::new(p).expect("scan primes are prime"));
        if chi != -1 {
            continue;
        }
        let twisted_count = twist.reduce(p)?.count_points();
        let residue = twisted_count % ell;
        if residue == expected_residue && residue != 0 {
            witness_places.push(p);
        } else {
            all_congruent = false;
        }
    }
    Ok(TwistWitnessReport {
        ell,
        d,
        p_max,
        expected_residue,
        splitting_places: splitting,
        witness_places,
        all_congruent,
    })
}
