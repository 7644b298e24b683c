//! Exponents of the characters through which tame inertia can act on
//! the l-torsion of an abelian variety of dimension g. Each character
//! of level n contributes a rational e(0) + e(1) l + ... + e(n-1)
//! l^(n-1) over l^n - 1 with binary digits e(k), taken modulo 1; the
//! levels run from 1 to 2g. The whole set sits inside [0, 1/(l - 1)],
//! so for l >= 4g + 1 any two members differ by less than 1/2, which
//! is the separation that pins down the local factor from a single
//! Frobenius residue.

use std::collections::BTreeSet;
use std::fmt;

use crate::modmath::{is_prime, primes_in_range, ModMathError, RationalInvariant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TameInertiaError {
    BadGenus(usize),
    NotOddPrime(u64),
    Overflow,
}

impl fmt::Display for TameInertiaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TameInertiaError::BadGenus(g) => write!(f, "genus must be at least 1, got {g}"),
            TameInertiaError::NotOddPrime(l) => write!(f, "need an odd prime l >= 3, got {l}"),
            TameInertiaError::Overflow => write!(f, "l^(2g) - 1 does not fit the denominator"),
        }
    }
}

impl std::error::Error for TameInertiaError {}

impl From<ModMathError> for TameInertiaError {
    fn from(_: ModMathError) -> Self {
        TameInertiaError::Overflow
    }
}

/// Binary exponent digits of one level-n character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentPattern {
    level: usize,
    exponents: Vec<bool>,
}

impl ExponentPattern {
    pub fn new(exponents: Vec<bool>) -> ExponentPattern {
        assert!(!exponents.is_empty(), "a pattern has at least one digit");
        ExponentPattern {
            level: exponents.len(),
            exponents,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn exponents(&self) -> &[bool] {
        &self.exponents
    }

    /// (sum of e(k) l^k) / (l^n - 1) as an element of Q/Z.
    pub fn value(&self, ell: u64) -> Result<RationalInvariant, TameInertiaError> {
        let ell = ell as u128;
        let mut power = 1u128;
        let mut num = 0u128;
        for &bit in &self.exponents {
            if bit {
                num = num.checked_add(power).ok_or(TameInertiaError::Overflow)?;
            }
            power = power.checked_mul(ell).ok_or(TameInertiaError::Overflow)?;
        }
        let den = power - 1;
        Ok(RationalInvariant::new(num, den)?)
    }
}

/// Every invariant reachable at (g, l), deduplicated and ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantSet {
    g: usize,
    ell: u64,
    values: BTreeSet<RationalInvariant>,
}

impl InvariantSet {
    pub fn g(&self) -> usize {
        self.g
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: &RationalInvariant) -> bool {
        self.values.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RationalInvariant> {
        self.values.iter()
    }

    pub fn max(&self) -> &RationalInvariant {
        self.values.iter().next_back().expect("0 is always present")
    }
}

pub fn enumerate_invariants(g: usize, ell: u64) -> Result<InvariantSet, TameInertiaError> {
    if g < 1 {
        return Err(TameInertiaError::BadGenus(g));
    }
    if ell < 3 || !is_prime(ell) {
        return Err(TameInertiaError::NotOddPrime(ell));
    }
    (ell as u128)
        .checked_pow(2 * g as u32)
        .ok_or(TameInertiaError::Overflow)?;
    let mut values = BTreeSet::new();
    for level in 1..=2 * g {
        for mask in 0u128..1 << level {
            let exponents = (0..level).map(|k| mask >> k & 1 == 1).collect();
            values.insert(ExponentPattern::new(exponents).value(ell)?);
        }
    }
    Ok(InvariantSet { g, ell, values })
}

/// The extreme invariant against the a-priori bound 2g / (l - 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundCheck {
    pub max_value: RationalInvariant,
    pub below_bound: bool,
}

pub fn bound_check(set: &InvariantSet) -> BoundCheck {
    let max_value = *set.max();
    let below_bound = max_value.below(2 * set.g() as u128, set.ell() as u128 - 1);
    BoundCheck {
        max_value,
        below_bound,
    }
}

/// Whether all distinct members of one invariant set differ by less
/// than 1/2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationCheck {
    pub ell: u64,
    pub pairs_checked: u64,
    pub all_below_half: bool,
}

pub fn pairwise_separation(g: usize, ell: u64) -> Result<SeparationCheck, TameInertiaError> {
    let set = enumerate_invariants(g, ell)?;
    let values: Vec<&RationalInvariant> = set.iter().collect();
    let mut pairs_checked = 0;
    let mut all_below_half = true;
    for (i, x) in values.iter().enumerate() {
        for y in &values[i + 1..] {
            pairs_checked += 1;
            if !x.abs_diff(y)?.below(1, 2) {
                all_below_half = false;
            }
        }
    }
    Ok(SeparationCheck {
        ell,
        pairs_checked,
        all_below_half,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationReport {
    pub g: usize,
    pub checks: Vec<SeparationCheck>,
    pub all_hold: bool,
}

/// Run the separation check at every prime 4g + 1 <= l <= ell_max,
/// the range where a Frobenius residue determines its character.
pub fn unramified_threshold_check(
    g: usize,
    ell_max: u64,
) -> Result<SeparationReport, TameInertiaError> {
    if g < 1 {
        return Err(TameInertiaError::BadGenus(g));
    }
    let mut checks = Vec::new();
    for ell in primes_in_range(4 * g as u64 + 1, ell_max) {
        checks.push(pairwise_separation(g, ell)?);
    }
    let all_hold = checks.iter().all(|c| c.all_below_half);
    Ok(SeparationReport {
        g,
        checks,
        all_hold,
    })
}
