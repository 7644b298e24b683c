//! Prime-field arithmetic: deterministic primality, Legendre symbols,
//! modular inverses, prime scans, and exact rationals treated as classes
//! in Q/Z. Everything here is integer-exact; no floats.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModMathError {
    NotPrime(u64),
    ZeroInverse,
    ZeroDenominator,
    Overflow,
}

impl fmt::Display for ModMathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModMathError::NotPrime(n) => write!(f, "{n} is not prime"),
            ModMathError::ZeroInverse => write!(f, "zero has no inverse"),
            ModMathError::ZeroDenominator => write!(f, "zero denominator"),
            ModMathError::Overflow => write!(f, "exact arithmetic overflow"),
        }
    }
}

impl std::error::Error for ModMathError {}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Strong-probable-prime witnesses that decide primality for every u64.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller-Rabin, exact over the whole u64 range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Ascending primes in the inclusive range [lo, hi].
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = lo.max(2);
    while n <= hi {
        if is_prime(n) {
            out.push(n);
        }
        if n == u64::MAX {
            break;
        }
        n += 1;
    }
    out
}

/// A modulus that is checked prime once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(n: u64) -> Result<Self, ModMathError> {
        if is_prime(n) {
            Ok(PrimeModulus(n))
        } else {
            Err(ModMathError::NotPrime(n))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// Reduce a signed integer into the canonical residue range.
    pub fn element(self, v: i64) -> FieldElement {
        let p = self.0 as i128;
        let r = ((v as i128 % p) + p) % p;
        FieldElement {
            residue: r as u64,
            modulus: self,
        }
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.0)
    }
}

/// Canonical residue 0 <= residue < p. Arithmetic between mismatched
/// moduli is a programming error and panics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    residue: u64,
    modulus: PrimeModulus,
}

impl FieldElement {
    pub fn new(residue: u64, modulus: PrimeModulus) -> Self {
        FieldElement {
            residue: residue % modulus.get(),
            modulus,
        }
    }

    pub fn residue(self) -> u64 {
        self.residue
    }

    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.residue == 0
    }

    pub fn pow(self, exp: u64) -> Self {
        FieldElement {
            residue: pow_mod(self.residue, exp, self.modulus.get()),
            modulus: self.modulus,
        }
    }

    pub fn inv(self) -> Result<Self, ModMathError> {
        Ok(FieldElement {
            residue: mod_inv(self.residue, self.modulus)?,
            modulus: self.modulus,
        })
    }
}

fn same_modulus(a: FieldElement, b: FieldElement) -> u64 {
    assert_eq!(a.modulus, b.modulus, "field elements from different moduli");
    a.modulus.get()
}

impl std::ops::Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        let p = same_modulus(self, rhs);
        let mut r = self.residue + rhs.residue;
        if r >= p {
            r -= p;
        }
        FieldElement {
            residue: r,
            modulus: self.modulus,
        }
    }
}

impl std::ops::Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        let p = same_modulus(self, rhs);
        FieldElement {
            residue: (self.residue + p - rhs.residue) % p,
            modulus: self.modulus,
        }
    }
}

impl std::ops::Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        let p = same_modulus(self, rhs);
        FieldElement {
            residue: mul_mod(self.residue, rhs.residue, p),
            modulus: self.modulus,
        }
    }
}

impl std::ops::Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        let p = self.modulus.get();
        FieldElement {
            residue: (p - self.residue) % p,
            modulus: self.modulus,
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue)
    }
}

/// Inverse mod p by Fermat; zero is rejected.
pub fn mod_inv(a: u64, p: PrimeModulus) -> Result<u64, ModMathError> {
    let a = a % p.get();
    if a == 0 {
        return Err(ModMathError::ZeroInverse);
    }
    Ok(pow_mod(a, p.get() - 2, p.get()))
}

/// Legendre symbol (a|p) for odd p, via Euler's criterion. Returns 0, 1
/// or -1; zero exactly when p divides a.
pub fn legendre_symbol(a: i64, p: PrimeModulus) -> i32 {
    assert!(p.get() > 2, "Legendre symbol needs an odd prime");
    let r = p.element(a).residue();
    legendre_residue(r, p.get())
}

pub(crate) fn legendre_residue(r: u64, p: u64) -> i32 {
    if r == 0 {
        return 0;
    }
    let t = pow_mod(r, (p - 1) / 2, p);
    if t == 1 {
        1
    } else {
        -1
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact comparison of nonnegative fractions a/b and c/d without overflow,
/// by the Euclidean (continued-fraction) scheme. b and d must be nonzero.
pub fn cmp_frac(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    loop {
        let qa = a / b;
        let qc = c / d;
        if qa != qc {
            return qa.cmp(&qc);
        }
        a %= b;
        c %= d;
        match (a == 0, c == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            (false, false) => {}
        }
        // both fractional parts nonzero: a/b vs c/d == reverse of b/a vs d/c
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut c, &mut d);
        std::mem::swap(&mut a, &mut c);
        std::mem::swap(&mut b, &mut d);
    }
}

/// A class in Q/Z held as the reduced fraction num/den with
/// 0 <= num < den and gcd(num, den) = 1. All arithmetic exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalInvariant {
    num: u128,
    den: u128,
}

impl RationalInvariant {
    pub fn new(num: u128, den: u128) -> Result<Self, ModMathError> {
        if den == 0 {
            return Err(ModMathError::ZeroDenominator);
        }
        let num = num % den;
        let g = gcd_u128(num, den).max(1);
        Ok(RationalInvariant {
            num: num / g,
            den: den / g,
        })
    }

    pub fn zero() -> Self {
        RationalInvariant { num: 0, den: 1 }
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    /// |self - other| as an exact reduced fraction.
    pub fn abs_diff(&self, other: &Self) -> Result<Self, ModMathError> {
        let ad = self
            .num
            .checked_mul(other.den)
            .ok_or(ModMathError::Overflow)?;
        let cb = other
            .num
            .checked_mul(self.den)
            .ok_or(ModMathError::Overflow)?;
        let den = self
            .den
            .checked_mul(other.den)
            .ok_or(ModMathError::Overflow)?;
        let num = ad.abs_diff(cb);
        let g = gcd_u128(num, den).max(1);
        Ok(RationalInvariant {
            num: num / g,
            den: den / g,
        })
    }

    /// Strict exact comparison against an arbitrary fraction (not reduced
    /// into Q/Z, so bounds like 2g/(l-1) >= 1 compare as plain numbers).
    pub fn below(&self, num: u128, den: u128) -> bool {
        assert!(den != 0);
        cmp_frac(self.num, self.den, num, den) == Ordering::Less
    }
}

impl Ord for RationalInvariant {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_frac(self.num, self.den, other.num, other.den)
    }
}

impl PartialOrd for RationalInvariant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RationalInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
