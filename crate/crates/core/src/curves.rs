//! Elliptic curves in the form y^2 = x^3 + a2 x^2 + a4 x + a6 with
//! integer coefficients, their reductions at odd primes p >= 5 of good
//! reduction, and the point-level data the divisibility criterion
//! consumes: the number of points over F_p, the Frobenius trace
//! a_p = p + 1 - N, the rank of the l-torsion that actually lives over
//! F_p, quadratic twists, and the codomain of the 2-isogeny whose
//! kernel is generated by (0, 0).

use std::fmt;

use crate::modmath::{is_prime, legendre_residue, mul_mod, pow_mod};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CurveError {
    Singular { a2: i64, a4: i64, a6: i64 },
    BadPrime(u64),
    BadReduction { p: u64 },
    Overflow,
    TwoTorsionNotAtOrigin,
    Parse { line: usize, msg: String },
    DuplicateLabel(String),
}

impl fmt::Display for CurveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveError::Singular { a2, a4, a6 } => {
                write!(f, "curve ({a2}, {a4}, {a6}) has discriminant 0")
            }
            CurveError::BadPrime(p) => write!(f, "reduction needs a prime p >= 5, got {p}"),
            CurveError::BadReduction { p } => write!(f, "curve has bad reduction at {p}"),
            CurveError::Overflow => write!(f, "coefficient arithmetic overflows"),
            CurveError::TwoTorsionNotAtOrigin => {
                write!(
                    f,
                    "2-isogeny step needs a6 = 0 so that (0, 0) is on the curve"
                )
            }
            CurveError::Parse { line, msg } => write!(f, "line {line}: {msg}"),
            CurveError::DuplicateLabel(label) => write!(f, "duplicate curve label {label}"),
        }
    }
}

impl std::error::Error for CurveError {}

/// An affine point, or None for the point at infinity.
pub type Point = Option<(u64, u64)>;

/// y^2 = x^3 + a2 x^2 + a4 x + a6 over Q, nonsingular by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveOverQ {
    label: String,
    a2: i64,
    a4: i64,
    a6: i64,
    disc: i128,
}

fn discriminant(a2: i64, a4: i64, a6: i64) -> Option<i128> {
    let (a2, a4, a6) = (a2 as i128, a4 as i128, a6 as i128);
    let c1 = a2
        .checked_mul(a2)?
        .checked_mul(a2)?
        .checked_mul(a6)?
        .checked_mul(4)?;
    let c2 = a2.checked_mul(a2)?.checked_mul(a4)?.checked_mul(a4)?;
    let c3 = a2.checked_mul(a4)?.checked_mul(a6)?.checked_mul(18)?;
    let c4 = a4.checked_mul(a4)?.checked_mul(a4)?.checked_mul(4)?;
    let c5 = a6.checked_mul(a6)?.checked_mul(27)?;
    let sum = c1
        .checked_sub(c2)?
        .checked_sub(c3)?
        .checked_add(c4)?
        .checked_add(c5)?;
    sum.checked_mul(-16)
}

impl CurveOverQ {
    pub fn new(label: &str, a2: i64, a4: i64, a6: i64) -> Result<Self, CurveError> {
        let disc = discriminant(a2, a4, a6).ok_or(CurveError::Overflow)?;
        if disc == 0 {
            return Err(CurveError::Singular { a2, a4, a6 });
        }
        Ok(CurveOverQ {
            label: label.to_string(),
            a2,
            a4,
            a6,
            disc,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn a2(&self) -> i64 {
        self.a2
    }

    pub fn a4(&self) -> i64 {
        self.a4
    }

    pub fn a6(&self) -> i64 {
        self.a6
    }

    /// -16 (4 a2^3 a6 - a2^2 a4^2 - 18 a2 a4 a6 + 4 a4^3 + 27 a6^2), nonzero.
    pub fn disc(&self) -> i128 {
        self.disc
    }

    pub fn has_good_reduction(&self, p: u64) -> bool {
        p >= 5 && is_prime(p) && self.disc % p as i128 != 0
    }

    pub fn reduce(&self, p: u64) -> Result<ReducedCurve, CurveError> {
        if p < 5 || !is_prime(p) {
            return Err(CurveError::BadPrime(p));
        }
        if self.disc % p as i128 == 0 {
            return Err(CurveError::BadReduction { p });
        }
        let red = |c: i64| (((c as i128 % p as i128) + p as i128) % p as i128) as u64;
        Ok(ReducedCurve {
            label: self.label.clone(),
            p,
            a2: red(self.a2),
            a4: red(self.a4),
            a6: red(self.a6),
        })
    }

    /// The quadratic twist by d: (d a2, d^2 a4, d^3 a6). Over F_p with
    /// p not dividing d, its trace is the twist character chi_d(p)
    /// times the original trace.
    pub fn quadratic_twist(&self, d: i64) -> Result<CurveOverQ, CurveError> {
        let b2 = (d as i128)
            .checked_mul(self.a2 as i128)
            .ok_or(CurveError::Overflow)?;
        let b4 = (d as i128)
            .checked_mul(d as i128)
            .and_then(|s| s.checked_mul(self.a4 as i128))
            .ok_or(CurveError::Overflow)?;
        let b6 = (d as i128)
            .checked_mul(d as i128)
            .and_then(|s| s.checked_mul(d as i128))
            .and_then(|c| c.checked_mul(self.a6 as i128))
            .ok_or(CurveError::Overflow)?;
        let narrow = |v: i128| i64::try_from(v).map_err(|_| CurveError::Overflow);
        CurveOverQ::new(
            &format!("{}.tw{}", self.label, d),
            narrow(b2)?,
            narrow(b4)?,
            narrow(b6)?,
        )
    }

    /// Codomain of the degree-2 isogeny with kernel {O, (0, 0)}. The
    /// curve must have a6 = 0; a4 is then automatically nonzero, and
    /// the image (-2 a2, a2^2 - 4 a4, 0) is again nonsingular.
    pub fn two_isogenous(&self) -> Result<CurveOverQ, CurveError> {
        if self.a6 != 0 {
            return Err(CurveError::TwoTorsionNotAtOrigin);
        }
        debug_assert_ne!(self.a4, 0);
        let b2 = (self.a2 as i128)
            .checked_mul(-2)
            .ok_or(CurveError::Overflow)?;
        let b4 = (self.a2 as i128)
            .checked_mul(self.a2 as i128)
            .and_then(|s| s.checked_sub(4 * self.a4 as i128))
            .ok_or(CurveError::Overflow)?;
        let narrow = |v: i128| i64::try_from(v).map_err(|_| CurveError::Overflow);
        CurveOverQ::new(&format!("{}.iso2", self.label), narrow(b2)?, narrow(b4)?, 0)
    }
}

impl fmt::Display for CurveOverQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: y^2 = x^3 + {} x^2 + {} x + {}",
            self.label, self.a2, self.a4, self.a6
        )
    }
}

/// The reduction of a curve at a prime of good reduction, coefficients
/// already in [0, p).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedCurve {
    label: String,
    p: u64,
    a2: u64,
    a4: u64,
    a6: u64,
}

impl ReducedCurve {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// x^3 + a2 x^2 + a4 x + a6 mod p.
    pub fn rhs(&self, x: u64) -> u64 {
        let p = self.p;
        let x = x % p;
        let mut v = (x + self.a2) % p;
        v = mul_mod(v, x, p);
        v = (v + self.a4) % p;
        v = mul_mod(v, x, p);
        (v + self.a6) % p
    }

    /// Number of F_p points including infinity, by summing the
    /// quadratic character of the right-hand side.
    pub fn count_points(&self) -> u64 {
        let p = self.p;
        let mut n = (p + 1) as i64;
        for x in 0..p {
            n += legendre_residue(self.rhs(x), p) as i64;
        }
        n as u64
    }

    /// The same count from an explicit table of squares; quadratic in
    /// nothing but memory, and independent of the character sum.
    pub fn count_points_direct(&self) -> u64 {
        let p = self.p;
        let mut square_count = vec![0u64; p as usize];
        for y in 0..p {
            square_count[mul_mod(y, y, p) as usize] += 1;
        }
        let mut n = 1;
        for x in 0..p {
            n += square_count[self.rhs(x) as usize];
        }
        n
    }

    pub fn trace(&self) -> i64 {
        (self.p + 1) as i64 - self.count_points() as i64
    }

    /// All affine points, sorted by x then y.
    pub fn affine_points(&self) -> Vec<(u64, u64)> {
        let p = self.p;
        let mut roots: Vec<Vec<u64>> = vec![Vec::new(); p as usize];
        for y in 0..p {
            roots[mul_mod(y, y, p) as usize].push(y);
        }
        let mut pts = Vec::new();
        for x in 0..p {
            for &y in &roots[self.rhs(x) as usize] {
                pts.push((x, y));
            }
        }
        pts
    }

    /// Chord-tangent addition; None is the point at infinity.
    pub fn add_points(&self, lhs: Point, rhs: Point) -> Point {
        let (x1, y1) = match lhs {
            None => return rhs,
            Some(q) => q,
        };
        let (x2, y2) = match rhs {
            None => return lhs,
            Some(q) => q,
        };
        let p = self.p;
        let lam = if x1 == x2 {
            if (y1 + y2) % p == 0 {
                return None;
            }
            debug_assert_eq!(y1, y2);
            let num = (3 * mul_mod(x1, x1, p) + 2 * mul_mod(self.a2, x1, p) + self.a4) % p;
            let den = (2 * y1) % p;
            mul_mod(num, pow_mod(den, p - 2, p), p)
        } else {
            let num = (y2 + p - y1) % p;
            let den = (x2 + p - x1) % p;
            mul_mod(num, pow_mod(den, p - 2, p), p)
        };
        let x3 = (mul_mod(lam, lam, p) + 3 * p - self.a2 - x1 - x2) % p;
        let y3 = (mul_mod(lam, (x1 + p - x3) % p, p) + p - y1) % p;
        Some((x3, y3))
    }

    pub fn scalar_mul(&self, k: u64, pt: Point) -> Point {
        let mut acc = None;
        let mut base = pt;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add_points(acc, base);
            }
            base = self.add_points(base, base);
            k >>= 1;
        }
        acc
    }

    /// Rank r in {0, 1, 2} with E(F_p)[l] isomorphic to (Z/l)^r, found
    /// by counting the kernel of multiplication by l on the full point
    /// set.
    pub fn ell_torsion_rank(&self, ell: u64) -> u32 {
        assert!(is_prime(ell), "torsion rank needs a prime l");
        let mut kernel = 1u64;
        for pt in self.affine_points() {
            if self.scalar_mul(ell, Some(pt)).is_none() {
                kernel += 1;
            }
        }
        match kernel {
            1 => 0,
            k if k == ell => 1,
            k if k == ell * ell => 2,
            k => unreachable!("kernel of multiplication by {ell} has size {k}"),
        }
    }
}

impl fmt::Display for ReducedCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} mod {}: y^2 = x^3 + {} x^2 + {} x + {}",
            self.label, self.p, self.a2, self.a4, self.a6
        )
    }
}

/// One counted reduction; the trace is bounded by 2 sqrt(p).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRecord {
    pub label: String,
    pub p: u64,
    pub count: u64,
    pub trace: i64,
}

impl CountRecord {
    pub fn from_reduction(curve: &ReducedCurve) -> CountRecord {
        let count = curve.count_points();
        let trace = (curve.p + 1) as i64 - count as i64;
        assert!(
            (trace as i128) * (trace as i128) <= 4 * curve.p as i128,
            "trace {trace} violates the Hasse bound at p = {}",
            curve.p
        );
        CountRecord {
            label: curve.label.clone(),
            p: curve.p,
            count,
            trace,
        }
    }
}

/// Parse a curve list, one `label : a2 a4 a6` per line. Blank lines
/// and lines starting with # are skipped. Labels must be distinct.
pub fn parse_curve_file(text: &str) -> Result<Vec<CurveOverQ>, CurveError> {
    let mut curves: Vec<CurveOverQ> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((label, coeffs)) = trimmed.split_once(':') else {
            return Err(CurveError::Parse {
                line,
                msg: format!("expected `label : a2 a4 a6`, got {trimmed:?}"),
            });
        };
        let label = label.trim();
        if label.is_empty() || label.contains(char::is_whitespace) {
            return Err(CurveError::Parse {
                line,
                msg: format!("bad label {label:?}"),
            });
        }
        let parts: Vec<&str> = coeffs.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(CurveError::Parse {
                line,
                msg: format!("expected 3 coefficients, got {}", parts.len()),
            });
        }
        let mut vals = [0i64; 3];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|_| CurveError::Parse {
                line,
                msg: format!("bad integer {part:?}"),
            })?;
        }
        if curves.iter().any(|c| c.label() == label) {
            return Err(CurveError::DuplicateLabel(label.to_string()));
        }
        curves.push(CurveOverQ::new(label, vals[0], vals[1], vals[2])?);
    }
    Ok(curves)
}
