//! The symplectic similitude group GSp_{2g}(F_l): matrices M with
//! tM.J.M = lambda(M).J for the fixed form J = [[0, I_g], [-I_g, 0]] and
//! some nonzero multiplier lambda(M). The multiplier map is a
//! homomorphism onto F_l^*, its kernel is Sp_{2g}(F_l), and
//! det M = lambda(M)^g. Small groups are enumerated exactly by closing
//! a set of symplectic transvections, which also drives a brute-force
//! normal-subgroup audit via conjugacy classes.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use rand_core::RngCore;

use crate::modmath::{pow_mod, FieldElement, ModMathError, PrimeModulus};

/// Sp_{2g}(F_l) enumeration is refused above this many elements.
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

/// Transvection count used when sampling random group elements.
pub const DEFAULT_WORD_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymplecticError {
    BadGroupSpec { g: usize, ell: u64 },
    NotPrime(u64),
    NotSymplectic,
    NotInvertible,
    ZeroMultiplierTarget,
    Overflow,
    CapExceeded { needed: u64, cap: u64 },
}

impl fmt::Display for SymplecticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymplecticError::BadGroupSpec { g, ell } => {
                write!(
                    f,
                    "invalid group parameters g={g}, ell={ell} (need g >= 1, odd prime ell >= 3)"
                )
            }
            SymplecticError::NotPrime(n) => write!(f, "{n} is not prime"),
            SymplecticError::NotSymplectic => write!(f, "matrix is not a symplectic similitude"),
            SymplecticError::NotInvertible => write!(f, "matrix is singular"),
            SymplecticError::ZeroMultiplierTarget => write!(f, "multiplier target must be nonzero"),
            SymplecticError::Overflow => write!(f, "group order overflows u64"),
            SymplecticError::CapExceeded { needed, cap } => {
                write!(f, "enumeration needs {needed} elements, cap is {cap}")
            }
        }
    }
}

impl std::error::Error for SymplecticError {}

impl From<ModMathError> for SymplecticError {
    fn from(e: ModMathError) -> Self {
        match e {
            ModMathError::NotPrime(n) => SymplecticError::NotPrime(n),
            _ => SymplecticError::Overflow,
        }
    }
}

/// Parameters (g, l) of GSp_{2g}(F_l); l = 2 is excluded throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    g: usize,
    ell: PrimeModulus,
}

impl GroupSpec {
    pub fn new(g: usize, ell: u64) -> Result<Self, SymplecticError> {
        if g < 1 || ell < 3 {
            return Err(SymplecticError::BadGroupSpec { g, ell });
        }
        let ell = PrimeModulus::new(ell)?;
        Ok(GroupSpec { g, ell })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn ell(&self) -> PrimeModulus {
        self.ell
    }

    /// Matrix dimension 2g.
    pub fn dim(&self) -> usize {
        2 * self.g
    }

    pub fn form(&self) -> SymplecticForm {
        SymplecticForm {
            mat: form_matrix(self),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GSp_{}(F_{})", 2 * self.g, self.ell.get())
    }
}

/// Dense square matrix over F_l, entries kept reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    n: usize,
    ell: u64,
    e: Vec<u64>,
}

impl Matrix {
    pub fn zero(n: usize, ell: u64) -> Self {
        Matrix {
            n,
            ell,
            e: vec![0; n * n],
        }
    }

    pub fn identity(n: usize, ell: u64) -> Self {
        let mut m = Matrix::zero(n, ell);
        for i in 0..n {
            m.e[i * n + i] = 1;
        }
        m
    }

    /// Scalar matrix c.I.
    pub fn scalar(n: usize, ell: u64, c: u64) -> Self {
        let mut m = Matrix::zero(n, ell);
        for i in 0..n {
            m.e[i * n + i] = c % ell;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>], ell: u64) -> Self {
        let n = rows.len();
        let mut m = Matrix::zero(n, ell);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                let l = ell as i64;
                m.e[i * n + j] = ((v % l + l) % l) as u64;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.ell
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.e[i * self.n + j] = v % self.ell;
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        assert_eq!(self.ell, rhs.ell);
        let n = self.n;
        let mut out = Matrix::zero(n, self.ell);
        for i in 0..n {
            for j in 0..n {
                // entries are < l <= 97 and n <= 8, so the sum stays far from u64 overflow
                let mut acc = 0u64;
                for k in 0..n {
                    acc += self.e[i * n + k] * rhs.e[k * n + j];
                }
                out.e[i * n + j] = acc % self.ell;
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        assert_eq!(self.ell, rhs.ell);
        let mut out = self.clone();
        for (a, &b) in out.e.iter_mut().zip(rhs.e.iter()) {
            *a = (*a + self.ell - b) % self.ell;
        }
        out
    }

    pub fn neg(&self) -> Matrix {
        let mut out = self.clone();
        for a in out.e.iter_mut() {
            *a = (self.ell - *a) % self.ell;
        }
        out
    }

    pub fn scale(&self, c: u64) -> Matrix {
        let c = c % self.ell;
        let mut out = self.clone();
        for a in out.e.iter_mut() {
            *a = *a * c % self.ell;
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zero(n, self.ell);
        for i in 0..n {
            for j in 0..n {
                out.e[j * n + i] = self.e[i * n + j];
            }
        }
        out
    }

    /// Determinant by Gaussian elimination over F_l.
    pub fn det(&self) -> u64 {
        let n = self.n;
        let ell = self.ell;
        let mut a = self.e.clone();
        let mut det = 1u64;
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r * n + col] != 0);
            let Some(pivot) = pivot else { return 0 };
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                det = (ell - det) % ell;
            }
            let p = a[col * n + col];
            det = det * p % ell;
            let pinv = pow_mod(p, ell - 2, ell);
            for r in col + 1..n {
                let f = a[r * n + col] * pinv % ell;
                if f == 0 {
                    continue;
                }
                for j in col..n {
                    let s = a[r * n + j] + (ell - f * a[col * n + j] % ell);
                    a[r * n + j] = s % ell;
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Matrix, SymplecticError> {
        let n = self.n;
        let ell = self.ell;
        let mut a = self.e.clone();
        let mut b = Matrix::identity(n, ell).e;
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| a[r * n + col] != 0)
                .ok_or(SymplecticError::NotInvertible)?;
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                    b.swap(pivot * n + j, col * n + j);
                }
            }
            let pinv = pow_mod(a[col * n + col], ell - 2, ell);
            for j in 0..n {
                a[col * n + j] = a[col * n + j] * pinv % ell;
                b[col * n + j] = b[col * n + j] * pinv % ell;
            }
            for r in 0..n {
                if r == col || a[r * n + col] == 0 {
                    continue;
                }
                let f = a[r * n + col];
                for j in 0..n {
                    a[r * n + j] = (a[r * n + j] + (ell - f) * a[col * n + j]) % ell;
                    b[r * n + j] = (b[r * n + j] + (ell - f) * b[col * n + j]) % ell;
                }
            }
        }
        Ok(Matrix { n, ell, e: b })
    }

    /// Pack the entries base l into a u128 key (row major).
    pub fn key(&self) -> u128 {
        let mut k = 0u128;
        for &v in &self.e {
            k = k * self.ell as u128 + v as u128;
        }
        k
    }

    pub fn from_key(n: usize, ell: u64, mut key: u128) -> Matrix {
        let mut e = vec![0u64; n * n];
        for slot in e.iter_mut().rev() {
            *slot = (key % ell as u128) as u64;
            key /= ell as u128;
        }
        Matrix { n, ell, e }
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n;
        write!(f, "[")?;
        for i in 0..n {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for j in 0..n {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.e[i * n + j])?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// The fixed antisymmetric form J.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymplecticForm {
    mat: Matrix,
}

impl SymplecticForm {
    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }
}

pub fn form_matrix(spec: &GroupSpec) -> Matrix {
    let g = spec.g();
    let n = spec.dim();
    let ell = spec.ell().get();
    let mut j = Matrix::zero(n, ell);
    for i in 0..g {
        j.set(i, g + i, 1);
        j.set(g + i, i, ell - 1);
    }
    j
}

/// Multiplier lambda with tM.J.M = lambda.J, if M is a similitude.
pub fn multiplier_of(m: &Matrix, spec: &GroupSpec) -> Result<u64, SymplecticError> {
    let n = spec.dim();
    if m.dim() != n || m.modulus() != spec.ell().get() {
        return Err(SymplecticError::NotSymplectic);
    }
    let j = form_matrix(spec);
    let s = m.transpose().mul(&j).mul(m);
    let lambda = s.get(0, spec.g());
    if lambda == 0 || s != j.scale(lambda) {
        return Err(SymplecticError::NotSymplectic);
    }
    Ok(lambda)
}

/// An element of GSp_{2g}(F_l) with its multiplier cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GspElement {
    spec: GroupSpec,
    mat: Matrix,
    multiplier: u64,
}

impl GspElement {
    pub fn new(mat: Matrix, spec: &GroupSpec) -> Result<Self, SymplecticError> {
        let multiplier = multiplier_of(&mat, spec)?;
        let elem = GspElement {
            spec: *spec,
            mat,
            multiplier,
        };
        // det M = lambda^g is forced once the similitude relation holds
        assert!(
            det_multiplier_check(&elem),
            "similitude with det != lambda^g"
        );
        Ok(elem)
    }

    pub fn identity(spec: &GroupSpec) -> Self {
        let mat = Matrix::identity(spec.dim(), spec.ell().get());
        GspElement {
            spec: *spec,
            mat,
            multiplier: 1,
        }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn multiplier(&self) -> u64 {
        self.multiplier
    }

    pub fn multiplier_element(&self) -> FieldElement {
        FieldElement::new(self.multiplier, self.spec.ell())
    }

    pub fn mul(&self, rhs: &GspElement) -> GspElement {
        assert_eq!(self.spec, rhs.spec);
        GspElement {
            spec: self.spec,
            mat: self.mat.mul(&rhs.mat),
            multiplier: self.multiplier * rhs.multiplier % self.spec.ell().get(),
        }
    }

    pub fn inverse(&self) -> GspElement {
        let mat = self.mat.inverse().expect("similitudes are invertible");
        let ell = self.spec.ell().get();
        GspElement {
            spec: self.spec,
            mat,
            multiplier: pow_mod(self.multiplier, ell - 2, ell),
        }
    }

    /// -M; the multiplier is unchanged since lambda(-I) = (-1)^2 = 1.
    pub fn neg(&self) -> GspElement {
        GspElement {
            spec: self.spec,
            mat: self.mat.neg(),
            multiplier: self.multiplier,
        }
    }
}

/// det M == lambda(M)^g, with the multiplier taken from the cache.
pub fn det_multiplier_check(m: &GspElement) -> bool {
    let ell = m.spec.ell().get();
    m.mat.det() == pow_mod(m.multiplier, m.spec.g() as u64, ell)
}

/// |Sp_{2g}(F_l)| = l^(g^2) * prod_{i=1..g} (l^(2i) - 1), exact in u64.
pub fn sp_order(spec: &GroupSpec) -> Result<u64, SymplecticError> {
    let ell = spec.ell().get() as u128;
    let g = spec.g() as u32;
    let mut acc: u128 = 1;
    for _ in 0..g * g {
        acc = acc.checked_mul(ell).ok_or(SymplecticError::Overflow)?;
        if acc > u64::MAX as u128 {
            return Err(SymplecticError::Overflow);
        }
    }
    for i in 1..=g {
        let pow = ell.checked_pow(2 * i).ok_or(SymplecticError::Overflow)?;
        acc = acc.checked_mul(pow - 1).ok_or(SymplecticError::Overflow)?;
        if acc > u64::MAX as u128 {
            return Err(SymplecticError::Overflow);
        }
    }
    Ok(acc as u64)
}

/// Exponent of the exact power of l dividing |Sp_{2g}(F_l)|; equals g^2.
pub fn sp_order_ell_valuation(spec: &GroupSpec) -> Result<u32, SymplecticError> {
    let ell = spec.ell().get();
    let mut n = sp_order(spec)?;
    let mut v = 0;
    while n % ell == 0 {
        n /= ell;
        v += 1;
    }
    Ok(v)
}

/// Whether |Sp_{2g1}| / z1 and |Sp_{2g2}| / z2 agree over a common F_l
/// (the z are central quotient sizes, typically 1 or 2). Compared by
/// cross multiplication, so no divisibility assumption is needed.
pub fn cardinal_separation(
    ell: u64,
    g1: usize,
    z1: u64,
    g2: usize,
    z2: u64,
) -> Result<bool, SymplecticError> {
    if z1 == 0 || z2 == 0 {
        return Err(SymplecticError::BadGroupSpec { g: 0, ell });
    }
    let o1 = sp_order(&GroupSpec::new(g1, ell)?)? as u128;
    let o2 = sp_order(&GroupSpec::new(g2, ell)?)? as u128;
    Ok(o1 * z2 as u128 == o2 * z1 as u128)
}

/// diag(t,..,t,1,..,1) with g copies of t: the standard similitude with
/// multiplier t.
pub fn multiplier_shift(spec: &GroupSpec, t: u64) -> Matrix {
    let g = spec.g();
    let ell = spec.ell().get();
    let mut m = Matrix::zero(spec.dim(), ell);
    for i in 0..g {
        m.set(i, i, t % ell);
        m.set(g + i, g + i, 1);
    }
    m
}

/// Symplectic transvection x -> x + lam * <x, v> v as a matrix,
/// I + lam * v (tv J). Always lies in Sp.
pub fn transvection(v: &[u64], lam: u64, spec: &GroupSpec) -> Matrix {
    let n = spec.dim();
    let ell = spec.ell().get();
    let j = form_matrix(spec);
    // w = tv J
    let mut w = vec![0u64; n];
    for (jcol, slot) in w.iter_mut().enumerate() {
        let mut acc = 0u64;
        for (k, &vk) in v.iter().enumerate() {
            acc += vk * j.get(k, jcol);
        }
        *slot = acc % ell;
    }
    let mut t = Matrix::identity(n, ell);
    for (i, &vi) in v.iter().enumerate() {
        for (jcol, &wj) in w.iter().enumerate() {
            let add = lam % ell * (vi % ell) % ell * wj % ell;
            let cur = t.get(i, jcol);
            t.set(i, jcol, (cur + add) % ell);
        }
    }
    t
}

/// One transvection per projective line (first nonzero coordinate 1,
/// lam = 1); their powers give every transvection on that line, and the
/// whole family generates Sp_{2g}(F_l).
pub fn transvection_generators(spec: &GroupSpec) -> Vec<Matrix> {
    let n = spec.dim();
    let ell = spec.ell().get();
    let mut gens = Vec::new();
    let mut v = vec![0u64; n];
    loop {
        // advance odometer
        let mut i = 0;
        loop {
            if i == n {
                return gens;
            }
            v[i] += 1;
            if v[i] < ell {
                break;
            }
            v[i] = 0;
            i += 1;
        }
        if let Some(&1) = v.iter().find(|&&c| c != 0) {
            gens.push(transvection(&v, 1, spec));
        }
    }
}

/// Exhaustive listing of Sp_{2g}(F_l), stored as packed keys in
/// breadth-first discovery order (identity first).
#[derive(Debug, Clone)]
pub struct SubgroupEnumeration {
    spec: GroupSpec,
    keys: Vec<u128>,
    index: HashMap<u128, u32>,
}

impl SubgroupEnumeration {
    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[u128] {
        &self.keys
    }

    pub fn matrix_at(&self, i: usize) -> Matrix {
        Matrix::from_key(self.spec.dim(), self.spec.ell().get(), self.keys[i])
    }

    pub fn contains_key(&self, key: u128) -> bool {
        self.index.contains_key(&key)
    }

    pub fn contains(&self, m: &Matrix) -> bool {
        self.contains_key(m.key())
    }

    pub fn iter(&self) -> impl Iterator<Item = Matrix> + '_ {
        let n = self.spec.dim();
        let ell = self.spec.ell().get();
        self.keys.iter().map(move |&k| Matrix::from_key(n, ell, k))
    }
}

pub fn enumerate_sp(spec: &GroupSpec) -> Result<SubgroupEnumeration, SymplecticError> {
    enumerate_sp_with_cap(spec, DEFAULT_ENUM_CAP)
}

pub fn enumerate_sp_with_cap(
    spec: &GroupSpec,
    cap: u64,
) -> Result<SubgroupEnumeration, SymplecticError> {
    let order = sp_order(spec)?;
    if order > cap {
        return Err(SymplecticError::CapExceeded { needed: order, cap });
    }
    let gens = transvection_generators(spec);
    let identity = Matrix::identity(spec.dim(), spec.ell().get());
    let mut keys = vec![identity.key()];
    let mut index = HashMap::with_capacity(order as usize);
    index.insert(identity.key(), 0u32);
    let mut i = 0;
    while i < keys.len() {
        let m = Matrix::from_key(spec.dim(), spec.ell().get(), keys[i]);
        for t in &gens {
            let prod = m.mul(t);
            let k = prod.key();
            if let Entry::Vacant(e) = index.entry(k) {
                e.insert(keys.len() as u32);
                keys.push(k);
            }
        }
        i += 1;
    }
    assert_eq!(
        keys.len() as u64,
        order,
        "transvection closure disagrees with the order formula"
    );
    Ok(SubgroupEnumeration {
        spec: *spec,
        keys,
        index,
    })
}

/// Conjugacy class representatives (key, class size), in discovery order.
fn conjugacy_classes(group: &SubgroupEnumeration) -> Vec<(u128, u64)> {
    let spec = group.spec;
    let n = spec.dim();
    let ell = spec.ell().get();
    let gens = transvection_generators(&spec);
    let gen_invs: Vec<Matrix> = gens.iter().map(|g| g.inverse().unwrap()).collect();
    let mut seen = vec![false; group.len()];
    let mut classes = Vec::new();
    for start in 0..group.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = vec![group.keys[start]];
        seen[start] = true;
        let mut i = 0;
        while i < orbit.len() {
            let x = Matrix::from_key(n, ell, orbit[i]);
            for (t, tinv) in gens.iter().zip(&gen_invs) {
                let y = tinv.mul(&x).mul(t);
                let idx = group.index[&y.key()] as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    orbit.push(y.key());
                }
            }
            i += 1;
        }
        classes.push((group.keys[start], orbit.len() as u64));
    }
    classes
}

/// Normal closure of one element: either the full group (detected early
/// once more than half the elements are reached) or the exact key set.
enum Closure {
    Full,
    Set(Vec<u128>),
}

fn normal_closure(seed: u128, group: &SubgroupEnumeration, gens: &[Matrix]) -> Closure {
    let spec = group.spec;
    let n = spec.dim();
    let ell = spec.ell().get();
    let half = group.len() as u64 / 2;
    let gen_invs: Vec<Matrix> = gens.iter().map(|g| g.inverse().unwrap()).collect();

    let identity = Matrix::identity(n, ell);
    let mut members: HashMap<u128, ()> = HashMap::new();
    let mut elems: Vec<u128> = Vec::new();
    let mut sub_gens: Vec<Matrix> = Vec::new();
    members.insert(identity.key(), ());
    elems.push(identity.key());

    let mut pending = vec![Matrix::from_key(n, ell, seed)];
    while let Some(new_gen) = pending.pop() {
        if members.contains_key(&new_gen.key()) {
            continue;
        }
        sub_gens.push(new_gen);
        // close the current element list under the enlarged generator set;
        // restarting from 0 with only the new generator would be slightly
        // cheaper, but the whole list is small whenever we get here
        let mut i = 0;
        while i < elems.len() {
            let x = Matrix::from_key(n, ell, elems[i]);
            for t in &sub_gens {
                let y = x.mul(t);
                let k = y.key();
                if members.insert(k, ()).is_none() {
                    elems.push(k);
                    if elems.len() as u64 > half {
                        return Closure::Full;
                    }
                }
            }
            i += 1;
        }
        // a normal subgroup must keep every generator's conjugates
        for sg in sub_gens.iter() {
            for (t, tinv) in gens.iter().zip(&gen_invs) {
                let c = tinv.mul(sg).mul(t);
                if !members.contains_key(&c.key()) {
                    pending.push(c);
                }
            }
            if !pending.is_empty() {
                break;
            }
        }
    }
    let mut set = elems;
    set.sort_unstable();
    Closure::Set(set)
}

/// Orders of all normal subgroups of the enumerated group, ascending.
///
/// Every normal subgroup is a join of normal closures of single
/// conjugacy-class representatives, so closing that set of "principal"
/// subgroups under pairwise join enumerates the whole lattice.
pub fn normal_subgroup_audit(group: &SubgroupEnumeration) -> Vec<u64> {
    let spec = group.spec;
    let gens = transvection_generators(&spec);
    let full = group.len() as u64;

    let mut principal: Vec<Vec<u128>> = Vec::new();
    let mut saw_full = false;
    for (rep, _) in conjugacy_classes(group) {
        match normal_closure(rep, group, &gens) {
            Closure::Full => saw_full = true,
            Closure::Set(s) => {
                if !principal.contains(&s) {
                    principal.push(s);
                }
            }
        }
    }

    // join lattice of the proper principal subgroups
    let mut subs: Vec<Vec<u128>> = principal;
    loop {
        let mut added = false;
        'pairs: for a in 0..subs.len() {
            for b in a + 1..subs.len() {
                if subs[a].iter().all(|k| subs[b].binary_search(k).is_ok())
                    || subs[b].iter().all(|k| subs[a].binary_search(k).is_ok())
                {
                    continue;
                }
                let join = join_subgroups(&subs[a], &subs[b], group);
                match join {
                    Closure::Full => saw_full = true,
                    Closure::Set(s) => {
                        if !subs.contains(&s) {
                            subs.push(s);
                            added = true;
                            break 'pairs;
                        }
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    let mut orders: Vec<u64> = subs.iter().map(|s| s.len() as u64).collect();
    if saw_full {
        orders.push(full);
    }
    orders.sort_unstable();
    orders.dedup();
    orders
}

fn join_subgroups(a: &[u128], b: &[u128], group: &SubgroupEnumeration) -> Closure {
    // the product set N1.N2 of two normal subgroups is itself a normal
    // subgroup, so plain multiplicative closure of the union is enough
    let spec = group.spec;
    let n = spec.dim();
    let ell = spec.ell().get();
    let half = group.len() as u64 / 2;
    let mut members: HashMap<u128, ()> = HashMap::new();
    let mut elems: Vec<u128> = Vec::new();
    let mut sub_gens: Vec<Matrix> = Vec::new();
    for &k in a.iter().chain(b.iter()) {
        if members.insert(k, ()).is_none() {
            elems.push(k);
            sub_gens.push(Matrix::from_key(n, ell, k));
        }
    }
    let mut i = 0;
    while i < elems.len() {
        let x = Matrix::from_key(n, ell, elems[i]);
        for t in &sub_gens {
            let y = x.mul(t);
            let k = y.key();
            if members.insert(k, ()).is_none() {
                elems.push(k);
                if elems.len() as u64 > half {
                    return Closure::Full;
                }
            }
        }
        i += 1;
    }
    let mut set = elems;
    set.sort_unstable();
    Closure::Set(set)
}

/// Whether the normal-subgroup orders are exactly {1, 2, |G|}, i.e. the
/// only proper normal subgroup is the center {+-I}.
pub fn center_only(orders: &[u64], group_order: u64) -> bool {
    orders == [1, 2, group_order]
}

/// Random element of GSp with the given multiplier: a word of random
/// symplectic transvections followed by diag(t,..,t,1,..,1), which has
/// multiplier t. Deterministic for a fixed RNG stream.
pub fn random_gsp_element<R: RngCore>(
    spec: &GroupSpec,
    target_multiplier: u64,
    rng: &mut R,
) -> Result<GspElement, SymplecticError> {
    random_gsp_element_with_len(spec, target_multiplier, DEFAULT_WORD_LEN, rng)
}

pub fn random_gsp_element_with_len<R: RngCore>(
    spec: &GroupSpec,
    target_multiplier: u64,
    word_len: usize,
    rng: &mut R,
) -> Result<GspElement, SymplecticError> {
    let ell = spec.ell().get();
    let target = target_multiplier % ell;
    if target == 0 {
        return Err(SymplecticError::ZeroMultiplierTarget);
    }
    let n = spec.dim();
    let mut m = multiplier_shift(spec, target);
    let j = form_matrix(spec);
    let mut v = vec![0u64; n];
    for _ in 0..word_len {
        loop {
            for slot in v.iter_mut() {
                *slot = rng.next_u64() % ell;
            }
            if v.iter().any(|&c| c != 0) {
                break;
            }
        }
        let lam = 1 + rng.next_u64() % (ell - 1);
        // left-multiply by I + lam v (tv J) as a rank-one update:
        // M += lam v (tv J M)
        let mut w = vec![0u64; n];
        for (col, slot) in w.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (k, &vk) in v.iter().enumerate() {
                acc += vk * j.get(k, col);
            }
            *slot = acc % ell;
        }
        // u = w M
        let mut u = vec![0u64; n];
        for (col, slot) in u.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (k, &wk) in w.iter().enumerate() {
                acc += wk * m.get(k, col);
            }
            *slot = acc % ell;
        }
        for (i, &vi) in v.iter().enumerate() {
            for (col, &ucol) in u.iter().enumerate() {
                let add = lam * vi % ell * ucol % ell;
                let cur = m.get(i, col);
                m.set(i, col, (cur + add) % ell);
            }
        }
    }
    GspElement::new(m, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    fn spec(g: usize, ell: u64) -> GroupSpec {
        GroupSpec::new(g, ell).unwrap()
    }

    #[test]
    fn group_spec_validation() {
        assert!(GroupSpec::new(0, 5).is_err());
        assert!(GroupSpec::new(1, 2).is_err());
        assert!(GroupSpec::new(1, 9).is_err());
        assert!(GroupSpec::new(2, 7).is_ok());
    }

    #[test]
    fn form_matrix_shape() {
        let s = spec(2, 3);
        let j = form_matrix(&s);
        assert_eq!(j.get(0, 2), 1);
        assert_eq!(j.get(1, 3), 1);
        assert_eq!(j.get(2, 0), 2); // -1 mod 3
        assert_eq!(j.get(3, 1), 2);
        assert_eq!(j.transpose(), j.neg());
    }

    #[test]
    fn det_small_matrices() {
        let m = Matrix::from_rows(&[vec![1, 2], vec![3, 4]], 7);
        assert_eq!(m.det(), (4 - 2 * 3 + 49) as u64 % 7);
        let singular = Matrix::from_rows(&[vec![1, 2], vec![2, 4]], 7);
        assert_eq!(singular.det(), 0);
        assert!(singular.inverse().is_err());
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Matrix::identity(2, 7));
    }

    #[test]
    fn det_exhaustive_vs_cofactor_3x3() {
        // all 3x3 matrices over F_2 would be 512 cases at the wrong modulus
        // (we exclude 2); use a sample over F_3 against the cofactor rule
        let ell = 3u64;
        for key in 0..3u128.pow(9) {
            let m = Matrix::from_key(3, ell, key);
            let cof = |r: [usize; 2], c: [usize; 2]| {
                (m.get(r[0], c[0]) * m.get(r[1], c[1]) + 2 * ell * ell
                    - m.get(r[0], c[1]) * m.get(r[1], c[0]))
                    % ell
            };
            let expect = (m.get(0, 0) * cof([1, 2], [1, 2]) + 2 * ell * ell
                - m.get(0, 1) * cof([1, 2], [0, 2])
                + m.get(0, 2) * cof([1, 2], [0, 1]))
                % ell;
            assert_eq!(m.det(), expect, "key {key}");
        }
    }

    #[test]
    fn matrix_key_roundtrip() {
        let m = Matrix::from_rows(
            &[
                vec![4, 0, 1, 6],
                vec![2, 3, 3, 0],
                vec![1, 1, 5, 2],
                vec![0, 6, 2, 4],
            ],
            7,
        );
        assert_eq!(Matrix::from_key(4, 7, m.key()), m);
    }

    #[test]
    fn multiplier_spot_values() {
        let s15 = spec(1, 5);
        let id = Matrix::identity(2, 5);
        assert_eq!(multiplier_of(&id, &s15), Ok(1));

        // scalar matrices have multiplier x^2: 3^2 = 2 mod 7
        let s17 = spec(1, 7);
        let sc = Matrix::scalar(2, 7, 3);
        assert_eq!(multiplier_of(&sc, &s17), Ok(2));

        // diag(2,1) has multiplier 2 in GSp_2(F_5)
        let d = Matrix::from_rows(&[vec![2, 0], vec![0, 1]], 5);
        assert_eq!(multiplier_of(&d, &s15), Ok(2));

        // J itself is a similitude with multiplier 1
        let j = form_matrix(&s15);
        assert_eq!(multiplier_of(&j, &s15), Ok(1));

        // a shear that is not symplectic-similitude in dimension 2? any
        // invertible 2x2 is one (GSp_2 = GL_2), so break dimension 4 instead
        let s23 = spec(2, 3);
        let bad = Matrix::from_rows(
            &[
                vec![1, 1, 0, 0],
                vec![0, 1, 0, 0],
                vec![0, 0, 1, 0],
                vec![0, 0, 0, 2],
            ],
            3,
        );
        assert_eq!(
            multiplier_of(&bad, &s23),
            Err(SymplecticError::NotSymplectic)
        );

        let zero = Matrix::zero(2, 5);
        assert_eq!(
            multiplier_of(&zero, &s15),
            Err(SymplecticError::NotSymplectic)
        );
    }

    #[test]
    fn gl2_multiplier_is_det() {
        // in genus one the similitude relation reads tM J M = det(M) J,
        // so every invertible 2x2 matrix qualifies with lambda = det
        let s = spec(1, 5);
        for key in 0..5u128.pow(4) {
            let m = Matrix::from_key(2, 5, key);
            let d = m.det();
            let got = multiplier_of(&m, &s);
            if d == 0 {
                assert_eq!(got, Err(SymplecticError::NotSymplectic));
            } else {
                assert_eq!(got, Ok(d));
                let e = GspElement::new(m, &s).unwrap();
                assert!(det_multiplier_check(&e));
            }
        }
    }

    #[test]
    fn multiplier_is_a_homomorphism() {
        let s = spec(2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_gsp_element(&s, 1 + rng.next_u64() % 6, &mut rng).unwrap();
            let b = random_gsp_element(&s, 1 + rng.next_u64() % 6, &mut rng).unwrap();
            let ab = a.mul(&b);
            assert_eq!(
                multiplier_of(ab.matrix(), &s).unwrap(),
                a.multiplier() * b.multiplier() % 7
            );
            let ainv = a.inverse();
            assert_eq!(
                multiplier_of(ainv.matrix(), &s).unwrap(),
                pow_mod(a.multiplier(), 5, 7)
            );
            assert_eq!(a.mul(&ainv).matrix(), &Matrix::identity(4, 7));
        }
    }

    #[test]
    fn sp_orders_match_brute_force_gl_count() {
        // genus one: Sp_2 = SL_2, countable directly
        for ell in [3u64, 5, 7] {
            let s = spec(1, ell);
            let mut count = 0u64;
            for key in 0..(ell as u128).pow(4) {
                if Matrix::from_key(2, ell, key).det() == 1 {
                    count += 1;
                }
            }
            assert_eq!(sp_order(&s).unwrap(), count, "ell={ell}");
        }
    }

    #[test]
    fn sp_order_values_and_valuation() {
        assert_eq!(sp_order(&spec(1, 3)).unwrap(), 24);
        assert_eq!(sp_order(&spec(1, 5)).unwrap(), 120);
        assert_eq!(sp_order(&spec(2, 3)).unwrap(), 51_840);
        assert_eq!(sp_order(&spec(2, 5)).unwrap(), 9_360_000);
        for (g, ell) in [(1usize, 5u64), (1, 7), (2, 3), (2, 5), (3, 5)] {
            let s = spec(g, ell);
            assert_eq!(
                sp_order_ell_valuation(&s).unwrap(),
                (g * g) as u32,
                "(g,ell)=({g},{ell})"
            );
        }
        // 11^9 * (11^2-1)(11^4-1)(11^6-1) exceeds u64
        assert_eq!(sp_order(&spec(3, 11)), Err(SymplecticError::Overflow));
    }

    #[test]
    fn cardinal_separation_scan() {
        // |Sp| and its central quotient separate (g, z) completely here
        assert!(cardinal_separation(5, 1, 2, 1, 2).unwrap());
        assert!(!cardinal_separation(5, 1, 2, 1, 1).unwrap());
        for ell in [3u64, 5, 7] {
            for g1 in 1..=3usize {
                for g2 in 1..=3usize {
                    for z1 in [1u64, 2] {
                        for z2 in [1u64, 2] {
                            let coincide = cardinal_separation(ell, g1, z1, g2, z2).unwrap();
                            assert_eq!(
                                coincide,
                                g1 == g2 && z1 == z2,
                                "ell={ell} ({g1},{z1}) vs ({g2},{z2})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn transvections_are_symplectic() {
        for s in [spec(1, 5), spec(2, 3), spec(3, 5)] {
            for t in transvection_generators(&s) {
                assert_eq!(multiplier_of(&t, &s), Ok(1));
            }
        }
    }

    #[test]
    fn enumerate_small_groups() {
        let e13 = enumerate_sp(&spec(1, 3)).unwrap();
        assert_eq!(e13.len(), 24);
        let e15 = enumerate_sp(&spec(1, 5)).unwrap();
        assert_eq!(e15.len(), 120);
        // identity is listed first
        assert_eq!(e15.matrix_at(0), Matrix::identity(2, 5));
        // closure under product and inverse, all multipliers 1
        for a in e13.iter() {
            assert_eq!(multiplier_of(&a, &spec(1, 3)), Ok(1));
            assert!(e13.contains(&a.inverse().unwrap()));
            for b in e13.iter() {
                assert!(e13.contains(&a.mul(&b)));
            }
        }
    }

    #[test]
    fn enumerate_cap() {
        let err = enumerate_sp(&spec(2, 5)).unwrap_err();
        assert_eq!(
            err,
            SymplecticError::CapExceeded {
                needed: 9_360_000,
                cap: DEFAULT_ENUM_CAP
            }
        );
    }

    #[test]
    fn normal_subgroups_of_sl2_f5() {
        let group = enumerate_sp(&spec(1, 5)).unwrap();
        let orders = normal_subgroup_audit(&group);
        assert_eq!(orders, vec![1, 2, 120]);
        assert!(center_only(&orders, 120));
    }

    #[test]
    fn normal_subgroups_of_sl2_f3_include_order_eight() {
        let group = enumerate_sp(&spec(1, 3)).unwrap();
        let orders = normal_subgroup_audit(&group);
        assert_eq!(orders, vec![1, 2, 8, 24]);
        assert!(!center_only(&orders, 24));
    }

    #[test]
    fn normal_subgroups_of_sp4_f3() {
        // 51840 elements; only the center survives as a proper normal subgroup
        let group = enumerate_sp(&spec(2, 3)).unwrap();
        let orders = normal_subgroup_audit(&group);
        assert_eq!(orders, vec![1, 2, 51_840]);
        assert!(center_only(&orders, 51_840));
    }

    #[test]
    fn normal_subgroup_audit_matches_subgroup_sweep() {
        // independent oracle: every subgroup of SL_2(F_3) is generated by
        // at most two elements; sweep all pairs, keep the normal ones
        let s = spec(1, 3);
        let group = enumerate_sp(&s).unwrap();
        let elems: Vec<Matrix> = group.iter().collect();
        let mut normal_orders = vec![];
        for a in 0..elems.len() {
            for b in a..elems.len() {
                let mut set = std::collections::HashSet::new();
                let mut list = vec![Matrix::identity(2, 3)];
                set.insert(list[0].key());
                let gens = [elems[a].clone(), elems[b].clone()];
                let mut i = 0;
                while i < list.len() {
                    for t in &gens {
                        let y = list[i].mul(t);
                        if set.insert(y.key()) {
                            list.push(y);
                        }
                    }
                    i += 1;
                }
                let is_normal = elems.iter().all(|x| {
                    let xinv = x.inverse().unwrap();
                    gens.iter().all(|h| set.contains(&xinv.mul(h).mul(x).key()))
                });
                if is_normal {
                    normal_orders.push(list.len() as u64);
                }
            }
        }
        normal_orders.sort_unstable();
        normal_orders.dedup();
        assert_eq!(normal_orders, normal_subgroup_audit(&group));
    }

    #[test]
    fn random_elements_have_requested_multiplier() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (g, ell) in [(1usize, 5u64), (2, 7)] {
            let s = spec(g, ell);
            for _ in 0..500 {
                let target = 1 + rng.next_u64() % (ell - 1);
                let e = random_gsp_element(&s, target, &mut rng).unwrap();
                assert_eq!(e.multiplier(), target);
                assert_eq!(multiplier_of(e.matrix(), &s), Ok(target));
            }
        }
        assert_eq!(
            random_gsp_element(&spec(1, 5), 0, &mut rng).unwrap_err(),
            SymplecticError::ZeroMultiplierTarget
        );
    }

    #[test]
    fn random_words_cover_all_sp_cosets() {
        // with the multiplier fixed, the word part should reach every
        // element of Sp_2(F_5); 10^5 draws is far past coupon collection
        let s = spec(1, 5);
        let group = enumerate_sp(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hit = vec![false; group.len()];
        let dinv = GspElement::new(Matrix::from_rows(&[vec![3, 0], vec![0, 1]], 5), &s).unwrap();
        for _ in 0..100_000 {
            let e = random_gsp_element(&s, 2, &mut rng).unwrap();
            // strip the multiplier part: e * diag(2,1)^-1 lands in Sp
            let w = e.mul(&dinv);
            assert_eq!(w.multiplier(), 1);
            let idx = group
                .keys()
                .iter()
                .position(|&k| k == w.matrix().key())
                .expect("word lies in Sp");
            hit[idx] = true;
        }
        assert!(
            hit.iter().all(|&h| h),
            "missed {} cosets",
            hit.iter().filter(|&&h| !h).count()
        );
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let s = spec(2, 7);
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let a = random_gsp_element(&s, 3, &mut r1).unwrap();
            let b = random_gsp_element(&s, 3, &mut r2).unwrap();
            assert_eq!(a.matrix(), b.matrix());
        }
    }
}
