//! Set-level models for the joint image of a pair of mod-l
//! representations inside GSp x GSp with matching multipliers. Three
//! shapes are covered: the graph of an inner conjugation (the two
//! representations agree up to change of basis), the same graph twisted
//! by an independent quadratic sign, and the full fibered product over
//! the multiplier (the representations are unrelated). The operations
//! measure what a single place can certify: whether det(x - 1) = 0
//! propagates across the pair, how large the projected kernels are, and
//! the sign congruence det(1 - y) = 2^(2g) that makes every suitable
//! place a witness in the twisted case.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::modmath::pow_mod;
use crate::symplectic::{
    enumerate_sp, multiplier_shift, random_gsp_element, GroupSpec, GspElement, Matrix,
    SubgroupEnumeration, SymplecticError,
};

/// Exhaustive pair scans are refused beyond this many pairs per
/// multiplier class.
pub const DEFAULT_PAIR_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GaloisSimError {
    Symplectic(SymplecticError),
    PairCapExceeded { needed: u64, cap: u64 },
    WrongVariant,
    ZeroResidue,
}

impl fmt::Display for GaloisSimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaloisSimError::Symplectic(e) => e.fmt(f),
            GaloisSimError::PairCapExceeded { needed, cap } => {
                write!(f, "pair scan needs {needed} pairs per class, cap is {cap}")
            }
            GaloisSimError::WrongVariant => write!(f, "operation requires the twist variant"),
            GaloisSimError::ZeroResidue => {
                write!(f, "place residue is 0 mod l (places over l are excluded)")
            }
        }
    }
}

impl std::error::Error for GaloisSimError {}

impl From<SymplecticError> for GaloisSimError {
    fn from(e: SymplecticError) -> Self {
        GaloisSimError::Symplectic(e)
    }
}

#[derive(Debug, Clone)]
pub enum ModelVariant {
    /// Pairs (x, u^-1 x u): both representations cut out the same field.
    GraphOfConjugation { u: GspElement },
    /// Pairs (x, eps * u^-1 x u) with an independent sign eps = +-1.
    QuadraticTwistGraph { u: GspElement },
    /// All pairs (x, y) with lambda(x) = lambda(y).
    FullFiberedProduct,
}

#[derive(Debug, Clone)]
pub struct JointImageModel {
    spec: GroupSpec,
    variant: ModelVariant,
}

/// One simulated Frobenius draw: a multiplier-matched pair.
#[derive(Debug, Clone)]
pub struct FrobeniusSample {
    pub x: GspElement,
    pub y: GspElement,
    pub lambda: u64,
    pub epsilon: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Exhaustive,
    Sampled { trials: u64, seed: u64 },
}

/// Outcome of a det(x-1) = 0 vs det(y-1) = 0 coincidence scan.
#[derive(Debug, Clone)]
pub struct CoincidenceReport {
    pub holds: bool,
    pub total: u64,
    pub violations: u64,
    pub counterexample: Option<(Matrix, Matrix)>,
}

/// The projection to the first factor of ker(second projection).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelAudit {
    pub order: u64,
    pub contains_minus_identity: bool,
    pub inside_sp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoursatDichotomy {
    /// Both projected kernels trivial: the two cut-out fields coincide.
    EqualFields,
    /// Both kernels of order 2: the fields sit at index two in their join.
    IndexTwo,
    /// Anything larger, as for the full fibered product.
    Violated,
}

impl fmt::Display for GoursatDichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GoursatDichotomy::EqualFields => "EqualFields",
            GoursatDichotomy::IndexTwo => "IndexTwo",
            GoursatDichotomy::Violated => "Violated",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoursatReport {
    pub ker_first: u64,
    pub ker_second: u64,
    pub dichotomy: GoursatDichotomy,
}

/// det(1 - y) at the forced twist sample (x, eps) = (1, -1), against the
/// expected residue 2^(2g) mod l.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistCongruenceReport {
    pub det_value: u64,
    pub expected: u64,
    pub ok: bool,
}

impl JointImageModel {
    pub fn graph_of_conjugation(u: GspElement) -> Self {
        JointImageModel {
            spec: *u.spec(),
            variant: ModelVariant::GraphOfConjugation { u },
        }
    }

    pub fn quadratic_twist_graph(u: GspElement) -> Self {
        JointImageModel {
            spec: *u.spec(),
            variant: ModelVariant::QuadraticTwistGraph { u },
        }
    }

    pub fn full_fibered_product(spec: GroupSpec) -> Self {
        JointImageModel {
            spec,
            variant: ModelVariant::FullFiberedProduct,
        }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            ModelVariant::GraphOfConjugation { .. } => "graph",
            ModelVariant::QuadraticTwistGraph { .. } => "twist",
            ModelVariant::FullFiberedProduct => "product",
        }
    }

    /// Set membership of a concrete pair.
    pub fn contains(&self, x: &GspElement, y: &GspElement) -> bool {
        if x.multiplier() != y.multiplier() {
            return false;
        }
        match &self.variant {
            ModelVariant::GraphOfConjugation { u } => {
                let conj = u.inverse().mul(x).mul(u);
                y.matrix() == conj.matrix()
            }
            ModelVariant::QuadraticTwistGraph { u } => {
                let conj = u.inverse().mul(x).mul(u);
                y.matrix() == conj.matrix() || y.matrix() == &conj.matrix().neg()
            }
            ModelVariant::FullFiberedProduct => true,
        }
    }

    /// Draw one multiplier-matched pair at the given place residue.
    pub fn sample<R: RngCore>(
        &self,
        p_residue: u64,
        rng: &mut R,
    ) -> Result<FrobeniusSample, GaloisSimError> {
        let ell = self.spec.ell().get();
        let lambda = p_residue % ell;
        if lambda == 0 {
            return Err(GaloisSimError::ZeroResidue);
        }
        let x = random_gsp_element(&self.spec, lambda, rng)?;
        let (y, epsilon) = match &self.variant {
            ModelVariant::GraphOfConjugation { u } => (u.inverse().mul(&x).mul(u), 1i8),
            ModelVariant::QuadraticTwistGraph { u } => {
                let conj = u.inverse().mul(&x).mul(u);
                if rng.next_u64() & 1 == 0 {
                    (conj, 1)
                } else {
                    (conj.neg(), -1)
                }
            }
            ModelVariant::FullFiberedProduct => (random_gsp_element(&self.spec, lambda, rng)?, 1),
        };
        debug_assert_eq!(x.multiplier(), y.multiplier());
        Ok(FrobeniusSample {
            x,
            y,
            lambda,
            epsilon,
        })
    }

    fn sp(&self) -> Result<SubgroupEnumeration, GaloisSimError> {
        Ok(enumerate_sp(&self.spec)?)
    }
}

pub fn sample_frobenius<R: RngCore>(
    model: &JointImageModel,
    p_residue: u64,
    rng: &mut R,
) -> Result<FrobeniusSample, GaloisSimError> {
    model.sample(p_residue, rng)
}

fn det_minus_identity_is_zero(m: &Matrix) -> bool {
    let id = Matrix::identity(m.dim(), m.modulus());
    m.sub(&id).det() == 0
}

/// Scan the model for places where exactly one side of the pair has
/// det(. - 1) = 0. For an actual graph this never happens; one violating
/// pair refutes the conjugation hypothesis.
pub fn check_det_coincidence(
    model: &JointImageModel,
    mode: ScanMode,
) -> Result<CoincidenceReport, GaloisSimError> {
    match mode {
        ScanMode::Exhaustive => check_det_coincidence_exhaustive(model),
        ScanMode::Sampled { trials, seed } => check_det_coincidence_sampled(model, trials, seed),
    }
}

fn check_det_coincidence_sampled(
    model: &JointImageModel,
    trials: u64,
    seed: u64,
) -> Result<CoincidenceReport, GaloisSimError> {
    let ell = model.spec.ell().get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let lambda = 1 + rng.next_u64() % (ell - 1);
        let s = model.sample(lambda, &mut rng)?;
        let zx = det_minus_identity_is_zero(s.x.matrix());
        let zy = det_minus_identity_is_zero(s.y.matrix());
        if zx != zy {
            violations += 1;
            if counterexample.is_none() {
                counterexample = Some((s.x.matrix().clone(), s.y.matrix().clone()));
            }
        }
    }
    Ok(CoincidenceReport {
        holds: violations == 0,
        total: trials,
        violations,
        counterexample,
    })
}

fn check_det_coincidence_exhaustive(
    model: &JointImageModel,
) -> Result<CoincidenceReport, GaloisSimError> {
    let spec = model.spec;
    let ell = spec.ell().get();
    let sp = model.sp()?;
    let mut total = 0u64;
    let mut violations = 0u64;
    let mut counterexample: Option<(Matrix, Matrix)> = None;

    match &model.variant {
        ModelVariant::GraphOfConjugation { u } | ModelVariant::QuadraticTwistGraph { u } => {
            let twisted = matches!(model.variant, ModelVariant::QuadraticTwistGraph { .. });
            let uinv_mat = u.matrix().inverse().expect("similitudes are invertible");
            for lambda in 1..ell {
                let shift = multiplier_shift(&spec, lambda);
                for s in sp.iter() {
                    let x = shift.mul(&s);
                    let conj = uinv_mat.mul(&x).mul(u.matrix());
                    let zx = det_minus_identity_is_zero(&x);
                    let signs: &[bool] = if twisted { &[false, true] } else { &[false] };
                    for &flip in signs {
                        let y = if flip { conj.neg() } else { conj.clone() };
                        let zy = det_minus_identity_is_zero(&y);
                        total += 1;
                        if zx != zy {
                            violations += 1;
                            if counterexample.is_none() {
                                counterexample = Some((x.clone(), y));
                            }
                        }
                    }
                }
            }
        }
        ModelVariant::FullFiberedProduct => {
            let class_pairs = (sp.len() as u64).pow(2);
            if class_pairs > DEFAULT_PAIR_CAP {
                return Err(GaloisSimError::PairCapExceeded {
                    needed: class_pairs,
                    cap: DEFAULT_PAIR_CAP,
                });
            }
            for lambda in 1..ell {
                let shift = multiplier_shift(&spec, lambda);
                let coset: Vec<Matrix> = sp.iter().map(|s| shift.mul(&s)).collect();
                let zero_flags: Vec<bool> = coset.iter().map(det_minus_identity_is_zero).collect();
                for (i, &zx) in zero_flags.iter().enumerate() {
                    for (j, &zy) in zero_flags.iter().enumerate() {
                        total += 1;
                        if zx != zy {
                            violations += 1;
                            if counterexample.is_none() {
                                counterexample = Some((coset[i].clone(), coset[j].clone()));
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(CoincidenceReport {
        holds: violations == 0,
        total,
        violations,
        counterexample,
    })
}

/// Collect the x with (x, 1) in the model: the first-factor shadow of
/// the kernel of the second projection.
pub fn projected_kernel_audit(model: &JointImageModel) -> Result<KernelAudit, GaloisSimError> {
    kernel_audit(model, false)
}

fn kernel_audit(model: &JointImageModel, first_side: bool) -> Result<KernelAudit, GaloisSimError> {
    let spec = model.spec;
    let ell = spec.ell().get();
    let sp = model.sp()?;
    let identity = GspElement::identity(&spec);
    let minus_identity_key = Matrix::identity(spec.dim(), ell).neg().key();
    let mut order = 0u64;
    let mut contains_minus_identity = false;
    let mut inside_sp = true;
    for lambda in 1..ell {
        let shift = multiplier_shift(&spec, lambda);
        for s in sp.iter() {
            let m = shift.mul(&s);
            let elem = GspElement::new(m, &spec).expect("coset element is a similitude");
            let member = if first_side {
                model.contains(&identity, &elem)
            } else {
                model.contains(&elem, &identity)
            };
            if member {
                order += 1;
                if elem.matrix().key() == minus_identity_key {
                    contains_minus_identity = true;
                }
                if elem.multiplier() != 1 {
                    inside_sp = false;
                }
            }
        }
    }
    Ok(KernelAudit {
        order,
        contains_minus_identity,
        inside_sp,
    })
}

/// Orders of both projected kernels plus the induced classification.
pub fn goursat_degrees(model: &JointImageModel) -> Result<GoursatReport, GaloisSimError> {
    let second = kernel_audit(model, false)?;
    let first = kernel_audit(model, true)?;
    let dichotomy = match (first.order, second.order) {
        (1, 1) => GoursatDichotomy::EqualFields,
        (2, 2) => GoursatDichotomy::IndexTwo,
        _ => GoursatDichotomy::Violated,
    };
    Ok(GoursatReport {
        ker_first: first.order,
        ker_second: second.order,
        dichotomy,
    })
}

/// In the twist model, the place with trivial x and sign -1 has
/// y = -1, so det(1 - y) = det(2 * 1) = 2^(2g); nonzero mod every odd l.
pub fn step3_congruence_experiment(
    model: &JointImageModel,
) -> Result<TwistCongruenceReport, GaloisSimError> {
    let ModelVariant::QuadraticTwistGraph { u } = &model.variant else {
        return Err(GaloisSimError::WrongVariant);
    };
    let spec = model.spec;
    let ell = spec.ell().get();
    let x = GspElement::identity(&spec);
    let y = u.inverse().mul(&x).mul(u).neg();
    let id = Matrix::identity(spec.dim(), ell);
    let det_value = id.sub(y.matrix()).det();
    let expected = pow_mod(2, 2 * spec.g() as u64, ell);
    Ok(TwistCongruenceReport {
        det_value,
        expected,
        ok: det_value == expected && det_value != 0,
    })
}
