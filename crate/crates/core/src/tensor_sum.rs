//! Kronecker-sum realizations `S = T₁ ⊗ I + I ⊗ T₂` with `J = J₁ ⊗ J₂`:
//! predicted definite-type sets, per-point type predictions, and comparison
//! against direct classification of `S`.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::{
    classify_spectrum, classify_spectrum_partial, definiteness_constants, j_self_adjoint_defect,
    riesz_projection_adaptive, theta_operator, validate_involution, ClassifiedSpectrum, ClassifyOptions,
    DefinitenessCertificate, Involution, SpectralEntry, ThetaCertificate, TypeTag,
};
use crate::linalg::dense::{hermitian_eigenvalues, orthonormal_range, spectral_norm, CMatrix, C64, ONE, ZERO};
use crate::sets::{Interval, RealLineSet};

pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorOptions {
    pub classify: ClassifyOptions,
    /// Accepted `‖T − J T* J‖ / max(1, ‖T‖)`.
    pub defect_tol: f64,
    /// Accepted `‖(I − Π) T Π‖ / max(1, ‖T‖)` for the definite subspaces.
    pub invariance_tol: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { classify: ClassifyOptions::default(), defect_tol: 1e-10, invariance_tol: 1e-8 }
    }
}

/// One factor of the tensor sum with its definite-type decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct FactorSpec {
    pub t: CMatrix,
    pub j: Involution,
    pub classification: ClassifiedSpectrum,
    /// Spectral projections onto the selected positive / negative parts.
    pub proj_plus: CMatrix,
    pub proj_minus: CMatrix,
    pub basis_plus: CMatrix,
    pub basis_minus: CMatrix,
    pub certificate: Option<DefinitenessCertificate>,
    /// Eigenvalues (with multiplicity) of the restrictions to the `+`, `−`
    /// and remaining parts.
    pub spectrum_plus: Vec<C64>,
    pub spectrum_minus: Vec<C64>,
    pub spectrum_rest: Vec<C64>,
}

impl FactorSpec {
    /// Factor with every definite eigenvalue assigned to its part.
    pub fn new(t: &CMatrix, j: &Involution, opts: &FactorOptions) -> Result<Self> {
        Self::with_selection(t, j, opts, |_| true)
    }

    /// Factor in which only definite eigenvalues accepted by `select` enter
    /// the `±` parts; all others form the remainder.
    pub fn with_selection(
        t: &CMatrix,
        j: &Involution,
        opts: &FactorOptions,
        select: impl Fn(&SpectralEntry) -> bool,
    ) -> Result<Self> {
        let n = t.nrows();
        let scale = spectral_norm(t).max(1.0);
        let defect = j_self_adjoint_defect(t, j)?;
        if defect > opts.defect_tol * scale {
            return Err(Error::InvalidParameter(format!("factor is not J-self-adjoint: defect {defect:.3e}")));
        }
        let classification = classify_spectrum(t, j, &opts.classify)?;
        let lambdas: Vec<C64> = classification.entries.iter().map(|e| e.lambda).collect();
        let mut proj_plus = CMatrix::zeros(n, n);
        let mut proj_minus = CMatrix::zeros(n, n);
        let (mut sp, mut sm, mut sr) = (Vec::new(), Vec::new(), Vec::new());
        for (k, e) in classification.entries.iter().enumerate() {
            let part = match e.type_tag {
                TypeTag::PositiveType if select(e) => Some(true),
                TypeTag::NegativeType if select(e) => Some(false),
                _ => None,
            };
            let bucket = match part {
                Some(true) => &mut sp,
                Some(false) => &mut sm,
                None => &mut sr,
            };
            bucket.extend(std::iter::repeat(e.lambda).take(e.alg_mult));
            if let Some(plus) = part {
                let gap = lambdas
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, l)| (l - e.lambda).norm())
                    .fold(f64::INFINITY, f64::min);
                let radius = if gap.is_finite() { 0.5 * gap } else { 0.5 * scale };
                let (p, _, _) = riesz_projection_adaptive(t, e.lambda, radius, opts.classify.nodes, opts.classify.max_nodes)?;
                if plus {
                    proj_plus += p;
                } else {
                    proj_minus += p;
                }
            }
        }
        let basis_plus = orthonormal_range(&proj_plus, sp.len()).0;
        let basis_minus = orthonormal_range(&proj_minus, sm.len()).0;
        for b in [&basis_plus, &basis_minus] {
            let res = invariance_residual(t, b);
            if res > opts.invariance_tol * scale {
                return Err(Error::InvalidParameter(format!("definite subspace is not invariant: residual {res:.3e}")));
            }
        }
        let certificate = definiteness_constants(j, &basis_plus, &basis_minus).ok();
        Ok(Self {
            t: t.clone(),
            j: j.clone(),
            classification,
            proj_plus,
            proj_minus,
            basis_plus,
            basis_minus,
            certificate,
            spectrum_plus: sp,
            spectrum_minus: sm,
            spectrum_rest: sr,
        })
    }

    pub fn order(&self) -> usize {
        self.t.nrows()
    }

    pub fn proj_rest(&self) -> CMatrix {
        let n = self.order();
        CMatrix::identity(n, n) - &self.proj_plus - &self.proj_minus
    }

    /// `Θ = Σ P*P` over the family `{P⁺, P⁻, Pʳ}`.
    pub fn theta(&self) -> Result<(CMatrix, ThetaCertificate)> {
        theta_operator(&[self.proj_plus.clone(), self.proj_minus.clone(), self.proj_rest()])
    }

    fn has_jordan(&self) -> bool {
        self.classification.entries.iter().any(|e| e.alg_mult > e.geo_mult)
    }
}

/// `‖(I − B B*) T B‖` for an orthonormal `b`.
fn invariance_residual(t: &CMatrix, b: &CMatrix) -> f64 {
    if b.ncols() == 0 {
        return 0.0;
    }
    let tb = t * b;
    spectral_norm(&(&tb - b * (b.adjoint() * &tb)))
}

/// `S = T₁ ⊗ I + I ⊗ T₂` and `J = J₁ ⊗ J₂`.
pub fn kron_sum(f1: &FactorSpec, f2: &FactorSpec) -> Result<(CMatrix, Involution)> {
    kron_sum_matrices(&f1.t, &f1.j, &f2.t, &f2.j, DEFAULT_DIM_CAP)
}

pub fn kron_sum_matrices(
    t1: &CMatrix,
    j1: &Involution,
    t2: &CMatrix,
    j2: &Involution,
    cap: usize,
) -> Result<(CMatrix, Involution)> {
    let (n1, n2) = (t1.nrows(), t2.nrows());
    if j1.order() != n1 || j2.order() != n2 {
        return Err(Error::DimensionMismatch("factor and involution orders differ".into()));
    }
    let dim = n1.checked_mul(n2).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionCap(format!("product dimension {n1}×{n2} = {dim} exceeds cap {cap}")));
    }
    let s = t1.kronecker(&CMatrix::identity(n2, n2)) + CMatrix::identity(n1, n1).kronecker(t2);
    Ok((s, j1.tensor(j2)))
}

/// Spectrum of a factor: classified eigenvalues or a real-line set of
/// uniformly positive type (self-adjoint factor with `J = I`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FactorSpectrum {
    Points(ClassifiedSpectrum),
    RealLine(RealLineSet),
}

/// Membership flags of one (coalesced) point of `σ(T₁) + σ(T₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumPoint {
    pub lambda: C64,
    pub plus_plus: bool,
    pub minus_minus: bool,
    pub plus_minus: bool,
    pub minus_plus: bool,
    /// Some summand pair involves a not-definite eigenvalue.
    pub involves_indefinite: bool,
}

impl SumPoint {
    pub fn in_m_plus(&self) -> bool {
        self.plus_plus || self.minus_minus
    }

    pub fn in_m_minus(&self) -> bool {
        self.plus_minus || self.minus_plus
    }

    pub fn in_m_zero(&self) -> bool {
        !self.in_m_plus() && !self.in_m_minus()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MSets {
    Points(Vec<SumPoint>),
    RealLine { m_plus: RealLineSet, m_minus: RealLineSet, m_zero: RealLineSet },
}

fn check_typed(c: &ClassifiedSpectrum) -> Result<()> {
    if let Some(e) = c.entries.iter().find(|e| e.gram_eigs.is_empty() || e.alg_mult == 0) {
        return Err(Error::Untyped(format!("eigenvalue {} carries no classification", e.lambda)));
    }
    Ok(())
}

/// Coalesce pairwise sums of the two spectra at distance `tol`, merging flags.
pub fn sum_points(c1: &ClassifiedSpectrum, c2: &ClassifiedSpectrum, tol: f64) -> Vec<SumPoint> {
    let mut raw: Vec<SumPoint> = Vec::new();
    for a in &c1.entries {
        for b in &c2.entries {
            let (ta, tb) = (a.type_tag, b.type_tag);
            use TypeTag::*;
            raw.push(SumPoint {
                lambda: a.lambda + b.lambda,
                plus_plus: ta == PositiveType && tb == PositiveType,
                minus_minus: ta == NegativeType && tb == NegativeType,
                plus_minus: ta == PositiveType && tb == NegativeType,
                minus_plus: ta == NegativeType && tb == PositiveType,
                involves_indefinite: ta == NotDefinite || tb == NotDefinite,
            });
        }
    }
    let lambdas: Vec<C64> = raw.iter().map(|p| p.lambda).collect();
    let groups = crate::krein::cluster_eigenvalues(&lambdas, tol);
    let mut out: Vec<SumPoint> = groups
        .into_iter()
        .map(|g| {
            let lambda = g.iter().map(|&i| raw[i].lambda).sum::<C64>() / g.len() as f64;
            let mut p = SumPoint { lambda, ..raw[g[0]].clone() };
            for &i in &g[1..] {
                let q = &raw[i];
                p.plus_plus |= q.plus_plus;
                p.minus_minus |= q.minus_minus;
                p.plus_minus |= q.plus_minus;
                p.minus_plus |= q.minus_plus;
                p.involves_indefinite |= q.involves_indefinite;
            }
            p
        })
        .collect();
    out.sort_by(|a, b| (a.lambda.re, a.lambda.im).partial_cmp(&(b.lambda.re, b.lambda.im)).unwrap());
    out
}

/// The sets `M₊`, `M₋`, `M₀` of a pair of factor spectra.
pub fn predict_m_sets(c1: &FactorSpectrum, c2: &ClassifiedSpectrum, coalesce_tol: f64) -> Result<MSets> {
    check_typed(c2)?;
    match c1 {
        FactorSpectrum::Points(c1) => {
            check_typed(c1)?;
            Ok(MSets::Points(sum_points(c1, c2, coalesce_tol)))
        }
        FactorSpectrum::RealLine(longitudinal) => {
            let mut parts: [Vec<f64>; 3] = Default::default();
            for e in &c2.entries {
                if e.lambda.im.abs() > coalesce_tol {
                    return Err(Error::InvalidParameter(format!(
                        "non-real eigenvalue {} cannot be added to a real-line set",
                        e.lambda
                    )));
                }
                let k = match e.type_tag {
                    TypeTag::PositiveType => 0,
                    TypeTag::NegativeType => 1,
                    TypeTag::NotDefinite => 2,
                };
                parts[k].push(e.lambda.re);
            }
            let m_plus = RealLineSet::minkowski_add_points(&parts[0], longitudinal)?;
            let m_minus = RealLineSet::minkowski_add_points(&parts[1], longitudinal)?;
            let all: Vec<f64> = parts.concat();
            let m_zero = RealLineSet::minkowski_add_points(&all, longitudinal)?.subtract(&m_plus.union(&m_minus));
            Ok(MSets::RealLine { m_plus, m_minus, m_zero })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    MustBePlus,
    MustBeMinus,
    MustBeNotDefinite,
    NotMinus,
    NotPlus,
    Unconstrained,
}

impl Constraint {
    pub fn admits(self, t: TypeTag) -> bool {
        match self {
            Constraint::MustBePlus => t == TypeTag::PositiveType,
            Constraint::MustBeMinus => t == TypeTag::NegativeType,
            Constraint::MustBeNotDefinite => t == TypeTag::NotDefinite,
            Constraint::NotMinus => t != TypeTag::NegativeType,
            Constraint::NotPlus => t != TypeTag::PositiveType,
            Constraint::Unconstrained => true,
        }
    }
}

/// Which statement produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statement {
    /// Exclusions from the typed sums alone.
    SumExclusion,
    /// Block inclusion for diagonal blocks.
    DiagonalBlock,
    /// Block inclusion for off-diagonal blocks.
    OffDiagonalBlock,
    /// Combined inclusion under the cross-term condition.
    CrossCondition,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictOptions {
    pub coalesce_tol: f64,
    /// A point is outside a block spectrum when farther than `separation_rel · max(1, ‖S‖)`.
    pub separation_rel: f64,
    /// Apply the combined inclusion under the cross-term condition.
    pub use_item_iii: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { coalesce_tol: 1e-7, separation_rel: 1e-4, use_item_iii: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub point: SumPoint,
    pub constraint: Constraint,
    pub statement: Statement,
}

/// Block spectra `σ(S^{μν})` for `μ, ν ∈ {+, −, r}`.
struct BlockSpectra {
    parts1: [Vec<C64>; 3],
    parts2: [Vec<C64>; 3],
}

const PLUS: usize = 0;
const MINUS: usize = 1;
const REST: usize = 2;

impl BlockSpectra {
    fn new(f1: &FactorSpec, f2: &FactorSpec) -> Self {
        Self {
            parts1: [f1.spectrum_plus.clone(), f1.spectrum_minus.clone(), f1.spectrum_rest.clone()],
            parts2: [f2.spectrum_plus.clone(), f2.spectrum_minus.clone(), f2.spectrum_rest.clone()],
        }
    }

    fn dist(&self, z: C64, mu: usize, nu: usize) -> f64 {
        let mut d = f64::INFINITY;
        for a in &self.parts1[mu] {
            for b in &self.parts2[nu] {
                d = d.min((z - a - b).norm());
            }
        }
        d
    }

    fn dist_many(&self, z: C64, blocks: &[(usize, usize)]) -> f64 {
        blocks.iter().map(|&(m, n)| self.dist(z, m, n)).fold(f64::INFINITY, f64::min)
    }
}

const S_PLUS: [(usize, usize); 2] = [(PLUS, PLUS), (MINUS, MINUS)];
const S_MINUS: [(usize, usize); 2] = [(PLUS, MINUS), (MINUS, PLUS)];
const S_REST: [(usize, usize); 5] = [(REST, PLUS), (REST, MINUS), (REST, REST), (PLUS, REST), (MINUS, REST)];

/// Per-point predictions for the spectrum of the Kronecker sum.
pub fn predict_types(f1: &FactorSpec, f2: &FactorSpec, opts: &PredictOptions) -> Result<Vec<PointPrediction>> {
    let certified = f1.certificate.is_some() && f2.certificate.is_some();
    if opts.use_item_iii && !certified {
        return Err(Error::MissingCertificate("both factors need definiteness certificates".into()));
    }
    let s_scale = (spectral_norm(&f1.t) + spectral_norm(&f2.t)).max(1.0);
    let sep = opts.separation_rel * s_scale;
    let hit = opts.coalesce_tol * s_scale;
    let gate = match (&f1.certificate, &f2.certificate) {
        (Some(c1), Some(c2)) => {
            (c1.kappa_cross * c2.kappa_cross).powi(2) < c1.kappa_plus * c2.kappa_plus * c1.kappa_minus * c2.kappa_minus
        }
        _ => false,
    };
    let blocks = BlockSpectra::new(f1, f2);
    let points = sum_points(&f1.classification, &f2.classification, hit);
    Ok(points
        .into_iter()
        .map(|p| {
            let z = p.lambda;
            let (constraint, statement) = if p.in_m_zero() || (p.in_m_plus() && p.in_m_minus()) {
                (Constraint::MustBeNotDefinite, Statement::SumExclusion)
            } else if let Some(c) = certified.then(|| block_prediction(&blocks, z, hit, sep, gate, opts)).flatten() {
                c
            } else if p.in_m_plus() {
                (Constraint::NotMinus, Statement::SumExclusion)
            } else if p.in_m_minus() {
                (Constraint::NotPlus, Statement::SumExclusion)
            } else {
                (Constraint::Unconstrained, Statement::None)
            };
            PointPrediction { point: p, constraint, statement }
        })
        .collect())
}

fn block_prediction(
    b: &BlockSpectra,
    z: C64,
    hit: f64,
    sep: f64,
    gate: bool,
    opts: &PredictOptions,
) -> Option<(Constraint, Statement)> {
    let far_rest = b.dist_many(z, &S_REST) > sep;
    for (mu, nu) in [(PLUS, MINUS), (MINUS, PLUS)] {
        if b.dist(z, mu, mu) <= hit && far_rest && b.dist_many(z, &S_MINUS) > sep && b.dist(z, nu, nu) > sep {
            return Some((Constraint::MustBePlus, Statement::DiagonalBlock));
        }
        if b.dist(z, mu, nu) <= hit && far_rest && b.dist_many(z, &S_PLUS) > sep && b.dist(z, nu, mu) > sep {
            return Some((Constraint::MustBeMinus, Statement::OffDiagonalBlock));
        }
    }
    if opts.use_item_iii && gate && far_rest {
        if b.dist_many(z, &S_PLUS) <= hit && b.dist_many(z, &S_MINUS) > sep {
            return Some((Constraint::MustBePlus, Statement::CrossCondition));
        }
        if b.dist_many(z, &S_MINUS) <= hit && b.dist_many(z, &S_PLUS) > sep {
            return Some((Constraint::MustBeMinus, Statement::CrossCondition));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub lambda: C64,
    pub constraint: Constraint,
    pub statement: Statement,
    pub oracle: Option<TypeTag>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub m_plus: Vec<C64>,
    pub m_minus: Vec<C64>,
    pub m_zero: Vec<C64>,
    pub predicted: Vec<PointPrediction>,
    pub oracle: ClassifiedSpectrum,
    pub violations: Vec<Violation>,
    /// Oracle clusters that could not be classified; excluded from comparison.
    pub oracle_failures: usize,
    pub kron_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    pub predict: PredictOptions,
    pub oracle: ClassifyOptions,
    pub dim_cap: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            predict: PredictOptions::default(),
            oracle: ClassifyOptions { cluster_gap: 1e-4, ..ClassifyOptions::default() },
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

/// Predict types, classify `S` directly and record every disagreement.
pub fn oracle_classify_and_compare(f1: &FactorSpec, f2: &FactorSpec, opts: &CompareOptions) -> Result<PredictionReport> {
    let (s, j) = kron_sum_matrices(&f1.t, &f1.j, &f2.t, &f2.j, opts.dim_cap)?;
    let kron_defect = j_self_adjoint_defect(&s, &j)?;
    let predicted = predict_types(f1, f2, &opts.predict)?;
    let (oracle, failures) = classify_spectrum_partial(&s, &j, &opts.oracle)?;
    let s_scale = spectral_norm(&s).max(1.0);
    let match_tol = (opts.oracle.cluster_gap * s_scale).max(1e-6 * s_scale);

    let mut violations = Vec::new();
    let mut matched = vec![false; oracle.entries.len()];
    for pred in &predicted {
        let z = pred.point.lambda;
        let nearest = oracle
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| (k, (e.lambda - z).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match nearest {
            Some((k, d)) if d <= match_tol => {
                matched[k] = true;
                let t = oracle.entries[k].type_tag;
                if !pred.constraint.admits(t) {
                    violations.push(Violation {
                        lambda: z,
                        constraint: pred.constraint,
                        statement: pred.statement,
                        oracle: Some(t),
                        detail: format!("oracle type {t:?} contradicts {:?}", pred.constraint),
                    });
                }
            }
            _ => {
                if failures.iter().any(|(c, _)| (c - z).norm() <= match_tol) {
                    continue;
                }
                violations.push(Violation {
                    lambda: z,
                    constraint: pred.constraint,
                    statement: pred.statement,
                    oracle: None,
                    detail: "no eigenvalue of the Kronecker sum at this point".into(),
                });
            }
        }
    }
    for (k, e) in oracle.entries.iter().enumerate() {
        if !matched[k] {
            violations.push(Violation {
                lambda: e.lambda,
                constraint: Constraint::Unconstrained,
                statement: Statement::None,
                oracle: Some(e.type_tag),
                detail: "eigenvalue of the Kronecker sum is not a sum of factor eigenvalues".into(),
            });
        }
    }
    let pick = |f: fn(&SumPoint) -> bool| -> Vec<C64> {
        predicted.iter().filter(|p| f(&p.point)).map(|p| p.point.lambda).collect()
    };
    Ok(PredictionReport {
        m_plus: pick(SumPoint::in_m_plus),
        m_minus: pick(SumPoint::in_m_minus),
        m_zero: pick(SumPoint::in_m_zero),
        predicted,
        oracle,
        violations,
        oracle_failures: failures.len(),
        kron_defect,
    })
}

/// `Φ = Θ₁ ⊗ Θ₂` for uniformly positive factors.
pub fn build_phi(theta1: &CMatrix, theta2: &CMatrix) -> Result<CMatrix> {
    for (k, th) in [theta1, theta2].into_iter().enumerate() {
        let ev = hermitian_eigenvalues(th);
        let asym = spectral_norm(&(th - th.adjoint()));
        if ev.first().map_or(true, |&m| m <= 0.0) || asym > 1e-10 * spectral_norm(th).max(1.0) {
            return Err(Error::InvalidParameter(format!("Θ{} is not uniformly positive", k + 1)));
        }
    }
    Ok(theta1.kronecker(theta2))
}

/// Worst observed margins of the block bounds on sampled vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBoundReport {
    pub samples: usize,
    /// `min ((Jf,f)/‖f‖² − κ₁^μ κ₂^μ)` over `f ∈ H^{μμ}`; non-negative when the bound holds.
    pub diagonal_margin: f64,
    /// `min (−(Jf,f)/‖f‖² − κ₁^μ κ₂^ν)` over `f ∈ H^{μν}`, `μ ≠ ν`.
    pub off_diagonal_margin: f64,
    /// `max |(Φf, g)| / (‖f‖_Φ ‖g‖_Φ)` over `f`, `g` from different blocks.
    pub phi_cross: f64,
}

/// Sample vectors from the blocks `H^{μν} = H₁^μ ⊗ H₂^ν` and check the
/// J-bounds and the Φ-orthogonality of different blocks.
pub fn sample_block_bounds(f1: &FactorSpec, f2: &FactorSpec, samples: usize, seed: u64) -> Result<BlockBoundReport> {
    let (c1, c2) = match (&f1.certificate, &f2.certificate) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingCertificate("both factors need definiteness certificates".into())),
    };
    let phi = build_phi(&f1.theta()?.0, &f2.theta()?.0)?;
    let j = f1.j.tensor(&f2.j);
    let bases1 = [&f1.proj_plus, &f1.proj_minus];
    let bases2 = [&f2.proj_plus, &f2.proj_minus];
    let kap1 = [c1.kappa_plus, c1.kappa_minus];
    let kap2 = [c2.kappa_plus, c2.kappa_minus];
    let ranks1 = [f1.spectrum_plus.len(), f1.spectrum_minus.len()];
    let ranks2 = [f2.spectrum_plus.len(), f2.spectrum_minus.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        BlockBoundReport { samples, diagonal_margin: f64::INFINITY, off_diagonal_margin: f64::INFINITY, phi_cross: 0.0 };
    let n = f1.order() * f2.order();
    let random_vec = |rng: &mut ChaCha8Rng| {
        CMatrix::from_fn(n, 1, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    };
    let block_proj: Vec<((usize, usize), CMatrix)> = (0..2)
        .flat_map(|m| (0..2).map(move |v| (m, v)))
        .filter(|&(m, v)| ranks1[m] > 0 && ranks2[v] > 0)
        .map(|(m, v)| ((m, v), bases1[m].kronecker(bases2[v])))
        .collect();
    if block_proj.is_empty() {
        return Ok(report);
    }
    for _ in 0..samples {
        let k = rng.gen_range(0..block_proj.len());
        let ((mu, nu), p) = &block_proj[k];
        let f = p * random_vec(&mut rng);
        let nf = f.norm_squared();
        if nf == 0.0 {
            continue;
        }
        let jf = (f.adjoint() * j.matrix() * &f)[(0, 0)].re / nf;
        if mu == nu {
            report.diagonal_margin = report.diagonal_margin.min(jf - kap1[*mu] * kap2[*nu]);
        } else {
            report.off_diagonal_margin = report.off_diagonal_margin.min(-jf - kap1[*mu] * kap2[*nu]);
        }
        // a vector from another block, including the remainder blocks
        let other = loop {
            let m = rng.gen_range(0..3usize);
            let v = rng.gen_range(0..3usize);
            if (m, v) != (*mu, *nu) {
                break (m, v);
            }
        };
        let pick = |f: &FactorSpec, i: usize| match i {
            0 => f.proj_plus.clone(),
            1 => f.proj_minus.clone(),
            _ => f.proj_rest(),
        };
        let g = pick(f1, other.0).kronecker(&pick(f2, other.1)) * random_vec(&mut rng);
        let ng = (g.adjoint() * &phi * &g)[(0, 0)].re;
        if ng <= 1e-24 {
            continue;
        }
        let nf_phi = (f.adjoint() * &phi * &f)[(0, 0)].re;
        let cross = (g.adjoint() * &phi * &f)[(0, 0)].norm() / (nf_phi * ng).sqrt();
        report.phi_cross = report.phi_cross.max(cross);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Randomized structured instances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceKind {
    /// Only definite simple or semisimple eigenvalues.
    Definite,
    /// `J = I`, Hermitian factors.
    Hermitian,
    /// At least one J-self-adjoint Jordan block.
    Jordan,
    /// Engineered point in `M₊ ∩ M₋`.
    Overlap,
    /// Non-real pairs and mixed-sign semisimple eigenvalues.
    Mixed,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 5] =
        [InstanceKind::Definite, InstanceKind::Hermitian, InstanceKind::Jordan, InstanceKind::Overlap, InstanceKind::Mixed];
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Definite(f64, f64),
    Jordan(f64),
    Pair(C64),
    MixedSigns(f64),
}

impl Block {
    fn size(&self) -> usize {
        match self {
            Block::Definite(..) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Conjugation {
    None,
    Permutation,
    Unitary,
}

/// Grid value in `{−2, −1.75, …, 2}`; sums of grid values are exact.
fn grid(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-8i32..=8) as f64 * 0.25
}

fn random_complex(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// J-self-adjoint factor with the given block structure, hidden by a
/// J₀-unitary similarity and an optional change of basis.
fn assemble_factor(blocks: &[Block], conj: Conjugation, rng: &mut ChaCha8Rng) -> Result<(CMatrix, Involution)> {
    let n: usize = blocks.iter().map(Block::size).sum();
    let mut t0 = CMatrix::zeros(n, n);
    let mut j0 = CMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        match *b {
            Block::Definite(l, s) => {
                t0[(at, at)] = C64::new(l, 0.0);
                j0[(at, at)] = C64::new(s, 0.0);
            }
            Block::Jordan(l) => {
                t0[(at, at)] = C64::new(l, 0.0);
                t0[(at + 1, at + 1)] = C64::new(l, 0.0);
                t0[(at, at + 1)] = ONE;
                j0[(at, at + 1)] = ONE;
                j0[(at + 1, at)] = ONE;
            }
            Block::Pair(z) => {
                t0[(at, at)] = z;
                t0[(at + 1, at + 1)] = z.conj();
                j0[(at, at + 1)] = ONE;
                j0[(at + 1, at)] = ONE;
            }
            Block::MixedSigns(l) => {
                t0[(at, at)] = C64::new(l, 0.0);
                t0[(at + 1, at + 1)] = C64::new(l, 0.0);
                j0[(at, at)] = ONE;
                j0[(at + 1, at + 1)] = -ONE;
            }
        }
        at += b.size();
    }
    // Cayley transform of a J₀-skew-adjoint K = J₀ A, A skew-Hermitian
    let a = random_complex(n, n, rng) * C64::new(0.3 / (n as f64).sqrt(), 0.0);
    let a = (&a - a.adjoint()) * C64::new(0.5, 0.0);
    let k = &j0 * a;
    let eye = CMatrix::identity(n, n);
    let u = crate::linalg::dense::solve(&(&eye - &k), &(&eye + &k))?;
    let uinv = crate::linalg::dense::inverse(&u)?;
    let mut t = &u * t0 * uinv;
    let mut j = j0;
    let q = match conj {
        Conjugation::None => None,
        Conjugation::Permutation => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            Some(CMatrix::from_fn(n, n, |i, c| if perm[c] == i { ONE } else { ZERO }))
        }
        Conjugation::Unitary => Some(random_complex(n, n, rng).qr().q()),
    };
    if let Some(q) = q {
        t = &q * t * q.adjoint();
        j = &q * j * q.adjoint();
    }
    let j = (&j + j.adjoint()) * C64::new(0.5, 0.0);
    let j = validate_involution(&j, 1e-12)?;
    let t = (&t + j.matrix() * t.adjoint() * j.matrix()) * C64::new(0.5, 0.0);
    Ok((t, j))
}

fn random_definite(rng: &mut ChaCha8Rng, count: std::ops::RangeInclusive<usize>, fixed_sign: Option<f64>) -> Vec<Block> {
    let count = rng.gen_range(count);
    let mut out: Vec<Block> = Vec::new();
    while out.len() < count {
        let l = grid(rng);
        let s = fixed_sign.unwrap_or(if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        // repeated eigenvalues keep one sign so they stay definite
        if out.iter().any(|b| matches!(b, Block::Definite(m, t) if *m == l && *t != s)) {
            continue;
        }
        out.push(Block::Definite(l, s));
    }
    out
}

/// Two factors of the requested kind with product dimension at most `max_dim`.
pub fn generate_instance(
    kind: InstanceKind,
    max_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<((CMatrix, Involution), (CMatrix, Involution))> {
    let max_dim = max_dim.max(4);
    let (b1, b2): (Vec<Block>, Vec<Block>) = match kind {
        InstanceKind::Definite => (random_definite(rng, 1..=12, None), random_definite(rng, 1..=12, None)),
        InstanceKind::Hermitian => {
            (random_definite(rng, 1..=12, Some(1.0)), random_definite(rng, 1..=12, Some(1.0)))
        }
        InstanceKind::Jordan => {
            let mut b1 = random_definite(rng, 0..=8, None);
            b1.push(Block::Jordan(grid(rng)));
            let mut b2 = random_definite(rng, 1..=8, None);
            if rng.gen_bool(0.3) {
                b2.push(Block::Jordan(grid(rng)));
            }
            (b1, b2)
        }
        InstanceKind::Overlap => {
            // a₊ + b = a₋ + b′ with b, b′ of the same type
            let (ap, am) = loop {
                let (x, y) = (grid(rng), grid(rng));
                if x != y {
                    break (x, y);
                }
            };
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let b = grid(rng);
            let b_alt = ap + b - am;
            let mut b1 = vec![Block::Definite(ap, 1.0), Block::Definite(am, -1.0)];
            let mut b2 = vec![Block::Definite(b, s), Block::Definite(b_alt, s)];
            let extra1 = random_definite(rng, 0..=7, None);
            let extra2 = random_definite(rng, 0..=7, None);
            let clash = |set: &[Block], e: &Block| {
                matches!(e, Block::Definite(l, t) if set.iter().any(|b| matches!(b, Block::Definite(m, u) if m == l && u != t)))
            };
            for e in extra1 {
                if !clash(&b1, &e) {
                    b1.push(e);
                }
            }
            for e in extra2 {
                if !clash(&b2, &e) {
                    b2.push(e);
                }
            }
            (b1, b2)
        }
        InstanceKind::Mixed => {
            let mut b1 = random_definite(rng, 0..=8, None);
            b1.push(Block::Pair(C64::new(grid(rng), 0.25 * rng.gen_range(1..=4) as f64)));
            let mut b2 = random_definite(rng, 1..=8, None);
            b2.push(Block::MixedSigns(grid(rng)));
            (b1, b2)
        }
    };
    let size = |b: &[Block]| b.iter().map(Block::size).sum::<usize>();
    let (mut b1, mut b2) = (b1, b2);
    while size(&b1) * size(&b2) > max_dim {
        // drop trailing definite blocks from the larger factor
        let big = if size(&b1) >= size(&b2) { &mut b1 } else { &mut b2 };
        match big.iter().position(|b| matches!(b, Block::Definite(..))) {
            Some(i) if big.len() > 1 => {
                big.remove(i);
            }
            _ => return Err(Error::DimensionCap(format!("cannot fit instance into product dimension {max_dim}"))),
        }
    }
    let conj = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => Conjugation::None,
        1 => Conjugation::Permutation,
        _ => Conjugation::Unitary,
    };
    let c1 = if kind == InstanceKind::Hermitian { Conjugation::Unitary } else { conj(rng) };
    let c2 = if kind == InstanceKind::Hermitian { Conjugation::Unitary } else { conj(rng) };
    Ok((assemble_factor(&b1, c1, rng)?, assemble_factor(&b2, c2, rng)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_product_dim: usize,
    pub factor: FactorOptions,
    pub compare: CompareOptions,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let mut factor = FactorOptions::default();
        factor.classify.cluster_gap = 1e-4;
        Self { instances: 200, seed: 20_240_601, max_product_dim: 144, factor, compare: CompareOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: usize,
    pub kind: InstanceKind,
    pub dims: (usize, usize),
    pub has_jordan: bool,
    pub has_overlap: bool,
    pub points: usize,
    pub must_be_plus: usize,
    pub must_be_minus: usize,
    pub must_be_not_definite: usize,
    pub violations: Vec<Violation>,
    pub oracle_failures: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub config: CampaignConfig,
    pub instances: Vec<InstanceReport>,
    pub total_violations: usize,
    pub jordan_instances: usize,
    pub overlap_instances: usize,
    pub oracle_failures: usize,
    pub failed_instances: usize,
}

fn run_instance(index: usize, cfg: &CampaignConfig) -> InstanceReport {
    let kind = InstanceKind::ALL[index % InstanceKind::ALL.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut report = InstanceReport {
        index,
        kind,
        dims: (0, 0),
        has_jordan: false,
        has_overlap: false,
        points: 0,
        must_be_plus: 0,
        must_be_minus: 0,
        must_be_not_definite: 0,
        violations: Vec::new(),
        oracle_failures: 0,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let ((t1, j1), (t2, j2)) = generate_instance(kind, cfg.max_product_dim, &mut rng)?;
        report.dims = (t1.nrows(), t2.nrows());
        let f1 = FactorSpec::new(&t1, &j1, &cfg.factor)?;
        let f2 = FactorSpec::new(&t2, &j2, &cfg.factor)?;
        report.has_jordan = f1.has_jordan() || f2.has_jordan();
        let r = oracle_classify_and_compare(&f1, &f2, &cfg.compare)?;
        report.has_overlap = r.predicted.iter().any(|p| p.point.in_m_plus() && p.point.in_m_minus());
        report.points = r.predicted.len();
        for p in &r.predicted {
            match p.constraint {
                Constraint::MustBePlus => report.must_be_plus += 1,
                Constraint::MustBeMinus => report.must_be_minus += 1,
                Constraint::MustBeNotDefinite => report.must_be_not_definite += 1,
                _ => {}
            }
        }
        report.violations = r.violations;
        report.oracle_failures = r.oracle_failures;
        Ok(())
    })();
    if let Err(e) = outcome {
        report.error = Some(e.to_string());
    }
    report
}

/// Run the randomized prediction-vs-oracle campaign (instances in parallel).
pub fn run_campaign(cfg: &CampaignConfig) -> CampaignReport {
    let instances: Vec<InstanceReport> = (0..cfg.instances).into_par_iter().map(|i| run_instance(i, cfg)).collect();
    CampaignReport {
        schema_version: 1,
        config: cfg.clone(),
        total_violations: instances.iter().map(|r| r.violations.len()).sum(),
        jordan_instances: instances.iter().filter(|r| r.has_jordan).count(),
        overlap_instances: instances.iter().filter(|r| r.has_overlap).count(),
        oracle_failures: instances.iter().map(|r| r.oracle_failures).sum(),
        failed_instances: instances.iter().filter(|r| r.error.is_some()).count(),
        instances,
    }
}

/// The interval `[c, ∞)`, a convenience for longitudinal spectra.
pub fn half_line(c: f64) -> RealLineSet {
    RealLineSet::from_interval(Interval::at_least(c).expect("finite threshold"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{eigenvalues, from_real_rows, real_diag};
    use proptest::prelude::*;
    use rand::Rng;

    fn factor(t: CMatrix, j: Involution) -> FactorSpec {
        FactorSpec::new(&t, &j, &FactorOptions::default()).unwrap()
    }

    fn entry(l: f64, t: TypeTag) -> SpectralEntry {
        SpectralEntry { lambda: C64::new(l, 0.0), alg_mult: 1, geo_mult: 1, type_tag: t, gram_eigs: vec![1.0] }
    }

    #[test]
    fn kron_sum_examples() {
        let f1 = factor(real_diag(&[2.0]), Involution::identity(1));
        let f2 = factor(real_diag(&[3.0]), Involution::identity(1));
        let (s, _) = kron_sum(&f1, &f2).unwrap();
        assert_eq!(s[(0, 0)], C64::new(5.0, 0.0));

        let f1 = factor(real_diag(&[0.0, 1.0]), Involution::identity(2));
        let f2 = factor(real_diag(&[0.0, 10.0]), Involution::identity(2));
        let (s, _) = kron_sum(&f1, &f2).unwrap();
        let mut ev: Vec<f64> = eigenvalues(&s).iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ev, vec![0.0, 1.0, 10.0, 11.0]);

        let big = CMatrix::identity(65, 65);
        let j = Involution::identity(65);
        assert!(matches!(kron_sum_matrices(&big, &j, &big, &j, 4096), Err(Error::DimensionCap(_))));
    }

    #[test]
    fn random_sum_spectrum_is_pairwise_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t1 = random_complex(4, 4, &mut rng);
        let t2 = random_complex(3, 3, &mut rng);
        let (s, _) =
            kron_sum_matrices(&t1, &Involution::identity(4), &t2, &Involution::identity(3), DEFAULT_DIM_CAP).unwrap();
        let mut expected: Vec<C64> = Vec::new();
        for a in eigenvalues(&t1) {
            for b in eigenvalues(&t2) {
                expected.push(a + b);
            }
        }
        for z in eigenvalues(&s) {
            let d = expected.iter().map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8, "{z}: {d:e}");
        }
    }

    #[test]
    fn m_sets_from_points() {
        let c1 = ClassifiedSpectrum { entries: vec![entry(0.0, TypeTag::PositiveType)] };
        let c2 =
            ClassifiedSpectrum { entries: vec![entry(1.0, TypeTag::PositiveType), entry(4.0, TypeTag::NegativeType)] };
        let MSets::Points(pts) = predict_m_sets(&FactorSpectrum::Points(c1), &c2, 1e-7).unwrap() else { panic!() };
        assert_eq!(pts.len(), 2);
        assert!(pts[0].in_m_plus() && !pts[0].in_m_minus() && pts[0].lambda.re == 1.0);
        assert!(pts[1].in_m_minus() && !pts[1].in_m_plus() && pts[1].lambda.re == 4.0);
        assert!(pts.iter().all(|p| !p.in_m_zero()));
    }

    #[test]
    fn m_sets_symbolic_waveguide() {
        // transversal types at a = π/2, α₀ = 0.5: 0.25 (++), 1 (−−), 4 (++), ...
        let c2 = ClassifiedSpectrum {
            entries: vec![
                entry(0.25, TypeTag::PositiveType),
                entry(1.0, TypeTag::NegativeType),
                entry(4.0, TypeTag::PositiveType),
                entry(9.0, TypeTag::NegativeType),
            ],
        };
        let MSets::RealLine { m_plus, m_minus, m_zero } =
            predict_m_sets(&FactorSpectrum::RealLine(half_line(0.0)), &c2, 1e-9).unwrap()
        else {
            panic!()
        };
        assert_eq!(m_plus, half_line(0.25));
        assert_eq!(m_minus, half_line(1.0));
        assert!(m_zero.is_empty());
    }

    #[test]
    fn indefinite_point_lands_in_m_zero() {
        let c2 = ClassifiedSpectrum {
            entries: vec![entry(3.0, TypeTag::NotDefinite), entry(-10.0, TypeTag::PositiveType)],
        };
        let MSets::RealLine { m_zero, .. } =
            predict_m_sets(&FactorSpectrum::RealLine(RealLineSet::from_points(&[0.0, 1.0]).unwrap()), &c2, 1e-9).unwrap()
        else {
            panic!()
        };
        assert_eq!(m_zero, RealLineSet::from_points(&[3.0, 4.0]).unwrap());
        let untyped = ClassifiedSpectrum {
            entries: vec![SpectralEntry { gram_eigs: vec![], ..entry(1.0, TypeTag::NotDefinite) }],
        };
        assert!(matches!(
            predict_m_sets(&FactorSpectrum::RealLine(half_line(0.0)), &untyped, 1e-9),
            Err(Error::Untyped(_))
        ));
    }

    #[test]
    fn fully_decomposed_diagonal_factors() {
        let f1 = factor(real_diag(&[0.0, 1.0]), Involution::signs(&[1.0, -1.0]).unwrap());
        let f2 = factor(real_diag(&[10.0, 20.0]), Involution::signs(&[-1.0, 1.0]).unwrap());
        let r = oracle_classify_and_compare(&f1, &f2, &CompareOptions::default()).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r
            .predicted
            .iter()
            .all(|p| matches!(p.constraint, Constraint::MustBePlus | Constraint::MustBeMinus)));
        // 0 + 10: (+)(−) → minus; 1 + 10: (−)(−) → plus
        let at = |x: f64| r.predicted.iter().find(|p| (p.point.lambda.re - x).abs() < 1e-9).unwrap().constraint;
        assert_eq!(at(10.0), Constraint::MustBeMinus);
        assert_eq!(at(11.0), Constraint::MustBePlus);
    }

    #[test]
    fn jordan_factor_gives_not_definite() {
        let t1 = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let j1 = validate_involution(&from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]), 0.0).unwrap();
        let c = 2.5;
        let f1 = factor(t1, j1);
        let f2 = factor(real_diag(&[c]), Involution::identity(1));
        let r = oracle_classify_and_compare(&f1, &f2, &CompareOptions::default()).unwrap();
        assert_eq!(r.predicted.len(), 1);
        assert_eq!(r.predicted[0].constraint, Constraint::MustBeNotDefinite);
        assert!((r.predicted[0].point.lambda.re - (1.0 + c)).abs() < 1e-12);
        let oracle = r.oracle.nearest(C64::new(1.0 + c, 0.0)).unwrap();
        assert_eq!(oracle.type_tag, TypeTag::NotDefinite);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn overlap_forces_not_definite() {
        // 0(+) + 2(+) = 1(−) + 1(+) = 2 lies in M₊ ∩ M₋
        let f1 = factor(real_diag(&[0.0, 1.0]), Involution::signs(&[1.0, -1.0]).unwrap());
        let f2 = factor(real_diag(&[2.0, 1.0]), Involution::identity(2));
        let r = oracle_classify_and_compare(&f1, &f2, &CompareOptions::default()).unwrap();
        let p = r.predicted.iter().find(|p| (p.point.lambda.re - 2.0).abs() < 1e-9).unwrap();
        assert!(p.point.in_m_plus() && p.point.in_m_minus());
        assert_eq!(p.constraint, Constraint::MustBeNotDefinite);
        assert_eq!(r.oracle.nearest(C64::new(2.0, 0.0)).unwrap().type_tag, TypeTag::NotDefinite);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn missing_certificate_is_reported() {
        let mut f1 = factor(real_diag(&[0.0]), Involution::identity(1));
        let f2 = f1.clone();
        f1.certificate = None;
        assert!(matches!(predict_types(&f1, &f2, &PredictOptions::default()), Err(Error::MissingCertificate(_))));
        let lax = PredictOptions { use_item_iii: false, ..PredictOptions::default() };
        let p = predict_types(&f1, &f2, &lax).unwrap();
        assert_eq!(p[0].constraint, Constraint::NotMinus);
    }

    #[test]
    fn phi_examples() {
        let phi = build_phi(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3)).unwrap();
        assert_eq!(phi, CMatrix::identity(6, 6));
        let th = from_real_rows(2, 2, &[1.0, 1.0, 1.0, 3.0]);
        let phi = build_phi(&th, &th).unwrap();
        let m = hermitian_eigenvalues(&phi)[0];
        assert!((m - (2.0 - 2f64.sqrt()).powi(2)).abs() < 1e-10);
        assert!(build_phi(&real_diag(&[1.0, -1.0]), &th).is_err());
    }

    #[test]
    fn sampled_block_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let ((t1, j1), (t2, j2)) = generate_instance(InstanceKind::Definite, 144, &mut rng).unwrap();
            let f1 = factor(t1, j1);
            let f2 = factor(t2, j2);
            let r = sample_block_bounds(&f1, &f2, 200, 9).unwrap();
            assert!(r.diagonal_margin >= -1e-10, "{r:?}");
            assert!(r.off_diagonal_margin >= -1e-10, "{r:?}");
            assert!(r.phi_cross <= 1e-8, "{r:?}");
        }
    }

    #[test]
    fn generated_factors_are_j_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in InstanceKind::ALL {
            for _ in 0..4 {
                let ((t1, j1), (t2, j2)) = generate_instance(kind, 144, &mut rng).unwrap();
                assert!(t1.nrows() * t2.nrows() <= 144);
                for (t, j) in [(&t1, &j1), (&t2, &j2)] {
                    assert!(j_self_adjoint_defect(t, j).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn small_campaign_has_no_violations() {
        let cfg = CampaignConfig { instances: 25, ..CampaignConfig::default() };
        let rep = run_campaign(&cfg);
        assert_eq!(rep.failed_instances, 0, "{:?}", rep.instances.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>());
        assert_eq!(rep.total_violations, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hermitian_pairs_are_all_positive(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ((t1, j1), (t2, j2)) = generate_instance(InstanceKind::Hermitian, 36, &mut rng).unwrap();
            let f1 = factor(t1, j1);
            let f2 = factor(t2, j2);
            let r = oracle_classify_and_compare(&f1, &f2, &CompareOptions::default()).unwrap();
            prop_assert!(r.oracle.entries.iter().all(|e| e.type_tag == TypeTag::PositiveType));
            prop_assert!(r.violations.is_empty());
        }

        #[test]
        fn tensor_involution_is_valid(n1 in 1usize..5, n2 in 1usize..5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s1: Vec<f64> = (0..n1).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let j1 = Involution::signs(&s1).unwrap();
            let j2 = Involution::flip(n2);
            let j = j1.tensor(&j2);
            prop_assert!(validate_involution(j.matrix(), 1e-14).is_ok());
        }
    }
}
