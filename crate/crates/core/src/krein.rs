//! Finite-dimensional Krein-space linear algebra: involutions, J-self-adjointness,
//! spectral type classification on root subspaces, Riesz projections, the Θ
//! operator of a resolution of the identity, and definiteness constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{
    hermitian_eigenvalues, orthonormal_range, pencil_min_eigenvalue, rank, schur, smallest_singular_value,
    spectral_norm, CMatrix, C64, ONE, ZERO,
};

/// A symmetric involution `J = J* = J⁻¹` defining `[f, g] = (J f, g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Involution {
    matrix: CMatrix,
    tol: f64,
}

impl Involution {
    pub fn identity(n: usize) -> Self {
        Self { matrix: CMatrix::identity(n, n), tol: 0.0 }
    }

    /// Diagonal involution with entries `±1`.
    pub fn signs(signs: &[f64]) -> Result<Self> {
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::NotAnInvolution("diagonal entries must be ±1".into()));
        }
        let n = signs.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(signs[i], 0.0) } else { ZERO });
        Ok(Self { matrix, tol: 0.0 })
    }

    /// The reversal permutation `e_i ↦ e_{n-1-i}`, the parity of a symmetric grid.
    pub fn flip(n: usize) -> Self {
        let matrix = CMatrix::from_fn(n, n, |i, j| if i + j + 1 == n { ONE } else { ZERO });
        Self { matrix, tol: 0.0 }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Indefinite inner product `[f, g] = (J f, g) = g* J f`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        let n = self.order();
        let mut s = ZERO;
        for i in 0..n {
            let mut jf = ZERO;
            for k in 0..n {
                jf += self.matrix[(i, k)] * f[k];
            }
            s += g[i].conj() * jf;
        }
        s
    }

    /// `J₁ ⊗ J₂`.
    pub fn tensor(&self, other: &Self) -> Self {
        Self { matrix: self.matrix.kronecker(&other.matrix), tol: self.tol.max(other.tol) }
    }
}

/// Validate that `j` is a symmetric involution within `tol` (spectral norm).
pub fn validate_involution(j: &CMatrix, tol: f64) -> Result<Involution> {
    if !j.is_square() {
        return Err(Error::DimensionMismatch(format!("involution must be square, got {}×{}", j.nrows(), j.ncols())));
    }
    let n = j.nrows();
    let sym = spectral_norm(&(j - j.adjoint()));
    if sym > tol {
        return Err(Error::NotAnInvolution(format!("‖J − J*‖ = {sym:.3e} exceeds {tol:.1e}")));
    }
    let inv = spectral_norm(&(j * j - CMatrix::identity(n, n)));
    if inv > tol {
        return Err(Error::NotAnInvolution(format!("‖J² − I‖ = {inv:.3e} exceeds {tol:.1e}")));
    }
    Ok(Involution { matrix: j.clone(), tol })
}

/// `‖T − J T* J‖` in the spectral norm.
pub fn j_self_adjoint_defect(t: &CMatrix, j: &Involution) -> Result<f64> {
    check_dims(t, j)?;
    let jm = j.matrix();
    Ok(spectral_norm(&(t - jm * t.adjoint() * jm)))
}

fn check_dims(t: &CMatrix, j: &Involution) -> Result<()> {
    if !t.is_square() || t.nrows() != j.order() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}×{}, involution has order {}",
            t.nrows(),
            t.ncols(),
            j.order()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeTag {
    PositiveType,
    NegativeType,
    NotDefinite,
}

impl TypeTag {
    pub fn from_gram(eigs: &[f64], tol: f64) -> Self {
        if !eigs.is_empty() && eigs.iter().all(|&e| e > tol) {
            TypeTag::PositiveType
        } else if !eigs.is_empty() && eigs.iter().all(|&e| e < -tol) {
            TypeTag::NegativeType
        } else {
            TypeTag::NotDefinite
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            TypeTag::PositiveType => "++",
            TypeTag::NegativeType => "--",
            TypeTag::NotDefinite => "00",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub lambda: C64,
    pub alg_mult: usize,
    pub geo_mult: usize,
    #[serde(rename = "type")]
    pub type_tag: TypeTag,
    pub gram_eigs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedSpectrum {
    pub entries: Vec<SpectralEntry>,
}

impl ClassifiedSpectrum {
    /// Entry whose eigenvalue is closest to `z`.
    pub fn nearest(&self, z: C64) -> Option<&SpectralEntry> {
        self.entries
            .iter()
            .min_by(|a, b| (a.lambda - z).norm().partial_cmp(&(b.lambda - z).norm()).unwrap())
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.alg_mult).sum()
    }
}

/// Numerical parameters of the classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    /// Eigenvalues closer than `cluster_gap · max(1, ‖T‖)` are classified jointly.
    pub cluster_gap: f64,
    /// Gram eigenvalues within `±sign_tol` force `NotDefinite`.
    pub sign_tol: f64,
    /// Initial number of trapezoidal nodes on each contour.
    pub nodes: usize,
    pub max_nodes: usize,
    /// Minimal ratio between contour margin and cluster radius.
    pub min_separation: f64,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { cluster_gap: 1e-6, sign_tol: 1e-8, nodes: 64, max_nodes: 4096, min_separation: 1e-10, seed: 17 }
    }
}

/// Group the indices of `vals` into clusters by single linkage at distance `gap`.
pub fn cluster_eigenvalues(vals: &[C64], gap: f64) -> Vec<Vec<usize>> {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for k in (i + 1)..n {
            if (vals[i] - vals[k]).norm() <= gap {
                let (a, b) = (find(&mut parent, i), find(&mut parent, k));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Schur data shared by all clusters of one matrix.
struct SchurData<'a> {
    q: CMatrix,
    r: CMatrix,
    vals: Vec<C64>,
    j: &'a Involution,
    t_norm: f64,
}

impl<'a> SchurData<'a> {
    fn new(t: &CMatrix, j: &'a Involution) -> Self {
        let (q, r) = schur(t);
        let vals = (0..r.nrows()).map(|i| r[(i, i)]).collect();
        Self { q, r, vals, j, t_norm: spectral_norm(t) }
    }

    /// Center and contour radius for a cluster, or `ClusterIsolation`.
    fn contour(&self, cluster: &[usize], opts: &ClassifyOptions) -> Result<(C64, f64)> {
        let center = cluster.iter().map(|&i| self.vals[i]).sum::<C64>() / cluster.len() as f64;
        let inner = cluster.iter().map(|&i| (self.vals[i] - center).norm()).fold(0.0, f64::max);
        let outer = (0..self.vals.len())
            .filter(|i| !cluster.contains(i))
            .map(|i| (self.vals[i] - center).norm())
            .fold(f64::INFINITY, f64::min);
        let scale = self.t_norm.max(1.0);
        if outer.is_infinite() {
            return Ok((center, inner + 0.5 * scale));
        }
        if outer - inner <= opts.min_separation * scale || outer <= 3.0 * inner {
            return Err(Error::ClusterIsolation(format!(
                "cluster at {center} (radius {inner:.3e}) is not isolated: nearest other eigenvalue at distance {outer:.3e}"
            )));
        }
        Ok((center, 0.5 * (inner + outer)))
    }

    /// Trace of the quadrature projection from the Schur diagonal.
    fn quadrature_trace(&self, center: C64, radius: f64, nodes: usize) -> C64 {
        let mut tr = ZERO;
        for k in 0..nodes {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
            let z = center + w * radius;
            for lam in &self.vals {
                tr += w * radius / (z - lam);
            }
        }
        tr / nodes as f64
    }

    fn nodes_for(&self, center: C64, radius: f64, m: usize, opts: &ClassifyOptions) -> Result<usize> {
        let mut nodes = opts.nodes.max(16);
        loop {
            let err = (self.quadrature_trace(center, radius, nodes) - C64::new(m as f64, 0.0)).norm();
            if err < 1e-10 * m.max(1) as f64 {
                return Ok(nodes);
            }
            if nodes * 2 > opts.max_nodes {
                if err < 1e-6 {
                    return Ok(nodes);
                }
                return Err(Error::UnderResolved(format!(
                    "contour trace misses {m} by {err:.3e} at {nodes} nodes"
                )));
            }
            nodes *= 2;
        }
    }

    /// Orthonormal basis of the root subspace (original coordinates) of a cluster.
    fn root_basis(&self, cluster: &[usize], center: C64, radius: f64, opts: &ClassifyOptions) -> Result<CMatrix> {
        let n = self.r.nrows();
        let m = cluster.len();
        let nodes = self.nodes_for(center, radius, m, opts)?;
        let cols = (m + 4).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let y = CMatrix::from_fn(n, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut acc = CMatrix::zeros(n, cols);
        for k in 0..nodes {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
            let z = center + w * radius;
            let shifted = CMatrix::from_fn(n, n, |i, j| if i == j { z - self.r[(i, j)] } else { -self.r[(i, j)] });
            let x = shifted
                .solve_upper_triangular(&y)
                .ok_or_else(|| Error::EigenvalueOnContour(format!("singular resolvent at z = {z}")))?;
            acc += x * (w * radius);
        }
        acc /= C64::new(nodes as f64, 0.0);
        let (b, ratio) = orthonormal_range(&acc, m);
        if ratio < 1e-10 {
            return Err(Error::UnderResolved(format!(
                "projected block has numerical rank below {m} (ratio {ratio:.2e})"
            )));
        }
        Ok(&self.q * b)
    }

    fn classify_cluster(&self, t: &CMatrix, cluster: &[usize], opts: &ClassifyOptions) -> Result<SpectralEntry> {
        let (center, radius) = self.contour(cluster, opts)?;
        let b = self.root_basis(cluster, center, radius, opts)?;
        let m = cluster.len();
        let gram = b.adjoint() * self.j.matrix() * &b;
        let gram_eigs = hermitian_eigenvalues(&gram);
        let type_tag = TypeTag::from_gram(&gram_eigs, opts.sign_tol);
        let compressed = b.adjoint() * t * &b - CMatrix::identity(m, m) * center;
        let rank_tol = opts.cluster_gap * self.t_norm.max(1.0);
        let geo_mult = (m - rank(&compressed, rank_tol)).max(1);
        Ok(SpectralEntry { lambda: center, alg_mult: m, geo_mult, type_tag, gram_eigs })
    }
}

/// Classify the eigenvalue (cluster) of `t` at `lambda`.
///
/// `tol` bounds both the eigenvalue check `σ_min(T − λI) ≤ tol·max(1, ‖T‖)`
/// and the Gram sign threshold.
pub fn classify_point(t: &CMatrix, j: &Involution, lambda: C64, tol: f64) -> Result<SpectralEntry> {
    classify_point_with(t, j, lambda, tol, &ClassifyOptions { sign_tol: tol, ..ClassifyOptions::default() })
}

pub fn classify_point_with(
    t: &CMatrix,
    j: &Involution,
    lambda: C64,
    tol: f64,
    opts: &ClassifyOptions,
) -> Result<SpectralEntry> {
    check_dims(t, j)?;
    let n = t.nrows();
    let data = SchurData::new(t, j);
    let smin = smallest_singular_value(&(t - CMatrix::identity(n, n) * lambda));
    if smin > tol * data.t_norm.max(1.0) {
        return Err(Error::NotAnEigenvalue(format!("{lambda}"), smin));
    }
    let nearest = (0..n)
        .min_by(|&a, &b| (data.vals[a] - lambda).norm().partial_cmp(&(data.vals[b] - lambda).norm()).unwrap())
        .expect("non-empty matrix");
    let clusters = cluster_eigenvalues(&data.vals, opts.cluster_gap * data.t_norm.max(1.0));
    let cluster = clusters.into_iter().find(|c| c.contains(&nearest)).expect("every index is clustered");
    data.classify_cluster(t, &cluster, opts)
}

/// Classify the clusters nearest each of `points`, sharing one Schur
/// factorization. A point farther than `tol·max(1, ‖T‖)` from every
/// eigenvalue is rejected with `NotAnEigenvalue`.
pub fn classify_points(
    t: &CMatrix,
    j: &Involution,
    points: &[C64],
    tol: f64,
    opts: &ClassifyOptions,
) -> Result<Vec<SpectralEntry>> {
    check_dims(t, j)?;
    if t.nrows() == 0 {
        return Err(Error::DimensionMismatch("empty operator".into()));
    }
    let data = SchurData::new(t, j);
    let clusters = cluster_eigenvalues(&data.vals, opts.cluster_gap * data.t_norm.max(1.0));
    points
        .par_iter()
        .map(|&p| {
            let (nearest, dist) = data
                .vals
                .iter()
                .enumerate()
                .map(|(i, v)| (i, (v - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty matrix");
            if dist > tol * data.t_norm.max(1.0) {
                return Err(Error::NotAnEigenvalue(format!("{p}"), dist));
            }
            let cluster = clusters.iter().find(|c| c.contains(&nearest)).expect("every index is clustered");
            data.classify_cluster(t, cluster, opts)
        })
        .collect()
}

/// Classify every eigenvalue cluster of `t`.
pub fn classify_spectrum(t: &CMatrix, j: &Involution, opts: &ClassifyOptions) -> Result<ClassifiedSpectrum> {
    check_dims(t, j)?;
    if t.nrows() == 0 {
        return Ok(ClassifiedSpectrum::default());
    }
    let data = SchurData::new(t, j);
    let clusters = cluster_eigenvalues(&data.vals, opts.cluster_gap * data.t_norm.max(1.0));
    let mut entries = clusters
        .par_iter()
        .map(|c| data.classify_cluster(t, c, opts))
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im).partial_cmp(&(b.lambda.re, b.lambda.im)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(ClassifiedSpectrum { entries })
}

/// Classify every cluster, collecting per-cluster failures instead of aborting.
/// Failures are reported with the cluster center.
pub fn classify_spectrum_partial(
    t: &CMatrix,
    j: &Involution,
    opts: &ClassifyOptions,
) -> Result<(ClassifiedSpectrum, Vec<(C64, Error)>)> {
    check_dims(t, j)?;
    if t.nrows() == 0 {
        return Ok((ClassifiedSpectrum::default(), Vec::new()));
    }
    let data = SchurData::new(t, j);
    let clusters = cluster_eigenvalues(&data.vals, opts.cluster_gap * data.t_norm.max(1.0));
    let results: Vec<(C64, Result<SpectralEntry>)> = clusters
        .par_iter()
        .map(|c| {
            let center = c.iter().map(|&i| data.vals[i]).sum::<C64>() / c.len() as f64;
            (center, data.classify_cluster(t, c, opts))
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (center, r) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => failures.push((center, e)),
        }
    }
    entries.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im).partial_cmp(&(b.lambda.re, b.lambda.im)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok((ClassifiedSpectrum { entries }, failures))
}

/// Riesz projection onto the spectrum inside the circle `|z − center| = radius`,
/// by the trapezoidal rule with `nodes` points.
pub fn riesz_projection(t: &CMatrix, center: C64, radius: f64, nodes: usize) -> Result<CMatrix> {
    if !t.is_square() {
        return Err(Error::DimensionMismatch("operator must be square".into()));
    }
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!("at least 16 quadrature nodes required, got {nodes}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let n = t.nrows();
    let (q, r) = schur(t);
    let mut inside = 0usize;
    for i in 0..n {
        let d = (r[(i, i)] - center).norm();
        if (d - radius).abs() <= radius / 100.0 {
            return Err(Error::EigenvalueOnContour(format!(
                "eigenvalue {} lies within {:.3e} of the contour",
                r[(i, i)],
                (d - radius).abs()
            )));
        }
        if d < radius {
            inside += 1;
        }
    }
    let mut acc = CMatrix::zeros(n, n);
    let eye = CMatrix::identity(n, n);
    for k in 0..nodes {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
        let z = center + w * radius;
        let shifted = &eye * z - &r;
        let x = shifted
            .solve_upper_triangular(&eye)
            .ok_or_else(|| Error::EigenvalueOnContour(format!("singular resolvent at z = {z}")))?;
        acc += x * (w * radius);
    }
    acc /= C64::new(nodes as f64, 0.0);
    let p = &q * acc * q.adjoint();
    let tr = p.trace();
    let nearest_int = tr.re.round();
    if (tr - C64::new(nearest_int, 0.0)).norm() > 1e-6 || nearest_int as usize != inside {
        return Err(Error::UnderResolved(format!(
            "trace {tr} of the quadrature projection is not the enclosed count {inside}"
        )));
    }
    Ok(p)
}

/// Riesz projection with node doubling until `‖P² − P‖` stops decreasing.
/// Returns the projection, the node count used and the idempotency defect.
pub fn riesz_projection_adaptive(
    t: &CMatrix,
    center: C64,
    radius: f64,
    nodes: usize,
    max_nodes: usize,
) -> Result<(CMatrix, usize, f64)> {
    let defect = |p: &CMatrix| spectral_norm(&(p * p - p));
    let mut nodes = nodes.max(16);
    let mut best: Option<(CMatrix, usize, f64)> = None;
    loop {
        match riesz_projection(t, center, radius, nodes) {
            Ok(p) => {
                let d = defect(&p);
                if let Some((_, _, prev)) = &best {
                    if d >= 0.5 * prev {
                        break;
                    }
                }
                best = Some((p, nodes, d));
            }
            Err(Error::UnderResolved(_)) if nodes * 2 <= max_nodes => {}
            Err(e) => return Err(e),
        }
        if nodes * 2 > max_nodes {
            break;
        }
        nodes *= 2;
    }
    best.ok_or_else(|| Error::UnderResolved(format!("no converged projection up to {max_nodes} nodes")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCertificate {
    pub min_eig: f64,
    /// `max_j ‖Θ P_j − P_j* Θ‖`.
    pub commutation_residual: f64,
    /// The guaranteed lower bound `1/n`.
    pub lower_bound: f64,
}

/// `Θ = Σ P_k* P_k` for a resolution of the identity into mutually annihilating projections.
pub fn theta_operator(projections: &[CMatrix]) -> Result<(CMatrix, ThetaCertificate)> {
    let Some(first) = projections.first() else {
        return Err(Error::InvalidProjections("empty projection family".into()));
    };
    let n = first.nrows();
    if projections.iter().any(|p| p.nrows() != n || p.ncols() != n) {
        return Err(Error::DimensionMismatch("projections must be square of equal order".into()));
    }
    let scale = projections.iter().map(spectral_norm).fold(1.0, f64::max).powi(2);
    let tol = 1e-8 * scale;
    let eye = CMatrix::identity(n, n);
    let sum: CMatrix = projections.iter().fold(CMatrix::zeros(n, n), |acc, p| acc + p);
    let complete = spectral_norm(&(sum - &eye));
    if complete > tol {
        return Err(Error::InvalidProjections(format!("‖Σ P_k − I‖ = {complete:.3e}")));
    }
    for (i, pi) in projections.iter().enumerate() {
        for (k, pk) in projections.iter().enumerate() {
            let target = if i == k { pi.clone() } else { CMatrix::zeros(n, n) };
            let d = spectral_norm(&(pi * pk - target));
            if d > tol {
                return Err(Error::InvalidProjections(format!("‖P_{i} P_{k} − δ P_{i}‖ = {d:.3e}")));
            }
        }
    }
    let theta: CMatrix = projections.iter().fold(CMatrix::zeros(n, n), |acc, p| acc + p.adjoint() * p);
    let min_eig = hermitian_eigenvalues(&theta)[0];
    let commutation_residual = projections
        .iter()
        .map(|p| spectral_norm(&(&theta * p - p.adjoint() * &theta)))
        .fold(0.0, f64::max);
    let cert = ThetaCertificate { min_eig, commutation_residual, lower_bound: 1.0 / projections.len() as f64 };
    Ok((theta, cert))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessCertificate {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub kappa_cross: f64,
    pub cross_condition_met: bool,
}

/// Threshold below which `κ±` is treated as zero.
const KAPPA_FLOOR: f64 = 1e-12;

/// Uniform definiteness constants of `span(basis_plus)` and `span(basis_minus)`.
///
/// An empty basis spans `{0}`, on which every positive constant works; its
/// constant is reported as `1`.
pub fn definiteness_constants(
    j: &Involution,
    basis_plus: &CMatrix,
    basis_minus: &CMatrix,
) -> Result<DefinitenessCertificate> {
    let n = j.order();
    if basis_plus.nrows() != n || basis_minus.nrows() != n {
        return Err(Error::DimensionMismatch(format!("bases must have {n} rows")));
    }
    let jm = j.matrix();
    let kappa = |b: &CMatrix, sign: f64| -> Result<f64> {
        if b.ncols() == 0 {
            return Ok(1.0);
        }
        let a = b.adjoint() * jm * b * C64::new(sign, 0.0);
        pencil_min_eigenvalue(&a, &(b.adjoint() * b))
    };
    let kappa_plus = kappa(basis_plus, 1.0)?;
    let kappa_minus = kappa(basis_minus, -1.0)?;
    if kappa_plus <= KAPPA_FLOOR || kappa_minus <= KAPPA_FLOOR {
        return Err(Error::NotUniformlyDefinite(format!("κ⁺ = {kappa_plus:.3e}, κ⁻ = {kappa_minus:.3e}")));
    }
    let kappa_cross = if basis_plus.ncols() == 0 || basis_minus.ncols() == 0 {
        0.0
    } else {
        let up = orthonormalize(basis_plus)?;
        let um = orthonormalize(basis_minus)?;
        spectral_norm(&(up.adjoint() * jm * um))
    };
    Ok(DefinitenessCertificate {
        kappa_plus,
        kappa_minus,
        kappa_cross,
        cross_condition_met: kappa_cross * kappa_cross < kappa_plus * kappa_minus,
    })
}

/// Orthonormal basis of the span of a full-rank `b`: `b L⁻*` with `b*b = L L*`.
fn orthonormalize(b: &CMatrix) -> Result<CMatrix> {
    let gram = b.adjoint() * b;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("basis does not have full column rank".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&b.adjoint())
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    Ok(x.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{eigen_decomposition, from_real_rows, real_diag};
    use proptest::prelude::*;
    use rand::Rng;

    fn swap2() -> CMatrix {
        from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn involutions_validate() {
        assert!(validate_involution(&CMatrix::identity(3, 3), 1e-12).is_ok());
        assert!(validate_involution(&real_diag(&[1.0, -1.0]), 1e-12).is_ok());
        assert!(validate_involution(Involution::flip(5).matrix(), 1e-12).is_ok());
        assert!(validate_involution(&real_diag(&[1.0, 2.0]), 1e-12).is_err());
        let nonsym = from_real_rows(2, 2, &[1.0, 1.0, 0.0, -1.0]);
        assert!(matches!(validate_involution(&nonsym, 1e-12), Err(Error::NotAnInvolution(_))));
    }

    #[test]
    fn defect_examples() {
        let herm = from_real_rows(2, 2, &[1.0, 2.0, 2.0, -3.0]);
        assert!(j_self_adjoint_defect(&herm, &Involution::identity(2)).unwrap() < 1e-14);
        let jordan = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let j = validate_involution(&swap2(), 0.0).unwrap();
        assert_eq!(j_self_adjoint_defect(&jordan, &j).unwrap(), 0.0);
        let t = crate::linalg::dense::diag(&[C64::new(0.0, 1.0), C64::new(0.0, -1.0)]);
        assert!((j_self_adjoint_defect(&t, &Involution::identity(2)).unwrap() - 2.0).abs() < 1e-14);
        assert!(j_self_adjoint_defect(&t, &Involution::identity(3)).is_err());
    }

    #[test]
    fn classify_diagonal() {
        let t = real_diag(&[2.0, 3.0]);
        let j = Involution::signs(&[1.0, -1.0]).unwrap();
        let e2 = classify_point(&t, &j, C64::new(2.0, 0.0), 1e-8).unwrap();
        assert_eq!(e2.type_tag, TypeTag::PositiveType);
        assert_eq!((e2.alg_mult, e2.geo_mult), (1, 1));
        let e3 = classify_point(&t, &j, C64::new(3.0, 0.0), 1e-8).unwrap();
        assert_eq!(e3.type_tag, TypeTag::NegativeType);
        assert!(matches!(classify_point(&t, &j, C64::new(2.5, 0.0), 1e-8), Err(Error::NotAnEigenvalue(..))));
    }

    #[test]
    fn classify_jordan_block_is_not_definite() {
        let t = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let j = validate_involution(&swap2(), 0.0).unwrap();
        let e = classify_point(&t, &j, ONE, 1e-8).unwrap();
        assert_eq!(e.type_tag, TypeTag::NotDefinite);
        assert_eq!((e.alg_mult, e.geo_mult), (2, 1));
        // the Gram matrix of the swap on the full space has eigenvalues ±1
        assert!((e.gram_eigs[0] + 1.0).abs() < 1e-10 && (e.gram_eigs[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonreal_pair_is_neutral() {
        // J-self-adjoint with J = swap: [[a, b], [c, a]] with real a and b, c of opposite sign
        let t = from_real_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let j = validate_involution(&swap2(), 0.0).unwrap();
        assert!(j_self_adjoint_defect(&t, &j).unwrap() < 1e-15);
        let spec = classify_spectrum(&t, &j, &ClassifyOptions::default()).unwrap();
        assert_eq!(spec.entries.len(), 2);
        assert!(spec.entries.iter().all(|e| e.type_tag == TypeTag::NotDefinite));
    }

    #[test]
    fn unresolved_cluster_is_reported() {
        let t = real_diag(&[1.0, 1.0 + 5e-11, 1.0 + 3e-6]);
        let j = Involution::identity(3);
        let opts = ClassifyOptions { cluster_gap: 1e-11, ..ClassifyOptions::default() };
        let r = classify_point_with(&t, &j, ONE, 1e-8, &opts);
        assert!(matches!(r, Err(Error::ClusterIsolation(_))), "{r:?}");
        let merged = classify_point(&t, &j, ONE, 1e-8).unwrap();
        assert_eq!((merged.alg_mult, merged.geo_mult), (2, 2));
    }

    #[test]
    fn riesz_examples() {
        let t = real_diag(&[0.0, 5.0]);
        let p = riesz_projection(&t, ZERO, 1.0, 64).unwrap();
        assert!((p - real_diag(&[1.0, 0.0])).norm() < 1e-12);

        let jordan = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let p = riesz_projection(&jordan, ONE, 0.5, 64).unwrap();
        assert!((p - CMatrix::identity(2, 2)).norm() < 1e-12);

        assert!(matches!(riesz_projection(&t, ZERO, 1.0, 8), Err(Error::InvalidParameter(_))));
        assert!(matches!(riesz_projection(&t, ZERO, 5.01, 64), Err(Error::EigenvalueOnContour(_))));
    }

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn riesz_matches_eigendecomposition() {
        // 6×6 with spectrum {1,2,...,6} in a random eigenbasis
        let v = random_matrix(6, 4) + CMatrix::identity(6, 6) * C64::new(2.0, 0.0);
        let d = real_diag(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = &v * d * v.clone().try_inverse().unwrap();
        let p = riesz_projection(&t, C64::new(1.5, 0.0), 1.0, 64).unwrap();
        assert!(spectral_norm(&(&p * &p - &p)) <= 1e-8);
        // oracle: V E V⁻¹ with E selecting eigenvalues 1 and 2
        let (vals, vecs) = eigen_decomposition(&t);
        let sel: Vec<f64> = vals.iter().map(|l| if (l.re - 1.5).abs() < 1.0 { 1.0 } else { 0.0 }).collect();
        let oracle = &vecs * real_diag(&sel) * vecs.clone().try_inverse().unwrap();
        assert!(spectral_norm(&(&p - oracle)) < 1e-8 * spectral_norm(&p));
        assert!((p.trace() - C64::new(2.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn riesz_error_decays_quadratically_under_doubling() {
        // inside eigenvalue at ratio 0.5 and outside one at ratio 1.6 of the radius
        let v = random_matrix(3, 9) + CMatrix::identity(3, 3) * C64::new(3.0, 0.0);
        let d = real_diag(&[0.5, 1.6, -4.0]);
        let t = &v * d * v.clone().try_inverse().unwrap();
        let defect = |n| {
            let p = riesz_projection(&t, ZERO, 1.0, n).unwrap();
            spectral_norm(&(&p * &p - &p))
        };
        let floor = 1e-11;
        let (mut prev, mut nodes) = (defect(32), 32);
        while prev > floor && nodes < 512 {
            nodes *= 2;
            let cur = defect(nodes);
            assert!(cur <= 10.0 * prev * prev + floor, "{nodes}: {cur:.3e} vs {prev:.3e}");
            prev = cur;
        }
        let (_, used, d) = riesz_projection_adaptive(&t, ZERO, 1.0, 16, 1024).unwrap();
        assert!(d < 1e-10 && used >= 32);
    }

    #[test]
    fn theta_examples() {
        let p1 = real_diag(&[1.0, 0.0]);
        let p2 = real_diag(&[0.0, 1.0]);
        let (theta, cert) = theta_operator(&[p1, p2]).unwrap();
        assert!((theta - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((cert.min_eig - 1.0).abs() < 1e-14);

        let p1 = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let p2 = from_real_rows(2, 2, &[0.0, -1.0, 0.0, 1.0]);
        let (theta, cert) = theta_operator(&[p1, p2]).unwrap();
        assert!((theta - from_real_rows(2, 2, &[1.0, 1.0, 1.0, 3.0])).norm() < 1e-14);
        assert!((cert.min_eig - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(cert.min_eig >= 0.5);
        assert!(cert.commutation_residual < 1e-14);

        let bad = [real_diag(&[1.0, 0.0]), real_diag(&[1.0, 1.0])];
        assert!(matches!(theta_operator(&bad), Err(Error::InvalidProjections(_))));
    }

    /// Random oblique resolution of the identity: `P_k = V E_k V⁻¹` for a
    /// partition of the coordinates into `parts` non-empty groups.
    fn oblique_family(n: usize, parts: usize, seed: u64) -> Vec<CMatrix> {
        let v = random_matrix(n, seed) + CMatrix::identity(n, n) * C64::new(1.5, 0.0);
        let vinv = v.clone().try_inverse().unwrap();
        (0..parts)
            .map(|k| {
                let sel: Vec<f64> = (0..n).map(|i| if i % parts == k { 1.0 } else { 0.0 }).collect();
                &v * real_diag(&sel) * &vinv
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn theta_bounds_hold(n in 3usize..=6, seed in 0u64..10_000) {
            let parts = n;
            let fam = oblique_family(n, parts, seed);
            let (theta, cert) = theta_operator(&fam).unwrap();
            prop_assert!(cert.min_eig >= 1.0 / parts as f64 - 1e-10);
            prop_assert!(cert.commutation_residual <= 1e-10 * spectral_norm(&theta));
        }

        #[test]
        fn identity_metric_is_always_positive(n in 1usize..=6, seed in 0u64..10_000) {
            let t = random_matrix(n, seed);
            let spec = classify_spectrum(&t, &Involution::identity(n), &ClassifyOptions::default()).unwrap();
            prop_assert_eq!(spec.total_multiplicity(), n);
            prop_assert!(spec.entries.iter().all(|e| e.type_tag == TypeTag::PositiveType));
        }

        #[test]
        fn definite_eigenvalues_are_real(n in 1usize..=4, seed in 0u64..10_000) {
            // T = J H with H Hermitian is J-self-adjoint for J = diag(±1)
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let signs: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let j = Involution::signs(&signs).unwrap();
            let a = random_matrix(n, seed + 1);
            let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
            let t = j.matrix() * h;
            prop_assert!(j_self_adjoint_defect(&t, &j).unwrap() <= 1e-12);
            if let Ok(spec) = classify_spectrum(&t, &j, &ClassifyOptions::default()) {
                for e in &spec.entries {
                    if e.type_tag != TypeTag::NotDefinite {
                        prop_assert!(e.lambda.im.abs() < 1e-8, "{:?}", e);
                    }
                }
            }
        }
    }

    #[test]
    fn definiteness_examples() {
        let j = Involution::signs(&[1.0, -1.0]).unwrap();
        let e1 = from_real_rows(2, 1, &[1.0, 0.0]);
        let e2 = from_real_rows(2, 1, &[0.0, 1.0]);
        let c = definiteness_constants(&j, &e1, &e2).unwrap();
        assert_eq!((c.kappa_plus, c.kappa_minus, c.kappa_cross), (1.0, 1.0, 0.0));
        assert!(c.cross_condition_met);

        let j = validate_involution(&swap2(), 0.0).unwrap();
        let s = 0.5f64.sqrt();
        let bp = from_real_rows(2, 1, &[s, s]);
        let bm = from_real_rows(2, 1, &[s, -s]);
        let c = definiteness_constants(&j, &bp, &bm).unwrap();
        assert!((c.kappa_plus - 1.0).abs() < 1e-14 && (c.kappa_minus - 1.0).abs() < 1e-14);
        assert!(c.kappa_cross < 1e-14);

        // a neutral vector is not uniformly definite
        assert!(matches!(definiteness_constants(&j, &e1, &bm), Err(Error::NotUniformlyDefinite(_))));
        // empty negative part is vacuous
        let c = definiteness_constants(&j, &bp, &CMatrix::zeros(2, 0)).unwrap();
        assert_eq!((c.kappa_minus, c.kappa_cross), (1.0, 0.0));
    }

    #[test]
    fn cross_constant_of_oblique_subspaces() {
        // J = diag(1,1,-1); f₊ = e₁ + 0.5 e₃ (positive), f₋ = e₃ + 0.2 e₁ (negative)
        let j = Involution::signs(&[1.0, 1.0, -1.0]).unwrap();
        let fp = from_real_rows(3, 1, &[1.0, 0.0, 0.5]);
        let fm = from_real_rows(3, 1, &[0.2, 0.0, 1.0]);
        let c = definiteness_constants(&j, &fp, &fm).unwrap();
        // 1×1 closed forms: [f₊,f₊]/‖f₊‖², −[f₋,f₋]/‖f₋‖², |[f₊,f₋]|/(‖f₊‖‖f₋‖)
        assert!((c.kappa_plus - 0.75 / 1.25).abs() < 1e-14);
        assert!((c.kappa_minus - 0.96 / 1.04).abs() < 1e-14);
        assert!((c.kappa_cross - 0.3 / (1.25f64 * 1.04).sqrt()).abs() < 1e-14);
    }
}
