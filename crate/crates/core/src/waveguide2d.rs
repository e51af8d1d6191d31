//! Finite-difference realization of the waveguide operator on a truncated
//! strip `(−Lx, Lx) × (−a, a)`.
//!
//! Nodes are indexed `p = ix·ny + iy`; the `y`-grid includes both walls and is
//! symmetric under `y ↦ −y`. The Robin rows are the symmetrized ghost-node
//! rows of [`crate::transversal::robin_fd_matrix`], so for PT-symmetric data
//! the assembled matrix is self-adjoint in the indefinite inner product given
//! by the `y`-flip, up to rounding.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{schur, smallest_singular_value};
use crate::linalg::krylov::lanczos_largest;
use crate::linalg::{eigs_near as sparse_eigs_near, BandedLu, CMatrix, CsrMatrix, EigPair, LinearSolver, ShiftInvertOptions, C64};
use crate::sets::RealLineSet;
use crate::transversal::{robin_fd_triplets, Rect};

/// Largest operator order assembled by default.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XBoundary {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    /// Truncation half-length in `x`.
    pub lx: f64,
    /// Interior `x` nodes (Dirichlet) or nodes per period (periodic).
    pub nx: usize,
    /// `y` nodes including both walls.
    pub ny: usize,
    pub x_boundary: XBoundary,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite() && self.lx > 0.0 && self.lx.is_finite()) {
            return Err(Error::InvalidParameter(format!("need a > 0 and lx > 0, got {} and {}", self.a, self.lx)));
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::InvalidParameter(format!("grid {}x{} is below the 8x8 minimum", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        match self.x_boundary {
            XBoundary::Dirichlet => 2.0 * self.lx / (self.nx + 1) as f64,
            XBoundary::Periodic => 2.0 * self.lx / self.nx as f64,
        }
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.a / (self.ny - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        match self.x_boundary {
            XBoundary::Dirichlet => -self.lx + (ix + 1) as f64 * self.hx(),
            XBoundary::Periodic => -self.lx + ix as f64 * self.hx(),
        }
    }

    pub fn y(&self, iy: usize) -> f64 {
        if 2 * iy + 1 == self.ny {
            0.0
        } else {
            -self.a + iy as f64 * self.hy()
        }
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    /// Same grid with both mesh widths halved (node counts doubled).
    pub fn refined(&self) -> Self {
        let nx = match self.x_boundary {
            XBoundary::Dirichlet => 2 * self.nx + 1,
            XBoundary::Periodic => 2 * self.nx,
        };
        Self { nx, ny: 2 * self.ny - 1, ..*self }
    }
}

/// Robin coupling profile `α(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    Constant { alpha: C64 },
    /// `α(x) = base + height·exp(−((x − center)/width)²)`.
    ConstantPlusBump { base: C64, center: f64, width: f64, height: C64 },
}

impl CouplingSpec {
    pub fn eval(&self, x: f64) -> C64 {
        match *self {
            Self::Constant { alpha } => alpha,
            Self::ConstantPlusBump { base, center, width, height } => {
                let t = (x - center) / width;
                base + height * (-t * t).exp()
            }
        }
    }

    /// `sup |α − α_∞|` of the bump part.
    pub fn perturbation_size(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::ConstantPlusBump { height, .. } => height.norm(),
        }
    }
}

/// Potential `V(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// Piecewise-linear `V₀(x)` through `(x, value)` knots, constant outside.
    XOnly { table: Vec<(f64, f64)> },
    /// `V(x, y) = vx(x)·vy(y)` with piecewise-linear factors.
    Separable { vx: Vec<(f64, f64)>, vy: Vec<(f64, C64)> },
    /// Values at the nodes, indexed `ix·ny + iy`.
    Sampled { values: Vec<C64> },
}

fn interp<T>(table: &[(f64, T)], x: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let last = table.len() - 1;
    if x <= table[0].0 {
        return table[0].1;
    }
    if x >= table[last].0 {
        return table[last].1;
    }
    let i = table.partition_point(|(t, _)| *t <= x) - 1;
    let (x0, v0) = table[i];
    let (x1, v1) = table[i + 1];
    let w = (x - x0) / (x1 - x0);
    v0 * (1.0 - w) + v1 * w
}

impl PotentialSpec {
    fn validate(&self, grid: &GridSpec) -> Result<()> {
        let sorted = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite())
        };
        let ok = match self {
            Self::Zero => true,
            Self::XOnly { table } => sorted(&mut table.iter().map(|t| t.0)),
            Self::Separable { vx, vy } => sorted(&mut vx.iter().map(|t| t.0)) && sorted(&mut vy.iter().map(|t| t.0)),
            Self::Sampled { values } => values.len() == grid.order(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("potential tables need increasing knots; sampled values need one per node".into()))
        }
    }

    fn eval(&self, grid: &GridSpec, ix: usize, iy: usize) -> C64 {
        let (x, y) = (grid.x(ix), grid.y(iy));
        match self {
            Self::Zero => C64::new(0.0, 0.0),
            Self::XOnly { table } => C64::new(interp(table, x), 0.0),
            Self::Separable { vx, vy } => interp(vy, y) * interp(vx, x),
            Self::Sampled { values } => values[grid.node(ix, iy)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveguideOperator {
    pub grid: GridSpec,
    pub h: CsrMatrix,
    /// `y`-flip as a node permutation (an involution).
    pub flip: Vec<usize>,
    pub alpha_samples: Vec<C64>,
    pub v_samples: Vec<C64>,
    /// Bandwidth-reducing ordering for factorizations (periodic grids).
    pub perm: Option<Vec<usize>>,
}

impl WaveguideOperator {
    pub fn order(&self) -> usize {
        self.h.order()
    }

    pub fn apply_flip(&self, v: &[C64]) -> Vec<C64> {
        self.flip.iter().map(|&q| v[q]).collect()
    }

    /// `max |H − J H* J|` entrywise, relative to `max |H|`.
    pub fn pt_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (p, q, v) in self.h.entries() {
            let mirrored = self.h.get(self.flip[q], self.flip[p]).conj();
            worst = worst.max((v - mirrored).norm());
            scale = scale.max(v.norm());
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    pub fn flip_matrix(&self) -> CMatrix {
        let n = self.order();
        let mut j = CMatrix::zeros(n, n);
        for (p, &q) in self.flip.iter().enumerate() {
            j[(p, q)] = C64::new(1.0, 0.0);
        }
        j
    }

    fn shift_invert_options(&self) -> ShiftInvertOptions {
        ShiftInvertOptions { perm: self.perm.clone(), ..ShiftInvertOptions::default() }
    }
}

/// Interleaved `x` ordering `0, nx−1, 1, nx−2, …` that keeps periodic
/// neighbours within two positions.
fn periodic_ordering(grid: &GridSpec) -> Vec<usize> {
    let nx = grid.nx;
    let mut pos = vec![0usize; nx];
    for t in 0..nx {
        let ix = if t % 2 == 0 { t / 2 } else { nx - 1 - t / 2 };
        pos[ix] = t;
    }
    let mut perm = vec![0usize; grid.order()];
    for ix in 0..nx {
        for iy in 0..grid.ny {
            perm[grid.node(ix, iy)] = pos[ix] * grid.ny + iy;
        }
    }
    perm
}

/// Second-difference matrix of `−d²/dx² + v0(x)` on the `x`-grid.
pub fn longitudinal_fd(grid: &GridSpec, v0: &dyn Fn(f64) -> f64) -> Result<CsrMatrix> {
    grid.validate()?;
    let nx = grid.nx;
    let hx2 = grid.hx().powi(2);
    let mut trip = Vec::with_capacity(3 * nx + 2);
    for ix in 0..nx {
        trip.push((ix, ix, C64::new(2.0 / hx2 + v0(grid.x(ix)), 0.0)));
        if ix + 1 < nx {
            trip.push((ix, ix + 1, C64::new(-1.0 / hx2, 0.0)));
            trip.push((ix + 1, ix, C64::new(-1.0 / hx2, 0.0)));
        }
    }
    if grid.x_boundary == XBoundary::Periodic {
        trip.push((0, nx - 1, C64::new(-1.0 / hx2, 0.0)));
        trip.push((nx - 1, 0, C64::new(-1.0 / hx2, 0.0)));
    }
    Ok(CsrMatrix::from_triplets(nx, trip))
}

/// Assemble `−Δ + V` with Robin walls `∂_ν u + αu = 0` (top) and
/// `∂_ν u + ᾱu = 0` (bottom).
pub fn assemble_waveguide(grid: &GridSpec, alpha: &CouplingSpec, v: &PotentialSpec) -> Result<WaveguideOperator> {
    assemble_with_cap(grid, alpha, v, DEFAULT_NODE_CAP)
}

pub fn assemble_with_cap(grid: &GridSpec, alpha: &CouplingSpec, v: &PotentialSpec, cap: usize) -> Result<WaveguideOperator> {
    grid.validate()?;
    v.validate(grid)?;
    let n = grid.order();
    if n > cap {
        return Err(Error::DimensionCap(format!("{n} nodes exceed the cap {cap}")));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let hx2 = grid.hx().powi(2);
    let alpha_samples: Vec<C64> = (0..nx).map(|ix| alpha.eval(grid.x(ix))).collect();
    if alpha_samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter("coupling is not finite on the grid".into()));
    }
    let mut v_samples = Vec::with_capacity(n);
    let mut trip = Vec::with_capacity(5 * n);
    for ix in 0..nx {
        let base = ix * ny;
        for (i, j, val) in robin_fd_triplets(grid.a, alpha_samples[ix], alpha_samples[ix].conj(), ny - 1) {
            trip.push((base + i, base + j, val));
        }
        for iy in 0..ny {
            let p = base + iy;
            let vv = v.eval(grid, ix, iy);
            v_samples.push(vv);
            trip.push((p, p, vv + 2.0 / hx2));
            let mut link = |q: usize| trip.push((p, q, C64::new(-1.0 / hx2, 0.0)));
            if ix > 0 {
                link(p - ny);
            }
            if ix + 1 < nx {
                link(p + ny);
            }
            if grid.x_boundary == XBoundary::Periodic {
                if ix == 0 {
                    link(grid.node(nx - 1, iy));
                }
                if ix + 1 == nx {
                    link(grid.node(0, iy));
                }
            }
        }
    }
    if v_samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter("potential is not finite on the grid".into()));
    }
    let flip = (0..n).map(|p| p - p % ny + (ny - 1 - p % ny)).collect();
    let perm = (grid.x_boundary == XBoundary::Periodic).then(|| periodic_ordering(grid));
    Ok(WaveguideOperator { grid: *grid, h: CsrMatrix::from_triplets(n, trip), flip, alpha_samples, v_samples, perm })
}

/// The `k` eigenpairs nearest `target` by shift-invert Arnoldi, each with
/// backward error at most `1e−8`.
pub fn eigs_near(op: &WaveguideOperator, target: C64, k: usize) -> Result<Vec<EigPair>> {
    sparse_eigs_near(&op.h, target, k, &op.shift_invert_options())
}

/// Every eigenvalue within `radius` of `target`: the request size is doubled
/// until the farthest returned eigenvalue lies outside the disk.
pub fn eigs_in_disk(op: &WaveguideOperator, target: C64, radius: f64, k0: usize) -> Result<Vec<EigPair>> {
    let n = op.order();
    let mut k = k0.max(4).min(n);
    loop {
        let pairs = eigs_near(op, target, k)?;
        let far = pairs.last().map_or(0.0, |p| (p.value - target).norm());
        if far > radius || k == n {
            return Ok(pairs.into_iter().filter(|p| (p.value - target).norm() <= radius).collect());
        }
        k = (2 * k).min(n);
    }
}

/// `x`-truncation half-length at which a bound state `gap` below the
/// threshold has decayed to `tol`.
pub fn suggested_lx(gap: f64, tol: f64) -> f64 {
    (1.0 / tol).ln() / gap.max(f64::MIN_POSITIVE).sqrt()
}

// ---------------------------------------------------------------------------
// Pseudospectra

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pub lambda: C64,
    pub sigma_min: f64,
    /// Set when `H − λ` could not be factored (λ is numerically an eigenvalue).
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudospectrumMap {
    pub rect: Rect,
    pub mx: usize,
    pub my: usize,
    /// Row-major in `Im λ` (outer) and `Re λ` (inner).
    pub samples: Vec<PseudoSample>,
    pub dense: bool,
}

impl PseudospectrumMap {
    /// CSV body rows `re,im,sigma_min,flagged`.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for p in &self.samples {
            let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{}", p.lambda.re, p.lambda.im, p.sigma_min, u8::from(p.flagged));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOptions {
    /// Orders up to this use a Schur form and exact singular values.
    pub dense_limit: usize,
    pub lanczos_steps: usize,
    pub seed: u64,
}

impl Default for PseudoOptions {
    fn default() -> Self {
        Self { dense_limit: 200, lanczos_steps: 80, seed: 11 }
    }
}

fn grid_points(rect: &Rect, mx: usize, my: usize) -> Vec<C64> {
    let lin = |(lo, hi): (f64, f64), m: usize, i: usize| if m == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 };
    (0..my).flat_map(|j| (0..mx).map(move |i| C64::new(lin(rect.re, mx, i), lin(rect.im, my, j)))).collect()
}

/// `σ_min(H − λ)` over an `mx × my` grid on `rect`.
pub fn pseudospectrum_map(op: &WaveguideOperator, rect: Rect, mx: usize, my: usize, opts: &PseudoOptions) -> Result<PseudospectrumMap> {
    pseudospectrum_of(&op.h, op.perm.clone(), rect, mx, my, opts)
}

/// As [`pseudospectrum_map`] for an arbitrary sparse matrix.
pub fn pseudospectrum_of(
    h: &CsrMatrix,
    perm: Option<Vec<usize>>,
    rect: Rect,
    mx: usize,
    my: usize,
    opts: &PseudoOptions,
) -> Result<PseudospectrumMap> {
    if mx == 0 || my == 0 {
        return Err(Error::InvalidParameter("pseudospectrum grid must be non-empty".into()));
    }
    let n = h.order();
    let pts = grid_points(&rect, mx, my);
    let scale = h.norm_bound().max(1.0);
    let dense = n <= opts.dense_limit;
    let samples: Vec<PseudoSample> = if dense {
        // unitary invariance: σ_min(H − λ) = σ_min(T − λ) for the Schur form T
        let (_, t) = schur(&h.to_dense());
        pts.par_iter()
            .map(|&z| {
                let s = smallest_singular_value(&(&t - CMatrix::identity(n, n) * z));
                PseudoSample { lambda: z, sigma_min: s, flagged: s <= f64::EPSILON * scale }
            })
            .collect()
    } else {
        pts.par_iter()
            .map(|&z| match BandedLu::factor_permuted(&h.shifted(z), perm.clone()) {
                Ok(lu) => {
                    let apply = |x: &[C64]| lu.solve(&lu.solve_adjoint(x));
                    let top = lanczos_largest(&apply, n, opts.lanczos_steps, opts.seed);
                    let s = if top > 0.0 && top.is_finite() { 1.0 / top.sqrt() } else { 0.0 };
                    PseudoSample { lambda: z, sigma_min: s, flagged: s == 0.0 }
                }
                Err(_) => PseudoSample { lambda: z, sigma_min: 0.0, flagged: true },
            })
            .collect()
    };
    Ok(PseudospectrumMap { rect, mx, my, samples, dense })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagBoundFit {
    /// Fitted `1/m` in `|Im λ| ≈ M σ_min^{1/m}`.
    pub exponent: f64,
    pub m: f64,
    pub prefactor: f64,
    pub samples: usize,
    pub rms_residual: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log|Im λ|` against `log σ_min` over the samples with
/// `Re λ ∈ window` and `|Im λ| ∈ band`.
pub fn imag_bound_fit(map: &PseudospectrumMap, window: (f64, f64), band: (f64, f64)) -> Result<ImagBoundFit> {
    let pts: Vec<(f64, f64)> = map
        .samples
        .iter()
        .filter(|s| !s.flagged && s.sigma_min > 0.0)
        .filter(|s| s.lambda.re >= window.0 && s.lambda.re <= window.1)
        .filter(|s| s.lambda.im.abs() >= band.0 && s.lambda.im.abs() <= band.1)
        .map(|s| (s.sigma_min.ln(), s.lambda.im.abs().ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::InsufficientSamples(format!("{n} samples in window {window:?} and band {band:?}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientSamples("sigma_min is constant over the fitted samples".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(ImagBoundFit {
        exponent: slope,
        m: 1.0 / slope,
        prefactor: intercept.exp(),
        samples: n,
        rms_residual: (ss_res / nf).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealnessReport {
    pub window: (f64, f64),
    pub tol: f64,
    pub in_window: Vec<C64>,
    /// Eigenvalues in the window with `|Im λ| > tol`.
    pub flagged: Vec<C64>,
    pub real_count: usize,
    /// Real eigenvalues in the window outside the (surrogate) essential spectrum.
    pub isolated_real: Vec<f64>,
}

pub fn realness_report(eigs: &[C64], window: (f64, f64), tol: f64, essential: Option<&RealLineSet>) -> RealnessReport {
    let in_window: Vec<C64> = eigs.iter().copied().filter(|z| z.re >= window.0 && z.re <= window.1).collect();
    let flagged: Vec<C64> = in_window.iter().copied().filter(|z| z.im.abs() > tol).collect();
    let real: Vec<f64> = in_window.iter().filter(|z| z.im.abs() <= tol).map(|z| z.re).collect();
    let isolated_real = real.iter().copied().filter(|x| essential.is_none_or(|e| !e.contains(*x))).collect();
    RealnessReport { window, tol, real_count: real.len(), in_window, flagged, isolated_real }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{eigenvalues, kron};
    use crate::transversal::{coupling, robin_fd_matrix};

    fn grid(nx: usize, ny: usize, xb: XBoundary) -> GridSpec {
        GridSpec { a: std::f64::consts::FRAC_PI_2, lx: 3.0, nx, ny, x_boundary: xb }
    }

    #[test]
    fn separable_operator_is_a_kronecker_sum() {
        let g = grid(9, 8, XBoundary::Dirichlet);
        let alpha = coupling(0.5, 0.0);
        let table = vec![(-1.0, 0.0), (0.0, -0.7), (1.0, 0.0)];
        let op = assemble_waveguide(&g, &CouplingSpec::Constant { alpha }, &PotentialSpec::XOnly { table: table.clone() }).unwrap();
        let hx = longitudinal_fd(&g, &|x| interp(&table, x)).unwrap().to_dense();
        let hy = robin_fd_matrix(g.a, alpha, g.ny - 1).unwrap().to_dense();
        let s = kron(&hx, &CMatrix::identity(g.ny, g.ny)) + kron(&CMatrix::identity(g.nx, g.nx), &hy);
        assert_eq!(op.h.to_dense(), s);
    }

    #[test]
    fn pure_laplacian_eigenvalues_are_sums() {
        let g = grid(10, 9, XBoundary::Dirichlet);
        let zero = CouplingSpec::Constant { alpha: C64::new(0.0, 0.0) };
        let op = assemble_waveguide(&g, &zero, &PotentialSpec::Zero).unwrap();
        let mut ex: Vec<f64> = eigenvalues(&longitudinal_fd(&g, &|_| 0.0).unwrap().to_dense()).iter().map(|z| z.re).collect();
        let mut ey: Vec<f64> = eigenvalues(&robin_fd_matrix(g.a, C64::new(0.0, 0.0), g.ny - 1).unwrap().to_dense()).iter().map(|z| z.re).collect();
        ex.sort_by(f64::total_cmp);
        ey.sort_by(f64::total_cmp);
        let pairs = eigs_near(&op, C64::new(-1.0, 0.0), 5).unwrap();
        let mut sums: Vec<f64> = ex.iter().flat_map(|a| ey.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (p, s) in pairs.iter().zip(&sums) {
            assert!((p.value.re - s).abs() < 1e-8 * s.abs().max(1.0) && p.value.im.abs() < 1e-8, "{} vs {s}", p.value);
        }
    }

    #[test]
    fn pt_structure_is_exact() {
        let g = grid(12, 10, XBoundary::Dirichlet);
        let alpha = CouplingSpec::ConstantPlusBump { base: C64::new(0.0, 0.5), center: 0.3, width: 0.8, height: C64::new(0.0, -0.05) };
        let vy: Vec<(f64, C64)> = vec![(-2.0, C64::new(0.1, -0.2)), (0.0, C64::new(0.3, 0.0)), (2.0, C64::new(0.1, 0.2))];
        let v = PotentialSpec::Separable { vx: vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)], vy };
        let op = assemble_waveguide(&g, &alpha, &v).unwrap();
        assert!(op.pt_defect() < 1e-14, "{}", op.pt_defect());
        let h = op.h.to_dense();
        let j = op.flip_matrix();
        assert!((&j * h.adjoint() * &j - &h).norm() <= 1e-14 * h.norm());
    }

    #[test]
    fn periodic_lowest_eigenvalue_converges_to_mu0() {
        // with periodic x the constant longitudinal mode has eigenvalue 0
        let alpha = CouplingSpec::Constant { alpha: coupling(0.5, 0.0) };
        let mut errs = Vec::new();
        for ny in [9, 17, 33] {
            let g = GridSpec { a: std::f64::consts::FRAC_PI_2, lx: 2.0, nx: 12, ny, x_boundary: XBoundary::Periodic };
            let op = assemble_waveguide(&g, &alpha, &PotentialSpec::Zero).unwrap();
            let p = eigs_near(&op, C64::new(0.0, 0.0), 1).unwrap();
            errs.push((p[0].value - C64::new(0.25, 0.0)).norm());
        }
        assert!(errs[2] < 1e-3);
        for w in errs.windows(2) {
            let rate = w[0] / w[1];
            assert!(rate > 3.5 && rate < 4.5, "{errs:?}");
        }
    }

    #[test]
    fn normal_matrix_pseudospectrum_is_distance() {
        let d = [0.5, 1.0, 1.7, 2.5, 3.0];
        let h = CsrMatrix::from_triplets(5, d.iter().enumerate().map(|(i, &x)| (i, i, C64::new(x, 0.0))).collect());
        let rect = Rect::new((0.0, 3.5), (-1.0, 1.0)).unwrap();
        for dense_limit in [200, 0] {
            let map = pseudospectrum_of(&h, None, rect, 9, 7, &PseudoOptions { dense_limit, ..PseudoOptions::default() }).unwrap();
            let tol = if dense_limit > 0 { 1e-10 } else { 1e-8 };
            for s in &map.samples {
                let dist = d.iter().map(|&x| (s.lambda - x).norm()).fold(f64::INFINITY, f64::min);
                assert!((s.sigma_min - dist).abs() < tol, "{:?} vs {dist}", s);
            }
        }
    }

    #[test]
    fn pseudospectrum_is_conjugation_symmetric() {
        let g = grid(8, 8, XBoundary::Dirichlet);
        let alpha = CouplingSpec::Constant { alpha: coupling(0.5, 0.0) };
        let op = assemble_waveguide(&g, &alpha, &PotentialSpec::Zero).unwrap();
        let rect = Rect::new((0.3, 2.0), (-0.5, 0.5)).unwrap();
        for dense_limit in [200, 0] {
            let map = pseudospectrum_map(&op, rect, 6, 5, &PseudoOptions { dense_limit, ..PseudoOptions::default() }).unwrap();
            for j in 0..2 {
                for i in 0..6 {
                    let (lo, hi) = (map.samples[j * 6 + i], map.samples[(4 - j) * 6 + i]);
                    assert!((lo.sigma_min - hi.sigma_min).abs() < 1e-8 * lo.sigma_min.max(1e-3));
                }
            }
        }
    }

    #[test]
    fn hermitian_fit_is_linear() {
        // a dense real spectrum: σ_min(x + iy) ≈ |y| once |y| exceeds the spacing
        let n = 400;
        let h = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, C64::new(i as f64 / n as f64, 0.0))).collect());
        let rect = Rect::new((0.2, 0.8), (0.05, 0.5)).unwrap();
        let map = pseudospectrum_of(&h, None, rect, 13, 12, &PseudoOptions::default()).unwrap();
        let fit = imag_bound_fit(&map, (0.2, 0.8), (0.05, 0.5)).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.02, "{fit:?}");
        assert!((fit.prefactor - 1.0).abs() < 0.05, "{fit:?}");
        assert!(matches!(imag_bound_fit(&map, (5.0, 6.0), (0.05, 0.5)), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn realness_report_counts() {
        let eigs = [C64::new(0.2, 0.0), C64::new(0.5, 1e-12), C64::new(0.7, 0.01), C64::new(2.0, 0.0)];
        let ess = RealLineSet::from_interval(crate::sets::Interval::at_least(0.25).unwrap());
        let r = realness_report(&eigs, (0.0, 1.0), 1e-9, Some(&ess));
        assert_eq!(r.in_window.len(), 3);
        assert_eq!(r.flagged, vec![C64::new(0.7, 0.01)]);
        assert_eq!(r.real_count, 2);
        assert_eq!(r.isolated_real, vec![0.2]);
    }

    #[test]
    fn grid_validation() {
        assert!(grid(7, 8, XBoundary::Dirichlet).validate().is_err());
        let g = grid(8, 9, XBoundary::Dirichlet);
        assert_eq!(g.y(4), 0.0);
        assert!((g.y(0) + g.y(8)).abs() < 1e-15);
        let r = g.refined();
        assert!((r.hx() - 0.5 * g.hx()).abs() < 1e-15 && (r.hy() - 0.5 * g.hy()).abs() < 1e-15);
        let zero = CouplingSpec::Constant { alpha: C64::new(0.0, 0.0) };
        assert!(matches!(assemble_with_cap(&g, &zero, &PotentialSpec::Zero, 10), Err(Error::DimensionCap(_))));
    }
}
