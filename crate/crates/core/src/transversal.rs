//! The transversal Robin operator `−d²/dy²` on `(−a, a)` and the spectral
//! decomposition of the unperturbed waveguide built from it.
//!
//! Boundary conditions use the outward normal: `∂_ν ψ + αψ = 0` on the top
//! wall `y = a` and `∂_ν ψ + ᾱψ = 0` on the bottom wall `y = −a`, i.e.
//! `ψ'(a) = −αψ(a)` and `ψ'(−a) = ᾱψ(−a)` with `α = β₀ + iα₀`. For real `α₀`
//! and `β₀ = 0` this is the PT-symmetric operator with eigenvalues `α₀²` and
//! `(πn/2a)²`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::TypeTag;
use crate::linalg::tridiag;
use crate::linalg::{CsrMatrix, C64};
use crate::sets::{Interval, RealLineSet};

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("half-width a = {a} must be positive and finite")));
    }
    Ok(())
}

/// Robin coupling `α = β₀ + iα₀`.
pub fn coupling(alpha0: f64, beta0: f64) -> C64 {
    C64::new(beta0, alpha0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalMode {
    /// Index in the closed-form family: 0 for `α₀²`, `n ≥ 1` for `(πn/2a)²`.
    pub n: usize,
    pub lambda: C64,
    /// `(A, B)` in `ψ(y) = A cos(k(y+a)) + B sin(k(y+a))`, `k = √λ ≥ 0`.
    pub psi_coeffs: (C64, C64),
    /// `(Pψ, ψ)` with `(Pψ)(y) = ψ(−y)`.
    pub indicator: f64,
    #[serde(rename = "type")]
    pub type_tag: TypeTag,
}

impl TransversalMode {
    pub fn wavenumber(&self) -> f64 {
        self.lambda.re.max(0.0).sqrt()
    }

    /// `ψ` at the shifted coordinate `s = y + a ∈ [0, 2a]`.
    pub fn eval(&self, y: f64) -> C64 {
        let k = self.wavenumber();
        let (a, b) = self.psi_coeffs;
        a * (k * y).cos() + b * (k * y).sin()
    }

    /// Boundary residuals `(ψ'(−a) − ᾱψ(−a), ψ'(a) + αψ(a))` for `α = iα₀`.
    pub fn boundary_residuals(&self, a: f64, alpha0: f64) -> (f64, f64) {
        let alpha = coupling(alpha0, 0.0);
        let k = self.wavenumber();
        let (ca, cb) = self.psi_coeffs;
        let s = 2.0 * k * a;
        let bottom = k * cb - alpha.conj() * ca;
        let psi_top = ca * s.cos() + cb * s.sin();
        let dpsi_top = k * (-ca * s.sin() + cb * s.cos());
        (bottom.norm(), (dpsi_top + alpha * psi_top).norm())
    }
}

/// `λₙ = (πn/2a)²`.
pub fn lambda_n(a: f64, n: usize) -> f64 {
    let k = PI * n as f64 / (2.0 * a);
    k * k
}

/// `n*` with `α₀² = λ_{n*}`, detected with relative tolerance `1e−12`.
pub fn exceptional_index(a: f64, alpha0: f64) -> Option<usize> {
    let t = 2.0 * a * alpha0.abs() / PI;
    let n = t.round();
    (n >= 1.0 && (t - n).abs() <= 1e-12 * t.max(1.0)).then_some(n as usize)
}

/// The index set `E(α₀)` in the non-decreasing ordering of the eigenvalues.
pub fn exceptional_set(a: f64, alpha0: f64) -> Result<Vec<usize>> {
    check_a(a)?;
    Ok(exceptional_index(a, alpha0).map_or_else(Vec::new, |n| vec![n - 1, n]))
}

/// Closed-form `(Pψₙ, ψₙ)` for the eigenfunctions normalized as `ψ(−a) = 1`.
pub fn indicator_closed_form(a: f64, alpha0: f64, n: usize) -> f64 {
    let lambda0 = alpha0 * alpha0;
    if n == 0 {
        let x = 2.0 * alpha0 * a;
        if alpha0.abs() < 1e-6 {
            // sin(2α₀a)/α₀ = 2a(1 − x²/6 + x⁴/120)
            2.0 * a * (1.0 - x * x / 6.0 + x.powi(4) / 120.0)
        } else {
            x.sin() / alpha0
        }
    } else {
        let ln = lambda_n(a, n);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        a * sign * (ln - lambda0) / ln
    }
}

/// Modes `μ₀ … μ_N` in non-decreasing order of eigenvalue.
///
/// On an exact degeneracy `α₀² = λ_{n*}` the `α₀²` mode is listed first and
/// both modes of the pair are tagged `NotDefinite`.
pub fn transversal_modes(a: f64, alpha0: f64, count_n: usize) -> Result<Vec<TransversalMode>> {
    check_a(a)?;
    if !alpha0.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha0 = {alpha0} is not finite")));
    }
    let nstar = exceptional_index(a, alpha0);
    let lambda0 = alpha0 * alpha0;
    // sort keys; the α₀² mode takes the key of its partner on a degeneracy
    let mut cands: Vec<(f64, usize)> = Vec::with_capacity(count_n + 2);
    cands.push((nstar.map_or(lambda0, |n| lambda_n(a, n)), 0));
    cands.extend((1..=count_n + 1).map(|n| (lambda_n(a, n), n)));
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    cands.truncate(count_n + 1);
    let exceptional = nstar.map_or_else(Vec::new, |n| vec![n - 1, n]);
    let alpha_bar = coupling(alpha0, 0.0).conj();
    Ok(cands
        .into_iter()
        .enumerate()
        .map(|(pos, (_, n))| {
            let lambda = if n == 0 { lambda0 } else { lambda_n(a, n) };
            let k = lambda.sqrt();
            let b = if k > 0.0 { alpha_bar / k } else { C64::new(0.0, 0.0) };
            let type_tag = if exceptional.contains(&pos) {
                TypeTag::NotDefinite
            } else if pos % 2 == 0 {
                TypeTag::PositiveType
            } else {
                TypeTag::NegativeType
            };
            TransversalMode {
                n,
                lambda: C64::new(lambda, 0.0),
                psi_coeffs: (C64::new(1.0, 0.0), b),
                indicator: indicator_closed_form(a, alpha0, n),
                type_tag,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Finite differences

/// Ghost-node discretization of the Robin operator on `intervals` uniform cells
/// (`intervals + 1` nodes including both walls), symmetrized with the
/// trapezoid weights. The result is complex symmetric and satisfies
/// `F H* F = H` exactly for the flip `F`, so it is flip-self-adjoint.
pub fn robin_fd_matrix(a: f64, alpha: C64, intervals: usize) -> Result<CsrMatrix> {
    check_a(a)?;
    if intervals < 2 {
        return Err(Error::InvalidParameter("need at least two cells".into()));
    }
    Ok(CsrMatrix::from_triplets(intervals + 1, robin_fd_triplets(a, alpha, alpha.conj(), intervals)))
}

/// Triplets of the symmetrized Robin matrix with separate top and bottom
/// coefficients: `ψ'(a) = −top·ψ(a)` and `ψ'(−a) = bottom·ψ(−a)`.
pub(crate) fn robin_fd_triplets(a: f64, top: C64, bottom: C64, intervals: usize) -> Vec<(usize, usize, C64)> {
    let n = intervals;
    let h = 2.0 * a / n as f64;
    let h2 = h * h;
    let c = |x: f64| C64::new(x, 0.0);
    let mut trip = Vec::with_capacity(3 * (n + 1));
    let edge = -std::f64::consts::SQRT_2 / h2;
    for i in 0..=n {
        let diag = if i == 0 {
            (C64::new(1.0, 0.0) + bottom * h) * (2.0 / h2)
        } else if i == n {
            (C64::new(1.0, 0.0) + top * h) * (2.0 / h2)
        } else {
            c(2.0 / h2)
        };
        trip.push((i, i, diag));
        if i < n {
            let off = if i == 0 || i + 1 == n { edge } else { -1.0 / h2 };
            trip.push((i, i + 1, c(off)));
            trip.push((i + 1, i, c(off)));
        }
    }
    trip
}

// ---------------------------------------------------------------------------
// Secular equation

/// `F(k) = (k² − α₀² − β₀²) sin(2ka) − 2β₀ k cos(2ka)`.
pub fn secular(a: f64, alpha0: f64, beta0: f64, k: C64) -> C64 {
    let c = alpha0 * alpha0 + beta0 * beta0;
    let s = k * (2.0 * a);
    (k * k - c) * s.sin() - k * (2.0 * beta0) * s.cos()
}

/// `sin(2ka)/k` and its derivative, entire in `k`.
fn sinc_pair(a: f64, k: C64) -> (C64, C64) {
    let t = 2.0 * a;
    if k.norm() < 1e-4 {
        let k2 = k * k;
        let s = t * (1.0 - k2 * (t * t / 6.0) + k2 * k2 * (t.powi(4) / 120.0));
        let ds = k * (-t.powi(3) / 3.0) + k * k2 * (t.powi(5) / 30.0);
        (s, ds)
    } else {
        let (sn, cs) = ((k * t).sin(), (k * t).cos());
        (sn / k, (k * t * cs - sn) / (k * k))
    }
}

/// `G(k) = F(k)/k`, which drops the trivial root at the origin, and `G'(k)`.
fn reduced(a: f64, alpha0: f64, beta0: f64, k: C64) -> (C64, C64) {
    let c = alpha0 * alpha0 + beta0 * beta0;
    let t = 2.0 * a;
    let (s, ds) = sinc_pair(a, k);
    let g = (k * k - c) * s - (k * t).cos() * (2.0 * beta0);
    let dg = k * 2.0 * s + (k * k - c) * ds + (k * t).sin() * (2.0 * beta0 * t);
    (g, dg)
}

/// `∂G/∂β₀`.
fn reduced_dbeta(a: f64, beta0: f64, k: C64) -> C64 {
    let (s, _) = sinc_pair(a, k);
    -s * (2.0 * beta0) - (k * (2.0 * a)).cos() * 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Result<Self> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(re) || !ok(im) {
            return Err(Error::InvalidParameter(format!("degenerate rectangle {re:?} x {im:?}")));
        }
        Ok(Self { re, im })
    }

    pub fn contains(&self, z: C64, slack: f64) -> bool {
        z.re >= self.re.0 - slack && z.re <= self.re.1 + slack && z.im >= self.im.0 - slack && z.im <= self.im.1 + slack
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re.0, self.im.0),
            C64::new(self.re.1, self.im.0),
            C64::new(self.re.1, self.im.1),
            C64::new(self.re.0, self.im.1),
        ]
    }

    fn center(&self) -> C64 {
        C64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    fn diameter(&self) -> f64 {
        (self.re.1 - self.re.0).hypot(self.im.1 - self.im.0)
    }

    fn expand(&self, d: f64) -> Self {
        Self { re: (self.re.0 - d, self.re.1 + d), im: (self.im.0 - d, self.im.1 + d) }
    }

    /// Split the longer side at relative position `f`.
    fn split(&self, f: f64) -> (Self, Self) {
        if self.re.1 - self.re.0 >= self.im.1 - self.im.0 {
            let m = self.re.0 + f * (self.re.1 - self.re.0);
            (Self { re: (self.re.0, m), im: self.im }, Self { re: (m, self.re.1), im: self.im })
        } else {
            let m = self.im.0 + f * (self.im.1 - self.im.0);
            (Self { re: self.re, im: (self.im.0, m) }, Self { re: self.re, im: (m, self.im.1) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularRoot {
    pub k: C64,
    pub lambda: C64,
    /// `|F(k)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularRoots {
    pub roots: Vec<SecularRoot>,
    /// Winding number of `F(k)/k` around the (possibly perturbed) region.
    pub winding: usize,
    pub region: Rect,
}

struct Winding<'a> {
    g: &'a (dyn Fn(C64) -> C64 + Sync),
}

impl Winding<'_> {
    /// Winding number of `g` around the rectangle boundary.
    fn count(&self, r: &Rect) -> Result<usize> {
        let corners = r.corners();
        let scale = corners.iter().map(|&z| self.g(z).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let floor = 1e-13 * scale;
        let mut total = 0.0;
        for e in 0..4 {
            let (z0, z1) = (corners[e], corners[(e + 1) % 4]);
            let pieces = 16;
            let mut za = z0;
            let mut ga = self.g(za);
            for p in 1..=pieces {
                let zb = z0 + (z1 - z0) * (p as f64 / pieces as f64);
                let gb = self.g(zb);
                total += self.segment(za, ga, zb, gb, floor, 0)?;
                za = zb;
                ga = gb;
            }
        }
        let w = total / (2.0 * PI);
        let n = w.round();
        if (w - n).abs() > 0.05 || n < 0.0 {
            return Err(Error::WindingUnstable(format!("non-integral winding {w:.4}")));
        }
        Ok(n as usize)
    }

    fn g(&self, z: C64) -> C64 {
        (self.g)(z)
    }

    fn segment(&self, za: C64, ga: C64, zb: C64, gb: C64, floor: f64, depth: usize) -> Result<f64> {
        if ga.norm() <= floor || gb.norm() <= floor || !ga.is_finite() || !gb.is_finite() {
            return Err(Error::WindingUnstable(format!("root on or near the contour at {za}")));
        }
        let d = (gb / ga).arg();
        let zm = (za + zb) * 0.5;
        let gm = self.g(zm);
        if gm.norm() <= floor {
            return Err(Error::WindingUnstable(format!("root on or near the contour at {zm}")));
        }
        let d1 = (gm / ga).arg();
        let d2 = (gb / gm).arg();
        if d.abs() < PI / 8.0 && (d1 + d2 - d).abs() < 1e-9 {
            return Ok(d);
        }
        if depth > 40 {
            return Err(Error::WindingUnstable(format!("argument not resolved near {zm}")));
        }
        Ok(self.segment(za, ga, zm, gm, floor, depth + 1)? + self.segment(zm, gm, zb, gb, floor, depth + 1)?)
    }
}

/// Newton iteration on `G` with multiplicity `m`, returning the limit if it
/// converged.
fn newton(a: f64, alpha0: f64, beta0: f64, mut z: C64, m: usize) -> Option<C64> {
    for _ in 0..100 {
        let (g, dg) = reduced(a, alpha0, beta0, z);
        if g.norm() == 0.0 {
            return Some(z);
        }
        if dg.norm() == 0.0 || !dg.is_finite() {
            return None;
        }
        let step = g / dg * m as f64;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let (g, _) = reduced(a, alpha0, beta0, z);
    (g.norm() < 1e-13 * (1.0 + z.norm_sqr())).then_some(z)
}

const SPLITS: [f64; 5] = [0.5137, 0.4711, 0.5523, 0.4269, 0.6031];

struct RootSearch {
    a: f64,
    alpha0: f64,
    beta0: f64,
    tol: f64,
}

impl RootSearch {
    fn isolate(&self, w: &Winding, r: &Rect, count: usize, depth: usize, out: &mut Vec<C64>) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let c = r.center();
        let tiny = 1e-7 * (1.0 + c.norm());
        if count == 1 || r.diameter() < tiny {
            let m = if r.diameter() < tiny { count } else { 1 };
            if let Some(z) = newton(self.a, self.alpha0, self.beta0, c, m) {
                let inside = r.contains(z, 1e-12 * (1.0 + z.norm()));
                let res = secular(self.a, self.alpha0, self.beta0, z).norm();
                if inside && res <= self.tol {
                    out.extend(std::iter::repeat(z).take(if m == 1 { 1 } else { count }));
                    return Ok(());
                }
            }
        }
        if depth > 60 || r.diameter() < 1e-13 * (1.0 + c.norm()) {
            return Err(Error::NoConvergence(format!("cannot resolve {count} root(s) near {c}")));
        }
        for f in SPLITS {
            let (r1, r2) = r.split(f);
            let (Ok(n1), Ok(n2)) = (w.count(&r1), w.count(&r2)) else { continue };
            if n1 + n2 != count {
                continue;
            }
            self.isolate(w, &r1, n1, depth + 1, out)?;
            self.isolate(w, &r2, n2, depth + 1, out)?;
            return Ok(());
        }
        Err(Error::WindingUnstable(format!("no stable subdivision of the cell around {c}")))
    }
}

/// All roots of the secular function in `region`, counted by the argument
/// principle and refined by Newton's method.
///
/// The trivial root `k = 0` of `F` is removed by working with `F(k)/k`; a
/// root at the origin is reported only if `λ = 0` is a genuine eigenvalue.
pub fn secular_roots(a: f64, alpha0: f64, beta0: f64, region: Rect, tol: f64) -> Result<SecularRoots> {
    check_a(a)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let g = move |z: C64| reduced(a, alpha0, beta0, z).0;
    let w = Winding { g: &g };
    let search = RootSearch { a, alpha0, beta0, tol };
    let mut last_err = None;
    for attempt in 0..4 {
        let r = if attempt == 0 { region } else { region.expand(1e-6 * region.diameter() * attempt as f64) };
        let count = match w.count(&r) {
            Ok(c) => c,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mut ks = Vec::with_capacity(count);
        match search.isolate(&w, &r, count, 0, &mut ks) {
            Ok(()) => {
                let mut roots: Vec<SecularRoot> = ks
                    .into_iter()
                    .map(|k| SecularRoot { k, lambda: k * k, residual: secular(a, alpha0, beta0, k).norm() })
                    .collect();
                roots.sort_by(|x, y| (x.k.re, x.k.im).partial_cmp(&(y.k.re, y.k.im)).expect("finite roots"));
                return Ok(SecularRoots { roots, winding: count, region: r });
            }
            Err(e @ Error::WindingUnstable(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::WindingUnstable("region perturbation exhausted".into())))
}

// ---------------------------------------------------------------------------
// Branch continuation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub beta0: f64,
    pub k: C64,
    pub lambda: C64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTable {
    pub seed: C64,
    pub rows: Vec<BranchRow>,
}

impl BranchTable {
    /// CSV body rows `beta0,re_k,im_k,re_lambda,im_lambda`.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.beta0, r.k.re, r.k.im, r.lambda.re, r.lambda.im);
        }
        s
    }
}

/// `max |k_i − conj(k_j)|` over the common samples of two branches.
pub fn conjugate_defect(bi: &BranchTable, bj: &BranchTable) -> f64 {
    bi.rows.iter().zip(&bj.rows).map(|(x, y)| (x.k - y.k.conj()).norm()).fold(0.0, f64::max)
}

/// Follow the roots `seeds` of the secular equation across the monotone
/// samples `beta0_samples`. Steps on which a root jumps farther than its
/// matching radius or two tracked roots come too close are bisected.
pub fn branch_curves(a: f64, alpha0: f64, beta0_samples: &[f64], seeds: &[C64], tol: f64) -> Result<Vec<BranchTable>> {
    check_a(a)?;
    if beta0_samples.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one sample and one seed".into()));
    }
    let inc = beta0_samples.windows(2).all(|w| w[1] > w[0]);
    let dec = beta0_samples.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(Error::InvalidParameter("beta0 samples must be strictly monotone".into()));
    }
    let b0 = beta0_samples[0];
    let mut ks = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let k = newton(a, alpha0, b0, s, 1)
            .filter(|k| (k - s).norm() <= 1e-3 * (1.0 + s.norm()))
            .ok_or_else(|| Error::InvalidParameter(format!("seed {s} is not a root at beta0 = {b0}")))?;
        ks.push(k);
    }
    check_distinct(&ks, 0.0)?;
    let spacing = PI / (2.0 * a);
    let mut tables: Vec<BranchTable> = seeds.iter().map(|&s| BranchTable { seed: s, rows: Vec::new() }).collect();
    let record = |ks: &[C64], beta0: f64, tables: &mut Vec<BranchTable>| -> Result<()> {
        for (t, &k) in tables.iter_mut().zip(ks) {
            let residual = secular(a, alpha0, beta0, k).norm();
            if residual > tol {
                return Err(Error::NoConvergence(format!("branch root {k} at beta0 = {beta0} has residual {residual:.2e}")));
            }
            t.rows.push(BranchRow { beta0, k, lambda: k * k, residual });
        }
        Ok(())
    };
    record(&ks, b0, &mut tables)?;
    for w in beta0_samples.windows(2) {
        ks = advance(a, alpha0, &ks, w[0], w[1], spacing, 0)?;
        record(&ks, w[1], &mut tables)?;
    }
    Ok(tables)
}

fn check_distinct(ks: &[C64], radius: f64) -> Result<()> {
    for i in 0..ks.len() {
        for j in (i + 1)..ks.len() {
            if (ks[i] - ks[j]).norm() <= radius.max(1e-12 * (1.0 + ks[i].norm())) {
                return Err(Error::BranchCollision(format!("tracked roots {} and {} coincide", ks[i], ks[j])));
            }
        }
    }
    Ok(())
}

fn advance(a: f64, alpha0: f64, ks: &[C64], from: f64, to: f64, spacing: f64, depth: usize) -> Result<Vec<C64>> {
    let radius: Vec<f64> = (0..ks.len())
        .map(|i| {
            let nearest = (0..ks.len()).filter(|&j| j != i).map(|j| (ks[i] - ks[j]).norm()).fold(f64::INFINITY, f64::min);
            0.25 * nearest.min(spacing)
        })
        .collect();
    let db = to - from;
    let step: Vec<Option<C64>> = ks
        .par_iter()
        .zip(&radius)
        .map(|(&k, &r)| {
            let (_, dg) = reduced(a, alpha0, from, k);
            let pred = if dg.norm() > 0.0 { k - reduced_dbeta(a, from, k) / dg * db } else { k };
            let pred = if (pred - k).norm() <= r { pred } else { k };
            newton(a, alpha0, to, pred, 1).filter(|z| (z - k).norm() <= r)
        })
        .collect();
    let ok = step.iter().all(Option::is_some);
    let next: Vec<C64> = step.into_iter().flatten().collect();
    if ok && check_distinct(&next, 0.5 * radius.iter().cloned().fold(f64::INFINITY, f64::min)).is_ok() {
        return Ok(next);
    }
    if depth >= 30 {
        return Err(Error::BranchCollision(format!("continuation stalled between beta0 = {from} and {to}")));
    }
    let mid = 0.5 * (from + to);
    let half = advance(a, alpha0, ks, from, mid, spacing, depth + 1)?;
    advance(a, alpha0, &half, mid, to, spacing, depth + 1)
}

// ---------------------------------------------------------------------------
// Longitudinal operator

/// Descriptor of the longitudinal potential `V₀(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum V0Spec {
    Zero,
    Constant { c: f64 },
    /// `V₀ = −depth` on `|x| < width/2`, zero outside.
    SquareWell { depth: f64, width: f64 },
    UserSet { essential: RealLineSet, points: Vec<f64> },
    /// Samples of `V₀` on a uniform grid over `[−half_length, half_length]`,
    /// endpoints included; Dirichlet conditions beyond the grid.
    Discretized { samples: Vec<f64>, half_length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalSpectrum {
    pub essential: RealLineSet,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LongitudinalSpectrum {
    /// `σ_ess ∪ {eigenvalues}`.
    pub fn spectrum(&self) -> Result<RealLineSet> {
        Ok(self.essential.union(&RealLineSet::from_points(&self.eigenvalues)?))
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bound states of the square well, ascending.
pub fn square_well_bound_states(depth: f64, width: f64) -> Result<Vec<f64>> {
    if !(depth > 0.0 && width > 0.0 && depth.is_finite() && width.is_finite()) {
        return Err(Error::InvalidParameter(format!("square well needs positive depth and width, got {depth}, {width}")));
    }
    let l = 0.5 * width;
    let z0 = l * depth.sqrt();
    let rad = move |z: f64| (z0 * z0 - z * z).max(0.0).sqrt();
    let even = move |z: f64| z * z.sin() - rad(z) * z.cos();
    let odd = move |z: f64| -z * z.cos() - rad(z) * z.sin();
    let mut zs = Vec::new();
    let mut j = 0usize;
    loop {
        let left = j as f64 * PI;
        if left >= z0 {
            break;
        }
        let mid = left + 0.5 * PI;
        zs.push(bisect(even, left, mid.min(z0)));
        if mid < z0 {
            zs.push(bisect(odd, mid, (left + PI).min(z0)));
        }
        j += 1;
    }
    // deeper states have smaller z
    let mut e: Vec<f64> = zs.into_iter().map(|z| -(rad(z) / l).powi(2)).filter(|&e| e < 0.0).collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

pub fn longitudinal_spectrum(spec: &V0Spec) -> Result<LongitudinalSpectrum> {
    let half_line = |c: f64| -> Result<RealLineSet> { Ok(RealLineSet::from_interval(Interval::at_least(c)?)) };
    match spec {
        V0Spec::Zero => Ok(LongitudinalSpectrum { essential: half_line(0.0)?, eigenvalues: Vec::new(), warnings: Vec::new() }),
        V0Spec::Constant { c } => {
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("constant potential {c} is not finite")));
            }
            Ok(LongitudinalSpectrum { essential: half_line(*c)?, eigenvalues: Vec::new(), warnings: Vec::new() })
        }
        V0Spec::SquareWell { depth, width } => Ok(LongitudinalSpectrum {
            essential: half_line(0.0)?,
            eigenvalues: square_well_bound_states(*depth, *width)?,
            warnings: Vec::new(),
        }),
        V0Spec::UserSet { essential, points } => {
            let mut pts = points.clone();
            if pts.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidParameter("user eigenvalues must be finite".into()));
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            Ok(LongitudinalSpectrum { essential: essential.clone(), eigenvalues: pts, warnings: Vec::new() })
        }
        V0Spec::Discretized { samples, half_length } => discretized_spectrum(samples, *half_length),
    }
}

fn discretized_spectrum(samples: &[f64], half_length: f64) -> Result<LongitudinalSpectrum> {
    let n = samples.len();
    if n < 8 || !(half_length > 0.0) || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "discretized potential needs at least 8 finite samples and a positive half-length".into(),
        ));
    }
    let h = 2.0 * half_length / (n - 1) as f64;
    let (left, right) = (samples[0], samples[n - 1]);
    let limit = left.min(right);
    let mut warnings = Vec::new();
    let thr = 1e-3 * limit.abs().max(1.0);
    let edge = (n / 20).max(2);
    let spread = |s: &[f64]| {
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    };
    if spread(&samples[..edge]) > thr || spread(&samples[n - edge..]) > thr {
        warnings.push(format!("potential varies by more than {thr:.1e} near the truncation boundary"));
    }
    if (left - right).abs() > thr {
        warnings.push(format!("potential limits differ at the two ends ({left} vs {right}); using the smaller"));
    }
    let inner = &samples[1..n - 1];
    let d: Vec<f64> = inner.iter().map(|v| 2.0 / (h * h) + v).collect();
    let e = vec![-1.0 / (h * h); d.len() - 1];
    let eigenvalues = tridiag::eigenvalues_below(&d, &e, limit, 1e-12 * limit.abs().max(1.0));
    Ok(LongitudinalSpectrum {
        essential: RealLineSet::from_interval(Interval::at_least(limit)?),
        eigenvalues,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Definite-type decomposition of the waveguide

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSetOptions {
    /// Upper end of the energy window; defaults to one unit past the point
    /// above which every spectral point is provably of non-definite type.
    pub window_max: Option<f64>,
    pub max_modes: usize,
}

impl Default for MSetOptions {
    fn default() -> Self {
        Self { window_max: None, max_modes: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideDecomposition {
    pub schema_version: u32,
    pub sigma_pp: RealLineSet,
    pub sigma_mm: RealLineSet,
    pub sigma_00: RealLineSet,
    pub m_plus: RealLineSet,
    pub m_minus: RealLineSet,
    pub m_zero: RealLineSet,
    /// Transversal eigenvalues `μₙ` used, with their types.
    pub mu: Vec<f64>,
    pub mu_types: Vec<TypeTag>,
    pub exceptional: Vec<usize>,
    pub window_max: f64,
    /// True when the sets are exact on the whole line (the part above
    /// `window_max` is a half-line of non-definite type).
    pub tail_exact: bool,
}

/// `σ₊₊ = M₊ \ (M₋ ∪ M₀)`, `σ₋₋ = M₋ \ (M₊ ∪ M₀)`, `σ₀₀ = M₀ ∪ (M₊ ∩ M₋)`
/// with `M_μ = σ_μμ(H^I) + σ(H^R)`.
pub fn waveguide_m_sets(
    a: f64,
    alpha0: f64,
    longitudinal: &LongitudinalSpectrum,
    opts: &MSetOptions,
) -> Result<WaveguideDecomposition> {
    check_a(a)?;
    let spec_r = longitudinal.spectrum()?;
    if spec_r.is_empty() {
        return Err(Error::InvalidParameter("longitudinal spectrum is empty".into()));
    }
    let e_min = spec_r.infimum();
    // start of the unbounded essential piece, if any
    let tail_start = longitudinal
        .essential
        .intervals()
        .last()
        .filter(|i| i.hi() == f64::INFINITY)
        .map(|i| i.lo());

    // enough modes to see the first positive and the first negative one
    let probe = transversal_modes(a, alpha0, 8)?;
    let first = |t: TypeTag| probe.iter().find(|m| m.type_tag == t).map(|m| m.lambda.re);
    let tail = match (tail_start, first(TypeTag::PositiveType), first(TypeTag::NegativeType)) {
        (Some(e), Some(p), Some(m)) => Some(p.max(m) + e),
        _ => None,
    };
    let window = match (opts.window_max, tail) {
        (Some(w), _) => w,
        (None, Some(t)) => t + 1.0,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "window_max is required when the longitudinal spectrum has no unbounded part".into(),
            ))
        }
    };
    if !window.is_finite() {
        return Err(Error::InvalidParameter(format!("window_max {window} is not finite")));
    }

    // modes up to λ > window − inf σ(H^R)
    let cutoff = window - e_min;
    let mut count = 8usize;
    let modes = loop {
        let modes = transversal_modes(a, alpha0, count)?;
        if modes.last().is_some_and(|m| m.lambda.re > cutoff) {
            break modes;
        }
        if count >= opts.max_modes {
            return Err(Error::WindowExceedsCutoff(format!(
                "window {window} needs transversal modes above {cutoff}, beyond {} modes",
                opts.max_modes
            )));
        }
        count = (2 * count).min(opts.max_modes);
    };

    let pick = |t: TypeTag| -> Vec<f64> { modes.iter().filter(|m| m.type_tag == t).map(|m| m.lambda.re).collect() };
    let clip = |s: RealLineSet| s.truncate_above(window);
    let m_plus = clip(RealLineSet::minkowski_add_points(&pick(TypeTag::PositiveType), &spec_r)?);
    let m_minus = clip(RealLineSet::minkowski_add_points(&pick(TypeTag::NegativeType), &spec_r)?);
    let m_zero = clip(RealLineSet::minkowski_add_points(&pick(TypeTag::NotDefinite), &spec_r)?);

    let sigma_pp = m_plus.subtract(&m_minus.union(&m_zero));
    let sigma_mm = m_minus.subtract(&m_plus.union(&m_zero));
    let mut sigma_00 = m_zero.union(&m_plus.intersect(&m_minus));
    let tail_exact = tail.is_some_and(|t| t <= window);
    if tail_exact {
        sigma_00 = sigma_00.union(&RealLineSet::from_interval(Interval::at_least(tail.expect("checked"))?));
    }
    Ok(WaveguideDecomposition {
        schema_version: 1,
        sigma_pp,
        sigma_mm,
        sigma_00,
        m_plus,
        m_minus,
        m_zero,
        mu: modes.iter().map(|m| m.lambda.re).collect(),
        mu_types: modes.iter().map(|m| m.type_tag).collect(),
        exceptional: exceptional_set(a, alpha0)?,
        window_max: window,
        tail_exact,
    })
}

// ---------------------------------------------------------------------------
// Figure data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCurvePoint {
    pub alpha0: f64,
    pub mu_index: usize,
    pub lambda: f64,
    #[serde(rename = "type")]
    pub type_tag: TypeTag,
}

/// Lowest `count` transversal eigenvalues with types along a grid of `α₀`.
pub fn mode_curves(a: f64, alpha0_grid: &[f64], count: usize) -> Result<Vec<ModeCurvePoint>> {
    let mut out = Vec::with_capacity(alpha0_grid.len() * count);
    for &alpha0 in alpha0_grid {
        for (i, m) in transversal_modes(a, alpha0, count.saturating_sub(1))?.into_iter().enumerate() {
            out.push(ModeCurvePoint { alpha0, mu_index: i, lambda: m.lambda.re, type_tag: m.type_tag });
        }
    }
    Ok(out)
}

/// CSV body rows `alpha0,mu_index,lambda,type`.
pub fn mode_curves_csv(points: &[ModeCurvePoint]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{:.17e},{},{:.17e},{}", p.alpha0, p.mu_index, p.lambda, p.type_tag.short());
    }
    s
}
