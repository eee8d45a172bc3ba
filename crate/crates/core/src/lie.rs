//! Numerics on the Lie algebra `so(N)` and the rotation group `SO(N)`.
//!
//! The algebra carries the inner product `<X, Y> = ½ trace(X Yᵀ)`, under which
//! the matrices `E_ij` (`+1` at `(i, j)`, `-1` at `(j, i)`, `i < j`) form an
//! orthonormal basis. Basis elements are enumerated lexicographically on
//! `(i, j)`; every coordinate vector in this crate (annealing noise, exported
//! coordinates) uses that order. Indices are zero-based.
//!
//! The exponential is computed by scaling and squaring around a diagonal
//! Padé kernel. On skew-symmetric input a diagonal Padé approximant is
//! itself orthogonal, so the only loss of orthogonality is rounding in the
//! squaring phase.
//!
//! The differential of the exponential in space (right-trivialised)
//! coordinates is
//!
//! ```text
//! dexp(Y, E) = Σ_{j≥0} ad_Y^j(E) / (j+1)!,    ad_Y(E) = YE − EY.
//! ```
//!
//! # Gradient in space coordinates
//!
//! For `u, v ∈ Rᴺ` the gradient needed by the annealer is
//! `Z = Σ_{i<j} (uᵀ dexp(Y, E_ij) v) E_ij`. Because `dexp(Y, E_ij)` is skew,
//! `uᵀ D v = <D, W>` with `W = u vᵀ − v uᵀ`, so each coefficient is
//! `<dexp(Y, E_ij), W> = <E_ij, dexp(Y, ·)*(W)>`. The trace form is
//! `ad`-invariant, hence `ad_Y* = −ad_Y` and `dexp(Y, ·)* = dexp(−Y, ·)`.
//! Expanding in the orthonormal basis gives
//!
//! ```text
//! Z = dexp(−Y, u vᵀ − v uᵀ),
//! ```
//!
//! one series evaluation instead of `N(N−1)/2`. [`grad_space_per_basis`]
//! keeps the literal sum for cross-checking.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum deviation `max|AᵀA − I|` accepted when wrapping a matrix as a
/// [`Rotation`].
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Hard cap on the number of `dexp` series terms.
pub const DEXP_MAX_TERMS: usize = 60;

/// Relative stopping threshold for the `dexp` series.
pub const DEXP_REL_TOL: f64 = 1e-15;

/// Above this bound on `‖ad_Y‖` the series loses too many digits to
/// cancellation and `dexp` switches to the block-triangular exponential.
const DEXP_SERIES_RADIUS: f64 = 8.0;

/// Above this deviation from orthogonality [`reorthogonalize`] refuses.
const REORTHO_MAX_DEFECT: f64 = 0.1;

/// Element of `so(N)`: a real `N × N` matrix with `Yᵀ = −Y`.
#[derive(Clone, PartialEq)]
pub struct SkewMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SkewMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SkewMatrix{}", self.m)
    }
}

impl SkewMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    /// Wraps `m` after checking it is square, finite and skew to within
    /// `1e-12` (relative to its largest entry). The stored matrix is the
    /// exact skew part of `m`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::domain(format!(
                "skew matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("skew matrix has non-finite entries"));
        }
        let scale = m.amax().max(1.0);
        let defect = (&m + m.transpose()).amax();
        if defect > 1e-12 * scale {
            return Err(Error::domain(format!(
                "matrix is not skew-symmetric (max |Y + Yᵀ| = {defect:e})"
            )));
        }
        Ok(Self::skew_part(&m))
    }

    /// Projection `(M − Mᵀ)/2` of any square matrix onto `so(N)`.
    pub fn skew_part(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "skew_part needs a square matrix");
        Self {
            m: (m - m.transpose()) * 0.5,
        }
    }

    /// Builds `Σ c_k E_k` from coordinates in lexicographic basis order.
    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != algebra_dim(n) {
            return Err(Error::domain(format!(
                "so({n}) has {} coordinates, got {}",
                algebra_dim(n),
                coords.len()
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        for (idx, &c) in basis_indices(n).zip(coords) {
            m[(idx.i, idx.j)] = c;
            m[(idx.j, idx.i)] = -c;
        }
        Ok(Self { m })
    }

    /// Coordinates against the orthonormal basis, lexicographic order.
    pub fn coords(&self) -> Vec<f64> {
        basis_indices(self.dim())
            .map(|idx| self.m[(idx.i, idx.j)])
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn norm_squared(&self) -> f64 {
        0.5 * self.m.norm_squared()
    }

    /// Norm induced by the half-trace inner product.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { m: &self.m * a }
    }

    /// `self + a * other`, in place.
    pub fn axpy(&mut self, a: f64, other: &SkewMatrix) {
        assert_eq!(self.dim(), other.dim(), "axpy dimension mismatch");
        self.m.zip_apply(&other.m, |s, o| *s += a * o);
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    /// Lie bracket `[self, other] = self·other − other·self`.
    pub fn bracket(&self, other: &SkewMatrix) -> SkewMatrix {
        bracket_raw(&self.m, &other.m)
    }
}

fn bracket_raw(y: &DMatrix<f64>, e: &DMatrix<f64>) -> SkewMatrix {
    let ye = y * e;
    // YE − EY = YE − (YE)ᵀ for skew Y and E.
    let m = &ye - ye.transpose();
    SkewMatrix { m }
}

impl Add for &SkewMatrix {
    type Output = SkewMatrix;
    fn add(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &SkewMatrix {
    type Output = SkewMatrix;
    fn sub(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl Neg for &SkewMatrix {
    type Output = SkewMatrix;
    fn neg(self) -> SkewMatrix {
        SkewMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &SkewMatrix {
    type Output = SkewMatrix;
    fn mul(self, a: f64) -> SkewMatrix {
        self.scale(a)
    }
}

/// Pair `(i, j)`, `i < j`, zero-based, labelling the basis element `E_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    pub i: usize,
    pub j: usize,
}

impl BasisIndex {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.i < self.j && self.j < n {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "basis index ({}, {}) invalid for so({n})",
                self.i, self.j
            )))
        }
    }
}

/// `N(N−1)/2`.
pub fn algebra_dim(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Basis indices of `so(n)` in lexicographic order
/// `(0,1), (0,2), …, (n−2, n−1)`.
pub fn basis_indices(n: usize) -> impl Iterator<Item = BasisIndex> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| BasisIndex::new(i, j)))
}

pub fn basis_element(n: usize, idx: BasisIndex) -> Result<SkewMatrix> {
    idx.validate(n)?;
    let mut m = DMatrix::zeros(n, n);
    m[(idx.i, idx.j)] = 1.0;
    m[(idx.j, idx.i)] = -1.0;
    Ok(SkewMatrix { m })
}

/// `<X, Y> = ½ trace(X Yᵀ)`.
pub fn inner(x: &SkewMatrix, y: &SkewMatrix) -> Result<f64> {
    check_same_dim(x.dim(), y.dim())?;
    Ok(0.5 * x.m.dot(&y.m))
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::domain(format!("dimension mismatch: {a} vs {b}")))
    }
}

/// Connected component of `O(N)`, i.e. the sign of the determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn of_determinant(det: f64) -> Self {
        if det < 0.0 {
            Orientation::Negative
        } else {
            Orientation::Positive
        }
    }
}

/// Orthogonal matrix together with its orientation.
#[derive(Clone, PartialEq)]
pub struct Rotation {
    m: DMatrix<f64>,
    orientation: Orientation,
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation({:?}){}", self.orientation, self.m)
    }
}

impl Rotation {
    /// Validates orthogonality to [`ORTHOGONALITY_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::domain(format!(
                "rotation must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("rotation has non-finite entries"));
        }
        let defect = orthogonality_defect(&m);
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::domain(format!(
                "matrix is not orthogonal (max |AᵀA − I| = {defect:e})"
            )));
        }
        let orientation = Orientation::of_determinant(m.determinant());
        Ok(Self { m, orientation })
    }

    pub(crate) fn from_parts_unchecked(m: DMatrix<f64>, orientation: Orientation) -> Self {
        Self { m, orientation }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
            orientation: Orientation::Positive,
        }
    }

    /// `−Id_n`; lies in `SO(n)` for even `n`.
    pub fn minus_identity(n: usize) -> Self {
        let orientation = if n.is_multiple_of(2) {
            Orientation::Positive
        } else {
            Orientation::Negative
        };
        Self {
            m: -DMatrix::identity(n, n),
            orientation,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn transpose(&self) -> Rotation {
        Rotation {
            m: self.m.transpose(),
            orientation: self.orientation,
        }
    }

    /// `max |AᵀA − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.m)
    }

    /// Group product `self · other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let orientation = if self.orientation == other.orientation {
            Orientation::Positive
        } else {
            Orientation::Negative
        };
        Rotation {
            m: &self.m * &other.m,
            orientation,
        }
    }

    /// `out = A x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length must match rotation dimension");
        assert_eq!(out.len(), n, "output length must match rotation dimension");
        out.iter_mut().for_each(|o| *o = 0.0);
        for (col, &xj) in self.m.column_iter().zip(x) {
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * xj;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }
}

fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut g = m.transpose() * m;
    for i in 0..n {
        g[(i, i)] -= 1.0;
    }
    g.amax()
}

// Padé [9/9] coefficients for exp and the 1-norm bound under which the
// approximant is accurate to double precision (Higham 2005).
const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE9_THETA: f64 = 0.950_417_899_616_293;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential of an arbitrary square matrix by scaling and squaring.
pub(crate) fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("exponential of a non-finite matrix"));
    }
    let nrm = norm1(a);
    let squarings = if nrm > PADE9_THETA {
        (nrm / PADE9_THETA).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let a8 = &a6 * &a2;
    let b = &PADE9;
    let u_inner = &a8 * b[9] + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a8 * b[8] + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::numeric("singular Padé denominator in matrix exponential"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// `exp(Y) ∈ SO(N)`.
pub fn exp(y: &SkewMatrix) -> Result<Rotation> {
    if !y.is_finite() {
        return Err(Error::domain("exponential of a non-finite skew matrix"));
    }
    if y.dim() == 3 {
        return rodrigues_exp(y);
    }
    exp_general(y)
}

/// `exp(Y)` by scaling and squaring for every dimension, without the
/// `so(3)` closed-form shortcut.
pub fn exp_general(y: &SkewMatrix) -> Result<Rotation> {
    if !y.is_finite() {
        return Err(Error::domain("exponential of a non-finite skew matrix"));
    }
    Ok(Rotation::from_parts_unchecked(
        expm(&y.m)?,
        Orientation::Positive,
    ))
}

/// Closed-form exponential on `so(3)`:
/// `exp(X) = I + (sin σ/σ) X + ((1 − cos σ)/σ²) X²`, `σ = ‖X‖`.
pub fn rodrigues_exp(x: &SkewMatrix) -> Result<Rotation> {
    if x.dim() != 3 {
        return Err(Error::domain(format!(
            "Rodrigues formula needs so(3), got so({})",
            x.dim()
        )));
    }
    if !x.is_finite() {
        return Err(Error::domain("exponential of a non-finite skew matrix"));
    }
    let sigma = x.norm();
    let (c1, c2) = if sigma < 1e-4 {
        let s2 = sigma * sigma;
        (
            1.0 - s2 / 6.0 * (1.0 - s2 / 20.0),
            0.5 - s2 / 24.0 * (1.0 - s2 / 30.0),
        )
    } else {
        let half = (0.5 * sigma).sin() / sigma;
        (sigma.sin() / sigma, 2.0 * half * half)
    };
    let xm = &x.m;
    let m = DMatrix::identity(3, 3) + xm * c1 + (xm * xm) * c2;
    Ok(Rotation::from_parts_unchecked(m, Orientation::Positive))
}

/// Differential of the exponential in space coordinates, applied to `e`.
///
/// Sums the `ad_Y` series until a term falls below
/// `DEXP_REL_TOL · ‖E‖` (at most [`DEXP_MAX_TERMS`] terms). For large `Y`,
/// where the series would cancel catastrophically, the same operator is
/// read off the block-triangular exponential instead.
pub fn dexp(y: &SkewMatrix, e: &SkewMatrix) -> Result<SkewMatrix> {
    check_same_dim(y.dim(), e.dim())?;
    if !y.is_finite() || !e.is_finite() {
        return Err(Error::domain("dexp of non-finite input"));
    }
    // ‖ad_Y‖₂ ≤ 2‖Y‖₂ ≤ 2‖Y‖_F
    let ad_bound = 2.0 * y.m.norm();
    if ad_bound <= DEXP_SERIES_RADIUS {
        Ok(dexp_series(y, e))
    } else {
        dexp_block(y, e)
    }
}

/// Truncated `Σ ad_Y^j(E)/(j+1)!`.
pub fn dexp_series(y: &SkewMatrix, e: &SkewMatrix) -> SkewMatrix {
    let e_norm = e.norm();
    if e_norm == 0.0 {
        return SkewMatrix::zeros(e.dim());
    }
    let mut sum = e.clone();
    let mut term = e.clone();
    for j in 1..=DEXP_MAX_TERMS {
        term = bracket_raw(&y.m, &term.m);
        term.m /= (j + 1) as f64;
        sum.m += &term.m;
        if term.norm() < DEXP_REL_TOL * e_norm {
            break;
        }
    }
    SkewMatrix::skew_part(&sum.m)
}

/// `dexp` through `exp([[Y, E], [0, Y]]) = [[e^Y, D], [0, e^Y]]`,
/// `dexp(Y, E) = D e^{−Y}`.
pub fn dexp_block(y: &SkewMatrix, e: &SkewMatrix) -> Result<SkewMatrix> {
    check_same_dim(y.dim(), e.dim())?;
    let n = y.dim();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&y.m);
    big.view_mut((0, n), (n, n)).copy_from(&e.m);
    big.view_mut((n, n), (n, n)).copy_from(&y.m);
    let ex = expm(&big)?;
    let top_left = ex.view((0, 0), (n, n)).into_owned();
    let d = ex.view((0, n), (n, n)).into_owned();
    Ok(SkewMatrix::skew_part(&(d * top_left.transpose())))
}

fn check_grad_inputs(u: &[f64], v: &[f64], y: &SkewMatrix) -> Result<()> {
    let n = y.dim();
    if u.len() != n || v.len() != n {
        return Err(Error::domain(format!(
            "gradient vectors must have length {n}, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

/// `Σ_{i<j} (uᵀ dexp(Y, E_ij) v) E_ij`, evaluated as `dexp(−Y, u vᵀ − v uᵀ)`.
pub fn grad_space(u: &[f64], v: &[f64], y: &SkewMatrix) -> Result<SkewMatrix> {
    check_grad_inputs(u, v, y)?;
    let n = y.dim();
    let w = DMatrix::from_fn(n, n, |a, b| u[a] * v[b] - v[a] * u[b]);
    dexp(&-y, &SkewMatrix { m: w })
}

/// Literal per-basis form of [`grad_space`]; `N(N−1)/2` `dexp` evaluations.
pub fn grad_space_per_basis(u: &[f64], v: &[f64], y: &SkewMatrix) -> Result<SkewMatrix> {
    check_grad_inputs(u, v, y)?;
    let n = y.dim();
    let mut z = DMatrix::zeros(n, n);
    for idx in basis_indices(n) {
        let d = dexp(y, &basis_element(n, idx)?)?;
        let mut c = 0.0;
        for (a, ua) in u.iter().enumerate() {
            for (b, vb) in v.iter().enumerate() {
                c += ua * d.m[(a, b)] * vb;
            }
        }
        z[(idx.i, idx.j)] = c;
        z[(idx.j, idx.i)] = -c;
    }
    Ok(SkewMatrix { m: z })
}

/// Principal logarithm of a rotation, `‖Y‖ ≤ π √⌊N/2⌋`.
///
/// Reduces `A = Q T Qᵀ` to real Schur form; for an orthogonal matrix `T` is
/// block diagonal with planar rotation blocks and `±1` entries. Each block
/// contributes its angle in `[−π, π]`, pairs of `−1` eigenvalues contribute a
/// half turn, and `Y = Q L Qᵀ`.
pub fn log_rotation(a: &Rotation) -> Result<SkewMatrix> {
    if a.orientation() == Orientation::Negative {
        return Err(Error::domain(
            "logarithm undefined for a rotation with determinant −1",
        ));
    }
    let n = a.dim();
    if n == 1 {
        return Ok(SkewMatrix::zeros(1));
    }
    let schur = Schur::try_new(a.m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("real Schur decomposition did not converge"))?;
    let (q, t) = schur.unpack();

    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut negatives = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-13 {
            let s = 0.5 * (t[(i + 1, i)] - t[(i, i + 1)]);
            let c = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let theta = s.atan2(c);
            l[(i + 1, i)] = theta;
            l[(i, i + 1)] = -theta;
            i += 2;
        } else {
            if t[(i, i)] < 0.0 {
                negatives.push(i);
            }
            i += 1;
        }
    }
    if negatives.len() % 2 != 0 {
        return Err(Error::numeric(
            "odd number of −1 eigenvalues in a proper rotation",
        ));
    }
    for pair in negatives.chunks(2) {
        let (p, r) = (pair[0], pair[1]);
        l[(r, p)] = PI;
        l[(p, r)] = -PI;
    }
    let y = SkewMatrix::skew_part(&(&q * l * q.transpose()));

    let back = exp(&y)?;
    let err = (back.matrix() - a.matrix()).amax();
    if err > 1e-8 {
        return Err(Error::numeric(format!(
            "rotation logarithm failed to reproduce its input (error {err:e})"
        )));
    }
    Ok(y)
}

/// Nearest orthogonal matrix (polar factor) via Newton–Schulz iteration
/// `X ← X (3I − XᵀX)/2`; orientation is unchanged.
pub fn reorthogonalize(a: &Rotation) -> Result<Rotation> {
    let defect = a.orthogonality_defect();
    if !defect.is_finite() || defect > REORTHO_MAX_DEFECT {
        return Err(Error::numeric(format!(
            "matrix too far from orthogonal to project (defect {defect:e})"
        )));
    }
    let n = a.dim();
    let three = DMatrix::<f64>::identity(n, n) * 3.0;
    let mut x = a.m.clone();
    for _ in 0..30 {
        let g = x.transpose() * &x;
        let mut d = g.clone();
        for k in 0..n {
            d[(k, k)] -= 1.0;
        }
        if d.amax() <= 4.0 * f64::EPSILON {
            break;
        }
        x = (&x * (&three - g)) * 0.5;
    }
    Ok(Rotation::from_parts_unchecked(x, a.orientation))
}
