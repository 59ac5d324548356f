//! Gaussian kernels: affine-linear maps with additive Gaussian noise.
//!
//! An object is a list of factor dimensions; a kernel dom → cod is
//! x ↦ A·x + b + ξ with ξ ~ N(0, S), S positive semidefinite. Composition
//! pushes the affine map and noise through; conditioning is a Schur
//! complement with a pseudoinverse, so degenerate (deterministic)
//! covariances are handled exactly rather than rejected.
//!
//! Conditional independence is covariance-structural:
//! Σ_XY = Σ_XZ · Σ_ZZ⁺ · Σ_ZY. The kernel-level test extends the joint with
//! a standard-normal input block and asks X ⟂ (Y ∪ input) | Z there, which
//! is precisely the existence of a mediator Z → X not reading the input.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::backend::Backend;

/// Symmetry slack allowed in supplied covariance matrices.
pub const SYM_TOL: f64 = 1e-12;
/// Eigenvalues of a covariance may dip this far below zero.
pub const PSD_TOL: f64 = 1e-10;
/// Singular values below this are treated as zero when pseudo-inverting.
pub const PINV_EPS: f64 = 1e-10;

/// A tensor product of finite-dimensional factors, by dimension.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GaussObject {
    pub dims: Vec<usize>,
}

impl GaussObject {
    pub fn unit() -> Self {
        GaussObject::default()
    }

    pub fn of(dims: impl IntoIterator<Item = usize>) -> Self {
        GaussObject { dims: dims.into_iter().collect() }
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Starting coordinate of each factor.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.dims.len());
        let mut acc = 0;
        for &d in &self.dims {
            off.push(acc);
            acc += d;
        }
        off
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GaussError {
    #[error("matrix A is {ar}×{ac} but cod×dom is {cr}×{cc}")]
    BadShape { ar: usize, ac: usize, cr: usize, cc: usize },
    #[error("offset vector has length {found}, expected {expected}")]
    BadOffset { expected: usize, found: usize },
    #[error("covariance is {r}×{c}, expected {n}×{n}")]
    BadCovShape { r: usize, c: usize, n: usize },
    #[error("covariance is not symmetric: |S[{i},{j}] - S[{j},{i}]| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("covariance is not positive semidefinite: eigenvalue {0}")]
    NotPsd(f64),
}

/// A Gaussian kernel x ↦ A·x + b + ξ, ξ ~ N(0, S).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussKernel {
    dom: GaussObject,
    cod: GaussObject,
    a: DMatrix<f64>,
    b: DVector<f64>,
    s: DMatrix<f64>,
}

impl GaussKernel {
    pub fn new(
        dom: GaussObject,
        cod: GaussObject,
        a: DMatrix<f64>,
        b: DVector<f64>,
        s: DMatrix<f64>,
    ) -> Result<Self, GaussError> {
        let (d, c) = (dom.dim(), cod.dim());
        if a.nrows() != c || a.ncols() != d {
            return Err(GaussError::BadShape { ar: a.nrows(), ac: a.ncols(), cr: c, cc: d });
        }
        if b.len() != c {
            return Err(GaussError::BadOffset { expected: c, found: b.len() });
        }
        if s.nrows() != c || s.ncols() != c {
            return Err(GaussError::BadCovShape { r: s.nrows(), c: s.ncols(), n: c });
        }
        for i in 0..c {
            for j in i + 1..c {
                let diff = (s[(i, j)] - s[(j, i)]).abs();
                if diff > SYM_TOL {
                    return Err(GaussError::NotSymmetric { i, j, diff });
                }
            }
        }
        if c > 0 {
            let eig = s.clone().symmetric_eigen();
            for &l in eig.eigenvalues.iter() {
                if l < -PSD_TOL {
                    return Err(GaussError::NotPsd(l));
                }
            }
        }
        Ok(GaussKernel { dom, cod, a, b, s })
    }

    fn raw(dom: GaussObject, cod: GaussObject, a: DMatrix<f64>, b: DVector<f64>, s: DMatrix<f64>) -> Self {
        debug_assert_eq!(a.nrows(), cod.dim());
        debug_assert_eq!(a.ncols(), dom.dim());
        GaussKernel { dom, cod, a, b, s }
    }

    /// A Gaussian state N(mean, cov) as a kernel from the unit object.
    pub fn state(cod: GaussObject, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, GaussError> {
        let c = cod.dim();
        GaussKernel::new(GaussObject::unit(), cod, DMatrix::zeros(c, 0), mean, cov)
    }

    pub fn dom(&self) -> &GaussObject {
        &self.dom
    }

    pub fn cod(&self) -> &GaussObject {
        &self.cod
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.s
    }
}

fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    m.clone()
        .svd(true, true)
        .pseudo_inverse(PINV_EPS)
        .expect("svd computed with u and v")
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Gather the given rows of a matrix.
fn gather_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn gather_vec(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| v[rows[i]])
}

fn gather_block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Coordinate rows of the listed factors.
fn factor_rows(obj: &GaussObject, idx: &[usize]) -> Vec<usize> {
    let off = obj.offsets();
    idx.iter()
        .flat_map(|&i| (off[i]..off[i] + obj.dims[i]).collect::<Vec<_>>())
        .collect()
}

/// The Gaussian backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct Gauss;

impl Gauss {
    /// Conditional of Y given X for a jointly Gaussian (X, Y)-row split:
    /// returns (K, S') with K = S_YX · S_XX⁺ and S' = S_YY − K · S_XY.
    fn schur(
        s: &DMatrix<f64>,
        x_rows: &[usize],
        y_rows: &[usize],
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let s_xx = gather_block(s, x_rows, x_rows);
        let s_yx = gather_block(s, y_rows, x_rows);
        let s_xy = gather_block(s, x_rows, y_rows);
        let s_yy = gather_block(s, y_rows, y_rows);
        let k = &s_yx * pinv(&s_xx);
        let cond = symmetrize(s_yy - &k * s_xy);
        (k, cond)
    }
}

impl Backend for Gauss {
    type Obj = GaussObject;
    type Ker = GaussKernel;

    fn unit_obj(&self) -> GaussObject {
        GaussObject::unit()
    }

    fn tensor_objs(&self, a: &GaussObject, b: &GaussObject) -> GaussObject {
        GaussObject::of(a.dims.iter().chain(&b.dims).copied())
    }

    fn factor_count(&self, a: &GaussObject) -> usize {
        a.dims.len()
    }

    fn factor(&self, a: &GaussObject, i: usize) -> GaussObject {
        GaussObject::of([a.dims[i]])
    }

    fn dom(&self, f: &GaussKernel) -> GaussObject {
        f.dom.clone()
    }

    fn cod(&self, f: &GaussKernel) -> GaussObject {
        f.cod.clone()
    }

    fn identity(&self, a: &GaussObject) -> GaussKernel {
        let n = a.dim();
        GaussKernel::raw(
            a.clone(),
            a.clone(),
            DMatrix::identity(n, n),
            DVector::zeros(n),
            DMatrix::zeros(n, n),
        )
    }

    fn tensor(&self, f: &GaussKernel, g: &GaussKernel) -> GaussKernel {
        let dom = self.tensor_objs(&f.dom, &g.dom);
        let cod = self.tensor_objs(&f.cod, &g.cod);
        let (fc, fd) = (f.cod.dim(), f.dom.dim());
        let (gc, gd) = (g.cod.dim(), g.dom.dim());
        let mut a = DMatrix::zeros(fc + gc, fd + gd);
        a.view_mut((0, 0), (fc, fd)).copy_from(&f.a);
        a.view_mut((fc, fd), (gc, gd)).copy_from(&g.a);
        let mut b = DVector::zeros(fc + gc);
        b.rows_mut(0, fc).copy_from(&f.b);
        b.rows_mut(fc, gc).copy_from(&g.b);
        let mut s = DMatrix::zeros(fc + gc, fc + gc);
        s.view_mut((0, 0), (fc, fc)).copy_from(&f.s);
        s.view_mut((fc, fc), (gc, gc)).copy_from(&g.s);
        GaussKernel::raw(dom, cod, a, b, s)
    }

    fn apply_prefix(&self, f: &GaussKernel, g: &GaussKernel) -> GaussKernel {
        let k = g.dom.dims.len();
        assert!(
            k <= f.cod.dims.len() && f.cod.dims[..k] == g.dom.dims[..],
            "apply_prefix: domain of g must be a prefix of cod(f)"
        );
        let p = g.dom.dim();
        let r = f.cod.dim() - p;
        let q = g.cod.dim();
        let cod = GaussObject::of(
            g.cod.dims.iter().chain(f.cod.dims[k..].iter()).copied(),
        );
        let a_p = f.a.rows(0, p).into_owned();
        let a_r = f.a.rows(p, r).into_owned();
        let b_p = f.b.rows(0, p).into_owned();
        let b_r = f.b.rows(p, r).into_owned();
        let s_pp = f.s.view((0, 0), (p, p)).into_owned();
        let s_pr = f.s.view((0, p), (p, r)).into_owned();
        let s_rp = f.s.view((p, 0), (r, p)).into_owned();
        let s_rr = f.s.view((p, p), (r, r)).into_owned();

        let mut a = DMatrix::zeros(q + r, f.dom.dim());
        a.rows_mut(0, q).copy_from(&(&g.a * &a_p));
        a.rows_mut(q, r).copy_from(&a_r);
        let mut b = DVector::zeros(q + r);
        b.rows_mut(0, q).copy_from(&(&g.a * &b_p + &g.b));
        b.rows_mut(q, r).copy_from(&b_r);
        let mut s = DMatrix::zeros(q + r, q + r);
        s.view_mut((0, 0), (q, q)).copy_from(&(&g.a * &s_pp * g.a.transpose() + &g.s));
        s.view_mut((0, q), (q, r)).copy_from(&(&g.a * &s_pr));
        s.view_mut((q, 0), (r, q)).copy_from(&(&s_rp * g.a.transpose()));
        s.view_mut((q, q), (r, r)).copy_from(&s_rr);
        GaussKernel::raw(f.dom.clone(), cod, a, b, symmetrize(s))
    }

    fn reindex_codomain(&self, f: &GaussKernel, map: &[usize]) -> GaussKernel {
        let cod = GaussObject::of(map.iter().map(|&m| f.cod.dims[m]));
        let rows = factor_rows(&f.cod, map);
        GaussKernel::raw(
            f.dom.clone(),
            cod,
            gather_rows(&f.a, &rows),
            gather_vec(&f.b, &rows),
            gather_block(&f.s, &rows, &rows),
        )
    }

    fn conditional(&self, f: &GaussKernel, x_idx: &[usize]) -> GaussKernel {
        let n = f.cod.dims.len();
        let in_x: Vec<bool> = {
            let mut v = vec![false; n];
            for &i in x_idx {
                v[i] = true;
            }
            v
        };
        let y_idx: Vec<usize> = (0..n).filter(|i| !in_x[*i]).collect();
        let x_rows = factor_rows(&f.cod, x_idx);
        let y_rows = factor_rows(&f.cod, &y_idx);
        let x_obj = GaussObject::of(x_idx.iter().map(|&i| f.cod.dims[i]));
        let y_obj = GaussObject::of(y_idx.iter().map(|&i| f.cod.dims[i]));
        let new_dom = self.tensor_objs(&x_obj, &f.dom);

        let (k, cond) = Gauss::schur(&f.s, &x_rows, &y_rows);
        let a_x = gather_rows(&f.a, &x_rows);
        let a_y = gather_rows(&f.a, &y_rows);
        let b_x = gather_vec(&f.b, &x_rows);
        let b_y = gather_vec(&f.b, &y_rows);

        let nd = f.dom.dim();
        let nx = x_rows.len();
        let mut a = DMatrix::zeros(y_rows.len(), nx + nd);
        a.view_mut((0, 0), (y_rows.len(), nx)).copy_from(&k);
        a.view_mut((0, nx), (y_rows.len(), nd)).copy_from(&(a_y - &k * a_x));
        let b = b_y - &k * b_x;
        GaussKernel::raw(new_dom, y_obj, a, b, cond)
    }

    fn max_abs_diff(&self, f: &GaussKernel, g: &GaussKernel) -> f64 {
        if f.dom != g.dom || f.cod != g.cod {
            return f64::INFINITY;
        }
        let d1 = (&f.a - &g.a).abs().max();
        let d2 = (&f.b - &g.b).abs().max();
        let d3 = (&f.s - &g.s).abs().max();
        d1.max(d2).max(d3)
    }

    fn ci_state(&self, f: &GaussKernel, x: &[usize], y: &[usize], z: &[usize], tol: f64) -> bool {
        assert_eq!(f.dom.dim(), 0, "ci_state needs a state");
        assert_eq!(x.len() + y.len() + z.len(), f.cod.dims.len());
        let xr = factor_rows(&f.cod, x);
        let yr = factor_rows(&f.cod, y);
        let zr = factor_rows(&f.cod, z);
        cov_ci(&f.s, &xr, &yr, &zr, tol)
    }

    fn ci_kernel(&self, f: &GaussKernel, x: &[usize], y: &[usize], z: &[usize], tol: f64) -> bool {
        let (joint, xr, yr, zr) = extended_joint(f, x, y, z);
        cov_ci(&joint, &xr, &yr, &zr, tol)
    }

    fn ci_kernel_witness(
        &self,
        f: &GaussKernel,
        x: &[usize],
        y: &[usize],
        z: &[usize],
        tol: f64,
    ) -> Option<GaussKernel> {
        if !self.ci_kernel(f, x, y, z, tol) {
            return None;
        }
        // Mediator: the conditional law of X given Z inside the codomain.
        let xr = factor_rows(&f.cod, x);
        let zr = factor_rows(&f.cod, z);
        let (k, cond) = Gauss::schur(&f.s, &zr, &xr);
        let b = gather_vec(&f.b, &xr) - &k * gather_vec(&f.b, &zr);
        let z_obj = GaussObject::of(z.iter().map(|&i| f.cod.dims[i]));
        let x_obj = GaussObject::of(x.iter().map(|&i| f.cod.dims[i]));
        Some(GaussKernel::raw(z_obj, x_obj, k, b, cond))
    }
}

/// Covariance of (cod, dom) when the input is fed a standard normal:
/// [[A·Aᵀ + S, A], [Aᵀ, I]], together with the coordinate rows of X, of
/// Y ∪ input, and of Z.
fn extended_joint(
    f: &GaussKernel,
    x: &[usize],
    y: &[usize],
    z: &[usize],
) -> (DMatrix<f64>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let c = f.cod.dim();
    let d = f.dom.dim();
    let mut joint = DMatrix::zeros(c + d, c + d);
    joint
        .view_mut((0, 0), (c, c))
        .copy_from(&(&f.a * f.a.transpose() + &f.s));
    joint.view_mut((0, c), (c, d)).copy_from(&f.a);
    joint.view_mut((c, 0), (d, c)).copy_from(&f.a.transpose());
    joint.view_mut((c, c), (d, d)).copy_from(&DMatrix::identity(d, d));
    let xr = factor_rows(&f.cod, x);
    let mut yr = factor_rows(&f.cod, y);
    yr.extend(c..c + d);
    let zr = factor_rows(&f.cod, z);
    (joint, xr, yr, zr)
}

/// Σ_XY = Σ_XZ · Σ_ZZ⁺ · Σ_ZY within tol, entrywise.
fn cov_ci(s: &DMatrix<f64>, xr: &[usize], yr: &[usize], zr: &[usize], tol: f64) -> bool {
    if xr.is_empty() || yr.is_empty() {
        return true;
    }
    let s_xy = gather_block(s, xr, yr);
    let s_xz = gather_block(s, xr, zr);
    let s_zz = gather_block(s, zr, zr);
    let s_zy = gather_block(s, zr, yr);
    let predicted = &s_xz * pinv(&s_zz) * s_zy;
    (&s_xy - predicted).abs().max() <= tol
}
