//! Finite-support stochastic kernels.
//!
//! An object is a tensor product of named finite factors; a kernel is a
//! stochastic table: one probability row over the codomain per domain
//! point. Joint indices are mixed-radix with the *last* factor varying
//! fastest, so a factor-prefix occupies the high-order digits — which is
//! what lets [`FinStoch::apply_prefix`] split a codomain index into
//! (prefix, rest) with one divmod.

use std::fmt;

use thiserror::Error;

use crate::backend::Backend;
use crate::hypergraph::{name, Name};

/// How close to 1 each row of a stochastic table must sum on construction.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// A named finite factor: a variable together with its value labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinFactor {
    pub name: Name,
    pub labels: Vec<Name>,
}

impl FinFactor {
    pub fn new(
        n: impl AsRef<str>,
        labels: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Self {
        FinFactor { name: name(n), labels: labels.into_iter().map(name).collect() }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// A tensor product of factors. The empty product is the unit object.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FinObject {
    pub factors: Vec<FinFactor>,
}

impl FinObject {
    pub fn unit() -> Self {
        FinObject::default()
    }

    pub fn of(factors: impl IntoIterator<Item = FinFactor>) -> Self {
        FinObject { factors: factors.into_iter().collect() }
    }

    pub fn size(&self) -> usize {
        self.factors.iter().map(|f| f.size()).product()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.size()).collect()
    }
}

impl fmt::Display for FinObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<&str> = self.factors.iter().map(|x| &*x.name).collect();
        write!(f, "{}", parts.join(" ⊗ "))
    }
}

/// Strides for mixed-radix indexing, last factor fastest.
fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * sizes[i + 1];
    }
    s
}

fn decompose(mut idx: usize, sizes: &[usize], digits: &mut [usize]) {
    for i in (0..sizes.len()).rev() {
        digits[i] = idx % sizes[i];
        idx /= sizes[i];
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum KernelError {
    #[error("table has {found} entries but {dom} × {cod} = {expected} are needed")]
    BadTableSize { dom: usize, cod: usize, expected: usize, found: usize },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("probability table contains a negative or non-finite entry at index {0}")]
    BadEntry(usize),
}

/// A stochastic kernel dom → cod: `table[d * cod.size() + c]` is the
/// probability of codomain point c given domain point d. Every row sums to
/// 1 within [`ROW_SUM_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct StochKernel {
    dom: FinObject,
    cod: FinObject,
    table: Vec<f64>,
}

impl StochKernel {
    pub fn new(dom: FinObject, cod: FinObject, table: Vec<f64>) -> Result<Self, KernelError> {
        let (nd, nc) = (dom.size(), cod.size());
        if table.len() != nd * nc {
            return Err(KernelError::BadTableSize {
                dom: nd,
                cod: nc,
                expected: nd * nc,
                found: table.len(),
            });
        }
        for (i, &v) in table.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(KernelError::BadEntry(i));
            }
        }
        for row in 0..nd {
            let sum: f64 = table[row * nc..(row + 1) * nc].iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(KernelError::NotStochastic { row, sum });
            }
        }
        Ok(StochKernel { dom, cod, table })
    }

    /// Internal constructor for tables produced by operations that preserve
    /// stochasticity; skips the row-sum sweep.
    fn raw(dom: FinObject, cod: FinObject, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), dom.size() * cod.size());
        StochKernel { dom, cod, table }
    }

    /// A state (distribution) as a kernel from the unit object.
    pub fn state(cod: FinObject, probs: Vec<f64>) -> Result<Self, KernelError> {
        StochKernel::new(FinObject::unit(), cod, probs)
    }

    /// The deterministic kernel sending domain point d to codomain point
    /// `point(d)`.
    pub fn deterministic(
        dom: FinObject,
        cod: FinObject,
        point: impl Fn(usize) -> usize,
    ) -> Self {
        let (nd, nc) = (dom.size(), cod.size());
        let mut table = vec![0.0; nd * nc];
        for d in 0..nd {
            let c = point(d);
            assert!(c < nc, "deterministic target out of range");
            table[d * nc + c] = 1.0;
        }
        StochKernel::raw(dom, cod, table)
    }

    /// The uniform state on an object.
    pub fn uniform(cod: FinObject) -> Self {
        let n = cod.size();
        assert!(n > 0, "uniform state needs a nonempty codomain");
        StochKernel::raw(FinObject::unit(), cod, vec![1.0 / n as f64; n])
    }

    pub fn dom(&self) -> &FinObject {
        &self.dom
    }

    pub fn cod(&self) -> &FinObject {
        &self.cod
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Probability of codomain point `c` given domain point `d`.
    pub fn prob(&self, d: usize, c: usize) -> f64 {
        self.table[d * self.cod.size() + c]
    }
}

/// The finite-stochastic backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct FinStoch;

impl Backend for FinStoch {
    type Obj = FinObject;
    type Ker = StochKernel;

    fn unit_obj(&self) -> FinObject {
        FinObject::unit()
    }

    fn tensor_objs(&self, a: &FinObject, b: &FinObject) -> FinObject {
        FinObject::of(a.factors.iter().chain(&b.factors).cloned())
    }

    fn factor_count(&self, a: &FinObject) -> usize {
        a.factors.len()
    }

    fn factor(&self, a: &FinObject, i: usize) -> FinObject {
        FinObject::of([a.factors[i].clone()])
    }

    fn dom(&self, f: &StochKernel) -> FinObject {
        f.dom.clone()
    }

    fn cod(&self, f: &StochKernel) -> FinObject {
        f.cod.clone()
    }

    fn identity(&self, a: &FinObject) -> StochKernel {
        StochKernel::deterministic(a.clone(), a.clone(), |d| d)
    }

    fn tensor(&self, f: &StochKernel, g: &StochKernel) -> StochKernel {
        let dom = self.tensor_objs(&f.dom, &g.dom);
        let cod = self.tensor_objs(&f.cod, &g.cod);
        let (fd, fc) = (f.dom.size(), f.cod.size());
        let (gd, gc) = (g.dom.size(), g.cod.size());
        let mut table = vec![0.0; fd * gd * fc * gc];
        let ncod = fc * gc;
        for a in 0..fd {
            for b in 0..gd {
                let row = (a * gd + b) * ncod;
                for x in 0..fc {
                    let pf = f.table[a * fc + x];
                    if pf == 0.0 {
                        continue;
                    }
                    for y in 0..gc {
                        table[row + x * gc + y] = pf * g.table[b * gc + y];
                    }
                }
            }
        }
        StochKernel::raw(dom, cod, table)
    }

    fn apply_prefix(&self, f: &StochKernel, g: &StochKernel) -> StochKernel {
        let k = g.dom.factors.len();
        assert!(
            k <= f.cod.factors.len() && f.cod.factors[..k] == g.dom.factors[..],
            "apply_prefix: domain of g must be a prefix of cod(f)"
        );
        let rest = FinObject::of(f.cod.factors[k..].iter().cloned());
        let (np, nr, nq) = (g.dom.size(), rest.size(), g.cod.size());
        let nd = f.dom.size();
        let cod = self.tensor_objs(&g.cod, &rest);
        let mut table = vec![0.0; nd * nq * nr];
        for a in 0..nd {
            let frow = a * (np * nr);
            let orow = a * (nq * nr);
            for p in 0..np {
                let grow = p * nq;
                for r in 0..nr {
                    let v = f.table[frow + p * nr + r];
                    if v == 0.0 {
                        continue;
                    }
                    for q in 0..nq {
                        table[orow + q * nr + r] += v * g.table[grow + q];
                    }
                }
            }
        }
        StochKernel::raw(f.dom.clone(), cod, table)
    }

    fn reindex_codomain(&self, f: &StochKernel, map: &[usize]) -> StochKernel {
        let old_sizes = f.cod.sizes();
        for &m in map {
            assert!(m < old_sizes.len(), "reindex_codomain: factor index out of range");
        }
        let cod = FinObject::of(map.iter().map(|&m| f.cod.factors[m].clone()));
        let new_sizes = cod.sizes();
        let new_strides = strides(&new_sizes);
        let (nd, nc_old, nc_new) = (f.dom.size(), f.cod.size(), cod.size());
        let mut table = vec![0.0; nd * nc_new];
        let mut digits = vec![0usize; old_sizes.len()];
        for c in 0..nc_old {
            decompose(c, &old_sizes, &mut digits);
            let target: usize =
                map.iter().zip(&new_strides).map(|(&m, &s)| digits[m] * s).sum();
            for a in 0..nd {
                let v = f.table[a * nc_old + c];
                if v != 0.0 {
                    table[a * nc_new + target] += v;
                }
            }
        }
        StochKernel::raw(f.dom.clone(), cod, table)
    }

    fn conditional(&self, f: &StochKernel, x_idx: &[usize]) -> StochKernel {
        let n = f.cod.factors.len();
        let in_x: Vec<bool> = {
            let mut v = vec![false; n];
            for &i in x_idx {
                v[i] = true;
            }
            v
        };
        let y_idx: Vec<usize> = (0..n).filter(|i| !in_x[*i]).collect();
        let x_obj = FinObject::of(x_idx.iter().map(|&i| f.cod.factors[i].clone()));
        let y_obj = FinObject::of(y_idx.iter().map(|&i| f.cod.factors[i].clone()));
        let new_dom = self.tensor_objs(&x_obj, &f.dom);

        let old_sizes = f.cod.sizes();
        let x_strides = strides(&x_obj.sizes());
        let y_strides = strides(&y_obj.sizes());
        let (na, nx, ny, nc) = (f.dom.size(), x_obj.size(), y_obj.size(), f.cod.size());

        // Joint mass per (x, a, y) and marginal per (x, a).
        let mut num = vec![0.0f64; nx * na * ny];
        let mut den = vec![0.0f64; nx * na];
        let mut digits = vec![0usize; n];
        for c in 0..nc {
            decompose(c, &old_sizes, &mut digits);
            let xi: usize =
                x_idx.iter().zip(&x_strides).map(|(&i, &s)| digits[i] * s).sum();
            let yi: usize =
                y_idx.iter().zip(&y_strides).map(|(&i, &s)| digits[i] * s).sum();
            for a in 0..na {
                let v = f.table[a * nc + c];
                if v != 0.0 {
                    num[(xi * na + a) * ny + yi] += v;
                    den[xi * na + a] += v;
                }
            }
        }
        let mut table = vec![0.0; nx * na * ny];
        for row in 0..nx * na {
            if den[row] > 0.0 {
                for y in 0..ny {
                    table[row * ny + y] = num[row * ny + y] / den[row];
                }
            } else {
                // Conditioning on an impossible event: fill with the uniform
                // law so the kernel stays stochastic.
                for y in 0..ny {
                    table[row * ny + y] = 1.0 / ny as f64;
                }
            }
        }
        StochKernel::raw(new_dom, y_obj, table)
    }

    fn max_abs_diff(&self, f: &StochKernel, g: &StochKernel) -> f64 {
        if f.dom != g.dom || f.cod != g.cod {
            return f64::INFINITY;
        }
        f.table
            .iter()
            .zip(&g.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn ci_state(&self, f: &StochKernel, x: &[usize], y: &[usize], z: &[usize], tol: f64) -> bool {
        assert_eq!(f.dom.size(), 1, "ci_state needs a state");
        let n = f.cod.factors.len();
        assert_eq!(x.len() + y.len() + z.len(), n, "ci_state needs a full partition");
        let sizes = f.cod.sizes();
        let sub = |idx: &[usize]| -> (Vec<usize>, usize) {
            let szs: Vec<usize> = idx.iter().map(|&i| sizes[i]).collect();
            let total = szs.iter().product();
            (strides(&szs), total)
        };
        let (xs, nx) = sub(x);
        let (ys, ny) = sub(y);
        let (zs, nz) = sub(z);
        let mut pz = vec![0.0f64; nz];
        let mut pxz = vec![0.0f64; nx * nz];
        let mut pzy = vec![0.0f64; nz * ny];
        let mut digits = vec![0usize; n];
        let nc = f.cod.size();
        let mut flat = vec![0.0f64; nx * nz * ny];
        for c in 0..nc {
            decompose(c, &sizes, &mut digits);
            let xi: usize = x.iter().zip(&xs).map(|(&i, &s)| digits[i] * s).sum();
            let yi: usize = y.iter().zip(&ys).map(|(&i, &s)| digits[i] * s).sum();
            let zi: usize = z.iter().zip(&zs).map(|(&i, &s)| digits[i] * s).sum();
            let v = f.table[c];
            pz[zi] += v;
            pxz[xi * nz + zi] += v;
            pzy[zi * ny + yi] += v;
            flat[(xi * nz + zi) * ny + yi] += v;
        }
        for xi in 0..nx {
            for zi in 0..nz {
                for yi in 0..ny {
                    let lhs = flat[(xi * nz + zi) * ny + yi] * pz[zi];
                    let rhs = pxz[xi * nz + zi] * pzy[zi * ny + yi];
                    if (lhs - rhs).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn ci_kernel_witness(
        &self,
        f: &StochKernel,
        x: &[usize],
        y: &[usize],
        z: &[usize],
        tol: f64,
    ) -> Option<StochKernel> {
        let n = f.cod.factors.len();
        assert_eq!(x.len() + y.len() + z.len(), n, "ci_kernel needs a full partition");
        let sizes = f.cod.sizes();
        let x_obj = FinObject::of(x.iter().map(|&i| f.cod.factors[i].clone()));
        let z_obj = FinObject::of(z.iter().map(|&i| f.cod.factors[i].clone()));
        let x_strides = strides(&x_obj.sizes());
        let z_strides = strides(&z_obj.sizes());
        let y_sizes: Vec<usize> = y.iter().map(|&i| sizes[i]).collect();
        let y_strides = strides(&y_sizes);
        let na = f.dom.size();
        let (nx, nz) = (x_obj.size(), z_obj.size());
        let ny: usize = y_sizes.iter().product();
        let nc = f.cod.size();

        // Reorganize the table by (a, x, y, z) and accumulate the
        // YZ-marginal by (a, y, z).
        let mut joint = vec![0.0f64; na * nx * ny * nz];
        let mut fyz = vec![0.0f64; na * ny * nz];
        let mut digits = vec![0usize; n];
        for c in 0..nc {
            decompose(c, &sizes, &mut digits);
            let xi: usize = x.iter().zip(&x_strides).map(|(&i, &s)| digits[i] * s).sum();
            let yi: usize = y.iter().zip(&y_strides).map(|(&i, &s)| digits[i] * s).sum();
            let zi: usize = z.iter().zip(&z_strides).map(|(&i, &s)| digits[i] * s).sum();
            for a in 0..na {
                let v = f.table[a * nc + c];
                if v != 0.0 {
                    joint[((a * nx + xi) * ny + yi) * nz + zi] += v;
                    fyz[(a * ny + yi) * nz + zi] += v;
                }
            }
        }

        // Candidate mediator: for each z, condition on the best-supported
        // context (a, y); any valid mediator must agree with it there.
        let mut witness = vec![0.0f64; nz * nx];
        for zi in 0..nz {
            let mut best = 0.0f64;
            let mut best_ay = None;
            for a in 0..na {
                for yi in 0..ny {
                    let w = fyz[(a * ny + yi) * nz + zi];
                    if w > best {
                        best = w;
                        best_ay = Some((a, yi));
                    }
                }
            }
            match best_ay {
                Some((a, yi)) => {
                    for xi in 0..nx {
                        witness[zi * nx + xi] =
                            joint[((a * nx + xi) * ny + yi) * nz + zi] / best;
                    }
                }
                None => {
                    // z never occurs: the mediator is unconstrained there.
                    for xi in 0..nx {
                        witness[zi * nx + xi] = 1.0 / nx.max(1) as f64;
                    }
                }
            }
        }

        // Verify f(x, y, z | a) = h(x | z) · f_YZ(y, z | a) everywhere.
        for a in 0..na {
            for xi in 0..nx {
                for yi in 0..ny {
                    for zi in 0..nz {
                        let lhs = joint[((a * nx + xi) * ny + yi) * nz + zi];
                        let rhs = witness[zi * nx + xi] * fyz[(a * ny + yi) * nz + zi];
                        if (lhs - rhs).abs() > tol {
                            return None;
                        }
                    }
                }
            }
        }
        Some(StochKernel::raw(z_obj, x_obj, witness))
    }
}
