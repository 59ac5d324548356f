//! The semantic interface kernels must satisfy for models to be evaluated
//! and checked against them.
//!
//! Objects are finite tensor products of *factors* (one factor per wire in a
//! diagram), and structural rewiring — copying, discarding, permuting — is
//! expressed through [`Backend::reindex_codomain`]: post-composition with
//! the deterministic map that reads output slot `j` from input factor
//! `map[j]`. Everything a diagram evaluation needs (copy, del, swap,
//! expand, marginals) derives from that single primitive, which lets
//! backends implement it without ever materializing permutation kernels.
//!
//! Conditional-independence tests come in two flavors. `ci_state` is the
//! symmetric check on states: the joint over X, Z, Y times the Z-marginal
//! equals the product of the XZ- and ZY-marginals. `ci_kernel` is the
//! asymmetric kernel-level statement for f : A → X ⊗ Y ⊗ Z — there is a
//! mediating kernel h : Z → X, with no access to A, such that
//! f = (h ⊗ id) after the YZ-marginal, with the X output reconstructed from
//! Z alone. `ci_kernel_witness` returns that mediator when it exists.

/// A Markov-categorical semantics over factored objects.
pub trait Backend {
    type Obj: Clone + PartialEq + std::fmt::Debug;
    type Ker: Clone + std::fmt::Debug;

    fn unit_obj(&self) -> Self::Obj;
    fn tensor_objs(&self, a: &Self::Obj, b: &Self::Obj) -> Self::Obj;
    fn factor_count(&self, a: &Self::Obj) -> usize;
    /// The i-th factor as a standalone (single-factor) object.
    fn factor(&self, a: &Self::Obj, i: usize) -> Self::Obj;

    fn dom(&self, f: &Self::Ker) -> Self::Obj;
    fn cod(&self, f: &Self::Ker) -> Self::Obj;

    fn identity(&self, a: &Self::Obj) -> Self::Ker;
    fn tensor(&self, f: &Self::Ker, g: &Self::Ker) -> Self::Ker;

    /// Apply `g` to a prefix of `f`'s codomain: for f : A → P ⊗ R and
    /// g : P → Q (with P spanning the first `factor_count(dom(g))` factors
    /// of `cod(f)`), the composite A → Q ⊗ R.
    fn apply_prefix(&self, f: &Self::Ker, g: &Self::Ker) -> Self::Ker;

    /// Post-compose with the deterministic rewiring that emits, in slot `j`,
    /// the value of codomain factor `map[j]`. Entries may repeat (copying)
    /// or be dropped (discarding); order is arbitrary.
    fn reindex_codomain(&self, f: &Self::Ker, map: &[usize]) -> Self::Ker;

    /// Condition on a subset of codomain factors: for f : A → cod and the
    /// chosen factors X (in the listed order), a kernel X ⊗ A → Y giving
    /// the conditional law of the remaining factors Y (in original order).
    /// Rows with no support are filled in with a fixed default law.
    fn conditional(&self, f: &Self::Ker, x_idx: &[usize]) -> Self::Ker;

    /// Largest absolute entrywise deviation between two kernels of the same
    /// shape; +∞ when shapes differ.
    fn max_abs_diff(&self, f: &Self::Ker, g: &Self::Ker) -> f64;

    /// Symmetric conditional independence X ⟂ Y | Z for a *state* whose
    /// codomain factors are partitioned by the three index lists.
    fn ci_state(&self, f: &Self::Ker, x: &[usize], y: &[usize], z: &[usize], tol: f64) -> bool;

    /// Produce the mediating kernel h : Z → X witnessing the asymmetric
    /// conditional independence of f : A → cod with codomain partitioned by
    /// the index lists, if one exists within `tol`.
    fn ci_kernel_witness(
        &self,
        f: &Self::Ker,
        x: &[usize],
        y: &[usize],
        z: &[usize],
        tol: f64,
    ) -> Option<Self::Ker>;

    // ------------------------------------------------------------------
    // Derived operations.
    // ------------------------------------------------------------------

    /// Sequential composition f then g (g's domain is all of f's codomain).
    fn compose(&self, f: &Self::Ker, g: &Self::Ker) -> Self::Ker {
        debug_assert_eq!(self.cod(f), self.dom(g), "compose: interface mismatch");
        self.apply_prefix(f, g)
    }

    /// Replicate codomain factor i `copies[i]` times (0 discards it), blocks
    /// kept in factor order.
    fn expand(&self, f: &Self::Ker, copies: &[usize]) -> Self::Ker {
        debug_assert_eq!(copies.len(), self.factor_count(&self.cod(f)));
        let map: Vec<usize> = copies
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        self.reindex_codomain(f, &map)
    }

    /// Keep the codomain factors listed in `keep`, in that order.
    fn marginal(&self, f: &Self::Ker, keep: &[usize]) -> Self::Ker {
        self.reindex_codomain(f, keep)
    }

    /// The copy map A → A ⊗ A.
    fn copy(&self, a: &Self::Obj) -> Self::Ker {
        let n = self.factor_count(a);
        let map: Vec<usize> = (0..n).chain(0..n).collect();
        self.reindex_codomain(&self.identity(a), &map)
    }

    /// The discard map A → I.
    fn del(&self, a: &Self::Obj) -> Self::Ker {
        self.reindex_codomain(&self.identity(a), &[])
    }

    /// The braiding A ⊗ B → B ⊗ A.
    fn swap(&self, a: &Self::Obj, b: &Self::Obj) -> Self::Ker {
        let na = self.factor_count(a);
        let nb = self.factor_count(b);
        let map: Vec<usize> = (na..na + nb).chain(0..na).collect();
        self.reindex_codomain(&self.identity(&self.tensor_objs(a, b)), &map)
    }

    fn equal_within(&self, f: &Self::Ker, g: &Self::Ker, tol: f64) -> bool {
        self.max_abs_diff(f, g) <= tol
    }

    /// Asymmetric conditional independence: does a mediator exist?
    fn ci_kernel(&self, f: &Self::Ker, x: &[usize], y: &[usize], z: &[usize], tol: f64) -> bool {
        self.ci_kernel_witness(f, x, y, z, tol).is_some()
    }
}
