//! Dense complex operators on labeled tensor spaces.
//!
//! A [`LabeledOperator`] is a square matrix together with the ordered list of
//! labeled factors its row/column indices run over. Binary operations
//! re-align factor order internally, so expressions can mix operators whose
//! spaces list the same labels in different orders.
//!
//! The three structural primitives are [`LabeledOperator::tensor`],
//! [`LabeledOperator::partial_trace`], and [`LabeledOperator::link`]. Link is
//! the pairwise network contraction for operators in the unnormalized Choi
//! convention `Choi(T) = sum_ij |i><j|_in (x) T(|i><j|)_out`: contracting the
//! shared labels of `Choi(E)` and `Choi(D)` yields the Choi matrix of the
//! composite map, and contracting every label of two operators yields a
//! scalar. Storage is dense; spaces are expected to stay small (a handful of
//! low-dimensional factors).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::label::{SystemLabel, TensorSpace};

pub type CMatrix = DMatrix<C64>;

#[derive(Clone, Debug)]
pub struct LabeledOperator {
    space: TensorSpace,
    matrix: CMatrix,
}

impl LabeledOperator {
    pub fn new(space: TensorSpace, matrix: CMatrix) -> Result<Self> {
        let dim = space.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim,
            });
        }
        Ok(LabeledOperator { space, matrix })
    }

    pub fn zeros(space: TensorSpace) -> Self {
        let dim = space.total_dim();
        LabeledOperator {
            space,
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(space: TensorSpace) -> Self {
        let dim = space.total_dim();
        LabeledOperator {
            space,
            matrix: CMatrix::identity(dim, dim),
        }
    }

    /// A scalar, living on the empty space.
    pub fn scalar(value: C64) -> Self {
        LabeledOperator {
            space: TensorSpace::empty(),
            matrix: CMatrix::from_element(1, 1, value),
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// The scalar value of an operator on the empty space.
    pub fn scalar_value(&self) -> Result<C64> {
        if self.dim() != 1 {
            return Err(Error::ShapeMismatch {
                rows: self.matrix.nrows(),
                cols: self.matrix.ncols(),
                dim: 1,
            });
        }
        Ok(self.matrix[(0, 0)])
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn dagger(&self) -> Self {
        LabeledOperator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Max-abs deviation from Hermiticity.
    pub fn herm_deviation(&self) -> f64 {
        let adj = self.matrix.adjoint();
        (&self.matrix - adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let dev = self.herm_deviation();
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(())
    }

    /// The Hermitian part `(A + A^dag) / 2`.
    pub fn hermitized(&self) -> Self {
        let m = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        LabeledOperator {
            space: self.space.clone(),
            matrix: m,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        LabeledOperator {
            space: self.space.clone(),
            matrix: &self.matrix * s,
        }
    }

    /// Sum after re-aligning `other` to this operator's factor order.
    ///
    /// Panics if the label sets differ; mixing unrelated spaces in arithmetic
    /// is a programming error, not a data error.
    pub fn add(&self, other: &LabeledOperator) -> LabeledOperator {
        let aligned = other
            .permuted(&self.space)
            .expect("adding operators on different label sets");
        LabeledOperator {
            space: self.space.clone(),
            matrix: &self.matrix + aligned.matrix,
        }
    }

    /// Difference after re-aligning `other`; panics like [`Self::add`].
    pub fn sub(&self, other: &LabeledOperator) -> LabeledOperator {
        let aligned = other
            .permuted(&self.space)
            .expect("subtracting operators on different label sets");
        LabeledOperator {
            space: self.space.clone(),
            matrix: &self.matrix - aligned.matrix,
        }
    }

    /// Hilbert-Schmidt inner product `Tr[A^dag B]`.
    pub fn hs_inner(&self, other: &LabeledOperator) -> Result<C64> {
        let aligned = other.permuted(&self.space)?;
        Ok((self.matrix.adjoint() * aligned.matrix).trace())
    }

    /// Re-express the operator with factors listed in `target` order.
    pub fn permuted(&self, target: &TensorSpace) -> Result<LabeledOperator> {
        if target.len() != self.space.len() {
            return Err(Error::UnknownLabel(format!(
                "cannot permute [{}] into [{}]",
                self.space.display(),
                target.display()
            )));
        }
        if target == &self.space {
            return Ok(self.clone());
        }
        let mut source_pos = Vec::with_capacity(target.len());
        for l in target.labels() {
            let pos = self
                .space
                .position(l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            let found = &self.space.labels()[pos];
            if found.dim != l.dim {
                return Err(Error::DimensionMismatch {
                    label: l.to_string(),
                    left: found.dim,
                    right: l.dim,
                });
            }
            source_pos.push(pos);
        }
        let dim = self.dim();
        let target_dims = target.dims();
        let source_strides = self.space.strides();
        // index_map[t] = flat source index of target flat index t
        let mut index_map = vec![0usize; dim];
        let mut multi = vec![0usize; target.len()];
        for (t, entry) in index_map.iter_mut().enumerate() {
            let mut rem = t;
            for (k, d) in target_dims.iter().enumerate() {
                let block: usize = target_dims[k + 1..].iter().product();
                multi[k] = rem / block;
                rem %= block;
                debug_assert!(multi[k] < *d);
            }
            let mut s = 0usize;
            for (k, &pos) in source_pos.iter().enumerate() {
                s += multi[k] * source_strides[pos];
            }
            *entry = s;
        }
        let mut out = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            let sr = index_map[r];
            for c in 0..dim {
                out[(r, c)] = self.matrix[(sr, index_map[c])];
            }
        }
        Ok(LabeledOperator {
            space: target.clone(),
            matrix: out,
        })
    }

    /// Same operator with factors in canonical label order.
    pub fn canonicalized(&self) -> LabeledOperator {
        self.permuted(&self.space.canonical())
            .expect("canonical space is a permutation")
    }

    /// Tensor product; label sets must be disjoint.
    pub fn tensor(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let space = self.space.concat(&other.space)?;
        let matrix = self.matrix.kronecker(&other.matrix);
        Ok(LabeledOperator { space, matrix })
    }

    fn resolve(&self, labels: &[SystemLabel]) -> Result<Vec<SystemLabel>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let found = self
                .space
                .get(l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            out.push(*found);
        }
        Ok(out)
    }

    /// Trace out the given labels; the rest keep their relative order.
    pub fn partial_trace(&self, labels: &[SystemLabel]) -> Result<LabeledOperator> {
        let traced = self.resolve(labels)?;
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let keep = self.space.without(&traced);
        let target = keep.concat(&TensorSpace::new(traced.clone())?)?;
        let aligned = self.permuted(&target)?;
        let dk = keep.total_dim();
        let dt: usize = traced.iter().map(|l| l.dim).product();
        let mut out = CMatrix::zeros(dk, dk);
        for r in 0..dk {
            for c in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += aligned.matrix[(r * dt + t, c * dt + t)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(LabeledOperator {
            space: keep,
            matrix: out,
        })
    }

    /// Trace out the given labels and re-insert the maximally mixed state on
    /// them: `S -> Tr_L[S] (x) I_L / d_L`, on the same space.
    pub fn trace_and_replace(&self, labels: &[SystemLabel]) -> Result<LabeledOperator> {
        let traced = self.resolve(labels)?;
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let reduced = self.partial_trace(&traced)?;
        let d: usize = traced.iter().map(|l| l.dim).product();
        let mixed = LabeledOperator::identity(TensorSpace::new(traced)?)
            .scale(C64::new(1.0 / d as f64, 0.0));
        reduced.tensor(&mixed)?.permuted(&self.space)
    }

    /// Contract the `contract` labels of two operators in the Choi
    /// convention, returning an operator on the remaining labels of both.
    ///
    /// For maps `E: in -> Z` and `D: Z -> out`, `Choi(E).link(Choi(D), Z)`
    /// is `Choi(D o E)`. Contracting every label yields the scalar
    /// `Tr[A^T B]`, the closed-loop pairing.
    pub fn link(
        &self,
        other: &LabeledOperator,
        contract: &[SystemLabel],
    ) -> Result<LabeledOperator> {
        let here = self.resolve(contract)?;
        let there = other.resolve(contract)?;
        for (a, b) in here.iter().zip(&there) {
            if a.dim != b.dim {
                return Err(Error::DimensionMismatch {
                    label: a.to_string(),
                    left: a.dim,
                    right: b.dim,
                });
            }
        }
        let mut shared = here.clone();
        shared.sort();
        let z_space = TensorSpace::new(shared.clone())?;
        let u_space = self.space.without(&shared);
        let w_space = other.space.without(&shared);
        // any leftover label common to both sides would collide in the result
        for l in w_space.labels() {
            if u_space.contains(l) {
                return Err(Error::OverlappingLabels(l.to_string()));
            }
        }
        let a = self.permuted(&u_space.concat(&z_space)?)?;
        let b = other.permuted(&z_space.concat(&w_space)?)?;
        let du = u_space.total_dim();
        let dz = z_space.total_dim();
        let dw = w_space.total_dim();
        let am = &a.matrix;
        let bm = &b.matrix;
        let mut out = CMatrix::zeros(du * dw, du * dw);
        // out[(u w),(u' w')] = sum_{z z''} A[(u z''),(u' z)] B[(z'' w),(z w')]
        // which is Tr_Z[(A^{T_Z} (x) I_W)(I_U (x) B)].
        for u in 0..du {
            for up in 0..du {
                for w in 0..dw {
                    for wp in 0..dw {
                        let mut acc = C64::new(0.0, 0.0);
                        for zpp in 0..dz {
                            let brow = zpp * dw + w;
                            let arow = u * dz + zpp;
                            for z in 0..dz {
                                acc += am[(arow, up * dz + z)] * bm[(brow, z * dw + wp)];
                            }
                        }
                        out[(u * dw + w, up * dw + wp)] = acc;
                    }
                }
            }
        }
        Ok(LabeledOperator {
            space: u_space.concat(&w_space)?,
            matrix: out,
        })
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn eigenvalues_hermitian(&self, tol: f64) -> Result<Vec<f64>> {
        self.ensure_hermitian(tol)?;
        let m = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::linalg::SymmetricEigen::new(m);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    /// Smallest eigenvalue of the Hermitian part (Hermiticity enforced).
    pub fn min_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigenvalues_hermitian(tol)?[0])
    }

    /// Positive semidefiniteness within `tol` (also the Hermiticity budget).
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue(tol)? >= -tol)
    }

    fn singular_values(&self) -> DVector<f64> {
        nalgebra::linalg::SVD::new(self.matrix.clone(), false, false).singular_values
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        if self.matrix.iter().all(|c| c.norm() == 0.0) {
            return 0.0;
        }
        self.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    /// Trace norm (sum of singular values).
    pub fn trace_norm(&self) -> f64 {
        if self.matrix.iter().all(|c| c.norm() == 0.0) {
            return 0.0;
        }
        self.singular_values().iter().sum()
    }

    /// Hermitian eigendecomposition `(values, vectors)`, columns matching
    /// eigenvalues in ascending order.
    pub fn eigh(&self, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
        self.ensure_hermitian(tol)?;
        let m = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::linalg::SymmetricEigen::new(m);
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let mut vals = Vec::with_capacity(n);
        let mut vecs = CMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            vals.push(eig.eigenvalues[i]);
            vecs.set_column(k, &eig.eigenvectors.column(i));
        }
        Ok((vals, vecs))
    }
}

/// Choi matrix of the identity map between two same-dimensional systems,
/// on the space `[input, output]`.
pub fn choi_identity(input: SystemLabel, output: SystemLabel) -> Result<LabeledOperator> {
    if input.dim != output.dim {
        return Err(Error::DimensionMismatch {
            label: format!("{input} -> {output}"),
            left: input.dim,
            right: output.dim,
        });
    }
    let d = input.dim;
    let space = TensorSpace::new(vec![input, output])?;
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = C64::new(1.0, 0.0);
        }
    }
    LabeledOperator::new(space, m)
}

/// Choi matrix of conjugation by an isometry `V: H_in -> H_out`, on the
/// space `in_labels ++ out_labels`. `V` must have `dim(in)` columns and
/// `dim(out)` rows.
pub fn choi_of_isometry(
    v: &CMatrix,
    in_space: &TensorSpace,
    out_space: &TensorSpace,
) -> Result<LabeledOperator> {
    let din = in_space.total_dim();
    let dout = out_space.total_dim();
    if v.nrows() != dout || v.ncols() != din {
        return Err(Error::ShapeMismatch {
            rows: v.nrows(),
            cols: v.ncols(),
            dim: dout,
        });
    }
    let space = in_space.concat(out_space)?;
    let mut m = CMatrix::zeros(din * dout, din * dout);
    for i in 0..din {
        for j in 0..din {
            for u in 0..dout {
                for w in 0..dout {
                    m[(i * dout + u, j * dout + w)] = v[(u, i)] * v[(w, j)].conj();
                }
            }
        }
    }
    LabeledOperator::new(space, m)
}

/// Choi matrix of the map `rho -> Tr[E rho] phi` (measure with effect `E` on
/// `input`, prepare `phi` on `output`).
pub fn choi_measure_prepare(
    effect: &CMatrix,
    state: &CMatrix,
    input: SystemLabel,
    output: SystemLabel,
) -> Result<LabeledOperator> {
    if effect.nrows() != input.dim || state.nrows() != output.dim {
        return Err(Error::ShapeMismatch {
            rows: effect.nrows(),
            cols: state.nrows(),
            dim: input.dim,
        });
    }
    let space = TensorSpace::new(vec![input, output])?;
    let matrix = effect.transpose().kronecker(state);
    LabeledOperator::new(space, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_op(labels: Vec<SystemLabel>, seed: u64) -> LabeledOperator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let space = TensorSpace::new(labels).unwrap();
        let d = space.total_dim();
        let m = CMatrix::from_fn(d, d, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        LabeledOperator::new(space, m).unwrap()
    }

    fn assert_close(a: &LabeledOperator, b: &LabeledOperator, tol: f64) {
        let diff = a.sub(b).max_abs();
        assert!(diff <= tol, "operators differ by {diff:.3e}");
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let a = LabeledOperator::identity(TensorSpace::single(SystemLabel::a(1, 2)));
        let b = LabeledOperator::identity(TensorSpace::single(SystemLabel::x(1, 3)));
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.dim(), 6);
        assert_eq!(t.sub(&LabeledOperator::identity(t.space().clone())).max_abs(), 0.0);
    }

    #[test]
    fn tensor_rejects_overlapping_labels() {
        let a = LabeledOperator::identity(TensorSpace::single(SystemLabel::a(1, 2)));
        let err = a.tensor(&a).unwrap_err();
        assert!(matches!(err, Error::OverlappingLabels(_)));
    }

    #[test]
    fn tensor_trace_is_product_of_traces() {
        let a = random_op(vec![SystemLabel::a(1, 2)], 7);
        let b = random_op(vec![SystemLabel::x(1, 3)], 8);
        let t = a.tensor(&b).unwrap();
        let lhs = t.trace();
        let rhs = a.trace() * b.trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    /// Entrywise oracle: contracting a product state out of a tensor product
    /// leaves the other factor times the partner's trace.
    #[test]
    fn partial_trace_of_product_state() {
        let a = random_op(vec![SystemLabel::a(1, 2)], 1);
        let b = random_op(vec![SystemLabel::x(1, 2)], 2);
        let t = a.tensor(&b).unwrap();
        let reduced = t.partial_trace(&[SystemLabel::x(1, 2)]).unwrap();
        let expect = a.scale(b.trace());
        assert_close(&reduced, &expect, 1e-12);
    }

    #[test]
    fn partial_trace_against_index_oracle() {
        // trace the middle factor of a random three-factor operator and
        // compare with an independent loop over matrix entries.
        let labels = vec![
            SystemLabel::a(1, 2),
            SystemLabel::x(1, 3),
            SystemLabel::a(2, 2),
        ];
        let t = random_op(labels, 3);
        let reduced = t.partial_trace(&[SystemLabel::x(1, 3)]).unwrap();
        // source flat index = (i * 3 + j) * 2 + k for multi (i, j, k)
        let m = t.matrix();
        let mut expect = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for k in 0..2 {
                for ip in 0..2 {
                    for kp in 0..2 {
                        let mut acc = c(0.0, 0.0);
                        for j in 0..3 {
                            acc += m[((i * 3 + j) * 2 + k, (ip * 3 + j) * 2 + kp)];
                        }
                        expect[(i * 2 + k, ip * 2 + kp)] = acc;
                    }
                }
            }
        }
        assert_eq!(
            reduced.space().labels(),
            &[SystemLabel::a(1, 2), SystemLabel::a(2, 2)]
        );
        assert!((reduced.matrix() - expect).iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn partial_trace_of_identity_counts_dimension() {
        let space = TensorSpace::new(vec![SystemLabel::a(1, 2), SystemLabel::x(1, 2)]).unwrap();
        let id = LabeledOperator::identity(space);
        let reduced = id.partial_trace(&[SystemLabel::x(1, 2)]).unwrap();
        let expect =
            LabeledOperator::identity(TensorSpace::single(SystemLabel::a(1, 2))).scale(c(2.0, 0.0));
        assert_close(&reduced, &expect, 0.0);
    }

    #[test]
    fn unknown_label_is_reported() {
        let a = random_op(vec![SystemLabel::a(1, 2)], 4);
        let err = a.partial_trace(&[SystemLabel::x(2, 2)]).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(_)));
    }

    #[test]
    fn trace_and_replace_on_product_replaces_one_factor() {
        let a = random_op(vec![SystemLabel::a(1, 2)], 5);
        let b = random_op(vec![SystemLabel::x(1, 2)], 6);
        let t = a.tensor(&b).unwrap();
        let replaced = t.trace_and_replace(&[SystemLabel::x(1, 2)]).unwrap();
        let mixed = LabeledOperator::identity(TensorSpace::single(SystemLabel::x(1, 2)))
            .scale(b.trace() * c(0.5, 0.0));
        let expect = a.tensor(&mixed).unwrap();
        assert_close(&replaced, &expect, 1e-12);
        assert_eq!(replaced.space(), t.space());
    }

    #[test]
    fn trace_and_replace_is_idempotent_and_trace_preserving() {
        let t = random_op(vec![SystemLabel::a(1, 2), SystemLabel::x(1, 2)], 9);
        let once = t.trace_and_replace(&[SystemLabel::x(1, 2)]).unwrap();
        let twice = once.trace_and_replace(&[SystemLabel::x(1, 2)]).unwrap();
        assert_close(&once, &twice, 1e-13);
        assert!((once.trace() - t.trace()).norm() < 1e-13);
    }

    #[test]
    fn trace_and_replace_commutes_across_labels() {
        let t = random_op(
            vec![
                SystemLabel::a(1, 2),
                SystemLabel::x(1, 2),
                SystemLabel::a(2, 2),
            ],
            10,
        );
        let xa = t
            .trace_and_replace(&[SystemLabel::x(1, 2)])
            .unwrap()
            .trace_and_replace(&[SystemLabel::a(2, 2)])
            .unwrap();
        let ax = t
            .trace_and_replace(&[SystemLabel::a(2, 2)])
            .unwrap()
            .trace_and_replace(&[SystemLabel::x(1, 2)])
            .unwrap();
        let joint = t
            .trace_and_replace(&[SystemLabel::x(1, 2), SystemLabel::a(2, 2)])
            .unwrap();
        assert_close(&xa, &ax, 1e-13);
        assert_close(&xa, &joint, 1e-13);
    }

    #[test]
    fn trace_and_replace_is_hs_self_adjoint() {
        // <A, R(B)> = <R(A), B> for the replacement map R.
        let a = random_op(vec![SystemLabel::a(1, 2), SystemLabel::x(1, 3)], 11);
        let b = random_op(vec![SystemLabel::a(1, 2), SystemLabel::x(1, 3)], 12);
        let ra = a.trace_and_replace(&[SystemLabel::x(1, 3)]).unwrap();
        let rb = b.trace_and_replace(&[SystemLabel::x(1, 3)]).unwrap();
        let lhs = a.hs_inner(&rb).unwrap();
        let rhs = ra.hs_inner(&b).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn permutation_round_trips() {
        let t = random_op(
            vec![
                SystemLabel::a(1, 2),
                SystemLabel::x(1, 3),
                SystemLabel::a(2, 2),
            ],
            13,
        );
        let back = t.canonicalized().permuted(t.space()).unwrap();
        assert_close(&t, &back, 0.0);
    }

    #[test]
    fn permutation_matches_kron_swap() {
        let a = random_op(vec![SystemLabel::a(1, 2)], 14);
        let b = random_op(vec![SystemLabel::x(1, 3)], 15);
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        let ba_as_ab = ba.permuted(ab.space()).unwrap();
        assert_close(&ab, &ba_as_ab, 1e-13);
    }

    #[test]
    fn link_composes_identity_channels() {
        let x1 = SystemLabel::x(1, 2);
        let m = SystemLabel::mem(1, 2);
        let a1 = SystemLabel::a(1, 2);
        let e = choi_identity(x1, m).unwrap();
        let d = choi_identity(m, a1).unwrap();
        let composed = e.link(&d, &[m]).unwrap();
        let expect = choi_identity(x1, a1).unwrap();
        assert_close(&composed.permuted(expect.space()).unwrap(), &expect, 1e-13);
    }

    /// Independent application oracle: applying the linked Choi matrix to a
    /// basis of inputs must match applying the two maps in sequence, where
    /// application is computed by explicit index sums.
    #[test]
    fn link_matches_sequential_application() {
        fn apply(choi: &CMatrix, din: usize, dout: usize, rho: &CMatrix) -> CMatrix {
            // T(rho)[u, w] = sum_{i j} rho[i, j] choi[(i u), (j w)]
            let mut out = CMatrix::zeros(dout, dout);
            for u in 0..dout {
                for w in 0..dout {
                    let mut acc = c(0.0, 0.0);
                    for i in 0..din {
                        for j in 0..din {
                            acc += rho[(i, j)] * choi[(i * dout + u, j * dout + w)];
                        }
                    }
                    out[(u, w)] = acc;
                }
            }
            out
        }
        let x = SystemLabel::x(1, 2);
        let m = SystemLabel::mem(1, 3);
        let a = SystemLabel::a(1, 2);
        let e = random_op(vec![x, m], 21);
        let d = random_op(vec![m, a], 22);
        let composed = e.link(&d, &[m]).unwrap();
        let composed = composed
            .permuted(&TensorSpace::new(vec![x, a]).unwrap())
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut rho = CMatrix::zeros(2, 2);
                rho[(i, j)] = c(1.0, 0.0);
                let step = apply(e.matrix(), 2, 3, &rho);
                let expect = apply(d.matrix(), 3, 2, &step);
                let got = apply(composed.matrix(), 2, 2, &rho);
                assert!((got - expect).iter().all(|v| v.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn link_over_all_labels_is_transposed_pairing() {
        let labels = vec![SystemLabel::a(1, 2), SystemLabel::x(1, 2)];
        let a = random_op(labels.clone(), 31);
        let b = random_op(labels.clone(), 32);
        let s = a.link(&b, &labels).unwrap();
        let expect = (a.matrix().transpose() * b.matrix()).trace();
        assert!((s.scalar_value().unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn link_with_discard_is_partial_trace() {
        // Choi of the discard map is the identity matrix.
        let x = SystemLabel::x(1, 2);
        let a = SystemLabel::a(1, 3);
        let t = random_op(vec![x, a], 33);
        let discard = LabeledOperator::identity(TensorSpace::single(a));
        let linked = t.link(&discard, &[a]).unwrap();
        let expect = t.partial_trace(&[a]).unwrap();
        assert_close(&linked, &expect, 1e-12);
    }

    #[test]
    fn link_is_associative_on_chains() {
        let x = SystemLabel::x(1, 2);
        let m1 = SystemLabel::mem(1, 2);
        let m2 = SystemLabel::mem(2, 3);
        let a = SystemLabel::a(1, 2);
        let e = random_op(vec![x, m1], 41);
        let f = random_op(vec![m1, m2], 42);
        let g = random_op(vec![m2, a], 43);
        let left = e.link(&f, &[m1]).unwrap().link(&g, &[m2]).unwrap();
        let right = e.link(&f.link(&g, &[m2]).unwrap(), &[m1]).unwrap();
        assert_close(&left, &right.permuted(left.space()).unwrap(), 1e-12);
    }

    #[test]
    fn link_rejects_leftover_label_collision() {
        let x = SystemLabel::x(1, 2);
        let m = SystemLabel::mem(1, 2);
        let a = SystemLabel::a(1, 2);
        let e = random_op(vec![x, m, a], 44);
        let d = random_op(vec![m, a], 45);
        // contracting only M leaves A on both sides
        let err = e.link(&d, &[m]).unwrap_err();
        assert!(matches!(err, Error::OverlappingLabels(_)));
    }

    #[test]
    fn psd_and_eigenvalue_checks() {
        let space = TensorSpace::single(SystemLabel::a(1, 2));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        let op = LabeledOperator::new(space.clone(), m).unwrap();
        assert!(!op.is_psd(1e-9).unwrap());
        assert!((op.min_eigenvalue(1e-9).unwrap() + 0.5).abs() < 1e-12);

        let mut nh = CMatrix::zeros(2, 2);
        nh[(0, 1)] = c(1.0, 0.0);
        let op = LabeledOperator::new(space, nh).unwrap();
        assert!(matches!(op.is_psd(1e-9), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn norms_on_known_matrices() {
        let space = TensorSpace::single(SystemLabel::a(1, 2));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(3.0, 0.0);
        m[(1, 1)] = c(-4.0, 0.0);
        let op = LabeledOperator::new(space, m).unwrap();
        assert!((op.op_norm() - 4.0).abs() < 1e-12);
        assert!((op.trace_norm() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn choi_identity_has_full_transmission() {
        let x = SystemLabel::x(1, 2);
        let a = SystemLabel::a(1, 2);
        let id = choi_identity(x, a).unwrap();
        assert_eq!(id.trace(), c(2.0, 0.0));
        // rank one with operator norm d
        assert!((id.op_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn measure_prepare_choi_matches_born_rule() {
        let a1 = SystemLabel::a(1, 2);
        let x1 = SystemLabel::x(1, 2);
        let mut effect = CMatrix::zeros(2, 2);
        effect[(0, 0)] = c(1.0, 0.0);
        let mut state = CMatrix::zeros(2, 2);
        state[(1, 1)] = c(1.0, 0.0);
        let op = choi_measure_prepare(&effect, &state, a1, x1).unwrap();
        // applying to |0><0| must give |1><1| with weight 1
        let rho = op
            .permuted(&TensorSpace::new(vec![a1, x1]).unwrap())
            .unwrap();
        let mut acc = c(0.0, 0.0);
        for u in 0..2 {
            // T(|0><0|)[u,u] = choi[(0 u), (0 u)]
            acc += rho.matrix()[(u, u)] * if u == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) };
        }
        assert!((acc - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_the_operator() {
        let h = random_op(vec![SystemLabel::a(1, 3)], 51).hermitized();
        let (vals, vecs) = h.eigh(1e-9).unwrap();
        let mut rebuilt = CMatrix::zeros(3, 3);
        for (k, v) in vals.iter().enumerate() {
            let col = vecs.column(k);
            rebuilt += (col * col.adjoint()) * c(*v, 0.0);
        }
        assert!((rebuilt - h.matrix()).iter().all(|x| x.norm() < 1e-10));
    }
}
