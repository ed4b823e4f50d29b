//! Dense complex tensors with named indices.
//!
//! A [`Tensor`] stores its entries in row-major order over an ordered list of
//! [`Index`] labels. Identity is by label name: two tensors are contracted over
//! every label they share, regardless of axis position, and relabeling never
//! touches the data.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("duplicate index label `{0}`")]
    DuplicateLabel(String),

    #[error("index `{0}` has zero extent")]
    ZeroExtent(String),

    #[error("data length {got} does not match product of extents {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("extent mismatch on index `{label}`: {left} vs {right}")]
    ExtentMismatch {
        label: String,
        left: usize,
        right: usize,
    },

    #[error("index `{0}` not present")]
    MissingLabel(String),

    #[error("tensor of rank {0} is not a scalar")]
    NotScalar(usize),
}

/// A named tensor leg with a fixed extent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Index {
    name: String,
    dim: usize,
}

impl Index {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            dim: self.dim,
        }
    }

    /// Two indices can be summed against each other iff names and extents agree.
    pub fn contractible_with(&self, other: &Index) -> bool {
        self.name == other.name && self.dim == other.dim
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    indices: Vec<Index>,
    data: Vec<C64>,
}

fn check_indices(indices: &[Index]) -> Result<(), TensorError> {
    let mut seen = HashSet::with_capacity(indices.len());
    for idx in indices {
        if idx.dim == 0 {
            return Err(TensorError::ZeroExtent(idx.name.clone()));
        }
        if !seen.insert(idx.name.as_str()) {
            return Err(TensorError::DuplicateLabel(idx.name.clone()));
        }
    }
    Ok(())
}

impl Tensor {
    pub fn new(indices: Vec<Index>, data: Vec<C64>) -> Result<Self, TensorError> {
        check_indices(&indices)?;
        let expected: usize = indices.iter().map(Index::dim).product();
        if expected != data.len() {
            return Err(TensorError::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { indices, data })
    }

    pub fn zeros(indices: Vec<Index>) -> Result<Self, TensorError> {
        let len = indices.iter().map(Index::dim).product();
        Self::new(indices, vec![C64::new(0.0, 0.0); len])
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            indices: Vec::new(),
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major order.
    pub fn from_fn(
        indices: Vec<Index>,
        mut f: impl FnMut(&[usize]) -> C64,
    ) -> Result<Self, TensorError> {
        check_indices(&indices)?;
        let dims: Vec<usize> = indices.iter().map(Index::dim).collect();
        let len = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut pos = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&pos));
            increment(&mut pos, &dims);
        }
        Ok(Self { indices, data })
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.indices.iter().map(Index::dim).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.indices.iter().position(|i| i.name == name)
    }

    pub fn index(&self, name: &str) -> Option<&Index> {
        self.indices.iter().find(|i| i.name == name)
    }

    pub fn get(&self, pos: &[usize]) -> C64 {
        debug_assert_eq!(pos.len(), self.rank());
        let mut flat = 0;
        for (p, idx) in pos.iter().zip(&self.indices) {
            debug_assert!(*p < idx.dim);
            flat = flat * idx.dim + p;
        }
        self.data[flat]
    }

    pub fn to_scalar(&self) -> Result<C64, TensorError> {
        if self.rank() == 0 {
            Ok(self.data[0])
        } else {
            Err(TensorError::NotScalar(self.rank()))
        }
    }

    /// Renames every label for which `map` returns `Some`; data is untouched.
    pub fn relabel(mut self, map: impl Fn(&str) -> Option<String>) -> Result<Self, TensorError> {
        for idx in &mut self.indices {
            if let Some(new) = map(&idx.name) {
                idx.name = new;
            }
        }
        check_indices(&self.indices)?;
        Ok(self)
    }

    pub fn rename(self, from: &str, to: &str) -> Result<Self, TensorError> {
        if self.position(from).is_none() {
            return Err(TensorError::MissingLabel(from.to_string()));
        }
        self.relabel(|n| (n == from).then(|| to.to_string()))
    }

    pub fn scale(mut self, factor: C64) -> Self {
        for x in &mut self.data {
            *x *= factor;
        }
        self
    }

    /// Elementwise complex conjugate with unchanged labels.
    pub fn conj(&self) -> Self {
        Self {
            indices: self.indices.clone(),
            data: self.data.iter().map(C64::conj).collect(),
        }
    }

    /// Elementwise conjugate, renaming labels through `map` (e.g. `mu -> mu'`).
    pub fn conj_relabel(&self, map: impl Fn(&str) -> Option<String>) -> Result<Self, TensorError> {
        self.conj().relabel(map)
    }

    /// Reorders axes to follow `order` (a permutation of this tensor's label names).
    pub fn permute(&self, order: &[&str]) -> Result<Self, TensorError> {
        if order.len() != self.rank() {
            return Err(TensorError::ShapeMismatch {
                expected: self.rank(),
                got: order.len(),
            });
        }
        let mut axes = Vec::with_capacity(order.len());
        for name in order {
            let p = self
                .position(name)
                .ok_or_else(|| TensorError::MissingLabel((*name).to_string()))?;
            axes.push(p);
        }
        let gather = gather_map(&self.dims(), &axes);
        let data = gather.iter().map(|&g| self.data[g]).collect();
        let indices = axes.iter().map(|&a| self.indices[a].clone()).collect();
        Tensor::new(indices, data)
    }

    /// Frobenius-style maximum absolute entry difference; labels must match in order.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.indices, other.indices, "label layouts differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum()
    }
}

/// Row-major odometer increment.
pub(crate) fn increment(pos: &mut [usize], dims: &[usize]) {
    for ax in (0..dims.len()).rev() {
        pos[ax] += 1;
        if pos[ax] < dims[ax] {
            return;
        }
        pos[ax] = 0;
    }
}

/// For the permutation `axes` of a row-major array with extents `dims`,
/// returns the source flat offset of each destination element.
pub(crate) fn gather_map(dims: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for ax in (0..dims.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * dims[ax + 1];
    }
    let out_dims: Vec<usize> = axes.iter().map(|&a| dims[a]).collect();
    let out_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
    let len: usize = dims.iter().product();
    let mut out = Vec::with_capacity(len);
    let mut pos = vec![0usize; axes.len()];
    let mut offset = 0usize;
    for _ in 0..len {
        out.push(offset);
        for ax in (0..axes.len()).rev() {
            pos[ax] += 1;
            offset += out_strides[ax];
            if pos[ax] < out_dims[ax] {
                break;
            }
            offset -= out_strides[ax] * out_dims[ax];
            pos[ax] = 0;
        }
    }
    out
}

/// How two tensors line up for a pairwise contraction: `a` is viewed as an
/// `m x k` matrix (free axes, then shared), `b` as `k x n` (shared, then free).
#[derive(Clone, Debug)]
pub(crate) struct PairLayout {
    pub gather_a: Vec<usize>,
    pub gather_b: Vec<usize>,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub out: Vec<Index>,
}

impl PairLayout {
    pub fn new(a: &[Index], b: &[Index]) -> Result<Self, TensorError> {
        let mut a_free = Vec::new();
        let mut a_shared = Vec::new();
        let mut b_shared = Vec::new();
        for (pa, ia) in a.iter().enumerate() {
            match b.iter().position(|ib| ib.name == ia.name) {
                Some(pb) => {
                    if b[pb].dim != ia.dim {
                        return Err(TensorError::ExtentMismatch {
                            label: ia.name.clone(),
                            left: ia.dim,
                            right: b[pb].dim,
                        });
                    }
                    a_shared.push(pa);
                    b_shared.push(pb);
                }
                None => a_free.push(pa),
            }
        }
        let b_free: Vec<usize> = (0..b.len()).filter(|p| !b_shared.contains(p)).collect();

        let a_dims: Vec<usize> = a.iter().map(Index::dim).collect();
        let b_dims: Vec<usize> = b.iter().map(Index::dim).collect();
        let m = a_free.iter().map(|&p| a_dims[p]).product();
        let k = a_shared.iter().map(|&p| a_dims[p]).product();
        let n = b_free.iter().map(|&p| b_dims[p]).product();

        let a_axes: Vec<usize> = a_free.iter().chain(&a_shared).copied().collect();
        let b_axes: Vec<usize> = b_shared.iter().chain(&b_free).copied().collect();
        let out = a_free
            .iter()
            .map(|&p| a[p].clone())
            .chain(b_free.iter().map(|&p| b[p].clone()))
            .collect();
        Ok(Self {
            gather_a: gather_map(&a_dims, &a_axes),
            gather_b: gather_map(&b_dims, &b_axes),
            m,
            k,
            n,
            out,
        })
    }

    pub fn flops(&self) -> usize {
        self.m * self.k * self.n
    }
}

pub(crate) fn gather(src: &[C64], map: &[usize]) -> Vec<C64> {
    map.iter().map(|&g| src[g]).collect()
}

/// `c[m x n] = a[m x k] * b[k x n]`, all row-major.
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip.re == 0.0 && aip.im == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in row.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
    c
}

/// `c[m x k] = g[m x n] * b[k x n]^T`.
pub(crate) fn matmul_nt(g: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for (x, y) in grow.iter().zip(brow) {
                acc += x * y;
            }
            c[i * k + p] = acc;
        }
    }
    c
}

/// `c[k x n] = a[m x k]^T * g[m x n]`.
pub(crate) fn matmul_tn(a: &[C64], g: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip.re == 0.0 && aip.im == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cj, gj) in crow.iter_mut().zip(grow) {
                *cj += aip * gj;
            }
        }
    }
    c
}

/// Contracts `a` and `b` over every shared label. With no shared labels this
/// is the outer product. The result carries `a`'s free labels followed by `b`'s.
pub fn contract_pair(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let layout = PairLayout::new(&a.indices, &b.indices)?;
    let am = gather(&a.data, &layout.gather_a);
    let bm = gather(&b.data, &layout.gather_b);
    let data = matmul(&am, &bm, layout.m, layout.k, layout.n);
    Tensor::new(layout.out, data)
}

/// Sums the diagonal over each `(left, right)` label pair.
pub fn partial_trace(a: &Tensor, pairs: &[(&str, &str)]) -> Result<Tensor, TensorError> {
    let mut traced = Vec::with_capacity(pairs.len() * 2);
    let mut pair_axes = Vec::with_capacity(pairs.len());
    for (l, r) in pairs {
        let pl = a
            .position(l)
            .ok_or_else(|| TensorError::MissingLabel(l.to_string()))?;
        let pr = a
            .position(r)
            .ok_or_else(|| TensorError::MissingLabel(r.to_string()))?;
        if pl == pr || traced.contains(&pl) || traced.contains(&pr) {
            return Err(TensorError::DuplicateLabel(l.to_string()));
        }
        let (dl, dr) = (a.indices[pl].dim, a.indices[pr].dim);
        if dl != dr {
            return Err(TensorError::ExtentMismatch {
                label: l.to_string(),
                left: dl,
                right: dr,
            });
        }
        traced.push(pl);
        traced.push(pr);
        pair_axes.push((pl, pr));
    }
    let keep: Vec<usize> = (0..a.rank()).filter(|p| !traced.contains(p)).collect();
    let out_indices: Vec<Index> = keep.iter().map(|&p| a.indices[p].clone()).collect();
    let out_dims: Vec<usize> = out_indices.iter().map(Index::dim).collect();
    let trace_dims: Vec<usize> = pair_axes.iter().map(|&(p, _)| a.indices[p].dim).collect();

    let dims = a.dims();
    let mut strides = vec![1usize; dims.len()];
    for ax in (0..dims.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * dims[ax + 1];
    }
    let diag_strides: Vec<usize> = pair_axes
        .iter()
        .map(|&(l, r)| strides[l] + strides[r])
        .collect();
    let trace_len: usize = trace_dims.iter().product();

    let out_len: usize = out_dims.iter().product();
    let mut data = Vec::with_capacity(out_len);
    let mut opos = vec![0usize; keep.len()];
    let mut tpos = vec![0usize; pair_axes.len()];
    for _ in 0..out_len {
        let base: usize = opos.iter().zip(&keep).map(|(p, &ax)| p * strides[ax]).sum();
        let mut acc = C64::new(0.0, 0.0);
        tpos.iter_mut().for_each(|p| *p = 0);
        for _ in 0..trace_len {
            let off: usize = tpos.iter().zip(&diag_strides).map(|(p, s)| p * s).sum();
            acc += a.data[base + off];
            increment(&mut tpos, &trace_dims);
        }
        data.push(acc);
        increment(&mut opos, &out_dims);
    }
    Tensor::new(out_indices, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(indices: Vec<Index>, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(indices, |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn ones_matrix_times_ones_vector() {
        let a = Tensor::new(
            vec![Index::new("i", 2), Index::new("j", 3)],
            vec![c(1.0, 0.0); 6],
        )
        .unwrap();
        let b = Tensor::new(vec![Index::new("j", 3)], vec![c(1.0, 0.0); 3]).unwrap();
        let r = contract_pair(&a, &b).unwrap();
        assert_eq!(r.indices(), &[Index::new("i", 2)]);
        assert_eq!(r.data(), &[c(3.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn identity_contraction_relabels() {
        let id = Tensor::from_fn(vec![Index::new("i", 2), Index::new("j", 2)], |p| {
            if p[0] == p[1] {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        let v = Tensor::new(vec![Index::new("j", 2)], vec![c(0.5, -1.0), c(2.0, 3.0)]).unwrap();
        let r = contract_pair(&id, &v).unwrap();
        assert_eq!(r, v.rename("j", "i").unwrap());
    }

    #[test]
    fn random_pair_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(vec![Index::new("i", 2), Index::new("k", 2)], &mut rng);
        let b = random(vec![Index::new("k", 2), Index::new("j", 2)], &mut rng);
        let r = contract_pair(&a, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = c(0.0, 0.0);
                for k in 0..2 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert!((r.get(&[i, j]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn outer_product_without_shared_labels() {
        let a = Tensor::new(vec![Index::new("a", 2)], vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let b = Tensor::new(vec![Index::new("b", 2)], vec![c(0.0, 1.0), c(3.0, 0.0)]).unwrap();
        let r = contract_pair(&a, &b).unwrap();
        assert_eq!(r.dims(), vec![2, 2]);
        assert_eq!(r.get(&[1, 0]), c(0.0, 2.0));
        assert_eq!(r.get(&[1, 1]), c(6.0, 0.0));
    }

    #[test]
    fn extent_mismatch_is_an_error() {
        let a = Tensor::zeros(vec![Index::new("k", 2)]).unwrap();
        let b = Tensor::zeros(vec![Index::new("k", 3)]).unwrap();
        assert!(matches!(
            contract_pair(&a, &b),
            Err(TensorError::ExtentMismatch { .. })
        ));
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            Tensor::zeros(vec![Index::new("a", 2), Index::new("a", 2)]),
            Err(TensorError::DuplicateLabel(_))
        ));
        assert!(matches!(
            Tensor::new(vec![Index::new("a", 2)], vec![c(0.0, 0.0)]),
            Err(TensorError::ShapeMismatch { .. })
        ));
        // dim-1 legs are legal
        let t = Tensor::zeros(vec![Index::new("nu", 1), Index::new("a", 2)]).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn conjugation() {
        let real = Tensor::new(vec![Index::new("a", 2)], vec![c(1.0, 0.0), c(-2.0, 0.0)]).unwrap();
        assert_eq!(real.conj(), real);
        let z = Tensor::new(vec![Index::new("a", 1)], vec![c(1.0, 2.0)]).unwrap();
        assert_eq!(z.conj().data()[0], c(1.0, -2.0));
        assert_eq!(z.conj().conj(), z);
        let primed = z.conj_relabel(|n| Some(format!("{n}'"))).unwrap();
        assert_eq!(primed.indices()[0].name(), "a'");
    }

    #[test]
    fn traces() {
        let id = Tensor::from_fn(vec![Index::new("i", 2), Index::new("j", 2)], |p| {
            if p[0] == p[1] {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        assert_eq!(
            partial_trace(&id, &[("i", "j")])
                .unwrap()
                .to_scalar()
                .unwrap(),
            c(2.0, 0.0)
        );
        let dyad = Tensor::from_fn(vec![Index::new("i", 2), Index::new("j", 2)], |p| {
            if p == [0, 1] {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        assert_eq!(
            partial_trace(&dyad, &[("i", "j")])
                .unwrap()
                .to_scalar()
                .unwrap(),
            c(0.0, 0.0)
        );
    }

    #[test]
    fn random_partial_trace_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random(
            vec![Index::new("a", 2), Index::new("x", 3), Index::new("b", 2)],
            &mut rng,
        );
        let r = partial_trace(&t, &[("a", "b")]).unwrap();
        assert_eq!(r.indices(), &[Index::new("x", 3)]);
        for x in 0..3 {
            let expect = t.get(&[0, x, 0]) + t.get(&[1, x, 1]);
            assert!((r.get(&[x]) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_errors() {
        let t = Tensor::zeros(vec![Index::new("a", 2), Index::new("b", 3)]).unwrap();
        assert!(matches!(
            partial_trace(&t, &[("a", "zz")]),
            Err(TensorError::MissingLabel(_))
        ));
        assert!(matches!(
            partial_trace(&t, &[("a", "b")]),
            Err(TensorError::ExtentMismatch { .. })
        ));
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random(
            vec![Index::new("a", 2), Index::new("b", 3), Index::new("c", 4)],
            &mut rng,
        );
        let p = t.permute(&["c", "a", "b"]).unwrap();
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        assert_eq!(p.permute(&["a", "b", "c"]).unwrap(), t);
    }
}
