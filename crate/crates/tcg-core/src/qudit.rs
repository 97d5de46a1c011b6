//! Multi-site qudit Hilbert spaces, states, density matrices and operators.
//!
//! Basis convention: site 0 is the *leftmost* ket label and the most
//! significant digit, i.e. the basis index of |k0 k1 ... k_{m-1}> is
//! sum_i k_i * prod_{j>i} d_j. For two qutrits the order is
//! |00>, |01>, |02>, |10>, |11>, |12>, |20>, |21>, |22>.

use crate::linalg::{self, cr, C64};
use ndarray::{Array1, Array2};
use thiserror::Error;

pub const STRUCT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QuditError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad site index {0}")]
    BadSite(usize),
    #[error("duplicate site index {0}")]
    DuplicateSite(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&d| d >= 2));
        let total: usize = dims.iter().product();
        assert!(total >= 2);
        HilbertSpace { dims }
    }

    pub fn qutrits(m: usize) -> Self {
        HilbertSpace::new(vec![3; m])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn site_count(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Decode a basis index into per-site labels (site 0 first).
    pub fn labels_of(&self, index: usize) -> Vec<usize> {
        let mut labels = vec![0; self.dims.len()];
        let mut x = index;
        for i in (0..self.dims.len()).rev() {
            labels[i] = x % self.dims[i];
            x /= self.dims[i];
        }
        labels
    }

    /// Encode per-site labels into a basis index.
    pub fn index_of(&self, labels: &[usize]) -> usize {
        assert_eq!(labels.len(), self.dims.len());
        let mut idx = 0;
        for (l, d) in labels.iter().zip(self.dims.iter()) {
            debug_assert!(l < d);
            idx = idx * d + l;
        }
        idx
    }

    /// Basis indices whose every site label is 0 or 1, in |0..0> .. |1..1> order.
    pub fn computational_indices(&self) -> Vec<usize> {
        let m = self.dims.len();
        let mut out = Vec::with_capacity(1 << m);
        for bits in 0..(1usize << m) {
            let labels: Vec<usize> = (0..m).map(|i| (bits >> (m - 1 - i)) & 1).collect();
            out.push(self.index_of(&labels));
        }
        out
    }

    pub fn concat(&self, other: &HilbertSpace) -> HilbertSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        HilbertSpace::new(dims)
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    pub space: HilbertSpace,
    pub amps: Array1<C64>,
}

impl StateVector {
    pub fn new(space: HilbertSpace, amps: Array1<C64>) -> Result<Self, QuditError> {
        if amps.len() != space.total_dim() {
            return Err(QuditError::DimensionMismatch(format!(
                "state length {} vs space dim {}",
                amps.len(),
                space.total_dim()
            )));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STRUCT_TOL {
            return Err(QuditError::Invariant(format!("state norm {norm} != 1")));
        }
        Ok(StateVector { space, amps })
    }

    /// Computational basis state |labels>.
    pub fn basis(space: HilbertSpace, labels: &[usize]) -> Self {
        let idx = space.index_of(labels);
        let mut amps = Array1::zeros(space.total_dim());
        amps[idx] = cr(1.0);
        StateVector { space, amps }
    }

    pub fn ground(space: HilbertSpace) -> Self {
        let labels = vec![0; space.site_count()];
        Self::basis(space, &labels)
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.amps.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| self.amps[i] * self.amps[j].conj());
        DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub space: HilbertSpace,
    pub matrix: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(space: HilbertSpace, matrix: Array2<C64>) -> Result<Self, QuditError> {
        let n = space.total_dim();
        if matrix.dim() != (n, n) {
            return Err(QuditError::DimensionMismatch(format!(
                "density {:?} vs space dim {}",
                matrix.dim(),
                n
            )));
        }
        let rho = DensityMatrix { space, matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<(), QuditError> {
        let herm_err = linalg::max_abs_diff(&self.matrix, &linalg::dagger(&self.matrix));
        if herm_err > STRUCT_TOL {
            return Err(QuditError::Invariant(format!(
                "density not Hermitian, deviation {herm_err:.2e}"
            )));
        }
        let tr = linalg::trace(&self.matrix);
        if (tr.re - 1.0).abs() > STRUCT_TOL || tr.im.abs() > STRUCT_TOL {
            return Err(QuditError::Invariant(format!("density trace {tr} != 1")));
        }
        let (vals, _) = linalg::eigh(&self.matrix);
        if let Some(min) = vals.first() {
            if *min < -1e-8 {
                return Err(QuditError::Invariant(format!(
                    "density min eigenvalue {min:.2e} < -1e-8"
                )));
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// rho -> U rho U^dag
    pub fn evolved(&self, u: &Operator) -> DensityMatrix {
        let m = u.matrix.dot(&self.matrix).dot(&linalg::dagger(&u.matrix));
        DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Operator {
    pub space: HilbertSpace,
    pub matrix: Array2<C64>,
    pub unitary: bool,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: Array2<C64>) -> Self {
        let n = space.total_dim();
        assert_eq!(matrix.dim(), (n, n), "operator dimension vs space");
        let unitary = linalg::is_unitary(&matrix, STRUCT_TOL);
        Operator {
            space,
            matrix,
            unitary,
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let n = space.total_dim();
        Operator {
            space,
            matrix: linalg::eye(n),
            unitary: true,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        assert_eq!(self.space, psi.space, "operator/state space mismatch");
        StateVector {
            space: psi.space.clone(),
            amps: self.matrix.dot(&psi.amps),
        }
    }

    pub fn then(&self, next: &Operator) -> Operator {
        assert_eq!(self.space, next.space);
        Operator::new(self.space.clone(), next.matrix.dot(&self.matrix))
    }
}

/// Kronecker composition of two operators (a's sites become the leading,
/// most-significant sites of the result).
pub fn tensor_op(a: &Operator, b: &Operator) -> Operator {
    let space = a.space.concat(&b.space);
    Operator::new(space, linalg::kron(&a.matrix, &b.matrix))
}

pub fn tensor_state(a: &StateVector, b: &StateVector) -> StateVector {
    let space = a.space.concat(&b.space);
    let n = space.total_dim();
    let nb = b.space.total_dim();
    let amps = Array1::from_shape_fn(n, |i| a.amps[i / nb] * b.amps[i % nb]);
    StateVector { space, amps }
}

/// Embed `op` (acting on `sites` in the given order) into `space`, identity
/// elsewhere. Handles non-adjacent and permuted site lists.
pub fn embed(op: &Operator, sites: &[usize], space: &HilbertSpace) -> Result<Operator, QuditError> {
    let m = space.site_count();
    let mut seen = vec![false; m];
    for &s in sites {
        if s >= m {
            return Err(QuditError::BadSite(s));
        }
        if seen[s] {
            return Err(QuditError::DuplicateSite(s));
        }
        seen[s] = true;
    }
    let sub_dims: Vec<usize> = op.space.dims().to_vec();
    if sub_dims.len() != sites.len() {
        return Err(QuditError::DimensionMismatch(format!(
            "operator arity {} vs {} sites",
            sub_dims.len(),
            sites.len()
        )));
    }
    for (k, &s) in sites.iter().enumerate() {
        if space.dims()[s] != sub_dims[k] {
            return Err(QuditError::DimensionMismatch(format!(
                "site {s} has dim {} but operator expects {}",
                space.dims()[s],
                sub_dims[k]
            )));
        }
    }
    let n = space.total_dim();
    let nsub: usize = sub_dims.iter().product();
    let mut out: Array2<C64> = Array2::zeros((n, n));
    for col in 0..n {
        let labels = space.labels_of(col);
        let mut sub_col = 0usize;
        for (&s, &d) in sites.iter().zip(sub_dims.iter()) {
            sub_col = sub_col * d + labels[s];
        }
        for sub_row in 0..nsub {
            let v = op.matrix[[sub_row, sub_col]];
            if v == cr(0.0) {
                continue;
            }
            // decode sub_row into per-selected-site digits (first site most
            // significant, same convention as index_of)
            let mut digits = vec![0usize; sites.len()];
            let mut x = sub_row;
            for k in (0..sites.len()).rev() {
                digits[k] = x % sub_dims[k];
                x /= sub_dims[k];
            }
            let mut row_labels = labels.clone();
            for (&s, &dg) in sites.iter().zip(digits.iter()) {
                row_labels[s] = dg;
            }
            out[[space.index_of(&row_labels), col]] = v;
        }
    }
    Ok(Operator::new(space.clone(), out))
}

/// Restrict an operator to the computational subspace (every site in {0,1});
/// rows/columns ordered |0..0> .. |1..1>.
pub fn restrict_computational(op: &Operator) -> Array2<C64> {
    let idx = op.space.computational_indices();
    let k = idx.len();
    Array2::from_shape_fn((k, k), |(i, j)| op.matrix[[idx[i], idx[j]]])
}

/// Partial trace keeping the listed sites (result site order = `keep` order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix, QuditError> {
    let m = rho.space.site_count();
    if keep.is_empty() {
        return Err(QuditError::Invariant("keep list empty".into()));
    }
    let mut seen = vec![false; m];
    for &s in keep {
        if s >= m {
            return Err(QuditError::BadSite(s));
        }
        if seen[s] {
            return Err(QuditError::DuplicateSite(s));
        }
        seen[s] = true;
    }
    let keep_dims: Vec<usize> = keep.iter().map(|&s| rho.space.dims()[s]).collect();
    let out_space = HilbertSpace::new(keep_dims.clone());
    let nk = out_space.total_dim();
    let traced: Vec<usize> = (0..m).filter(|s| !keep.contains(s)).collect();
    let n = rho.space.total_dim();
    let mut out: Array2<C64> = Array2::zeros((nk, nk));
    for i in 0..n {
        let li = rho.space.labels_of(i);
        for j in 0..n {
            let lj = rho.space.labels_of(j);
            if traced.iter().any(|&s| li[s] != lj[s]) {
                continue;
            }
            let ki: Vec<usize> = keep.iter().map(|&s| li[s]).collect();
            let kj: Vec<usize> = keep.iter().map(|&s| lj[s]).collect();
            out[[out_space.index_of(&ki), out_space.index_of(&kj)]] += rho.matrix[[i, j]];
        }
    }
    Ok(DensityMatrix {
        space: out_space,
        matrix: out,
    })
}

/// <psi| rho |psi>, clamped into [0,1] when the excess is within 1e-9.
pub fn state_fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64, QuditError> {
    if rho.space != psi.space {
        return Err(QuditError::DimensionMismatch("fidelity spaces".into()));
    }
    let v = rho.matrix.dot(&psi.amps);
    let f: C64 = psi
        .amps
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let f = f.re;
    if f < -1e-9 || f > 1.0 + 1e-9 {
        return Err(QuditError::Invariant(format!("fidelity {f} outside [0,1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// min over gamma of ||u - e^{i gamma} v||_max using gamma = -arg(Tr(v^dag u)).
/// Returns (distance, comparable); comparable=false when the trace overlap is
/// ~0 and the optimal phase is undefined (distance then computed at gamma=0).
pub fn distance_up_to_global_phase(u: &Operator, v: &Operator) -> (f64, bool) {
    assert_eq!(u.space, v.space);
    let overlap = linalg::trace(&linalg::dagger(&v.matrix).dot(&u.matrix));
    if overlap.norm() < 1e-12 {
        return (linalg::max_abs_diff(&u.matrix, &v.matrix), false);
    }
    let gamma = -overlap.arg();
    let shifted = u.matrix.mapv(|z| z * linalg::cis(gamma));
    (linalg::max_abs_diff(&shifted, &v.matrix), true)
}
