//! Thresholding, orthogonal projections onto subdictionaries, oracle
//! residuals and thresholding-failure counts.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use rayon::prelude::*;

use crate::dictionary::{sign, Dictionary};
use crate::error::{Error, Result};
use crate::model::SignalBatch;

/// Columns processed per work item when correlating a batch.
pub(crate) const CHUNK: usize = 512;

/// Relative pivot / eigenvalue floor below which a subdictionary is treated
/// as rank deficient.
pub const RANK_CUTOFF: f64 = 1e-10;

/// The `S` atoms with the largest `|<ψ_k, y>|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    indices: Vec<usize>,
    ranked: Vec<usize>,
    scores: Vec<f64>,
}

impl Support {
    /// Sorted atom indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Atom indices in selection order (largest score first).
    pub fn ranked(&self) -> &[usize] {
        &self.ranked
    }

    /// `|<ψ_k, y>|` aligned with [`Support::ranked`]; non-increasing.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }
}

/// Thresholding: the maximiser of `‖Ψ_I* y‖₁` over `|I| = s`. The criterion
/// is separable, so it is the `s` largest `|<ψ_k, y>|`; ties go to the lower
/// index.
pub fn threshold(dict: &Dictionary, y: &DVector<f64>, s: usize) -> Result<Support> {
    if s == 0 || s > dict.n_atoms() {
        return Err(Error::invalid(format!(
            "sparsity {s} outside 1..={}",
            dict.n_atoms()
        )));
    }
    if y.len() != dict.dim() {
        return Err(Error::shape(dict.dim(), y.len()));
    }
    let corr = dict.correlations(y);
    Ok(select_top(corr.as_slice(), s))
}

pub(crate) fn select_top(corr: &[f64], s: usize) -> Support {
    let mut order: Vec<usize> = (0..corr.len()).collect();
    let cmp = |a: &usize, b: &usize| corr[*b].abs().total_cmp(&corr[*a].abs()).then(a.cmp(b));
    if s < order.len() {
        order.select_nth_unstable_by(s - 1, cmp);
        order.truncate(s);
    }
    order.sort_by(cmp);
    let scores = order.iter().map(|&k| corr[k].abs()).collect();
    let mut indices = order.clone();
    indices.sort_unstable();
    Support {
        indices,
        ranked: order,
        scores,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionStrategy {
    /// Normal equations against a precomputed `Ψ*Ψ`, Cholesky per signal.
    #[default]
    GramPrecompute,
    /// Householder QR of `Ψ_I` for every signal.
    FactorPerSignal,
}

/// Per-worker state for [`project`]. The precomputed Gram matrix is shared
/// between forks; counters are not.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    strategy: ProjectionStrategy,
    gram: Option<Arc<DMatrix<f64>>>,
    sub: DMatrix<f64>,
    fallbacks: usize,
}

impl ProjectionWorkspace {
    /// Builds a workspace for projections onto subsets of `dict`'s atoms.
    pub fn new(dict: &Dictionary, strategy: ProjectionStrategy) -> Self {
        let gram = match strategy {
            ProjectionStrategy::GramPrecompute => Some(Arc::new(dict.gram())),
            ProjectionStrategy::FactorPerSignal => None,
        };
        ProjectionWorkspace {
            strategy,
            gram,
            sub: DMatrix::zeros(0, 0),
            fallbacks: 0,
        }
    }

    /// A fresh workspace for another worker on the same dictionary.
    pub fn fork(&self) -> Self {
        ProjectionWorkspace {
            strategy: self.strategy,
            gram: self.gram.clone(),
            sub: DMatrix::zeros(0, 0),
            fallbacks: 0,
        }
    }

    pub fn strategy(&self) -> ProjectionStrategy {
        self.strategy
    }

    /// Projections that needed the pseudo-inverse path.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn fill_sub_gram(&mut self, dict: &Dictionary, support: &[usize]) {
        let s = support.len();
        if self.sub.shape() != (s, s) {
            self.sub = DMatrix::zeros(s, s);
        }
        match &self.gram {
            Some(g) => {
                for (a, &i) in support.iter().enumerate() {
                    for (b, &j) in support.iter().enumerate() {
                        self.sub[(a, b)] = g[(i, j)];
                    }
                }
            }
            None => {
                for (a, &i) in support.iter().enumerate() {
                    for (b, &j) in support.iter().enumerate().skip(a) {
                        let v = dict.atom(i).dot(&dict.atom(j));
                        self.sub[(a, b)] = v;
                        self.sub[(b, a)] = v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `P(Ψ_I) y`
    pub projected: DVector<f64>,
    /// `y − P(Ψ_I) y`
    pub residual: DVector<f64>,
}

/// Orthogonal projection of `y` onto the span of the atoms in `support`.
pub fn project(
    dict: &Dictionary,
    support: &[usize],
    y: &DVector<f64>,
    ws: &mut ProjectionWorkspace,
) -> Result<Projection> {
    if y.len() != dict.dim() {
        return Err(Error::shape(dict.dim(), y.len()));
    }
    if let Some(&bad) = support.iter().find(|&&k| k >= dict.n_atoms()) {
        return Err(Error::invalid(format!("atom index {bad} out of range")));
    }
    let rhs: Vec<f64> = support.iter().map(|&k| dict.atom(k).dot(y)).collect();
    let projected = project_with_rhs(dict, support, y.as_view(), &rhs, ws);
    let residual = y - &projected;
    Ok(Projection {
        projected,
        residual,
    })
}

/// Projection given `rhs[i] = <ψ_{support[i]}, y>`.
pub(crate) fn project_with_rhs(
    dict: &Dictionary,
    support: &[usize],
    y: DVectorView<'_, f64>,
    rhs: &[f64],
    ws: &mut ProjectionWorkspace,
) -> DVector<f64> {
    let s = support.len();
    let d = dict.dim();
    if s == 0 {
        return DVector::zeros(d);
    }
    let coeffs = match ws.strategy {
        ProjectionStrategy::GramPrecompute => {
            ws.fill_sub_gram(dict, support);
            match cholesky_solve(&ws.sub, rhs) {
                Some(c) => c,
                None => {
                    ws.fallbacks += 1;
                    pinv_solve(&ws.sub, rhs)
                }
            }
        }
        ProjectionStrategy::FactorPerSignal if s > d => {
            ws.fallbacks += 1;
            ws.fill_sub_gram(dict, support);
            pinv_solve(&ws.sub, rhs)
        }
        ProjectionStrategy::FactorPerSignal => {
            let mut sub = DMatrix::zeros(d, s);
            for (j, &k) in support.iter().enumerate() {
                sub.set_column(j, &dict.atom(k));
            }
            let qr = sub.qr();
            let r = qr.r();
            let max_diag = (0..s).map(|i| r[(i, i)].powi(2)).fold(0.0, f64::max);
            if (0..s).any(|i| r[(i, i)].powi(2) < RANK_CUTOFF * max_diag) {
                ws.fallbacks += 1;
                ws.fill_sub_gram(dict, support);
                pinv_solve(&ws.sub, rhs)
            } else {
                let q = qr.q();
                return &q * (q.tr_mul(&y));
            }
        }
    };
    let mut out = DVector::zeros(d);
    for (&k, &c) in support.iter().zip(&coeffs) {
        out.axpy(c, &dict.atom(k), 1.0);
    }
    out
}

/// Solves `G a = b` for symmetric positive definite `G`; `None` when a
/// pivot falls below `RANK_CUTOFF · max diag`.
fn cholesky_solve(g: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let max_diag = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
    let floor = RANK_CUTOFF * max_diag;
    // lower triangle, row-major n x n
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = g[(j, j)];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > floor) {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = g[(i, j)];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * z[k];
        }
        z[i] = v / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in i + 1..n {
            v -= l[k * n + i] * x[k];
        }
        x[i] = v / l[i * n + i];
    }
    Some(x)
}

/// Pseudo-inverse solve through an eigen-decomposition, dropping
/// eigenvalues below `RANK_CUTOFF · λ_max`.
fn pinv_solve(g: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let eig = SymmetricEigen::new(g.clone());
    let lmax = eig.eigenvalues.max();
    let cut = RANK_CUTOFF * lmax.max(0.0);
    let bv = DVector::from_column_slice(b);
    let mut x = DVector::zeros(n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cut {
            let v = eig.eigenvectors.column(i);
            x.axpy(v.dot(&bv) / lambda, &v, 1.0);
        }
    }
    x.as_slice().to_vec()
}

/// `[y − P(Ψ_I) y + P(ψ_k) y] · σ(k) · χ(I, k)` for oracle support `I` and
/// oracle sign `σ(k)`; zero when `k ∉ I`.
pub fn oracle_residual(
    dict: &Dictionary,
    y: &DVector<f64>,
    k: usize,
    oracle_support: &[usize],
    oracle_sign: f64,
    ws: &mut ProjectionWorkspace,
) -> Result<DVector<f64>> {
    if !oracle_support.contains(&k) {
        return Ok(DVector::zeros(dict.dim()));
    }
    let p = project(dict, oracle_support, y, ws)?;
    let atom = dict.atom(k);
    let mut out = p.residual;
    out.axpy(atom.dot(y), &atom, 1.0);
    Ok(out * oracle_sign)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailureCounts {
    /// Signals whose thresholding support differs from the generating one.
    pub support_mismatches: usize,
    /// Signals with some `k ∈ I_n` where `sign(<ψ_k, y_n>) ≠ σ_n(k)`.
    pub sign_mismatches: usize,
}

impl std::ops::Add for FailureCounts {
    type Output = FailureCounts;

    fn add(self, o: FailureCounts) -> FailureCounts {
        FailureCounts {
            support_mismatches: self.support_mismatches + o.support_mismatches,
            sign_mismatches: self.sign_mismatches + o.sign_mismatches,
        }
    }
}

/// Thresholding failures of `dict` on a batch with oracle data. `dict` must
/// be aligned with the generating dictionary (same order, matching signs).
pub fn count_failures(dict: &Dictionary, batch: &SignalBatch, s: usize) -> Result<FailureCounts> {
    if batch.dim() != dict.dim() {
        return Err(Error::shape(dict.dim(), batch.dim()));
    }
    if s == 0 || s > dict.n_atoms() {
        return Err(Error::invalid(format!("sparsity {s} out of range")));
    }
    let n = batch.len();
    let counts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(n - start);
            let corr = dict.matrix().tr_mul(&batch.signals.columns(start, len));
            let mut counts = FailureCounts::default();
            for j in 0..len {
                let i = start + j;
                let col = corr.column(j);
                let support = select_top(col.as_slice(), s);
                if support.indices() != batch.supports[i].as_slice() {
                    counts.support_mismatches += 1;
                }
                let sign_fail = batch.supports[i]
                    .iter()
                    .zip(&batch.signs[i])
                    .any(|(&k, &sg)| sign(col[k]) != sg);
                if sign_fail {
                    counts.sign_mismatches += 1;
                }
            }
            counts
        })
        .reduce(FailureCounts::default, |a, b| a + b);
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{make_dirac_dct, random_dictionary};
    use crate::model::{draw_batch, CoefficientSpec};
    use crate::rng::seeded;

    #[test]
    fn threshold_picks_basis_vector() {
        let id = Dictionary::from_matrix(DMatrix::identity(5, 5)).unwrap();
        for j in 0..5 {
            let y = DVector::from_fn(5, |i, _| if i == j { 1.0 } else { 0.0 });
            assert_eq!(threshold(&id, &y, 1).unwrap().indices(), &[j]);
        }
    }

    #[test]
    fn threshold_ties_prefer_lower_index() {
        let id = Dictionary::from_matrix(DMatrix::identity(4, 4)).unwrap();
        let y = DVector::from_vec(vec![0.5, -0.5, 0.5, 0.5]);
        let s = threshold(&id, &y, 2).unwrap();
        assert_eq!(s.indices(), &[0, 1]);
        assert_eq!(s.ranked(), &[0, 1]);
    }

    #[test]
    fn threshold_rejects_bad_sparsity() {
        let id = Dictionary::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let y = DVector::zeros(3);
        assert!(threshold(&id, &y, 0).is_err());
        assert!(threshold(&id, &y, 4).is_err());
    }

    #[test]
    fn scores_non_increasing() {
        let mut rng = seeded(2);
        let d = random_dictionary(8, 20, &mut rng).unwrap();
        let y = crate::rng::gaussian_vector(8, &mut rng);
        let s = threshold(&d, &y, 6).unwrap();
        assert!(s.scores().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn single_atom_projection() {
        let mut rng = seeded(4);
        let d = random_dictionary(6, 9, &mut rng).unwrap();
        let y = crate::rng::gaussian_vector(6, &mut rng);
        for strategy in [ProjectionStrategy::GramPrecompute, ProjectionStrategy::FactorPerSignal] {
            let mut ws = ProjectionWorkspace::new(&d, strategy);
            let p = project(&d, &[3], &y, &mut ws).unwrap();
            let expected = d.atom(3) * d.atom(3).dot(&y);
            assert!((p.projected - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn duplicate_atoms_use_pseudo_inverse() {
        let mut m = DMatrix::identity(4, 4);
        m.set_column(1, &m.column(0).clone_owned());
        let d = Dictionary::from_matrix(m).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        for strategy in [ProjectionStrategy::GramPrecompute, ProjectionStrategy::FactorPerSignal] {
            let mut ws = ProjectionWorkspace::new(&d, strategy);
            let p = project(&d, &[0, 1, 2], &y, &mut ws).unwrap();
            assert!((p.projected - DVector::from_vec(vec![1.0, 0.0, 3.0, 0.0])).norm() < 1e-10);
            assert_eq!(ws.fallbacks(), 1);
            assert_eq!(ws.fork().fallbacks(), 0);
        }
    }

    #[test]
    fn oracle_residual_cases() {
        let mut rng = seeded(6);
        let d = random_dictionary(10, 14, &mut rng).unwrap();
        let y = crate::rng::gaussian_vector(10, &mut rng);
        let mut ws = ProjectionWorkspace::new(&d, ProjectionStrategy::GramPrecompute);
        let zero = oracle_residual(&d, &y, 5, &[1, 2, 3], 1.0, &mut ws).unwrap();
        assert_eq!(zero, DVector::zeros(10));
        let single = oracle_residual(&d, &y, 4, &[4], -1.0, &mut ws).unwrap();
        assert!((single + &y).norm() < 1e-12);
    }

    #[test]
    fn generating_dictionary_never_fails_on_strongly_sparse() {
        let dict = make_dirac_dct(32).unwrap();
        let spec = CoefficientSpec::flat(2, 48).unwrap();
        let batch = draw_batch(&dict, &spec, 0.0, 2000, &mut seeded(7)).unwrap();
        let c = count_failures(&dict, &batch, 2).unwrap();
        assert_eq!(c, FailureCounts::default());
    }

    #[test]
    fn full_support_never_mismatches() {
        let dict = make_dirac_dct(4).unwrap();
        let spec = CoefficientSpec::flat(6, 6).unwrap();
        let batch = draw_batch(&dict, &spec, 0.0, 200, &mut seeded(8)).unwrap();
        let other = random_dictionary(4, 6, &mut seeded(9)).unwrap();
        assert_eq!(count_failures(&other, &batch, 6).unwrap().support_mismatches, 0);
    }
}
