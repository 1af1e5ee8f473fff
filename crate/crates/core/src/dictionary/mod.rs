//! Dictionaries of unit-norm atoms: constructors, metrics, distances and
//! perturbation decompositions.

mod matching;

pub use matching::{bottleneck_assignment, hopcroft_karp};

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on `| ||atom|| - 1 |` for every stored column.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Default cap on the number of supports `restricted_isometry` enumerates.
pub const DEFAULT_SUPPORT_CAP: u128 = 2_000_000;

/// Default inner-product threshold for counting an atom as recovered.
pub const RECOVERY_THRESHOLD: f64 = 0.99;

/// A `d x K` matrix whose columns (atoms) have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    /// Wraps a matrix whose columns are already unit norm.
    pub fn from_matrix(atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (k, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::invalid(format!(
                    "atom {k} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Normalises every column; zero columns are rejected.
    pub fn from_unnormalized(mut atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (k, mut col) in atoms.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm < 1e-12 {
                return Err(Error::invalid(format!("atom {k} has zero norm")));
            }
            col /= norm;
        }
        Ok(Dictionary { atoms })
    }

    pub(crate) fn from_matrix_unchecked(atoms: DMatrix<f64>) -> Self {
        debug_assert!(atoms
            .column_iter()
            .all(|c| (c.norm() - 1.0).abs() <= UNIT_NORM_TOL));
        Dictionary { atoms }
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `K`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, k: usize) -> DVectorView<'_, f64> {
        self.atoms.column(k)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.atoms
    }

    /// `Ψ*Ψ`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.atoms.tr_mul(&self.atoms)
    }

    /// `Ψ*y`.
    pub fn correlations(&self, y: &DVector<f64>) -> DVector<f64> {
        self.atoms.tr_mul(y)
    }

    /// Returns the dictionary with columns reordered and re-signed so that
    /// column `k` of the result is `signs[k] * self[permutation[k]]`.
    pub fn permuted(&self, permutation: &[usize], signs: &[f64]) -> Result<Dictionary> {
        let k = self.n_atoms();
        if permutation.len() != k || signs.len() != k {
            return Err(Error::shape(k, permutation.len().min(signs.len())));
        }
        let mut seen = vec![false; k];
        for &p in permutation {
            if p >= k || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        let mut atoms = DMatrix::zeros(self.dim(), k);
        for (j, (&p, &s)) in permutation.iter().zip(signs).enumerate() {
            atoms.set_column(j, &(self.atoms.column(p) * s));
        }
        Ok(Dictionary { atoms })
    }

    /// Reorders and re-signs `self` to line up with `reference` using the
    /// optimal symmetric-distance assignment.
    pub fn aligned_to(&self, reference: &Dictionary) -> Result<(Dictionary, SymmetricDistance)> {
        let sym = distance_sym(reference, self)?;
        let aligned = self.permuted(&sym.permutation, &sym.signs)?;
        Ok((aligned, sym))
    }
}

fn check_shape(atoms: &DMatrix<f64>) -> Result<()> {
    if atoms.nrows() == 0 || atoms.ncols() == 0 {
        return Err(Error::invalid(format!(
            "dictionary must be non-empty, got {}x{}",
            atoms.nrows(),
            atoms.ncols()
        )));
    }
    if atoms.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("dictionary has non-finite entries"));
    }
    Ok(())
}

fn same_shape(a: &Dictionary, b: &Dictionary) -> Result<()> {
    if a.dim() != b.dim() || a.n_atoms() != b.n_atoms() {
        return Err(Error::shape(
            format!("{}x{}", a.dim(), a.n_atoms()),
            format!("{}x{}", b.dim(), b.n_atoms()),
        ));
    }
    Ok(())
}

/// `sign(0) := +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `√(2 − 2|ip|)` with `|ip|` clamped to `[0, 1]`.
#[inline]
pub fn atom_distance(ip: f64) -> f64 {
    let a = ip.abs().min(1.0);
    (2.0 - 2.0 * a).max(0.0).sqrt()
}

/// `‖a − sign(ip)·b‖` evaluated directly; agrees with [`atom_distance`]
/// but keeps full precision for nearly identical atoms.
pub(crate) fn pair_distance(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>, ip: f64) -> f64 {
    let s = sign(ip);
    a.iter().zip(b.iter()).map(|(x, y)| (x - s * y).powi(2)).sum::<f64>().sqrt()
}

/// The Dirac basis followed by the `d/2` lowest-frequency orthonormal DCT-II
/// atoms, `K = 3d/2`.
pub fn make_dirac_dct(d: usize) -> Result<Dictionary> {
    if d < 4 || d % 2 != 0 {
        return Err(Error::invalid(format!(
            "Dirac+DCT needs an even dimension >= 4, got {d}"
        )));
    }
    let k = d + d / 2;
    let mut atoms = DMatrix::zeros(d, k);
    for i in 0..d {
        atoms[(i, i)] = 1.0;
    }
    for j in 0..d / 2 {
        let mut col = atoms.column_mut(d + j);
        for n in 0..d {
            col[n] = dct2_entry(d, j, n);
        }
        let norm = col.norm();
        col /= norm;
    }
    Ok(Dictionary { atoms })
}

fn dct2_entry(d: usize, freq: usize, n: usize) -> f64 {
    let df = d as f64;
    if freq == 0 {
        1.0 / df.sqrt()
    } else {
        let angle = std::f64::consts::PI * (2 * n + 1) as f64 * freq as f64 / (2.0 * df);
        (2.0 / df).sqrt() * angle.cos()
    }
}

/// Columns drawn i.i.d. uniformly from the unit sphere.
pub fn random_dictionary<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Dictionary> {
    if d == 0 || k == 0 {
        return Err(Error::invalid("random dictionary needs d, K >= 1"));
    }
    let mut atoms = DMatrix::zeros(d, k);
    for j in 0..k {
        atoms.set_column(j, &rng::unit_vector(d, rng));
    }
    Ok(Dictionary { atoms })
}

/// A low-coherence frame: starts from a random dictionary and alternates
/// shrinking the largest Gram entries with projecting back to rank `d`.
/// Returns the least coherent iterate seen.
pub fn incoherent_dictionary<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<Dictionary> {
    let mut current = random_dictionary(d, k, rng)?;
    if k <= d {
        return Ok(current);
    }
    let mut best = (coherence(&current), current.clone());
    for _ in 0..iterations {
        let mut g = current.gram();
        let mu = coherence(&current);
        if mu < best.0 {
            best = (mu, current.clone());
        }
        let t = 0.9 * mu;
        for v in g.iter_mut() {
            if v.abs() > t && v.abs() < 1.0 - 1e-12 {
                *v = 0.7 * *v + 0.3 * t * v.signum();
            }
        }
        g.fill_diagonal(1.0);
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut atoms = DMatrix::zeros(d, k);
        for (row, &i) in order.iter().take(d).enumerate() {
            let scale = eig.eigenvalues[i].max(0.0).sqrt();
            for j in 0..k {
                atoms[(row, j)] = scale * eig.eigenvectors[(j, i)];
            }
        }
        current = Dictionary::from_unnormalized(atoms)?;
    }
    if coherence(&current) < best.0 {
        best.1 = current;
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryMetrics {
    pub coherence: f64,
    pub frame_lower: f64,
    pub frame_upper: f64,
}

/// Coherence from all pairwise inner products; frame bounds as the extreme
/// eigenvalues of `ΦΦ*`.
pub fn compute_metrics(dict: &Dictionary) -> DictionaryMetrics {
    let coherence = coherence(dict);
    let frame = dict.matrix() * dict.matrix().transpose();
    let eig = SymmetricEigen::new(frame);
    let lower = eig.eigenvalues.min().max(0.0);
    let upper = eig.eigenvalues.max();
    DictionaryMetrics {
        coherence,
        frame_lower: lower,
        frame_upper: upper.max(lower),
    }
}

pub fn coherence(dict: &Dictionary) -> f64 {
    let gram = dict.gram();
    let k = dict.n_atoms();
    let mut mu: f64 = 0.0;
    for j in 0..k {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    mu.min(1.0)
}

/// Number of `s`-subsets of `k` elements, saturating.
pub fn binomial(k: usize, s: usize) -> u128 {
    if s > k {
        return 0;
    }
    let s = s.min(k - s);
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = match acc.checked_mul((k - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic walk over all `s`-subsets of `0..k`.
pub(crate) fn for_each_subset(k: usize, s: usize, mut f: impl FnMut(&[usize])) {
    if s > k {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + k - s {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Isometry constant `δ_S`: worst eigenvalue deviation of `Φ_I*Φ_I` from one
/// over every support of size `s`. Exhaustive, so refuses beyond `cap`
/// supports.
pub fn restricted_isometry(dict: &Dictionary, s: usize, cap: u128) -> Result<f64> {
    let k = dict.n_atoms();
    if s == 0 || s > k {
        return Err(Error::invalid(format!("support size {s} outside 1..={k}")));
    }
    let count = binomial(k, s);
    if count > cap {
        return Err(Error::EnumerationCap {
            supports: count,
            cap,
        });
    }
    let gram = dict.gram();
    let mut delta: f64 = 0.0;
    let mut sub = DMatrix::zeros(s, s);
    for_each_subset(k, s, |support| {
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                sub[(a, b)] = gram[(i, j)];
            }
        }
        let eig = SymmetricEigen::new(sub.clone());
        for &l in eig.eigenvalues.iter() {
            delta = delta.max((l - 1.0).abs());
        }
    });
    Ok(delta)
}

/// `d(D, P) = max_k min_ℓ ‖d_k ± p_ℓ‖`. Not symmetric in its arguments.
///
/// The best partner of each `d_k` is picked by largest `|<d_k, p_ℓ>|`
/// (clamped to 1); its distance is then evaluated directly, since
/// `√(2 − 2|ip|)` loses half the digits when the atoms nearly coincide.
pub fn distance_asym(d: &Dictionary, p: &Dictionary) -> Result<f64> {
    same_shape(d, p)?;
    let cross = d.matrix().tr_mul(p.matrix());
    let mut worst: f64 = 0.0;
    for k in 0..cross.nrows() {
        let row = cross.row(k);
        let best = (0..row.len())
            .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()).then(b.cmp(&a)))
            .expect("non-empty dictionary");
        worst = worst.max(pair_distance(d.atom(k), p.atom(best), row[best]));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricDistance {
    pub distance: f64,
    /// `permutation[k]` is the atom of the second dictionary matched to atom
    /// `k` of the first.
    pub permutation: Vec<usize>,
    /// Sign of `<d_k, p_{permutation[k]}>`, zero mapped to `+1`.
    pub signs: Vec<f64>,
}

/// `d_s(D, P) = min_perm max_k ‖d_k ± p_perm(k)‖`, solved exactly as a
/// bottleneck assignment over the inner-product form of the pair costs. The
/// reported distance is re-evaluated directly on the optimal pairing.
pub fn distance_sym(d: &Dictionary, p: &Dictionary) -> Result<SymmetricDistance> {
    same_shape(d, p)?;
    let k = d.n_atoms();
    let cross = d.matrix().tr_mul(p.matrix());
    let mut cost = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            cost[i * k + j] = atom_distance(cross[(i, j)]);
        }
    }
    let (_, permutation) = bottleneck_assignment(k, &cost);
    let distance = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| pair_distance(d.atom(i), p.atom(j), cross[(i, j)]))
        .fold(0.0, f64::max);
    let signs = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| sign(cross[(i, j)]))
        .collect();
    Ok(SymmetricDistance {
        distance,
        permutation,
        signs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub rate: f64,
    /// One flag per generating atom.
    pub recovered: Vec<bool>,
}

/// Generating atom `k` counts as recovered when some learned atom has
/// `|<ψ_ℓ, φ_k>| >= threshold`. Several generating atoms may share one
/// learned atom.
pub fn recovery_stats(
    learned: &Dictionary,
    generating: &Dictionary,
    threshold: f64,
) -> Result<Recovery> {
    same_shape(learned, generating)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} not in (0, 1]")));
    }
    let cross = generating.matrix().tr_mul(learned.matrix());
    let recovered: Vec<bool> = cross
        .row_iter()
        .map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())) >= threshold)
        .collect();
    let rate = recovered.iter().filter(|&&r| r).count() as f64 / recovered.len() as f64;
    Ok(Recovery { rate, recovered })
}

/// Per-atom pieces of `ψ_k = α_k φ_k + ω_k z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPerturbation {
    pub eps: f64,
    pub alpha: f64,
    pub omega: f64,
    pub z: DVector<f64>,
    /// `(ω_k / α_k) z_k`
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDecomposition {
    pub atoms: Vec<AtomPerturbation>,
}

impl PerturbationDecomposition {
    pub fn max_eps(&self) -> f64 {
        self.atoms.iter().map(|a| a.eps).fold(0.0, f64::max)
    }

    /// `α_k φ_k + ω_k z_k`.
    pub fn reconstruct(&self, reference: &Dictionary, k: usize) -> DVector<f64> {
        let a = &self.atoms[k];
        reference.atom(k) * a.alpha + &a.z * a.omega
    }
}

/// Decomposes `p` relative to `reference`. Both must already be aligned:
/// same atom order and `<φ_k, ψ_k> >= 0` (see [`Dictionary::aligned_to`]).
pub fn decompose(p: &Dictionary, reference: &Dictionary) -> Result<PerturbationDecomposition> {
    same_shape(p, reference)?;
    let mut atoms = Vec::with_capacity(p.n_atoms());
    for k in 0..p.n_atoms() {
        let phi = reference.atom(k);
        let psi = p.atom(k);
        let eps = (psi - phi).norm();
        let alpha = 1.0 - eps * eps / 2.0;
        if alpha <= 0.0 {
            return Err(Error::DecompositionOutOfRange { atom: k, eps });
        }
        let omega = (eps * eps - eps.powi(4) / 4.0).max(0.0).sqrt();
        let z = if omega > 1e-12 {
            let residual = psi - phi * phi.dot(&psi);
            let norm = residual.norm();
            if norm > 1e-12 {
                residual / norm
            } else {
                orthogonal_unit(phi)
            }
        } else {
            orthogonal_unit(phi)
        };
        let b = &z * (omega / alpha);
        atoms.push(AtomPerturbation {
            eps,
            alpha,
            omega,
            z,
            b,
        });
    }
    Ok(PerturbationDecomposition { atoms })
}

/// A fixed unit vector orthogonal to `phi`: the canonical basis vector where
/// `phi` is smallest, with the `phi` component removed.
fn orthogonal_unit(phi: DVectorView<'_, f64>) -> DVector<f64> {
    let d = phi.len();
    if d == 1 {
        // no orthogonal direction exists; keep the field well defined
        return DVector::zeros(1);
    }
    let j = phi.iamin();
    let mut e = DVector::zeros(d);
    e[j] = 1.0;
    let v = &e - phi * phi[j];
    let norm = v.norm();
    v / norm
}

/// Weights `α : ω` for a perturbed initialisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitRatio {
    pub alpha: f64,
    pub omega: f64,
}

impl InitRatio {
    pub fn new(alpha: f64, omega: f64) -> Result<Self> {
        if !(alpha >= 0.0 && omega >= 0.0) || alpha + omega == 0.0 {
            return Err(Error::invalid(format!("bad ratio {alpha}:{omega}")));
        }
        Ok(InitRatio { alpha, omega })
    }

    /// Rescaled so `α² + ω² = 1`.
    pub fn normalized(self) -> (f64, f64) {
        let n = self.alpha.hypot(self.omega);
        (self.alpha / n, self.omega / n)
    }

    /// Distance of every perturbed atom from its source: `√(2 − 2α)` after
    /// normalisation.
    pub fn atom_distance(self) -> f64 {
        let (a, _) = self.normalized();
        (2.0 - 2.0 * a).sqrt()
    }
}

impl std::str::FromStr for InitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, w) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("ratio '{s}' is not of the form a:w")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("ratio '{s}' has a non-numeric part")))
        };
        InitRatio::new(parse(a)?, parse(w)?)
    }
}

/// `ψ_k = α φ_k + ω Q(φ_k) z_k / ‖Q(φ_k) z_k‖` with `z_k` uniform on the
/// sphere and `Q(φ_k)` the projector onto the complement of `φ_k`.
pub fn perturb_init<R: Rng + ?Sized>(
    dict: &Dictionary,
    ratio: InitRatio,
    rng: &mut R,
) -> Dictionary {
    let (alpha, omega) = ratio.normalized();
    if omega == 0.0 {
        return dict.clone();
    }
    let d = dict.dim();
    let mut atoms = DMatrix::zeros(d, dict.n_atoms());
    for k in 0..dict.n_atoms() {
        let phi = dict.atom(k);
        let q = loop {
            let z = rng::unit_vector(d, rng);
            let q = &z - phi * phi.dot(&z);
            let norm = q.norm();
            if norm >= 1e-12 {
                break q / norm;
            }
        };
        let mut psi = phi * alpha + q * omega;
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-14 {
            psi /= norm;
        }
        atoms.set_column(k, &psi);
    }
    Dictionary { atoms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn identity(d: usize) -> Dictionary {
        Dictionary::from_matrix(DMatrix::identity(d, d)).unwrap()
    }

    #[test]
    fn dirac_dct_rejects_bad_dimensions() {
        assert!(make_dirac_dct(5).is_err());
        assert!(make_dirac_dct(2).is_err());
        assert!(make_dirac_dct(0).is_err());
    }

    #[test]
    fn dirac_dct_small() {
        let d = make_dirac_dct(4).unwrap();
        assert_eq!((d.dim(), d.n_atoms()), (4, 6));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.matrix()[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
        // DC atom is constant
        for i in 0..4 {
            assert_relative_eq!(d.matrix()[(i, 4)], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn dirac_dct_coherence_matches_pairwise_scan() {
        let d = make_dirac_dct(64).unwrap();
        let m = d.matrix();
        let mut brute: f64 = 0.0;
        for i in 0..m.ncols() {
            for j in 0..m.ncols() {
                if i != j {
                    let ip: f64 = (0..m.nrows()).map(|r| m[(r, i)] * m[(r, j)]).sum();
                    brute = brute.max(ip.abs());
                }
            }
        }
        assert_relative_eq!(coherence(&d), brute, epsilon = 1e-14);
        // lowest non-DC DCT atom against the first Dirac atom
        let expected = (2.0f64 / 64.0).sqrt() * (std::f64::consts::PI / 128.0).cos();
        assert_relative_eq!(brute, expected, epsilon = 1e-14);
    }

    #[test]
    fn orthonormal_basis_metrics() {
        let m = compute_metrics(&identity(5));
        assert_eq!(m.coherence, 0.0);
        assert_relative_eq!(m.frame_lower, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.frame_upper, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_frame_bounds_match_dense_eigensolve() {
        let mut rng = seeded(3);
        let d = random_dictionary(8, 12, &mut rng).unwrap();
        let m = compute_metrics(&d);
        // independent route: eigenvalues of Φ*Φ share the nonzero spectrum of ΦΦ*
        let eig = SymmetricEigen::new(d.gram());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(m.frame_upper, ev[0], max_relative = 1e-10);
        assert_relative_eq!(m.frame_lower, ev[7], max_relative = 1e-10);
        // trace identity: sum of eigenvalues of ΦΦ* equals K
        let frame = d.matrix() * d.matrix().transpose();
        assert_relative_eq!(frame.trace(), 12.0, epsilon = 1e-10);
    }

    #[test]
    fn tight_frame_bounds() {
        // Dirac + full orthonormal DCT is a tight frame with A = B = 2
        let dd = make_dirac_dct(8).unwrap();
        let mut full = DMatrix::zeros(8, 16);
        full.view_mut((0, 0), (8, 8)).copy_from(&DMatrix::<f64>::identity(8, 8));
        for j in 0..8 {
            for n in 0..8 {
                full[(n, 8 + j)] = dct2_entry(8, j, n);
            }
        }
        let tight = Dictionary::from_unnormalized(full).unwrap();
        let m = compute_metrics(&tight);
        assert_relative_eq!(m.frame_lower, 2.0, epsilon = 1e-10);
        assert_relative_eq!(m.frame_upper, 2.0, epsilon = 1e-10);
        let half = compute_metrics(&dd);
        assert_relative_eq!(half.frame_upper, 2.0, epsilon = 1e-10);
        assert_relative_eq!(half.frame_lower, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn isometry_constant_basics() {
        assert_eq!(restricted_isometry(&identity(6), 3, DEFAULT_SUPPORT_CAP).unwrap(), 0.0);
        let d = make_dirac_dct(4).unwrap();
        assert!(restricted_isometry(&d, 1, DEFAULT_SUPPORT_CAP).unwrap() < 1e-14);
        assert!(matches!(
            restricted_isometry(&d, 3, 10),
            Err(Error::EnumerationCap { supports: 20, cap: 10 })
        ));
    }

    #[test]
    fn isometry_pairs_equal_coherence() {
        // for S = 2 the eigenvalues of a 2x2 Gram block are 1 ± |<a, b>|
        let d = make_dirac_dct(4).unwrap();
        let delta = restricted_isometry(&d, 2, DEFAULT_SUPPORT_CAP).unwrap();
        assert_relative_eq!(delta, coherence(&d), epsilon = 1e-14);
    }

    #[test]
    fn subsets_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(seen.last().unwrap(), &vec![2, 3, 4]);
        let mut all = Vec::new();
        for_each_subset(3, 3, |s| all.push(s.to_vec()));
        assert_eq!(all, vec![vec![0, 1, 2]]);
        assert_eq!(binomial(384, 4), 891_881_376);
    }

    #[test]
    fn asym_distance_zero_and_sign_invariant() {
        let mut rng = seeded(1);
        let d = random_dictionary(10, 15, &mut rng).unwrap();
        assert_eq!(distance_asym(&d, &d).unwrap(), 0.0);
        let flipped = Dictionary::from_matrix(-d.matrix().clone()).unwrap();
        assert_eq!(distance_asym(&d, &flipped).unwrap(), 0.0);
        let other = random_dictionary(10, 14, &mut rng).unwrap();
        assert!(matches!(
            distance_asym(&d, &other),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sym_distance_recovers_signed_permutation() {
        let mut rng = seeded(2);
        let d = random_dictionary(6, 9, &mut rng).unwrap();
        let perm = vec![4, 0, 8, 2, 1, 7, 3, 6, 5];
        let signs = vec![1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let p = d.permuted(&perm, &signs).unwrap();
        let sym = distance_sym(&d, &p).unwrap();
        assert_eq!(sym.distance, 0.0);
        let (aligned, _) = p.aligned_to(&d).unwrap();
        assert!((aligned.matrix() - d.matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn recovery_flags() {
        let d = make_dirac_dct(8).unwrap();
        let r = recovery_stats(&d, &d, RECOVERY_THRESHOLD).unwrap();
        assert_eq!(r.rate, 1.0);
        assert!(recovery_stats(&d, &d, 0.0).is_err());
        assert!(recovery_stats(&d, &d, 1.5).is_err());
    }

    #[test]
    fn decompose_identity_and_half_angle() {
        let d = make_dirac_dct(8).unwrap();
        let dec = decompose(&d, &d).unwrap();
        for a in &dec.atoms {
            assert_eq!((a.eps, a.alpha, a.omega), (0.0, 1.0, 0.0));
            assert_relative_eq!(a.z.norm(), 1.0, epsilon = 1e-12);
        }
        for k in 0..d.n_atoms() {
            assert!(dec.atoms[k].z.dot(&d.atom(k)).abs() < 1e-12);
        }

        let id = identity(4);
        let mut m = DMatrix::identity(4, 4);
        m.set_column(0, &(DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]) / 2f64.sqrt()));
        let p = Dictionary::from_matrix(m).unwrap();
        let dec = decompose(&p, &id).unwrap();
        let a = &dec.atoms[0];
        assert_relative_eq!(a.eps, (2.0 - 2f64.sqrt()).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(a.alpha, 2f64.sqrt() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(a.omega, 2f64.sqrt() / 2.0, epsilon = 1e-14);
        assert!((dec.reconstruct(&id, 0) - p.atom(0)).norm() < 1e-12);
    }

    #[test]
    fn decompose_rejects_antipodal() {
        let id = identity(3);
        let neg = Dictionary::from_matrix(-DMatrix::<f64>::identity(3, 3)).unwrap();
        assert!(matches!(
            decompose(&neg, &id),
            Err(Error::DecompositionOutOfRange { atom: 0, .. })
        ));
    }

    #[test]
    fn ratio_parsing() {
        let r: InitRatio = "1:4".parse().unwrap();
        assert_eq!((r.alpha, r.omega), (1.0, 4.0));
        assert!("1-4".parse::<InitRatio>().is_err());
        assert!("0:0".parse::<InitRatio>().is_err());
        assert!("a:1".parse::<InitRatio>().is_err());
    }

    #[test]
    fn perturb_zero_omega_is_identity() {
        let d = make_dirac_dct(16).unwrap();
        let mut rng = seeded(4);
        let p = perturb_init(&d, InitRatio::new(1.0, 0.0).unwrap(), &mut rng);
        assert_eq!(p, d);
    }

    #[test]
    fn random_dictionary_is_seeded() {
        let a = random_dictionary(7, 9, &mut seeded(11)).unwrap();
        let b = random_dictionary(7, 9, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
        for c in a.matrix().column_iter() {
            assert!((c.norm() - 1.0).abs() <= UNIT_NORM_TOL);
        }
    }

    #[test]
    fn incoherent_frame_beats_strong_sparsity_threshold() {
        let dict = incoherent_dictionary(32, 48, 300, &mut rng::seeded(0)).unwrap();
        let mu = coherence(&dict);
        assert!(mu < 1.0 / 6.0, "{mu}");
        for j in 0..48 {
            assert!((dict.atom(j).norm() - 1.0).abs() < 1e-12);
        }
    }
}
