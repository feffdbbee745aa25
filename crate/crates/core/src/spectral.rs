//! Measurement models in SVD form and the quadratic-tilt parameterization of
//! posteriors.
//!
//! All tilt algebra happens in the fixed right-singular basis `V` of the
//! measurement operator. In that basis every downstream ODE is diagonal, so a
//! tilt is just a list of per-direction curvatures and linear coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Singular values below this fraction of the largest one are set to zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

const ORTHO_TOL: f64 = 1e-10;

/// A measurement matrix `A = U diag(s) Vᵀ` with `U` (d'×d'), `V` (d×d).
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    u: DMatrix<f64>,
    singulars: DVector<f64>,
    v: DMatrix<f64>,
}

impl SpectralOperator {
    /// Decompose a dense `d' × d` matrix (`d' ≤ d`).
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let (dp, d) = a.shape();
        if dp == 0 || d == 0 {
            return Err(Error::InvalidParameter("empty measurement matrix".into()));
        }
        if dp > d {
            return Err(Error::InvalidParameter(format!(
                "measurement matrix has more rows ({dp}) than columns ({d})"
            )));
        }
        ensure_finite(a.as_slice(), "measurement matrix")?;
        let svd = a
            .clone()
            .try_svd(true, true, f64::EPSILON, 10_000)
            .ok_or(Error::SvdFailure)?;
        let u_thin = svd.u.ok_or(Error::SvdFailure)?;
        let v_t = svd.v_t.ok_or(Error::SvdFailure)?;
        let s = svd.singular_values;

        let mut order: Vec<usize> = (0..dp).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

        let mut u = DMatrix::zeros(dp, dp);
        let mut singulars = DVector::zeros(dp);
        let mut v_cols = DMatrix::zeros(d, dp);
        for (k, &i) in order.iter().enumerate() {
            u.set_column(k, &u_thin.column(i));
            singulars[k] = s[i];
            v_cols.set_column(k, &v_t.row(i).transpose());
        }
        let v = complete_basis(&v_cols);
        Self::from_factors(u, singulars, v)
    }

    /// Build from explicit factors; singular values are sorted descending and
    /// tiny ones truncated to zero.
    pub fn from_factors(
        u: DMatrix<f64>,
        singulars: DVector<f64>,
        v: DMatrix<f64>,
    ) -> Result<Self> {
        let dp = singulars.len();
        let d = v.nrows();
        if u.shape() != (dp, dp) {
            return Err(Error::DimensionMismatch { expected: dp, got: u.nrows() });
        }
        if v.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.ncols() });
        }
        if dp > d {
            return Err(Error::InvalidParameter("d' must not exceed d".into()));
        }
        ensure_finite(singulars.as_slice(), "singular values")?;
        if singulars.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidParameter("negative singular value".into()));
        }
        for (m, name) in [(&u, "U"), (&v, "V")] {
            let err = (m.transpose() * m - DMatrix::identity(m.ncols(), m.ncols())).norm();
            if err > ORTHO_TOL * (m.ncols() as f64).max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not orthogonal (‖{name}ᵀ{name} − I‖ = {err:e})"
                )));
            }
        }

        let mut order: Vec<usize> = (0..dp).collect();
        order.sort_by(|&i, &j| singulars[j].total_cmp(&singulars[i]));
        let mut u_sorted = u.clone();
        let mut s_sorted = singulars.clone();
        let mut v_sorted = v.clone();
        for (k, &i) in order.iter().enumerate() {
            u_sorted.set_column(k, &u.column(i));
            s_sorted[k] = singulars[i];
            v_sorted.set_column(k, &v.column(i));
        }
        let top = s_sorted.iter().copied().fold(0.0, f64::max);
        for s in s_sorted.iter_mut() {
            if *s < SINGULAR_CUTOFF * top {
                *s = 0.0;
            }
        }
        Ok(Self { u: u_sorted, singulars: s_sorted, v: v_sorted })
    }

    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    pub fn d_prime(&self) -> usize {
        self.singulars.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singulars(&self) -> &DVector<f64> {
        &self.singulars
    }

    /// Reassemble `U diag(s) Vᵀ`.
    pub fn dense(&self) -> DMatrix<f64> {
        let (dp, d) = (self.d_prime(), self.d());
        let mut sigma = DMatrix::zeros(dp, d);
        for i in 0..dp {
            sigma[(i, i)] = self.singulars[i];
        }
        &self.u * sigma * self.v.transpose()
    }
}

/// Extend `d'` orthonormal columns to an orthonormal basis of ℝᵈ.
fn complete_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = cols.shape();
    let mut basis: Vec<DVector<f64>> = (0..k).map(|j| cols.column(j).into_owned()).collect();
    let mut used = vec![false; d];
    while basis.len() < d {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for i in (0..d).filter(|&i| !used[i]) {
            let mut r = DVector::zeros(d);
            r[i] = 1.0;
            // Two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&r);
                    r.axpy(-c, b, 1.0);
                }
            }
            let n = r.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| n > *bn) {
                best = Some((i, r, n));
            }
        }
        let (i, r, n) = best.expect("basis completion ran out of candidates");
        used[i] = true;
        basis.push(r / n);
    }
    DMatrix::from_columns(&basis)
}

/// Serialized form of a measurement model; the SVD is recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeasurementSpec {
    pub d: usize,
    pub d_prime: usize,
    pub sigma: f64,
    /// Row-major `d' × d`.
    pub a_dense: Vec<f64>,
    pub y: Vec<f64>,
}

/// A linear-Gaussian observation `y = A x + σ w`.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    op: SpectralOperator,
    sigma: f64,
    y: DVector<f64>,
}

impl MeasurementModel {
    pub fn new(op: SpectralOperator, sigma: f64, y: DVector<f64>) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("noise std must be positive, got {sigma}")));
        }
        if y.len() != op.d_prime() {
            return Err(Error::DimensionMismatch { expected: op.d_prime(), got: y.len() });
        }
        ensure_finite(y.as_slice(), "observation")?;
        Ok(Self { op, sigma, y })
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.op
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn d(&self) -> usize {
        self.op.d()
    }

    /// `Uᵀ y`
    pub fn rotated_observation(&self) -> DVector<f64> {
        self.op.u().transpose() * &self.y
    }

    /// `σ⁻² AᵀA`
    pub fn q_dense(&self) -> DMatrix<f64> {
        let a = self.op.dense();
        a.transpose() * a / (self.sigma * self.sigma)
    }

    /// `σ⁻² Aᵀ y`
    pub fn b_dense(&self) -> DVector<f64> {
        self.op.dense().transpose() * &self.y / (self.sigma * self.sigma)
    }

    /// `−‖Ax − y‖² / (2σ²)`
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let r = self.op.dense() * DVector::from_column_slice(x) - &self.y;
        -r.norm_squared() / (2.0 * self.sigma * self.sigma)
    }

    pub fn to_spec(&self) -> MeasurementSpec {
        let a = self.op.dense();
        let mut a_dense = Vec::with_capacity(a.len());
        for i in 0..a.nrows() {
            a_dense.extend(a.row(i).iter());
        }
        MeasurementSpec {
            d: self.d(),
            d_prime: self.op.d_prime(),
            sigma: self.sigma,
            a_dense,
            y: self.y.iter().copied().collect(),
        }
    }

    pub fn from_spec(spec: &MeasurementSpec) -> Result<Self> {
        if spec.a_dense.len() != spec.d * spec.d_prime {
            return Err(Error::DimensionMismatch {
                expected: spec.d * spec.d_prime,
                got: spec.a_dense.len(),
            });
        }
        let a = DMatrix::from_row_slice(spec.d_prime, spec.d, &spec.a_dense);
        build_measurement(&a, spec.sigma, &DVector::from_column_slice(&spec.y))
    }
}

/// Decompose `A` and wrap it with noise level and observation.
pub fn build_measurement(a: &DMatrix<f64>, sigma: f64, y: &DVector<f64>) -> Result<MeasurementModel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise std must be positive, got {sigma}")));
    }
    let op = SpectralOperator::from_dense(a)?;
    MeasurementModel::new(op, sigma, y.clone())
}

/// One eigendirection of a quadratic tilt `exp(−½ xᵀQx + xᵀb)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TiltEntry {
    /// Curvature `q ≥ 0` and linear coefficient `xi` along the direction.
    Finite { q: f64, xi: f64 },
    /// Infinite curvature: the coordinate is constrained to `at`.
    Pinned { at: f64 },
}

impl TiltEntry {
    pub fn curvature(&self) -> Option<f64> {
        match *self {
            TiltEntry::Finite { q, .. } => Some(q),
            TiltEntry::Pinned { .. } => None,
        }
    }

    pub fn is_pinned(&self) -> bool {
        matches!(self, TiltEntry::Pinned { .. })
    }
}

/// A quadratic tilt stored in an orthonormal eigenbasis.
#[derive(Clone, Debug)]
pub struct QuadraticTilt {
    eigvecs: DMatrix<f64>,
    entries: Vec<TiltEntry>,
}

impl QuadraticTilt {
    pub fn new(eigvecs: DMatrix<f64>, entries: Vec<TiltEntry>) -> Result<Self> {
        if eigvecs.nrows() != eigvecs.ncols() {
            return Err(Error::InvalidParameter("eigenvector matrix must be square".into()));
        }
        if entries.len() != eigvecs.ncols() {
            return Err(Error::DimensionMismatch { expected: eigvecs.ncols(), got: entries.len() });
        }
        for e in &entries {
            match *e {
                TiltEntry::Finite { q, xi } => {
                    if !q.is_finite() || !xi.is_finite() || q < 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "tilt entry must have finite q ≥ 0 and finite xi, got q={q}, xi={xi}"
                        )));
                    }
                    if q == 0.0 && xi != 0.0 {
                        return Err(Error::InvalidParameter(
                            "linear term outside the span of Q".into(),
                        ));
                    }
                }
                TiltEntry::Pinned { at } => {
                    if !at.is_finite() {
                        return Err(Error::NonFinite("pinned coordinate"));
                    }
                }
            }
        }
        Ok(Self { eigvecs, entries })
    }

    /// The zero tilt in the standard basis.
    pub fn zero(d: usize) -> Self {
        Self {
            eigvecs: DMatrix::identity(d, d),
            entries: vec![TiltEntry::Finite { q: 0.0, xi: 0.0 }; d],
        }
    }

    /// Diagonalize a dense symmetric PSD `Q` and express `b` in its eigenbasis.
    /// Eigen-directions are ordered by decreasing curvature.
    pub fn from_dense(q: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d {
            return Err(Error::InvalidParameter("Q must be square".into()));
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: b.len() });
        }
        ensure_finite(q.as_slice(), "tilt matrix")?;
        ensure_finite(b.as_slice(), "tilt vector")?;
        let asym = (q - q.transpose()).norm();
        let scale = q.norm().max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let sym = (q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut eigvecs = DMatrix::zeros(d, d);
        let mut entries = Vec::with_capacity(d);
        let bnorm = b.norm();
        for (k, &i) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(i);
            eigvecs.set_column(k, &col);
            let mut lam = eig.eigenvalues[i];
            if lam < -1e-10 * scale {
                return Err(Error::InvalidParameter(format!("Q is not PSD (eigenvalue {lam})")));
            }
            if lam < SINGULAR_CUTOFF * top {
                lam = 0.0;
            }
            let xi = col.dot(b);
            if lam == 0.0 {
                if xi.abs() > 1e-8 * (1.0 + bnorm) {
                    return Err(Error::InvalidParameter("b is not in the span of Q".into()));
                }
                entries.push(TiltEntry::Finite { q: 0.0, xi: 0.0 });
            } else {
                entries.push(TiltEntry::Finite { q: lam, xi });
            }
        }
        Self::new(eigvecs, entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn entries(&self) -> &[TiltEntry] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| !e.is_pinned())
    }

    /// Largest finite curvature (`‖Q‖` when no direction is pinned).
    pub fn max_curvature(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.curvature()).fold(0.0, f64::max)
    }

    /// Smallest finite curvature over all directions.
    pub fn min_curvature(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| e.curvature())
            .fold(f64::INFINITY, f64::min)
    }

    /// Curvatures, failing if any direction is pinned.
    pub fn curvatures(&self) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.curvature().ok_or_else(|| Error::Unsupported("pinned tilt direction".into())))
            .collect()
    }

    pub fn linear_coefficients(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| match *e {
                TiltEntry::Finite { xi, .. } => xi,
                TiltEntry::Pinned { .. } => 0.0,
            })
            .collect()
    }

    pub fn dense_q(&self) -> Result<DMatrix<f64>> {
        let q = DVector::from_vec(self.curvatures()?);
        Ok(&self.eigvecs * DMatrix::from_diagonal(&q) * self.eigvecs.transpose())
    }

    pub fn dense_b(&self) -> Result<DVector<f64>> {
        if !self.is_finite() {
            return Err(Error::Unsupported("pinned tilt direction".into()));
        }
        Ok(&self.eigvecs * DVector::from_vec(self.linear_coefficients()))
    }

    /// `Vᵀ x`
    pub fn to_eigen(&self, x: &[f64]) -> DVector<f64> {
        self.eigvecs.tr_mul(&DVector::from_column_slice(x))
    }

    /// `V z`
    pub fn from_eigen(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.eigvecs * z
    }

    /// `−½ xᵀQx + xᵀb`; pinned directions are ignored.
    pub fn log_weight(&self, x: &[f64]) -> f64 {
        let z = self.to_eigen(x);
        self.entries
            .iter()
            .zip(z.iter())
            .map(|(e, &zi)| match *e {
                TiltEntry::Finite { q, xi } => -0.5 * q * zi * zi + xi * zi,
                TiltEntry::Pinned { .. } => 0.0,
            })
            .sum()
    }

    /// Writes `−Qx + b` into `out`; pinned directions contribute nothing.
    pub fn grad_log_weight_into(&self, x: &[f64], out: &mut [f64]) {
        let z = self.to_eigen(x);
        let g = DVector::from_iterator(
            self.dim(),
            self.entries.iter().zip(z.iter()).map(|(e, &zi)| match *e {
                TiltEntry::Finite { q, xi } => -q * zi + xi,
                TiltEntry::Pinned { .. } => 0.0,
            }),
        );
        let gx = &self.eigvecs * g;
        out.copy_from_slice(gx.as_slice());
    }

    /// Replace the entries, keeping the basis.
    pub fn with_entries(&self, entries: Vec<TiltEntry>) -> Result<Self> {
        Self::new(self.eigvecs.clone(), entries)
    }
}

/// The posterior `ν = T_{Q,b} π` of a measurement model, in spectral coordinates:
/// `q_i = λ_i²/σ²` and `ξ_i = (λ_i/σ²)(Uᵀy)_i` for `i < d'`, zero beyond.
pub fn posterior_tilt(model: &MeasurementModel) -> QuadraticTilt {
    let op = model.operator();
    let s2 = model.sigma() * model.sigma();
    let uty = model.rotated_observation();
    let entries = (0..op.d())
        .map(|i| {
            if i < op.d_prime() && op.singulars()[i] > 0.0 {
                let lam = op.singulars()[i];
                TiltEntry::Finite { q: lam * lam / s2, xi: lam / s2 * uty[i] }
            } else {
                TiltEntry::Finite { q: 0.0, xi: 0.0 }
            }
        })
        .collect();
    QuadraticTilt { eigvecs: op.v().clone(), entries }
}

/// Conditioning summary of a measurement model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionNumbers {
    /// `λ_max(A)/λ_min(A)`, infinite when `A` has a nontrivial kernel.
    pub kappa_a: f64,
    /// `λ_min(Q)`
    pub snr: f64,
    /// `‖Q‖ = λ_max(A)²/σ²`
    pub q_norm: f64,
}

pub fn condition_numbers(model: &MeasurementModel) -> Result<ConditionNumbers> {
    let s = model.operator().singulars();
    let top = s[0];
    if top == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let s2 = model.sigma() * model.sigma();
    let full_rank = model.operator().d_prime() == model.d() && s.iter().all(|&v| v > 0.0);
    let (kappa_a, snr) = if full_rank {
        let bottom = s[s.len() - 1];
        (top / bottom, bottom * bottom / s2)
    } else {
        (f64::INFINITY, 0.0)
    };
    Ok(ConditionNumbers { kappa_a, snr, q_norm: top * top / s2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::stream_rng(seed, crate::rng::Purpose::Instance, 0);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_measurement() {
        let m = build_measurement(&DMatrix::identity(2, 2), 1.0, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(m.q_dense(), DMatrix::identity(2, 2), epsilon = 1e-14);
        assert_relative_eq!(m.b_dense(), DVector::zeros(2), epsilon = 1e-14);
    }

    #[test]
    fn diagonal_measurement() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let m = build_measurement(&a, 1.0, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let q = m.q_dense();
        assert_relative_eq!(q[(0, 0)], 4.0, epsilon = 1e-12);
        assert_relative_eq!(q[(1, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(q[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.b_dense(), DVector::from_vec(vec![2.0, 1.0]), epsilon = 1e-12);
        let t = posterior_tilt(&m);
        assert_eq!(t.curvatures().unwrap().len(), 2);
        assert_relative_eq!(t.curvatures().unwrap()[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_operator_has_kernel() {
        let a = random_matrix(3, 5, 7);
        let m = build_measurement(&a, 1.0, &DVector::zeros(3)).unwrap();
        // Oracle: eigen-decompose AᵀA directly.
        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata.clone());
        let top = eig.eigenvalues.max();
        let zeros = eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-10 * top).count();
        assert_eq!(zeros, 2);
        let t = posterior_tilt(&m);
        let q = t.curvatures().unwrap();
        assert_eq!(q.iter().filter(|&&v| v == 0.0).count(), 2);
        assert_relative_eq!(m.operator().dense(), a, max_relative = 1e-12, epsilon = 1e-12);
        let v = m.operator().v();
        assert!((v.transpose() * v - DMatrix::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn posterior_tilt_denoising() {
        let sigma = 0.7;
        let m = build_measurement(&DMatrix::identity(3, 3), sigma, &DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
        for q in posterior_tilt(&m).curvatures().unwrap() {
            assert_relative_eq!(q, 1.0 / (sigma * sigma), epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_tilt_zero_operator() {
        let op = SpectralOperator::from_factors(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let m = MeasurementModel::new(op, 1.0, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let t = posterior_tilt(&m);
        assert!(t.curvatures().unwrap().iter().all(|&q| q == 0.0));
        assert!(t.linear_coefficients().iter().all(|&x| x == 0.0));
        assert!(matches!(condition_numbers(&m), Err(Error::ZeroOperator)));
    }

    #[test]
    fn posterior_tilt_substitution() {
        // d=3, d'=2, λ=(3,1), σ=2, Uᵀy=(4,2).
        let op = SpectralOperator::from_factors(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![3.0, 1.0]),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let m = MeasurementModel::new(op, 2.0, DVector::from_vec(vec![4.0, 2.0])).unwrap();
        let t = posterior_tilt(&m);
        let q = t.curvatures().unwrap();
        let xi = t.linear_coefficients();
        for (a, b) in q.iter().zip([2.25, 0.25, 0.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        for (a, b) in xi.iter().zip([3.0, 0.5, 0.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn condition_number_examples() {
        let m = build_measurement(&DMatrix::identity(2, 2), 0.5, &DVector::zeros(2)).unwrap();
        let c = condition_numbers(&m).unwrap();
        assert_relative_eq!(c.kappa_a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.snr, 4.0, epsilon = 1e-12);
        assert_relative_eq!(c.q_norm, 4.0, epsilon = 1e-12);

        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let c = condition_numbers(&build_measurement(&a, 1.0, &DVector::zeros(2)).unwrap()).unwrap();
        assert_relative_eq!(c.kappa_a, 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.snr, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.q_norm, 4.0, epsilon = 1e-12);

        let a = random_matrix(2, 4, 3);
        let c = condition_numbers(&build_measurement(&a, 1.0, &DVector::zeros(2)).unwrap()).unwrap();
        assert!(c.kappa_a.is_infinite());
        assert_eq!(c.snr, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DMatrix::identity(2, 2);
        assert!(build_measurement(&a, 0.0, &DVector::zeros(2)).is_err());
        assert!(build_measurement(&a, -1.0, &DVector::zeros(2)).is_err());
        let mut bad = a.clone();
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(build_measurement(&bad, 1.0, &DVector::zeros(2)), Err(Error::NonFinite(_))));
        assert!(build_measurement(&random_matrix(3, 2, 1), 1.0, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn tilt_reproduces_likelihood_up_to_constant() {
        let a = random_matrix(4, 6, 11);
        let mut rng = crate::rng::stream_rng(5, crate::rng::Purpose::Instance, 1);
        let y = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = build_measurement(&a, 0.8, &y).unwrap();
        let t = posterior_tilt(&m);
        let mut first = None;
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let diff = t.log_weight(&x) - m.log_likelihood(&x);
            let c = *first.get_or_insert(diff);
            assert!((diff - c).abs() < 1e-8, "difference not constant: {diff} vs {c}");
        }
        assert_relative_eq!(t.dense_q().unwrap(), m.q_dense(), epsilon = 1e-10, max_relative = 1e-10);
        assert_relative_eq!(t.dense_b().unwrap(), m.b_dense(), epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn spec_round_trip() {
        let a = random_matrix(2, 3, 4);
        let m = build_measurement(&a, 0.3, &DVector::from_vec(vec![0.1, -0.4])).unwrap();
        let json = serde_json::to_string(&m.to_spec()).unwrap();
        let back = MeasurementModel::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_relative_eq!(back.operator().dense(), a, epsilon = 1e-12);
        assert_eq!(back.sigma(), 0.3);
    }

    #[test]
    fn from_dense_tilt_orders_and_checks_span() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 0.0]));
        let b = DVector::from_vec(vec![0.5, 1.0, 0.0]);
        let t = QuadraticTilt::from_dense(&q, &b).unwrap();
        let c = t.curvatures().unwrap();
        assert_relative_eq!(c[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], 1.0, epsilon = 1e-12);
        assert_eq!(c[2], 0.0);
        assert_relative_eq!(t.dense_b().unwrap(), b, epsilon = 1e-12);
        let b_bad = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!(QuadraticTilt::from_dense(&q, &b_bad).is_err());
    }
}
