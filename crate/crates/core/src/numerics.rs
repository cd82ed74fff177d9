//! Dense kernels: metric orthonormalization, nullspaces, the paired spectral
//! decomposition of skew operators, and the operator exponential.
//!
//! Every subspace produced here is orthonormal with respect to a [`Metric`],
//! a symmetric positive definite Gram matrix. For a Lie algebra this is the
//! negated Killing Gram, so "orthonormal" always means Killing-orthonormal.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{LieError, Result};

pub type LinearOperator = DMatrix<f64>;

/// Default relative tolerance for nullspaces and frequency clustering.
pub const DEFAULT_NULLSPACE_TOL: f64 = 1e-8;

/// Relative drop threshold used by [`orthonormalize`].
const GS_DROP_TOL: f64 = 1e-12;

/// Positive definite inner product `(x, y) = xᵀ G y` with its Cholesky factor
/// `G = L Lᵀ`. Coordinates `z = Lᵀ x` are orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct Metric {
    gram: DMatrix<f64>,
    l: DMatrix<f64>,
    l_inv_t: DMatrix<f64>,
}

impl Metric {
    /// Returns `None` when `gram` is not positive definite.
    pub fn new(gram: DMatrix<f64>) -> Option<Self> {
        let sym = (&gram + gram.transpose()) * 0.5;
        let chol = sym.clone().cholesky()?;
        let l = chol.l();
        let l_inv_t = l.clone().try_inverse()?.transpose();
        Some(Self {
            gram: sym,
            l,
            l_inv_t,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            gram: DMatrix::identity(dim, dim),
            l: DMatrix::identity(dim, dim),
            l_inv_t: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.gram * y))
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    pub fn to_orthonormal(&self, x: &DVector<f64>) -> DVector<f64> {
        self.l.tr_mul(x)
    }

    pub fn from_orthonormal(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.l_inv_t * z
    }

    /// The matrix of `m` in orthonormal coordinates, `Lᵀ M L⁻ᵀ`.
    pub fn operator_to_orthonormal(&self, m: &LinearOperator) -> DMatrix<f64> {
        self.l.tr_mul(&(m * &self.l_inv_t))
    }

    /// Largest entry of `G M + Mᵀ G`, which vanishes for skew-adjoint `M`.
    pub fn skew_residual(&self, m: &LinearOperator) -> f64 {
        let gm = &self.gram * m;
        (&gm + gm.transpose()).amax()
    }
}

/// A subspace given by a metric-orthonormal basis.
#[derive(Debug, Clone, Default)]
pub struct Subspace {
    pub basis: Vec<DVector<f64>>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Max deviation of the Gram matrix of the basis from the identity.
    pub fn gram_residual(&self, metric: &Metric) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((metric.inner(a, b) - target).abs());
            }
        }
        worst
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, metric: &Metric, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for b in &self.basis {
            out.axpy(metric.inner(b, x), b, 1.0);
        }
        out
    }

    /// Coefficients of `x` against the basis.
    pub fn coefficients(&self, metric: &Metric, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|b| metric.inner(b, x)))
    }
}

/// Orthonormal basis of the directions whose singular value is at most
/// `tol · σ_max`, computed in metric-orthonormal coordinates.
pub fn nullspace(m: &LinearOperator, metric: &Metric, tol: f64) -> Subspace {
    let n = m.ncols();
    if n == 0 {
        return Subspace::default();
    }
    let mo = metric.operator_to_orthonormal(m);
    let svd = SVD::new(mo, false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.max();
    let threshold = tol * sigma_max;
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if sigma_max == 0.0 || s <= threshold {
            let z = v_t.row(k).transpose();
            basis.push(metric.from_orthonormal(&z));
        }
    }
    // Square input: every right singular vector is returned by the SVD.
    debug_assert_eq!(v_t.nrows(), n);
    Subspace { basis }
}

/// Modified Gram–Schmidt (two passes) in the metric. Vectors whose residual
/// falls below `1e-12 · max input norm` are dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], metric: &Metric) -> Subspace {
    let scale = vectors.iter().map(|v| metric.norm(v)).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return Subspace { basis };
    }
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = metric.inner(b, &w);
                w.axpy(-c, b, 1.0);
            }
        }
        let nrm = metric.norm(&w);
        if nrm > GS_DROP_TOL * scale {
            basis.push(w / nrm);
        }
    }
    Subspace { basis }
}

/// A 2-plane on which a skew operator acts as `S e = ω f`, `S f = −ω e`.
#[derive(Debug, Clone)]
pub struct Plane {
    pub omega: f64,
    pub e: DVector<f64>,
    pub f: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SkewPairing {
    pub zero_space: Subspace,
    /// Sorted by increasing frequency.
    pub planes: Vec<Plane>,
}

impl SkewPairing {
    /// Applies `Σ ω (f eᵀ − e fᵀ)` (metric transposes) to `x`; this is `S x`
    /// when the pairing is exact.
    pub fn reconstruct_apply(&self, metric: &Metric, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for p in &self.planes {
            out.axpy(p.omega * metric.inner(&p.e, x), &p.f, 1.0);
            out.axpy(-p.omega * metric.inner(&p.f, x), &p.e, 1.0);
        }
        out
    }
}

/// Splits the span of `basis` into `ker S` and invariant 2-planes of the
/// skew-adjoint operator `s`.
///
/// The kernel comes from an SVD of the restricted operator; the planes come
/// from the eigenspaces of the symmetric operator `S²` on the complement.
/// Eigenvalues of `S²` within `tol · ω_max` of each other are treated as one
/// joint eigenspace and split into planes `(e, S e / ω)` one at a time.
pub fn skew_pairing(
    s: &LinearOperator,
    basis: &Subspace,
    metric: &Metric,
    tol: f64,
) -> Result<SkewPairing> {
    let k = basis.dim();
    let images: Vec<DVector<f64>> = basis.basis.iter().map(|b| s * b).collect();
    let mut restricted = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            restricted[(i, j)] = metric.inner(&basis.basis[i], &images[j]);
        }
    }
    let scale = restricted.amax();
    let skew_res = (&restricted + restricted.transpose()).amax();
    if skew_res > tol.max(1e-10) * scale.max(1.0) {
        return Err(LieError::NotSkewAdjoint(skew_res));
    }
    let restricted = (&restricted - restricted.transpose()) * 0.5;

    let lift = |c: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(metric.dim());
        for (ci, b) in c.iter().zip(&basis.basis) {
            out.axpy(*ci, b, 1.0);
        }
        out
    };

    if k == 0 || scale == 0.0 {
        return Ok(SkewPairing {
            zero_space: basis.clone(),
            planes: Vec::new(),
        });
    }

    // Kernel / complement split in basis coordinates (which are orthonormal).
    let svd = SVD::new(restricted.clone(), false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.max();
    let mut kernel = Vec::new();
    let mut complement = Vec::new();
    for (idx, &sv) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(idx).transpose();
        if sv <= tol * sigma_max {
            kernel.push(v);
        } else {
            complement.push(v);
        }
    }
    if complement.len() % 2 == 1 {
        return Err(LieError::PairingFailure(0.0));
    }
    let zero_space = Subspace {
        basis: kernel.iter().map(&lift).collect(),
    };
    if complement.is_empty() {
        return Ok(SkewPairing {
            zero_space,
            planes: Vec::new(),
        });
    }

    let m = complement.len();
    let vc = DMatrix::from_columns(&complement);
    let c = vc.transpose() * &restricted * &vc;
    let sq = &c * &c;
    let sq = (&sq + sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sq);
    let mut order: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &lam)| ((-lam).max(0.0).sqrt(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let omega_max = order.last().map(|o| o.0).unwrap_or(0.0);

    let mut planes = Vec::new();
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && order[end].0 - order[end - 1].0 <= tol * omega_max {
            end += 1;
        }
        let cluster: Vec<DVector<f64>> = order[start..end]
            .iter()
            .map(|&(_, i)| eig.eigenvectors.column(i).into_owned())
            .collect();
        if cluster.len() % 2 == 1 {
            return Err(LieError::PairingFailure(order[start].0));
        }
        let mut remaining = cluster;
        while !remaining.is_empty() {
            let e = remaining.remove(0);
            let e = &e / e.norm();
            let se = &c * &e;
            let omega = se.norm();
            let f = se / omega;
            // Drop span(e, f) from the rest of the joint eigenspace.
            let mut rest = Vec::new();
            for mut w in remaining.drain(..) {
                for _ in 0..2 {
                    let ce = e.dot(&w);
                    w.axpy(-ce, &e, 1.0);
                    let cf = f.dot(&w);
                    w.axpy(-cf, &f, 1.0);
                    for r in &rest {
                        let cr = w.dot(r);
                        w.axpy(-cr, r, 1.0);
                    }
                }
                let nrm = w.norm();
                if nrm > 1e-6 {
                    rest.push(w / nrm);
                }
            }
            if rest.len() % 2 == 1 {
                return Err(LieError::PairingFailure(omega));
            }
            remaining = rest;
            planes.push(Plane {
                omega,
                e: lift(&(&vc * &e)),
                f: lift(&(&vc * &f)),
            });
        }
        start = end;
    }
    planes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(SkewPairing { zero_space, planes })
}

/// Taylor degree used after scaling; with `‖M/2^s‖₁ ≤ 1` the truncation
/// error is below `e/19! ≈ 2e-17`.
const TAYLOR_DEGREE: usize = 18;

/// `e^M` by scaling and squaring with a degree-18 Taylor polynomial
/// evaluated in Horner form.
pub fn expm(m: &LinearOperator) -> DMatrix<f64> {
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 1.0 {
        norm1.log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let mut p = id.clone();
    for k in (1..=TAYLOR_DEGREE).rev() {
        p = &id + (&a * &p) / k as f64;
    }
    for _ in 0..squarings {
        p = &p * &p;
    }
    p
}

pub fn expm_apply(m: &LinearOperator, v: &DVector<f64>) -> DVector<f64> {
    expm(m) * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rotation_generator(n: usize, i: usize, j: usize, angle: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(j, i)] = angle;
        m[(i, j)] = -angle;
        m
    }

    #[test]
    fn nullspace_of_zero_is_everything() {
        let metric = Metric::identity(4);
        let ns = nullspace(&DMatrix::zeros(4, 4), &metric, 1e-8);
        assert_eq!(ns.dim(), 4);
        assert!(ns.gram_residual(&metric) < 1e-12);
    }

    #[test]
    fn nullspace_of_identity_is_empty() {
        let metric = Metric::identity(5);
        assert!(nullspace(&DMatrix::identity(5, 5), &metric, 1e-8).is_empty());
    }

    #[test]
    fn nullspace_respects_metric() {
        let gram = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let metric = Metric::new(gram).unwrap();
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let ns = nullspace(&m, &metric, 1e-8);
        assert_eq!(ns.dim(), 1);
        assert!(ns.gram_residual(&metric) < 1e-12);
        assert!((m * &ns.basis[0]).amax() < 1e-12);
    }

    #[test]
    fn orthonormalize_drops_dependent_vectors() {
        let metric = Metric::identity(3);
        let x = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let s = orthonormalize(&[x.clone(), &x * 2.0], &metric);
        assert_eq!(s.dim(), 1);
        assert_abs_diff_eq!(s.basis[0], x / 3.0, epsilon = 1e-15);
        assert!(orthonormalize(&[DVector::zeros(3)], &metric).is_empty());
    }

    #[test]
    fn skew_pairing_of_zero() {
        let metric = Metric::identity(3);
        let full = Subspace {
            basis: (0..3)
                .map(|i| DVector::from_fn(3, |k, _| (k == i) as u8 as f64))
                .collect(),
        };
        let p = skew_pairing(&DMatrix::zeros(3, 3), &full, &metric, 1e-8).unwrap();
        assert_eq!(p.zero_space.dim(), 3);
        assert!(p.planes.is_empty());
    }

    #[test]
    fn skew_pairing_splits_repeated_frequencies() {
        // Two planes with identical frequency plus one kernel direction.
        let mut s = rotation_generator(5, 0, 1, 2.0);
        s += rotation_generator(5, 2, 3, 2.0);
        let metric = Metric::identity(5);
        let full = Subspace {
            basis: (0..5)
                .map(|i| DVector::from_fn(5, |k, _| (k == i) as u8 as f64))
                .collect(),
        };
        let p = skew_pairing(&s, &full, &metric, 1e-8).unwrap();
        assert_eq!(p.zero_space.dim(), 1);
        assert_eq!(p.planes.len(), 2);
        for plane in &p.planes {
            assert_abs_diff_eq!(plane.omega, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(&s * &plane.e, &plane.f * plane.omega, epsilon = 1e-12);
            assert_abs_diff_eq!(&s * &plane.f, &plane.e * -plane.omega, epsilon = 1e-12);
        }
        assert!(p.planes[0].e.dot(&p.planes[1].e).abs() < 1e-12);
        assert!(p.planes[0].e.dot(&p.planes[1].f).abs() < 1e-12);
    }

    #[test]
    fn skew_pairing_rejects_symmetric_operator() {
        let metric = Metric::identity(2);
        let full = Subspace {
            basis: (0..2)
                .map(|i| DVector::from_fn(2, |k, _| (k == i) as u8 as f64))
                .collect(),
        };
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            skew_pairing(&s, &full, &metric, 1e-8),
            Err(LieError::NotSkewAdjoint(_))
        ));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let v = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(expm_apply(&DMatrix::zeros(3, 3), &v), v);
    }

    #[test]
    fn expm_quarter_turn() {
        let m = rotation_generator(4, 1, 3, std::f64::consts::FRAC_PI_2);
        let v = DVector::from_vec(vec![0.5, 1.0, 0.25, 0.0]);
        let out = expm_apply(&m, &v);
        assert_abs_diff_eq!(
            out,
            DVector::from_vec(vec![0.5, 0.0, 0.25, 1.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn expm_large_skew_is_orthogonal() {
        // ‖M‖ close to 10: closed form rotation by angle 9.5.
        let angle = 9.5_f64;
        let m = rotation_generator(2, 0, 1, angle);
        let e = expm(&m);
        let expected =
            DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        assert!((e - expected).amax() < 1e-12);
    }

    #[test]
    fn expm_matches_diagonal_closed_form() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.5, 2.0]));
        let e = expm(&m);
        for (i, x) in [-3.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() <= 1e-12 * x.exp());
        }
    }
}
