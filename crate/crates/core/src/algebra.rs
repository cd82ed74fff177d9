//! Concrete compact semisimple Lie algebras.
//!
//! An algebra is stored as structure constants `c[i][j][k]` in a fixed basis,
//! `[e_i, e_j] = Σ_k c[i][j][k] e_k`, together with the Killing Gram matrix
//! `K[i][j] = trace(ad(e_i) ad(e_j))`. The positive definite form `−K` is the
//! working metric; `|X| = sqrt(−⟨X, X⟩)`.
//!
//! Bases:
//! - `so(n)`: `E_ij − E_ji` for `i < j`, lexicographic.
//! - `su(n)`: first `i(E_kk − E_{k+1,k+1})` for `k = 0..n−1`, then for every
//!   `i < j` the pair `E_ij − E_ji`, `i(E_ij + E_ji)`.
//! - direct sums: summand bases concatenated in order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LieError, Result};
use crate::numerics::{self, LinearOperator, Metric};

/// Which algebra to build. `DirectSum` is kept flat after [`AlgebraSpec::normalized`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgebraSpec {
    SpecialUnitary(usize),
    SpecialOrthogonal(usize),
    DirectSum(Vec<AlgebraSpec>),
}

impl AlgebraSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlgebraSpec::SpecialUnitary(n) if *n < 2 => {
                Err(LieError::InvalidSpec(format!("su({n}) needs n >= 2")))
            }
            AlgebraSpec::SpecialOrthogonal(n) if *n < 3 => {
                Err(LieError::InvalidSpec(format!("so({n}) needs n >= 3")))
            }
            AlgebraSpec::DirectSum(parts) if parts.is_empty() => {
                Err(LieError::InvalidSpec("empty direct sum".into()))
            }
            AlgebraSpec::DirectSum(parts) => parts.iter().try_for_each(|p| p.validate()),
            _ => Ok(()),
        }
    }

    /// Flattens nested sums.
    pub fn normalized(&self) -> AlgebraSpec {
        fn collect(spec: &AlgebraSpec, out: &mut Vec<AlgebraSpec>) {
            match spec {
                AlgebraSpec::DirectSum(parts) => parts.iter().for_each(|p| collect(p, out)),
                simple => out.push(simple.clone()),
            }
        }
        match self {
            AlgebraSpec::DirectSum(_) => {
                let mut parts = Vec::new();
                collect(self, &mut parts);
                AlgebraSpec::DirectSum(parts)
            }
            simple => simple.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AlgebraSpec::SpecialUnitary(n) => n * n - 1,
            AlgebraSpec::SpecialOrthogonal(n) => n * (n - 1) / 2,
            AlgebraSpec::DirectSum(parts) => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    /// Closed-form rank; used by frame-free verification.
    pub fn rank(&self) -> usize {
        match self {
            AlgebraSpec::SpecialUnitary(n) => n - 1,
            AlgebraSpec::SpecialOrthogonal(n) => n / 2,
            AlgebraSpec::DirectSum(parts) => parts.iter().map(|p| p.rank()).sum(),
        }
    }
}

impl fmt::Display for AlgebraSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraSpec::SpecialUnitary(n) => write!(f, "su:{n}"),
            AlgebraSpec::SpecialOrthogonal(n) => write!(f, "so:{n}"),
            AlgebraSpec::DirectSum(parts) => {
                write!(f, "sum:")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Grammar: `su:N` | `so:N` | `sum:<spec>+<spec>+...`.
impl FromStr for AlgebraSpec {
    type Err = LieError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || LieError::InvalidSpec(format!("cannot parse {s:?}"));
        let spec = if let Some(rest) = s.strip_prefix("sum:") {
            let parts = rest
                .split('+')
                .map(|p| p.strip_prefix("sum:").unwrap_or(p).parse::<AlgebraSpec>())
                .collect::<Result<Vec<_>>>()?;
            if parts.len() < 2 {
                return Err(bad());
            }
            AlgebraSpec::DirectSum(parts).normalized()
        } else if let Some(n) = s.strip_prefix("su:") {
            AlgebraSpec::SpecialUnitary(n.parse().map_err(|_| bad())?)
        } else if let Some(n) = s.strip_prefix("so:") {
            AlgebraSpec::SpecialOrthogonal(n.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Identity token tying elements to the algebra instance that created them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlgebraId(u64);

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

impl AlgebraId {
    fn fresh() -> Self {
        AlgebraId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Thresholds for the structural, metric and automorphism checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub structural: f64,
    pub metric: f64,
    pub automorphism: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-10,
            metric: 1e-9,
            automorphism: 1e-8,
        }
    }
}

/// A member of a specific [`LieAlgebra`], stored by coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    algebra: AlgebraId,
    coords: DVector<f64>,
}

impl Element {
    pub fn algebra_id(&self) -> AlgebraId {
        self.algebra
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn scale(&self, c: f64) -> Element {
        Element {
            algebra: self.algebra,
            coords: &self.coords * c,
        }
    }

    /// Same algebra, new coordinates.
    pub(crate) fn with_coords(&self, coords: DVector<f64>) -> Element {
        debug_assert_eq!(coords.len(), self.coords.len());
        Element {
            algebra: self.algebra,
            coords,
        }
    }

    fn check_same(&self, other: &Element) {
        assert_eq!(
            self.algebra, other.algebra,
            "arithmetic between elements of different algebras"
        );
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        self.check_same(rhs);
        self.with_coords(&self.coords + &rhs.coords)
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        self.check_same(rhs);
        self.with_coords(&self.coords - &rhs.coords)
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, rhs: f64) -> Element {
        self.scale(rhs)
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scale(-1.0)
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
    pub invariance_residual: f64,
    pub max_killing_eigenvalue: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    id: AlgebraId,
    spec: AlgebraSpec,
    dim: usize,
    labels: Vec<String>,
    /// Flat `c[(i * d + j) * d + k]`.
    structure: Vec<f64>,
    killing: DMatrix<f64>,
    metric: Metric,
    /// Defining-representation matrices of the basis, for simple `su`/`so`.
    matrices: Option<Vec<DMatrix<Complex<f64>>>>,
    tolerances: Tolerances,
}

pub fn build_algebra(spec: &AlgebraSpec) -> Result<LieAlgebra> {
    spec.validate()?;
    let spec = spec.normalized();
    match &spec {
        AlgebraSpec::SpecialUnitary(n) => {
            let (labels, mats) = su_basis(*n);
            from_matrix_basis(spec.clone(), labels, mats)
        }
        AlgebraSpec::SpecialOrthogonal(n) => {
            let (labels, mats) = so_basis(*n);
            from_matrix_basis(spec.clone(), labels, mats)
        }
        AlgebraSpec::DirectSum(parts) => {
            let blocks = parts
                .iter()
                .map(build_algebra)
                .collect::<Result<Vec<_>>>()?;
            let d: usize = blocks.iter().map(|b| b.dim).sum();
            let mut c = vec![0.0; d * d * d];
            let mut labels = Vec::with_capacity(d);
            let mut offset = 0;
            for (bi, block) in blocks.iter().enumerate() {
                let bd = block.dim;
                for i in 0..bd {
                    for j in 0..bd {
                        for k in 0..bd {
                            c[((offset + i) * d + offset + j) * d + offset + k] =
                                block.structure[(i * bd + j) * bd + k];
                        }
                    }
                }
                labels.extend(block.labels.iter().map(|l| format!("{bi}:{l}")));
                offset += bd;
            }
            LieAlgebra::from_structure_constants(spec, labels, c)
        }
    }
}

fn unit(n: usize, i: usize, j: usize, value: Complex<f64>) -> DMatrix<Complex<f64>> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = value;
    m
}

fn so_basis(n: usize) -> (Vec<String>, Vec<DMatrix<Complex<f64>>>) {
    let one = Complex::new(1.0, 0.0);
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            labels.push(format!("e{i}{j}"));
            mats.push(unit(n, i, j, one) - unit(n, j, i, one));
        }
    }
    (labels, mats)
}

fn su_basis(n: usize) -> (Vec<String>, Vec<DMatrix<Complex<f64>>>) {
    let one = Complex::new(1.0, 0.0);
    let im = Complex::new(0.0, 1.0);
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    for k in 0..n - 1 {
        labels.push(format!("h{k}"));
        mats.push(unit(n, k, k, im) - unit(n, k + 1, k + 1, im));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            labels.push(format!("x{i}{j}"));
            mats.push(unit(n, i, j, one) - unit(n, j, i, one));
            labels.push(format!("y{i}{j}"));
            mats.push(unit(n, i, j, im) + unit(n, j, i, im));
        }
    }
    (labels, mats)
}

fn flatten(m: &DMatrix<Complex<f64>>) -> DVector<f64> {
    DVector::from_iterator(
        2 * m.len(),
        m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)),
    )
}

/// Expands matrix commutators in the basis by least squares on the
/// (real-flattened) entries.
fn from_matrix_basis(
    spec: AlgebraSpec,
    labels: Vec<String>,
    mats: Vec<DMatrix<Complex<f64>>>,
) -> Result<LieAlgebra> {
    let d = mats.len();
    let columns: Vec<DVector<f64>> = mats.iter().map(flatten).collect();
    let p = DMatrix::from_columns(&columns);
    let normal = p
        .tr_mul(&p)
        .cholesky()
        .ok_or_else(|| LieError::InvalidSpec("dependent matrix basis".into()))?;
    let mut c = vec![0.0; d * d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            let comm = &mats[i] * &mats[j] - &mats[j] * &mats[i];
            let coords = normal.solve(&p.tr_mul(&flatten(&comm)));
            for k in 0..d {
                // Entries are small integers; clean roundoff.
                let v = coords[k];
                let v = if (v - v.round()).abs() < 1e-12 {
                    v.round()
                } else {
                    v
                };
                c[(i * d + j) * d + k] = v;
                c[(j * d + i) * d + k] = -v;
            }
        }
    }
    let mut g = LieAlgebra::from_structure_constants(spec, labels, c)?;
    g.matrices = Some(mats);
    Ok(g)
}

impl LieAlgebra {
    /// Builds an algebra from raw structure constants, computing the Killing
    /// Gram from ad-traces. Fails if that Gram is not negative definite.
    pub fn from_structure_constants(
        spec: AlgebraSpec,
        labels: Vec<String>,
        structure: Vec<f64>,
    ) -> Result<LieAlgebra> {
        let d = labels.len();
        if structure.len() != d * d * d {
            return Err(LieError::DimensionMismatch {
                expected: d * d * d,
                got: structure.len(),
            });
        }
        let ads: Vec<DMatrix<f64>> = (0..d).map(|i| basis_ad(&structure, d, i)).collect();
        let mut killing = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                // trace(A B) = Σ_kl A_kl B_lk
                let t = ads[i].component_mul(&ads[j].transpose()).sum();
                killing[(i, j)] = t;
                killing[(j, i)] = t;
            }
        }
        let metric = Metric::new(-&killing).ok_or(LieError::NotNegativeDefinite)?;
        Ok(LieAlgebra {
            id: AlgebraId::fresh(),
            spec,
            dim: d,
            labels,
            structure,
            killing,
            metric,
            matrices: None,
            tolerances: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn id(&self) -> AlgebraId {
        self.id
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn killing_gram(&self) -> &DMatrix<f64> {
        &self.killing
    }

    /// The positive definite working metric `−K`.
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn zero(&self) -> Element {
        Element {
            algebra: self.id,
            coords: DVector::zeros(self.dim),
        }
    }

    pub fn basis_element(&self, i: usize) -> Element {
        let mut e = self.zero();
        e.coords[i] = 1.0;
        e
    }

    pub fn element(&self, coords: Vec<f64>) -> Result<Element> {
        self.element_from_vector(DVector::from_vec(coords))
    }

    pub fn element_from_vector(&self, coords: DVector<f64>) -> Result<Element> {
        if coords.len() != self.dim {
            return Err(LieError::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        Ok(Element {
            algebra: self.id,
            coords,
        })
    }

    /// Isotropic Gaussian element: independent standard normals in a
    /// metric-orthonormal frame.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Element {
            algebra: self.id,
            coords: self.metric.from_orthonormal(&z),
        }
    }

    /// `n` isotropic elements from a ChaCha8 stream seeded with `seed`.
    pub fn seeded_elements(&self, seed: u64, n: usize) -> Vec<Element> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.random_element(&mut rng)).collect()
    }

    fn check(&self, x: &Element) -> Result<()> {
        if x.algebra != self.id {
            return Err(LieError::AlgebraMismatch);
        }
        Ok(())
    }

    pub fn bracket(&self, x: &Element, y: &Element) -> Result<Element> {
        self.check(x)?;
        self.check(y)?;
        Ok(x.with_coords(self.ad_matrix(x)? * &y.coords))
    }

    /// Column `j` holds the coordinates of `[X, e_j]`.
    pub fn ad_matrix(&self, x: &Element) -> Result<LinearOperator> {
        self.check(x)?;
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for (i, &xi) in x.coords.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for j in 0..d {
                let base = (i * d + j) * d;
                for k in 0..d {
                    m[(k, j)] += xi * self.structure[base + k];
                }
            }
        }
        Ok(m)
    }

    pub fn killing_form(&self, x: &Element, y: &Element) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(x.coords.dot(&(&self.killing * &y.coords)))
    }

    /// `−⟨X, Y⟩`, the inner product that makes `|·|` a euclidean norm.
    pub fn inner(&self, x: &Element, y: &Element) -> f64 {
        debug_assert_eq!(x.algebra, y.algebra);
        self.metric.inner(&x.coords, &y.coords)
    }

    pub fn norm(&self, x: &Element) -> f64 {
        self.metric.norm(&x.coords)
    }

    /// The adjoint-group element `exp(ad(Z))` as a matrix.
    pub fn exp_ad(&self, z: &Element) -> Result<LinearOperator> {
        Ok(numerics::expm(&self.ad_matrix(z)?))
    }

    pub fn exp_ad_apply(&self, z: &Element, x: &Element) -> Result<Element> {
        self.check(x)?;
        Ok(x.with_coords(self.exp_ad(z)? * &x.coords))
    }

    /// The defining matrix of `X` for simple `su(n)` / `so(n)`; `None` for
    /// direct sums.
    pub fn defining_matrix(&self, x: &Element) -> Option<DMatrix<Complex<f64>>> {
        let mats = self.matrices.as_ref()?;
        let n = mats[0].nrows();
        let mut out = DMatrix::zeros(n, n);
        for (c, m) in x.coords.iter().zip(mats) {
            out += m * Complex::new(*c, 0.0);
        }
        Some(out)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_algebra(self)
    }
}

fn basis_ad(structure: &[f64], d: usize, i: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |k, j| structure[(i * d + j) * d + k])
}

/// Antisymmetry, Jacobi identity, Killing invariance and definiteness checks
/// against the algebra's tolerances.
pub fn validate_algebra(g: &LieAlgebra) -> ValidationReport {
    let d = g.dim;
    let tol = g.tolerances.structural;
    let mut antisymmetry: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                antisymmetry = antisymmetry
                    .max((g.structure_constant(i, j, k) + g.structure_constant(j, i, k)).abs());
            }
        }
    }
    let ads: Vec<DMatrix<f64>> = (0..d).map(|i| basis_ad(&g.structure, d, i)).collect();
    let bracket_basis = |i: usize, j: usize| -> DVector<f64> { ads[i].column(j).into_owned() };

    let mut jacobi: f64 = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            let ij = bracket_basis(i, j);
            for k in (j + 1)..d {
                let jk = bracket_basis(j, k);
                let ki = bracket_basis(k, i);
                let r = &ads[i] * jk + &ads[j] * ki + &ads[k] * &ij;
                jacobi = jacobi.max(r.amax());
            }
        }
    }

    let mut invariance: f64 = 0.0;
    for ad in &ads {
        let r = ad.transpose() * &g.killing + &g.killing * ad;
        invariance = invariance.max(r.amax());
    }

    let eig = SymmetricEigen::new(g.killing.clone());
    let max_eig = eig.eigenvalues.max();

    let mut failures = Vec::new();
    if antisymmetry > tol {
        failures.push(format!("antisymmetry residual {antisymmetry:e}"));
    }
    if jacobi > tol {
        failures.push(format!("jacobi residual {jacobi:e}"));
    }
    if invariance > tol {
        failures.push(format!("invariance residual {invariance:e}"));
    }
    if max_eig >= 0.0 {
        failures.push(format!(
            "killing form not negative definite (max eigenvalue {max_eig:e})"
        ));
    }
    ValidationReport {
        antisymmetry_residual: antisymmetry,
        jacobi_residual: jacobi,
        invariance_residual: invariance,
        max_killing_eigenvalue: max_eig,
        failures,
    }
}
