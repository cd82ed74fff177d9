//! Centralizers, Cartan subalgebras and the root-space decomposition
//! `g = h ⊕ Σ L_α`.
//!
//! A root `α` is stored by its values on the orthonormal CSA basis, in the
//! normalization where `H ∈ h` rotates the root plane `L_α` with angular
//! frequency `2π α(H)`:
//!
//! ```text
//! [H, e_α] =  2π α(H) f_α
//! [H, f_α] = −2π α(H) e_α
//! ```
//!
//! so `f_α` plays the role of `i·e_α` for the complex structure on `L_α`.

use std::f64::consts::PI;

use log::debug;
use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, LieAlgebra};
use crate::error::{LieError, Result};
use crate::numerics::{self, Metric, Subspace, DEFAULT_NULLSPACE_TOL};

/// Pairwise bracket bound for the abelian check on unit vectors.
const ABELIAN_TOL: f64 = 1e-9;
/// Root-action residual bound.
const ROOT_ACTION_TOL: f64 = 1e-8;
/// Minimum relative spacing of reference frequencies (and distance from 0).
const FREQUENCY_SEPARATION: f64 = 1e-4;
const REFERENCE_RETRIES: usize = 50;
pub(crate) const CSA_TRIES: usize = 20;

pub const DEFAULT_REGULAR_DELTA: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Root {
    /// `alpha[j] = α(h_j)`.
    pub alpha: DVector<f64>,
    pub e: Element,
    pub f: Element,
}

#[derive(Debug, Clone)]
pub struct CartanFrame {
    pub h: Vec<Element>,
    /// Positive roots, ordered by increasing `α(h_ref)`.
    pub roots: Vec<Root>,
    pub h_ref: Element,
    metric: Metric,
    stall_constant: f64,
}

/// Orthogonal decomposition of an element along `h` and the root planes.
#[derive(Debug, Clone)]
pub struct Components {
    pub h_part: Element,
    /// `(⟨X, e_α⟩, ⟨X, f_α⟩)` in the metric, per root.
    pub root_parts: Vec<[f64; 2]>,
}

impl Components {
    pub fn reassembly_residual(&self, g: &LieAlgebra, frame: &CartanFrame, x: &Element) -> f64 {
        let mut sum = self.h_part.clone();
        for (root, [a, b]) in frame.roots.iter().zip(&self.root_parts) {
            sum = &sum + &(&root.e.scale(*a) + &root.f.scale(*b));
        }
        g.norm(&(x - &sum))
    }
}

pub fn subspace_elements(g: &LieAlgebra, s: &Subspace) -> Vec<Element> {
    s.basis
        .iter()
        .map(|v| {
            g.element_from_vector(v.clone())
                .expect("subspace dimension")
        })
        .collect()
}

pub fn elements_subspace(elements: &[Element]) -> Subspace {
    Subspace {
        basis: elements.iter().map(|e| e.coords().clone()).collect(),
    }
}

/// `Cen_g(A) = ker ad(A)`, metric-orthonormal.
pub fn centralizer(g: &LieAlgebra, a: &Element, tol: f64) -> Result<Subspace> {
    Ok(numerics::nullspace(&g.ad_matrix(a)?, g.metric(), tol))
}

/// Column space of `ad(A)`, i.e. `[A, g]`, as an orthonormal basis.
pub fn ad_image(g: &LieAlgebra, a: &Element) -> Result<Subspace> {
    let ad = g.ad_matrix(a)?;
    let cols: Vec<DVector<f64>> = (0..g.dim()).map(|j| ad.column(j).into_owned()).collect();
    Ok(numerics::orthonormalize(&cols, g.metric()))
}

pub fn is_abelian(g: &LieAlgebra, basis: &[Element]) -> Result<bool> {
    for (i, x) in basis.iter().enumerate() {
        for y in &basis[i + 1..] {
            if g.norm(&g.bracket(x, y)?) > ABELIAN_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A Cartan subalgebra as the centralizer of a random element.
///
/// An abelian centralizer is automatically maximal abelian (every abelian
/// subalgebra containing `H` lies in `Cen(H)`), so the first abelian
/// centralizer found is returned; generically this happens on the first try.
pub fn find_csa<R: Rng + ?Sized>(
    g: &LieAlgebra,
    rng: &mut R,
    max_tries: usize,
) -> Result<Subspace> {
    for attempt in 0..max_tries {
        let h = g.random_element(rng);
        let cen = centralizer(g, &h, DEFAULT_NULLSPACE_TOL)?;
        if is_abelian(g, &subspace_elements(g, &cen))? {
            debug!("csa of dimension {} after {} tries", cen.dim(), attempt + 1);
            return Ok(cen);
        }
    }
    Err(LieError::CsaNotFound(max_tries))
}

fn full_space(g: &LieAlgebra) -> Subspace {
    let d = g.dim();
    Subspace {
        basis: (0..d)
            .map(|i| {
                g.metric()
                    .from_orthonormal(&DVector::from_fn(d, |k, _| (k == i) as u8 as f64))
            })
            .collect(),
    }
}

/// Builds the root-space decomposition relative to the orthonormal CSA `h`.
///
/// A random `H₀ ∈ h` is drawn until `ad(H₀)` has kernel exactly `h` and
/// well-separated nonzero frequencies; each invariant plane then becomes a
/// root, with `α` read off per basis vector from `⟨f, [h_j, e]⟩ / 2π`.
pub fn root_decomposition<R: Rng + ?Sized>(
    g: &LieAlgebra,
    h: &Subspace,
    rng: &mut R,
) -> Result<CartanFrame> {
    let metric = g.metric();
    let h_elems = subspace_elements(g, h);
    if h.gram_residual(metric) > 1e-9 || !is_abelian(g, &h_elems)? {
        return Err(LieError::NotACsa {
            dim: h.dim(),
            centralizer: 0,
        });
    }
    let r = h.dim();
    let full = full_space(g);
    let mut smallest_kernel = usize::MAX;
    let mut last_problem = String::new();

    for _ in 0..REFERENCE_RETRIES {
        let mut h0 = g.zero();
        for hj in &h_elems {
            h0 = &h0 + &hj.scale(rng.sample::<f64, _>(StandardNormal));
        }
        let s = g.ad_matrix(&h0)?;
        let pairing = match numerics::skew_pairing(&s, &full, metric, DEFAULT_NULLSPACE_TOL) {
            Ok(p) => p,
            Err(LieError::PairingFailure(w)) => {
                last_problem = format!("pairing failure at {w:e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        smallest_kernel = smallest_kernel.min(pairing.zero_space.dim());
        if pairing.zero_space.dim() != r {
            last_problem = format!("kernel dimension {}", pairing.zero_space.dim());
            continue;
        }
        let omega_max = pairing.planes.last().map(|p| p.omega).unwrap_or(0.0);
        let mut previous = 0.0;
        let separated = pairing.planes.iter().all(|p| {
            let ok = p.omega - previous >= FREQUENCY_SEPARATION * omega_max;
            previous = p.omega;
            ok
        });
        if !separated {
            last_problem = "frequencies too close".into();
            continue;
        }
        match frame_from_pairing(g, &h_elems, &h0, &pairing.planes) {
            Ok(frame) => return Ok(frame),
            Err(LieError::BrokenFrame(msg)) => last_problem = msg,
            Err(e) => return Err(e),
        }
    }
    if smallest_kernel != usize::MAX && smallest_kernel > r {
        return Err(LieError::NotACsa {
            dim: r,
            centralizer: smallest_kernel,
        });
    }
    debug!("root decomposition failed: {last_problem}");
    Err(LieError::DegenerateReference(REFERENCE_RETRIES))
}

fn frame_from_pairing(
    g: &LieAlgebra,
    h: &[Element],
    h_ref: &Element,
    planes: &[numerics::Plane],
) -> Result<CartanFrame> {
    let r = h.len();
    let mut roots = Vec::with_capacity(planes.len());
    for plane in planes {
        let e = g.element_from_vector(plane.e.clone())?;
        let f = g.element_from_vector(plane.f.clone())?;
        let mut alpha = DVector::zeros(r);
        for (j, hj) in h.iter().enumerate() {
            let he = g.bracket(hj, &e)?;
            let hf = g.bracket(hj, &f)?;
            let a = g.inner(&f, &he) / (2.0 * PI);
            let res_e = g.norm(&(&he - &f.scale(2.0 * PI * a)));
            let res_f = g.norm(&(&hf + &e.scale(2.0 * PI * a)));
            if res_e.max(res_f) > ROOT_ACTION_TOL {
                return Err(LieError::BrokenFrame(format!(
                    "root action residual {:e}",
                    res_e.max(res_f)
                )));
            }
            alpha[j] = a;
        }
        roots.push(Root { alpha, e, f });
    }

    let stall_constant = if roots.is_empty() {
        0.0
    } else {
        let normalized = DMatrix::from_fn(roots.len(), r, |i, j| {
            roots[i].alpha[j] / roots[i].alpha.norm()
        });
        let sv = SVD::new(normalized, false, false).singular_values;
        let (lo, hi) = (sv.min(), sv.max());
        if lo <= 1e-8 * hi || sv.len() < r {
            return Err(LieError::BrokenFrame(
                "roots do not separate points of h".into(),
            ));
        }
        lo / (roots.len() as f64).sqrt()
    };

    let frame = CartanFrame {
        h: h.to_vec(),
        roots,
        h_ref: h_ref.clone(),
        metric: g.metric().clone(),
        stall_constant,
    };
    for (i, _) in frame.roots.iter().enumerate() {
        if frame.root_value(i, h_ref) <= 0.0 {
            return Err(LieError::BrokenFrame(
                "reference element not positive".into(),
            ));
        }
    }
    debug!(
        "frame: rank {}, {} positive roots, stall constant {:.3e}",
        r,
        frame.roots.len(),
        stall_constant
    );
    Ok(frame)
}

impl CartanFrame {
    pub fn rank(&self) -> usize {
        self.h.len()
    }

    pub fn csa(&self) -> Subspace {
        elements_subspace(&self.h)
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    fn inner(&self, a: &Element, b: &Element) -> f64 {
        self.metric.inner(a.coords(), b.coords())
    }

    /// Lower bound `c` with `max_γ |⟨B₀, u_γ⟩| ≥ c |B₀|` for every `B₀ ∈ h`:
    /// the smallest singular value of the row-normalized alpha matrix over
    /// `sqrt(|Φ⁺|)`.
    pub fn stall_constant(&self) -> f64 {
        self.stall_constant
    }

    /// Coordinates of the `h`-part of `x` in the CSA basis.
    pub fn csa_coords(&self, x: &Element) -> DVector<f64> {
        DVector::from_iterator(self.h.len(), self.h.iter().map(|hj| self.inner(hj, x)))
    }

    /// `α_i(x)`; only the `h`-part of `x` contributes.
    pub fn root_value(&self, i: usize, x: &Element) -> f64 {
        self.roots[i].alpha.dot(&self.csa_coords(x))
    }

    pub fn h_part(&self, x: &Element) -> Element {
        let c = self.csa_coords(x);
        self.combine_csa(&c, x)
    }

    fn combine_csa(&self, c: &DVector<f64>, like: &Element) -> Element {
        let mut out = like.scale(0.0);
        for (cj, hj) in c.iter().zip(&self.h) {
            out = &out + &hj.scale(*cj);
        }
        out
    }

    /// Metric-orthogonal projection onto `h` and every root plane.
    pub fn project(&self, x: &Element) -> Components {
        Components {
            h_part: self.h_part(x),
            root_parts: self
                .roots
                .iter()
                .map(|r| [self.inner(&r.e, x), self.inner(&r.f, x)])
                .collect(),
        }
    }

    /// Component of `x` in the root plane `L_γ`.
    pub fn root_plane_part(&self, i: usize, x: &Element) -> Element {
        let r = &self.roots[i];
        &r.e.scale(self.inner(&r.e, x)) + &r.f.scale(self.inner(&r.f, x))
    }

    /// Unit `u ∈ h` orthogonal to `ker γ` with `γ(u) > 0`: the normalized
    /// metric dual of `γ`.
    pub fn coroot_direction(&self, i: usize) -> Element {
        let alpha = &self.roots[i].alpha;
        self.combine_csa(&(alpha / alpha.norm()), &self.h_ref)
    }

    /// `min |α(H)| / max |α(H)|` over the positive roots (0 when all vanish).
    pub fn regularity_margin(&self, x: &Element) -> f64 {
        let values: Vec<f64> = (0..self.roots.len())
            .map(|i| self.root_value(i, x).abs())
            .collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        values.iter().copied().fold(f64::INFINITY, f64::min) / max
    }

    /// `x ∈ h` is regular when every root is nonzero on it, measured
    /// relatively: `min |α(x)| ≥ delta · max |α(x)| > 0`.
    pub fn is_regular(&self, x: &Element, delta: f64) -> Result<bool> {
        let off = self.metric.norm((x - &self.h_part(x)).coords());
        let scale = self.metric.norm(x.coords()).max(1.0);
        if off > 1e-9 * scale {
            return Err(LieError::NotInCsa(off));
        }
        if self.roots.is_empty() {
            return Ok(false);
        }
        Ok(self.regularity_margin(x) >= delta)
    }

    /// Plain-data snapshot for serialization.
    pub fn record(&self) -> FrameRecord {
        FrameRecord {
            rank: self.rank(),
            positive_roots: self.roots.len(),
            csa_basis: self.h.iter().map(Element::to_vec).collect(),
            h_ref: self.h_ref.to_vec(),
            roots: self
                .roots
                .iter()
                .map(|r| RootRecord {
                    alpha: r.alpha.iter().copied().collect(),
                    e: r.e.to_vec(),
                    f: r.f.to_vec(),
                })
                .collect(),
        }
    }
}

/// Random CSA and its root frame, reproducible from `seed`.
pub fn seeded_frame(g: &LieAlgebra, seed: u64) -> Result<CartanFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = find_csa(g, &mut rng, CSA_TRIES)?;
    root_decomposition(g, &h, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub alpha: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub rank: usize,
    pub positive_roots: usize,
    pub csa_basis: Vec<Vec<f64>>,
    pub h_ref: Vec<f64>,
    pub roots: Vec<RootRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_algebra, AlgebraSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_for(spec: &str, seed: u64) -> (LieAlgebra, CartanFrame) {
        let g = build_algebra(&spec.parse().unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = find_csa(&g, &mut rng, 10).unwrap();
        let frame = root_decomposition(&g, &h, &mut rng).unwrap();
        (g, frame)
    }

    #[test]
    fn centralizer_examples() {
        let su2 = build_algebra(&AlgebraSpec::SpecialUnitary(2)).unwrap();
        assert_eq!(centralizer(&su2, &su2.zero(), 1e-8).unwrap().dim(), 3);
        let a = su2.basis_element(0).scale(0.5);
        let c = centralizer(&su2, &a, 1e-8).unwrap();
        assert_eq!(c.dim(), 1);
        let v = &c.basis[0];
        // Spanned by A: |⟨v, Â⟩| = 1.
        let ahat = a.coords() / su2.norm(&a);
        assert!((su2.metric().inner(v, &ahat).abs() - 1.0).abs() < 1e-12);

        let so5 = build_algebra(&AlgebraSpec::SpecialOrthogonal(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = so5.random_element(&mut rng);
        let c = centralizer(&so5, &a, 1e-8).unwrap();
        assert_eq!(c.dim(), 2);
        // Contains A itself.
        let resid = a.coords() - c.project(so5.metric(), a.coords());
        assert!(so5.metric().norm(&resid) < 1e-10 * so5.norm(&a));
    }

    #[test]
    fn csa_dimensions() {
        for (spec, rank) in [("su:2", 1), ("so:6", 3), ("sum:su:2+su:2", 2)] {
            let g = build_algebra(&spec.parse().unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let h = find_csa(&g, &mut rng, 10).unwrap();
            assert_eq!(h.dim(), rank, "{spec}");
            assert!(is_abelian(&g, &subspace_elements(&g, &h)).unwrap());
        }
    }

    #[test]
    fn root_counts() {
        for (spec, roots) in [("su:2", 1), ("su:3", 3), ("so:5", 4)] {
            let (g, frame) = frame_for(spec, 2);
            assert_eq!(frame.roots.len(), roots, "{spec}");
            assert_eq!(g.dim(), frame.rank() + 2 * roots);
        }
    }

    #[test]
    fn rejects_non_csa() {
        let g = build_algebra(&AlgebraSpec::SpecialUnitary(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = find_csa(&g, &mut rng, 10).unwrap();
        let half = Subspace {
            basis: vec![h.basis[0].clone()],
        };
        assert!(matches!(
            root_decomposition(&g, &half, &mut rng),
            Err(LieError::NotACsa { .. })
        ));
    }

    #[test]
    fn projections() {
        let (g, frame) = frame_for("su:3", 8);
        let c = frame.project(&frame.h[0]);
        assert!(g.norm(&(&c.h_part - &frame.h[0])) < 1e-12);
        assert!(c.root_parts.iter().flatten().all(|v| v.abs() < 1e-12));

        let e = &frame.roots[1].e;
        let c = frame.project(e);
        assert!(g.norm(&c.h_part) < 1e-12);
        assert!((c.root_parts[1][0] - 1.0).abs() < 1e-12);
        assert!(c.root_parts[1][1].abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = g.random_element(&mut rng);
        let c = frame.project(&x);
        assert!(c.reassembly_residual(&g, &frame, &x) <= 1e-10 * g.norm(&x));
    }

    #[test]
    fn coroot_directions() {
        let (g, frame) = frame_for("su:2", 1);
        let u = frame.coroot_direction(0);
        assert!((g.inner(&u, &frame.h[0]).abs() - 1.0).abs() < 1e-12);

        let (g, frame) = frame_for("su:3", 1);
        for i in 0..frame.roots.len() {
            let u = frame.coroot_direction(i);
            assert!(frame.root_value(i, &u) > 0.0);
            assert!((g.norm(&u) - 1.0).abs() < 1e-12);
            // A kernel vector of γ in h is orthogonal to u.
            let a = &frame.roots[i].alpha;
            let kernel = &frame.h[0].scale(a[1]) - &frame.h[1].scale(a[0]);
            assert!(frame.root_value(i, &kernel).abs() < 1e-10);
            assert!(g.inner(&u, &kernel).abs() < 1e-9);
        }
    }

    #[test]
    fn regularity() {
        let (g, frame) = frame_for("su:3", 5);
        assert!(frame
            .is_regular(&frame.h_ref, DEFAULT_REGULAR_DELTA)
            .unwrap());
        assert!(!frame.is_regular(&g.zero(), DEFAULT_REGULAR_DELTA).unwrap());
        let a = &frame.roots[0].alpha;
        let kernel = &frame.h[0].scale(a[1]) - &frame.h[1].scale(a[0]);
        assert!(!frame.is_regular(&kernel, DEFAULT_REGULAR_DELTA).unwrap());
        assert!(matches!(
            frame.is_regular(&frame.roots[0].e, 1e-6),
            Err(LieError::NotInCsa(_))
        ));
    }
}
