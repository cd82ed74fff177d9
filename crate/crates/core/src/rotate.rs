//! The descent that rotates a Cartan subalgebra until it is orthogonal to
//! prescribed elements.
//!
//! Each root `γ` spans, together with its coroot line, a subalgebra
//! `m_γ = ℝ u_γ ⊕ L_γ ≅ so(3)`. In a normalized frame `(U, V, W)` of `m_γ`
//! the bracket is the cross product and `exp(ad(Z))` is the rotation of
//! `R³` with axis `Z` and angle `|Z|`. One step of the descent picks a root
//! `γ` with a nonzero coroot component `H_γ` of `B₀ = proj_h(B)`, and turns
//! the coroot line onto a line of `m_γ` orthogonal to both the `m_γ`-parts
//! of `A` and `B`. The rotation fixes `ker γ` pointwise, so the new
//! projection of `B` is `B₀ − H_γ` and that of `A` stays zero.
//!
//! The frame `h` is kept fixed and the elements are moved by the inverse
//! rotation instead; the recorded generators `Z_1, ..., Z_n` reproduce the
//! original elements as `exp(ad Z_1) ∘ ... ∘ exp(ad Z_n)`.

use std::f64::consts::PI;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, LieAlgebra};
use crate::cartan::{find_csa, root_decomposition, CartanFrame, CSA_TRIES};
use crate::error::{LieError, Result};
use crate::numerics;

const SO3_BRACKET_TOL: f64 = 1e-8;
const SO3_MEMBERSHIP_TOL: f64 = 1e-9;
/// Below this relative size `b̂ × â` is treated as parallel input.
const PARALLEL_TOL: f64 = 1e-8;

/// Normalized `so(3)` frame of `m_γ`: `[U,V] = W`, `[V,W] = U`, `[W,U] = V`.
///
/// `U = ρ X`, `V = ρ iX`, `W = ρ² [X, iX]` for a unit `X ∈ L_γ`, with
/// `ρ = 1 / sqrt(2π γ([X, iX]))`. All three have Killing norm `ρ`.
#[derive(Debug, Clone)]
pub struct So3Frame {
    pub root: usize,
    pub u: Element,
    pub v: Element,
    pub w: Element,
    /// `[X, iX]` before scaling.
    pub y: Element,
    pub rho: f64,
}

impl So3Frame {
    /// Coordinates of the `m_γ`-component of `x` in the `(U, V, W)` frame.
    pub fn coords(&self, g: &LieAlgebra, x: &Element) -> Vector3<f64> {
        let r2 = self.rho * self.rho;
        Vector3::new(
            g.inner(&self.u, x),
            g.inner(&self.v, x),
            g.inner(&self.w, x),
        ) / r2
    }

    pub fn element(&self, c: &Vector3<f64>) -> Element {
        &(&self.u.scale(c.x) + &self.v.scale(c.y)) + &self.w.scale(c.z)
    }

    /// Largest of the three bracket-relation residuals.
    pub fn bracket_residual(&self, g: &LieAlgebra) -> Result<f64> {
        let r1 = g.norm(&(&g.bracket(&self.u, &self.v)? - &self.w));
        let r2 = g.norm(&(&g.bracket(&self.v, &self.w)? - &self.u));
        let r3 = g.norm(&(&g.bracket(&self.w, &self.u)? - &self.v));
        Ok(r1.max(r2).max(r3))
    }
}

/// Builds the `so(3)` frame of `m_γ` from a unit `x_dir ∈ L_γ`.
pub fn so3_frame(
    g: &LieAlgebra,
    frame: &CartanFrame,
    root: usize,
    x_dir: &Element,
) -> Result<So3Frame> {
    let gamma = &frame.roots[root];
    let a = g.inner(&gamma.e, x_dir);
    let b = g.inner(&gamma.f, x_dir);
    let in_plane = &gamma.e.scale(a) + &gamma.f.scale(b);
    let off = g.norm(&(x_dir - &in_plane));
    let nrm = g.norm(x_dir);
    if off > SO3_MEMBERSHIP_TOL || (nrm - 1.0).abs() > SO3_MEMBERSHIP_TOL {
        return Err(LieError::BrokenFrame(format!(
            "direction not a unit vector of the root plane (off {off:e}, norm {nrm})"
        )));
    }
    // i·(a e + b f) = a f − b e
    let ix = &gamma.f.scale(a) - &gamma.e.scale(b);
    let y = g.bracket(&in_plane, &ix)?;
    let gamma_y = frame.root_value(root, &y);
    if gamma_y <= 1e-12 {
        return Err(LieError::DegenerateRoot(gamma_y));
    }
    let killing_yy = g.killing_form(&y, &y)?;
    if (killing_yy + 2.0 * PI * gamma_y).abs() > 1e-8 * killing_yy.abs().max(1.0) {
        return Err(LieError::BrokenFrame(format!(
            "<Y,Y> = {killing_yy} but -2 pi gamma(Y) = {}",
            -2.0 * PI * gamma_y
        )));
    }
    let rho = 1.0 / (2.0 * PI * gamma_y).sqrt();
    let s = So3Frame {
        root,
        u: in_plane.scale(rho),
        v: ix.scale(rho),
        w: y.scale(rho * rho),
        y,
        rho,
    };
    let res = s.bracket_residual(g)?;
    if res > SO3_BRACKET_TOL {
        return Err(LieError::BrokenFrame(format!(
            "so(3) relations off by {res:e}"
        )));
    }
    Ok(s)
}

/// Rotation of `R³` by angle `|z|` about `z`.
fn rodrigues(z: &Vector3<f64>, x: &Vector3<f64>) -> Vector3<f64> {
    let theta = z.norm();
    if theta == 0.0 {
        return *x;
    }
    let k = z / theta;
    x * theta.cos() + k.cross(x) * theta.sin() + k * k.dot(x) * (1.0 - theta.cos())
}

/// The generator `Z ∈ m_γ` of one descent step.
///
/// `b_comp` and `a_comp` are the `m_γ`-components of the element being
/// reduced and of the element that must stay orthogonal to the CSA. The
/// target line is `v ∝ b × a` (in frame coordinates), or the line in
/// `span(W, b)` orthogonal to `b` when `a` adds no constraint (`U` when `b`
/// is on the `W` axis); `Z` turns the coroot axis `W` onto `v` by the
/// smaller of the two possible angles.
pub fn plan_rotation(
    g: &LieAlgebra,
    s: &So3Frame,
    b_comp: &Element,
    a_comp: &Element,
) -> Result<Element> {
    let b = s.coords(g, b_comp);
    let a = s.coords(g, a_comp);
    let w = Vector3::z();
    let bn = b.norm();
    if bn == 0.0 || b.z.abs() <= 1e-14 * bn {
        return Err(LieError::ZeroH);
    }
    let bhat = b / bn;
    let cross = bhat.cross(&a);
    let mut v = if cross.norm() > PARALLEL_TOL * a.norm() && a.norm() > 0.0 {
        cross
    } else {
        let in_plane = w - bhat * bhat.dot(&w);
        if in_plane.norm() > PARALLEL_TOL {
            in_plane
        } else {
            // `b` lies on the coroot axis: every direction in the plane works.
            Vector3::x()
        }
    };
    v -= bhat * bhat.dot(&v);
    v /= v.norm();
    if v.dot(&w) < 0.0 {
        v = -v;
    }
    let axis = w.cross(&v);
    let angle = axis.norm().atan2(v.dot(&w));
    let z = axis / axis.norm() * angle;

    let moved = rodrigues(&z, &w);
    debug_assert!((moved - v).norm() < 1e-10);
    debug_assert!(moved.dot(&b).abs() <= 1e-8 * bn);
    debug_assert!(moved.dot(&a).abs() <= 1e-8 * bn.max(a.norm()));
    Ok(s.element(&z))
}

/// `exp(ad(Z)) X`.
pub fn apply_rotation(g: &LieAlgebra, z: &Element, x: &Element) -> Result<Element> {
    g.exp_ad_apply(z, x)
}

/// `Q(x) = exp(ad Z_1)(... exp(ad Z_n)(x))` for generators in step order.
pub fn apply_generators(g: &LieAlgebra, generators: &[Element], x: &Element) -> Result<Element> {
    let mut out = x.clone();
    for z in generators.iter().rev() {
        out = apply_rotation(g, z, &out)?;
    }
    Ok(out)
}

/// `Q⁻¹(x)`.
pub fn apply_inverse_generators(
    g: &LieAlgebra,
    generators: &[Element],
    x: &Element,
) -> Result<Element> {
    let mut out = x.clone();
    for z in generators {
        out = apply_rotation(g, &-z, &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootPolicy {
    /// Largest `|H_γ|`.
    #[default]
    MaxDecrease,
    /// First root whose coroot component clears the stall bound.
    First,
    /// Uniformly random among roots clearing the stall bound.
    Random,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub tol_a: f64,
    pub tol_b: f64,
    pub max_iter: usize,
    pub policy: RootPolicy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tol_a: 1e-7,
            tol_b: 1e-8,
            max_iter: 500,
            policy: RootPolicy::MaxDecrease,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JacobiStep {
    /// 1 for the sweep that clears `A`, 2 for the sweep that clears `B`.
    pub stage: u8,
    /// 1-based within the stage.
    pub iter: usize,
    pub root: usize,
    pub b0_before: f64,
    pub b0_after: f64,
    /// `|H_γ|²`.
    pub decrease: f64,
    /// `|proj_h(A)|` after the step.
    pub a0_after: f64,
    pub z: Element,
}

impl JacobiStep {
    /// `|b0_after² + decrease − b0_before²| / b0_before²`.
    pub fn identity_residual(&self) -> f64 {
        let lhs = self.b0_after * self.b0_after + self.decrease;
        let rhs = self.b0_before * self.b0_before;
        (lhs - rhs).abs() / rhs
    }

    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            iter: self.iter,
            root: self.root,
            b0_before: self.b0_before,
            b0_after: self.b0_after,
            decrease: self.decrease,
            stage: self.stage,
        }
    }
}

/// One line of the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub root: usize,
    pub b0_before: f64,
    pub b0_after: f64,
    pub decrease: f64,
    pub stage: u8,
}

#[derive(Debug, Clone)]
pub struct JacobiResult {
    /// Rotation generators in the order the steps were taken.
    pub generators: Vec<Element>,
    pub a_out: Element,
    pub b_out: Element,
    pub trace: Vec<JacobiStep>,
    pub converged: bool,
}

fn select_root<R: Rng + ?Sized>(
    scores: &[f64],
    floor: f64,
    policy: RootPolicy,
    rng: &mut R,
) -> usize {
    let best = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("at least one root");
    let eligible: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= floor).collect();
    if eligible.is_empty() {
        return best;
    }
    match policy {
        RootPolicy::MaxDecrease => best,
        RootPolicy::First => eligible[0],
        RootPolicy::Random => eligible[rng.random_range(0..eligible.len())],
    }
}

/// Orthonormal frame coordinates: the CSA basis, then `(e_α, f_α)` per root.
///
/// The sweep keeps its state here so that `h`-parts are read off directly
/// rather than recovered by projecting an `O(|B|)` vector.
struct FrameCoords {
    basis: DMatrix<f64>,
    dual: DMatrix<f64>,
    rank: usize,
}

impl FrameCoords {
    fn new(g: &LieAlgebra, frame: &CartanFrame) -> Self {
        let mut cols: Vec<DVector<f64>> = frame.h.iter().map(|h| h.coords().clone()).collect();
        for root in &frame.roots {
            cols.push(root.e.coords().clone());
            cols.push(root.f.coords().clone());
        }
        let basis = DMatrix::from_columns(&cols);
        let dual = basis.transpose() * g.metric().gram();
        Self {
            basis,
            dual,
            rank: frame.rank(),
        }
    }

    fn coords(&self, x: &Element) -> DVector<f64> {
        &self.dual * x.coords()
    }

    fn element(&self, like: &Element, c: &DVector<f64>) -> Element {
        like.with_coords(&self.basis * c)
    }

    fn h_norm(&self, c: &DVector<f64>) -> f64 {
        c.rows(0, self.rank).norm()
    }

    /// The `m_γ`-component of `c` for root `i` with unit coroot `u` (CSA coords).
    fn m_gamma(&self, c: &DVector<f64>, i: usize, u: &DVector<f64>) -> DVector<f64> {
        let r = self.rank;
        let mut m = DVector::zeros(c.len());
        m.rows_mut(0, r).copy_from(&(u * u.dot(&c.rows(0, r))));
        m[r + 2 * i] = c[r + 2 * i];
        m[r + 2 * i + 1] = c[r + 2 * i + 1];
        m
    }

    /// Applies `exp(ad(−Z))` given in frame coordinates. `ad(Z)` vanishes on
    /// `ker γ`, so the CSA coordinates only move along the coroot `u`.
    fn rotate(&self, e: &DMatrix<f64>, c: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let r = self.rank;
        let mut out = e * c;
        let t_old = u.dot(&c.rows(0, r));
        let t_new = u.dot(&out.rows(0, r));
        let h = c.rows(0, r) + u * (t_new - t_old);
        out.rows_mut(0, r).copy_from(&h);
        out
    }
}

/// Rotates `(A, B)` until `proj_h(B)` vanishes (to `tol_b`) while keeping
/// `proj_h(A)` zero. Requires `A ⟂ h` on entry.
pub fn jacobi_sweep<R: Rng + ?Sized>(
    g: &LieAlgebra,
    frame: &CartanFrame,
    a: &Element,
    b: &Element,
    cfg: &SweepConfig,
    rng: &mut R,
) -> Result<JacobiResult> {
    let scale_a = g.norm(a).max(1.0);
    let scale_b = g.norm(b).max(1.0);
    let fc = FrameCoords::new(g, frame);
    let r = fc.rank;
    let mut ca = fc.coords(a);
    let mut cb = fc.coords(b);
    let a0 = fc.h_norm(&ca);
    if a0 > cfg.tol_a * scale_a {
        return Err(LieError::PreconditionViolated(a0));
    }
    let stall = frame.stall_constant();
    let coroots: Vec<DVector<f64>> = frame
        .roots
        .iter()
        .map(|root| &root.alpha / root.alpha.norm())
        .collect();
    let mut generators = Vec::new();
    let mut trace = Vec::new();
    let finish =
        |ca: &DVector<f64>, cb: &DVector<f64>, generators, trace, converged| JacobiResult {
            generators,
            a_out: fc.element(a, ca),
            b_out: fc.element(b, cb),
            trace,
            converged,
        };

    loop {
        let b0_norm = fc.h_norm(&cb);
        if b0_norm <= cfg.tol_b * scale_b {
            debug!("sweep converged after {} steps", trace.len());
            return Ok(finish(&ca, &cb, generators, trace, true));
        }
        if trace.len() >= cfg.max_iter {
            return Err(LieError::MaxIterationsExceeded(Box::new(finish(
                &ca, &cb, generators, trace, false,
            ))));
        }

        let bh = cb.rows(0, r).into_owned();
        let scores: Vec<f64> = coroots.iter().map(|u| u.dot(&bh).abs()).collect();
        let floor = stall * b0_norm * (1.0 - 1e-9);
        let root = select_root(&scores, floor, cfg.policy, rng);
        if scores[root] < floor {
            warn!(
                "selected coroot component {:e} below stall bound {:e}",
                scores[root], floor
            );
        }
        let u = &coroots[root];
        let decrease = scores[root] * scores[root];

        let (ae, af) = (ca[r + 2 * root], ca[r + 2 * root + 1]);
        let a_plane_norm = ae.hypot(af);
        let x_dir = if a_plane_norm > 1e-10 * scale_a {
            let gamma = &frame.roots[root];
            &gamma.e.scale(ae / a_plane_norm) + &gamma.f.scale(af / a_plane_norm)
        } else {
            frame.roots[root].e.clone()
        };
        let s = so3_frame(g, frame, root, &x_dir)?;
        let b_comp = fc.element(b, &fc.m_gamma(&cb, root, u));
        let a_comp = fc.element(a, &fc.m_gamma(&ca, root, u));
        let z = plan_rotation(g, &s, &b_comp, &a_comp)?;

        let ad = &fc.dual * g.ad_matrix(&-&z)? * &fc.basis;
        let e = numerics::expm(&ad);
        ca = fc.rotate(&e, &ca, u);
        cb = fc.rotate(&e, &cb, u);

        trace.push(JacobiStep {
            stage: 0,
            iter: trace.len() + 1,
            root,
            b0_before: b0_norm,
            b0_after: fc.h_norm(&cb),
            decrease,
            a0_after: fc.h_norm(&ca),
            z: z.clone(),
        });
        generators.push(z);
    }
}

/// Both sweeps of the biorthogonalization and the fixed frame they used.
#[derive(Debug, Clone)]
pub struct Biorthogonal {
    pub frame: CartanFrame,
    /// Clears `A`: sweep of `(0, A)`.
    pub stage1: JacobiResult,
    /// Clears `B` while keeping `A` clear.
    pub stage2: JacobiResult,
}

impl Biorthogonal {
    /// All generators, stage 1 first.
    pub fn generators(&self) -> Vec<Element> {
        self.stage1
            .generators
            .iter()
            .chain(&self.stage2.generators)
            .cloned()
            .collect()
    }

    /// Stage 2 outputs: `Q⁻¹ A` and `Q⁻¹ B`.
    pub fn a_out(&self) -> &Element {
        &self.stage2.a_out
    }

    pub fn b_out(&self) -> &Element {
        &self.stage2.b_out
    }

    pub fn trace(&self) -> impl Iterator<Item = &JacobiStep> {
        self.stage1.trace.iter().chain(&self.stage2.trace)
    }
}

fn tag(mut r: JacobiResult, stage: u8) -> JacobiResult {
    r.trace.iter_mut().for_each(|s| s.stage = stage);
    r
}

/// Finds a CSA orthogonal to both `A` and `B`: first clears `A` against a
/// random CSA (sweeping `(0, A)`), then clears `B` while holding `A`.
pub fn biorthogonal_csa<R: Rng + ?Sized>(
    g: &LieAlgebra,
    a: &Element,
    b: &Element,
    cfg: &SweepConfig,
    rng: &mut R,
) -> Result<Biorthogonal> {
    let h = find_csa(g, rng, CSA_TRIES)?;
    let frame = root_decomposition(g, &h, rng)?;
    biorthogonal_in_frame(g, frame, a, b, cfg, rng)
}

pub fn biorthogonal_in_frame<R: Rng + ?Sized>(
    g: &LieAlgebra,
    frame: CartanFrame,
    a: &Element,
    b: &Element,
    cfg: &SweepConfig,
    rng: &mut R,
) -> Result<Biorthogonal> {
    let stage1 = match jacobi_sweep(g, &frame, &g.zero(), a, cfg, rng) {
        Ok(r) => tag(r, 1),
        Err(LieError::MaxIterationsExceeded(partial)) => {
            return Err(LieError::MaxIterationsExceeded(Box::new(tag(*partial, 1))))
        }
        Err(e) => return Err(e),
    };
    let b1 = apply_inverse_generators(g, &stage1.generators, b)?;
    let a1 = stage1.b_out.clone();
    let stage2 = match jacobi_sweep(g, &frame, &a1, &b1, cfg, rng) {
        Ok(r) => tag(r, 2),
        Err(LieError::MaxIterationsExceeded(partial)) => {
            let mut partial = tag(*partial, 2);
            let mut steps = stage1.trace.clone();
            steps.append(&mut partial.trace);
            partial.trace = steps;
            return Err(LieError::MaxIterationsExceeded(Box::new(partial)));
        }
        Err(e) => return Err(e),
    };
    Ok(Biorthogonal {
        frame,
        stage1,
        stage2,
    })
}
