//! End-to-end solve: a regular `X` with `A, B ∈ [X, g]`, plus a certificate
//! that can be re-checked from `(g, A, B, X, Y_A, Y_B)` alone.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, LieAlgebra};
use crate::cartan::{centralizer, is_abelian, subspace_elements, CartanFrame, FrameRecord};
use crate::error::{LieError, Result};
use crate::numerics::DEFAULT_NULLSPACE_TOL;
use crate::rotate::{biorthogonal_csa, Biorthogonal, RootPolicy, SweepConfig};

/// Residual bound for certificates, relative to `max(1, |target|)`.
pub const CERTIFICATE_TOL: f64 = 1e-8;
const REGULAR_RETRIES: usize = 20;
const REGULAR_NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    pub tol_a: f64,
    pub tol_b: f64,
    pub max_iter: usize,
    pub policy: RootPolicy,
    pub regular_delta: f64,
    pub rng_seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            tol_a: sweep.tol_a,
            tol_b: sweep.tol_b,
            max_iter: sweep.max_iter,
            policy: sweep.policy,
            regular_delta: crate::cartan::DEFAULT_REGULAR_DELTA,
            rng_seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_a > 0.0
            && self.tol_b > 0.0
            && self.regular_delta > 0.0
            && self.regular_delta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(LieError::InvalidSpec(format!(
                "bad solve configuration {self:?}"
            )))
        }
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            tol_a: self.tol_a,
            tol_b: self.tol_b,
            max_iter: self.max_iter,
            policy: self.policy,
        }
    }
}

/// Sum of the coroot directions, normalized; perturbed with seeded CSA noise
/// if that is not regular at `delta`.
pub fn pick_regular<R: Rng + ?Sized>(
    frame: &CartanFrame,
    delta: f64,
    rng: &mut R,
) -> Result<Element> {
    let metric = frame.metric();
    let normalize = |x: Element| {
        let n = metric.norm(x.coords());
        x.scale(1.0 / n)
    };
    let mut base = frame.h_ref.scale(0.0);
    for i in 0..frame.roots.len() {
        base = &base + &frame.coroot_direction(i);
    }
    if metric.norm(base.coords()) == 0.0 {
        base = frame.h_ref.clone();
    }
    let base = normalize(base);
    if frame.is_regular(&base, delta)? {
        return Ok(base);
    }
    for _ in 0..REGULAR_RETRIES {
        let mut noise = base.scale(0.0);
        for hj in &frame.h {
            noise = &noise + &hj.scale(rng.sample::<f64, _>(StandardNormal));
        }
        let n = metric.norm(noise.coords());
        let candidate = normalize(&base + &noise.scale(REGULAR_NOISE / n));
        if frame.is_regular(&candidate, delta)? {
            return Ok(candidate);
        }
    }
    Err(LieError::RegularNotFound)
}

/// Minimum-norm `Y` with `[X, Y] = T` for regular `X ∈ h` and `T ⟂ h`.
///
/// On each root plane `ad(X)` is `2π α(X)` times a quarter turn, so with
/// `T_α = t_e e + t_f f` the preimage is `Y_α = (t_f e − t_e f) / (2π α(X))`.
pub fn invert_ad(g: &LieAlgebra, frame: &CartanFrame, x: &Element, t: &Element) -> Result<Element> {
    if !frame.is_regular(x, 1e-12)? {
        return Err(LieError::NotRegular(frame.regularity_margin(x)));
    }
    let t_scale = g.norm(t).max(1.0);
    let t_h = frame.h_part(t);
    let t_h_norm = g.norm(&t_h);
    if t_h_norm > 1e-8 * t_scale {
        return Err(LieError::NotInImage(t_h_norm));
    }
    let parts = frame.project(t);
    let mut y = g.zero();
    for (i, (root, [te, tf])) in frame.roots.iter().zip(&parts.root_parts).enumerate() {
        let s = 2.0 * PI * frame.root_value(i, x);
        y = &y + &(&root.e.scale(tf / s) - &root.f.scale(te / s));
    }
    let residual = g.norm(&(&(&g.bracket(x, &y)? - t) + &t_h));
    if residual > 1e-9 * t_scale {
        return Err(LieError::BrokenFrame(format!(
            "ad(X) inversion residual {residual:e}"
        )));
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct CommutatorCertificate {
    pub algebra_spec: String,
    pub seed: u64,
    pub x: Element,
    pub y_a: Element,
    pub y_b: Element,
    /// In step order; `Q = exp(ad Z_1) ∘ ... ∘ exp(ad Z_n)`.
    pub generators: Vec<Element>,
    pub frame: FrameRecord,
    pub residual_a: f64,
    pub residual_b: f64,
    pub regularity_margin: f64,
}

/// Stable JSON layout of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub algebra_spec: String,
    pub seed: u64,
    #[serde(rename = "X")]
    pub x: Vec<f64>,
    #[serde(rename = "Y_A")]
    pub y_a: Vec<f64>,
    #[serde(rename = "Y_B")]
    pub y_b: Vec<f64>,
    #[serde(rename = "residual_A")]
    pub residual_a: f64,
    #[serde(rename = "residual_B")]
    pub residual_b: f64,
    pub regularity_margin: f64,
    pub generators: Vec<Vec<f64>>,
    pub frame: FrameRecord,
}

impl CommutatorCertificate {
    pub fn record(&self) -> CertificateRecord {
        CertificateRecord {
            algebra_spec: self.algebra_spec.clone(),
            seed: self.seed,
            x: self.x.to_vec(),
            y_a: self.y_a.to_vec(),
            y_b: self.y_b.to_vec(),
            residual_a: self.residual_a,
            residual_b: self.residual_b,
            regularity_margin: self.regularity_margin,
            generators: self.generators.iter().map(Element::to_vec).collect(),
            frame: self.frame.clone(),
        }
    }

    pub fn from_record(g: &LieAlgebra, r: &CertificateRecord) -> Result<Self> {
        Ok(Self {
            algebra_spec: r.algebra_spec.clone(),
            seed: r.seed,
            x: g.element(r.x.clone())?,
            y_a: g.element(r.y_a.clone())?,
            y_b: g.element(r.y_b.clone())?,
            generators: r
                .generators
                .iter()
                .map(|z| g.element(z.clone()))
                .collect::<Result<_>>()?,
            frame: r.frame.clone(),
            residual_a: r.residual_a,
            residual_b: r.residual_b,
            regularity_margin: r.regularity_margin,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub certificate: CommutatorCertificate,
    pub descent: Biorthogonal,
    /// The regular element inside the fixed frame, before mapping by `Q`.
    pub x_frame: Element,
}

/// Finds one regular `X` with `A = [X, Y_A]` and `B = [X, Y_B]`.
pub fn solve_commutator(
    g: &LieAlgebra,
    a: &Element,
    b: &Element,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let descent = biorthogonal_csa(g, a, b, &cfg.sweep(), &mut rng)?;
    let frame = &descent.frame;
    let x_frame = pick_regular(frame, cfg.regular_delta, &mut rng)?;
    // The sweeps leave h-parts below their tolerances; those are outside
    // [X, g] and show up in the certificate residuals instead.
    let strip = |t: &Element| t - &frame.h_part(t);
    let y_a_frame = invert_ad(g, frame, &x_frame, &strip(descent.a_out()))?;
    let y_b_frame = invert_ad(g, frame, &x_frame, &strip(descent.b_out()))?;

    let generators = descent.generators();
    let (mut x, mut y_a, mut y_b) = (x_frame.clone(), y_a_frame, y_b_frame);
    for z in generators.iter().rev() {
        let q = g.exp_ad(z)?;
        x = x.with_coords(&q * x.coords());
        y_a = y_a.with_coords(&q * y_a.coords());
        y_b = y_b.with_coords(&q * y_b.coords());
    }

    let residual_a = g.norm(&(&g.bracket(&x, &y_a)? - a));
    let residual_b = g.norm(&(&g.bracket(&x, &y_b)? - b));
    if residual_a > CERTIFICATE_TOL * g.norm(a).max(1.0)
        || residual_b > CERTIFICATE_TOL * g.norm(b).max(1.0)
    {
        return Err(LieError::CertificateInvalid {
            residual_a,
            residual_b,
        });
    }
    let certificate = CommutatorCertificate {
        algebra_spec: g.spec().to_string(),
        seed: cfg.rng_seed,
        regularity_margin: frame.regularity_margin(&x_frame),
        x,
        y_a,
        y_b,
        generators,
        frame: frame.record(),
        residual_a,
        residual_b,
    };
    Ok(Solution {
        certificate,
        descent,
        x_frame,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Recomputes the certificate's claims using only brackets, norms and the
/// centralizer of `X`; no frame data is consulted.
pub fn verify_certificate(
    g: &LieAlgebra,
    a: &Element,
    b: &Element,
    cert: &CommutatorCertificate,
    tol: f64,
) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    for (name, y, target) in [("residual_A", &cert.y_a, a), ("residual_B", &cert.y_b, b)] {
        let value = g.norm(&(&g.bracket(&cert.x, y)? - target));
        let bound = tol * g.norm(target).max(1.0);
        checks.push(Check {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
        });
    }
    let rank = g.spec().rank();
    let cen = centralizer(g, &cert.x, DEFAULT_NULLSPACE_TOL)?;
    checks.push(Check {
        name: "centralizer_dimension".into(),
        passed: cen.dim() == rank,
        value: cen.dim() as f64,
        bound: rank as f64,
    });
    let abelian = is_abelian(g, &subspace_elements(g, &cen))?;
    checks.push(Check {
        name: "centralizer_abelian".into(),
        passed: abelian,
        value: if abelian { 0.0 } else { 1.0 },
        bound: 0.0,
    });
    Ok(VerificationReport { checks })
}
