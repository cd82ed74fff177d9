use std::f64::consts::PI;

use liecomm::cartan::{
    centralizer, find_csa, root_decomposition, seeded_frame, subspace_elements, CartanFrame,
};
use liecomm::numerics::{nullspace, orthonormalize, skew_pairing, Subspace, DEFAULT_NULLSPACE_TOL};
use liecomm::rotate::{biorthogonal_in_frame, jacobi_sweep, so3_frame, SweepConfig};
use liecomm::solver::pick_regular;
use liecomm::{build_algebra, LieAlgebra, LieError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn algebra(spec: &str) -> LieAlgebra {
    build_algebra(&spec.parse().unwrap()).unwrap()
}

fn everything(g: &LieAlgebra) -> Subspace {
    orthonormalize(
        &(0..g.dim())
            .map(|i| g.basis_element(i).coords().clone())
            .collect::<Vec<_>>(),
        g.metric(),
    )
}

/// Unit vector of `ker γ` for a rank-2 frame.
fn root_kernel(frame: &CartanFrame, i: usize) -> liecomm::Element {
    let a = &frame.roots[i].alpha;
    let k = &frame.h[0].scale(a[1]) - &frame.h[1].scale(a[0]);
    k.scale(1.0 / a.norm())
}

#[test]
fn generic_nullspace_in_so4_has_rank_dimension() {
    let g = algebra("so:4");
    let x = g.seeded_elements(1, 1).remove(0);
    let ns = nullspace(&g.ad_matrix(&x).unwrap(), g.metric(), DEFAULT_NULLSPACE_TOL);
    assert_eq!(ns.dim(), 2);
}

#[test]
fn skew_pairing_so3_and_su3() {
    let g = algebra("so:3");
    let e3 = g.basis_element(2);
    let p = skew_pairing(
        &g.ad_matrix(&e3).unwrap(),
        &everything(&g),
        g.metric(),
        1e-10,
    )
    .unwrap();
    assert_eq!(p.planes.len(), 1);
    assert_eq!(p.zero_space.dim(), 1);
    let z = g
        .element_from_vector(p.zero_space.basis[0].clone())
        .unwrap();
    assert!((g.inner(&z, &e3).abs() - g.norm(&e3)).abs() < 1e-12);
    assert!(p.planes[0].omega > 0.0);

    let g = algebra("su:3");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = find_csa(&g, &mut rng, 10).unwrap();
    let hs = subspace_elements(&g, &h);
    let generic = &hs[0].scale(0.83) + &hs[1].scale(-0.41);
    let p = skew_pairing(
        &g.ad_matrix(&generic).unwrap(),
        &everything(&g),
        g.metric(),
        1e-10,
    )
    .unwrap();
    assert_eq!(p.planes.len(), 3);
    assert_eq!(p.zero_space.dim(), 2);
}

#[test]
fn csa_basis_is_orthonormal() {
    let g = algebra("so:6");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = find_csa(&g, &mut rng, 10).unwrap();
    assert_eq!(h.dim(), 3);
    assert!(h.gram_residual(g.metric()) <= 1e-10);
}

#[test]
fn centralizer_of_diagonal_su2_element() {
    let g = algebra("su:2");
    // diag(i, −i)/2 is half the first basis element.
    let x = g.basis_element(0).scale(0.5);
    assert!((g.killing_form(&x, &x).unwrap() + 2.0).abs() < 1e-12);
    let c = centralizer(&g, &x, DEFAULT_NULLSPACE_TOL).unwrap();
    assert_eq!(c.dim(), 1);
    let v = g.element_from_vector(c.basis[0].clone()).unwrap();
    assert!((g.inner(&v, &x).abs() - g.norm(&x)).abs() < 1e-12);
    assert_eq!(
        centralizer(&g, &g.zero(), DEFAULT_NULLSPACE_TOL)
            .unwrap()
            .dim(),
        3
    );
}

#[test]
fn frame_orthogonality_and_orientation() {
    for spec in ["su:3", "so:5", "sum:su:2+so:5"] {
        let g = algebra(spec);
        let frame = seeded_frame(&g, 8).unwrap();
        let mut all: Vec<_> = frame.h.clone();
        for r in &frame.roots {
            all.push(r.e.clone());
            all.push(r.f.clone());
        }
        for (i, x) in all.iter().enumerate() {
            for (j, y) in all.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g.inner(x, y) - expected).abs() < 1e-9, "{spec}");
            }
        }
        for i in 0..frame.roots.len() {
            assert!(frame.root_value(i, &frame.h_ref) > 0.0);
            assert!(frame.root_value(i, &frame.coroot_direction(i)) > 0.0);
        }
    }
}

#[test]
fn coroot_orthogonal_to_root_kernel_and_regularity() {
    let g = algebra("su:3");
    let frame = seeded_frame(&g, 4).unwrap();
    assert!(frame.is_regular(&frame.h_ref, 1e-6).unwrap());
    assert!(!frame.is_regular(&g.zero(), 1e-6).unwrap());
    for i in 0..3 {
        let k = root_kernel(&frame, i);
        assert!(frame.root_value(i, &k).abs() <= 1e-10);
        assert!(g.inner(&frame.coroot_direction(i), &k).abs() <= 1e-9);
        assert!(!frame.is_regular(&k, 1e-6).unwrap());
    }
}

#[test]
fn so3_frames_across_roots() {
    let g = algebra("su:3");
    let frame = seeded_frame(&g, 6).unwrap();
    for i in 0..3 {
        let s = so3_frame(&g, &frame, i, &frame.roots[i].f).unwrap();
        assert!(s.bracket_residual(&g).unwrap() <= 1e-8);
        let yy = g.killing_form(&s.y, &s.y).unwrap();
        assert!((yy + 2.0 * PI * frame.root_value(i, &s.y)).abs() <= 1e-8);
        assert!(g.norm(&(&s.w - &frame.h_part(&s.w))) <= 1e-9);
        for x in [&s.u, &s.v] {
            assert!(g.norm(&frame.h_part(x)) <= 1e-9);
        }
    }
}

#[test]
fn su2_element_of_h_clears_in_one_step() {
    let g = algebra("su:2");
    let frame = seeded_frame(&g, 3).unwrap();
    let b = frame.h[0].scale(1.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = jacobi_sweep(&g, &frame, &g.zero(), &b, &SweepConfig::default(), &mut rng).unwrap();
    assert_eq!(r.trace.len(), 1);
    assert!(g.norm(&frame.h_part(&r.b_out)) <= 1e-12);
    assert!((r.trace[0].decrease - 1.7 * 1.7).abs() < 1e-12);
}

#[test]
fn so4_zero_a_generic_b() {
    let g = algebra("so:4");
    let frame = seeded_frame(&g, 1).unwrap();
    let b = g.seeded_elements(3, 1).remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r =
        biorthogonal_in_frame(&g, frame, &g.zero(), &b, &SweepConfig::default(), &mut rng).unwrap();
    assert!(r.stage1.trace.is_empty());
    assert!(g.norm(&r.frame.h_part(r.b_out())) <= 1e-8 * g.norm(&b).max(1.0));
    assert!(r
        .stage2
        .trace
        .windows(2)
        .all(|w| w[1].b0_before < w[0].b0_before));
}

#[test]
fn user_supplied_subspace_must_be_a_csa() {
    let g = algebra("su:3");
    let single = Subspace {
        basis: vec![g.basis_element(0).coords() / g.norm(&g.basis_element(0))],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        root_decomposition(&g, &single, &mut rng),
        Err(LieError::NotACsa { .. })
    ));
}

/// For so(5) the best achievable `min |α| / max |α|` over `h` is 1/3, so a
/// margin of 0.5 cannot be met and the search gives up.
#[test]
fn so5_margin_half_is_unreachable() {
    let g = algebra("so:5");
    let frame = seeded_frame(&g, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!(matches!(
        pick_regular(&frame, 0.5, &mut rng),
        Err(LieError::RegularNotFound)
    ));
    let x = pick_regular(&frame, 0.25, &mut rng).unwrap();
    assert!(frame.regularity_margin(&x) <= 1.0 / 3.0 + 1e-9);
}
