use cmc_core::geometry::{fundamental_forms, signed_volume, Surface, VolumeClosure};
use cmc_core::problems::boundary::BoundaryConditionSet;
use cmc_core::problems::conformal::square_to_disk;
use cmc_core::problems::oracles::{cap_height, cap_lambda, RivuletFamily};
use cmc_core::spectral::*;
use cmc_core::system::{BaseState, Discretization, UnknownTriple};
use proptest::prelude::*;
use std::f64::consts::PI;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn dpoly(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
}

fn rotate(s: &Surface, angle: f64, axis_tilt: f64, shift: [f64; 3]) -> Surface {
    let (ca, sa) = (angle.cos(), angle.sin());
    let (ct, st) = (axis_tilt.cos(), axis_tilt.sin());
    let mut out = s.clone();
    for n in 0..s.len() {
        let [x, y, z] = s.point(n);
        // about z, then about x
        let (x1, y1) = (ca * x - sa * y, sa * x + ca * y);
        let (y2, z2) = (ct * y1 - st * z, st * y1 + ct * z);
        out.x[n] = x1 + shift[0];
        out.y[n] = y2 + shift[1];
        out.z[n] = z2 + shift[2];
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chebyshev_differentiation_is_exact_on_polynomials(
        n in 4usize..20,
        l in 0.2f64..3.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
    ) {
        let x = cheb_nodes(n, l).unwrap();
        let d = cheb_diff(n, l).unwrap();
        let f: Vec<f64> = x.iter().map(|&t| poly(&coeffs, t)).collect();
        let scale = 1.0 + l.powi(coeffs.len() as i32);
        for (i, &t) in x.iter().enumerate() {
            let df: f64 = (0..=n).map(|j| d[(i, j)] * f[j]).sum();
            prop_assert!((df - dpoly(&coeffs, t)).abs() < 1e-9 * scale * (n * n) as f64);
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials(
        n in 4usize..24,
        l in 0.2f64..3.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
    ) {
        let x = cheb_nodes(n, l).unwrap();
        let w = clenshaw_curtis(n, l).unwrap();
        let q: f64 = x.iter().zip(&w).map(|(&t, wi)| wi * poly(&coeffs, t)).sum();
        let exact: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (l.powi(k as i32 + 1) - (-l).powi(k as i32 + 1)) / (k as f64 + 1.0))
            .sum();
        prop_assert!((q - exact).abs() < 1e-12 * (1.0 + l.powi(coeffs.len() as i32 + 1)));
    }

    #[test]
    fn structured_derivatives_match_dense_products(
        n in 3usize..12,
        m in 3usize..12,
        fourier in any::<bool>(),
        seed in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let m = if fourier { 2 * (m / 2) + 2 } else { m };
        let kind_v = if fourier { NodeKind::Fourier } else { NodeKind::Chebyshev };
        let grid = Grid::new(n, m, 0.7, if fourier { PI } else { 1.3 }, NodeKind::Chebyshev, kind_v).unwrap();
        let ops = assemble(&grid).unwrap();
        let f = grid.sample(|u, v| {
            seed[0] + seed[1] * u + seed[2] * (v + seed[3]).sin() + seed[4] * (u * v).exp() + seed[5] * (2.0 * v).cos()
        });
        for which in [Derivative::U, Derivative::V, Derivative::UU, Derivative::UV, Derivative::VV] {
            let dense = apply(ops.matrix(which), &f);
            let fast = ops.derivative(which, &f);
            let scale = 1.0 + dense.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (a, b) in dense.iter().zip(&fast) {
                prop_assert!((a - b).abs() < 1e-11 * scale, "{which:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn grid_mirrors_are_involutions(n in 2usize..14, m in 2usize..14) {
        let grid = Grid::chebyshev(n, m, 1.0, 1.0).unwrap();
        for node in 0..grid.len() {
            prop_assert_eq!(grid.mirror_u(grid.mirror_u(node)), node);
            prop_assert_eq!(grid.mirror_v(grid.mirror_v(node)), node);
        }
    }

    #[test]
    fn curvature_is_invariant_under_rigid_motion(
        a in -0.5f64..0.5,
        b in -0.5f64..0.5,
        angle in 0.0f64..(2.0 * PI),
        tilt in -1.0f64..1.0,
        shift in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let grid = Grid::chebyshev(10, 10, 1.0, 1.0).unwrap();
        let ops = assemble(&grid).unwrap();
        let z = grid.sample(|u, v| a * u * u + b * u * v * v);
        let s = Surface::new(grid.sample(|u, _| u), grid.sample(|_, v| v), z).unwrap();
        let moved = rotate(&s, angle, tilt, shift);
        let g0 = fundamental_forms(&s, &ops).unwrap();
        let g1 = fundamental_forms(&moved, &ops).unwrap();
        for i in 0..grid.len() {
            prop_assert!((g0.h[i] - g1.h[i]).abs() < 1e-10);
            prop_assert!((g0.k[i] - g1.k[i]).abs() < 1e-10);
            prop_assert!((g0.detg[i] - g1.detg[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cone_volume_is_invariant_under_rotation(
        a in -0.5f64..0.5,
        angle in 0.0f64..(2.0 * PI),
        tilt in -1.0f64..1.0,
    ) {
        let grid = Grid::chebyshev(12, 12, 1.0, 1.0).unwrap();
        let ops = assemble(&grid).unwrap();
        let s = Surface::new(
            grid.sample(|u, _| u),
            grid.sample(|_, v| v),
            grid.sample(|u, v| a * (1.0 - u * u) * (1.0 - v * v)),
        )
        .unwrap();
        let v0 = signed_volume(&s, &ops);
        let v1 = signed_volume(&rotate(&s, angle, tilt, [0.0; 3]), &ops);
        prop_assert!((v0 - v1).abs() < 1e-12);
        // over the unit square: ∫∫ a (1 − u²)(1 − v²) = 16a/9
        prop_assert!((v0 - 16.0 * a / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cap_oracle_is_odd_and_consistent(v in 0.0f64..20.0) {
        prop_assert!((cap_lambda(-v) + cap_lambda(v)).abs() < 1e-12 * (1.0 + v));
        let a = cap_height(v);
        prop_assert!((PI * a * (3.0 + a * a) / 6.0 - v).abs() < 1e-10 * (1.0 + v));
        prop_assert!((cap_lambda(v) + 4.0 * a / (1.0 + a * a)).abs() < 1e-10);
    }

    #[test]
    fn rivulet_oracle_inverts_volume(l in 0.05f64..1.0, t in 0.01f64..2.0) {
        let fam = RivuletFamily::new(l);
        let s = fam.at(t * l);
        prop_assert!((fam.height_for_volume(s.volume) - t * l).abs() < 1e-10 * (1.0 + t * l));
        prop_assert!(s.lambda < 0.0);
    }

    #[test]
    fn conformal_map_lands_in_the_unit_disk(u in -0.999f64..0.999, v in -0.999f64..0.999) {
        let (x, y) = square_to_disk(u, v).unwrap();
        prop_assert!(x.hypot(y) < 1.0);
        let (xm, ym) = square_to_disk(-u, v).unwrap();
        prop_assert!((xm + x).abs() < 1e-12 && (ym - y).abs() < 1e-12);
    }

    #[test]
    fn unknown_vector_round_trips(phi in prop::collection::vec(-1.0f64..1.0, 1..40), lam in -5.0f64..5.0, vol in -5.0f64..5.0) {
        let t = UnknownTriple { phi: phi.clone(), lambda: lam, volume: vol };
        let back = UnknownTriple::from_slice(&t.to_vec());
        prop_assert_eq!(back, t);
    }
}

#[test]
fn conformal_map_satisfies_cauchy_riemann() {
    let h = 1e-5;
    for i in -6..=6 {
        for j in -6..=6 {
            let (u, v) = (0.13 * i as f64, 0.13 * j as f64);
            let f = |u, v| square_to_disk(u, v).unwrap();
            let (xu, yu) = {
                let (a, b) = (f(u + h, v), f(u - h, v));
                ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
            };
            let (xv, yv) = {
                let (a, b) = (f(u, v + h), f(u, v - h));
                ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
            };
            assert!((xu - yv).abs() < 1e-7, "({u}, {v})");
            assert!((xv + yu).abs() < 1e-7, "({u}, {v})");
        }
    }
}

#[test]
fn base_state_requires_matching_sizes() {
    let grid = Grid::chebyshev(6, 6, 1.0, 1.0).unwrap();
    let s = Surface::new(grid.sample(|u, _| u), grid.sample(|_, v| v), vec![0.0; grid.len()]).unwrap();
    let other = Grid::chebyshev(5, 6, 1.0, 1.0).unwrap();
    let disc = Discretization::new(
        assemble(&other).unwrap(),
        BoundaryConditionSet::dirichlet(),
        VolumeClosure::Cone,
        vec![],
    )
    .unwrap();
    assert!(BaseState::new(s, 0.0, 0.0, &disc).is_err());
}
