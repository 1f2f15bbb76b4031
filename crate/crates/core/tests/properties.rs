use proptest::prelude::*;
use qrel_core::dynamics::{evolve_t, flow_step, FlowKind};
use qrel_core::*;

fn grid() -> Grid64 {
    Grid::new(1, 512, 40.0).unwrap()
}

fn gaussian(sigma2: f64, b: f64, p0: f64) -> HydroState64 {
    make_gaussian(GaussianParams { sigma2, b, p0, ..Default::default() }, &grid(), 1.0, 1.0).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn cramer_rao_is_tight_on_gaussians(s2 in 0.5f64..2.0, b in -1.0f64..1.0, p0 in -2.0f64..2.0) {
        let k = Kinematics::of(&gaussian(s2, b, p0));
        prop_assert!((k.sigma_x2() - k.delta_x2(Convention::Consistent).unwrap()).abs() < 1e-9);
        prop_assert!((k.sigma_x2() - s2).abs() < 1e-9);
    }

    #[test]
    fn restored_product_law(s2 in 0.5f64..2.0, b in -1.0f64..1.0, p0 in -2.0f64..2.0) {
        let k = Kinematics::of(&gaussian(s2, b, p0));
        let dx2 = k.delta_x2(Convention::Consistent).unwrap();
        let lhs = dx2 * k.delta_p2_q();
        prop_assert!((lhs - (dx2 * k.delta_p2_cl() + 0.25)).abs() < 1e-10);
        prop_assert!(lhs >= 0.25 - 1e-12);
        prop_assert!((k.h_q() - k.k_q() - k.fisher_integral()).abs() < 1e-10);
    }

    #[test]
    fn dilatation_matches_the_group(s2 in 0.5f64..2.0, b in -1.0f64..1.0, alpha in -3.0f64..3.0) {
        let st = gaussian(s2, b, 0.0);
        let u0 = UncertaintyPair::of(&st, Convention::Consistent).unwrap();
        let d = dilate(&st, alpha);
        let u = UncertaintyPair::of(&d, Convention::Consistent).unwrap();
        let pred = transform_uncertainty(u0, alpha, 1.0).unwrap();
        prop_assert!((u.dx2 - pred.dx2).abs() < 1e-9);
        prop_assert!((u.dp2 - pred.dp2).abs() < 1e-9);
        let k0 = Kinematics::of(&st);
        let k = Kinematics::of(&d);
        let (h, q) = mix_hk(k0.h_q(), k0.k_q(), alpha);
        prop_assert!((k.h_q() - h).abs() < 1e-10 && (k.k_q() - q).abs() < 1e-10);
    }

    #[test]
    fn dilatations_compose(s2 in 0.5f64..2.0, a in -1.5f64..1.5, c in -1.5f64..1.5) {
        let st = gaussian(s2, 0.5, 0.0);
        let twice = Kinematics::of(&dilate(&dilate(&st, a), c));
        let once = Kinematics::of(&dilate(&st, a + c));
        prop_assert!((twice.h_q() - once.h_q()).abs() < 1e-10 * once.h_q().abs().max(1.0));
        prop_assert!((twice.sigma_x2() - once.sigma_x2()).abs() < 1e-10 * once.sigma_x2());
    }

    #[test]
    fn bracket_identities(s2 in 0.5f64..2.0, b in -1.0f64..1.0, p0 in -2.0f64..2.0) {
        let st = gaussian(s2, b, p0);
        let k = Kinematics::of(&st);
        let t = DerivativeTable::of(&st).unwrap();
        let sh = t.bracket(FunctionalTag::S, FunctionalTag::HQ).value;
        let sk = t.bracket(FunctionalTag::S, FunctionalTag::KQ).value;
        prop_assert!((sh - k.k_q()).abs() < 1e-8f64.max(1e-6 * k.k_q().abs()));
        prop_assert!((sk - k.h_q()).abs() < 1e-8f64.max(1e-6 * k.h_q().abs()));
        for a in FunctionalTag::ALL {
            for c in FunctionalTag::ALL {
                prop_assert!((t.bracket(a, c).value + t.bracket(c, a).value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn t_flow_conserves(s2 in 0.5f64..2.0, b in -1.0f64..1.0, t in 0.0f64..2.0) {
        let w = to_wave(&gaussian(s2, b, 1.0));
        let k0 = Kinematics::of_wave(&w);
        let out = evolve_t(&w, t);
        prop_assert!((out.norm() - 1.0).abs() < 1e-13);
        // the hydrodynamic functionals assume a packet localised in the box;
        // once the spreading tail wraps around, sqrt(rho) and grad s lose
        // spectral accuracy even though the evolution itself stays exact
        let psi = out.psi().values();
        prop_assume!(psi[0].norm().max(psi[psi.len() - 1].norm()) < 1e-6);
        let k = Kinematics::of_wave(&out);
        prop_assert!((k.delta_p2_q() - k0.delta_p2_q()).abs() < 1e-11);
        prop_assert!((k.p_translation() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn tau_step_conserves(s2 in 0.5f64..2.0, b in -1.0f64..1.0, p0 in -2.0f64..2.0) {
        let w = to_wave(&gaussian(s2, b, p0));
        let k0 = Kinematics::of_wave(&w);
        let out = flow_step(&w, FlowKind::Tau, 1e-3);
        let k = Kinematics::of_wave(&out);
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        prop_assert!((k.p_translation() - k0.p_translation()).abs() < 1e-10);
        prop_assert!((k.k_q() - k0.k_q()).abs() < 1e-8);
        prop_assert!(continuity_residual(&w, &out, 1e-3).unwrap() < 1e-5);
    }

    #[test]
    fn hydro_rhs_conserves_mass(s2 in 0.5f64..2.0, b in -1.0f64..1.0, p0 in -2.0f64..2.0) {
        let st = gaussian(s2, b, p0);
        for flow in [FlowKind::T, FlowKind::Tau] {
            let (drho, _) = hydro_rhs(&st, flow).unwrap();
            prop_assert!(drho.quadrature().abs() < 1e-12);
        }
    }

    #[test]
    fn f32_tracks_f64(s2 in 0.5f64..2.0, b in -1.0f64..1.0) {
        let g32 = Grid::<f32>::new(1, 256, 40.0).unwrap();
        let p32 = GaussianParams { sigma2: s2 as f32, b: b as f32, ..Default::default() };
        let k32 = Kinematics::of(&make_gaussian(p32, &g32, 1.0, 1.0).unwrap());
        let g64 = Grid::<f64>::new(1, 256, 40.0).unwrap();
        let k64 = Kinematics::of(&make_gaussian(GaussianParams { sigma2: s2, b, ..Default::default() }, &g64, 1.0, 1.0).unwrap());
        prop_assert!((k32.h_q() as f64 - k64.h_q()).abs() < 1e-4 * k64.h_q().abs().max(1.0));
        prop_assert!((k32.sigma_x2() as f64 - k64.sigma_x2()).abs() < 1e-4 * k64.sigma_x2());
    }
}
