//! Property tests over the public API.

use crate::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.01f64..3.0, 0.01f64..0.9, 0.001f64..0.1)
        .prop_map(|(b, g, e)| ModelParams::new(b, g, e).unwrap())
}

proptest! {
    #[test]
    fn incentives_are_antisymmetric(p in params(), s in -1e6f64..1e6) {
        let (g1, g2) = incentive_field(s, &p).unwrap();
        prop_assert_eq!(g1, -g2);
    }

    #[test]
    fn pair_projects_onto_reduced(p in params(), x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, s in -5.0f64..5.0) {
        let pair = PairState::new(x1, x2, s);
        let next = pair_step(pair, &p).unwrap();
        let red = reduced_step(pair.project(), &p).unwrap();
        prop_assert_eq!(next.s.to_bits(), red.s.to_bits());
        let scale = x1.abs().max(x2.abs()).max(s.abs()).max(1.0);
        prop_assert!((next.disagreement() - red.d).abs() <= 8.0 * f64::EPSILON * scale);
    }

    #[test]
    fn pair_conserves_mean_without_damping(p in params(), x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, s in -5.0f64..5.0) {
        let next = pair_step(PairState::new(x1, x2, s), &p).unwrap();
        let scale = x1.abs().max(x2.abs()).max(s.abs()).max(1.0);
        prop_assert!(((next.x1 + next.x2) - (x1 + x2)).abs() <= 8.0 * f64::EPSILON * scale);
    }

    #[test]
    fn criterion_matches_spectrum(p in params()) {
        let rho = spectral_radius(&eig2(&reduced_jacobian(&p).unwrap()));
        prop_assume!((rho - 1.0).abs() > 1e-9);
        prop_assert_eq!(stability_criterion(&p), rho < 1.0);
    }

    #[test]
    fn radius_grows_with_coupling_on_the_complex_branch(g in 0.05f64..0.5, e in 0.005f64..0.05, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let base = ModelParams::new(1.0, g, e).unwrap();
        let bc = critical_beta(&base);
        // Complex eigenvalues once 4 eta beta^2 > gamma^2 / 4.
        let lo = g / (4.0 * e.sqrt()) * 1.001;
        let (b1, b2) = (lo + a.min(b) * bc, lo + a.max(b) * bc);
        prop_assume!(b2 > b1);
        let r = |beta: f64| spectral_radius(&eig2(&reduced_jacobian(&base.with_beta(beta).unwrap()).unwrap()));
        prop_assert!(r(b2) >= r(b1));
    }

    #[test]
    fn reduced_map_is_linear(p in params(), s in -3.0f64..3.0, d in -3.0f64..3.0, k in -4i32..4) {
        let c = 2f64.powi(k);
        let a = reduced_step(ReducedState::new(s, d), &p).unwrap();
        let b = reduced_step(ReducedState::new(c * s, c * d), &p).unwrap();
        prop_assert_eq!(b.s, c * a.s);
        prop_assert_eq!(b.d, c * a.d);
    }

    #[test]
    fn meanfield_conserves_mean(p in params(), xs in prop::collection::vec(-2.0f64..2.0, 2..40)) {
        let n = xs.len() as f64;
        let pop = PopulationState::at_rest(xs).unwrap();
        let mut after = pop.clone();
        let mut peak: f64 = 1.0;
        for _ in 0..20 {
            after = meanfield_step(&after, &p).unwrap();
            peak = after.x().iter().chain(after.s()).fold(peak, |m, v| m.max(v.abs()));
        }
        // Deviation traces sum to zero, so the mean incentive vanishes.
        prop_assert!((after.mean_x() - pop.mean_x()).abs() <= 64.0 * n * f64::EPSILON * peak);
    }

    #[test]
    fn noise_stays_in_bounds(sigma in 0.0f64..2.0, bound in 0.5f64..4.0, seed in any::<u64>()) {
        let spec = NoiseSpec::with_bound(sigma, bound, NoiseTarget::Disagreement, seed).unwrap();
        let mut a = spec.stream();
        let mut b = spec.stream();
        for _ in 0..200 {
            let v = a.draw();
            prop_assert!(v.abs() <= bound * sigma);
            prop_assert_eq!(v.to_bits(), b.draw().to_bits());
        }
    }
}
