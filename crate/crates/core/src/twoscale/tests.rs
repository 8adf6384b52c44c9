use super::*;
use crate::ensemble::{generate, EnsembleKind, EnsembleSpec};
use crate::excess::random_trig;
use crate::grid::{grad, sample_frame};

fn open_grid(n: usize, n_t: usize, h: f64, tau: f64) -> Grid<f64> {
    Grid::open(2, n, n_t, h, tau).unwrap()
}

fn torus_noise(n: usize, n_t: usize, seed: u64) -> SpaceTimeField<f64> {
    let g = Grid::<f64>::with_periods(2, n, n_t, 1.0, 0.5 / n as f64).unwrap();
    let spec = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.1, n, seed, vec![0.1, 0.4, 0.7, 1.0]).with_time_cells(n_t);
    generate(&spec, &g).unwrap().field().component(0)
}

#[test]
fn mollifier_fixes_constants_and_linear_fields() {
    let g = open_grid(41, 3, 0.025, 0.01);
    let c = mollify(&SpaceTimeField::scalar_fn(g, |_, _| 1.5), 0.1).unwrap();
    assert!(c.values().iter().all(|&v| (v - 1.5).abs() <= 1e-12));

    let x = SpaceTimeField::scalar_fn(g, |x, _| x[0]);
    let m = mollify(&x, 0.1).unwrap();
    for idx in 0..g.points() {
        let [c0, c1, _] = g.coords(idx);
        if (4..=36).contains(&c0) && (4..=36).contains(&c1) {
            assert!((m.get(1, idx, 0) - x.get(1, idx, 0)).abs() <= 1e-12);
        }
    }
}

#[test]
fn mollifier_commutes_with_torus_shifts() {
    let u = torus_noise(32, 4, 5);
    let g = *u.grid();
    let shifted = SpaceTimeField::from_fn(g, Rank::Scalar, |m, x, _| {
        let c = [((x[0] / g.h()).round() as usize + 29) % 32, ((x[1] / g.h()).round() as usize + 3) % 32];
        u.get(m, g.index(&c), 0)
    });
    let a = mollify(&u, 0.1).unwrap();
    let b = mollify(&shifted, 0.1).unwrap();
    for m in 0..4 {
        for idx in 0..g.points() {
            let c = g.coords(idx);
            let src = g.index(&[(c[0] + 29) % 32, (c[1] + 3) % 32]);
            assert_eq!(b.get(m, idx, 0), a.get(m, src, 0));
        }
    }
}

#[test]
fn mollifier_does_not_increase_torus_energy() {
    let u = torus_noise(32, 4, 9);
    for eps in [1.0 / 32.0, 0.07, 0.2] {
        let before = grad(&u).unwrap().values().iter().map(|v| v * v).sum::<f64>();
        let after = grad(&mollify(&u, eps).unwrap()).unwrap().values().iter().map(|v| v * v).sum::<f64>();
        assert!(after <= before * (1.0 + 1e-12), "{eps}: {after} > {before}");
    }
}

#[test]
fn mollifier_rejects_subgrid_radius() {
    let g = open_grid(9, 2, 0.1, 0.01);
    let u = SpaceTimeField::zeros(g, Rank::Scalar);
    assert!(matches!(mollify(&u, 0.05), Err(Error::InvalidTwoScale(_))));
}

#[test]
fn cutoff_has_exact_support_and_bounded_gradient() {
    let h = 1.0 / 128.0;
    let g = open_grid(257, 65, h, 1.0 / 64.0);
    let cyl = Cylinder::centered(&g, 1.0).unwrap();
    let rho = 0.1;
    let eta = cutoff(&g, &cyl, rho).unwrap();
    assert!(eta.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    for m in 0..g.n_t() {
        let back = (64 - m) as f64 / 64.0;
        for idx in 0..g.points() {
            let c = g.coords(idx);
            let dist = c[..2].iter().map(|&v| v.abs_diff(128) as f64 * h).fold(back.sqrt(), f64::max);
            let v = eta.get(m, idx, 0);
            if dist > 0.9 {
                assert_eq!(v, 0.0);
            }
            if dist <= 0.8 {
                assert_eq!(v, 1.0);
            }
        }
    }
    let slope = grad(&eta).unwrap().max_abs();
    assert!(slope <= 4.0 / rho, "{slope}");
    assert!(matches!(cutoff(&g, &cyl, 0.02), Err(Error::InvalidTwoScale(_))));
}

fn identity_ahom(d: usize) -> HomogenizedMatrix<f64> {
    let mut e = vec![0.0; d * d];
    (0..d).for_each(|i| e[i * d + i] = 1.0);
    HomogenizedMatrix::new(d, e, 1.0).unwrap()
}

#[test]
fn caloric_data_extends_to_itself() {
    let g = open_grid(33, 17, 1.0 / 32.0, 1.0 / 64.0);
    let cyl = Cylinder::centered(&g, 0.5).unwrap();
    let u = SpaceTimeField::scalar_fn(g, |x, _| 2.0 * x[0] - x[1] + 0.5);
    let v = ahom_extension(&u, &identity_ahom(2), &cyl, &SolverConfig::default()).unwrap();
    assert!(v.sub(&u).unwrap().max_abs() < 1e-8);

    // The mollified data need a margin of eps around the cylinder.
    let g = open_grid(41, 17, 1.0 / 32.0, 1.0 / 64.0);
    let cyl = Cylinder::centered(&g, 0.375).unwrap();
    let q = SpaceTimeField::scalar_fn(g, |x, t| x[0] * x[0] + 2.0 * t);
    for eps in [0.1, 0.05] {
        let qe = mollify(&q, eps).unwrap();
        let v = ahom_extension(&qe, &identity_ahom(2), &cyl, &SolverConfig::default()).unwrap();
        let data = cyl.extract(&qe).unwrap();
        assert!(v.sub(&data).unwrap().max_abs() < 1e-7, "{eps}");
        let nb = Neighbors::new(v.grid());
        for idx in (0..v.grid().points()).filter(|&i| !nb.is_interior(i)) {
            for m in 0..v.grid().n_t() {
                assert_eq!(v.get(m, idx, 0), data.get(m, idx, 0));
            }
        }
    }
}

/// Torus of 512 points in d = 1 holding `C_{1/4}`, with a caloric field on its frame.
struct Setup {
    a: CoefficientField<f64>,
    corrector: ExtendedCorrector<f64>,
    cyl: Cylinder<f64>,
    u: SpaceTimeField<f64>,
}

fn setup(spec: &EnsembleSpec, seed: u64) -> Setup {
    let g = Grid::<f64>::with_periods(1, 512, 64, 1.0, 1.0 / 16.0).unwrap();
    let a = generate(spec, &g).unwrap();
    let corrector = ExtendedCorrector::build(&a, &SolverConfig::default()).unwrap();
    let cyl = Cylinder::centered(&g, 0.25).unwrap();
    let data = sample_frame(&g, &cyl, random_trig(1, 0.25, seed, 2)).unwrap();
    let u = dirichlet_frame(&cyl.extract_coefficients(&a).unwrap(), &data, &SolverConfig::default()).unwrap();
    Setup { a, corrector, cyl, u }
}

fn checkerboard(seed: u64) -> EnsembleSpec {
    EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 16, seed, vec![0.25, 1.0])
}

#[test]
fn radius_selection_avoids_a_boundary_spike() {
    let s = setup(&EnsembleSpec::constant(1.0, vec![1.0]), 3);
    let local = s.cyl.localized();
    let spike_k = 77; // 0.6 K with K = 128
    let mut u = s.u.clone();
    let g = *u.grid();
    let idx = g.index(&[128 + spike_k]);
    let m = g.n_t() / 2;
    u.set(m, idx, 0, u.get(m, idx, 0) + 10.0);
    let eps = 0.03;
    let choice = radius_select(&u, &mollify(&u, eps).unwrap(), &local, eps).unwrap();
    assert!(choice.candidates.iter().all(|(r, _)| *r > 0.125 && *r < 0.1875));
    assert_ne!(choice.radius, spike_k as f64 / 512.0);
    let at_spike = choice.candidates.iter().find(|(r, _)| *r == spike_k as f64 / 512.0).unwrap().1;
    assert!(at_spike > choice.score, "{at_spike} vs {}", choice.score);
}

#[test]
fn time_derivative_constant_tracks_eps() {
    let s = setup(&EnsembleSpec::constant(1.0, vec![1.0]), 4);
    let local = s.cyl.localized();
    let c = |eps: f64| radius_select(&s.u, &mollify(&s.u, eps).unwrap(), &local, eps).unwrap().constants;
    let (wide, narrow) = (c(0.04), c(0.02));
    assert!(wide.iter().chain(&narrow).all(|v| v.is_finite()));
    // Smooth data keep ‖u^ε_t‖ fixed, so ε‖u^ε_t‖ halves with ε.
    let ratio = narrow[1] / wide[1];
    assert!((ratio - 0.5).abs() < 0.1, "{ratio}");
}

#[test]
fn radius_selection_needs_candidates() {
    let g = Grid::<f64>::open(1, 5, 5, 0.25, 0.0625).unwrap();
    let cyl = Cylinder::centered(&g, 0.5).unwrap();
    let u = SpaceTimeField::zeros(g, Rank::Scalar);
    assert!(matches!(radius_select(&u, &u, &cyl, 0.25), Err(Error::InvalidTwoScale(_))));
}

#[test]
fn error_without_corrector_is_plain_difference() {
    let g = open_grid(9, 3, 0.125, 0.0625);
    let u = SpaceTimeField::scalar_fn(g, |x, t| x[0] * x[1] + t);
    let v = SpaceTimeField::scalar_fn(g, |x, _| x[0] - x[1]);
    let zero = SpaceTimeField::zeros(g, Rank::Scalar);
    let eta = SpaceTimeField::scalar_fn(g, |_, _| 1.0);
    let w = homogenization_error(&u, &v, &[zero.clone(), zero.clone()], &eta).unwrap();
    assert_eq!(w, u.sub(&v).unwrap());
    let phi = [SpaceTimeField::scalar_fn(g, |x, _| x[1]), zero.clone()];
    let w = homogenization_error(&u, &v, &phi, &zero).unwrap();
    assert_eq!(w, u.sub(&v).unwrap());
}

#[test]
fn constant_coefficients_leave_only_boundary_terms() {
    let s = setup(&EnsembleSpec::constant(0.5, vec![0.7]), 1);
    let cfg = TwoScaleConfig { eps: 0.03, rho: 0.1, radius: 0.25 };
    let rep = energy_report(&s.a, &s.corrector, &s.u, &s.cyl, &cfg, &SolverConfig::default()).unwrap();
    for t in &rep.terms {
        if !matches!(t.name, "epsilon" | "rho_shell") {
            assert_eq!(t.value, 0.0, "{}", t.name);
        }
    }
    assert!(rep.lhs > 0.0 && rep.constant.is_finite());
}

#[test]
fn checkerboard_report_is_consistent() {
    let s = setup(&checkerboard(42), 7);
    let cfg = TwoScaleConfig { eps: 0.03, rho: 0.1, radius: 0.25 };
    let rep = energy_report(&s.a, &s.corrector, &s.u, &s.cyl, &cfg, &SolverConfig::default()).unwrap();
    assert!(rep.terms.iter().all(|t| t.value > 0.0 && t.value.is_finite()));
    assert!(rep.constant > 0.0 && rep.constant.is_finite());
    let recomputed = energy_lhs(&rep.w, &rep.a_local).unwrap() * 0.25f64.powi(-1);
    assert!((recomputed - rep.lhs).abs() <= 1e-12 * rep.lhs);

    // On the parabolic boundary w equals u − u^ε bit for bit.
    let local = s.cyl.localized();
    let frame_grid = *s.u.grid();
    let sub = local.nested(&frame_grid, rep.choice.radius).unwrap();
    let u = sub.extract(&s.u).unwrap();
    let ue = sub.extract(&mollify(&s.u, cfg.eps).unwrap()).unwrap();
    let g = *u.grid();
    let nb = Neighbors::new(&g);
    for m in 0..g.n_t() {
        for idx in 0..g.points() {
            if m == 0 || !nb.is_interior(idx) {
                assert_eq!(rep.w.get(m, idx, 0), u.get(m, idx, 0) - ue.get(m, idx, 0));
            }
        }
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = [
        TwoScaleConfig { eps: 0.0, rho: 0.1, radius: 1.0 },
        TwoScaleConfig { eps: 0.25, rho: 0.1, radius: 1.0 },
        TwoScaleConfig { eps: 0.1, rho: 0.125, radius: 1.0 },
        TwoScaleConfig { eps: 0.1, rho: 0.0, radius: 1.0 },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::InvalidTwoScale(_))));
    }
}
