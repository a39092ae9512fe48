use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hilbert::{annihilation, embed, number, sigma_minus, sigma_plus, sigma_z, thermal_state, Slot, SpaceLayout};
use crate::model::{build_collapse_terms, build_h0, build_h1_full, initial_state, number_observables, phonon_charge, SystemParams};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let mut h = &m + &m.adjoint();
    h.hermitize();
    h
}

fn params() -> SystemParams {
    SystemParams {
        omega_z: 40.0,
        delta: 35.0,
        g_a: 3.0,
        g_b: 1.0,
        g_ab: 3f64.sqrt(),
        gamma_a: 1.0,
        gamma_b: 1.5,
        gamma_spin: 5.0,
        nbar_a: 1.5,
        nbar_b: 0.7,
    }
}

fn spin_layout() -> SpaceLayout {
    SpaceLayout::new(vec![(Slot::Spin, 2)]).unwrap()
}

fn mode_layout(d: usize) -> SpaceLayout {
    SpaceLayout::new(vec![(Slot::ModeB, d)]).unwrap()
}

/// `−i[H, ρ] + Σ w (2xρx† − x†xρ − ρx†x)` with dense matrices only.
fn dense_oracle(h: &SparseOperator, terms: &[LindbladTerm], rho: &ComplexMatrix) -> ComplexMatrix {
    let hd = h.to_dense();
    let mut out = hd.commutator(rho).unwrap().scaled(C64::new(0.0, -1.0));
    for t in terms {
        let x = t.operator.to_dense();
        let xd = x.adjoint();
        let xdx = xd.matmul(&x).unwrap();
        let jump = x.matmul(rho).unwrap().matmul(&xd).unwrap();
        out.axpy(c(2.0 * t.weight), &jump);
        out.axpy(c(-t.weight), &xdx.matmul(rho).unwrap());
        out.axpy(c(-t.weight), &rho.matmul(&xdx).unwrap());
    }
    out
}

#[test]
fn dissipator_two_level_examples() {
    let g = ComplexMatrix::projector(2, 0);
    let e = ComplexMatrix::projector(2, 1);
    assert_eq!(dissipator(&sigma_minus(), &g).unwrap().max_abs(), 0.0);
    let d = dissipator(&sigma_minus(), &e).unwrap();
    let expected = (&g - &e).scaled(c(2.0));
    assert!(d.max_abs_diff(&expected) < 1e-15);
    assert!(dissipator(&sigma_minus(), &ComplexMatrix::identity(3)).is_err());
}

#[test]
fn dissipator_is_traceless() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let rho = random_hermitian(6, &mut rng);
        let x = SparseOperator::from_dense(&ComplexMatrix::from_fn(6, 6, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
        .unwrap();
        let d = dissipator(&x, &rho).unwrap();
        assert!(d.trace().norm() < 1e-12);
        assert!(d.is_hermitian(1e-12));
    }
}

#[test]
fn rhs_zero_without_dynamics() {
    let l = SpaceLayout::full(2, 3).unwrap();
    let rho = initial_state(&params(), &l).unwrap();
    let out = lindblad_rhs(&rho, &SparseOperator::zero(l.dim()), &[]).unwrap();
    assert_eq!(out.max_abs(), 0.0);
}

#[test]
fn rhs_matches_dense_oracle() {
    let p = params();
    let l = SpaceLayout::full(3, 3).unwrap();
    let h = build_h0(&p, &l).unwrap().add(&build_h1_full(&p, &l).unwrap()).unwrap();
    let terms = build_collapse_terms(&p, &l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rho = random_hermitian(l.dim(), &mut rng);
    let tr = rho.trace();
    rho.axpy(c(1.0) - tr, &ComplexMatrix::projector(l.dim(), 0));
    let oracle = dense_oracle(&h, &terms, &rho);
    let liou = Liouvillian::new(&h, &terms).unwrap();
    for exec in [Exec::Serial, Exec::Parallel] {
        let general = liou.apply(&rho, exec).unwrap();
        let herm = liou.apply_hermitian(&rho, exec).unwrap();
        assert!(general.max_abs_diff(&oracle) < 1e-11);
        assert!(herm.max_abs_diff(&oracle) < 1e-11);
        assert!(herm.is_hermitian(0.0));
        assert!(herm.trace().norm() < 1e-10);
    }
    // non-Hermitian input goes through the general path
    let skew = ComplexMatrix::from_fn(l.dim(), l.dim(), |i, j| C64::new(i as f64, -(j as f64) * 0.5));
    assert!(liou.apply(&skew, Exec::Serial).unwrap().max_abs_diff(&dense_oracle(&h, &terms, &skew)) < 1e-10);
}

#[test]
fn thermal_state_is_a_fixed_point() {
    let (d, nbar, gamma) = (60, 1.0, 0.8);
    let l = mode_layout(d);
    let b = annihilation(d).unwrap();
    let terms = vec![
        LindbladTerm::new(b.clone(), gamma * (1.0 + nbar)).unwrap(),
        LindbladTerm::new(b.adjoint(), gamma * nbar).unwrap(),
    ];
    let h = number(d).unwrap().scaled(c(3.0));
    let rho = DensityMatrix::new(l, thermal_state(d, nbar).unwrap()).unwrap();
    let out = lindblad_rhs(&rho, &h, &terms).unwrap();
    // only the top level sees the truncation: its weight is (1/2)^59
    assert!(out.max_abs() < 1e-15, "{}", out.max_abs());
}

#[test]
fn heating_rate_from_vacuum() {
    let (d, nbar, gamma) = (5, 2.5, 0.3);
    let b = annihilation(d).unwrap();
    let terms = vec![
        LindbladTerm::new(b.clone(), gamma * (1.0 + nbar)).unwrap(),
        LindbladTerm::new(b.adjoint(), gamma * nbar).unwrap(),
    ];
    let rho = DensityMatrix::new(mode_layout(d), ComplexMatrix::projector(d, 0)).unwrap();
    let out = lindblad_rhs(&rho, &SparseOperator::zero(d), &terms).unwrap();
    let dn = crate::hilbert::expectation_dense(&out, &number(d).unwrap()).unwrap();
    assert!((dn - 2.0 * gamma * nbar).abs() < 1e-14);
}

#[test]
fn adjoint_consistency_on_random_operators() {
    let p = params();
    let l = SpaceLayout::full(3, 3).unwrap();
    let h = build_h0(&p, &l).unwrap().add(&build_h1_full(&p, &l).unwrap()).unwrap();
    let liou = Liouvillian::new(&h, &build_collapse_terms(&p, &l).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let o = random_hermitian(l.dim(), &mut rng);
        let rho = random_hermitian(l.dim(), &mut rng);
        let lhs = o.matmul(&liou.apply(&rho, Exec::Serial).unwrap()).unwrap().trace();
        let rhs = liou.adjoint_apply(&o, Exec::Serial).unwrap().matmul(&rho).unwrap().trace();
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn adjoint_dissipator_matches_liouvillian_adjoint() {
    let p = params();
    let l = SpaceLayout::full(3, 2).unwrap();
    let terms = build_collapse_terms(&p, &l).unwrap();
    let op = embed(&annihilation(3).unwrap(), Slot::ModeA, &l).unwrap();
    let mut sum = ComplexMatrix::zeros(l.dim(), l.dim());
    for t in &terms {
        sum.axpy(c(t.weight), &adjoint_dissipator(&t.operator, &op).unwrap());
    }
    let liou = Liouvillian::new(&SparseOperator::zero(l.dim()), &terms).unwrap();
    assert!(liou.adjoint_apply(&op.to_dense(), Exec::Serial).unwrap().max_abs_diff(&sum) < 1e-12);
    assert!(adjoint_dissipator(&sigma_minus(), &op).is_err());
}

/// Free adjoint generator: H₀ plus the three thermal/decay channels.
fn free_adjoint(p: &SystemParams, l: &SpaceLayout) -> Liouvillian {
    Liouvillian::new(&build_h0(p, l).unwrap(), &build_collapse_terms(p, l).unwrap()).unwrap()
}

/// Check `actual == expected` on all columns whose mode-a level is below the
/// truncation edge, and return the largest deviation on edge columns.
fn compare_off_edge(actual: &ComplexMatrix, expected: &ComplexMatrix, l: &SpaceLayout, tol: f64) -> f64 {
    let top = l.slot_dim(Slot::ModeA).unwrap() - 1;
    let mut edge = 0.0f64;
    for j in 0..l.dim() {
        let on_edge = l.level(j, Slot::ModeA).unwrap() == top;
        for i in 0..l.dim() {
            let d = (actual[(i, j)] - expected[(i, j)]).norm();
            if on_edge {
                edge = edge.max(d);
            } else {
                assert!(d < tol, "entry ({i},{j}) deviates by {d}");
            }
        }
    }
    edge
}

#[test]
fn free_adjoint_lowers_mode_a() {
    let p = params();
    let l = SpaceLayout::full(5, 3).unwrap();
    let a = embed(&annihilation(5).unwrap(), Slot::ModeA, &l).unwrap().to_dense();
    let out = free_adjoint(&p, &l).adjoint_apply(&a, Exec::Serial).unwrap();
    let edge = compare_off_edge(&out, &a.scaled(c(-p.gamma_a)), &l, 1e-12);
    // the truncated commutator [a, a†] only fails on the top level
    assert!(edge > 1e-3);
}

#[test]
fn free_adjoint_damps_fluctuation_twice_as_fast() {
    let p = params();
    let l = SpaceLayout::full(5, 3).unwrap();
    let n = embed(&number(5).unwrap(), Slot::ModeA, &l).unwrap().to_dense();
    let delta = &n - &ComplexMatrix::identity(l.dim()).scaled(c(p.nbar_a));
    let out = free_adjoint(&p, &l).adjoint_apply(&delta, Exec::Serial).unwrap();
    let edge = compare_off_edge(&out, &delta.scaled(c(-2.0 * p.gamma_a)), &l, 1e-12);
    assert!(edge > 1e-3);

    let mut cold = p;
    cold.nbar_a = 0.0;
    let delta0 = n.clone();
    let out0 = free_adjoint(&cold, &l).adjoint_apply(&delta0, Exec::Serial).unwrap();
    assert!(out0.max_abs_diff(&delta0.scaled(c(-2.0 * cold.gamma_a))) < 1e-12);
}

#[test]
fn spin_raising_rotates_and_decays() {
    let (wz, gamma) = (7.0, 0.9);
    let l = spin_layout();
    let h = sigma_z().scaled(c(wz / 2.0));
    let liou = Liouvillian::new(&h, &[LindbladTerm::new(sigma_minus(), gamma).unwrap()]).unwrap();
    let sp = sigma_plus().to_dense();
    let out = liou.adjoint_apply(&sp, Exec::Serial).unwrap();
    assert!(out.max_abs_diff(&sp.scaled(C64::new(-gamma, wz))) < 1e-14);
    assert_eq!(l.dim(), 2);
}

#[test]
fn rk4_zero_rhs_is_identity() {
    let l = SpaceLayout::full(2, 2).unwrap();
    let rho = initial_state(&params(), &l).unwrap();
    let out = rk4_step(&rho, 0.1, |m| Ok(ComplexMatrix::zeros(m.rows(), m.cols()))).unwrap();
    assert_eq!(out.matrix(), rho.matrix());
    assert!(rk4_step(&rho, 0.0, |m| Ok(m.clone())).is_err());
}

#[test]
fn rk4_unitary_rotation() {
    let wz = 3.0;
    let h = sigma_z().scaled(c(wz / 2.0));
    let liou = Liouvillian::new(&h, &[]).unwrap();
    let plus = ComplexMatrix::from_fn(2, 2, |_, _| c(0.5));
    let mut rho = DensityMatrix::new(spin_layout(), plus).unwrap();
    let dt = 0.01;
    let steps = 100;
    for _ in 0..steps {
        rho = rk4_step(&rho, dt, |m| liou.apply(m, Exec::Serial)).unwrap();
    }
    let t = dt * steps as f64;
    // ρ₀₁(t) = ρ₀₁(0) e^{−i(E₀−E₁)t} = ½ e^{i ω_z t}
    let expected = C64::new(0.0, wz * t).exp() * 0.5;
    let got = rho.matrix()[(0, 1)];
    // global RK4 phase error ≈ steps·(ω_z dt)⁵/120 ≈ 2e-8
    assert!((got - expected).norm() < 1e-7, "{got} vs {expected}");
    assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
}

#[test]
fn rk4_exponential_decay_with_fourth_order_error() {
    let gamma = 1.3;
    let liou = Liouvillian::new(&SparseOperator::zero(2), &[LindbladTerm::new(sigma_minus(), gamma).unwrap()]).unwrap();
    let run = |dt: f64| {
        let mut rho = DensityMatrix::new(spin_layout(), ComplexMatrix::projector(2, 1)).unwrap();
        for _ in 0..(1.0 / dt).round() as usize {
            rho = rk4_step(&rho, dt, |m| liou.apply(m, Exec::Serial)).unwrap();
        }
        (rho.matrix()[(1, 1)].re - (-2.0 * gamma).exp()).abs()
    };
    let (e1, e2) = (run(0.05), run(0.025));
    assert!(e1 < 1e-6);
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn rk4_reports_instability() {
    let liou = Liouvillian::new(&SparseOperator::zero(2), &[]).unwrap();
    let rho = DensityMatrix::new(spin_layout(), ComplexMatrix::projector(2, 1)).unwrap();
    // a trace-changing generator must trip the check
    let err = rk4_step(&rho, 0.1, |m| Ok(&liou.apply(m, Exec::Serial).unwrap() + m)).unwrap_err();
    assert!(matches!(err, Error::IntegratorInstability { .. }));
}

#[test]
fn evolve_decoupled_mode_relaxation() {
    let (d, nbar, gamma) = (30, 1.0, 1.0);
    let l = mode_layout(d);
    let b = annihilation(d).unwrap();
    let terms = vec![
        LindbladTerm::new(b.clone(), gamma * (1.0 + nbar)).unwrap(),
        LindbladTerm::new(b.adjoint(), gamma * nbar).unwrap(),
    ];
    let rho0 = DensityMatrix::new(l, ComplexMatrix::projector(d, 0)).unwrap();
    let spec = IntegratorSpec::new(2e-3, 2.0, 25).unwrap();
    let obs = vec![("n_b".to_string(), number(d).unwrap())];
    let traj = evolve(&rho0, &number(d).unwrap(), &terms, &spec, &obs).unwrap();
    for (t, v) in traj.times.iter().zip(traj.series("n_b").unwrap()) {
        assert!((v - nbar * (1.0 - (-2.0 * gamma * t).exp())).abs() < 1e-3);
    }
    assert_eq!(traj.times.len(), 41);
    assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    assert!(traj.max_trace_error() < 1e-8);
}

#[test]
fn evolve_without_dynamics_is_constant() {
    let p = params();
    let l = SpaceLayout::full(3, 3).unwrap();
    let rho0 = initial_state(&p, &l).unwrap();
    let obs = number_observables(&l).unwrap();
    let spec = IntegratorSpec::new(0.01, 0.2, 3).unwrap();
    let traj = evolve(&rho0, &SparseOperator::zero(l.dim()), &[], &spec, &obs).unwrap();
    for k in 0..traj.len() {
        assert_eq!(traj.values[k], traj.values[0]);
    }
    assert_eq!(*traj.times.last().unwrap(), 0.2);
    assert_eq!(traj.stationary_at, Some(0.0));
}

#[test]
fn stationarity_detection() {
    let mut traj = Trajectory::new(vec!["x".into()]);
    for k in 0..=100 {
        traj.push(k as f64 * 0.01, vec![0.3], 0.0, 0.0);
    }
    assert!(steady_state_reached(&traj, "x", 0.3, 1e-3).unwrap());
    assert!(matches!(steady_state_reached(&traj, "y", 0.3, 1e-3), Err(Error::UnknownObservable(_))));
    assert!(steady_state_reached(&traj, "x", 2.0, 1e-3).is_err());

    let slope = 0.01;
    let mut ramp = Trajectory::new(vec!["x".into()]);
    for k in 0..=100 {
        let t = k as f64 * 0.01;
        ramp.push(t, vec![slope * t], 0.0, 0.0);
    }
    assert!(steady_state_reached(&ramp, "x", 0.05, 1e-3).unwrap());
    assert!(!steady_state_reached(&ramp, "x", 0.2, 1e-3).unwrap());
    assert_eq!(ramp.stationary_since("x", 0.2, 1e-3).unwrap(), None);
    assert!(ramp.stationary_since("x", 0.05, 1e-3).unwrap().is_some());
}

#[test]
fn spec_validation() {
    assert!(IntegratorSpec::new(0.0, 1.0, 1).is_err());
    assert!(IntegratorSpec::new(0.1, 0.05, 1).is_err());
    assert!(IntegratorSpec::new(0.1, 1.0, 0).is_err());
    assert_eq!(IntegratorSpec::new(2e-4, 3.0, 1).unwrap().n_steps(), 15_000);
}

fn full_problem(dim_a: usize, dim_b: usize) -> (SpaceLayout, SparseOperator, Vec<LindbladTerm>, DensityMatrix) {
    let p = params();
    let l = SpaceLayout::full(dim_a, dim_b).unwrap();
    let h = build_h0(&p, &l).unwrap().add(&build_h1_full(&p, &l).unwrap()).unwrap();
    let terms = build_collapse_terms(&p, &l).unwrap();
    let rho0 = initial_state(&p, &l).unwrap();
    (l, h, terms, rho0)
}

#[test]
fn sector_rhs_matches_dense() {
    let (l, h, terms, _) = full_problem(4, 3);
    let charge = phonon_charge(&l);
    let sectors = Sectors::from_charge(&charge).unwrap();
    assert_eq!(sectors.n_blocks(), 6);
    // a random Hermitian matrix restricted to the blocks
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let full = random_hermitian(l.dim(), &mut rng);
    let masked = ComplexMatrix::from_fn(l.dim(), l.dim(), |i, j| if charge[i] == charge[j] { full[(i, j)] } else { c(0.0) });
    let dense = Liouvillian::new(&h, &terms).unwrap().apply_hermitian(&masked, Exec::Serial).unwrap();
    let sl = SectorLiouvillian::new(&h, &terms, &charge).unwrap();
    let state = BlockState::from_dense(&sectors, &masked).unwrap();
    for exec in [Exec::Serial, Exec::Parallel] {
        let out = sl.apply(&state, exec).to_dense(&sectors);
        assert!(out.max_abs_diff(&dense) < 1e-12);
    }
    assert!(BlockState::from_dense(&sectors, &full).is_err());
}

#[test]
fn sector_trajectory_matches_dense() {
    let (l, h, terms, rho0) = full_problem(4, 3);
    let obs = number_observables(&l).unwrap();
    let spec = IntegratorSpec::new(1e-3, 0.3, 20).unwrap();
    let dense = evolve_with(&rho0, &h, &terms, &spec, &obs, &EvolveOptions::default()).unwrap();
    let opts = EvolveOptions { engine: Engine::Charge(phonon_charge(&l)), ..Default::default() };
    let sector = evolve_with(&rho0, &h, &terms, &spec, &obs, &opts).unwrap();
    for (a, b) in dense.trajectory.values.iter().zip(&sector.trajectory.values) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    assert!(dense.final_state().matrix().max_abs_diff(sector.final_state().matrix()) < 1e-12);
    assert!((dense.min_eigenvalue() - sector.min_eigenvalue()).abs() < 1e-10);
    assert!(sector.min_eigenvalue() > -1e-8);
}

#[test]
fn serial_and_parallel_agree_bitwise() {
    let (l, h, terms, rho0) = full_problem(3, 3);
    let obs = number_observables(&l).unwrap();
    let spec = IntegratorSpec::new(1e-3, 0.05, 10).unwrap();
    for engine in [Engine::Dense, Engine::Charge(phonon_charge(&l))] {
        let run = |exec| {
            let opts = EvolveOptions { exec, engine: engine.clone(), stationarity: None };
            evolve_with(&rho0, &h, &terms, &spec, &obs, &opts).unwrap().trajectory
        };
        assert_eq!(run(Exec::Serial).values, run(Exec::Parallel).values);
    }
}

#[test]
fn symmetry_violations_are_rejected() {
    let (l, h, terms, _) = full_problem(3, 3);
    // mode-a number alone is not conserved by the exchange term
    let charge: Vec<i64> = (0..l.dim()).map(|i| l.level(i, Slot::ModeA).unwrap() as i64).collect();
    assert!(matches!(SectorLiouvillian::new(&h, &terms, &charge), Err(Error::SymmetryViolation(_))));
    // the spin flip of σ_x does not shift n_a + n_b + n_s uniformly
    let sx = embed(&crate::hilbert::sigma_x(), Slot::Spin, &l).unwrap();
    let zero = SparseOperator::zero(l.dim());
    let spin_charge: Vec<i64> = (0..l.dim()).map(|i| l.level(i, Slot::Spin).unwrap() as i64).collect();
    let bad = vec![LindbladTerm::new(sx, 1.0).unwrap()];
    assert!(matches!(SectorLiouvillian::new(&zero, &bad, &spin_charge), Err(Error::SymmetryViolation(_))));
}

#[test]
fn global_rescaling_leaves_observables_invariant() {
    let p = params();
    let l = SpaceLayout::full(3, 3).unwrap();
    let obs = number_observables(&l).unwrap();
    let spec = IntegratorSpec::new(1e-3, 0.2, 20).unwrap();
    let run = |q: &SystemParams, s: &IntegratorSpec| {
        let h = build_h0(q, &l).unwrap().add(&build_h1_full(q, &l).unwrap()).unwrap();
        evolve(&initial_state(q, &l).unwrap(), &h, &build_collapse_terms(q, &l).unwrap(), s, &obs).unwrap()
    };
    let base = run(&p, &spec);
    let lambda = 7.0;
    let scaled = run(&p.scaled(lambda), &spec.scaled(lambda));
    for (a, b) in base.values.iter().zip(&scaled.values) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn rate_equation_two_level() {
    let (down, up) = (2.0, 0.5);
    let terms = vec![LindbladTerm::new(sigma_minus(), down).unwrap(), LindbladTerm::new(sigma_plus(), up).unwrap()];
    let p = stationary_populations(&sigma_z(), &terms).unwrap();
    assert!((p[1] - up / (up + down)).abs() < 1e-14);
    assert!(stationary_populations(&crate::hilbert::sigma_x(), &terms).is_err());
    // no jumps at all leaves the stationary state undetermined
    assert!(stationary_populations(&sigma_z(), &[]).is_err());
}
