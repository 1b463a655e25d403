use std::f64::consts::PI;

use censpin::bethe::{energy_inhom, solve_hom_qpoly, solve_inhom_newton, BetheOptions};
use censpin::dynamics::{
    entropy, evolve, loschmidt, prepare, reduced_density, sminus_expectation, spin_polarization, uniform_grid,
};
use censpin::modes::{Method, ModeCache};
use censpin::oracle::{
    build_dense, build_dense_inhom, coherent_product_state, commutator_checks, dicke_to_product, partial_trace_bath,
    random_probes,
};
use censpin::sector::{full_spectrum, spectrum_multiset};
use censpin::{Complex64, HalfInt, InhomModelParams, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(s: &str) -> HalfInt {
    s.parse().unwrap()
}

fn params(s: &str, n: usize, a: f64, b: f64) -> ModelParams {
    ModelParams::new(h(s), n, a, b).unwrap()
}

fn nearest(levels: &[f64], e: f64) -> f64 {
    levels.iter().fold(f64::INFINITY, |d, x| d.min((x - e).abs()))
}

const TABLE: [f64; 12] =
    [-2.14854, -1.28078, -0.893401, -0.780776, -0.5, 0.0, 0.5, 0.5, 0.780776, 1.04194, 1.28078, 1.5];

#[test]
fn table_spectrum_from_oracle() {
    let got = build_dense(&params("1", 2, 0.5, 0.5)).unwrap().spectrum();
    assert_eq!(got.len(), 12);
    for (g, w) in got.iter().zip(TABLE) {
        assert!((g - w).abs() < 1e-5, "{g} vs {w}");
    }
}

#[test]
fn sector_spectrum_matches_oracle_spin_three_halves() {
    let p = params("3/2", 3, 0.7, 0.3);
    let ours = spectrum_multiset(&full_spectrum(&p).unwrap());
    let exact = build_dense(&p).unwrap().spectrum();
    assert_eq!(ours.len(), exact.len());
    for (a, b) in ours.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn commutants_of_the_hamiltonian() {
    for (s, n) in [("1/2", 3), ("1", 4), ("3/2", 3), ("2", 2)] {
        let dm = build_dense(&params(s, n, 0.9, -0.4)).unwrap();
        let r = commutator_checks(&dm, &random_probes(dm.dim, 4, 11));
        assert!(r.sz < 1e-12 && r.j2 < 1e-12 && r.s0_sq < 1e-12, "{r:?}");
    }
}

#[test]
fn state_matches_oracle_propagation() {
    let p = params("1", 6, 1.0, 1.0);
    let dm = build_dense(&p).unwrap();
    let cache = ModeCache::build(&p, Method::Spectral).unwrap();
    let prep = prepare(PI / 2.0, 6);
    let st = evolve(&prep, &cache, 0.7).unwrap();
    let exact = dm.evolve(&coherent_product_state(p.s, 6, PI / 2.0), 0.7).unwrap();
    let ours = dicke_to_product(&st);
    let worst = ours.iter().zip(&exact).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn reduced_density_matches_partial_trace_of_oracle_state() {
    let p = params("1", 6, 1.0, 1.0);
    let dm = build_dense(&p).unwrap();
    let cache = ModeCache::build(&p, Method::Spectral).unwrap();
    let prep = prepare(PI / 2.0, 6);
    let ours = reduced_density(&prep, &cache, 1.3).unwrap();
    let exact_psi = dm.evolve(&coherent_product_state(p.s, 6, PI / 2.0), 1.3).unwrap();
    let exact = partial_trace_bath(&exact_psi, p.s, 6).unwrap();
    let worst = (&ours.rho - &exact.rho).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn observables_at_ten_bath_spins() {
    let p = params("1", 10, 1.0, 1.0);
    let dm = build_dense(&p).unwrap();
    let cache = ModeCache::build(&p, Method::Recipe).unwrap();
    let theta = PI / 2.0;
    let prep = prepare(theta, 10);
    let psi0 = coherent_product_state(p.s, 10, theta);
    let exact_rho = |t: f64| partial_trace_bath(&dm.evolve(&psi0, t).unwrap(), p.s, 10).unwrap();

    let sz_exact = {
        let r = exact_rho(2.0);
        (0..3).map(|j| r.rho[(j, j)].re * (1.0 - j as f64)).sum::<f64>()
    };
    assert!((spin_polarization(&prep, &cache, 2.0).unwrap() - sz_exact).abs() < 1e-9);

    let r = exact_rho(1.1);
    let sm_exact = censpin::dynamics::sminus_expectation(&r).norm_sqr();
    let sm = sminus_expectation(&reduced_density(&prep, &cache, 1.1).unwrap()).norm_sqr();
    assert!((sm - sm_exact).abs() < 1e-9);

    for t in uniform_grid(6.0, 30) {
        let psi = dm.evolve(&psi0, t).unwrap();
        let overlap: Complex64 = psi0.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        assert!((loschmidt(&prep, &cache, t).unwrap() - overlap.norm_sqr()).abs() < 1e-9);
        let s_exact = entropy(&partial_trace_bath(&psi, p.s, 10).unwrap());
        assert!((entropy(&reduced_density(&prep, &cache, t).unwrap()) - s_exact).abs() < 1e-8);
    }
}

#[test]
fn sminus_by_hand_on_oracle_density() {
    // <S^-> = Tr(rho S^-) with S^-|s,m> = sqrt(s(s+1) - m(m-1)) |s,m-1>
    let p = params("1", 4, 0.6, 0.2);
    let dm = build_dense(&p).unwrap();
    let psi = dm.evolve(&coherent_product_state(p.s, 4, 0.4 * PI), 0.9).unwrap();
    let r = partial_trace_bath(&psi, p.s, 4).unwrap();
    let mut want = Complex64::new(0.0, 0.0);
    for j in 0..2 {
        let m = 1.0 - j as f64;
        want += r.rho[(j, j + 1)] * (2.0 - m * (m - 1.0)).sqrt();
    }
    assert!((sminus_expectation(&r) - want).norm() < 1e-12);
}

#[test]
fn inhomogeneous_energies_are_oracle_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps: Vec<f64> = (0..3).map(|i| -1.0 - i as f64 - rng.gen_range(0.0..0.8)).collect();
    let p = InhomModelParams::new(h("1"), 0.4, 0.0, eps).unwrap();
    let levels = build_dense_inhom(&p).unwrap().spectrum();
    let opts = BetheOptions::default();
    let mut found = 0;
    for m in 0..=5 {
        let (states, _) = solve_inhom_newton(&p, m, &opts).unwrap();
        for st in states {
            found += 1;
            let e = energy_inhom(&st.roots, &p).unwrap();
            assert!(nearest(&levels, e) < 1e-8, "M={m}: {e}");
        }
    }
    assert!(found > 0);
}

#[test]
fn spin_half_inhomogeneous_single_root() {
    let p = InhomModelParams::new(h("1/2"), 1.0, 0.0, vec![1.0, 2.0]).unwrap();
    let levels = build_dense_inhom(&p).unwrap().spectrum();
    let (states, _) = solve_inhom_newton(&p, 1, &BetheOptions::default()).unwrap();
    assert!(!states.is_empty());
    for st in states {
        assert!(nearest(&levels, st.energy) < 1e-8);
    }
}

#[test]
fn near_homogeneous_limit_approaches_table() {
    // (1/s)/(eps0 - eps_j) = 2A = 1 for s = 1
    let mut prev = f64::INFINITY;
    for split in [1e-1, 1e-2, 1e-3] {
        let p = InhomModelParams::new(h("1"), 0.5, 0.0, vec![-1.0, -1.0 - split]).unwrap();
        let mut energies = Vec::new();
        for m in 0..=4 {
            let (states, _) = solve_inhom_newton(&p, m, &BetheOptions::default()).unwrap();
            energies.extend(states.iter().map(|s| s.energy));
        }
        let worst = TABLE.iter().map(|&e| nearest(&energies, e)).fold(0.0, f64::max);
        assert!(worst < prev, "split {split}: {worst} did not improve on {prev}");
        prev = worst;
    }
    assert!(prev < 1e-2, "{prev}");
}

#[test]
fn homogeneous_bethe_states_lie_in_top_block() {
    let p = params("1", 4, 0.8, 0.35);
    let j = h("2");
    let levels = full_spectrum(&p).unwrap();
    for m in 0..=6 {
        let rep = solve_hom_qpoly(&p, m, &BetheOptions { starts: 60, ..BetheOptions::default() }).unwrap();
        let mag = censpin::bethe::magnetization_of_m(p.s, 4, m);
        let block: Vec<f64> = levels.iter().filter(|l| l.j == j && l.m == mag).map(|l| l.energy).collect();
        for sol in rep.solutions {
            assert!(nearest(&block, sol.state.energy) < 1e-7);
        }
    }
}
