//! Inter-module and oracle checks behind the `verify` subcommand.

use serde::Serialize;

use censpin::bethe::{conjugate_asymmetry, count_solutions, magnetization_of_m, solve_hom_qpoly, BetheError, BetheOptions};
use censpin::dynamics::{evolve, prepare, run_timeseries_cached, Observable};
use censpin::modes::{recurrence_oracle, Method, ModeCache};
use censpin::oracle::{
    build_dense, commutator_checks, dicke_to_product, oracle_timeseries, partial_trace_bath, random_probes,
};
use censpin::sector::{build_sector, full_spectrum, spectrum_multiset};
use censpin::{HalfInt, ModelParams, SectorKey};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub params: ModelParams,
    pub theta: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &str, value: f64, tol: f64) -> Check {
    Check { name: name.to_string(), value, tol, pass: value <= tol, note: None }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest relative deviation of `h^(k)` from the recurrence, `k <= kmax`, over all `n`.
pub fn recurrence_deviation(cache: &ModeCache, kmax: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for md in &cache.modes {
        let reference = recurrence_oracle(&cache.params, md.n, kmax).map_err(|e| CliError::Numeric(e.to_string()))?;
        for (k, want) in reference.iter().enumerate() {
            let got = md.h(k as u32);
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            worst = worst.max(max_abs_diff(&got, want) / scale);
        }
    }
    Ok(worst)
}

/// Largest entrywise difference between two caches (frequencies and residues).
pub fn cache_deviation(a: &ModeCache, b: &ModeCache) -> f64 {
    a.modes
        .iter()
        .zip(&b.modes)
        .map(|(x, y)| {
            let w = max_abs_diff(&x.omega, &y.omega);
            let c = if x.c.shape() == y.c.shape() { (&x.c - &y.c).amax() } else { f64::INFINITY };
            w.max(c)
        })
        .fold(0.0, f64::max)
}

pub fn verify_model(
    p: &ModelParams,
    theta: f64,
    times: &[f64],
    opts: &BetheOptions,
    seed: u64,
) -> Result<VerifyReport, CliError> {
    let numeric = |e: &dyn std::fmt::Display| CliError::Numeric(e.to_string());
    let mut checks = Vec::new();

    let total: u128 = (0..=p.n_bath + p.s.twice() as usize).map(|m| count_solutions(p.s, p.n_bath, m)).sum();
    checks.push(check("count_sum_rule", total.abs_diff(p.hilbert_dim()) as f64, 0.0));

    let dm = build_dense(p).map_err(|e| CliError::Input(e.to_string()))?;
    checks.push(check("oracle_symmetric", dm.asymmetry(), 1e-12));
    checks.push(check("oracle_sz_leakage", dm.sz_leakage(), 1e-12));
    let comm = commutator_checks(&dm, &random_probes(dm.dim, 3, seed));
    checks.push(check("commutator_sz", comm.sz, 1e-12));
    checks.push(check("commutator_j2", comm.j2, 1e-12));
    checks.push(check("commutator_s0_sq", comm.s0_sq, 1e-12));

    let levels = full_spectrum(p).map_err(|e| numeric(&e))?;
    checks.push(check("spectrum_vs_oracle", max_abs_diff(&spectrum_multiset(&levels), &dm.spectrum()), 1e-9));

    let spectral = ModeCache::build(p, Method::Spectral).map_err(|e| numeric(&e))?;
    let recipe = ModeCache::build(p, Method::Recipe).map_err(|e| numeric(&e))?;
    let sum_rule = spectral.modes.iter().chain(&recipe.modes).map(|m| m.sum_rule_error()).fold(0.0, f64::max);
    let ortho = spectral.modes.iter().chain(&recipe.modes).map(|m| m.orthogonality_error()).fold(0.0, f64::max);
    checks.push(check("residue_sum_rule", sum_rule, 1e-10));
    checks.push(check("residue_orthogonality", ortho, 1e-10));
    let mut c = check("recipe_vs_spectral", cache_deviation(&recipe, &spectral), 1e-9);
    if recipe.fallback_count() > 0 {
        c.note = Some(format!("{} degenerate sectors used the spectral route", recipe.fallback_count()));
    }
    checks.push(c);
    checks.push(check("moments_vs_recurrence", recurrence_deviation(&recipe, 12)?, 1e-8));

    let prep = prepare(theta, p.n_bath);
    let obs = Observable::ALL;
    let ts = run_timeseries_cached(&spectral, &prep, times, &obs).map_err(|e| numeric(&e))?;
    let exact = oracle_timeseries(&dm, theta, times, &obs).map_err(|e| numeric(&e))?;
    for (i, o) in obs.iter().enumerate() {
        checks.push(check(&format!("dynamics_{o}"), max_abs_diff(&ts.values[i], &exact[i]), 1e-8));
    }
    let mut unitarity: f64 = 0.0;
    let mut paths: f64 = 0.0;
    let mut rho_oracle: f64 = 0.0;
    let mut psi_oracle: f64 = 0.0;
    let psi0 = censpin::oracle::coherent_product_state(p.s, p.n_bath, theta);
    for &t in times {
        let st = evolve(&prep, &spectral, t).map_err(|e| numeric(&e))?;
        unitarity = unitarity.max((st.norm_sqr() - 1.0).abs());
        let a = st.reduced_density();
        let b = st.reduced_density_partial_trace();
        paths = paths.max((&a.rho - &b.rho).iter().fold(0.0, |m, z| m.max(z.norm())));
        let exact_psi = dm.evolve(&psi0, t).map_err(|e| numeric(&e))?;
        let ours = dicke_to_product(&st);
        psi_oracle = psi_oracle.max(ours.iter().zip(&exact_psi).fold(0.0, |m, (x, y)| m.max((x - y).norm())));
        let r = partial_trace_bath(&exact_psi, p.s, p.n_bath).map_err(|e| numeric(&e))?;
        rho_oracle = rho_oracle.max((&a.rho - &r.rho).iter().fold(0.0, |m, z| m.max(z.norm())));
    }
    checks.push(check("unitarity", unitarity, 1e-10));
    checks.push(check("rho_formula_vs_partial_trace", paths, 1e-10));
    checks.push(check("state_vs_oracle", psi_oracle, 1e-9));
    checks.push(check("rho_vs_oracle", rho_oracle, 1e-9));

    if p.a != 0.0 && p.n_bath <= 10 {
        checks.extend(bethe_checks(p, opts)?);
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { params: *p, theta, checks, pass })
}

/// Homogeneous Bethe energies must lie in the `j = N/2` block with matching `m`.
fn bethe_checks(p: &ModelParams, opts: &BetheOptions) -> Result<Vec<Check>, CliError> {
    let j = HalfInt::from_twice(p.n_bath as i64);
    let mut membership: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut asym: f64 = 0.0;
    let mut found = 0usize;
    let mut block_levels = 0usize;
    for m_roots in 0..=p.n_bath + p.s.twice() as usize {
        let m = magnetization_of_m(p.s, p.n_bath, m_roots);
        let block = build_sector(p, SectorKey::new(j, m)).map_err(|e| CliError::Numeric(e.to_string()))?;
        block_levels += block.dim();
        let rep = match solve_hom_qpoly(p, m_roots, opts) {
            Ok(r) => r,
            Err(BetheError::NoSolutionFound { .. }) => continue,
            Err(e) => return Err(CliError::Numeric(e.to_string())),
        };
        for sol in rep.solutions {
            found += 1;
            let e = sol.state.energy;
            membership = membership.max(block.energies.iter().fold(f64::INFINITY, |d, x| d.min((x - e).abs())));
            residual = residual.max(sol.state.scaled_residual());
            asym = asym.max(conjugate_asymmetry(&sol.state.roots));
        }
    }
    let mut c = check("bethe_energy_in_spectrum", membership, 1e-7);
    c.note = Some(format!("{found} Bethe states for {block_levels} levels with j = N/2"));
    Ok(vec![c, check("bethe_residual", residual, opts.tol_bethe), check("bethe_conjugate_pairs", asym, 1e-8)])
}
