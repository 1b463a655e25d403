//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use censpin::bethe::count_solutions;
use censpin::dynamics::{evolve, prepare, run_timeseries_cached, uniform_grid, Observable};
use censpin::modes::{Method, ModeCache};
use censpin::oracle::{build_dense, oracle_timeseries};
use censpin::sector::{full_spectrum, spectrum_multiset};
use censpin::{HalfInt, ModelParams};
use censpin_cli::run;
use censpin_cli::verify::{cache_deviation, recurrence_deviation};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let pass = v.pass && took < limit;
    verdict(pass, format!("{} [{:.2}s, limit {}s]", v.detail, took.as_secs_f64(), limit.as_secs()))
}

fn cli(args: &[&str]) -> censpin_cli::Outcome {
    run(std::iter::once("censpin").chain(args.iter().copied()))
}

/// `(j, m, E)` rows of the s=1, N=2, A=B=0.5 table.
const TABLE_LEVELS: [(&str, &str, f64); 12] = [
    ("1", "2", 1.5),
    ("1", "1", -0.780776),
    ("1", "1", 1.28078),
    ("1", "0", -2.14854),
    ("1", "0", -0.893401),
    ("1", "0", 1.04194),
    ("1", "-1", -1.28078),
    ("1", "-1", 0.780776),
    ("1", "-2", 0.5),
    ("0", "1", 0.5),
    ("0", "0", 0.0),
    ("0", "-1", -0.5),
];

fn table_roots() -> Vec<(usize, f64, Vec<Complex64>)> {
    let c = Complex64::new;
    vec![
        (0, 1.5, vec![]),
        (1, -0.780776, vec![c(-0.438447, 0.0)]),
        (1, 1.28078, vec![c(-4.56155, 0.0)]),
        (2, -2.14854, vec![c(-0.351465, 0.262932), c(-0.351465, -0.262932)]),
        (2, -0.893401, vec![c(-2.71954, 0.0), c(-0.493659, 0.0)]),
        (2, 1.04194, vec![c(-3.54194, 1.70866), c(-3.54194, -1.70866)]),
        (3, -1.28078, vec![c(-0.612504, 0.0), c(-1.41297, 0.681796), c(-1.41297, -0.681796)]),
        (3, 0.780776, vec![c(-3.16744, 0.0), c(-2.19705, 2.46224), c(-2.19705, -2.46224)]),
        (
            4,
            0.5,
            vec![c(-2.26566, 0.850941), c(-2.26566, -0.850941), c(-0.734342, 2.43893), c(-0.734342, -2.43893)],
        ),
    ]
}

/// Greedy matching of two root multisets; worst absolute distance.
fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (i, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, &y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[i] = true;
        worst = worst.max(d);
    }
    worst
}

fn json_roots(state: &Value) -> Vec<Complex64> {
    state["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| Complex64::new(p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect()
}

fn criterion_1() -> Verdict {
    timed(Duration::from_secs(1), || {
        let out = cli(&["spectrum", "--s", "1", "--N", "2", "--A", "0.5", "--B", "0.5"]);
        if out.code != 0 {
            return verdict(false, format!("exit {}", out.code));
        }
        let mut rdr = csv::Reader::from_reader(out.stdout.as_bytes());
        let rows: Vec<(String, String, f64)> = rdr
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].to_string(), r[1].to_string(), r[2].parse().unwrap())
            })
            .collect();
        let mut remaining = rows.clone();
        let mut worst: f64 = 0.0;
        for (j, m, e) in TABLE_LEVELS {
            let best = remaining
                .iter()
                .enumerate()
                .filter(|(_, r)| r.0 == j && r.1 == m)
                .map(|(i, r)| (i, (r.2 - e).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((i, d)) => {
                    worst = worst.max(d);
                    remaining.remove(i);
                }
                None => return verdict(false, format!("no level at j={j}, m={m}")),
            }
        }
        verdict(
            rows.len() == 12 && remaining.is_empty() && worst <= 1e-5,
            format!("{} levels, max |dE| = {worst:.2e}", rows.len()),
        )
    })
}

fn criterion_2() -> Verdict {
    timed(Duration::from_secs(10), || {
        let table = table_roots();
        let mut worst_root: f64 = 0.0;
        let mut worst_e: f64 = 0.0;
        for m in 0..=4usize {
            let out = cli(&["bethe", "--s", "1", "--N", "2", "--A", "0.5", "--B", "0.5", "--M", &m.to_string(), "--format", "json"]);
            if out.code != 0 {
                return verdict(false, format!("M={m}: exit {}", out.code));
            }
            let doc: Value = serde_json::from_str(&out.stdout).unwrap();
            let states = doc["states"].as_array().unwrap();
            for (_, e, roots) in table.iter().filter(|r| r.0 == m) {
                let best = states
                    .iter()
                    .map(|s| (set_distance(&json_roots(s), roots), (s["energy"].as_f64().unwrap() - e).abs()))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match best {
                    Some((dr, de)) => {
                        worst_root = worst_root.max(dr);
                        worst_e = worst_e.max(de);
                    }
                    None => return verdict(false, format!("M={m}: no states")),
                }
            }
        }
        verdict(
            worst_root <= 1e-4 && worst_e <= 1e-5,
            format!("9 table states, max root distance {worst_root:.2e}, max |dE| {worst_e:.2e}"),
        )
    })
}

fn criterion_3() -> Verdict {
    timed(Duration::from_secs(300), || {
        let out = cli(&["bethe", "--s", "1", "--N", "60", "--M", "31", "--A", "0.5", "--B", "0.5", "--format", "json"]);
        if out.code != 0 {
            return verdict(false, format!("exit {}: {}", out.code, out.stderr.trim()));
        }
        let doc: Value = serde_json::from_str(&out.stdout).unwrap();
        let hit = doc["states"].as_array().unwrap().iter().find(|s| {
            (s["energy"].as_f64().unwrap() - 30.004).abs() <= 0.01 && s["residual"].as_f64().unwrap() < 1e-8
        });
        match hit {
            None => verdict(false, "no state with E = 30.004 +- 0.01"),
            Some(s) => {
                let roots = json_roots(s);
                let conj: Vec<Complex64> = roots.iter().map(|z| z.conj()).collect();
                let asym = set_distance(&roots, &conj);
                verdict(
                    roots.len() == 31 && asym <= 1e-8,
                    format!(
                        "E = {:.9}, residual {:.2e}, conjugate mismatch {asym:.1e}",
                        s["energy"].as_f64().unwrap(),
                        s["residual"].as_f64().unwrap()
                    ),
                )
            }
        }
    })
}

fn criterion_4() -> Verdict {
    let mut bad = Vec::new();
    let mut cases = 0;
    for s2 in 1..=4 {
        let s = HalfInt::from_twice(s2);
        for n in 1..=8usize {
            cases += 1;
            let total: u128 = (0..=n + s2 as usize).map(|m| count_solutions(s, n, m)).sum();
            if total != (s2 as u128 + 1) << n {
                bad.push(format!("s={s}, N={n}"));
            }
        }
    }
    verdict(bad.is_empty(), format!("{cases} (s, N) pairs, failures: {bad:?}"))
}

fn criterion_5() -> Verdict {
    let mut cases = Vec::new();
    for s2 in 1..=6i64 {
        for n in 1..=12usize {
            if ((s2 as usize + 1) << n) <= 4096 {
                cases.push((s2, n));
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(s2, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * s2 as u64 + n as u64);
            (0..5)
                .map(|_| {
                    let p = ModelParams::new(HalfInt::from_twice(s2), n, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
                        .unwrap();
                    let ours = spectrum_multiset(&full_spectrum(&p).unwrap());
                    let exact = build_dense(&p).unwrap().spectrum();
                    if ours.len() != exact.len() {
                        return f64::INFINITY;
                    }
                    ours.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    verdict(worst <= 1e-9, format!("{} (s, N) pairs x 5 draws, max deviation {worst:.2e}", cases.len()))
}

struct DynamicsRun {
    worst_obs: f64,
    worst_sum_rule: f64,
    worst_ortho: f64,
    worst_unitarity: f64,
}

fn dynamics_runs() -> (Vec<DynamicsRun>, Duration) {
    let start = Instant::now();
    let times = uniform_grid(20.0, 199);
    let obs = [Observable::Entropy, Observable::Purity, Observable::Sz, Observable::SMinus2, Observable::Loschmidt];
    let mut cases = Vec::new();
    for s2 in 1..=3i64 {
        for n in 1..=10usize {
            for theta in [0.3 * PI, 0.5 * PI] {
                cases.push((s2, n, theta));
            }
        }
    }
    let runs = cases
        .par_iter()
        .map(|&(s2, n, theta)| {
            let p = ModelParams::new(HalfInt::from_twice(s2), n, 1.0, 1.0).unwrap();
            let cache = ModeCache::build(&p, Method::Spectral).unwrap();
            let prep = prepare(theta, n);
            let ts = run_timeseries_cached(&cache, &prep, &times, &obs).unwrap();
            let exact = oracle_timeseries(&build_dense(&p).unwrap(), theta, &times, &obs).unwrap();
            let worst_obs = ts
                .values
                .iter()
                .zip(&exact)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            let worst_unitarity = times
                .iter()
                .map(|&t| (evolve(&prep, &cache, t).unwrap().norm_sqr() - 1.0).abs())
                .fold(0.0, f64::max);
            DynamicsRun {
                worst_obs,
                worst_sum_rule: cache.modes.iter().map(|m| m.sum_rule_error()).fold(0.0, f64::max),
                worst_ortho: cache.modes.iter().map(|m| m.orthogonality_error()).fold(0.0, f64::max),
                worst_unitarity,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn criterion_6(runs: &[DynamicsRun], took: Duration) -> Verdict {
    let worst = runs.iter().map(|r| r.worst_obs).fold(0.0, f64::max);
    let limit = Duration::from_secs(120);
    verdict(
        worst <= 1e-8 && took < limit,
        format!("{} runs x 200 times, max deviation {worst:.2e} [{:.2}s, limit 120s]", runs.len(), took.as_secs_f64()),
    )
}

fn criterion_7() -> Verdict {
    let mut cases = Vec::new();
    for s2 in 1..=4i64 {
        for n in 1..=15usize {
            cases.push((s2, n));
        }
    }
    let results: Vec<(f64, f64, usize, usize)> = cases
        .par_iter()
        .map(|&(s2, n)| {
            let p = ModelParams::new(HalfInt::from_twice(s2), n, 1.0, 1.0).unwrap();
            let recipe = ModeCache::build(&p, Method::Recipe).unwrap();
            let spectral = ModeCache::build(&p, Method::Spectral).unwrap();
            let dev = cache_deviation(&recipe, &spectral);
            let rec = recurrence_deviation(&recipe, 12).unwrap();
            (dev, rec, recipe.fallback_count(), recipe.modes.len())
        })
        .collect();
    let dev = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let rec = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let fallbacks: usize = results.iter().map(|r| r.2).sum();
    let sectors: usize = results.iter().map(|r| r.3).sum();
    verdict(
        dev <= 1e-9 && rec <= 1e-8,
        format!(
            "{sectors} sectors, recipe vs spectral {dev:.2e}, moments vs recurrence {rec:.2e} (relative), {fallbacks} degenerate fallbacks"
        ),
    )
}

fn criterion_8(runs: &[DynamicsRun]) -> Verdict {
    let sum_rule = runs.iter().map(|r| r.worst_sum_rule).fold(0.0, f64::max);
    let ortho = runs.iter().map(|r| r.worst_ortho).fold(0.0, f64::max);
    let unit = runs.iter().map(|r| r.worst_unitarity).fold(0.0, f64::max);
    verdict(
        sum_rule <= 1e-10 && ortho <= 1e-10 && unit <= 1e-10,
        format!("sum rule {sum_rule:.2e}, orthogonality {ortho:.2e}, unitarity {unit:.2e}"),
    )
}

fn criterion_9() -> Verdict {
    timed(Duration::from_secs(30), || {
        let out = cli(&["evolve", "--s", "1", "--N", "15", "--A", "1.0", "--B", "1.0", "--theta", "0.5pi", "--t-max", "40"]);
        if out.code != 0 {
            return verdict(false, format!("exit {}", out.code));
        }
        let mut rdr = csv::Reader::from_reader(out.stdout.as_bytes());
        let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let (ie, iz, il) = (col("entropy"), col("sz"), col("loschmidt"));
        let rows: Vec<Vec<f64>> =
            rdr.records().map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect()).collect();
        let ln3 = 3f64.ln();
        let bounds = rows.iter().all(|r| {
            (-1e-12..=ln3 + 1e-8).contains(&r[ie]) && (-1e-10..=1.0 + 1e-10).contains(&r[il]) && (-1.0..=1.0).contains(&r[iz])
        });
        let first = &rows[0];
        let start_ok = first[0] == 0.0 && (first[il] - 1.0).abs() <= 1e-12 && first[ie].abs() <= 1e-10 && (first[iz] - 1.0).abs() <= 1e-12;
        let s_max = rows.iter().map(|r| r[ie]).fold(0.0, f64::max);
        let l_min = rows.iter().map(|r| r[il]).fold(1.0, f64::min);
        verdict(
            rows.len() == 4001 && bounds && start_ok,
            format!("{} rows, bounds {bounds}, initial values {start_ok}, max S {s_max:.4}, min L {l_min:.2e}", rows.len()),
        )
    })
}

fn main() {
    let (runs, took) = dynamics_runs();
    let results = [
        ("1 s=1 N=2 reference spectrum", criterion_1()),
        ("2 s=1 N=2 reference Bethe roots", criterion_2()),
        ("3 N=60 M=31 Bethe state", criterion_3()),
        ("4 counting sum rule", criterion_4()),
        ("5 spectrum vs oracle", criterion_5()),
        ("6 dynamics vs oracle", criterion_6(&runs, took)),
        ("7 generating-function recipe", criterion_7()),
        ("8 residue identities and unitarity", criterion_8(&runs)),
        ("9 N=15 long-time run", criterion_9()),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
