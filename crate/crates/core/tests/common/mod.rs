//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ruc_core::model::{load_system, parse_system, PowerSystem};
use ruc_core::uncertainty::{load_set, DynamicUncertaintySet, NormKind, ScenarioPath};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn bundled(name: &str) -> (PowerSystem, DynamicUncertaintySet) {
    let system = load_system(&data(&format!("{name}.toml"))).unwrap();
    let set = load_set(&data(&format!("{name}_set.toml"))).unwrap();
    (system, set)
}

/// p̄ as an affine map of the stacked residuals v (period-major): `base + map · v`.
pub fn affine_availability(set: &DynamicUncertaintySet) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let n = set.f.len();
    let horizon = set.f[0].len();
    let nv = set.b[0].len();
    let d = horizon * nv;
    // u_t = Σ_l A^l u_{t-l} + B v_t, tracked as (constant, coefficient) pairs.
    let mut u_const: Vec<Vec<f64>> = Vec::new();
    let mut u_coef: Vec<Vec<Vec<f64>>> = Vec::new();
    for t in 0..horizon {
        let mut c = vec![0.0; n];
        let mut m = vec![vec![0.0; d]; n];
        for (l, a) in set.lags.iter().enumerate() {
            let lag = l + 1;
            for r in 0..n {
                for s in 0..n {
                    if t >= lag {
                        c[r] += a[r][s] * u_const[t - lag][s];
                        for j in 0..d {
                            m[r][j] += a[r][s] * u_coef[t - lag][s][j];
                        }
                    } else if let Some(init) = set.initial_u.get(lag - t - 1) {
                        c[r] += a[r][s] * init[s];
                    }
                }
            }
        }
        for r in 0..n {
            for k in 0..nv {
                m[r][t * nv + k] += set.b[r][k];
            }
        }
        u_const.push(c);
        u_coef.push(m);
    }
    let base = (0..n)
        .map(|i| {
            (0..horizon)
                .map(|t| set.f[i][t] + set.g[i][t] * u_const[t][i])
                .collect()
        })
        .collect();
    let map = (0..n)
        .map(|i| {
            (0..horizon)
                .map(|t| u_coef[t][i].iter().map(|x| set.g[i][t] * x).collect())
                .collect()
        })
        .collect();
    (base, map)
}

/// Half-spaces `a · v ≤ b` describing the set in v-space, with every norm written out
/// as the finite family of linear pieces whose maximum it is.
pub fn v_space_halfspaces(set: &DynamicUncertaintySet) -> Vec<(Vec<f64>, f64)> {
    let horizon = set.f[0].len();
    let nv = set.b[0].len();
    let d = horizon * nv;
    // Linear pieces (coefficients over one period's v) of ‖·‖.
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let l1 = |scale: f64| -> Vec<Vec<f64>> {
        (0..1u32 << nv)
            .map(|mask| {
                (0..nv)
                    .map(|k| if mask >> k & 1 == 1 { scale } else { -scale })
                    .collect()
            })
            .collect()
    };
    let linf = || -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for k in 0..nv {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; nv];
                p[k] = s;
                out.push(p);
            }
        }
        out
    };
    match set.norm {
        NormKind::L1 => pieces.extend(l1(1.0)),
        NormKind::Linf => pieces.extend(linf()),
        NormKind::L1Linf => {
            pieces.extend(l1(1.0 / (nv as f64).sqrt()));
            pieces.extend(linf());
        }
        NormKind::L2 => panic!("the l2 ball has no finite description"),
    }
    let mut rows = Vec::new();
    for t in 0..horizon {
        for p in &pieces {
            let mut a = vec![0.0; d];
            a[t * nv..(t + 1) * nv].copy_from_slice(p);
            rows.push((a, set.gamma));
        }
    }
    // Σ_t ‖v_t‖ ≤ ρΓT: one row per choice of piece in every period.
    let budget = set.rho * set.gamma * horizon as f64;
    let mut choice = vec![0usize; horizon];
    loop {
        let mut a = vec![0.0; d];
        for t in 0..horizon {
            a[t * nv..(t + 1) * nv].copy_from_slice(&pieces[choice[t]]);
        }
        rows.push((a, budget));
        let mut t = 0;
        while t < horizon {
            choice[t] += 1;
            if choice[t] < pieces.len() {
                break;
            }
            choice[t] = 0;
            t += 1;
        }
        if t == horizon {
            break;
        }
    }
    let (base, map) = affine_availability(set);
    for i in 0..set.f.len() {
        for t in 0..horizon {
            rows.push((map[i][t].clone(), set.p_max[i][t] - base[i][t]));
            rows.push((map[i][t].iter().map(|x| -x).collect(), base[i][t]));
        }
    }
    rows
}

/// All vertices of `{v : a·v ≤ b}` by solving every d-subset of rows as equalities.
pub fn enumerate_vertices(rows: &[(Vec<f64>, f64)], d: usize) -> Vec<Vec<f64>> {
    let m = rows.len();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if d == 0 || m < d {
        return vertices;
    }
    loop {
        let a = DMatrix::from_fn(d, d, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(d, |r, _| rows[idx[r]].1);
        if a.determinant().abs() > 1e-10 {
            if let Some(x) = a.lu().solve(&b) {
                let feasible = rows.iter().all(|(row, rhs)| {
                    row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>()
                        <= rhs + 1e-7 * rhs.abs().max(1.0)
                });
                if feasible {
                    let v: Vec<f64> = x.iter().copied().collect();
                    if !vertices
                        .iter()
                        .any(|w| w.iter().zip(&v).all(|(p, q)| (p - q).abs() < 1e-9))
                    {
                        vertices.push(v);
                    }
                }
            }
        }
        // Next combination in lexicographic order.
        let mut k = d;
        while k > 0 && idx[k - 1] == m - d + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for j in k..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
    vertices
}

/// Weighted availability Σ a_it p̄_it at a residual vector.
pub fn weighted_availability(set: &DynamicUncertaintySet, weights: &[Vec<f64>], v: &[f64]) -> f64 {
    let (base, map) = affine_availability(set);
    let mut total = 0.0;
    for i in 0..base.len() {
        for t in 0..base[i].len() {
            let p = base[i][t] + map[i][t].iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            total += weights[i][t] * p;
        }
    }
    total
}

pub fn vertex_max(set: &DynamicUncertaintySet, vertices: &[Vec<f64>], weights: &[Vec<f64>]) -> f64 {
    vertices
        .iter()
        .map(|v| weighted_availability(set, weights, v))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A random nonempty set with `n` units, `nv` factors and `horizon` periods.
pub fn random_set<R: Rng>(
    rng: &mut R,
    n: usize,
    nv: usize,
    horizon: usize,
    norm: NormKind,
) -> DynamicUncertaintySet {
    let p_max: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..horizon).map(|_| rng.gen_range(40.0..100.0)).collect())
        .collect();
    let f = p_max
        .iter()
        .map(|row| row.iter().map(|&m| m * rng.gen_range(0.3..0.7)).collect())
        .collect();
    let g = (0..n)
        .map(|_| (0..horizon).map(|_| rng.gen_range(2.0..15.0)).collect())
        .collect();
    let b = (0..n)
        .map(|r| {
            (0..nv)
                .map(|c| {
                    if r == c {
                        rng.gen_range(0.5..1.0)
                    } else {
                        rng.gen_range(-0.3..0.3)
                    }
                })
                .collect()
        })
        .collect();
    let lags = if rng.gen_bool(0.7) {
        vec![(0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        if r == c {
                            rng.gen_range(0.2..0.8)
                        } else {
                            rng.gen_range(-0.1..0.1)
                        }
                    })
                    .collect()
            })
            .collect()]
    } else {
        Vec::new()
    };
    DynamicUncertaintySet {
        f,
        g,
        lags,
        b,
        gamma: rng.gen_range(0.5..3.0),
        rho: if rng.gen_bool(0.5) {
            1.0
        } else {
            rng.gen_range(0.3..1.0)
        },
        p_max,
        norm,
        initial_u: Vec::new(),
    }
}

pub fn random_weights<R: Rng>(rng: &mut R, n: usize, horizon: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..horizon).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// PTDF rows (line id, per-bus factor) for 1, 2 or 3 buses with bus 1 as slack
/// and equal reactances.
fn ptdf(buses: usize) -> Vec<(&'static str, [f64; 3])> {
    match buses {
        1 => Vec::new(),
        2 => vec![("l1-2", [0.0, -1.0, 0.0])],
        _ => vec![
            ("l1-2", [0.0, -2.0 / 3.0, -1.0 / 3.0]),
            ("l2-3", [0.0, 1.0 / 3.0, -1.0 / 3.0]),
            ("l1-3", [0.0, -1.0 / 3.0, -2.0 / 3.0]),
        ],
    }
}

/// A random feasible-looking system on 1–3 buses with its uncertainty set.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    buses: usize,
    horizon: usize,
) -> (PowerSystem, DynamicUncertaintySet) {
    let renewables = rng.gen_range(1..=2usize);
    let demand: Vec<f64> = (0..horizon).map(|_| rng.gen_range(60.0..120.0)).collect();
    let peak = demand.iter().cloned().fold(0.0, f64::max);
    let bus = |rng: &mut R| rng.gen_range(0..buses);
    let mut text = format!("name = \"random\"\nhorizon = {horizon}\n");
    let mut sf_gen = Vec::new();
    let mut sf_ren = Vec::new();
    let mut sf_sto = Vec::new();
    let gens = rng.gen_range(2..=3usize);
    for i in 0..gens {
        let b = bus(rng);
        sf_gen.push(b);
        let p_max = if i == 0 {
            peak * 1.3
        } else {
            rng.gen_range(30.0..80.0)
        };
        let p_min = p_max * rng.gen_range(0.05..0.25);
        let on = i == 0 || rng.gen_bool(0.3);
        text += &format!(
            "[[generators]]\nid = \"G{i}\"\nnode = \"b{b}\"\nvariable_cost = {}\nno_load_cost = {}\nstartup_cost = {}\n\
             p_min = {p_min}\np_max = {p_max}\nramp_up = {}\nramp_down = {}\nmin_up = {}\nmin_down = {}\n\
             initial_on = {on}\ninitial_output = {}\ninitial_hours_in_state = 3\n",
            rng.gen_range(8.0..40.0),
            rng.gen_range(0.0..60.0),
            rng.gen_range(0.0..120.0),
            p_max * rng.gen_range(0.5..1.0),
            p_max * rng.gen_range(0.5..1.0),
            rng.gen_range(1..3),
            rng.gen_range(1..3),
            if on { p_min.max(demand[0].min(p_max) * 0.8) } else { 0.0 },
        );
    }
    let mut ren_cap = Vec::new();
    for j in 0..renewables {
        let b = bus(rng);
        sf_ren.push(b);
        let cap = rng.gen_range(20.0..50.0);
        ren_cap.push(cap);
        text += &format!("[[renewables]]\nid = \"R{j}\"\nnode = \"b{b}\"\nkind = \"wind\"\np_max_profile = {cap}\n");
    }
    if rng.gen_bool(0.5) {
        let b = bus(rng);
        sf_sto.push(b);
        let cap = rng.gen_range(10.0..40.0);
        text += &format!(
            "[[storages]]\nid = \"E0\"\nnode = \"b{b}\"\ndischarge_max = {}\ncharge_max = {}\nenergy_capacity = {cap}\n\
             initial_level = {}\nefficiency = {}\n",
            cap * 0.5,
            cap * 0.5,
            cap * 0.5,
            rng.gen_range(0.8..1.0)
        );
    }
    let db = bus(rng);
    text += &format!("[[demands]]\nnode = \"b{db}\"\nprofile = {demand:?}\n");
    for (id, f) in ptdf(buses) {
        let pick = |v: &[usize]| v.iter().map(|&b| f[b]).collect::<Vec<f64>>();
        text += &format!(
            "[[lines]]\nid = \"{id}\"\nflow_limit = {}\nsf_demand = {:?}\nsf_generators = {:?}\nsf_renewables = {:?}\nsf_storages = {:?}\n",
            peak * rng.gen_range(0.6..1.5),
            [f[db]],
            pick(&sf_gen),
            pick(&sf_ren),
            pick(&sf_sto),
        );
    }
    let system = parse_system(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let nv = rng.gen_range(1..=renewables);
    let mut set = random_set(rng, renewables, nv, horizon, NormKind::Linf);
    for (i, cap) in ren_cap.iter().enumerate() {
        set.p_max[i] = vec![*cap; horizon];
        set.f[i] = (0..horizon)
            .map(|_| cap * rng.gen_range(0.3..0.7))
            .collect();
        set.g[i] = (0..horizon)
            .map(|_| cap * rng.gen_range(0.05..0.15))
            .collect();
    }
    (system, set)
}

/// Largest |supply − demand| of a policy over the given members.
pub fn max_imbalance(
    system: &PowerSystem,
    policy: &ruc_core::robust::AffinePolicy,
    paths: &[ScenarioPath],
) -> f64 {
    let mut worst = 0.0_f64;
    for p in paths {
        for (t, d) in policy.dispatch(p).iter().enumerate() {
            worst = worst.max((d.net_injection() - system.total_demand(t)).abs());
        }
    }
    worst
}
