use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ruc_core::dispatch::{solve_deterministic_uc, DetUcOptions, ReserveRequirement};
use ruc_core::model::{
    dispatch_feasible_set, line_flow, parse_system, storage_levels, CommitmentSchedule,
    DispatchHistory, PeriodDispatch, PowerSystem,
};

#[derive(Clone, Debug)]
struct Unit {
    cost: f64,
    no_load: f64,
    startup: f64,
    shutdown: f64,
    p_min: f64,
    p_max: f64,
    min_up: usize,
    min_down: usize,
    initial_on: bool,
    hours: usize,
}

fn thermal_system(units: &[Unit], demand: &[f64]) -> PowerSystem {
    let mut text = format!(
        "name = \"thermal\"\nhorizon = {}\nlines = []\nrenewables = []\nstorages = []\n",
        demand.len()
    );
    for (i, u) in units.iter().enumerate() {
        text += &format!(
            "[[generators]]\nid = \"G{i}\"\nnode = \"b\"\nvariable_cost = {}\nno_load_cost = {}\nstartup_cost = {}\n\
             shutdown_cost = {}\np_min = {}\np_max = {}\nramp_up = {}\nramp_down = {}\nmin_up = {}\nmin_down = {}\n\
             initial_on = {}\ninitial_output = {}\ninitial_hours_in_state = {}\n",
            u.cost,
            u.no_load,
            u.startup,
            u.shutdown,
            u.p_min,
            u.p_max,
            u.p_max,
            u.p_max,
            u.min_up,
            u.min_down,
            u.initial_on,
            if u.initial_on { u.p_min } else { 0.0 },
            u.hours
        );
    }
    text += &format!("[[demands]]\nnode = \"b\"\nprofile = {demand:?}\n");
    parse_system(&text).unwrap()
}

/// Run-length feasibility of one unit's on/off row, written from the definition.
fn respects_min_times(u: &Unit, row: &[bool]) -> bool {
    let mut state = u.initial_on;
    let mut run = u.hours;
    for &on in row {
        if on != state {
            let needed = if state { u.min_up } else { u.min_down };
            if run < needed {
                return false;
            }
            state = on;
            run = 1;
        } else {
            run += 1;
        }
    }
    true
}

/// Cheapest single-period dispatch of the committed units: merit order above p_min.
fn merit_order(units: &[Unit], on: &[bool], demand: f64) -> Option<f64> {
    let committed: Vec<&Unit> = units
        .iter()
        .zip(on)
        .filter(|(_, &o)| o)
        .map(|(u, _)| u)
        .collect();
    let floor: f64 = committed.iter().map(|u| u.p_min).sum();
    let ceiling: f64 = committed.iter().map(|u| u.p_max).sum();
    if demand < floor - 1e-9 || demand > ceiling + 1e-9 {
        return None;
    }
    let mut cost: f64 = committed.iter().map(|u| u.cost * u.p_min).sum();
    let mut rest = demand - floor;
    let mut order = committed.clone();
    order.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    for u in order {
        let take = rest.min(u.p_max - u.p_min);
        cost += take * u.cost;
        rest -= take;
    }
    Some(cost)
}

fn brute_force_uc(units: &[Unit], demand: &[f64]) -> Option<f64> {
    let n = units.len();
    let horizon = demand.len();
    let bits = n * horizon;
    let mut best: Option<f64> = None;
    for mask in 0u64..1 << bits {
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                (0..horizon)
                    .map(|t| mask >> (i * horizon + t) & 1 == 1)
                    .collect()
            })
            .collect();
        if !units
            .iter()
            .zip(&rows)
            .all(|(u, r)| respects_min_times(u, r))
        {
            continue;
        }
        let mut total = 0.0;
        let mut ok = true;
        for t in 0..horizon {
            let on: Vec<bool> = rows.iter().map(|r| r[t]).collect();
            match merit_order(units, &on, demand[t]) {
                Some(c) => total += c,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        for (u, r) in units.iter().zip(&rows) {
            let mut prev = u.initial_on;
            for &on in r {
                total += if on { u.no_load } else { 0.0 };
                total += if on && !prev { u.startup } else { 0.0 };
                total += if !on && prev { u.shutdown } else { 0.0 };
                prev = on;
            }
        }
        best = Some(best.map_or(total, |b: f64| b.min(total)));
    }
    best
}

fn solve(units: &[Unit], demand: &[f64]) -> Option<f64> {
    let system = thermal_system(units, demand);
    let options = DetUcOptions {
        mip_gap: 0.0,
        ..DetUcOptions::default()
    };
    let reserves = ReserveRequirement::none(demand.len());
    solve_deterministic_uc(&system, &Vec::new(), &reserves, &options)
        .ok()
        .map(|s| s.objective)
}

fn sample_units() -> Vec<Unit> {
    vec![
        Unit {
            cost: 10.0,
            no_load: 100.0,
            startup: 300.0,
            shutdown: 20.0,
            p_min: 40.0,
            p_max: 120.0,
            min_up: 3,
            min_down: 2,
            initial_on: true,
            hours: 1,
        },
        Unit {
            cost: 25.0,
            no_load: 30.0,
            startup: 60.0,
            shutdown: 0.0,
            p_min: 10.0,
            p_max: 60.0,
            min_up: 2,
            min_down: 2,
            initial_on: false,
            hours: 3,
        },
    ]
}

#[test]
fn commitment_matches_enumeration() {
    let units = sample_units();
    let demand = [60.0, 150.0, 170.0, 90.0];
    let oracle = brute_force_uc(&units, &demand).unwrap();
    let got = solve(&units, &demand).unwrap();
    assert!(
        (got - oracle).abs() < 1e-6 * oracle.max(1.0),
        "{got} vs {oracle}"
    );
}

#[test]
fn infeasible_demand_has_no_schedule() {
    let units = sample_units();
    assert!(brute_force_uc(&units, &[200.0, 50.0]).is_none());
    assert!(solve(&units, &[200.0, 50.0]).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_commitment_matches_enumeration(
        costs in prop::collection::vec((5.0f64..40.0, 0.0f64..80.0, 0.0f64..200.0), 3),
        up in prop::collection::vec(1usize..4, 3),
        init in prop::collection::vec(any::<bool>(), 3),
        demand in prop::collection::vec(30.0f64..160.0, 3),
    ) {
        let caps = [(20.0, 90.0), (10.0, 60.0), (5.0, 40.0)];
        let units: Vec<Unit> = (0..3)
            .map(|i| Unit {
                cost: costs[i].0,
                no_load: costs[i].1,
                startup: costs[i].2,
                shutdown: 0.0,
                p_min: caps[i].0,
                p_max: caps[i].1,
                min_up: up[i],
                min_down: up[(i + 1) % 3],
                initial_on: init[i],
                hours: 1,
            })
            .collect();
        let oracle = brute_force_uc(&units, &demand);
        let got = solve(&units, &demand);
        match (oracle, got) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6 * a.max(1.0), "{} vs {}", a, b),
            (None, None) => {}
            other => prop_assert!(false, "feasibility disagrees: {:?}", other),
        }
    }
}

/// Three buses in a triangle with reactances x12, x23, x13; bus 1 is the reference.
fn triangle(x: [f64; 3]) -> PowerSystem {
    // Independent PTDF: invert the reduced susceptance matrix.
    let b = |k: usize| 1.0 / x[k];
    let lines = [(0usize, 1usize, 0usize), (1, 2, 1), (0, 2, 2)];
    let mut bbus = DMatrix::<f64>::zeros(3, 3);
    for &(i, j, k) in &lines {
        bbus[(i, i)] += b(k);
        bbus[(j, j)] += b(k);
        bbus[(i, j)] -= b(k);
        bbus[(j, i)] -= b(k);
    }
    let reduced = bbus
        .view((1, 1), (2, 2))
        .into_owned()
        .try_inverse()
        .unwrap();
    let ptdf = |line: usize, bus: usize| -> f64 {
        let (i, j, k) = lines[line];
        let theta = |n: usize| {
            if n == 0 || bus == 0 {
                0.0
            } else {
                reduced[(n - 1, bus - 1)]
            }
        };
        b(k) * (theta(i) - theta(j))
    };
    let mut text = String::from("name = \"triangle\"\nhorizon = 1\nstorages = []\n");
    text += "[[generators]]\nid = \"G1\"\nnode = \"b1\"\nvariable_cost = 10.0\np_min = 0.0\np_max = 300.0\n\
             ramp_up = 300.0\nramp_down = 300.0\ninitial_on = true\n";
    text += "[[generators]]\nid = \"G2\"\nnode = \"b2\"\nvariable_cost = 20.0\np_min = 0.0\np_max = 300.0\n\
             ramp_up = 300.0\nramp_down = 300.0\ninitial_on = true\n";
    text += "[[renewables]]\nid = \"W3\"\nnode = \"b3\"\nkind = \"wind\"\np_max_profile = 100.0\n";
    text += "[[demands]]\nnode = \"b2\"\nprofile = [70.0]\n[[demands]]\nnode = \"b3\"\nprofile = [130.0]\n";
    for (l, name) in ["l12", "l23", "l13"].iter().enumerate() {
        text += &format!(
            "[[lines]]\nid = \"{name}\"\nflow_limit = 500.0\nsf_demand = [{}, {}]\nsf_generators = [{}, {}]\n\
             sf_renewables = [{}]\nsf_storages = []\n",
            ptdf(l, 1),
            ptdf(l, 2),
            ptdf(l, 0),
            ptdf(l, 1),
            ptdf(l, 2)
        );
    }
    parse_system(&text).unwrap()
}

/// DC power flow by angles: solve B θ = P with θ_1 = 0 and read f_ij = (θ_i − θ_j)/x_ij.
fn angle_flows(x: [f64; 3], injection: [f64; 3]) -> [f64; 3] {
    let b = [1.0 / x[0], 1.0 / x[1], 1.0 / x[2]];
    let m = DMatrix::from_row_slice(2, 2, &[b[0] + b[1], -b[1], -b[1], b[1] + b[2]]);
    let theta = m
        .lu()
        .solve(&DVector::from_row_slice(&injection[1..]))
        .unwrap();
    let th = [0.0, theta[0], theta[1]];
    [
        b[0] * (th[0] - th[1]),
        b[1] * (th[1] - th[2]),
        b[2] * (th[0] - th[2]),
    ]
}

#[test]
fn line_flows_match_angle_solution() {
    for x in [[0.1, 0.1, 0.1], [0.05, 0.2, 0.1], [0.3, 0.1, 0.25]] {
        let system = triangle(x);
        for (g1, g2, w) in [(100.0, 40.0, 60.0), (200.0, 0.0, 0.0), (10.0, 100.0, 90.0)] {
            let d = PeriodDispatch {
                gen: vec![g1, g2],
                ren: vec![w],
                discharge: vec![],
                charge: vec![],
            };
            let injection = [g1, g2 - 70.0, w - 130.0];
            let expected = angle_flows(x, injection);
            for (l, e) in expected.iter().enumerate() {
                let got = line_flow(&system, l, 0, &d);
                assert!((got - e).abs() < 1e-9, "line {l}: {got} vs {e}");
            }
        }
    }
}

#[test]
fn feasible_set_accepts_and_rejects_points() {
    let system = triangle([0.1, 0.1, 0.1]);
    let schedule = CommitmentSchedule::all_on(&system);
    let block =
        dispatch_feasible_set(&system, &schedule, 0, &DispatchHistory::new(), &[80.0]).unwrap();
    let good = PeriodDispatch {
        gen: vec![100.0, 20.0],
        ren: vec![80.0],
        discharge: vec![],
        charge: vec![],
    };
    assert!(block.is_feasible(&good, 1e-9));
    let unbalanced = PeriodDispatch {
        gen: vec![100.0, 10.0],
        ..good.clone()
    };
    assert!(!block.is_feasible(&unbalanced, 1e-9));
    let over_available = PeriodDispatch {
        gen: vec![100.0, 10.0],
        ren: vec![90.0],
        ..good
    };
    assert!(!block.is_feasible(&over_available, 1e-9));
    assert!(
        dispatch_feasible_set(&system, &schedule, 1, &DispatchHistory::new(), &[80.0]).is_err()
    );
}

#[test]
fn storage_levels_accumulate_with_efficiency() {
    let system = ruc_core::model::load_system(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/one_bus.toml"),
    )
    .unwrap();
    let mk = |ch: f64, dis: f64| PeriodDispatch {
        gen: vec![0.0; 2],
        ren: vec![0.0],
        discharge: vec![dis],
        charge: vec![ch],
    };
    let levels = storage_levels(&system, &[mk(10.0, 0.0), mk(0.0, 5.0), mk(15.0, 0.0)]);
    let expected = [20.0 + 9.0, 29.0 - 5.0, 24.0 + 13.5];
    for (a, b) in levels[0].iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn malformed_systems_are_rejected() {
    let base = "name = \"x\"\nhorizon = 2\nlines = []\nrenewables = []\nstorages = []\n\
                [[generators]]\nid = \"G\"\nnode = \"b\"\nvariable_cost = 1.0\np_min = 0.0\np_max = 10.0\n\
                ramp_up = 10.0\nramp_down = 10.0\ninitial_on = true\n";
    assert!(parse_system(&format!(
        "{base}[[demands]]\nnode = \"b\"\nprofile = [1.0, 2.0]\n"
    ))
    .is_ok());
    assert!(parse_system(&format!(
        "{base}[[demands]]\nnode = \"b\"\nprofile = [1.0]\n"
    ))
    .is_err());
    let inverted = base.replace("p_min = 0.0", "p_min = 20.0");
    assert!(parse_system(&format!(
        "{inverted}[[demands]]\nnode = \"b\"\nprofile = [1.0, 2.0]\n"
    ))
    .is_err());
    assert!(parse_system("horizon = \"two\"").is_err());
}

/// Every on/off pattern of two units over six periods: the commitment rows accept the pattern
/// (with its implied start/shut indicators) exactly when the run-length rules do.
#[test]
fn commitment_rows_match_pattern_enumerator() {
    use ruc_core::backend::MathProgram;
    use ruc_core::model::build_commitment_constraints;

    let horizon = 6;
    let mut units = sample_units();
    units[0].hours = 1;
    units[1].min_down = 3;
    units[1].hours = 1;
    let system = thermal_system(&units, &vec![50.0; horizon]);
    let mut program = MathProgram::new();
    let vars = build_commitment_constraints(&system, &mut program);
    let mut accepted = 0;
    for mask in 0u32..1 << (2 * horizon) {
        let rows: Vec<Vec<bool>> = (0..2)
            .map(|i| {
                (0..horizon)
                    .map(|t| mask >> (i * horizon + t) & 1 == 1)
                    .collect()
            })
            .collect();
        let expected = units
            .iter()
            .zip(&rows)
            .all(|(u, r)| respects_min_times(u, r));
        let schedule = CommitmentSchedule::from_on(&system, rows);
        let mut x = vec![0.0; program.num_vars()];
        for i in 0..2 {
            for t in 0..horizon {
                x[vars.on[i][t].index()] = schedule.on_value(i, t);
                x[vars.start[i][t].index()] = schedule.start_value(i, t);
                x[vars.shut[i][t].index()] = schedule.shut_value(i, t);
            }
        }
        let feasible = program.max_violation(&x) <= 1e-9;
        assert_eq!(feasible, expected, "pattern {mask:012b}");
        accepted += usize::from(feasible);
        // Start and shut indicators are pinned by the on/off states.
        if feasible {
            let i = 0;
            let t = (0..horizon).find(|&t| schedule.start[i][t] || schedule.shut[i][t]);
            if let Some(t) = t {
                let mut y = x.clone();
                y[vars.start[i][t].index()] = 1.0 - y[vars.start[i][t].index()];
                assert!(program.max_violation(&y) > 1e-9);
            }
        }
    }
    assert!(accepted > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn storage_levels_telescope(moves in prop::collection::vec((0.0f64..15.0, 0.0f64..15.0), 1..12)) {
        let system = ruc_core::model::load_system(
            &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/one_bus.toml"),
        )
        .unwrap();
        let periods: Vec<PeriodDispatch> = moves
            .iter()
            .map(|&(ch, dis)| PeriodDispatch { gen: vec![0.0; 2], ren: vec![0.0], discharge: vec![dis], charge: vec![ch] })
            .collect();
        let levels = storage_levels(&system, &periods);
        let unit = &system.storages[0];
        let mut history = DispatchHistory::new();
        for (t, p) in periods.iter().enumerate() {
            let closed: f64 = unit.initial_level
                + moves[..=t].iter().map(|&(ch, dis)| unit.efficiency * ch - dis).sum::<f64>();
            prop_assert!((levels[0][t] - closed).abs() < 1e-9);
            history.push(p.clone());
            prop_assert!((history.stored(&system, 0) - closed).abs() < 1e-9);
        }
    }
}
