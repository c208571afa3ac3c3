//! Acceptance checks. Each test prints one PASS/FAIL line to stderr (not
//! captured by the harness) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pursuit_rl::engine::{metrics, run, EventKind, Role, RunRecord, ScenarioConfig};
use pursuit_rl::geo::{self, EnuVector, GeodeticPosition, EARTH_RADIUS_M};
use pursuit_rl::io::{parse_scenario, step_log, BUNDLED_SCENARIOS};
use pursuit_rl::pursuit::Mission;
use pursuit_rl::rl::{
    actor_update, critic_update, riccati_oracle, value, ActorWeights, AxisLearner,
    BatchValueIteration, CostParams, CriticWeights, ErrorWindow, LearnerConfig, Transition,
    UpdateRule,
};

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "criterion {criterion} [{verdict}] {title}: {detail}"
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn bundled(n: usize) -> ScenarioConfig {
    parse_scenario(BUNDLED_SCENARIOS[n - 1].1).expect("bundled scenario parses")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_1_geometry() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut orth, mut det, mut vec_rt, mut pos_rt) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..10_000 {
        let lon = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let lat = rng.gen_range(-1.55..1.55);
        let p = GeodeticPosition::on_surface(lon, lat).unwrap();
        let m = geo::enu_rotation(&p).0;
        orth = orth.max(
            (m * m.transpose() - nalgebra::Matrix3::identity())
                .abs()
                .max(),
        );
        det = det.max((m.determinant() - 1.0).abs());

        let v = EnuVector::new(
            rng.gen_range(-1e6..1e6),
            rng.gen_range(-1e6..1e6),
            rng.gen_range(-1e6..1e6),
        );
        let back = geo::ecef_to_enu(&geo::enu_to_ecef(&v, &p), &p);
        vec_rt = vec_rt.max((back.to_vector() - v.to_vector()).norm() / v.norm());

        let q = geo::ecef_to_geodetic(&geo::geodetic_to_ecef(&p)).unwrap();
        pos_rt = pos_rt.max(
            (geo::geodetic_to_ecef(&q).to_vector() - geo::geodetic_to_ecef(&p).to_vector()).norm()
                / EARTH_RADIUS_M,
        );
    }
    let elapsed = start.elapsed();
    let pass = orth <= 1e-12
        && det <= 1e-12
        && vec_rt <= 1e-9
        && pos_rt <= 1e-9
        && elapsed < Duration::from_secs(5);
    report(
        1,
        "geometry",
        pass,
        &format!(
            "10000 positions, orthonormality {orth:.1e}, det {det:.1e}, ENU round trip {vec_rt:.1e}, geodetic round trip {pos_rt:.1e}, {elapsed:.2?}"
        ),
    );
}

fn random_window(rng: &mut ChaCha8Rng) -> ErrorWindow {
    ErrorWindow::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    )
}

fn random_symmetric(rng: &mut ChaCha8Rng) -> CriticWeights {
    let m = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    CriticWeights((m + m.transpose()) * 0.5)
}

/// Relative difference between two gradients, measured against the larger norm.
fn grad_mismatch(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

#[test]
fn criterion_2_gradients() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let alpha = 1e-3;
    let h = 1e-6;
    let (mut critic_worst, mut actor_worst) = (0.0_f64, 0.0_f64);
    for _ in 0..1000 {
        let w = random_symmetric(&mut rng);
        let e = random_window(&mut rng);
        let u = rng.gen_range(-2.0..2.0);
        let target = rng.gen_range(-5.0..5.0);

        // critic: objective 1/2 (V(E,u;W) - target)^2 over the 10 free entries of symmetric W
        let stepped = critic_update(&w, &e, u, target, alpha);
        let objective = |w: &CriticWeights| 0.5 * (value(&e, u, w) - target).powi(2);
        let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
        for i in 0..4 {
            for j in i..4 {
                let mult = if i == j { 1.0 } else { 2.0 };
                analytic.push(mult * (w.0[(i, j)] - stepped.0[(i, j)]) / alpha);
                let bump = |d: f64| {
                    let mut m = w.0;
                    m[(i, j)] += d;
                    if i != j {
                        m[(j, i)] += d;
                    }
                    objective(&CriticWeights(m))
                };
                numeric.push((bump(h) - bump(-h)) / (2.0 * h));
            }
        }
        critic_worst = critic_worst.max(grad_mismatch(&analytic, &numeric));

        // actor: objective 1/2 (K E - u_tilde)^2
        let k = ActorWeights::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let u_tilde = rng.gen_range(-3.0..3.0);
        let u_hat = k.control(&e);
        let next = actor_update(&k, &e, u_hat, u_tilde, alpha);
        let objective = |k: &ActorWeights| 0.5 * (k.control(&e) - u_tilde).powi(2);
        let analytic: Vec<f64> = (0..3).map(|i| (k.0[i] - next.0[i]) / alpha).collect();
        let numeric: Vec<f64> = (0..3)
            .map(|i| {
                let mut plus = k;
                plus.0[i] += h;
                let mut minus = k;
                minus.0[i] -= h;
                (objective(&plus) - objective(&minus)) / (2.0 * h)
            })
            .collect();
        actor_worst = actor_worst.max(grad_mismatch(&analytic, &numeric));
    }
    let elapsed = start.elapsed();
    let pass = critic_worst <= 1e-4 && actor_worst <= 1e-4 && elapsed < Duration::from_secs(10);
    report(
        2,
        "update gradients",
        pass,
        &format!("1000 tuples, worst relative mismatch critic {critic_worst:.1e}, actor {actor_worst:.1e}, {elapsed:.2?}"),
    );
}

/// Shift-register fixture: `e0' = e0 + b u`, `e1' = e0`, `e2' = e1`.
const FIXTURE_B: f64 = 0.5;

fn fixture_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
}

fn fixture_step(e: &ErrorWindow, u: f64) -> ErrorWindow {
    ErrorWindow::new(e.e0 + FIXTURE_B * u, e.e0, e.e1)
}

/// Trains on independent random (E, u) draws until the learner stops.
fn train(
    step: impl Fn(&ErrorWindow, f64) -> ErrorWindow,
    scalar: bool,
    seed: u64,
) -> (AxisLearner, usize) {
    let config = LearnerConfig {
        alpha_a: 0.05,
        alpha_c: 0.02,
        conv_threshold: 1e-9,
        window_l: 20,
        max_iters: 1_000_000,
        init_scale: 0.1,
        rng_seed: seed,
        update_rule: UpdateRule::Gradient,
    };
    let cost = CostParams::isotropic(1.0, 1.0).unwrap();
    let mut learner = AxisLearner::new(config, cost, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let mut steps = 0;
    while !learner.is_stopped() && steps < 500_000 {
        let e = if scalar {
            ErrorWindow::new(rng.gen_range(-1.0..1.0), 0.0, 0.0)
        } else {
            ErrorWindow::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        };
        let u = rng.gen_range(-1.0..1.0);
        learner.step(&Transition {
            e,
            u,
            e_next: step(&e, u),
        });
        steps += 1;
    }
    (learner, steps)
}

#[test]
fn criterion_3_lqr_oracle() {
    let start = Instant::now();

    let oracle = riccati_oracle(
        &fixture_a(),
        &DVector::from_vec(vec![FIXTURE_B, 0.0, 0.0]),
        &DMatrix::identity(3, 3),
        1.0,
    )
    .unwrap();
    let (learner, steps) = train(fixture_step, false, 1);
    let learned = learner.actor().0;
    let scale = oracle.k.abs().max();
    // the control is -K E; zero oracle entries are judged against 2% of the largest gain
    let fixture_ok = (0..3).all(|i| {
        let reference = if oracle.k[i] == 0.0 {
            scale
        } else {
            oracle.k[i].abs()
        };
        (learned[i] + oracle.k[i]).abs() <= 0.02 * reference
    });

    let scalar = riccati_oracle(
        &DMatrix::from_element(1, 1, 1.0),
        &DVector::from_element(1, 1.0),
        &DMatrix::from_element(1, 1, 1.0),
        1.0,
    )
    .unwrap();
    let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (scalar_learner, scalar_steps) =
        train(|e, u| ErrorWindow::new(e.e0 + u, 0.0, 0.0), true, 2);
    let k0 = -scalar_learner.actor().0[0];
    let scalar_ok = rel(scalar.k[0], golden) < 1e-9 && rel(k0, golden) <= 0.02;

    let elapsed = start.elapsed();
    let pass = fixture_ok
        && scalar_ok
        && learner.is_stopped()
        && scalar_learner.is_stopped()
        && elapsed < Duration::from_secs(60);
    report(
        3,
        "LQR oracle equivalence",
        pass,
        &format!(
            "fixture K {:.5?} vs oracle {:.5?} after {steps} steps; scalar K {k0:.5} vs {golden:.5} after {scalar_steps} steps; {elapsed:.2?}",
            (-learned).as_slice(),
            oracle.k.as_slice()
        ),
    );
}

#[test]
fn criterion_4_monotone_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let samples: Vec<Transition> = (0..200)
        .map(|_| {
            let e = random_window(&mut rng);
            let u = rng.gen_range(-2.0..2.0);
            Transition {
                e,
                u,
                e_next: fixture_step(&e, u),
            }
        })
        .collect();
    let cost = CostParams::isotropic(1.0, 1.0).unwrap();
    let mut batch =
        BatchValueIteration::new(samples, cost, CriticWeights(Matrix4::identity() * 0.01)).unwrap();
    let probe = ErrorWindow::new(1.0, 0.5, -0.25);
    let mut values = vec![batch.probe_value(&probe)];
    for _ in 0..60 {
        batch.iterate().unwrap();
        values.push(batch.probe_value(&probe));
    }
    let worst_drop = values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = worst_drop <= 1e-9;
    report(
        4,
        "monotone value sequence",
        pass,
        &format!(
            "60 batch iterations, probe value {:.6} -> {:.6}, largest decrease {worst_drop:.1e}",
            values[0],
            values[values.len() - 1]
        ),
    );
}

fn distance_to_evader(record: &RunRecord, tick: usize, id: u32) -> f64 {
    let snap = &record.snapshots[tick];
    let pos = |role: Role, id: Option<u32>| {
        let v = snap
            .vessels
            .iter()
            .find(|v| v.role == role && id.is_none_or(|i| v.id == i))
            .unwrap();
        GeodeticPosition {
            lon: v.lon,
            lat: v.lat,
            radius: EARTH_RADIUS_M,
        }
    };
    geo::great_circle_distance(&pos(Role::Pursuer, Some(id)), &pos(Role::Evader, None))
}

#[test]
fn criterion_5_scenario_1() {
    let start = Instant::now();
    let config = bundled(1);
    let initial: Vec<f64> = config
        .pursuers
        .iter()
        .map(|p| geo::great_circle_distance(&p.vessel.pos, &config.evader.vessel.pos) / 1000.0)
        .collect();
    let record = run(&config).unwrap();
    let m = metrics(&record);
    let ticks: Vec<Option<u64>> = m.pursuers.iter().map(|p| p.capture_tick).collect();
    let all = ticks
        .iter()
        .all(|t| t.is_some_and(|t| t as f64 * config.dt <= 6.0 * 3600.0));
    let distances_ok = [556.0, 367.0, 289.0]
        .iter()
        .zip(&initial)
        .all(|(want, got)| (want - got).abs() < 1.0);
    let pinned = ticks == PINNED_SCENARIO_1_TICKS.map(Some);
    let elapsed = start.elapsed();
    let pass = all && distances_ok && pinned && elapsed < Duration::from_secs(120);
    report(
        5,
        "scenario 1 captures",
        pass,
        &format!(
            "initial km {initial:.1?}, capture ticks {ticks:?} (pinned {PINNED_SCENARIO_1_TICKS:?}), order {:?}, {elapsed:.2?}",
            m.capture_order
        ),
    );
}

// This engine's own capture ticks for pursuers 1, 2, 3 (264.7, 178.7 and 293.5 min).
const PINNED_SCENARIO_1_TICKS: [u64; 3] = [1588, 1072, 1761];

#[test]
fn criterion_6_scenario_2() {
    let config = bundled(2);
    let record = run(&config).unwrap();
    let m = metrics(&record);
    let p2_captured = m.pursuer(2).and_then(|p| p.capture_tick).is_some();
    let window = (1800.0 / config.dt).round() as usize;
    let last = record.snapshots.len() - 1;
    let mut worst = Vec::new();
    for setup in config
        .pursuers
        .iter()
        .filter(|p| matches!(p.mission, Mission::Surveil { .. }))
    {
        let Mission::Surveil { standoff } = setup.mission else {
            unreachable!()
        };
        let err = (last.saturating_sub(window)..=last)
            .map(|k| (distance_to_evader(&record, k, setup.vessel.id) - standoff).abs() / standoff)
            .fold(0.0_f64, f64::max);
        worst.push((setup.vessel.id, err));
    }
    let pass =
        p2_captured && worst.len() == 2 && worst.iter().all(|(_, e)| *e < 0.10) && last >= window;
    report(
        6,
        "scenario 2 intercept and standoff",
        pass,
        &format!(
            "pursuer 2 capture at {:?} s, worst standoff error over the final 30 min {:?}",
            m.pursuer(2).and_then(|p| p.capture_time_s),
            worst
                .iter()
                .map(|(id, e)| format!("vessel {id}: {:.2}%", e * 100.0))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_7_scenario_3() {
    let config = bundled(3);
    let record = run(&config).unwrap();
    let m = metrics(&record);
    let malfunction = record
        .timeline
        .iter()
        .find(|t| matches!(t.event, EventKind::Malfunction { vessel: 2 }))
        .map(|t| t.tick as usize);
    let switch = record
        .timeline
        .iter()
        .find(|t| {
            matches!(
                t.event,
                EventKind::SetMission {
                    vessel: 1,
                    mission: Mission::Intercept
                }
            )
        })
        .map(|t| t.tick as usize);
    let vessel = |k: usize, id: u32| {
        *record.snapshots[k]
            .vessels
            .iter()
            .find(|v| v.id == id)
            .unwrap()
    };

    let frozen = malfunction.is_some_and(|from| {
        let first = vessel(from, 2);
        first.speed == 0.0
            && (from..record.snapshots.len()).all(|k| {
                let v = vessel(k, 2);
                v.lon == first.lon && v.lat == first.lat
            })
    });
    let started_surveil = matches!(vessel(0, 1).mission, Some(Mission::Surveil { .. }));
    let switched = switch.is_some_and(|from| {
        (from..record.snapshots.len()).all(|k| vessel(k, 1).mission == Some(Mission::Intercept))
    });
    let capture = m.pursuer(1).and_then(|p| p.capture_tick);
    let captured_after = capture.zip(switch).is_some_and(|(c, s)| c as usize > s);
    let pass = frozen && started_surveil && switched && captured_after;
    report(
        7,
        "scenario 3 events",
        pass,
        &format!(
            "malfunction at tick {malfunction:?}, vessel 2 frozen: {frozen}; vessel 1 surveil -> intercept at tick {switch:?}: {switched}; vessel 1 capture tick {capture:?}"
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let mut detail = Vec::new();
    let mut pass = true;
    for n in 1..=3 {
        let config = bundled(n);
        let a = step_log(&run(&config).unwrap()).unwrap();
        let b = step_log(&run(&config).unwrap()).unwrap();
        pass &= a.as_bytes() == b.as_bytes();
        detail.push(format!(
            "scenario {n}: {} bytes {}",
            a.len(),
            if a == b { "identical" } else { "DIFFER" }
        ));
    }
    report(8, "determinism", pass, &detail.join(", "));
}
