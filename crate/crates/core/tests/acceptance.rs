//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oscsync::averaging::{find_rho, kappa, rho_coupling, AveragedModel, QuadratureConfig};
use oscsync::coupling_graph::{is_connected, CouplingFunction, DirectedGraph, Interconnection};
use oscsync::dynamics::{rotating_frame, vdp_damping, Network, StateVec};
use oscsync::geometry::{cone_angle, dist_to_a, dist_to_b, dist_to_r, in_open_semicircle, lyapunov_v};
use oscsync::harness::{bundled, omega_sweep, InitialSpec, Prepared, Scenario};
use oscsync::simulate::{compare_to_average, integrate, invariance_probe, IntegratorConfig, System, Trajectory};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn vdp_kappa(eps: f64, s: f64) -> f64 {
    eps * s * (s * s / 8.0 - 0.5)
}

/// The four-oscillator van der Pol array with node 4 as the only root.
fn rooted_vdp4() -> Scenario {
    Scenario::from_toml_str(bundled("vdp4_sync").unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [0.3, 1.0, 3.0] {
        let rho = find_rho(&vdp_damping(eps).unwrap(), &q()).unwrap();
        worst = worst.max((rho - 2.0).abs());
        // the closed form vanishes at the returned amplitude
        worst = worst.max(vdp_kappa(eps, rho).abs() / eps);
    }
    outcome(worst <= 1e-6, format!("max |rho - 2| = {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [0.3, 1.0, 3.0] {
        let d = vdp_damping(eps).unwrap();
        for s in [0.1, 0.5, 1.0, 2.0, 5.0] {
            worst = worst.max((kappa(&d, s, &q()).unwrap() - vdp_kappa(eps, s)).abs());
        }
    }
    for k in [0.5, 1.0, 3.0] {
        let g = CouplingFunction::linear(k).unwrap();
        for s in [0.1, 0.5, 1.0, 2.0, 5.0] {
            worst = worst.max((rho_coupling(&g, s, &q()).unwrap() - k * s / 2.0).abs());
        }
    }
    let cubic = rho_coupling(&CouplingFunction::cubic(1.0).unwrap(), 1.0, &q()).unwrap();
    worst = worst.max((cubic - 0.375).abs());
    outcome(worst <= 1e-8, format!("max closed-form gap = {worst:.2e}"))
}

fn averaged_runs(starts: Vec<StateVec>, model: &AveragedModel, horizon: f64) -> Vec<Trajectory> {
    use rayon::prelude::*;
    let cfg = IntegratorConfig {
        step: 1e-2,
        horizon,
        record_stride: 1,
        ..Default::default()
    };
    starts
        .par_iter()
        .map(|x0| integrate(System::Averaged(model), x0, &cfg, model.rho()).unwrap())
        .collect()
}

fn criterion_3() -> Outcome {
    let net = rooted_vdp4().build_network(None).unwrap();
    let model = AveragedModel::new(&net).unwrap();
    let rho = model.rho().unwrap();
    let spec = InitialSpec::Anywhere { radius: 10.0, seed: 0 };
    let starts: Vec<StateVec> = (0..20).map(|k| spec.sample(4, Some(k)).unwrap()).collect();
    let mut worst_b: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    let mut ok = true;
    for traj in averaged_runs(starts, &model, 200.0) {
        ok &= !traj.diverged;
        worst_b = worst_b.max(dist_to_b(traj.last_state(), rho));
        for w in traj.states.windows(2) {
            let v0 = lyapunov_v(&w[0], rho);
            if v0 > 0.0 {
                worst_rise = worst_rise.max(lyapunov_v(&w[1], rho) - v0);
            }
        }
    }
    ok &= worst_b <= 1e-3 && worst_rise <= 1e-8;
    outcome(ok, format!("max dist_B(T) = {worst_b:.2e}, max per-step V increase = {worst_rise:.2e}"))
}

fn criterion_4() -> Outcome {
    let net = rooted_vdp4().build_network(None).unwrap();
    let model = AveragedModel::new(&net).unwrap();
    let rho = model.rho().unwrap();
    let starts: Vec<StateVec> = (0..20u64)
        .map(|k| {
            InitialSpec::Annulus {
                r_lo: 0.5,
                r_hi: 5.0,
                arc_center: 0.7 * k as f64,
                arc_width: 0.9 * PI,
                seed: k,
            }
            .sample(4, None)
            .unwrap()
        })
        .collect();
    let mut worst_r: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    let mut worst_wedge: f64 = 0.0;
    let mut ok = true;
    for traj in averaged_runs(starts, &model, 300.0) {
        let probe = invariance_probe(&traj, rho, 1e-6);
        ok &= !traj.diverged && probe.passed();
        worst_r = worst_r.max(dist_to_r(traj.last_state(), rho));
        worst_angle = worst_angle.max(probe.max_angle_increase);
        worst_wedge = worst_wedge.max(probe.max_wedge_violation);
    }
    ok &= worst_r <= 1e-3;
    outcome(
        ok,
        format!("max dist_R(T) = {worst_r:.2e}, cone angle rise = {worst_angle:.2e}, wedge excursion = {worst_wedge:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let s = Scenario::from_toml_str(bundled("harmonic_pair_closeness").unwrap()).unwrap();
    let net = s.build_network(None).unwrap();
    let model = AveragedModel::new(&net).unwrap();
    let x0 = s.initial.sample(2, None).unwrap();
    let dev: Vec<f64> = [50.0, 200.0, 800.0]
        .iter()
        .map(|&w| {
            let d = compare_to_average(&x0, &model, w, &s.integrator).unwrap();
            assert!(!d.diverged);
            d.max_deviation
        })
        .collect();
    let ok = dev[1] <= 0.05 && dev[2] <= dev[1] && dev[1] <= dev[0];
    outcome(
        ok,
        format!("deviation at omega 50/200/800 = {:.3e} / {:.3e} / {:.3e}", dev[0], dev[1], dev[2]),
    )
}

fn criterion_6(kept: &mut Vec<(Trajectory, f64)>) -> Outcome {
    let p = Prepared::new(rooted_vdp4(), None).unwrap();
    let rows = omega_sweep(&p, &[10.0, 30.0, 100.0]).unwrap();
    let r: Vec<f64> = rows.iter().map(|r| r.final_residual).collect();
    let ok = rows.iter().all(|r| !r.diverged) && r[2] <= 0.05 && r[2] <= r[0];
    let net = p.network.with_omega(100.0).unwrap();
    kept.push((integrate(System::Original(&net), &p.x0, &p.scenario.integrator, p.rho()).unwrap(), 100.0));
    outcome(
        ok,
        format!("final dist_R at omega 10/30/100 = {:.3e} / {:.3e} / {:.3e}", r[0], r[1], r[2]),
    )
}

fn criterion_7(kept: &mut Vec<(Trajectory, f64)>) -> Outcome {
    let lin = || CouplingFunction::linear(1.0).unwrap();
    // 1 <- 2, 2 <- 3, 2 <- 1: node 3 is the only root
    let ic = Interconnection::from_entries(3, [(0, 1, lin()), (1, 2, lin()), (1, 0, lin())]).unwrap();
    let net = Network::harmonic(100.0, ic).unwrap();
    let x0 = StateVec::from_blocks(&[
        [1.0, 0.0],
        [2.0 * (TAU / 3.0).cos(), 2.0 * (TAU / 3.0).sin()],
        [1.5 * (2.0 * TAU / 3.0).cos(), 1.5 * (2.0 * TAU / 3.0).sin()],
    ])
    .unwrap();
    let pts: Vec<[f64; 2]> = x0.blocks().collect();
    let straddles = !in_open_semicircle(&pts) && cone_angle(&x0).is_none();
    let cfg = IntegratorConfig {
        horizon: 60.0,
        ..Default::default()
    };
    let xi = integrate(System::Original(&net), &x0, &cfg, None).unwrap();
    let model = AveragedModel::new(&net).unwrap();
    let eta = integrate(System::Averaged(&model), &x0, &cfg, None).unwrap();
    let a_orig = dist_to_a(xi.last_state());
    let a_avg = dist_to_a(eta.last_state());
    let ok = straddles && !xi.diverged && !eta.diverged && a_orig <= 0.05 && a_avg <= 1e-3;
    kept.push((xi, 100.0));
    outcome(
        ok,
        format!("initial span > pi: {straddles}, final dist_A original = {a_orig:.2e}, averaged = {a_avg:.2e}"),
    )
}

fn criterion_8(kept: &[(Trajectory, f64)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for (traj, omega) in kept {
        for (t, xi) in traj.times.iter().zip(&traj.states) {
            let x = rotating_frame(xi, *t, *omega);
            samples += 1;
            for i in 0..xi.m() {
                for j in i + 1..xi.m() {
                    let (a, b) = (xi.block(i), xi.block(j));
                    let (c, d) = (x.block(i), x.block(j));
                    let gap = (a[0] - b[0]).hypot(a[1] - b[1]) - (c[0] - d[0]).hypot(c[1] - d[1]);
                    worst = worst.max(gap.abs());
                }
            }
        }
    }
    outcome(samples > 0 && worst <= 1e-9, format!("{samples} samples, max pairwise gap = {worst:.2e}"))
}

/// Some node reachable from every other along `i -> j` edges, by transitive closure.
fn closure_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for &(i, j) in edges {
        reach[i][j] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|r| (0..n).all(|i| reach[i][r]))
}

fn criterion_9() -> Outcome {
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    let mut connected_count = 0usize;
    for n in 1..=4usize {
        let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << slots.len()) {
            let edges: Vec<(usize, usize)> =
                slots.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, e)| *e).collect();
            let got = is_connected(&DirectedGraph::new(n, edges.clone()).unwrap());
            let want = closure_connected(n, &edges);
            checked += 1;
            connected_count += want as usize;
            disagreements += (got != want) as usize;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let n = 8;
        let p: f64 = rng.gen_range(0.05..0.4);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .filter(|_| rng.gen::<f64>() < p)
            .collect();
        let got = is_connected(&DirectedGraph::new(n, edges.clone()).unwrap());
        let want = closure_connected(n, &edges);
        checked += 1;
        connected_count += want as usize;
        disagreements += (got != want) as usize;
    }
    outcome(
        disagreements == 0,
        format!("{checked} digraphs ({connected_count} connected), {disagreements} disagreements"),
    )
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Origin inside the closed convex hull: inside some triangle of the points.
fn hull_contains_origin(p: &[[f64; 2]]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let s1 = cross(p[i], p[j]);
                let s2 = cross(p[j], p[k]);
                let s3 = cross(p[k], p[i]);
                if (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0) {
                    return true;
                }
            }
        }
    }
    false
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let directions = 10_000;
    let mut worst_excess: f64 = 0.0;
    let mut below = 0usize;
    for _ in 0..200 {
        let m = rng.gen_range(1..=6);
        let rho = rng.gen_range(0.5..3.0);
        let eta: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let exact = dist_to_r(&eta, rho);
        let mut brute = f64::INFINITY;
        for k in 0..directions {
            let (s, c) = (TAU * k as f64 / directions as f64).sin_cos();
            let d2: f64 = eta.chunks(2).map(|b| (b[0] - rho * c).powi(2) + (b[1] - rho * s).powi(2)).sum();
            brute = brute.min(d2.sqrt());
        }
        let sum = eta.chunks(2).fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
        let dtheta = TAU / directions as f64;
        let bound = (exact * exact + rho * sum[0].hypot(sum[1]) * dtheta * dtheta / 4.0).sqrt() - exact;
        if brute < exact - 1e-12 {
            below += 1;
        }
        worst_excess = worst_excess.max((brute - exact) - bound);
    }

    let mut disagreements = 0usize;
    let mut inside = 0usize;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=8);
        let center = rng.gen_range(-PI..PI);
        let spread = rng.gen_range(0.1..TAU);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let a = center + spread * (rng.gen::<f64>() - 0.5);
                let r = rng.gen_range(0.1..5.0);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let hull = hull_contains_origin(&pts);
        inside += hull as usize;
        // open semicircle exactly when the hull misses the origin
        disagreements += (in_open_semicircle(&pts) == hull) as usize;
    }
    let ok = below == 0 && worst_excess <= 0.0 && disagreements == 0;
    outcome(
        ok,
        format!(
            "dist_R brute force: {below} below closed form, worst excess over bound {worst_excess:.2e}; \
             semicircle: 10000 sets ({inside} hull-contains-origin), {disagreements} disagreements"
        ),
    )
}

fn main() {
    let mut kept = Vec::new();
    let limits = [1.0, 1.0, 30.0, 60.0, 30.0, 120.0, 30.0, f64::INFINITY, 10.0, f64::INFINITY];
    let mut all = true;
    for n in 1..=10usize {
        let start = Instant::now();
        let o = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(&mut kept),
            7 => criterion_7(&mut kept),
            8 => criterion_8(&kept),
            9 => criterion_9(),
            _ => criterion_10(),
        };
        let took = start.elapsed();
        let in_time = took.as_secs_f64() < limits[n - 1];
        let passed = o.passed && in_time;
        all &= passed;
        println!(
            "criterion {n:>2}: {} ({:.2} s{}) {}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if in_time { "" } else { ", over time budget" },
            o.detail
        );
    }
    if !all {
        std::process::exit(1);
    }
}
