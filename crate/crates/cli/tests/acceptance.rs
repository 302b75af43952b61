//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4, Vector6};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use omni_traj::attitude::{angular_acceleration, eval_attitude, quat_from_sigma, rotation_from_quat, vee};
use omni_traj::elimination::DecisionVars;
use omni_traj::flatness::{sample_at, state_at, VehicleParams};
use omni_traj::geometry::{Corridor, Polyhedron, VehicleShape};
use omni_traj::penalty::PenaltyConfig;
use omni_traj::problem::{objective_flat, optimize, Endpoint, ProblemSpec};
use omni_traj::solver::{minimize, SolverConfig, Status, TraceEntry};
use omni_traj::spline::{solve_coefficients, BoundaryCondition, Trajectory, DIM};
use omni_traj_cli::bench::{bench_scaling, bench_spec};
use omni_traj_cli::config::RunConfig;
use omni_traj_cli::fixture::{make_fixture, FixtureKind, FixtureParams};
use omni_traj_cli::run::{run, RunOptions, PROFILE_FILE, TRAJECTORY_FILE};

type Outcome = Result<String, String>;

fn rand3(rng: &mut impl Rng, lim: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(-lim..lim))
}

fn rand6(rng: &mut impl Rng, lim: f64) -> Vector6<f64> {
    Vector6::from_fn(|_, _| rng.gen_range(-lim..lim))
}

/// Chain of overlapping random boxes along +x with `m` pieces.
fn random_box_problem(rng: &mut impl Rng, s: usize, m: usize) -> ProblemSpec {
    let ppp = if m % 2 == 0 && rng.gen_bool(0.5) { 2 } else { 1 };
    let mut polys = Vec::new();
    let mut x = 0.0;
    for _ in 0..m / ppp {
        let len = rng.gen_range(0.8..1.6);
        let lo = Vector3::new(x - 0.3, rng.gen_range(-1.2..-0.5), rng.gen_range(-1.0..-0.4));
        let hi = Vector3::new(x + len, rng.gen_range(0.5..1.2), rng.gen_range(0.4..1.0));
        polys.push(Polyhedron::aabb(lo, hi).unwrap());
        x += len;
    }
    let mut rot = || nalgebra::Rotation3::new(rand3(rng, 1.0) * 0.4).into_inner();
    let start = Endpoint { position: Vector3::zeros(), rotation: rot() };
    let end = Endpoint { position: Vector3::new(x - 0.2, 0.1, 0.0), rotation: rot() };
    ProblemSpec::new(
        Corridor::with_pieces_per_polyhedron(polys, ppp),
        VehicleShape::cuboid(0.6, 0.5, 0.3).unwrap(),
        &start,
        &end,
        s,
        PenaltyConfig::default(),
        VehicleParams::default(),
    )
    .unwrap()
}

fn random_vars(rng: &mut impl Rng, spec: &ProblemSpec) -> DecisionVars {
    let mut v = spec.initial_guess();
    v.xi.iter_mut().for_each(|x| *x = rng.gen_range(-1.5..1.5));
    v.q_sigma.iter_mut().for_each(|q| *q += rand3(rng, 0.3));
    v.tau.iter_mut().for_each(|t| *t += rng.gen_range(-0.3..0.3));
    v
}

/// The random instances shared by criteria 1 and 3.
fn random_instances() -> Vec<(ProblemSpec, Vec<f64>)> {
    let mut rng = StdRng::seed_from_u64(2024);
    (0..100)
        .map(|i| {
            let s = 3 + i % 2;
            let m = 2 + (i / 2) % 7;
            let spec = random_box_problem(&mut rng, s, m);
            let x = random_vars(&mut rng, &spec).to_flat();
            (spec, x)
        })
        .collect()
}

fn gradient_keystone(instances: &[(ProblemSpec, Vec<f64>)]) -> Outcome {
    let t0 = Instant::now();
    let h = 1e-6;
    let (mut coords, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    let mut worst_5pt = 0.0f64;
    for (spec, x) in instances {
        let (_, g) = objective_flat(x, spec).unwrap();
        for k in 0..x.len() {
            let f = |d: f64| {
                let mut y = x.clone();
                y[k] += d;
                objective_flat(&y, spec).unwrap().0
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let err = (g[k] - fd).abs();
            let ok = if g[k].abs() < 1e-8 {
                err <= 1e-5
            } else {
                let rel = err / g[k].abs().max(fd.abs());
                worst = worst.max(rel);
                rel <= 1e-5
            };
            coords += 1;
            bad += usize::from(!ok);
            if !ok {
                let hh = 1e-3;
                let fd5 = (f(-2.0 * hh) - 8.0 * f(-hh) + 8.0 * f(hh) - f(2.0 * hh)) / (12.0 * hh);
                worst_5pt = worst_5pt.max((g[k] - fd5).abs() / g[k].abs().max(fd5.abs()).max(1e-8));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "{} problems, {coords} coordinates, {bad} outside tolerance, worst rel {worst:.2e}, {secs:.1} s \
         (failing coordinates against 5-point h=1e-3: worst rel {worst_5pt:.1e})",
        instances.len()
    );
    if bad == 0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fact(n: usize) -> f64 {
    (1..=n).fold(1.0, |p, k| p * k as f64)
}

fn mono(a: usize, k: usize, t: f64) -> f64 {
    if a < k {
        0.0
    } else {
        fact(a) / fact(a - k) * t.powi((a - k) as i32)
    }
}

/// Dense KKT solution of min Σ∫(z⁽ˢ⁾)² with boundary stacks, waypoints and
/// only C^{s−1} continuity imposed.
fn qp_oracle(s: usize, wps: &[Vector6<f64>], t: &[f64], bc: &BoundaryCondition) -> Vec<f64> {
    let m = t.len();
    let n2s = 2 * s;
    let nv = m * n2s;
    let mut q = DMatrix::zeros(nv, nv);
    for (i, &ti) in t.iter().enumerate() {
        for a in s..n2s {
            for b in s..n2s {
                let p = (a + b - 2 * s + 1) as f64;
                q[(i * n2s + a, i * n2s + b)] = fact(a) / fact(a - s) * fact(b) / fact(b - s) * ti.powf(p) / p;
            }
        }
    }
    let mut rows: Vec<(Vec<(usize, f64)>, Vector6<f64>)> = Vec::new();
    let last = (m - 1) * n2s;
    for k in 0..s {
        rows.push(((0..n2s).map(|a| (a, mono(a, k, 0.0))).collect(), bc.start[k]));
        rows.push(((0..n2s).map(|a| (last + a, mono(a, k, t[m - 1]))).collect(), bc.end[k]));
    }
    for i in 0..m - 1 {
        rows.push(((0..n2s).map(|a| (i * n2s + a, mono(a, 0, t[i]))).collect(), wps[i]));
        for k in 0..s {
            let mut e: Vec<(usize, f64)> = (0..n2s).map(|a| (i * n2s + a, mono(a, k, t[i]))).collect();
            e.extend((0..n2s).map(|a| ((i + 1) * n2s + a, -mono(a, k, 0.0))));
            rows.push((e, Vector6::zeros()));
        }
    }
    let nc = rows.len();
    let mut kkt = DMatrix::zeros(nv + nc, nv + nc);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&(&q * 2.0));
    for (r, (e, _)) in rows.iter().enumerate() {
        for &(c, v) in e {
            kkt[(nv + r, c)] += v;
            kkt[(c, nv + r)] += v;
        }
    }
    let lu = kkt.lu();
    let mut out = vec![0.0; nv * DIM];
    for d in 0..DIM {
        let rhs = DVector::from_fn(nv + nc, |r, _| if r < nv { 0.0 } else { rows[r - nv].1[d] });
        let x = lu.solve(&rhs).unwrap();
        for v in 0..nv {
            out[v * DIM + d] = x[v];
        }
    }
    out
}

fn minco_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let (mut cases, mut worst) = (0, 0.0f64);
    for s in [2, 3] {
        for m in 1..=4 {
            for _ in 0..10 {
                let wps: Vec<_> = (1..m).map(|_| rand6(&mut rng, 2.0)).collect();
                let t: Vec<f64> = (0..m).map(|_| rng.gen_range(0.4..2.0)).collect();
                let bc = BoundaryCondition {
                    start: (0..s).map(|_| rand6(&mut rng, 1.0)).collect(),
                    end: (0..s).map(|_| rand6(&mut rng, 1.0)).collect(),
                };
                let traj = solve_coefficients(s, &wps, &t, &bc).map_err(|e| e.to_string())?;
                let oracle = qp_oracle(s, &wps, &t, &bc);
                for (a, b) in traj.coeffs().iter().zip(&oracle) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    let detail = format!("{cases} instances, s in {{2,3}}, M <= 4, worst coefficient difference {worst:.1e}");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn boundary_and_continuity(instances: &[(ProblemSpec, Vec<f64>)]) -> Outcome {
    let (mut worst_bc, mut worst_c) = (0.0f64, 0.0f64);
    for (spec, x) in instances {
        let traj = spec
            .trajectory(&DecisionVars::from_flat(spec.layout(), x))
            .map_err(|e| e.to_string())?;
        let bc = spec.boundary();
        let (s, m) = (traj.order(), traj.num_pieces());
        let t = traj.durations();
        for k in 0..s {
            worst_bc = worst_bc.max((traj.eval_piece(0, 0.0, k) - bc.start[k]).amax());
            worst_bc = worst_bc.max((traj.eval_piece(m - 1, t[m - 1], k) - bc.end[k]).amax());
        }
        for i in 0..m - 1 {
            for k in 0..=2 * s - 2 {
                let l = traj.eval_piece(i, t[i], k);
                let r = traj.eval_piece(i + 1, 0.0, k);
                worst_c = worst_c.max((l - r).amax() / l.amax().max(1.0));
            }
        }
    }
    let detail = format!(
        "{} instances, worst boundary error {worst_bc:.1e}, worst scaled C^(2s-2) jump {worst_c:.1e}",
        instances.len()
    );
    if worst_bc <= 1e-8 && worst_c <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn attitude_chain() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let (mut unit, mut ortho, mut g_err, mut h_err, mut w_err, mut wd_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..500 {
        let s = rand3(&mut rng, 3.0);
        let q = quat_from_sigma(&s);
        unit = unit.max((q.norm() - 1.0).abs());
        let r = rotation_from_quat(&q).map_err(|e| e.to_string())?;
        ortho = ortho.max((r * r.transpose() - Matrix3::identity()).amax());
        let e = eval_attitude(&s);
        for m in 0..3 {
            let (mut sp, mut sm) = (s, s);
            sp[m] += h;
            sm[m] -= h;
            let fd: Vector4<f64> = (quat_from_sigma(&sp) - quat_from_sigma(&sm)) / (2.0 * h);
            let (gp, gm) = (eval_attitude(&sp).g, eval_attitude(&sm).g);
            for alpha in 0..4 {
                g_err = g_err.max(rel(e.g[(m, alpha)], fd[alpha]));
                for b in 0..3 {
                    h_err = h_err.max(rel(e.h[alpha][(b, m)], (gp[(b, alpha)] - gm[(b, alpha)]) / (2.0 * h)));
                }
            }
        }
        // Quadratic σ(t) through this point.
        let (a1, a2) = (rand3(&mut rng, 1.0), rand3(&mut rng, 1.0));
        let curve = |t: f64| (s + a1 * t + a2 * t * t, a1 + a2 * (2.0 * t));
        let omega_at = |t: f64| {
            let (s, sd) = curve(t);
            eval_attitude(&s).angular_velocity(&sd)
        };
        let omega = e.angular_velocity(&a1);
        let rdot = (eval_attitude(&curve(h).0).rot - eval_attitude(&curve(-h).0).rot) / (2.0 * h);
        w_err = w_err.max((omega - vee(&(rdot * e.rot.transpose()))).norm());
        let wd = angular_acceleration(&s, &a1, &(a2 * 2.0));
        let wd_fd = (omega_at(h) - omega_at(-h)) / (2.0 * h);
        wd_err = wd_err.max((wd - wd_fd).norm() / wd.norm().max(1.0));
    }
    let detail = format!(
        "|Q|-1 {unit:.1e}, R orthonormality {ortho:.1e}, G rel {g_err:.1e}, H rel {h_err:.1e}, \
         omega vs vee(dR R^T) {w_err:.1e}, omega_dot rel {wd_err:.1e}"
    );
    if unit <= 1e-12 && ortho <= 1e-10 && g_err <= 1e-5 && h_err <= 1e-5 && w_err <= 1e-6 && wd_err <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slot_fixture(histories: &mut Vec<(String, Vec<TraceEntry>)>) -> Outcome {
    let fixture = make_fixture(FixtureKind::Slot, &FixtureParams::default(), 0).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fixture.write(dir.path()).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&dir.path().join("config.toml")).map_err(|e| e.to_string())?;
    // Reference settings, stated explicitly rather than inherited.
    cfg.s = 4;
    cfg.kappa = 16;
    (cfg.limits.v_max, cfg.limits.a_max, cfg.limits.omega_max) = (0.8, 5.0, 0.8);
    (cfg.weights.w_v, cfg.weights.w_a, cfg.weights.w_omega, cfg.weights.w_c) = (1e4, 1e4, 1e4, 9e4);
    cfg.shape.cuboid = Some([1.0, 1.0, 0.35]);
    cfg.output.oversample = 4;
    let t0 = Instant::now();
    let out = run(&cfg, &RunOptions::default(), &dir.path().join("out"));
    let secs = t0.elapsed().as_secs_f64();
    let o = out.map_err(|e| e.to_string())?;
    histories.push(("slot".into(), o.optimized.history.clone()));
    let m = o.violations.maxima;
    let tilt = o
        .profile
        .iter()
        .map(|s| s.state.rot[(2, 2)].abs())
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "{:?} in {} iterations, speed {:.4} m/s, |omega| {:.4} rad/s, accel {:.4} m/s^2, penetration {:.2e} m, \
         min |R33| {tilt:.3}, {secs:.2} s",
        o.optimized.status, o.optimized.iterations, m.speed, m.omega, m.acceleration, m.penetration
    );
    let ok = o.optimized.status == Status::Converged
        && m.speed <= 0.816
        && m.omega <= 0.816
        && m.acceleration <= 5.10
        && m.penetration <= 1e-3
        && tilt <= 0.5
        && secs < 5.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scaling() -> Outcome {
    let table = bench_scaling(&RunConfig::default(), &[4, 8, 16, 32, 64], 3).map_err(|e| e.to_string())?;
    let per: Vec<f64> = table.rows.iter().map(|r| r.t_opt_per_piece_s).collect();
    let spread = per.iter().copied().fold(0.0, f64::max) / per.iter().copied().fold(f64::INFINITY, f64::min);
    let r2 = table.r_squared.unwrap_or(0.0);
    let cells: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("M={} {:.1} ms", r.pieces, r.median_t_opt_s * 1e3))
        .collect();
    let detail = format!("R^2 {r2:.4}, t_opt/M spread {spread:.2}x ({})", cells.join(", "));
    if r2 > 0.9 && spread < 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn flatness() -> Outcome {
    let params = VehicleParams::default();
    let p = Vector6::new(0.3, -0.2, 1.5, 0.0, 0.0, 0.0);
    let hover = solve_coefficients(4, &[p], &[1.0, 1.5], &BoundaryCondition::rest_to_rest(4, p, p))
        .map_err(|e| e.to_string())?;
    let mut exact = true;
    for k in 0..=10 {
        let s = sample_at(&hover, &params, 2.5 * k as f64 / 10.0).map_err(|e| e.to_string())?;
        exact &= s.input.f_b == Vector3::new(0.0, 0.0, 9.8 * params.mass) && s.input.tau_b == Vector3::zeros();
    }
    let mut rng = StdRng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let wps: Vec<_> = (0..3).map(|_| rand6(&mut rng, 1.0)).collect();
        let t: Vec<f64> = (0..4).map(|_| rng.gen_range(0.8..1.5)).collect();
        let bc = BoundaryCondition::rest_to_rest(4, rand6(&mut rng, 1.0), rand6(&mut rng, 1.0));
        let traj: Trajectory = solve_coefficients(4, &wps, &t, &bc).map_err(|e| e.to_string())?;
        let momentum = |t: f64| {
            let s = state_at(&traj, t).unwrap();
            s.rot * params.inertia * s.rot.transpose() * s.omega
        };
        for k in 1..20 {
            let t = traj.total_duration() * k as f64 / 20.0;
            let smp = sample_at(&traj, &params, t).map_err(|e| e.to_string())?;
            let fd = (momentum(t + h) - momentum(t - h)) / (2.0 * h);
            let an = smp.state.rot * smp.input.tau_b;
            worst = worst.max((an - fd).norm() / an.norm().max(fd.norm()).max(1e-3));
        }
    }
    let detail = format!("hover wrench exact: {exact}, momentum-rate worst rel {worst:.1e}");
    if exact && worst <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solver(histories: &mut Vec<(String, Vec<TraceEntry>)>) -> Outcome {
    let rosen = |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        (
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
            vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
        )
    };
    let cfg = SolverConfig { grad_tol: 1e-10, ..Default::default() };
    let r = minimize(rosen, &[-1.2, 1.0], &cfg).map_err(|e| e.to_string())?;
    let dist = ((r.x[0] - 1.0).powi(2) + (r.x[1] - 1.0).powi(2)).sqrt();
    histories.push(("rosenbrock".into(), r.trace.clone()));
    for m in [4, 16, 64] {
        let spec = bench_spec(&RunConfig::default(), m).map_err(|e| e.to_string())?;
        let o = optimize(&spec, &spec.initial_guess(), &SolverConfig::default()).map_err(|e| e.to_string())?;
        histories.push((format!("straight M={m}"), o.history));
    }
    let nonmono: Vec<&str> = histories
        .iter()
        .filter(|(_, h)| h.windows(2).any(|w| w[1].value > w[0].value))
        .map(|(n, _)| n.as_str())
        .collect();
    let detail = format!(
        "Rosenbrock {} iterations, distance to (1,1) {dist:.1e}; monotone histories {}/{} {:?}",
        r.iterations,
        histories.len() - nonmono.len(),
        histories.len(),
        nonmono
    );
    if dist <= 1e-6 && r.iterations <= 200 && nonmono.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_binary(config: &Path, out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_omni-traj"))
        .args(["run", "--seed", "7", "--threads", &threads.to_string(), "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let params = FixtureParams { boxes: 3, length: 7.0, ..Default::default() };
    make_fixture(FixtureKind::Zigzag, &params, 7)
        .and_then(|f| f.write(dir.path()))
        .map_err(|e| e.to_string())?;
    let config = dir.path().join("config.toml");
    let runs = [("a", 1), ("b", 1), ("c", 4), ("d", 4)];
    for (name, threads) in runs {
        run_binary(&config, &dir.path().join(name), threads)?;
    }
    let read = |run: &str, file: &str| std::fs::read(dir.path().join(run).join(file)).unwrap();
    let mut same = true;
    for file in [TRAJECTORY_FILE, PROFILE_FILE] {
        let first = read("a", file);
        same &= runs.iter().all(|(name, _)| read(name, file) == first);
    }
    let detail = format!("{} runs (threads 1, 1, 4, 4): trajectory and profile byte-identical: {same}", runs.len());
    if same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let instances = random_instances();
    let mut histories = Vec::new();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {n}. {name}: {detail}");
    };
    report(1, "gradient keystone", gradient_keystone(&instances));
    report(2, "MINCO oracle equivalence", minco_oracle());
    report(3, "boundary and continuity", boundary_and_continuity(&instances));
    report(4, "attitude chain", attitude_chain());
    report(5, "slot fixture with reference settings", slot_fixture(&mut histories));
    report(6, "scaling", scaling());
    report(7, "flatness", flatness());
    report(8, "solver", solver(&mut histories));
    report(9, "determinism", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
