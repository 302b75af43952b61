//! The `run` pipeline: load, solve, export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use omni_traj::flatness::{sample_profile, FlatSample};
use omni_traj::geometry::Corridor;
use omni_traj::penalty::{max_violation_profile, ViolationMaxima};
use omni_traj::problem::{optimize, Optimized, ProblemSpec};
use omni_traj::solver::Status;

use crate::config::{ConfigError, RunConfig};
use crate::plot::{profile_svg, Series};

pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const PROFILE_FILE: &str = "profile.csv";
pub const VIOLATIONS_FILE: &str = "violations.json";
pub const PLOT_FILE: &str = "profile.svg";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corridor invalid: {0}")]
    Corridor(String),
    #[error("optimization failed: {0}")]
    Solve(String),
    /// Outputs were written from the best iterate found.
    #[error("solver stopped without converging ({status:?} after {iterations} iterations)")]
    NotConverged { status: Status, iterations: usize },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 1,
            RunError::Corridor(_) => 2,
            RunError::Solve(_) | RunError::NotConverged { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the corridor path from the config.
    pub corridor: Option<PathBuf>,
    /// Recorded in the summary; replaces the config seed.
    pub seed: Option<u64>,
    /// Penalty sampling threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    /// Full objective at the returned iterate.
    pub objective: f64,
    /// Control effort `J`.
    pub smoothness: f64,
    /// `‖T‖₁`, s.
    pub total_time: f64,
    pub pieces: usize,
    pub iterations: usize,
    pub status: String,
    pub t_opt_s: f64,
    pub t_opt_per_piece_s: f64,
    pub wall_time_s: f64,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    pub oversample: usize,
    pub samples_per_piece: usize,
    pub maxima: Maxima,
    /// Amount by which each maximum exceeds its limit, floored at zero.
    pub violations: Maxima,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Maxima {
    pub speed: f64,
    pub acceleration: f64,
    pub omega: f64,
    pub penetration: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub optimized: Optimized,
    pub summary: Summary,
    pub violations: ViolationReport,
    pub profile: Vec<FlatSample>,
}

pub fn load_corridor(path: &Path, pieces_per_polyhedron: usize) -> Result<Corridor, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let corridor = Corridor::from_json_str(&text, pieces_per_polyhedron).map_err(|e| match e {
        omni_traj::geometry::CorridorFileError::Parse(e) => {
            RunError::Config(ConfigError::Invalid(format!("corridor file {}: {e}", path.display())))
        }
        e => RunError::Corridor(e.to_string()),
    })?;
    let report = corridor.validate();
    if !report.pass {
        let mut msg = String::new();
        let pairs = report.failing_pairs();
        if !pairs.is_empty() {
            let _ = write!(msg, "polyhedra pairs without interior overlap: {pairs:?}");
        }
        if let Some(e) = report.assignment_error {
            let _ = write!(msg, "{}{e}", if msg.is_empty() { "" } else { "; " });
        }
        if msg.is_empty() {
            msg.push_str("corridor is empty");
        }
        return Err(RunError::Corridor(msg));
    }
    Ok(corridor)
}

/// Builds the problem described by `cfg`, solves it and writes every output
/// into `out`. A run that does not converge still writes its outputs and
/// then reports [`RunError::NotConverged`].
pub fn run(cfg: &RunConfig, opts: &RunOptions, out: &Path) -> Result<RunOutcome, RunError> {
    let wall = Instant::now();
    cfg.validate()?;
    let corridor_path = opts
        .corridor
        .clone()
        .or_else(|| cfg.corridor.clone())
        .ok_or_else(|| ConfigError::Invalid("no corridor file given".into()))?;
    let corridor = load_corridor(&corridor_path, cfg.pieces_per_polyhedron)?;
    let shape = cfg.vehicle_shape()?;
    let vehicle = cfg.vehicle_params()?;
    let (start, end) = cfg.endpoints()?;
    let spec = ProblemSpec::new(corridor, shape, &start, &end, cfg.s, cfg.penalty(), vehicle)
        .map_err(|e| RunError::Corridor(e.to_string()))?;

    let solve = || {
        let t0 = Instant::now();
        let r = optimize(&spec, &spec.initial_guess(), &cfg.solver_config());
        (r, t0.elapsed().as_secs_f64())
    };
    let (result, t_opt) = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("cannot start {n} threads: {e}")))?
            .install(solve),
        None => solve(),
    };
    let optimized = result.map_err(|e| RunError::Solve(e.to_string()))?;
    info!("t_opt = {t_opt:.4} s over {} pieces", spec.num_pieces());

    let traj = &optimized.trajectory;
    let profile = sample_profile(traj, spec.vehicle(), cfg.output.profile_dt)
        .map_err(|e| RunError::Solve(e.to_string()))?;
    let m = max_violation_profile(traj, spec.corridor(), spec.shape(), spec.penalty(), cfg.output.oversample)
        .map_err(|e| RunError::Solve(e.to_string()))?;
    let violations = violation_report(&m, cfg);

    let pieces = spec.num_pieces();
    let summary = Summary {
        objective: optimized.eval.value,
        smoothness: optimized.eval.smoothness,
        total_time: optimized.eval.total_time,
        pieces,
        iterations: optimized.iterations,
        status: format!("{:?}", optimized.status),
        t_opt_s: t_opt,
        t_opt_per_piece_s: t_opt / pieces as f64,
        wall_time_s: 0.0,
        seed: opts.seed.unwrap_or(cfg.seed),
        threads: opts.threads,
    };
    let mut outcome = RunOutcome {
        optimized,
        summary,
        violations,
        profile,
    };
    write_outputs(out, cfg, &mut outcome, wall)?;
    if outcome.optimized.status != Status::Converged {
        warn!("solver status {:?}; outputs hold the best iterate", outcome.optimized.status);
        return Err(RunError::NotConverged {
            status: outcome.optimized.status,
            iterations: outcome.optimized.iterations,
        });
    }
    Ok(outcome)
}

fn violation_report(m: &ViolationMaxima, cfg: &RunConfig) -> ViolationReport {
    let l = &cfg.limits;
    ViolationReport {
        oversample: cfg.output.oversample,
        samples_per_piece: cfg.output.oversample * cfg.kappa + 1,
        maxima: Maxima {
            speed: m.speed,
            acceleration: m.acceleration,
            omega: m.omega,
            penetration: m.penetration,
        },
        violations: Maxima {
            speed: (m.speed - l.v_max).max(0.0),
            acceleration: (m.acceleration - l.a_max).max(0.0),
            omega: (m.omega - l.omega_max).max(0.0),
            penetration: m.penetration.max(0.0),
        },
    }
}

#[derive(Serialize)]
struct TrajectoryFile<'a> {
    s: usize,
    durations: &'a [f64],
    /// One row of 6 flat-output coefficients per polynomial power, pieces in order.
    coefficients: Vec<&'a [f64]>,
}

pub fn profile_csv(samples: &[FlatSample]) -> String {
    let mut out = String::from(
        "t[s],px[m],py[m],pz[m],vx[m/s],vy[m/s],vz[m/s],ax[m/s^2],ay[m/s^2],az[m/s^2],\
         qw,qx,qy,qz,wx[rad/s],wy[rad/s],wz[rad/s],fbx[N],fby[N],fbz[N],taubx[N*m],tauby[N*m],taubz[N*m]\n",
    );
    for s in samples {
        let st = &s.state;
        let vals = std::iter::once(st.t)
            .chain(st.p.iter().copied())
            .chain(st.v.iter().copied())
            .chain(st.a.iter().copied())
            .chain(st.q.iter().copied())
            .chain(st.omega.iter().copied())
            .chain(s.input.f_b.iter().copied())
            .chain(s.input.tau_b.iter().copied());
        for (k, v) in vals.enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

fn write_outputs(dir: &Path, cfg: &RunConfig, o: &mut RunOutcome, wall: Instant) -> Result<(), RunError> {
    let put = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| RunError::Output { path, source })
    };
    std::fs::create_dir_all(dir).map_err(|source| RunError::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    let traj = &o.optimized.trajectory;
    let file = TrajectoryFile {
        s: traj.order(),
        durations: traj.durations(),
        coefficients: traj.coeffs().chunks(6).collect(),
    };
    put(TRAJECTORY_FILE, to_json(&file))?;
    put(PROFILE_FILE, profile_csv(&o.profile))?;
    put(VIOLATIONS_FILE, to_json(&o.violations))?;

    let t: Vec<f64> = o.profile.iter().map(|s| s.state.t).collect();
    let speed: Vec<f64> = o.profile.iter().map(|s| s.state.v.norm()).collect();
    let accel: Vec<f64> = o.profile.iter().map(|s| s.state.a.norm()).collect();
    let omega: Vec<f64> = o.profile.iter().map(|s| s.state.omega.norm()).collect();
    let l = &cfg.limits;
    let svg = profile_svg(
        &t,
        &[
            Series { label: "speed", unit: "m/s", values: &speed, limit: l.v_max },
            Series { label: "acceleration", unit: "m/s²", values: &accel, limit: l.a_max },
            Series { label: "angular rate", unit: "rad/s", values: &omega, limit: l.omega_max },
        ],
    );
    put(PLOT_FILE, svg)?;

    o.summary.wall_time_s = wall.elapsed().as_secs_f64();
    put(SUMMARY_FILE, to_json(&o.summary))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}
