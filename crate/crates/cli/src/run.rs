//! Pipelines behind each subcommand.

use std::time::Instant;

use gabor_core::cert::{c_d, certify, decay_constants, theta_max, Certificate, CertifyInput};
use gabor_core::count::{c_lv, count_report, counting_bound};
use gabor_core::gabor::GaborSystem;
use gabor_core::periodize::poisson_sides;
use gabor_core::stft::{stft_grid, stft_on_dual_lattice, StftEngine};
use gabor_core::verify::{frame_eigs, verify_certificate, FrameOperator};
use gabor_core::{Error, GridSpec, Lattice, PolyWeight, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::report::{render_record, render_table};
use crate::{CliError, EXIT_CERTIFIED, EXIT_INCONCLUSIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Certify,
    Verify,
    Poisson,
    Count,
    Stft,
    Bounds,
}

/// Result of a successful run: exit code and whether a frame is claimed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub exit_code: i32,
    pub claim: bool,
    pub reason: String,
}

impl Outcome {
    fn done(reason: &str) -> Self {
        Self {
            exit_code: EXIT_CERTIFIED,
            claim: false,
            reason: reason.into(),
        }
    }
}

/// Stage timings, reported only on request.
struct Clock {
    enabled: bool,
    start: Instant,
    stages: Map<String, Value>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            start: Instant::now(),
            stages: Map::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages
            .insert(stage.into(), json!((now - self.start).as_secs_f64()));
        self.start = now;
    }

    fn attach(self, doc: &mut Map<String, Value>) {
        if self.enabled {
            doc.insert("timings".into(), Value::Object(self.stages));
        }
    }
}

/// Runs `cmd` and returns the rendered output with its outcome.
pub fn execute(cmd: Subcommand, cfg: &RunConfig, timings: bool) -> Result<(String, Outcome), CliError> {
    match cmd {
        Subcommand::Certify => run_certify(cfg, cfg.verify, timings),
        Subcommand::Verify => run_certify(cfg, true, timings),
        Subcommand::Poisson => run_poisson(cfg),
        Subcommand::Count => run_count(cfg),
        Subcommand::Stft => run_stft(cfg),
        Subcommand::Bounds => run_bounds(cfg),
    }
}

/// The configured lattice; `mesh_fraction` resolves against theta0 of the windows.
pub fn resolve_lattice(cfg: &RunConfig, g: &Window, gamma: &Window, spec: &GridSpec) -> Result<Lattice, CliError> {
    let Some(fraction) = cfg.mesh_fraction else {
        return cfg.explicit_lattice(spec.dim);
    };
    if cfg.matrix.is_some() {
        return Err(CliError::Config("mesh-fraction and matrix are exclusive".into()));
    }
    let kg = decay_constants(g, cfg.epsilon, spec, false)?;
    let kgam = decay_constants(gamma, cfg.epsilon, spec, false)?;
    let c0 = StftEngine::new(gamma, g, *spec)?.eval(&vec![0.0; 2 * spec.dim])?;
    let theta0 = theta_max(c0.norm(), kgam.k_sym, kg.k_sym, spec.dim, cfg.epsilon, cfg.c)?;
    let t = fraction * theta0;
    Ok(Lattice::diagonal(&vec![t; spec.dim], &vec![t; spec.dim])?)
}

fn certify_with(
    cfg: &RunConfig,
    g: &Window,
    gamma: &Window,
    lat: &Lattice,
    spec: GridSpec,
) -> Result<Certificate, CliError> {
    Ok(certify(&CertifyInput {
        g,
        gamma,
        lattice: lat,
        weight: PolyWeight::new(cfg.weight_s),
        epsilon: cfg.epsilon,
        c: cfg.c,
        radius: cfg.trunc_k,
        quad: spec,
        method: cfg.method,
        sub: cfg.sub,
        require_rigor: false,
    })?)
}

/// A grid `(R', N')` with `R' >= R` and power-of-two `N' >= N` on which a
/// diagonal lattice is aligned for the full assembly: the steps
/// `b_j = 2 R' beta_j` and `a_j = alpha_j N' / (2 R')` are integers dividing `N'`.
pub fn suggest_grid(lat: &Lattice, r: f64, n: usize) -> Option<(f64, usize)> {
    let (alpha, beta) = lat.diag()?;
    let step = |v: f64, n: usize| {
        let k = v.round();
        ((v - k).abs() < 1e-9 * v.abs().max(1.0) && k >= 1.0 && n.is_multiple_of(k as usize)).then_some(())
    };
    let start = (2.0 * r * beta[0] - 1e-9).ceil().max(1.0) as u64;
    (start..start + 4096)
        .map(|m| m as f64 / (2.0 * beta[0]))
        .find_map(|r2| {
            (0..20)
                .map(|k| n.next_power_of_two() << k)
                .find(|&m| {
                    beta.iter().all(|b| step(2.0 * r2 * b, m).is_some())
                        && alpha.iter().all(|a| step(a * m as f64 / (2.0 * r2), m).is_some())
                })
                .map(|m| (r2, m))
        })
}

fn misaligned(e: CliError, lat: &Lattice, spec: &GridSpec) -> CliError {
    match e {
        CliError::Core(err @ (Error::MisalignedShift { .. } | Error::GridMismatch(_))) => CliError::Misaligned {
            reason: err.to_string(),
            suggestion: suggest_grid(lat, spec.half_width, spec.n),
        },
        other => other,
    }
}

fn oracle(
    cfg: &RunConfig,
    cert: &mut Certificate,
    g: &Window,
    gamma: &Window,
    spec: GridSpec,
) -> Result<(Value, bool), CliError> {
    let lat = cert.lattice.clone();
    let sys = GaborSystem::new(g.clone(), gamma.clone(), lat.clone(), cfg.trunc_k)?;
    let op = match FrameOperator::full(sys.clone(), spec) {
        Ok(op) => op,
        Err(_) => {
            let samples = stft_on_dual_lattice(gamma, g, &lat, cfg.trunc_k, &spec)?;
            FrameOperator::janssen(sys, spec, samples)
        }
    };
    let mut doc = Map::new();
    doc.insert("assembly".into(), json!(op.assembly()));
    doc.insert(
        "grid".into(),
        json!({"dim": spec.dim, "r": spec.half_width, "n": spec.n}),
    );
    if !cert.symmetric {
        doc.insert(
            "note".into(),
            json!("eigenvalues need a self-adjoint frame operator (g = gamma)"),
        );
        return Ok((Value::Object(doc), true));
    }
    let eigs = frame_eigs(&op, cfg.eigen, cfg.seed).map_err(|e| misaligned(e.into(), &lat, &spec))?;
    doc.insert("eigen".into(), json!(cfg.eigen));
    doc.insert("lambda_min".into(), json!(eigs.min));
    doc.insert("lambda_max".into(), json!(eigs.max));
    doc.insert("iterations".into(), json!(eigs.iterations));
    doc.insert("residual_min".into(), json!(eigs.residual_min));
    doc.insert("residual_max".into(), json!(eigs.residual_max));
    let mut sound = true;
    if cert.frame {
        let verdict = verify_certificate(cert, &eigs)?;
        sound = verdict.sound;
        doc.insert("verdict".into(), json!(verdict));
        if !sound {
            cert.frame = false;
            cert.notes
                .push("oracle eigenvalues contradict the certified bounds; claim withdrawn".into());
        }
    }
    Ok((Value::Object(doc), sound))
}

fn run_certify(cfg: &RunConfig, verify: bool, timings: bool) -> Result<(String, Outcome), CliError> {
    let mut clock = Clock::new(timings);
    let spec = cfg.grid()?;
    let (g, gamma) = cfg.windows()?;
    let lat = resolve_lattice(cfg, &g, &gamma, &spec)?;
    clock.lap("setup");
    let mut cert = certify_with(cfg, &g, &gamma, &lat, spec)?;
    clock.lap("certificate");

    let mut resolved = cfg.clone();
    resolved.verify = verify;
    let mut doc = Map::new();
    doc.insert("config".into(), serde_json::to_value(&resolved)?);
    let adjoint = lat.adjoint_lattice();
    doc.insert(
        "constants".into(),
        json!({
            "g": cert.constants_g,
            "gamma": cert.constants_gamma,
            "c_d": c_d(spec.dim),
            "c_lv_adjoint": c_lv(&adjoint, &PolyWeight::new(cfg.weight_s)),
            "counting_bound_adjoint": counting_bound(&adjoint),
        }),
    );
    doc.insert("series".into(), serde_json::to_value(&cert.series)?);

    let mut sound = true;
    if verify {
        let (v, s) = oracle(cfg, &mut cert, &g, &gamma, spec)?;
        doc.insert("oracle".into(), v);
        sound = s;
        clock.lap("oracle");
    }
    let claim = cert.frame && sound;
    let outcome = Outcome {
        exit_code: if claim { EXIT_CERTIFIED } else { EXIT_INCONCLUSIVE },
        claim,
        reason: if claim {
            "frame certified".into()
        } else if !sound {
            "oracle contradicts the certified bounds".into()
        } else if cert.invertible && !cert.symmetric {
            "invertible Gabor operator; frame bounds need g = gamma".into()
        } else if cert.invertible {
            "invertible, but the frame-bound premise fails".into()
        } else {
            "sufficient condition not met; no frame claim".into()
        },
    };
    doc.insert("certificate".into(), serde_json::to_value(&cert)?);
    doc.insert("outcome".into(), serde_json::to_value(&outcome)?);
    clock.attach(&mut doc);
    Ok((render_record(&Value::Object(doc), cfg.format)?, outcome))
}

fn run_poisson(cfg: &RunConfig) -> Result<(String, Outcome), CliError> {
    let (g, _) = cfg.windows()?;
    let d = g.dim();
    let lat = match &cfg.matrix {
        Some(m) => Lattice::general(&crate::config::parse_matrix(m)?)?,
        None => {
            let id: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
                .collect();
            Lattice::general(&id)?
        }
    };
    let x = cfg.point.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut rows = Vec::new();
    for k in 1..=cfg.trunc_k.max(1) {
        let (lhs, rhs) = poisson_sides(&g, &lat, &x, k)?;
        rows.push(vec![
            json!(k),
            json!(lhs.re),
            json!(lhs.im),
            json!(rhs.re),
            json!(rhs.im),
            json!((lhs - rhs).norm()),
        ]);
    }
    let text = render_table(
        &serde_json::to_value(cfg)?,
        &[
            "k",
            "periodized_re",
            "periodized_im",
            "fourier_re",
            "fourier_im",
            "residual",
        ],
        &rows,
        cfg.format,
    )?;
    Ok((text, Outcome::done("table emitted")))
}

fn format_matrix(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

fn random_lattice(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Lattice) {
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        if let Ok(lat) = Lattice::new(&rows) {
            if lat.volume() > 0.05 {
                return (rows, lat);
            }
        }
    }
}

fn run_count(cfg: &RunConfig) -> Result<(String, Outcome), CliError> {
    let n = 2 * cfg.dim()?;
    let w = PolyWeight::new(cfg.weight_s);
    let fixed = match &cfg.matrix {
        Some(m) => {
            let rows = crate::config::parse_matrix(m)?;
            let lat = Lattice::new(&rows)?;
            Some((rows, lat))
        }
        None => None,
    };
    if let Some(c) = &cfg.cube {
        if c.len() != n {
            return Err(CliError::Config(format!(
                "cube vertex has {} entries, lattice needs {n}",
                c.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut all_hold = true;
    for trial in 0..cfg.trials.max(1) {
        let (m, lat) = match &fixed {
            Some(f) => f.clone(),
            None => random_lattice(&mut rng, n),
        };
        let cube = cfg
            .cube
            .clone()
            .unwrap_or_else(|| (0..n).map(|_| rng.random_range(-3..=3)).collect());
        let rep = count_report(&lat, &cube, &w);
        let holds = rep.brute_count <= rep.bound;
        all_hold &= holds;
        let cube_s = cube.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
        rows.push(vec![
            json!(trial),
            json!(format_matrix(&m)),
            json!(cube_s),
            json!(rep.brute_count),
            json!(rep.bound),
            json!(rep.c_lv),
            json!(holds),
        ]);
    }
    let text = render_table(
        &serde_json::to_value(cfg)?,
        &["trial", "matrix", "cube", "brute_count", "bound", "c_lv", "holds"],
        &rows,
        cfg.format,
    )?;
    let outcome = if all_hold {
        Outcome::done("all counts within the cofactor bound")
    } else {
        Outcome {
            exit_code: EXIT_INCONCLUSIVE,
            claim: false,
            reason: "a brute count exceeds the cofactor bound".into(),
        }
    };
    Ok((text, outcome))
}

fn run_stft(cfg: &RunConfig) -> Result<(String, Outcome), CliError> {
    let spec = cfg.grid()?;
    let (g, gamma) = cfg.windows()?;
    let grid = stft_grid(&gamma, &g, &spec)?;
    let d = spec.dim;
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.extend((0..d).map(|j| format!("omega{j}")));
    header.extend(["abs", "re", "im"].map(String::from));
    let mut rows = Vec::with_capacity(grid.values.len());
    for xi in 0..grid.time.len() {
        let x = grid.time.point(xi);
        for wi in 0..grid.freq.len() {
            let w = grid.freq.point(wi);
            let v = grid.at(xi, wi);
            let mut row: Vec<Value> = x.iter().chain(&w).map(|c| json!(c)).collect();
            row.extend([json!(v.norm()), json!(v.re), json!(v.im)]);
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let text = render_table(&serde_json::to_value(cfg)?, &header, &rows, cfg.format)?;
    Ok((text, Outcome::done("table emitted")))
}

fn run_bounds(cfg: &RunConfig) -> Result<(String, Outcome), CliError> {
    let spec = cfg.grid()?;
    let (g, gamma) = cfg.windows()?;
    let lat = resolve_lattice(cfg, &g, &gamma, &spec)?;
    let cert = certify_with(cfg, &g, &gamma, &lat, spec)?;
    let adjoint = lat.adjoint_lattice();
    let w = PolyWeight::new(cfg.weight_s);
    let closed = cert.theta.mesh.map(|m| {
        gabor_core::cert::series_closed_bound(
            cert.constants_gamma.k_sym,
            cert.constants_g.k_sym,
            spec.dim,
            cfg.epsilon,
            m,
        )
    });
    let rows: Vec<Vec<Value>> = [
        ("c0_abs", json!(cert.c0().norm())),
        ("norm2_g", json!(cert.norm2_g)),
        ("sigma", json!(cert.series.sigma)),
        ("nonzero", json!(cert.series.nonzero)),
        ("direct", json!(cert.series.direct)),
        ("tail", json!(cert.series.tail)),
        ("c_d", json!(c_d(spec.dim))),
        ("c_lv_adjoint", json!(c_lv(&adjoint, &w))),
        ("counting_bound_adjoint", json!(counting_bound(&adjoint))),
        ("k_sym_g", json!(cert.constants_g.k_sym)),
        ("k_sym_gamma", json!(cert.constants_gamma.k_sym)),
        ("mesh", json!(cert.theta.mesh)),
        ("theta0", json!(cert.theta.theta0)),
        ("closed_bound", json!(closed)),
        ("norm_bound", json!(cert.norm_bound)),
        ("margin", json!(cert.margin)),
    ]
    .into_iter()
    .map(|(k, v)| vec![json!(k), v])
    .collect();
    let text = render_table(&serde_json::to_value(cfg)?, &["quantity", "value"], &rows, cfg.format)?;
    Ok((text, Outcome::done("table emitted")))
}
