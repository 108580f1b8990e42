//! Command-line front end. Every command emits a JSON document carrying
//! `schema_version`; errors go to stderr as JSON with a documented exit code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::clifford::{gamma_representation, spin_point, CMatrix};
use crate::curvature::{dcurvature, einstein_dtensor, ricci, scalar_curvature};
use crate::dconn::{canonical_dconnection, dtorsion, levi_civita_adapted, metricity_defect, DeformationTensor};
use crate::dirac::{assemble_discrete_dirac, spinor_scalar_product, Lattice};
use crate::dsl::parse_definition;
use crate::dynamics::{energy, equivalence_residual, integrate, Flow};
use crate::error::GeomError;
use crate::jet::ChartPoint;
use crate::nlc::{decompose_offdiagonal, nonholonomy, DMetric};
use crate::spectral::{report_on, SolverBudget};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Report,
    Geodesics,
    Dirac,
    Distance,
    Check,
}

/// Command-line configuration.
#[derive(Debug, Clone, Parser)]
#[command(name = "lfgeom", version, about = "Geometry of Lagrange-Finsler spaces and nonholonomic manifolds")]
pub struct RunConfig {
    /// Definition file (`dims`, `lagrangian`, `metric_block`, `nconn` directives).
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum)]
    pub command: Command,

    /// A count of random points, or explicit points as `c1,c2,...;c1,c2,...`
    /// over all `n + m` coordinates.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub points: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Sampling box per coordinate as `lo:hi,...` (default x in [-1,1], y in [0.3,1.5]).
    #[arg(long = "box", allow_hyphen_values = true)]
    pub sample_box: Option<String>,

    /// Lattice axes as `lo:hi:sites` or a frozen value, one per coordinate.
    #[arg(long, allow_hyphen_values = true)]
    pub lattice: Option<String>,

    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,

    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,

    /// Iteration budget of the distance solver.
    #[arg(long, default_value_t = 200_000)]
    pub budget: usize,

    /// Site pairs for `distance`, as `p1-p2,p3-p4`.
    #[arg(long)]
    pub pairs: Option<String>,

    /// Output path: the JSON document for report/distance/check, the CSV
    /// trajectory for geodesics, the COO operator for dirac. A distance run
    /// with a `.csv` path writes table rows there and JSON to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn io(path: &Path, e: std::io::Error, code: i32) -> Self {
        Self {
            code,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PARSE,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": self.kind, "message": self.message },
            "exit_code": self.code,
        })
    }
}

pub fn exit_code(e: &GeomError) -> i32 {
    match e {
        GeomError::Syntax { .. } | GeomError::UnknownSymbol(_) => EXIT_PARSE,
        GeomError::DegenerateHessian { .. } | GeomError::SingularVBlock | GeomError::NotPositiveDefinite(_) => {
            EXIT_DEGENERATE
        }
        _ => EXIT_NUMERIC,
    }
}

fn kind(e: &GeomError) -> &'static str {
    match e {
        GeomError::Syntax { .. } => "syntax",
        GeomError::UnknownSymbol(_) => "unknown_symbol",
        GeomError::Domain(_) => "domain",
        GeomError::DegenerateHessian { .. } => "degenerate_hessian",
        GeomError::SingularVBlock => "singular_v_block",
        GeomError::DimensionMismatch(_) => "dimension_mismatch",
        GeomError::NotPositiveDefinite(_) => "not_positive_definite",
        GeomError::PatchTooSmall { .. } => "patch_too_small",
        GeomError::DimensionTooLarge(_) => "dimension_too_large",
        GeomError::FormMismatch => "form_mismatch",
        GeomError::OrderTooLarge(_) => "order_too_large",
        GeomError::ShootingDiverged { .. } => "shooting_diverged",
        GeomError::SolverStalled { .. } => "solver_stalled",
        GeomError::Disconnected(..) => "disconnected",
        GeomError::InvalidInput(_) => "invalid_input",
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        Self {
            code: exit_code(&e),
            kind: kind(&e),
            message: e.to_string(),
        }
    }
}

/// Result of a command: the JSON document and the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub document: Value,
    pub code: i32,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(&cfg.input).map_err(|e| CliError::io(&cfg.input, e, EXIT_PARSE))?;
    let def = parse_definition(&text)?;
    let dm = DMetric::from_definition(&def)?;
    let mut outcome = match cfg.command {
        Command::Report => cmd_report(cfg, &dm)?,
        Command::Geodesics => cmd_geodesics(cfg, &dm)?,
        Command::Dirac => cmd_dirac(cfg, &dm)?,
        Command::Distance => cmd_distance(cfg, &dm)?,
        Command::Check => cmd_check(cfg, &dm)?,
    };
    if let Value::Object(map) = &mut outcome.document {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        map.insert("command".into(), json!(format!("{:?}", cfg.command).to_lowercase()));
        map.insert("dims".into(), json!([dm.n(), dm.m()]));
        map.insert("source".into(), json!(if dm.lagrangian().is_some() { "lagrangian" } else { "d_metric" }));
    }
    Ok(outcome)
}

/// Serialize the document to `--out` (JSON commands) or return it for stdout.
pub fn render(cfg: &RunConfig, outcome: &Outcome) -> Result<Option<String>, CliError> {
    let text = serde_json::to_string_pretty(&outcome.document).expect("JSON values always serialize") + "\n";
    let file_target = match cfg.command {
        Command::Report | Command::Check => true,
        Command::Distance => !is_csv(cfg.out.as_deref()),
        Command::Geodesics | Command::Dirac => false,
    };
    match (&cfg.out, file_target) {
        (Some(path), true) => {
            fs::write(path, text).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
            Ok(None)
        }
        _ => Ok(Some(text)),
    }
}

fn is_csv(path: Option<&Path>) -> bool {
    path.and_then(Path::extension).is_some_and(|e| e == "csv")
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::usage(format!("not a number: `{s}`")))
}

fn sample_points(cfg: &RunConfig, dm: &DMetric) -> Result<Vec<ChartPoint>, CliError> {
    let (n, m) = (dm.n(), dm.m());
    let dim = n + m;
    let spec = cfg.points.trim();
    if spec.contains(',') || spec.contains(';') {
        return spec
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let coords = p.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
                if coords.len() != dim {
                    return Err(CliError::usage(format!("point `{p}` needs {dim} coordinates")));
                }
                Ok(ChartPoint::from_coords(&coords, n)?)
            })
            .collect();
    }
    let count: usize = spec
        .parse()
        .map_err(|_| CliError::usage(format!("--points must be a count or a point list, got `{spec}`")))?;
    let bounds: Vec<(f64, f64)> = match &cfg.sample_box {
        Some(b) => b
            .split(',')
            .map(|ax| {
                let (lo, hi) = ax.split_once(':').ok_or_else(|| CliError::usage(format!("bad box `{ax}`")))?;
                Ok((parse_f64(lo)?, parse_f64(hi)?))
            })
            .collect::<Result<_, CliError>>()?,
        None => (0..dim).map(|k| if k < n { (-1.0, 1.0) } else { (0.3, 1.5) }).collect(),
    };
    if bounds.len() != dim || bounds.iter().any(|(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi) {
        return Err(CliError::usage(format!("--box needs {dim} intervals lo:hi with lo <= hi")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|_| {
            let c: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..hi) })
                .collect();
            Ok(ChartPoint::from_coords(&c, n)?)
        })
        .collect()
}

fn matrix(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Nest a row-major flat array into JSON arrays of the given shape.
fn nest(v: &[f64], shape: &[usize]) -> Value {
    match shape {
        [] | [_] => json!(v),
        [first, rest @ ..] => {
            let chunk = v.len() / first.max(&1);
            json!((0..*first).map(|i| nest(&v[i * chunk..(i + 1) * chunk], rest)).collect::<Vec<_>>())
        }
    }
}

fn cmd_report(cfg: &RunConfig, dm: &DMetric) -> Result<Outcome, CliError> {
    let (n, m) = (dm.n(), dm.m());
    let conn = canonical_dconnection(dm);
    let nc = dm.nconnection();
    let mut points = Vec::new();
    for u in sample_points(cfg, dm)? {
        let pt = dm.at(&u)?;
        let hol = nonholonomy(&nc, &u)?;
        let omega: Vec<f64> = (0..m)
            .flat_map(|a| (0..n).flat_map(move |i| (0..n).map(move |j| (a, i, j))))
            .map(|(a, i, j)| hol.omega(a, i, j))
            .collect();
        let c = conn.coefficients(&u, 0)?.values();
        let t = dtorsion(&conn, &u)?;
        let r = dcurvature(&conn, &u)?;
        let ric = ricci(&r);
        let scalar = scalar_curvature(&ric, dm, &u)?;
        let ein = einstein_dtensor(&ric, dm, &u)?;
        points.push(json!({
            "x": u.x, "y": u.y,
            "g": matrix(&pt.g), "h": matrix(&pt.h), "nconn": matrix(&pt.nconn),
            "omega": nest(&omega, &[m, n, n]),
            "connection": {
                "lh": nest(&c.lh, &[n, n, n]), "lv": nest(&c.lv, &[m, m, n]),
                "ch": nest(&c.ch, &[n, n, m]), "cv": nest(&c.cv, &[m, m, m]),
            },
            "torsion": {
                "hhh": nest(&t.hhh, &[n, n, n]), "hhv": nest(&t.hhv, &[n, n, m]),
                "vhh": nest(&t.vhh, &[m, n, n]), "vvh": nest(&t.vvh, &[m, m, n]),
                "vvv": nest(&t.vvv, &[m, m, m]),
            },
            "curvature": {
                "hhhh": nest(&r.hhhh, &[n, n, n, n]), "vvhh": nest(&r.vvhh, &[m, m, n, n]),
                "hhhv": nest(&r.hhhv, &[n, n, n, m]), "vvhv": nest(&r.vvhv, &[m, m, n, m]),
                "hhvv": nest(&r.hhvv, &[n, n, m, m]), "vvvv": nest(&r.vvvv, &[m, m, m, m]),
            },
            "ricci": {
                "hh": nest(&ric.hh, &[n, n]), "hv": nest(&ric.hv, &[n, m]),
                "vh": nest(&ric.vh, &[m, n]), "vv": nest(&ric.vv, &[m, m]),
            },
            "scalar": scalar,
            "einstein": {
                "hh": nest(&ein.hh, &[n, n]), "hv": nest(&ein.hv, &[n, m]),
                "vh": nest(&ein.vh, &[m, n]), "vv": nest(&ein.vv, &[m, m]),
            },
        }));
    }
    Ok(Outcome {
        document: json!({ "seed": cfg.seed, "points": points }),
        code: 0,
    })
}

fn cmd_geodesics(cfg: &RunConfig, dm: &DMetric) -> Result<Outcome, CliError> {
    let l = dm
        .lagrangian()
        .ok_or_else(|| GeomError::InvalidInput("geodesics need a `lagrangian` input".into()))?
        .clone();
    let u = sample_points(cfg, dm)?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::usage("no initial point"))?;
    let el = integrate(l.as_ref(), Flow::EulerLagrange, &u.x, &u.y, cfg.horizon, cfg.step)?;
    if let Some(path) = &cfg.out {
        let mut buf = Vec::new();
        el.write_csv(&mut buf).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
        fs::write(path, buf).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
    }
    let aborted = el.aborted.clone();
    let (residual, drift) = if aborted.is_none() {
        let (xe, ye) = el.end();
        let e0 = energy(l.as_ref(), &u.x, &u.y)?;
        let e1 = energy(l.as_ref(), xe, ye)?;
        (
            Some(equivalence_residual(l.as_ref(), &u.x, &u.y, cfg.horizon, cfg.step)?),
            Some((e1 - e0).abs()),
        )
    } else {
        (None, None)
    };
    let (xe, ye) = el.end();
    let document = json!({
        "x0": u.x, "y0": u.y, "step": cfg.step, "horizon": cfg.horizon,
        "samples": el.len(),
        "end": { "x": xe, "y": ye },
        "equivalence_residual": residual,
        "energy_drift": drift,
        "aborted": aborted.as_ref().map(|e| e.to_string()),
    });
    let code = match &aborted {
        Some(e) => exit_code(e),
        None => 0,
    };
    Ok(Outcome { document, code })
}

fn lattice(cfg: &RunConfig) -> Result<Lattice, CliError> {
    let spec = cfg.lattice.as_deref().ok_or_else(|| CliError::usage("--lattice is required"))?;
    Ok(Lattice::parse(spec)?)
}

/// Random field supported two layers away from the boundary.
fn compact_field(lat: &Lattice, k: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(lat.len() * k);
    for s in 0..lat.len() {
        let deep = lat
            .multi_index(s)
            .iter()
            .zip(lat.axes())
            .all(|(&i, a)| a.sites == 1 || (i >= 2 && i + 2 < a.sites));
        for _ in 0..k {
            v.push(if deep {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
    }
    v
}

fn cmd_dirac(cfg: &RunConfig, dm: &DMetric) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let op = assemble_discrete_dirac(dm, &lat)?;
    if let Some(path) = &cfg.out {
        let mut buf = Vec::new();
        op.write_coo(&mut buf).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
        fs::write(path, buf).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let psi = compact_field(&lat, op.spinor_size(), &mut rng);
    let phi = compact_field(&lat, op.spinor_size(), &mut rng);
    let left = spinor_scalar_product(&op, &op.apply(&psi), &phi)?;
    let right = spinor_scalar_product(&op, &psi, &op.apply(&phi))?;
    let symmetry = (left - right).norm() / left.norm().max(right.norm()).max(f64::MIN_POSITIVE);
    let document = json!({
        "sites": lat.len(),
        "active_axes": lat.active(),
        "spinor": op.spinor_size(),
        "size": op.size(),
        "nnz": op.nnz(),
        "nnz_horizontal": op.part(crate::dirac::Part::Horizontal).len(),
        "nnz_vertical": op.part(crate::dirac::Part::Vertical).len(),
        "chirality_defect": op.chirality_defect(),
        "interior_symmetry_defect": symmetry,
    });
    Ok(Outcome { document, code: 0 })
}

fn default_pairs(lat: &Lattice) -> Vec<(usize, usize)> {
    let base: Vec<usize> = lat.axes().iter().map(|a| usize::from(a.sites > 1)).collect();
    lat.active()
        .into_iter()
        .filter_map(|axis| {
            let mut end = base.clone();
            // same parity as the start, one layer in from the far edge
            let last = lat.axes()[axis].sites - 2;
            end[axis] = last - (last - 1) % 2;
            Some((lat.index(&base)?, lat.index(&end)?)).filter(|(a, b)| a != b)
        })
        .collect()
}

fn cmd_distance(cfg: &RunConfig, dm: &DMetric) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let pairs = match &cfg.pairs {
        Some(p) => p
            .split(',')
            .map(|pair| {
                let (a, b) = pair.split_once('-').ok_or_else(|| CliError::usage(format!("bad pair `{pair}`")))?;
                let site = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::usage(format!("bad site `{s}`")));
                Ok((site(a)?, site(b)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?,
        None => default_pairs(&lat),
    };
    let budget = SolverBudget {
        max_iterations: cfg.budget,
        ..SolverBudget::default()
    };
    let op = assemble_discrete_dirac(dm, &lat)?;
    let rows = report_on(&op, dm, &pairs, budget)?;
    if let Some(path) = cfg.out.as_ref().filter(|p| is_csv(Some(p))) {
        let mut text = String::from("p1,p2,connes,geodesic,ratio\n");
        for r in &rows {
            text += &format!("{},{},{:.17e},{:.17e},{:.17e}\n", r.p1, r.p2, r.connes, r.geodesic, r.ratio);
        }
        fs::write(path, text).map_err(|e| CliError::io(path, e, EXIT_NUMERIC))?;
    }
    Ok(Outcome {
        document: json!({
            "sites": lat.len(),
            "budget": budget,
            "rows": rows,
        }),
        code: 0,
    })
}

struct Battery {
    verdicts: Vec<Value>,
    failed: Vec<String>,
}

impl Battery {
    fn record(&mut self, name: &str, point: usize, value: f64, tolerance: f64) {
        let passed = value <= tolerance;
        if !passed {
            self.failed.push(format!("{name}@{point}"));
        }
        self.verdicts.push(json!({
            "check": name, "point": point, "value": value, "tolerance": tolerance, "passed": passed,
        }));
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn cmd_check(cfg: &RunConfig, dm: &DMetric) -> Result<Outcome, CliError> {
    let (n, m) = (dm.n(), dm.m());
    let dim = n + m;
    let conn = canonical_dconnection(dm);
    let rep = gamma_representation(dim)?;
    let p_hat = DeformationTensor::canonical_from_levi_civita(dm);
    let mut bat = Battery {
        verdicts: Vec::new(),
        failed: Vec::new(),
    };
    for (k, u) in sample_points(cfg, dm)?.iter().enumerate() {
        let pt = match dm.at(u) {
            Ok(pt) => pt,
            Err(e) if exit_code(&e) == EXIT_DEGENERATE => {
                bat.verdicts.push(json!({
                    "check": "metric_regular", "point": k, "passed": false, "error": e.to_string(),
                }));
                let document = json!({ "seed": cfg.seed, "verdicts": bat.verdicts, "failed": [format!("metric_regular@{k}")] });
                return Ok(Outcome {
                    document,
                    code: EXIT_DEGENERATE,
                });
            }
            Err(e) => return Err(e.into()),
        };
        bat.record("metric_regular", k, 0.0, 0.0);
        bat.record("canonical_metricity", k, metricity_defect(&conn, u)?.max(), 1e-9);
        let t = dtorsion(&conn, u)?;
        bat.record("torsion_hhh_zero", k, t.max_hhh(), 0.0);
        bat.record("torsion_vvv_zero", k, t.max_vvv(), 0.0);

        let lc = levi_civita_adapted(dm, u, 0)?;
        let split = lc.try_add(&p_hat.at(u, 0)?)?.values();
        let can = conn.coefficients(u, 0)?.values();
        bat.record("levi_civita_plus_distortion", k, split.max_abs_diff(&can)?, 1e-9);

        let r = dcurvature(&conn, u)?;
        let mut antisym: f64 = 0.0;
        for i in 0..n {
            for h in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        antisym = antisym.max((r.r_hhhh(i, h, j, l) + r.r_hhhh(i, h, l, j)).abs());
                    }
                }
            }
        }
        bat.record("curvature_antisymmetry", k, antisym, 1e-12);

        let back = decompose_offdiagonal(&pt.assemble(), n, m)?;
        let rt = (&back.g - &pt.g)
            .amax()
            .max((&back.h - &pt.h).amax())
            .max((&back.nconn - &pt.nconn).amax());
        bat.record("offdiagonal_round_trip", k, rt, 1e-12);

        let sp = spin_point(&conn, &rep, u)?;
        let ks = rep.size();
        let mut clifford: f64 = 0.0;
        let ginv = pt.g.clone().try_inverse().ok_or(GeomError::SingularVBlock)?;
        let hinv = pt.h.clone().try_inverse().ok_or(GeomError::SingularVBlock)?;
        for a in 0..dim {
            for b in 0..dim {
                let want = match (a < n, b < n) {
                    (true, true) => ginv[(a, b)],
                    (false, false) => hinv[(a - n, b - n)],
                    _ => 0.0,
                };
                let ac = &sp.gammas[a] * &sp.gammas[b] + &sp.gammas[b] * &sp.gammas[a]
                    - CMatrix::identity(ks, ks) * Complex64::new(2.0 * want, 0.0);
                clifford = clifford.max(max_abs(&ac));
            }
        }
        bat.record("curved_gamma_relation", k, clifford, 1e-10);
        let anti = sp.omega.iter().map(|o| max_abs(&(o + o.adjoint()))).fold(0.0, f64::max);
        bat.record("spin_connection_anti_hermitian", k, anti, 1e-12);

        if let Some(l) = dm.lagrangian() {
            let res = equivalence_residual(l.as_ref(), &u.x, &u.y, 0.1, 1e-3)?;
            bat.record("euler_lagrange_spray_equivalence", k, res, 1e-7);
        }
    }
    let code = if bat.failed.is_empty() { 0 } else { EXIT_CHECK_FAILED };
    Ok(Outcome {
        document: json!({ "seed": cfg.seed, "verdicts": bat.verdicts, "failed": bat.failed }),
        code,
    })
}
