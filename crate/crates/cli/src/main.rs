//! `alfeld`: batch front end for the element library.
//!
//! Every subcommand writes a deterministic CSV or JSON report to stdout (or
//! `--out`). When one of the run's checks fails, a JSON failure list goes
//! to stderr and the exit code is 1.

use alfeld::bubbles::modify_bubble;
use alfeld::local_div::{boundary_trace_max, solve_local_div};
use alfeld::mesh::geometry::barycenter;
use alfeld::mesh::{builtin_mesh, read_mesh, reference_simplex, uniform_refine, format_mesh, MacroMesh, RefinedMesh, SplitRule};
use alfeld::poly::{LambdaSystem, SplitPoly};
use alfeld::rng::{random_simplex, random_zero_mean, rng};
use alfeld::space::{assemble, build_pair, check_unisolvence, Family, PairKind};
use alfeld::stability::{equivalence_check, infsup_constant, InfSupMethod, STABLE_THRESHOLD};
use alfeld::stokes::{convergence_study, solve_stokes, CaseKind, ManufacturedCase};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(name = "alfeld", version, about = "Divergence-free Stokes elements on barycentric refinements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct MeshArg {
    /// Builtin name (`tri1`, `square2`, `squareN`, `tet1`, `cube6`, `cubeN`,
    /// `simplexD`) or a mesh file.
    #[arg(long, default_value = "square2")]
    mesh: String,
    /// Resolution for `squareN`/`cubeN`, dimension for `simplexD`.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Method {
    Auto,
    Svd,
    Schur,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split every cell at its barycenter and write the fine mesh.
    Refine {
        #[command(flatten)]
        mesh: MeshArg,
        /// Uniform refinements applied before the split.
        #[arg(long, default_value_t = 0)]
        uniform: usize,
    },
    /// Random zero-mean divergence targets on one split simplex.
    LocalDiv {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Use a random shape-regular simplex instead of the reference one.
        #[arg(long)]
        random_cell: bool,
    },
    /// Modified face bubbles on one split simplex.
    Bubbles {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        random_cell: bool,
        /// Also write every bubble's coefficients to this JSON file.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Discrete inf-sup constants over successive uniform refinements.
    Infsup {
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        mesh: MeshArg,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Write A, B and M_p of every level in Matrix Market format.
        #[arg(long)]
        export_ops: Option<PathBuf>,
    },
    /// Compare the refined pair with the macro pair of the same degree.
    Equivalence {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        mesh: MeshArg,
    },
    /// Solve the manufactured Stokes problem once.
    Solve {
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        mesh: MeshArg,
        /// Pressure multiplier added to the manufactured pressure.
        #[arg(long, default_value_t = 0.0)]
        pressure_boost: f64,
    },
    /// Error table over successive uniform refinements.
    Convergence {
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        mesh: MeshArg,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Expected H¹ velocity rate between the two finest levels.
        #[arg(long)]
        expect_rate: Option<f64>,
        #[arg(long, default_value_t = 0.2)]
        rate_tol: f64,
    },
    /// DOF-matrix conditioning of a local element on random cells.
    Unisolvence {
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

struct Report {
    body: String,
    failures: Vec<String>,
}

fn load_mesh(m: &MeshArg) -> Result<MacroMesh> {
    let path = Path::new(&m.mesh);
    if path.exists() {
        return read_mesh(path).with_context(|| format!("reading {}", m.mesh));
    }
    Ok(builtin_mesh(&m.mesh, m.n)?)
}

fn split(m: &MacroMesh) -> Result<Arc<RefinedMesh>> {
    Ok(Arc::new(RefinedMesh::new(m, SplitRule::Barycenter)?))
}

fn level_meshes(m: &MacroMesh, levels: usize) -> Result<Vec<MacroMesh>> {
    if levels == 0 {
        bail!("--levels must be at least 1");
    }
    let mut out = vec![m.clone()];
    while out.len() < levels {
        out.push(uniform_refine(out.last().unwrap())?);
    }
    Ok(out)
}

fn cell(d: usize, random: bool, seed: u64, stream: u64) -> Result<LambdaSystem<f64>> {
    let pts = if random { random_simplex(d, &mut rng(seed, stream)) } else { reference_simplex(d).cell_points(0) };
    Ok(LambdaSystem::new(&pts, &barycenter(&pts))?)
}

fn json_body(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn parse_family(s: &str) -> Result<Family> {
    let all = [Family::Mf, Family::Br, Family::VR, Family::VRReduced, Family::VDiv, Family::Cor68];
    all.into_iter().find(|f| f.name().eq_ignore_ascii_case(s)).with_context(|| format!("unknown space `{s}`"))
}

fn cmd_refine(mesh: &MeshArg, uniform: usize) -> Result<Report> {
    let m = level_meshes(&load_mesh(mesh)?, uniform + 1)?.pop().unwrap();
    let r = split(&m)?;
    Ok(Report { body: format_mesh(r.fine_mesh()), failures: vec![] })
}

fn cmd_local_div(d: usize, k: usize, trials: usize, random: bool, seed: u64) -> Result<Report> {
    let ls = cell(d, random, seed, 1)?;
    let mut g = rng(seed, 2);
    let (mut res, mut trace, mut cont, mut ident, mut ratio) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let p: SplitPoly<f64> = random_zero_mean(&ls, k - 1, &mut g);
        let r = solve_local_div(&p, k, &ls)?;
        if r.p_norm > 0.0 {
            res = res.max(r.residual_norm / r.p_norm);
        }
        trace = trace.max(boundary_trace_max(&r.v, &ls, 4, &mut g));
        cont = r.v.iter().map(|c| ls.continuity_residual(c, 4)).fold(cont, f64::max);
        ident = ident.max(r.identity_residual);
        ratio = ratio.max(r.stability_ratio);
    }
    let mut failures = Vec::new();
    if res > 1e-10 {
        failures.push(format!("relative divergence residual {res:e} > 1e-10"));
    }
    if trace > 1e-11 || cont > 1e-11 {
        failures.push(format!("trace {trace:e} / continuity {cont:e} > 1e-11"));
    }
    let body = json_body(&json!({
        "d": d, "k": k, "trials": trials, "seed": seed, "random_cell": random,
        "max_relative_residual": res, "max_boundary_trace": trace, "max_continuity_jump": cont,
        "max_identity_residual": ident, "max_stability_ratio": ratio,
    }));
    Ok(Report { body, failures })
}

fn cmd_bubbles(d: usize, random: bool, seed: u64, dump: Option<&Path>) -> Result<Report> {
    let ls = cell(d, random, seed, 1)?;
    let mut g = rng(seed, 3);
    let mut rows = Vec::new();
    let mut dumped = Vec::new();
    let mut failures = Vec::new();
    for i in 0..=d {
        let m = modify_bubble(&ls, i)?;
        let div = ls.divergence(&m.field)?;
        let dev = div.sub(&SplitPoly::constant(d, div.degree(), m.div_value))?.max_abs();
        let diff: Vec<_> = m.field.iter().zip(&m.bubble.field).map(|(a, b)| a.sub(b)).collect::<alfeld::Result<_>>()?;
        let trace = boundary_trace_max(&diff, &ls, 8, &mut g);
        if dev > 1e-11 || trace > 1e-11 {
            failures.push(format!("face {i}: divergence deviation {dev:e}, trace mismatch {trace:e}"));
        }
        rows.push(json!({"face": i, "div_value": m.div_value, "div_deviation": dev, "trace_mismatch": trace, "normal": m.bubble.normal}));
        let comps: Vec<Vec<Vec<f64>>> = m.field.iter().map(|c| c.pieces.iter().map(|p| p.coeffs().to_vec()).collect()).collect();
        dumped.push(json!({"face": i, "degree": d, "components": comps}));
    }
    if let Some(path) = dump {
        let v = json!({"d": d, "vertices": ls.macro_points, "split_point": ls.split_point, "basis": "barycentric monomials per child", "bubbles": dumped});
        std::fs::write(path, json_body(&v)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Report { body: json_body(&json!({"d": d, "seed": seed, "random_cell": random, "bubbles": rows})), failures })
}

fn export_ops(dir: &Path, level: usize, pair: &alfeld::space::StokesPair) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let ops = assemble(&pair.velocity, &pair.pressure)?;
    let tag = format!("{}_k{}_level{level}", pair.kind.name(), pair.k);
    ops.a.write_matrix_market(&dir.join(format!("{tag}_A.mtx")))?;
    ops.b.write_matrix_market(&dir.join(format!("{tag}_B.mtx")))?;
    ops.m_p.write_matrix_market(&dir.join(format!("{tag}_Mp.mtx")))?;
    Ok(())
}

fn cmd_infsup(pair: &str, k: usize, mesh: &MeshArg, levels: usize, method: Method, export: Option<&Path>) -> Result<Report> {
    let kind = PairKind::parse(pair)?;
    let method = match method {
        Method::Auto => InfSupMethod::Auto,
        Method::Svd => InfSupMethod::Svd,
        Method::Schur => InfSupMethod::Schur,
    };
    let mut body = String::from("pair,d,k,level,n_u,n_p,beta_h\n");
    let mut failures = Vec::new();
    for (level, m) in level_meshes(&load_mesh(mesh)?, levels)?.iter().enumerate() {
        let p = build_pair(kind, &split(m)?, k)?;
        if let Some(dir) = export {
            export_ops(dir, level, &p)?;
        }
        let r = match infsup_constant(&p, level, method) {
            Ok(r) => r,
            // no mean-free pressures: the infimum is over an empty set
            Err(alfeld::Error::EmptyPressureSpace) => {
                writeln!(body, "{},{},{},{},{},{},inf", kind.name(), m.dim(), k, level, p.velocity.ndofs, p.pressure.ndofs).unwrap();
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        writeln!(body, "{},{},{},{},{},{},{:.12e}", r.pair, r.d, r.k, r.level, r.n_u, r.n_p, r.beta_h).unwrap();
        if kind.certified(r.d, k) && r.beta_h <= STABLE_THRESHOLD {
            failures.push(format!("{} level {level}: beta_h {:e} at or below {STABLE_THRESHOLD:e}", r.pair, r.beta_h));
        }
    }
    Ok(Report { body, failures })
}

fn cmd_equivalence(k: usize, mesh: &MeshArg) -> Result<Report> {
    let r = equivalence_check(&split(&load_mesh(mesh)?)?, k)?;
    let failures = if r.agree { vec![] } else { vec![format!("refined and macro constants disagree at k = {k}")] };
    Ok(Report { body: json_body(&serde_json::to_value(&r)?), failures })
}

fn cmd_solve(pair: &str, k: usize, mesh: &MeshArg, boost: f64) -> Result<Report> {
    let kind = PairKind::parse(pair)?;
    let m = load_mesh(mesh)?;
    let p = build_pair(kind, &split(&m)?, k)?;
    let case = ManufacturedCase::new(m.dim(), CaseKind::Curl)?.with_pressure_boost(boost);
    let s = solve_stokes(&p, &case)?;
    let mut failures = Vec::new();
    if kind.divergence_free() && s.divergence_l2 > 1e-10 * s.velocity_h1.max(1.0) {
        failures.push(format!("divergence {:e} exceeds 1e-10 max(1, |u_h|_H1)", s.divergence_l2));
    }
    if s.energy_residual > 1e-9 {
        failures.push(format!("energy identity residual {:e}", s.energy_residual));
    }
    let mut v = serde_json::to_value(&s)?;
    v["k"] = json!(k);
    Ok(Report { body: json_body(&v), failures })
}

fn cmd_convergence(pair: &str, k: usize, mesh: &MeshArg, levels: usize, expect: Option<f64>, tol: f64) -> Result<Report> {
    let kind = PairKind::parse(pair)?;
    let m = load_mesh(mesh)?;
    let case = ManufacturedCase::new(m.dim(), CaseKind::Curl)?;
    let t = convergence_study(kind, k, &case, &level_meshes(&m, levels)?)?;
    let mut body = String::from("pair,k,level,h,n_u,n_p,l2_u,h1_u,l2_p,div_l2,rate_l2_u,rate_h1_u,rate_l2_p\n");
    let f = |r: Option<f64>| r.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in &t.rows {
        writeln!(
            body,
            "{},{},{},{:.6e},{},{},{:.6e},{:.6e},{:.6e},{:.3e},{},{},{}",
            t.pair, t.k, r.level, r.h, r.n_u, r.n_p, r.errors.l2_u, r.errors.h1_u, r.errors.l2_p, r.divergence_l2,
            f(r.rate_l2_u), f(r.rate_h1_u), f(r.rate_l2_p)
        )
        .unwrap();
    }
    let mut failures = Vec::new();
    if let Some(want) = expect {
        let got = t.finest_h1_rate().unwrap_or(f64::NAN);
        if !((got - want).abs() <= tol) {
            failures.push(format!("finest H1 rate {got:.4} not within {tol} of {want}"));
        }
    }
    Ok(Report { body, failures })
}

fn cmd_unisolvence(space: &str, d: usize, trials: usize, seed: u64) -> Result<Report> {
    let fam = parse_family(space)?;
    let mut g = rng(seed, 4);
    let (mut smin, mut cmax, mut size) = (f64::INFINITY, 0.0f64, 0);
    let mut failures = Vec::new();
    for t in 0..trials {
        let pts = random_simplex(d, &mut g);
        let ls = LambdaSystem::<f64>::new(&pts, &barycenter(&pts))?;
        match check_unisolvence(fam, &ls) {
            Ok(r) => {
                smin = smin.min(r.sigma_min_scaled);
                cmax = cmax.max(r.condition);
                size = r.size;
            }
            Err(alfeld::Error::SingularDofMatrix(s)) => failures.push(format!("trial {t}: singular DOF matrix (sigma {s:e})")),
            Err(e) => return Err(e.into()),
        }
    }
    let body = json_body(&json!({
        "space": fam.name(), "d": d, "trials": trials, "seed": seed, "dofs": size,
        "nonsingular": trials - failures.len(), "min_scaled_sigma": smin, "max_condition": cmax,
    }));
    Ok(Report { body, failures })
}

fn run(cli: &Cli) -> Result<Report> {
    let seed = cli.seed;
    match &cli.command {
        Command::Refine { mesh, uniform } => cmd_refine(mesh, *uniform),
        Command::LocalDiv { d, k, trials, random_cell } => cmd_local_div(*d, *k as usize, *trials, *random_cell, seed),
        Command::Bubbles { d, random_cell, dump } => cmd_bubbles(*d, *random_cell, seed, dump.as_deref()),
        Command::Infsup { pair, k, mesh, levels, method, export_ops } => cmd_infsup(pair, *k, mesh, *levels, *method, export_ops.as_deref()),
        Command::Equivalence { k, mesh } => cmd_equivalence(*k, mesh),
        Command::Solve { pair, k, mesh, pressure_boost } => cmd_solve(pair, *k, mesh, *pressure_boost),
        Command::Convergence { pair, k, mesh, levels, expect_rate, rate_tol } => cmd_convergence(pair, *k, mesh, *levels, *expect_rate, *rate_tol),
        Command::Unisolvence { space, d, trials } => cmd_unisolvence(space, *d, *trials, seed),
    }
}

fn main() {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", json!({"error": format!("{e:#}")}));
            std::process::exit(2);
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &report.body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", report.body);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("{}", json!({"error": format!("{e:#}")}));
        std::process::exit(2);
    }
    if !report.failures.is_empty() {
        eprintln!("{}", json!({"failures": report.failures}));
        std::process::exit(1);
    }
}
