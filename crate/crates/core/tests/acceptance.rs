//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use alfeld::bubbles::modify_bubble;
use alfeld::local_div::{boundary_trace_max, solve_local_div};
use alfeld::mesh::geometry::barycenter;
use alfeld::mesh::{builtin_mesh, cube_kuhn, reference_simplex, unit_square, MacroMesh, RefinedMesh, SplitRule};
use alfeld::poly::{LambdaSystem, SplitPoly};
use alfeld::rng::{random_simplex, random_zero_mean, rng};
use alfeld::space::{build_pair, check_unisolvence, div_conforming_p2_dimension, divergence_image_check, local_family, raw_rank, Family, Functional, PairKind, ALL_PAIRS};
use alfeld::stability::{equivalence_check, infsup_constant, InfSupMethod};
use alfeld::stokes::{convergence_study, solve_stokes, CaseKind, ManufacturedCase};
use rayon::prelude::*;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn split(m: &MacroMesh) -> Arc<RefinedMesh> {
    Arc::new(RefinedMesh::new(m, SplitRule::Barycenter).expect("valid mesh"))
}

fn bundled() -> Vec<(&'static str, MacroMesh)> {
    ["tri1", "square2", "square4", "tet1", "cube6"].iter().map(|n| (*n, builtin_mesh(n, None).unwrap())).collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Default, Clone, Copy)]
struct LocalWorst {
    rel: f64,
    trace: f64,
    cont: f64,
    identity: f64,
    trials: usize,
}

fn merge(a: LocalWorst, b: LocalWorst) -> LocalWorst {
    LocalWorst { rel: a.rel.max(b.rel), trace: a.trace.max(b.trace), cont: a.cont.max(b.cont), identity: a.identity.max(b.identity), trials: a.trials + b.trials }
}

/// Criteria 1 and 2 share their trials.
fn local_div_sweep() -> Result<(LocalWorst, f64), String> {
    let start = Instant::now();
    let mut jobs = Vec::new();
    for d in 2..=4 {
        for k in 1..=4 {
            for geom in 0..=10 {
                jobs.push((d, k, geom));
            }
        }
    }
    let worst = jobs
        .par_iter()
        .map(|&(d, k, geom)| {
            let mut g = rng(1000 + d as u64, (k * 100 + geom) as u64);
            let pts = if geom == 0 { reference_simplex(d).cell_points(0) } else { random_simplex(d, &mut g) };
            let ls = LambdaSystem::<f64>::new(&pts, &barycenter(&pts)).map_err(|e| e.to_string())?;
            let mut w = LocalWorst::default();
            for _ in 0..100 {
                let p: SplitPoly<f64> = random_zero_mean(&ls, k - 1, &mut g);
                let r = solve_local_div(&p, k, &ls).map_err(|e| format!("d={d} k={k}: {e}"))?;
                if r.p_norm > 0.0 {
                    w.rel = w.rel.max(r.residual_norm / r.p_norm);
                }
                w.trace = w.trace.max(boundary_trace_max(&r.v, &ls, 4, &mut g));
                w.cont = r.v.iter().map(|c| ls.continuity_residual(c, 4)).fold(w.cont, f64::max);
                w.identity = w.identity.max(r.identity_residual);
                w.trials += 1;
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>, String>>()?
        .into_iter()
        .fold(LocalWorst::default(), merge);
    Ok((worst, start.elapsed().as_secs_f64()))
}

fn criterion_1(sweep: &Result<(LocalWorst, f64), String>) -> Outcome {
    let (w, secs) = sweep.clone()?;
    check(
        w.rel <= 1e-10 && w.trace <= 1e-11 && w.cont <= 1e-11 && secs <= 60.0,
        format!("{} solves, max rel residual {:.2e}, trace {:.2e}, continuity {:.2e}, {:.1} s", w.trials, w.rel, w.trace, w.cont, secs),
    )
}

fn criterion_2(sweep: &Result<(LocalWorst, f64), String>) -> Outcome {
    let (w, _) = sweep.clone()?;
    check(w.identity <= 1e-10, format!("max first-child identity residual {:.2e} over {} trials", w.identity, w.trials))
}

fn criterion_3() -> Outcome {
    let mut dev: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut n = 0;
    for d in [2, 3] {
        let mut g = rng(3000, d as u64);
        for _ in 0..50 {
            let pts = random_simplex(d, &mut g);
            let ls = LambdaSystem::<f64>::new(&pts, &barycenter(&pts)).map_err(|e| e.to_string())?;
            for i in 0..=d {
                let m = modify_bubble(&ls, i).map_err(|e| e.to_string())?;
                let div = ls.divergence(&m.field).map_err(|e| e.to_string())?;
                let c = SplitPoly::constant(d, div.degree(), m.div_value);
                dev = dev.max(div.sub(&c).map_err(|e| e.to_string())?.max_abs());
                let diff: Vec<_> = m.field.iter().zip(&m.bubble.field).map(|(a, b)| a.sub(b).unwrap()).collect();
                trace = trace.max(boundary_trace_max(&diff, &ls, 8, &mut g));
                n += 1;
            }
        }
    }
    check(dev <= 1e-11 && trace <= 1e-11, format!("{n} bubbles, divergence deviation {dev:.2e}, trace mismatch {trace:.2e}"))
}

fn criterion_4() -> Outcome {
    let pts = reference_simplex(3).cell_points(0);
    let ls = LambdaSystem::<f64>::new(&pts, &barycenter(&pts)).map_err(|e| e.to_string())?;
    let el = local_family(Family::VR, &ls).map_err(|e| e.to_string())?;
    let dim = raw_rank(&el.raw).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 4];
    for f in &el.functionals {
        counts[match f {
            Functional::VertexValue { .. } => 0,
            Functional::VertexDiv { .. } => 1,
            Functional::EdgeMoment { .. } => 2,
            Functional::FaceFlux { .. } => 3,
        }] += 1;
    }
    let (kernel, rank) = div_conforming_p2_dimension(&ls).map_err(|e| e.to_string())?;
    check(
        dim == 38 && counts == [12, 4, 18, 4] && kernel == 34 && rank == 34,
        format!("dim V_R = {dim}, dofs {counts:?}, dim P2 ∩ H(div) = {kernel} (span rank {rank})"),
    )
}

fn criterion_5() -> Outcome {
    let mut g = rng(5000, 0);
    let mut smin = f64::INFINITY;
    for _ in 0..100 {
        let pts = random_simplex(3, &mut g);
        let ls = LambdaSystem::<f64>::new(&pts, &barycenter(&pts)).map_err(|e| e.to_string())?;
        for fam in [Family::Mf, Family::VR] {
            let r = check_unisolvence(fam, &ls).map_err(|e| format!("{}: {e}", fam.name()))?;
            smin = smin.min(r.sigma_min_scaled);
        }
    }
    check(smin >= 1e-10, format!("200 DOF matrices, min scaled sigma {smin:.3e}"))
}

fn div_free_configs(d: usize) -> Vec<(PairKind, usize)> {
    let mut out = Vec::new();
    for kind in ALL_PAIRS.into_iter().filter(|p| p.divergence_free()) {
        if kind.uses_k() {
            for k in 1..=d.max(2) {
                if kind == PairKind::Cor64 && k >= d {
                    continue;
                }
                out.push((kind, k));
            }
        } else {
            out.push((kind, 1));
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut label = String::new();
    let mut n = 0;
    for (name, m) in bundled() {
        let r = split(&m);
        for (kind, k) in div_free_configs(m.dim()) {
            let pair = build_pair(kind, &r, k).map_err(|e| format!("{kind} on {name}: {e}"))?;
            let rep = divergence_image_check(&pair.velocity, &pair.pressure).map_err(|e| e.to_string())?;
            if rep.max_relative_residual >= worst {
                worst = rep.max_relative_residual;
                label = format!("{kind} k={k} on {name}");
            }
            n += 1;
        }
    }
    check(worst <= 1e-10, format!("{n} pair/mesh checks, worst {worst:.2e} ({label})"))
}

fn certified_configs(d: usize) -> Vec<(PairKind, usize)> {
    let mut out = vec![(PairKind::Cor52, 1), (PairKind::PkPk1r, d)];
    out.extend((1..d).map(|k| (PairKind::Cor64, k)));
    out.push((PairKind::Cor68, 1));
    out.push((PairKind::VrWr, 1));
    out
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let levels: Vec<(usize, Vec<MacroMesh>)> = vec![(2, vec![unit_square(2), unit_square(4), unit_square(8)]), (3, vec![cube_kuhn(1), cube_kuhn(2)])];
    let mut jobs = Vec::new();
    for (d, meshes) in &levels {
        for (kind, k) in certified_configs(*d) {
            for (level, m) in meshes.iter().enumerate() {
                jobs.push((*d, kind, k, level, m));
            }
        }
    }
    let betas: Vec<(usize, PairKind, usize, usize, f64)> = jobs
        .par_iter()
        .map(|&(d, kind, k, level, m)| {
            let pair = build_pair(kind, &split(m), k).map_err(|e| e.to_string())?;
            let rep = infsup_constant(&pair, level, InfSupMethod::Auto).map_err(|e| format!("{kind} d={d} level {level}: {e}"))?;
            Ok((d, kind, k, level, rep.beta_h))
        })
        .collect::<Result<_, String>>()?;
    let mut failures = Vec::new();
    let mut min_beta = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    for (d, _) in &levels {
        for (kind, k) in certified_configs(*d) {
            let b: Vec<f64> = betas.iter().filter(|x| x.0 == *d && x.1 == kind && x.2 == k).map(|x| x.4).collect();
            let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(0.0, f64::max);
            min_beta = min_beta.min(lo);
            min_ratio = min_ratio.min(lo / hi);
            if lo < 1e-6 || lo / hi < 0.5 {
                failures.push(format!("{kind} d={d} k={k} betas {:?}", b.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{} solves, min beta {min_beta:.3e}, min ratio {min_ratio:.3}, {secs:.1} s", betas.len());
    if !failures.is_empty() {
        return Err(format!("{detail}; {}", failures.join("; ")));
    }
    check(secs <= 600.0, detail)
}

fn criterion_8() -> Outcome {
    let mut n = 0;
    let mut bad = Vec::new();
    for (name, m) in bundled() {
        let r = split(&m);
        for k in [1, 2] {
            let rep = equivalence_check(&r, k).map_err(|e| e.to_string())?;
            n += 1;
            if !rep.agree {
                bad.push(format!("{name} k={k} refined {:?} macro {:?}", rep.beta_refined, rep.beta_macro));
            }
        }
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{n} mesh/degree combinations agree") } else { bad.join("; ") })
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (d, m) in [(2, unit_square(4)), (3, cube_kuhn(1))] {
        let r = split(&m);
        let case = ManufacturedCase::new(d, CaseKind::Curl).map_err(|e| e.to_string())?;
        for (kind, k) in div_free_configs(d).into_iter().filter(|(kind, k)| kind.certified(d, *k)) {
            let pair = build_pair(kind, &r, k).map_err(|e| e.to_string())?;
            let s = solve_stokes(&pair, &case).map_err(|e| format!("{kind} d={d}: {e}"))?;
            worst = worst.max(s.divergence_l2 / s.velocity_h1.max(1.0));
            n += 1;
        }
    }
    check(worst <= 1e-10, format!("{n} solves, worst scaled divergence {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let meshes: Vec<MacroMesh> = [4, 8, 16, 32].iter().map(|&n| unit_square(n)).collect();
    let case = ManufacturedCase::new(2, CaseKind::Curl).map_err(|e| e.to_string())?;
    let rate = |kind, k| -> Result<f64, String> {
        let t = convergence_study(kind, k, &case, &meshes).map_err(|e| e.to_string())?;
        t.finest_h1_rate().ok_or_else(|| "no rate".to_string())
    };
    let p2 = rate(PairKind::PkPk1r, 2)?;
    let c52 = rate(PairKind::Cor52, 1)?;
    let c68 = rate(PairKind::Cor68, 1)?;
    let vr = rate(PairKind::VrWr, 1)?;
    let gap = vr - c68;
    check(
        (p2 - 2.0).abs() <= 0.2 && (c52 - 1.0).abs() <= 0.2 && (gap - 1.0).abs() <= 0.3,
        format!("H1 rates: P2-P1r {p2:.3}, cor5.2 {c52:.3}, cor6.8 {c68:.3}, VR {vr:.3} (gap {gap:.3})"),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let sweep = local_div_sweep();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + Sync>)> = vec![
        ("1 local divergence exactness", Box::new(|| criterion_1(&sweep))),
        ("2 first-child identity", Box::new(|| criterion_2(&sweep))),
        ("3 modified bubbles", Box::new(criterion_3)),
        ("4 dimension counts", Box::new(criterion_4)),
        ("5 unisolvence", Box::new(criterion_5)),
        ("6 divergence-free inclusion", Box::new(criterion_6)),
        ("7 inf-sup positivity and robustness", Box::new(criterion_7)),
        ("8 refined/macro equivalence", Box::new(criterion_8)),
        ("9 divergence-free discrete solutions", Box::new(criterion_9)),
        ("10 convergence rates", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(s) => println!("PASS  criterion {name}: {s} [{secs:.1} s]"),
            Err(s) => {
                failed += 1;
                println!("FAIL  criterion {name}: {s} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
