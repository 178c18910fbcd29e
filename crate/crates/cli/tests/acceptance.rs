//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use cmc_cli::commands::{cmd_switch, cmd_trace};
use cmc_cli::config::{ProblemKey, Settings};
use cmc_core::continuation::{step, BranchPoint, ContinuationConfig};
use cmc_core::geometry::{signed_volume, Surface};
use cmc_core::problems::oracles::{cap_height, cap_lambda};
use cmc_core::problems::{disk_problem, max_height, ProblemSpec};
use cmc_core::spectral::{apply, assemble, Grid};
use cmc_core::system::{
    area_weights, jacobi_operator, jacobian, residual, stability, BaseState, UnknownTriple,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn settings(problem: ProblemKey, out: &Path) -> Settings {
    Settings {
        problem: Some(problem),
        out: Some(out.to_path_buf()),
        ..Default::default()
    }
}

/// Criteria 1 and 2 share one disk trace.
fn disk_accuracy_and_speed(tmp: &Path) -> (Outcome, Outcome) {
    let s = Settings {
        n: Some(24),
        m: Some(24),
        h: Some(0.3),
        steps: Some(300),
        v_max: Some(7.0),
        ..settings(ProblemKey::Disk, &tmp.join("disk"))
    };
    let t0 = Instant::now();
    let summary = match cmd_trace(&s, None) {
        Ok(s) => s,
        Err(e) => return (check(false, format!("trace failed: {e}")), check(false, "no trace")),
    };
    let elapsed = t0.elapsed().as_secs_f64();
    let pts = &summary.branch.points;
    let steps = pts.len() - 1;
    let reached = pts.last().unwrap().volume >= 7.0;
    let (mut el, mut ez) = (0.0f64, 0.0f64);
    for p in &pts[1..] {
        let lam = cap_lambda(p.volume);
        let z = cap_height(p.volume);
        el = el.max(((p.lambda - lam) / lam).abs());
        ez = ez.max(((max_height(&p.surface) - z) / z).abs());
    }
    let accuracy = check(
        reached && steps <= 300 && el < 1e-6 && ez < 1e-5,
        format!(
            "reached V = {:.4} in {steps} steps; max rel. error λ {el:.2e} (< 1e-6), z_M {ez:.2e} (< 1e-5)",
            pts.last().unwrap().volume
        ),
    );
    let per_step = elapsed / steps as f64;
    let speed = check(
        per_step <= 1.0,
        format!("{per_step:.3} s per step including the eigensolve and output (≤ 1.0 s)"),
    );
    (accuracy, speed)
}

/// Criteria 3 and 4 share one rivulet trace.
fn rivulet_bifurcation_and_switch(tmp: &Path) -> (Outcome, Outcome) {
    let out = tmp.join("rivulet");
    let s = Settings {
        n: Some(32),
        m: Some(32),
        l: Some(0.2),
        ..settings(ProblemKey::Rivulet, &out)
    };
    let summary = match cmd_trace(&s, None) {
        Ok(s) => s,
        Err(e) => return (check(false, format!("trace failed: {e}")), check(false, "no trace")),
    };
    let branch = &summary.branch;
    let problem = cmc_core::problems::rivulet_problem(0.2, 32, 32).unwrap();
    let mut mu_err = 0.0f64;
    let mut checked = 0;
    for p in &branch.points {
        if (0.02..=0.3).contains(&p.volume) {
            let mu0 = problem.oracle_mu0(p.volume).unwrap();
            mu_err = mu_err.max((p.stability.mu_min() - mu0).abs());
            checked += 1;
        }
    }
    let flips: Vec<_> = branch.beta_events().collect();
    let v_star = flips.first().and_then(|e| e.refined_volume);
    let third = check(
        flips.len() == 1 && v_star.is_some_and(|v| (v - 0.140135).abs() < 1e-5) && mu_err < 1e-6 && checked > 5,
        format!(
            "{} stability change(s), V* = {}, |ΔV*| = {:.1e} (< 1e-5); max |μ_min − μ₀| = {mu_err:.1e} over {checked} points (< 1e-6)",
            flips.len(),
            v_star.map_or("none".into(), |v| format!("{v:.8}")),
            v_star.map_or(f64::NAN, |v| (v - 0.140135).abs())
        ),
    );

    let Some(v_star) = v_star else {
        return (third, check(false, "no bifurcation to switch at"));
    };
    let beyond: Vec<_> = branch.points.iter().filter(|p| p.volume > v_star).collect();
    let symmetric_index_one = !beyond.is_empty() && beyond.iter().all(|p| p.stability.index == 1);
    let mut sides = Vec::new();
    let mut details = Vec::new();
    for dir in [1.0, -1.0] {
        let sw = Settings {
            steps: Some(5),
            ..Default::default()
        };
        match cmd_switch(&sw, &out.join("bifurcation-1.json"), dir) {
            Ok(r) => {
                let defect = r.branch.points.iter().map(|p| problem.symmetry_defect(&p.surface)).fold(f64::INFINITY, f64::min);
                let stable = r.branch.points.iter().all(|p| p.stability.index == 0);
                details.push(format!(
                    "side {dir:+}: {} points, V up to {:.6}, indices all 0: {stable}, min defect {defect:.1e}",
                    r.branch.points.len(),
                    r.branch.points.last().unwrap().volume
                ));
                sides.push(stable && defect > 1e-9);
            }
            Err(e) => {
                details.push(format!("side {dir:+}: {e}"));
                sides.push(false);
            }
        }
    }
    let fourth = check(
        symmetric_index_one && sides.len() == 2 && sides.iter().all(|&s| s),
        format!(
            "symmetric branch beyond V* has index 1 at all {} points: {symmetric_index_one}; {}",
            beyond.len(),
            details.join("; ")
        ),
    );
    (third, fourth)
}

fn bridge_structure(tmp: &Path) -> Outcome {
    let out = tmp.join("bridge");
    let s = Settings {
        n: Some(16),
        m: Some(32),
        v_max: Some(9.0),
        ..settings(ProblemKey::Bridge, &out)
    };
    let summary = match cmd_trace(&s, None) {
        Ok(s) => s,
        Err(e) => return check(false, format!("trace failed: {e}")),
    };
    let problem = cmc_core::problems::bridge_problem(16, 32).unwrap();
    let events = summary.branch.beta_events().count();
    let flips: Vec<f64> = summary
        .branch
        .beta_events()
        .filter_map(|e| e.refined_volume)
        .filter(|&v| v > PI && v < 9.0)
        .collect();
    let windows = events == 2 && flips.len() == 2 && flips[0] > 5.0 && flips[0] < 7.0 && flips[1] > 7.0 && flips[1] < 9.0;
    let mut modes = Vec::new();
    for k in 1..=flips.len() {
        let sw = Settings {
            steps: Some(3),
            ..Default::default()
        };
        let mode = cmd_switch(&sw, &out.join(format!("bifurcation-{k}.json")), 1.0)
            .ok()
            .and_then(|r| {
                let ms: Vec<_> = r.branch.points.iter().map(|p| problem.dominant_angular_mode(&p.surface)).collect();
                if ms.windows(2).all(|w| w[0] == w[1]) {
                    ms[0]
                } else {
                    None
                }
            });
        modes.push(mode);
    }
    check(
        windows && modes == [Some(1), Some(2)],
        format!("{events} stability changes, located at V* = {flips:.6?} (windows (5, 7) and (7, 9)); switched branch modes {modes:?} (expected 1, 2)"),
    )
}

fn bessel(nu: i32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(nu) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..80 {
        term *= -(x * x / 4.0) / (k as f64 * (k as f64 + nu as f64));
        sum += term;
    }
    sum
}

fn j11_squared() -> f64 {
    let mut x = 3.8;
    for _ in 0..30 {
        let f = bessel(1, x);
        x -= f / (bessel(0, x) - f / x);
    }
    x * x
}

fn traced_cap(p: &ProblemSpec, h: f64) -> BaseState {
    let base = p.initial_state().unwrap();
    let start = BranchPoint::from_base(&base, &p.disc, None).unwrap();
    step(&base, &start.tangent, h, &ContinuationConfig::default(), &p.disc)
        .unwrap()
        .base(&p.disc)
        .unwrap()
}

fn jacobian_fd_error(p: &ProblemSpec, base: &BaseState) -> f64 {
    let k = p.disc.len();
    let mut t = base.origin();
    t.phi = p.grid().sample(|u, v| 0.01 * (1.0 - u * u) * (1.0 - v * v) * (1.0 + u + 0.5 * v));
    t.lambda += 0.05;
    let j = jacobian(base, &t, &p.disc).unwrap();
    let x0 = t.to_vec();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for col in 0..k + 2 {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[col] += h;
        xm[col] -= h;
        let rp = residual(base, &UnknownTriple::from_slice(&xp), &p.disc).unwrap();
        let rm = residual(base, &UnknownTriple::from_slice(&xm), &p.disc).unwrap();
        let scale = (0..=k).map(|r| j[(r, col)].abs()).fold(1e-3, f64::max);
        for row in 0..=k {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            worst = worst.max((fd - j[(row, col)]).abs() / scale);
        }
    }
    worst
}

fn property_suite() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // exact Jacobian against central differences on a flat and a curved base
    let small = disk_problem(8, 8).unwrap();
    let flat = small.initial_state().unwrap();
    let cap = traced_cap(&small, 0.6);
    let fd = jacobian_fd_error(&small, &flat).max(jacobian_fd_error(&small, &cap));
    pass &= fd < 1e-5;
    parts.push(format!("Jacobian vs FD {fd:.1e} (< 1e-5)"));

    // weighted symmetry of the Jacobi operator on smooth fields over a cap
    let p = disk_problem(20, 20).unwrap();
    let base = traced_cap(&p, 0.8);
    let l = jacobi_operator(&base, &p.disc);
    let c = area_weights(&base, &p.disc);
    let bubble = |u: f64, v: f64| (1.0 - u * u) * (1.0 - v * v);
    let fields = [
        p.grid().sample(bubble),
        p.grid().sample(|u, v| bubble(u, v) * (u + 0.5 * v * v)),
        p.grid().sample(|u, v| bubble(u, v) * (2.0 * u * v).cos()),
    ];
    let lf: Vec<Vec<f64>> = fields.iter().map(|f| apply(&l, f)).collect();
    let interior: Vec<usize> = p.disc.interior().collect();
    let mut asym = 0.0f64;
    for a in 0..fields.len() {
        for b in 0..fields.len() {
            let ab: f64 = interior.iter().map(|&i| c[i] * fields[b][i] * lf[a][i]).sum();
            let ba: f64 = interior.iter().map(|&i| c[i] * fields[a][i] * lf[b][i]).sum();
            asym = asym.max((ab - ba).abs() / (1.0 + ab.abs()));
        }
    }
    pass &= asym < 1e-8;
    parts.push(format!("operator symmetry {asym:.1e} (< 1e-8)"));

    // first twisted eigenvalue of the flat disk
    let p = disk_problem(24, 24).unwrap();
    let mu = stability(&p.initial_state().unwrap(), &p.disc).unwrap().mu_min();
    let j = j11_squared();
    pass &= (mu - j).abs() < 1e-6;
    parts.push(format!("flat disk μ_min {mu:.9} vs j₁₁² {j:.9} (< 1e-6)"));

    // hemisphere volume through the conformal disk and inverse stereographic projection
    let grid = p.grid();
    let flat = &p.initial;
    let mut pts = [vec![], vec![], vec![]];
    for n in 0..grid.len() {
        let (a, b) = (flat.x[n], flat.y[n]);
        let r2 = a * a + b * b;
        pts[0].push(2.0 * a / (1.0 + r2));
        pts[1].push(2.0 * b / (1.0 + r2));
        pts[2].push((1.0 - r2) / (1.0 + r2));
    }
    let [x, y, z] = pts;
    let hemi = Surface::new(x, y, z).unwrap();
    let vol = signed_volume(&hemi, &p.disc.ops).abs();
    pass &= (vol - 2.0 * PI / 3.0).abs() < 1e-8;
    parts.push(format!("hemisphere volume error {:.1e} (< 1e-8)", (vol - 2.0 * PI / 3.0).abs()));

    // spectral convergence of derivative errors
    let f = |u: f64, v: f64| (v + 0.3).cos() / (1.0 + 4.0 * u * u);
    let fu = |u: f64, v: f64| -8.0 * u * (v + 0.3).cos() / (1.0 + 4.0 * u * u).powi(2);
    let fuu = |u: f64, v: f64| (v + 0.3).cos() * (96.0 * u * u - 8.0) / (1.0 + 4.0 * u * u).powi(3);
    let mut errs = Vec::new();
    for n in [8, 12, 16, 20, 24] {
        let grid = Grid::chebyshev(n, n, 1.0, 1.0).unwrap();
        let ops = assemble(&grid).unwrap();
        let vals = grid.sample(f);
        let e1 = apply(&ops.du, &vals).iter().zip(grid.sample(fu)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e2 = apply(&ops.duu, &vals).iter().zip(grid.sample(fuu)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errs.push((e1, e2));
    }
    let monotone = errs.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    pass &= monotone;
    let list = |v: Vec<f64>| v.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", ");
    parts.push(format!(
        "D_u errors [{}], D_uu errors [{}] decreasing over n = 8..24: {monotone}",
        list(errs.iter().map(|e| e.0).collect()),
        list(errs.iter().map(|e| e.1).collect())
    ));
    check(pass, parts.join("; "))
}

fn determinism(tmp: &Path) -> Outcome {
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let s = Settings {
            n: Some(16),
            m: Some(16),
            steps: Some(15),
            ..settings(ProblemKey::Disk, &tmp.join(format!("det-{run}")))
        };
        match cmd_trace(&s, None) {
            Ok(r) => files.push(std::fs::read(r.dir.join("branch.csv")).unwrap()),
            Err(e) => return check(false, format!("trace failed: {e}")),
        }
    }
    check(
        files[0] == files[1],
        format!("two disk runs wrote {} and {} bytes of branch.csv, identical: {}", files[0].len(), files[1].len(), files[0] == files[1]),
    )
}

fn main() {
    cmc_cli::commands::init_parallelism().expect("thread setting");
    let tmp = tempfile::tempdir().expect("temporary directory");
    let tmp = tmp.path();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    let (c1, c2) = disk_accuracy_and_speed(tmp);
    results.push((1, "spherical-cap accuracy", c1));
    results.push((2, "per-step speed", c2));
    let (c3, c4) = rivulet_bifurcation_and_switch(tmp);
    results.push((3, "rivulet bifurcation", c3));
    results.push((4, "rivulet branch switch", c4));
    results.push((5, "liquid bridge structure", bridge_structure(tmp)));
    results.push((6, "property suite", property_suite()));
    results.push((7, "determinism", determinism(tmp)));

    let mut failed = 0;
    for (k, name, o) in &results {
        println!("[{}] criterion {k} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
