//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report lines are never
//! captured. The long grid-LP reference runs execute only with `--ignored` or
//! `--include-ignored`.

use std::process::ExitCode;
use std::time::Instant;

use mis_bounds::cdf::{check_n_increasing, FiniteCDF};
use mis_bounds::grid::{uniform_grid, Coord, GridSet};
use mis_bounds::lower_bound::{lower_bound, LowerBoundOptions, LowerBoundResult};
use mis_bounds::mechanism::{expected_ratio, phi, worst_case_instance, Atom, DiscreteThresholdDistribution};
use mis_bounds::two_task::{
    admissible_cells, certify_two_task, cutting_plane, inner_max, refine_grid, CuttingPlaneOptions, LoopStatus,
    PiecewiseRationalCDF, RefineResult,
};
use mis_bounds::upper_bound::{choose_a, upper_bound, SentinelChoice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// Criterion 1: reference two-task bounds at small k.
const TWO_TASK_REFERENCE: [(usize, f64); 3] = [(5, 1.5174), (10, 1.5096), (16, 1.5066)];
const TWO_TASK_TOL: f64 = 1e-4;
// Criterion 2.
const K_FLAGSHIP: usize = 100;
const FLAGSHIP_UPPER: f64 = 1.5059964;
const FLAGSHIP_TOL: f64 = 1e-6;
const CERT_TOL: f64 = 1e-9;
// Criterion 3.
const REFINED_LOWER: f64 = 1.5059953;
const REFINED_LOWER_TOL: f64 = 1e-6;
const CLOSURE_GAP: f64 = 1.2e-6;
const R2_CENTRE: f64 = 1.505996;
const R2_TOL: f64 = 1e-6;
// Criterion 4.
const GRID_LP_KS: [usize; 3] = [10, 25, 50];
// Criterion 5.
const MONO_K: usize = 10;
const MONO_TOL: f64 = 1e-8;
// Criterion 6.
const ORACLE_CASES: usize = 100;
const ORACLE_TOL: f64 = 1e-12;
const EPS_LADDER: [f64; 3] = [1e-2, 1e-4, 1e-6];
// Criterion 7.
const SOUNDNESS_SETS: usize = 500;
const SOUNDNESS_K: usize = 8;
const SCAN: usize = 200;
const SCAN_TOL: f64 = 1e-9;
// Criterion 8.
const CDF_TOL: f64 = 1e-8;
// Extended grid-LP references: (n, k, lower, upper), upper compared with +1e-3.
const GRID_LP_REFERENCE: [(usize, usize, f64, f64); 3] =
    [(2, 250, 1.505980, 1.5093), (3, 50, 1.5076, 1.5238), (4, 20, 1.5195, 1.5628)];
const GRID_LP_LOWER_TOL: f64 = 1e-6;
const GRID_LP_UPPER_TOL: f64 = 1e-3;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn run(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let out = Outcome { name, pass, detail, seconds: start.elapsed().as_secs_f64() };
    println!(
        "[{}] {} - {} ({:.1}s)",
        if out.pass { "PASS" } else { "FAIL" },
        out.name,
        out.detail,
        out.seconds
    );
    out
}

fn two_task(k: usize) -> RefineResult {
    cutting_plane(&uniform_grid(k).unwrap(), &CuttingPlaneOptions::default()).expect("cutting plane")
}

fn lower(n: usize, grid: &GridSet<f64>) -> LowerBoundResult {
    lower_bound(n, grid, &LowerBoundOptions::default()).expect("lower bound LP")
}

fn criterion_1() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, reference) in TWO_TASK_REFERENCE {
        let r = two_task(k);
        let ok = r.status == LoopStatus::Converged && r.t_upper <= reference + TWO_TASK_TOL && r.t_upper >= reference - TWO_TASK_TOL;
        pass &= ok;
        parts.push(format!("k={k}: {:.7} vs {reference}", r.t_upper));
    }
    (pass, parts.join(", "))
}

fn flagship() -> ((bool, String), (RefineResult, f64)) {
    let r = two_task(K_FLAGSHIP);
    let (cert, _) = certify_two_task(&r).expect("certificate");
    let pass = r.status == LoopStatus::Converged
        && r.t_upper <= FLAGSHIP_UPPER + FLAGSHIP_TOL
        && cert.bound_float <= FLAGSHIP_UPPER + FLAGSHIP_TOL
        && (cert.bound_float - r.t_upper).abs() <= CERT_TOL;
    let detail = format!(
        "k={K_FLAGSHIP}: upper {:.10} after {} iterations, exact {} (|exact - float| = {:.1e})",
        r.t_upper,
        r.iterations,
        cert.bound_decimal,
        (cert.bound_float - r.t_upper).abs()
    );
    let upper = cert.bound_float.max(r.t_upper);
    ((pass, detail), (r, upper))
}

fn closure_check((r, upper): (RefineResult, f64)) -> (bool, String) {
    let refined = refine_grid(&r, mis_bounds::lower_bound::DEFAULT_BINDING_TOL).expect("refined grid");
    let l = lower(2, &refined);
    let gap = upper - l.bound;
    let pass = l.bound >= REFINED_LOWER - REFINED_LOWER_TOL
        && gap <= CLOSURE_GAP
        && (upper - R2_CENTRE).abs() <= R2_TOL
        && (l.bound - R2_CENTRE).abs() <= R2_TOL;
    let detail = format!(
        "refined grid |S|={} ({} LP variables): lower {:.10}, gap {:.2e}",
        refined.len(),
        l.num_vars,
        l.bound,
        gap
    );
    (pass, detail)
}

fn criterion_4(store: &mut Vec<(String, FiniteCDF<f64>)>) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for k in GRID_LP_KS {
        let l = lower(2, &uniform_grid(k).unwrap());
        let a = choose_a(&l.g, SentinelChoice::Default).unwrap();
        let u = upper_bound(&l.g, a).unwrap().bound_float;
        pass &= l.bound >= prev - MONO_TOL && l.bound <= FLAGSHIP_UPPER && u >= l.bound;
        prev = l.bound;
        parts.push(format!("k={k}: [{:.7}, {:.7}]", l.bound, u));
        store.push((format!("n=2 k={k}"), l.g));
    }
    (pass, parts.join(", "))
}

fn criterion_5(store: &mut Vec<(String, FiniteCDF<f64>)>) -> (bool, String) {
    let grid = uniform_grid(MONO_K).unwrap();
    let bounds: Vec<f64> = (2..=4)
        .map(|n| {
            let l = lower(n, &grid);
            store.push((format!("n={n} k={MONO_K}"), l.g));
            l.bound
        })
        .collect();
    let pass = bounds.windows(2).all(|w| w[0] <= w[1] + MONO_TOL);
    (pass, format!("k={MONO_K}: n=2 {:.9} <= n=3 {:.9} <= n=4 {:.9}", bounds[0], bounds[1], bounds[2]))
}

/// Random permutation-invariant distribution on `n` coordinates.
fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DiscreteThresholdDistribution {
    let atoms = rng.random_range(1..=4);
    let raw: Vec<(Vec<f64>, f64)> = (0..atoms)
        .map(|_| {
            let z = (0..n).map(|_| 4f64.powf(rng.random_range(-1.0..1.0))).collect();
            (z, rng.random_range(0.1..1.0))
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.1).sum();
    let atoms = raw.into_iter().map(|(z, w)| Atom { z, w: w / total }).collect();
    DiscreteThresholdDistribution::new(atoms).unwrap().symmetrized()
}

fn random_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let x = 4f64.powf(rng.random_range(-1.0..1.0));
        let y = 4f64.powf(rng.random_range(-1.0..1.0));
        if y.max(1.0 / x) >= 1.0 {
            return (x, y);
        }
    }
}

fn criterion_6() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst2 = 0.0f64;
    let mut worst_rate = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let p = random_symmetric(&mut rng, 2);
        let (x, y) = random_pair(&mut rng);
        let r = expected_ratio(&p, &worst_case_instance(&x, &y, 2, &0.0).unwrap()).unwrap();
        worst2 = worst2.max((r - phi(&p, &x, &y)).abs());

        let p3 = random_symmetric(&mut rng, 3);
        let (x, y) = random_pair(&mut rng);
        let target = phi(&p3, &x, &y);
        for eps in EPS_LADDER {
            let r = expected_ratio(&p3, &worst_case_instance(&x, &y, 3, &eps).unwrap()).unwrap();
            // |R_eps - phi| / ((n - 2) eps max{1, phi}) must stay <= 1.
            worst_rate = worst_rate.max((r - target).abs() / (eps * target.max(1.0)));
        }
    }
    (
        worst2 <= ORACLE_TOL && worst_rate <= 1.0 + 1e-9,
        format!("{ORACLE_CASES} cases: max |R - phi| = {worst2:.1e} (n=2), max normalised eps deviation {worst_rate:.3} (n=3)"),
    )
}

/// `F` on interval `c` by its defining piece, independent of the optimiser.
fn piece_cdf(f: &PiecewiseRationalCDF, c: usize, x: f64) -> f64 {
    let k = f.k();
    if c <= k {
        f.c0(c) + f.c1(c) / x
    } else {
        let q = 2 * k + 1 - c;
        1.0 - f.c0(q) - f.c1(q) * x
    }
}

fn scan_cell(f: &PiecewiseRationalCDF, i: usize, j: usize) -> f64 {
    let k = f.k();
    let mut best = f64::NEG_INFINITY;
    for a in 0..SCAN {
        let t = a as f64 / SCAN as f64;
        let x = if i == 2 * k {
            *f.s(i - 1) / (1.0 - t)
        } else {
            let lo = if i == 1 { 0.0 } else { *f.s(i - 1) };
            lo + (f.s(i) - lo) * t
        };
        if x <= 0.0 {
            continue;
        }
        let u = 1.0 / x;
        let fx = piece_cdf(f, i, x);
        for b in 0..SCAN {
            let s = b as f64 / SCAN as f64;
            let y = if j == 2 * k {
                f.s(j - 1) + 10.0 * s
            } else {
                let lo = if j == 1 { 0.0 } else { *f.s(j - 1) };
                lo + (f.s(j) - lo) * s
            };
            if y <= 0.0 || x * y < 1.0 {
                continue;
            }
            let v = y - u + (1.0 + u - y) * piece_cdf(f, j, y) + u * fx;
            best = best.max(v);
        }
    }
    best
}

fn random_member(rng: &mut ChaCha8Rng, k: usize) -> PiecewiseRationalCDF {
    let mut values: Vec<f64> = (0..2 * (k - 1)).map(|_| rng.random_range(0.0..0.5)).collect();
    values.sort_by(f64::total_cmp);
    PiecewiseRationalCDF::from_endpoint_values(uniform_grid(k).unwrap(), &values).unwrap()
}

fn criterion_7() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let members: Vec<PiecewiseRationalCDF> = (0..SOUNDNESS_SETS).map(|_| random_member(&mut rng, SOUNDNESS_K)).collect();
    let cells = admissible_cells(SOUNDNESS_K);
    let worst = members
        .par_iter()
        .map(|f| {
            cells
                .iter()
                .map(|&(i, j)| scan_cell(f, i, j) - inner_max(f, i, j).unwrap().value)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    (
        worst <= SCAN_TOL,
        format!(
            "{SOUNDNESS_SETS} sets, k={SOUNDNESS_K}, {} cells, {SCAN}x{SCAN} scan: max(scan - inner_max) = {worst:.2e}",
            cells.len()
        ),
    )
}

/// n-increasing, boundary, symmetry and Fréchet checks for a grid CDF.
fn grid_cdf_problems(g: &FiniteCDF<f64>) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(v) = check_n_increasing(g, &CDF_TOL) {
        out.push(format!("box sum {}", v.sum));
    }
    let n = g.n();
    let len = g.grid().len();
    if *g.values().last().unwrap() != 1.0 {
        out.push("g(∞, .., ∞) != 1".into());
    }
    if g.values().iter().any(|v| !(-CDF_TOL..=1.0 + CDF_TOL).contains(v)) {
        out.push("value outside [0, 1]".into());
    }
    let mut zero = vec![Coord::Inf; n];
    zero[0] = Coord::Zero;
    if g.value(&zero) != 0.0 {
        out.push("g is nonzero with a zero coordinate".into());
    }
    let coords: Vec<Coord> = (0..len).map(Coord::At).chain([Coord::Inf]).collect();
    for &cx in &coords {
        for &cy in &coords {
            let mut v = vec![Coord::Inf; n];
            v[0] = cx;
            v[1] = cy;
            let h = g.value(&v);
            let mut w = v.clone();
            w.swap(0, 1);
            if g.value(&w) != h {
                out.push("asymmetric".into());
            }
            let (mut vx, mut vy) = (vec![Coord::Inf; n], vec![Coord::Inf; n]);
            vx[0] = cx;
            vy[0] = cy;
            let (fx, fy) = (g.value(&vx), g.value(&vy));
            if h < (fx + fy - 1.0).max(0.0) - CDF_TOL || h > fx.min(fy) + CDF_TOL {
                out.push(format!("Fréchet bounds fail at {cx:?}, {cy:?}"));
            }
        }
    }
    out
}

fn family_problems(f: &PiecewiseRationalCDF, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out = f.family_violations(&CDF_TOL);
    let pts = f.grid().points();
    for _ in 0..2000 {
        let x = 8f64.powf(rng.random_range(-1.0..1.0));
        if pts.iter().any(|&s| (s - x).abs() < 1e-12 || (1.0 / s - x).abs() < 1e-12) {
            continue;
        }
        let sum = f.cdf(&x) + f.cdf(&(1.0 / x));
        if (sum - 1.0).abs() > 1e-12 {
            out.push(format!("F({x}) + F(1/{x}) = {sum}"));
        }
    }
    let xs: Vec<f64> = (1..4000).map(|i| i as f64 / 400.0).collect();
    for w in xs.windows(2) {
        if f.cdf(&w[0]) > f.cdf(&w[1]) + CDF_TOL {
            out.push(format!("F decreases between {} and {}", w[0], w[1]));
        }
    }
    if xs.iter().any(|x| !(-CDF_TOL..=1.0 + CDF_TOL).contains(&f.cdf(x))) {
        out.push("F leaves [0, 1]".into());
    }
    out
}

fn criterion_8(lp_solutions: &[(String, FiniteCDF<f64>)]) -> (bool, String) {
    let mut problems = Vec::new();
    for (label, g) in lp_solutions {
        for p in grid_cdf_problems(g) {
            problems.push(format!("{label}: {p}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut members: Vec<(String, PiecewiseRationalCDF)> =
        [5, 10, 16].into_iter().map(|k| (format!("cutting plane k={k}"), two_task(k).cdf)).collect();
    for i in 0..50 {
        members.push((format!("random #{i}"), random_member(&mut rng, 2 + i % 12)));
    }
    for (label, f) in &members {
        for p in family_problems(f, &mut rng) {
            problems.push(format!("{label}: {p}"));
        }
    }
    let detail = format!(
        "{} LP solutions, {} piecewise CDFs: {}",
        lp_solutions.len(),
        members.len(),
        if problems.is_empty() { "no violations".to_string() } else { problems[..problems.len().min(3)].join("; ") }
    );
    (problems.is_empty(), detail)
}

fn extended_grid_lp() -> Vec<Outcome> {
    GRID_LP_REFERENCE
        .iter()
        .map(|&(n, k, lo, up)| {
            run("extended grid LP", || {
                let l = lower(n, &uniform_grid(k).unwrap());
                let a = choose_a(&l.g, SentinelChoice::Auto).unwrap();
                let u = upper_bound(&l.g, a).unwrap().bound_float;
                (
                    l.bound >= lo - GRID_LP_LOWER_TOL && u <= up + GRID_LP_UPPER_TOL,
                    format!("n={n} k={k}: lower {:.7} (reference {lo}), upper {:.5} at a={a:.4} (reference {up})", l.bound, u),
                )
            })
        })
        .collect()
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let extended = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let only_extended = args.iter().any(|a| a == "--ignored");
    let mut outcomes = Vec::new();
    if !only_extended {
        let mut lp_solutions = Vec::new();
        outcomes.push(run("1 two-task bounds (k = 5, 10, 16)", criterion_1));
        let mut closure = None;
        outcomes.push(run("2 two-task bound at k = 100 with exact certificate", || {
            let (c2, c3) = flagship();
            closure = Some(c3);
            c2
        }));
        outcomes.push(run("3 refined-grid closure", || closure_check(closure.take().unwrap())));
        outcomes.push(run("4 grid LP at reduced scale", || criterion_4(&mut lp_solutions)));
        outcomes.push(run("5 monotonicity in n", || criterion_5(&mut lp_solutions)));
        outcomes.push(run("6 oracle equivalence", criterion_6));
        outcomes.push(run("7 inner-max soundness", criterion_7));
        outcomes.push(run("8 CDF validity", || criterion_8(&lp_solutions)));
    }
    if extended {
        outcomes.extend(extended_grid_lp());
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
