//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. Pass criterion numbers (`c3 c5`)
//! to run a subset.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use modnls::dispersion::params::{interval_i, interval_j, mesh_check, param_ledger, RecipExponent};
use modnls::dispersion::{EquationCoeffs, Propagator};
use modnls::harness::{partition_equivalence, EnsembleSpec, FieldLaw};
use modnls::modspace::{ModNormSpec, Partition, PartitionKind, PartitionSpec};
use modnls::nonlinear::{apply_exponential, exponential_series, exponential_tail_bound, NonlinSpec};
use modnls::solver::{
    bisect_delta, mass_drift, picard_solve, rounding_floor, scattering_map, split_step_oracle, sup_l2_distance,
    HypothesisPolicy, SolutionNorms, SolveConfig, TimeWindow,
};
use modnls::spectral::{Exponent, GridSpec, SpectralField};
use modnls::{Complex64 as C64, Rational64};
use serde_json::Value;

type Outcome = (bool, String);

fn l2(f: &SpectralField) -> f64 {
    f.lp_norm(Exponent::Finite(2.0)).unwrap()
}

fn sup(f: &SpectralField) -> f64 {
    f.lp_norm(Exponent::Infinity).unwrap()
}

fn bump(g: GridSpec, amp: f64) -> SpectralField {
    wide_bump(g, amp, 2.0)
}

fn wide_bump(g: GridSpec, amp: f64, width: f64) -> SpectralField {
    SpectralField::from_fn(g, |x| {
        let r2: f64 = x.iter().map(|a| a * a).sum();
        C64::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), 0.3 * x[0])
    })
}

fn solve_config(nonlin: NonlinSpec, grid: GridSpec, k_max: i64, window: TimeWindow) -> SolveConfig {
    SolveConfig {
        coeffs: EquationCoeffs::new(1.0, 0.0, 1.0).unwrap(),
        nonlin,
        grid,
        partition: PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max },
        window,
        delta: 50.0,
        max_iters: 60,
        tol: 1e-13,
        norms: SolutionNorms { s: 0.0, q: Exponent::Finite(1.0), r: Exponent::Finite(4.0), p: Exponent::Finite(6.0) },
        hypotheses: HypothesisPolicy::default(),
        oracle_dt: 1.0 / 512.0,
    }
}

fn quartic() -> NonlinSpec {
    NonlinSpec::power("u,conj,u,u", C64::new(-1.0, 0.0)).unwrap()
}

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn ledger() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for d in [2i64, 3] {
        let want_m0 = if d == 2 { 3 } else { 2 };
        for m in 3..=6 {
            let base = param_ledger(d, m, true, None, None).unwrap();
            if base.m0 != want_m0 || !base.all_pass() {
                bad.push(format!("d={d} m={m}: m0 = {}", base.m0));
            }
            let i = interval_i(m, d, true).unwrap();
            for inv_r in [i.lo, i.hi] {
                let l = param_ledger(d, m, true, Some(RecipExponent(inv_r)), None).unwrap();
                for name in ["(p_a, r) admissible", "(p~', r~') defect zero"] {
                    if !l.checks.iter().any(|c| c.name == name && c.pass) {
                        bad.push(format!("d={d} m={m} 1/r={inv_r}: {name}"));
                    }
                }
            }
            let mesh = mesh_check(d, m, true, 48).unwrap();
            if !mesh.violations.is_empty() {
                bad.push(format!("d={d} m={m}: {:?}", mesh.violations));
            }
        }
    }
    let i = interval_i(3, 2, true).unwrap();
    if (i.lo, i.hi) != (q(1, 8), q(1, 4)) {
        bad.push(format!("I_(3,2) = [{}, {}]", i.lo, i.hi));
    }
    let j = interval_j(q(1, 4), 2, true, 3).unwrap();
    if (j.lo, j.hi) != (q(1, 8), q(1, 6)) {
        bad.push(format!("J_(4,2) = [{}, {}]", j.lo, j.hi));
    }
    let reference = param_ledger(2, 4, true, Some(RecipExponent::integer(4)), Some(RecipExponent::integer(6))).unwrap();
    if !reference.all_pass() {
        bad.push(format!("reference exponents: {:?}", reference.checks));
    }
    let secs = start.elapsed().as_secs_f64();
    (bad.is_empty() && secs < 1.0, format!("16 ledgers and meshes, {} problems, {secs:.3} s (limit 1 s) {bad:?}", bad.len()))
}

fn propagator() -> Outcome {
    let start = Instant::now();
    let coeffs = [(1.0, 0.0, 1.0), (-0.7, 0.4, 1.3), (2.0, -1.0, 0.0), (0.5, 0.3, -0.8), (-1.2, 0.0, 0.6)];
    let grids = [GridSpec::with_periods(1, 4, 64).unwrap(), GridSpec::with_periods(2, 4, 64).unwrap()];
    let ens = EnsembleSpec { count: 50, seed: 2024, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude: 1.0, band: 1.5 };
    let (mut unit, mut group, mut commute) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..ens.count {
        let g = grids[i % 2];
        let (a, b, c) = coeffs[i % coeffs.len()];
        let prop = Propagator::new(EquationCoeffs::new(a, b, c).unwrap(), g);
        let partition = Partition::build(PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max: 2 }, g).unwrap();
        let f = ens.draw(i, 0, g).unwrap();
        let t = 3.0 * (1.7 * i as f64).sin();
        let s = 2.0 * (0.9 * i as f64 + 0.4).cos();
        let wt = prop.apply(t, &f).unwrap();
        unit = unit.max((l2(&wt) - l2(&f)).abs() / l2(&f));
        let composed = prop.apply(s, &wt).unwrap();
        group = group.max(l2(&composed.sub(&prop.apply(t + s, &f).unwrap()).unwrap()) / l2(&f));
        for k in partition.boxes() {
            let a = partition.box_op(k, &wt).unwrap();
            let b = prop.apply(t, &partition.box_op(k, &f).unwrap()).unwrap();
            commute = commute.max(l2(&a.sub(&b).unwrap()) / l2(&f));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = unit.max(group).max(commute);
    (
        worst <= 1e-12 && secs < 10.0,
        format!("50 fields, unitarity {unit:.1e}, group law {group:.1e}, box commutation {commute:.1e} (limit 1e-12), {secs:.2} s (limit 10 s)"),
    )
}

fn decomposition() -> Outcome {
    let start = Instant::now();
    let mut unity = 0.0f64;
    let mut recon = 0.0f64;
    for (d, n) in [(1usize, 64usize), (2, 64)] {
        let g = GridSpec::with_periods(d, 4, n).unwrap();
        let ens = EnsembleSpec { count: 10, seed: 5, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude: 1.0, band: 2.0 };
        for kind in [PartitionKind::PiecewiseSmoothBump, PartitionKind::TrigonometricWindow] {
            let p = Partition::build(PartitionSpec { kind, k_max: 3 }, g).unwrap();
            unity = unity.max(p.unity_residual());
            for i in 0..ens.count {
                let f = ens.draw(i, 0, g).unwrap();
                recon = recon.max(l2(&p.reconstruct(&f).unwrap().sub(&f).unwrap()) / l2(&f));
            }
        }
    }
    // at M = 4 both windows sample to the same values on the lattice
    let g = GridSpec::with_periods(2, 8, 128).unwrap();
    let ens = EnsembleSpec { count: 40, seed: 9, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude: 1.0, band: 2.0 };
    let mut drift = 0.0f64;
    let mut stars = Vec::new();
    for spec in [ModNormSpec::new(Exponent::Finite(2.0), Exponent::Finite(1.0), 0.0), ModNormSpec::new(Exponent::Finite(4.0), Exponent::Finite(2.0), 1.0)] {
        let coarse = partition_equivalence(g, 3, &ens, &spec).unwrap().c_star;
        let fine = partition_equivalence(g.refined(2).unwrap(), 3, &ens, &spec).unwrap().c_star;
        drift = drift.max((fine - coarse).abs() / coarse);
        stars.push(coarse);
    }
    let secs = start.elapsed().as_secs_f64();
    (
        unity <= 1e-12 && recon <= 1e-10 && drift < 0.05 && secs < 30.0,
        format!(
            "unity residual {unity:.1e} (limit 1e-12), reconstruction {recon:.1e} (limit 1e-10), C* {stars:.3?} drifting {:.2}% under doubling (limit 5%), {secs:.1} s (limit 30 s)",
            100.0 * drift
        ),
    )
}

fn modnls_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_modnls")).args(args).env_remove("MODNLS_THREADS").output().expect("binary runs")
}

fn ensembles() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verify.json");
    fs::write(&cfg, r#"{"refine": true}"#).unwrap();
    let out = dir.path().join("out");
    let start = Instant::now();
    let o = modnls_bin(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let secs = start.elapsed().as_secs_f64();
    let Ok(text) = fs::read_to_string(out.join("verify.json")) else {
        return (false, format!("no verify.json, exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    };
    let v: Value = serde_json::from_str(&text).unwrap();
    let reports = v["reports"].as_array().unwrap();
    let spread = reports.iter().map(|r| r["spread"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let change = reports.iter().map(|r| r["refinement_change"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let pass = o.status.success() && v["pass"] == Value::Bool(true) && spread <= 10.0 && change < 0.2 && secs < 300.0;
    (
        pass,
        format!(
            "{} ensembles of 100, worst max/median {spread:.2} (limit 10), worst doubling change {:.2}% (limit 20%), {secs:.0} s (limit 300 s)",
            reports.len(),
            100.0 * change
        ),
    )
}

fn picard() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::with_periods(2, 16, 256).unwrap();
    let mut cfg = solve_config(quartic(), grid, 3, TimeWindow { t_minus: 0.0, t_plus: 32.0, steps: 512 });
    cfg.oracle_dt = 1.0 / 256.0;
    let profile = wide_bump(grid, 1.0, 6.0);
    let mut seen = None;
    let search = bisect_delta(&cfg, &profile, 1e-2, 1e-1, 4, 0.9, |u, report| {
        let oracle = split_step_oracle(&cfg, u.first()).unwrap();
        seen = Some((report.clone(), sup_l2_distance(u, &oracle).unwrap()));
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (Some(probe), Some((report, deviation))) = (search.accepted, seen) else {
        return (false, format!("no amplitude in [1e-2, 1e-1] contracts: {:?}", search.probes));
    };
    let theta = report.contraction_factor;
    let run = report.geometric_run(rounding_floor(report.final_x_norm));
    (
        theta < 0.9 && run >= 5 && deviation <= 1e-4 && secs < 600.0,
        format!(
            "accepted amplitude {:.3} (delta {:.3e}), theta {theta:.2e} (limit 0.9), geometric run {run} iterations (need 5), oracle deviation {deviation:.1e} (limit 1e-4), {secs:.0} s (limit 600 s)",
            probe.amplitude, probe.delta
        ),
    )
}

fn conservation() -> Outcome {
    let grid = GridSpec::with_periods(2, 4, 64).unwrap();
    let cfg = solve_config(NonlinSpec::gauge_power(2, -1.0), grid, 2, TimeWindow { t_minus: 0.0, t_plus: 1.0, steps: 32 });
    let u0 = bump(grid, 0.5);
    let oracle = split_step_oracle(&cfg, &u0).unwrap();
    let (u, _) = picard_solve(&cfg, &u0).unwrap();
    let (a, b) = (mass_drift(&oracle), mass_drift(&u));
    (a <= 1e-8 && b <= 1e-5, format!("-|u|^4 u: oracle mass drift {a:.1e} (limit 1e-8), Picard {b:.1e} (limit 1e-5)"))
}

fn scattering() -> Outcome {
    let grid = GridSpec::with_periods(2, 4, 64).unwrap();
    let cfg = solve_config(quartic(), grid, 2, TimeWindow { t_minus: -1.0, t_plus: 1.0, steps: 32 });
    let mut worst_tail = 0.0f64;
    let mut changes = Vec::new();
    let amps = [0.01, 0.02, 0.04, 0.08];
    for &a in &amps {
        let (_, r) = scattering_map(&cfg, &bump(grid, a)).unwrap();
        let tol = r.wave.quadrature_tolerance;
        let minus = r.solve.tail.as_ref().map_or(f64::INFINITY, |t| t.end_defect);
        worst_tail = worst_tail.max(minus.max(r.wave.scattering_defect) / tol);
        changes.push(r.wave.change);
    }
    let xs: Vec<f64> = amps.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = changes.iter().map(|c| c.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let (zero, _) = scattering_map(&cfg, &SpectralField::zeros(grid)).unwrap();
    let exact_zero = zero.values().iter().all(|z| z.re == 0.0 && z.im == 0.0);
    (
        worst_tail <= 10.0 && (slope - 4.0).abs() <= 0.4 && exact_zero,
        format!("worst end defect {worst_tail:.2} x quadrature tolerance (limit 10), log-log slope {slope:.3} (want 4 +- 0.4), S(0) = 0 exactly: {exact_zero}"),
    )
}

fn exponential() -> Outcome {
    let grid = GridSpec::with_periods(2, 4, 32).unwrap();
    let ens = EnsembleSpec { count: 20, seed: 77, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude: 0.5, band: 1.0 };
    let lambdas = [C64::new(-1.0, 0.0), C64::new(0.5, 1.5), C64::new(0.0, -2.0), C64::new(1.8, -0.3)];
    let mut worst = 0.0f64;
    for i in 0..ens.count {
        let u = ens.draw(i, 0, grid).unwrap();
        let lambda = lambdas[i % lambdas.len()];
        let rho = 0.5 + 0.1 * i as f64;
        let spec = NonlinSpec::exponential(lambda, rho, 12).unwrap();
        let closed = apply_exponential(&spec, &u).unwrap();
        for cutoff in 1..=12 {
            let dev = sup(&closed.sub(&exponential_series(&spec, &u, cutoff).unwrap()).unwrap());
            worst = worst.max(dev / exponential_tail_bound(lambda, rho, cutoff, sup(&u)));
        }
    }
    let grid = GridSpec::with_periods(2, 4, 64).unwrap();
    let spec = NonlinSpec::exponential(C64::new(-1.0, 0.0), 1.0, 12).unwrap();
    let cfg = solve_config(spec, grid, 2, TimeWindow { t_minus: 0.0, t_plus: 1.0, steps: 64 });
    let u0 = bump(grid, 0.1);
    let (u, report) = picard_solve(&cfg, &u0).unwrap();
    let deviation = sup_l2_distance(&u, &split_step_oracle(&cfg, &u0).unwrap()).unwrap();
    let theta = report.contraction_factor;
    (
        worst <= 1.0 && theta < 0.9 && deviation <= 1e-4,
        format!("20 fields x 12 cutoffs, worst deviation {worst:.4} x tail bound (limit 1), Picard theta {theta:.2e} (limit 0.9), oracle deviation {deviation:.1e} (limit 1e-4)"),
    )
}

fn run_config(search: bool) -> String {
    let search = if search { r#", "search": {"lo": 0.01, "hi": 0.5, "bisections": 2}"# } else { "" };
    format!(
        r#"{{
  "solver": {{
    "coeffs": {{"alpha": 1.0, "gamma": 1.0}},
    "nonlin": {{"kind": "power", "pattern": "u,conj,u,u", "coeff": [-1, 0]}},
    "grid": {{"dim": 2, "periods": 4, "points": 64}},
    "partition": {{"kind": "piecewise-smooth-bump", "k_max": 2}},
    "window": {{"t_minus": -0.5, "t_plus": 0.5, "steps": 16}},
    "delta": 5.0,
    "norms": {{"s": 0.0, "q": 1, "r": 4, "p": 6}}
  }},
  "initial": {{"kind": "random", "law": {{"law": "gaussian-spectrum", "decay": 1.0}}, "amplitude": 0.3, "band": 1.0}},
  "oracle": true,
  "save_trajectory": true{search}
}}"#
    )
}

/// Files compared, and those that differ.
fn differing(a: &Path, b: &Path) -> (usize, Vec<String>) {
    let mut names: Vec<String> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.retain(|n| n != "manifest.json");
    names.sort();
    let count = names.len();
    (count, names.into_iter().filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok()).collect())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let write = |name: &str, text: &str| {
        let p = root.join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let run = write("run.json", &run_config(false));
    let searched = write("search.json", &run_config(true));
    let norm = write(
        "norm.json",
        r#"{"grid":{"dim":2,"periods":4,"points":64},"partition":{"kind":"trigonometric-window","k_max":3},"norm":{"p":3,"q":2,"s":0.5},"initial":{"kind":"random","law":{"law":"single-box"},"amplitude":1,"band":2}}"#,
    );
    let verify = write(
        "verify.json",
        r#"{"ensemble":{"count":6,"seed":3,"law":{"law":"gaussian-spectrum","decay":1.0},"amplitude":1.0,"band":2.0},"setup":{"coeffs":{"alpha":1.0,"gamma":1.0},"grid":{"dim":2,"periods":4,"points":64},"partition":{"kind":"piecewise-smooth-bump","k_max":3},"window":{"t_minus":0.0,"t_plus":1.0,"steps":16},"s":0.0,"q":1}}"#,
    );
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("params", vec!["params", "-d", "2", "-m", "4", "--gamma-nonzero", "--r", "4", "--p", "6"]),
        ("norm", vec!["norm", "--config", &norm]),
        ("evolve", vec!["evolve", "--config", &run]),
        ("picard", vec!["picard", "--config", &run]),
        ("picard-search", vec!["picard", "--config", &searched]),
        ("scatter", vec!["scatter", "--config", &run]),
        ("verify", vec!["verify", "--config", &verify, "--probe"]),
    ];
    let mut bad = Vec::new();
    let mut compared = 0;
    for (name, args) in &runs {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("{name}-{rep}"));
            let mut full: Vec<&str> = args.clone();
            let out_s = out.to_string_lossy().into_owned();
            full.extend(["--seed", "11", "--out", &out_s]);
            let o = modnls_bin(&full);
            if !o.status.success() {
                bad.push(format!("{name}: exit {:?} {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
            }
            outs.push(out);
        }
        let (count, diff) = differing(&outs[0], &outs[1]);
        if count == 0 {
            bad.push(format!("{name}: no outputs"));
        }
        compared += count;
        for f in diff {
            bad.push(format!("{name}: {f} differs"));
        }
    }
    (bad.is_empty(), format!("{} subcommand runs repeated, {compared} output files compared, mismatches {bad:?}", runs.len()))
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('c') && a[1..].parse::<u32>().is_ok()).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("c1", "parameter ledger", ledger),
        ("c2", "propagator suite", propagator),
        ("c3", "decomposition suite", decomposition),
        ("c4", "estimate ensembles", ensembles),
        ("c5", "Picard contraction", picard),
        ("c6", "conservation", conservation),
        ("c7", "scattering", scattering),
        ("c8", "exponential nonlinearity", exponential),
        ("c9", "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let (pass, detail) = check();
        println!("{} {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
