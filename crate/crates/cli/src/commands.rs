use modnls::dispersion::{self, ParamLedger};
use modnls::harness::{
    self, CheckSetup, EnsembleSpec, ExponentSplit, FieldLaw, GrowthPoint, HoelderMode, PairLaw, RatioReport,
    REFINEMENT_TOLERANCE,
};
use modnls::io::{self, field_metadata, write_csv, write_json, FieldMetadata};
use modnls::modspace::{NormReport, Partition};
use modnls::nonlinear::LipschitzExponents;
use modnls::solver::{self, SolutionNorms, SolveConfig, SolveReport};
use modnls::spectral::{Exponent, GridSpec, SpectralField, Trajectory};
use modnls::{Complex64 as C64, Error};
use serde::Serialize;

use crate::config::{NormConfig, ParamsConfig, RunConfig, VerifyConfig};
use crate::{CheckName, CliError, RunContext};

#[derive(Serialize)]
struct ParamsOut<'a> {
    #[serde(flatten)]
    ledger: &'a ParamLedger,
    all_pass: bool,
}

pub(crate) fn params(ctx: &mut RunContext, cfg: &ParamsConfig) -> Result<(), CliError> {
    ctx.set_config(cfg)?;
    let d = cfg.d.ok_or_else(|| CliError::Usage("params needs -d".into()))?;
    let m = cfg.m.ok_or_else(|| CliError::Usage("params needs -m".into()))?;
    let gn = cfg.gamma_nonzero.unwrap_or(false);
    let ledger = match dispersion::param_ledger(d, m, gn, cfg.r, cfg.p) {
        Ok(l) => l,
        Err(e) => {
            if e.is_hypothesis() {
                if let Ok(base) = dispersion::param_ledger(d, m, gn, None, None) {
                    eprintln!("{}", serde_json::to_string_pretty(&base)?);
                }
            }
            return Err(e.into());
        }
    };
    write_json(&ctx.path("params.json"), &ParamsOut { ledger: &ledger, all_pass: ledger.all_pass() })?;
    Ok(())
}

#[derive(Serialize)]
struct NormOut {
    #[serde(flatten)]
    report: NormReport,
    unity_residual: f64,
    lower_bound: f64,
    boxes: usize,
    field: FieldMetadata,
}

pub(crate) fn norm(ctx: &mut RunContext, cfg: &NormConfig) -> Result<(), CliError> {
    ctx.set_config(cfg)?;
    let partition = Partition::build(cfg.partition, cfg.grid)?;
    let f = cfg.initial.realize(cfg.grid, ctx.seed, &ctx.config_dir)?;
    let report = partition.mod_norm_report(&f, &cfg.norm)?;
    let per_box = partition.box_norms(&f, cfg.norm.p)?;
    let d = cfg.grid.dim();
    let mut header: Vec<String> = (0..d).map(|a| format!("k{}", a + 1)).collect();
    header.extend(["norm".into(), "weighted".into()]);
    let rows: Vec<Vec<f64>> = partition
        .boxes()
        .iter()
        .zip(&per_box)
        .map(|(k, v)| {
            let mut row: Vec<f64> = k.iter().map(|&a| a as f64).collect();
            row.extend([*v, Partition::weight(k, cfg.norm.s) * v]);
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&ctx.path("boxes.csv"), &header, &rows)?;
    write_json(
        &ctx.path("norm.json"),
        &NormOut {
            report,
            unity_residual: partition.unity_residual(),
            lower_bound: partition.lower_bound(),
            boxes: partition.boxes().len(),
            field: field_metadata(&f)?,
        },
    )?;
    Ok(())
}

const TIMESERIES_HEADER: [&str; 5] = ["t", "mass", "m_norm", "x_energy", "x_strichartz"];

/// Per sample: mass, `M^s_{2,q}` norm, and the two parts of the `X` norm
/// over `[t_0, t]`.
fn timeseries(partition: &Partition, u: &Trajectory, norms: &SolutionNorms) -> Result<Vec<Vec<f64>>, CliError> {
    let times = u.times();
    let rows_e = partition.box_norm_rows(u, Exponent::Finite(2.0))?;
    let rows_s = partition.box_norm_rows(u, norms.p)?;
    let mut out = Vec::with_capacity(times.len());
    for (j, f) in u.fields().iter().enumerate() {
        out.push(vec![
            times[j],
            solver::mass(f),
            partition.aggregate(&rows_e[j], norms.s, norms.q),
            partition.planchon_from_rows(&rows_e[..=j], &times[..=j], norms.s, norms.q, Exponent::Infinity)?,
            partition.planchon_from_rows(&rows_s[..=j], &times[..=j], norms.s, norms.q, norms.r)?,
        ]);
    }
    Ok(out)
}

fn write_run_fields(ctx: &mut RunContext, cfg: &RunConfig, u: &Trajectory) -> Result<(), CliError> {
    let partition = cfg.solver.partition()?;
    write_csv(&ctx.path("timeseries.csv"), &TIMESERIES_HEADER, &timeseries(&partition, u, &cfg.solver.norms)?)?;
    io::write_field(&ctx.path("final.bin"), u.last())?;
    if cfg.save_trajectory {
        io::write_trajectory(&ctx.path("trajectory.bin"), u)?;
    }
    Ok(())
}

fn initial(ctx: &RunContext, cfg: &RunConfig) -> Result<SpectralField, CliError> {
    cfg.initial.realize(cfg.solver.grid, ctx.seed, &ctx.config_dir)
}

#[derive(Serialize)]
struct EvolveOut {
    samples: usize,
    mass_drift: f64,
    sup_l2: f64,
    data_norm: f64,
    initial: FieldMetadata,
    last: FieldMetadata,
}

pub(crate) fn evolve(ctx: &mut RunContext, cfg: &RunConfig) -> Result<(), CliError> {
    ctx.set_config(cfg)?;
    cfg.solver.validate()?;
    let u0 = initial(ctx, cfg)?;
    let u = solver::split_step_oracle(&cfg.solver, &u0)?;
    let partition = cfg.solver.partition()?;
    write_run_fields(ctx, cfg, &u)?;
    write_json(
        &ctx.path("evolve.json"),
        &EvolveOut {
            samples: u.len(),
            mass_drift: solver::mass_drift(&u),
            sup_l2: solver::sup_l2(&u)?,
            data_norm: partition.mod_norm(&u0, &cfg.solver.norms.data_spec())?,
            initial: field_metadata(&u0)?,
            last: field_metadata(u.last())?,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct HypothesisLedger {
    message: String,
    violations: Vec<String>,
    params: Option<ParamLedger>,
}

/// Print and store every violated hypothesis of `cfg`.
fn report_hypotheses(ctx: &mut RunContext, cfg: &SolveConfig, scattering: bool, message: &str) -> Result<(), CliError> {
    let mut relaxed = cfg.clone();
    relaxed.hypotheses.enforce = false;
    let violations = solver::check_hypotheses(&relaxed, scattering).unwrap_or_default();
    let m = cfg.nonlin.degree().unwrap_or(3) as i64;
    let params = dispersion::param_ledger(cfg.grid.dim() as i64, m, cfg.coeffs.gamma_nonzero(), None, None).ok();
    let ledger = HypothesisLedger { message: message.to_string(), violations, params };
    eprintln!("{}", serde_json::to_string_pretty(&ledger)?);
    write_json(&ctx.path("hypotheses.json"), &ledger)?;
    Ok(())
}

fn write_differences(ctx: &mut RunContext, report: &SolveReport) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = report.differences.iter().enumerate().map(|(i, d)| vec![(i + 1) as f64, *d]).collect();
    write_csv(&ctx.path("differences.csv"), &["iteration", "difference"], &rows)?;
    Ok(())
}

/// Store what a failed solve produced, then pass the error on.
fn solve_failure(ctx: &mut RunContext, cfg: &SolveConfig, scattering: bool, name: &str, e: Error) -> CliError {
    let stored = match &e {
        Error::NonContraction(r) | Error::MaxIterations(r) => {
            write_json(&ctx.path(name), r.as_ref()).map_err(CliError::from).and_then(|_| write_differences(ctx, r))
        }
        Error::Hypothesis(msg) => report_hypotheses(ctx, cfg, scattering, msg),
        _ => Ok(()),
    };
    match stored {
        Ok(()) => e.into(),
        Err(io) => io,
    }
}

pub(crate) fn picard(ctx: &mut RunContext, cfg: &RunConfig) -> Result<(), CliError> {
    ctx.set_config(cfg)?;
    let mut u0 = initial(ctx, cfg)?;
    let solved = match &cfg.search {
        None => solver::picard_solve(&cfg.solver, &u0),
        Some(s) => {
            if !(s.lo > 0.0 && s.lo <= s.hi) {
                return Err(CliError::Config(format!("search range [{}, {}] is not positive and ordered", s.lo, s.hi)));
            }
            let mut best = None;
            let search = solver::bisect_delta(&cfg.solver, &u0, s.lo, s.hi, s.bisections, s.threshold, |u, r| {
                best = Some((u.clone(), r.clone()))
            });
            match search {
                Ok(search) => {
                    write_json(&ctx.path("delta_search.json"), &search)?;
                    match (best, &search.accepted) {
                        (Some(x), Some(probe)) => {
                            u0 = u0.scale(C64::new(probe.amplitude, 0.0));
                            Ok(x)
                        }
                        _ => return Err(CliError::Failed(format!("no amplitude in [{}, {}] contracts", s.lo, s.hi))),
                    }
                }
                Err(e) => Err(e),
            }
        }
    };
    let (u, mut report) = match solved {
        Ok(x) => x,
        Err(e) => return Err(solve_failure(ctx, &cfg.solver, false, "picard.json", e)),
    };
    if cfg.oracle {
        let oracle = solver::split_step_oracle(&cfg.solver, &u0)?;
        report.oracle_deviation = Some(solver::oracle_deviation(&u, &oracle)?.1);
    }
    write_differences(ctx, &report)?;
    write_run_fields(ctx, cfg, &u)?;
    write_json(&ctx.path("picard.json"), &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ScatterOut<'a> {
    norm_minus: f64,
    solve: &'a SolveReport,
    wave: &'a solver::WaveOperatorReport,
}

pub(crate) fn scatter(ctx: &mut RunContext, cfg: &RunConfig) -> Result<(), CliError> {
    ctx.set_config(cfg)?;
    let u0 = initial(ctx, cfg)?;
    let (u, report) = match solver::scatter_minus(&cfg.solver, &u0) {
        Ok(x) => x,
        Err(e) => return Err(solve_failure(ctx, &cfg.solver, true, "scatter.json", e)),
    };
    let (plus, wave) = solver::wave_operator_plus(&cfg.solver, &u, &u0)?;
    let partition = cfg.solver.partition()?;
    let norm_minus = partition.mod_norm(&u0, &cfg.solver.norms.data_spec())?;
    write_differences(ctx, &report)?;
    write_run_fields(ctx, cfg, &u)?;
    io::write_field(&ctx.path("u0_plus.bin"), &plus)?;
    write_json(&ctx.path("scatter.json"), &ScatterOut { norm_minus, solve: &report, wave: &wave })?;
    Ok(())
}

#[derive(Serialize)]
struct ReportSummary {
    check: String,
    label: String,
    max: f64,
    median: f64,
    spread: f64,
    failures: usize,
    excluded: usize,
    flagged: usize,
    probe: bool,
    bounded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement_change: Option<f64>,
}

#[derive(Serialize)]
struct VerifyOut {
    pass: bool,
    reports: Vec<ReportSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hoelder_growth: Option<Vec<GrowthPoint>>,
}

type Labelled = Vec<(String, RatioReport)>;

fn ratio_rows(report: &RatioReport) -> Vec<Vec<f64>> {
    report
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i as f64, s.lhs, s.rhs, s.ratio.unwrap_or(f64::NAN)])
        .collect()
}

/// Setup on a grid fine enough for a partition with `k_max` boxes per side.
fn with_k_max(setup: &CheckSetup, k_max: i64) -> Result<CheckSetup, CliError> {
    let g = setup.grid;
    let needed = 2 * g.periods() as usize * (2 * k_max as usize + 2);
    let grid = GridSpec::with_periods(g.dim(), g.periods(), needed.next_power_of_two().max(g.points()))?;
    let mut partition = setup.partition;
    partition.k_max = partition.k_max.max(k_max);
    Ok(CheckSetup { grid, partition, ..*setup })
}

pub(crate) fn verify(ctx: &mut RunContext, cfg: &VerifyConfig, which: CheckName, probe: bool) -> Result<(), CliError> {
    ctx.set_config(&(cfg, which, probe))?;
    let wants = |c: CheckName| which == CheckName::All || which == c;
    let k_max = cfg.setup.partition.k_max;
    let band_for = |factors: usize| cfg.ensemble.band.min((k_max - 1) as f64 / factors as f64);
    let with_band = |band: f64| EnsembleSpec { band, ..cfg.ensemble };

    type CheckFn<'a> = Box<dyn Fn(&CheckSetup) -> modnls::Result<Labelled> + 'a>;
    let mut checks: Vec<(&str, CheckFn)> = Vec::new();
    let st = &cfg.strichartz;
    if wants(CheckName::StrichartzHom) {
        checks.push((
            "strichartz-hom",
            Box::new(move |s| {
                let r = harness::check_homogeneous_strichartz(s, &cfg.ensemble, st.p, st.r, probe)?;
                Ok(vec![("lebesgue".into(), r.lebesgue), ("lifted".into(), r.lifted)])
            }),
        ));
    }
    if wants(CheckName::StrichartzInhom) {
        checks.push((
            "strichartz-inhom",
            Box::new(move |s| {
                let r = harness::check_inhomogeneous_strichartz(s, &cfg.ensemble, st.p, st.r, st.dual_p, st.dual_r, probe)?;
                Ok(vec![("lebesgue".into(), r.lebesgue), ("lifted".into(), r.lifted)])
            }),
        ));
    }
    if wants(CheckName::Hoelder) {
        let h = &cfg.hoelder;
        if h.p.len() != h.factors.len() || h.r.len() != h.factors.len() {
            return Err(CliError::Config("hoelder.p and hoelder.r need one entry per factor count".into()));
        }
        checks.push((
            "hoelder",
            Box::new(move |s| {
                let mut out = Vec::new();
                for (i, &n) in h.factors.iter().enumerate() {
                    let split = ExponentSplit::uniform(n, h.p[i], h.r[i])?;
                    for &mode in &h.modes {
                        let label = match mode {
                            HoelderMode::Planchon => format!("n{n}-planchon"),
                            HoelderMode::Modulation => format!("n{n}-modulation"),
                        };
                        out.push((label, harness::check_hoelder_like(s, &with_band(band_for(n)), &split, mode, probe)?));
                    }
                }
                Ok(out)
            }),
        ));
    }
    if wants(CheckName::Lipschitz) {
        let lc = &cfg.lipschitz;
        let m = lc.pattern.degree();
        checks.push((
            "lipschitz",
            Box::new(move |s| {
                let exps = LipschitzExponents { s: s.s, q: s.q, r_tilde: lc.r_tilde, p_tilde: lc.p_tilde, l: lc.l, m };
                let ens = with_band(band_for(m + 1));
                let mut out = Vec::new();
                for (label, law) in [("independent", PairLaw::Independent), ("v-zero", PairLaw::Zero)] {
                    out.push((label.into(), harness::check_power_lipschitz(s, &ens, &lc.pattern, &exps, law, probe)?));
                }
                Ok(out)
            }),
        ));
    }
    if wants(CheckName::Embeddings) {
        checks.push((
            "embeddings",
            Box::new(move |s| {
                let r = harness::check_embeddings(s, &cfg.ensemble, &cfg.embeddings)?;
                Ok(vec![("minkowski".into(), r.minkowski), ("bernstein".into(), r.bernstein)])
            }),
        ));
    }

    let refined = if cfg.refine { Some(cfg.setup.refined()?) } else { None };
    let mut summaries = Vec::new();
    for (name, check) in &checks {
        let reports = check(&cfg.setup)?;
        let fine = refined.as_ref().map(|s| check(s)).transpose()?;
        for (idx, (label, report)) in reports.iter().enumerate() {
            write_csv(&ctx.path(&format!("ratios_{name}_{label}.csv")), &["sample", "lhs", "rhs", "ratio"], &ratio_rows(report))?;
            let refined_max = fine.as_ref().map(|f| f[idx].1.max);
            summaries.push(ReportSummary {
                check: name.to_string(),
                label: label.clone(),
                max: report.max,
                median: report.median,
                spread: report.spread(),
                failures: report.failures,
                excluded: report.excluded,
                flagged: report.flagged.len(),
                probe: report.probe,
                bounded: report.bounded(),
                refined_max,
                refinement_change: fine.as_ref().map(|f| harness::refinement_change(report, &f[idx].1)),
            });
        }
    }

    let hoelder_growth = if probe && wants(CheckName::Hoelder) {
        let h = &cfg.hoelder;
        let setup = CheckSetup { s: 0.0, q: Exponent::Finite(2.0), ..with_k_max(&cfg.setup, 4)? };
        let split = ExponentSplit::uniform(2, h.p[0], h.r[0])?;
        let ens = EnsembleSpec { law: FieldLaw::MultiBox { boxes: 1 }, band: 1.5, ..cfg.ensemble };
        let growth = harness::hoelder_growth_probe(&setup, &ens, &split, &h.probe_boxes)?;
        let rows: Vec<Vec<f64>> = growth.iter().map(|g| vec![g.boxes as f64, g.max, g.median]).collect();
        write_csv(&ctx.path("hoelder_growth.csv"), &["boxes", "max", "median"], &rows)?;
        Some(growth)
    } else {
        None
    };

    let pass = summaries
        .iter()
        .all(|s| s.bounded && (s.probe || s.refinement_change.is_none_or(|c| c < REFINEMENT_TOLERANCE)));
    write_json(&ctx.path("verify.json"), &VerifyOut { pass, reports: summaries, hoelder_growth })?;
    if !pass {
        return Err(CliError::Failed("an estimate check exceeded its ratio bound or refinement tolerance".into()));
    }
    Ok(())
}
