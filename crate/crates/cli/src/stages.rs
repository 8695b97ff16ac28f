//! Pipeline stages. Each reads its inputs from files and writes artifacts
//! (with sidecars) into the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use mnar_core::domain::io::{read_dataset, write_dataset};
use mnar_core::domain::{validate_dataset, RunMeta, ValidationOptions};
use mnar_core::impute::{impute_smoking, read_imputations, write_imputations, ImputeConfig};
use mnar_core::likelihood::{LikelihoodWorkspace, ModelTarget};
use mnar_core::mcmc::{posterior_summary, run_chains, write_summary_csv, DiagnosticsReport, InitStrategy};
use mnar_core::prevalence::{
    population_truth, read_trend_csv, render_report, sample_truth, trend_with_ci, write_trend_csv, TrendTable,
};
use mnar_core::synth::{read_truth, simulate, write_truth};
use mnar_core::{DesignSpec, PersonRecord, PosteriorDraws, StudyYear};
use serde::{Deserialize, Serialize};

use crate::config::{ImputeFormat, Resolved};
use crate::manifest::{write_json, write_sidecar, RunManifest, StageRecord, StageStatus};

pub const DATASET: &str = "dataset.csv";
pub const TRUTH: &str = "truth.csv";
pub const SIMULATION: &str = "simulation.json";
pub const DRAWS: &str = "draws.csv";
pub const SUMMARY: &str = "summary.csv";
pub const DIAGNOSTICS: &str = "diagnostics.json";
pub const IMPUTATIONS: &str = "imputations.csv";
pub const IMPUTED_DIR: &str = "imputed";
pub const TREND: &str = "trend.csv";
pub const TREND_TRUTH: &str = "trend_truth.csv";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// Shared state of one invocation.
pub struct Context {
    pub out_dir: PathBuf,
    pub resolved: Resolved,
    pub config_hash: String,
    pub threads: usize,
}

/// What a stage reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: StageStatus,
    pub artifacts: Vec<String>,
    pub message: Option<String>,
}

impl Outcome {
    fn completed(artifacts: Vec<String>) -> Self {
        Outcome {
            status: StageStatus::Completed,
            artifacts,
            message: None,
        }
    }
}

impl Context {
    pub fn new(out_dir: PathBuf, resolved: Resolved) -> Result<Self> {
        std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let config_hash = resolved.hash()?;
        Ok(Context {
            out_dir,
            config_hash,
            threads: rayon::current_num_threads(),
            resolved,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes the resolved config (and its sidecar) next to the outputs.
    pub fn write_resolved(&self) -> Result<()> {
        let p = self.path(RESOLVED_CONFIG);
        std::fs::write(&p, self.resolved.to_toml()?).with_context(|| format!("writing {}", p.display()))?;
        write_sidecar(&p, "config", &self.config_hash)
    }

    fn finish(&self, stage: &str, name: &str, out: &[&str]) -> Result<Vec<String>> {
        for a in out {
            write_sidecar(&self.path(a), name, &self.config_hash).with_context(|| format!("stage {stage}"))?;
        }
        Ok(out.iter().map(|s| s.to_string()).collect())
    }

    /// Runs `body` as stage `name` and records it in the manifest.
    pub fn run_stage(&self, name: &str, body: impl FnOnce(&Context) -> Result<Outcome>) -> Result<Outcome> {
        self.write_resolved()?;
        let start = Instant::now();
        let result = body(self);
        let seconds = start.elapsed().as_secs_f64();
        let mut m = RunManifest::load_or_new(&self.out_dir, &self.config_hash, self.resolved.scenario.seed, self.threads);
        let rec = match &result {
            Ok(o) => StageRecord {
                status: o.status,
                seconds,
                artifacts: o.artifacts.clone(),
                message: o.message.clone(),
            },
            Err(e) => StageRecord {
                status: StageStatus::Failed,
                seconds,
                artifacts: Vec::new(),
                message: Some(format!("{e:#}")),
            },
        };
        m.stages.insert(name.to_string(), rec);
        m.stages
            .entry("config".into())
            .or_insert_with(|| StageRecord {
                status: StageStatus::Completed,
                seconds: 0.0,
                artifacts: vec![RESOLVED_CONFIG.into()],
                message: None,
            });
        m.save(&self.out_dir)?;
        result
    }

    fn input(&self, explicit: Option<&Path>, default: &str) -> PathBuf {
        explicit.map_or_else(|| self.path(default), Path::to_path_buf)
    }
}

fn check_origin(ctx: &Context, path: &Path) {
    if let Ok(side) = crate::manifest::read_sidecar(path) {
        if side.config_hash != ctx.config_hash {
            log::warn!(
                "{} was produced under a different configuration ({})",
                path.display(),
                &side.config_hash[..12.min(side.config_hash.len())]
            );
        }
    }
}

fn load_dataset(ctx: &Context, path: &Path) -> Result<Vec<PersonRecord>> {
    check_origin(ctx, path);
    read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

pub fn cmd_simulate(ctx: &Context) -> Result<Outcome> {
    let sc = &ctx.resolved.scenario;
    let sim = simulate(sc)?;
    write_dataset(&sim.observed, ctx.path(DATASET))?;
    let mut out = vec![DATASET];
    if ctx.resolved.config.simulate.write_truth {
        write_truth(&sim.truth, ctx.path(TRUTH))?;
        out.push(TRUTH);
    }
    write_json(
        &ctx.path(SIMULATION),
        &serde_json::json!({ "waves": sim.waves, "shortfalls": sim.shortfalls }),
    )?;
    out.push(SIMULATION);
    for w in &sim.waves {
        log::info!("{}: {} sampled, {} participants", w.year, w.sampled, w.participants);
    }
    Ok(Outcome::completed(ctx.finish("simulate", "simulate", &out)?))
}

/// Designs to check a dataset against: the configured scenario's waves,
/// falling back to the historical design of any other year in the data.
fn designs_for(ctx: &Context, records: &[PersonRecord]) -> Vec<DesignSpec> {
    let mut designs: BTreeMap<StudyYear, DesignSpec> =
        ctx.resolved.scenario.designs().into_iter().map(|d| (d.year, d)).collect();
    for r in records {
        let y = r.covariates.study_year;
        designs.entry(y).or_insert_with(|| DesignSpec::finrisk(y));
    }
    designs.into_values().collect()
}

pub fn cmd_validate(ctx: &Context, dataset: Option<&Path>) -> Result<Outcome> {
    let path = ctx.input(dataset, DATASET);
    let records = load_dataset(ctx, &path)?;
    let violations = validate_dataset(&records, &designs_for(ctx, &records), &ValidationOptions::default());
    if violations.is_empty() {
        println!("{}: {} records, no violations", path.display(), records.len());
        return Ok(Outcome::completed(Vec::new()));
    }
    for v in violations.iter().take(50) {
        eprintln!("{v}");
    }
    bail!("{}: {} violation(s); first: {}", path.display(), violations.len(), violations[0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub meta: RunMeta,
    pub n_participants: usize,
    pub n_events: usize,
    #[serde(flatten)]
    pub diagnostics: DiagnosticsReport,
    pub max_rhat: f64,
}

pub fn cmd_fit(ctx: &Context, dataset: Option<&Path>) -> Result<Outcome> {
    let records = load_dataset(ctx, &ctx.input(dataset, DATASET))?;
    let ws = LikelihoodWorkspace::from_participants(&records)?;
    if ws.n_persons() == 0 {
        bail!("dataset has no participants to fit");
    }
    let target = ModelTarget::new(&ws);
    let fit = &ctx.resolved.config.fit;
    let init = InitStrategy::Laplace {
        start: target.crude_start(),
        overdispersion: fit.overdispersion,
    };
    let mcmc = &ctx.resolved.mcmc;
    log::info!(
        "fitting {} participants ({} events), {} parameters, {} chains x {} iterations",
        ws.n_persons(),
        ws.n_events(),
        target.layout.dim(),
        mcmc.n_chains,
        mcmc.iterations
    );
    let run = run_chains(&target, &init, mcmc)?;
    run.draws.write_csv(ctx.path(DRAWS))?;
    let summary = posterior_summary(&run.draws);
    let file = std::fs::File::create(ctx.path(SUMMARY))?;
    write_summary_csv(&summary, std::io::BufWriter::new(file))?;
    let acceptance = run.chains.iter().map(|c| c.acceptance()).collect();
    let diagnostics = DiagnosticsReport::new(&run.draws, acceptance, fit.rhat_threshold)?;
    let report = FitReport {
        meta: *run.draws.meta(),
        n_participants: ws.n_persons(),
        n_events: ws.n_events(),
        max_rhat: diagnostics.max_rhat(),
        diagnostics,
    };
    write_json(&ctx.path(DIAGNOSTICS), &report)?;
    let artifacts = ctx.finish("fit", "fit", &[DRAWS, SUMMARY, DIAGNOSTICS])?;
    if report.diagnostics.converged {
        return Ok(Outcome::completed(artifacts));
    }
    let failing: Vec<String> = report
        .diagnostics
        .failing()
        .iter()
        .take(8)
        .map(|(n, r)| format!("{n} ({r:.3})"))
        .collect();
    Ok(Outcome {
        status: StageStatus::NotConverged,
        artifacts,
        message: Some(format!(
            "R-hat at or above {} for {}",
            fit.rhat_threshold,
            failing.join(", ")
        )),
    })
}

fn load_draws(path: &Path) -> Result<(PosteriorDraws, Option<FitReport>)> {
    let report: Option<FitReport> = std::fs::read_to_string(path.with_file_name(DIAGNOSTICS))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let meta = match &report {
        Some(r) => r.meta,
        None => {
            // a draw file without its report: treat rows as one unthinned chain each
            let probe = PosteriorDraws::read_csv(
                path,
                RunMeta {
                    n_chains: 1,
                    iterations: 0,
                    burn_in: 0,
                    thinning: 1,
                    seed: 0,
                },
            )?;
            RunMeta {
                n_chains: probe.n_chains(),
                iterations: probe.per_chain(),
                burn_in: 0,
                thinning: 1,
                seed: 0,
            }
        }
    };
    let draws = PosteriorDraws::read_csv(path, meta).with_context(|| format!("reading draws {}", path.display()))?;
    Ok((draws, report))
}

pub fn cmd_impute(ctx: &Context, dataset: Option<&Path>, draws: Option<&Path>) -> Result<Outcome> {
    let records = load_dataset(ctx, &ctx.input(dataset, DATASET))?;
    let draws_path = ctx.input(draws, DRAWS);
    check_origin(ctx, &draws_path);
    let (draws, report) = load_draws(&draws_path)?;
    let sec = &ctx.resolved.config.impute;
    if let Some(r) = &report {
        if !r.diagnostics.converged && !sec.allow_unconverged {
            bail!(
                "the fit did not converge (max R-hat {:.3} against {}); set impute.allow_unconverged to use its draws",
                r.max_rhat,
                r.diagnostics.threshold
            );
        }
    }
    let cfg = ImputeConfig {
        seed: ctx.resolved.impute_seed,
        n_imputations: sec.n_imputations,
        censored_mode: sec.censored_mode,
        area: sec.area,
        keep_probabilities: sec.keep_probabilities,
    };
    let imp = impute_smoking(&draws, &records, &cfg)?;
    log::info!(
        "{} imputed datasets over {} non-participants",
        imp.datasets.len(),
        imp.targets.len()
    );
    write_imputations(&imp, &records, ctx.path(IMPUTATIONS))?;
    let mut out = vec![IMPUTATIONS.to_string()];
    if sec.format == ImputeFormat::Datasets {
        std::fs::create_dir_all(ctx.path(IMPUTED_DIR))?;
        for k in 0..imp.datasets.len() {
            let name = format!("{IMPUTED_DIR}/dataset_{k:04}.csv");
            write_dataset(&imp.materialize(&records, k), ctx.path(&name))?;
            out.push(name);
        }
    }
    let refs: Vec<&str> = out.iter().map(String::as_str).collect();
    Ok(Outcome::completed(ctx.finish("impute", "impute", &refs)?))
}

fn write_truth_trend(
    path: &Path,
    pop: &BTreeMap<mnar_core::Stratum, Option<f64>>,
    smp: &BTreeMap<mnar_core::Stratum, Option<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["area", "gender", "study_year", "population", "sample"])?;
    let pct = |v: Option<&Option<f64>>| v.copied().flatten().map_or_else(|| "NA".into(), |x| (100.0 * x).to_string());
    for (cell, p) in pop {
        w.write_record([
            cell.area.code().to_string(),
            cell.gender.as_str().to_string(),
            cell.year.year().to_string(),
            pct(Some(p)),
            pct(smp.get(cell)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_estimate(ctx: &Context, dataset: Option<&Path>, imputations: Option<&Path>) -> Result<Outcome> {
    let records = load_dataset(ctx, &ctx.input(dataset, DATASET))?;
    let imp_path = ctx.input(imputations, IMPUTATIONS);
    check_origin(ctx, &imp_path);
    let imp = read_imputations(&records, &imp_path).with_context(|| format!("reading {}", imp_path.display()))?;
    let sec = &ctx.resolved.config.estimate;
    let table = sec.table()?;
    let trend = trend_with_ci(&records, &imp, &table, &sec.options())?;
    write_trend_csv(&trend, ctx.path(TREND))?;
    let mut out = vec![TREND];
    // the truth file only exists for simulated data
    let truth_path = ctx.path(TRUTH);
    if dataset.is_none() && truth_path.exists() {
        let truth = read_truth(&truth_path)?;
        let pop = population_truth(&truth, &table, &sec.options())?;
        let smp = sample_truth(&truth, &table, &sec.options())?;
        write_truth_trend(&ctx.path(TREND_TRUTH), &pop, &smp)?;
        out.push(TREND_TRUTH);
    }
    Ok(Outcome::completed(ctx.finish("estimate", "estimate", &out)?))
}

fn report_year(ctx: &Context, trend: &TrendTable) -> Result<StudyYear> {
    match ctx.resolved.config.report.year {
        Some(y) => StudyYear::from_year(y).ok_or_else(|| anyhow!("report year {y} is not a survey year")),
        None => trend
            .rows
            .iter()
            .map(|r| r.year)
            .max()
            .ok_or_else(|| anyhow!("trend table is empty")),
    }
}

pub fn cmd_report(ctx: &Context, trend: Option<&Path>) -> Result<Outcome> {
    let path = ctx.input(trend, TREND);
    check_origin(ctx, &path);
    let table = read_trend_csv(&path).with_context(|| format!("reading {}", path.display()))?;
    let year = report_year(ctx, &table)?;
    let (rows, text) = render_report(&table, year);
    if rows.is_empty() {
        bail!("trend table has no rows for {year}");
    }
    std::fs::write(ctx.path(REPORT_TEXT), &text)?;
    let mut w = csv::Writer::from_path(ctx.path(REPORT_CSV))?;
    w.write_record(["gender", "area", "participants", "model_based", "lower", "upper"])?;
    let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| format!("{x:.1}"));
    for r in &rows {
        w.write_record([
            r.gender.as_str().to_string(),
            r.area.name().to_string(),
            f(r.participants),
            f(r.model_based),
            f(r.lower),
            f(r.upper),
        ])?;
    }
    w.flush()?;
    print!("{text}");
    Ok(Outcome::completed(ctx.finish("report", "report", &[REPORT_TEXT, REPORT_CSV])?))
}
