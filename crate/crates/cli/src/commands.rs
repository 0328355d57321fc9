use std::fs::File;
use std::path::{Path, PathBuf};

use nvmdse::cachemodel::{calibrate_with, load_anchors, model_ledger, Calibration, CalibrationOptions, MB};
use nvmdse::isoarea::{
    self, iso_area_capacity, isoarea_report, reduction_series, simulate_cache, CacheConfig, CacheStats,
    IsoAreaEntry,
};
use nvmdse::isocap::{self, analyze_all, batch_sweep, AnalysisOptions, BatchSeries};
use nvmdse::sweep::{self, all_crossovers, normalize_all, scalability_sweep};
use nvmdse::techlib::{load_bitcell, BitcellParams, BitcellSet, MemoryKind, TechConfig};
use nvmdse::tuner::{self, tune_all, TunedConfig};
use nvmdse::workloads::{
    batch_series, builtin_dnns, load_profiles, load_trace, synthetic_suite, trace_checksum, write_binary_trace,
    write_profiles, write_text_trace, MemoryTrace, Stage, TraceSpecFile, WorkloadProfile,
};
use nvmdse::Error;

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::{CliError, Options, TraceFormat};

/// Read-fraction range of generated batch series.
const BATCH_READ_FRACTION: (f64, f64) = (0.72, 0.86);

/// Technology and bitcells every stage runs against.
struct Env {
    tech: TechConfig,
    cells: BitcellSet,
}

impl Env {
    fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let tech = match &cfg.tech {
            Some(p) => TechConfig::load(p)?,
            None => TechConfig::default(),
        };
        let mut cells = BitcellSet::default();
        for (name, path) in &cfg.bitcells {
            let kind: MemoryKind = name.parse()?;
            let cell = load_bitcell(path)?;
            if cell.kind != kind {
                return Err(CliError::Usage(format!(
                    "{} describes {}, listed under {kind}",
                    path.display(),
                    cell.kind
                )));
            }
            cells.insert(cell);
        }
        Ok(Env { tech, cells })
    }

    fn selected(&self, cfg: &RunConfig) -> Vec<BitcellParams> {
        cfg.kinds.iter().map(|&k| self.cells.get(k).clone()).collect()
    }
}

fn mb(capacities: &[u64]) -> Vec<u64> {
    capacities.iter().map(|&c| c * MB).collect()
}

/// Prints per-item failures; they fail the run unless `--keep-going`.
fn settle(failures: &[String], opts: &Options) -> Result<(), CliError> {
    for f in failures {
        eprintln!("warning: {f}");
    }
    if failures.is_empty() || opts.keep_going {
        Ok(())
    } else {
        Err(CliError::ItemFailures(failures.len()))
    }
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn load_profile_set(cfg: &RunConfig) -> Result<Vec<WorkloadProfile>, Error> {
    match &cfg.profiles {
        Some(p) => load_profiles(open(p)?),
        None => Ok(synthetic_suite(cfg.seed)),
    }
}

fn load_trace_source(path: &Path) -> Result<MemoryTrace, Error> {
    if path.extension().is_some_and(|e| e == "toml") {
        TraceSpecFile::load(path)?.generate()
    } else {
        load_trace(path)
    }
}

pub fn calibrate(cfg: &RunConfig, opts: &Options) -> Result<Option<Calibration>, CliError> {
    let Some(anchor_path) = &cfg.anchors else {
        return Err(CliError::Usage("calibrate needs an `anchors` file".into()));
    };
    let anchors = load_anchors(anchor_path)?;
    let env = Env::load(cfg)?;
    if opts.dry_run {
        println!("calibrate: {} anchors, configuration valid", anchors.len());
        return Ok(None);
    }
    let copts = CalibrationOptions {
        ceiling: cfg.calibration_ceiling,
        ..CalibrationOptions::default()
    };
    let cal = calibrate_with(&anchors, &env.tech, &env.cells, &copts)?;
    for r in &cal.residuals {
        println!(
            "{:<14} {:<14} target {:>10.4} model {:>10.4} error {:>6.2}%",
            r.anchor,
            r.metric.name(),
            r.target,
            r.model,
            100.0 * r.relative_error
        );
    }
    println!("max relative error {:.2}%", 100.0 * cal.max_error);
    let out = OutputDir::new(&cfg.output, false);
    out.write("tech_calibrated.toml", cal.tech.to_toml_string().as_bytes())?;
    out.write("bitcell_sram_calibrated.toml", cal.cells.sram.to_toml_string().as_bytes())?;
    out.write("calibration.csv", cal.report().as_bytes())?;
    out.write("model_ledger.txt", model_ledger(&cal.tech).as_bytes())?;
    Ok(Some(cal))
}

fn run_tune(cfg: &RunConfig, opts: &Options, env: &Env) -> Result<(), CliError> {
    let outcome = tune_all(&env.selected(cfg), &mb(&cfg.capacities_mb), &env.tech);
    let failures: Vec<String> = outcome
        .failures
        .iter()
        .map(|(k, c, e)| format!("tune {k} at {} MB: {e}", c / MB))
        .collect();
    settle(&failures, opts)?;
    let out = OutputDir::new(&cfg.output, opts.dry_run);
    out.write_with("tuned.csv", |b| tuner::write_csv(&outcome.configs, b))?;
    out.write("tuned.json", tuner::to_json(&outcome.configs)?.as_bytes())?;
    out.write("model_ledger.txt", model_ledger(&env.tech).as_bytes())?;
    println!("tune: {} configurations", outcome.configs.len());
    Ok(())
}

fn analysis_options(cfg: &RunConfig, include_dram: bool) -> AnalysisOptions {
    AnalysisOptions {
        include_dram,
        exposure: cfg.delay_convention,
    }
}

/// Groups profiles by network and stage, keeping first-appearance order.
fn group_by_workload(profiles: &[WorkloadProfile]) -> Vec<Vec<WorkloadProfile>> {
    let mut groups: Vec<Vec<WorkloadProfile>> = Vec::new();
    for p in profiles {
        match groups.iter_mut().find(|g| g[0].dnn == p.dnn && g[0].stage == p.stage) {
            Some(g) => g.push(p.clone()),
            None => groups.push(vec![p.clone()]),
        }
    }
    groups
}

fn run_isocap(cfg: &RunConfig, opts: &Options, env: &Env) -> Result<(), CliError> {
    let profiles = load_profile_set(cfg)?;
    let batch = match &cfg.batch_profiles {
        Some(p) => load_profiles(open(p)?)?,
        None => Vec::new(),
    };
    if opts.dry_run {
        println!("isocap: {} profiles, configuration valid", profiles.len());
        return Ok(());
    }
    let outcome = tune_all(&env.selected(cfg), &[cfg.iso_capacity_mb * MB], &env.tech);
    let mut failures: Vec<String> = outcome
        .failures
        .iter()
        .map(|(k, c, e)| format!("tune {k} at {} MB: {e}", c / MB))
        .collect();
    let Some(baseline) = outcome.configs.iter().find(|c| c.kind == cfg.baseline) else {
        settle(&failures, opts)?;
        return Err(CliError::Runtime(Error::invalid("baseline", "baseline could not be tuned")));
    };
    let aopts = analysis_options(cfg, cfg.include_dram);
    let report = analyze_all(&profiles, &outcome.configs, baseline, &env.tech, &aopts)?;

    let mut series: Vec<BatchSeries> = Vec::new();
    for group in group_by_workload(&batch) {
        for c in &outcome.configs {
            match batch_sweep(&group, c, baseline, &env.tech, &aopts) {
                Ok(points) => series.push((group[0].dnn.clone(), group[0].stage, c.kind, points)),
                Err(e) => failures.push(format!("batch series {} {}: {e}", group[0].dnn, group[0].stage)),
            }
        }
    }
    settle(&failures, opts)?;

    let out = OutputDir::new(&cfg.output, false);
    out.write_with("isocap.csv", |b| isocap::write_report_csv(&report, b))?;
    out.write("isocap.json", isocap::report_json(&report)?.as_bytes())?;
    out.write_with("isocap_energy.csv", |b| isocap::write_energy_plot(&report, b))?;
    out.write_with("isocap_edp.csv", |b| isocap::write_edp_plot(&report, b))?;
    if !series.is_empty() {
        out.write_with("isocap_batch.csv", |b| isocap::write_batch_plot(&series, b))?;
    }
    println!("isocap: {} entries", report.entries.len());
    Ok(())
}

fn write_capacities_csv(rows: &[(MemoryKind, f64, &TunedConfig)], out: &mut Vec<u8>) -> Result<(), Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["kind", "capacity_mb", "area_mm2", "budget_mm2"])?;
    for (kind, budget, t) in rows {
        w.write_record([
            kind.name(),
            &(t.capacity as f64 / MB as f64).to_string(),
            &t.ppa.area.to_string(),
            &budget.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

fn run_isoarea(cfg: &RunConfig, opts: &Options, env: &Env) -> Result<(), CliError> {
    let Some(trace_path) = &cfg.trace else {
        return Err(CliError::Usage("isoarea needs a `trace`".into()));
    };
    let profiles = load_profile_set(cfg)?;
    let trace = load_trace_source(trace_path)?;
    if opts.dry_run {
        println!("isoarea: {} trace records, configuration valid", trace.len());
        return Ok(());
    }
    let base = tuner::tune(env.cells.get(cfg.baseline), cfg.iso_capacity_mb * MB, &env.tech)?;
    let budget = base.ppa.area;
    let org = &base.ppa.organization;
    let geometry = |cap: u64| CacheConfig::new(cap, org.line_size, org.associativity);

    let mut failures = Vec::new();
    let mut bigs: Vec<TunedConfig> = Vec::new();
    for &kind in cfg.kinds.iter().filter(|&&k| k != cfg.baseline) {
        match iso_area_capacity(env.cells.get(kind), budget, &env.tech, MB, cfg.area_slack) {
            Ok((_, t)) => bigs.push(t),
            Err(e) => failures.push(format!("iso-area capacity for {kind}: {e}")),
        }
    }

    let base_stats = simulate_cache(&trace, &geometry(base.capacity)?)?;
    let mut stats: Vec<(u64, CacheStats)> = vec![(base.capacity, base_stats)];
    for t in &bigs {
        if !stats.iter().any(|(c, _)| *c == t.capacity) {
            stats.push((t.capacity, simulate_cache(&trace, &geometry(t.capacity)?)?));
        }
    }
    stats.sort_by_key(|(c, _)| *c);
    let stat_of = |cap: u64| stats.iter().find(|(c, _)| *c == cap).map(|(_, s)| *s).unwrap();

    let reduction = match reduction_series(&trace, &geometry(base.capacity)?, &mb(&cfg.reduction_capacities_mb)) {
        Ok(r) => r,
        Err(e) => {
            failures.push(format!("DRAM reduction series: {e}"));
            Vec::new()
        }
    };
    settle(&failures, opts)?;

    let mut entries: Vec<IsoAreaEntry> = Vec::new();
    for p in &profiles {
        for t in &bigs {
            entries.push(isoarea_report(
                p,
                &base_stats,
                &stat_of(t.capacity),
                &base,
                t,
                &env.tech,
                cfg.include_dram,
            ));
        }
    }

    let limit = budget * (1.0 + cfg.area_slack);
    let mut rows = vec![(base.kind, limit, &base)];
    rows.extend(bigs.iter().map(|t| (t.kind, limit, t)));
    let out = OutputDir::new(&cfg.output, false);
    out.write_with("isoarea_capacities.csv", |b| write_capacities_csv(&rows, b))?;
    out.write_with("isoarea_stats.csv", |b| isoarea::write_stats_csv(&stats, b))?;
    out.write_with("isoarea_reduction.csv", |b| isoarea::write_reduction_csv(&reduction, b))?;
    out.write_with("isoarea.csv", |b| isoarea::write_report_csv(&entries, b))?;
    for t in &bigs {
        println!(
            "isoarea: {} fits {} MB in {:.3} mm^2 (budget {:.3})",
            t.kind,
            t.capacity / MB,
            t.ppa.area,
            limit
        );
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig, opts: &Options, env: &Env) -> Result<(), CliError> {
    let profiles = load_profile_set(cfg)?;
    if opts.dry_run {
        println!("sweep: {} capacities, configuration valid", cfg.sweep_capacities_mb.len());
        return Ok(());
    }
    let aopts = analysis_options(cfg, cfg.sweep_include_dram);
    let result = scalability_sweep(
        &env.selected(cfg),
        &mb(&cfg.sweep_capacities_mb),
        &profiles,
        &env.tech,
        &aopts,
    )?;
    let normalized = normalize_all(&result.series, cfg.baseline)?;
    let crossovers = all_crossovers(&result.series)?;
    let out = OutputDir::new(&cfg.output, false);
    out.write_with("sweep_tuned.csv", |b| tuner::write_csv(&result.tuned, b))?;
    out.write_with("sweep_series.csv", |b| sweep::write_series_csv(&result.series, b))?;
    out.write_with("sweep_normalized.csv", |b| sweep::write_series_csv(&normalized, b))?;
    out.write_with("sweep_crossovers.csv", |b| sweep::write_crossovers_csv(&crossovers, b))?;
    out.write("sweep.json", sweep::series_json(&result.series)?.as_bytes())?;
    println!(
        "sweep: {} series, {} crossovers",
        result.series.len(),
        crossovers.len()
    );
    Ok(())
}

pub fn tune(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    run_tune(cfg, opts, &Env::load(cfg)?)
}

pub fn isocap(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    run_isocap(cfg, opts, &Env::load(cfg)?)
}

pub fn isoarea(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    run_isoarea(cfg, opts, &Env::load(cfg)?)
}

pub fn sweep(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    run_sweep(cfg, opts, &Env::load(cfg)?)
}

pub fn all(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    let mut env = Env::load(cfg)?;
    if cfg.anchors.is_some() {
        if let Some(cal) = calibrate(cfg, opts)? {
            env.tech = cal.tech;
            env.cells.sram = cal.cells.sram;
        }
    }
    run_tune(cfg, opts, &env)?;
    run_isocap(cfg, opts, &env)?;
    if cfg.trace.is_some() {
        run_isoarea(cfg, opts, &env)?;
    }
    run_sweep(cfg, opts, &env)
}

pub fn gen_trace(
    cfg: &RunConfig,
    opts: &Options,
    spec: Option<PathBuf>,
    format: TraceFormat,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let path = spec
        .or_else(|| cfg.trace.clone().filter(|p| p.extension().is_some_and(|e| e == "toml")))
        .ok_or_else(|| CliError::Usage("gen-trace needs --spec or a `.toml` trace spec in the config".into()))?;
    let mut file = TraceSpecFile::load(&path)?;
    if let Some(s) = seed {
        // a reseeded trace no longer matches the frozen checksum
        file.generator.seed = s;
        file.sha256 = None;
    }
    let trace = file.generate()?;
    let out = OutputDir::new(&cfg.output, opts.dry_run);
    match format {
        TraceFormat::Text => out.write_with("trace.txt", |b| write_text_trace(&trace, b).map_err(|e| Error::io(&path, e)))?,
        TraceFormat::Binary => {
            out.write_with("trace.bin", |b| write_binary_trace(&trace, b).map_err(|e| Error::io(&path, e)))?
        }
    }
    println!("{} records, sha256 {}", trace.len(), trace_checksum(&trace));
    Ok(())
}

pub fn gen_profile(
    cfg: &RunConfig,
    opts: &Options,
    batch_dnn: Option<String>,
    batches: &[u32],
) -> Result<(), CliError> {
    let suite = synthetic_suite(cfg.seed);
    let out = OutputDir::new(&cfg.output, opts.dry_run);
    out.write_with("profiles.csv", |b| write_profiles(&suite, b))?;
    if let Some(name) = batch_dnn {
        let dnn = builtin_dnns()
            .into_iter()
            .find(|d| d.name.eq_ignore_ascii_case(&name))
            .ok_or_else(|| CliError::Usage(format!("unknown network `{name}`")))?;
        let (lo, hi) = BATCH_READ_FRACTION;
        let series = batch_series(&dnn, Stage::Inference, batches, lo, hi, cfg.seed)?;
        out.write_with("batch_profiles.csv", |b| write_profiles(&series, b))?;
    }
    println!("gen-profile: {} profiles", suite.len());
    Ok(())
}
