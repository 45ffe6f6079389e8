//! The five subcommands: simulate, fit, score, study, predict.
//!
//! Each command resolves its settings from flags, then the config file,
//! then built-in defaults; echoes the resolved values to stderr; and runs.
//! Input loading and validation failures are usage errors (exit 2), while
//! failures inside a run are runtime errors (exit 1).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;

use boolreg::dataset::{read_truth_file, write_truth_file};
use boolreg::gmjmcmc::{read_report_tsv, write_report_tsv};
use boolreg::metrics::{
    format_study_table, generate_study_data, write_study_tsv, MatchMode, ScoreCard,
};
use boolreg::sim::{read_positions_file, write_positions_file, GeneticMap};
use boolreg::{
    aggregate_chains, match_discoveries, predict_bma, predict_single, report_expressions,
    ridge_baseline, run_chains, score_predictions, AggregationMode, ChainResult, ComplexityMeasure,
    CovariateGenerator, Dataset, GmjConfig, PredictionResult, Scenario, SelectionRule, StudyConfig,
    VisitedRegistry,
};

use crate::config::{echo_resolved, resolve, resolve_opt, FileConfig};
use crate::{CliError, EngineFlags};

type CliResult<T = ()> = Result<T, CliError>;

/// Data-generation settings shared by `simulate` and `study`.
#[derive(Args, Debug, Default)]
pub struct GeneratorFlags {
    /// Benchmark scenario: scenario4 | scenario4age | scenario5
    #[arg(long)]
    scenario: Option<String>,
    /// Covariate generator: general | backcross [default: general]
    #[arg(long)]
    generator: Option<String>,
    /// Observations to simulate [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Binary covariate columns (general) [default: 50]
    #[arg(long)]
    p: Option<usize>,
    /// Correlation-concentration parameter (general) [default: 2.5]
    #[arg(long)]
    alphad: Option<f64>,
    /// Marginal success probability (general) [default: 0.5]
    #[arg(long)]
    margprob: Option<f64>,
    /// Chromosome lengths in cM, comma-separated (backcross)
    /// [default: 100,85,70,55,40]
    #[arg(long)]
    chromosomes: Option<String>,
    /// Equidistant markers per chromosome (backcross) [default: 10]
    #[arg(long = "markers-per-chromosome")]
    markers_per_chromosome: Option<usize>,
    /// Shuffle marker columns (backcross) [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    permute: Option<bool>,
    /// Gaussian noise standard deviation [default: 1]
    #[arg(long = "noise-sd")]
    noise_sd: Option<f64>,
}

/// A resolved generator plus everything needed to reproduce it.
#[derive(Debug)]
struct ResolvedGenerator {
    scenario: Scenario,
    generator: CovariateGenerator,
    n: usize,
    noise_sd: f64,
    echo: Vec<(&'static str, String)>,
}

fn resolve_generator(flags: &GeneratorFlags, file: &FileConfig) -> CliResult<ResolvedGenerator> {
    let scenario_name = resolve_opt(flags.scenario.clone(), file, "scenario")?
        .ok_or_else(|| CliError::Usage("missing --scenario".to_string()))?;
    let scenario = Scenario::parse_name(&scenario_name).map_err(CliError::usage)?;
    let generator_name: String = resolve(
        flags.generator.clone(),
        file,
        "generator",
        "general".to_string(),
    )?;
    let n = resolve(flags.n, file, "n", 1000)?;
    let noise_sd = resolve(flags.noise_sd, file, "noise-sd", 1.0)?;
    let mut echo: Vec<(&'static str, String)> = vec![
        ("scenario", scenario.name().to_string()),
        ("generator", generator_name.clone()),
        ("n", n.to_string()),
    ];
    let generator = match generator_name.as_str() {
        "general" => {
            let p = resolve(flags.p, file, "p", 50)?;
            let alphad = resolve(flags.alphad, file, "alphad", 2.5)?;
            let margprob = resolve(flags.margprob, file, "margprob", 0.5)?;
            echo.push(("p", p.to_string()));
            echo.push(("alphad", alphad.to_string()));
            echo.push(("margprob", margprob.to_string()));
            CovariateGenerator::General {
                p,
                alphad,
                margprob,
            }
        }
        "backcross" => {
            let lengths_text: String = resolve(
                flags.chromosomes.clone(),
                file,
                "chromosomes",
                "100,85,70,55,40".to_string(),
            )?;
            let lengths: Vec<f64> = lengths_text
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        CliError::Usage(format!("--chromosomes: {s:?} is not a number"))
                    })
                })
                .collect::<CliResult<_>>()?;
            let markers = resolve(
                flags.markers_per_chromosome,
                file,
                "markers-per-chromosome",
                10,
            )?;
            let permute = resolve(flags.permute, file, "permute", false)?;
            let map = GeneticMap::equidistant(&lengths, markers).map_err(CliError::usage)?;
            echo.push(("chromosomes", lengths_text));
            echo.push(("markers-per-chromosome", markers.to_string()));
            echo.push(("permute", permute.to_string()));
            CovariateGenerator::Backcross { map, permute }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown generator {other:?} (expected general or backcross)"
            )))
        }
    };
    echo.push(("noise-sd", noise_sd.to_string()));
    Ok(ResolvedGenerator {
        scenario,
        generator,
        n,
        noise_sd,
        echo,
    })
}

fn parse_measure(s: &str) -> CliResult<ComplexityMeasure> {
    match s.to_ascii_lowercase().as_str() {
        "leaves" => Ok(ComplexityMeasure::Leaves),
        "operators" => Ok(ComplexityMeasure::Operators),
        other => Err(CliError::Usage(format!(
            "unknown complexity measure {other:?} (expected leaves or operators)"
        ))),
    }
}

fn measure_name(m: ComplexityMeasure) -> &'static str {
    match m {
        ComplexityMeasure::Leaves => "leaves",
        ComplexityMeasure::Operators => "operators",
    }
}

fn parse_aggregation(s: &str) -> CliResult<AggregationMode> {
    match s.to_ascii_lowercase().as_str() {
        "weighted" => Ok(AggregationMode::WeightedMass),
        "union" => Ok(AggregationMode::UnionRenormalized),
        other => Err(CliError::Usage(format!(
            "unknown aggregation {other:?} (expected weighted or union)"
        ))),
    }
}

fn aggregation_name(mode: AggregationMode) -> &'static str {
    match mode {
        AggregationMode::WeightedMass => "weighted",
        AggregationMode::UnionRenormalized => "union",
    }
}

/// A resolved engine configuration plus its echo lines (seed excluded; it
/// is always echoed last by the caller).
struct ResolvedEngine {
    cfg: GmjConfig,
    aggregation: AggregationMode,
    echo: Vec<(&'static str, String)>,
}

fn resolve_engine(flags: &EngineFlags, file: &FileConfig) -> CliResult<ResolvedEngine> {
    let base = GmjConfig::default();
    let mut cfg = GmjConfig {
        d: resolve(flags.d, file, "d", base.d)?,
        protected: resolve(flags.protected, file, "protected", base.protected)?,
        c_max: resolve(flags.cmax, file, "cmax", base.c_max)?,
        k_max: resolve(flags.kmax, file, "kmax", base.k_max)?,
        p_and: resolve(flags.p_and, file, "p-and", base.p_and)?,
        p_not: resolve(flags.p_not, file, "p-not", base.p_not)?,
        rho_min: resolve(flags.rho_min, file, "rho-min", base.rho_min)?,
        fresh_leaf_prob: resolve(
            flags.fresh_leaf_prob,
            file,
            "fresh-leaf-prob",
            base.fresh_leaf_prob,
        )?,
        t_max: resolve(flags.tmax, file, "tmax", base.t_max)?,
        explore_iters: resolve(
            flags.explore_iters,
            file,
            "explore-iters",
            base.explore_iters,
        )?,
        final_iters: resolve(flags.final_iters, file, "final-iters", base.final_iters)?,
        m_fin: resolve(flags.mfin, file, "mfin", base.m_fin)?,
        chains: resolve(flags.chains, file, "chains", base.chains)?,
        seed: resolve(flags.seed, file, "seed", base.seed)?,
        log_penalty: resolve_opt(flags.log_penalty, file, "log-penalty")?,
        measure: match resolve_opt(flags.measure.clone(), file, "measure")? {
            Some(name) => parse_measure(&name)?,
            None => base.measure,
        },
        retain_coefficients: resolve(
            flags.retain_coefficients,
            file,
            "retain-coefficients",
            base.retain_coefficients,
        )?,
        candidate_retries: resolve(
            flags.candidate_retries,
            file,
            "candidate-retries",
            base.candidate_retries,
        )?,
        mj: base.mj,
    };
    cfg.mj.jump_prob = resolve(flags.jump_prob, file, "jump-prob", cfg.mj.jump_prob)?;
    cfg.mj.min_flip = resolve(flags.min_flip, file, "min-flip", cfg.mj.min_flip)?;
    cfg.mj.max_flip = resolve(flags.max_flip, file, "max-flip", cfg.mj.max_flip)?;
    cfg.mj.min_jump = resolve(flags.min_jump, file, "min-jump", cfg.mj.min_jump)?;
    cfg.mj.max_jump = resolve(flags.max_jump, file, "max-jump", cfg.mj.max_jump)?;
    cfg.mj.rand_flip_prob = resolve(
        flags.rand_flip_prob,
        file,
        "rand-flip-prob",
        cfg.mj.rand_flip_prob,
    )?;
    cfg.mj.greedy_max_steps = resolve(
        flags.greedy_max_steps,
        file,
        "greedy-max-steps",
        cfg.mj.greedy_max_steps,
    )?;
    let aggregation = match resolve_opt(flags.aggregation.clone(), file, "aggregation")? {
        Some(name) => parse_aggregation(&name)?,
        None => AggregationMode::WeightedMass,
    };
    let echo = vec![
        ("d", cfg.d.to_string()),
        ("protected", cfg.protected.to_string()),
        ("cmax", cfg.c_max.to_string()),
        ("kmax", cfg.k_max.to_string()),
        ("p-and", cfg.p_and.to_string()),
        ("p-not", cfg.p_not.to_string()),
        ("rho-min", cfg.rho_min.to_string()),
        ("fresh-leaf-prob", cfg.fresh_leaf_prob.to_string()),
        ("tmax", cfg.t_max.to_string()),
        ("explore-iters", cfg.explore_iters.to_string()),
        ("final-iters", cfg.final_iters.to_string()),
        ("mfin", cfg.m_fin.to_string()),
        ("chains", cfg.chains.to_string()),
        ("jump-prob", cfg.mj.jump_prob.to_string()),
        ("min-flip", cfg.mj.min_flip.to_string()),
        ("max-flip", cfg.mj.max_flip.to_string()),
        ("min-jump", cfg.mj.min_jump.to_string()),
        ("max-jump", cfg.mj.max_jump.to_string()),
        ("rand-flip-prob", cfg.mj.rand_flip_prob.to_string()),
        ("greedy-max-steps", cfg.mj.greedy_max_steps.to_string()),
        (
            "log-penalty",
            cfg.log_penalty
                .map_or_else(|| "default".to_string(), |v| v.to_string()),
        ),
        ("measure", measure_name(cfg.measure).to_string()),
        ("retain-coefficients", cfg.retain_coefficients.to_string()),
        ("candidate-retries", cfg.candidate_retries.to_string()),
        ("aggregation", aggregation_name(aggregation).to_string()),
    ];
    Ok(ResolvedEngine {
        cfg,
        aggregation,
        echo,
    })
}

fn load_file_config(path: &Option<PathBuf>) -> CliResult<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn resolve_path(
    flag: &Option<PathBuf>,
    file: &FileConfig,
    key: &str,
) -> CliResult<Option<PathBuf>> {
    Ok(flag.clone().or_else(|| file.raw(key).map(PathBuf::from)))
}

fn require_path(flag: &Option<PathBuf>, file: &FileConfig, key: &str) -> CliResult<PathBuf> {
    resolve_path(flag, file, key)?.ok_or_else(|| CliError::Usage(format!("missing --{key} <PATH>")))
}

fn resolve_fixed(flag: &[String], file: &FileConfig) -> Vec<String> {
    if !flag.is_empty() {
        return flag.to_vec();
    }
    file.raw("fixed")
        .map(|raw| {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

/// A path with a differentiating suffix appended, for sidecar files.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// All chain registries merged into one, for prediction and dumps.
fn merge_registries(results: &[ChainResult]) -> VisitedRegistry {
    let capacity: usize = results.iter().map(|r| r.registry.len()).sum();
    let mut merged = VisitedRegistry::new(capacity.max(1));
    for result in results {
        merged.merge_from(&result.registry);
    }
    merged
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    generator: GeneratorFlags,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth sidecar path [default: <out>.truth]
    #[arg(long = "truth-out")]
    truth_out: Option<PathBuf>,
    /// Marker-position sidecar path, backcross only [default: <out>.positions]
    #[arg(long = "positions-out")]
    positions_out: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let file = load_file_config(&args.config)?;
    let resolved = resolve_generator(&args.generator, &file)?;
    let seed = resolve(args.seed, &file, "seed", 0)?;
    let out = require_path(&args.out, &file, "out")?;
    let truth_out = resolve_path(&args.truth_out, &file, "truth-out")?
        .unwrap_or_else(|| sidecar(&out, ".truth"));
    let positions_out = resolve_path(&args.positions_out, &file, "positions-out")?
        .unwrap_or_else(|| sidecar(&out, ".positions"));

    let mut echo = resolved.echo.clone();
    echo.push(("out", out.display().to_string()));
    echo.push(("truth-out", truth_out.display().to_string()));
    if matches!(resolved.generator, CovariateGenerator::Backcross { .. }) {
        echo.push(("positions-out", positions_out.display().to_string()));
    }
    echo.push(("seed", seed.to_string()));
    echo_resolved("simulate", &echo);

    let (data, positions) = generate_study_data(
        resolved.scenario,
        &resolved.generator,
        resolved.n,
        resolved.noise_sd,
        seed,
    )
    .map_err(CliError::runtime)?;
    data.write_csv(&out).map_err(CliError::runtime)?;
    let truth = data
        .truth
        .as_ref()
        .expect("scenario data carries its truth");
    write_truth_file(truth, &truth_out).map_err(CliError::runtime)?;
    if let Some(positions) = positions {
        write_positions_file(&positions, &positions_out).map_err(CliError::runtime)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input CSV with binary covariates and a response column
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column name [default: Y]
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated non-binary covariate columns to include directly
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// Report terms with inclusion probability at or above this [default: 0.5]
    #[arg(long = "report-level")]
    report_level: Option<f64>,
    /// Report TSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump every retained model to this TSV
    #[arg(long = "dump-registry")]
    dump_registry: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineFlags,
}

pub fn fit(args: FitArgs) -> CliResult {
    let file = load_file_config(&args.engine.config)?;
    let data_path = require_path(&args.data, &file, "data")?;
    let response = resolve(args.response.clone(), &file, "response", "Y".to_string())?;
    let fixed = resolve_fixed(&args.fixed, &file);
    let report_level = resolve(args.report_level, &file, "report-level", 0.5)?;
    let engine = resolve_engine(&args.engine, &file)?;
    let out = resolve_path(&args.out, &file, "out")?;
    let dump = resolve_path(&args.dump_registry, &file, "dump-registry")?;

    let mut echo = vec![
        ("data", data_path.display().to_string()),
        ("response", response.clone()),
        ("fixed", fixed.join(",")),
        ("report-level", report_level.to_string()),
    ];
    echo.extend(engine.echo.iter().map(|(k, v)| (*k, v.clone())));
    echo.push(("seed", engine.cfg.seed.to_string()));
    echo_resolved("fit", &echo);

    let data = Dataset::read_csv(&data_path, &response, &fixed).map_err(CliError::usage)?;
    let results = run_chains(&data, &engine.cfg).map_err(CliError::runtime)?;
    let aggregate = aggregate_chains(&results, engine.aggregation).map_err(CliError::runtime)?;
    let rows = report_expressions(&aggregate, report_level);
    match &out {
        Some(path) => {
            let mut w = create(path)?;
            write_report_tsv(&mut w, &rows).map_err(CliError::runtime)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_report_tsv(&mut w, &rows).map_err(CliError::runtime)?;
        }
    }
    if let Some(path) = dump {
        let merged = merge_registries(&results);
        let mut w = create(&path)?;
        writeln!(w, "model\tlog_marglik\tlog_prior\tvisits")
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        for record in merged.top_records(merged.len()) {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                record.key, record.log_marglik, record.log_prior, record.visits
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Report TSV produced by `fit`
    #[arg(long)]
    report: Option<PathBuf>,
    /// Ground-truth sidecar produced by `simulate`
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Marker-position sidecar (needed for windowed scoring)
    #[arg(long)]
    positions: Option<PathBuf>,
    /// Also score leaf substitutions within this cM window
    #[arg(long)]
    window: Option<f64>,
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

fn print_scorecard(label: &str, truth: &[String], card: &ScoreCard) {
    for (name, hit) in truth.iter().zip(&card.hits) {
        println!("{label}\thit[{name}]\t{}", u8::from(*hit));
    }
    println!("{label}\tmatched\t{}", card.matched());
    println!("{label}\treports\t{}", card.reports);
    println!("{label}\tfalse_positives\t{}", card.false_positives);
    println!("{label}\tpower\t{:.6}", card.power());
    println!("{label}\tfdr\t{:.6}", card.fdr());
    println!("{label}\twrong_leaves\t{}", card.wrong_leaves);
}

pub fn score(args: ScoreArgs) -> CliResult {
    let file = load_file_config(&args.config)?;
    let report_path = require_path(&args.report, &file, "report")?;
    let truth_path = require_path(&args.truth, &file, "truth")?;
    let positions_path = resolve_path(&args.positions, &file, "positions")?;
    let window = resolve_opt(args.window, &file, "window")?;

    let mut echo = vec![
        ("report", report_path.display().to_string()),
        ("truth", truth_path.display().to_string()),
    ];
    if let Some(p) = &positions_path {
        echo.push(("positions", p.display().to_string()));
    }
    if let Some(w) = window {
        echo.push(("window", w.to_string()));
    }
    echo_resolved("score", &echo);

    let reader = File::open(&report_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", report_path.display())))?;
    let rows = read_report_tsv(BufReader::new(reader)).map_err(CliError::usage)?;
    let truth = read_truth_file(&truth_path).map_err(CliError::usage)?;
    let positions = match (window, &positions_path) {
        (Some(_), None) => {
            return Err(CliError::Usage(
                "windowed scoring needs --positions <PATH>".to_string(),
            ))
        }
        (Some(_), Some(path)) => Some(read_positions_file(path).map_err(CliError::usage)?),
        (None, _) => None,
    };
    let truth_names: Vec<String> = truth.trees.iter().map(|t| t.canonical()).collect();
    // fixed covariates in the report are not trees and are not scored
    let expressions: Vec<String> = rows
        .iter()
        .map(|(name, _)| name.clone())
        .filter(|name| boolreg::expr::parse(name).is_ok())
        .collect();
    println!("mode\tmetric\tvalue");
    let strict = match_discoveries(&expressions, &truth_names, MatchMode::Strict, None)
        .map_err(CliError::runtime)?;
    print_scorecard("strict", &truth_names, &strict);
    if let (Some(window_cm), Some(positions)) = (window, positions) {
        let windowed = match_discoveries(
            &expressions,
            &truth_names,
            MatchMode::Windowed { window_cm },
            Some(&positions),
        )
        .map_err(CliError::runtime)?;
        print_scorecard(&format!("windowed({window_cm}cM)"), &truth_names, &windowed);
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    #[command(flatten)]
    generator: GeneratorFlags,
    /// Independent simulate-fit-score replicates [default: 10]
    #[arg(long)]
    replicates: Option<usize>,
    /// Report terms with inclusion probability at or above this [default: 0.5]
    #[arg(long = "report-level")]
    report_level: Option<f64>,
    /// Also score leaf substitutions within this cM window (backcross)
    #[arg(long)]
    window: Option<f64>,
    /// Summary TSV path (the table always prints to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineFlags,
}

pub fn study(args: StudyArgs) -> CliResult {
    let file = load_file_config(&args.engine.config)?;
    let resolved = resolve_generator(&args.generator, &file)?;
    let replicates = resolve(args.replicates, &file, "replicates", 10)?;
    let report_level = resolve(args.report_level, &file, "report-level", 0.5)?;
    let window = resolve_opt(args.window, &file, "window")?;
    let engine = resolve_engine(&args.engine, &file)?;
    let out = resolve_path(&args.out, &file, "out")?;

    let mut echo = resolved.echo.clone();
    echo.push(("replicates", replicates.to_string()));
    echo.push(("report-level", report_level.to_string()));
    if let Some(w) = window {
        echo.push(("window", w.to_string()));
    }
    if let Some(path) = &out {
        echo.push(("out", path.display().to_string()));
    }
    echo.extend(engine.echo.iter().map(|(k, v)| (*k, v.clone())));
    echo.push(("seed", engine.cfg.seed.to_string()));
    echo_resolved("study", &echo);

    let cfg = StudyConfig {
        scenario: resolved.scenario,
        generator: resolved.generator,
        n: resolved.n,
        replicates,
        seed: engine.cfg.seed,
        gmj: engine.cfg,
        threshold: report_level,
        window_cm: window,
        aggregation: engine.aggregation,
        noise_sd: resolved.noise_sd,
    };
    let summary = boolreg::replicate_study(&cfg).map_err(CliError::runtime)?;
    print!("{}", format_study_table(&summary, window));
    if let Some(path) = out {
        let mut w = create(&path)?;
        write_study_tsv(&mut w, &summary, window).map_err(CliError::runtime)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Training CSV
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV (same columns as the training data)
    #[arg(long)]
    test: Option<PathBuf>,
    /// Response column name [default: Y]
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated non-binary covariate columns to include directly
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// Prediction method: bma | median | map [default: bma]
    #[arg(long)]
    method: Option<String>,
    /// Models averaged by bma [default: 100]
    #[arg(long = "num-best")]
    num_best: Option<usize>,
    /// Also fit a comparison baseline: ridge
    #[arg(long)]
    baseline: Option<String>,
    /// Predictions CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineFlags,
}

pub fn predict(args: PredictArgs) -> CliResult {
    let file = load_file_config(&args.engine.config)?;
    let train_path = require_path(&args.train, &file, "train")?;
    let test_path = require_path(&args.test, &file, "test")?;
    let response = resolve(args.response.clone(), &file, "response", "Y".to_string())?;
    let fixed = resolve_fixed(&args.fixed, &file);
    let method: String = resolve(args.method.clone(), &file, "method", "bma".to_string())?;
    let num_best = resolve(args.num_best, &file, "num-best", 100)?;
    let baseline = resolve_opt(args.baseline.clone(), &file, "baseline")?;
    let out = require_path(&args.out, &file, "out")?;
    if let Some(name) = &baseline {
        if name != "ridge" {
            return Err(CliError::Usage(format!(
                "unknown baseline {name:?} (expected ridge)"
            )));
        }
    }
    if !matches!(method.as_str(), "bma" | "median" | "map") {
        return Err(CliError::Usage(format!(
            "unknown method {method:?} (expected bma, median, or map)"
        )));
    }
    let engine = resolve_engine(&args.engine, &file)?;

    let mut echo = vec![
        ("train", train_path.display().to_string()),
        ("test", test_path.display().to_string()),
        ("response", response.clone()),
        ("fixed", fixed.join(",")),
        ("method", method.clone()),
        ("num-best", num_best.to_string()),
        (
            "baseline",
            baseline.clone().unwrap_or_else(|| "none".to_string()),
        ),
        ("out", out.display().to_string()),
    ];
    echo.extend(engine.echo.iter().map(|(k, v)| (*k, v.clone())));
    echo.push(("seed", engine.cfg.seed.to_string()));
    echo_resolved("predict", &echo);

    let train = Dataset::read_csv(&train_path, &response, &fixed).map_err(CliError::usage)?;
    let test = Dataset::read_csv(&test_path, &response, &fixed).map_err(CliError::usage)?;
    let results = run_chains(&train, &engine.cfg).map_err(CliError::runtime)?;
    let registry = merge_registries(&results);
    let prediction: PredictionResult = match method.as_str() {
        "bma" => predict_bma(&registry, &test, num_best).map_err(CliError::runtime)?,
        "median" => predict_single(&registry, &train, &test, SelectionRule::MedianProbability)
            .map_err(CliError::runtime)?,
        _ => predict_single(&registry, &train, &test, SelectionRule::Map)
            .map_err(CliError::runtime)?,
    };
    if let Some(note) = &prediction.note {
        eprintln!("note: {note}");
    }
    let mut w = create(&out)?;
    writeln!(w, "prediction").map_err(|e| CliError::Runtime(e.to_string()))?;
    for v in &prediction.values {
        writeln!(w, "{v}").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    let scores = score_predictions(&prediction.values, &test.y).map_err(CliError::runtime)?;
    println!("RMSE={:.6}, MAE={:.6}", scores.rmse, scores.mae);
    if baseline.is_some() {
        let ridge = ridge_baseline(&train, &test, None).map_err(CliError::runtime)?;
        let ridge_scores =
            score_predictions(&ridge.prediction.values, &test.y).map_err(CliError::runtime)?;
        println!(
            "baseline ridge: RMSE={:.6}, MAE={:.6} (lambda={:.6e}, df={:.2})",
            ridge_scores.rmse, ridge_scores.mae, ridge.lambda, ridge.degrees_of_freedom
        );
    }
    Ok(())
}
