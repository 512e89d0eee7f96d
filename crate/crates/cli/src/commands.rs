use std::fmt;

use imlkit::dependence::{dependence_matrix, strategy_extrapolation, write_dependence_csv, PerturbationStrategy, MIN_PERMUTATIONS};
use imlkit::dgp::DgpId;
use imlkit::diagnostics::{audit, AuditPlan, AuditThresholds, PlanMethod, Severity};
use imlkit::effects::{ale, derivative_ice, ice, mplot, pdp, pdp_2d, DEFAULT_ALE_INTERVALS, DEFAULT_NEIGHBORHOOD_FRACTION};
use imlkit::experiments::{run_figure, Check, Figure};
use imlkit::grid::DEFAULT_GRID_SIZE;
use imlkit::importance::{
    cfi, default_background, fit_conditional_sampler, grouped_pfi, pfi, sage, shap_importance, FeatureGroup,
    ImportanceResult, SageMode, DEFAULT_MAX_LEAVES,
};
use imlkit::inference::{pdp_band_estimation, pdp_band_refit, pimp, Correction, PimpConfig, RefitSource};
use imlkit::interactions::{h_all, h_pairwise, h_total, InteractionResult, MAX_H_ROWS};
use imlkit::learners::{fit, FittedModel, LearnerSpec};
use imlkit::{build_grid, fn_predictor, train_test_split, Dataset, GridStrategy, Loss, RngSeed};

use crate::config::{Config, ConfigError, AUDIT_KEYS};
use crate::output::{OutputDir, Report, Status};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit code 2).
    Config(ConfigError),
    /// The method itself failed (exit code 1).
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<imlkit::Error> for CliError {
    fn from(e: imlkit::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("i/o error: {e}"))
    }
}

type Res<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Effect,
    Importance,
    Interaction,
    Dependence,
    Test,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Effect => "effect",
            Command::Importance => "importance",
            Command::Interaction => "interaction",
            Command::Dependence => "dependence",
            Command::Test => "test",
            Command::Audit => "audit",
        }
    }
}

// Streams of the run seed. Recorded in the report so a run can be replayed.
const DATA_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const FIT_STREAM: u64 = 2;
const METHOD_STREAM: u64 = 3;
const AUDIT_STREAM: u64 = 4;

const LOSSES: &[(&str, Loss)] = &[("squared_error", Loss::SquaredError), ("absolute_error", Loss::AbsoluteError)];
const GRIDS: &[(&str, GridStrategy)] = &[
    ("equidistant", GridStrategy::Equidistant),
    ("quantile", GridStrategy::Quantile),
    ("subsample", GridStrategy::Subsample),
];
const CORRECTIONS: &[(&str, Correction)] =
    &[("none", Correction::None), ("bonferroni", Correction::Bonferroni), ("holm", Correction::Holm)];

struct Source {
    data: Dataset,
    dgp: Option<DgpId>,
}

fn load_source(cfg: &Config, seed: RngSeed, report: &mut Report) -> Res<Source> {
    match (cfg.contains("dgp"), cfg.contains("data")) {
        (true, true) => Err(cfg.error("data", "set either 'dgp' or 'data', not both").into()),
        (false, false) => Err(ConfigError::general("either 'dgp' or 'data' is required").into()),
        (true, false) => {
            let id = cfg.raw("dgp").unwrap_or_default().to_string();
            let p = cfg.get::<usize>("dgp.p")?;
            let rho = cfg.get::<f64>("dgp.rho")?;
            let dgp = DgpId::parse(&id, p, rho).map_err(|e| cfg.error("dgp", e.to_string()))?;
            let n = cfg.get_or::<usize>("dgp.n", 1000)?;
            if n < 10 {
                return Err(cfg.error("dgp.n", "need at least 10 rows").into());
            }
            let s = seed.derive(DATA_STREAM);
            report.seed("data", s);
            Ok(Source { data: dgp.sample(n, s)?, dgp: Some(dgp) })
        }
        (false, true) => {
            let path = cfg.raw("data").unwrap_or_default().to_string();
            let target = cfg.raw("data.target").unwrap_or("y").to_string();
            let data = Dataset::from_csv_path(&path, &target)
                .map_err(|e| CliError::Run(format!("cannot load data from {path}: {e}")))?;
            Ok(Source { data, dgp: None })
        }
    }
}

fn split(cfg: &Config, data: &Dataset, seed: RngSeed, report: &mut Report) -> Res<(Dataset, Dataset)> {
    let fraction = cfg.get_or::<f64>("split.test_fraction", 0.3)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(cfg.error("split.test_fraction", "must lie strictly between 0 and 1").into());
    }
    let s = seed.derive(SPLIT_STREAM);
    report.seed("split", s);
    Ok(train_test_split(data, fraction, s)?)
}

fn learner(cfg: &Config, dgp: Option<DgpId>) -> Res<LearnerSpec> {
    let kind = cfg.raw("learner.kind").unwrap_or("random_forest").to_string();
    let spec = match kind.as_str() {
        "ols_linear" => LearnerSpec::OlsLinear,
        "knn" => LearnerSpec::Knn { k: cfg.get_or("learner.params.k", 10)? },
        "kernel_ridge_rbf" => LearnerSpec::KernelRidgeRbf {
            lambda: cfg.get_or("learner.params.lambda", 1.0)?,
            gamma: cfg.get("learner.params.gamma")?,
        },
        "random_forest" => LearnerSpec::RandomForest {
            n_trees: cfg.get_or("learner.params.n_trees", 100)?,
            max_depth: cfg.get("learner.params.max_depth")?,
            max_features: cfg.get("learner.params.max_features")?,
            bootstrap: cfg.get_or("learner.params.bootstrap", true)?,
            min_leaf: cfg.get_or("learner.params.min_leaf", 1)?,
        },
        "oracle" => match dgp {
            Some(dgp) => LearnerSpec::Oracle { dgp },
            None => return Err(cfg.error("learner.kind", "the oracle learner needs a 'dgp' source").into()),
        },
        other => {
            return Err(cfg
                .error(
                    "learner.kind",
                    format!("unknown learner '{other}' (expected one of: ols_linear, knn, kernel_ridge_rbf, random_forest, oracle)"),
                )
                .into())
        }
    };
    spec.validate().map_err(|e| cfg.error("learner.kind", e.to_string()))?;
    Ok(spec)
}

fn thresholds(cfg: &Config) -> Res<AuditThresholds> {
    let mut t = AuditThresholds::default();
    for name in AUDIT_KEYS {
        let key = format!("audit.{name}");
        if !cfg.contains(&key) {
            continue;
        }
        match *name {
            "p2_loss_ratio" => t.p2_loss_ratio = cfg.get_or(&key, t.p2_loss_ratio)?,
            "p3_tolerance" => t.p3_tolerance = cfg.get_or(&key, t.p3_tolerance)?,
            "p4_warn" => t.p4_warn = cfg.get_or(&key, t.p4_warn)?,
            "p4_fail" => t.p4_fail = cfg.get_or(&key, t.p4_fail)?,
            "p5_alpha" => t.p5_alpha = cfg.get_or(&key, t.p5_alpha)?,
            "p5_max_abs_pearson" => t.p5_max_abs_pearson = cfg.get_or(&key, t.p5_max_abs_pearson)?,
            "p7_h_squared" => t.p7_h_squared = cfg.get_or(&key, t.p7_h_squared)?,
            "p8_min_replicates" => t.p8_min_replicates = cfg.get_or(&key, t.p8_min_replicates)?,
            "p9_features" => t.p9_features = cfg.get_or(&key, t.p9_features)?,
            _ => unreachable!("audit keys are listed above"),
        }
    }
    if t.p4_warn > t.p4_fail {
        return Err(cfg.error("audit.p4_warn", "must not exceed audit.p4_fail").into());
    }
    Ok(t)
}

fn feature(cfg: &Config, key: &str, data: &Dataset) -> Res<usize> {
    let Some(name) = cfg.raw(key) else {
        return Err(ConfigError::general(format!("'{key}' is required")).into());
    };
    resolve_feature(cfg, key, name, data)
}

fn resolve_feature(cfg: &Config, key: &str, name: &str, data: &Dataset) -> Res<usize> {
    data.feature_index(name).ok_or_else(|| {
        cfg.error(key, format!("no feature '{name}' (available: {})", data.feature_names().join(", "))).into()
    })
}

fn positive(cfg: &Config, key: &str, default: usize, min: usize) -> Res<usize> {
    let v = cfg.get_or(key, default)?;
    if v < min {
        return Err(cfg.error(key, format!("must be at least {min}")).into());
    }
    Ok(v)
}

fn grid_settings(cfg: &Config) -> Res<(GridStrategy, usize)> {
    let strategy = cfg.choice("method.grid", GRIDS)?.unwrap_or(GridStrategy::Quantile);
    Ok((strategy, positive(cfg, "method.grid_size", DEFAULT_GRID_SIZE, 2)?))
}

fn method_name<'a>(cfg: &'a Config, default: &'a str, allowed: &[&str]) -> Res<&'a str> {
    let name = cfg.raw("method.name").unwrap_or(default);
    if !allowed.contains(&name) {
        return Err(cfg.error("method.name", format!("unknown method '{name}' (expected one of: {})", allowed.join(", "))).into());
    }
    Ok(name)
}

fn csv_of(write: impl FnOnce(&mut Vec<u8>) -> imlkit::Result<()>) -> Res<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Everything a model-based command needs after configuration is read.
struct Setup {
    source: Source,
    train: Dataset,
    test: Dataset,
    spec: LearnerSpec,
    loss: Loss,
    thresholds: AuditThresholds,
}

fn setup(cfg: &Config, seed: RngSeed, report: &mut Report, with_model: bool) -> Res<Setup> {
    let source = load_source(cfg, seed, report)?;
    let (train, test) = split(cfg, &source.data, seed, report)?;
    let spec = if with_model { learner(cfg, source.dgp)? } else { LearnerSpec::OlsLinear };
    let loss = cfg.choice("method.loss", LOSSES)?.unwrap_or(Loss::SquaredError);
    let thresholds = thresholds(cfg)?;
    Ok(Setup { source, train, test, spec, loss, thresholds })
}

fn fit_model(s: &Setup, seed: RngSeed, report: &mut Report) -> Res<FittedModel> {
    let fs = seed.derive(FIT_STREAM);
    report.seed("fit", fs);
    let model = fit(&s.spec, &s.train, fs)?;
    report.metric("train_loss", imlkit::evaluate(&model, &s.train, s.loss));
    report.metric("test_loss", imlkit::evaluate(&model, &s.test, s.loss));
    Ok(model)
}

fn run_audit<P: imlkit::Predictor + ?Sized>(s: &Setup, model: &P, plan: &AuditPlan, seed: RngSeed, report: &mut Report) -> Res<()> {
    let a = seed.derive(AUDIT_STREAM);
    report.seed("audit", a);
    report.audit = audit(&s.train, Some(&s.test), model, plan, s.loss, &s.thresholds, a)?;
    Ok(())
}

fn score_metrics(report: &mut Report, r: &ImportanceResult) {
    for (name, score) in r.names.iter().zip(&r.scores) {
        report.metric(format!("score.{name}"), *score);
    }
}

/// Runs one model-based command, writing its CSVs into `out`.
pub fn run(command: Command, cfg: &Config, seed: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let ms = seed.derive(METHOD_STREAM);
    match command {
        Command::Effect => effect(cfg, seed, ms, out, report),
        Command::Importance => importance(cfg, seed, ms, out, report),
        Command::Interaction => interaction(cfg, seed, ms, out, report),
        Command::Dependence => dependence(cfg, seed, ms, out, report),
        Command::Test => test(cfg, seed, ms, out, report),
        Command::Audit => audit_only(cfg, seed, out, report),
    }
}

fn effect(cfg: &Config, seed: RngSeed, ms: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, true)?;
    let name = method_name(cfg, "pdp", &["pdp", "ice", "ale", "mplot", "derivative_ice", "pdp_2d"])?;
    let data = &s.train;
    let mut plan = AuditPlan::new(match name {
        "ale" => PlanMethod::Ale,
        "mplot" => PlanMethod::Mplot,
        "ice" | "derivative_ice" => PlanMethod::Ice,
        _ => PlanMethod::Pdp,
    });
    report.seed("method", ms);

    if name == "pdp_2d" {
        let names = cfg.list("method.features").unwrap_or_default();
        if names.len() != 2 {
            return Err(cfg.error("method.features", "pdp_2d needs exactly two features").into());
        }
        let a = resolve_feature(cfg, "method.features", &names[0], data)?;
        let b = resolve_feature(cfg, "method.features", &names[1], data)?;
        let (strategy, size) = grid_settings(cfg)?;
        plan.grid_strategy = strategy;
        plan.grid_size = size;
        cfg.check_all_used("pdp_2d")?;
        let model = fit_model(&s, seed, report)?;
        let ga = build_grid(data, a, strategy, size, ms.derive(0))?;
        let gb = build_grid(data, b, strategy, size, ms.derive(1))?;
        let surface = pdp_2d(&model, data, &ga, &gb)?;
        out.write("pdp2d.csv", &csv_of(|w| surface.write_csv(w))?)?;
        return run_audit(&s, &model, &plan, seed, report);
    }

    let j = feature(cfg, "method.feature", data)?;
    plan.feature = Some(j);
    if name == "ale" {
        let intervals = positive(cfg, "method.intervals", DEFAULT_ALE_INTERVALS, 1)?;
        cfg.check_all_used("ale")?;
        let model = fit_model(&s, seed, report)?;
        let curve = ale(&model, data, j, intervals)?;
        out.write("ale.csv", &csv_of(|w| curve.write_csv(w))?)?;
        return run_audit(&s, &model, &plan, seed, report);
    }

    let (strategy, size) = grid_settings(cfg)?;
    plan.grid_strategy = strategy;
    plan.grid_size = size;
    let grid_seed = ms.derive(0);
    if name == "mplot" {
        let fraction = cfg.get_or("method.neighborhood", DEFAULT_NEIGHBORHOOD_FRACTION)?;
        cfg.check_all_used("mplot")?;
        let model = fit_model(&s, seed, report)?;
        let grid = build_grid(data, j, strategy, size, grid_seed)?;
        let curve = mplot(&model, data, &grid, fraction)?;
        out.write("mplot.csv", &csv_of(|w| curve.write_csv(w))?)?;
        return run_audit(&s, &model, &plan, seed, report);
    }
    if name == "derivative_ice" {
        cfg.check_all_used("derivative_ice")?;
        let model = fit_model(&s, seed, report)?;
        let grid = build_grid(data, j, strategy, size, grid_seed)?;
        let (curves, sd) = derivative_ice(&ice(&model, data, &grid)?)?;
        out.write("dice.csv", &csv_of(|w| curves.write_observations_csv(w))?)?;
        let mut rows = String::from("grid,sd\n");
        for (g, v) in grid.values.iter().zip(&sd) {
            rows.push_str(&format!("{g},{v}\n"));
        }
        out.write("dice_sd.csv", rows.as_bytes())?;
        report.metric("max_dice_sd", sd.iter().cloned().fold(0.0, f64::max));
        return run_audit(&s, &model, &plan, seed, report);
    }

    // pdp / ice, optionally with an uncertainty band
    let band = cfg.choice("method.band", &[("none", 0u8), ("estimation", 1), ("refit", 2)])?.unwrap_or(0);
    let replicates = if band > 0 { positive(cfg, "method.replicates", 20, 2)? } else { 0 };
    plan.replicates = replicates;
    cfg.check_all_used(name)?;
    let model = fit_model(&s, seed, report)?;
    let grid = build_grid(data, j, strategy, size, grid_seed)?;
    let curves = ice(&model, data, &grid)?;
    let mean = pdp(&model, data, &grid)?;
    out.write("pdp.csv", &csv_of(|w| mean.write_csv(w))?)?;
    out.write("ice.csv", &csv_of(|w| curves.write_observations_csv(w))?)?;
    if band > 0 {
        let bs = ms.derive(1);
        let b = if band == 1 {
            pdp_band_estimation(&model, data, &grid, replicates, (data.n() / 2).max(2), bs)?
        } else {
            let source = match s.source.dgp {
                Some(d) => RefitSource::Dgp(d),
                None => RefitSource::Data(&s.train),
            };
            pdp_band_refit(&s.spec, source, &grid, replicates, data.n(), bs)?
        };
        report.metric("mean_band_width", b.mean_width());
        out.write("band.csv", &csv_of(|w| b.write_csv(w))?)?;
    }
    run_audit(&s, &model, &plan, seed, report)
}

fn importance(cfg: &Config, seed: RngSeed, ms: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, true)?;
    let name = method_name(cfg, "pfi", &["pfi", "cfi", "grouped_pfi", "shap", "sage"])?;
    let eval = &s.test;
    report.seed("method", ms);
    let result = match name {
        "pfi" | "cfi" | "grouped_pfi" => {
            let repeats = positive(cfg, "method.repeats", 10, 1)?;
            let mut plan = AuditPlan::new(match name {
                "pfi" => PlanMethod::Pfi,
                "cfi" => PlanMethod::Cfi,
                _ => PlanMethod::GroupedPfi,
            });
            plan.replicates = repeats;
            let groups = if name == "grouped_pfi" {
                let Some(specs) = cfg.list("method.groups") else {
                    return Err(ConfigError::general("'method.groups' is required for grouped_pfi").into());
                };
                let mut groups = Vec::new();
                for spec in specs {
                    let members = spec
                        .split('+')
                        .map(|m| resolve_feature(cfg, "method.groups", m.trim(), eval))
                        .collect::<Res<Vec<_>>>()?;
                    groups.push(FeatureGroup::new(spec.replace(' ', ""), members));
                }
                groups
            } else {
                Vec::new()
            };
            let max_leaves = if name == "cfi" { positive(cfg, "method.max_leaves", DEFAULT_MAX_LEAVES, 1)? } else { 0 };
            cfg.check_all_used(name)?;
            let model = fit_model(&s, seed, report)?;
            let r = match name {
                "pfi" => pfi(&model, eval, s.loss, repeats, ms)?,
                "cfi" => {
                    let samplers = (0..eval.p())
                        .map(|j| fit_conditional_sampler(eval, j, max_leaves, ms.derive2(1, j as u64)))
                        .collect::<imlkit::Result<Vec<_>>>()?;
                    cfi(&model, eval, s.loss, &samplers, repeats, ms.derive(2))?
                }
                _ => grouped_pfi(&model, eval, s.loss, &groups, repeats, ms)?,
            };
            run_audit(&s, &model, &plan, seed, report)?;
            r
        }
        "shap" => {
            let orderings = positive(cfg, "method.orderings", 25, 1)?;
            let rows = positive(cfg, "method.rows", 50, 1)?;
            let mut plan = AuditPlan::new(PlanMethod::Shap);
            plan.replicates = orderings;
            cfg.check_all_used("shap")?;
            let model = fit_model(&s, seed, report)?;
            let background = default_background(&s.train, ms.derive(0));
            let rows = eval.subsample(rows.min(eval.n()), ms.derive(1))?;
            let r = shap_importance(&model, &background, &rows, orderings, ms.derive(2))?;
            run_audit(&s, &model, &plan, seed, report)?;
            r
        }
        _ => {
            let mode = cfg
                .choice("method.mode", &[("marginal", SageMode::Marginal), ("conditional", SageMode::Conditional)])?
                .unwrap_or(SageMode::Marginal);
            let orderings = positive(cfg, "method.orderings", 200, 1)?;
            let mut plan = AuditPlan::new(match mode {
                SageMode::Marginal => PlanMethod::SageMarginal,
                SageMode::Conditional => PlanMethod::SageConditional,
            });
            plan.replicates = orderings;
            cfg.check_all_used("sage")?;
            let model = fit_model(&s, seed, report)?;
            let r = sage(&model, eval, s.loss, mode, orderings, ms)?;
            run_audit(&s, &model, &plan, seed, report)?;
            r
        }
    };
    score_metrics(report, &result);
    out.write("importance.csv", &csv_of(|w| result.write_csv(w))?)?;
    Ok(())
}

fn interaction(cfg: &Config, seed: RngSeed, ms: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, true)?;
    method_name(cfg, "h_statistic", &["h_statistic"])?;
    let data = &s.train;
    let rows = positive(cfg, "method.rows", MAX_H_ROWS, 2)?;
    let pair = match cfg.list("method.features") {
        None => None,
        Some(names) if names.len() == 2 => Some((
            resolve_feature(cfg, "method.features", &names[0], data)?,
            resolve_feature(cfg, "method.features", &names[1], data)?,
        )),
        Some(_) => return Err(cfg.error("method.features", "give exactly two features, or omit for all pairs").into()),
    };
    if data.p() < 2 {
        return Err(ConfigError::general("interaction statistics need at least two features").into());
    }
    cfg.check_all_used("h_statistic")?;
    report.seed("method", ms);
    let model = fit_model(&s, seed, report)?;
    let result = match pair {
        None => h_all(&model, data, rows, ms)?,
        Some((a, b)) => {
            let mut entries = h_pairwise(&model, data, a, b, rows, ms)?.entries;
            entries.extend(h_total(&model, data, a, rows, ms)?.entries);
            entries.extend(h_total(&model, data, b, rows, ms)?.entries);
            InteractionResult { entries }
        }
    };
    for e in &result.entries {
        let key = match &e.feature_b {
            Some(b) => format!("h2.{}.{}", e.feature_a, b),
            None => format!("h2.{}", e.feature_a),
        };
        report.metric(key, e.h_squared);
    }
    out.write("h_pairwise.csv", &csv_of(|w| result.write_pairwise_csv(w))?)?;
    out.write("h_total.csv", &csv_of(|w| result.write_total_csv(w))?)?;
    run_audit(&s, &model, &AuditPlan::new(PlanMethod::HStatistic), seed, report)
}

fn dependence(cfg: &Config, seed: RngSeed, ms: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, false)?;
    method_name(cfg, "dependence", &["dependence"])?;
    let data = &s.source.data;
    if data.p() < 2 {
        return Err(ConfigError::general("dependence needs at least two features").into());
    }
    let perms = positive(cfg, "method.permutations", 199, MIN_PERMUTATIONS)?;
    let extrapolation = match cfg.raw("method.feature") {
        None => None,
        Some(name) => {
            let j = resolve_feature(cfg, "method.feature", name, data)?;
            let strategies = match cfg.list("method.strategy") {
                None => vec![
                    PerturbationStrategy::Equidistant,
                    PerturbationStrategy::Quantile,
                    PerturbationStrategy::Subsample,
                    PerturbationStrategy::Permutation,
                ],
                Some(names) => names
                    .iter()
                    .map(|n| {
                        PerturbationStrategy::parse(n)
                            .ok_or_else(|| CliError::from(cfg.error("method.strategy", format!("unknown strategy '{n}'"))))
                    })
                    .collect::<Res<Vec<_>>>()?,
            };
            let size = positive(cfg, "method.grid_size", DEFAULT_GRID_SIZE, 2)?;
            Some((j, strategies, size))
        }
    };
    for k in cfg.ignore_prefix("learner.") {
        report.notes.push(format!("'{k}' ignored: dependence does not fit a model"));
    }
    cfg.check_all_used("dependence")?;
    report.seed("method", ms);
    let pairs = dependence_matrix(data, perms, ms)?;
    for p in &pairs {
        report.metric(format!("hsic_p.{}.{}", p.feature_a, p.feature_b), p.report.hsic_p);
    }
    out.write("dependence.csv", &csv_of(|w| write_dependence_csv(&pairs, w))?)?;
    if let Some((j, strategies, size)) = extrapolation {
        let mut rows = String::from("strategy,score,threshold_distance,n_flagged\n");
        for (k, st) in strategies.iter().enumerate() {
            let r = strategy_extrapolation(data, j, *st, size, 0.95, ms.derive2(1, k as u64))?;
            report.metric(format!("extrapolation.{}", st.name()), r.score);
            rows.push_str(&format!("{},{},{},{}\n", st.name(), r.score, r.threshold_distance, r.flagged_points.len()));
        }
        out.write("extrapolation.csv", rows.as_bytes())?;
    }
    // no model involved; the audit only looks at the data
    let none = fn_predictor(|_| 0.0);
    run_audit(&s, &none, &AuditPlan::new(PlanMethod::Dependence), seed, report)
}

fn test(cfg: &Config, seed: RngSeed, ms: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, true)?;
    method_name(cfg, "pimp", &["pimp"])?;
    let config = PimpConfig {
        n_target_permutations: positive(cfg, "method.target_permutations", 30, imlkit::inference::MIN_TARGET_PERMUTATIONS)?,
        pfi_repeats: positive(cfg, "method.repeats", 1, 1)?,
    };
    let correction = cfg.choice("method.correction", CORRECTIONS)?.unwrap_or(Correction::Holm);
    let alpha = cfg.get_or("method.alpha", 0.05)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(cfg.error("method.alpha", "must lie strictly between 0 and 1").into());
    }
    cfg.check_all_used("pimp")?;
    report.seed("method", ms);
    let raw = pimp(&s.spec, &s.train, Some(&s.test), s.loss, config, ms)?;
    let tested = imlkit::inference::TestedImportance::new(raw.names, raw.observed, raw.p_values_raw, correction, alpha)?;
    report.metric("n_significant", tested.n_significant() as f64);
    out.write("tested_importance.csv", &csv_of(|w| tested.write_csv(w))?)?;
    let model = fit_model(&s, seed, report)?;
    let mut plan = AuditPlan::new(PlanMethod::Pimp);
    plan.tested_features = s.train.p();
    plan.correction = correction;
    run_audit(&s, &model, &plan, seed, report)
}

fn audit_only(cfg: &Config, seed: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let s = setup(cfg, seed, report, true)?;
    let name = cfg.raw("method.name").unwrap_or("pfi");
    let method = PlanMethod::parse(name).ok_or_else(|| cfg.error("method.name", format!("unknown method '{name}'")))?;
    let mut plan = AuditPlan::new(method);
    if cfg.contains("method.feature") {
        plan.feature = Some(feature(cfg, "method.feature", &s.train)?);
    }
    let (strategy, size) = grid_settings(cfg)?;
    plan.grid_strategy = strategy;
    plan.grid_size = size;
    plan.replicates = cfg.get_or("method.replicates", 0)?;
    plan.correction = cfg.choice("method.correction", CORRECTIONS)?.unwrap_or(Correction::None);
    if method == PlanMethod::Pimp {
        plan.tested_features = s.train.p();
    }
    cfg.check_all_used("audit")?;
    let model = fit_model(&s, seed, report)?;
    run_audit(&s, &model, &plan, seed, report)?;
    let fails = report.audit.iter().filter(|f| f.severity == Severity::Fail).count();
    report.checks.push(Check {
        metric: "audit_fail_findings".into(),
        value: fails as f64,
        condition: "== 0".into(),
        pass: fails == 0,
    });
    out.write("audit.json", imlkit::diagnostics::findings_json(&report.audit).as_bytes())?;
    Ok(())
}

/// Runs a registered study and records its checks.
pub fn reproduce(figure: Figure, seed: RngSeed, out: &mut OutputDir, report: &mut Report) -> Res<()> {
    let run = run_figure(figure, seed)?;
    for t in &run.tables {
        out.write(&t.file, t.csv.as_bytes())?;
    }
    for c in &run.checks {
        report.metric(c.metric.clone(), c.value);
    }
    report.checks = run.checks;
    report.notes.extend(run.notes);
    Ok(())
}

pub fn finish(report: &mut Report) -> Status {
    report.settle();
    report.status
}
