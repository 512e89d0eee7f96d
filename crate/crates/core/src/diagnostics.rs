//! Pitfall audit: numeric checks that flag interpretation setups likely to
//! mislead. Every finding carries the metric it was decided on; the metrics
//! come from the public estimators of the other modules.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dependence::{independence_test, pearson, strategy_extrapolation, PerturbationStrategy, TestStatistic};
use crate::error::{invalid, Result};
use crate::grid::GridStrategy;
use crate::inference::Correction;
use crate::interactions::h_pairwise;
use crate::learners::{fit, LearnerSpec};
use crate::model::{evaluate, Loss, Predictor};
use crate::seed::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PitfallId {
    #[serde(rename = "P1_one_fits_all")]
    P1OneFitsAll,
    #[serde(rename = "P2_generalization")]
    P2Generalization,
    #[serde(rename = "P3_unnecessary_complexity")]
    P3UnnecessaryComplexity,
    #[serde(rename = "P4_extrapolation")]
    P4Extrapolation,
    #[serde(rename = "P5_nonlinear_dependence")]
    P5NonlinearDependence,
    #[serde(rename = "P6_conditional_semantics")]
    P6ConditionalSemantics,
    #[serde(rename = "P7_masked_interaction")]
    P7MaskedInteraction,
    #[serde(rename = "P8_uncertainty_ignored")]
    P8UncertaintyIgnored,
    #[serde(rename = "P9_high_dim")]
    P9HighDim,
    #[serde(rename = "P10_mcp")]
    P10Mcp,
    #[serde(rename = "P11_causal")]
    P11Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFinding {
    pub pitfall_id: PitfallId,
    pub severity: Severity,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub message: String,
}

impl AuditFinding {
    fn new(id: PitfallId, severity: Severity, metric: &str, value: f64, threshold: f64, message: impl Into<String>) -> Self {
        AuditFinding { pitfall_id: id, severity, metric: metric.to_string(), value, threshold, message: message.into() }
    }
}

/// Interpretation method an audit is planned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    Pdp,
    Ice,
    Ale,
    Mplot,
    Pfi,
    Cfi,
    GroupedPfi,
    Shap,
    SageMarginal,
    SageConditional,
    HStatistic,
    Dependence,
    Pimp,
}

impl PlanMethod {
    pub fn parse(s: &str) -> Option<PlanMethod> {
        Some(match s {
            "pdp" => PlanMethod::Pdp,
            "ice" => PlanMethod::Ice,
            "ale" => PlanMethod::Ale,
            "mplot" => PlanMethod::Mplot,
            "pfi" => PlanMethod::Pfi,
            "cfi" => PlanMethod::Cfi,
            "grouped_pfi" => PlanMethod::GroupedPfi,
            "shap" => PlanMethod::Shap,
            "sage_marginal" => PlanMethod::SageMarginal,
            "sage_conditional" => PlanMethod::SageConditional,
            "h_statistic" => PlanMethod::HStatistic,
            "dependence" => PlanMethod::Dependence,
            "pimp" => PlanMethod::Pimp,
            _ => return None,
        })
    }

    /// Synthetic points the method evaluates, if it perturbs features
    /// independently of the others.
    fn perturbation(self, grid: GridStrategy) -> Option<PerturbationStrategy> {
        match self {
            PlanMethod::Pdp | PlanMethod::Ice => Some(match grid {
                GridStrategy::Equidistant => PerturbationStrategy::Equidistant,
                GridStrategy::Quantile => PerturbationStrategy::Quantile,
                GridStrategy::Subsample => PerturbationStrategy::Subsample,
            }),
            PlanMethod::Pfi
            | PlanMethod::GroupedPfi
            | PlanMethod::Shap
            | PlanMethod::SageMarginal
            | PlanMethod::HStatistic
            | PlanMethod::Pimp => Some(PerturbationStrategy::Permutation),
            _ => None,
        }
    }

    /// Summarizes a feature by one curve or one number, hiding heterogeneity.
    fn one_dimensional_aggregate(self) -> bool {
        matches!(
            self,
            PlanMethod::Pdp | PlanMethod::Ale | PlanMethod::Mplot | PlanMethod::Pfi | PlanMethod::Cfi
        )
    }

    fn conditional(self) -> bool {
        matches!(self, PlanMethod::Cfi | PlanMethod::SageConditional | PlanMethod::Mplot)
    }

    fn needs_model(self) -> bool {
        self != PlanMethod::Dependence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditPlan {
    pub method: PlanMethod,
    /// Feature of interest; `None` audits all features.
    pub feature: Option<usize>,
    pub grid_strategy: GridStrategy,
    pub grid_size: usize,
    /// Replicates behind the reported uncertainty (0 when none is reported).
    pub replicates: usize,
    /// Number of hypotheses tested.
    pub tested_features: usize,
    pub correction: Correction,
}

impl AuditPlan {
    pub fn new(method: PlanMethod) -> Self {
        AuditPlan {
            method,
            feature: None,
            grid_strategy: GridStrategy::Quantile,
            grid_size: crate::grid::DEFAULT_GRID_SIZE,
            replicates: 0,
            tested_features: 0,
            correction: Correction::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditThresholds {
    /// Test/train loss ratio above which overfitting is reported.
    pub p2_loss_ratio: f64,
    /// Relative test-loss margin within which a linear model suffices.
    pub p3_tolerance: f64,
    pub p4_warn: f64,
    pub p4_fail: f64,
    pub p5_alpha: f64,
    pub p5_max_abs_pearson: f64,
    pub p7_h_squared: f64,
    pub p8_min_replicates: usize,
    pub p9_features: usize,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        AuditThresholds {
            p2_loss_ratio: 2.0,
            p3_tolerance: 0.05,
            p4_warn: 0.3,
            p4_fail: 0.5,
            p5_alpha: 0.05,
            p5_max_abs_pearson: 0.2,
            p7_h_squared: 0.25,
            p8_min_replicates: 10,
            p9_features: 20,
        }
    }
}

/// Cost caps for the checks that scale with n or p.
const AUDIT_ROWS: usize = 300;
const P5_MAX_FEATURES: usize = 20;
const P5_PERMUTATIONS: usize = 199;
const P7_ROWS: usize = 100;
const P7_MAX_PAIRS: usize = 45;

/// Runs the checks relevant to `plan`. `test` is the held-out split the
/// model was not fitted on; without it P2 fails as in-sample evaluation.
pub fn audit<P: Predictor + ?Sized>(
    train: &Dataset,
    test: Option<&Dataset>,
    model: &P,
    plan: &AuditPlan,
    loss: Loss,
    thresholds: &AuditThresholds,
    seed: RngSeed,
) -> Result<Vec<AuditFinding>> {
    if let Some(j) = plan.feature {
        train.check_feature(j)?;
    }
    if test.is_some_and(|t| t.p() != train.p()) {
        return invalid("train and test data differ in feature count");
    }
    let t = thresholds;
    let mut out = Vec::new();
    let eval = test.unwrap_or(train);
    let audit_data = if train.n() > AUDIT_ROWS { train.subsample(AUDIT_ROWS, seed.derive(0))? } else { train.clone() };

    if plan.method.needs_model() {
        let model_test = evaluate(model, eval, loss);
        match test {
            None => out.push(AuditFinding::new(
                PitfallId::P2Generalization,
                Severity::Fail,
                "in_sample_evaluation",
                1.0,
                0.0,
                "no held-out data: in-sample evaluation hides overfitting",
            )),
            Some(_) => {
                let train_loss = evaluate(model, train, loss);
                let ratio = if train_loss > 0.0 { model_test / train_loss } else { f64::INFINITY };
                if ratio > t.p2_loss_ratio {
                    out.push(AuditFinding::new(
                        PitfallId::P2Generalization,
                        Severity::Warn,
                        "test_train_loss_ratio",
                        ratio,
                        t.p2_loss_ratio,
                        "test loss far exceeds training loss: the model overfits and its interpretation may describe noise",
                    ));
                }
            }
        }

        let ols = fit(&LearnerSpec::OlsLinear, train, seed.derive(1))?;
        let ols_test = evaluate(&ols, eval, loss);
        let margin = if model_test > 0.0 { ols_test / model_test - 1.0 } else { f64::INFINITY };
        if margin <= t.p3_tolerance {
            out.push(AuditFinding::new(
                PitfallId::P3UnnecessaryComplexity,
                Severity::Warn,
                "ols_relative_test_loss_excess",
                margin,
                t.p3_tolerance,
                "interpretable model sufficient: a linear model reaches the same test loss",
            ));
        }
    }

    if let Some(strategy) = plan.method.perturbation(plan.grid_strategy) {
        let features: Vec<usize> = plan.feature.map_or_else(|| (0..train.p()).collect(), |j| vec![j]);
        let mut worst = 0.0f64;
        for &j in &features {
            let r = match strategy_extrapolation(&audit_data, j, strategy, plan.grid_size, 0.95, seed.derive2(2, j as u64)) {
                Ok(r) => r,
                Err(crate::error::Error::DegenerateFeature(_)) => continue,
                Err(e) => return Err(e),
            };
            worst = worst.max(r.score);
        }
        if worst > t.p4_warn {
            let severity = if worst > t.p4_fail { Severity::Fail } else { Severity::Warn };
            out.push(AuditFinding::new(
                PitfallId::P4Extrapolation,
                severity,
                "extrapolation_score",
                worst,
                if severity == Severity::Fail { t.p4_fail } else { t.p4_warn },
                format!("{} perturbation creates points outside the data envelope", strategy.name()),
            ));
        }
    }

    if train.p() >= 2 && train.p() <= P5_MAX_FEATURES {
        let mut min_p = f64::INFINITY;
        for a in 0..train.p() {
            for b in a + 1..train.p() {
                let (x, y) = (audit_data.column(a).to_vec(), audit_data.column(b).to_vec());
                let Ok(r) = pearson(&x, &y) else { continue };
                if r.abs() >= t.p5_max_abs_pearson {
                    continue;
                }
                let pv = independence_test(&x, &y, TestStatistic::Hsic, P5_PERMUTATIONS, seed.derive2(3, (a * train.p() + b) as u64))?;
                min_p = min_p.min(pv);
            }
        }
        if min_p < t.p5_alpha {
            out.push(AuditFinding::new(
                PitfallId::P5NonlinearDependence,
                Severity::Warn,
                "min_hsic_p_uncorrelated_pair",
                min_p,
                t.p5_alpha,
                "features are dependent although uncorrelated: correlation screens miss this dependence",
            ));
        }
    }

    if plan.method.conditional() {
        out.push(AuditFinding::new(
            PitfallId::P6ConditionalSemantics,
            Severity::Info,
            "conditional_method",
            1.0,
            0.0,
            "conditional scores measure information not contained in other features, not overall relevance",
        ));
    }

    if plan.method.one_dimensional_aggregate() && plan.method.needs_model() && train.p() >= 2 {
        let pairs: Vec<(usize, usize)> = match plan.feature {
            Some(j) => (0..train.p()).filter(|&k| k != j).map(|k| (j, k)).collect(),
            None => (0..train.p()).flat_map(|a| (a + 1..train.p()).map(move |b| (a, b))).collect(),
        };
        if pairs.len() <= P7_MAX_PAIRS {
            let mut worst = 0.0f64;
            for (a, b) in pairs {
                let h = h_pairwise(model, &audit_data, a, b, P7_ROWS, seed.derive(4))?;
                worst = worst.max(h.entries[0].h_squared);
            }
            if worst > t.p7_h_squared {
                out.push(AuditFinding::new(
                    PitfallId::P7MaskedInteraction,
                    Severity::Warn,
                    "max_pairwise_h_squared",
                    worst,
                    t.p7_h_squared,
                    "strong interactions: a one-dimensional summary can average opposite effects away",
                ));
            }
        } else {
            log::info!("interaction check skipped: {} feature pairs exceed the cap of {P7_MAX_PAIRS}", pairs.len());
        }
    }

    if plan.method != PlanMethod::Dependence && plan.replicates < t.p8_min_replicates {
        out.push(AuditFinding::new(
            PitfallId::P8UncertaintyIgnored,
            Severity::Warn,
            "replicates",
            plan.replicates as f64,
            t.p8_min_replicates as f64,
            "too few replicates to quantify the uncertainty of the estimate",
        ));
    }

    if train.p() > t.p9_features {
        out.push(AuditFinding::new(
            PitfallId::P9HighDim,
            Severity::Info,
            "n_features",
            train.p() as f64,
            t.p9_features as f64,
            "many features: per-feature summaries become hard to read; consider grouping",
        ));
    }

    if plan.tested_features >= 2 && plan.correction == Correction::None {
        out.push(AuditFinding::new(
            PitfallId::P10Mcp,
            Severity::Warn,
            "uncorrected_tests",
            plan.tested_features as f64,
            1.0,
            "several features tested without multiple-comparison correction",
        ));
    }

    out.push(AuditFinding::new(
        PitfallId::P11Causal,
        Severity::Info,
        "causal_claims",
        0.0,
        0.0,
        "relevance to the model does not indicate that a feature causes the target",
    ));
    Ok(out)
}

pub fn findings_json(findings: &[AuditFinding]) -> String {
    serde_json::to_string_pretty(findings).expect("findings serialize")
}

/// Highest severity reported for `id`, if any.
pub fn severity_of(findings: &[AuditFinding], id: PitfallId) -> Option<Severity> {
    findings.iter().filter(|f| f.pitfall_id == id).map(|f| f.severity).max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::train_test_split;
    use crate::dgp::DgpId;
    use crate::learners::fit;
    use ndarray::{Array1, Array2};
    use rand::Rng as _;

    fn split(dgp: DgpId, n: usize, seed: u64) -> (Dataset, Dataset) {
        let d = dgp.sample(n, RngSeed(seed)).unwrap();
        train_test_split(&d, 0.3, RngSeed(seed).derive(9)).unwrap()
    }

    fn run(dgp: DgpId, learner: &LearnerSpec, plan: &AuditPlan, seed: u64) -> Vec<AuditFinding> {
        let (train, test) = split(dgp, 1000, seed);
        let m = fit(learner, &train, RngSeed(seed)).unwrap();
        audit(&train, Some(&test), &m, plan, Loss::SquaredError, &AuditThresholds::default(), RngSeed(seed)).unwrap()
    }

    #[test]
    fn overfit_forest_triggers_generalization_warning() {
        let mut plan = AuditPlan::new(PlanMethod::Pdp);
        plan.feature = Some(0);
        plan.replicates = 10;
        let f = run(DgpId::Fig3Interaction, &LearnerSpec::forest(50), &plan, 1);
        assert!(severity_of(&f, PitfallId::P2Generalization) >= Some(Severity::Warn), "{f:?}");
    }

    #[test]
    fn equidistant_grid_on_correlated_features_fails_extrapolation() {
        let mut plan = AuditPlan::new(PlanMethod::Pdp);
        plan.feature = Some(0);
        plan.grid_strategy = GridStrategy::Equidistant;
        let f = run(DgpId::CorrelatedGaussian { rho: 0.95 }, &LearnerSpec::OlsLinear, &plan, 2);
        assert_eq!(severity_of(&f, PitfallId::P4Extrapolation), Some(Severity::Fail), "{f:?}");
    }

    #[test]
    fn clean_linear_setup_only_suggests_simpler_model() {
        let mut rng = RngSeed(3).rng();
        let n = 600;
        let x = Array2::from_shape_simple_fn((n, 3), || rng.random::<f64>());
        let y = Array1::from_iter(x.outer_iter().map(|r| r[0] + 2.0 * r[1] - r[2] + 0.1 * rng.random::<f64>()));
        let d = Dataset::from_arrays(x, y).unwrap();
        let (train, test) = train_test_split(&d, 0.3, RngSeed(4)).unwrap();
        let m = fit(&LearnerSpec::OlsLinear, &train, RngSeed(0)).unwrap();
        let mut plan = AuditPlan::new(PlanMethod::Pdp);
        plan.replicates = 20;
        let f = audit(&train, Some(&test), &m, &plan, Loss::SquaredError, &AuditThresholds::default(), RngSeed(0)).unwrap();
        assert_eq!(severity_of(&f, PitfallId::P3UnnecessaryComplexity), Some(Severity::Warn));
        for id in [PitfallId::P4Extrapolation, PitfallId::P5NonlinearDependence, PitfallId::P7MaskedInteraction] {
            assert_eq!(severity_of(&f, id), None, "{f:?}");
        }
    }

    #[test]
    fn ring_features_trigger_nonlinear_dependence() {
        let plan = AuditPlan::new(PlanMethod::Dependence);
        let (train, _) = split(DgpId::RingDependence, 600, 5);
        let m = fit(&LearnerSpec::OlsLinear, &train, RngSeed(0)).unwrap();
        let f = audit(&train, None, &m, &plan, Loss::SquaredError, &AuditThresholds::default(), RngSeed(0)).unwrap();
        assert_eq!(severity_of(&f, PitfallId::P5NonlinearDependence), Some(Severity::Warn));
        assert_eq!(severity_of(&f, PitfallId::P2Generalization), None);
    }

    #[test]
    fn masked_interaction_and_bookkeeping_checks() {
        let mut plan = AuditPlan::new(PlanMethod::Pdp);
        plan.feature = Some(1);
        plan.tested_features = 3;
        let f = run(DgpId::Fig5Masked, &LearnerSpec::Oracle { dgp: DgpId::Fig5Masked }, &plan, 6);
        assert_eq!(severity_of(&f, PitfallId::P7MaskedInteraction), Some(Severity::Warn));
        assert_eq!(severity_of(&f, PitfallId::P8UncertaintyIgnored), Some(Severity::Warn));
        assert_eq!(severity_of(&f, PitfallId::P10Mcp), Some(Severity::Warn));
        assert_eq!(severity_of(&f, PitfallId::P11Causal), Some(Severity::Info));
    }

    #[test]
    fn missing_holdout_fails_generalization_check() {
        let (train, _) = split(DgpId::Fig5Masked, 200, 7);
        let m = fit(&LearnerSpec::OlsLinear, &train, RngSeed(0)).unwrap();
        let f = audit(&train, None, &m, &AuditPlan::new(PlanMethod::Cfi), Loss::SquaredError, &AuditThresholds::default(), RngSeed(0)).unwrap();
        assert_eq!(severity_of(&f, PitfallId::P2Generalization), Some(Severity::Fail));
        assert_eq!(severity_of(&f, PitfallId::P6ConditionalSemantics), Some(Severity::Info));
    }

    #[test]
    fn json_uses_pitfall_keys_and_is_deterministic() {
        let mut plan = AuditPlan::new(PlanMethod::Pfi);
        plan.replicates = 3;
        let a = findings_json(&run(DgpId::Fig5Masked, &LearnerSpec::OlsLinear, &plan, 8));
        let b = findings_json(&run(DgpId::Fig5Masked, &LearnerSpec::OlsLinear, &plan, 8));
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        let first = &v.as_array().unwrap()[0];
        for key in ["pitfall_id", "severity", "metric", "value", "threshold", "message"] {
            assert!(first.get(key).is_some());
        }
        assert!(a.contains("\"P8_uncertainty_ignored\""));
    }
}
