//! Dependence measures with permutation tests, and the extrapolation
//! diagnostic for the synthetic points perturbation methods evaluate.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::grid::{build_grid, GridStrategy};
use crate::learners::median_heuristic_gamma;
use crate::seed::RngSeed;
use crate::stats;

pub const MIN_PERMUTATIONS: usize = 99;
pub const DEFAULT_EXTRAPOLATION_QUANTILE: f64 = 0.95;
const MIN_HSIC_N: usize = 10;

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return invalid(format!("vectors differ in length ({} vs {})", x.len(), y.len()));
    }
    if x.len() < min_len {
        return invalid(format!("need at least {min_len} observations, got {}", x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("non-finite value in dependence input");
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Sample correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    if is_constant(x) || is_constant(y) {
        return invalid("correlation of a constant vector is undefined");
    }
    Ok(pearson_unchecked(x, y))
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    if is_constant(x) || is_constant(y) {
        return invalid("correlation of a constant vector is undefined");
    }
    Ok(pearson_unchecked(&stats::average_ranks(x), &stats::average_ranks(y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsicValue {
    pub value: f64,
    /// An input was constant; `value` is 0.
    pub degenerate: bool,
}

/// Centered RBF Gram matrix `HKH` with median-heuristic bandwidth.
fn centered_gram(v: &[f64]) -> Array2<f64> {
    let n = v.len();
    let col = ArrayView1::from(v).insert_axis(Axis(1));
    let gamma = median_heuristic_gamma(col);
    let mut k = Array2::from_shape_fn((n, n), |(i, j)| (-gamma * (v[i] - v[j]).powi(2)).exp());
    let row_means = k.mean_axis(Axis(1)).expect("n > 0");
    let grand = row_means.mean().expect("n > 0");
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] += grand - row_means[i] - row_means[j];
        }
    }
    k
}

fn gram(v: &[f64]) -> Array2<f64> {
    let col = ArrayView1::from(v).insert_axis(Axis(1));
    let gamma = median_heuristic_gamma(col);
    Array2::from_shape_fn((v.len(), v.len()), |(i, j)| (-gamma * (v[i] - v[j]).powi(2)).exp())
}

/// `sum_ij Kc_ij L_{pi(i) pi(j)} / n^2`, i.e. trace(K H L H) / n^2 with L permuted.
fn hsic_from(kc: &Array2<f64>, l: &Array2<f64>, perm: Option<&[usize]>) -> f64 {
    let n = kc.nrows();
    let mut s = 0.0;
    for i in 0..n {
        let pi = perm.map_or(i, |p| p[i]);
        let lrow = l.row(pi);
        let krow = kc.row(i);
        match perm {
            None => s += krow.dot(&lrow),
            Some(p) => {
                for j in 0..n {
                    s += krow[j] * lrow[p[j]];
                }
            }
        }
    }
    (s / (n * n) as f64).max(0.0)
}

/// Biased HSIC estimate `trace(K H L H) / n^2` with RBF kernels.
pub fn hsic(x: &[f64], y: &[f64]) -> Result<HsicValue> {
    check_pair(x, y, MIN_HSIC_N)?;
    if is_constant(x) || is_constant(y) {
        return Ok(HsicValue { value: 0.0, degenerate: true });
    }
    Ok(HsicValue { value: hsic_from(&centered_gram(x), &gram(y), None), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatistic {
    Pearson,
    Hsic,
}

impl TestStatistic {
    pub fn parse(s: &str) -> Option<TestStatistic> {
        match s {
            "pearson" => Some(TestStatistic::Pearson),
            "hsic" => Some(TestStatistic::Hsic),
            _ => None,
        }
    }
}

fn permutation_p(observed: f64, permuted: &[f64]) -> f64 {
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (permuted.len() + 1) as f64
}

fn permutations(n: usize, count: usize, seed: RngSeed) -> impl IndexedParallelIterator<Item = Vec<usize>> {
    (0..count).into_par_iter().map(move |b| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed.derive(b as u64).rng());
        idx
    })
}

/// Permutation test of independence; returns `(observed statistic, p-value)`.
/// The Pearson test is two-sided through |r|.
pub fn independence_test_with_statistic(
    x: &[f64],
    y: &[f64],
    statistic: TestStatistic,
    n_permutations: usize,
    seed: RngSeed,
) -> Result<(f64, f64)> {
    if n_permutations < MIN_PERMUTATIONS {
        return invalid(format!("n_permutations must be >= {MIN_PERMUTATIONS}"));
    }
    let n = x.len();
    match statistic {
        TestStatistic::Pearson => {
            let observed = pearson(x, y)?.abs();
            let perm: Vec<f64> = permutations(n, n_permutations, seed)
                .map(|p| {
                    let yp: Vec<f64> = p.iter().map(|&i| y[i]).collect();
                    pearson_unchecked(x, &yp).abs()
                })
                .collect();
            Ok((observed, permutation_p(observed, &perm)))
        }
        TestStatistic::Hsic => {
            let h = hsic(x, y)?;
            if h.degenerate {
                return Ok((0.0, 1.0));
            }
            let kc = centered_gram(x);
            let l = gram(y);
            let observed = hsic_from(&kc, &l, None);
            let perm: Vec<f64> =
                permutations(n, n_permutations, seed).map(|p| hsic_from(&kc, &l, Some(&p))).collect();
            Ok((observed, permutation_p(observed, &perm)))
        }
    }
}

/// Permutation p-value `(1 + #{permuted >= observed}) / (B + 1)`.
pub fn independence_test(
    x: &[f64],
    y: &[f64],
    statistic: TestStatistic,
    n_permutations: usize,
    seed: RngSeed,
) -> Result<f64> {
    Ok(independence_test_with_statistic(x, y, statistic, n_permutations, seed)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub pearson: f64,
    pub spearman: f64,
    pub hsic: f64,
    pub pearson_p: f64,
    pub hsic_p: f64,
    pub n_permutations: usize,
}

pub fn dependence_report(x: &[f64], y: &[f64], n_permutations: usize, seed: RngSeed) -> Result<DependenceReport> {
    let (_, pearson_p) = independence_test_with_statistic(x, y, TestStatistic::Pearson, n_permutations, seed.derive(0))?;
    let (hsic, hsic_p) = independence_test_with_statistic(x, y, TestStatistic::Hsic, n_permutations, seed.derive(1))?;
    Ok(DependenceReport {
        pearson: pearson(x, y)?,
        spearman: spearman(x, y)?,
        hsic,
        pearson_p,
        hsic_p,
        n_permutations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDependence {
    pub feature_a: String,
    pub feature_b: String,
    pub report: DependenceReport,
}

/// Reports for every feature pair, in (a < b) order.
pub fn dependence_matrix(data: &Dataset, n_permutations: usize, seed: RngSeed) -> Result<Vec<PairDependence>> {
    let p = data.p();
    let names = data.feature_names();
    let mut out = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let report = dependence_report(
                &data.column(a).to_vec(),
                &data.column(b).to_vec(),
                n_permutations,
                seed.derive2(a as u64, b as u64),
            )?;
            out.push(PairDependence { feature_a: names[a].clone(), feature_b: names[b].clone(), report });
        }
    }
    Ok(out)
}

/// `feature_a,feature_b,pearson,spearman,hsic,hsic_p`.
pub fn write_dependence_csv<W: Write>(pairs: &[PairDependence], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature_a", "feature_b", "pearson", "spearman", "hsic", "hsic_p"])?;
    for d in pairs {
        let r = &d.report;
        w.write_record([
            d.feature_a.clone(),
            d.feature_b.clone(),
            r.pearson.to_string(),
            r.spearman.to_string(),
            r.hsic.to_string(),
            r.hsic_p.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// How perturbation methods choose replacement values for a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationStrategy {
    Equidistant,
    Quantile,
    Subsample,
    /// One random permutation of the column, as in permutation importance.
    Permutation,
}

impl PerturbationStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationStrategy::Equidistant => "equidistant",
            PerturbationStrategy::Quantile => "quantile",
            PerturbationStrategy::Subsample => "subsample",
            PerturbationStrategy::Permutation => "permutation",
        }
    }

    pub fn parse(s: &str) -> Option<PerturbationStrategy> {
        match s {
            "equidistant" => Some(PerturbationStrategy::Equidistant),
            "quantile" => Some(PerturbationStrategy::Quantile),
            "subsample" => Some(PerturbationStrategy::Subsample),
            "permutation" => Some(PerturbationStrategy::Permutation),
            _ => None,
        }
    }

    fn grid_strategy(self) -> Option<GridStrategy> {
        match self {
            PerturbationStrategy::Equidistant => Some(GridStrategy::Equidistant),
            PerturbationStrategy::Quantile => Some(GridStrategy::Quantile),
            PerturbationStrategy::Subsample => Some(GridStrategy::Subsample),
            PerturbationStrategy::Permutation => None,
        }
    }
}

/// The synthetic rows a perturbation method evaluates: every observation
/// once per grid value of feature `j` (observation-major), or once with a
/// permuted value for [`PerturbationStrategy::Permutation`].
pub fn perturbation_points(
    data: &Dataset,
    j: usize,
    strategy: PerturbationStrategy,
    size: usize,
    seed: RngSeed,
) -> Result<Array2<f64>> {
    data.check_feature(j)?;
    let x = data.features();
    match strategy.grid_strategy() {
        None => {
            let mut idx: Vec<usize> = (0..data.n()).collect();
            idx.shuffle(&mut seed.rng());
            let mut out = x.to_owned();
            for (i, &src) in idx.iter().enumerate() {
                out[[i, j]] = x[[src, j]];
            }
            Ok(out)
        }
        Some(gs) => {
            let grid = build_grid(data, j, gs, size, seed)?;
            let g = grid.len();
            let mut out = Array2::<f64>::zeros((data.n() * g, data.p()));
            for i in 0..data.n() {
                for (k, &v) in grid.values.iter().enumerate() {
                    let mut row = out.row_mut(i * g + k);
                    row.assign(&x.row(i));
                    row[j] = v;
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationReport {
    pub strategy: Option<PerturbationStrategy>,
    /// Fraction of synthetic points flagged.
    pub score: f64,
    pub threshold_distance: f64,
    pub flagged_points: Vec<Vec<f64>>,
}

struct Standardized {
    mean: Array1<f64>,
    sd: Array1<f64>,
    train: Array2<f64>,
}

impl Standardized {
    fn new(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("n > 0");
        let sd = x.std_axis(Axis(0), 1.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        let train = (&x - &mean) / &sd;
        Standardized { mean, sd, train }
    }

    /// Distance from `point` (raw units) to its nearest training row,
    /// skipping row `skip`.
    fn nearest(&self, point: ArrayView1<'_, f64>, skip: Option<usize>) -> f64 {
        let z = (&point - &self.mean) / &self.sd;
        let mut best = f64::INFINITY;
        for (i, row) in self.train.outer_iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let d: f64 = row.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d);
        }
        best.sqrt()
    }
}

/// Flags synthetic points farther from every training point than the
/// `quantile` of the training rows' leave-one-out nearest-neighbor
/// distances (features standardized by the training standard deviation).
pub fn extrapolation_score(train: &Dataset, points: ArrayView2<'_, f64>, quantile: f64) -> Result<ExtrapolationReport> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return invalid("quantile must lie strictly between 0 and 1");
    }
    if train.n() < 2 {
        return invalid("extrapolation score needs at least 2 training rows");
    }
    if points.ncols() != train.p() {
        return invalid("synthetic points and training data differ in feature count");
    }
    if points.nrows() == 0 {
        return invalid("no synthetic points to score");
    }
    let std = Standardized::new(train.features());
    let loo: Vec<f64> = (0..train.n())
        .into_par_iter()
        .map(|i| std.nearest(train.features().row(i), Some(i)))
        .collect();
    let threshold = stats::quantile(&loo, quantile);
    let flags: Vec<bool> = (0..points.nrows())
        .into_par_iter()
        .map(|i| std.nearest(points.row(i), None) > threshold)
        .collect();
    let flagged_points: Vec<Vec<f64>> =
        flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| points.row(i).to_vec()).collect();
    Ok(ExtrapolationReport {
        strategy: None,
        score: flagged_points.len() as f64 / points.nrows() as f64,
        threshold_distance: threshold,
        flagged_points,
    })
}

/// [`extrapolation_score`] of the points a perturbation strategy generates.
pub fn strategy_extrapolation(
    data: &Dataset,
    j: usize,
    strategy: PerturbationStrategy,
    size: usize,
    quantile: f64,
    seed: RngSeed,
) -> Result<ExtrapolationReport> {
    let points = perturbation_points(data, j, strategy, size, seed)?;
    let mut report = extrapolation_score(data, points.view(), quantile)?;
    report.strategy = Some(strategy);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpId;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngSeed(seed).rng();
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn correlations_of_simple_relations() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 4.0).collect();
        let lin: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((pearson(&x, &lin).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &lin).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &ex).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&x, &ex).unwrap() < 0.99);
    }

    #[test]
    fn correlation_errors() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    /// Oracle: explicit n x n centering matrix and trace.
    fn hsic_matrix_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let k = gram(x);
        let l = gram(y);
        let h = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64);
        let m = k.dot(&h).dot(&l).dot(&h);
        m.diag().sum() / (n * n) as f64
    }

    #[test]
    fn hsic_matches_matrix_formula() {
        let x = normals(40, 1);
        let y: Vec<f64> = x.iter().zip(normals(40, 2)).map(|(a, b)| a * a + 0.3 * b).collect();
        let h = hsic(&x, &y).unwrap().value;
        assert!((h - hsic_matrix_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn hsic_symmetry_shift_and_degeneracy() {
        let x = normals(60, 3);
        let y = normals(60, 4);
        let a = hsic(&x, &y).unwrap().value;
        assert!((a - hsic(&y, &x).unwrap().value).abs() < 1e-12);
        let xs: Vec<f64> = x.iter().map(|v| v + 5.0).collect();
        assert!((a - hsic(&xs, &y).unwrap().value).abs() < 1e-12);
        let c = hsic(&vec![1.0; 60], &y).unwrap();
        assert!(c.degenerate && c.value == 0.0);
        assert!(hsic(&x[..5], &y[..5]).is_err());
    }

    #[test]
    fn identical_pairing_dominates_independent_pairing() {
        let x = normals(200, 5);
        let same = hsic(&x, &x).unwrap().value;
        for s in 0..5 {
            let mut shuffled = x.clone();
            shuffled.shuffle(&mut RngSeed(s).rng());
            assert!(same > hsic(&x, &shuffled).unwrap().value);
        }
    }

    #[test]
    fn ring_is_uncorrelated_but_dependent() {
        let d = DgpId::RingDependence.sample(500, RngSeed(6)).unwrap();
        let (x, y) = (d.column(0).to_vec(), d.column(1).to_vec());
        let pearson_p = independence_test(&x, &y, TestStatistic::Pearson, 500, RngSeed(1)).unwrap();
        let hsic_p = independence_test(&x, &y, TestStatistic::Hsic, 500, RngSeed(1)).unwrap();
        assert!(pearson_p > 0.05, "{pearson_p}");
        assert!(hsic_p < 0.05, "{hsic_p}");
        let big = DgpId::RingDependence.sample(2000, RngSeed(7)).unwrap();
        assert!(pearson(&big.column(0).to_vec(), &big.column(1).to_vec()).unwrap().abs() < 0.05);
    }

    #[test]
    fn pearson_test_is_calibrated_under_independence() {
        let runs = 200;
        let rejections = (0..runs)
            .filter(|&r| {
                let x = normals(30, 1000 + r);
                let y = normals(30, 5000 + r);
                independence_test(&x, &y, TestStatistic::Pearson, 199, RngSeed(r)).unwrap() <= 0.05
            })
            .count();
        let rate = rejections as f64 / runs as f64;
        assert!((rate - 0.05).abs() <= 0.04, "{rate}");
    }

    #[test]
    fn too_few_permutations_rejected() {
        let x = normals(20, 1);
        assert!(independence_test(&x, &x, TestStatistic::Pearson, 50, RngSeed(0)).is_err());
    }

    #[test]
    fn perturbation_point_counts() {
        let x = Array2::from_shape_vec((3, 2), vec![0.0, 1.0, 1.0, 0.0, 2.0, 5.0]).unwrap();
        let d = Dataset::from_arrays(x, Array1::zeros(3)).unwrap();
        let pts = perturbation_points(&d, 0, PerturbationStrategy::Quantile, 2, RngSeed(0)).unwrap();
        assert_eq!(pts.nrows(), 6);
        let perm = perturbation_points(&d, 1, PerturbationStrategy::Permutation, 0, RngSeed(3)).unwrap();
        let mut a = perm.column(1).to_vec();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, vec![0.0, 1.0, 5.0]);
        assert_eq!(perm.column(0), d.column(0));
    }

    #[test]
    fn equidistant_grid_invents_values_on_skewed_feature() {
        let x = Array2::from_shape_vec((5, 1), vec![0.0, 0.0, 0.0, 0.0, 100.0]).unwrap();
        let d = Dataset::from_arrays(x, Array1::zeros(5)).unwrap();
        let pts = perturbation_points(&d, 0, PerturbationStrategy::Equidistant, 5, RngSeed(0)).unwrap();
        assert!(pts.column(0).iter().any(|&v| v == 50.0));
    }

    #[test]
    fn training_points_are_never_flagged() {
        let d = DgpId::CorrelatedGaussian { rho: 0.95 }.sample(200, RngSeed(1)).unwrap();
        let r = extrapolation_score(&d, d.features(), 0.95).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn equidistant_grid_extrapolates_more_under_correlation() {
        let d = DgpId::CorrelatedGaussian { rho: 0.95 }.sample(500, RngSeed(2)).unwrap();
        let eq = strategy_extrapolation(&d, 0, PerturbationStrategy::Equidistant, 20, 0.95, RngSeed(0)).unwrap();
        let qu = strategy_extrapolation(&d, 0, PerturbationStrategy::Quantile, 20, 0.95, RngSeed(0)).unwrap();
        assert!(eq.score > qu.score + 0.05, "{} vs {}", eq.score, qu.score);
        assert!(eq.score > 0.3);
    }

    #[test]
    fn subsample_under_independence_is_near_nominal() {
        let mut rng = RngSeed(8).rng();
        let x = Array2::from_shape_simple_fn((400, 2), || rng.random::<f64>());
        let d = Dataset::from_arrays(x, Array1::zeros(400)).unwrap();
        let r = strategy_extrapolation(&d, 0, PerturbationStrategy::Subsample, 20, 0.95, RngSeed(1)).unwrap();
        assert!((r.score - 0.05).abs() <= 0.05, "{}", r.score);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn correlations_are_bounded(seed in 0u64..1000, n in 3usize..40) {
            let x = normals(n, seed);
            let y = normals(n, seed + 1);
            prop_assert!(pearson(&x, &y).unwrap().abs() <= 1.0);
            prop_assert!(spearman(&x, &y).unwrap().abs() <= 1.0);
        }

        #[test]
        fn hsic_nonnegative_and_p_values_positive(seed in 0u64..1000) {
            let x = normals(15, seed);
            let y = normals(15, seed + 7);
            prop_assert!(hsic(&x, &y).unwrap().value >= 0.0);
            let p = independence_test(&x, &y, TestStatistic::Hsic, 99, RngSeed(seed)).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
        }

        #[test]
        fn extrapolation_is_monotone_in_quantile(seed in 0u64..200, q1 in 0.5f64..0.99, q2 in 0.5f64..0.99) {
            let d = DgpId::CorrelatedGaussian { rho: 0.8 }.sample(60, RngSeed(seed)).unwrap();
            let pts = perturbation_points(&d, 0, PerturbationStrategy::Equidistant, 6, RngSeed(0)).unwrap();
            let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
            let a = extrapolation_score(&d, pts.view(), lo).unwrap().score;
            let b = extrapolation_score(&d, pts.view(), hi).unwrap().score;
            prop_assert!(a >= b);
        }
    }
}
