//! Seeded samplers for the simulation settings plus their ground truth.

mod scm;

pub use scm::{sample_scm, Scm};

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{default_names, Dataset};
use crate::error::{invalid, Error, Result};
use crate::seed::RngSeed;

/// Registered data-generating processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpId {
    /// 20 iid U[0,1] features, target U[0,1] independent of them.
    Fig2Noise,
    /// X ~ U[-1,1]^3, Y = X1^2 + X2 - 5 X1 X2 + N(0, 5).
    Fig3Interaction,
    /// X ~ U[-1,1]^3, Y = 3 X1 - 6 X2 + 12 X2 1{X3 >= 0} + N(0, 0.3).
    Fig5Masked,
    /// X ~ U[0,1]^10, Y = 0 X1 + sum_{j>=2} Xj + N(0, 0.9).
    Fig6Flat,
    /// X ~ N(0,1)^p, Y = 2 X1 + 2 X2^2 + N(0, 1).
    Fig8Mcp { p: usize },
    /// Noisy unit circle: uncorrelated but dependent (X1, X2); Y = X1 + X2 + N(0, 0.25).
    RingDependence,
    /// Standard bivariate Gaussian with correlation `rho`; Y = X1 + X2 + N(0, 1).
    CorrelatedGaussian { rho: f64 },
    ChainScm,
    ColliderScm,
}

/// Ground-truth metadata of a DGP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub noise_variance: f64,
    pub relevant: Vec<bool>,
    /// Pairs of features interacting in the structural mean.
    pub interactions: Vec<(usize, usize)>,
}

impl DgpId {
    /// Parses `fig2_noise`, `fig8_mcp` (needs `p`), `correlated_gaussian`
    /// (`rho` defaults to 0.95), ...
    pub fn parse(id: &str, p: Option<usize>, rho: Option<f64>) -> Result<DgpId> {
        let dgp = match id {
            "fig2_noise" => DgpId::Fig2Noise,
            "fig3_interaction" => DgpId::Fig3Interaction,
            "fig5_masked" => DgpId::Fig5Masked,
            "fig6_flat" => DgpId::Fig6Flat,
            "fig8_mcp" => DgpId::Fig8Mcp { p: p.unwrap_or(10) },
            "ring_dependence" => DgpId::RingDependence,
            "correlated_gaussian" => DgpId::CorrelatedGaussian { rho: rho.unwrap_or(0.95) },
            "chain_scm" => DgpId::ChainScm,
            "collider_scm" => DgpId::ColliderScm,
            other => return Err(Error::UnknownDgp(other.to_string())),
        };
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DgpId::Fig2Noise => "fig2_noise",
            DgpId::Fig3Interaction => "fig3_interaction",
            DgpId::Fig5Masked => "fig5_masked",
            DgpId::Fig6Flat => "fig6_flat",
            DgpId::Fig8Mcp { .. } => "fig8_mcp",
            DgpId::RingDependence => "ring_dependence",
            DgpId::CorrelatedGaussian { .. } => "correlated_gaussian",
            DgpId::ChainScm => "chain_scm",
            DgpId::ColliderScm => "collider_scm",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DgpId::Fig8Mcp { p } if p < 2 => invalid(format!("fig8_mcp needs p >= 2, got {p}")),
            DgpId::CorrelatedGaussian { rho } if !(rho.abs() < 1.0) => {
                invalid(format!("correlation {rho} not in (-1, 1)"))
            }
            _ => Ok(()),
        }
    }

    pub fn scm(&self) -> Option<Scm> {
        match self {
            DgpId::ChainScm => Some(Scm::chain()),
            DgpId::ColliderScm => Some(Scm::collider()),
            _ => None,
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            DgpId::Fig2Noise => 20,
            DgpId::Fig3Interaction | DgpId::Fig5Masked | DgpId::ChainScm => 3,
            DgpId::Fig6Flat => 10,
            DgpId::Fig8Mcp { p } => p,
            DgpId::RingDependence | DgpId::CorrelatedGaussian { .. } => 2,
            DgpId::ColliderScm => 5,
        }
    }

    /// Noise-free structural mean of the target at a feature row.
    pub fn mean(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            DgpId::Fig2Noise => 0.5,
            DgpId::Fig3Interaction => x[0] * x[0] + x[1] - 5.0 * x[0] * x[1],
            DgpId::Fig5Masked => {
                let branch = if x[2] >= 0.0 { 12.0 * x[1] } else { 0.0 };
                3.0 * x[0] - 6.0 * x[1] + branch
            }
            DgpId::Fig6Flat => x.iter().skip(1).sum(),
            DgpId::Fig8Mcp { .. } => 2.0 * x[0] + 2.0 * x[1] * x[1],
            DgpId::RingDependence | DgpId::CorrelatedGaussian { .. } => x[0] + x[1],
            DgpId::ChainScm | DgpId::ColliderScm => {
                let scm = self.scm().expect("scm id");
                scm.target_mean(&x.to_vec())
            }
        }
    }

    pub fn truth(&self) -> Truth {
        let p = self.p();
        let mut relevant = vec![false; p];
        let mut interactions = Vec::new();
        let noise_variance = match self {
            DgpId::Fig2Noise => 1.0 / 12.0,
            DgpId::Fig3Interaction => {
                relevant[0] = true;
                relevant[1] = true;
                interactions.push((0, 1));
                5.0
            }
            DgpId::Fig5Masked => {
                relevant.iter_mut().for_each(|r| *r = true);
                interactions.push((1, 2));
                0.3
            }
            DgpId::Fig6Flat => {
                relevant.iter_mut().skip(1).for_each(|r| *r = true);
                0.9
            }
            DgpId::Fig8Mcp { .. } => {
                relevant[0] = true;
                relevant[1] = true;
                1.0
            }
            DgpId::RingDependence => {
                relevant.iter_mut().for_each(|r| *r = true);
                0.25
            }
            DgpId::CorrelatedGaussian { .. } => {
                relevant.iter_mut().for_each(|r| *r = true);
                1.0
            }
            DgpId::ChainScm | DgpId::ColliderScm => {
                let scm = self.scm().expect("scm id");
                let cols = scm.feature_variables();
                for parent in scm.target_parents() {
                    let c = cols.iter().position(|&v| v == parent).expect("parent is feature");
                    relevant[c] = true;
                }
                scm.target_noise_variance()
            }
        };
        Truth { noise_variance, relevant, interactions }
    }

    /// Draws `n` iid rows.
    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<Dataset> {
        if n == 0 {
            return invalid("sample size must be positive");
        }
        if let Some(scm) = self.scm() {
            return sample_scm(&scm, n, seed);
        }
        let p = self.p();
        let mut rng = seed.rng();
        let mut x = Array2::<f64>::zeros((n, p));
        let mut y = Array1::<f64>::zeros(n);
        let noise_sd = self.truth().noise_variance.sqrt();
        for i in 0..n {
            match *self {
                DgpId::Fig2Noise | DgpId::Fig6Flat => {
                    for j in 0..p {
                        x[[i, j]] = rng.random::<f64>();
                    }
                }
                DgpId::Fig3Interaction | DgpId::Fig5Masked => {
                    for j in 0..p {
                        x[[i, j]] = rng.random_range(-1.0..1.0);
                    }
                }
                DgpId::Fig8Mcp { .. } => {
                    for j in 0..p {
                        x[[i, j]] = StandardNormal.sample(&mut rng);
                    }
                }
                DgpId::RingDependence => {
                    let theta = rng.random_range(0.0..2.0 * PI);
                    let r = Normal::new(1.0, 0.1).expect("valid normal").sample(&mut rng);
                    x[[i, 0]] = r * theta.cos();
                    x[[i, 1]] = r * theta.sin();
                }
                DgpId::CorrelatedGaussian { rho } => {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    x[[i, 0]] = a;
                    x[[i, 1]] = rho * a + (1.0 - rho * rho).sqrt() * b;
                }
                DgpId::ChainScm | DgpId::ColliderScm => unreachable!("handled above"),
            }
            y[i] = match self {
                DgpId::Fig2Noise => rng.random::<f64>(),
                _ => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    self.mean(x.row(i)) + noise_sd * z
                }
            };
        }
        Dataset::new(x, y, default_names(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use ndarray::arr1;

    #[test]
    fn published_structural_means() {
        assert_eq!(DgpId::Fig3Interaction.mean(arr1(&[0.0, 0.0, 0.0]).view()), 0.0);
        assert_eq!(DgpId::Fig3Interaction.mean(arr1(&[1.0, 1.0, 0.3]).view()), -3.0);
        assert_eq!(DgpId::Fig5Masked.mean(arr1(&[0.0, 0.5, 1.0]).view()), 3.0);
        assert_eq!(DgpId::Fig8Mcp { p: 4 }.mean(arr1(&[1.0, 2.0, 9.0, 9.0]).view()), 10.0);
        assert_eq!(DgpId::ChainScm.mean(arr1(&[5.0, 6.0, 7.0]).view()), 7.0);
        assert_eq!(DgpId::ColliderScm.mean(arr1(&[1.0, 2.0, 3.0, 4.0, 5.0]).view()), 3.0);
    }

    #[test]
    fn relevance_flags() {
        assert_eq!(DgpId::Fig6Flat.truth().relevant.iter().filter(|r| **r).count(), 9);
        assert!(!DgpId::Fig6Flat.truth().relevant[0]);
        let t = DgpId::Fig8Mcp { p: 6 }.truth();
        assert_eq!(t.relevant, vec![true, true, false, false, false, false]);
        assert!(DgpId::Fig2Noise.truth().relevant.iter().all(|r| !r));
        assert_eq!(DgpId::ChainScm.truth().relevant, vec![false, false, true]);
        assert_eq!(DgpId::ColliderScm.truth().relevant, vec![true, true, false, false, false]);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        for id in [DgpId::Fig2Noise, DgpId::Fig5Masked, DgpId::RingDependence, DgpId::ChainScm] {
            let a = id.sample(50, RngSeed(4)).unwrap();
            assert_eq!(a, id.sample(50, RngSeed(4)).unwrap());
            assert_ne!(a, id.sample(50, RngSeed(5)).unwrap());
        }
    }

    #[test]
    fn unknown_and_invalid_ids() {
        assert!(matches!(DgpId::parse("fig9", None, None), Err(Error::UnknownDgp(_))));
        assert!(DgpId::parse("fig8_mcp", Some(1), None).is_err());
        assert_eq!(DgpId::parse("fig8_mcp", Some(50), None).unwrap().p(), 50);
    }

    #[test]
    fn fig3_features_cover_symmetric_unit_interval() {
        let d = DgpId::Fig3Interaction.sample(2000, RngSeed(1)).unwrap();
        let col = d.column(0).to_vec();
        assert!(stats::quantile(&col, 0.0) < -0.99);
        assert!(stats::quantile(&col, 1.0) > 0.99);
    }
}
