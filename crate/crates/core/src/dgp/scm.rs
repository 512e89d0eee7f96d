//! Linear Gaussian structural causal models.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::seed::RngSeed;

/// Each variable is `sum(coef * parent) + noise_sd * N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    variables: Vec<String>,
    parents: Vec<Vec<(usize, f64)>>,
    noise_sd: Vec<f64>,
    target: usize,
}

impl Scm {
    pub fn new(
        variables: Vec<String>,
        parents: Vec<Vec<(usize, f64)>>,
        noise_sd: Vec<f64>,
        target: usize,
    ) -> Result<Scm> {
        let k = variables.len();
        if k < 2 || parents.len() != k || noise_sd.len() != k {
            return invalid("SCM needs >= 2 variables and one parent list and noise sd per variable");
        }
        if target >= k {
            return invalid(format!("target index {target} out of range"));
        }
        if parents.iter().flatten().any(|&(p, _)| p >= k) {
            return invalid("SCM edge refers to an unknown variable");
        }
        if noise_sd.iter().any(|s| !(*s >= 0.0)) {
            return invalid("noise standard deviations must be nonnegative");
        }
        Ok(Scm { variables, parents, noise_sd, target })
    }

    /// Builds an SCM from named edges with unit noise.
    pub fn from_edges(variables: &[&str], edges: &[(&str, &str, f64)], target: &str) -> Result<Scm> {
        let idx = |name: &str| {
            variables
                .iter()
                .position(|v| *v == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown SCM variable '{name}'")))
        };
        let mut parents = vec![Vec::new(); variables.len()];
        for &(from, to, coef) in edges {
            parents[idx(to)?].push((idx(from)?, coef));
        }
        Scm::new(
            variables.iter().map(|s| s.to_string()).collect(),
            parents,
            vec![1.0; variables.len()],
            idx(target)?,
        )
    }

    /// X1 -> X2 -> X3 -> Y with unit coefficients and unit noise.
    pub fn chain() -> Scm {
        Scm::from_edges(
            &["X1", "X2", "X3", "Y"],
            &[("X1", "X2", 1.0), ("X2", "X3", 1.0), ("X3", "Y", 1.0)],
            "Y",
        )
        .expect("chain SCM is valid")
    }

    /// X1 -> Y, X1 -> X2, X2 -> Y, Y -> X4, Y -> X5, X3 -> X4; unit
    /// coefficients and unit noise.
    pub fn collider() -> Scm {
        Scm::from_edges(
            &["X1", "X2", "X3", "X4", "X5", "Y"],
            &[
                ("X1", "Y", 1.0),
                ("X1", "X2", 1.0),
                ("X2", "Y", 1.0),
                ("Y", "X4", 1.0),
                ("Y", "X5", 1.0),
                ("X3", "X4", 1.0),
            ],
            "Y",
        )
        .expect("collider SCM is valid")
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Variable indices in feature-column order (declaration order without the target).
    pub fn feature_variables(&self) -> Vec<usize> {
        (0..self.variables.len()).filter(|&v| v != self.target).collect()
    }

    /// Kahn's algorithm; ties resolved by declaration order.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let k = self.variables.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(k);
        let mut done = vec![false; k];
        while order.len() < k {
            let next = (0..k).find(|&v| !done[v] && indegree[v] == 0);
            let Some(v) = next else {
                let stuck = (0..k).find(|&v| !done[v]).unwrap_or(0);
                return Err(Error::CyclicGraph(self.variables[stuck].clone()));
            };
            done[v] = true;
            order.push(v);
            for (child, ps) in self.parents.iter().enumerate() {
                for &(p, _) in ps {
                    if p == v {
                        indegree[child] -= 1;
                    }
                }
            }
        }
        Ok(order)
    }

    /// The target's structural equation without noise, on a feature row.
    pub fn target_mean(&self, features: &[f64]) -> f64 {
        let cols = self.feature_variables();
        self.parents[self.target]
            .iter()
            .map(|&(p, c)| {
                let col = cols.iter().position(|&v| v == p).expect("target parent is a feature");
                c * features[col]
            })
            .sum()
    }

    /// Variance of the target's own noise term.
    pub fn target_noise_variance(&self) -> f64 {
        self.noise_sd[self.target].powi(2)
    }

    pub fn target_parents(&self) -> Vec<usize> {
        self.parents[self.target].iter().map(|&(p, _)| p).collect()
    }
}

/// Forward sampling in topological order. Features are every non-target
/// variable in declaration order.
pub fn sample_scm(scm: &Scm, n: usize, seed: RngSeed) -> Result<Dataset> {
    let order = scm.topological_order()?;
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let k = scm.variables.len();
    let mut rng = seed.rng();
    let mut values = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        for &v in &order {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut val = scm.noise_sd[v] * z;
            for &(p, c) in &scm.parents[v] {
                val += c * values[[i, p]];
            }
            values[[i, v]] = val;
        }
    }
    let cols = scm.feature_variables();
    let features = values.select(ndarray::Axis(1), &cols);
    let target: Array1<f64> = values.column(scm.target).to_owned();
    let names = cols.iter().map(|&c| scm.variables[c].clone()).collect();
    Dataset::new(features, target, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_are_rejected() {
        let scm = Scm::from_edges(&["A", "B", "Y"], &[("A", "B", 1.0), ("B", "A", 1.0), ("B", "Y", 1.0)], "Y")
            .unwrap();
        assert!(matches!(sample_scm(&scm, 10, RngSeed(1)), Err(Error::CyclicGraph(_))));
    }

    #[test]
    fn topological_order_respects_edges() {
        let scm = Scm::collider();
        let order = scm.topological_order().unwrap();
        let pos = |name: &str| {
            let v = scm.variables().iter().position(|s| s == name).unwrap();
            order.iter().position(|&o| o == v).unwrap()
        };
        assert!(pos("X1") < pos("X2"));
        assert!(pos("X2") < pos("Y"));
        assert!(pos("Y") < pos("X4"));
        assert!(pos("X3") < pos("X4"));
    }

    #[test]
    fn feature_columns_exclude_target() {
        let d = sample_scm(&Scm::collider(), 5, RngSeed(2)).unwrap();
        assert_eq!(d.feature_names(), &["X1", "X2", "X3", "X4", "X5"]);
    }
}
