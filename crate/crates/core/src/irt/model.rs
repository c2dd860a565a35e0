use serde::{Deserialize, Serialize};

use super::{IrtError, ResponseMatrix};

/// Prior scales and the weight of the soft sum-to-zero penalty on the model
/// and environment effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub log_a_sd: f64,
    pub b_sd: f64,
    pub sigma_theta: f64,
    pub centering_weight: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            log_a_sd: 0.5,
            b_sd: 2.0,
            sigma_theta: 1.0,
            centering_weight: 10.0,
        }
    }
}

/// Free parameters. `mu` is indexed by distinct model and `nu` by distinct
/// environment, both in first-seen respondent order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtParams {
    pub log_a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl IrtParams {
    pub fn zeros(data: &ResponseMatrix) -> Self {
        let (models, _) = data.model_index();
        let (envs, _) = data.environment_index();
        Self {
            log_a: vec![0.0; data.items.len()],
            b: vec![0.0; data.items.len()],
            theta: vec![0.0; data.respondents.len()],
            mu: vec![0.0; models.len()],
            nu: vec![0.0; envs.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.log_a.len() + self.b.len() + self.theta.len() + self.mu.len() + self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.log_a, &self.b, &self.theta, &self.mu, &self.nu]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat) using `self` as the shape.
    pub fn from_flat(&self, flat: &[f64]) -> Self {
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        Self {
            log_a: take(self.log_a.len()),
            b: take(self.b.len()),
            theta: take(self.theta.len()),
            mu: take(self.mu.len()),
            nu: take(self.nu.len()),
        }
    }

    fn check(&self, d: &Design) -> Result<(), IrtError> {
        let ok = self.log_a.len() == d.n_items
            && self.b.len() == d.n_items
            && self.theta.len() == d.model_of.len()
            && self.mu.len() == d.n_models
            && self.nu.len() == d.n_envs;
        if ok {
            Ok(())
        } else {
            Err(IrtError::Data(
                "parameter shapes do not match the response matrix".into(),
            ))
        }
    }
}

/// Response probability σ(a(θ − b)).
pub fn irt_prob(a: f64, b: f64, theta: f64) -> Result<f64, IrtError> {
    if !(a > 0.0) {
        return Err(IrtError::Domain(format!("discrimination must be positive, got {a}")));
    }
    Ok(sigmoid(a * (theta - b)))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Index structure shared by objective evaluations.
pub(crate) struct Design {
    pub n_items: usize,
    pub n_models: usize,
    pub n_envs: usize,
    pub model_of: Vec<usize>,
    pub env_of: Vec<usize>,
    /// (respondent, item, outcome) for observed cells.
    pub cells: Vec<(usize, usize, bool)>,
}

impl Design {
    pub fn new(data: &ResponseMatrix) -> Self {
        let (models, model_of) = data.model_index();
        let (envs, env_of) = data.environment_index();
        let cells = data
            .y
            .iter()
            .enumerate()
            .flat_map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(i, v)| v.map(|y| (j, i, y)))
            })
            .collect();
        Self {
            n_items: data.items.len(),
            n_models: models.len(),
            n_envs: envs.len(),
            model_of,
            env_of,
            cells,
        }
    }

    fn nll(&self, p: &IrtParams) -> f64 {
        self.cells
            .iter()
            .map(|&(j, i, y)| {
                let z = p.log_a[i].exp() * (p.theta[j] - p.b[i]);
                if y {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum()
    }

    pub fn objective(&self, p: &IrtParams, pr: &Priors) -> f64 {
        let sq = |v: &[f64], sd: f64| v.iter().map(|x| x * x).sum::<f64>() / (2.0 * sd * sd);
        let theta_prior: f64 = p
            .theta
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let r = t - p.mu[self.model_of[j]] - p.nu[self.env_of[j]];
                r * r
            })
            .sum::<f64>()
            / (2.0 * pr.sigma_theta * pr.sigma_theta);
        let mu_sum: f64 = p.mu.iter().sum();
        let nu_sum: f64 = p.nu.iter().sum();
        self.nll(p)
            + sq(&p.log_a, pr.log_a_sd)
            + sq(&p.b, pr.b_sd)
            + theta_prior
            + 0.5 * pr.centering_weight * (mu_sum * mu_sum + nu_sum * nu_sum)
    }

    pub fn gradient(&self, p: &IrtParams, pr: &Priors) -> IrtParams {
        let mut g = IrtParams {
            log_a: p.log_a.iter().map(|x| x / (pr.log_a_sd * pr.log_a_sd)).collect(),
            b: p.b.iter().map(|x| x / (pr.b_sd * pr.b_sd)).collect(),
            theta: vec![0.0; p.theta.len()],
            mu: vec![0.0; p.mu.len()],
            nu: vec![0.0; p.nu.len()],
        };
        for &(j, i, y) in &self.cells {
            let a = p.log_a[i].exp();
            let z = a * (p.theta[j] - p.b[i]);
            let r = sigmoid(z) - if y { 1.0 } else { 0.0 };
            g.theta[j] += r * a;
            g.b[i] -= r * a;
            g.log_a[i] += r * z;
        }
        let s2 = pr.sigma_theta * pr.sigma_theta;
        for j in 0..p.theta.len() {
            let (m, e) = (self.model_of[j], self.env_of[j]);
            let r = (p.theta[j] - p.mu[m] - p.nu[e]) / s2;
            g.theta[j] += r;
            g.mu[m] -= r;
            g.nu[e] -= r;
        }
        let mu_sum: f64 = p.mu.iter().sum();
        let nu_sum: f64 = p.nu.iter().sum();
        g.mu.iter_mut().for_each(|x| *x += pr.centering_weight * mu_sum);
        g.nu.iter_mut().for_each(|x| *x += pr.centering_weight * nu_sum);
        g
    }
}

/// Bernoulli log-likelihood of the observed cells.
pub fn log_likelihood(params: &IrtParams, data: &ResponseMatrix) -> Result<f64, IrtError> {
    let d = Design::new(data);
    params.check(&d)?;
    Ok(-d.nll(params))
}

/// Negative log-likelihood plus prior penalties and the centering penalty
/// (constants dropped).
pub fn neg_log_posterior(
    params: &IrtParams,
    data: &ResponseMatrix,
    priors: &Priors,
) -> Result<f64, IrtError> {
    let d = Design::new(data);
    params.check(&d)?;
    Ok(d.objective(params, priors))
}

/// Analytic gradient of [`neg_log_posterior`], in the same shape as `params`.
pub fn neg_log_posterior_grad(
    params: &IrtParams,
    data: &ResponseMatrix,
    priors: &Priors,
) -> Result<IrtParams, IrtError> {
    let d = Design::new(data);
    params.check(&d)?;
    Ok(d.gradient(params, priors))
}
