use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::Design;
use super::{IrtError, IrtParams, ItemSet, Priors, ResponseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Every line search starts from a unit step.
    Armijo,
    /// Line searches start from the Barzilai-Borwein step length.
    #[default]
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tolerance: f64,
    pub step_rule: StepRule,
    pub priors: Priors,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tolerance: 1e-6,
            step_rule: StepRule::default(),
            priors: Priors::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub item_id: String,
    pub log_a: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityParams {
    pub theta: Vec<f64>,
    pub mu: BTreeMap<String, f64>,
    pub nu: BTreeMap<String, f64>,
    pub sigma_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentAbility {
    pub model: String,
    pub environment: String,
    pub theta: f64,
    pub theta_standardized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtFit {
    pub item_set: Option<ItemSet>,
    pub item_params: Vec<ItemParams>,
    pub ability_params: AbilityParams,
    pub respondents: Vec<RespondentAbility>,
    /// `None` when every fitted θ is equal.
    pub standardized_theta: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub gradient_max_norm: f64,
    /// Objective after each accepted step, starting with the initial value.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// (θ − mean) / sd with the population standard deviation.
pub fn standardize(thetas: &[f64]) -> Result<Vec<f64>, IrtError> {
    if thetas.len() < 2 {
        return Err(IrtError::Domain("standardization needs at least two values".into()));
    }
    let n = thetas.len() as f64;
    let mean = thetas.iter().sum::<f64>() / n;
    let sd = (thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 1e-9) {
        return Err(IrtError::Domain("values have zero variance".into()));
    }
    Ok(thetas.iter().map(|t| (t - mean) / sd).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// MAP estimate by full-batch gradient descent with backtracking line
/// search, starting from all-zero parameters.
pub fn fit_map(data: &ResponseMatrix, config: &FitConfig) -> Result<IrtFit, IrtError> {
    if data.respondents.len() < 2 || data.items.len() < 2 {
        return Err(IrtError::Data(format!(
            "need at least 2 respondents and 2 items, got {} and {}",
            data.respondents.len(),
            data.items.len()
        )));
    }
    let design = Design::new(data);
    let priors = &config.priors;
    let shape = IrtParams::zeros(data);
    let eval = |x: &[f64]| design.objective(&shape.from_flat(x), priors);
    let grad = |x: &[f64]| design.gradient(&shape.from_flat(x), priors).to_flat();

    let mut x = shape.to_flat();
    let mut f = eval(&x);
    if !f.is_finite() {
        return Err(IrtError::NonFinite { iteration: 0 });
    }
    let mut g = grad(&x);
    let mut history = vec![f];
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if max_norm(&g) < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let g2 = dot(&g, &g);
        let mut alpha = match (config.step_rule, &prev) {
            (StepRule::BarzilaiBorwein, Some((s, y))) => {
                let sy = dot(s, y);
                if sy > 0.0 {
                    (dot(s, s) / sy).clamp(1e-10, 1e6)
                } else {
                    step
                }
            }
            _ => 1.0,
        };
        let (x_new, f_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
            let ft = eval(&trial);
            if ft.is_finite() && ft <= f - 1e-4 * alpha * g2 {
                break (trial, ft);
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                if !ft.is_finite() {
                    return Err(IrtError::NonFinite { iteration: iterations });
                }
                // no descent possible at machine precision
                break (x.clone(), f);
            }
        };
        if f_new == f && x_new == x {
            break;
        }
        let g_new = grad(&x_new);
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(IrtError::NonFinite { iteration: iterations });
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((s, y));
        step = alpha;
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);
    }
    if !converged && max_norm(&g) < config.tolerance {
        converged = true;
    }

    let p = shape.from_flat(&x);
    let (models, _) = data.model_index();
    let (envs, _) = data.environment_index();
    let standardized = standardize(&p.theta).ok();
    Ok(IrtFit {
        item_set: None,
        item_params: data
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| ItemParams {
                item_id: item.id.clone(),
                log_a: p.log_a[i],
                a: p.log_a[i].exp(),
                b: p.b[i],
            })
            .collect(),
        respondents: data
            .respondents
            .iter()
            .enumerate()
            .map(|(j, (m, e))| RespondentAbility {
                model: m.clone(),
                environment: e.clone(),
                theta: p.theta[j],
                theta_standardized: standardized.as_ref().map(|s| s[j]),
            })
            .collect(),
        ability_params: AbilityParams {
            theta: p.theta.clone(),
            mu: models.into_iter().zip(p.mu.iter().copied()).collect(),
            nu: envs.into_iter().zip(p.nu.iter().copied()).collect(),
            sigma_theta: priors.sigma_theta,
        },
        standardized_theta: standardized,
        converged,
        iterations,
        final_objective: f,
        gradient_max_norm: max_norm(&g),
        objective_history: history,
    })
}

/// Independent fits per item set. The sets are fitted concurrently.
pub fn fit(data: &ResponseMatrix, config: &FitConfig) -> Result<BTreeMap<ItemSet, IrtFit>, IrtError> {
    let sets: Vec<ItemSet> = data.item_sets().into_iter().collect();
    let results: Vec<(ItemSet, Result<IrtFit, IrtError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = sets
            .iter()
            .map(|&set| {
                scope.spawn(move || {
                    let sub = data.subset(set);
                    let fit = fit_map(&sub, config).map(|mut f| {
                        f.item_set = Some(set);
                        f
                    });
                    (set, fit)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fit thread panicked"))
            .collect()
    });
    results
        .into_iter()
        .map(|(set, r)| r.map(|f| (set, f)))
        .collect()
}
