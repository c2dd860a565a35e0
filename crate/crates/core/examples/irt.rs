//! Fit the two-parameter logistic model to a small simulated response
//! matrix and compare the estimates with the generating values.
//!
//! ```text
//! cargo run --release --example irt
//! ```

use epitrace::irt::{fit, irt_prob, FitConfig, Item, ItemSet, ResponseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n_items = 40;
    let a: Vec<f64> = (0..n_items).map(|_| rng.random_range(0.5..2.0)).collect();
    let b: Vec<f64> = (0..n_items).map(|_| rng.random_range(-2.0..2.0)).collect();

    let models = ["alpha", "beta", "gamma", "delta"];
    let envs = ["spectra", "md", "qa", "circuits", "genomics"];
    let mut respondents = Vec::new();
    let mut theta = Vec::new();
    for m in models {
        for e in envs {
            respondents.push((m.to_string(), e.to_string()));
            theta.push(rng.random_range(-2.0..2.0));
        }
    }
    let y = theta
        .iter()
        .map(|&t| (0..n_items).map(|i| Some(rng.random_bool(irt_prob(a[i], b[i], t).expect("a > 0")))).collect())
        .collect();
    let items = (0..n_items)
        .map(|i| Item {
            id: format!("q{i:02}"),
            set: if i % 2 == 0 { ItemSet::Knowledge } else { ItemSet::Reasoning },
        })
        .collect();
    let data = ResponseMatrix::new(respondents, items, y)?;

    for (set, f) in fit(&data, &FitConfig::default())? {
        println!(
            "{set:?}: converged={} after {} iterations, objective {:.3}",
            f.converged, f.iterations, f.final_objective
        );
        for p in f.item_params.iter().take(4) {
            let i: usize = p.item_id[1..].parse()?;
            println!("  {}  a {:.2} (true {:.2})  b {:+.2} (true {:+.2})", p.item_id, p.a, a[i], p.b, b[i]);
        }
        for (r, t) in f.respondents.iter().zip(&theta).take(4) {
            println!("  {}/{}  theta {:+.2} (true {:+.2})", r.model, r.environment, r.theta, t);
        }
    }
    Ok(())
}
