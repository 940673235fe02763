//! Compare the analytic policy gradients with central differences on a small
//! random network.
//!
//! ```text
//! cargo run --example policy_gradients
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convqa::kg::{ActionEdge, EntityRef};
use convqa::policy::{entropy, forward, grad_entropy, grad_log_pi, ActionSet, Gradients, PolicyParams, StateInput};

fn max_gap(params: &PolicyParams, analytic: &Gradients, f: impl Fn(&PolicyParams) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for which in 0..2 {
        let shape = if which == 0 { params.w1.dim() } else { params.w2.dim() };
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let (mut p, mut q) = (params.clone(), params.clone());
                let (a, b) = if which == 0 { (&mut p.w1, &mut q.w1) } else { (&mut p.w2, &mut q.w2) };
                a[(i, j)] += h;
                b[(i, j)] -= h;
                let fd = (f(&p) - f(&q)) / (2.0 * h);
                let g = if which == 0 { analytic.w1[(i, j)] } else { analytic.w2[(i, j)] };
                worst = worst.max((fd - g).abs());
            }
        }
    }
    worst
}

fn main() -> convqa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut m = |r, c| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
    let params = PolicyParams { w1: m(5, 4), w2: m(4, 5) };
    let embeddings = m(3, 4);
    let start = EntityRef::new("s", "start");
    let edges = (0..3)
        .map(|i| ActionEdge {
            start: start.clone(),
            end: EntityRef::new(format!("e{i}"), format!("end {i}")),
            path_label: format!("edge {i}"),
            source_fact: "f".into(),
            reversed: false,
        })
        .collect();
    let state = StateInput { x: m(1, 4).row(0).to_owned(), start };
    let actions = ActionSet { edges, embeddings };

    let probs = forward(&params, &state, &actions)?;
    println!("pi = {probs:.4}, H = {:.4}", entropy(&probs));
    for a in 0..3 {
        let g = grad_log_pi(&params, &state, &actions, a)?;
        let gap = max_gap(&params, &g, |p| forward(p, &state, &actions).unwrap()[a].ln());
        println!("grad log pi(a={a}): max |analytic - numeric| = {gap:.2e}");
    }
    let g = grad_entropy(&params, &state, &actions)?;
    let gap = max_gap(&params, &g, |p| entropy(&forward(p, &state, &actions).unwrap()));
    println!("grad H: max |analytic - numeric| = {gap:.2e}");
    Ok(())
}
