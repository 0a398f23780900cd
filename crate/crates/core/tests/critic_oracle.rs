mod common;

use common::*;
use ndarray::Array2;
use neuroplanner::critic::{critic_backward_batch, critic_forward_batch, CRITIC_INPUT};
use rand::Rng;

#[test]
fn finite_differences_agree() {
    for seed in 0..30 {
        let (p, a) = critic_fd_case(seed);
        assert!(p < 1e-5, "seed {seed}: parameter gradient error {p:e}");
        assert!(a < 1e-5, "seed {seed}: action gradient error {a:e}");
    }
}

#[test]
fn reverse_pass_matches_tape() {
    let mut r = rng(5);
    let params = random_critic(&mut r, &[CRITIC_INPUT, 7, 5, 1]);
    let x = Array2::from_shape_fn((3, CRITIC_INPUT), |_| r.random_range(0.0..1.0));
    let seed = [0.3, -1.2, 2.0];
    let trace = critic_forward_batch(x.view(), &params).unwrap();
    let (grads, d_in) = critic_backward_batch(&trace, &params, &seed).unwrap();

    let mut tape = Tape::default();
    let net = critic_leaves(&mut tape, &params);
    let mut inputs = Vec::new();
    let mut terms = Vec::new();
    for (b, row) in x.outer_iter().enumerate() {
        let xs: Vec<_> = row.iter().map(|&v| tape.var(v)).collect();
        let q = critic_on_tape(&mut tape, &net, &xs);
        terms.push(tape.scale(q, seed[b]));
        inputs.push(xs);
    }
    let total = tape.sum(&terms);
    let adj = tape.gradient(total);
    let (dw, db) = net.weight_grads(&adj);
    for (g, (w, b)) in grads.layers.iter().zip(dw.iter().zip(&db)) {
        assert!(rel_err(&g.d_weights, w) < 1e-13);
        assert!(rel_err(&g.d_biases, b) < 1e-13);
    }
    for (b, xs) in inputs.iter().enumerate() {
        let want: Vec<f64> = xs.iter().map(|v| adj[v.0]).collect();
        assert!(rel_err(d_in.row(b).iter(), &want) < 1e-13);
    }
}
