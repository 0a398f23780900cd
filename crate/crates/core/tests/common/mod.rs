//! Shared test oracles: a scalar reverse-mode tape and random generators.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use neuroplanner::critic::{CriticParams, DenseLayer};
use neuroplanner::snn::{LayerParams, NetworkParams, SpikeArray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct Var(pub usize);

/// Wengert list with local partials recorded at construction.
#[derive(Default)]
pub struct Tape {
    vals: Vec<f64>,
    parents: Vec<Vec<(usize, f64)>>,
}

impl Tape {
    fn push(&mut self, v: f64, parents: Vec<(usize, f64)>) -> Var {
        self.vals.push(v);
        self.parents.push(parents);
        Var(self.vals.len() - 1)
    }

    pub fn var(&mut self, v: f64) -> Var {
        self.push(v, Vec::new())
    }

    pub fn val(&self, x: Var) -> f64 {
        self.vals[x.0]
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a) + self.val(b);
        self.push(v, vec![(a.0, 1.0), (b.0, 1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.val(a), self.val(b));
        self.push(x * y, vec![(a.0, y), (b.0, x)])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = c * self.val(a);
        self.push(v, vec![(a.0, c)])
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = 1.0 - self.val(a);
        self.push(v, vec![(a.0, -1.0)])
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|x| self.val(*x)).sum();
        self.push(v, xs.iter().map(|x| (x.0, 1.0)).collect())
    }

    /// `sum_k w_k * x_k + b`
    pub fn affine(&mut self, w: &[Var], x: &[Var], b: Var) -> Var {
        let mut v = self.val(b);
        let mut parents = vec![(b.0, 1.0)];
        for (wk, xk) in w.iter().zip(x) {
            let (wv, xv) = (self.val(*wk), self.val(*xk));
            v += wv * xv;
            parents.push((wk.0, xv));
            parents.push((xk.0, wv));
        }
        self.push(v, parents)
    }

    /// Heaviside step at `threshold` whose derivative is a box of height
    /// `1/width` on `|u - threshold| < width/2`.
    pub fn fire(&mut self, u: Var, threshold: f64, width: f64) -> Var {
        let x = self.val(u);
        let d = if (x - threshold).abs() < width / 2.0 { 1.0 / width } else { 0.0 };
        self.push(if x >= threshold { 1.0 } else { 0.0 }, vec![(u.0, d)])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.val(x);
        self.push(v.max(0.0), vec![(x.0, if v > 0.0 { 1.0 } else { 0.0 })])
    }

    /// Adjoint of `out` with respect to every node.
    pub fn gradient(&self, out: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.vals.len()];
        adj[out.0] = 1.0;
        for i in (0..=out.0).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            for &(p, d) in &self.parents[i] {
                adj[p] += a * d;
            }
        }
        adj
    }
}

/// Network parameters as tape leaves.
pub struct TapeNet {
    pub w: Vec<Vec<Vec<Var>>>,
    pub b: Vec<Vec<Var>>,
}

impl TapeNet {
    pub fn weight_grads(&self, adj: &[f64]) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let dw = self
            .w
            .iter()
            .map(|rows| {
                let (o, i) = (rows.len(), rows[0].len());
                Array2::from_shape_fn((o, i), |(r, c)| adj[rows[r][c].0])
            })
            .collect();
        let db = self.b.iter().map(|bs| bs.iter().map(|v| adj[v.0]).collect()).collect();
        (dw, db)
    }
}

pub fn san_leaves(tape: &mut Tape, params: &NetworkParams) -> TapeNet {
    let w = params
        .layers
        .iter()
        .map(|l| l.weights.outer_iter().map(|row| row.iter().map(|&x| tape.var(x)).collect()).collect())
        .collect();
    let b = params
        .layers
        .iter()
        .map(|l| l.biases.iter().map(|&x| tape.var(x)).collect())
        .collect();
    TapeNet { w, b }
}

/// Unrolls the two-state LIF recurrence on the tape and returns the
/// output firing rates.
pub fn san_on_tape(tape: &mut Tape, params: &NetworkParams, net: &TapeNet, input: &SpikeArray) -> Vec<Var> {
    let t_steps = input.time_steps();
    let zero = tape.var(0.0);
    let mut c: Vec<Vec<Var>> = params.layers.iter().map(|l| vec![zero; l.biases.len()]).collect();
    let mut u = c.clone();
    let mut o = c.clone();
    let mut out_sum: Vec<Vec<Var>> = vec![Vec::new(); params.output_channels()];
    for t in 0..t_steps {
        let mut below: Vec<Var> = (0..input.channels())
            .map(|ch| tape.var(if input.get(ch, t) { 1.0 } else { 0.0 }))
            .collect();
        for (n, layer) in params.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.biases.len());
            for i in 0..layer.biases.len() {
                let drive = tape.affine(&net.w[n][i], &below, net.b[n][i]);
                let leak_c = tape.scale(c[n][i], layer.decay_current);
                let ci = tape.add(leak_c, drive);
                let keep = tape.one_minus(o[n][i]);
                let uk = tape.mul(u[n][i], keep);
                let leak_u = tape.scale(uk, layer.decay_voltage);
                let ui = tape.add(leak_u, ci);
                let oi = tape.fire(ui, layer.threshold, params.surrogate_width);
                c[n][i] = ci;
                u[n][i] = ui;
                o[n][i] = oi;
                next.push(oi);
            }
            below = next;
        }
        for (k, v) in below.into_iter().enumerate() {
            out_sum[k].push(v);
        }
    }
    out_sum
        .iter()
        .map(|xs| {
            let s = tape.sum(xs);
            tape.scale(s, 1.0 / t_steps as f64)
        })
        .collect()
}

pub fn critic_leaves(tape: &mut Tape, params: &CriticParams) -> TapeNet {
    let w = params
        .layers
        .iter()
        .map(|l| l.weights.outer_iter().map(|row| row.iter().map(|&x| tape.var(x)).collect()).collect())
        .collect();
    let b = params
        .layers
        .iter()
        .map(|l| l.biases.iter().map(|&x| tape.var(x)).collect())
        .collect();
    TapeNet { w, b }
}

pub fn critic_on_tape(tape: &mut Tape, net: &TapeNet, input: &[Var]) -> Var {
    let mut x = input.to_vec();
    let last = net.w.len() - 1;
    for n in 0..=last {
        let pre: Vec<Var> = (0..net.w[n].len()).map(|i| tape.affine(&net.w[n][i], &x, net.b[n][i])).collect();
        x = if n == last { pre } else { pre.into_iter().map(|p| tape.relu(p)).collect() };
    }
    x[0]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spiking network with lively activity.
pub fn random_san<R: Rng>(rng: &mut R, sizes: &[usize]) -> NetworkParams {
    let layers = sizes
        .windows(2)
        .map(|w| {
            let weights = Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-1.2..1.2));
            let biases = Array1::from_shape_fn(w[1], |_| rng.random_range(-0.2..0.6));
            LayerParams::new(weights, biases, 0.5, 0.75, 0.5).unwrap()
        })
        .collect();
    NetworkParams::new(layers, 1.0).unwrap()
}

pub fn random_critic<R: Rng>(rng: &mut R, sizes: &[usize]) -> CriticParams {
    let layers = sizes
        .windows(2)
        .map(|w| DenseLayer {
            weights: Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-0.8..0.8)),
            biases: Array1::from_shape_fn(w[1], |_| rng.random_range(-0.3..0.3)),
        })
        .collect();
    CriticParams::new(layers).unwrap()
}

pub fn random_spikes<R: Rng>(rng: &mut R, channels: usize, t: usize, density: f64) -> SpikeArray {
    SpikeArray::from_fn(channels, t, |_, _| rng.random_bool(density))
}

/// `max|a - b| / max(max|a|, max|b|)`, zero when both are zero.
pub fn rel_err<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (x, y) in a.into_iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// One random SAN case (depth <= 3, width <= 8, T in {1,2,4,8}): largest
/// relative error between the library backward pass and the tape, and
/// whether any surrogate window was active.
pub fn san_case(seed: u64) -> (f64, bool) {
    use neuroplanner::snn::{san_backward_batch, san_forward_batch, NetworkGrads};
    let mut r = rng(seed);
    let depth = r.random_range(1..=3);
    let mut sizes = vec![r.random_range(1..=8)];
    for _ in 0..depth {
        sizes.push(r.random_range(1..=8));
    }
    let t = [1, 2, 4, 8][r.random_range(0..4)];
    let params = random_san(&mut r, &sizes);
    let batch = r.random_range(1..=3);
    let inputs: Vec<SpikeArray> = (0..batch).map(|_| random_spikes(&mut r, sizes[0], t, 0.6)).collect();
    let out = *sizes.last().unwrap();
    let seed_grad = Array2::from_shape_fn((batch, out), |_| r.random_range(-1.0..1.0));

    let trace = san_forward_batch(&inputs, &params).unwrap();
    let grads = san_backward_batch(&trace, &params, seed_grad.view(), t).unwrap();

    let mut tape = Tape::default();
    let net = san_leaves(&mut tape, &params);
    let mut terms = Vec::new();
    for (b, input) in inputs.iter().enumerate() {
        let rates = san_on_tape(&mut tape, &params, &net, input);
        for (k, a) in rates.into_iter().enumerate() {
            terms.push(tape.scale(a, seed_grad[[b, k]]));
        }
    }
    let loss = tape.sum(&terms);
    let adj = tape.gradient(loss);
    let (dw, db) = net.weight_grads(&adj);
    let mut oracle = NetworkGrads::zeros_like(&params);
    for (g, (w, b)) in oracle.layers.iter_mut().zip(dw.into_iter().zip(db)) {
        g.d_weights = w;
        g.d_biases = b;
    }
    let err = grads
        .layers
        .iter()
        .zip(&oracle.layers)
        .map(|(a, b)| rel_err(a.d_weights.iter().chain(&a.d_biases), b.d_weights.iter().chain(&b.d_biases)))
        .fold(0.0, f64::max);
    (err, oracle.max_abs() > 0.0)
}

/// Central finite differences of the critic on one random case. Returns the
/// relative errors of the parameter gradient and of `dQ/da`.
pub fn critic_fd_case(seed: u64) -> (f64, f64) {
    use neuroplanner::critic::{critic_backward, critic_forward_batch, CRITIC_INPUT};
    use neuroplanner::optim::Parameters;
    let mut r = rng(seed);
    let hidden: Vec<usize> = (0..r.random_range(1..=3)).map(|_| r.random_range(2..=12)).collect();
    let mut sizes = vec![CRITIC_INPUT];
    sizes.extend(&hidden);
    sizes.push(1);
    let params = random_critic(&mut r, &sizes);
    let x = Array2::from_shape_fn((1, CRITIC_INPUT), |_| r.random_range(0.0..1.0));
    let q = |p: &CriticParams, x: &Array2<f64>| critic_forward_batch(x.view(), p).unwrap().q_values()[0];
    let trace = critic_forward_batch(x.view(), &params).unwrap();
    let (grads, dq_da) = critic_backward(&trace, &params).unwrap();

    let h = 1e-6;
    let mut fd = Vec::new();
    let mut probe = params.clone();
    let counts: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, n) in counts.into_iter().enumerate() {
        for k in 0..n {
            let orig = probe.tensors()[ti][k];
            probe.tensors_mut()[ti][k] = orig + h;
            let up = q(&probe, &x);
            probe.tensors_mut()[ti][k] = orig - h;
            let down = q(&probe, &x);
            probe.tensors_mut()[ti][k] = orig;
            fd.push((up - down) / (2.0 * h));
        }
    }
    let analytic: Vec<f64> = grads.tensors().concat();
    let param_err = rel_err(&analytic, &fd);

    let mut fd_a = Vec::new();
    for k in 0..4 {
        let col = CRITIC_INPUT - 4 + k;
        let mut xp = x.clone();
        xp[[0, col]] += h;
        let mut xm = x.clone();
        xm[[0, col]] -= h;
        fd_a.push((q(&params, &xp) - q(&params, &xm)) / (2.0 * h));
    }
    (param_err, rel_err(&dq_da, &fd_a))
}

pub fn random_observation<R: Rng>(rng: &mut R) -> neuroplanner::codec::Observation {
    let mut depth = [0.0; 12];
    for d in depth.iter_mut() {
        *d = rng.random_range(0.5..10.0);
    }
    neuroplanner::codec::Observation {
        r: rng.random_range(0.1..15.0),
        theta: rng.random_range(0.0..std::f64::consts::PI),
        phi: rng.random_range(-3.1..3.1),
        v_xy: rng.random_range(0.05..0.5),
        v_yaw: rng.random_range(-1.8..1.8),
        v_z: rng.random_range(-0.18..0.18),
        depth,
    }
}

pub fn random_transitions<R: Rng>(rng: &mut R, n: usize) -> Vec<neuroplanner::hddpg::Transition> {
    (0..n)
        .map(|_| neuroplanner::hddpg::Transition {
            s: random_observation(rng),
            a: neuroplanner::codec::Action([0.0; 4].map(|_: f64| rng.random_range(0.0..1.0))),
            r: rng.random_range(-30.0..30.0),
            s_next: random_observation(rng),
            done: rng.random_bool(0.2),
        })
        .collect()
}

/// Point-to-rectangle distance against a dense walk of the rectangle
/// boundary (zero inside). Returns the absolute error.
pub fn footprint_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let center: [f64; 2] = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
    let half = [r.random_range(0.05..1.0), r.random_range(0.05..1.0)];
    let p = [center[0] + r.random_range(-3.0..3.0), center[1] + r.random_range(-3.0..3.0)];
    let inside = (p[0] - center[0]).abs() <= half[0] && (p[1] - center[1]).abs() <= half[1];
    let oracle = if inside {
        0.0
    } else {
        let corners = [
            [center[0] - half[0], center[1] - half[1]],
            [center[0] + half[0], center[1] - half[1]],
            [center[0] + half[0], center[1] + half[1]],
            [center[0] - half[0], center[1] + half[1]],
        ];
        let mut best = f64::INFINITY;
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            let n = 4000;
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        best
    };
    (neuroplanner::sim::point_rect_distance(p, center, half) - oracle).abs()
}

fn unit<R: Rng>(r: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Slab entry distance against marching plus bisection along the ray.
/// Returns `None` for grazing rays whose chord is too short to bracket.
pub fn ray_case(seed: u64) -> Option<f64> {
    let mut r = rng(seed);
    let c = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
    let h = [r.random_range(0.1..1.0), r.random_range(0.1..1.0), r.random_range(0.1..1.0)];
    let (min, max) = ([c[0] - h[0], c[1] - h[1], c[2] - h[2]], [c[0] + h[0], c[1] + h[1], c[2] + h[2]]);
    let inside = |q: [f64; 3]| (0..3).all(|i| q[i] >= min[i] && q[i] <= max[i]);
    let origin = loop {
        let o = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        if !inside(o) {
            break o;
        }
    };
    // aim roughly at the box half the time so hits are common
    let dir = if r.random_bool(0.5) {
        let target = [c[0] + r.random_range(-1.0..1.0), c[1] + r.random_range(-1.0..1.0), c[2] + r.random_range(-1.0..1.0)];
        let d = [target[0] - origin[0], target[1] - origin[1], target[2] - origin[2]];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / n, d[1] / n, d[2] / n]
    } else {
        unit(&mut r)
    };
    let at = |t: f64| [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
    let analytic = neuroplanner::sim::ray_box(origin, dir, min, max);
    if let Some((t0, t1)) = analytic {
        if t1 - t0 < 0.05 {
            return None;
        }
    }
    let step = 0.01;
    let mut hit = None;
    for i in 1..2000 {
        if inside(at(i as f64 * step)) {
            hit = Some(i as f64 * step);
            break;
        }
    }
    match (analytic, hit) {
        (None, None) => Some(0.0),
        (Some(_), None) | (None, Some(_)) => Some(f64::INFINITY),
        (Some((t0, _)), Some(t_in)) => {
            let (mut lo, mut hi) = (t_in - step, t_in);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(at(mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some((t0 - hi).abs())
        }
    }
}
