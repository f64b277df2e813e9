//! Randomized finite-difference cases shared by the gradient tests and the
//! acceptance suite. Every case is a pure function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roal_core::autodiff::{check_gradients, GradCheck, Graph, NodeId, ParamId, ParamSet, Tensor};
use roal_core::memory::MemoryConfig;
use roal_core::model::{ModelConfig, ModelKind, QNetwork};
use roal_core::Result;

pub const STEP: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;

pub struct Case {
    pub name: &'static str,
    pub run: fn(u64) -> Result<GradCheck>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Projects `out` onto fixed random weights so every output element
/// contributes to the scalar loss with a distinct coefficient.
fn project(g: &mut Graph<'_, f64>, out: NodeId, seed: u64) -> Result<NodeId> {
    let mut r = rng(seed ^ 0x5eed);
    let w = random(&mut r, &[g.value(out).len()], -1.0, 1.0);
    let flat = g.reshape(out, &[g.value(out).len()])?;
    let w = g.constant(w)?;
    let prod = g.mul(flat, w)?;
    g.sum(prod)
}

type Build = fn(&mut Graph<'_, f64>, &[NodeId]) -> Result<NodeId>;

/// Inputs drawn from `[lo, hi)` with the given shapes, all differentiated.
fn op_check(seed: u64, shapes: &[&[usize]], lo: f64, hi: f64, build: Build) -> Result<GradCheck> {
    let mut r = rng(seed);
    let mut params = ParamSet::new();
    for (i, s) in shapes.iter().enumerate() {
        params.insert(&format!("x{i}"), random(&mut r, s, lo, hi));
    }
    check_gradients(&params, STEP, |g| {
        let inputs: Vec<NodeId> = (0..shapes.len()).map(|i| g.param(ParamId(i))).collect();
        let out = build(g, &inputs)?;
        project(g, out, seed)
    })
}

pub fn op_cases() -> Vec<Case> {
    vec![
        Case { name: "matmul matrix-vector", run: |s| op_check(s, &[&[4, 3], &[3]], -1.0, 1.0, |g, x| g.matmul(x[0], x[1])) },
        Case {
            name: "matmul matrix-matrix",
            run: |s| op_check(s, &[&[2, 3], &[3, 4]], -1.0, 1.0, |g, x| g.matmul(x[0], x[1])),
        },
        Case { name: "add", run: |s| op_check(s, &[&[5], &[5]], -1.0, 1.0, |g, x| g.add(x[0], x[1])) },
        Case { name: "add broadcast", run: |s| op_check(s, &[&[5], &[1]], -1.0, 1.0, |g, x| g.add(x[0], x[1])) },
        Case { name: "sub", run: |s| op_check(s, &[&[1], &[2, 3]], -1.0, 1.0, |g, x| g.sub(x[0], x[1])) },
        Case { name: "mul", run: |s| op_check(s, &[&[3, 2], &[3, 2]], -1.0, 1.0, |g, x| g.mul(x[0], x[1])) },
        Case { name: "mul broadcast", run: |s| op_check(s, &[&[1], &[6]], -1.0, 1.0, |g, x| g.mul(x[0], x[1])) },
        Case { name: "div", run: |s| op_check(s, &[&[4], &[4]], 0.5, 2.0, |g, x| g.div(x[0], x[1])) },
        Case { name: "div broadcast", run: |s| op_check(s, &[&[4], &[1]], 0.5, 2.0, |g, x| g.div(x[0], x[1])) },
        Case { name: "concat", run: |s| op_check(s, &[&[2], &[3], &[1]], -1.0, 1.0, |g, x| g.concat(x)) },
        Case { name: "slice", run: |s| op_check(s, &[&[7]], -1.0, 1.0, |g, x| g.slice(x[0], 2, 4)) },
        Case { name: "reshape", run: |s| op_check(s, &[&[6]], -1.0, 1.0, |g, x| g.reshape(x[0], &[2, 3])) },
        Case { name: "sigmoid", run: |s| op_check(s, &[&[6]], -3.0, 3.0, |g, x| g.sigmoid(x[0])) },
        Case { name: "tanh", run: |s| op_check(s, &[&[6]], -3.0, 3.0, |g, x| g.tanh(x[0])) },
        Case { name: "softplus", run: |s| op_check(s, &[&[6]], -3.0, 3.0, |g, x| g.softplus(x[0])) },
        Case { name: "softmax", run: |s| op_check(s, &[&[5]], -2.0, 2.0, |g, x| g.softmax(x[0])) },
        Case { name: "softmax rows", run: |s| op_check(s, &[&[3, 4]], -2.0, 2.0, |g, x| g.softmax(x[0])) },
        Case { name: "pow", run: |s| op_check(s, &[&[5], &[1]], 0.2, 2.0, |g, x| g.pow(x[0], x[1])) },
        Case {
            name: "cosine similarity",
            run: |s| op_check(s, &[&[3], &[4, 3]], -1.0, 1.0, |g, x| g.cosine_similarity(x[0], x[1])),
        },
        Case { name: "scale", run: |s| op_check(s, &[&[4]], -1.0, 1.0, |g, x| g.scale(x[0], -2.5)) },
        Case { name: "sum", run: |s| op_check(s, &[&[2, 3]], -1.0, 1.0, |g, x| g.sum(x[0])) },
    ]
}

/// Small network with enlarged initial weights so every nonlinearity is
/// exercised away from its linear regime.
fn small_net(kind: ModelKind, seed: u64) -> QNetwork<f64> {
    let mut cfg = ModelConfig::new(kind, 2);
    cfg.image_len = 5;
    cfg.hidden = 6;
    cfg.init_scale = 0.5;
    cfg.memory = MemoryConfig { slots: 5, width: 4, read_heads: 1, write_heads: 1, usage_decay: 0.95 };
    let mut net = QNetwork::new(cfg, seed).unwrap();
    // Biases start at zero (or +1 for the forget gate); randomize them too.
    let mut r = rng(seed ^ 0xb1a5);
    let names: Vec<String> = net.params().names().to_vec();
    for name in names {
        if name.ends_with("bias") {
            let id = net.params().id(&name).unwrap();
            for v in net.params_mut().get_mut(id).data_mut() {
                *v += r.gen_range(-0.5..0.5);
            }
        }
    }
    net
}

/// Q-values of `steps` consecutive steps projected to a scalar.
fn network_check(kind: ModelKind, seed: u64, steps: usize) -> Result<GradCheck> {
    let net = small_net(kind, seed);
    let mut r = rng(seed ^ 0x0b5);
    let input_len = net.config().input_len();
    let observations: Vec<Vec<f32>> =
        (0..steps).map(|_| (0..input_len).map(|_| r.gen_range(0.0f32..1.0)).collect()).collect();
    check_gradients(net.params(), STEP, |g| {
        let mut state = net.reset(g)?;
        let mut qs = Vec::new();
        for obs in &observations {
            let x = net.observation(g, obs)?;
            let (q, next) = net.step(g, x, &state, true)?;
            qs.push(q);
            state = next;
        }
        let all = g.concat(&qs)?;
        project(g, all, seed)
    })
}

pub fn architecture_cases() -> Vec<Case> {
    vec![
        Case { name: "lstm step (3-step unroll)", run: |s| network_check(ModelKind::Lstm, s, 3) },
        Case { name: "ntm step (2-step unroll)", run: |s| network_check(ModelKind::Ntm, s, 2) },
        Case { name: "lrua step, write then read (3-step unroll)", run: |s| network_check(ModelKind::Lrua, s, 3) },
    ]
}
