//! Deterministic checks behind the `gradcheck` and `physcheck` commands.

use rand::Rng;

use crate::autodiff::gradcheck::{weighted_sum, DEFAULT_STEP};
use crate::autodiff::{check_gradients, GradCheckReport, Tensor};
use crate::env::{Action, CartPole, FullState, PartialObservation};
use crate::error::Result;
use crate::qnets::{self, init_parameters, ArchitectureConfig, ObservationWindow, Readout, Variant};
use crate::{stream, StreamRng};

/// Outcome of one gradient-check case over several random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCase {
    pub name: String,
    pub tolerance: f64,
    pub draws: usize,
    /// Scalar entries compared across all draws.
    pub checked: usize,
    pub max_relative_error: f64,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

type Case = (&'static str, f64, fn(&mut StreamRng) -> Result<GradCheckReport>);

fn uniform(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn param(rng: &mut StreamRng, rows: usize, cols: usize) -> Tensor {
    Tensor::param(rows, cols, uniform(rng, rows * cols)).expect("positive dims")
}

/// Like [`param`] but kept at least 0.05 away from the ReLU kink.
fn param_off_zero(rng: &mut StreamRng, rows: usize, cols: usize) -> Tensor {
    let v = (0..rows * cols)
        .map(|_| {
            let x: f64 = rng.gen_range(0.05..1.0);
            if rng.gen::<bool>() {
                x
            } else {
                -x
            }
        })
        .collect();
    Tensor::param(rows, cols, v).expect("positive dims")
}

fn shape(rng: &mut StreamRng) -> (usize, usize) {
    (rng.gen_range(1..=4), rng.gen_range(1..=5))
}

/// Checks `f(inputs)` reduced with random fixed weights.
fn check(rng: &mut StreamRng, inputs: &[Tensor], f: impl Fn(&[Tensor]) -> Result<Tensor>) -> Result<GradCheckReport> {
    let probe = f(inputs)?;
    let weights = uniform(rng, probe.len());
    check_gradients(inputs, DEFAULT_STEP, || weighted_sum(&f(inputs)?, &weights))
}

fn binary(rng: &mut StreamRng, broadcast: bool, f: fn(&Tensor, &Tensor) -> Result<Tensor>) -> Result<GradCheckReport> {
    let (r, c) = shape(rng);
    let a = param(rng, r, c);
    let b = param(rng, if broadcast { 1 } else { r }, c);
    check(rng, &[a, b], |t| f(&t[0], &t[1]))
}

fn unary(rng: &mut StreamRng, f: fn(&Tensor) -> Result<Tensor>) -> Result<GradCheckReport> {
    let (r, c) = shape(rng);
    let a = param(rng, r, c);
    check(rng, &[a], |t| f(&t[0]))
}

const PRIMITIVES: &[Case] = &[
    ("add", 1e-6, |rng| binary(rng, false, Tensor::add)),
    ("add (row broadcast)", 1e-6, |rng| binary(rng, true, Tensor::add)),
    ("sub", 1e-6, |rng| binary(rng, false, Tensor::sub)),
    ("sub (row broadcast)", 1e-6, |rng| binary(rng, true, Tensor::sub)),
    ("mul", 1e-6, |rng| binary(rng, false, Tensor::mul)),
    ("mul (row broadcast)", 1e-6, |rng| binary(rng, true, Tensor::mul)),
    ("scale", 1e-6, |rng| unary(rng, |a| Ok(a.scale(-0.7)))),
    ("add_scalar", 1e-6, |rng| unary(rng, |a| Ok(a.add_scalar(0.3)))),
    ("one_minus", 1e-6, |rng| unary(rng, |a| Ok(a.one_minus()))),
    ("matmul", 1e-6, |rng| {
        let (a, b) = (param(rng, 4, 5), param(rng, 5, 3));
        check(rng, &[a, b], |t| t[0].matmul(&t[1]))
    }),
    ("transpose", 1e-6, |rng| unary(rng, |a| Ok(a.transpose()))),
    ("tanh", 1e-6, |rng| unary(rng, |a| Ok(a.tanh()))),
    ("sigmoid", 1e-6, |rng| unary(rng, |a| Ok(a.sigmoid()))),
    ("relu", 1e-6, |rng| {
        let (r, c) = shape(rng);
        let a = param_off_zero(rng, r, c);
        check(rng, &[a], |t| Ok(t[0].relu()))
    }),
    ("softmax_rows", 1e-6, |rng| {
        let a = param(rng, 3, 4);
        check(rng, &[a], |t| Ok(t[0].softmax_rows()))
    }),
    ("layer_norm", 1e-5, |rng| {
        let (x, g, b) = (param(rng, 3, 5), param(rng, 1, 5), param(rng, 1, 5));
        check(rng, &[x, g, b], |t| t[0].layer_norm(&t[1], &t[2], 1e-5))
    }),
    ("mse_loss", 1e-6, |rng| {
        let (r, c) = shape(rng);
        let pred = param(rng, r, c);
        let target = Tensor::new(r, c, uniform(rng, r * c))?;
        check_gradients(&[pred.clone()], DEFAULT_STEP, || pred.mse_loss(&target))
    }),
    ("sum", 1e-6, |rng| unary(rng, |a| Ok(a.sum()))),
    ("mean_rows", 1e-6, |rng| unary(rng, |a| Ok(a.mean_rows()))),
    ("select_rows", 1e-6, |rng| {
        let a = param(rng, 3, 4);
        check(rng, &[a], |t| t[0].select_rows(&[2, 0, 2, 1]))
    }),
    ("slice_rows", 1e-6, |rng| {
        let a = param(rng, 4, 3);
        check(rng, &[a], |t| t[0].slice_rows(1, 2))
    }),
    ("pick_columns", 1e-6, |rng| {
        let a = param(rng, 4, 2);
        check(rng, &[a], |t| t[0].pick_columns(&[1, 0, 0, 1]))
    }),
    ("concat_rows", 1e-6, |rng| {
        let (a, b) = (param(rng, 2, 3), param(rng, 1, 3));
        check(rng, &[a, b], |t| Tensor::concat_rows(&[t[0].clone(), t[1].clone(), t[0].clone()]))
    }),
    ("concat_cols", 1e-6, |rng| {
        let (a, b) = (param(rng, 3, 2), param(rng, 3, 1));
        check(rng, &[a, b], |t| Tensor::concat_cols(&[t[0].clone(), t[1].clone()]))
    }),
];

/// Window of `len` observations drawn from a range wider than the failure
/// thresholds.
pub fn random_window<R: Rng + ?Sized>(rng: &mut R, len: usize) -> ObservationWindow {
    ObservationWindow::from_observations(
        (0..len).map(|_| PartialObservation::new(rng.gen_range(-2.4..2.4), rng.gen_range(-0.3..0.3))),
    )
}

/// Gradient of every parameter of a freshly initialised network through a
/// batch of three random windows.
pub fn check_network(config: &ArchitectureConfig, rng: &mut StreamRng) -> Result<GradCheckReport> {
    let params = init_parameters(config, rng)?;
    // Perturb the zero-initialised biases and unit gains so every
    // parameter takes a generic value.
    for (_, t) in params.iter() {
        for v in t.data_mut().iter_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    let windows: Vec<ObservationWindow> = (0..3).map(|_| random_window(rng, config.window_length)).collect();
    let refs: Vec<&ObservationWindow> = windows.iter().collect();
    let weights = uniform(rng, 2 * refs.len());
    let inputs: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    check_gradients(&inputs, DEFAULT_STEP, || {
        weighted_sum(&qnets::forward_batch(config, &params, &refs)?, &weights)
    })
}

/// Networks checked end to end: every variant at width 8, window 4, plus
/// the mean-pooled DTQN without positional encoding.
pub fn network_configs() -> Vec<(&'static str, ArchitectureConfig)> {
    let mut pooled = ArchitectureConfig::tiny(Variant::Dtqn, 8);
    pooled.positional_encoding = false;
    pooled.readout = Readout::MeanPool;
    let mut two_layers = ArchitectureConfig::tiny(Variant::Dtqn, 8);
    two_layers.n_layers = 2;
    vec![
        ("dqn network", ArchitectureConfig::tiny(Variant::Dqn, 8)),
        ("drqn network", ArchitectureConfig::tiny(Variant::Drqn, 8)),
        ("dtqn network", ArchitectureConfig::tiny(Variant::Dtqn, 8)),
        ("dtqn network (2 layers)", two_layers),
        ("dtqn network (mean pool, no positions)", pooled),
    ]
}

/// Runs every primitive and network case `draws` times with inputs drawn
/// from `stream(seed)`.
pub fn gradient_suite(draws: usize, seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = stream(seed);
    let mut cases = Vec::new();
    let mut record = |name: String, tolerance: f64, reports: Vec<GradCheckReport>| {
        cases.push(GradCase {
            name,
            tolerance,
            draws: reports.len(),
            checked: reports.iter().map(|r| r.checked).sum(),
            max_relative_error: reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max),
        })
    };
    for (name, tolerance, run) in PRIMITIVES {
        let reports = (0..draws).map(|_| run(&mut rng)).collect::<Result<_>>()?;
        record(name.to_string(), *tolerance, reports);
    }
    for (name, config) in network_configs() {
        let reports = (0..draws).map(|_| check_network(&config, &mut rng)).collect::<Result<_>>()?;
        record(name.to_string(), 1e-4, reports);
    }
    Ok(cases)
}

/// Second integrator for the same dynamics, written from the equations of
/// motion in matrix form
///
/// ```text
/// [ M        m l cos θ ] [ ẍ ]   [ F + m l θ̇² sin θ ]
/// [ cos θ    4/3 l     ] [ θ̈ ] = [ g sin θ          ]
/// ```
///
/// (M = cart + pole mass, l = half length) and solved by Cramer's rule,
/// followed by the same explicit Euler update.
pub fn reference_step(env: &CartPole, s: &FullState, action: Action) -> FullState {
    let f = if action == Action::Right { env.force } else { -env.force };
    let m = env.pole_mass;
    let l = env.half_length;
    let total = env.cart_mass + m;
    let (sin, cos) = s.theta.sin_cos();

    let (a11, a12, a21, a22) = (total, m * l * cos, cos, 4.0 / 3.0 * l);
    let b1 = f + m * l * s.theta_dot * s.theta_dot * sin;
    let b2 = env.gravity * sin;
    let det = a11 * a22 - a12 * a21;
    let x_acc = (b1 * a22 - a12 * b2) / det;
    let theta_acc = (a11 * b2 - a21 * b1) / det;

    FullState::new(
        s.x + env.dt * s.x_dot,
        s.x_dot + env.dt * x_acc,
        s.theta + env.dt * s.theta_dot,
        s.theta_dot + env.dt * theta_acc,
    )
}

/// A state inside the non-failing region with velocities of a few units.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> FullState {
    FullState::new(
        rng.gen_range(-2.4..2.4),
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-0.2..0.2),
        rng.gen_range(-3.0..3.0),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsReport {
    pub pairs: usize,
    /// Largest per-field difference between `step` and [`reference_step`].
    pub max_abs_error: f64,
    /// Pairs where stepping the mirrored state is not bitwise the mirror of
    /// the stepped state.
    pub mirror_mismatches: usize,
}

impl PhysicsReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_abs_error <= tolerance && self.mirror_mismatches == 0
    }
}

pub fn physics_check(env: &CartPole, pairs: usize, seed: u64) -> Result<PhysicsReport> {
    let mut rng = stream(seed);
    let mut report = PhysicsReport {
        pairs,
        max_abs_error: 0.0,
        mirror_mismatches: 0,
    };
    for _ in 0..pairs {
        let s = random_state(&mut rng);
        let a = if rng.gen::<bool>() { Action::Right } else { Action::Left };
        let next = env.step(&s, a, 1)?.next_state;
        let reference = reference_step(env, &s, a);
        for (x, y) in next.to_array().iter().zip(reference.to_array()) {
            report.max_abs_error = report.max_abs_error.max((x - y).abs());
        }
        let mirrored = env.step(&s.mirror(), a.mirror(), 1)?.next_state;
        let bits = |st: FullState| st.to_array().map(f64::to_bits);
        if bits(mirrored) != bits(next.mirror()) {
            report.mirror_mismatches += 1;
        }
    }
    Ok(report)
}
