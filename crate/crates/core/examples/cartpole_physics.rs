//! Steps the cart-pole by hand, compares it with the second integrator and
//! measures how long a coin-flipping policy keeps the pole up.
//!
//! ```bash
//! cargo run --release --example cartpole_physics -- [episodes]
//! ```

use polecart::env::{observe_partial, Action, CartPole, FullState};
use polecart::rl::random_policy_scores;
use polecart::stream;
use polecart::verify::{physics_check, reference_step};

fn main() -> polecart::Result<()> {
    let episodes: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let env = CartPole::default();

    let mut state = FullState::ZERO;
    println!("pushing right from rest:");
    for step in 1..=5 {
        let out = env.step(&state, Action::Right, step)?;
        let reference = reference_step(&env, &state, Action::Right);
        let s = out.next_state;
        println!(
            "  step {step}: x {:+.5} x_dot {:+.5} theta {:+.5} theta_dot {:+.5}  (reference differs by {:.1e})",
            s.x,
            s.x_dot,
            s.theta,
            s.theta_dot,
            s.to_array()
                .iter()
                .zip(reference.to_array())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        );
        state = s;
    }
    let seen = observe_partial(&state);
    println!("the agent only sees x = {:+.5}, theta = {:+.5}", seen.x, seen.theta);

    let report = physics_check(&env, 1000, 0)?;
    println!(
        "1000 random states: max difference {:.1e}, {} mirror mismatches",
        report.max_abs_error, report.mirror_mismatches
    );

    let scores = random_policy_scores(&env, episodes, &mut stream(1))?;
    let mean = scores.iter().sum::<usize>() as f64 / episodes as f64;
    let best = scores.iter().max().copied().unwrap_or(0);
    println!("random policy over {episodes} episodes: mean score {mean:.2}, best {best}");
    Ok(())
}
