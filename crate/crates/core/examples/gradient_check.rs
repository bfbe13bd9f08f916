//! Builds a small expression by hand, backpropagates through it, then runs
//! the finite-difference check over every primitive and network.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use polecart::autodiff::gradcheck::DEFAULT_STEP;
use polecart::autodiff::{check_gradients, Tensor};
use polecart::verify::gradient_suite;

fn main() -> polecart::Result<()> {
    // loss = mean((tanh(x W) - y)^2)
    let x = Tensor::new(2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.2, -0.3])?;
    let w = Tensor::param(3, 2, vec![0.3, -0.2, 0.1, 0.4, -0.5, 0.6])?;
    let y = Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0])?;
    let loss = || x.matmul(&w)?.tanh().mse_loss(&y);

    let l = loss()?;
    l.backward()?;
    println!("loss {:.6}", l.item());
    println!("dloss/dW {:?}", w.grad().expect("w is a parameter"));

    let report = check_gradients(std::slice::from_ref(&w), DEFAULT_STEP, loss)?;
    println!(
        "finite differences agree to {:.1e} over {} entries\n",
        report.max_relative_error, report.checked
    );

    let cases = gradient_suite(20, 0)?;
    for c in &cases {
        println!(
            "{:<40} {:.1e} {}",
            c.name,
            c.max_relative_error,
            if c.passed() { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
