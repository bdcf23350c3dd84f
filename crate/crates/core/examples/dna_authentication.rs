//! Proving possession of a DNA sample with a few dozen shots.
//!
//! The verifier holds a reference; the prover sends encoded states of their
//! sample. An honest sample differs by rate a/N, an impostor by b/N. The
//! verifier accepts when the zero-outcome frequency sits closer to f_a.

use ropedna::auth::{decide, qubit_cost, required_shots, simulate_protocol, AuthConfig, Encoder};
use ropedna::rope::RopeParams;

fn main() -> ropedna::Result<()> {
    println!("shots for eps 0.01 and gap 0.35: {}", required_shots(0.01, 0.35)?);
    println!("qubits sent at 12 qubits per shot: {}", qubit_cost(12, required_shots(0.01, 0.35)?));

    let config = AuthConfig::calibrated(20_000, 0.1, 0.3, 0.01, RopeParams::new(5, 4), Encoder::Ideal, None, 60, 1)?;
    println!("calibrated f_a {:.3}, f_b {:.3}: {} shots", config.f_a, config.f_b, config.shots);
    let k = config.shots;
    for zeros in [k * 2 / 5, k / 4, k / 8] {
        println!("{zeros} zeros of {k}: {:?}", decide(zeros, k, config.f_a, config.f_b));
    }

    let report = simulate_protocol(&config, 200, 2)?;
    println!(
        "{} rounds: false reject {:.3}, false accept {:.3}, {} qubits per round",
        report.trials, report.false_reject_rate, report.false_accept_rate, report.qubit_cost
    );

    // hardware noise scales both fidelities; the budget grows with the shrinking gap
    let noisy = AuthConfig::calibrated(20_000, 0.1, 0.3, 0.01, RopeParams::new(5, 4), Encoder::Ideal, Some(0.56), 60, 1)?;
    println!("with noise factor 0.56: gap {:.3}, {} shots", noisy.f_a - noisy.f_b, noisy.shots);
    Ok(())
}
