//! Reading a mutation rate back from a fidelity.
//!
//! Fits a monotone fidelity-to-rate curve on a grid, inverts it on fresh
//! pairs and reports the root mean squared error of the estimated rate.

use ropedna::calib::{fit_curve, predict_rate, rmse};
use ropedna::rope::{encode, fidelity, RopeParams};
use ropedna::seqio::{mutate, random_dna, MutationSpec};

fn main() -> ropedna::Result<()> {
    let (n, params) = (20_000, RopeParams::new(5, 4));
    let grid: Vec<f64> = (1..=25).map(|i| i as f64 * 0.02 - 0.01).collect();
    let curve = fit_curve(n, &params, &grid, 20, 7)?;

    let original = random_dna(n, 8);
    let (copy, edits) = mutate(&original, &MutationSpec::new(0.12, 9))?;
    let f = fidelity(&encode(&original, &params)?, &encode(&copy, &params)?)?;
    println!("one pair: {edits} edits (rate 0.12), fidelity {f:.4}, predicted rate {:.4}", predict_rate(&curve, f));

    let table = rmse(&curve, &params, &[0.03, 0.07, 0.11, 0.15, 0.19, 0.23], 30, 10)?;
    print!("{}", table.to_csv());
    println!("pooled RMSE below 0.25: {:.4}", table.pooled_below(0.25).unwrap());
    Ok(())
}
