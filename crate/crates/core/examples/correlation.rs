//! Fidelity between RoPE encodings falls steadily with edit distance.
//!
//! Draws mutated pairs of random 20 kb sequences, encodes them into 4096
//! dimensions (12 qubits) and prints fidelity next to the exact Levenshtein
//! distance.

use ropedna::calib::{scatter, uniform_rates, RopeScorer};
use ropedna::rope::RopeParams;
use ropedna::stats::spearman;

fn main() -> ropedna::Result<()> {
    let params = RopeParams::new(5, 4);
    let rates = uniform_rates(40, 0.0, 0.5, 1);
    let pairs = scatter(&RopeScorer(params), 20_000, &rates, 2, true)?;

    println!("encoding {params}: dim {} ({} qubits)", params.dim(), params.qubits());
    println!("{:>6} {:>8} {:>9}", "rate", "LD", "fidelity");
    let mut sorted = pairs.clone();
    sorted.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    for p in sorted.iter().step_by(4) {
        println!("{:>6.3} {:>8} {:>9.4}", p.rate, p.levenshtein.unwrap(), p.fidelity);
    }

    let ld: Vec<f64> = pairs.iter().map(|p| p.levenshtein.unwrap() as f64).collect();
    let fid: Vec<f64> = pairs.iter().map(|p| p.fidelity).collect();
    println!("Spearman(LD, fidelity) = {:.3}", spearman(&ld, &fid));
    Ok(())
}
