//! Periodic DNA and the fine-tuned factors.
//!
//! With integer factors, a homopolymer sums a full set of roots of unity and
//! the encoding vanishes. Fractional factors break the cancellation.

use ropedna::rope::{encode, Factor, RopeParams};
use ropedna::seqio::DnaSequence;

fn main() -> ropedna::Result<()> {
    let all_a = DnaSequence::from_codes(&vec![0u8; 20_000]);
    for params in [RopeParams::new(1, 4), RopeParams::fine_tuned(1, 4)] {
        let factors: Vec<f64> = params.factors().iter().map(Factor::value).collect();
        let enc = encode(&all_a, &params)?;
        println!("{params:<16} factors {factors:.3?} degenerate {}", enc.is_degenerate());
    }

    // short periods that divide N cancel the same way at s = 1
    for unit in [&b"AC"[..], b"ACG", b"ACGT"] {
        let text: Vec<u8> = unit.iter().copied().cycle().take(24_000).collect();
        let seq = DnaSequence::from_ascii(&text)?;
        let d = encode(&seq, &RopeParams::new(1, 4))?.is_degenerate();
        let f = encode(&seq, &RopeParams::fine_tuned(1, 4))?.is_degenerate();
        println!("period {} repeat: default degenerate {d}, fine-tuned degenerate {f}", unit.len());
    }
    Ok(())
}
