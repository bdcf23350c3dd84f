//! Two constructions of the same encoding.
//!
//! The summed form adds a phasor per s-mer; the matrix form writes the
//! features as a one-hot vector and applies a diagonal phase per step.
//! Both give the same amplitudes.

use ropedna::rope::{encode, encode_matrix_form, RopeParams};
use ropedna::seqio::DnaSequence;

fn main() -> ropedna::Result<()> {
    let seq = DnaSequence::from_ascii(b"ACGATTGCAGGCTAACGT")?;
    for params in [RopeParams::new(1, 1), RopeParams::new(2, 2), RopeParams::new(3, 2)] {
        let a = encode(&seq, &params)?;
        let b = encode_matrix_form(&seq, &params)?;
        let gap = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        println!("{params}: dim {:>3}, max amplitude gap {gap:.1e}", a.dim());
    }
    let p = RopeParams::new(1, 1);
    println!("s=1 amplitudes (A, C, G, T): {:.3?}", encode(&seq, &p)?.amplitudes());
    Ok(())
}
