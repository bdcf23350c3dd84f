//! Ambiguity codes as probability rows.
//!
//! A probabilistic FASTA parse keeps every IUPAC letter as a distribution
//! over bases; the weighted encoding spreads each s-mer over its most
//! likely completions instead of picking one.

use ropedna::rope::{encode, fidelity, RopeParams};
use ropedna::seqio::{parse_fasta, IupacMode};

fn main() -> ropedna::Result<()> {
    let clean = b"ACGTTGCAACGTAGGCTTACGATCGATCGGATTACAGGCATCGATTACGTTAGC".to_vec();
    // every third T becomes Y (C or T), whose most probable base is C
    let mut ambiguous = clean.clone();
    for i in (0..clean.len()).filter(|&i| clean[i] == b'T').step_by(3) {
        ambiguous[i] = b'Y';
    }
    let text = [&b">clean\n"[..], &clean, b"\n>ambiguous\n", &ambiguous, b"\n"].concat();
    println!("{}\n{}", String::from_utf8_lossy(&clean), String::from_utf8_lossy(&ambiguous));
    println!("strict parse: {}", parse_fasta(&text, IupacMode::Strict).unwrap_err());

    let recs = parse_fasta(&text, IupacMode::Probabilistic)?;
    let y = ambiguous.iter().position(|&c| c == b'Y').unwrap();
    println!("row for Y (A, C, G, T): {:?}", recs[1].seq.probs().unwrap()[y]);

    let sampled = parse_fasta(&text, IupacMode::Randomize { seed: 1 })?;
    for params in [RopeParams::new(3, 2), RopeParams::new(3, 2).with_weights()] {
        let c = encode(&recs[0].seq, &params)?;
        let a = encode(&recs[1].seq, &params)?;
        let r = encode(&sampled[1].seq, &params)?;
        println!("{params:<14} clean vs ambiguous {:.4}, clean vs randomized {:.4}", fidelity(&c, &a)?, fidelity(&c, &r)?);
    }
    Ok(())
}
