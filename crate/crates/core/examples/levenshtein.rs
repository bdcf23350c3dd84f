//! Exact and banded edit distance.
//!
//! The banded variant only fills cells with |i − j| ≤ band; it is exact
//! whenever the distance fits in the band and reports a lower bound otherwise.

use ropedna::lev::{levenshtein, levenshtein_banded, levenshtein_dna, levenshtein_dna_banded};
use ropedna::seqio::{mutate, random_dna, MutationSpec};

fn main() -> ropedna::Result<()> {
    println!("kitten/sitting: {}", levenshtein(b"kitten", b"sitting")?.distance);
    for band in [1, 2, 3] {
        let r = levenshtein_banded(b"kitten", b"sitting", band)?;
        println!("  band {band}: distance {} exact {}", r.distance, r.exact);
    }

    let a = random_dna(20_000, 1);
    let (b, edits) = mutate(&a, &MutationSpec::new(0.1, 2))?;
    let t = std::time::Instant::now();
    let full = levenshtein_dna(&a, &b)?;
    let t_full = t.elapsed();
    let t = std::time::Instant::now();
    let banded = levenshtein_dna_banded(&a, &b, edits + 1)?;
    println!("20 kb at rate 0.1: {edits} edits applied, LD {} ({t_full:.0?}), banded LD {} ({:.0?})", full.distance, banded.distance, t.elapsed());
    Ok(())
}
