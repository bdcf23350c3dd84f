//! From a coarse hit to the exact offset.
//!
//! The index only knows every 1250th offset. Sliding the window one base
//! at a time updates the inner product with the read from the two s-mers
//! that leave and enter, so scanning ±600 costs a few multiplications per step.

use ropedna::rope::{encode, fidelity, RopeParams};
use ropedna::rotormap::{init_slide, refine, slide_update};
use ropedna::seqio::{mutate, random_dna, MutationSpec};

fn main() -> ropedna::Result<()> {
    let n = 20_000;
    let reference = random_dna(100_000, 4);
    let truth = 41_337;
    let spec = MutationSpec { mix: (0.0, 0.0, 1.0), ..MutationSpec::new(0.05, 5) };
    let (read, _) = mutate(&reference.slice(truth, n)?, &spec)?;
    let params = RopeParams::new(7, 4);
    let query = encode(&read, &params)?;

    let mut state = init_slide(&reference, truth - 5, &query)?;
    for step in 0..10 {
        let direct = fidelity(&query, &encode(&reference.slice(state.start(), n)?, &params)?)?;
        println!("offset {:>6}: sliding {:.6}, recomputed {direct:.6}", state.start(), state.fidelity()?);
        if step < 9 {
            slide_update(&mut state, &reference)?;
        }
    }

    let coarse = 41_250;
    let r = refine(&reference, &query, coarse, 600, 1)?;
    println!("coarse {coarse}, refined {} (true {truth}), fidelity {:.4}", r.offset, r.fidelity);
    Ok(())
}
