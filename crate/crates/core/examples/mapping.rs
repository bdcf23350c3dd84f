//! Mapping long noisy reads with a fragment index.
//!
//! Indexes a random reference with 20 kb windows every 1250 bases, plants
//! reads with 20% mixed edits on both strands and reports the best fragment
//! for each.

use ropedna::rope::RopeParams;
use ropedna::rotormap::{build_index, match_outcome, search_top1, Strand};
use ropedna::seqio::{mutate, random_dna, FastaRecord, MutationSpec};

fn main() -> ropedna::Result<()> {
    let reference = random_dna(500_000, 1);
    let params = RopeParams::fine_tuned(8, 4).with_fold(4);
    let index = build_index(&reference, "random", 20_000, 1_250, &params)?;
    let (rows, bytes) = index.footprint();
    println!("{} fragments of dim {}, {rows} rows, {:.1} MiB", index.len(), index.dim(), bytes as f64 / (1 << 20) as f64);

    let starts = [3_210, 77_777, 151_000, 300_020, 412_345, 478_000];
    let reads: Vec<FastaRecord> = starts
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let (m, _) = mutate(&reference.slice(start, 21_000).unwrap(), &MutationSpec::new(0.2, i as u64)).unwrap();
            let head = m.slice(0, 20_000).unwrap();
            let seq = if i % 2 == 1 { head.reverse_complement() } else { head };
            FastaRecord { name: format!("read{i}"), seq }
        })
        .collect();

    for ((read, res), &truth) in reads.iter().zip(search_top1(&index, &reads, true)?).zip(&starts) {
        let res = res?;
        let best = res.best().unwrap();
        let head = if best.strand == Strand::Reverse { read.seq.reverse_complement() } else { read.seq.clone() };
        let verdict = match_outcome(&reference, &head, best.offset as usize, truth)?;
        println!("{:<6} true {truth:>7}  found {:>7} ({:?}, fidelity {:.3})  {verdict:?}", read.name, best.offset, best.strand, best.fidelity);
    }
    Ok(())
}
