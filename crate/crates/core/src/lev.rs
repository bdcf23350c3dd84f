//! Levenshtein distance, the ground truth the encodings are scored against.
//!
//! Unit costs, no traceback. Functions take byte slices so they work on
//! unpacked 2-bit codes as well as on arbitrary text; [`levenshtein_dna`]
//! collapses probabilistic sequences to their most probable bases first.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqio::DnaSequence;

/// Largest `|a|·|b|` the full DP accepts.
pub const FULL_DP_GUARD: u128 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EditDistanceResult {
    pub distance: usize,
    /// `false` when the band was exhausted; `distance` is then a lower bound.
    pub exact: bool,
    pub band: Option<usize>,
}

/// Exact distance with two rolling rows.
pub fn levenshtein(a: &[u8], b: &[u8]) -> Result<EditDistanceResult> {
    let cells = a.len() as u128 * b.len() as u128;
    if cells > FULL_DP_GUARD {
        return Err(Error::SizeGuard { cells });
    }
    // the shorter string indexes the row
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<u32> = (0..=short.len() as u32).collect();
    let mut cur = vec![0u32; short.len() + 1];
    for (j, &lc) in long.iter().enumerate() {
        cur[0] = j as u32 + 1;
        for i in 1..=short.len() {
            let sub = prev[i - 1] + u32::from(short[i - 1] != lc);
            cur[i] = sub.min(prev[i] + 1).min(cur[i - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(EditDistanceResult { distance: prev[short.len()] as usize, exact: true, band: None })
}

const INF: u32 = u32::MAX / 2;

/// Distance restricted to the diagonal band `|i - j| <= band`.
///
/// Exact whenever the true distance is at most `band`; otherwise reports
/// `band` with `exact = false`.
pub fn levenshtein_banded(a: &[u8], b: &[u8], band: usize) -> Result<EditDistanceResult> {
    let diff = a.len().abs_diff(b.len());
    if band < diff {
        return Err(Error::BandTooNarrow { band, diff });
    }
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![INF; m + 1];
    let mut cur = vec![INF; m + 1];
    for (j, v) in prev.iter_mut().enumerate().take(band.min(m) + 1) {
        *v = j as u32;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        if lo > 0 {
            cur[lo - 1] = INF;
        } else {
            cur[0] = i as u32;
        }
        let ac = a[i - 1];
        for j in lo.max(1)..=hi {
            let sub = prev[j - 1] + u32::from(ac != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m] as usize;
    if d <= band {
        Ok(EditDistanceResult { distance: d, exact: true, band: Some(band) })
    } else {
        Ok(EditDistanceResult { distance: band, exact: false, band: Some(band) })
    }
}

/// Exact distance between the concrete (most probable) bases of two sequences.
pub fn levenshtein_dna(a: &DnaSequence, b: &DnaSequence) -> Result<EditDistanceResult> {
    levenshtein(&a.to_codes(), &b.to_codes())
}

pub fn levenshtein_dna_banded(a: &DnaSequence, b: &DnaSequence, band: usize) -> Result<EditDistanceResult> {
    levenshtein_banded(&a.to_codes(), &b.to_codes(), band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full (n+1)×(m+1) table, the textbook recurrence.
    fn table_oracle(a: &[u8], b: &[u8]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in t[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = usize::from(a[i - 1] != b[j - 1]);
                t[i][j] = (t[i - 1][j - 1] + c).min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn basic_examples() {
        assert_eq!(levenshtein(b"", b"ACGT").unwrap().distance, 4);
        assert_eq!(levenshtein(b"ACGT", b"ACGT").unwrap().distance, 0);
        assert_eq!(table_oracle(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"kitten", b"sitting").unwrap().distance, 3);
        assert_eq!(levenshtein(b"sitting", b"kitten").unwrap().distance, 3);
    }

    #[test]
    fn guard_rejects_huge_inputs() {
        let a = vec![0u8; 40_000];
        let b = vec![0u8; 30_000];
        assert!(matches!(levenshtein(&a, &b), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn banded_examples() {
        let r = levenshtein_banded(b"ACGT", b"ACGT", 1).unwrap();
        assert_eq!((r.distance, r.exact), (0, true));
        let r = levenshtein_banded(b"AAAA", b"TTTT", 2).unwrap();
        assert!(!r.exact);
        assert!(r.distance >= 2);
        assert!(matches!(levenshtein_banded(b"A", b"AAAA", 2), Err(Error::BandTooNarrow { band: 2, diff: 3 })));
        assert_eq!(levenshtein_banded(b"", b"", 0).unwrap().distance, 0);
        assert_eq!(levenshtein_banded(b"", b"ACG", 3).unwrap().distance, 3);
    }

    proptest! {
        #[test]
        fn rolling_rows_match_table(a in proptest::collection::vec(0u8..4, 0..40),
                                    b in proptest::collection::vec(0u8..4, 0..40)) {
            prop_assert_eq!(levenshtein(&a, &b).unwrap().distance, table_oracle(&a, &b));
        }

        #[test]
        fn metric_axioms(a in proptest::collection::vec(0u8..4, 0..200),
                         b in proptest::collection::vec(0u8..4, 0..200),
                         c in proptest::collection::vec(0u8..4, 0..200)) {
            let d = |x: &[u8], y: &[u8]| levenshtein(x, y).unwrap().distance;
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
            if a != b { prop_assert!(d(&a, &b) > 0); }
        }

        #[test]
        fn band_is_exact_when_it_says_so(a in proptest::collection::vec(0u8..4, 0..300),
                                         b in proptest::collection::vec(0u8..4, 0..300),
                                         extra in 0usize..60) {
            let band = a.len().abs_diff(b.len()) + extra;
            let full = levenshtein(&a, &b).unwrap().distance;
            let r = levenshtein_banded(&a, &b, band).unwrap();
            if r.exact {
                prop_assert_eq!(r.distance, full);
            } else {
                prop_assert!(full > band);
                prop_assert_eq!(r.distance, band);
            }
            prop_assert_eq!(r.exact, full <= band);
        }
    }
}
