//! Fidelity against mutation rate: fitting, inversion, error and thresholds.
//!
//! A [`CorrelationCurve`] holds the Monte-Carlo mean fidelity at each rate
//! of a grid, made strictly decreasing by isotonic regression. Reading the
//! curve backwards turns an observed fidelity into a predicted rate.

use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lev::levenshtein_dna_banded;
use crate::rng;
use crate::rope::{encode, fidelity, RopeEncoder, RopeParams};
use crate::rotormap::FragmentIndex;
use crate::seqio::{mutate, random_dna_with, DnaSequence, MutationSpec};
use crate::stats;

/// Similarity between a sequence and its mutant.
pub trait PairScorer: Sync {
    fn score(&self, a: &DnaSequence, b: &DnaSequence) -> Result<f64>;
    fn describe(&self) -> String;
}

/// Fidelity between RoPE encodings.
#[derive(Clone, Copy, Debug)]
pub struct RopeScorer(pub RopeParams);

impl PairScorer for RopeScorer {
    fn score(&self, a: &DnaSequence, b: &DnaSequence) -> Result<f64> {
        fidelity(&encode(a, &self.0)?, &encode(b, &self.0)?)
    }

    fn describe(&self) -> String {
        format!("rope {}", self.0)
    }
}

/// Redraws allowed per sample when a pair scores as degenerate.
const MAX_REDRAWS: usize = 16;

/// One random pair: a fresh sequence and its mutant at `rate`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairSample {
    pub rate: f64,
    pub edits: usize,
    pub fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levenshtein: Option<usize>,
}

fn sample_pair(scorer: &dyn PairScorer, n: usize, rate: f64, rng: &mut rng::Rng, with_lev: bool) -> Result<(PairSample, usize)> {
    for redraw in 0..MAX_REDRAWS {
        let x = random_dna_with(n, rng);
        let (y, edits) = mutate(&x, &MutationSpec::new(rate, rng.next_u64()))?;
        match scorer.score(&x, &y) {
            Ok(fid) => {
                let levenshtein = if with_lev {
                    // every applied edit moves the distance by at most one
                    Some(levenshtein_dna_banded(&x, &y, edits.max(x.len().abs_diff(y.len())) + 1)?.distance)
                } else {
                    None
                };
                return Ok((PairSample { rate, edits, fidelity: fid, levenshtein }, redraw));
            }
            Err(Error::Degenerate) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate)
}

/// Scores one pair per entry of `rates`; pair `i` uses its own RNG stream.
pub fn scatter(scorer: &dyn PairScorer, n: usize, rates: &[f64], seed: u64, with_lev: bool) -> Result<Vec<PairSample>> {
    rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| sample_pair(scorer, n, rate, &mut rng::stream(seed, i as u64), with_lev).map(|s| s.0))
        .collect()
}

/// `count` rates drawn uniformly from `[lo, hi)`.
pub fn uniform_rates(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut r = rng::seeded(seed);
    (0..count).map(|_| r.random_range(lo..hi)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub rate: f64,
    /// Isotonic fidelity.
    pub fidelity: f64,
    /// Unconstrained Monte-Carlo mean.
    pub raw_mean: f64,
    pub stddev: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub n: usize,
    pub scorer: String,
    pub samples_per_knot: usize,
    pub seed: u64,
    /// Samples redrawn because an encoding was degenerate.
    pub redrawn: usize,
}

/// Knots sorted by rate with strictly decreasing fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub knots: Vec<Knot>,
    pub meta: CurveMeta,
}

/// Pool-adjacent-violators for a strictly decreasing fit. Pooled blocks
/// collapse into one knot at their sample-weighted rate and fidelity.
pub fn isotonic_decreasing(knots: &[Knot]) -> Vec<Knot> {
    let mut blocks: Vec<Knot> = Vec::with_capacity(knots.len());
    for k in knots {
        let mut cur = Knot { fidelity: k.raw_mean, ..*k };
        while let Some(prev) = blocks.last() {
            if cur.fidelity < prev.fidelity {
                break;
            }
            let prev = blocks.pop().expect("non-empty");
            let (wa, wb) = (prev.samples.max(1) as f64, cur.samples.max(1) as f64);
            let w = wa + wb;
            cur = Knot {
                rate: (prev.rate * wa + cur.rate * wb) / w,
                fidelity: (prev.fidelity * wa + cur.fidelity * wb) / w,
                raw_mean: (prev.raw_mean * wa + cur.raw_mean * wb) / w,
                stddev: ((prev.stddev.powi(2) * wa + cur.stddev.powi(2) * wb) / w).sqrt(),
                samples: prev.samples + cur.samples,
            };
        }
        blocks.push(cur);
    }
    blocks
}

fn check_grid(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::invalid("empty rate grid"));
    }
    if rates.iter().any(|&r| !(r > 0.0 && r < 0.5)) {
        return Err(Error::invalid("rates must lie in (0, 0.5)"));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("rate grid must be strictly increasing"));
    }
    Ok(())
}

/// Fits the curve for RoPE fidelity on random sequences of length `n`.
pub fn fit_curve(n: usize, params: &RopeParams, rate_grid: &[f64], samples_per_knot: usize, seed: u64) -> Result<CorrelationCurve> {
    params.validate()?;
    fit_curve_with(&RopeScorer(*params), n, rate_grid, samples_per_knot, seed)
}

pub fn fit_curve_with(scorer: &dyn PairScorer, n: usize, rate_grid: &[f64], samples_per_knot: usize, seed: u64) -> Result<CorrelationCurve> {
    check_grid(rate_grid)?;
    if samples_per_knot < 20 {
        return Err(Error::invalid("at least 20 samples per knot"));
    }
    let jobs: Vec<(usize, usize)> = (0..rate_grid.len()).flat_map(|k| (0..samples_per_knot).map(move |j| (k, j))).collect();
    let draws: Vec<(f64, usize)> = jobs
        .par_iter()
        .map(|&(k, j)| {
            let mut r = rng::stream(rng::child_seed(seed, k as u64), j as u64);
            sample_pair(scorer, n, rate_grid[k], &mut r, false).map(|(s, redrawn)| (s.fidelity, redrawn))
        })
        .collect::<Result<_>>()?;
    let raw: Vec<Knot> = rate_grid
        .iter()
        .enumerate()
        .map(|(k, &rate)| {
            let fids: Vec<f64> = draws[k * samples_per_knot..(k + 1) * samples_per_knot].iter().map(|d| d.0).collect();
            Knot { rate, fidelity: 0.0, raw_mean: stats::mean(&fids), stddev: stats::stddev(&fids), samples: fids.len() }
        })
        .collect();
    Ok(CorrelationCurve {
        knots: isotonic_decreasing(&raw),
        meta: CurveMeta {
            n,
            scorer: scorer.describe(),
            samples_per_knot,
            seed,
            redrawn: draws.iter().map(|d| d.1).sum(),
        },
    })
}

impl CorrelationCurve {
    pub fn rate_span(&self) -> (f64, f64) {
        (self.knots[0].rate, self.knots[self.knots.len() - 1].rate)
    }

    /// Mean fidelity expected at `rate`, interpolated and clamped.
    pub fn fidelity_at(&self, rate: f64) -> f64 {
        let k = &self.knots;
        if rate <= k[0].rate {
            return k[0].fidelity;
        }
        for w in k.windows(2) {
            if rate <= w[1].rate {
                let t = (rate - w[0].rate) / (w[1].rate - w[0].rate);
                return w[0].fidelity + t * (w[1].fidelity - w[0].fidelity);
            }
        }
        k[k.len() - 1].fidelity
    }

    /// `rate,fidelity` rows with the unconstrained mean and spread.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mutation_rate[edits/base],fidelity[1],raw_mean_fidelity[1],stddev_fidelity[1],samples[count]\n");
        for k in &self.knots {
            let _ = writeln!(out, "{},{},{},{},{}", k.rate, k.fidelity, k.raw_mean, k.stddev, k.samples);
        }
        out
    }
}

/// Inverse interpolation of `fid` on the curve, clamped to the grid ends.
pub fn predict_rate(curve: &CorrelationCurve, fid: f64) -> f64 {
    let k = &curve.knots;
    if fid >= k[0].fidelity {
        return k[0].rate;
    }
    for w in k.windows(2) {
        if fid >= w[1].fidelity {
            let t = (w[0].fidelity - fid) / (w[0].fidelity - w[1].fidelity);
            return w[0].rate + t * (w[1].rate - w[0].rate);
        }
    }
    k[k.len() - 1].rate
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub rate: f64,
    pub rmse: f64,
    pub mean_fidelity: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    /// Pooled RMSE over all rows with rate below `max_rate`.
    pub fn pooled_below(&self, max_rate: f64) -> Option<f64> {
        let rows: Vec<&RmseRow> = self.rows.iter().filter(|r| r.rate < max_rate).collect();
        let n: usize = rows.iter().map(|r| r.samples).sum();
        (n > 0).then(|| (rows.iter().map(|r| r.rmse.powi(2) * r.samples as f64).sum::<f64>() / n as f64).sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mutation_rate[edits/base],rmse[edits/base],mean_fidelity[1],samples[count]\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.rate, r.rmse, r.mean_fidelity, r.samples);
        }
        out
    }
}

/// Per-rate RMSE of [`predict_rate`] on fresh pairs scored like the curve.
pub fn rmse(curve: &CorrelationCurve, params: &RopeParams, eval_rates: &[f64], samples: usize, seed: u64) -> Result<RmseTable> {
    rmse_with(curve, &RopeScorer(*params), eval_rates, samples, seed)
}

pub fn rmse_with(curve: &CorrelationCurve, scorer: &dyn PairScorer, eval_rates: &[f64], samples: usize, seed: u64) -> Result<RmseTable> {
    let (lo, hi) = curve.rate_span();
    if eval_rates.iter().any(|&r| r < lo - 1e-12 || r > hi + 1e-12) {
        return Err(Error::invalid(format!("evaluation rates must lie within [{lo}, {hi}]")));
    }
    if samples == 0 {
        return Err(Error::invalid("at least one sample per rate"));
    }
    let rows = eval_rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let fids: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|j| {
                    let mut r = rng::stream(rng::child_seed(seed, i as u64), j as u64);
                    sample_pair(scorer, curve.meta.n, rate, &mut r, false).map(|s| s.0.fidelity)
                })
                .collect::<Result<_>>()?;
            let mse = fids.iter().map(|&f| (predict_rate(curve, f) - rate).powi(2)).sum::<f64>() / samples as f64;
            Ok(RmseRow { rate, rmse: mse.sqrt(), mean_fidelity: stats::mean(&fids), samples })
        })
        .collect::<Result<_>>()?;
    Ok(RmseTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub target_rate: f64,
    pub z: f64,
    /// `mean − z·σ` per fragment; `f32::INFINITY` for degenerate fragments.
    pub thresholds: Vec<f32>,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    /// Fragments whose own encoding is degenerate.
    pub flagged: Vec<usize>,
}

/// Per-fragment fidelity thresholds for reads mutated at `target_rate`.
///
/// Each sample starts `step/2` bases into the fragment, continues along the
/// reference, is mutated, and is cut to the window length (random bases pad a
/// short tail). Its encoding is compared with the stored index row.
pub fn estimate_thresholds(
    index: &FragmentIndex,
    reference: &DnaSequence,
    target_rate: f64,
    samples_per_fragment: usize,
    z: f64,
    seed: u64,
) -> Result<ThresholdReport> {
    if !(target_rate > 0.0 && target_rate < 0.5) {
        return Err(Error::invalid("target rate must lie in (0, 0.5)"));
    }
    if samples_per_fragment < 2 {
        return Err(Error::invalid("at least two samples per fragment"));
    }
    let n = index.window();
    let shift = index.step() / 2;
    let pad = shift + n / 10;
    let encoder = RopeEncoder::new(*index.params(), n)?;
    let per_fragment: Vec<(f32, f64, f64)> = (0..index.len())
        .into_par_iter()
        .map(|i| {
            if index.is_degenerate(i) {
                return Ok((f32::INFINITY, f64::NAN, f64::NAN));
            }
            let row = index.row(i);
            let off = index.offsets()[i] as usize;
            let src = reference.slice(off, (n + pad).min(reference.len() - off))?;
            let mut r = rng::stream(seed, i as u64);
            let mut fids = Vec::with_capacity(samples_per_fragment);
            let mut attempts = 0;
            while fids.len() < samples_per_fragment && attempts < samples_per_fragment * MAX_REDRAWS {
                attempts += 1;
                let spec = MutationSpec::new(target_rate, r.next_u64()).with_shift(shift);
                let mut codes = mutate(&src, &spec)?.0.to_codes();
                codes.truncate(n);
                while codes.len() < n {
                    codes.push((r.next_u32() & 3) as u8);
                }
                let enc = encoder.encode(&DnaSequence::from_codes(&codes))?;
                if enc.is_degenerate() {
                    continue;
                }
                let ip: num_complex::Complex64 = row.iter().zip(enc.amplitudes()).map(|(a, b)| a.conj() * b).sum();
                fids.push(ip.norm_sqr());
            }
            if fids.len() < 2 {
                return Err(Error::Degenerate);
            }
            let (m, s) = (stats::mean(&fids), stats::stddev(&fids));
            Ok(((m - z * s) as f32, m, s))
        })
        .collect::<Result<_>>()?;
    Ok(ThresholdReport {
        target_rate,
        z,
        thresholds: per_fragment.iter().map(|t| t.0).collect(),
        mean: per_fragment.iter().map(|t| t.1).collect(),
        stddev: per_fragment.iter().map(|t| t.2).collect(),
        flagged: (0..index.len()).filter(|&i| index.is_degenerate(i)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotormap::build_index;
    use crate::seqio::random_dna;

    fn knot(rate: f64, f: f64) -> Knot {
        Knot { rate, fidelity: 0.0, raw_mean: f, stddev: 0.0, samples: 10 }
    }

    fn curve(points: &[(f64, f64)]) -> CorrelationCurve {
        CorrelationCurve {
            knots: isotonic_decreasing(&points.iter().map(|&(r, f)| knot(r, f)).collect::<Vec<_>>()),
            meta: CurveMeta { n: 1000, scorer: "test".into(), samples_per_knot: 10, seed: 0, redrawn: 0 },
        }
    }

    #[test]
    fn isotonic_pools_violators() {
        let out = isotonic_decreasing(&[knot(0.1, 0.9), knot(0.2, 0.5), knot(0.3, 0.6), knot(0.4, 0.2)]);
        assert_eq!(out.len(), 3);
        assert!((out[1].rate - 0.25).abs() < 1e-12 && (out[1].fidelity - 0.55).abs() < 1e-12);
        // ties pool too, keeping the result strictly decreasing
        let tied = isotonic_decreasing(&[knot(0.1, 0.5), knot(0.2, 0.5), knot(0.3, 0.1)]);
        assert_eq!(tied.len(), 2);
        assert!(tied.windows(2).all(|w| w[0].fidelity > w[1].fidelity));
    }

    #[test]
    fn predict_rate_examples() {
        let c = curve(&[(0.1, 0.8), (0.2, 0.4), (0.3, 0.2)]);
        assert_eq!(predict_rate(&c, 0.8), 0.1);
        assert_eq!(predict_rate(&c, 0.4), 0.2);
        assert_eq!(predict_rate(&c, 1.0), 0.1);
        assert_eq!(predict_rate(&c, 0.0), 0.3);
        assert!((predict_rate(&c, 0.6) - 0.15).abs() < 1e-12);
        assert!((predict_rate(&c, 0.3) - 0.25).abs() < 1e-12);
        assert!((c.fidelity_at(0.25) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        let p = RopeParams::new(3, 1);
        assert!(fit_curve(200, &p, &[0.2, 0.1], 20, 0).is_err());
        assert!(fit_curve(200, &p, &[0.0, 0.1], 20, 0).is_err());
        assert!(fit_curve(200, &p, &[0.1, 0.5], 20, 0).is_err());
        assert!(fit_curve(200, &p, &[0.1], 19, 0).is_err());
    }

    #[test]
    fn fitted_curve_is_strictly_decreasing_and_deterministic() {
        let p = RopeParams::new(4, 2);
        let grid: Vec<f64> = (1..10).map(|i| i as f64 * 0.05).collect();
        let a = fit_curve(1000, &p, &grid, 20, 42).unwrap();
        assert!(a.knots.windows(2).all(|w| w[0].fidelity > w[1].fidelity && w[0].rate < w[1].rate));
        assert_eq!(a, fit_curve(1000, &p, &grid, 20, 42).unwrap());
        assert_ne!(a, fit_curve(1000, &p, &grid, 20, 43).unwrap());
    }

    #[test]
    fn near_zero_rate_knot_is_near_one() {
        let c = fit_curve(5000, &RopeParams::new(5, 4), &[0.005, 0.1], 20, 1).unwrap();
        assert!(c.knots[0].fidelity > 0.95, "{}", c.knots[0].fidelity);
    }

    #[test]
    fn rmse_grows_with_rate_and_rejects_out_of_span() {
        let p = RopeParams::new(4, 2);
        let grid: Vec<f64> = (1..=24).map(|i| i as f64 * 0.02).collect();
        let c = fit_curve(2000, &p, &grid, 30, 3).unwrap();
        let t = rmse(&c, &p, &[0.1, 0.46], 40, 4).unwrap();
        assert!(t.rows[1].rmse > t.rows[0].rmse, "{:?}", t.rows);
        assert!(rmse(&c, &p, &[0.49], 10, 4).is_err());
        assert!(t.pooled_below(0.2).unwrap() == t.rows[0].rmse);
    }

    #[test]
    fn larger_dimension_lowers_rmse() {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.02).collect();
        let run = |p: RopeParams| {
            let c = fit_curve(3000, &p, &grid, 30, 5).unwrap();
            rmse(&c, &p, &[0.1], 60, 6).unwrap().rows[0].rmse
        };
        // dim 64 against dim 4096
        assert!(run(RopeParams::new(3, 1)) > run(RopeParams::new(5, 4)));
    }

    #[test]
    fn scatter_with_levenshtein_bounds() {
        let s = scatter(&RopeScorer(RopeParams::new(3, 2)), 500, &[0.05, 0.2], 7, true).unwrap();
        for p in &s {
            let d = p.levenshtein.unwrap();
            assert!(d <= p.edits && d > 0);
        }
        assert!(s[0].fidelity > s[1].fidelity);
    }

    #[test]
    fn thresholds_cluster_and_order_by_rate() {
        let reference = random_dna(60_000, 9);
        let p = RopeParams::fine_tuned(6, 4).with_fold(4);
        let idx = build_index(&reference, "r", 4000, 500, &p).unwrap();
        let lo = estimate_thresholds(&idx, &reference, 0.1, 12, 2.0, 1).unwrap();
        let hi = estimate_thresholds(&idx, &reference, 0.2, 12, 2.0, 1).unwrap();
        assert!(lo.flagged.is_empty());
        let spread: Vec<f64> = hi.thresholds.iter().map(|&t| f64::from(t)).collect();
        assert!(stats::stddev(&spread) < 0.05);
        for (a, b) in lo.thresholds.iter().zip(&hi.thresholds) {
            assert!(a > b);
        }
    }

    #[test]
    fn degenerate_fragments_are_flagged() {
        let mut codes = random_dna(3000, 10).to_codes();
        codes[1000..2000].iter_mut().for_each(|c| *c = 0);
        let reference = DnaSequence::from_codes(&codes);
        let idx = build_index(&reference, "r", 1000, 500, &RopeParams::new(1, 1)).unwrap();
        let rep = estimate_thresholds(&idx, &reference, 0.1, 5, 2.0, 2).unwrap();
        assert_eq!(rep.flagged, vec![2]);
        assert_eq!(rep.thresholds[2], f32::INFINITY);
        let fine = build_index(&reference, "r", 1000, 500, &RopeParams::fine_tuned(1, 4)).unwrap();
        let rep = estimate_thresholds(&fine, &reference, 0.1, 5, 2.0, 2).unwrap();
        assert!(rep.flagged.is_empty() && rep.thresholds[2].is_finite());
    }
}
