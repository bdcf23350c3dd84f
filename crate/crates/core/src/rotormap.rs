//! RotorMap: map reads to a reference through RoPE fidelities.
//!
//! The reference is cut into windows of length `N` every `step` bases and
//! each window is encoded into one index row. A read is mapped by encoding
//! its first `N` bases (and the head of its reverse complement) and scanning
//! every row. Rows are stored as planar `f32`; inner products accumulate in
//! 8-lane `f32` blocks that are flushed into `f64` every 64 elements.
//!
//! [`SlideState`] moves a window one base at a time in `O(m)` work, which
//! [`refine`] uses to sharpen a coarse hit to single-base resolution.
//! Each feature is kept as `c = g·c̃` with `g = ω^{-j}` after `j` slides, so a
//! slide only touches the departing and arriving s-mer buckets.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lev::levenshtein_dna_banded;
use crate::rope::{self, Bases, Factor, RopeEncoder, RopeEncoding, RopeParams};
use crate::seqio::{DnaSequence, FastaRecord};

/// Number of windows `⌊(R − N)/step⌋ + 1`.
pub fn fragment_count(reference_len: usize, window: usize, step: usize) -> Result<usize> {
    if step == 0 {
        return Err(Error::invalid("step must be at least 1"));
    }
    if reference_len < window {
        return Err(Error::TooShort { len: reference_len, need: window });
    }
    Ok((reference_len - window) / step + 1)
}

#[derive(Clone, Debug)]
pub struct FragmentIndex {
    pub ref_id: String,
    window: usize,
    step: usize,
    params: RopeParams,
    offsets: Vec<u64>,
    re: Vec<f32>,
    im: Vec<f32>,
    degenerate: Vec<bool>,
    thresholds: Option<Vec<f32>>,
}

impl FragmentIndex {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn params(&self) -> &RopeParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn is_degenerate(&self, row: usize) -> bool {
        self.degenerate[row]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    /// Row `i` widened to `f64`.
    pub fn row(&self, i: usize) -> Vec<Complex64> {
        let d = self.dim();
        (i * d..(i + 1) * d).map(|j| Complex64::new(f64::from(self.re[j]), f64::from(self.im[j]))).collect()
    }

    fn planar(&self, i: usize) -> (&[f32], &[f32]) {
        let d = self.dim();
        (&self.re[i * d..(i + 1) * d], &self.im[i * d..(i + 1) * d])
    }

    pub fn thresholds(&self) -> Option<&[f32]> {
        self.thresholds.as_deref()
    }

    /// Degenerate fragments should carry `f32::INFINITY` (never matched).
    pub fn set_thresholds(&mut self, thresholds: Vec<f32>) -> Result<()> {
        if thresholds.len() != self.len() {
            return Err(Error::DimensionMismatch { left: thresholds.len(), right: self.len() });
        }
        self.thresholds = Some(thresholds);
        Ok(())
    }

    pub fn clear_thresholds(&mut self) {
        self.thresholds = None;
    }

    /// Row count and storage in bytes of the encodings.
    pub fn footprint(&self) -> (usize, usize) {
        (self.len(), self.re.len() * 8)
    }
}

fn bases_of<'a>(codes: &'a [u8], reference: &'a DnaSequence, params: &RopeParams, start: usize, n: usize) -> Bases<'a> {
    Bases {
        codes: &codes[start..start + n],
        probs: if params.weighted { reference.probs().map(|p| &p[start..start + n]) } else { None },
    }
}

/// Encodes windows `0, step, 2·step, …` of the forward strand.
pub fn build_index(reference: &DnaSequence, ref_id: &str, window: usize, step: usize, params: &RopeParams) -> Result<FragmentIndex> {
    let f = fragment_count(reference.len(), window, step)?;
    let encoder = RopeEncoder::new(*params, window)?;
    let codes = reference.to_codes();
    let dim = params.dim();
    let rows: Vec<RopeEncoding> = (0..f)
        .into_par_iter()
        .map(|i| encoder.encode_bases(bases_of(&codes, reference, params, i * step, window)))
        .collect::<Result<_>>()?;
    let mut re = Vec::with_capacity(f * dim);
    let mut im = Vec::with_capacity(f * dim);
    for row in &rows {
        re.extend(row.amplitudes().iter().map(|z| z.re as f32));
        im.extend(row.amplitudes().iter().map(|z| z.im as f32));
    }
    Ok(FragmentIndex {
        ref_id: ref_id.to_string(),
        window,
        step,
        params: *params,
        offsets: (0..f).map(|i| (i * step) as u64).collect(),
        degenerate: rows.iter().map(RopeEncoding::is_degenerate).collect(),
        re,
        im,
        thresholds: None,
    })
}

const LANES: usize = 8;
const FLUSH: usize = 64;

/// `Σ conj(a)·b` over planar `f32` slices.
pub(crate) fn dot_planar(ar: &[f32], ai: &[f32], br: &[f32], bi: &[f32]) -> Complex64 {
    let (mut total_re, mut total_im) = (0f64, 0f64);
    let mut start = 0;
    while start < ar.len() {
        let end = (start + FLUSH).min(ar.len());
        let (mut acc_re, mut acc_im) = ([0f32; LANES], [0f32; LANES]);
        let (xr, xi, yr, yi) = (&ar[start..end], &ai[start..end], &br[start..end], &bi[start..end]);
        let full = xr.len() / LANES * LANES;
        for c in (0..full).step_by(LANES) {
            for l in 0..LANES {
                let (a, b, p, q) = (xr[c + l], xi[c + l], yr[c + l], yi[c + l]);
                acc_re[l] += a * p + b * q;
                acc_im[l] += a * q - b * p;
            }
        }
        for j in full..xr.len() {
            acc_re[0] += xr[j] * yr[j] + xi[j] * yi[j];
            acc_im[0] += xr[j] * yi[j] - xi[j] * yr[j];
        }
        total_re += acc_re.iter().map(|&v| f64::from(v)).sum::<f64>();
        total_im += acc_im.iter().map(|&v| f64::from(v)).sum::<f64>();
        start = end;
    }
    Complex64::new(total_re, total_im)
}

/// Queries scanned together per pass over the rows.
const QUERY_TILE: usize = 8;

struct Query {
    re: Vec<f32>,
    im: Vec<f32>,
}

impl Query {
    fn new(enc: &RopeEncoding) -> Self {
        Query {
            re: enc.amplitudes().iter().map(|z| z.re as f32).collect(),
            im: enc.amplitudes().iter().map(|z| z.im as f32).collect(),
        }
    }
}

/// Calls `visit(query, row, fidelity)` for every non-degenerate row.
fn scan(index: &FragmentIndex, queries: &[Query], mut visit: impl FnMut(usize, usize, f64)) {
    for (tile_no, tile) in queries.chunks(QUERY_TILE).enumerate() {
        for row in 0..index.len() {
            if index.degenerate[row] {
                continue;
            }
            let (rr, ri) = index.planar(row);
            for (q, query) in tile.iter().enumerate() {
                let fid = dot_planar(rr, ri, &query.re, &query.im).norm_sqr().min(1.0);
                visit(tile_no * QUERY_TILE + q, row, fid);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strand {
    #[serde(rename = "+")]
    Forward,
    #[serde(rename = "-")]
    Reverse,
}

impl std::fmt::Display for Strand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strand::Forward => "+",
            Strand::Reverse => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Top1,
    Threshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub offset: u64,
    pub fidelity: f64,
    pub strand: Strand,
}

/// Descending fidelity, then smaller offset, then `+` before `-`.
fn rank(a: &Location, b: &Location) -> std::cmp::Ordering {
    b.fidelity.total_cmp(&a.fidelity).then(a.offset.cmp(&b.offset)).then(a.strand.cmp(&b.strand))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    #[serde(rename = "id")]
    pub read_id: String,
    /// Strand of the best location.
    pub strand: Option<Strand>,
    /// Sorted by [`rank`]: best first.
    pub locations: Vec<Location>,
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<Location>,
}

impl MappingResult {
    pub fn best(&self) -> Option<&Location> {
        self.locations.first()
    }
}

/// Encodes the head of a read on each requested strand.
fn encode_strands(encoder: &RopeEncoder, read: &DnaSequence, both_strands: bool) -> Result<Vec<(Strand, RopeEncoding)>> {
    let n = encoder.len();
    if read.len() < n {
        return Err(Error::TooShort { len: read.len(), need: n });
    }
    let mut out = vec![(Strand::Forward, encoder.encode(&read.slice(0, n)?)?)];
    if both_strands {
        out.push((Strand::Reverse, encoder.encode(&read.reverse_complement().slice(0, n)?)?));
    }
    if out.iter().all(|(_, e)| e.is_degenerate()) {
        return Err(Error::Degenerate);
    }
    Ok(out)
}

type Prepared = Vec<Result<Vec<(Strand, RopeEncoding)>>>;

fn prepare(index: &FragmentIndex, reads: &[FastaRecord], both_strands: bool) -> Result<Prepared> {
    let encoder = RopeEncoder::new(index.params, index.window)?;
    Ok(reads.par_iter().map(|r| encode_strands(&encoder, &r.seq, both_strands)).collect())
}

/// Flattens prepared reads into scan queries, remembering their owners.
fn queries_of(prepared: &Prepared) -> (Vec<Query>, Vec<(usize, Strand)>) {
    let mut queries = Vec::new();
    let mut owners = Vec::new();
    for (r, p) in prepared.iter().enumerate() {
        if let Ok(strands) = p {
            for (strand, enc) in strands.iter().filter(|(_, e)| !e.is_degenerate()) {
                queries.push(Query::new(enc));
                owners.push((r, *strand));
            }
        }
    }
    (queries, owners)
}

fn collect_results(
    reads: &[FastaRecord],
    prepared: Prepared,
    mut per_read: Vec<Vec<Location>>,
    regime: Regime,
) -> Vec<Result<MappingResult>> {
    prepared
        .into_iter()
        .zip(reads)
        .enumerate()
        .map(|(r, (p, read))| {
            p?;
            let mut locations = std::mem::take(&mut per_read[r]);
            locations.sort_by(rank);
            if regime == Regime::Top1 {
                locations.truncate(1);
            }
            Ok(MappingResult {
                read_id: read.name.clone(),
                strand: locations.first().map(|l| l.strand),
                locations,
                regime,
                refined: None,
            })
        })
        .collect()
}

/// Highest-fidelity fragment per read, over both strands when asked.
pub fn search_top1(index: &FragmentIndex, reads: &[FastaRecord], both_strands: bool) -> Result<Vec<Result<MappingResult>>> {
    let prepared = prepare(index, reads, both_strands)?;
    let (queries, owners) = queries_of(&prepared);
    let tiles: Vec<&[Query]> = queries.chunks(QUERY_TILE).collect();
    let best: Vec<Option<Location>> = tiles
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(t, tile)| {
            let mut best: Vec<Option<Location>> = vec![None; tile.len()];
            scan(index, tile, |q, row, fid| {
                let cand = Location { offset: index.offsets[row], fidelity: fid, strand: owners[t * QUERY_TILE + q].1 };
                let slot = &mut best[q];
                if slot.as_ref().is_none_or(|b| rank(&cand, b).is_lt()) {
                    *slot = Some(cand);
                }
            });
            best
        })
        .collect();
    let mut per_read = vec![Vec::new(); reads.len()];
    for (loc, (r, _)) in best.into_iter().zip(&owners) {
        per_read[*r].extend(loc);
    }
    Ok(collect_results(reads, prepared, per_read, Regime::Top1))
}

/// Every fragment whose fidelity reaches its threshold; empty lists allowed.
pub fn search_threshold(index: &FragmentIndex, reads: &[FastaRecord], both_strands: bool) -> Result<Vec<Result<MappingResult>>> {
    let thresholds = index.thresholds().ok_or_else(|| Error::invalid("index has no fragment thresholds"))?;
    let prepared = prepare(index, reads, both_strands)?;
    let (queries, owners) = queries_of(&prepared);
    let tiles: Vec<&[Query]> = queries.chunks(QUERY_TILE).collect();
    let hits: Vec<Vec<Location>> = tiles
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(t, tile)| {
            let mut hits: Vec<Vec<Location>> = vec![Vec::new(); tile.len()];
            scan(index, tile, |q, row, fid| {
                if fid >= f64::from(thresholds[row]) {
                    hits[q].push(Location { offset: index.offsets[row], fidelity: fid, strand: owners[t * QUERY_TILE + q].1 });
                }
            });
            hits
        })
        .collect();
    let mut per_read = vec![Vec::new(); reads.len()];
    for (locs, (r, _)) in hits.into_iter().zip(&owners) {
        per_read[*r].extend(locs);
    }
    Ok(collect_results(reads, prepared, per_read, Regime::Threshold))
}

/// How a reported location relates to the true origin of a read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOutcome {
    /// The reported window overlaps the true one.
    Overlap,
    /// Disjoint, but the banded edit distance to the read is below 30% of `N`.
    Similar,
    Mismatch,
}

/// Classifies a hit at `found` for a read whose head came from `truth`.
pub fn match_outcome(reference: &DnaSequence, read_head: &DnaSequence, found: usize, truth: usize) -> Result<MatchOutcome> {
    let n = read_head.len();
    if found.abs_diff(truth) < n {
        return Ok(MatchOutcome::Overlap);
    }
    let band = (3 * n).div_ceil(10);
    let d = levenshtein_dna_banded(&reference.slice(found, n)?, read_head, band)?;
    Ok(if d.exact && d.distance * 10 < 3 * n { MatchOutcome::Similar } else { MatchOutcome::Mismatch })
}

/// Incremental fidelity between a sliding reference window and a fixed query.
#[derive(Clone, Debug)]
pub struct SlideState {
    params: RopeParams,
    n: usize,
    origin: usize,
    steps: u64,
    factors: Vec<Factor>,
    /// Rotated features `c̃`, factor-major; the true features are `ω_k^{-steps}·c̃`.
    features: Vec<Complex64>,
    /// `Σ conj(x)·c̃` per factor.
    inner: Vec<Complex64>,
    query: Vec<Complex64>,
    query_norm: f64,
    window_norm: f64,
    freeze_norm: bool,
    departing: u64,
    arriving: u64,
}

impl SlideState {
    pub fn start(&self) -> usize {
        self.origin + self.steps as usize
    }

    pub fn window(&self) -> usize {
        self.n
    }

    /// `X`: squared norm of the query as given (1 for a normalized encoding).
    pub fn query_norm(&self) -> f64 {
        self.query_norm
    }

    /// `C`: squared norm of the unnormalized window features.
    pub fn window_norm(&self) -> f64 {
        self.window_norm
    }

    /// Skips norm maintenance; fidelities then use the norm at the time of the call.
    pub fn freeze_norm(&mut self, freeze: bool) {
        self.freeze_norm = freeze;
    }

    pub fn is_degenerate(&self) -> bool {
        let floor = 1e-12 * (self.n + 1 - self.params.s) as f64;
        self.window_norm < floor * floor
    }

    /// `|Σ_k ω_k^{-steps}·ip̃_k|² / (X·C)`.
    pub fn fidelity(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::Degenerate);
        }
        let ip: Complex64 = self
            .factors
            .iter()
            .zip(&self.inner)
            .map(|(f, ip)| f.phasor(self.n, -(self.steps as i64)) * ip)
            .sum();
        Ok(ip.norm_sqr() / (self.query_norm * self.window_norm))
    }

    /// Unnormalized features of the current window.
    pub fn features(&self) -> Vec<Complex64> {
        let b = self.params.buckets();
        let g: Vec<Complex64> = self.factors.iter().map(|f| f.phasor(self.n, -(self.steps as i64))).collect();
        self.features.iter().enumerate().map(|(j, c)| g[j / b] * c).collect()
    }
}

fn mer_at(reference: &DnaSequence, pos: usize, s: usize) -> u64 {
    (pos..pos + s).fold(0u64, |acc, i| (acc << 2) | u64::from(reference.get(i)))
}

/// State for the window `[start, start + N)` against `query`.
pub fn init_slide(reference: &DnaSequence, start: usize, query: &RopeEncoding) -> Result<SlideState> {
    let params = *query.params();
    if query.parts().len() != 1 {
        return Err(Error::Unsupported("sliding needs a single-part query".into()));
    }
    if params.weighted && reference.probs().is_some() {
        return Err(Error::Unsupported("sliding weighted encodings is not implemented".into()));
    }
    let n = query.source_length();
    if start + n > reference.len() {
        return Err(Error::OutOfRange { start, end: start + n, len: reference.len() });
    }
    let codes = reference.slice(start, n)?.to_codes();
    let features = RopeEncoder::new(params, n)?.raw(Bases { codes: &codes, probs: None });
    let b = params.buckets();
    let inner = (0..params.m)
        .map(|k| (k * b..(k + 1) * b).map(|j| query.amplitudes()[j].conj() * features[j]).sum())
        .collect();
    let end = start + n;
    Ok(SlideState {
        params,
        n,
        origin: start,
        steps: 0,
        factors: params.factors(),
        window_norm: features.iter().map(Complex64::norm_sqr).sum(),
        features,
        inner,
        query: query.amplitudes().to_vec(),
        query_norm: query.amplitudes().iter().map(Complex64::norm_sqr).sum(),
        freeze_norm: false,
        departing: mer_at(reference, start, params.s),
        arriving: if end < reference.len() { mer_at(reference, end + 1 - params.s, params.s) } else { 0 },
    })
}

/// Advances the window by one base in `O(m)`.
pub fn slide_update(state: &mut SlideState, reference: &DnaSequence) -> Result<()> {
    let start = state.start();
    let end = start + state.n;
    if end >= reference.len() {
        return Err(Error::OutOfRange { start: start + 1, end: end + 1, len: reference.len() });
    }
    let s = state.params.s;
    let b = state.params.buckets();
    let mask = (b - 1) as u64;
    let (dep, arr) = ((state.departing & mask) as usize, (state.arriving & mask) as usize);
    let j = state.steps as i64;
    let tail = (state.n - s) as i64;
    for (k, f) in state.factors.iter().enumerate() {
        // c̃ loses ω^j at the departing mer and gains ω^(N−s+j+1) at the arriving one
        let d_dep = -f.phasor(state.n, j);
        let d_arr = f.phasor(state.n, tail + j + 1);
        let touched: &[(usize, Complex64)] =
            if dep == arr { &[(dep, d_dep + d_arr)] } else { &[(dep, d_dep), (arr, d_arr)] };
        for &(bucket, delta) in touched {
            let idx = k * b + bucket;
            let old = state.features[idx];
            let new = old + delta;
            state.features[idx] = new;
            state.inner[k] += state.query[idx].conj() * delta;
            if !state.freeze_norm {
                state.window_norm += new.norm_sqr() - old.norm_sqr();
            }
        }
    }
    // incremental C carries absolute error near eps·C; re-sum when it nears zero
    if !state.freeze_norm && state.window_norm < 1e-6 * (state.n + 1 - s) as f64 {
        state.window_norm = state.features.iter().map(Complex64::norm_sqr).sum();
    }
    let smer_mask = (1u64 << (2 * s)) - 1;
    state.departing = ((state.departing << 2) | u64::from(reference.get(start + s))) & smer_mask;
    if end + 1 < reference.len() {
        state.arriving = ((state.arriving << 2) | u64::from(reference.get(end + 1))) & smer_mask;
    }
    state.steps += 1;
    Ok(())
}

/// Outcome of [`refine`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Refinement {
    pub offset: usize,
    pub fidelity: f64,
    /// The search range was cut at a reference end.
    pub clipped: bool,
}

/// Best window start in `[approx − radius, approx + radius]`, visited every
/// `fine_step` bases by sliding. Ties go to the smaller offset.
pub fn refine(reference: &DnaSequence, query: &RopeEncoding, approx: usize, radius: usize, fine_step: usize) -> Result<Refinement> {
    if fine_step == 0 {
        return Err(Error::invalid("fine_step must be at least 1"));
    }
    let n = query.source_length();
    let last = reference.len().checked_sub(n).ok_or(Error::TooShort { len: reference.len(), need: n })?;
    if approx > last {
        return Err(Error::OutOfRange { start: approx, end: approx + n, len: reference.len() });
    }
    let lo = approx.saturating_sub(radius);
    let hi = (approx + radius).min(last);
    let clipped = lo + radius != approx || hi != approx + radius;
    let mut state = init_slide(reference, lo, query)?;
    let mut best: Option<(usize, f64)> = None;
    let mut pos = lo;
    loop {
        if let Ok(fid) = state.fidelity() {
            if best.is_none_or(|(_, f)| fid > f) {
                best = Some((pos, fid));
            }
        }
        if pos + fine_step > hi {
            break;
        }
        for _ in 0..fine_step {
            slide_update(&mut state, reference)?;
        }
        pos += fine_step;
    }
    let (offset, fidelity) = best.ok_or(Error::Degenerate)?;
    Ok(Refinement { offset, fidelity, clipped })
}

pub const INDEX_MAGIC: &[u8; 5] = b"RMIX1";

/// Writes `RMIX1`: magic, `u32` ref-id length and bytes, `N: u64`,
/// `step: u64`, the RoPE parameter block, `F: u64`, `dim: u64`, `F` offsets
/// as `u64`, `F·dim` interleaved `f32` pairs, then a `u8` flag followed by
/// `F` thresholds as `f32` when set.
pub fn write_index(w: &mut impl Write, index: &FragmentIndex) -> Result<()> {
    w.write_all(INDEX_MAGIC)?;
    let id = index.ref_id.as_bytes();
    w.write_all(&(id.len() as u32).to_le_bytes())?;
    w.write_all(id)?;
    w.write_all(&(index.window as u64).to_le_bytes())?;
    w.write_all(&(index.step as u64).to_le_bytes())?;
    rope::write_params(w, &index.params)?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    w.write_all(&(index.dim() as u64).to_le_bytes())?;
    for o in &index.offsets {
        w.write_all(&o.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(index.dim() * 8);
    for row in 0..index.len() {
        buf.clear();
        let (re, im) = index.planar(row);
        for (r, i) in re.iter().zip(im) {
            buf.extend_from_slice(&r.to_le_bytes());
            buf.extend_from_slice(&i.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    match &index.thresholds {
        Some(t) => {
            w.write_all(&[1])?;
            for v in t {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        None => w.write_all(&[0])?,
    }
    Ok(())
}

pub fn read_index(r: &mut impl Read) -> Result<FragmentIndex> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != INDEX_MAGIC {
        return Err(Error::Format("not an RMIX1 index file".into()));
    }
    let id_len = rope::read_u32(r)? as usize;
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id)?;
    let ref_id = String::from_utf8(id).map_err(|_| Error::Format("reference id is not UTF-8".into()))?;
    let window = rope::read_u64(r)? as usize;
    let step = rope::read_u64(r)? as usize;
    let params = rope::read_params(r)?;
    let f = rope::read_u64(r)? as usize;
    let dim = rope::read_u64(r)? as usize;
    if dim != params.dim() {
        return Err(Error::Format(format!("dimension {dim} does not match parameters {params}")));
    }
    let offsets = (0..f).map(|_| rope::read_u64(r)).collect::<Result<Vec<_>>>()?;
    let mut re = Vec::with_capacity(f * dim);
    let mut im = Vec::with_capacity(f * dim);
    let mut buf = vec![0u8; dim * 8];
    let mut degenerate = Vec::with_capacity(f);
    for _ in 0..f {
        r.read_exact(&mut buf)?;
        let mut zero = true;
        for pair in buf.chunks_exact(8) {
            let a = f32::from_le_bytes(pair[..4].try_into().expect("4 bytes"));
            let b = f32::from_le_bytes(pair[4..].try_into().expect("4 bytes"));
            zero &= a == 0.0 && b == 0.0;
            re.push(a);
            im.push(b);
        }
        degenerate.push(zero);
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let thresholds = match flag[0] {
        0 => None,
        1 => Some((0..f).map(|_| rope::read_f32(r)).collect::<Result<Vec<_>>>()?),
        x => return Err(Error::Format(format!("bad threshold flag {x}"))),
    };
    Ok(FragmentIndex { ref_id, window, step, params, offsets, re, im, degenerate, thresholds })
}
