//! DNA sequences and their text formats.
//!
//! Bases are stored 2 bits each (`A=0, C=1, G=2, T=3`), 32 per `u64` word.
//! A sequence may additionally carry one probability row per position, used
//! for IUPAC ambiguity letters and for FASTQ base-call qualities. When rows
//! are present the packed base at each position is the row's most probable
//! base (lowest code on ties).

use std::fmt;

use rand::{Rng as _, RngCore};

use crate::error::{Error, Result};
use crate::rng;

pub const ALPHABET: [u8; 4] = *b"ACGT";

/// Probability of `A, C, G, T` at one position.
pub type BaseProbs = [f64; 4];

const PROB_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct DnaSequence {
    packed: Vec<u64>,
    len: usize,
    probs: Option<Vec<BaseProbs>>,
}

impl DnaSequence {
    pub fn empty() -> Self {
        DnaSequence { packed: Vec::new(), len: 0, probs: None }
    }

    /// Builds a sequence from 2-bit codes; only the low two bits of each
    /// code are kept.
    pub fn from_codes(codes: &[u8]) -> Self {
        let mut packed = vec![0u64; codes.len().div_ceil(32)];
        for (i, &c) in codes.iter().enumerate() {
            packed[i / 32] |= u64::from(c & 3) << (2 * (i % 32));
        }
        DnaSequence { packed, len: codes.len(), probs: None }
    }

    /// Strict `ACGT` text (case-insensitive).
    pub fn from_ascii(text: &[u8]) -> Result<Self> {
        let codes = text
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                base_code(b).ok_or_else(|| Error::Parse {
                    offset: i,
                    msg: format!("symbol {:?} is not one of ACGT", b as char),
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self::from_codes(&codes))
    }

    /// Attaches per-position probability rows.
    pub fn with_probs(mut self, probs: Vec<BaseProbs>) -> Result<Self> {
        if probs.len() != self.len {
            return Err(Error::invalid(format!(
                "{} probability rows for a sequence of length {}",
                probs.len(),
                self.len
            )));
        }
        for (i, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL || row.iter().any(|p| !(0.0..=1.0 + PROB_TOL).contains(p)) {
                return Err(Error::invalid(format!("probability row {i} is not a distribution: {row:?}")));
            }
        }
        self.probs = Some(probs);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        ((self.packed[i / 32] >> (2 * (i % 32))) & 3) as u8
    }

    pub fn codes(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| ((self.packed[i / 32] >> (2 * (i % 32))) & 3) as u8)
    }

    /// Unpacks to one byte per base.
    pub fn to_codes(&self) -> Vec<u8> {
        self.codes().collect()
    }

    pub fn probs(&self) -> Option<&[BaseProbs]> {
        self.probs.as_deref()
    }

    /// Same bases, probability rows dropped.
    pub fn concrete(&self) -> Self {
        DnaSequence { packed: self.packed.clone(), len: self.len, probs: None }
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.len).ok_or(Error::OutOfRange {
            start,
            end: start.saturating_add(len),
            len: self.len,
        })?;
        let codes: Vec<u8> = (start..end).map(|i| self.get(i)).collect();
        let mut out = Self::from_codes(&codes);
        if let Some(p) = &self.probs {
            out.probs = Some(p[start..end].to_vec());
        }
        Ok(out)
    }

    pub fn reverse_complement(&self) -> Self {
        let codes: Vec<u8> = (0..self.len).rev().map(|i| 3 - self.get(i)).collect();
        let mut out = Self::from_codes(&codes);
        if let Some(p) = &self.probs {
            out.probs = Some(
                p.iter()
                    .rev()
                    .map(|r| [r[3], r[2], r[1], r[0]])
                    .collect(),
            );
        }
        out
    }
}

impl fmt::Display for DnaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: String = self.codes().map(|c| ALPHABET[c as usize] as char).collect();
        f.write_str(&text)
    }
}

impl fmt::Debug for DnaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "DnaSequence({self}")?;
        } else {
            write!(f, "DnaSequence(len={}", self.len)?;
        }
        if self.probs.is_some() {
            f.write_str(", probs")?;
        }
        f.write_str(")")
    }
}

pub fn reverse_complement(seq: &DnaSequence) -> DnaSequence {
    seq.reverse_complement()
}

fn base_code(b: u8) -> Option<u8> {
    match b.to_ascii_uppercase() {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Candidate bases of an IUPAC nucleotide letter (uppercase).
pub fn iupac_bases(letter: u8) -> Option<&'static [u8]> {
    Some(match letter.to_ascii_uppercase() {
        b'A' => &[0],
        b'C' => &[1],
        b'G' => &[2],
        b'T' | b'U' => &[3],
        b'R' => &[0, 2],
        b'Y' => &[1, 3],
        b'S' => &[1, 2],
        b'W' => &[0, 3],
        b'K' => &[2, 3],
        b'M' => &[0, 1],
        b'B' => &[1, 2, 3],
        b'D' => &[0, 2, 3],
        b'H' => &[0, 1, 3],
        b'V' => &[0, 1, 2],
        b'N' => &[0, 1, 2, 3],
        _ => return None,
    })
}

const IUPAC_LETTERS: &[u8] = b"ACGTRYSWKMBDHVN";

fn argmax(row: &BaseProbs) -> u8 {
    let mut best = 0;
    for i in 1..4 {
        if row[i] > row[best] {
            best = i;
        }
    }
    best as u8
}

/// What to do with IUPAC letters other than `ACGT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IupacMode {
    /// Reject anything outside `ACGT`.
    Strict,
    /// Expand ambiguity letters into uniform probability rows over their bases.
    Probabilistic,
    /// Replace each ambiguity letter with one of its bases, drawn with `seed`.
    Randomize { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FastaRecord {
    pub name: String,
    pub seq: DnaSequence,
}

struct SeqBuilder {
    codes: Vec<u8>,
    probs: Vec<BaseProbs>,
    ambiguous: bool,
}

impl SeqBuilder {
    fn new() -> Self {
        SeqBuilder { codes: Vec::new(), probs: Vec::new(), ambiguous: false }
    }

    fn push_concrete(&mut self, code: u8) {
        self.codes.push(code);
        let mut row = [0.0; 4];
        row[code as usize] = 1.0;
        self.probs.push(row);
    }

    fn push_row(&mut self, row: BaseProbs) {
        self.codes.push(argmax(&row));
        self.probs.push(row);
        self.ambiguous = true;
    }

    fn finish(self) -> DnaSequence {
        let seq = DnaSequence::from_codes(&self.codes);
        if self.ambiguous {
            DnaSequence { probs: Some(self.probs), ..seq }
        } else {
            seq
        }
    }
}

/// Parses FASTA text. Names are the first whitespace-delimited token of the
/// header; blank lines and line breaks inside sequences are ignored.
pub fn parse_fasta(bytes: &[u8], mode: IupacMode) -> Result<Vec<FastaRecord>> {
    let mut rng = match mode {
        IupacMode::Randomize { seed } => Some(rng::seeded(seed)),
        _ => None,
    };
    let mut records = Vec::new();
    let mut current: Option<(String, SeqBuilder)> = None;
    let mut offset = 0usize;
    for raw in bytes.split(|&b| b == b'\n') {
        let line_start = offset;
        offset += raw.len() + 1;
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if let Some(header) = line.strip_prefix(b">") {
            if let Some((name, b)) = current.take() {
                records.push(FastaRecord { name, seq: b.finish() });
            }
            let name = String::from_utf8_lossy(header)
                .split_whitespace()
                .next()
                .unwrap_or("")
                .to_string();
            if name.is_empty() {
                return Err(Error::Parse { offset: line_start, msg: "empty record name".into() });
            }
            current = Some((name, SeqBuilder::new()));
            continue;
        }
        let Some((_, builder)) = current.as_mut() else {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Err(Error::Parse { offset: line_start, msg: "sequence data before the first '>' header".into() });
        };
        for (col, &b) in line.iter().enumerate() {
            if b.is_ascii_whitespace() {
                continue;
            }
            let at = line_start + col;
            let bases = iupac_bases(b).ok_or_else(|| Error::Parse {
                offset: at,
                msg: format!("symbol {:?} is not an IUPAC nucleotide", b as char),
            })?;
            if bases.len() == 1 {
                builder.push_concrete(bases[0]);
                continue;
            }
            match mode {
                IupacMode::Strict => {
                    return Err(Error::Parse {
                        offset: at,
                        msg: format!("ambiguous symbol {:?} in strict mode", b as char),
                    })
                }
                IupacMode::Probabilistic => {
                    let mut row = [0.0; 4];
                    for &c in bases {
                        row[c as usize] = 1.0 / bases.len() as f64;
                    }
                    builder.push_row(row);
                }
                IupacMode::Randomize { .. } => {
                    let r = rng.as_mut().expect("rng exists in randomize mode");
                    builder.push_concrete(bases[r.random_range(0..bases.len())]);
                }
            }
        }
    }
    if let Some((name, b)) = current.take() {
        records.push(FastaRecord { name, seq: b.finish() });
    }
    Ok(records)
}

fn row_letter(row: &BaseProbs) -> u8 {
    for &letter in IUPAC_LETTERS {
        let bases = iupac_bases(letter).expect("table letter");
        let p = 1.0 / bases.len() as f64;
        let matches = (0..4u8).all(|c| {
            let want = if bases.contains(&c) { p } else { 0.0 };
            (row[c as usize] - want).abs() <= PROB_TOL
        });
        if matches {
            return letter;
        }
    }
    ALPHABET[argmax(row) as usize]
}

/// Writes records as FASTA with 60 columns per line. Probability rows that
/// are uniform over an IUPAC set are written as that letter, other rows as
/// their most probable base.
pub fn serialize_fasta(records: &[FastaRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push('>');
        out.push_str(&rec.name);
        out.push('\n');
        let letters: Vec<u8> = match rec.seq.probs() {
            Some(rows) => rows.iter().map(row_letter).collect(),
            None => rec.seq.codes().map(|c| ALPHABET[c as usize]).collect(),
        };
        for line in letters.chunks(60) {
            out.push_str(std::str::from_utf8(line).expect("ascii"));
            out.push('\n');
        }
    }
    out
}

/// Parses four-line FASTQ records (`@name`, bases, `+`, Phred+33 qualities).
///
/// Each base becomes a probability row with `1 - 10^(-Q/10)` on the called
/// base and the remaining mass split evenly over the other three. `N` calls
/// become uniform rows.
pub fn parse_fastq(bytes: &[u8]) -> Result<Vec<FastaRecord>> {
    let mut lines = Vec::new();
    let mut offset = 0usize;
    for raw in bytes.split(|&b| b == b'\n') {
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        lines.push((offset, line));
        offset += raw.len() + 1;
    }
    while lines.last().is_some_and(|(_, l)| l.iter().all(u8::is_ascii_whitespace)) {
        lines.pop();
    }
    if lines.len() % 4 != 0 {
        return Err(Error::Parse { offset, msg: "FASTQ records must span exactly four lines".into() });
    }
    let mut records = Vec::new();
    for rec in lines.chunks(4) {
        let (hoff, header) = rec[0];
        let name = header
            .strip_prefix(b"@")
            .ok_or_else(|| Error::Parse { offset: hoff, msg: "expected '@' header".into() })?;
        let name = String::from_utf8_lossy(name).split_whitespace().next().unwrap_or("").to_string();
        if name.is_empty() {
            return Err(Error::Parse { offset: hoff, msg: "empty record name".into() });
        }
        let (soff, bases) = rec[1];
        let (poff, plus) = rec[2];
        if !plus.starts_with(b"+") {
            return Err(Error::Parse { offset: poff, msg: "expected '+' separator".into() });
        }
        let (qoff, quals) = rec[3];
        if quals.len() != bases.len() {
            return Err(Error::Parse {
                offset: qoff,
                msg: format!("{} quality values for {} bases", quals.len(), bases.len()),
            });
        }
        let mut builder = SeqBuilder::new();
        for (i, (&b, &q)) in bases.iter().zip(quals).enumerate() {
            if q < 33 {
                return Err(Error::Parse { offset: qoff + i, msg: "quality below '!'".into() });
            }
            let row = match base_code(b) {
                Some(code) => {
                    let correct = 1.0 - 10f64.powf(-f64::from(q - 33) / 10.0);
                    let mut row = [(1.0 - correct) / 3.0; 4];
                    row[code as usize] = correct;
                    row
                }
                None if b.eq_ignore_ascii_case(&b'N') => [0.25; 4],
                None => {
                    return Err(Error::Parse {
                        offset: soff + i,
                        msg: format!("symbol {:?} is not a base call", b as char),
                    })
                }
            };
            builder.push_row(row);
        }
        records.push(FastaRecord { name, seq: builder.finish() });
    }
    Ok(records)
}

/// FASTA or FASTQ-lite, chosen by the first non-blank byte.
pub fn parse_reads(bytes: &[u8], mode: IupacMode) -> Result<Vec<FastaRecord>> {
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        None => Ok(Vec::new()),
        Some(b'@') => parse_fastq(bytes),
        Some(_) => parse_fasta(bytes, mode),
    }
}

/// Uniform i.i.d. bases, reproducible for a fixed seed.
pub fn random_dna(length: usize, seed: u64) -> DnaSequence {
    let mut rng = rng::seeded(seed);
    random_dna_with(length, &mut rng)
}

pub(crate) fn random_dna_with(length: usize, rng: &mut impl RngCore) -> DnaSequence {
    let mut packed: Vec<u64> = (0..length.div_ceil(32)).map(|_| rng.next_u64()).collect();
    let tail = length % 32;
    if tail != 0 {
        if let Some(last) = packed.last_mut() {
            *last &= (1u64 << (2 * tail)) - 1;
        }
    }
    DnaSequence { packed, len: length, probs: None }
}

/// Point-mutation model: a head-cut shift followed by `⌊rate·len⌋` edits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationSpec {
    pub rate: f64,
    /// `(p_del, p_ins, p_sub)`.
    pub mix: (f64, f64, f64),
    /// Bases cut from the head (and replaced by a random tail of equal length).
    pub shift: usize,
    pub seed: u64,
}

impl MutationSpec {
    /// Edits split evenly between deletions, insertions and substitutions.
    pub fn new(rate: f64, seed: u64) -> Self {
        MutationSpec { rate, mix: (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), shift: 0, seed }
    }

    pub fn with_shift(mut self, shift: usize) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::invalid(format!("mutation rate {} outside [0, 1)", self.rate)));
        }
        let (d, i, s) = self.mix;
        if d < 0.0 || i < 0.0 || s < 0.0 || (d + i + s - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!("edit mix {:?} is not a distribution", self.mix)));
        }
        Ok(())
    }
}

/// Applies `spec` to `seq` and returns the mutant with the number of point
/// edits actually applied (deletions and substitutions on an empty string
/// are skipped and not counted). Probability rows are not carried over.
pub fn mutate(seq: &DnaSequence, spec: &MutationSpec) -> Result<(DnaSequence, usize)> {
    spec.validate()?;
    if seq.is_empty() {
        return Err(Error::invalid("cannot mutate an empty sequence"));
    }
    let mut rng = rng::seeded(spec.seed);
    let len = seq.len();
    let mut codes = seq.to_codes();
    if spec.shift > 0 {
        let cut = spec.shift.min(len);
        codes.drain(..cut);
        codes.extend((0..spec.shift).map(|_| rng.random_range(0..4u8)));
    }
    let edits = (spec.rate * len as f64 + 1e-9).floor() as usize;
    let mut buf = ChunkedBuf::new(codes);
    let (p_del, p_ins, _) = spec.mix;
    let mut applied = 0;
    for _ in 0..edits {
        let u: f64 = rng.random();
        if u < p_del {
            if buf.len() == 0 {
                continue;
            }
            let pos = rng.random_range(0..buf.len());
            buf.remove(pos);
        } else if u < p_del + p_ins {
            let pos = rng.random_range(0..=buf.len());
            buf.insert(pos, rng.random_range(0..4u8));
        } else {
            if buf.len() == 0 {
                continue;
            }
            let pos = rng.random_range(0..buf.len());
            let old = buf.get(pos);
            let new = (old + rng.random_range(1..4u8)) & 3;
            buf.set(pos, new);
        }
        applied += 1;
    }
    Ok((DnaSequence::from_codes(&buf.into_codes()), applied))
}

/// Byte-per-base buffer split into chunks, with a Fenwick tree over chunk
/// lengths so positional insert/delete costs O(chunk + log chunks).
struct ChunkedBuf {
    chunks: Vec<Vec<u8>>,
    tree: Vec<usize>,
    len: usize,
}

const CHUNK: usize = 1024;

impl ChunkedBuf {
    fn new(codes: Vec<u8>) -> Self {
        let len = codes.len();
        let mut chunks: Vec<Vec<u8>> = codes.chunks(CHUNK).map(<[u8]>::to_vec).collect();
        if chunks.is_empty() {
            chunks.push(Vec::new());
        }
        let mut buf = ChunkedBuf { chunks, tree: Vec::new(), len };
        buf.rebuild();
        buf
    }

    fn len(&self) -> usize {
        self.len
    }

    fn rebuild(&mut self) {
        let n = self.chunks.len();
        self.tree = vec![0; n + 1];
        for i in 0..n {
            let idx = i + 1;
            self.tree[idx] += self.chunks[i].len();
            let parent = idx + (idx & idx.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[idx];
            }
        }
    }

    fn adjust(&mut self, chunk: usize, grow: bool) {
        let mut idx = chunk + 1;
        while idx < self.tree.len() {
            if grow {
                self.tree[idx] += 1;
            } else {
                self.tree[idx] -= 1;
            }
            idx += idx & idx.wrapping_neg();
        }
    }

    /// `(chunk, offset)` of element `pos < len`.
    fn locate(&self, pos: usize) -> (usize, usize) {
        let n = self.chunks.len();
        let mut idx = 0;
        let mut rem = pos;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = idx + step;
            if next <= n && self.tree[next] <= rem {
                idx = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        (idx, rem)
    }

    fn get(&self, pos: usize) -> u8 {
        let (c, o) = self.locate(pos);
        self.chunks[c][o]
    }

    fn set(&mut self, pos: usize, v: u8) {
        let (c, o) = self.locate(pos);
        self.chunks[c][o] = v;
    }

    fn insert(&mut self, pos: usize, v: u8) {
        let (c, o) = if pos == self.len {
            let last = self.chunks.len() - 1;
            (last, self.chunks[last].len())
        } else {
            self.locate(pos)
        };
        self.chunks[c].insert(o, v);
        self.len += 1;
        if self.chunks[c].len() > 2 * CHUNK {
            let tail = self.chunks[c].split_off(CHUNK);
            self.chunks.insert(c + 1, tail);
            self.rebuild();
        } else {
            self.adjust(c, true);
        }
    }

    fn remove(&mut self, pos: usize) {
        let (c, o) = self.locate(pos);
        self.chunks[c].remove(o);
        self.len -= 1;
        self.adjust(c, false);
    }

    fn into_codes(self) -> Vec<u8> {
        self.chunks.concat()
    }
}
