//! Angular encoding: a real parameter vector becomes a brickwork circuit.
//!
//! The standard variant spends two parameters per qubit per rotation layer
//! (`Ry` then `Rx`) and entangles with `ZZMax` brickwork. The compact variant
//! spends three per qubit (`Rz Rx Rz`) and three per `Rxxyyzz` gate.
//! Mirror fidelity `|⟨0|U_B†U_A|0⟩|²` compares two encodings; the dense
//! simulator here computes it exactly for up to [`SIM_CAP`] qubits.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::calib::PairScorer;
use crate::error::{Error, Result};
use crate::rng;
use crate::rope::{encode, to_real, RopeParams};
use crate::seqio::DnaSequence;

pub const SIM_CAP: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
    ZZMax,
    Rxxyyzz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::ZZMax | GateKind::Rxxyyzz => 2,
            _ => 1,
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::H | GateKind::ZZMax => 0,
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Rxxyyzz => 3,
        }
    }
}

/// Gate with its applied (already scaled) angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
}

impl Gate {
    fn one(kind: GateKind, q: usize, params: Vec<f64>) -> Self {
        Gate { kind, qubits: vec![q], params }
    }

    fn dagger(&self) -> Vec<Gate> {
        match self.kind {
            GateKind::H => vec![self.clone()],
            // ZZMax³ = −ZZMax†; the global phase is invisible to fidelities
            GateKind::ZZMax => vec![self.clone(), self.clone(), self.clone()],
            _ => vec![Gate { params: self.params.iter().map(|p| -p).collect(), ..self.clone() }],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Single,
    Two,
}

/// Gates in time order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub gates: Vec<Gate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Compact,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "compact" => Ok(Variant::Compact),
            _ => Err(Error::invalid(format!("unknown circuit variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub width: usize,
    pub variant: Variant,
    pub scale: f64,
    /// Input parameters consumed.
    pub param_budget: usize,
    pub layers: Vec<Layer>,
}

/// `(⌊P/2Q⌋, ⌊P/2Q⌋ − 1)` rotation and entangling layers; a budget below
/// `2Q` still fills one partial rotation layer.
pub fn layer_counts(p: usize, q: usize) -> (usize, usize) {
    if p == 0 || q == 0 {
        return (0, 0);
    }
    let single = p / (2 * q);
    if single == 0 {
        (1, 0)
    } else {
        (single, single - 1)
    }
}

/// Disjoint pairs `(o, o+1), (o+2, o+3), …` with `o = layer % 2`; the
/// shifted layer wraps `(Q−1, 0)` only when `Q` is even.
pub fn brickwork_pairs(q: usize, layer: usize) -> Vec<(usize, usize)> {
    let offset = layer % 2;
    let mut pairs: Vec<(usize, usize)> = (offset..q.saturating_sub(1)).step_by(2).map(|a| (a, a + 1)).collect();
    if offset == 1 && q.is_multiple_of(2) && q > 2 {
        pairs.push((q - 1, 0));
    }
    if pairs.is_empty() && q >= 2 {
        pairs.push((0, 1));
    }
    pairs
}

fn check_build(params: &[f64], q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::invalid("angular circuits need at least 2 qubits"));
    }
    if params.is_empty() {
        return Err(Error::invalid("empty parameter vector"));
    }
    Ok(())
}

/// Standard variant. Layer `i` of rotations applies `Ry` then `Rx` to every
/// qubit; the first one is preceded by `H` on all qubits, and every second
/// rotation layer except the last is followed by `H` on all qubits.
/// Parameters left after the full layers go, in order, onto qubit `j/2` of
/// the last rotation layer, alternating `Ry` and `Rx`.
pub fn build_standard(params: &[f64], q: usize, scale: f64) -> Result<Circuit> {
    check_build(params, q)?;
    let (single, _) = layer_counts(params.len(), q);
    let full = params.len() / (2 * q);
    let mut it = params.iter().map(|p| p * scale);
    let mut layers = Vec::new();
    for i in 0..single {
        let mut gates = Vec::new();
        if i == 0 {
            gates.extend((0..q).map(|j| Gate::one(GateKind::H, j, vec![])));
        }
        if i < full {
            for j in 0..q {
                gates.push(Gate::one(GateKind::Ry, j, vec![it.next().expect("full layer")]));
                gates.push(Gate::one(GateKind::Rx, j, vec![it.next().expect("full layer")]));
            }
        }
        let last = i + 1 == single;
        if last {
            for (j, p) in it.by_ref().enumerate() {
                let kind = if j % 2 == 0 { GateKind::Ry } else { GateKind::Rx };
                gates.push(Gate::one(kind, j / 2, vec![p]));
            }
        }
        if (i + 1) % 2 == 0 && !last {
            gates.extend((0..q).map(|j| Gate::one(GateKind::H, j, vec![])));
        }
        layers.push(Layer { kind: LayerKind::Single, gates });
        if !last {
            let gates = brickwork_pairs(q, i).into_iter().map(|(a, b)| Gate { kind: GateKind::ZZMax, qubits: vec![a, b], params: vec![] }).collect();
            layers.push(Layer { kind: LayerKind::Two, gates });
        }
    }
    Ok(Circuit { width: q, variant: Variant::Standard, scale, param_budget: params.len(), layers })
}

/// Compact variant: `Rz Rx Rz` rotation layers alternate with `Rxxyyzz`
/// brickwork until the parameters run out. A final `Rxxyyzz` short of
/// parameters is padded with zero angles.
pub fn build_compact(params: &[f64], q: usize, scale: f64) -> Result<Circuit> {
    check_build(params, q)?;
    let mut it = params.iter().map(|p| p * scale).peekable();
    let mut layers = Vec::new();
    let mut two_layers = 0;
    while it.peek().is_some() {
        let mut gates = Vec::new();
        'single: for j in 0..q {
            for kind in [GateKind::Rz, GateKind::Rx, GateKind::Rz] {
                match it.next() {
                    Some(p) => gates.push(Gate::one(kind, j, vec![p])),
                    None => break 'single,
                }
            }
        }
        layers.push(Layer { kind: LayerKind::Single, gates });
        if it.peek().is_none() {
            break;
        }
        let mut gates = Vec::new();
        for (a, b) in brickwork_pairs(q, two_layers) {
            if it.peek().is_none() {
                break;
            }
            let angles = (0..3).map(|_| it.next().unwrap_or(0.0)).collect();
            gates.push(Gate { kind: GateKind::Rxxyyzz, qubits: vec![a, b], params: angles });
        }
        layers.push(Layer { kind: LayerKind::Two, gates });
        two_layers += 1;
    }
    Ok(Circuit { width: q, variant: Variant::Compact, scale, param_budget: params.len(), layers })
}

pub fn build(params: &[f64], q: usize, variant: Variant, scale: f64) -> Result<Circuit> {
    match variant {
        Variant::Standard => build_standard(params, q, scale),
        Variant::Compact => build_compact(params, q, scale),
    }
}

impl Circuit {
    pub fn empty(width: usize) -> Self {
        Circuit { width, variant: Variant::Standard, scale: 1.0, param_budget: 0, layers: Vec::new() }
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flat_map(|l| l.gates.iter())
    }

    pub fn count_layers(&self, kind: LayerKind) -> usize {
        self.layers.iter().filter(|l| l.kind == kind).count()
    }

    /// Rotation angle slots, including zero padding.
    pub fn param_slots(&self) -> usize {
        self.gates().map(|g| g.params.len()).sum()
    }

    /// `U†` up to a global phase.
    pub fn dagger(&self) -> Circuit {
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| Layer { kind: l.kind, gates: l.gates.iter().rev().flat_map(Gate::dagger).collect() })
            .collect();
        Circuit { layers, ..self.clone() }
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if self.width != other.width {
            return Err(Error::DimensionMismatch { left: self.width, right: other.width });
        }
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        Ok(Circuit { layers, param_budget: self.param_budget + other.param_budget, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.width];
            for g in &layer.gates {
                if g.qubits.len() != g.kind.arity() || g.params.len() != g.kind.param_count() {
                    return Err(Error::Format(format!("layer {li}: malformed {:?} gate", g.kind)));
                }
                if g.qubits.iter().any(|&q| q >= self.width) || (g.qubits.len() == 2 && g.qubits[0] == g.qubits[1]) {
                    return Err(Error::Format(format!("layer {li}: bad qubits {:?}", g.qubits)));
                }
                if layer.kind == LayerKind::Two {
                    if g.kind.arity() != 2 {
                        return Err(Error::Format(format!("layer {li}: single-qubit gate in a two-qubit layer")));
                    }
                    for &q in &g.qubits {
                        if std::mem::replace(&mut used[q], true) {
                            return Err(Error::Format(format!("layer {li}: qubit {q} used twice")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuits serialize")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let c: Circuit = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    pub width: usize,
    pub amps: Vec<Complex64>,
}

type M2 = [[Complex64; 2]; 2];
type M4 = [[Complex64; 4]; 4];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_matrix(kind: GateKind, a: f64) -> M2 {
    let (s, co) = (a / 2.0).sin_cos();
    match kind {
        GateKind::H => [[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]],
        GateKind::Rx => [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]],
        GateKind::Ry => [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]],
        GateKind::Rz => [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]],
        _ => unreachable!("two-qubit gate"),
    }
}

/// Local basis index `bit(first) | bit(second) << 1`.
fn pauli_pair(kind: usize) -> M4 {
    let mut m = [[c(0.0, 0.0); 4]; 4];
    for l in 0..4 {
        let parity = if (l & 1) ^ (l >> 1) == 1 { -1.0 } else { 1.0 };
        match kind {
            0 => m[l ^ 3][l] = c(1.0, 0.0),
            1 => m[l ^ 3][l] = c(-parity, 0.0),
            _ => m[l][l] = c(parity, 0.0),
        }
    }
    m
}

fn mat_mul(a: &M4, b: &M4) -> M4 {
    let mut out = [[c(0.0, 0.0); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn two_matrix(kind: GateKind, params: &[f64]) -> M4 {
    match kind {
        GateKind::ZZMax => {
            let zz = pauli_pair(2);
            let mut m = [[c(0.0, 0.0); 4]; 4];
            for l in 0..4 {
                m[l][l] = Complex64::from_polar(1.0, -FRAC_PI_4 * zz[l][l].re);
            }
            m
        }
        GateKind::Rxxyyzz => {
            // XX, YY and ZZ commute: exp(−iπ/2·Σ θ_P P) = Π (cos θ I − i sin θ P)
            let mut acc = [[c(0.0, 0.0); 4]; 4];
            (0..4).for_each(|l| acc[l][l] = c(1.0, 0.0));
            for (p, &angle) in params.iter().enumerate() {
                let theta = FRAC_PI_2 * angle;
                let pm = pauli_pair(p);
                let mut term = [[c(0.0, 0.0); 4]; 4];
                for i in 0..4 {
                    for j in 0..4 {
                        let id = if i == j { theta.cos() } else { 0.0 };
                        term[i][j] = c(id, 0.0) - c(0.0, theta.sin()) * pm[i][j];
                    }
                }
                acc = mat_mul(&term, &acc);
            }
            acc
        }
        _ => unreachable!("single-qubit gate"),
    }
}

impl Statevector {
    pub fn zero(width: usize) -> Result<Self> {
        if width > SIM_CAP {
            return Err(Error::WidthOverCap { width, cap: SIM_CAP });
        }
        let mut amps = vec![c(0.0, 0.0); 1 << width];
        amps[0] = c(1.0, 0.0);
        Ok(Statevector { width, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    fn apply_single(&mut self, m: &M2, q: usize) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_two(&mut self, m: &M4, qa: usize, qb: usize) {
        let (ba, bb) = (1usize << qa, 1usize << qb);
        let idx = |base: usize, l: usize| base | if l & 1 == 1 { ba } else { 0 } | if l & 2 == 2 { bb } else { 0 };
        for base in 0..self.amps.len() {
            if base & (ba | bb) != 0 {
                continue;
            }
            let v: [Complex64; 4] = std::array::from_fn(|l| self.amps[idx(base, l)]);
            for (r, row) in m.iter().enumerate() {
                self.amps[idx(base, r)] = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            }
        }
    }

    pub fn apply(&mut self, gate: &Gate) {
        match gate.kind.arity() {
            1 => {
                let a = gate.params.first().copied().unwrap_or(0.0);
                self.apply_single(&single_matrix(gate.kind, a), gate.qubits[0]);
            }
            _ => self.apply_two(&two_matrix(gate.kind, &gate.params), gate.qubits[0], gate.qubits[1]),
        }
    }

    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        if self.width != other.width {
            return Err(Error::DimensionMismatch { left: self.width, right: other.width });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }
}

/// `U|0…0⟩`.
pub fn simulate(circuit: &Circuit) -> Result<Statevector> {
    let mut state = Statevector::zero(circuit.width)?;
    for g in circuit.gates() {
        state.apply(g);
    }
    Ok(state)
}

/// `|⟨ψ_B|ψ_A⟩|²` from two independent simulations.
pub fn mirror_fidelity_exact(a: &[f64], b: &[f64], q: usize, variant: Variant, scale: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let sa = simulate(&build(a, q, variant, scale)?)?;
    let sb = simulate(&build(b, q, variant, scale)?)?;
    Ok(sb.inner(&sa)?.norm_sqr())
}

/// Return probability of `U_B†U_A|0⟩` to `|0…0⟩`, simulated as one circuit.
pub fn mirror_fidelity_circuit(a: &[f64], b: &[f64], q: usize, variant: Variant, scale: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let mirror = build(a, q, variant, scale)?.then(&build(b, q, variant, scale)?.dagger())?;
    Ok(simulate(&mirror)?.amps[0].norm_sqr())
}

/// Zero-state count among `shots` measurements with return probability `p`.
pub fn sample_shots(p: f64, shots: u64, seed: u64) -> Result<u64> {
    sample_shots_with(p, shots, &mut rng::seeded(seed))
}

pub(crate) fn sample_shots_with(p: f64, shots: u64, rng: &mut rng::Rng) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    if shots == 0 {
        return Err(Error::invalid("at least one shot"));
    }
    let dist = Binomial::new(shots, p).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Mirror fidelity of Angular circuits built from RoPE encodings.
#[derive(Clone, Copy, Debug)]
pub struct AngularScorer {
    pub rope: RopeParams,
    pub qubits: usize,
    pub variant: Variant,
    pub scale: f64,
}

impl PairScorer for AngularScorer {
    fn score(&self, a: &DnaSequence, b: &DnaSequence) -> Result<f64> {
        let wa = to_real(&encode(a, &self.rope)?)?;
        let wb = to_real(&encode(b, &self.rope)?)?;
        mirror_fidelity_exact(&wa, &wb, self.qubits, self.variant, self.scale)
    }

    fn describe(&self) -> String {
        format!("angular {:?} q={} scale={} over rope {}", self.variant, self.qubits, self.scale, self.rope).to_lowercase()
    }
}
