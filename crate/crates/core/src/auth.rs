//! One-way DNA authentication with a gap promise.
//!
//! The verifier holds a DNA string; the prover sends copies of a quantum
//! encoding of theirs. An honest prover's string is within `a` edits and an
//! impostor's is at least `b` edits away. The verifier measures the mirror
//! (return-to-zero) outcome on each shot and accepts when the zero frequency
//! reaches the midpoint of the calibrated fidelities `f_a` and `f_b`.
//! Hoeffding's inequality fixes the shot budget at `⌈−2 ln ε / Δf²⌉`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{sample_shots_with, AngularScorer, Variant};
use crate::calib::{fit_curve_with, PairScorer, RopeScorer};
use crate::error::{Error, Result};
use crate::rng;
use crate::rope::RopeParams;
use crate::seqio::{mutate, random_dna_with, MutationSpec};

/// `⌈−2·ln ε / Δf²⌉`.
pub fn required_shots(epsilon: f64, delta_f: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(delta_f > 0.0 && delta_f <= 1.0) {
        return Err(Error::invalid(format!("fidelity gap {delta_f} outside (0, 1]")));
    }
    Ok((-2.0 * epsilon.ln() / (delta_f * delta_f) - 1e-12).ceil() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// Accepts iff `zero_count/shots ≥ (f_a + f_b)/2`.
pub fn decide(zero_count: u64, shots: u64, f_a: f64, f_b: f64) -> Decision {
    assert!(shots > 0, "decide needs at least one shot");
    if zero_count as f64 / shots as f64 >= (f_a + f_b) / 2.0 {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// How the prover's state is prepared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Encoder {
    /// Amplitude encoding of the RoPE vector itself.
    Ideal,
    /// Angular circuit fed with the real RoPE vector.
    Angular { qubits: usize, variant: Variant, scale: f64 },
}

/// How zero-state counts are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotModel {
    /// Binomial draws with the computed shot budget.
    Sampled,
    /// Threshold the exact fidelity (the infinite-shot limit).
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthConfig {
    pub n: usize,
    pub a_rate: f64,
    pub b_rate: f64,
    pub epsilon: f64,
    pub rope: RopeParams,
    pub encoder: Encoder,
    /// Multiplies every return probability; `None` is noiseless.
    pub noise_factor: Option<f64>,
    pub shot_model: ShotModel,
    pub f_a: f64,
    pub f_b: f64,
    pub shots: u64,
}

impl AuthConfig {
    /// Calibrates `f_a` and `f_b` by fitting the encoder's fidelity at both
    /// rates, then sets the shot budget from their (noise-scaled) gap.
    #[allow(clippy::too_many_arguments)]
    pub fn calibrated(
        n: usize,
        a_rate: f64,
        b_rate: f64,
        epsilon: f64,
        rope: RopeParams,
        encoder: Encoder,
        noise_factor: Option<f64>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0 < a_rate && a_rate < b_rate && b_rate < 0.5) {
            return Err(Error::invalid("need 0 < a/N < b/N < 0.5"));
        }
        if let Some(f) = noise_factor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid("noise factor must lie in (0, 1]"));
            }
        }
        let scorer = scorer_for(rope, encoder);
        let curve = fit_curve_with(scorer.as_ref(), n, &[a_rate, b_rate], samples, seed)?;
        let noise = noise_factor.unwrap_or(1.0);
        let (f_a, f_b) = (curve.fidelity_at(a_rate) * noise, curve.fidelity_at(b_rate) * noise);
        let mut cfg = AuthConfig {
            n,
            a_rate,
            b_rate,
            epsilon,
            rope,
            encoder,
            noise_factor,
            shot_model: ShotModel::Sampled,
            f_a,
            f_b,
            shots: 0,
        };
        cfg.shots = required_shots(epsilon, f_a - f_b)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.a_rate * self.n as f64, self.b_rate * self.n as f64);
        if !(0.0 < a && a < b && b < self.n as f64) {
            return Err(Error::invalid("need 0 < a < b < N"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::invalid("epsilon must lie in (0, 0.5)"));
        }
        if self.f_a <= self.f_b {
            return Err(Error::invalid(format!("calibrated fidelities not separated: f_a={} f_b={}", self.f_a, self.f_b)));
        }
        if self.shots == 0 {
            return Err(Error::invalid("zero shot budget"));
        }
        self.rope.validate()
    }

    /// Qubits per transmitted copy.
    pub fn qubits(&self) -> usize {
        match self.encoder {
            Encoder::Ideal => self.rope.qubits(),
            Encoder::Angular { qubits, .. } => qubits,
        }
    }

    /// Total qubits sent: `qubits · shots`.
    pub fn qubit_cost(&self) -> u64 {
        qubit_cost(self.qubits(), self.shots)
    }
}

pub fn qubit_cost(qubits: usize, shots: u64) -> u64 {
    qubits as u64 * shots
}

fn scorer_for(rope: RopeParams, encoder: Encoder) -> Box<dyn PairScorer> {
    match encoder {
        Encoder::Ideal => Box::new(RopeScorer(rope)),
        Encoder::Angular { qubits, variant, scale } => Box::new(AngularScorer { rope, qubits, variant, scale }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthReport {
    pub trials: usize,
    pub honest_trials: usize,
    pub impostor_trials: usize,
    pub false_reject_rate: f64,
    pub false_accept_rate: f64,
    pub honest_mean_fidelity: f64,
    pub impostor_mean_fidelity: f64,
    pub shots: u64,
    pub qubits: usize,
    pub qubit_cost: u64,
    /// Trials redrawn because an encoding was degenerate.
    pub redrawn: usize,
}

const MAX_REDRAWS: usize = 16;

/// Runs `trials` protocol rounds; even rounds have an honest prover.
pub fn simulate_protocol(config: &AuthConfig, trials: usize, seed: u64) -> Result<AuthReport> {
    config.validate()?;
    if trials < 100 {
        return Err(Error::invalid("at least 100 trials"));
    }
    let scorer = scorer_for(config.rope, config.encoder);
    let noise = config.noise_factor.unwrap_or(1.0);
    let outcomes: Vec<(bool, f64, Decision, usize)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let honest = t % 2 == 0;
            let rate = if honest { config.a_rate } else { config.b_rate };
            let mut r = rng::stream(seed, t as u64);
            for redraw in 0..MAX_REDRAWS {
                let verifier = random_dna_with(config.n, &mut r);
                let prover = mutate(&verifier, &MutationSpec::new(rate, r.next_u64()))?.0;
                let fid = match scorer.score(&verifier, &prover) {
                    Ok(f) => (f * noise).clamp(0.0, 1.0),
                    Err(Error::Degenerate) => continue,
                    Err(e) => return Err(e),
                };
                let decision = match config.shot_model {
                    ShotModel::Sampled => decide(sample_shots_with(fid, config.shots, &mut r)?, config.shots, config.f_a, config.f_b),
                    ShotModel::Exact => {
                        if fid >= (config.f_a + config.f_b) / 2.0 {
                            Decision::Accept
                        } else {
                            Decision::Reject
                        }
                    }
                };
                return Ok((honest, fid, decision, redraw));
            }
            Err(Error::Degenerate)
        })
        .collect::<Result<_>>()?;
    let honest: Vec<_> = outcomes.iter().filter(|o| o.0).collect();
    let impostor: Vec<_> = outcomes.iter().filter(|o| !o.0).collect();
    let rate_of = |set: &[&(bool, f64, Decision, usize)], d: Decision| set.iter().filter(|o| o.2 == d).count() as f64 / set.len() as f64;
    let mean_of = |set: &[&(bool, f64, Decision, usize)]| set.iter().map(|o| o.1).sum::<f64>() / set.len() as f64;
    Ok(AuthReport {
        trials,
        honest_trials: honest.len(),
        impostor_trials: impostor.len(),
        false_reject_rate: rate_of(&honest, Decision::Reject),
        false_accept_rate: rate_of(&impostor, Decision::Accept),
        honest_mean_fidelity: mean_of(&honest),
        impostor_mean_fidelity: mean_of(&impostor),
        shots: config.shots,
        qubits: config.qubits(),
        qubit_cost: config.qubit_cost(),
        redrawn: outcomes.iter().map(|o| o.3).sum(),
    })
}
