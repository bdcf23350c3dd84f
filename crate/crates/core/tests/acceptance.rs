//! Acceptance criteria, each at its stated scale and tolerance.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers as
//! arguments (`-- 3 9`) to run a subset. Prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use ropedna::angular::{self, layer_counts, AngularScorer, Variant};
use ropedna::auth::{self, AuthConfig, Encoder};
use ropedna::calib::{self, RopeScorer};
use ropedna::rng;
use ropedna::rope::{self, encode, encode_matrix_form, Factor, RopeParams};
use ropedna::rotormap::{self, MatchOutcome};
use ropedna::seqio::{mutate, random_dna, DnaSequence, FastaRecord, MutationSpec};
use ropedna::stats::spearman;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn ac1_rmse() -> Outcome {
    let (n, params) = (20_000, RopeParams::new(5, 4));
    let grid: Vec<f64> = (1..=49).map(|i| i as f64 / 100.0).collect();
    let curve = calib::fit_curve(n, &params, &grid, 40, 101).unwrap();
    let mut r = rng::seeded(102);
    let rates: Vec<f64> = (0..500).map(|_| r.random_range(0.01..0.25)).collect();
    let table = calib::rmse(&curve, &params, &rates, 1, 103).unwrap();
    let pooled = table.pooled_below(0.25).unwrap();
    outcome(pooled < 0.015, format!("dim {} N {n}: pooled RMSE {pooled:.5} over 500 pairs (< 0.015)", params.dim()))
}

fn ac2_long_strings() -> Outcome {
    let params = RopeParams::new(5, 2);
    let rates = calib::uniform_rates(100, 0.0, 0.5, 201);
    let pts = calib::scatter(&RopeScorer(params), 1_000_000, &rates, 202, false).unwrap();
    let fids: Vec<f64> = pts.iter().map(|p| p.fidelity).collect();
    let rho = spearman(&rates, &fids);
    outcome(rho <= -0.95, format!("N 1e6 dim {}: Spearman {rho:.4} (≤ −0.95)", params.dim()))
}

fn ac3_matrix_form() -> Outcome {
    let mut r = rng::seeded(301);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let s = r.random_range(1..=3);
        let m = r.random_range(1..=2);
        let n = r.random_range(s..=200);
        let seq = random_dna(n, 3000 + case);
        let p = RopeParams::new(s, m);
        let (a, b) = (encode(&seq, &p).unwrap(), encode_matrix_form(&seq, &p).unwrap());
        assert_eq!(a.is_degenerate(), b.is_degenerate());
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            worst = worst.max((x - y).norm());
        }
    }
    outcome(worst <= 1e-9, format!("100 cases s≤3 m≤2 N≤200: max amplitude gap {worst:.2e} (≤ 1e-9)"))
}

fn slide_error(reference: &DnaSequence, start: usize, query: &rope::RopeEncoding, steps: usize) -> f64 {
    let n = query.source_length();
    let mut state = rotormap::init_slide(reference, start, query).unwrap();
    let mut worst = 0.0f64;
    for step in 0..=steps {
        if step % 500 == 0 || step == steps {
            let window = encode(&reference.slice(start + step, n).unwrap(), query.params()).unwrap();
            worst = worst.max((state.fidelity().unwrap() - rope::fidelity(query, &window).unwrap()).abs());
        }
        if step < steps {
            rotormap::slide_update(&mut state, reference).unwrap();
        }
    }
    worst
}

fn ac4_slide() -> Outcome {
    let reference = random_dna(30_000, 401);
    let mut codes = random_dna(30_000, 402).to_codes();
    codes[10_000..16_000].iter_mut().for_each(|c| *c = 0);
    let homopolymer = DnaSequence::from_codes(&codes);
    let n = 4_000;
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    let cases: [(&str, &DnaSequence, RopeParams, usize); 4] = [
        ("default", &reference, RopeParams::new(5, 4), 5_000),
        ("fine", &reference, RopeParams::fine_tuned(6, 4).with_fold(4), 5_000),
        ("fine homopolymer", &homopolymer, RopeParams::fine_tuned(4, 4), 5_000),
        ("default homopolymer", &homopolymer, RopeParams::new(3, 2), 5_000),
    ];
    for (name, reference, params, steps) in cases {
        let (q, _) = mutate(&reference.slice(9_000, n + 200).unwrap(), &MutationSpec::new(0.05, 7)).unwrap();
        let query = encode(&q.slice(0, n).unwrap(), &params).unwrap();
        let e = slide_error(reference, 8_500, &query, steps);
        worst = worst.max(e);
        lines.push(format!("{name} {e:.1e}"));
    }
    outcome(worst <= 1e-6, format!("5000 slides, N {n}: {} (≤ 1e-6)", lines.join(", ")))
}

fn ac5_degeneracy() -> Outcome {
    let all_a = DnaSequence::from_codes(&vec![0u8; 20_000]);
    let default = encode(&all_a, &RopeParams::new(1, 4)).unwrap();
    let fine_params = RopeParams::fine_tuned(1, 4);
    let fine = encode(&all_a, &fine_params).unwrap();
    let want = [1.0, 5.0 / 3.0, 7.0 / 3.0, 3.0];
    let factors: Vec<f64> = fine_params.factors().iter().map(Factor::value).collect();
    let exact = factors.iter().zip(want).all(|(f, w)| (f - w).abs() < 1e-15);
    let pass = default.is_degenerate() && !fine.is_degenerate() && exact;
    outcome(
        pass,
        format!("all-A N 20000: default degenerate={}, fine-tuned degenerate={}, factors {factors:.4?}", default.is_degenerate(), fine.is_degenerate()),
    )
}

fn ac6_rayleigh() -> Outcome {
    let (n, trials) = (10_000usize, 1_000u64);
    // positions uniform over a large ring give phases uniform on the circle
    let ring = 1usize << 30;
    let unit = Factor { num: 1, den: 1 };
    let locs = Uniform::new(0, ring as i64).unwrap();
    let moduli: Vec<f64> = (0..trials)
        .map(|t| {
            let mut r = rng::stream(601, t);
            (0..n).map(|_| unit.phasor(ring, locs.sample(&mut r))).sum::<Complex64>().norm()
        })
        .collect();
    let mean = moduli.iter().sum::<f64>() / trials as f64;
    let want = (n as f64 * PI).sqrt() / 2.0;
    let rel = (mean - want).abs() / want;
    outcome(rel <= 0.05, format!("mean modulus {mean:.2} vs {want:.2} (rel {:.3}, ≤ 0.05)", rel))
}

/// `count` reads: 21 kb sources mutated at `rate`, cut to their first
/// `n` bases, every second one reverse complemented. Returns reads and true offsets.
fn planted_reads(reference: &DnaSequence, count: usize, n: usize, rate: f64, seed: u64) -> (Vec<FastaRecord>, Vec<usize>) {
    let src = n + n / 20;
    let mut r = rng::seeded(seed);
    let mut reads = Vec::with_capacity(count);
    let mut truth = Vec::with_capacity(count);
    for i in 0..count {
        let start = r.random_range(0..=reference.len() - src);
        let (m, _) = mutate(&reference.slice(start, src).unwrap(), &MutationSpec::new(rate, rng::child_seed(seed, i as u64))).unwrap();
        let head = m.slice(0, n).unwrap();
        let seq = if i % 2 == 1 { head.reverse_complement() } else { head };
        reads.push(FastaRecord { name: format!("read{i}"), seq });
        truth.push(start);
    }
    (reads, truth)
}

fn ac7_mapping() -> Outcome {
    let reference = random_dna(10_000_000, 701);
    let params = RopeParams::fine_tuned(8, 4).with_fold(4);
    let index = rotormap::build_index(&reference, "random", 20_000, 1_250, &params).unwrap();
    let (reads, truth) = planted_reads(&reference, 1_000, 20_000, 0.2, 702);
    let results = rotormap::search_top1(&index, &reads, true).unwrap();
    let mut correct = 0;
    for ((read, res), &t) in reads.iter().zip(results).zip(&truth) {
        let res = res.unwrap();
        let found = res.best().unwrap().offset as usize;
        let head = if res.strand == Some(rotormap::Strand::Reverse) { read.seq.reverse_complement() } else { read.seq.clone() };
        if rotormap::match_outcome(&reference, &head, found, t).unwrap() == MatchOutcome::Overlap {
            correct += 1;
        }
    }
    let frac = correct as f64 / reads.len() as f64;
    outcome(frac >= 0.99, format!("10^7 bp, {} fragments, 1000 reads at 0.2: {correct}/1000 overlap (≥ 99%)", index.len()))
}

fn ac8_refinement() -> Outcome {
    let n = 20_000;
    let reference = random_dna(2_000_000, 801);
    let params = RopeParams::new(7, 4);
    let mut r = rng::seeded(802);
    let mut hits = 0;
    let trials = 200;
    for i in 0..trials {
        let truth = r.random_range(700..reference.len() - n - 700);
        let spec = MutationSpec { mix: (0.0, 0.0, 1.0), ..MutationSpec::new(0.05, rng::child_seed(803, i)) };
        let (read, _) = mutate(&reference.slice(truth, n).unwrap(), &spec).unwrap();
        let approx = (truth as i64 + r.random_range(-600..=600)) as usize;
        let query = encode(&read, &params).unwrap();
        let found = rotormap::refine(&reference, &query, approx, 600, 1).unwrap();
        if found.offset.abs_diff(truth) <= n / 1000 {
            hits += 1;
        }
    }
    let frac = hits as f64 / trials as f64;
    outcome(frac >= 0.95, format!("{hits}/{trials} within {} bp from a coarse hit ≤ 600 bp off (≥ 95%)", n / 1000))
}

fn ac9_layers() -> Outcome {
    let (a, b) = (layer_counts(1024, 20), layer_counts(1024, 56));
    outcome(a == (25, 24) && b == (9, 8), format!("layer_counts(1024, 20) = {a:?}, layer_counts(1024, 56) = {b:?}"))
}

fn ac10_angular() -> Outcome {
    let rope = RopeParams::new(4, 2);
    let scorer = AngularScorer { rope, qubits: 14, variant: Variant::Standard, scale: 1.0 };
    let rates: Vec<f64> = (0..64).map(|i| 0.0025 + i as f64 * 0.0039).collect();
    let pts = calib::scatter(&scorer, 20_000, &rates, 1001, false).unwrap();
    let fids: Vec<f64> = pts.iter().map(|p| p.fidelity).collect();
    let rho = spearman(&rates, &fids);

    let w = rope::to_real(&encode(&random_dna(20_000, 1002), &rope).unwrap()).unwrap();
    let exact = angular::mirror_fidelity_exact(&w, &w, 14, Variant::Standard, 1.0).unwrap();
    let circuit = angular::mirror_fidelity_circuit(&w, &w, 14, Variant::Standard, 1.0).unwrap();
    let identity = (exact - 1.0).abs().max((circuit - 1.0).abs());
    outcome(rho <= -0.9 && identity <= 1e-9, format!("64 pairs Q 14: Spearman {rho:.4} (≤ −0.9), mirror identity off by {identity:.1e} (≤ 1e-9)"))
}

fn ac11_auth() -> Outcome {
    let shots = auth::required_shots(0.01, 0.35).unwrap();
    let config = AuthConfig::calibrated(20_000, 0.1, 0.3, 0.01, RopeParams::new(5, 4), Encoder::Ideal, None, 100, 1101).unwrap();
    let report = auth::simulate_protocol(&config, 500, 1102).unwrap();
    let cost = auth::qubit_cost(12, 76);
    let pass = shots == 76 && report.false_reject_rate <= 0.02 && report.false_accept_rate <= 0.02 && cost == 912;
    outcome(
        pass,
        format!(
            "required_shots(0.01, 0.35) = {shots}; calibrated f_a {:.3} f_b {:.3} → {} shots, 500 trials: FRR {:.3} FAR {:.3} (≤ 0.02); 12·76 = {cost}",
            config.f_a, config.f_b, config.shots, report.false_reject_rate, report.false_accept_rate
        ),
    )
}

fn timed(seq: &DnaSequence, params: &RopeParams) -> Duration {
    let t = Instant::now();
    std::hint::black_box(encode(seq, params).unwrap());
    t.elapsed()
}

fn ac12_linear_time() -> Outcome {
    let params = RopeParams::new(5, 4);
    let (short, long) = (random_dna(1_000_000, 1201), random_dna(2_000_000, 1202));
    // one worker, so the ratio measures work rather than idle cores
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    // short and long alternate so both sizes see the same machine state; the
    // median per-round ratio ignores rounds hit by a frequency or scheduling blip
    let mut rounds: Vec<(Duration, Duration)> = pool.install(|| {
        timed(&short, &params);
        (0..9).map(|_| (timed(&short, &params), timed(&long, &params))).collect()
    });
    rounds.sort_by(|a, b| (a.1.as_secs_f64() / a.0.as_secs_f64()).total_cmp(&(b.1.as_secs_f64() / b.0.as_secs_f64())));
    let (t1, t2) = rounds[rounds.len() / 2];
    let ratio = t2.as_secs_f64() / t1.as_secs_f64();
    outcome((1.6..=2.6).contains(&ratio), format!("{:.1} ms vs {:.1} ms: median ratio {ratio:.3} over 9 rounds (in [1.6, 2.6])", t1.as_secs_f64() * 1e3, t2.as_secs_f64() * 1e3))
}

fn main() -> ExitCode {
    let checks: [(u32, &str, Check); 12] = [
        (1, "correlation RMSE", ac1_rmse),
        (2, "long-string scaling", ac2_long_strings),
        (3, "matrix-form oracle", ac3_matrix_form),
        (4, "incremental slide oracle", ac4_slide),
        (5, "degeneracy and fine-tuned fix", ac5_degeneracy),
        (6, "Rayleigh statistic", ac6_rayleigh),
        (7, "mapping on random reference", ac7_mapping),
        (8, "refinement", ac8_refinement),
        (9, "Angular layer arithmetic", ac9_layers),
        (10, "Angular correlation preservation", ac10_angular),
        (11, "authentication", ac11_auth),
        (12, "linear-time encoding", ac12_linear_time),
    ];
    // cargo passes harness flags such as --nocapture; only bare numbers select criteria
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} AC{id:<2} {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
