//! Encodings as quantum circuits.
//!
//! Builds the brickwork Angular circuit for two RoPE encodings, runs one
//! followed by the inverse of the other on the statevector simulator and
//! samples how often the register returns to all zeros.

use ropedna::angular::{build, mirror_fidelity_circuit, mirror_fidelity_exact, sample_shots, simulate, LayerKind, Variant};
use ropedna::rope::{encode, fidelity, to_real, RopeParams};
use ropedna::seqio::{mutate, random_dna, MutationSpec};

fn main() -> ropedna::Result<()> {
    let rope = RopeParams::new(4, 2);
    let a = random_dna(20_000, 2);
    let (b, _) = mutate(&a, &MutationSpec::new(0.05, 3))?;
    let (ea, eb) = (encode(&a, &rope)?, encode(&b, &rope)?);
    let (wa, wb) = (to_real(&ea)?, to_real(&eb)?);

    for (variant, q) in [(Variant::Standard, 14), (Variant::Compact, 12)] {
        let c = build(&wa, q, variant, 1.0)?;
        println!(
            "{variant:?} on {q} qubits: {} rotation layers, {} entangling layers, {} gates, norm {:.12}",
            c.count_layers(LayerKind::Single),
            c.count_layers(LayerKind::Two),
            c.gates().count(),
            simulate(&c)?.norm()
        );
    }

    let rope_f = fidelity(&ea, &eb)?;
    let exact = mirror_fidelity_exact(&wa, &wb, 14, Variant::Standard, 1.0)?;
    let via_circuit = mirror_fidelity_circuit(&wa, &wb, 14, Variant::Standard, 1.0)?;
    let zeros = sample_shots(exact, 1_000, 4)?;
    println!("RoPE fidelity {rope_f:.4}; mirror fidelity {exact:.6} (U_b† U_a circuit: {via_circuit:.6}); {zeros}/1000 zero outcomes");
    println!("identity mirror: {:.12}", mirror_fidelity_exact(&wa, &wa, 14, Variant::Standard, 1.0)?);
    Ok(())
}
