use lzsweep_core::ensemble::Numerics;
use lzsweep_core::scaling::{m_qubit_excitation, simulated_excitation};
use lzsweep_core::{EnsembleConfig, ScalingScenario};

#[test]
fn multichannel_simulation_agrees_with_estimate_within_factor_five() {
    let s = ScalingScenario {
        delta: 1.0,
        tau: 1.0,
        per_qubit_amplitude: 1.0,
        m_qubits: 4,
        margin: 10.0,
    };
    let estimate = m_qubit_excitation(&s).unwrap();
    // sweep at the noise-driven crossing rate √M·δ/τ
    let v = 2.0;
    let sim =
        simulated_excitation(&s, v, &EnsembleConfig::new(2000, 14), &Numerics::default()).unwrap();
    let ratio = sim.success_probability / estimate;
    assert!(
        ratio > 0.2 && ratio < 5.0,
        "simulated {} vs {estimate}",
        sim.success_probability
    );
}
