//! Standalone scalar phase-oscillator integrator used as an independent
//! cross-check of the 1×1 unitary reduction. Deliberately shares nothing with
//! the tensor machinery: plain angles, plain RK4.

/// dθ_j/dt = (g/N) Σ_k sin(θ_k − θ_j), all-to-all.
fn rhs(phases: &[f64], gain: f64) -> Vec<f64> {
    let n = phases.len() as f64;
    phases
        .iter()
        .map(|&tj| phases.iter().map(|&tk| (tk - tj).sin()).sum::<f64>() * gain / n)
        .collect()
}

/// Integrate the all-to-all sine flow, returning the phases at every
/// `sample_every`-th step (including t = 0).
pub fn integrate_phases(
    init: &[f64],
    gain: f64,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Vec<Vec<f64>> {
    let mut phases = init.to_vec();
    let mut out = vec![phases.clone()];
    let n = phases.len();
    for step in 1..=steps {
        let k1 = rhs(&phases, gain);
        let mut s = vec![0.0; n];
        for i in 0..n {
            s[i] = phases[i] + 0.5 * dt * k1[i];
        }
        let k2 = rhs(&s, gain);
        for i in 0..n {
            s[i] = phases[i] + 0.5 * dt * k2[i];
        }
        let k3 = rhs(&s, gain);
        for i in 0..n {
            s[i] = phases[i] + dt * k3[i];
        }
        let k4 = rhs(&s, gain);
        for i in 0..n {
            phases[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if step % sample_every == 0 || step == steps {
            out.push(phases.clone());
        }
    }
    out
}
