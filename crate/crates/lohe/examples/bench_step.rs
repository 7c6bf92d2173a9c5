//! Micro-benchmark of the unitary-pair stepping rate at the sizes the long
//! presets use. Run with --release for representative numbers.

use std::time::Instant;

use lohe::integrate::{CoupledState, FlowModel, IntegratorConfig, RetractionKind, Stepper};
use lohe::scenario::gen;

fn main() {
    let u = gen::gen_unitary_ensemble(25, 5, 1).unwrap();
    let v = gen::gen_unitary_ensemble(25, 5, 2).unwrap();
    let model = FlowModel::Dum { kappa: 1.0, h: None, g: None };
    let cfg = IntegratorConfig {
        dt: 1e-4,
        t_end: 10.0,
        retraction: RetractionKind::Polar,
        retract_every: 1,
        sample_every: 1_000_000,
        ..Default::default()
    };
    let mut stepper = Stepper::new(&model, CoupledState::new(vec![u, v]), &cfg).unwrap();
    for _ in 0..50 {
        stepper.advance().unwrap();
    }
    let start = Instant::now();
    let steps = 2000;
    for _ in 0..steps {
        stepper.advance().unwrap();
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "n=25, N=5 unitary pair: {:.1} us/step ({} steps in {:.3} s)",
        elapsed / steps as f64 * 1e6,
        steps,
        elapsed
    );
}
