mod common;

use std::time::Instant;

use common::sweep::{self, Worst};

fn check(worst: &[Worst], composite_tol: f64) {
    for w in worst {
        println!(
            "{:<24} max rel err {:.3e} (seed {}), {} entries, {} skipped at kinks",
            w.name, w.max_rel_error, w.seed, w.entries, w.skipped
        );
        let tol = if w.composite { composite_tol } else { 1e-4 };
        assert!(w.max_rel_error < tol, "{} exceeded {}: {:?}", w.name, tol, w);
        assert!(w.skipped * 100 <= w.entries, "{} skipped too many entries", w.name);
    }
    for name in ["generator", "discriminator_params", "discriminator_input", "conv1d", "layer_norm"] {
        assert!(worst.iter().any(|w| w.name == name), "{} not checked", name);
    }
}

#[test]
fn twenty_seeds_at_step_1e_4() {
    let start = Instant::now();
    let worst = sweep::run(0..20, sweep::STEP).unwrap();
    check(&worst, 1e-3);
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "gradient sweep took {:.1}s", secs);
}

#[test]
fn two_hundred_seeds_at_fine_step() {
    let worst = sweep::run(0..200, sweep::FINE_STEP).unwrap();
    check(&worst, 1e-4);
}
