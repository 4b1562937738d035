//! Sweep the calibration factor and watch seen accuracy trade against unseen
//! accuracy.

use placeholder_zsl::dataset::{generate_synthetic, SynthConfig};
use placeholder_zsl::eval::{cs_sweep, default_delta_grid, harmonic_mean};
use placeholder_zsl::prototype::{train_prototypes, TrainConfig, TrainMode};

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let model = train_prototypes(&ds, &TrainConfig { mode: TrainMode::EpEi, ..TrainConfig::default() })?;
    let sweep = cs_sweep(&model.net, &ds, &default_delta_grid())?;
    for r in sweep.reports.iter().step_by(5) {
        println!("delta {:.2}  U {:.3}  S {:.3}  H {:.3}", r.delta, r.u.unwrap(), r.s.unwrap(), r.h.unwrap());
    }
    println!("best: {}", sweep.best().summary());
    println!("H(74.6, 82.6) = {:.1}", harmonic_mean(74.6, 82.6));
    Ok(())
}
