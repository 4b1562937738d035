//! The full two-stage pipeline on the synthetic benchmark, compared with the
//! plain baseline.

use placeholder_zsl::dataset::{generate_synthetic, SynthConfig};
use placeholder_zsl::eval::{cs_sweep, default_delta_grid};
use placeholder_zsl::prototype::{train_prototypes, TrainConfig, TrainMode};
use placeholder_zsl::sof::{refine_features, train_sof, SofConfig};

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;

    let baseline = train_prototypes(&ds, &TrainConfig { mode: TrainMode::S2vBaseline, ..TrainConfig::default() })?;
    let best = cs_sweep(&baseline.net, &ds, &default_delta_grid())?.best().clone();
    println!("s2v baseline: {}", best.summary());

    let sof = train_sof(&ds, &SofConfig::default())?;
    let refined = refine_features(&ds, &sof.params)?;
    let full = train_prototypes(&refined, &TrainConfig::default())?;
    let best = cs_sweep(&full.net, &refined, &default_delta_grid())?.best().clone();
    println!("full model:   {}", best.summary());
    println!("final training loss {:.4}", full.loss_trace.last().unwrap());
    Ok(())
}
