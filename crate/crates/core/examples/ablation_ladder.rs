//! The five-rung ablation ladder, run through the same entry point as
//! `pzsl ablate`.

use placeholder_zsl::cli::{execute, Invocation, RunConfig};
use placeholder_zsl::dataset::{generate_synthetic, save_dataset, DatasetFormat};

fn main() -> placeholder_zsl::Result<()> {
    let cfg = RunConfig::load_or_default(None)?;
    let root = std::env::temp_dir().join("pzsl-example-ablation");
    let data = root.join("data");
    save_dataset(&generate_synthetic(&cfg.synth)?, &data, DatasetFormat::Binary)?;

    let inv = Invocation::Ablate { data, out: root.join("ablate"), seeds: 2 };
    // prints the mean ± sd table as it goes
    let outcome = execute(&inv, &cfg)?;
    println!("{} files written under {}", outcome.outputs.len(), root.join("ablate").display());
    Ok(())
}
