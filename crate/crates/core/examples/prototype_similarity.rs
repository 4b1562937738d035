//! Cosine similarity between unseen-class prototypes of two models, written as
//! CSV heat-map data.

use placeholder_zsl::dataset::{generate_synthetic, SynthConfig};
use placeholder_zsl::eval::prototype_similarity;
use placeholder_zsl::prototype::{project_prototypes, train_prototypes, TrainConfig, TrainMode};

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let unseen = ds.split().unseen.clone();
    let out = std::env::temp_dir().join("pzsl-example-similarity");
    std::fs::create_dir_all(&out).map_err(|e| placeholder_zsl::Error::io(&out, e))?;

    for mode in [TrainMode::S2vBaseline, TrainMode::EpOnly] {
        let model = train_prototypes(&ds, &TrainConfig { mode, ..TrainConfig::default() })?;
        let protos = project_prototypes(&model, ds.attributes(), &unseen)?;
        let sim = prototype_similarity(&protos, &unseen)?;
        let path = out.join(format!("{}.csv", mode.name()));
        std::fs::write(&path, sim.to_csv()).map_err(|e| placeholder_zsl::Error::io(&path, e))?;
        println!("{:<14} mean off-diagonal {:+.4} -> {}", mode.name(), sim.mean_off_diagonal(), path.display());
    }
    Ok(())
}
