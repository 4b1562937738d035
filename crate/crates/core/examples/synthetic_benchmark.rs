//! Generate the default synthetic benchmark, save it in both file formats and
//! load it back.

use placeholder_zsl::dataset::{generate_synthetic_with_truth, load_dataset_dir, save_dataset, DatasetFormat, SynthConfig};

fn main() -> placeholder_zsl::Result<()> {
    let bench = generate_synthetic_with_truth(&SynthConfig::default())?;
    let ds = &bench.dataset;
    let split = ds.split();
    println!(
        "{} samples, {} seen + {} unseen classes, features {}-d, attributes {}-d",
        ds.num_samples(),
        split.seen.len(),
        split.unseen.len(),
        ds.feature_dim(),
        ds.attribute_dim()
    );
    println!(
        "train {} / test seen {} / test unseen {}",
        split.train.len(),
        split.test_seen.len(),
        split.test_unseen.len()
    );
    println!("hidden map G is {:?}", bench.ground_truth_map.shape());

    let dir = std::env::temp_dir().join("pzsl-example-benchmark");
    for format in [DatasetFormat::Csv, DatasetFormat::Binary] {
        let out = dir.join(format!("{format:?}").to_lowercase());
        save_dataset(ds, &out, format)?;
        let back = load_dataset_dir(&out)?;
        println!("{format:?} round trip at {}: identical = {}", out.display(), back.fingerprint() == ds.fingerprint());
    }
    Ok(())
}
