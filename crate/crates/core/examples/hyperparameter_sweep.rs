//! Unseen accuracy as the neighbour count n and the temperature sigma vary.

use placeholder_zsl::dataset::{generate_synthetic, SynthConfig};
use placeholder_zsl::eval::evaluate;
use placeholder_zsl::prototype::{train_prototypes, TrainConfig, TrainMode};

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let base = TrainConfig { mode: TrainMode::EpEi, epochs: 15, ..TrainConfig::default() };

    for n in [0, 1, 2, 4, 8] {
        let mut cfg = base.clone();
        cfg.hallucination.n = n;
        let t = evaluate(&train_prototypes(&ds, &cfg)?.net, &ds, 0.0)?.t.unwrap();
        println!("n = {n:<2}     T = {:.1}", 100.0 * t);
    }
    for sigma in [0.1, 0.2, 1.0, 10.0] {
        let mut cfg = base.clone();
        cfg.hallucination.sigma = sigma;
        let t = evaluate(&train_prototypes(&ds, &cfg)?.net, &ds, 0.0)?.t.unwrap();
        println!("sigma = {sigma:<4} T = {:.1}", 100.0 * t);
    }
    Ok(())
}
