//! Sample one episode and turn it into placeholder classes.

use placeholder_zsl::dataset::{generate_synthetic, sample_episode, SynthConfig};
use placeholder_zsl::hallucination::{hallucinate, BetaPolicy, HalluConfig};
use placeholder_zsl::numerics::RngStream;

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let mut rng = RngStream::new(7);
    let ep = sample_episode(&ds, 6, 4, &mut rng)?;
    let cfg = HalluConfig::default();
    let hep = hallucinate(&ep, &cfg, BetaPolicy::Sample, &mut rng)?;

    let w = hep.weights.as_ref().expect("n > 0 propagates");
    println!("episode classes {:?}", ep.class_ids());
    for (i, chosen) in w.chosen.iter().enumerate() {
        let neighbours: Vec<String> = chosen
            .iter()
            .map(|&j| format!("{}:{:.2}", ep.class_ids()[j], w.w[(i, j)]))
            .collect();
        println!(
            "placeholder {i}: beta {:.3}, blends {}",
            hep.betas[i],
            neighbours.join(" ")
        );
    }
    println!("visual and semantic propagation synchronized: {}", hep.sync.unwrap().is_synchronized());

    // Beta = 0 keeps only the propagated embeddings.
    let ep_only = hallucinate(&ep, &cfg, BetaPolicy::Fixed(0.0), &mut RngStream::new(7))?;
    println!("first placeholder attribute row (beta = 0): {:.3?}", ep_only.semantic.row(0));
    Ok(())
}
