//! Compare the analytic gradient of the placeholder loss with central
//! differences.

use placeholder_zsl::dataset::{generate_synthetic, sample_episode, SynthConfig};
use placeholder_zsl::hallucination::{hallucinate, BetaPolicy, HalluConfig};
use placeholder_zsl::numerics::{Activation, MappingNet, RngStream};
use placeholder_zsl::prototype::place_loss;

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let mut rng = RngStream::new(3);
    let ep = sample_episode(&ds, 8, 4, &mut rng)?;
    let hep = hallucinate(&ep, &HalluConfig::default(), BetaPolicy::Sample, &mut rng)?;
    let net = MappingNet::init_uniform(ds.attribute_dim(), 32, ds.feature_dim(), Activation::Relu, &mut rng)?;

    let analytic = place_loss(&net, &hep, 10.0)?.grads;
    let h = 1e-6;
    for (block, name) in ["w1", "b1", "w2", "b2"].iter().enumerate() {
        let grad: &[f64] = match block {
            0 => analytic.w1.as_slice(),
            1 => &analytic.b1,
            2 => analytic.w2.as_slice(),
            _ => &analytic.b2,
        };
        let mut worst = 0.0f64;
        for (k, &g) in grad.iter().enumerate().take(40) {
            let mut plus = net.clone();
            plus.parameters_mut()[block][k] += h;
            let mut minus = net.clone();
            minus.parameters_mut()[block][k] -= h;
            let numeric = (place_loss(&plus, &hep, 10.0)?.loss - place_loss(&minus, &hep, 10.0)?.loss) / (2.0 * h);
            worst = worst.max((numeric - g).abs() / (numeric.abs() + g.abs()).max(1e-8));
        }
        println!("{name}: worst relative error {worst:.2e}");
    }
    Ok(())
}
