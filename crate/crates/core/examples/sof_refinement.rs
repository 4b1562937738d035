//! Train the linear feature refiner and compare class compactness before and
//! after refinement.

use placeholder_zsl::dataset::{generate_synthetic, SplitDataset, SynthConfig};
use placeholder_zsl::sof::{refine_features, train_sof, SofConfig};

/// Within-class scatter over total scatter on the training split.
fn scatter_ratio(ds: &SplitDataset) -> f64 {
    let idx = &ds.split().train;
    let c = ds.feature_dim();
    let mut total_mean = vec![0.0; c];
    let mut class_sum = std::collections::BTreeMap::<usize, (Vec<f64>, usize)>::new();
    for &i in idx {
        let row = ds.features().row(i);
        let entry = class_sum.entry(ds.labels()[i]).or_insert((vec![0.0; c], 0));
        for j in 0..c {
            total_mean[j] += row[j] / idx.len() as f64;
            entry.0[j] += row[j];
        }
        entry.1 += 1;
    }
    let (mut within, mut total) = (0.0, 0.0);
    for &i in idx {
        let row = ds.features().row(i);
        let (sum, count) = &class_sum[&ds.labels()[i]];
        for j in 0..c {
            within += (row[j] - sum[j] / *count as f64).powi(2);
            total += (row[j] - total_mean[j]).powi(2);
        }
    }
    within / total
}

fn main() -> placeholder_zsl::Result<()> {
    let ds = generate_synthetic(&SynthConfig::default())?;
    let outcome = train_sof(&ds, &SofConfig::default())?;
    let trace: Vec<String> = outcome.loss_trace.iter().map(|l| format!("{l:.3}")).collect();
    println!("loss per epoch: {}", trace.join(" "));

    let refined = refine_features(&ds, &outcome.params)?;
    println!("within/total scatter raw {:.3}, refined {:.3}", scatter_ratio(&ds), scatter_ratio(&refined));
    println!("refiner is {:?}, projection is {:?}", outcome.params.refiner.shape(), outcome.params.projection.shape());
    Ok(())
}
