//! Builds one shift layer on top of a cosine sampler and prints the
//! composed sampler as JSON, along with the DOS shift it causes.

use spectral_lab::construction::{first_level, shift_values, ComposedSampler, ShiftLayer};
use spectral_lab::dynamics::{RotationSystem, System};
use spectral_lab::operator::empirical_dos;
use spectral_lab::sampler::BaseSampler;

fn main() -> spectral_lab::Result<()> {
    let rot = RotationSystem::golden();
    let base = BaseSampler::cosine(3.0);
    let k = first_level(&rot, 64).expect("golden tower is tall enough");
    let layer = ShiftLayer::build(&rot, k, shift_values(0.03125, 8)?)?;
    eprintln!("level {k}, largest shift {:.4}", layer.max_shift());
    let v = ComposedSampler::new(rot.alpha, base.clone()).with_layer(layer);

    let sys = System::Rotation(rot);
    let before = empirical_dos(&base, &sys, 500, 4, 1)?;
    let after = empirical_dos(&v, &sys, 500, 4, 1)?;
    eprintln!("W1 between the two DOS: {:.4}", before.wasserstein1(&after));
    println!(
        "{}",
        serde_json::to_string_pretty(&v).expect("serializable")
    );
    Ok(())
}
