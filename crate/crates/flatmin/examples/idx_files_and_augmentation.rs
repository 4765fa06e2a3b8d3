//! Dataset plumbing: write a dataset in the IDX container format, read it
//! back (bit-exact), augment image data, and build adversarial copies.
//!
//! Run with: cargo run --example idx_files_and_augmentation

use flatmin::data::{
    adversarial_examples, augment, load_idx, write_idx, AugmentPolicy, Dataset,
};
use flatmin::net::{Network, NetworkSpec};

fn main() -> flatmin::Result<()> {
    let out_dir = std::path::Path::new("target/examples-out/idx");
    std::fs::create_dir_all(out_dir)?;

    // An 8x8 "image" dataset with byte-quantized pixels.
    let (h, w, m) = (8, 8, 64);
    let features: Vec<f64> = (0..m * h * w).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
    let labels: Vec<u32> = (0..m as u32).map(|i| i % 4).collect();
    let data = Dataset::new(m, h * w, features, labels, 4)?.with_image_shape(h, w)?;

    let images = out_dir.join("demo-images-idx3-ubyte");
    let labels_path = out_dir.join("demo-labels-idx1-ubyte");
    write_idx(&data, &images, &labels_path)?;
    let back = load_idx(&images, &labels_path)?;
    println!(
        "idx round trip: {} rows, {} features, bit-exact: {}",
        back.len(),
        back.dim(),
        back.features() == data.features()
    );

    // Identity policy leaves the data untouched; the default policy flips,
    // rotates up to 10 degrees, and translates up to 0.2 of the image size.
    let identity = AugmentPolicy {
        horizontal_flip: false,
        max_rotation_degrees: 0.0,
        max_translation_fraction: 0.0,
        seed: 0,
    };
    println!(
        "identity policy is exact: {}",
        augment(&data, &identity)?.features() == data.features()
    );
    let shaken = augment(&data, &AugmentPolicy { seed: 9, ..Default::default() })?;
    let changed = shaken
        .features()
        .iter()
        .zip(data.features())
        .filter(|(a, b)| a != b)
        .count();
    println!("default policy changed {changed} of {} pixels", data.features().len());

    // Fast-gradient-sign copies against a random model.
    let net = Network::new(NetworkSpec::fully_connected(h * w, &[16], 4, false))?;
    let params = net.init_params(1);
    let state = net.fresh_state();
    let adv = adversarial_examples(&net, &params, &state, &data, 0.1)?;
    let max_shift = adv
        .features()
        .iter()
        .zip(data.features())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("adversarial copies stay within eta: max |shift| = {max_shift}");
    Ok(())
}
