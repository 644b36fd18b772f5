//! Measures the distance between image and text embedding centroids as the
//! synthetic text prototypes are pushed further from the images.
//!
//!     cargo run --example modality_gap

use mmp_ood::metrics::modality_gap_norm;
use mmp_ood::synth::{generate_world, SynthConfig};

fn main() -> mmp_ood::Result<()> {
    for gap in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let world = generate_world(&SynthConfig {
            gap,
            n_per_class_test: 20,
            n_ood: 50,
            ..Default::default()
        })?;
        let images: Vec<Vec<f64>> = world.test.vectors().map(<[f64]>::to_vec).collect();
        let g = modality_gap_norm(&images, world.text_prototypes.vectors())?;
        let i2i = modality_gap_norm(&images, world.image_prototypes.vectors())?;
        println!("gap {gap:.1}: image-to-text centroid distance {g:.4}, image-to-image-prototype {i2i:.4}");
    }
    Ok(())
}
