//! Regenerates the bundled low-light hazy test images in `testdata/`.
//!
//! Usage: cargo run -p nighthaze-cli --example gen_testdata [DIR]

use nighthaze::io::save_image;
use nighthaze::synth::{generate, sample_scene_inputs, SynthConfig};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "testdata".to_string());
    std::fs::create_dir_all(&dir).expect("create output dir");
    for seed in 1u64..=6 {
        let (clear, disparity) = sample_scene_inputs(256, 256, seed);
        let scene = generate(&clear, &disparity, &SynthConfig::default()).expect("generate scene");
        let path = format!("{dir}/hazy_{seed:02}.png");
        save_image(&path, &scene.hazy).expect("save hazy image");
        println!("wrote {path}");
    }
}
