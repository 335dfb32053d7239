#![allow(dead_code)]

use std::f64::consts::PI;

use mdlsparse::pipelines::LabelMap;
use mdlsparse::{pgm, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// 128x128 crops of standard test images.
pub const CROPS: [&str; 4] = ["camera", "coins", "astronaut", "moon"];

pub fn crop(name: &str) -> GrayImage {
    pgm::read(format!(
        "{}/tests/data/{name}.pgm",
        env!("CARGO_MANIFEST_DIR")
    ))
    .expect("test image")
}

/// Adds rounded, clipped Gaussian noise.
pub fn add_noise(image: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let (h, w) = image.dims();
    GrayImage::from_fn(h, w, |r, c| {
        (image.get(r, c) + noise.sample(&mut rng))
            .round()
            .clamp(0.0, 255.0)
    })
}

/// Noisy sinusoidal stripes with period 6, horizontal or vertical.
pub fn stripes(horizontal: bool, seed: u64, h: usize, w: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 8.0).unwrap();
    GrayImage::from_fn(h, w, |r, c| {
        let t = if horizontal { r } else { c } as f64;
        (128.0 + 60.0 * (2.0 * PI * t / 6.0).sin() + noise.sample(&mut rng))
            .round()
            .clamp(0.0, 255.0)
    })
}

/// Training textures for two classes plus a 64x64 mosaic: left half
/// horizontal stripes (class 0), right half vertical (class 1).
pub fn stripe_fixture() -> (Vec<Vec<GrayImage>>, GrayImage, LabelMap) {
    let training = vec![
        vec![stripes(true, 1, 64, 64)],
        vec![stripes(false, 2, 64, 64)],
    ];
    let left = stripes(true, 3, 64, 64);
    let right = stripes(false, 4, 64, 64);
    let mosaic = GrayImage::from_fn(64, 64, |r, c| {
        if c < 32 {
            left.get(r, c)
        } else {
            right.get(r, c)
        }
    });
    let truth = LabelMap::new(
        64,
        64,
        (0..64 * 64).map(|i| u8::from(i % 64 >= 32)).collect(),
    )
    .unwrap();
    (training, mosaic, truth)
}

pub fn gaussian_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    (0..len).map(|_| n.sample(rng)).collect()
}

/// Random columns with norms spread over (0.3, 1].
pub fn random_atoms(rng: &mut impl Rng, m: usize, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m * p);
    for _ in 0..p {
        let v = gaussian_vec(rng, m);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = rng.random_range(0.3..=1.0);
        out.extend(v.iter().map(|x| x / norm * target));
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Patch grid whose tiles are exactly `columns`, laid side by side in one row.
pub fn grid_of(columns: &[Vec<f64>], side: usize) -> mdlsparse::PatchGrid {
    let n = columns.len();
    let img = GrayImage::from_fn(side, side * n, |r, c| {
        columns[c / side][(c % side) * side + r]
    });
    mdlsparse::patches::extract_tiles(&img, side).unwrap()
}
