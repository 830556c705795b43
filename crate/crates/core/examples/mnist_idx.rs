//! Writes a tiny IDX image/label pair and parses it back.

use batle::data::load_idx;
use batle::data::mnist::{encode_idx_images, encode_idx_labels};

fn main() -> batle::Result<()> {
    let (n, rows, cols) = (3, 4, 4);
    let pixels: Vec<u8> = (0..n * rows * cols).map(|i| (i * 5 % 256) as u8).collect();
    let labels = [7u8, 1, 4];

    let dir = tempfile::tempdir().map_err(|e| batle::Error::InvalidInput(e.to_string()))?;
    let img = dir.path().join("images-idx3-ubyte");
    let lab = dir.path().join("labels-idx1-ubyte");
    std::fs::write(&img, encode_idx_images(n, rows, cols, &pixels)).unwrap();
    std::fs::write(&lab, encode_idx_labels(&labels)).unwrap();

    let set = load_idx(&img, &lab)?;
    for i in 0..set.len() {
        println!("image {i}: label {} mean intensity {:.3}", set.labels[i], set.mean_intensity(i));
    }
    // A truncated file is rejected rather than read short.
    std::fs::write(&img, &encode_idx_images(n, rows, cols, &pixels)[..20]).unwrap();
    println!("truncated: {}", load_idx(&img, &lab).unwrap_err());
    Ok(())
}
