//! Tokenize an image with a k-means patch codebook, send the tokens as
//! bits, and watch reconstruction error grow as tokens are corrupted.

use uwmodem::pnm::write_pgm;
use uwmodem::tokens::{compression_ratio, ier, pack_tokens, perturb_exact, unpack_tokens, CodecConfig};
use uwmodem::vq::{fit_codebook, synthetic_scene, training_patches, utilization, vq_decode, vq_encode};

/// Returns reconstruction MSE at 0, 10 and 20 % token errors.
pub fn run_example() -> uwmodem::Result<Vec<f64>> {
    let (size, patch, k) = (64, 8, 64);
    let patches = training_patches(12, size, patch, 99)?;
    let (book, report) = fit_codebook(&patches, k, 1, 30)?;
    println!("codebook: {k} entries, objective {:.4} after {} iterations", report.objective.last().copied().unwrap_or(f64::NAN), report.iterations);

    let image = synthetic_scene(size, 5);
    let tokens = vq_encode(&image, &book)?;
    let codec = CodecConfig::new(tokens.len(), k as u32)?;
    let bits = pack_tokens(&tokens, &codec)?;
    assert_eq!(unpack_tokens(&bits, &codec)?, tokens);
    println!("{} tokens -> {} bits; codebook use {:.0}%", tokens.len(), bits.len(), 100.0 * utilization([&tokens], k).fraction());
    let ((from, to), ratio) = compression_ratio(256, 1024, 64, 4096)?;
    println!("256 tokens of K=1024 vs 64 of K=4096: {from}/{to} bits = {ratio:.3}x");

    let dir = tempfile::tempdir()?;
    let mut mses = Vec::new();
    for pct in [0, 10, 20] {
        let m = (tokens.len() * pct + 50) / 100;
        let hit = perturb_exact(&tokens, m, k as u32, 11)?;
        let restored = vq_decode(&hit, &book, size, size)?;
        let mse = image.mse(&restored)?;
        write_pgm(dir.path().join(format!("restored_{pct}.pgm")), &restored)?;
        println!("IER {:.3}: MSE {mse:.5}", ier(&tokens, &hit)?);
        mses.push(mse);
    }
    Ok(mses)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
