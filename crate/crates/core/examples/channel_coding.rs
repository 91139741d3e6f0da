//! Hamming(7,4) with diagonal interleaving: one wrecked symbol per block
//! is fully repaired.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwmodem::coding::{coding_geometry, decode_payload, encode_payload, BitStream, BLOCK_SYMBOLS};

/// Returns (payload recovered, corrected codewords).
pub fn run_example() -> uwmodem::Result<(bool, usize)> {
    let sf = 5;
    let message = BitStream::from_bytes(b"bottlenose, 12 m, heading north");
    let g = coding_geometry(message.len(), sf);
    println!("{} bits -> {} codewords, {} blocks, {} symbols", message.len(), g.codewords, g.blocks, g.symbols);

    let mut symbols = encode_payload(&message, sf);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for block in 0..g.blocks {
        let pos = block * BLOCK_SYMBOLS + rng.gen_range(0..BLOCK_SYMBOLS);
        symbols[pos] ^= rng.gen_range(1..32);
    }
    let (decoded, corrected) = decode_payload(&symbols, message.len(), sf)?;
    let ok = decoded == message;
    println!("one symbol corrupted in every block: recovered {ok}, {corrected} codewords corrected");
    Ok((ok, corrected))
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
