//! Bit-to-symbol channel coding: Hamming(7,4), diagonal interleaving of
//! `sf` codewords into 7 symbols, and Gray mapping of symbol values.
//!
//! Transmit order is Hamming → interleave → inverse Gray map, so that the
//! receiver's Gray map turns an off-by-one de-chirp error (including the
//! `2^sf - 1 ↔ 0` wrap) into exactly one bit error.
//!
//! All bit orders are MSB-first.

use crate::error::{Error, Result};

/// Symbols per interleave block (the Hamming codeword length).
pub const BLOCK_SYMBOLS: usize = 7;

/// A finite sequence of 0/1 values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitStream(Vec<u8>);

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(b));
        }
        Ok(Self(bits))
    }

    /// Unpack bytes MSB-first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(
            bytes
                .iter()
                .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
                .collect(),
        )
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions where `self` and `other` differ; length
    /// differences count as errors.
    pub fn hamming_distance(&self, other: &BitStream) -> usize {
        let common = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        common + self.0.len().abs_diff(other.0.len())
    }
}

/// A 7-bit Hamming codeword `[d1 d2 d3 d4 p1 p2 p3]`, stored in the low
/// seven bits of a byte with `d1` as bit 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Codeword(u8);

impl Codeword {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() != 7 {
            return Err(Error::WrongLength {
                what: "codeword",
                expected: 7,
                actual: bits.len(),
            });
        }
        Ok(Self(pack_bits(bits)? as u8))
    }

    pub fn from_raw(raw: u8) -> Self {
        Self(raw & 0x7f)
    }

    pub fn raw(self) -> u8 {
        self.0
    }

    /// Bit `j` (0 = `d1`, 6 = `p3`).
    pub fn bit(self, j: usize) -> u8 {
        (self.0 >> (6 - j)) & 1
    }

    pub fn bits(self) -> [u8; 7] {
        std::array::from_fn(|j| self.bit(j))
    }

    pub fn with_bit_flipped(self, j: usize) -> Self {
        Self(self.0 ^ (1 << (6 - j)))
    }

    /// Data nibble `d1 d2 d3 d4` (d1 is the MSB).
    pub fn data(self) -> u8 {
        self.0 >> 3
    }

    pub fn syndrome(self) -> u8 {
        let [d1, d2, d3, d4, p1, p2, p3] = self.bits();
        let s1 = p1 ^ d1 ^ d2 ^ d4;
        let s2 = p2 ^ d1 ^ d3 ^ d4;
        let s3 = p3 ^ d2 ^ d3 ^ d4;
        (s1 << 2) | (s2 << 1) | s3
    }

    pub fn is_valid(self) -> bool {
        self.syndrome() == 0
    }
}

fn pack_bits(bits: &[u8]) -> Result<u32> {
    bits.iter().try_fold(0u32, |acc, &b| {
        if b > 1 {
            Err(Error::InvalidBit(b))
        } else {
            Ok((acc << 1) | u32::from(b))
        }
    })
}

/// Bit position flagged by each syndrome value (`None` for syndrome 0).
const SYNDROME_POSITION: [Option<usize>; 8] = [
    None,    // 000
    Some(6), // 001 → p3
    Some(5), // 010 → p2
    Some(2), // 011 → d3
    Some(4), // 100 → p1
    Some(1), // 101 → d2
    Some(0), // 110 → d1
    Some(3), // 111 → d4
];

pub fn encode_nibble(nibble: u8) -> Codeword {
    let d1 = (nibble >> 3) & 1;
    let d2 = (nibble >> 2) & 1;
    let d3 = (nibble >> 1) & 1;
    let d4 = nibble & 1;
    let p1 = d1 ^ d2 ^ d4;
    let p2 = d1 ^ d3 ^ d4;
    let p3 = d2 ^ d3 ^ d4;
    Codeword(((nibble & 0xf) << 3) | (p1 << 2) | (p2 << 1) | p3)
}

/// Syndrome decode: returns the data nibble of the nearest codeword and
/// whether a bit was flipped to get there.
pub fn decode_codeword(word: Codeword) -> (u8, bool) {
    match SYNDROME_POSITION[word.syndrome() as usize] {
        None => (word.data(), false),
        Some(j) => (word.with_bit_flipped(j).data(), true),
    }
}

pub fn hamming74_encode(data: &[u8]) -> Result<Codeword> {
    if data.len() != 4 {
        return Err(Error::WrongLength {
            what: "Hamming dataword",
            expected: 4,
            actual: data.len(),
        });
    }
    Ok(encode_nibble(pack_bits(data)? as u8))
}

pub fn hamming74_decode(word: &[u8]) -> Result<([u8; 4], bool)> {
    let (nibble, corrected) = decode_codeword(Codeword::from_bits(word)?);
    Ok((std::array::from_fn(|i| (nibble >> (3 - i)) & 1), corrected))
}

fn check_symbol(v: u16, sf: u32) -> Result<()> {
    if u32::from(v) >= 1 << sf {
        return Err(Error::SymbolOutOfRange {
            value: u32::from(v),
            limit: 1 << sf,
        });
    }
    Ok(())
}

pub fn gray_encode(v: u16, sf: u32) -> Result<u16> {
    check_symbol(v, sf)?;
    Ok(v ^ (v >> 1))
}

pub fn gray_decode(g: u16, sf: u32) -> Result<u16> {
    check_symbol(g, sf)?;
    let mut v = g;
    let mut shift = g >> 1;
    while shift != 0 {
        v ^= shift;
        shift >>= 1;
    }
    Ok(v)
}

/// Spread `sf` codewords over 7 symbols: symbol `s`, bit `c` (MSB-first)
/// carries codeword `c`'s bit `(s - c) mod 7`.
pub fn interleave_block(codewords: &[Codeword], sf: u32) -> Result<[u16; BLOCK_SYMBOLS]> {
    let rows = sf as usize;
    if codewords.len() != rows {
        return Err(Error::WrongLength {
            what: "interleave block",
            expected: rows,
            actual: codewords.len(),
        });
    }
    Ok(std::array::from_fn(|s| {
        codewords.iter().enumerate().fold(0u16, |acc, (c, cw)| {
            let bit = cw.bit((s + BLOCK_SYMBOLS - c % BLOCK_SYMBOLS) % BLOCK_SYMBOLS);
            acc | (u16::from(bit) << (rows - 1 - c))
        })
    }))
}

pub fn deinterleave_block(symbols: &[u16], sf: u32) -> Result<Vec<Codeword>> {
    if symbols.len() != BLOCK_SYMBOLS {
        return Err(Error::WrongLength {
            what: "deinterleave block",
            expected: BLOCK_SYMBOLS,
            actual: symbols.len(),
        });
    }
    for &v in symbols {
        check_symbol(v, sf)?;
    }
    let rows = sf as usize;
    Ok((0..rows)
        .map(|c| {
            let raw = (0..BLOCK_SYMBOLS).fold(0u8, |acc, j| {
                let s = (j + c) % BLOCK_SYMBOLS;
                let bit = ((symbols[s] >> (rows - 1 - c)) & 1) as u8;
                acc | (bit << (6 - j))
            });
            Codeword(raw)
        })
        .collect())
}

/// Size bookkeeping for [`encode_payload`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodingGeometry {
    pub codewords: usize,
    pub blocks: usize,
    pub symbols: usize,
}

pub fn coding_geometry(payload_bits: usize, sf: u32) -> CodingGeometry {
    let codewords = payload_bits.div_ceil(4);
    let blocks = codewords.div_ceil(sf as usize);
    CodingGeometry {
        codewords,
        blocks,
        symbols: blocks * BLOCK_SYMBOLS,
    }
}

pub fn encode_payload(bits: &BitStream, sf: u32) -> Vec<u16> {
    let geometry = coding_geometry(bits.len(), sf);
    let mut codewords: Vec<Codeword> = bits
        .bits()
        .chunks(4)
        .map(|chunk| {
            let nibble = (0..4).fold(0u8, |acc, i| (acc << 1) | chunk.get(i).copied().unwrap_or(0));
            encode_nibble(nibble)
        })
        .collect();
    codewords.resize(geometry.blocks * sf as usize, Codeword::default());
    codewords
        .chunks(sf as usize)
        .flat_map(|block| interleave_block(block, sf).expect("block has sf codewords"))
        .map(|v| gray_decode(v, sf).expect("interleaved symbol fits in sf bits"))
        .collect()
}

/// Inverse of [`encode_payload`]. Returns the payload and the number of
/// codewords with a nonzero syndrome.
pub fn decode_payload(symbols: &[u16], payload_bit_len: usize, sf: u32) -> Result<(BitStream, usize)> {
    let geometry = coding_geometry(payload_bit_len, sf);
    if symbols.len() != geometry.symbols {
        return Err(Error::InconsistentLength(format!(
            "{} symbols cannot carry a {payload_bit_len}-bit payload (expected {})",
            symbols.len(),
            geometry.symbols
        )));
    }
    let mut bits = Vec::with_capacity(geometry.blocks * sf as usize * 4);
    let mut corrected = 0;
    for block in symbols.chunks(BLOCK_SYMBOLS) {
        let mapped = block
            .iter()
            .map(|&v| gray_encode(v, sf))
            .collect::<Result<Vec<_>>>()?;
        for cw in deinterleave_block(&mapped, sf)? {
            let (nibble, fixed) = decode_codeword(cw);
            corrected += usize::from(fixed);
            bits.extend((0..4).rev().map(|i| (nibble >> i) & 1));
        }
    }
    bits.truncate(payload_bit_len);
    Ok((BitStream(bits), corrected))
}
