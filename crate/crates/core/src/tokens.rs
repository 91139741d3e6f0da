//! Token payloads: fixed-width bit packing, random perturbation and the
//! index error rate.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::BitStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub m_tokens: usize,
    pub k_codebook: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            m_tokens: 64,
            k_codebook: 4096,
        }
    }
}

impl CodecConfig {
    pub fn new(m_tokens: usize, k_codebook: u32) -> Result<Self> {
        let cfg = Self { m_tokens, k_codebook };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_codebook < 2 || self.m_tokens == 0 {
            return Err(Error::InvalidCodec(format!(
                "need K >= 2 and M >= 1 (K {}, M {})",
                self.k_codebook, self.m_tokens
            )));
        }
        Ok(())
    }

    /// `ceil(log2 K)`.
    pub fn bits_per_token(&self) -> usize {
        (u32::BITS - (self.k_codebook - 1).leading_zeros()) as usize
    }

    pub fn payload_bits(&self) -> usize {
        self.m_tokens * self.bits_per_token()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<u32>);

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, cfg: &CodecConfig) -> Result<Self> {
        if tokens.len() != cfg.m_tokens {
            return Err(Error::WrongLength {
                what: "token sequence",
                expected: cfg.m_tokens,
                actual: tokens.len(),
            });
        }
        if let Some(&token) = tokens.iter().find(|&&t| t >= cfg.k_codebook) {
            return Err(Error::TokenOutOfRange {
                token,
                k: cfg.k_codebook,
            });
        }
        Ok(Self(tokens))
    }

    pub fn random(cfg: &CodecConfig, rng: &mut impl Rng) -> Self {
        Self((0..cfg.m_tokens).map(|_| rng.gen_range(0..cfg.k_codebook)).collect())
    }

    pub fn tokens(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Big-endian fixed-width packing.
pub fn pack_tokens(seq: &TokenSequence, cfg: &CodecConfig) -> Result<BitStream> {
    let checked = TokenSequence::new(seq.0.clone(), cfg)?;
    let width = cfg.bits_per_token();
    let mut bits = Vec::with_capacity(cfg.payload_bits());
    for t in checked.0 {
        bits.extend((0..width).rev().map(|b| ((t >> b) & 1) as u8));
    }
    BitStream::new(bits)
}

/// Inverse of [`pack_tokens`]. Decoded values at or above K (possible only
/// when K is not a power of two and bits were corrupted) are rejected.
pub fn unpack_tokens(bits: &BitStream, cfg: &CodecConfig) -> Result<TokenSequence> {
    cfg.validate()?;
    if bits.len() != cfg.payload_bits() {
        return Err(Error::WrongLength {
            what: "token payload bits",
            expected: cfg.payload_bits(),
            actual: bits.len(),
        });
    }
    let tokens = bits
        .bits()
        .chunks(cfg.bits_per_token())
        .map(|c| c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
        .collect();
    TokenSequence::new(tokens, cfg)
}

/// Like [`unpack_tokens`] but maps out-of-range values to `K − 1`, so that a
/// corrupted payload still yields a sequence to score.
pub fn unpack_tokens_lossy(bits: &BitStream, cfg: &CodecConfig) -> Result<TokenSequence> {
    cfg.validate()?;
    if bits.len() != cfg.payload_bits() {
        return Err(Error::WrongLength {
            what: "token payload bits",
            expected: cfg.payload_bits(),
            actual: bits.len(),
        });
    }
    Ok(TokenSequence(
        bits.bits()
            .chunks(cfg.bits_per_token())
            .map(|c| c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32).min(cfg.k_codebook - 1))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub p: usize,
    pub cap: f64,
}

impl PerturbSpec {
    pub fn new(p: usize) -> Self {
        Self { p, cap: 0.25 }
    }

    pub fn validate(&self, m_tokens: usize) -> Result<()> {
        if self.p == 0 || self.p as f64 > self.cap * m_tokens as f64 {
            return Err(Error::InvalidCodec(format!(
                "p = {} must lie in [1, {} x {m_tokens}]",
                self.p, self.cap
            )));
        }
        Ok(())
    }
}

/// Replace `m ~ U[1, p]` distinct positions with different, uniformly drawn
/// tokens. Returns the perturbed sequence and `m`.
pub fn perturb(seq: &TokenSequence, spec: &PerturbSpec, k_codebook: u32, seed: u64) -> Result<(TokenSequence, usize)> {
    spec.validate(seq.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=spec.p);
    Ok((perturb_with(seq, m, k_codebook, &mut rng)?, m))
}

/// Replace exactly `m` distinct positions.
pub fn perturb_exact(seq: &TokenSequence, m: usize, k_codebook: u32, seed: u64) -> Result<TokenSequence> {
    perturb_with(seq, m, k_codebook, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn perturb_with(seq: &TokenSequence, m: usize, k: u32, rng: &mut ChaCha8Rng) -> Result<TokenSequence> {
    if m > seq.len() {
        return Err(Error::InvalidCodec(format!("cannot perturb {m} of {} tokens", seq.len())));
    }
    if k < 2 {
        return Err(Error::InvalidCodec("codebook needs at least two entries".into()));
    }
    let mut out = seq.0.clone();
    for pos in sample(rng, seq.len(), m) {
        // Uniform over the K − 1 other tokens.
        let r = rng.gen_range(0..k - 1);
        out[pos] = if r >= out[pos] { r + 1 } else { r };
    }
    Ok(TokenSequence(out))
}

/// Fraction of positions that differ.
pub fn ier(sent: &TokenSequence, received: &TokenSequence) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::InconsistentLength(format!(
            "{} sent vs {} received tokens",
            sent.len(),
            received.len()
        )));
    }
    if sent.is_empty() {
        return Ok(0.0);
    }
    let wrong = sent.0.iter().zip(&received.0).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / sent.len() as f64)
}

/// Payload size ratio `(M·log2 K) / (M'·log2 K')` as an exact fraction
/// (numerator, denominator) of bit counts, plus its value.
pub fn compression_ratio(m: usize, k: u32, m_prime: usize, k_prime: u32) -> Result<((usize, usize), f64)> {
    let from = CodecConfig::new(m, k)?.payload_bits();
    let to = CodecConfig::new(m_prime, k_prime)?.payload_bits();
    Ok(((from, to), from as f64 / to as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_arithmetic() {
        let cfg = CodecConfig::default();
        assert_eq!(cfg.bits_per_token(), 12);
        assert_eq!(cfg.payload_bits(), 768);
        assert_eq!(CodecConfig::new(10, 2).unwrap().bits_per_token(), 1);
        assert_eq!(CodecConfig::new(10, 1000).unwrap().bits_per_token(), 10);
        assert_eq!(CodecConfig::new(10, 1025).unwrap().bits_per_token(), 11);
        assert!(CodecConfig::new(0, 16).is_err());
        assert!(CodecConfig::new(4, 1).is_err());
    }

    #[test]
    fn packing_is_big_endian() {
        let cfg = CodecConfig::new(2, 16).unwrap();
        let seq = TokenSequence::new(vec![0b1010, 0b0011], &cfg).unwrap();
        assert_eq!(pack_tokens(&seq, &cfg).unwrap().bits(), &[1, 0, 1, 0, 0, 0, 1, 1]);
        let zeros = TokenSequence::new(vec![0; 64], &CodecConfig::default()).unwrap();
        assert!(pack_tokens(&zeros, &CodecConfig::default()).unwrap().bits().iter().all(|&b| b == 0));
    }

    #[test]
    fn pack_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [2, 3, 100, 256, 4096] {
            let cfg = CodecConfig::new(17, k).unwrap();
            for _ in 0..200 {
                let seq = TokenSequence::random(&cfg, &mut rng);
                let bits = pack_tokens(&seq, &cfg).unwrap();
                assert_eq!(unpack_tokens(&bits, &cfg).unwrap(), seq);
            }
        }
    }

    #[test]
    fn out_of_range_rejected() {
        let cfg = CodecConfig::new(2, 10).unwrap();
        assert!(matches!(
            TokenSequence::new(vec![1, 10], &cfg),
            Err(Error::TokenOutOfRange { token: 10, k: 10 })
        ));
        // 15 fits in 4 bits but not in a codebook of 10.
        let bits = BitStream::new(vec![1; 8]).unwrap();
        assert!(unpack_tokens(&bits, &cfg).is_err());
        assert_eq!(unpack_tokens_lossy(&bits, &cfg).unwrap().tokens(), &[9, 9]);
    }

    #[test]
    fn perturb_contract() {
        let cfg = CodecConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..1000 {
            let seq = TokenSequence::random(&cfg, &mut rng);
            let (out, m) = perturb(&seq, &PerturbSpec::new(16), cfg.k_codebook, seed).unwrap();
            let changed = seq.tokens().iter().zip(out.tokens()).filter(|(a, b)| a != b).count();
            assert_eq!(changed, m);
            assert!((1..=16).contains(&m));
        }
        let seq = TokenSequence::random(&cfg, &mut rng);
        let (out, m) = perturb(&seq, &PerturbSpec::new(1), cfg.k_codebook, 5).unwrap();
        assert_eq!(m, 1);
        assert!((ier(&seq, &out).unwrap() - 1.0 / 64.0).abs() < 1e-12);
        assert_eq!(perturb(&seq, &PerturbSpec::new(1), 4096, 5).unwrap(), (out, 1));
    }

    #[test]
    fn perturb_spec_bounds() {
        assert!(PerturbSpec::new(0).validate(64).is_err());
        assert!(PerturbSpec::new(16).validate(64).is_ok());
        assert!(PerturbSpec::new(17).validate(64).is_err());
    }

    #[test]
    fn binary_codebook_flips() {
        let cfg = CodecConfig::new(8, 2).unwrap();
        let seq = TokenSequence::new(vec![0, 1, 0, 1, 0, 1, 0, 1], &cfg).unwrap();
        let out = perturb_exact(&seq, 8, 2, 3).unwrap();
        assert!(out.tokens().iter().zip(seq.tokens()).all(|(a, b)| a != b));
    }

    #[test]
    fn ier_counts() {
        let cfg = CodecConfig::default();
        let a = TokenSequence::new(vec![0; 64], &cfg).unwrap();
        let b = TokenSequence::new(vec![1; 64], &cfg).unwrap();
        let mut c = vec![0; 64];
        c[..7].fill(3);
        let c = TokenSequence::new(c, &cfg).unwrap();
        assert_eq!(ier(&a, &a).unwrap(), 0.0);
        assert_eq!(ier(&a, &b).unwrap(), 1.0);
        assert!((ier(&a, &c).unwrap() - 7.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_for_reference_sizes() {
        let ((num, den), value) = compression_ratio(256, 1024, 64, 4096).unwrap();
        assert_eq!((num, den), (2560, 768));
        assert!((value - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturb_count_is_uniform() {
        // Chi-square goodness of fit for m over [1, 16].
        let cfg = CodecConfig::default();
        let seq = TokenSequence::new(vec![0; 64], &cfg).unwrap();
        let mut counts = [0usize; 16];
        let trials = 16_000;
        for seed in 0..trials {
            let (_, m) = perturb(&seq, &PerturbSpec::new(16), 4096, seed).unwrap();
            counts[m - 1] += 1;
        }
        let expected = trials as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-square with 15 degrees of freedom.
        assert!(chi2 < 37.7, "chi2 {chi2}");
    }
}
