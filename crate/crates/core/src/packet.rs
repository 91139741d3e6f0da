//! On-air packet layout: one preamble, then symbol groups of one training
//! symbol followed by `n_data_per_group` data symbols.

use crate::coding::{coding_geometry, CodingGeometry};
use crate::css::{base_chirp, ChirpDirection, CssModem};
use crate::error::{Error, Result};
use crate::signal::{ModemParams, SampleBuffer};

pub const DEFAULT_DATA_PER_GROUP: usize = 3;

/// Packet template shared by transmitter and receiver.
#[derive(Debug, Clone)]
pub struct FramePlan {
    params: ModemParams,
    n_data_per_group: usize,
    training: SampleBuffer,
    preamble: SampleBuffer,
}

impl FramePlan {
    /// Default waveforms: the base up-chirp as training symbol and a preamble
    /// of two up-chirps followed by two down-chirps.
    pub fn new(params: ModemParams, n_data_per_group: usize) -> Result<Self> {
        let up = base_chirp(&params, ChirpDirection::Up);
        let down = base_chirp(&params, ChirpDirection::Down);
        let mut preamble = up.clone();
        preamble.append(&up)?;
        preamble.append(&down)?;
        preamble.append(&down)?;
        Self::with_waveforms(params, n_data_per_group, up, preamble)
    }

    pub fn with_waveforms(
        params: ModemParams,
        n_data_per_group: usize,
        training: SampleBuffer,
        preamble: SampleBuffer,
    ) -> Result<Self> {
        if n_data_per_group == 0 {
            return Err(Error::InvalidConfig("n_data_per_group must be >= 1".into()));
        }
        if training.len() != params.ns() {
            return Err(Error::WrongLength {
                what: "training waveform",
                expected: params.ns(),
                actual: training.len(),
            });
        }
        if preamble.is_empty() {
            return Err(Error::EmptyTemplate);
        }
        for fs in [training.fs_hz(), preamble.fs_hz()] {
            if fs != params.fs_hz() {
                return Err(Error::SampleRateMismatch {
                    a: fs,
                    b: params.fs_hz(),
                });
            }
        }
        Ok(Self {
            params,
            n_data_per_group,
            training,
            preamble,
        })
    }

    pub fn params(&self) -> &ModemParams {
        &self.params
    }

    pub fn n_data_per_group(&self) -> usize {
        self.n_data_per_group
    }

    pub fn training(&self) -> &SampleBuffer {
        &self.training
    }

    pub fn preamble(&self) -> &SampleBuffer {
        &self.preamble
    }

    /// Samples per symbol group, `(N + 1) · ns`.
    pub fn group_len(&self) -> usize {
        (self.n_data_per_group + 1) * self.params.ns()
    }

    pub fn group_duration_s(&self) -> f64 {
        self.group_len() as f64 / self.params.fs_hz()
    }

    pub fn groups_for(&self, data_symbols: usize) -> usize {
        data_symbols.div_ceil(self.n_data_per_group)
    }
}

impl Default for FramePlan {
    fn default() -> Self {
        Self::new(ModemParams::default(), DEFAULT_DATA_PER_GROUP).expect("default plan is valid")
    }
}

/// Size and airtime summary for a payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub payload_bits: usize,
    pub codewords: usize,
    pub blocks: usize,
    /// Coded symbols before group padding.
    pub coded_symbols: usize,
    /// Data symbol slots after padding to whole groups.
    pub data_symbols: usize,
    pub groups: usize,
    pub training_symbols: usize,
    /// Training plus data symbols, preamble excluded.
    pub total_symbols: usize,
    /// Airtime of the symbol groups, preamble excluded.
    pub airtime_s: f64,
    pub preamble_s: f64,
}

impl FrameGeometry {
    pub fn total_airtime_s(&self) -> f64 {
        self.airtime_s + self.preamble_s
    }
}

pub fn frame_geometry(payload_bits: usize, plan: &FramePlan) -> FrameGeometry {
    let CodingGeometry {
        codewords,
        blocks,
        symbols,
    } = coding_geometry(payload_bits, plan.params.sf());
    let groups = plan.groups_for(symbols);
    let data_symbols = groups * plan.n_data_per_group;
    let total_symbols = groups * (plan.n_data_per_group + 1);
    FrameGeometry {
        payload_bits,
        codewords,
        blocks,
        coded_symbols: symbols,
        data_symbols,
        groups,
        training_symbols: groups,
        total_symbols,
        airtime_s: total_symbols as f64 * plan.params.ts_s(),
        preamble_s: plan.preamble.duration_s(),
    }
}

/// Sample offsets of a built packet.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMap {
    pub preamble_start: usize,
    /// Start of each group, i.e. of its training symbol.
    pub group_starts: Vec<usize>,
    pub data_symbol_count: usize,
    pub total_samples: usize,
    pub airtime_s: f64,
}

impl FrameMap {
    /// Start of data symbol `j` (0-based) of group `g`.
    pub fn data_symbol_start(&self, plan: &FramePlan, g: usize, j: usize) -> usize {
        self.group_starts[g] + (j + 1) * plan.params.ns()
    }
}

/// Lay out `symbols` behind the preamble, zero-padding to whole groups.
pub fn build_packet(plan: &FramePlan, symbols: &[u16]) -> Result<(SampleBuffer, FrameMap)> {
    let modem = CssModem::new(plan.params);
    let groups = plan.groups_for(symbols.len());
    let mut padded = symbols.to_vec();
    padded.resize(groups * plan.n_data_per_group, 0);

    let mut packet = plan.preamble.clone();
    let mut group_starts = Vec::with_capacity(groups);
    for chunk in padded.chunks(plan.n_data_per_group) {
        group_starts.push(packet.len());
        packet.append(&plan.training)?;
        packet.append(&modem.modulate(chunk)?)?;
    }
    let total_samples = packet.len();
    let map = FrameMap {
        preamble_start: 0,
        group_starts,
        data_symbol_count: padded.len(),
        total_samples,
        airtime_s: total_samples as f64 / plan.params.fs_hz(),
    };
    Ok((packet, map))
}

/// Fraction of symbols spent on training, `1 / (N + 1)`.
pub fn overhead_ratio(n_data_per_group: usize) -> Result<f64> {
    if n_data_per_group == 0 {
        return Err(Error::InvalidConfig("n_data_per_group must be >= 1".into()));
    }
    Ok(1.0 / (n_data_per_group + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{decode_payload, encode_payload, BitStream};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometry_for_768_bits() {
        let g = frame_geometry(768, &FramePlan::default());
        assert_eq!(g.codewords, 192);
        assert_eq!(g.blocks, 39);
        assert_eq!(g.coded_symbols, 273);
        assert_eq!(g.data_symbols, 273);
        assert_eq!(g.groups, 91);
        assert_eq!(g.total_symbols, 364);
        assert!((g.airtime_s - 5.824).abs() < 1e-12);
        assert!((g.preamble_s - 0.064).abs() < 1e-12);
    }

    #[test]
    fn geometry_edge_cases() {
        let plan = FramePlan::default();
        let empty = frame_geometry(0, &plan);
        assert_eq!(empty.groups, 0);
        assert_eq!(empty.airtime_s, 0.0);
        assert!((empty.total_airtime_s() - 0.064).abs() < 1e-12);
        let small = frame_geometry(20, &plan);
        assert_eq!((small.coded_symbols, small.data_symbols, small.groups, small.total_symbols), (7, 9, 3, 12));
    }

    #[test]
    fn group_constants() {
        let plan = FramePlan::default();
        assert_eq!(plan.group_len(), 3072);
        assert!((plan.group_duration_s() - 0.064).abs() < 1e-12);
        assert_eq!(plan.preamble().len(), 4 * 768);
    }

    #[test]
    fn build_packet_layout() {
        let plan = FramePlan::default();
        let (empty, map) = build_packet(&plan, &[]).unwrap();
        assert_eq!(empty.samples(), plan.preamble().samples());
        assert!(map.group_starts.is_empty());

        let (one, map) = build_packet(&plan, &[1, 2, 3]).unwrap();
        assert_eq!(one.len(), plan.preamble().len() + 3072);
        assert_eq!(map.group_starts, vec![3072]);
        assert_eq!(&one.samples()[3072..3840], plan.training().samples());

        let symbols: Vec<u16> = (0..273).map(|i| (i % 32) as u16).collect();
        let (packet, map) = build_packet(&plan, &symbols).unwrap();
        assert_eq!(map.group_starts.len(), 91);
        assert!(map.group_starts.windows(2).all(|w| w[1] - w[0] == 3072));
        assert_eq!(map.total_samples, packet.len());
        assert_eq!(packet.len(), plan.preamble().len() + 91 * 3072);
    }

    #[test]
    fn partial_groups_are_zero_padded() {
        let plan = FramePlan::default();
        let (packet, map) = build_packet(&plan, &[5; 7]).unwrap();
        assert_eq!(map.data_symbol_count, 9);
        let modem = CssModem::new(*plan.params());
        let last = map.data_symbol_start(&plan, 2, 2);
        assert_eq!(&packet.samples()[last..last + 768], modem.symbol_waveform(0).as_slice());
    }

    #[test]
    fn overhead_values() {
        assert_eq!(overhead_ratio(3).unwrap(), 0.25);
        assert_eq!(overhead_ratio(1).unwrap(), 0.5);
        assert_eq!(overhead_ratio(7).unwrap(), 0.125);
        assert!(overhead_ratio(0).is_err());
    }

    #[test]
    fn known_offsets_round_trip() {
        let plan = FramePlan::default();
        let modem = CssModem::new(*plan.params());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let bits = BitStream::new((0..96).map(|_| rng.gen_range(0..2)).collect()).unwrap();
            let symbols = encode_payload(&bits, 5);
            let (packet, map) = build_packet(&plan, &symbols).unwrap();
            let mut rx = Vec::new();
            for g in 0..map.group_starts.len() {
                for j in 0..plan.n_data_per_group() {
                    let s = map.data_symbol_start(&plan, g, j);
                    rx.push(modem.demodulate(&packet.samples()[s..s + 768]).unwrap().symbol);
                }
            }
            rx.truncate(symbols.len());
            let (back, _) = decode_payload(&rx, 96, 5).unwrap();
            assert_eq!(back, bits);
        }
    }

    proptest::proptest! {
        #[test]
        fn geometry_is_monotone(a in 0usize..5000, b in 0usize..5000, n in 1usize..16) {
            let plan = FramePlan::new(ModemParams::default(), n).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            proptest::prop_assert!(frame_geometry(lo, &plan).total_symbols <= frame_geometry(hi, &plan).total_symbols);
        }
    }
}
