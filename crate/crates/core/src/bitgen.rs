//! From chaotic states to five post-processed bitstreams.
//!
//! Every fixed-point state is cut down to the 12 least-significant bits of each
//! component, and each 12-bit word is serialized LSB-first. The `V` channel
//! drives a self-synchronizing scrambler (`x^6 + x^5 + 1`); its first six bits
//! preload the register and every later bit is scrambler input. `B1..B4` are
//! the serialized `X, Y, Z, U` channels XORed with the scrambler output, `B5`
//! is the scrambler output itself. The first six bits of every channel are
//! dropped so that all five streams stay aligned with the scrambler.

use std::fmt;
use std::io::{self, Read, Write};

use bitvec::prelude::*;
use thiserror::Error;

use crate::chaos::{
    BackendKind, ChaosError, Double, Fixed, InitialCondition, Rk4, SolverConfig, StateVec,
};
use crate::fxp::{Fx32, OverflowPolicy};

/// Bits kept from each 32-bit sample.
pub const WORD_BITS: u32 = 12;
const WORD_MASK: u32 = (1 << WORD_BITS) - 1;

/// Scrambler register length.
pub const SCRAMBLER_LEN: usize = 6;

/// Taps at register positions 5 and 6 (`x^6 + x^5 + 1`).
pub const DEFAULT_TAPS: u8 = 0b11_0000;

/// States skipped before the first output bit.
pub const DEFAULT_DISCARD: usize = 1000;

/// ASCII export line length in bits.
pub const ASCII_LINE_BITS: usize = 1 << 20;

pub type Bits = BitVec<u8, Lsb0>;

#[derive(Debug, Error)]
pub enum BitgenError {
    #[error("stream lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),
    #[error("scrambler taps must be a nonzero mask over {SCRAMBLER_LEN} bits, got {0:#b}")]
    InvalidTaps(u8),
    #[error("need {needed} seed bits, got {got}")]
    ShortSeed { needed: usize, got: usize },
    #[error("truncation width {0} outside 1..=32")]
    InvalidWidth(u32),
    #[error("no samples")]
    Empty,
    #[error("invalid character {0:?} in ASCII bitstream")]
    InvalidAscii(char),
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    X,
    Y,
    Z,
    U,
    V,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::X, Channel::Y, Channel::Z, Channel::U, Channel::V];

    pub fn pick<T: Copy>(self, s: &StateVec<T>) -> T {
        match self {
            Channel::X => s.x,
            Channel::Y => s.y,
            Channel::Z => s.z,
            Channel::U => s.u,
            Channel::V => s.v,
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Channel::X),
            "y" => Ok(Channel::Y),
            "z" => Ok(Channel::Z),
            "u" => Ok(Channel::U),
            "v" => Ok(Channel::V),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// The 12 low bits of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncatedWord {
    bits: u16,
    pub channel: Channel,
}

impl TruncatedWord {
    pub fn new(bits: u16, channel: Channel) -> Self {
        Self { bits: bits & WORD_MASK as u16, channel }
    }

    pub fn bits(self) -> u16 {
        self.bits
    }
}

/// `raw & 0xFFF` of every component, in `X, Y, Z, U, V` order.
pub fn truncate(s: &StateVec<Fx32>) -> [TruncatedWord; 5] {
    Channel::ALL.map(|ch| TruncatedWord::new((ch.pick(s).to_raw() as u32 & WORD_MASK) as u16, ch))
}

/// LSB-first serialization.
pub fn serialize(w: TruncatedWord) -> [u8; WORD_BITS as usize] {
    std::array::from_fn(|i| ((w.bits >> i) & 1) as u8)
}

pub fn deserialize(bits: &[u8; WORD_BITS as usize], channel: Channel) -> TruncatedWord {
    let v = bits.iter().enumerate().fold(0u16, |acc, (i, &b)| acc | (u16::from(b & 1) << i));
    TruncatedWord::new(v, channel)
}

/// Self-synchronizing scrambler: `out = in ^ parity(register & taps)`, and
/// `out` is shifted into position 1 of the register.
///
/// Bit `k - 1` of `register` holds position `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScramblerState {
    register: u8,
    taps: u8,
}

impl Default for ScramblerState {
    fn default() -> Self {
        Self { register: 0, taps: DEFAULT_TAPS }
    }
}

impl ScramblerState {
    pub fn new(taps: u8) -> Result<Self, BitgenError> {
        if taps == 0 || taps >> SCRAMBLER_LEN != 0 {
            return Err(BitgenError::InvalidTaps(taps));
        }
        Ok(Self { register: 0, taps })
    }

    /// Default taps, register loaded from the first six seed bits as if they
    /// were the six previous outputs (earliest bit ends up in position 6).
    pub fn seeded(seed: &[u8]) -> Result<Self, BitgenError> {
        if seed.len() < SCRAMBLER_LEN {
            return Err(BitgenError::ShortSeed { needed: SCRAMBLER_LEN, got: seed.len() });
        }
        let mut s = Self::default();
        seed[..SCRAMBLER_LEN].iter().for_each(|&b| s.preload(b));
        Ok(s)
    }

    pub fn register(&self) -> u8 {
        self.register
    }

    pub fn taps(&self) -> u8 {
        self.taps
    }

    #[inline]
    pub fn preload(&mut self, bit: u8) {
        self.register = ((self.register << 1) | (bit & 1)) & 0x3F;
    }

    #[inline]
    pub fn step(&mut self, input: u8) -> u8 {
        let feedback = ((self.register & self.taps).count_ones() & 1) as u8;
        let out = (input & 1) ^ feedback;
        self.preload(out);
        out
    }
}

/// Runs `input` through the scrambler.
pub fn scramble(input: &[u8], state: &mut ScramblerState) -> Vec<u8> {
    input.iter().map(|&b| state.step(b)).collect()
}

/// Preloads from the first six bits of `v_bits` and scrambles the rest.
pub fn scramble_seed_stream(v_bits: &[u8]) -> Result<Vec<u8>, BitgenError> {
    let mut state = ScramblerState::seeded(v_bits)?;
    Ok(scramble(&v_bits[SCRAMBLER_LEN..], &mut state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    B1,
    B2,
    B3,
    B4,
    B5,
    Serialized(Channel),
    Scrambled,
}

impl StreamLabel {
    pub const OUTPUTS: [StreamLabel; 5] =
        [StreamLabel::B1, StreamLabel::B2, StreamLabel::B3, StreamLabel::B4, StreamLabel::B5];
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamLabel::B1 => f.write_str("B1"),
            StreamLabel::B2 => f.write_str("B2"),
            StreamLabel::B3 => f.write_str("B3"),
            StreamLabel::B4 => f.write_str("B4"),
            StreamLabel::B5 => f.write_str("B5"),
            StreamLabel::Serialized(ch) => write!(f, "{ch:?}"),
            StreamLabel::Scrambled => f.write_str("scrambled"),
        }
    }
}

/// A labelled bit sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub label: StreamLabel,
    pub bits: Bits,
}

impl BitStream {
    pub fn new(label: StreamLabel) -> Self {
        Self { label, bits: Bits::new() }
    }

    pub fn from_bits(label: StreamLabel, bits: &[u8]) -> Self {
        Self { label, bits: bits.iter().map(|&b| b & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// One byte per bit, each 0 or 1.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.iter().by_vals().map(u8::from).collect()
    }

    pub fn ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Packed, 8 bits per byte, earliest bit in the least-significant position.
    /// Padding bits in the last byte are zero.
    pub fn write_packed<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut bytes = self.bits.as_raw_slice().to_vec();
        let tail = self.bits.len() % 8;
        if tail != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= (1u8 << tail) - 1;
            }
        }
        w.write_all(&bytes)
    }

    pub fn read_packed<R: Read>(label: StreamLabel, mut r: R) -> io::Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Ok(Self { label, bits: Bits::from_vec(buf) })
    }

    /// ASCII `0`/`1`, a newline after every [`ASCII_LINE_BITS`] bits and after
    /// a final partial line.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = Vec::with_capacity(ASCII_LINE_BITS.min(self.len()) + 1);
        for chunk in self.bits.chunks(ASCII_LINE_BITS) {
            line.clear();
            line.extend(chunk.iter().by_vals().map(|b| if b { b'1' } else { b'0' }));
            line.push(b'\n');
            w.write_all(&line)?;
        }
        Ok(())
    }

    /// Parses `0`/`1` characters, ignoring whitespace.
    pub fn read_ascii<R: Read>(label: StreamLabel, mut r: R) -> Result<Self, BitgenError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut bits = Bits::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                c => return Err(BitgenError::InvalidAscii(c)),
            }
        }
        Ok(Self { label, bits })
    }
}

/// `B1..B4 = channel ^ scrambled`, `B5 = scrambled`.
pub fn combine(channels: [&BitStream; 4], scrambled: &BitStream) -> Result<[BitStream; 5], BitgenError> {
    let lens: Vec<usize> = channels.iter().map(|c| c.len()).chain([scrambled.len()]).collect();
    if lens.iter().any(|&l| l != scrambled.len()) {
        return Err(BitgenError::LengthMismatch(lens));
    }
    let mix = |label, ch: &BitStream| BitStream { label, bits: ch.bits.clone() ^ &scrambled.bits };
    Ok([
        mix(StreamLabel::B1, channels[0]),
        mix(StreamLabel::B2, channels[1]),
        mix(StreamLabel::B3, channels[2]),
        mix(StreamLabel::B4, channels[3]),
        BitStream { label: StreamLabel::B5, bits: scrambled.bits.clone() },
    ])
}

/// Parameters of a generator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub ic: InitialCondition,
    pub solver: SolverConfig,
    /// States integrated and dropped before the first output state.
    pub discard_states: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            ic: InitialCondition::default(),
            solver: SolverConfig::default(),
            discard_states: DEFAULT_DISCARD,
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Fixed(Rk4<Fixed>, StateVec<Fx32>),
    Double(Rk4<Double>, StateVec<f64>),
}

/// Streaming version of truncate, serialize, scramble and combine.
#[derive(Debug, Clone)]
pub struct Generator {
    engine: Engine,
    scrambler: ScramblerState,
    preload_left: usize,
    steps: usize,
    /// Output bits computed but not yet handed out, one bit per stream packed
    /// into the low five bits.
    pending: Vec<u8>,
    pending_pos: usize,
}

impl Generator {
    pub fn new(cfg: &GeneratorConfig) -> Result<Self, BitgenError> {
        let engine = match cfg.solver.backend {
            BackendKind::Fixed => {
                Engine::Fixed(Rk4::new(Fixed::new(cfg.solver.overflow), cfg.solver.h)?, cfg.ic.to_fixed()?)
            }
            BackendKind::Double => Engine::Double(Rk4::new(Double, cfg.solver.h)?, cfg.ic.to_state()),
        };
        let mut g = Self {
            engine,
            scrambler: ScramblerState::default(),
            preload_left: SCRAMBLER_LEN,
            steps: 0,
            pending: Vec::with_capacity(WORD_BITS as usize),
            pending_pos: 0,
        };
        for _ in 0..cfg.discard_states {
            g.advance()?;
        }
        Ok(g)
    }

    /// Number of integration steps taken so far, including discarded ones.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn advance(&mut self) -> Result<StateVec<Fx32>, BitgenError> {
        self.steps += 1;
        let step = self.steps;
        let trap = |source| ChaosError::Trap { step, source };
        Ok(match &mut self.engine {
            Engine::Fixed(rk, s) => {
                *s = rk.step(s).map_err(trap)?;
                *s
            }
            Engine::Double(rk, s) => {
                *s = rk.step(s).map_err(trap)?;
                s.map(|c| Fx32::from_real(c, OverflowPolicy::Wrap).unwrap_or(Fx32::ZERO))
            }
        })
    }

    /// Advances one step and returns its truncated words.
    pub fn next_words(&mut self) -> Result<[TruncatedWord; 5], BitgenError> {
        Ok(truncate(&self.advance()?))
    }

    fn refill(&mut self) -> Result<(), BitgenError> {
        let words = self.next_words()?;
        let [x, y, z, u, v] = words.map(|w| w.bits as u32);
        self.pending.clear();
        self.pending_pos = 0;
        for i in 0..WORD_BITS {
            let vb = ((v >> i) & 1) as u8;
            if self.preload_left > 0 {
                self.scrambler.preload(vb);
                self.preload_left -= 1;
                continue;
            }
            let o = self.scrambler.step(vb);
            let ch = |w: u32| ((w >> i) & 1) as u8 ^ o;
            self.pending.push(ch(x) | ch(y) << 1 | ch(z) << 2 | ch(u) << 3 | o << 4);
        }
        Ok(())
    }

    /// Produces the next `n_bits` bits of `B1..B5`.
    pub fn generate(&mut self, n_bits: usize) -> Result<[BitStream; 5], BitgenError> {
        let mut out = StreamLabel::OUTPUTS.map(|l| BitStream { label: l, bits: Bits::with_capacity(n_bits) });
        while out[0].len() < n_bits {
            if self.pending_pos == self.pending.len() {
                self.refill()?;
                continue;
            }
            let packed = self.pending[self.pending_pos];
            self.pending_pos += 1;
            for (k, s) in out.iter_mut().enumerate() {
                s.bits.push((packed >> k) & 1 == 1);
            }
        }
        Ok(out)
    }
}

/// Shannon entropy in bits of the `nb`-bit symbols `words & (2^nb - 1)`.
pub fn shannon_entropy(words: &[u32], nb: u32) -> Result<f64, BitgenError> {
    if !(1..=32).contains(&nb) {
        return Err(BitgenError::InvalidWidth(nb));
    }
    if words.is_empty() {
        return Err(BitgenError::Empty);
    }
    let mask = if nb == 32 { u32::MAX } else { (1u32 << nb) - 1 };
    let n = words.len() as f64;
    let term = |count: usize| {
        let p = count as f64 / n;
        -p * p.log2()
    };
    let h = if nb <= 20 {
        let mut hist = vec![0usize; 1 << nb];
        words.iter().for_each(|&w| hist[(w & mask) as usize] += 1);
        hist.into_iter().filter(|&c| c > 0).map(term).sum()
    } else {
        let mut sorted: Vec<u32> = words.iter().map(|&w| w & mask).collect();
        sorted.sort_unstable();
        sorted.chunk_by(|a, b| a == b).map(|run| term(run.len())).sum()
    };
    Ok(f64::max(h, 0.0))
}

/// `H / nb`.
pub fn avg_entropy_per_bit(words: &[u32], nb: u32) -> Result<f64, BitgenError> {
    Ok(shannon_entropy(words, nb)? / nb as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRow {
    pub nb: u32,
    pub entropy_per_bit: f64,
}

/// Average entropy per bit of one channel truncated to each width.
///
/// Histogram support wants roughly `32 * 2^nb` samples; nothing checks it.
pub fn entropy_sweep(
    states: &[StateVec<Fx32>],
    channel: Channel,
    widths: &[u32],
) -> Result<Vec<EntropyRow>, BitgenError> {
    let raw: Vec<u32> = states.iter().map(|s| channel.pick(s).to_raw() as u32).collect();
    widths
        .iter()
        .map(|&nb| Ok(EntropyRow { nb, entropy_per_bit: avg_entropy_per_bit(&raw, nb)? }))
        .collect()
}

pub fn write_entropy_csv<W: Write>(mut w: W, rows: &[EntropyRow]) -> io::Result<()> {
    writeln!(w, "Nb,entropy_per_bit")?;
    for r in rows {
        writeln!(w, "{},{}", r.nb, r.entropy_per_bit)?;
    }
    Ok(())
}

/// Packs consecutive `width`-bit groups of `bits` into words, LSB-first.
/// A trailing partial group is dropped.
pub fn assemble_words(bits: &BitSlice<u8, Lsb0>, width: usize) -> Vec<u32> {
    bits.chunks_exact(width).map(|c| c.load_le::<u32>()).collect()
}
