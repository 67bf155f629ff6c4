//! A subset of the SP800-22 statistical tests.
//!
//! Implemented: frequency (monobit), frequency within a block, runs, longest
//! run of ones, cumulative sums (both directions), serial (both statistics),
//! approximate entropy and the discrete Fourier transform test. Formulas and
//! constants follow revision 1a of the standard and its reference code.
//!
//! Bits are passed as one byte per bit, each 0 or 1.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::bitgen::{BitStream, StreamLabel};

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum RandTestError {
    #[error("{test}: needs at least {needed} bits, got {got}")]
    TooShort { test: &'static str, needed: usize, got: usize },
    #[error("{test}: {reason}")]
    InvalidParameter { test: &'static str, reason: String },
    #[error("stream {label}: needs {needed} bits for the requested sequences, got {got}")]
    InsufficientBits { label: String, needed: usize, got: usize },
}

type Result<T> = std::result::Result<T, RandTestError>;

/// Outcome of one test on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: &'static str,
    pub p_value: f64,
    pub alpha: f64,
    pub passed: bool,
    pub parameters: BTreeMap<&'static str, f64>,
}

impl TestResult {
    fn new(name: &'static str, p_value: f64, parameters: &[(&'static str, f64)]) -> Self {
        let p_value = if p_value.is_nan() { 0.0 } else { p_value.clamp(0.0, 1.0) };
        Self {
            name,
            p_value,
            alpha: DEFAULT_ALPHA,
            passed: p_value >= DEFAULT_ALPHA,
            parameters: parameters.iter().copied().collect(),
        }
    }

    /// Re-evaluates `passed` at another significance level.
    pub fn at_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.passed = self.p_value >= alpha;
        self
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if !x.is_finite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn require_len(test: &'static str, bits: &[u8], needed: usize) -> Result<()> {
    if bits.len() < needed {
        return Err(RandTestError::TooShort { test, needed, got: bits.len() });
    }
    Ok(())
}

fn invalid(test: &'static str, reason: impl Into<String>) -> RandTestError {
    RandTestError::InvalidParameter { test, reason: reason.into() }
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().map(|&b| b as usize).sum()
}

/// Monobit p-value without the length precondition.
pub fn monobit_p(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let s = 2.0 * ones(bits) as f64 - n;
    erfc(s.abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

pub fn monobit(bits: &[u8]) -> Result<TestResult> {
    require_len("monobit", bits, 100)?;
    Ok(TestResult::new("monobit", monobit_p(bits), &[("n", bits.len() as f64)]))
}

/// Block-frequency p-value without preconditions (`m` must be positive).
pub fn block_frequency_p(bits: &[u8], m: usize) -> f64 {
    let blocks = bits.len() / m;
    let chi2: f64 = bits
        .chunks_exact(m)
        .map(|b| {
            let pi = ones(b) as f64 / m as f64 - 0.5;
            pi * pi
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    igamc(blocks as f64 / 2.0, chi2 / 2.0)
}

pub fn block_frequency(bits: &[u8], m: usize) -> Result<TestResult> {
    const NAME: &str = "block_frequency";
    require_len(NAME, bits, 100)?;
    if m < 20 || m > bits.len() {
        return Err(invalid(NAME, format!("block length {m} must be in [20, n]")));
    }
    Ok(TestResult::new(NAME, block_frequency_p(bits, m), &[("M", m as f64)]))
}

/// Runs p-value without the length precondition. Returns 0 when the frequency
/// prerequisite `|pi - 1/2| < 2 / sqrt(n)` fails.
pub fn runs_p(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let pi = ones(bits) as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let v_obs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let q = pi * (1.0 - pi);
    erfc((v_obs as f64 - 2.0 * n * q).abs() / (2.0 * (2.0 * n).sqrt() * q))
}

pub fn runs(bits: &[u8]) -> Result<TestResult> {
    require_len("runs", bits, 100)?;
    Ok(TestResult::new("runs", runs_p(bits), &[]))
}

struct LongestRunTable {
    block: usize,
    first_class: usize,
    pi: &'static [f64],
}

// Class probabilities from the reference implementation.
const LONGEST_RUN_SMALL: LongestRunTable =
    LongestRunTable { block: 8, first_class: 1, pi: &[0.21484375, 0.3671875, 0.23046875, 0.1875] };
const LONGEST_RUN_MEDIUM: LongestRunTable = LongestRunTable {
    block: 128,
    first_class: 4,
    pi: &[0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847],
};
const LONGEST_RUN_LARGE: LongestRunTable = LongestRunTable {
    block: 10_000,
    first_class: 10,
    pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

pub fn longest_run_of_ones(bits: &[u8]) -> Result<TestResult> {
    const NAME: &str = "longest_run";
    require_len(NAME, bits, 128)?;
    let table = match bits.len() {
        n if n < 6272 => &LONGEST_RUN_SMALL,
        n if n < 750_000 => &LONGEST_RUN_MEDIUM,
        _ => &LONGEST_RUN_LARGE,
    };
    let k = table.pi.len() - 1;
    let mut nu = vec![0usize; k + 1];
    for block in bits.chunks_exact(table.block) {
        let (mut best, mut cur) = (0usize, 0usize);
        for &b in block {
            cur = if b == 1 { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        nu[best.saturating_sub(table.first_class).min(k)] += 1;
    }
    let blocks = (bits.len() / table.block) as f64;
    let chi2: f64 = nu
        .iter()
        .zip(table.pi)
        .map(|(&v, &p)| (v as f64 - blocks * p).powi(2) / (blocks * p))
        .sum();
    let p = igamc(k as f64 / 2.0, chi2 / 2.0);
    Ok(TestResult::new(NAME, p, &[("M", table.block as f64), ("K", k as f64)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusumMode {
    Forward,
    Reverse,
}

/// Cumulative-sums p-value without the length precondition. Summation bounds
/// use truncating integer division, as the reference code does.
pub fn cumulative_sums_p(bits: &[u8], mode: CusumMode) -> f64 {
    let n = bits.len() as i64;
    let step = |acc: (i64, i64), &b: &u8| {
        let s = acc.0 + if b == 1 { 1 } else { -1 };
        (s, acc.1.max(s.abs()))
    };
    let (_, z) = match mode {
        CusumMode::Forward => bits.iter().fold((0, 0), step),
        CusumMode::Reverse => bits.iter().rev().fold((0, 0), step),
    };
    if z == 0 {
        return 1.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let phi = |k: i64, off: i64| normal_cdf((4 * k + off) as f64 * zf / sqrt_n);
    let nz = n / z;
    let first: f64 = ((-nz + 1) / 4..=(nz - 1) / 4).map(|k| phi(k, 1) - phi(k, -1)).sum();
    let second: f64 = ((-nz - 3) / 4..=(nz - 1) / 4).map(|k| phi(k, 3) - phi(k, 1)).sum();
    1.0 - first + second
}

pub fn cumulative_sums(bits: &[u8], mode: CusumMode) -> Result<TestResult> {
    let name = match mode {
        CusumMode::Forward => "cusum_forward",
        CusumMode::Reverse => "cusum_reverse",
    };
    require_len(name, bits, 100)?;
    Ok(TestResult::new(name, cumulative_sums_p(bits, mode), &[]))
}

/// Frequencies of all overlapping `m`-bit patterns, the sequence wrapping
/// around at the end.
fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let n = bits.len();
    if m == 0 {
        return vec![n as u64];
    }
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut window = 0usize;
    for &b in &bits[..m - 1] {
        window = (window << 1) | b as usize;
    }
    for i in 0..n {
        window = ((window << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[window] += 1;
    }
    counts
}

fn psi_squared(bits: &[u8], m: isize) -> f64 {
    if m <= 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    let sum: f64 = pattern_counts(bits, m as usize).iter().map(|&c| (c * c) as f64).sum();
    sum * (1u64 << m) as f64 / n - n
}

/// Serial p-values `(p1, p2)` without preconditions (`m >= 2`).
pub fn serial_p(bits: &[u8], m: usize) -> (f64, f64) {
    let m = m as isize;
    let (p0, p1, p2) = (psi_squared(bits, m), psi_squared(bits, m - 1), psi_squared(bits, m - 2));
    let del1 = p0 - p1;
    let del2 = p0 - 2.0 * p1 + p2;
    (
        igamc(2f64.powi(m as i32 - 2), del1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), del2 / 2.0),
    )
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.max(1).leading_zeros()) as usize
}

/// Both serial statistics, named `serial_1` and `serial_2`.
pub fn serial(bits: &[u8], m: usize) -> Result<[TestResult; 2]> {
    const NAME: &str = "serial";
    require_len(NAME, bits, 100)?;
    let limit = floor_log2(bits.len()).saturating_sub(2);
    if m < 2 || m >= limit {
        return Err(invalid(NAME, format!("block length {m} must satisfy 2 <= m < {limit}")));
    }
    let (a, b) = serial_p(bits, m);
    let params = [("m", m as f64)];
    Ok([TestResult::new("serial_1", a, &params), TestResult::new("serial_2", b, &params)])
}

/// Approximate-entropy p-value without preconditions.
pub fn approximate_entropy_p(bits: &[u8], m: usize) -> f64 {
    let n = bits.len() as f64;
    let phi = |mm: usize| -> f64 {
        pattern_counts(bits, mm)
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum()
    };
    let ap_en = phi(m) - phi(m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - ap_en);
    igamc(2f64.powi(m as i32 - 1), chi2 / 2.0)
}

pub fn approximate_entropy(bits: &[u8], m: usize) -> Result<TestResult> {
    const NAME: &str = "approximate_entropy";
    require_len(NAME, bits, 100)?;
    let limit = floor_log2(bits.len()).saturating_sub(5);
    if m < 1 || m >= limit {
        return Err(invalid(NAME, format!("block length {m} must satisfy 1 <= m < {limit}")));
    }
    Ok(TestResult::new(NAME, approximate_entropy_p(bits, m), &[("m", m as f64)]))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_for(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Spectral-test p-value without the length precondition.
///
/// Peak threshold `T = sqrt(ln(1/0.05) n)`; the count of the first `n/2`
/// moduli below `T` is compared with `0.95 n / 2` using the corrected variance
/// `n (0.95)(0.05) / 4`. Older publications divide by 2 instead.
pub fn dft_spectral_p(bits: &[u8]) -> f64 {
    let n = bits.len();
    let mut buf: Vec<Complex<f64>> =
        bits.iter().map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0)).collect();
    fft_for(n).process(&mut buf);
    let threshold = ((1.0f64 / 0.05).ln() * n as f64).sqrt();
    let below = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let expected = 0.95 * n as f64 / 2.0;
    let d = (below - expected) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    erfc(d.abs() / std::f64::consts::SQRT_2)
}

pub fn dft_spectral(bits: &[u8]) -> Result<TestResult> {
    require_len("dft", bits, 1000)?;
    Ok(TestResult::new("dft", dft_spectral_p(bits), &[]))
}

/// Block sizes used by [`run_tests`] and [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteParams {
    pub alpha: f64,
    pub block_frequency_m: usize,
    pub serial_m: usize,
    pub approximate_entropy_m: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, block_frequency_m: 128, serial_m: 16, approximate_entropy_m: 10 }
    }
}

/// Names of the p-values produced per sequence, in report order.
pub const TEST_NAMES: [&str; 10] = [
    "monobit",
    "block_frequency",
    "runs",
    "longest_run",
    "cusum_forward",
    "cusum_reverse",
    "serial_1",
    "serial_2",
    "approximate_entropy",
    "dft",
];

/// Every implemented test on one sequence.
pub fn run_tests(bits: &[u8], params: &SuiteParams) -> Result<Vec<TestResult>> {
    let [s1, s2] = serial(bits, params.serial_m)?;
    let all = vec![
        monobit(bits)?,
        block_frequency(bits, params.block_frequency_m)?,
        runs(bits)?,
        longest_run_of_ones(bits)?,
        cumulative_sums(bits, CusumMode::Forward)?,
        cumulative_sums(bits, CusumMode::Reverse)?,
        s1,
        s2,
        approximate_entropy(bits, params.approximate_entropy_m)?,
        dft_spectral(bits)?,
    ];
    Ok(all.into_iter().map(|r| r.at_alpha(params.alpha)).collect())
}

/// Pass proportion and mean p-value of one test over all sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub test: &'static str,
    pub passed: usize,
    pub n_sequences: usize,
    pub mean_p_value: f64,
}

impl SuiteRow {
    pub fn proportion(&self) -> f64 {
        self.passed as f64 / self.n_sequences as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub label: StreamLabel,
    pub n_sequences: usize,
    pub seq_len: usize,
    pub alpha: f64,
    pub rows: Vec<SuiteRow>,
    /// `results[i]` holds every test result for sequence `i`.
    pub results: Vec<Vec<TestResult>>,
}

impl SuiteReport {
    pub fn row(&self, test: &str) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.test == test)
    }

    /// Writes `test,p_value,proportion_pass,n_sequences`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "test,p_value,proportion_pass,n_sequences")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.test, r.mean_p_value, r.proportion(), r.n_sequences)?;
        }
        Ok(())
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} sequences x {} bits, alpha = {}",
            self.label, self.n_sequences, self.seq_len, self.alpha
        )?;
        writeln!(f, "  {:<22} {:>10} {:>12}", "test", "mean p", "proportion")?;
        for r in &self.rows {
            writeln!(
                f,
                "  {:<22} {:>10.6} {:>12}",
                r.test,
                r.mean_p_value,
                format!("{}/{}", r.passed, r.n_sequences)
            )?;
        }
        Ok(())
    }
}

/// Splits a stream into `n_sequences` consecutive sequences of `seq_len` bits
/// and runs every test on each.
pub fn run_suite_on(
    stream: &BitStream,
    n_sequences: usize,
    seq_len: usize,
    params: &SuiteParams,
) -> Result<SuiteReport> {
    let needed = n_sequences * seq_len;
    if stream.len() < needed || n_sequences == 0 {
        return Err(RandTestError::InsufficientBits {
            label: stream.label.to_string(),
            needed,
            got: stream.len(),
        });
    }
    let results: Vec<Vec<TestResult>> = (0..n_sequences)
        .into_par_iter()
        .map(|i| {
            let seq: Vec<u8> =
                stream.bits[i * seq_len..(i + 1) * seq_len].iter().by_vals().map(u8::from).collect();
            run_tests(&seq, params)
        })
        .collect::<Result<_>>()?;

    let rows = TEST_NAMES
        .iter()
        .enumerate()
        .map(|(k, &test)| {
            let column = results.iter().map(|r| &r[k]);
            SuiteRow {
                test,
                passed: column.clone().filter(|r| r.passed).count(),
                n_sequences,
                mean_p_value: column.map(|r| r.p_value).sum::<f64>() / n_sequences as f64,
            }
        })
        .collect();
    Ok(SuiteReport { label: stream.label, n_sequences, seq_len, alpha: params.alpha, rows, results })
}

/// One report per stream.
pub fn run_suite(
    streams: &[BitStream],
    n_sequences: usize,
    seq_len: usize,
    params: &SuiteParams,
) -> Result<Vec<SuiteReport>> {
    streams.iter().map(|s| run_suite_on(s, n_sequences, seq_len, params)).collect()
}

/// Lowest acceptable pass proportion over `n` sequences: three standard
/// deviations below `1 - alpha`.
pub fn proportion_floor(alpha: f64, n: usize) -> f64 {
    let p = 1.0 - alpha;
    p - 3.0 * (p * alpha / n as f64).sqrt()
}

/// Chi-square flatness of a histogram against the uniform distribution.
/// Returns `(statistic, p_value)`.
pub fn histogram_chi_square(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (counts.len() - 1) as f64;
    (chi2, igamc(dof / 2.0, chi2 / 2.0))
}
