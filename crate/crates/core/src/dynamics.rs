//! Double-precision analysis of the flow: Jacobian, Lyapunov spectrum and
//! Kaplan-Yorke dimension, equilibrium stability, bifurcation sampling and
//! Poincare sections.

use std::io::{self, Write};

use nalgebra::{Complex, Matrix5};
use rayon::prelude::*;
use thiserror::Error;

use crate::chaos::{eval_f, Double, InitialCondition, Rk4, StateVec};

/// Trajectories whose Euclidean norm exceeds this are declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Steps between QR re-orthonormalizations of the tangent frame.
pub const REORTH_INTERVAL: usize = 10;

/// Transient discarded before collecting bifurcation extrema.
pub const DEFAULT_TRANSIENT: f64 = 500.0;

/// Bin width used when counting distinct extrema.
pub const EXTREMUM_QUANTUM: f64 = 1e-3;

const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("trajectory diverged (norm > {DIVERGENCE_NORM:e}) at t = {0}")]
    Diverged(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn steps_for(t: f64, h: f64) -> Result<usize, DynamicsError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("step size {h}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("duration {t}")));
    }
    Ok((t / h).round() as usize)
}

fn stepper(h: f64) -> Result<Rk4<Double>, DynamicsError> {
    Rk4::new(Double, h).map_err(|e| DynamicsError::InvalidArgument(e.to_string()))
}

#[inline]
fn double_step(rk: &Rk4<Double>, s: &StateVec<f64>) -> StateVec<f64> {
    // the double backend has no failure path
    rk.step(s).expect("double-precision step")
}

/// Partial derivatives of the field at `s`.
pub fn jacobian(s: &StateVec<f64>) -> Matrix5<f64> {
    let xm1 = s.x - 1.0;
    #[rustfmt::skip]
    let j = Matrix5::new(
        0.0, 1.0, 0.0,  0.0,  0.0,
        0.0, 0.0, 1.0,  0.0,  0.0,
        0.0, 0.0, 0.0,  1.0,  0.0,
        s.y, xm1, -1.0, -0.5, 0.0,
        s.z, 0.0, xm1,  -1.0, -0.5,
    );
    j
}

/// Lyapunov exponents in descending order plus the Kaplan-Yorke dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSpectrum {
    pub exponents: [f64; 5],
    pub dimension: f64,
}

impl LyapunovSpectrum {
    /// Sorts `exponents` and fills in the dimension.
    pub fn from_exponents(mut exponents: [f64; 5]) -> Result<Self, DynamicsError> {
        exponents.sort_by(|a, b| b.total_cmp(a));
        let dimension = lyapunov_dimension(&exponents)?;
        Ok(Self { exponents, dimension })
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Kaplan-Yorke dimension `j + (L1 + .. + Lj) / |L(j+1)|`, `j` being the
/// largest index whose partial sum is nonnegative.
///
/// Returns 0 when no exponent is positive. When every partial sum is
/// nonnegative the dimension is the number of exponents.
pub fn lyapunov_dimension(exponents: &[f64]) -> Result<f64, DynamicsError> {
    if exponents.iter().any(|l| !l.is_finite()) {
        return Err(DynamicsError::InvalidArgument("non-finite Lyapunov exponent".into()));
    }
    let mut sorted = exponents.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.first().is_none_or(|&l| l <= 0.0) {
        return Ok(0.0);
    }
    let mut partial = 0.0;
    let mut j = 0;
    while j < sorted.len() && partial + sorted[j] >= 0.0 {
        partial += sorted[j];
        j += 1;
    }
    if j == sorted.len() {
        return Ok(j as f64);
    }
    // sorted[j] < -partial <= 0 here, so the denominator is nonzero
    Ok(j as f64 + partial / sorted[j].abs())
}

/// Benettin estimate: the state and a 5x5 tangent frame are integrated
/// together with RK4, and the frame is QR re-orthonormalized every
/// [`REORTH_INTERVAL`] steps. Exponents are the time-averaged logs of the
/// `R` diagonal.
pub fn lyapunov_spectrum(
    ic: &InitialCondition,
    t_total: f64,
    h: f64,
) -> Result<LyapunovSpectrum, DynamicsError> {
    let n = steps_for(t_total, h)?;
    if n == 0 {
        return Err(DynamicsError::InvalidArgument("t_total shorter than one step".into()));
    }
    let rk = stepper(h)?;
    let mut s = ic.to_state();
    let mut frame = Matrix5::<f64>::identity();
    let mut log_sums = [0.0; 5];

    let mut renormalize = |frame: &mut Matrix5<f64>| {
        let qr = frame.qr();
        let r = qr.r();
        for (acc, k) in log_sums.iter_mut().zip(0..5) {
            *acc += r[(k, k)].abs().ln();
        }
        *frame = qr.q();
    };

    for i in 0..n {
        let tangent = |p: &StateVec<f64>, m: &Matrix5<f64>| jacobian(p) * m;
        let shift = |p: &StateVec<f64>, a: f64, k: &StateVec<f64>| {
            StateVec::new(p.x + a * k.x, p.y + a * k.y, p.z + a * k.z, p.u + a * k.u, p.v + a * k.v)
        };
        let f = |p: &StateVec<f64>| eval_f(&Double, p).expect("double-precision field");

        let k1 = f(&s);
        let m1 = tangent(&s, &frame);
        let s2 = shift(&s, 0.5 * h, &k1);
        let k2 = f(&s2);
        let m2 = tangent(&s2, &(frame + m1 * (0.5 * h)));
        let s3 = shift(&s, 0.5 * h, &k2);
        let k3 = f(&s3);
        let m3 = tangent(&s3, &(frame + m2 * (0.5 * h)));
        let s4 = shift(&s, h, &k3);
        let m4 = tangent(&s4, &(frame + m3 * h));

        s = double_step(&rk, &s);
        frame += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);

        if !(s.norm() <= DIVERGENCE_NORM) {
            return Err(DynamicsError::Diverged((i + 1) as f64 * h));
        }
        if (i + 1) % REORTH_INTERVAL == 0 || i + 1 == n {
            renormalize(&mut frame);
        }
    }

    let t = n as f64 * h;
    LyapunovSpectrum::from_exponents(log_sums.map(|l| l / t))
}

/// One spectrum per `c`, run in parallel. Divergent runs yield `None`.
pub fn lyapunov_sweep(
    c_values: &[f64],
    t_total: f64,
    h: f64,
) -> Result<Vec<(f64, Option<LyapunovSpectrum>)>, DynamicsError> {
    c_values
        .par_iter()
        .map(|&c| match lyapunov_spectrum(&InitialCondition::with_c(c), t_total, h) {
            Ok(spec) => Ok((c, Some(spec))),
            Err(DynamicsError::Diverged(_)) => Ok((c, None)),
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    MarginalZero,
    Unstable,
}

/// Stability of the equilibrium `(c, 0, 0, 0, 0)`.
///
/// `eigenvalues` are the roots of the reference characteristic polynomial
/// `l (l + 0.5) (l^2 + 1.5 l + (c - 0.5))`. `jacobian_eigenvalues` are computed
/// numerically from [`jacobian`] at the equilibrium, whose characteristic
/// polynomial is `l (l + 0.5) (l^3 + 0.5 l^2 + l + (1 - c))`. The two agree on
/// the sign pattern for `c` in `[0, 1)`; both classifications are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub c: f64,
    pub eigenvalues: Vec<Complex<f64>>,
    pub classification: Stability,
    pub jacobian_eigenvalues: Vec<Complex<f64>>,
    pub jacobian_classification: Stability,
}

/// Classifies a root set that contains the structural zero of the equilibrium
/// line. One root closest to zero is dropped; any other root with real part
/// within 1e-12 of zero makes the point marginal.
pub fn classify_roots(roots: &[Complex<f64>]) -> Stability {
    let structural = roots
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i);
    let rest = roots.iter().enumerate().filter(|(i, _)| Some(*i) != structural);
    let mut marginal = false;
    for (_, r) in rest {
        if r.re > ROOT_TOL {
            return Stability::Unstable;
        }
        if r.re.abs() <= ROOT_TOL {
            marginal = true;
        }
    }
    if marginal {
        Stability::MarginalZero
    } else {
        Stability::Stable
    }
}

/// Closed-form roots of `l (l + 0.5) (l^2 + 1.5 l + (c - 0.5))`.
pub fn characteristic_roots(c: f64) -> Vec<Complex<f64>> {
    let disc = Complex::new(2.25 - 4.0 * (c - 0.5), 0.0).sqrt();
    vec![
        Complex::new(0.0, 0.0),
        Complex::new(-0.5, 0.0),
        (Complex::new(-1.5, 0.0) + disc) * 0.5,
        (Complex::new(-1.5, 0.0) - disc) * 0.5,
    ]
}

pub fn stability_at(c: f64) -> StabilityReport {
    let eigenvalues = characteristic_roots(c);
    let jacobian_eigenvalues: Vec<_> = jacobian(&StateVec::new(c, 0.0, 0.0, 0.0, 0.0))
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    StabilityReport {
        c,
        classification: classify_roots(&eigenvalues),
        jacobian_classification: classify_roots(&jacobian_eigenvalues),
        eigenvalues,
        jacobian_eigenvalues,
    }
}

/// Local maxima of `x(t)` for one value of `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationSample {
    pub c: f64,
    /// Parabola-refined local maxima after the transient. A run that settles
    /// without oscillating records its final `x` instead.
    pub extrema: Vec<f64>,
    pub diverged: bool,
}

impl BifurcationSample {
    /// Number of extrema after binning to `quantum`.
    pub fn distinct_extrema(&self, quantum: f64) -> usize {
        let mut bins: Vec<i64> = self.extrema.iter().map(|e| (e / quantum).round() as i64).collect();
        bins.sort_unstable();
        bins.dedup();
        bins.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub n_points: usize,
    pub transient: f64,
    pub capture: f64,
    pub h: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            c_min: 0.0,
            c_max: 1.0,
            n_points: 200,
            transient: DEFAULT_TRANSIENT,
            capture: 1000.0,
            h: crate::chaos::DEFAULT_STEP,
        }
    }
}

impl SweepConfig {
    pub fn c_values(&self) -> Vec<f64> {
        match self.n_points {
            0 => Vec::new(),
            1 => vec![self.c_min],
            n => {
                let d = (self.c_max - self.c_min) / (n - 1) as f64;
                (0..n).map(|i| self.c_min + d * i as f64).collect()
            }
        }
    }
}

/// Integrates from [`InitialCondition::with_c`], skips `transient` time units,
/// then collects maxima of `x` for `capture` time units.
pub fn bifurcation_sample(
    c: f64,
    transient: f64,
    capture: f64,
    h: f64,
) -> Result<BifurcationSample, DynamicsError> {
    let rk = stepper(h)?;
    let skip = steps_for(transient, h)?;
    let keep = steps_for(capture, h)?;
    let diverged = || BifurcationSample { c, extrema: Vec::new(), diverged: true };

    let mut s = InitialCondition::with_c(c).to_state();
    for _ in 0..skip {
        s = double_step(&rk, &s);
        if !(s.norm() <= DIVERGENCE_NORM) {
            return Ok(diverged());
        }
    }

    let mut extrema = Vec::new();
    let (mut prev2, mut prev1) = (f64::NAN, s.x);
    for _ in 0..keep {
        s = double_step(&rk, &s);
        if !(s.norm() <= DIVERGENCE_NORM) {
            return Ok(diverged());
        }
        let cur = s.x;
        if prev2 < prev1 && prev1 >= cur {
            let curvature = prev2 - 2.0 * prev1 + cur;
            let peak = if curvature < 0.0 {
                prev1 - (cur - prev2).powi(2) / (8.0 * curvature)
            } else {
                prev1
            };
            extrema.push(peak);
        }
        prev2 = prev1;
        prev1 = cur;
    }
    if extrema.is_empty() {
        extrema.push(s.x);
    }
    Ok(BifurcationSample { c, extrema, diverged: false })
}

pub fn bifurcation_sweep(cfg: &SweepConfig) -> Result<Vec<BifurcationSample>, DynamicsError> {
    if !(0.0..=1.0).contains(&cfg.c_min) || !(0.0..=1.0).contains(&cfg.c_max) || cfg.c_min > cfg.c_max {
        return Err(DynamicsError::InvalidArgument(format!(
            "c range [{}, {}] must lie within [0, 1]",
            cfg.c_min, cfg.c_max
        )));
    }
    if !(cfg.transient >= 100.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "transient {} is shorter than 100 time units",
            cfg.transient
        )));
    }
    cfg.c_values()
        .into_par_iter()
        .map(|c| bifurcation_sample(c, cfg.transient, cfg.capture, cfg.h))
        .collect()
}

/// A positive-going crossing of the section plane `x = plane_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub t: f64,
    /// `x` at the interpolated crossing; equals the plane up to rounding.
    pub x: f64,
    pub yzuv: [f64; 4],
}

/// Positive-going crossings of `x = plane_x`, located by linear interpolation
/// between the bracketing steps.
pub fn poincare_section(
    ic: &InitialCondition,
    plane_x: f64,
    t_total: f64,
    h: f64,
) -> Result<Vec<SectionPoint>, DynamicsError> {
    let rk = stepper(h)?;
    let n = steps_for(t_total, h)?;
    let mut out = Vec::new();
    let mut s = ic.to_state();
    for i in 0..n {
        let next = double_step(&rk, &s);
        if !(next.norm() <= DIVERGENCE_NORM) {
            return Err(DynamicsError::Diverged((i + 1) as f64 * h));
        }
        if s.x < plane_x && next.x >= plane_x {
            let a = (plane_x - s.x) / (next.x - s.x);
            let lerp = |p: f64, q: f64| p + a * (q - p);
            out.push(SectionPoint {
                t: (i as f64 + a) * h,
                x: lerp(s.x, next.x),
                yzuv: [lerp(s.y, next.y), lerp(s.z, next.z), lerp(s.u, next.u), lerp(s.v, next.v)],
            });
        }
        s = next;
    }
    Ok(out)
}

/// Rows `c,L1,L2,L3,L4,L5,DL`; divergent runs are written as `c,diverged`.
pub fn write_spectrum_csv<W: Write>(
    mut w: W,
    rows: &[(f64, Option<LyapunovSpectrum>)],
) -> io::Result<()> {
    writeln!(w, "c,L1,L2,L3,L4,L5,DL")?;
    for (c, spec) in rows {
        match spec {
            Some(s) => {
                let [l1, l2, l3, l4, l5] = s.exponents;
                writeln!(w, "{c},{l1},{l2},{l3},{l4},{l5},{}", s.dimension)?
            }
            None => writeln!(w, "{c},diverged")?,
        }
    }
    Ok(())
}

/// Rows `c,extremum`, one per extremum; divergent samples are `c,diverged`.
pub fn write_bifurcation_csv<W: Write>(mut w: W, samples: &[BifurcationSample]) -> io::Result<()> {
    writeln!(w, "c,extremum")?;
    for s in samples {
        if s.diverged {
            writeln!(w, "{},diverged", s.c)?;
        }
        for e in &s.extrema {
            writeln!(w, "{},{e}", s.c)?;
        }
    }
    Ok(())
}

pub fn write_poincare_csv<W: Write>(mut w: W, points: &[SectionPoint]) -> io::Result<()> {
    writeln!(w, "y,z,u,v")?;
    for p in points {
        let [y, z, u, v] = p.yzuv;
        writeln!(w, "{y},{z},{u},{v}")?;
    }
    Ok(())
}
