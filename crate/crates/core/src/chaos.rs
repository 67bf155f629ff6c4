//! The 5D hyperchaotic vector field and its fourth-order Runge-Kutta stepper.
//!
//! The field is
//!
//! ```text
//! x' = y
//! y' = z
//! z' = u
//! u' = -z - 0.5 u + (x - 1) y
//! v' = -u - 0.5 v + (x - 1) z
//! ```
//!
//! Arithmetic goes through a [`Backend`], so the same stepper runs on the
//! Q4.27 datapath ([`Fixed`]) and in double precision ([`Double`]). The stepper
//! owns exactly one field evaluator and calls it for all four stages.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::fxp::{FxError, Fx32, OverflowPolicy};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum ChaosError {
    #[error("step size must be positive and representable, got {0}")]
    InvalidStep(f64),
    #[error("initial condition not representable: {0}")]
    InitialCondition(FxError),
    #[error("arithmetic trap at step {step}: {source}")]
    Trap { step: usize, source: FxError },
    #[error("trajectory needs at least one step")]
    NoSteps,
}

/// System state `(x, y, z, u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StateVec<S> {
    pub x: S,
    pub y: S,
    pub z: S,
    pub u: S,
    pub v: S,
}

impl<S: Copy> StateVec<S> {
    pub const fn new(x: S, y: S, z: S, u: S, v: S) -> Self {
        Self { x, y, z, u, v }
    }

    pub fn from_array(a: [S; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [S; 5] {
        [self.x, self.y, self.z, self.u, self.v]
    }

    pub fn map<T: Copy>(self, mut f: impl FnMut(S) -> T) -> StateVec<T> {
        StateVec::new(f(self.x), f(self.y), f(self.z), f(self.u), f(self.v))
    }

    fn try_zip(
        self,
        other: Self,
        mut f: impl FnMut(S, S) -> Result<S, FxError>,
    ) -> Result<Self, FxError> {
        Ok(Self::new(
            f(self.x, other.x)?,
            f(self.y, other.y)?,
            f(self.z, other.z)?,
            f(self.u, other.u)?,
            f(self.v, other.v)?,
        ))
    }
}

impl StateVec<Fx32> {
    pub fn to_f64(self) -> StateVec<f64> {
        self.map(Fx32::to_f64)
    }
}

impl StateVec<f64> {
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Scalar arithmetic used by the field and the stepper.
///
/// Every fallible operation reports overflow; the double backend never fails.
pub trait Backend {
    type Scalar: Copy + PartialEq + fmt::Debug;

    fn constant(&self, r: f64) -> Result<Self::Scalar, FxError>;
    fn add(&self, a: Self::Scalar, b: Self::Scalar) -> Result<Self::Scalar, FxError>;
    fn sub(&self, a: Self::Scalar, b: Self::Scalar) -> Result<Self::Scalar, FxError>;
    fn mul(&self, a: Self::Scalar, b: Self::Scalar) -> Result<Self::Scalar, FxError>;
    fn neg(&self, a: Self::Scalar) -> Result<Self::Scalar, FxError>;
    fn half(&self, a: Self::Scalar) -> Self::Scalar;
    fn zero(&self) -> Self::Scalar;
    fn one(&self) -> Self::Scalar;
    fn to_f64(&self, a: Self::Scalar) -> f64;
}

/// Q4.27 arithmetic under one overflow policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Fixed {
    pub policy: OverflowPolicy,
}

impl Fixed {
    pub fn new(policy: OverflowPolicy) -> Self {
        Self { policy }
    }
}

impl Backend for Fixed {
    type Scalar = Fx32;

    fn constant(&self, r: f64) -> Result<Fx32, FxError> {
        Fx32::from_real(r, OverflowPolicy::Trap)
    }
    #[inline]
    fn add(&self, a: Fx32, b: Fx32) -> Result<Fx32, FxError> {
        a.add(b, self.policy)
    }
    #[inline]
    fn sub(&self, a: Fx32, b: Fx32) -> Result<Fx32, FxError> {
        a.sub(b, self.policy)
    }
    #[inline]
    fn mul(&self, a: Fx32, b: Fx32) -> Result<Fx32, FxError> {
        a.mul(b, self.policy)
    }
    #[inline]
    fn neg(&self, a: Fx32) -> Result<Fx32, FxError> {
        a.neg(self.policy)
    }
    #[inline]
    fn half(&self, a: Fx32) -> Fx32 {
        a.half()
    }
    fn zero(&self) -> Fx32 {
        Fx32::ZERO
    }
    fn one(&self) -> Fx32 {
        Fx32::ONE
    }
    fn to_f64(&self, a: Fx32) -> f64 {
        a.to_f64()
    }
}

/// IEEE double arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Double;

impl Backend for Double {
    type Scalar = f64;

    fn constant(&self, r: f64) -> Result<f64, FxError> {
        Ok(r)
    }
    #[inline]
    fn add(&self, a: f64, b: f64) -> Result<f64, FxError> {
        Ok(a + b)
    }
    #[inline]
    fn sub(&self, a: f64, b: f64) -> Result<f64, FxError> {
        Ok(a - b)
    }
    #[inline]
    fn mul(&self, a: f64, b: f64) -> Result<f64, FxError> {
        Ok(a * b)
    }
    #[inline]
    fn neg(&self, a: f64) -> Result<f64, FxError> {
        Ok(-a)
    }
    #[inline]
    fn half(&self, a: f64) -> f64 {
        0.5 * a
    }
    fn zero(&self) -> f64 {
        0.0
    }
    fn one(&self) -> f64 {
        1.0
    }
    fn to_f64(&self, a: f64) -> f64 {
        a
    }
}

/// An autonomous vector field `S' = F(S)` on the five-component state.
pub trait VectorField {
    fn eval<B: Backend>(
        &self,
        backend: &B,
        s: &StateVec<B::Scalar>,
    ) -> Result<StateVec<B::Scalar>, FxError>;
}

/// The 5D hyperchaotic system.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hyperchaos;

impl VectorField for Hyperchaos {
    #[inline]
    fn eval<B: Backend>(
        &self,
        b: &B,
        s: &StateVec<B::Scalar>,
    ) -> Result<StateVec<B::Scalar>, FxError> {
        let xm1 = b.sub(s.x, b.one())?;
        let fu = b.add(b.sub(b.neg(s.z)?, b.half(s.u))?, b.mul(xm1, s.y)?)?;
        let fv = b.add(b.sub(b.neg(s.u)?, b.half(s.v))?, b.mul(xm1, s.z)?)?;
        Ok(StateVec::new(s.y, s.z, s.u, fu, fv))
    }
}

/// Evaluates the hyperchaotic field in the given backend.
pub fn eval_f<B: Backend>(
    backend: &B,
    s: &StateVec<B::Scalar>,
) -> Result<StateVec<B::Scalar>, FxError> {
    Hyperchaos.eval(backend, s)
}

/// Classic RK4 with the step constants precomputed in the backend format.
///
/// The update is `S + (h/6)(k1 + k4) + (h/6)(2 (k2 + k3))`. Splitting the
/// weighted sum in two keeps every intermediate inside Q4.27: on the attractor
/// `|k1 + 2k2 + 2k3 + k4|` reaches about 19.
#[derive(Debug, Clone)]
pub struct Rk4<B: Backend, F = Hyperchaos> {
    backend: B,
    field: F,
    h: B::Scalar,
    h_half: B::Scalar,
    h_sixth: B::Scalar,
}

impl<B: Backend> Rk4<B, Hyperchaos> {
    pub fn new(backend: B, h: f64) -> Result<Self, ChaosError> {
        Self::with_field(backend, Hyperchaos, h)
    }
}

impl<B: Backend, F: VectorField> Rk4<B, F> {
    pub fn with_field(backend: B, field: F, h: f64) -> Result<Self, ChaosError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(ChaosError::InvalidStep(h));
        }
        let c = |r: f64| backend.constant(r).map_err(|_| ChaosError::InvalidStep(h));
        let (hc, h_half, h_sixth) = (c(h)?, c(h / 2.0)?, c(h / 6.0)?);
        if hc == backend.zero() || h_sixth == backend.zero() {
            return Err(ChaosError::InvalidStep(h));
        }
        Ok(Self { h: hc, h_half, h_sixth, backend, field })
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    /// The step constants `(h, h/2, h/6)` as stored.
    pub fn constants(&self) -> (B::Scalar, B::Scalar, B::Scalar) {
        (self.h, self.h_half, self.h_sixth)
    }

    /// Advances one step.
    pub fn step(&self, s: &StateVec<B::Scalar>) -> Result<StateVec<B::Scalar>, FxError> {
        let b = &self.backend;
        let axpy = |base: &StateVec<B::Scalar>, a: B::Scalar, k: &StateVec<B::Scalar>| {
            base.try_zip(*k, |p, q| b.add(p, b.mul(a, q)?))
        };

        let k1 = self.field.eval(b, s)?;
        let k2 = self.field.eval(b, &axpy(s, self.h_half, &k1)?)?;
        let k3 = self.field.eval(b, &axpy(s, self.h_half, &k2)?)?;
        let k4 = self.field.eval(b, &axpy(s, self.h, &k3)?)?;

        let outer = k1.try_zip(k4, |p, q| b.add(p, q))?;
        let inner = k2.try_zip(k3, |p, q| {
            let t = b.add(p, q)?;
            b.add(t, t)
        })?;
        let next = axpy(s, self.h_sixth, &outer)?;
        axpy(&next, self.h_sixth, &inner)
    }

    /// Runs `n_steps` steps and returns every state after the initial one.
    pub fn trajectory(
        &self,
        start: StateVec<B::Scalar>,
        n_steps: usize,
    ) -> Result<Vec<StateVec<B::Scalar>>, ChaosError> {
        if n_steps == 0 {
            return Err(ChaosError::NoSteps);
        }
        let mut out = Vec::with_capacity(n_steps);
        let mut s = start;
        for i in 0..n_steps {
            s = self.step(&s).map_err(|source| ChaosError::Trap { step: i + 1, source })?;
            out.push(s);
        }
        Ok(out)
    }

    /// Like [`Rk4::trajectory`] but only keeps the final state.
    pub fn advance(
        &self,
        start: StateVec<B::Scalar>,
        n_steps: usize,
    ) -> Result<StateVec<B::Scalar>, ChaosError> {
        let mut s = start;
        for i in 0..n_steps {
            s = self.step(&s).map_err(|source| ChaosError::Trap { step: i + 1, source })?;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BackendKind {
    #[default]
    Fixed,
    Double,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Self::Fixed),
            "double" => Ok(Self::Double),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Double => "double",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub backend: BackendKind,
    pub overflow: OverflowPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { h: DEFAULT_STEP, backend: BackendKind::Fixed, overflow: OverflowPolicy::Wrap }
    }
}

/// Starting point of a run. `x0` is the parameter usually called `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Default for InitialCondition {
    /// `(0.0002, 0.0005, 0.00005, 0.001, 0)`.
    fn default() -> Self {
        Self { x0: 0.0002, y0: 0.0005, z0: 0.00005, u0: 0.001, v0: 0.0 }
    }
}

impl InitialCondition {
    /// The default condition with `x0` replaced by `c`.
    pub fn with_c(c: f64) -> Self {
        Self { x0: c, ..Self::default() }
    }

    pub fn to_state(&self) -> StateVec<f64> {
        StateVec::new(self.x0, self.y0, self.z0, self.u0, self.v0)
    }

    pub fn to_fixed(&self) -> Result<StateVec<Fx32>, ChaosError> {
        let c = |r| Fx32::from_real(r, OverflowPolicy::Trap).map_err(ChaosError::InitialCondition);
        Ok(StateVec::new(c(self.x0)?, c(self.y0)?, c(self.z0)?, c(self.u0)?, c(self.v0)?))
    }
}

/// Result of [`trajectory`], tagged by backend.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Fixed(Vec<StateVec<Fx32>>),
    Double(Vec<StateVec<f64>>),
}

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Self::Fixed(v) => v.len(),
            Self::Double(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<StateVec<f64>> {
        match self {
            Self::Fixed(v) => v.iter().map(|s| s.to_f64()).collect(),
            Self::Double(v) => v.clone(),
        }
    }
}

/// One step from `s` under `cfg`, for either backend.
pub fn rk4_step(s: &StateVec<f64>, cfg: &SolverConfig) -> Result<StateVec<f64>, ChaosError> {
    let trap = |source| ChaosError::Trap { step: 1, source };
    match cfg.backend {
        BackendKind::Double => Rk4::new(Double, cfg.h)?.step(s).map_err(trap),
        BackendKind::Fixed => {
            let start = InitialCondition { x0: s.x, y0: s.y, z0: s.z, u0: s.u, v0: s.v };
            let next = Rk4::new(Fixed::new(cfg.overflow), cfg.h)?
                .step(&start.to_fixed()?)
                .map_err(trap)?;
            Ok(next.to_f64())
        }
    }
}

pub fn trajectory(
    ic: &InitialCondition,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<Trajectory, ChaosError> {
    match cfg.backend {
        BackendKind::Fixed => {
            let stepper = Rk4::new(Fixed::new(cfg.overflow), cfg.h)?;
            Ok(Trajectory::Fixed(stepper.trajectory(ic.to_fixed()?, n_steps)?))
        }
        BackendKind::Double => {
            let stepper = Rk4::new(Double, cfg.h)?;
            Ok(Trajectory::Double(stepper.trajectory(ic.to_state(), n_steps)?))
        }
    }
}

/// Writes `step,x,y,z,u,v`; fixed-point runs also get `*_hex` raw columns.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    match traj {
        Trajectory::Double(states) => {
            writeln!(w, "step,x,y,z,u,v")?;
            for (i, s) in states.iter().enumerate() {
                writeln!(w, "{},{},{},{},{},{}", i + 1, s.x, s.y, s.z, s.u, s.v)?;
            }
        }
        Trajectory::Fixed(states) => {
            writeln!(w, "step,x,y,z,u,v,x_hex,y_hex,z_hex,u_hex,v_hex")?;
            for (i, s) in states.iter().enumerate() {
                let [x, y, z, u, v] = s.to_array();
                writeln!(
                    w,
                    "{},{x},{y},{z},{u},{v},{},{},{},{},{}",
                    i + 1,
                    x.to_hex(),
                    y.to_hex(),
                    z.to_hex(),
                    u.to_hex(),
                    v.to_hex()
                )?;
            }
        }
    }
    Ok(())
}
