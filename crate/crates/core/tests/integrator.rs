//! Solver and dynamics checked against independent straight-line code.

use hyperchaos::chaos::{self, BackendKind, Double, Fixed, Rk4, StateVec};
use hyperchaos::dynamics;
use hyperchaos::{InitialCondition, OverflowPolicy, SolverConfig};
use proptest::prelude::*;

type V = [f64; 5];

fn field(s: V) -> V {
    let [x, y, z, u, v] = s;
    [y, z, u, -z - 0.5 * u + (x - 1.0) * y, -u - 0.5 * v + (x - 1.0) * z]
}

fn axpy(s: V, a: f64, k: V) -> V {
    std::array::from_fn(|i| s[i] + a * k[i])
}

fn rk4(s: V, h: f64) -> V {
    let k1 = field(s);
    let k2 = field(axpy(s, h / 2.0, k1));
    let k3 = field(axpy(s, h / 2.0, k2));
    let k4 = field(axpy(s, h, k3));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn integrate(mut s: V, h: f64, n: usize) -> V {
    for _ in 0..n {
        s = rk4(s, h);
    }
    s
}

fn max_diff(a: V, b: V) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

const DEFAULT_IC: V = [0.0002, 0.0005, 0.00005, 0.001, 0.0];

#[test]
fn double_step_matches_reference() {
    let rk = Rk4::new(Double, 0.01).unwrap();
    let mut s = StateVec::from_array(DEFAULT_IC);
    for _ in 0..10_000 {
        let r = rk4(s.to_array(), 0.01);
        s = rk.step(&s).unwrap();
        assert!(max_diff(s.to_array(), r) < 1e-15);
    }
}

#[test]
fn fixed_step_tracks_double() {
    let cfg = SolverConfig { backend: BackendKind::Fixed, overflow: OverflowPolicy::Trap, ..Default::default() };
    let s = StateVec::from_array(DEFAULT_IC);
    let one = chaos::rk4_step(&s, &cfg).unwrap();
    assert!(max_diff(one.to_array(), rk4(DEFAULT_IC, 0.01)) <= 2f64.powi(-20));

    let ic = InitialCondition::default();
    let fixed = chaos::trajectory(&ic, 100, &cfg).unwrap().to_f64();
    let reference = integrate(DEFAULT_IC, 0.01, 100);
    assert!(max_diff(fixed[99].to_array(), reference) <= 1e-4);
}

#[test]
fn fourth_order_convergence() {
    // Error of a horizon-T integration against a fine reference shrinks by
    // about 2^4 when h halves.
    let t = 2.0;
    let start = [0.2, 0.3, -0.1, 0.25, 0.1];
    let truth = integrate(start, t / 4096.0, 4096);
    let err = |n: usize| max_diff(integrate(start, t / n as f64, n), truth);
    let ratio = err(50) / err(100);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn fixed_trajectory_is_deterministic() {
    let cfg = SolverConfig::default();
    let ic = InitialCondition::default();
    let a = chaos::trajectory(&ic, 5000, &cfg).unwrap();
    let b = chaos::trajectory(&ic, 5000, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn long_trapped_run_near_the_chaotic_regime() {
    let ic = InitialCondition::with_c(0.05);
    let rk = Rk4::new(Fixed::new(OverflowPolicy::Trap), 0.01).unwrap();
    assert!(rk.advance(ic.to_fixed().unwrap(), 1_000_000).is_ok());
}

#[test]
fn stable_regime_settles() {
    let ic = InitialCondition::with_c(0.6);
    let end = integrate([ic.x0, ic.y0, ic.z0, ic.u0, ic.v0], 0.01, 100_000);
    assert!(end[3].abs() < 1e-6, "u = {}", end[3]);
}

#[test]
fn conserved_quantity_drifts_only_by_truncation() {
    let invariant = |s: V| s[3] + s[1] + 0.5 * s[2] - (s[0] - 1.0).powi(2) / 2.0;
    let end = integrate(DEFAULT_IC, 0.01, 100_000);
    assert!((invariant(end) - invariant(DEFAULT_IC)).abs() < 1e-9);
}

fn state() -> impl Strategy<Value = V> {
    prop::array::uniform5(-5.0f64..5.0)
}

proptest! {
    #[test]
    fn jacobian_matches_finite_differences(s in state()) {
        let j = dynamics::jacobian(&StateVec::from_array(s));
        let eps = 1e-6;
        for col in 0..5 {
            let mut hi = s;
            let mut lo = s;
            hi[col] += eps;
            lo[col] -= eps;
            let (fh, fl) = (field(hi), field(lo));
            for row in 0..5 {
                let fd = (fh[row] - fl[row]) / (2.0 * eps);
                prop_assert!((j[(row, col)] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_trace_is_minus_one(s in state()) {
        prop_assert!((dynamics::jacobian(&StateVec::from_array(s)).trace() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_line_is_fixed(c in -5.0f64..5.0) {
        let e = [c, 0.0, 0.0, 0.0, 0.0];
        prop_assert_eq!(rk4(e, 0.01), e);
        let rk = Rk4::new(Double, 0.01).unwrap();
        prop_assert_eq!(rk.step(&StateVec::from_array(e)).unwrap().to_array(), e);
    }
}
