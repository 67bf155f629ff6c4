//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=3,7` restricts the run to the listed criteria.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use hyperchaos::bitgen::{self, BitStream, Channel, Generator, GeneratorConfig};
use hyperchaos::chaos::{Double, Fixed, Rk4, StateVec};
use hyperchaos::dynamics::{self, Stability};
use hyperchaos::randtest::{self, SuiteParams};
use hyperchaos::{Fx32, InitialCondition, OverflowPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const H: f64 = 0.01;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn distinct(points: impl IntoIterator<Item = Vec<f64>>, quantum: f64) -> usize {
    points
        .into_iter()
        .map(|p| p.iter().map(|v| (v / quantum).round() as i64).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

fn divergence_identity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let mut c = || rng.gen_range(-10.0..10.0);
        let s = StateVec::new(c(), c(), c(), c(), c());
        worst = worst.max((dynamics::jacobian(&s).trace() + 1.0).abs());
    }
    outcome(worst < 1e-12, format!("max |tr J + 1| = {worst:e} over 1e5 states"))
}

fn stability_predicate() -> Outcome {
    let grid: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
    let mut mismatches = Vec::new();
    for &c in &grid {
        let r = dynamics::stability_at(c);
        let expect_stable = c > 0.5;
        let numeric_ok = (r.jacobian_classification == Stability::Stable) == expect_stable;
        let closed_ok = (r.classification == Stability::Stable) == expect_stable;
        if !numeric_ok || !closed_ok {
            mismatches.push(c);
        }
    }
    let at_half = dynamics::stability_at(0.5).jacobian_classification;
    outcome(
        mismatches.is_empty() && grid.contains(&0.5),
        format!("{} mismatches on c = i/200, i < 200; c = 0.5 -> {at_half:?}", mismatches.len()),
    )
}

fn lyapunov_reproduction() -> Outcome {
    match dynamics::lyapunov_spectrum(&InitialCondition::default(), 2e4, H) {
        Ok(s) => {
            let l = s.exponents;
            let near_zero = l.iter().filter(|&&e| e >= -0.01).count();
            let ok = (0.07..=0.12).contains(&l[0])
                && near_zero >= 3
                && (-1.05..=-0.95).contains(&s.sum())
                && (3.0..=3.4).contains(&s.dimension);
            outcome(
                ok,
                format!("L = {l:.6?}, sum = {:.6}, D_L = {:.6}", s.sum(), s.dimension),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn regime_reproduction() -> Outcome {
    // A zero exponent estimated over T time units carries an error of order 1/T.
    const ZERO_TOL: f64 = 1e-4;
    const QUANTUM: f64 = dynamics::EXTREMUM_QUANTUM;
    let t = 2e4;
    let mut notes = Vec::new();
    let mut ok = true;

    let stable = dynamics::lyapunov_spectrum(&InitialCondition::with_c(0.6), t, H);
    let stable_bif = dynamics::bifurcation_sample(0.6, dynamics::DEFAULT_TRANSIENT, 1000.0, H);
    match (stable, stable_bif) {
        (Ok(s), Ok(b)) => {
            let l1 = s.exponents[0];
            let d = b.distinct_extrema(QUANTUM);
            ok &= l1 <= ZERO_TOL && d <= 2;
            notes.push(format!("c=0.6: L1 = {l1:.2e}, {d} distinct extrema"));
        }
        (a, b) => {
            ok = false;
            notes.push(format!("c=0.6: {:?} {:?}", a.err(), b.err()));
        }
    }

    let ic = InitialCondition::with_c(0.05);
    let chaotic = dynamics::lyapunov_spectrum(&ic, t, H);
    let chaotic_bif = dynamics::bifurcation_sample(0.05, dynamics::DEFAULT_TRANSIENT, 1000.0, H);
    let section = dynamics::poincare_section(&ic, 1.0, t, H);
    match (chaotic, chaotic_bif, section) {
        (Ok(s), Ok(b), Ok(sec)) => {
            let l1 = s.exponents[0];
            let d = b.distinct_extrema(QUANTUM);
            let pts = distinct(sec.iter().map(|p| p.yzuv.to_vec()), QUANTUM);
            ok &= l1 > 0.05 && d > 50 && pts >= 100;
            notes.push(format!(
                "c=0.05: L1 = {l1:.4}, {d} distinct extrema, {} section crossings ({pts} distinct)",
                sec.len()
            ));
        }
        (a, b, c) => {
            ok = false;
            notes.push(format!("c=0.05: {:?} {:?} {:?}", a.err(), b.err(), c.err()));
        }
    }
    outcome(ok, notes.join("; "))
}

fn fixed_point_fidelity() -> Outcome {
    let ic = InitialCondition::default();
    let fixed = Rk4::new(Fixed::new(OverflowPolicy::Trap), H).unwrap();
    let double = Rk4::new(Double, H).unwrap();

    let (mut sf, mut sd) = (ic.to_fixed().unwrap(), ic.to_state());
    let mut worst = 0.0f64;
    for _ in 0..100 {
        sf = fixed.step(&sf).unwrap();
        sd = double.step(&sd).unwrap();
        worst = worst.max(sf.to_f64().max_abs_diff(&sd));
    }

    let long = fixed.advance(ic.to_fixed().unwrap(), 1_000_000);
    let trap_note = match &long {
        Ok(_) => "1e6 trapped steps, 0 overflow events".to_string(),
        Err(e) => e.to_string(),
    };
    outcome(
        worst <= 1e-4 && long.is_ok(),
        format!("100-step max deviation {worst:.3e}; {trap_note}"),
    )
}

fn entropy_knee() -> Outcome {
    let rk = Rk4::new(Fixed::new(OverflowPolicy::Wrap), H).unwrap();
    let start = rk.advance(InitialCondition::default().to_fixed().unwrap(), bitgen::DEFAULT_DISCARD).unwrap();
    let states: Vec<StateVec<Fx32>> = rk.trajectory(start, 1_000_000).unwrap();
    let rows = bitgen::entropy_sweep(&states, Channel::X, &[12, 16, 20, 24]).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.entropy_per_bit).collect();
    let ok = e[0] >= 0.99 && e[1] > e[2] && e[2] > e[3];
    outcome(ok, format!("E(12, 16, 20, 24) = {e:.4?} over {} states", states.len()))
}

fn generate(n_bits: usize) -> [BitStream; 5] {
    Generator::new(&GeneratorConfig::default()).unwrap().generate(n_bits).unwrap()
}

fn statistical_suite(streams: &[BitStream; 5]) -> Outcome {
    let params = SuiteParams::default();
    let reports = randtest::run_suite(streams, 100, 1_000_000, &params).unwrap();
    let mut failures = Vec::new();
    let mut lowest = 100;
    for r in &reports {
        for row in &r.rows {
            lowest = lowest.min(row.passed);
            if row.passed < 96 || !(row.mean_p_value > 0.01 && row.mean_p_value < 0.99) {
                failures.push(format!(
                    "{}/{} {}/100 mean p {:.4}",
                    r.label, row.test, row.passed, row.mean_p_value
                ));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("5 streams x {} tests, lowest proportion {lowest}/100", randtest::TEST_NAMES.len())
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn balance(streams: &[BitStream; 5]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for s in streams {
        let head = &s.bits[..10_000_000];
        let frac = head.count_ones() as f64 / head.len() as f64;
        let words = bitgen::assemble_words(head, 12);
        let mut hist = vec![0u64; 1 << 12];
        words.iter().for_each(|&w| hist[w as usize] += 1);
        let (_, p) = randtest::histogram_chi_square(&hist);
        ok &= (frac - 0.5).abs() <= 0.001 && p >= 0.001;
        notes.push(format!("{}: ones {frac:.5}, chi2 p {p:.3}", s.label));
    }
    outcome(ok, notes.join("; "))
}

fn throughput_statement() -> Outcome {
    let t0 = Instant::now();
    let n = 10_000_000;
    let out = generate(n);
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        true,
        format!(
            "hardware figures (6.78 Gbps, 113 MHz, 65-cycle latency, resources, power) are not \
             reproducible in software; measured {:.1} Mbit/s over {} output bits, no threshold",
            (5 * out[0].len()) as f64 / secs / 1e6,
            5 * n
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));

    // criteria 7 and 8 share one 1e8-bit run of the generator
    let cell = std::cell::OnceCell::new();
    let streams = || cell.get_or_init(|| generate(100_000_000));

    let criteria: [(&str, Box<dyn FnOnce() -> Outcome + '_>); 9] = [
        ("divergence identity", Box::new(divergence_identity)),
        ("stability predicate", Box::new(stability_predicate)),
        ("Lyapunov reproduction", Box::new(lyapunov_reproduction)),
        ("regime reproduction", Box::new(regime_reproduction)),
        ("fixed-point fidelity", Box::new(fixed_point_fidelity)),
        ("entropy knee", Box::new(entropy_knee)),
        ("statistical suite", Box::new(|| statistical_suite(streams()))),
        ("post-processing balance", Box::new(|| balance(streams()))),
        ("hardware figures", Box::new(throughput_statement)),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let k = i + 1;
        if !wanted(k) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        let verdict = match (k, o.passed) {
            (9, _) => "N/A ",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        failed += usize::from(!o.passed);
        println!("criterion {k} [{name}]: {verdict} ({:.1}s) {}", t0.elapsed().as_secs_f64(), o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
