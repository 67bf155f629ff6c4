use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hyperchaos::bitgen::{self, BitStream, Generator, StreamLabel};
use hyperchaos::chaos::{self, BackendKind, Double, Fixed, Rk4, StateVec};
use hyperchaos::dynamics::{self, DynamicsError, SweepConfig};
use hyperchaos::randtest::{self, SuiteParams};
use hyperchaos::{Fx32, OverflowPolicy};

use crate::config::{Format, RunConfig};
use crate::CliError;

fn announce(cfg: &RunConfig, command: &str) {
    println!("# effective configuration ({command})");
    print!("{}", cfg.effective(command));
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(cfg.out.join(name))
}

/// Creates `name` in the output directory and hands a buffered writer to `body`.
fn write_file(
    cfg: &RunConfig,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = out_path(cfg, name)?;
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "generate");
    let streams = Generator::new(&cfg.generator())?.generate(cfg.bits)?;
    for s in streams.iter().filter(|s| cfg.streams.contains(&s.label)) {
        let name = format!("{}.{}", s.label, cfg.format.extension());
        let path = write_file(cfg, &name, |w| match cfg.format {
            Format::Binary => s.write_packed(w),
            Format::Ascii => s.write_ascii(w),
        })?;
        println!("{}: {} bits ({} ones) -> {}", s.label, s.len(), s.ones(), path.display());
    }
    Ok(())
}

pub fn lyapunov(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "lyapunov");
    let rows = match cfg.points {
        Some(n) => {
            let grid = SweepConfig { c_min: cfg.c_min, c_max: cfg.c_max, n_points: n, ..Default::default() };
            dynamics::lyapunov_sweep(&grid.c_values(), cfg.t, cfg.solver.h)?
        }
        None => match dynamics::lyapunov_spectrum(&cfg.ic, cfg.t, cfg.solver.h) {
            Ok(s) => vec![(cfg.ic.x0, Some(s))],
            Err(DynamicsError::Diverged(_)) => vec![(cfg.ic.x0, None)],
            Err(e) => return Err(e.into()),
        },
    };
    for (c, spec) in &rows {
        match spec {
            Some(s) => println!(
                "c={c}: L = {:?}, sum = {:.6}, D_L = {:.6}",
                s.exponents.map(|l| (l * 1e6).round() / 1e6),
                s.sum(),
                s.dimension
            ),
            None => println!("c={c}: diverged"),
        }
    }
    let path = write_file(cfg, "lyapunov.csv", |w| dynamics::write_spectrum_csv(w, &rows))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn bifurcation(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "bifurcation");
    let sweep = SweepConfig {
        c_min: cfg.c_min,
        c_max: cfg.c_max,
        n_points: cfg.bifurcation_points(),
        transient: cfg.transient,
        capture: cfg.capture,
        h: cfg.solver.h,
    };
    let samples = dynamics::bifurcation_sweep(&sweep)?;
    let diverged = samples.iter().filter(|s| s.diverged).count();
    let path = write_file(cfg, "bifurcation.csv", |w| dynamics::write_bifurcation_csv(w, &samples))?;
    println!("{} values of c, {diverged} diverged -> {}", samples.len(), path.display());
    Ok(())
}

pub fn poincare(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "poincare");
    let points = match dynamics::poincare_section(&cfg.ic, cfg.plane, cfg.t, cfg.solver.h) {
        Ok(p) => p,
        Err(DynamicsError::Diverged(t)) => {
            println!("diverged at t = {t}; no section written");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let path = write_file(cfg, "poincare.csv", |w| dynamics::write_poincare_csv(w, &points))?;
    println!("{} crossings of x = {} -> {}", points.len(), cfg.plane, path.display());
    Ok(())
}

pub fn stability(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "stability");
    let r = dynamics::stability_at(cfg.ic.x0);
    let fmt = |v: Vec<(f64, f64)>| {
        v.iter().map(|(re, im)| format!("{re:.6}{im:+.6}i")).collect::<Vec<_>>().join(", ")
    };
    println!("characteristic roots: {}", fmt(r.eigenvalues.iter().map(|z| (z.re, z.im)).collect()));
    println!(
        "jacobian eigenvalues: {}",
        fmt(r.jacobian_eigenvalues.iter().map(|z| (z.re, z.im)).collect())
    );
    println!("classification: {:?}", r.jacobian_classification);
    Ok(())
}

pub fn trajectory(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "trajectory");
    let traj = chaos::trajectory(&cfg.ic, cfg.steps, &cfg.solver)?;
    let path = write_file(cfg, "trajectory.csv", |w| chaos::write_trajectory_csv(w, &traj))?;
    println!("{} states -> {}", traj.len(), path.display());
    Ok(())
}

/// Post-discard states as fixed-point words, whatever the backend.
fn fixed_states(cfg: &RunConfig, n: usize) -> Result<Vec<StateVec<Fx32>>, CliError> {
    let trap = |step, source| CliError::Trap(chaos::ChaosError::Trap { step, source });
    Ok(match cfg.solver.backend {
        BackendKind::Fixed => {
            let rk = Rk4::new(Fixed::new(cfg.solver.overflow), cfg.solver.h)?;
            let start = rk.advance(cfg.ic.to_fixed()?, cfg.discard)?;
            rk.trajectory(start, n)?
        }
        BackendKind::Double => {
            let rk = Rk4::new(Double, cfg.solver.h)?;
            let mut s = cfg.ic.to_state();
            let mut out = Vec::with_capacity(n);
            for i in 0..cfg.discard + n {
                s = rk.step(&s).map_err(|e| trap(i + 1, e))?;
                if i >= cfg.discard {
                    out.push(s.map(|c| Fx32::from_real(c, OverflowPolicy::Wrap).unwrap_or(Fx32::ZERO)));
                }
            }
            out
        }
    })
}

pub fn entropy(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "entropy");
    let states = fixed_states(cfg, cfg.states)?;
    let rows = bitgen::entropy_sweep(&states, cfg.channel, &cfg.widths)?;
    println!("{:>4} {:>16}", "Nb", "entropy_per_bit");
    for r in &rows {
        println!("{:>4} {:>16.6}", r.nb, r.entropy_per_bit);
    }
    let path = write_file(cfg, "entropy.csv", |w| bitgen::write_entropy_csv(w, &rows))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_stream(path: &Path, label: StreamLabel, format: Format) -> Result<BitStream, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let r = BufReader::new(file);
    match format {
        Format::Binary => BitStream::read_packed(label, r).map_err(|e| CliError::io(path, e)),
        Format::Ascii => BitStream::read_ascii(label, r).map_err(|e| match e {
            bitgen::BitgenError::Io(io) => CliError::io(path, io),
            other => CliError::Config(format!("{}: {other}", path.display())),
        }),
    }
}

pub fn test(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "test");
    let streams: Vec<BitStream> = if cfg.input.is_empty() {
        Generator::new(&cfg.generator())?.generate(cfg.sequences * cfg.length)?.into()
    } else {
        cfg.input
            .iter()
            .zip(StreamLabel::OUTPUTS)
            .map(|(p, l)| read_stream(p, l, cfg.format))
            .collect::<Result<_, _>>()?
    };
    let params = SuiteParams {
        alpha: cfg.alpha,
        block_frequency_m: cfg.block_m,
        serial_m: cfg.serial_m,
        approximate_entropy_m: cfg.apen_m,
    };
    let reports = randtest::run_suite(&streams, cfg.sequences, cfg.length, &params)?;
    let floor = randtest::proportion_floor(cfg.alpha, cfg.sequences);
    let mut below = Vec::new();
    for r in &reports {
        print!("{r}");
        for row in &r.rows {
            if row.proportion() < floor || !(row.mean_p_value > cfg.alpha && row.mean_p_value < 1.0 - cfg.alpha) {
                below.push(format!("{}/{}", r.label, row.test));
            }
        }
        let path = write_file(cfg, &format!("test_{}.csv", r.label), |w| r.write_csv(w))?;
        println!("wrote {}", path.display());
    }
    println!("proportion floor {floor:.4}; {} rows below", below.len());
    if cfg.acceptance && !below.is_empty() {
        return Err(CliError::TestFailed(format!("suite rows below floor: {}", below.join(", "))));
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig) -> Result<(), CliError> {
    announce(cfg, "bench");
    const CHUNK: usize = 1 << 20;
    let mut g = Generator::new(&cfg.generator())?;
    let start = Instant::now();
    let mut produced = 0usize;
    let mut sink = 0usize;
    while start.elapsed().as_secs_f64() < cfg.seconds {
        let out = g.generate(CHUNK)?;
        sink = sink.wrapping_add(out[0].ones());
        produced += out.iter().map(|s| s.len()).sum::<usize>();
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = produced as f64 / secs;
    println!("bits={produced}");
    println!("seconds={secs:.3}");
    println!("throughput_bits_per_second={rate:.0}");
    println!("throughput_mbps={:.3}", rate / 1e6);
    println!("# software figure over all five streams; not comparable to hardware clock rates");
    std::hint::black_box(sink);
    Ok(())
}
