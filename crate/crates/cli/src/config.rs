//! Flat `key=value` run configuration.
//!
//! Sources in increasing priority: built-in defaults, the config file, the
//! `HYPERCHAOS_OUT_DIR` environment variable (output directory only), flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hyperchaos::bitgen::{Channel, StreamLabel};
use hyperchaos::{InitialCondition, SolverConfig};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "HYPERCHAOS_OUT_DIR";

/// Every key a config file may contain.
pub const KEYS: &[&str] = &[
    "c", "y0", "z0", "u0", "v0", "h", "backend", "overflow", "out", "discard", "bits", "format",
    "streams", "t", "steps", "c_min", "c_max", "points", "transient", "capture", "plane", "widths",
    "states", "channel", "sequences", "length", "alpha", "block_m", "serial_m", "apen_m", "input",
    "acceptance", "seconds",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Ascii,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" => Ok(Self::Binary),
            "ascii" | "txt" => Ok(Self::Ascii),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Ascii => "ascii",
        })
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Binary => "bin",
            Self::Ascii => "txt",
        }
    }
}

/// Raw key/value pairs, later sources overwriting earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairs(BTreeMap<String, String>);

impl Pairs {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected key=value, got `{line}`", n + 1))
            })?;
            let key = canonical(k.trim());
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("{origin}:{}: unknown key `{}`", n + 1, k.trim())));
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.0.insert(canonical(key), value.to_string());
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn merge(&mut self, over: Pairs) {
        self.0.extend(over.0);
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| CliError::Config(format!("invalid value `{v}` for `{key}`: {e}"))),
        }
    }

    fn get_list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|e| {
                        CliError::Config(format!("invalid item `{item}` in `{key}`: {e}"))
                    })
                })
                .collect(),
        }
    }
}

fn canonical(key: &str) -> String {
    match key.replace('-', "_").as_str() {
        "x0" => "c".to_string(),
        k => k.to_string(),
    }
}

fn parse_label(s: &str) -> Result<StreamLabel, String> {
    StreamLabel::OUTPUTS
        .into_iter()
        .find(|l| l.to_string().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown stream `{s}`"))
}

struct Label(StreamLabel);

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s).map(Label)
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ic: InitialCondition,
    pub solver: SolverConfig,
    pub out: PathBuf,
    pub discard: usize,
    pub bits: usize,
    pub format: Format,
    pub streams: Vec<StreamLabel>,
    pub t: f64,
    pub steps: usize,
    pub c_min: f64,
    pub c_max: f64,
    /// `None` means "command default": a single run for `lyapunov`, 200 for
    /// `bifurcation`.
    pub points: Option<usize>,
    pub transient: f64,
    pub capture: f64,
    pub plane: f64,
    pub widths: Vec<u32>,
    pub states: usize,
    pub channel: Channel,
    pub sequences: usize,
    pub length: usize,
    pub alpha: f64,
    pub block_m: usize,
    pub serial_m: usize,
    pub apen_m: usize,
    pub input: Vec<PathBuf>,
    pub acceptance: bool,
    pub seconds: f64,
}

impl RunConfig {
    pub fn from_pairs(p: &Pairs) -> Result<Self, CliError> {
        let d = InitialCondition::default();
        let s = SolverConfig::default();
        let cfg = Self {
            ic: InitialCondition {
                x0: p.get("c", d.x0)?,
                y0: p.get("y0", d.y0)?,
                z0: p.get("z0", d.z0)?,
                u0: p.get("u0", d.u0)?,
                v0: p.get("v0", d.v0)?,
            },
            solver: SolverConfig {
                h: p.get("h", s.h)?,
                backend: p.get("backend", s.backend)?,
                overflow: p.get("overflow", s.overflow)?,
            },
            out: p.get("out", PathBuf::from("."))?,
            discard: p.get("discard", hyperchaos::bitgen::DEFAULT_DISCARD)?,
            bits: p.get("bits", 1_000_000)?,
            format: p.get("format", Format::Binary)?,
            streams: p
                .get_list::<Label>("streams", StreamLabel::OUTPUTS.map(Label).into())?
                .into_iter()
                .map(|l| l.0)
                .collect(),
            t: p.get("t", 2e4)?,
            steps: p.get("steps", 10_000)?,
            c_min: p.get("c_min", 0.0)?,
            c_max: p.get("c_max", 1.0)?,
            points: p.0.get("points").map(|_| p.get("points", 0)).transpose()?,
            transient: p.get("transient", hyperchaos::dynamics::DEFAULT_TRANSIENT)?,
            capture: p.get("capture", 1000.0)?,
            plane: p.get("plane", 1.0)?,
            widths: p.get_list("widths", vec![4, 8, 12, 16, 20, 24])?,
            states: p.get("states", 100_000)?,
            channel: p.get("channel", Channel::X)?,
            sequences: p.get("sequences", 100)?,
            length: p.get("length", 1_000_000)?,
            alpha: p.get("alpha", hyperchaos::randtest::DEFAULT_ALPHA)?,
            block_m: p.get("block_m", 128)?,
            serial_m: p.get("serial_m", 16)?,
            apen_m: p.get("apen_m", 10)?,
            input: p.get_list("input", Vec::new())?,
            acceptance: p.get("acceptance", false)?,
            seconds: p.get("seconds", 5.0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.solver.h > 0.0 && self.solver.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.solver.h));
        }
        if self.streams.is_empty() {
            return bad("streams must name at least one of B1..B5".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.seconds > 0.0 && self.seconds.is_finite()) {
            return bad(format!("seconds must be positive, got {}", self.seconds));
        }
        if self.input.len() > 5 {
            return bad(format!("at most five input files, got {}", self.input.len()));
        }
        Ok(())
    }

    fn ic_pairs(&self) -> Vec<(&'static str, String)> {
        let ic = &self.ic;
        let s = &self.solver;
        vec![
            ("c", ic.x0.to_string()),
            ("y0", ic.y0.to_string()),
            ("z0", ic.z0.to_string()),
            ("u0", ic.u0.to_string()),
            ("v0", ic.v0.to_string()),
            ("h", s.h.to_string()),
            ("backend", s.backend.to_string()),
            ("overflow", s.overflow.to_string()),
            ("out", self.out.display().to_string()),
        ]
    }

    /// The settings `command` depends on, as `key=value` lines that can be fed
    /// back through `--config`.
    pub fn effective(&self, command: &str) -> String {
        let mut v = self.ic_pairs();
        let join = |items: Vec<String>| items.join(",");
        let extra: Vec<(&str, String)> = match command {
            "generate" => vec![
                ("discard", self.discard.to_string()),
                ("bits", self.bits.to_string()),
                ("format", self.format.to_string()),
                ("streams", join(self.streams.iter().map(|l| l.to_string()).collect())),
            ],
            "lyapunov" => {
                let mut e = vec![("t", self.t.to_string())];
                if let Some(n) = self.points {
                    e.extend([
                        ("points", n.to_string()),
                        ("c_min", self.c_min.to_string()),
                        ("c_max", self.c_max.to_string()),
                    ]);
                }
                e
            }
            "bifurcation" => vec![
                ("c_min", self.c_min.to_string()),
                ("c_max", self.c_max.to_string()),
                ("points", self.bifurcation_points().to_string()),
                ("transient", self.transient.to_string()),
                ("capture", self.capture.to_string()),
            ],
            "poincare" => vec![("t", self.t.to_string()), ("plane", self.plane.to_string())],
            "trajectory" => vec![("steps", self.steps.to_string())],
            "entropy" => vec![
                ("discard", self.discard.to_string()),
                ("widths", join(self.widths.iter().map(|w| w.to_string()).collect())),
                ("states", self.states.to_string()),
                ("channel", format!("{:?}", self.channel).to_lowercase()),
            ],
            "test" => vec![
                ("discard", self.discard.to_string()),
                ("sequences", self.sequences.to_string()),
                ("length", self.length.to_string()),
                ("alpha", self.alpha.to_string()),
                ("block_m", self.block_m.to_string()),
                ("serial_m", self.serial_m.to_string()),
                ("apen_m", self.apen_m.to_string()),
                ("input", join(self.input.iter().map(|p| p.display().to_string()).collect())),
                ("format", self.format.to_string()),
                ("acceptance", self.acceptance.to_string()),
            ],
            "bench" => vec![("discard", self.discard.to_string()), ("seconds", self.seconds.to_string())],
            _ => Vec::new(),
        };
        v.extend(extra);
        v.into_iter().map(|(k, val)| format!("{k}={val}\n")).collect()
    }

    pub fn bifurcation_points(&self) -> usize {
        self.points.unwrap_or(200)
    }

    pub fn generator(&self) -> hyperchaos::bitgen::GeneratorConfig {
        hyperchaos::bitgen::GeneratorConfig { ic: self.ic, solver: self.solver, discard_states: self.discard }
    }
}

/// Layers defaults, the optional file, the environment and flag values.
pub fn resolve(file: Option<&Path>, env_out: Option<String>, flags: Pairs) -> Result<RunConfig, CliError> {
    let mut pairs = match file {
        Some(f) => Pairs::read(f)?,
        None => Pairs::default(),
    };
    if let Some(dir) = env_out.filter(|d| !d.is_empty()) {
        pairs.set("out", dir);
    }
    pairs.merge(flags);
    RunConfig::from_pairs(&pairs)
}
