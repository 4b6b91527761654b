//! Run configuration: a flat `[section]` / `key = value` text format with
//! line-anchored errors, parsed into typed blocks and turned into the
//! library's domain objects.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nonloclaw::flux::{FluxKind, FluxPair};
use nonloclaw::grid::{Grid, GridField};
use nonloclaw::kernel::{KernelSpec, Profile, Symmetry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A configuration error anchored to a line of the config file.
#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: {}", self.line, self.message)
        } else {
            write!(f, "config: {}", self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Raw parse result: sections of `key -> (line, value)`, insertion order
/// irrelevant because the format is flat and keys are unique per section.
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
    section_lines: BTreeMap<String, usize>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (idx, line_raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match line_raw.split_once('#') {
                Some((head, _)) => head,
                None => line_raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = match name.strip_suffix(']') {
                    Some(n) => n.trim(),
                    None => return err(line_no, "unterminated section header"),
                };
                if name.is_empty() {
                    return err(line_no, "empty section name");
                }
                if raw.sections.contains_key(name) {
                    return err(line_no, format!("duplicate section [{name}]"));
                }
                raw.sections.insert(name.to_string(), BTreeMap::new());
                raw.section_lines.insert(name.to_string(), line_no);
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return err(line_no, "expected `key = value` or `[section]`"),
            };
            if key.is_empty() {
                return err(line_no, "empty key");
            }
            let section = match &current {
                Some(s) => s,
                None => return err(line_no, "key outside of any [section]"),
            };
            let entries = raw.sections.get_mut(section).unwrap();
            if entries.contains_key(key) {
                return err(line_no, format!("duplicate key `{key}` in [{section}]"));
            }
            entries.insert(key.to_string(), (line_no, value.to_string()));
        }
        Ok(raw)
    }

    fn section(&self, name: &str) -> Option<&BTreeMap<String, (usize, String)>> {
        self.sections.get(name)
    }

    fn require_section(&self, name: &str) -> Result<&BTreeMap<String, (usize, String)>, ConfigError> {
        self.section(name)
            .ok_or_else(|| ConfigError {
                line: 0,
                message: format!("missing required section [{name}]"),
            })
    }
}

/// Typed view of one section with consumption tracking, so unknown keys
/// can be rejected with their line numbers.
struct Block<'a> {
    name: &'a str,
    entries: &'a BTreeMap<String, (usize, String)>,
    used: Vec<&'a str>,
}

impl<'a> Block<'a> {
    fn new(name: &'a str, entries: &'a BTreeMap<String, (usize, String)>) -> Self {
        Block {
            name,
            entries,
            used: Vec::new(),
        }
    }

    fn get(&mut self, key: &'a str) -> Option<(usize, &'a str)> {
        self.used.push(key);
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn require(&mut self, key: &'a str) -> Result<(usize, &'a str), ConfigError> {
        let line = *self.entries.values().map(|(l, _)| l).min().unwrap_or(&0);
        match self.get(key) {
            Some(e) => Ok(e),
            None => err(line, format!("[{}] is missing required key `{key}`", self.name)),
        }
    }

    fn f64(&mut self, key: &'a str) -> Result<f64, ConfigError> {
        let (line, v) = self.require(key)?;
        parse_f64(line, key, v)
    }

    fn f64_opt(&mut self, key: &'a str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            Some((line, v)) => Ok(Some(parse_f64(line, key, v)?)),
            None => Ok(None),
        }
    }

    fn usize(&mut self, key: &'a str) -> Result<usize, ConfigError> {
        let (line, v) = self.require(key)?;
        v.parse()
            .map_err(|_| ConfigError {
                line,
                message: format!("`{key}` must be a nonnegative integer, got `{v}`"),
            })
    }

    fn usize_opt(&mut self, key: &'a str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            Some((line, v)) => Ok(Some(v.parse().map_err(|_| ConfigError {
                line,
                message: format!("`{key}` must be a nonnegative integer, got `{v}`"),
            })?)),
            None => Ok(None),
        }
    }

    fn string_opt(&mut self, key: &'a str) -> Option<String> {
        self.get(key).map(|(_, v)| v.to_string())
    }

    fn f64_list(&mut self, key: &'a str) -> Result<Vec<f64>, ConfigError> {
        let (line, v) = self.require(key)?;
        v.split(',')
            .map(|s| parse_f64(line, key, s.trim()))
            .collect()
    }

    fn usize_list(&mut self, key: &'a str) -> Result<Vec<usize>, ConfigError> {
        let (line, v) = self.require(key)?;
        v.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError {
                    line,
                    message: format!("`{key}` must be a comma list of integers, got `{s}`"),
                })
            })
            .collect()
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (key, (line, _)) in self.entries {
            if !self.used.contains(&key.as_str()) {
                return err(*line, format!("unknown key `{key}` in [{}]", self.name));
            }
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("`{key}` must be a finite number, got `{v}`")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    Implicit,
    Explicit,
    Forced,
}

#[derive(Debug, Clone)]
pub struct SchemeBlock {
    pub kind: SchemeKind,
    pub t_final: f64,
    pub steps: usize,
    pub tolerance: Option<f64>,
    pub max_iters: usize,
    pub method: nonloclaw::resolvent::Method,
    /// Decay rate r of the builtin forcing g(t, u) = -r u; forced runs only.
    pub forcing_rate: f64,
}

#[derive(Debug, Clone)]
pub enum InitialProfile {
    Riemann { left: f64, right: f64, jump: f64 },
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64, offset: f64 },
    Indicator { lo: f64, hi: f64, inside: f64, outside: f64 },
    Random { amplitude: f64, offset: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone)]
pub struct InitialBlock {
    pub profile: InitialProfile,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub directory: String,
    /// Write every `cadence`-th step (the final state is always written).
    pub cadence: usize,
}

#[derive(Debug, Clone)]
pub struct StudyBlock {
    pub deltas: Vec<f64>,
    pub oracle: String,
    pub t_final: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct ResolventBlock {
    pub lambda: f64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VerifyBlock {
    /// Audit an externally produced trajectory (manifest path) instead of
    /// evolving the configured problem.
    pub trajectory: Option<String>,
    pub family_nx: usize,
    pub family_nt: usize,
    pub c_count: usize,
    pub tolerance: Option<f64>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            trajectory: None,
            family_nx: 4,
            family_nt: 3,
            c_count: 7,
            tolerance: None,
        }
    }
}

/// The fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub fluxes: Vec<FluxPair>,
    pub scheme: SchemeBlock,
    pub initial: InitialBlock,
    pub output: OutputBlock,
    pub study: Option<StudyBlock>,
    pub resolvent: Option<ResolventBlock>,
    pub verify: VerifyBlock,
    /// Canonical `section.key = value` echo for the manifest.
    pub echo: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        RunConfig::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let raw = RawConfig::parse(text)?;
        for name in raw.sections.keys() {
            if !matches!(
                name.as_str(),
                "grid" | "kernel" | "flux" | "scheme" | "initial" | "output" | "study"
                    | "resolvent" | "verify"
            ) {
                return err(raw.section_lines[name], format!("unknown section [{name}]"));
            }
        }

        let grid = {
            let mut b = Block::new("grid", raw.require_section("grid")?);
            let cells = b.usize_list("cells")?;
            let spacing = b.f64_list("spacing")?;
            b.finish()?;
            Grid::new(&cells, &spacing).map_err(|e| ConfigError {
                line: raw.section_lines["grid"],
                message: e.to_string(),
            })?
        };

        let kernel = {
            let mut b = Block::new("kernel", raw.require_section("kernel")?);
            let (sline, sym) = b.require("symmetry")?;
            let symmetry = match sym {
                "even" => Symmetry::EvenSymmetric,
                "one_sided" => Symmetry::OneSided,
                other => return err(sline, format!("unknown symmetry `{other}` (even | one_sided)")),
            };
            let mut horizon = b.f64_list("horizon")?;
            if horizon.len() == 1 && grid.dim() == 2 {
                horizon.push(horizon[0]);
            }
            let (pline, profile_s) = b.require("profile")?;
            let profile = if let Some(rest) = profile_s.strip_prefix("tabulated:") {
                let samples: Vec<f64> = rest
                    .split(',')
                    .map(|s| parse_f64(pline, "profile", s.trim()))
                    .collect::<Result<_, _>>()?;
                Profile::Tabulated(samples)
            } else {
                Profile::by_name(profile_s).ok_or_else(|| ConfigError {
                    line: pline,
                    message: format!(
                        "unknown profile `{profile_s}` (constant | triangle | truncated_quadratic | tabulated:v1,v2,...)"
                    ),
                })?
            };
            let partition = match b.get("partition") {
                None | Some((_, "all")) => vec![(0..grid.dim()).collect::<Vec<_>>()],
                Some((_, "axes")) => (0..grid.dim()).map(|a| vec![a]).collect(),
                Some((line, other)) => {
                    return err(line, format!("unknown partition `{other}` (all | axes)"))
                }
            };
            b.finish()?;
            let spec = KernelSpec {
                symmetry,
                horizon,
                profile,
                partition,
            };
            spec.validate(&grid).map_err(|e| ConfigError {
                line: raw.section_lines["kernel"],
                message: e.to_string(),
            })?;
            spec
        };

        let fluxes = {
            let mut b = Block::new("flux", raw.require_section("flux")?);
            let (nline, names) = b.require("name")?;
            let range_v = b.f64_list("range")?;
            if range_v.len() != 2 {
                return err(nline, "`range` must be `lo, hi`");
            }
            let range = (range_v[0], range_v[1]);
            let params: Vec<Option<f64>> = match b.get("param") {
                Some((pline, v)) => v
                    .split(';')
                    .map(|s| {
                        let s = s.trim();
                        if s.is_empty() {
                            Ok(None)
                        } else {
                            parse_f64(pline, "param", s).map(Some)
                        }
                    })
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            b.finish()?;
            let name_list: Vec<&str> = names.split(';').map(|s| s.trim()).collect();
            let mut fluxes = Vec::new();
            for (i, name) in name_list.iter().enumerate() {
                let param = params.get(i).copied().flatten().or_else(|| params.first().copied().flatten());
                let kind = match *name {
                    "upwind_advection" => FluxKind::UpwindAdvection {
                        speed: param.ok_or_else(|| ConfigError {
                            line: nline,
                            message: "upwind_advection needs `param` (the speed)".into(),
                        })?,
                    },
                    "engquist_osher_burgers" => FluxKind::EngquistOsherBurgers,
                    "lax_friedrichs_burgers" => FluxKind::LaxFriedrichsBurgers {
                        alpha: param.ok_or_else(|| ConfigError {
                            line: nline,
                            message: "lax_friedrichs_burgers needs `param` (the diffusion alpha)".into(),
                        })?,
                    },
                    "zero" => FluxKind::Zero,
                    "nonmonotone_second" => FluxKind::NonMonotoneSecond,
                    other => {
                        return err(
                            nline,
                            format!(
                                "unknown flux `{other}` (upwind_advection | engquist_osher_burgers | lax_friedrichs_burgers | zero | nonmonotone_second)"
                            ),
                        )
                    }
                };
                fluxes.push(FluxPair::new(kind, range).map_err(|e| ConfigError {
                    line: nline,
                    message: e.to_string(),
                })?);
            }
            // One flux for several subinteractions: replicate it.
            while fluxes.len() < kernel.partition.len() {
                fluxes.push(fluxes[0].clone());
            }
            if fluxes.len() != kernel.partition.len() {
                return err(
                    nline,
                    format!(
                        "{} fluxes for {} kernel subinteractions",
                        fluxes.len(),
                        kernel.partition.len()
                    ),
                );
            }
            fluxes
        };

        let scheme = {
            let mut b = Block::new("scheme", raw.require_section("scheme")?);
            let (kline, kind_s) = b.require("kind")?;
            let kind = match kind_s {
                "implicit" => SchemeKind::Implicit,
                "explicit" => SchemeKind::Explicit,
                "forced" => SchemeKind::Forced,
                other => {
                    return err(kline, format!("unknown scheme `{other}` (implicit | explicit | forced)"))
                }
            };
            let t_final = b.f64("t_final")?;
            let steps = b.usize("steps")?;
            if t_final <= 0.0 || steps == 0 {
                return err(kline, "t_final and steps must be positive");
            }
            let tolerance = b.f64_opt("tolerance")?;
            let max_iters = b.usize_opt("max_iters")?.unwrap_or(10_000);
            let method = match b.get("method") {
                None | Some((_, "auto")) => nonloclaw::resolvent::Method::Auto,
                Some((_, "picard")) => nonloclaw::resolvent::Method::Picard,
                Some((_, "gauss_seidel")) => nonloclaw::resolvent::Method::GaussSeidel,
                Some((line, other)) => {
                    return err(line, format!("unknown method `{other}` (auto | picard | gauss_seidel)"))
                }
            };
            let forcing_rate = b.f64_opt("forcing_rate")?.unwrap_or(1.0);
            b.finish()?;
            SchemeBlock {
                kind,
                t_final,
                steps,
                tolerance,
                max_iters,
                method,
                forcing_rate,
            }
        };

        let initial = {
            let mut b = Block::new("initial", raw.require_section("initial")?);
            let (pline, prof) = b.require("profile")?;
            let seed = match b.get("seed") {
                Some((sline, v)) => Some(v.parse::<u64>().map_err(|_| ConfigError {
                    line: sline,
                    message: format!("`seed` must be an unsigned integer, got `{v}`"),
                })?),
                None => None,
            };
            let profile = match prof {
                "riemann" => InitialProfile::Riemann {
                    left: b.f64("left")?,
                    right: b.f64("right")?,
                    jump: b.f64("jump")?,
                },
                "gaussian" => InitialProfile::Gaussian {
                    center: b.f64_list("center")?,
                    width: b.f64("width")?,
                    amplitude: b.f64("amplitude")?,
                    offset: b.f64_opt("offset")?.unwrap_or(0.0),
                },
                "indicator" => InitialProfile::Indicator {
                    lo: b.f64("lo")?,
                    hi: b.f64("hi")?,
                    inside: b.f64_opt("inside")?.unwrap_or(1.0),
                    outside: b.f64_opt("outside")?.unwrap_or(0.0),
                },
                "random" => {
                    if seed.is_none() {
                        return err(pline, "the random profile requires a `seed`");
                    }
                    InitialProfile::Random {
                        amplitude: b.f64_opt("amplitude")?.unwrap_or(1.0),
                        offset: b.f64_opt("offset")?.unwrap_or(0.0),
                    }
                }
                "constant" => InitialProfile::Constant {
                    value: b.f64("value")?,
                },
                other => {
                    return err(
                        pline,
                        format!("unknown profile `{other}` (riemann | gaussian | indicator | random | constant)"),
                    )
                }
            };
            b.finish()?;
            InitialBlock { profile, seed }
        };

        let output = match raw.section("output") {
            Some(entries) => {
                let mut b = Block::new("output", entries);
                let directory = b.string_opt("directory").unwrap_or_else(|| "out".into());
                let cadence = b.usize_opt("cadence")?.unwrap_or(1).max(1);
                b.finish()?;
                OutputBlock { directory, cadence }
            }
            None => OutputBlock {
                directory: "out".into(),
                cadence: 1,
            },
        };

        let study = match raw.section("study") {
            Some(entries) => {
                let mut b = Block::new("study", entries);
                let deltas = b.f64_list("deltas")?;
                let (oline, oracle) = b.require("oracle")?;
                if nonloclaw::semigroup::StudyOracle::by_name(oracle).is_none() {
                    return err(
                        oline,
                        format!("unknown oracle `{oracle}` (burgers_shock | burgers_rarefaction | advection)"),
                    );
                }
                let t_final = b.f64("t_final")?;
                let eps = b.f64("eps")?;
                b.finish()?;
                Some(StudyBlock {
                    deltas,
                    oracle: oracle.to_string(),
                    t_final,
                    eps,
                })
            }
            None => None,
        };

        let resolvent = match raw.section("resolvent") {
            Some(entries) => {
                let mut b = Block::new("resolvent", entries);
                let lambda = b.f64("lambda")?;
                let epsilon = b.f64_opt("epsilon")?;
                b.finish()?;
                Some(ResolventBlock { lambda, epsilon })
            }
            None => None,
        };

        let verify = match raw.section("verify") {
            Some(entries) => {
                let mut b = Block::new("verify", entries);
                let defaults = VerifyBlock::default();
                let trajectory = b.string_opt("trajectory");
                let family_nx = b.usize_opt("family_nx")?.unwrap_or(defaults.family_nx);
                let family_nt = b.usize_opt("family_nt")?.unwrap_or(defaults.family_nt);
                let c_count = b.usize_opt("c_count")?.unwrap_or(defaults.c_count);
                let tolerance = b.f64_opt("tolerance")?;
                b.finish()?;
                VerifyBlock {
                    trajectory,
                    family_nx,
                    family_nt,
                    c_count,
                    tolerance,
                }
            }
            None => VerifyBlock::default(),
        };

        let echo = raw
            .sections
            .iter()
            .flat_map(|(sec, entries)| {
                entries
                    .iter()
                    .map(move |(k, (_, v))| format!("{sec}.{k} = {v}"))
            })
            .collect();

        Ok(RunConfig {
            grid,
            kernel,
            fluxes,
            scheme,
            initial,
            output,
            study,
            resolvent,
            verify,
            echo,
        })
    }

    /// Materialize the initial condition (or resolvent right-hand side).
    /// `seed_override` wins over the config seed.
    pub fn initial_field(&self, seed_override: Option<u64>) -> Result<GridField, ConfigError> {
        let grid = self.grid.clone();
        let field = match &self.initial.profile {
            InitialProfile::Riemann { left, right, jump } => {
                GridField::sample(grid, |x| if x[0] < *jump { *left } else { *right })
            }
            InitialProfile::Gaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                let c = center.clone();
                let (w, a, o) = (*width, *amplitude, *offset);
                let extent: Vec<f64> = (0..self.grid.dim()).map(|ax| self.grid.extent(ax)).collect();
                GridField::sample(grid, move |x| {
                    let mut r2 = 0.0;
                    for axis in 0..x.len() {
                        let l = extent[axis];
                        let mut d = (x[axis] - c.get(axis).copied().unwrap_or(0.0)).rem_euclid(l);
                        if d > l / 2.0 {
                            d -= l;
                        }
                        r2 += d * d;
                    }
                    o + a * (-r2 / (w * w)).exp()
                })
            }
            InitialProfile::Indicator {
                lo,
                hi,
                inside,
                outside,
            } => {
                let (lo, hi, inside, outside) = (*lo, *hi, *inside, *outside);
                GridField::sample(grid, move |x| {
                    if x[0] >= lo && x[0] < hi {
                        inside
                    } else {
                        outside
                    }
                })
            }
            InitialProfile::Random { amplitude, offset } => {
                let seed = seed_override.or(self.initial.seed).expect("validated");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values: Vec<f64> = (0..self.grid.num_cells())
                    .map(|_| offset + amplitude * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                GridField::new(grid, values)
            }
            InitialProfile::Constant { value } => GridField::constant(grid, *value),
        };
        field.map_err(|e| ConfigError {
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn resolvent_options(&self, g: &GridField) -> nonloclaw::resolvent::ResolventOptions {
        let mut opts = nonloclaw::resolvent::ResolventOptions::for_rhs(g);
        if let Some(tol) = self.scheme.tolerance {
            opts.tol_residual = tol;
        }
        opts.max_iters = self.scheme.max_iters;
        opts.method = self.scheme.method;
        opts
    }
}
