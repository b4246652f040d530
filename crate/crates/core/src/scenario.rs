//! Scenario files: the declarative description of a beamline and the
//! experiments run on it.
//!
//! The format is line oriented. `[section]` headers, `key = value` lines,
//! `#` starts a comment. Top-level keys before the first section are allowed
//! (`format_version`). Every value the simulator uses is present in the
//! parsed [`Scenario`]; defaults are filled at parse time and written back
//! out by [`Scenario::to_text`]. The README lists every section and key.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::beamline::{
    default_n_max, AomSpec, BeamState, FiberSpec, ModulationSpec, RfChainResponse, SpatialMode, SplitGeometry,
    SplitterSpec,
};
use crate::detection::{Aperture, AmTone, DetectorSpec, NoiseSpec, DEFAULT_K_MAX};
use crate::error::{ConfigError, Error};
use crate::spectra::Window;

pub const FORMAT_VERSION: u32 = 1;

/// Beamline layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// AOM, lens and telescope, then the split. No fiber.
    Fig1,
    /// AOM into a single-mode fiber, split at the fiber output, telescope on beam 2 only.
    Fig3,
}

impl Topology {
    fn name(self) -> &'static str {
        match self {
            Topology::Fig1 => "fig1",
            Topology::Fig3 => "fig3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RfSource {
    /// Gain polynomial in `(f - f_carrier) / f_m`, lowest order first.
    Polynomial(Vec<f64>),
    Table(Vec<(f64, Complex64)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub power: f64,
    pub w0: f64,
    pub pol_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelescopeSpec {
    pub output_w0: f64,
    pub shift_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferencePhase {
    /// Calibrated by probing the plant before the loop starts.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Integrator gain (1/s).
    pub gain: f64,
    /// Control step (s).
    pub dt: f64,
    pub steps: usize,
    pub k_max: usize,
    pub reference_phase: ReferencePhase,
    /// RMS of Gaussian noise added to the normalized I/Q error each step.
    pub error_noise: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gain: 20.0,
            dt: 1e-3,
            steps: 400,
            k_max: DEFAULT_K_MAX,
            reference_phase: ReferencePhase::Auto,
            error_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Config {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            x_min: -1.5,
            x_max: 1.5,
            points: 121,
        }
    }
}

impl Fig2Config {
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.x_max - self.x_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.x_min + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub f_s: f64,
    pub duration: f64,
    pub rbw: f64,
    pub span: f64,
    pub window: Window,
    pub am_tone: Option<AmTone>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            f_s: 20e6,
            duration: 0.2,
            rbw: 30.0,
            span: 10e3,
            window: Window::BlackmanHarris4,
            am_tone: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub format_version: u32,
    pub topology: Topology,
    pub modulation: ModulationSpec,
    pub aom: AomSpec,
    pub source: SourceSpec,
    pub rf: RfSource,
    pub telescope: TelescopeSpec,
    pub fiber: Option<FiberSpec>,
    /// Sideband geometry at the fiber input.
    pub fiber_input: SplitGeometry,
    pub splitter: SplitterSpec,
    pub plate_angle: f64,
    pub pd1: DetectorSpec,
    pub pd2: DetectorSpec,
    pub controller: ControllerConfig,
    pub noise: Option<NoiseSpec>,
    pub fig2: Fig2Config,
    pub spectrum: SpectrumConfig,
}

impl Scenario {
    pub fn carrier(&self) -> crate::Result<BeamState> {
        BeamState::carrier(
            self.source.power,
            SpatialMode::new(self.source.w0, self.aom.lambda),
            self.source.pol_angle,
        )
    }

    pub fn rf_response(&self) -> crate::Result<RfChainResponse> {
        match &self.rf {
            RfSource::Polynomial(c) => RfChainResponse::from_polynomial(&self.modulation, c),
            RfSource::Table(points) => RfChainResponse::new(points.clone()),
        }
    }

    /// Overrides the noise seed (creating a silent noise section if absent).
    pub fn with_seed(mut self, seed: u64) -> Self {
        let mut noise = self.noise.unwrap_or_else(NoiseSpec::silent);
        noise.seed = seed;
        self.noise = Some(noise);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.controller.steps = steps;
        self
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Canonical text form; parses back to an identical scenario.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(&mut s, "format_version", self.format_version.to_string());

        s.push_str("\n[modulation]\n");
        kv(&mut s, "f_carrier", fmt(self.modulation.f_carrier));
        kv(&mut s, "f_m", fmt(self.modulation.f_m));
        kv(&mut s, "beta", fmt(self.modulation.beta));
        kv(&mut s, "n_max", self.modulation.n_max.to_string());

        s.push_str("\n[aom]\n");
        kv(&mut s, "lambda", fmt(self.aom.lambda));
        if let Some(v) = self.aom.v_ac {
            kv(&mut s, "v_ac", fmt(v));
        }
        if let Some(v) = self.aom.f_lens {
            kv(&mut s, "f_lens", fmt(v));
        }
        if let Some(v) = self.aom.lateral_shift_override {
            kv(&mut s, "lateral_shift", fmt(v));
        }

        s.push_str("\n[source]\n");
        kv(&mut s, "power", fmt(self.source.power));
        kv(&mut s, "w0", fmt(self.source.w0));
        kv(&mut s, "pol_angle", fmt(self.source.pol_angle));

        s.push_str("\n[rf_response]\n");
        match &self.rf {
            RfSource::Polynomial(c) => {
                kv(&mut s, "kind", "polynomial".into());
                kv(&mut s, "coeffs", c.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(", "));
            }
            RfSource::Table(points) => {
                kv(&mut s, "kind", "table".into());
                for (f, h) in points {
                    kv(&mut s, "point", format!("{}, {}, {}", fmt(*f), fmt(h.re), fmt(h.im)));
                }
            }
        }

        s.push_str("\n[layout]\n");
        kv(&mut s, "topology", self.topology.name().into());
        kv(&mut s, "plate_angle", fmt(self.plate_angle));

        s.push_str("\n[telescope]\n");
        kv(&mut s, "output_w0", fmt(self.telescope.output_w0));
        kv(&mut s, "shift_scale", fmt(self.telescope.shift_scale));

        if let Some(f) = &self.fiber {
            s.push_str("\n[fiber]\n");
            kv(&mut s, "w_fiber", fmt(f.w_fiber));
            kv(&mut s, "offset_x", fmt(f.offset_x));
            kv(&mut s, "tilt", fmt(f.tilt));
            let input = match self.fiber_input {
                SplitGeometry::Lateral => "lateral",
                SplitGeometry::LateralAndAngular => "angular",
            };
            kv(&mut s, "input", input.into());
        }

        s.push_str("\n[splitter]\n");
        kv(&mut s, "r_p", fmt(self.splitter.r_p));
        kv(&mut s, "r_s", fmt(self.splitter.r_s));

        for (name, pd) in [("pd1", &self.pd1), ("pd2", &self.pd2)] {
            let _ = writeln!(s, "\n[{name}]");
            match pd.aperture {
                Aperture::FullPlane => kv(&mut s, "aperture", "full".into()),
                Aperture::HalfPlaneScreen { edge_x } => {
                    kv(&mut s, "aperture", "screen".into());
                    kv(&mut s, "edge_x", fmt(edge_x));
                }
                Aperture::OffsetRect {
                    center_x,
                    center_y,
                    half_width,
                    half_height,
                } => {
                    kv(&mut s, "aperture", "rect".into());
                    kv(&mut s, "center_x", fmt(center_x));
                    kv(&mut s, "center_y", fmt(center_y));
                    kv(&mut s, "half_width", fmt(half_width));
                    kv(&mut s, "half_height", fmt(half_height));
                }
            }
            kv(&mut s, "rho", fmt(pd.rho));
        }

        let c = &self.controller;
        s.push_str("\n[controller]\n");
        kv(&mut s, "gain", fmt(c.gain));
        kv(&mut s, "dt", fmt(c.dt));
        kv(&mut s, "steps", c.steps.to_string());
        kv(&mut s, "k_max", c.k_max.to_string());
        let phase = match c.reference_phase {
            ReferencePhase::Auto => "auto".to_string(),
            ReferencePhase::Fixed(p) => fmt(p),
        };
        kv(&mut s, "reference_phase", phase);
        kv(&mut s, "error_noise", fmt(c.error_noise));

        if let Some(n) = &self.noise {
            s.push_str("\n[noise]\n");
            kv(&mut s, "seed", n.seed.to_string());
            kv(&mut s, "rin_level", fmt(n.rin_level));
            kv(&mut s, "corner_hz", fmt(n.corner_hz));
            kv(&mut s, "floor_level", fmt(n.floor_level));
        }

        s.push_str("\n[fig2]\n");
        kv(&mut s, "x_min", fmt(self.fig2.x_min));
        kv(&mut s, "x_max", fmt(self.fig2.x_max));
        kv(&mut s, "points", self.fig2.points.to_string());

        let sp = &self.spectrum;
        s.push_str("\n[spectrum]\n");
        kv(&mut s, "f_s", fmt(sp.f_s));
        kv(&mut s, "duration", fmt(sp.duration));
        kv(&mut s, "rbw", fmt(sp.rbw));
        kv(&mut s, "span", fmt(sp.span));
        kv(&mut s, "window", sp.window.name().into());
        if let Some(t) = sp.am_tone {
            kv(&mut s, "am_depth", fmt(t.depth));
            kv(&mut s, "am_offset_hz", fmt(t.offset_hz));
        }
        s
    }
}

/// Shortest representation that parses back to the same f64.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

const SECTIONS: &[&str] = &[
    "modulation",
    "aom",
    "source",
    "rf_response",
    "layout",
    "telescope",
    "fiber",
    "splitter",
    "pd1",
    "pd2",
    "controller",
    "noise",
    "fig2",
    "spectrum",
];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Vec<Entry>>,
}

impl Section {
    fn err(&self, line: usize, msg: impl std::fmt::Display) -> ConfigError {
        ConfigError::new(line, format!("[{}] {msg}", self.name))
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.entries.get_mut(key)?.first_mut()?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn all(&mut self, key: &str) -> Vec<(String, usize)> {
        self.entries
            .get_mut(key)
            .map(|v| {
                v.iter_mut()
                    .map(|e| {
                        e.used = true;
                        (e.value.clone(), e.line)
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => parse_f64(&v)
                .map(Some)
                .ok_or_else(|| self.err(line, format!("`{key}`: expected a number, got `{v}`"))),
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?
            .ok_or_else(|| self.err(self.line, format!("missing key: {key}")))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(line, format!("`{key}`: expected a non-negative integer, got `{v}`"))),
        }
    }

    fn opt_str(&mut self, key: &str) -> Option<(String, usize)> {
        self.raw(key)
    }

    /// Rejects anything that was never read.
    fn finish(self) -> Result<(), ConfigError> {
        for (key, entries) in &self.entries {
            if entries.len() > 1 && key != "point" {
                return Err(self.err(entries[1].line, format!("duplicate key: {key}")));
            }
            if let Some(e) = entries.iter().find(|e| !e.used) {
                return Err(self.err(e.line, format!("unknown key: {key}")));
            }
        }
        Ok(())
    }
}

fn parse_f64(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let mut top = Section {
        name: "top-level".into(),
        line: 0,
        entries: BTreeMap::new(),
    };
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(line_no, format!("malformed section header `{line}`")))?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::new(line_no, format!("unknown section: {name}")));
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::new(line_no, format!("duplicate section: {name}")));
            }
            sections.insert(
                name.clone(),
                Section {
                    name: name.clone(),
                    line: line_no,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line_no, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::new(line_no, "empty key"));
        }
        let target = match &current {
            Some(name) => sections.get_mut(name).expect("section registered"),
            None => &mut top,
        };
        target.entries.entry(key.to_string()).or_default().push(Entry {
            value: value.to_string(),
            line: line_no,
            used: false,
        });
    }

    for required in ["modulation", "aom", "source", "rf_response", "layout", "splitter", "pd1", "pd2"] {
        if !sections.contains_key(required) {
            return Err(ConfigError::new(0, format!("missing section: {required}")));
        }
    }
    let mut take = |name: &str| sections.remove(name);

    let format_version = match top.opt_usize("format_version")? {
        None => FORMAT_VERSION,
        Some(v) if v == FORMAT_VERSION as usize => FORMAT_VERSION,
        Some(v) => {
            let line = top.entries["format_version"][0].line;
            return Err(ConfigError::new(line, format!("unsupported format_version {v}; expected {FORMAT_VERSION}")));
        }
    };
    top.finish()?;

    // [modulation]
    let mut s = take("modulation").unwrap();
    let f_m = s.f64("f_m")?;
    let beta = s.f64("beta")?;
    let f_carrier = s.f64_or("f_carrier", 250e6)?;
    let n_max = match s.opt_usize("n_max")? {
        Some(n) => n,
        None => default_n_max(beta.max(0.0)),
    };
    let modulation = ModulationSpec {
        f_carrier,
        f_m,
        beta,
        n_max,
    };
    modulation.validate().map_err(|e| s.err(s.line, e))?;
    s.finish()?;

    // [aom]
    let mut s = take("aom").unwrap();
    let aom = AomSpec {
        lambda: s.f64("lambda")?,
        v_ac: s.opt_f64("v_ac")?,
        f_lens: s.opt_f64("f_lens")?,
        lateral_shift_override: s.opt_f64("lateral_shift")?,
    };
    aom.validate().map_err(|e| s.err(s.line, e))?;
    s.finish()?;

    // [source]
    let mut s = take("source").unwrap();
    let source = SourceSpec {
        power: s.f64("power")?,
        w0: s.f64("w0")?,
        pol_angle: s.f64_or("pol_angle", 0.0)?,
    };
    BeamState::carrier(source.power, SpatialMode::new(source.w0, aom.lambda), source.pol_angle)
        .map_err(|e| s.err(s.line, e))?;
    s.finish()?;

    // [rf_response]
    let mut s = take("rf_response").unwrap();
    let (kind, kind_line) = s
        .opt_str("kind")
        .ok_or_else(|| s.err(s.line, "missing key: kind"))?;
    let rf = match kind.as_str() {
        "polynomial" => {
            let (coeffs, line) = s
                .opt_str("coeffs")
                .ok_or_else(|| s.err(s.line, "missing key: coeffs"))?;
            let values = coeffs
                .split(',')
                .map(parse_f64)
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| s.err(line, format!("`coeffs`: expected comma-separated numbers, got `{coeffs}`")))?;
            RfSource::Polynomial(values)
        }
        "table" => {
            let mut points = Vec::new();
            for (v, line) in s.all("point") {
                let parts = v.split(',').map(parse_f64).collect::<Option<Vec<_>>>();
                match parts.as_deref() {
                    Some([f, re, im]) => points.push((*f, Complex64::new(*re, *im))),
                    _ => return Err(s.err(line, format!("`point`: expected `freq, re, im`, got `{v}`"))),
                }
            }
            RfSource::Table(points)
        }
        other => return Err(s.err(kind_line, format!("`kind`: expected polynomial or table, got `{other}`"))),
    };
    s.finish()?;

    // [layout]
    let mut s = take("layout").unwrap();
    let (topo, topo_line) = s
        .opt_str("topology")
        .ok_or_else(|| s.err(s.line, "missing key: topology"))?;
    let topology = match topo.as_str() {
        "fig1" => Topology::Fig1,
        "fig3" => Topology::Fig3,
        other => return Err(s.err(topo_line, format!("`topology`: expected fig1 or fig3, got `{other}`"))),
    };
    let plate_angle = s.f64_or("plate_angle", 0.0)?;
    let layout_line = s.line;
    s.finish()?;

    // [telescope]
    let telescope = match take("telescope") {
        None => TelescopeSpec {
            output_w0: source.w0,
            shift_scale: 1.0,
        },
        Some(mut s) => {
            let t = TelescopeSpec {
                output_w0: s.f64_or("output_w0", source.w0)?,
                shift_scale: s.f64_or("shift_scale", 1.0)?,
            };
            if !(t.output_w0 > 0.0) {
                return Err(s.err(s.line, "output_w0 must be > 0"));
            }
            s.finish()?;
            t
        }
    };

    // [fiber]
    let (fiber, fiber_input) = match take("fiber") {
        None => (None, SplitGeometry::Lateral),
        Some(mut s) => {
            let f = FiberSpec {
                w_fiber: s.f64("w_fiber")?,
                offset_x: s.f64_or("offset_x", 0.0)?,
                tilt: s.f64_or("tilt", 0.0)?,
            };
            f.validate().map_err(|e| s.err(s.line, e))?;
            let input = match s.opt_str("input") {
                None => SplitGeometry::Lateral,
                Some((v, _)) if v == "lateral" => SplitGeometry::Lateral,
                Some((v, _)) if v == "angular" => SplitGeometry::LateralAndAngular,
                Some((v, line)) => return Err(s.err(line, format!("`input`: expected lateral or angular, got `{v}`"))),
            };
            if input == SplitGeometry::LateralAndAngular && aom.v_ac.is_none() {
                return Err(s.err(s.line, "angular fiber input needs v_ac in [aom]"));
            }
            s.finish()?;
            (Some(f), input)
        }
    };
    if topology == Topology::Fig3 && fiber.is_none() {
        return Err(ConfigError::new(layout_line, "[layout] topology fig3 requires a [fiber] section"));
    }

    // [splitter]
    let mut s = take("splitter").unwrap();
    let splitter = SplitterSpec {
        r_p: s.f64("r_p")?,
        r_s: s.f64("r_s")?,
    };
    splitter.validate().map_err(|e| s.err(s.line, e))?;
    s.finish()?;

    let pd1 = parse_detector(take("pd1").unwrap())?;
    let pd2 = parse_detector(take("pd2").unwrap())?;

    // [controller]
    let controller = match take("controller") {
        None => ControllerConfig::default(),
        Some(mut s) => {
            let d = ControllerConfig::default();
            let reference_phase = match s.opt_str("reference_phase") {
                None => d.reference_phase,
                Some((v, _)) if v == "auto" => ReferencePhase::Auto,
                Some((v, line)) => ReferencePhase::Fixed(
                    parse_f64(&v).ok_or_else(|| s.err(line, format!("`reference_phase`: expected auto or a number, got `{v}`")))?,
                ),
            };
            let c = ControllerConfig {
                gain: s.f64_or("gain", d.gain)?,
                dt: s.f64_or("dt", d.dt)?,
                steps: s.opt_usize("steps")?.unwrap_or(d.steps),
                k_max: s.opt_usize("k_max")?.unwrap_or(d.k_max),
                reference_phase,
                error_noise: s.f64_or("error_noise", d.error_noise)?,
            };
            let gdt = c.gain * c.dt;
            if !(c.gain > 0.0 && c.dt > 0.0 && gdt < 2.0) {
                return Err(s.err(s.line, format!("need gain > 0, dt > 0 and gain*dt < 2, got gain*dt = {gdt}")));
            }
            if c.steps == 0 || c.k_max == 0 || c.error_noise < 0.0 {
                return Err(s.err(s.line, "steps and k_max must be >= 1 and error_noise >= 0"));
            }
            s.finish()?;
            c
        }
    };

    // [noise]
    let noise = match take("noise") {
        None => None,
        Some(mut s) => {
            let seed = match s.raw("seed") {
                None => 0,
                Some((v, line)) => v
                    .parse()
                    .map_err(|_| s.err(line, format!("`seed`: expected an unsigned integer, got `{v}`")))?,
            };
            let n = NoiseSpec {
                seed,
                rin_level: s.f64_or("rin_level", 0.0)?,
                corner_hz: s.f64_or("corner_hz", 1e3)?,
                floor_level: s.f64_or("floor_level", 0.0)?,
            };
            n.validate().map_err(|e| s.err(s.line, e))?;
            s.finish()?;
            Some(n)
        }
    };

    // [fig2]
    let fig2 = match take("fig2") {
        None => Fig2Config::default(),
        Some(mut s) => {
            let d = Fig2Config::default();
            let f = Fig2Config {
                x_min: s.f64_or("x_min", d.x_min)?,
                x_max: s.f64_or("x_max", d.x_max)?,
                points: s.opt_usize("points")?.unwrap_or(d.points),
            };
            if !(f.x_min < f.x_max) || f.points < 2 {
                return Err(s.err(s.line, "need x_min < x_max and points >= 2"));
            }
            s.finish()?;
            f
        }
    };

    // [spectrum]
    let spectrum = match take("spectrum") {
        None => SpectrumConfig::default(),
        Some(mut s) => {
            let d = SpectrumConfig::default();
            let window = match s.opt_str("window") {
                None => d.window,
                Some((v, line)) => Window::from_name(&v).ok_or_else(|| s.err(line, format!("`window`: unknown window `{v}`")))?,
            };
            let am_tone = match (s.opt_f64("am_depth")?, s.opt_f64("am_offset_hz")?) {
                (None, None) => None,
                (Some(depth), offset) => Some(AmTone {
                    depth,
                    offset_hz: offset.unwrap_or(0.0),
                }),
                (None, Some(_)) => return Err(s.err(s.line, "am_offset_hz given without am_depth")),
            };
            let sp = SpectrumConfig {
                f_s: s.f64_or("f_s", d.f_s)?,
                duration: s.f64_or("duration", d.duration)?,
                rbw: s.f64_or("rbw", d.rbw)?,
                span: s.f64_or("span", d.span)?,
                window,
                am_tone,
            };
            if !(sp.f_s >= 8.0 * modulation.f_m && sp.duration > 0.0 && sp.rbw > 0.0 && sp.span > 0.0) {
                return Err(s.err(s.line, "need f_s >= 8 f_m and positive duration, rbw, span"));
            }
            s.finish()?;
            sp
        }
    };

    let scenario = Scenario {
        format_version,
        topology,
        modulation,
        aom,
        source,
        rf,
        telescope,
        fiber,
        fiber_input,
        splitter,
        plate_angle,
        pd1,
        pd2,
        controller,
        noise,
        fig2,
        spectrum,
    };
    let rf_response = scenario
        .rf_response()
        .map_err(|e| ConfigError::new(0, format!("[rf_response] {e}")))?;
    let n = modulation.n_max as i64;
    if !rf_response.covers(modulation.sideband_frequency(-n), modulation.sideband_frequency(n)) {
        return Err(ConfigError::new(
            0,
            "[rf_response] table must span f_carrier +- n_max f_m",
        ));
    }
    Ok(scenario)
}

fn parse_detector(mut s: Section) -> Result<DetectorSpec, ConfigError> {
    let (kind, line) = s
        .opt_str("aperture")
        .ok_or_else(|| s.err(s.line, "missing key: aperture"))?;
    let aperture = match kind.as_str() {
        "full" => Aperture::FullPlane,
        "screen" => Aperture::HalfPlaneScreen { edge_x: s.f64("edge_x")? },
        "rect" => Aperture::OffsetRect {
            center_x: s.f64_or("center_x", 0.0)?,
            center_y: s.f64_or("center_y", 0.0)?,
            half_width: s.f64("half_width")?,
            half_height: s.f64("half_height")?,
        },
        other => return Err(s.err(line, format!("`aperture`: expected full, screen or rect, got `{other}`"))),
    };
    let rho = s.f64("rho")?;
    let det = DetectorSpec { aperture, rho };
    det.validate().map_err(|e| s.err(s.line, e))?;
    s.finish()?;
    Ok(det)
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(parse_scenario(s)?)
    }
}
