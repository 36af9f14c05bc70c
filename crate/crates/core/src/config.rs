//! Run configuration: structured text file with `[section]` headers and
//! `key = value` lines.
//!
//! Sections: `[scenario]`, `[plant]`, `[dcv]`, `[grid]`, `[control]`,
//! `[trigger]`, `[identifier]`, `[lyapunov]`, `[output]`. Unknown keys are
//! rejected with the offending line; a config written by
//! [`RunConfig::to_file_string`] reloads to an identical value.

use crate::dcv::{DcvParams, InitialCondition};
use crate::error::Error;
use crate::plant::PlantParams;
use crate::simulator::ControlMode;
use crate::Result;
use nalgebra::{DMatrix, DVector, RowDVector};
use std::path::{Path, PathBuf};

/// Which scenario builds the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Dcv,
    Custom,
}

/// Custom plant coefficients; the ODE block is given row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPlant {
    pub q1: f64,
    pub q2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub p: f64,
    pub q: f64,
    pub c0: f64,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for CustomPlant {
    fn default() -> Self {
        CustomPlant {
            q1: 1.0,
            q2: 1.0,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
            d4: 0.0,
            p: 0.5,
            q: 0.5,
            c0: 1.0,
            m: 1,
            a: vec![-0.5],
            b: vec![1.0],
            c: vec![1.0],
        }
    }
}

/// Lyapunov weight selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LyapWeights {
    Auto,
    Manual { delta: f64, ra: f64, rc: f64, rd: f64 },
}

/// Full run description. Defaults reproduce the vessel study's adaptive
/// case with the low initial estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub dcv: DcvParams,
    pub dcv_initial: InitialCondition,
    pub plant: CustomPlant,
    pub nx: usize,
    pub dt: f64,
    pub t_end: f64,
    pub mode: ControlMode,
    pub d_true: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub dhat0: f64,
    pub k: Vec<f64>,
    pub trigger_a: f64,
    pub dwell_t: f64,
    pub identifier_enabled: bool,
    pub ntilde: u32,
    pub nbar: usize,
    pub margin: f64,
    pub lyapunov: LyapWeights,
    pub out_dir: PathBuf,
    pub log_stride: usize,
    pub record_profiles: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioKind::Dcv,
            dcv: DcvParams::default(),
            dcv_initial: InitialCondition::Published,
            plant: CustomPlant::default(),
            nx: 51,
            dt: 0.001,
            t_end: 40.0,
            mode: ControlMode::Adaptive,
            d_true: 1.0,
            d_min: 0.01,
            d_max: 2.0,
            dhat0: 0.25,
            k: vec![-18.0],
            trigger_a: 2.0,
            dwell_t: 3.12,
            identifier_enabled: true,
            ntilde: 10,
            nbar: 2,
            margin: 0.02,
            lyapunov: LyapWeights::Manual {
                delta: -0.36,
                ra: 1.02,
                rc: 1.0,
                rd: 0.02,
            },
            out_dir: PathBuf::from("out"),
            log_stride: 10,
            record_profiles: false,
        }
    }
}

impl RunConfig {
    /// Assemble the plant parameters for this configuration.
    pub fn build_plant(&self) -> Result<PlantParams> {
        match self.scenario {
            ScenarioKind::Dcv => {
                if self.k.len() != 1 {
                    return Err(Error::Dimension(format!(
                        "the vessel scenario has a scalar ODE block; k must have 1 entry, got {}",
                        self.k.len()
                    )));
                }
                crate::dcv::dcv_to_plant(&self.dcv, self.k[0], self.d_min, self.d_max, self.d_true)
            }
            ScenarioKind::Custom => {
                let cp = &self.plant;
                let m = cp.m;
                if cp.a.len() != m * m || cp.b.len() != m || cp.c.len() != m || self.k.len() != m {
                    return Err(Error::Dimension(format!(
                        "custom plant with m = {m} needs a: {} entries, b/c/k: {m} each; \
                         got a: {}, b: {}, c: {}, k: {}",
                        m * m,
                        cp.a.len(),
                        cp.b.len(),
                        cp.c.len(),
                        self.k.len()
                    )));
                }
                Ok(PlantParams {
                    q1: cp.q1,
                    q2: cp.q2,
                    d1: cp.d1,
                    d2: cp.d2,
                    d3: cp.d3,
                    d4: cp.d4,
                    p: cp.p,
                    q: cp.q,
                    c0: cp.c0,
                    a: DMatrix::from_row_slice(m, m, &cp.a),
                    b: DVector::from_column_slice(&cp.b),
                    c: RowDVector::from_row_slice(&cp.c),
                    k: DVector::from_column_slice(&self.k),
                    d_min: self.d_min,
                    d_max: self.d_max,
                    d_true: self.d_true,
                })
            }
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    /// Parse the structured text format. Unknown sections or keys are
    /// errors carrying the offending line number.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find(['#', ';']) {
                Some(cut) => &raw[..cut],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(lineno, format!("malformed section header `{raw}`")))?;
                section = name.trim().to_string();
                const KNOWN: [&str; 9] = [
                    "scenario",
                    "plant",
                    "dcv",
                    "grid",
                    "control",
                    "trigger",
                    "identifier",
                    "lyapunov",
                    "output",
                ];
                if !KNOWN.contains(&section.as_str()) {
                    return Err(Error::config(lineno, format!("unknown section `[{section}]`")));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(lineno, format!("expected `key = value`, got `{raw}`")))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value, lineno)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let f = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::config(line, format!("`{key}` expects a number, got `{v}`")))
        };
        let us = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::config(line, format!("`{key}` expects a count, got `{v}`")))
        };
        let b = |v: &str| -> Result<bool> {
            v.parse::<bool>()
                .map_err(|_| Error::config(line, format!("`{key}` expects true/false, got `{v}`")))
        };
        let list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::config(line, format!("`{key}` expects comma-separated numbers, got `{v}`"))
                    })
                })
                .collect()
        };
        match (section, key) {
            ("scenario", "name") => {
                self.scenario = match value {
                    "dcv" => ScenarioKind::Dcv,
                    "custom" => ScenarioKind::Custom,
                    other => {
                        return Err(Error::config(line, format!("unknown scenario `{other}`")))
                    }
                }
            }
            ("plant", "q1") => self.plant.q1 = f(value)?,
            ("plant", "q2") => self.plant.q2 = f(value)?,
            ("plant", "d1") => self.plant.d1 = f(value)?,
            ("plant", "d2") => self.plant.d2 = f(value)?,
            ("plant", "d3") => self.plant.d3 = f(value)?,
            ("plant", "d4") => self.plant.d4 = f(value)?,
            ("plant", "p") => self.plant.p = f(value)?,
            ("plant", "q") => self.plant.q = f(value)?,
            ("plant", "c0") => self.plant.c0 = f(value)?,
            ("plant", "m") => self.plant.m = us(value)?,
            ("plant", "a") => self.plant.a = list(value)?,
            ("plant", "b") => self.plant.b = list(value)?,
            ("plant", "c") => self.plant.c = list(value)?,
            ("dcv", "cable_length") => self.dcv.cable_length = f(value)?,
            ("dcv", "linear_density") => self.dcv.linear_density = f(value)?,
            ("dcv", "payload_mass") => self.dcv.payload_mass = f(value)?,
            ("dcv", "gravity") => self.dcv.gravity = f(value)?,
            ("dcv", "cable_damping") => self.dcv.cable_damping = f(value)?,
            ("dcv", "cylinder_height") => self.dcv.cylinder_height = f(value)?,
            ("dcv", "cylinder_diameter") => self.dcv.cylinder_diameter = f(value)?,
            ("dcv", "payload_damping") => self.dcv.payload_damping = f(value)?,
            ("dcv", "seawater_density") => self.dcv.seawater_density = f(value)?,
            ("dcv", "initial") => {
                self.dcv_initial = match value {
                    "published" => InitialCondition::Published,
                    "compatible" => InitialCondition::Compatible,
                    other => {
                        return Err(Error::config(
                            line,
                            format!("`initial` must be published|compatible, got `{other}`"),
                        ))
                    }
                }
            }
            ("grid", "nx") => self.nx = us(value)?,
            ("grid", "dt") => self.dt = f(value)?,
            ("grid", "t_end") => self.t_end = f(value)?,
            ("control", "mode") => {
                self.mode = match value {
                    "open_loop" => ControlMode::OpenLoop,
                    "nominal" => ControlMode::Nominal,
                    "adaptive" => ControlMode::Adaptive,
                    other => {
                        return Err(Error::config(
                            line,
                            format!("`mode` must be open_loop|nominal|adaptive, got `{other}`"),
                        ))
                    }
                }
            }
            ("control", "d_true") => self.d_true = f(value)?,
            ("control", "d_min") => self.d_min = f(value)?,
            ("control", "d_max") => self.d_max = f(value)?,
            ("control", "dhat0") => self.dhat0 = f(value)?,
            ("control", "k") => self.k = list(value)?,
            ("trigger", "a") => self.trigger_a = f(value)?,
            ("trigger", "t") => self.dwell_t = f(value)?,
            ("identifier", "enabled") => self.identifier_enabled = b(value)?,
            ("identifier", "ntilde") => {
                self.ntilde = us(value)? as u32;
            }
            ("identifier", "nbar") => self.nbar = us(value)?,
            ("identifier", "margin") => self.margin = f(value)?,
            ("lyapunov", "mode") => {
                if value == "auto" {
                    self.lyapunov = LyapWeights::Auto;
                } else if value == "manual" {
                    if let LyapWeights::Auto = self.lyapunov {
                        self.lyapunov = LyapWeights::Manual {
                            delta: -0.36,
                            ra: 1.02,
                            rc: 1.0,
                            rd: 0.02,
                        };
                    }
                } else {
                    return Err(Error::config(
                        line,
                        format!("`mode` must be auto|manual, got `{value}`"),
                    ));
                }
            }
            ("lyapunov", "delta") | ("lyapunov", "ra") | ("lyapunov", "rc") | ("lyapunov", "rd") => {
                let v = f(value)?;
                let (mut delta, mut ra, mut rc, mut rd) = match self.lyapunov {
                    LyapWeights::Manual { delta, ra, rc, rd } => (delta, ra, rc, rd),
                    LyapWeights::Auto => (-0.36, 1.02, 1.0, 0.02),
                };
                match key {
                    "delta" => delta = v,
                    "ra" => ra = v,
                    "rc" => rc = v,
                    _ => rd = v,
                }
                self.lyapunov = LyapWeights::Manual { delta, ra, rc, rd };
            }
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("output", "stride") => self.log_stride = us(value)?,
            ("output", "profiles") => self.record_profiles = b(value)?,
            _ => {
                return Err(Error::config(
                    line,
                    format!("unknown key `{key}` in section `[{section}]`"),
                ))
            }
        }
        Ok(())
    }

    /// Serialize in the same format `parse` reads.
    pub fn to_file_string(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = String::new();
        s.push_str("[scenario]\n");
        s.push_str(&format!(
            "name = {}\n\n",
            match self.scenario {
                ScenarioKind::Dcv => "dcv",
                ScenarioKind::Custom => "custom",
            }
        ));
        s.push_str("[plant]\n");
        s.push_str(&format!("q1 = {}\n", self.plant.q1));
        s.push_str(&format!("q2 = {}\n", self.plant.q2));
        s.push_str(&format!("d1 = {}\n", self.plant.d1));
        s.push_str(&format!("d2 = {}\n", self.plant.d2));
        s.push_str(&format!("d3 = {}\n", self.plant.d3));
        s.push_str(&format!("d4 = {}\n", self.plant.d4));
        s.push_str(&format!("p = {}\n", self.plant.p));
        s.push_str(&format!("q = {}\n", self.plant.q));
        s.push_str(&format!("c0 = {}\n", self.plant.c0));
        s.push_str(&format!("m = {}\n", self.plant.m));
        s.push_str(&format!("a = {}\n", list(&self.plant.a)));
        s.push_str(&format!("b = {}\n", list(&self.plant.b)));
        s.push_str(&format!("c = {}\n\n", list(&self.plant.c)));
        s.push_str("[dcv]\n");
        s.push_str(&format!("cable_length = {}\n", self.dcv.cable_length));
        s.push_str(&format!("linear_density = {}\n", self.dcv.linear_density));
        s.push_str(&format!("payload_mass = {}\n", self.dcv.payload_mass));
        s.push_str(&format!("gravity = {}\n", self.dcv.gravity));
        s.push_str(&format!("cable_damping = {}\n", self.dcv.cable_damping));
        s.push_str(&format!("cylinder_height = {}\n", self.dcv.cylinder_height));
        s.push_str(&format!(
            "cylinder_diameter = {}\n",
            self.dcv.cylinder_diameter
        ));
        s.push_str(&format!("payload_damping = {}\n", self.dcv.payload_damping));
        s.push_str(&format!(
            "seawater_density = {}\n",
            self.dcv.seawater_density
        ));
        s.push_str(&format!(
            "initial = {}\n\n",
            match self.dcv_initial {
                InitialCondition::Published => "published",
                InitialCondition::Compatible => "compatible",
            }
        ));
        s.push_str("[grid]\n");
        s.push_str(&format!("nx = {}\n", self.nx));
        s.push_str(&format!("dt = {}\n", self.dt));
        s.push_str(&format!("t_end = {}\n\n", self.t_end));
        s.push_str("[control]\n");
        s.push_str(&format!(
            "mode = {}\n",
            match self.mode {
                ControlMode::OpenLoop => "open_loop",
                ControlMode::Nominal => "nominal",
                ControlMode::Adaptive => "adaptive",
            }
        ));
        s.push_str(&format!("d_true = {}\n", self.d_true));
        s.push_str(&format!("d_min = {}\n", self.d_min));
        s.push_str(&format!("d_max = {}\n", self.d_max));
        s.push_str(&format!("dhat0 = {}\n", self.dhat0));
        s.push_str(&format!("k = {}\n\n", list(&self.k)));
        s.push_str("[trigger]\n");
        s.push_str(&format!("a = {}\n", self.trigger_a));
        s.push_str(&format!("t = {}\n\n", self.dwell_t));
        s.push_str("[identifier]\n");
        s.push_str(&format!("enabled = {}\n", self.identifier_enabled));
        s.push_str(&format!("ntilde = {}\n", self.ntilde));
        s.push_str(&format!("nbar = {}\n", self.nbar));
        s.push_str(&format!("margin = {}\n\n", self.margin));
        s.push_str("[lyapunov]\n");
        match self.lyapunov {
            LyapWeights::Auto => s.push_str("mode = auto\n\n"),
            LyapWeights::Manual { delta, ra, rc, rd } => {
                s.push_str("mode = manual\n");
                s.push_str(&format!("delta = {delta}\n"));
                s.push_str(&format!("ra = {ra}\n"));
                s.push_str(&format!("rc = {rc}\n"));
                s.push_str(&format!("rd = {rd}\n\n"));
            }
        }
        s.push_str("[output]\n");
        s.push_str(&format!("dir = {}\n", self.out_dir.display()));
        s.push_str(&format!("stride = {}\n", self.log_stride));
        s.push_str(&format!("profiles = {}\n", self.record_profiles));
        s
    }
}
