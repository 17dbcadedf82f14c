//! Text configuration, one `key=value` per line. `#` starts a comment; every
//! key is optional.
//!
//! ```text
//! radar.carrier_hz=60e9      had.alpha=0.3        k=25
//! radar.bandwidth_hz=5e9     had.beta=1           il=40
//! radar.chirp_s=432e-6       had.short_window=4   checkpoint=model.rgnn
//! radar.samples_per_chirp=32 had.long_window=16   realtime=false
//! radar.chirps_per_cycle=32  had.gamma1=inf       seed=0
//! radar.pri_s=0.034          had.gamma2=0.5
//! radar.spacing_wavelengths=0.5  had.refractory=20
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_encoder::{DEFAULT_IL, DEFAULT_K};
use crate::had::HadConfig;
use crate::radar_model::RadarParams;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub radar: RadarParams,
    pub had: HadConfig,
    pub k: usize,
    pub il: usize,
    pub checkpoint: Option<PathBuf>,
    pub realtime: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radar: RadarParams::default(),
            had: HadConfig::default(),
            k: DEFAULT_K,
            il: DEFAULT_IL,
            checkpoint: None,
            realtime: false,
            seed: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Format(format!("{key}: cannot parse {v:?}")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.had.validate()?;
        if self.k == 0 || self.k > self.radar.cells() {
            return Err(Error::ParameterDomain(format!(
                "k={} outside [1, {}]",
                self.k,
                self.radar.cells()
            )));
        }
        if self.il == 0 {
            return Err(Error::ParameterDomain("il must be >= 1".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Format(format!("line {}: expected key=value", n + 1)))?;
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let r = &mut self.radar;
        let h = &mut self.had;
        match key {
            "radar.carrier_hz" => r.carrier_hz = num(key, v)?,
            "radar.bandwidth_hz" => r.bandwidth_hz = num(key, v)?,
            "radar.chirp_s" => r.chirp_s = num(key, v)?,
            "radar.samples_per_chirp" => r.samples_per_chirp = num(key, v)?,
            "radar.chirps_per_cycle" => r.chirps_per_cycle = num(key, v)?,
            "radar.pri_s" => r.pri_s = num(key, v)?,
            "radar.spacing_wavelengths" => r.spacing_wavelengths = num(key, v)?,
            "had.alpha" => h.alpha = num(key, v)?,
            "had.beta" => h.beta = num(key, v)?,
            "had.short_window" => h.short_window = num(key, v)?,
            "had.long_window" => h.long_window = num(key, v)?,
            "had.gamma1" => h.gamma1 = num(key, v)?,
            "had.gamma2" => h.gamma2 = num(key, v)?,
            "had.refractory" => h.refractory = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "il" => self.il = num(key, v)?,
            "checkpoint" => self.checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
            "realtime" => self.realtime = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            _ => return Err(Error::Format(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let r = &self.radar;
        let h = &self.had;
        let mut s = String::new();
        let _ = writeln!(s, "radar.carrier_hz={}", r.carrier_hz);
        let _ = writeln!(s, "radar.bandwidth_hz={}", r.bandwidth_hz);
        let _ = writeln!(s, "radar.chirp_s={}", r.chirp_s);
        let _ = writeln!(s, "radar.samples_per_chirp={}", r.samples_per_chirp);
        let _ = writeln!(s, "radar.chirps_per_cycle={}", r.chirps_per_cycle);
        let _ = writeln!(s, "radar.pri_s={}", r.pri_s);
        let _ = writeln!(s, "radar.spacing_wavelengths={}", r.spacing_wavelengths);
        let _ = writeln!(s, "had.alpha={}", h.alpha);
        let _ = writeln!(s, "had.beta={}", h.beta);
        let _ = writeln!(s, "had.short_window={}", h.short_window);
        let _ = writeln!(s, "had.long_window={}", h.long_window);
        let _ = writeln!(s, "had.gamma1={}", h.gamma1);
        let _ = writeln!(s, "had.gamma2={}", h.gamma2);
        let _ = writeln!(s, "had.refractory={}", h.refractory);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "il={}", self.il);
        if let Some(p) = &self.checkpoint {
            let _ = writeln!(s, "checkpoint={}", p.display());
        }
        let _ = writeln!(s, "realtime={}", self.realtime);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}
