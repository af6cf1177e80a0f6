//! Pipeline tunables and the plain-text `key = value` config format.

use crate::error::{Error, Result};

/// Every tunable of the three-stage pipeline.
///
/// Defaults: gamma 1/3, gamma0 1/1.2, local patch radius 5, guided-filter
/// radius 32 and epsilon 0.01, stretch anchors at the 5th/95th percentiles.
/// The remaining knobs guard divisions and logs or toggle alternate modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Illumination gamma exponent.
    pub gamma: f64,
    /// Amplification exponent for the incident-light color estimate.
    pub gamma0: f64,
    /// Local patch half-size for max/dark-channel estimates.
    pub patch_radius: usize,
    /// Guided-filter kernel radius.
    pub gf_radius: usize,
    /// Guided-filter regularization.
    pub gf_epsilon: f64,
    /// Haze retention weight in transmission estimation.
    pub omega: f64,
    /// Minimum transmission before recovery division.
    pub t_floor: f64,
    /// Minimum incident-light color before division.
    pub eta_floor: f64,
    /// Lower percentile anchor for stretching.
    pub stretch_lo: f64,
    /// Upper percentile anchor for stretching.
    pub stretch_hi: f64,
    /// Minimum intensity before taking logs.
    pub log_floor: f64,
    /// Apply the robust stretch after gamma correction.
    pub stretch_enabled: bool,
    /// Filter the log-reflectance in a second pass instead of deriving it by
    /// division (breaks the exact reconstruction identity).
    pub two_pass_decomposition: bool,
    /// Amplify the color estimate by one global factor instead of per pixel.
    pub global_amplification: bool,
    /// Skip color estimation and assume white incident light.
    pub force_unit_eta: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0 / 3.0,
            gamma0: 1.0 / 1.2,
            patch_radius: 5,
            gf_radius: 32,
            gf_epsilon: 0.01,
            omega: 0.95,
            t_floor: 0.1,
            eta_floor: 0.05,
            stretch_lo: 5.0,
            stretch_hi: 95.0,
            log_floor: 1.0 / 255.0,
            stretch_enabled: true,
            two_pass_decomposition: false,
            global_amplification: false,
            force_unit_eta: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParam(msg.to_string()))
            }
        }
        check(self.gamma > 0.0 && self.gamma <= 1.0, "gamma must be in (0, 1]")?;
        check(self.gamma0 > 0.0 && self.gamma0 <= 1.0, "gamma0 must be in (0, 1]")?;
        check(self.patch_radius >= 1, "patch_radius must be >= 1")?;
        check(self.gf_radius >= 1, "gf_radius must be >= 1")?;
        check(self.gf_epsilon > 0.0, "gf_epsilon must be > 0")?;
        check(self.omega >= 0.0 && self.omega <= 1.0, "omega must be in [0, 1]")?;
        check(self.t_floor > 0.0 && self.t_floor < 1.0, "t_floor must be in (0, 1)")?;
        check(self.eta_floor > 0.0 && self.eta_floor < 1.0, "eta_floor must be in (0, 1)")?;
        check(self.stretch_lo < self.stretch_hi, "stretch_lo must be < stretch_hi")?;
        check(
            self.stretch_lo >= 0.0 && self.stretch_hi <= 100.0,
            "stretch percentiles must be in [0, 100]",
        )?;
        check(self.log_floor > 0.0, "log_floor must be > 0")?;
        Ok(())
    }

    /// Sets one field from its config-file key. Unknown keys and unparsable
    /// values are errors.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn f64_of(key: &str, value: &str) -> Result<f64> {
            value.parse().map_err(|_| Error::InvalidConfigValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        fn usize_of(key: &str, value: &str) -> Result<usize> {
            value.parse().map_err(|_| Error::InvalidConfigValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        fn bool_of(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "on" | "1" | "yes" => Ok(true),
                "false" | "off" | "0" | "no" => Ok(false),
                _ => Err(Error::InvalidConfigValue {
                    key: key.to_string(),
                    value: value.to_string(),
                }),
            }
        }
        match key {
            "gamma" => self.gamma = f64_of(key, value)?,
            "gamma0" => self.gamma0 = f64_of(key, value)?,
            "patch_radius" => self.patch_radius = usize_of(key, value)?,
            "gf_radius" => self.gf_radius = usize_of(key, value)?,
            "gf_epsilon" => self.gf_epsilon = f64_of(key, value)?,
            "omega" => self.omega = f64_of(key, value)?,
            "t_floor" => self.t_floor = f64_of(key, value)?,
            "eta_floor" => self.eta_floor = f64_of(key, value)?,
            "stretch_lo" => self.stretch_lo = f64_of(key, value)?,
            "stretch_hi" => self.stretch_hi = f64_of(key, value)?,
            "log_floor" => self.log_floor = f64_of(key, value)?,
            "stretch_enabled" => self.stretch_enabled = bool_of(key, value)?,
            "two_pass_decomposition" => self.two_pass_decomposition = bool_of(key, value)?,
            "global_amplification" => self.global_amplification = bool_of(key, value)?,
            "force_unit_eta" => self.force_unit_eta = bool_of(key, value)?,
            _ => return Err(Error::UnknownConfigKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines (with `#` comments) on top of the current
    /// settings, then validates.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_key_values(text)? {
            self.set_key(&key, &value)?;
        }
        self.validate()
    }

    /// Serializes the full configuration as `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("gamma", format!("{}", self.gamma));
        kv("gamma0", format!("{}", self.gamma0));
        kv("patch_radius", format!("{}", self.patch_radius));
        kv("gf_radius", format!("{}", self.gf_radius));
        kv("gf_epsilon", format!("{}", self.gf_epsilon));
        kv("omega", format!("{}", self.omega));
        kv("t_floor", format!("{}", self.t_floor));
        kv("eta_floor", format!("{}", self.eta_floor));
        kv("stretch_lo", format!("{}", self.stretch_lo));
        kv("stretch_hi", format!("{}", self.stretch_hi));
        kv("log_floor", format!("{}", self.log_floor));
        kv("stretch_enabled", format!("{}", self.stretch_enabled));
        kv("two_pass_decomposition", format!("{}", self.two_pass_decomposition));
        kv("global_amplification", format!("{}", self.global_amplification));
        kv("force_unit_eta", format!("{}", self.force_unit_eta));
        s
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidParam(format!(
                "malformed config line: {raw:?}"
            )));
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}
