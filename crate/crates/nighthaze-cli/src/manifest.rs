//! Run manifests: plain-text `key = value` records of what produced which
//! files under which configuration. Timing lines carry a `_ms` suffix so
//! reproducibility checks can strip them.

use std::fmt::Write as _;
use std::path::Path;

use nighthaze::config::PipelineConfig;
use nighthaze::pipeline::StageTimes;

pub struct Manifest {
    body: String,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "tool = nighthaze {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(body, "command = {command}");
        Self { body }
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.body, "{key} = {value}");
        self
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.body, "# {name}");
        self
    }

    pub fn config(&mut self, cfg: &PipelineConfig) -> &mut Self {
        self.section("config");
        self.body.push_str(&cfg.to_key_values());
        self
    }

    pub fn times(&mut self, times: &StageTimes) -> &mut Self {
        self.section("timings");
        self.kv("stage_illumination_ms", format!("{:.3}", times.illumination_ms));
        self.kv("stage_color_ms", format!("{:.3}", times.color_ms));
        self.kv("stage_dehazing_ms", format!("{:.3}", times.dehazing_ms));
        self.kv("total_ms", format!("{:.3}", times.total_ms()));
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.body)
    }
}

/// Path of the manifest that accompanies an output file.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.txt");
    output.with_file_name(name)
}
