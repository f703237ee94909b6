//! Key-value run settings: model file, then `--config`, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use nicholson_core::dde::{Method, SolverConfig};
use nicholson_core::modelfile::{format_list, spec_from_key_values, spec_to_key_values, KeyValues, ParseError, MODEL_KEYS};
use nicholson_core::{SystemSpec, TorusPoint};

use crate::CliError;

pub const RUN_KEYS: &[&str] = &[
    "h",
    "method",
    "stage_tol",
    "max_stage_iters",
    "theta",
    "t_start",
    "t_end",
    "linearized",
    "history",
    "horizon",
    "renorm_threshold",
    "checkpoints",
    "n",
    "tol",
    "lag",
    "t_step",
    "t_max",
    "axis",
    "values",
    "sampling",
    "grid_step",
];

/// Written by manifests and ignored on input.
pub const META_KEYS: &[&str] = &["command", "version", "model_file", "outputs", "duration_s", "jobs"];

pub struct Settings {
    pub kv: KeyValues,
    pub spec: SystemSpec,
    pub model_file: Option<PathBuf>,
}

fn read_kv(path: &Path) -> Result<KeyValues, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let kv = KeyValues::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let allowed: Vec<&str> = MODEL_KEYS.iter().chain(RUN_KEYS).chain(META_KEYS).copied().collect();
    kv.reject_unknown(&allowed)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(kv)
}

impl Settings {
    pub fn load(
        model: Option<&Path>,
        config: Option<&Path>,
        sets: &[String],
        flags: KeyValues,
    ) -> Result<Settings, CliError> {
        let mut kv = match model {
            Some(p) => read_kv(p)?,
            None => KeyValues::default(),
        };
        if let Some(c) = config {
            kv.merge(&read_kv(c)?);
        }
        for s in sets {
            let Some((k, v)) = s.split_once('=') else {
                return Err(CliError::Input(format!("--set expects KEY=VALUE, got `{s}`")));
            };
            let k = k.trim();
            if !MODEL_KEYS.contains(&k) && !RUN_KEYS.contains(&k) {
                return Err(CliError::Input(format!("--set: unknown key `{k}`")));
            }
            kv.set(k, v.trim());
        }
        kv.merge(&flags);
        for meta in META_KEYS {
            kv.remove(meta);
        }
        let spec = spec_from_key_values(&kv).map_err(input)?;
        Ok(Settings {
            kv,
            spec,
            model_file: model.map(Path::to_path_buf),
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.kv.f64(key).map_err(input)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.kv.usize(key).map_err(input)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self.kv.parsed::<bool>(key).map_err(input)?.unwrap_or(default))
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.kv.f64_list(key).map_err(input)
    }

    pub fn theta(&self) -> Result<TorusPoint, CliError> {
        match self.list("theta")? {
            None => Ok(TorusPoint::ORIGIN),
            Some(v) if v.len() == 2 => Ok(TorusPoint::new(v[0], v[1])),
            Some(v) => Err(CliError::Input(format!("`theta` needs 2 values, got {}", v.len()))),
        }
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            h: self.f64_or("h", d.h)?,
            stage_tol: self.f64_or("stage_tol", d.stage_tol)?,
            max_stage_iters: self.usize_or("max_stage_iters", d.max_stage_iters)?,
            method: self.kv.parsed::<Method>("method").map_err(input)?.unwrap_or(d.method),
        };
        cfg.validate(self.spec.min_delay())
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(cfg)
    }

    /// Manifest body: the resolved model plus `run`, then meta keys.
    pub fn manifest(&self, command: &str, run: &KeyValues, outputs: &[String], seconds: f64) -> String {
        let mut kv = spec_to_key_values(&self.spec);
        kv.merge(run);
        kv.set("command", command);
        kv.set("version", env!("CARGO_PKG_VERSION"));
        if let Some(p) = &self.model_file {
            kv.set("model_file", p.display());
        }
        kv.set("outputs", outputs.join(", "));
        kv.set("duration_s", format!("{seconds:.3}"));
        format!(
            "# nicholson run manifest; usable as a model file\n{}",
            kv.to_text()
        )
    }
}

pub fn input(e: ParseError) -> CliError {
    CliError::Input(e.to_string())
}

/// Resolved solver keys for a manifest.
pub fn solver_keys(cfg: &SolverConfig, kv: &mut KeyValues) {
    kv.set("method", cfg.method);
    kv.set("h", cfg.h);
    kv.set("stage_tol", cfg.stage_tol);
    kv.set("max_stage_iters", cfg.max_stage_iters);
}

pub fn theta_value(theta: TorusPoint) -> String {
    format_list(&[theta.theta1(), theta.theta2()])
}
