//! Experiment configuration: defaults, JSON file, environment and flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vortex_core::dynamics::Scheme;
use vortex_core::fields::{Family, PerturbationRecipe};
use vortex_core::io::sha256_hex;
use vortex_core::{Result, VortexError};

/// Environment variable holding the default output root.
pub const OUT_ENV: &str = "VORTEX_LAB_OUT";

/// One layer of settings. Every field is optional so layers can be stacked;
/// the resolved [`ExperimentConfig`] serializes to the same keys, so a written
/// `config.json` can be fed back through `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub rmax: Option<f64>,
    pub tol: Option<f64>,
    pub half_width: Option<f64>,
    pub n: Option<usize>,
    pub energy_tol: Option<f64>,
    pub r_scale: Option<f64>,
    pub family: Option<Family>,
    pub amplitude: Option<f64>,
    pub width: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub seed: Option<u64>,
    pub shift: Option<[f64; 2]>,
    pub phase: Option<f64>,
    pub refine: Option<usize>,
    pub j: Option<i32>,
    pub no_constraint: Option<bool>,
    pub j_max: Option<i32>,
    pub scan_r0: Option<f64>,
    pub scan_n0: Option<u32>,
    pub scan_samples: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub snapshot_every: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub scheme: Option<Scheme>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub track_ode: Option<bool>,
    pub amp_sweep: Option<Vec<f64>>,
    pub guess: Option<[f64; 3]>,
}

macro_rules! overlay {
    ($lo:expr, $hi:expr, $($f:ident),*) => {
        $( if $hi.$f.is_some() { $lo.$f = $hi.$f.clone(); } )*
    };
}

impl ConfigLayer {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VortexError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| VortexError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `hi` replace those in `self`.
    pub fn overlay(mut self, hi: &ConfigLayer) -> Self {
        overlay!(
            self, hi, command, out, profile, rmax, tol, half_width, n, energy_tol, r_scale, family, amplitude, width,
            center, seed, shift, phase, refine, j, no_constraint, j_max, scan_r0, scan_n0, scan_samples, dt, t_final,
            snapshot_every, snapshot_stride, scheme, delta, alpha, track_ode, amp_sweep, guess
        );
        self
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub out: PathBuf,
    /// Profile artifact to load; solved from `rmax`, `tol` when absent.
    pub profile: Option<PathBuf>,
    pub rmax: f64,
    pub tol: f64,
    pub half_width: f64,
    pub n: usize,
    /// Extrapolation tolerance of the truncation sweeps.
    pub energy_tol: f64,
    pub r_scale: f64,
    pub family: Family,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub seed: u64,
    pub shift: [f64; 2],
    pub phase: f64,
    pub refine: usize,
    pub j: Option<i32>,
    pub no_constraint: bool,
    pub j_max: i32,
    pub scan_r0: f64,
    pub scan_n0: u32,
    pub scan_samples: u64,
    pub dt: Option<f64>,
    pub t_final: f64,
    pub snapshot_every: f64,
    /// Write a field snapshot every this many diagnostic rows (0 disables).
    pub snapshot_stride: usize,
    pub scheme: Scheme,
    pub delta: f64,
    pub alpha: f64,
    pub track_ode: bool,
    pub amp_sweep: Vec<f64>,
    pub guess: Option<[f64; 3]>,
}

impl ExperimentConfig {
    /// Applies the command's defaults to the merged layer.
    pub fn resolve(command: &str, layer: ConfigLayer, env_root: Option<PathBuf>) -> Result<Self> {
        if let Some(c) = &layer.command {
            if c != command {
                return Err(VortexError::Usage(format!("config file is for '{c}', not '{command}'")));
            }
        }
        let n_default = if command == "energy" { 512 } else { 256 };
        let out = match (layer.out, env_root) {
            (Some(o), _) => o,
            (None, Some(root)) => root.join(command),
            (None, None) => PathBuf::from("vortex-lab-out").join(command),
        };
        let cfg = ExperimentConfig {
            command: command.to_string(),
            out,
            profile: layer.profile,
            rmax: layer.rmax.unwrap_or(60.0),
            tol: layer.tol.unwrap_or(1e-10),
            half_width: layer.half_width.unwrap_or(30.0),
            n: layer.n.unwrap_or(n_default),
            energy_tol: layer.energy_tol.unwrap_or(1e-6),
            r_scale: layer.r_scale.unwrap_or(4.0),
            family: layer.family.unwrap_or(Family::None),
            amplitude: layer.amplitude.unwrap_or(0.0),
            width: layer.width.unwrap_or(1.5),
            center: layer.center.unwrap_or([1.0, 0.5]),
            seed: layer.seed.unwrap_or(0),
            shift: layer.shift.unwrap_or([0.0, 0.0]),
            phase: layer.phase.unwrap_or(0.0),
            refine: layer.refine.unwrap_or(1),
            j: layer.j,
            no_constraint: layer.no_constraint.unwrap_or(false),
            j_max: layer.j_max.unwrap_or(6),
            scan_r0: layer.scan_r0.unwrap_or(1.0),
            scan_n0: layer.scan_n0.unwrap_or(3),
            scan_samples: layer.scan_samples.unwrap_or(5),
            dt: layer.dt,
            t_final: layer.t_final.unwrap_or(50.0),
            snapshot_every: layer.snapshot_every.unwrap_or(0.5),
            snapshot_stride: layer.snapshot_stride.unwrap_or(10),
            scheme: layer.scheme.unwrap_or(Scheme::CrankNicolson),
            delta: layer.delta.unwrap_or(0.05),
            alpha: layer.alpha.unwrap_or(0.2),
            track_ode: layer.track_ode.unwrap_or(true),
            amp_sweep: layer.amp_sweep.unwrap_or_default(),
            guess: layer.guess,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VortexError::Usage(m.to_string()));
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad("L must be positive");
        }
        if self.n < 8 {
            return bad("N must be at least 8");
        }
        if self.refine == 0 {
            return bad("refine factor must be at least 1");
        }
        if let Some(j) = self.j {
            if j.abs() > self.j_max {
                return bad("--j lies outside [-j_max, j_max]");
            }
        }
        if matches!(self.dt, Some(d) if !(d > 0.0)) {
            return bad("dt must be positive");
        }
        if !(self.t_final > 0.0 && self.snapshot_every > 0.0) {
            return bad("T and the snapshot cadence must be positive");
        }
        if self.amp_sweep.iter().any(|a| !a.is_finite()) {
            return bad("sweep amplitudes must be finite");
        }
        Ok(())
    }

    pub fn recipe(&self) -> PerturbationRecipe {
        PerturbationRecipe {
            family: self.family,
            amplitude: self.amplitude,
            width: self.width,
            center: self.center,
            seed: self.seed,
        }
    }

    /// SHA-256 of the resolved config without the output directory, so the same
    /// experiment hashes identically wherever it is written.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layers_win() {
        let file = ConfigLayer { n: Some(64), half_width: Some(12.0), ..Default::default() };
        let flags = ConfigLayer { n: Some(128), ..Default::default() };
        let merged = file.overlay(&flags);
        assert_eq!((merged.n, merged.half_width), (Some(128), Some(12.0)));
    }

    #[test]
    fn out_precedence() {
        let root = Some(PathBuf::from("/tmp/root"));
        let c = ExperimentConfig::resolve("energy", ConfigLayer::default(), root.clone()).unwrap();
        assert_eq!(c.out, PathBuf::from("/tmp/root/energy"));
        let l = ConfigLayer { out: Some("x".into()), ..Default::default() };
        assert_eq!(ExperimentConfig::resolve("energy", l, root).unwrap().out, PathBuf::from("x"));
    }

    #[test]
    fn hash_ignores_out() {
        let a = ExperimentConfig::resolve("evolve", ConfigLayer { out: Some("a".into()), ..Default::default() }, None).unwrap();
        let b = ExperimentConfig::resolve("evolve", ConfigLayer { out: Some("b".into()), ..Default::default() }, None).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::resolve("evolve", ConfigLayer { seed: Some(3), ..Default::default() }, None).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn roundtrip_through_layer() {
        let a = ExperimentConfig::resolve("evolve", ConfigLayer { amp_sweep: Some(vec![0.01]), ..Default::default() }, None).unwrap();
        let layer: ConfigLayer = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::resolve("evolve", layer, None).unwrap(), a);
    }

    #[test]
    fn mismatched_command_is_usage() {
        let l = ConfigLayer { command: Some("energy".into()), ..Default::default() };
        assert!(ExperimentConfig::resolve("evolve", l, None).unwrap_err().is_usage());
    }
}
