//! Text profile tables, field snapshots and content hashes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VortexError};
use crate::fields::{Field2D, FieldSpace, C64};
use crate::profile::VortexProfile;

pub const PROFILE_FORMAT: &str = "vortex-profile";
pub const PROFILE_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT: &str = "vortex-snapshot";

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of everything that determines the profile's values.
pub fn profile_hash(p: &VortexProfile) -> String {
    let mut h = Sha256::new();
    for v in [p.step(), p.slope_at_origin(), p.match_radius(), p.tol()] {
        h.update(v.to_le_bytes());
    }
    for (_, rho, drho) in p.nodes() {
        h.update(rho.to_le_bytes());
        h.update(drho.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// JSON header written next to the profile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub format: String,
    pub version: u32,
    /// File name of the table, relative to the header.
    pub table: String,
    pub slope_at_origin: f64,
    pub match_radius: f64,
    pub tol: f64,
    pub step: f64,
    pub r_max: f64,
    pub rows: usize,
    pub stitch_error: f64,
    pub warnings: Vec<String>,
    pub profile_hash: String,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Writes `<dir>/profile.tsv` (columns r, ρ₁, ρ₁′) and `<dir>/profile.json`;
/// returns the header path.
pub fn write_profile(p: &VortexProfile, dir: &Path, config_hash: Option<&str>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let hash = profile_hash(p);
    let mut table = format!("# profile_hash={hash}\n");
    if let Some(c) = config_hash {
        table.push_str(&format!("# config_hash={c}\n"));
    }
    table.push_str("# r\trho\tdrho\n");
    for (r, rho, drho) in p.nodes() {
        table.push_str(&format!("{r:.16e}\t{rho:.16e}\t{drho:.16e}\n"));
    }
    fs::write(dir.join("profile.tsv"), table)?;
    let header = ProfileHeader {
        format: PROFILE_FORMAT.into(),
        version: PROFILE_VERSION,
        table: "profile.tsv".into(),
        slope_at_origin: p.slope_at_origin(),
        match_radius: p.match_radius(),
        tol: p.tol(),
        step: p.step(),
        r_max: p.r_max(),
        rows: p.nodes().count(),
        stitch_error: p.stitch_error(),
        warnings: p.warnings().to_vec(),
        profile_hash: hash,
        config_hash: config_hash.map(str::to_string),
    };
    let path = dir.join("profile.json");
    fs::write(&path, serde_json::to_string_pretty(&header)?)?;
    Ok(path)
}

/// Reads a profile written by [`write_profile`] and checks its hash.
pub fn read_profile(header_path: &Path) -> Result<VortexProfile> {
    let header: ProfileHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    if header.format != PROFILE_FORMAT || header.version != PROFILE_VERSION {
        return Err(VortexError::Format(format!(
            "expected {PROFILE_FORMAT} v{PROFILE_VERSION}, found {} v{}",
            header.format, header.version
        )));
    }
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
    let text = fs::read_to_string(dir.join(&header.table))?;
    let (mut rho, mut drho) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).enumerate() {
        let cols: Vec<f64> = line
            .split('\t')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| VortexError::Format(format!("profile row {k}: {e}")))?;
        if cols.len() != 3 {
            return Err(VortexError::Format(format!("profile row {k} has {} columns", cols.len())));
        }
        let want = (k + 1) as f64 * header.step;
        if (cols[0] - want).abs() > 1e-9 * want.max(1.0) {
            return Err(VortexError::Format(format!("profile row {k} sits at r = {}, expected {want}", cols[0])));
        }
        rho.push(cols[1]);
        drho.push(cols[2]);
    }
    if rho.len() != header.rows {
        return Err(VortexError::Format(format!("header promises {} rows, table has {}", header.rows, rho.len())));
    }
    let p = VortexProfile::from_parts(header.step, rho, drho, header.slope_at_origin, header.match_radius, header.tol)?;
    let hash = profile_hash(&p);
    if hash != header.profile_hash {
        return Err(VortexError::Format("profile table does not match the hash in its header".into()));
    }
    Ok(p)
}

/// JSON sidecar of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    /// Binary file name, relative to the sidecar.
    pub data: String,
    /// Element layout of the binary file.
    pub dtype: String,
    /// `value[i·N + j] = Ψ(x_i, y_j)`.
    pub layout: String,
    pub half_width: f64,
    pub n: usize,
    pub phase: f64,
    pub center: [f64; 2],
    pub t: f64,
    pub profile_hash: String,
    pub config_hash: Option<String>,
}

/// Writes `Ψ` at the nodes to `<stem>.bin` and the sidecar to `<stem>.json`.
pub fn write_snapshot(f: &Field2D, stem: &Path, t: f64, profile_hash: &str, config_hash: Option<&str>) -> Result<PathBuf> {
    if let Some(parent) = stem.parent() {
        fs::create_dir_all(parent)?;
    }
    let psi = f.sample().val;
    let n = psi.nrows();
    let mut bytes = Vec::with_capacity(n * n * 16);
    for v in psi.iter() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    let bin = stem.with_extension("bin");
    fs::File::create(&bin)?.write_all(&bytes)?;
    let g = f.space().grid();
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        data: bin.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
        dtype: "complex, little-endian f64 real then f64 imaginary".into(),
        layout: "row-major, first index x".into(),
        half_width: g.half_width(),
        n: g.n(),
        phase: f.phase(),
        center: f.center(),
        t,
        profile_hash: profile_hash.to_string(),
        config_hash: config_hash.map(str::to_string),
    };
    let json = stem.with_extension("json");
    fs::write(&json, serde_json::to_string_pretty(&header)?)?;
    Ok(json)
}

/// Reads a snapshot back onto `space`, which must match its grid and profile.
pub fn read_snapshot(space: &Arc<FieldSpace>, sidecar: &Path) -> Result<(Field2D, SnapshotHeader)> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(VortexError::Format(format!("not a snapshot: format '{}'", header.format)));
    }
    let g = space.grid();
    if header.n != g.n() || header.half_width != g.half_width() {
        return Err(VortexError::usage(format!(
            "snapshot grid L = {}, N = {} does not match L = {}, N = {}",
            header.half_width,
            header.n,
            g.half_width(),
            g.n()
        )));
    }
    if header.profile_hash != profile_hash(space.profile()) {
        return Err(VortexError::usage("snapshot was produced with a different profile"));
    }
    let dir = sidecar.parent().unwrap_or_else(|| Path::new("."));
    let bytes = fs::read(dir.join(&header.data))?;
    let n = header.n;
    if bytes.len() != n * n * 16 {
        return Err(VortexError::Format(format!("snapshot has {} bytes, expected {}", bytes.len(), n * n * 16)));
    }
    let word = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("eight bytes"));
    let psi = Array2::from_shape_fn((n, n), |(i, j)| {
        let k = i * n + j;
        C64::new(word(2 * k), word(2 * k + 1))
    });
    let base = Field2D::moved_vortex(space, header.phase, header.center).sample().val;
    let w = &psi - &base;
    let f = Field2D::with_perturbation(space, header.phase, header.center, w)?;
    Ok((f, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;

    #[test]
    fn profile_roundtrip_is_exact() {
        let p = solve_profile(25.0, 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let header = write_profile(&p, dir.path(), None).unwrap();
        let q = read_profile(&header).unwrap();
        assert_eq!(profile_hash(&p), profile_hash(&q));
        for r in [0.0, 0.37, 5.0, 24.9, 60.0] {
            assert_eq!(p.values(r), q.values(r));
        }
    }

    #[test]
    fn tampered_table_is_rejected() {
        let p = solve_profile(25.0, 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let header = write_profile(&p, dir.path(), None).unwrap();
        let table = dir.path().join("profile.tsv");
        let text = fs::read_to_string(&table).unwrap().replacen("e-1\t", "e-2\t", 1);
        fs::write(&table, text).unwrap();
        assert!(matches!(read_profile(&header), Err(VortexError::Format(_))));
    }

    #[test]
    fn snapshot_roundtrip() {
        let p = Arc::new(solve_profile(25.0, 1e-10).unwrap());
        let s = FieldSpace::new(Arc::clone(&p), 8.0, 48).unwrap();
        let f = Field2D::from_fn(&s, 0.3, [0.2, -0.1], |x, y| C64::new(0.1, -0.05) * (-(x * x + y * y)).exp()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let side = write_snapshot(&f, &dir.path().join("snap_0001"), 1.5, &profile_hash(&p), Some("abc")).unwrap();
        let (g, h) = read_snapshot(&s, &side).unwrap();
        assert_eq!(h.t, 1.5);
        assert_eq!(h.config_hash.as_deref(), Some("abc"));
        assert_eq!((g.phase(), g.center()), (0.3, [0.2, -0.1]));
        let gap = (&g.perturbation_values() - &f.perturbation_values())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(gap < 1e-15);

        let other = FieldSpace::new(p, 8.0, 40).unwrap();
        assert!(read_snapshot(&other, &side).unwrap_err().is_usage());
    }
}
