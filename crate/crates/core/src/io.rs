//! File formats: grid functions as flat little-endian f64 binaries with a
//! JSON sidecar, reports as JSON or CSV. All writes are atomic
//! (temp file in the target directory, then rename).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::characteristic::RectangleValue;
use crate::error::{Error, Result};
use crate::grid::{ExponentConfig, GridFunction, GridSpec, ProductGrid};
use crate::verify::{DecayReport, QuantityKind};

/// Sidecar describing a grid-function binary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionSidecar {
    pub format_version: u32,
    pub dtype: String,
    pub layout: String,
    pub len: usize,
    pub grid: GridSpec,
    pub data_file: String,
}

/// Metadata block accompanying an operator output binary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub grid: GridSpec,
    pub cfg: ExponentConfig,
    pub l_range_used: Option<(i32, i32)>,
    pub excluded_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_discrepancy: Option<f64>,
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Write bytes atomically: temp file next to the target, then rename.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = temp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize as pretty JSON and write atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes_atomic(path, text.as_bytes())
}

/// Write a grid function as `<stem>.bin` plus `<stem>.json` sidecar.
pub fn write_grid_function(f: &GridFunction, stem: &Path) -> Result<()> {
    let bin_path = stem.with_extension("bin");
    let sidecar_path = stem.with_extension("json");
    let mut bytes = Vec::with_capacity(f.values().len() * 8);
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes_atomic(&bin_path, &bytes)?;
    let sidecar = GridFunctionSidecar {
        format_version: 1,
        dtype: "f64le".into(),
        layout: "row-major-xy".into(),
        len: f.values().len(),
        grid: (**f.grid()).clone().into(),
        data_file: bin_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    write_json_atomic(&sidecar_path, &sidecar)
}

/// Read a grid function from its sidecar path; the binary is resolved
/// relative to the sidecar's directory.
pub fn read_grid_function(sidecar_path: &Path) -> Result<GridFunction> {
    let sidecar: GridFunctionSidecar =
        serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    let grid: ProductGrid = sidecar.grid.try_into()?;
    let bin_path = sidecar_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&sidecar.data_file);
    let bytes = fs::read(&bin_path)?;
    if bytes.len() != sidecar.len * 8 {
        return Err(Error::LengthMismatch {
            expected: sidecar.len * 8,
            got: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GridFunction::from_values(&Arc::new(grid), values)
}

/// Per-rectangle characteristic table as CSV with columns
/// `q_corner,q_side,p_corner,p_side,ell,value`. Corners of planar factors
/// are slash-joined.
pub fn write_rectangle_table_csv(
    path: &Path,
    table: &[RectangleValue],
    n: u32,
    m: u32,
) -> Result<()> {
    let corner = |c: [u32; 2], dim: u32| {
        if dim == 1 {
            format!("{}", c[0])
        } else {
            format!("{}/{}", c[0], c[1])
        }
    };
    let mut text = String::from("q_corner,q_side,p_corner,p_side,ell,value\n");
    for row in table {
        let ell = row
            .eccentricity
            .map(|e| e.to_string())
            .unwrap_or_else(|| "NA".into());
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            corner(row.rectangle.q_corner, n),
            row.rectangle.q_side,
            corner(row.rectangle.p_corner, m),
            row.rectangle.p_side,
            ell,
            row.value,
        ));
    }
    write_bytes_atomic(path, text.as_bytes())
}

/// Decay report as CSV with columns `ell,quantity,kind`.
pub fn write_decay_csv(path: &Path, report: &DecayReport) -> Result<()> {
    let kind = match report.kind {
        QuantityKind::Characteristic => "characteristic",
        QuantityKind::NormRatio => "norm-ratio",
    };
    let mut text = String::from("ell,quantity,kind\n");
    for (ell, q) in report.ell_values.iter().zip(&report.quantities) {
        text.push_str(&format!("{ell},{q},{kind}\n"));
    }
    write_bytes_atomic(path, text.as_bytes())
}
