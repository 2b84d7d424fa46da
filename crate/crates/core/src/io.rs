//! Binary kernel files, family directories and dyadic-system JSON.
//!
//! Matrices and vectors are stored as raw little-endian binary64, row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::family::{FamilyLevel, FamilyParams, Mode, OperatorFamily, Provenance};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

pub const FORMAT_VERSION: u32 = 1;

pub fn read_f64_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: {} bytes is not a whole number of binary64 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_f64_file(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_kernel<T: Scalar>(path: &Path, n: usize) -> Result<Kernel<T>> {
    let raw = read_f64_file(path)?;
    if raw.len() != n * n {
        return Err(Error::Format(format!(
            "{}: expected {} values, found {}",
            path.display(),
            n * n,
            raw.len()
        )));
    }
    Kernel::from_vec(n, raw.into_iter().map(T::lit).collect())
}

pub fn write_kernel<T: Scalar>(path: &Path, k: &Kernel<T>) -> Result<()> {
    write_f64_file(path, k.data().iter().map(|v| v.as_f64()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub index: i32,
    pub scale: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub version: u32,
    pub mode: Mode,
    pub levels: Vec<LevelEntry>,
    pub n: usize,
    pub delta: f64,
    pub provenance: Provenance,
    pub params: FamilyParams,
    /// Levels `k` with a stored `p_<k>.f64`.
    #[serde(default)]
    pub averages: Vec<i32>,
}

pub fn save_family<T: Scalar>(family: &OperatorFamily<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = FamilyManifest {
        version: FORMAT_VERSION,
        mode: family.mode,
        levels: family
            .levels
            .iter()
            .map(|l| LevelEntry {
                index: l.index,
                scale: l.scale,
            })
            .collect(),
        n: family.n(),
        delta: family.delta,
        provenance: family.provenance,
        params: family.params.clone(),
        averages: family.averages.iter().map(|(k, _)| *k).collect(),
    };
    for l in &family.levels {
        write_kernel(&dir.join(format!("q_{}.f64", l.index)), &l.q)?;
    }
    for (k, p) in &family.averages {
        write_kernel(&dir.join(format!("p_{k}.f64")), p)?;
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_family<T: Scalar>(dir: &Path) -> Result<OperatorFamily<T>> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: FamilyManifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if m.version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: m.version,
            expected: FORMAT_VERSION,
        });
    }
    let q_files = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.starts_with("q_") && name.ends_with(".f64")
        })
        .count();
    if q_files != m.levels.len() {
        return Err(Error::Format(format!(
            "manifest lists {} levels but the directory holds {q_files} kernel files",
            m.levels.len()
        )));
    }
    let levels = m
        .levels
        .iter()
        .map(|e| {
            Ok(FamilyLevel {
                index: e.index,
                scale: e.scale,
                q: read_kernel(&dir.join(format!("q_{}.f64", e.index)), m.n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let averages = m
        .averages
        .iter()
        .map(|&k| Ok((k, read_kernel(&dir.join(format!("p_{k}.f64")), m.n)?)))
        .collect::<Result<Vec<_>>>()?;
    OperatorFamily::from_levels(m.mode, m.provenance, m.delta, m.params, levels, averages)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicConstants {
    pub c0: f64,
    #[serde(rename = "C0")]
    pub big_c0: f64,
    pub c_inner: f64,
    #[serde(rename = "C_outer")]
    pub c_outer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevelRecord {
    pub k: i32,
    pub centers: Vec<String>,
    /// Cube index of each point, in point order.
    pub assignment: Vec<usize>,
    pub new_centers: Vec<String>,
}

/// Byte-stable JSON form of a dyadic system; field order is fixed by the
/// struct layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicRecord {
    pub delta: f64,
    pub k_range: (i32, i32),
    pub constants: DyadicConstants,
    pub levels: Vec<DyadicLevelRecord>,
}

pub fn dyadic_record<T: Scalar>(space: &FinitePointSpace<T>, sys: &DyadicSystem<T>) -> DyadicRecord {
    let ids = space.point_ids();
    let names = |v: &[usize]| v.iter().map(|&i| ids[i].clone()).collect::<Vec<_>>();
    let net = sys.net();
    DyadicRecord {
        delta: sys.delta().as_f64(),
        k_range: (sys.k_min(), sys.k_max()),
        constants: DyadicConstants {
            c0: net.c0.as_f64(),
            big_c0: net.big_c0.as_f64(),
            c_inner: sys.inner_constant().as_f64(),
            c_outer: sys.outer_constant().as_f64(),
        },
        levels: (sys.k_min()..=sys.k_max())
            .map(|k| DyadicLevelRecord {
                k,
                centers: names(sys.centers_at(k)),
                assignment: sys.assignment(k).to_vec(),
                new_centers: names(sys.new_centers(k)),
            })
            .collect(),
    }
}

pub fn dyadic_json<T: Scalar>(space: &FinitePointSpace<T>, sys: &DyadicSystem<T>) -> String {
    serde_json::to_string_pretty(&dyadic_record(space, sys)).expect("record serializes")
}
