//! `.sra` asset files.
//!
//! ```text
//! SRA1\n
//! {"schema_version":1,"encoding":"text"|"binary","count":N,"metadata":{..},"normalization":{..}}\n
//! <body>
//! ```
//!
//! The body holds the per-point columns in fixed order: positions, colors,
//! part_labels, E, nu, sigma_y, phi, rho, behavior. The text body writes each
//! column as a name line followed by N value lines. The binary body is the
//! same columns packed as little-endian `f32` (vectors interleaved xyz) and
//! `u32` (part labels, behavior index). Unused `sigma_y` / `phi` slots are NaN.

use super::{
    AssetError, AssetMetadata, BehaviorType, MaterialParams, NormalizationTransform, SimReadyAsset,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, Cursor, Read};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "SRA1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetEncoding {
    Text,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    encoding: AssetEncoding,
    count: usize,
    metadata: AssetMetadata,
    normalization: NormalizationTransform,
}

const SCALAR_COLUMNS: [&str; 5] = ["E", "nu", "sigma_y", "phi", "rho"];

fn scalar_columns(m: &MaterialParams) -> [f32; 5] {
    [
        m.youngs_modulus as f32,
        m.poisson_ratio as f32,
        m.yield_stress.map_or(f32::NAN, |v| v as f32),
        m.friction_angle.map_or(f32::NAN, |v| v as f32),
        m.density as f32,
    ]
}

pub fn save_asset(
    asset: &SimReadyAsset,
    path: &Path,
    encoding: AssetEncoding,
) -> Result<(), AssetError> {
    let bytes = encode(asset, encoding);
    fs::write(path, bytes).map_err(|source| AssetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_asset(path: &Path) -> Result<SimReadyAsset, AssetError> {
    let bytes = fs::read(path).map_err(|source| AssetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

pub(crate) fn encode(asset: &SimReadyAsset, encoding: AssetEncoding) -> Vec<u8> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        encoding,
        count: asset.len(),
        metadata: asset.metadata().clone(),
        normalization: *asset.normalization(),
    };
    let mut out = format!("{MAGIC}\n{}\n", serde_json::to_string(&header).unwrap()).into_bytes();
    match encoding {
        AssetEncoding::Text => write_text_body(asset, &mut out),
        AssetEncoding::Binary => write_binary_body(asset, &mut out),
    }
    out
}

fn write_text_body(asset: &SimReadyAsset, out: &mut Vec<u8>) {
    use std::fmt::Write;
    let mut s = String::new();
    let vec3 = |s: &mut String, name: &str, data: &[[f64; 3]]| {
        writeln!(s, "{name}").unwrap();
        for p in data {
            writeln!(s, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32).unwrap();
        }
    };
    vec3(&mut s, "positions", asset.points());
    vec3(&mut s, "colors", asset.colors());
    writeln!(s, "part_labels").unwrap();
    for l in asset.part_labels() {
        writeln!(s, "{l}").unwrap();
    }
    let cols: Vec<[f32; 5]> = asset.materials().iter().map(scalar_columns).collect();
    for (c, name) in SCALAR_COLUMNS.iter().enumerate() {
        writeln!(s, "{name}").unwrap();
        for row in &cols {
            writeln!(s, "{}", row[c]).unwrap();
        }
    }
    writeln!(s, "behavior").unwrap();
    for m in asset.materials() {
        writeln!(s, "{}", m.behavior.index()).unwrap();
    }
    out.extend_from_slice(s.as_bytes());
}

fn write_binary_body(asset: &SimReadyAsset, out: &mut Vec<u8>) {
    for data in [asset.points(), asset.colors()] {
        for p in data {
            for &x in p {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
    }
    for &l in asset.part_labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    let cols: Vec<[f32; 5]> = asset.materials().iter().map(scalar_columns).collect();
    for c in 0..SCALAR_COLUMNS.len() {
        for row in &cols {
            out.extend_from_slice(&row[c].to_le_bytes());
        }
    }
    for m in asset.materials() {
        out.extend_from_slice(&(m.behavior.index() as u32).to_le_bytes());
    }
}

/// Columns as read from disk, before validation.
struct Columns {
    positions: Vec<[f64; 3]>,
    colors: Vec<[f64; 3]>,
    part_labels: Vec<u32>,
    scalars: [Vec<f32>; 5],
    behavior: Vec<u32>,
}

pub(crate) fn decode(bytes: &[u8]) -> Result<SimReadyAsset, AssetError> {
    let mut cursor = Cursor::new(bytes);
    let mut line = String::new();
    cursor
        .read_line(&mut line)
        .map_err(|e| AssetError::parse("magic", e.to_string()))?;
    if line.trim_end() != MAGIC {
        return Err(AssetError::parse("magic", format!("expected `{MAGIC}`")));
    }
    line.clear();
    cursor
        .read_line(&mut line)
        .map_err(|e| AssetError::parse("header", e.to_string()))?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| {
        let msg = e.to_string();
        // serde reports "missing field `x`" / "unknown variant" with the name inline
        AssetError::parse(format!("header.{}", offending_field(&msg)), msg)
    })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(AssetError::parse(
            "header.schema_version",
            format!("unsupported version {}", header.schema_version),
        ));
    }
    let n = header.count;
    let body = &bytes[cursor.position() as usize..];
    let cols = match header.encoding {
        AssetEncoding::Text => read_text_body(body, n)?,
        AssetEncoding::Binary => read_binary_body(body, n)?,
    };
    let mut materials = Vec::with_capacity(n);
    for i in 0..n {
        let b = cols.behavior[i];
        let behavior = BehaviorType::from_index(b as usize)
            .ok_or_else(|| AssetError::parse("behavior", format!("index {b} at point {i}")))?;
        let s = |c: usize| cols.scalars[c][i] as f64;
        let opt = |v: f64| (!v.is_nan()).then_some(v);
        materials.push(MaterialParams {
            youngs_modulus: s(0),
            poisson_ratio: s(1),
            yield_stress: opt(s(2)),
            friction_angle: opt(s(3)),
            density: s(4),
            behavior,
        });
    }
    SimReadyAsset::new(
        cols.positions,
        cols.colors,
        cols.part_labels,
        materials,
        header.metadata,
        header.normalization,
    )
}

fn offending_field(msg: &str) -> &str {
    msg.split('`').nth(1).unwrap_or("?")
}

fn read_text_body(body: &[u8], n: usize) -> Result<Columns, AssetError> {
    let text = std::str::from_utf8(body).map_err(|e| AssetError::parse("body", e.to_string()))?;
    let mut lines = text.lines();
    let mut section = |name: &'static str| -> Result<Vec<&str>, AssetError> {
        match lines.next() {
            Some(l) if l.trim() == name => {}
            Some(l) => {
                return Err(AssetError::parse(
                    name,
                    format!("expected section `{name}`, found `{l}`"),
                ))
            }
            None => return Err(AssetError::parse(name, "missing section")),
        }
        let rows: Vec<&str> = lines.by_ref().take(n).collect();
        if rows.len() != n {
            return Err(AssetError::parse(
                name,
                format!("{} rows, expected {n}", rows.len()),
            ));
        }
        Ok(rows)
    };
    fn num<T: std::str::FromStr>(name: &str, i: usize, s: &str) -> Result<T, AssetError> {
        s.trim()
            .parse()
            .map_err(|_| AssetError::parse(name, format!("row {i}: cannot parse `{s}`")))
    }
    let vec3 = |name: &'static str, rows: Vec<&str>| -> Result<Vec<[f64; 3]>, AssetError> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let parts: Vec<&str> = r.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(AssetError::parse(
                        name,
                        format!("row {i}: expected 3 values"),
                    ));
                }
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[a] = num::<f32>(name, i, parts[a])? as f64;
                }
                Ok(v)
            })
            .collect()
    };
    let positions = vec3("positions", section("positions")?)?;
    let colors = vec3("colors", section("colors")?)?;
    let part_labels = section("part_labels")?
        .iter()
        .enumerate()
        .map(|(i, r)| num::<u32>("part_labels", i, r))
        .collect::<Result<_, _>>()?;
    let mut scalars: [Vec<f32>; 5] = Default::default();
    for (c, name) in SCALAR_COLUMNS.iter().enumerate() {
        scalars[c] = section(name)?
            .iter()
            .enumerate()
            .map(|(i, r)| num::<f32>(name, i, r))
            .collect::<Result<_, _>>()?;
    }
    let behavior = section("behavior")?
        .iter()
        .enumerate()
        .map(|(i, r)| num::<u32>("behavior", i, r))
        .collect::<Result<_, _>>()?;
    Ok(Columns {
        positions,
        colors,
        part_labels,
        scalars,
        behavior,
    })
}

fn read_binary_body(body: &[u8], n: usize) -> Result<Columns, AssetError> {
    let expected = n * 4 * (3 + 3 + 1 + 5 + 1);
    if body.len() != expected {
        return Err(AssetError::parse(
            "body",
            format!("binary blob is {} bytes, expected {expected}", body.len()),
        ));
    }
    let mut r = Cursor::new(body);
    let mut word = || {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).unwrap();
        b
    };
    let vec3 = |word: &mut dyn FnMut() -> [u8; 4]| -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| std::array::from_fn(|_| f32::from_le_bytes(word()) as f64))
            .collect()
    };
    let positions = vec3(&mut word);
    let colors = vec3(&mut word);
    let part_labels = (0..n).map(|_| u32::from_le_bytes(word())).collect();
    let scalars = std::array::from_fn(|_| (0..n).map(|_| f32::from_le_bytes(word())).collect());
    let behavior = (0..n).map(|_| u32::from_le_bytes(word())).collect();
    Ok(Columns {
        positions,
        colors,
        part_labels,
        scalars,
        behavior,
    })
}
