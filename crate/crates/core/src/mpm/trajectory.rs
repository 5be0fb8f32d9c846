//! Simulation output and the `.trj` container.
//!
//! ```text
//! TRJ1\n
//! {"asset_id":..,"scenario":..,"config_hash":..,"fps":..,"frame_count":F,"particle_count":N}\n
//! F blocks of N*3 little-endian f32 positions (x y z interleaved)
//! ```
//! Frame `k` is at time `k / fps`.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, Cursor};
use std::path::Path;
use thiserror::Error;

const MAGIC: &str = "TRJ1";

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trajectory file: {0}")]
    Format(String),
    #[error("invalid trajectory: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub positions: Vec<[f32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<[f32; 3]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub asset_id: String,
    pub scenario: String,
    pub config_hash: String,
    pub fps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub provenance: Provenance,
    frames: Vec<Frame>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    asset_id: String,
    scenario: String,
    config_hash: String,
    fps: f64,
    frame_count: usize,
    particle_count: usize,
}

impl Trajectory {
    /// Checks strictly increasing times and a constant particle count.
    pub fn new(provenance: Provenance, frames: Vec<Frame>) -> Result<Self, TrajectoryError> {
        if let Some(first) = frames.first() {
            let n = first.positions.len();
            for (k, w) in frames.windows(2).enumerate() {
                if !(w[1].time > w[0].time) {
                    return Err(TrajectoryError::Invalid(format!(
                        "frame {} time {} does not follow {}",
                        k + 1,
                        w[1].time,
                        w[0].time
                    )));
                }
            }
            if let Some(k) = frames.iter().position(|f| f.positions.len() != n) {
                return Err(TrajectoryError::Invalid(format!(
                    "frame {k} has {} particles, expected {n}",
                    frames[k].positions.len()
                )));
            }
        }
        Ok(Trajectory { provenance, frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn particle_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.positions.len())
    }

    pub fn frame_points(&self, k: usize) -> Vec<[f64; 3]> {
        self.frames[k]
            .positions
            .iter()
            .map(|p| p.map(|x| x as f64))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            asset_id: self.provenance.asset_id.clone(),
            scenario: self.provenance.scenario.clone(),
            config_hash: self.provenance.config_hash.clone(),
            fps: self.provenance.fps,
            frame_count: self.frames.len(),
            particle_count: self.particle_count(),
        };
        let mut out =
            format!("{MAGIC}\n{}\n", serde_json::to_string(&header).unwrap()).into_bytes();
        out.reserve(self.frames.len() * self.particle_count() * 12);
        for f in &self.frames {
            for p in &f.positions {
                for x in p {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrajectoryError> {
        let mut cursor = Cursor::new(bytes);
        let mut line = String::new();
        cursor
            .read_line(&mut line)
            .map_err(|e| TrajectoryError::Format(e.to_string()))?;
        if line.trim_end() != MAGIC {
            return Err(TrajectoryError::Format(format!("missing `{MAGIC}` magic")));
        }
        line.clear();
        cursor
            .read_line(&mut line)
            .map_err(|e| TrajectoryError::Format(e.to_string()))?;
        let h: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| TrajectoryError::Format(format!("header: {e}")))?;
        if !(h.fps > 0.0) {
            return Err(TrajectoryError::Format(
                "header: fps must be positive".into(),
            ));
        }
        let body = &bytes[cursor.position() as usize..];
        let expected = h.frame_count * h.particle_count * 12;
        if body.len() != expected {
            return Err(TrajectoryError::Format(format!(
                "body is {} bytes, expected {expected} for {} frames of {} particles",
                body.len(),
                h.frame_count,
                h.particle_count
            )));
        }
        let mut words = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let frames = (0..h.frame_count)
            .map(|k| Frame {
                time: k as f64 / h.fps,
                positions: (0..h.particle_count)
                    .map(|_| std::array::from_fn(|_| words.next().unwrap()))
                    .collect(),
                velocities: None,
            })
            .collect();
        Trajectory::new(
            Provenance {
                asset_id: h.asset_id,
                scenario: h.scenario,
                config_hash: h.config_hash,
                fps: h.fps,
            },
            frames,
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), TrajectoryError> {
        fs::write(path, self.to_bytes()).map_err(|source| TrajectoryError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TrajectoryError> {
        let bytes = fs::read(path).map_err(|source| TrajectoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn provenance() -> Provenance {
        Provenance {
            asset_id: "cube".into(),
            scenario: "drop".into(),
            config_hash: "abc".into(),
            fps: 24.0,
        }
    }

    proptest! {
        #[test]
        fn bytes_round_trip(frames in 1usize..5, n in 1usize..40, seed in any::<u32>()) {
            let fr = (0..frames)
                .map(|k| Frame {
                    time: k as f64 / 24.0,
                    positions: (0..n)
                        .map(|i| [i as f32 * 0.5, seed as f32, (k * i) as f32 - 3.25])
                        .collect(),
                    velocities: None,
                })
                .collect();
            let t = Trajectory::new(provenance(), fr).unwrap();
            let back = Trajectory::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn rejects_non_increasing_times() {
        let f = |t| Frame {
            time: t,
            positions: vec![[0.0; 3]],
            velocities: None,
        };
        assert!(Trajectory::new(provenance(), vec![f(0.0), f(0.0)]).is_err());
    }

    #[test]
    fn rejects_truncated_body() {
        let t = Trajectory::new(
            provenance(),
            vec![Frame {
                time: 0.0,
                positions: vec![[1.0; 3]; 4],
                velocities: None,
            }],
        )
        .unwrap();
        let b = t.to_bytes();
        assert!(Trajectory::from_bytes(&b[..b.len() - 1]).is_err());
    }
}
