//! Orthographic particle-disc renderer for review frames.

use image::{ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use simready_core::{SimConfig, Trajectory};
use thiserror::Error;

pub const DEFAULT_SIZE: u32 = 512;
const BACKGROUND: Rgb<u8> = Rgb([244, 244, 240]);
const GROUND: Rgb<u8> = Rgb([196, 190, 178]);

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("frame {index} out of range (trajectory has {count} frames)")]
    FrameOutOfRange { index: usize, count: usize },
    #[error("{colors} colors for {points} particles")]
    ColorCount { colors: usize, points: usize },
}

/// Projection direction. Screen-up is +y except for `Top`, where it is -z.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Looking down -z: screen (x, y), depth z.
    #[default]
    Front,
    /// Looking down -x: screen (-z, y), depth x.
    Side,
    /// Looking down -y: screen (x, -z), depth y.
    Top,
}

impl View {
    /// (screen u, screen v, depth) with larger depth nearer the camera.
    fn project(self, p: [f64; 3]) -> (f64, f64, f64) {
        match self {
            View::Front => (p[0], p[1], p[2]),
            View::Side => (-p[2], p[1], p[0]),
            View::Top => (p[0], -p[2], p[1]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub view: View,
    /// World-space point at the image center, in screen coordinates (u, v).
    pub center: [f64; 2],
    /// Half the visible width in meters.
    pub half_extent: f64,
    pub size: u32,
    /// Disc radius in meters.
    pub point_radius: f64,
    /// Ground height drawn as a band in side-on views.
    pub ground: Option<f64>,
}

impl Camera {
    /// Frames the whole simulation domain `[0, domain]^3`.
    pub fn for_domain(view: View, domain: f64, point_radius: f64, ground: Option<f64>) -> Self {
        let c = domain / 2.0;
        let center = match view {
            View::Front => [c, c],
            View::Side => [-c, c],
            View::Top => [c, -c],
        };
        Camera {
            view,
            center,
            half_extent: c,
            size: DEFAULT_SIZE,
            point_radius,
            ground,
        }
    }

    fn pixels_per_meter(&self) -> f64 {
        self.size as f64 / (2.0 * self.half_extent)
    }

    /// Continuous pixel coordinates; (0, 0) is the top-left image corner.
    fn to_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let s = self.pixels_per_meter();
        let half = self.size as f64 / 2.0;
        (
            half + (u - self.center[0]) * s,
            half - (v - self.center[1]) * s,
        )
    }
}

/// A disc radius that roughly closes the gaps of a uniformly sampled cloud.
pub fn auto_point_radius(points: &[[f32; 3]]) -> f64 {
    if points.is_empty() {
        return 0.01;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a] as f64);
            hi[a] = hi[a].max(p[a] as f64);
        }
    }
    let ext: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]).max(1e-3)).collect();
    let spacing = (ext.iter().product::<f64>() / points.len() as f64).cbrt();
    (0.6 * spacing).max(1e-3)
}

/// Draws far particles first so nearer discs cover them. Ties keep input order.
pub fn render_points(
    positions: &[[f32; 3]],
    colors: &[[f64; 3]],
    camera: &Camera,
) -> Result<RgbImage, RenderError> {
    if colors.len() != positions.len() {
        return Err(RenderError::ColorCount {
            colors: colors.len(),
            points: positions.len(),
        });
    }
    let size = camera.size;
    let mut img = RgbImage::from_pixel(size, size, BACKGROUND);
    if let (Some(h), View::Front | View::Side) = (camera.ground, camera.view) {
        let (_, gy) = camera.to_pixel(0.0, h);
        let first = gy.ceil().max(0.0) as u32;
        for y in first.min(size)..size {
            for x in 0..size {
                img.put_pixel(x, y, GROUND);
            }
        }
    }

    let mut order: Vec<(f64, usize)> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| (camera.view.project(p.map(f64::from)).2, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let r = camera.point_radius * camera.pixels_per_meter();
    let r = r.max(0.5);
    for (_, i) in order {
        let (u, v, _) = camera.view.project(positions[i].map(f64::from));
        let (px, py) = camera.to_pixel(u, v);
        let color = Rgb(colors[i].map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8));
        let x0 = (px - r).floor().max(0.0) as i64;
        let x1 = ((px + r).ceil() as i64).min(size as i64 - 1);
        let y0 = (py - r).floor().max(0.0) as i64;
        let y1 = ((py + r).ceil() as i64).min(size as i64 - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - px;
                let dy = y as f64 + 0.5 - py;
                if dx * dx + dy * dy <= r * r {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    Ok(img)
}

/// Whole-domain view with the disc size fitted to the first frame.
pub fn default_camera(
    trajectory: &Trajectory,
    config: &SimConfig,
    view: View,
    size: u32,
) -> Camera {
    let radius = trajectory
        .frames()
        .first()
        .map_or(0.01, |f| auto_point_radius(&f.positions));
    let ground = config.ground.enabled.then_some(config.ground.height);
    Camera {
        size,
        ..Camera::for_domain(view, config.domain_size, radius, ground)
    }
}

pub fn render_frame(
    trajectory: &Trajectory,
    index: usize,
    colors: &[[f64; 3]],
    camera: &Camera,
) -> Result<RgbImage, RenderError> {
    let frame = trajectory
        .frames()
        .get(index)
        .ok_or(RenderError::FrameOutOfRange {
            index,
            count: trajectory.len(),
        })?;
    render_points(&frame.positions, colors, camera)
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .expect("PNG encoding into memory cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(size: u32) -> Camera {
        Camera {
            view: View::Front,
            center: [0.0, 0.0],
            half_extent: 1.0,
            size,
            point_radius: 0.05,
            ground: None,
        }
    }

    #[test]
    fn centered_particle_lands_at_image_center() {
        let img = render_points(&[[0.0, 0.0, 0.0]], &[[1.0, 0.0, 0.0]], &cam(64)).unwrap();
        assert_eq!(*img.get_pixel(32, 32), Rgb([255, 0, 0]));
        assert_eq!(*img.get_pixel(31, 31), Rgb([255, 0, 0]));
        assert_eq!(*img.get_pixel(0, 0), BACKGROUND);
        // radius 0.05 m at 32 px/m is 1.6 px
        assert_eq!(*img.get_pixel(35, 32), BACKGROUND);
    }

    #[test]
    fn empty_region_is_background_only() {
        let mut c = cam(32);
        c.center = [100.0, 100.0];
        c.ground = Some(0.0);
        let img = render_points(&[[0.0; 3], [0.5, 0.5, 0.5]], &[[0.0; 3]; 2], &c).unwrap();
        assert!(img.pixels().all(|p| *p == BACKGROUND));
    }

    #[test]
    fn nearer_particle_wins() {
        let pts = [[0.0, 0.0, 0.5], [0.0, 0.0, -0.5]];
        let cols = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let img = render_points(&pts, &cols, &cam(64)).unwrap();
        assert_eq!(*img.get_pixel(32, 32), Rgb([0, 0, 255]));
        let mut side = cam(64);
        side.view = View::Side;
        let pts = [[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]];
        assert_eq!(
            *render_points(&pts, &cols, &side).unwrap().get_pixel(32, 32),
            Rgb([0, 0, 255])
        );
    }

    #[test]
    fn ground_band_below_height() {
        let mut c = cam(16);
        c.ground = Some(0.0);
        let img = render_points(&[], &[], &c).unwrap();
        assert_eq!(*img.get_pixel(3, 7), BACKGROUND);
        assert_eq!(*img.get_pixel(3, 8), GROUND);
    }

    #[test]
    fn png_is_deterministic() {
        let img = render_points(&[[0.1, 0.2, 0.0]], &[[0.2, 0.4, 0.6]], &cam(32)).unwrap();
        let a = encode_png(&img);
        assert_eq!(a, encode_png(&img));
        assert_eq!(&a[1..4], b"PNG");
    }

    #[test]
    fn color_count_mismatch() {
        assert!(render_points(&[[0.0; 3]], &[], &cam(8)).is_err());
    }
}
