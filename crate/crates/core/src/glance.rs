//! Glance-and-compare preprocessing: grayscale thumbnails of frames and the
//! difference against the last picked frame's thumbnail.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const GLANCE_SIDE: usize = 56;
pub const GLANCE_LEN: usize = GLANCE_SIDE * GLANCE_SIDE;

const GLANCE_MAGIC: &[u8; 4] = b"PKNG";
const GLANCE_VERSION: u32 = 1;

/// An RGB frame, row-major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameImage {
    height: usize,
    width: usize,
    rgb: Vec<u8>,
}

impl FrameImage {
    pub fn new(height: usize, width: usize, rgb: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Usage(format!("zero-sized frame {height}x{width}")));
        }
        if rgb.len() != 3 * height * width {
            return Err(Error::shape("frame pixels", 3 * height * width, rgb.len()));
        }
        Ok(Self { height, width, rgb })
    }

    pub fn filled(height: usize, width: usize, color: [u8; 3]) -> Result<Self> {
        let rgb = color.iter().copied().cycle().take(3 * height * width).collect();
        Self::new(height, width, rgb)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn luma(&self, y: usize, x: usize) -> f64 {
        let i = 3 * (y * self.width + x);
        let [r, g, b] = [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]].map(f64::from);
        (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
    }
}

/// A 56x56 grayscale thumbnail with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Glance(Vec<f64>);

impl Glance {
    pub fn new(pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != GLANCE_LEN {
            return Err(Error::shape("glance pixels", GLANCE_LEN, pixels.len()));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Usage(format!("glance pixel {v} outside [0, 1]")));
        }
        Ok(Self(pixels))
    }

    pub fn constant(v: f64) -> Self {
        Self(vec![v.clamp(0.0, 1.0); GLANCE_LEN])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != GLANCE_LEN {
            return Err(Error::shape("glance bytes", GLANCE_LEN, bytes.len()));
        }
        Ok(Self(bytes.iter().map(|&b| b as f64 / 255.0).collect()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.0
    }
}

/// The glance of the most recently picked frame.
pub type PickTemplate = Glance;

/// Luma grayscale, then bilinear resampling to 56x56 with pixel-center
/// alignment and edge clamping.
pub fn make_glance(frame: &FrameImage) -> Glance {
    let (h, w) = (frame.height, frame.width);
    let sy = h as f64 / GLANCE_SIDE as f64;
    let sx = w as f64 / GLANCE_SIDE as f64;
    let mut out = Vec::with_capacity(GLANCE_LEN);
    for oy in 0..GLANCE_SIDE {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..GLANCE_SIDE {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let top = frame.luma(y0, x0) * (1.0 - tx) + frame.luma(y0, x1) * tx;
            let bottom = frame.luma(y1, x0) * (1.0 - tx) + frame.luma(y1, x1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0));
        }
    }
    Glance(out)
}

/// `current - template`, flattened row-major; entries in `[-1, 1]`.
pub fn glance_diff(current: &Glance, template: &PickTemplate) -> Vec<f64> {
    current.0.iter().zip(&template.0).map(|(a, b)| a - b).collect()
}

pub fn write_glance_file(path: &Path, glances: &[Glance]) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + glances.len() * GLANCE_LEN);
    buf.extend_from_slice(GLANCE_MAGIC);
    for v in [GLANCE_VERSION, glances.len() as u32, GLANCE_SIDE as u32, GLANCE_SIDE as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for g in glances {
        buf.extend_from_slice(&g.to_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_glance_file(path: &Path) -> Result<Vec<Glance>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_glance_file(path, &bytes)
}

pub(crate) fn parse_glance_file(path: &Path, bytes: &[u8]) -> Result<Vec<Glance>> {
    if bytes.len() < 20 {
        return Err(Error::format(path, bytes.len() as u64, "truncated glance header"));
    }
    if &bytes[..4] != GLANCE_MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected PKNG"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, n, h, w) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
    if version != GLANCE_VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    if h != GLANCE_SIDE || w != GLANCE_SIDE {
        return Err(Error::format(path, 12, format!("glance size {h}x{w}, expected 56x56")));
    }
    let expected = 20 + n * GLANCE_LEN;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!("expected {expected} bytes for {n} frames, found {}", bytes.len()),
        ));
    }
    Ok(bytes[20..]
        .chunks_exact(GLANCE_LEN)
        .map(|c| Glance::from_bytes(c).expect("chunk has glance length"))
        .collect())
}
