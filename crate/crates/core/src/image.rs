//! Linear-radiance images and their on-disk encodings.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Linear RGB radiance.
pub type Rgb = Vec3;

pub const DISPLAY_GAMMA: f64 = 2.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![Rgb::ZERO; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        Image {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn channel(&self, index: usize, channel: usize) -> f64 {
        self.pixels[index][channel]
    }

    /// Root-mean-square difference over every pixel and channel.
    pub fn rmse(&self, other: &Image) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| {
                let d = *a - *b;
                d.dot(d)
            })
            .sum();
        (sum / (3 * self.pixels.len()) as f64).sqrt()
    }

    /// Binary P6 bytes: clamp to [0, 1], gamma-encode, quantize to 8 bits.
    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(3 * self.pixels.len());
        for p in &self.pixels {
            for c in p.to_array() {
                out.push(encode_channel(c));
            }
        }
        out
    }

    /// `x,y,r,g,b` in linear radiance, with header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,r,g,b\n");
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.get(x, y);
                s.push_str(&format!("{x},{y},{},{},{}\n", p.x, p.y, p.z));
            }
        }
        s
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_ppm_bytes())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_csv().as_bytes())
    }
}

fn encode_channel(linear: f64) -> u8 {
    let c = if linear.is_nan() { 0.0 } else { linear.clamp(0.0, 1.0) };
    (c.powf(1.0 / DISPLAY_GAMMA) * 255.0).round() as u8
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_gamma() {
        let img = Image::from_pixels(
            2,
            1,
            vec![Rgb::new(0.0, 1.0, 2.0), Rgb::new(0.5, -1.0, 0.218_094)],
        );
        let bytes = img.to_ppm_bytes();
        let header = b"P6\n2 1\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        // 0.5^(1/2.2) * 255 = 186.1; 0.218094^(1/2.2) = 0.5
        assert_eq!(body, &[0, 255, 255, 186, 0, 128]);
    }

    #[test]
    fn csv_has_header_and_one_row_per_pixel() {
        let img = Image::new(3, 2);
        let csv = img.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,r,g,b");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[4], "0,1,0,0,0");
    }

    #[test]
    fn rmse_of_constant_offset() {
        let a = Image::from_pixels(1, 2, vec![Rgb::splat(0.5); 2]);
        let b = Image::from_pixels(1, 2, vec![Rgb::splat(0.25); 2]);
        assert!((a.rmse(&b) - 0.25).abs() < 1e-15);
    }
}
