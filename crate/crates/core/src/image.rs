//! Linear RGB float images with portable float map (PFM) and pixmap (PPM) I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Row-major, top row first, RGB triplets.
    data: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Image { width, height, data }
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Image { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        self.data[y * self.width + x] = rgb;
    }

    /// Mean of the three channels per pixel.
    pub fn luminance(&self) -> Vec<f32> {
        self.data.iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.data.len() * 12 + 32);
        write!(out, "PF\n{} {}\n-1.0\n", self.width, self.height).expect("vec write");
        // PFM stores rows bottom to top
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                for c in self.get(x, y) {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_pfm(path: &Path) -> Result<Image> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                return Err(Error::Format("PFM header ends early".into()));
            }
            let line = line.trim().to_string();
            if !line.is_empty() && !line.starts_with('#') {
                header.extend(line.split_whitespace().map(str::to_string));
            }
        }
        if header[0] != "PF" {
            return Err(Error::Format(format!("not a colour PFM (magic {:?})", header[0])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PFM size {s:?}")));
        let width = parse(&header[1])?;
        let height = parse(&header[2])?;
        let scale: f32 = header
            .get(3)
            .ok_or_else(|| Error::Format("missing PFM scale".into()))?
            .parse()
            .map_err(|_| Error::Format("bad PFM scale".into()))?;
        let little = scale < 0.0;
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let expected = width * height * 12;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let mut img = Image::new(width, height);
        let mut it = bytes.chunks_exact(4).map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        });
        for y in (0..height).rev() {
            for x in 0..width {
                let px = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
                img.set(x, y, px);
            }
        }
        Ok(img)
    }

    /// 8-bit binary PPM, clamped to [0, 1] and gamma encoded.
    pub fn write_ppm(&self, path: &Path, gamma: f32) -> Result<()> {
        let mut out = Vec::with_capacity(self.data.len() * 3 + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).expect("vec write");
        for px in &self.data {
            for c in px {
                let v = c.clamp(0.0, 1.0).powf(1.0 / gamma);
                out.push((v * 255.0 + 0.5) as u8);
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let img = Image::from_fn(5, 3, |x, y| [x as f32 * 0.1, y as f32, -1.5]);
        img.write_pfm(&p).unwrap();
        assert_eq!(Image::read_pfm(&p).unwrap(), img);
    }

    #[test]
    fn ppm_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        Image::new(4, 2).write_ppm(&p, 2.2).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P6\n4 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 24);
    }
}
