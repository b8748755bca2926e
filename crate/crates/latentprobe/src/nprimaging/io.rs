//! PNG image I/O and the brushstroke-map binary format.
//!
//! Map layout: 8-byte magic, H, W, C as u32 little-endian, 4 reserved
//! bytes, epsilon and s_max as f32 little-endian, then H*W*C f32
//! little-endian values in row-major order with channels innermost.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::{BrushstrokeMap, ImageBuffer, ImagingError};

pub const MAP_MAGIC: [u8; 8] = *b"BRUSHV1\0";

impl ImageBuffer {
    /// Loads a PNG, normalizing 8-bit sRGB samples to [0, 1]. Color inputs
    /// (alpha dropped) become C = 3, grayscale becomes C = 1.
    pub fn load_png(path: &Path) -> Result<Self, ImagingError> {
        let decoded = image::open(path)?;
        let data = if decoded.color().has_color() {
            let rgb = decoded.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
                rgb.get_pixel(x as u32, y as u32).0[c] as f64 / 255.0
            })
        } else {
            let gray = decoded.to_luma8();
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            Array3::from_shape_fn((h, w, 1), |(y, x, _)| {
                gray.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0
            })
        };
        Self::new(data)
    }

    /// Writes an 8-bit PNG, rounding each value to the nearest of 256 levels.
    pub fn save_png(&self, path: &Path) -> Result<(), ImagingError> {
        let (h, w, c) = self.dim();
        let quantize = |v: f64| (v * 255.0).round() as u8;
        match c {
            1 => {
                let img = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
                    image::Luma([quantize(self.data()[[y as usize, x as usize, 0]])])
                });
                img.save_with_format(path, image::ImageFormat::Png)?;
            }
            3 => {
                let img = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
                    let px = |ch: usize| quantize(self.data()[[y as usize, x as usize, ch]]);
                    image::Rgb([px(0), px(1), px(2)])
                });
                img.save_with_format(path, image::ImageFormat::Png)?;
            }
            other => return Err(ImagingError::BadChannels(other)),
        }
        Ok(())
    }
}

impl BrushstrokeMap {
    pub fn save(&self, path: &Path) -> Result<(), ImagingError> {
        let mut out = BufWriter::new(File::create(path)?);
        let (h, w, c) = self.dim();
        out.write_all(&MAP_MAGIC)?;
        for dim in [h, w, c] {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        out.write_all(&[0u8; 4])?;
        out.write_all(&(self.epsilon as f32).to_le_bytes())?;
        out.write_all(&(self.s_max as f32).to_le_bytes())?;
        for &v in self.data.iter() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ImagingError> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if magic != MAP_MAGIC {
            return Err(ImagingError::BadMapFile(format!(
                "bad magic {magic:?}, expected {MAP_MAGIC:?}"
            )));
        }
        let mut u32_buf = [0u8; 4];
        let mut read_u32 = |reader: &mut BufReader<File>| -> Result<usize, ImagingError> {
            reader.read_exact(&mut u32_buf)?;
            Ok(u32::from_le_bytes(u32_buf) as usize)
        };
        let h = read_u32(&mut reader)?;
        let w = read_u32(&mut reader)?;
        let c = read_u32(&mut reader)?;
        let mut reserved = [0u8; 4];
        reader.read_exact(&mut reserved)?;
        let mut f32_buf = [0u8; 4];
        reader.read_exact(&mut f32_buf)?;
        let epsilon = f32::from_le_bytes(f32_buf) as f64;
        reader.read_exact(&mut f32_buf)?;
        let s_max = f32::from_le_bytes(f32_buf) as f64;

        if h == 0 || w == 0 {
            return Err(ImagingError::BadMapFile(format!("empty map {h}x{w}")));
        }
        if c != 1 && c != 3 {
            return Err(ImagingError::BadMapFile(format!("{c} channels")));
        }
        if !(epsilon > 0.0) {
            return Err(ImagingError::BadMapFile(format!("epsilon {epsilon}")));
        }
        if !(s_max > 1.0) {
            return Err(ImagingError::BadMapFile(format!("s_max {s_max}")));
        }

        let count = h * w * c;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            reader.read_exact(&mut f32_buf)?;
            let v = f32::from_le_bytes(f32_buf) as f64;
            if !(v.is_finite() && (0.0..=s_max).contains(&v)) {
                return Err(ImagingError::BadMapFile(format!(
                    "value {v} outside [0, {s_max}]"
                )));
            }
            values.push(v);
        }
        let mut probe = [0u8; 1];
        if reader.read(&mut probe)? != 0 {
            return Err(ImagingError::BadMapFile("trailing data".into()));
        }
        let data = Array3::from_shape_vec((h, w, c), values)
            .expect("vec length matches the header dims");
        Ok(Self {
            data,
            epsilon,
            s_max,
        })
    }

    /// Writes an 8-bit preview with values scaled by 1/s_max, so full white
    /// is a pixel at the clamp ceiling and mid-gray is roughly unit gain.
    pub fn save_preview_png(&self, path: &Path) -> Result<(), ImagingError> {
        let scaled = self.data.mapv(|v| v / self.s_max);
        ImageBuffer::new(scaled)
            .expect("map values lie in [0, s_max]")
            .save_png(path)
    }
}
