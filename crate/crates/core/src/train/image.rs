use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SPIM";

/// RGB image, row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, data: rgb.iter().copied().cycle().take(3 * n).collect() }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::inconsistent(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Mean squared error over all channels.
    pub fn mse(&self, target: &Image) -> Result<f64> {
        self.check_same_shape(target)?;
        let n = self.data.len().max(1) as f64;
        Ok(self.data.iter().zip(&target.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
    }

    /// Gradient of [`Image::mse`] with respect to `self`.
    pub fn mse_grad(&self, target: &Image) -> Result<Image> {
        self.check_same_shape(target)?;
        let n = self.data.len().max(1) as f64;
        Ok(Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&target.data).map(|(a, b)| 2.0 * (a - b) / n).collect(),
        })
    }

    /// Magic, width (u32), height (u32), then f32 RGB rows, little-endian.
    pub fn write_spim(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_spim(r: &mut impl Read) -> std::result::Result<Self, String> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head).map_err(|e| e.to_string())?;
        if &head[..4] != MAGIC {
            return Err("missing SPIM header".into());
        }
        let width = u32::from_le_bytes(head[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(head[8..12].try_into().unwrap());
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|e| e.to_string())?;
        let expected = width as usize * height as usize * 12;
        if body.len() != expected {
            return Err(format!("expected {expected} pixel bytes, found {}", body.len()));
        }
        let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        Ok(Self { width, height, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_spim(&mut f).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read_spim(&mut f).map_err(|e| Error::format(path, e))
    }

    /// Rounds every channel to `f32`, as a save/load round trip would.
    pub fn quantized(&self) -> Self {
        Self { data: self.data.iter().map(|&v| v as f32 as f64).collect(), ..self.clone() }
    }
}
