//! FGRID: a bit-exact binary container for real-valued raster fields.
//!
//! Layout, all little-endian: magic `FGRD`, u32 version, u32 height,
//! u32 width, u32 channels, then `height * width * channels` 32-bit floats
//! in row-major order.

use crate::error::{Error, Result};
use crate::grid::Grid;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FGRD";
const VERSION: u32 = 1;

/// A decoded FGRID payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Fgrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Fgrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Fgrid> {
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "fgrid {}x{}x{} needs {} values, got {}",
                height,
                width,
                channels,
                height * width * channels,
                data.len()
            )));
        }
        Ok(Fgrid {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_grid(grid: &Grid<f64>) -> Fgrid {
        Fgrid {
            height: grid.height(),
            width: grid.width(),
            channels: 1,
            data: grid.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_mask(mask: &Grid<bool>) -> Fgrid {
        Fgrid {
            height: mask.height(),
            width: mask.width(),
            channels: 1,
            data: mask
                .data()
                .iter()
                .map(|&b| if b { 1.0f32 } else { 0.0 })
                .collect(),
        }
    }

    /// Single-channel payload as a real map.
    pub fn to_grid(&self) -> Result<Grid<f64>> {
        if self.channels != 1 {
            return Err(Error::shape(format!(
                "expected 1 channel, got {}",
                self.channels
            )));
        }
        Grid::from_vec(
            self.height,
            self.width,
            self.data.iter().map(|&v| v as f64).collect(),
        )
    }

    /// Single-channel payload thresholded at 0.5 into a mask.
    pub fn to_mask(&self) -> Result<Grid<bool>> {
        Ok(self.to_grid()?.map(|v| v > 0.5))
    }
}

pub fn encode(f: &Fgrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * f.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(f.height as u32).to_le_bytes());
    out.extend_from_slice(&(f.width as u32).to_le_bytes());
    out.extend_from_slice(&(f.channels as u32).to_le_bytes());
    for v in &f.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Fgrid, String> {
    if bytes.len() < 20 {
        return Err("truncated header".into());
    }
    if &bytes[0..4] != MAGIC {
        return Err("bad magic (expected FGRD)".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(format!("unsupported version {}", version));
    }
    let (h, w, c) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let expected = 20 + 4 * h * w * c;
    if bytes.len() != expected {
        return Err(format!(
            "payload length {} does not match {}x{}x{}",
            bytes.len() - 20,
            h,
            w,
            c
        ));
    }
    let data = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Fgrid::new(h, w, c, data).map_err(|e| e.to_string())
}

pub fn write_fgrid(path: &Path, f: &Fgrid) -> Result<()> {
    let bytes = encode(f);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_fgrid(path: &Path) -> Result<Fgrid> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    decode(&bytes).map_err(|reason| Error::format(path.display().to_string(), reason))
}
