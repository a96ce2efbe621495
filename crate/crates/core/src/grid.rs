//! Regular grids over boxes, multilinear interpolation and the binary grid container.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// One uniformly spaced axis. A periodic axis identifies `lo` with `hi`, so
/// its last point duplicates the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.hi - self.lo) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count && self.count > 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    /// Lower cell index and fractional offset of `x`, after wrapping or clamping.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        if self.count < 2 {
            return (0, 0.0);
        }
        let cells = (self.count - 1) as f64;
        let mut s = (x - self.lo) / (self.hi - self.lo) * cells;
        if self.periodic {
            s = s.rem_euclid(cells);
        } else {
            s = s.clamp(0.0, cells);
        }
        let i = (s.floor() as usize).min(self.count - 2);
        (i, (s - i as f64).clamp(0.0, 1.0))
    }
}

/// Tensor grid with row-major storage, last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

/// Interpolation weights of one query point over the `2^d` surrounding knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub index: Vec<u32>,
    pub weight: Vec<f64>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        Grid { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].count;
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let c = self.axes[k].count;
            idx[k] = flat % c;
            flat /= c;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.point_into(flat, &mut out);
        out
    }

    pub fn point_into(&self, mut flat: usize, out: &mut [f64]) {
        for k in (0..self.dim()).rev() {
            let c = self.axes[k].count;
            out[k] = self.axes[k].coord(flat % c);
            flat /= c;
        }
    }

    /// Multilinear stencil of `x`. Knots with zero weight are still listed,
    /// so every stencil has exactly `2^d` entries.
    pub fn stencil(&self, x: &[f64]) -> Stencil {
        let d = self.dim();
        let mut index = vec![0u32; 1 << d];
        let mut weight = vec![0.0; 1 << d];
        self.stencil_into(x, &mut index, &mut weight);
        Stencil { index, weight }
    }

    pub fn stencil_into(&self, x: &[f64], index: &mut [u32], weight: &mut [f64]) {
        let d = self.dim();
        let strides = self.strides();
        index[0] = 0;
        weight[0] = 1.0;
        let mut filled = 1;
        for k in 0..d {
            let (i, t) = self.axes[k].locate(x[k]);
            let base = i * strides[k];
            let up = if self.axes[k].count > 1 { strides[k] } else { 0 };
            for j in 0..filled {
                let (idx, w) = (index[j], weight[j]);
                index[j] = idx + base as u32;
                weight[j] = w * (1.0 - t);
                index[j + filled] = idx + (base + up) as u32;
                weight[j + filled] = w * t;
            }
            filled *= 2;
        }
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let s = self.stencil(x);
        s.index
            .iter()
            .zip(&s.weight)
            .map(|(&i, &w)| if w == 0.0 { 0.0 } else { w * values[i as usize] })
            .sum()
    }

    /// Interpolates `channels` interleaved values per knot into `out`.
    pub fn interpolate_channels(&self, data: &[f64], channels: usize, x: &[f64], out: &mut [f64]) {
        let s = self.stencil(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&i, &w) in s.index.iter().zip(&s.weight) {
            if w == 0.0 {
                continue;
            }
            let row = &data[i as usize * channels..(i as usize + 1) * channels];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}

/// Tabulated scalar function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ValueGrid {
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.values, x)
    }
}

/// Tabulated controls for a subset of the inputs, interleaved per knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub grid: Grid,
    /// Input axes produced, in storage order.
    pub inputs: Vec<usize>,
    pub controls: Vec<f64>,
}

impl PolicyGrid {
    pub fn control_at(&self, flat: usize) -> &[f64] {
        let m = self.inputs.len();
        &self.controls[flat * m..(flat + 1) * m]
    }

    pub fn interpolate(&self, x: &[f64], out: &mut [f64]) {
        self.grid
            .interpolate_channels(&self.controls, self.inputs.len(), x, out)
    }
}

const MAGIC: &[u8; 8] = b"PDGRID01";

/// Writes `data` (`channels` values per knot) as a PDGRID01 container:
/// magic, u64 dimension count, u64 channel count, per axis u64 count, f64 lo,
/// f64 hi and u8 periodic flag, then the little-endian f64 payload.
pub fn write_container<W: Write>(mut w: W, grid: &Grid, channels: usize, data: &[f64]) -> io::Result<()> {
    if data.len() != grid.len() * channels {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "payload size mismatch"));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    w.write_all(&(channels as u64).to_le_bytes())?;
    for a in &grid.axes {
        w.write_all(&(a.count as u64).to_le_bytes())?;
        w.write_all(&a.lo.to_le_bytes())?;
        w.write_all(&a.hi.to_le_bytes())?;
        w.write_all(&[a.periodic as u8])?;
    }
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Inverse of [`write_container`]: `(grid, channels, data)`.
pub fn read_container<R: Read>(mut r: R) -> io::Result<(Grid, usize, Vec<f64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a PDGRID01 container"));
    }
    let dims = read_u64(&mut r)? as usize;
    let channels = read_u64(&mut r)? as usize;
    if dims > 64 {
        return Err(bad("implausible dimension count"));
    }
    let mut axes = Vec::with_capacity(dims);
    for _ in 0..dims {
        let count = read_u64(&mut r)? as usize;
        let lo = read_f64(&mut r)?;
        let hi = read_f64(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        axes.push(Axis { lo, hi, count, periodic: flag[0] != 0 });
    }
    let grid = Grid::new(axes);
    let total = grid
        .len()
        .checked_mul(channels)
        .ok_or_else(|| bad("payload size overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != total * 8 {
        return Err(bad("payload size mismatch"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((grid, channels, data))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the container to `path` and `meta` to `path.json`.
pub fn save_with_sidecar(
    path: &Path,
    grid: &Grid,
    channels: usize,
    data: &[f64],
    meta: &serde_json::Value,
) -> io::Result<()> {
    let f = io::BufWriter::new(fs::File::create(path)?);
    write_container(f, grid, channels, data)?;
    let text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    fs::write(sidecar_path(path), text + "\n")
}

pub fn load_with_sidecar(path: &Path) -> io::Result<(Grid, usize, Vec<f64>, serde_json::Value)> {
    let (grid, channels, data) = read_container(io::BufReader::new(fs::File::open(path)?))?;
    let text = fs::read_to_string(sidecar_path(path))?;
    let meta = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    Ok((grid, channels, data, meta))
}
