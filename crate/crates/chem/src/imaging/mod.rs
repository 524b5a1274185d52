//! Molecule images: 2D layout, rasterization into the one-channel standard
//! scheme or the four-channel engineered scheme, and rotation augmentation.

mod layout;

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use layout::{layout_2d, rotate_layout, smallest_rings, Layout2D, BOND_LENGTH, RELAX_ITERATIONS};

use crate::error::{ChemError, Result};
use crate::molgraph::{Hybridization, MolGraph};

/// Maximum rotation attempts before falling back to the unrotated image.
pub const MAX_ROTATION_RETRIES: usize = 8;

/// Square image geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Height and width in pixels.
    pub size: usize,
    /// Distance units per pixel.
    pub resolution: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            size: 80,
            resolution: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// One channel: atomic number at atoms, bond order at bonds.
    Std,
    /// Four channels: element/bond, partial charge, valence, hybridization.
    EngD,
}

impl Scheme {
    pub fn channels(self) -> usize {
        match self {
            Scheme::Std => 1,
            Scheme::EngD => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Std => "std",
            Scheme::EngD => "engd",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        match name.to_ascii_lowercase().as_str() {
            "std" => Some(Scheme::Std),
            "engd" => Some(Scheme::EngD),
            _ => None,
        }
    }
}

/// Row-major H×W×C image.
#[derive(Debug, Clone, PartialEq)]
pub struct MolImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub scheme: Scheme,
    pub resolution: f64,
    pub data: Vec<f32>,
}

impl MolImage {
    fn blank(grid: &Grid, scheme: Scheme) -> Self {
        let c = scheme.channels();
        MolImage {
            height: grid.size,
            width: grid.size,
            channels: c,
            scheme,
            resolution: grid.resolution,
            data: vec![0.0; grid.size * grid.size * c],
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let i = (row * self.width + col) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Number of pixels with any nonzero channel.
    pub fn nonzero_pixels(&self) -> usize {
        self.data
            .chunks(self.channels)
            .filter(|px| px.iter().any(|&v| v != 0.0))
            .count()
    }

    /// Writes an "H W C" header line followed by little-endian f32 values.
    pub fn write_raw<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.height, self.width, self.channels)?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Reads a tensor written by [`MolImage::write_raw`]; returns (shape, values).
pub fn read_raw<R: Read>(mut input: R) -> Result<([usize; 3], Vec<f32>)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ChemError::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| ChemError::Format(e.to_string()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ChemError::Format(format!("bad header {header:?}: {e}")))?;
    let [h, w, c] = dims[..] else {
        return Err(ChemError::Format(format!("expected 3 dims, got {header:?}")));
    };
    let body = &bytes[nl + 1..];
    if body.len() != h * w * c * 4 {
        return Err(ChemError::Format(format!(
            "expected {} bytes of data, found {}",
            h * w * c * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(([h, w, c], values))
}

fn hybridization_level(h: Hybridization) -> f32 {
    match h {
        Hybridization::SP => 1.0 / 3.0,
        Hybridization::SP2 => 2.0 / 3.0,
        Hybridization::SP3 => 1.0,
        Hybridization::Other => 1.0 / 6.0,
    }
}

fn to_pixel(p: [f64; 2], grid: &Grid) -> Option<(i64, i64)> {
    let half = (grid.size / 2) as i64;
    let col = (p[0] / grid.resolution).round() as i64 + half;
    let row = (p[1] / grid.resolution).round() as i64 + half;
    let n = grid.size as i64;
    ((0..n).contains(&row) && (0..n).contains(&col)).then_some((row, col))
}

/// Integer line between two pixels, endpoints excluded.
pub fn trace_line(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut r, mut c) = from;
    let dr = (to.0 - r).abs();
    let dc = -(to.1 - c).abs();
    let sr = if to.0 > r { 1 } else { -1 };
    let sc = if to.1 > c { 1 } else { -1 };
    let mut err = dr + dc;
    let mut out = Vec::new();
    loop {
        if (r, c) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
        if (r, c) != to {
            out.push((r, c));
        }
    }
    out
}

/// Draws bonds, then atoms, onto a blank image.
pub fn rasterize(mol: &MolGraph, layout: &Layout2D, scheme: Scheme, grid: &Grid) -> Result<MolImage> {
    let mut img = MolImage::blank(grid, scheme);
    let mut pixels = Vec::with_capacity(layout.coords.len());
    for p in &layout.coords {
        match to_pixel(*p, grid) {
            Some(px) => pixels.push(px),
            None => {
                let e = layout.extent();
                return Err(ChemError::LayoutOverflow {
                    extent: e[0].max(e[1]),
                    capacity: grid.size as f64 * grid.resolution - 2.0,
                });
            }
        }
    }
    for bond in &mol.bonds {
        let v = (bond.order.value() / 100.0) as f32;
        for (r, c) in trace_line(pixels[bond.a], pixels[bond.b]) {
            img.pixel_mut(r as usize, c as usize)[0] = v;
        }
    }
    let mut owner = vec![usize::MAX; grid.size * grid.size];
    for (i, atom) in mol.atoms.iter().enumerate() {
        let (r, c) = (pixels[i].0 as usize, pixels[i].1 as usize);
        let slot = &mut owner[r * grid.size + c];
        if *slot != usize::MAX {
            return Err(ChemError::PixelCollision {
                first: *slot,
                second: i,
                row: r,
                col: c,
            });
        }
        *slot = i;
        let px = img.pixel_mut(r, c);
        px[0] = atom.atomic_number as f32 / 100.0;
        if scheme == Scheme::EngD {
            px[1] = ((atom.partial_charge + 2.0) / 4.0).clamp(0.0, 1.0) as f32;
            px[2] = (atom.total_valence / 8.0).clamp(0.0, 1.0) as f32;
            px[3] = hybridization_level(atom.hybridization);
        }
    }
    Ok(img)
}

/// Layout, rotate by U[0, π), rasterize. Collisions or overflow after
/// rotation trigger another draw; after the retry budget the unrotated
/// image is returned.
pub fn augmented_sample<R: Rng + ?Sized>(mol: &MolGraph, scheme: Scheme, grid: &Grid, rng: &mut R) -> Result<MolImage> {
    let layout = layout_2d(mol, grid)?;
    augmented_from_layout(mol, &layout, scheme, grid, rng)
}

/// Same as [`augmented_sample`] with a precomputed layout.
pub fn augmented_from_layout<R: Rng + ?Sized>(
    mol: &MolGraph,
    layout: &Layout2D,
    scheme: Scheme,
    grid: &Grid,
    rng: &mut R,
) -> Result<MolImage> {
    for _ in 0..MAX_ROTATION_RETRIES {
        let theta = rng.random_range(0.0..PI);
        match rasterize(mol, &rotate_layout(layout, theta), scheme, grid) {
            Ok(img) => return Ok(img),
            Err(ChemError::PixelCollision { .. } | ChemError::LayoutOverflow { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    rasterize(mol, layout, scheme, grid)
}

/// Layout plus unrotated rasterization.
pub fn render(mol: &MolGraph, scheme: Scheme, grid: &Grid) -> Result<MolImage> {
    let layout = layout_2d(mol, grid)?;
    rasterize(mol, &layout, scheme, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::prepare;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SAMPLES: [&str; 8] = [
        "CCO",
        "c1ccccc1",
        "CC(=O)Oc1ccccc1C(=O)O",
        "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
        "C[N+](C)(C)C",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "c1ccc2[nH]ccc2c1",
        "OS(=O)(=O)c1ccccc1",
    ];

    #[test]
    fn ethane_std() {
        let m = prepare("CC").unwrap();
        let img = render(&m, Scheme::Std, &Grid::default()).unwrap();
        let atoms = img.data.iter().filter(|&&v| v == 0.06).count();
        let bonds = img.data.iter().filter(|&&v| v == 0.01).count();
        assert_eq!(atoms, 2);
        assert!(bonds >= 1);
        assert_eq!(img.nonzero_pixels(), atoms + bonds);
    }

    #[test]
    fn benzene_engd() {
        let m = prepare("c1ccccc1").unwrap();
        let img = render(&m, Scheme::EngD, &Grid::default()).unwrap();
        let sp2 = img
            .data
            .chunks(4)
            .filter(|px| px[0] == 0.06 && px[3] == 2.0 / 3.0)
            .count();
        assert_eq!(sp2, 6);
        let bond = (1.5f64 / 100.0) as f32;
        assert!(img.data.chunks(4).any(|px| px[0] == bond && px[1..] == [0.0; 3]));
    }

    #[test]
    fn pixel_budget_and_ranges() {
        let grid = Grid::default();
        for s in SAMPLES {
            let m = prepare(s).unwrap();
            let layout = layout_2d(&m, &grid).unwrap();
            for scheme in [Scheme::Std, Scheme::EngD] {
                let img = rasterize(&m, &layout, scheme, &grid).unwrap();
                assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)), "{s}");
                let px = |p: [f64; 2]| to_pixel(p, &grid).unwrap();
                let traced: usize = m
                    .bonds
                    .iter()
                    .map(|b| trace_line(px(layout.coords[b.a]), px(layout.coords[b.b])).len())
                    .sum();
                assert!(img.nonzero_pixels() <= m.atoms.len() + traced, "{s}");
                assert!(img.nonzero_pixels() >= m.atoms.len());
            }
        }
    }

    #[test]
    fn trace_excludes_endpoints() {
        assert!(trace_line((0, 0), (0, 1)).is_empty());
        assert_eq!(trace_line((0, 0), (0, 3)), vec![(0, 1), (0, 2)]);
        assert_eq!(trace_line((0, 0), (3, 3)), vec![(1, 1), (2, 2)]);
        let l = trace_line((5, 2), (1, 4));
        assert!(!l.contains(&(5, 2)) && !l.contains(&(1, 4)));
    }

    #[test]
    fn collision_reported() {
        let m = prepare("CC").unwrap();
        let layout = Layout2D {
            coords: vec![[0.0, 0.0], [0.1, 0.1]],
        };
        let err = rasterize(&m, &layout, Scheme::Std, &Grid::default()).unwrap_err();
        assert_eq!(err.kind(), "PixelCollision");
    }

    #[test]
    fn seeded_augmentation_is_deterministic() {
        let m = prepare("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let grid = Grid::default();
        let a = augmented_sample(&m, Scheme::EngD, &grid, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = augmented_sample(&m, Scheme::EngD, &grid, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_pixel_count_stable() {
        let m = prepare("CCO").unwrap();
        let grid = Grid::default();
        let layout = layout_2d(&m, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let counts: Vec<usize> = (0..100)
            .map(|_| {
                augmented_from_layout(&m, &layout, Scheme::Std, &grid, &mut rng)
                    .unwrap()
                    .nonzero_pixels()
            })
            .collect();
        let lo = *counts.iter().min().unwrap() as f64;
        let hi = *counts.iter().max().unwrap() as f64;
        assert!((hi - lo) / hi < 0.3, "{lo} {hi}");
    }

    #[test]
    fn raw_dump_round_trip() {
        let m = prepare("c1ccccc1O").unwrap();
        let img = render(&m, Scheme::EngD, &Grid::default()).unwrap();
        let mut buf = Vec::new();
        img.write_raw(&mut buf).unwrap();
        assert!(buf.starts_with(b"80 80 4\n"));
        let (shape, values) = read_raw(&buf[..]).unwrap();
        assert_eq!(shape, [80, 80, 4]);
        assert_eq!(values, img.data);
        assert!(read_raw(&buf[..buf.len() - 1]).is_err());
    }
}
