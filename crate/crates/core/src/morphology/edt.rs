//! Exact Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope-of-parabolas passes, one per axis, with the
//! axis spacing folded into the parabola weight. Squared distances are
//! accumulated axis by axis, so integer spacings give exact integer results.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{Grid, Mask, Point};

/// Distance in millimeters to the nearest foreground voxel of a source mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    grid: Grid,
    data: Vec<f64>,
}

impl DistanceField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Value at the voxel nearest to `p`, `None` outside the grid.
    pub fn sample_mm(&self, p: Point) -> Option<f64> {
        self.grid.nearest_voxel(p).map(|i| self.data[i])
    }
}

/// Squared distances (mm²) from every voxel center to the nearest foreground
/// voxel center.
pub fn squared_edt(mask: &Mask) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let grid = *mask.grid();
    let [nx, ny, nz] = grid.dims;
    let sp = grid.spacing.as_array();
    let mut f: Vec<f64> = mask
        .data()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();

    // x lines are contiguous
    let w = sp[0] * sp[0];
    f.par_chunks_mut(nx).for_each_init(
        || Scratch::new(nx),
        |s, line| s.transform_in_place(line, w),
    );

    // y: process per z-slab, transposing lines through scratch
    let w = sp[1] * sp[1];
    f.par_chunks_mut(nx * ny).for_each_init(
        || (Scratch::new(ny), vec![0.0; ny]),
        |(s, buf), slab| {
            for x in 0..nx {
                for y in 0..ny {
                    buf[y] = slab[x + nx * y];
                }
                s.transform_in_place(buf, w);
                for y in 0..ny {
                    slab[x + nx * y] = buf[y];
                }
            }
        },
    );

    // z: gather columns, parallel over (x, y)
    if nz > 1 {
        let w = sp[2] * sp[2];
        let plane = nx * ny;
        let cols: Vec<Vec<f64>> = (0..plane)
            .into_par_iter()
            .map_init(
                || Scratch::new(nz),
                |s, xy| {
                    let mut col: Vec<f64> = (0..nz).map(|z| f[xy + plane * z]).collect();
                    s.transform_in_place(&mut col, w);
                    col
                },
            )
            .collect();
        for (xy, col) in cols.into_iter().enumerate() {
            for (z, v) in col.into_iter().enumerate() {
                f[xy + plane * z] = v;
            }
        }
    }
    Ok(f)
}

pub fn edt(mask: &Mask) -> Result<DistanceField> {
    let sq = squared_edt(mask)?;
    Ok(DistanceField {
        grid: *mask.grid(),
        data: sq.into_iter().map(f64::sqrt).collect(),
    })
}

struct Scratch {
    out: Vec<f64>,
    /// parabola vertex positions
    v: Vec<usize>,
    /// envelope boundaries
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            out: vec![0.0; n],
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// `d(p) = min_q f(q) + w (p - q)^2`, skipping infinite samples.
    fn transform_in_place(&mut self, f: &mut [f64], w: f64) {
        let n = f.len();
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + w * (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let vk = self.v[k as usize];
                let fv = f[vk] + w * (vk * vk) as f64;
                let s = (fq - fv) / (2.0 * w * (q - vk) as f64);
                if s <= self.z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.v[k as usize] = q;
                self.z[k as usize] = s;
                self.z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            return;
        }
        let mut j = 0usize;
        for p in 0..n {
            while self.z[j + 1] < p as f64 {
                j += 1;
            }
            let q = self.v[j];
            let d = p as f64 - q as f64;
            self.out[p] = f[q] + w * d * d;
        }
        f.copy_from_slice(&self.out[..n]);
    }
}
