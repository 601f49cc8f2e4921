//! Voxel grids with physical geometry.
//!
//! All grids store data x-fastest, then y, then z: the linear index of voxel
//! `(x, y, z)` is `x + nx * (y + ny * z)`. A voxel's physical position is its
//! center, and `origin` is the center of voxel `(0, 0, 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical point in millimeters.
pub type Point = [f64; 3];

/// Smallest admissible VOI radius in millimeters.
pub const MIN_VOI_RADIUS_MM: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Spacing {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x > 0.0 && y > 0.0 && z > 0.0) || !(x.is_finite() && y.is_finite() && z.is_finite())
        {
            return Err(Error::InvalidSpacing(x, y, z));
        }
        Ok(Spacing { x, y, z })
    }

    pub fn isotropic(t: f64) -> Result<Self> {
        Spacing::new(t, t, t)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.x * self.y * self.z
    }

    pub fn is_isotropic(&self, t: f64) -> bool {
        let eps = 1e-9 * t;
        (self.x - t).abs() <= eps && (self.y - t).abs() <= eps && (self.z - t).abs() <= eps
    }
}

/// Grid geometry shared by volumes, masks and distance fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: Spacing,
    pub origin: Point,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: Spacing, origin: Point) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidDims(dims));
        }
        Ok(Grid {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit-spacing grid with origin at zero.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Grid::new(dims, Spacing::isotropic(1.0)?, [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    /// Linear index of a signed voxel coordinate, or `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        Some(self.index(x, y, z))
    }

    pub fn center_mm(&self, c: [usize; 3]) -> Point {
        [
            self.origin[0] + c[0] as f64 * self.spacing.x,
            self.origin[1] + c[1] as f64 * self.spacing.y,
            self.origin[2] + c[2] as f64 * self.spacing.z,
        ]
    }

    pub fn index_center_mm(&self, i: usize) -> Point {
        self.center_mm(self.coords(i))
    }

    /// Continuous voxel coordinate of a physical point.
    pub fn continuous_index(&self, p: Point) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing.x,
            (p[1] - self.origin[1]) / self.spacing.y,
            (p[2] - self.origin[2]) / self.spacing.z,
        ]
    }

    /// Voxel nearest to a physical point, or `None` if it falls outside.
    pub fn nearest_voxel(&self, p: Point) -> Option<usize> {
        let c = self.continuous_index(p);
        self.checked_index(
            c[0].round() as i64,
            c[1].round() as i64,
            c[2].round() as i64,
        )
    }

    /// Same dims and spacing/origin within 1e-6 mm.
    pub fn compatible(&self, other: &Grid) -> bool {
        const TOL: f64 = 1e-6;
        self.dims == other.dims
            && self
                .spacing
                .as_array()
                .iter()
                .zip(other.spacing.as_array())
                .all(|(a, b)| (a - b).abs() <= TOL)
            && self
                .origin
                .iter()
                .zip(other.origin)
                .all(|(a, b)| (a - b).abs() <= TOL)
    }

    pub fn ensure_compatible(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "dims {:?} spacing {:?} origin {:?} vs dims {:?} spacing {:?} origin {:?}",
                self.dims,
                self.spacing.as_array(),
                self.origin,
                other.dims,
                other.spacing.as_array(),
                other.origin
            )))
        }
    }

    /// Integer voxel offset of `sub`'s origin inside `self`, when both share
    /// spacing and `sub`'s voxels sit exactly on `self`'s lattice.
    pub fn lattice_offset(&self, sub: &Grid) -> Result<[i64; 3]> {
        let mut off = [0i64; 3];
        let s = self.spacing.as_array();
        let t = sub.spacing.as_array();
        for a in 0..3 {
            if (s[a] - t[a]).abs() > 1e-6 {
                return Err(Error::GridMismatch(format!(
                    "spacing {:?} vs {:?}",
                    self.spacing.as_array(),
                    sub.spacing.as_array()
                )));
            }
            let f = (sub.origin[a] - self.origin[a]) / s[a];
            let r = f.round();
            if (f - r).abs() > 1e-4 {
                return Err(Error::GridMismatch(format!(
                    "origin {:?} is off the lattice of {:?}",
                    sub.origin, self.origin
                )));
            }
            off[a] = r as i64;
        }
        Ok(off)
    }

    /// Dims of the isometric grid with spacing `t` covering this grid.
    pub fn isometric_dims(&self, t: f64) -> [usize; 3] {
        let s = self.spacing.as_array();
        let mut d = [1usize; 3];
        for a in 0..3 {
            d[a] = ((self.dims[a] as f64 * s[a] / t).round() as usize).max(1);
        }
        d
    }
}

/// CT intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid,
    data: Vec<i16>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<i16>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Volume { grid, data })
    }

    pub fn filled(grid: Grid, value: i16) -> Self {
        Volume {
            data: vec![value; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> i16 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Resample onto an isometric grid of spacing `t`.
    pub fn resample_isometric(&self, t: f64, mode: Interpolation) -> Result<Volume> {
        let out = isometric_grid(&self.grid, t)?;
        let data = match mode {
            Interpolation::Nearest => resample_nearest(&self.grid, &out, &self.data),
            Interpolation::Trilinear => {
                resample_trilinear(&self.grid, &out, |i| self.data[i] as f64)
                    .into_iter()
                    .map(|v| v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
                    .collect()
            }
        };
        Ok(Volume { grid: out, data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Binary voxel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(grid: Grid, data: Vec<bool>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Mask { grid, data })
    }

    pub fn empty(grid: Grid) -> Self {
        Mask {
            data: vec![false; grid.len()],
            grid,
        }
    }

    pub fn from_indices(grid: Grid, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Mask::empty(grid);
        for i in indices {
            m.data[i] = true;
        }
        m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<bool> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)]
    }

    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> bool {
        self.grid
            .checked_index(x, y, z)
            .map(|i| self.data[i])
            .unwrap_or(false)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.grid.index(x, y, z);
        self.data[i] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Physical volume in mm³.
    pub fn physical_volume(&self) -> f64 {
        self.count() as f64 * self.grid.spacing.voxel_volume()
    }

    /// Physical center of mass, `None` when empty.
    pub fn centroid_mm(&self) -> Option<Point> {
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for i in self.indices() {
            let p = self.grid.index_center_mm(i);
            for a in 0..3 {
                acc[a] += p[a];
            }
            n += 1;
        }
        (n > 0).then(|| acc.map(|v| v / n as f64))
    }

    /// Inclusive voxel bounding box `(lo, hi)`, `None` when empty.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for i in self.indices() {
            let c = self.grid.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            any = true;
        }
        any.then_some((lo, hi))
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.grid.ensure_compatible(&other.grid)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(Mask {
            grid: self.grid,
            data,
        })
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Sub-mask over the inclusive voxel box, with origin moved accordingly.
    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Mask {
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let grid = Grid {
            dims,
            spacing: self.grid.spacing,
            origin: self.grid.center_mm(lo),
        };
        let mut out = Mask::empty(grid);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let v = self.get(lo[0] + x, lo[1] + y, lo[2] + z);
                    out.data[grid.index(x, y, z)] = v;
                }
            }
        }
        out
    }

    /// Place this mask into a larger grid sharing its voxel lattice. Voxels
    /// falling outside `target` are dropped.
    pub fn embed_into(&self, target: &Grid) -> Result<Mask> {
        let off = target.lattice_offset(&self.grid)?;
        let mut out = Mask::empty(*target);
        for i in self.indices() {
            let c = self.grid.coords(i);
            if let Some(j) = target.checked_index(
                c[0] as i64 + off[0],
                c[1] as i64 + off[1],
                c[2] as i64 + off[2],
            ) {
                out.data[j] = true;
            }
        }
        Ok(out)
    }

    /// Nearest-neighbor resampling onto an isometric grid of spacing `t`.
    pub fn resample_isometric(&self, t: f64) -> Result<Mask> {
        let out = isometric_grid(&self.grid, t)?;
        let data = resample_nearest(&self.grid, &out, &self.data);
        Ok(Mask { grid: out, data })
    }
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if grid.dims.contains(&0) {
        return Err(Error::InvalidDims(grid.dims));
    }
    if grid.len() != len {
        return Err(Error::DataLength {
            expected: grid.len(),
            actual: len,
        });
    }
    Ok(())
}

fn isometric_grid(grid: &Grid, t: f64) -> Result<Grid> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTargetSpacing(t));
    }
    if grid.is_empty() {
        return Err(Error::InvalidDims(grid.dims));
    }
    Ok(Grid {
        dims: grid.isometric_dims(t),
        spacing: Spacing::isotropic(t)?,
        origin: grid.origin,
    })
}

/// Per-axis source coordinate of every output sample, in source voxel units.
fn source_coords(src: &Grid, out: &Grid) -> [Vec<f64>; 3] {
    let s = src.spacing.as_array();
    let t = out.spacing.as_array();
    std::array::from_fn(|a| {
        (0..out.dims[a])
            .map(|k| k as f64 * t[a] / s[a])
            .collect::<Vec<_>>()
    })
}

fn resample_nearest<T: Copy>(src: &Grid, out: &Grid, data: &[T]) -> Vec<T> {
    let coords = source_coords(src, out);
    let near: [Vec<usize>; 3] = std::array::from_fn(|a| {
        coords[a]
            .iter()
            .map(|&c| (c.round().max(0.0) as usize).min(src.dims[a] - 1))
            .collect()
    });
    let mut res = Vec::with_capacity(out.len());
    for &z in &near[2] {
        for &y in &near[1] {
            for &x in &near[0] {
                res.push(data[src.index(x, y, z)]);
            }
        }
    }
    res
}

fn resample_trilinear(src: &Grid, out: &Grid, sample: impl Fn(usize) -> f64) -> Vec<f64> {
    let coords = source_coords(src, out);
    // (lower index, upper index, weight of upper), clamped at the edges
    let taps: [Vec<(usize, usize, f64)>; 3] = std::array::from_fn(|a| {
        let n = src.dims[a];
        coords[a]
            .iter()
            .map(|&c| {
                let c = c.clamp(0.0, (n - 1) as f64);
                let lo = c.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                (lo, hi, c - lo as f64)
            })
            .collect()
    });
    let mut res = Vec::with_capacity(out.len());
    for &(z0, z1, wz) in &taps[2] {
        for &(y0, y1, wy) in &taps[1] {
            for &(x0, x1, wx) in &taps[0] {
                let v = |x, y, z| sample(src.index(x, y, z));
                let c00 = v(x0, y0, z0) * (1.0 - wx) + v(x1, y0, z0) * wx;
                let c10 = v(x0, y1, z0) * (1.0 - wx) + v(x1, y1, z0) * wx;
                let c01 = v(x0, y0, z1) * (1.0 - wx) + v(x1, y0, z1) * wx;
                let c11 = v(x0, y1, z1) * (1.0 - wx) + v(x1, y1, z1) * wx;
                let c0 = c00 * (1.0 - wy) + c10 * wy;
                let c1 = c01 * (1.0 - wy) + c11 * wy;
                res.push(c0 * (1.0 - wz) + c1 * wz);
            }
        }
    }
    res
}

/// Spherical volume of interest around a nodule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereVoi {
    pub center: Point,
    pub radius: f64,
}

impl SphereVoi {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= MIN_VOI_RADIUS_MM) {
            return Err(Error::VoiTooSmall(radius, MIN_VOI_RADIUS_MM));
        }
        Ok(SphereVoi { center, radius })
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        dist2(p, self.center) <= self.radius * self.radius
    }

    /// Voxel indices of `grid` inside the sphere, ascending.
    pub fn voxel_indices(&self, grid: &Grid) -> Vec<usize> {
        let Some((lo, hi)) = self.voxel_box(grid) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if self.contains(grid.center_mm([x, y, z])) {
                        out.push(grid.index(x, y, z));
                    }
                }
            }
        }
        out
    }

    /// Inclusive voxel box of `grid` that can hold voxels of the sphere.
    pub fn voxel_box(&self, grid: &Grid) -> Option<([usize; 3], [usize; 3])> {
        let s = grid.spacing.as_array();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let c = (self.center[a] - grid.origin[a]) / s[a];
            let r = self.radius / s[a];
            let l = (c - r).ceil().max(0.0);
            let h = (c + r).floor().min((grid.dims[a] - 1) as f64);
            if l > h {
                return None;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        Some((lo, hi))
    }
}

/// VOI centered at the nodule centroid with radius `max(diameter, floor)`.
pub fn make_voi_with_floor(centroid: Point, eq_diameter: f64, floor: f64) -> Result<SphereVoi> {
    if !(eq_diameter > 0.0) || !eq_diameter.is_finite() {
        return Err(Error::InvalidDiameter(eq_diameter));
    }
    SphereVoi::new(centroid, eq_diameter.max(floor))
}

pub fn make_voi(centroid: Point, eq_diameter: f64) -> Result<SphereVoi> {
    make_voi_with_floor(centroid, eq_diameter, MIN_VOI_RADIUS_MM)
}

/// Mask of voxels whose centers lie within the VOI.
pub fn voi_membership(voi: &SphereVoi, grid: &Grid) -> Mask {
    Mask::from_indices(*grid, voi.voxel_indices(grid))
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_volume(grid: Grid) -> Volume {
        let data = (0..grid.len()).map(|i| (i % 1000) as i16).collect();
        Volume::new(grid, data).unwrap()
    }

    #[test]
    fn spacing_must_be_positive() {
        assert!(Spacing::new(1.0, 0.0, 1.0).is_err());
        assert!(Spacing::new(-1.0, 1.0, 1.0).is_err());
        assert!(Spacing::new(0.7, 0.7, 2.5).is_ok());
    }

    #[test]
    fn indexing_is_x_fastest() {
        let g = Grid::unit([4, 3, 2]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 12);
        assert_eq!(g.coords(g.index(3, 2, 1)), [3, 2, 1]);
    }

    #[test]
    fn identity_resampling() {
        let g = Grid::unit([10, 10, 10]).unwrap();
        let v = ramp_volume(g);
        let r = v.resample_isometric(1.0, Interpolation::Trilinear).unwrap();
        assert_eq!(r, v);
        let r = v.resample_isometric(1.0, Interpolation::Nearest).unwrap();
        assert_eq!(r, v);
    }

    #[test]
    fn nearest_halves_z() {
        let g = Grid::new([10, 10, 20], Spacing::new(1.0, 1.0, 0.5).unwrap(), [0.0; 3]).unwrap();
        let v = ramp_volume(g);
        let r = v.resample_isometric(1.0, Interpolation::Nearest).unwrap();
        assert_eq!(r.grid().dims, [10, 10, 10]);
        for z in 0..10 {
            for y in 0..10 {
                for x in 0..10 {
                    assert_eq!(r.get(x, y, z), v.get(x, y, 2 * z));
                }
            }
        }
    }

    #[test]
    fn constant_volume_stays_constant() {
        let g = Grid::new([7, 5, 9], Spacing::new(0.7, 0.7, 2.5).unwrap(), [1.0, 2.0, -3.0]).unwrap();
        let v = Volume::filled(g, -700);
        let r = v.resample_isometric(1.0, Interpolation::Trilinear).unwrap();
        assert_eq!(r.grid().dims, [5, 4, 23]);
        assert!(r.data().iter().all(|&x| x == -700));
    }

    #[test]
    fn resample_rejects_bad_spacing() {
        let g = Grid::unit([2, 2, 2]).unwrap();
        let m = Mask::empty(g);
        assert!(matches!(m.resample_isometric(0.0), Err(Error::InvalidTargetSpacing(_))));
        assert!(m.resample_isometric(-1.0).is_err());
    }

    #[test]
    fn voi_radius_floor() {
        let c = [1.0, 2.0, 3.0];
        assert_eq!(make_voi(c, 4.0).unwrap().radius, 6.0);
        assert_eq!(make_voi(c, 6.0).unwrap().radius, 6.0);
        assert_eq!(make_voi(c, 14.52).unwrap().radius, 14.52);
        assert_eq!(make_voi(c, 14.52).unwrap().center, c);
        assert!(make_voi(c, 0.0).is_err());
        assert!(make_voi(c, -2.0).is_err());
    }

    #[test]
    fn voi_boundary_inclusion() {
        let g = Grid::unit([21, 21, 21]).unwrap();
        let voi = SphereVoi::new([10.0, 10.0, 10.0], 6.0).unwrap();
        let m = voi_membership(&voi, &g);
        assert!(m.get(16, 10, 10));
        assert!(!m.get(17, 10, 10));
        assert!(m.get(4, 10, 10));
    }

    #[test]
    fn voi_outside_grid_is_empty() {
        let g = Grid::unit([10, 10, 10]).unwrap();
        let voi = SphereVoi::new([40.0, 5.0, 5.0], 6.0).unwrap();
        assert!(voi_membership(&voi, &g).is_empty());
    }

    #[test]
    fn voi_count_matches_enumeration() {
        // brute-force enumeration over a lattice cube
        let mut brute = 0usize;
        for x in -7i32..=7 {
            for y in -7i32..=7 {
                for z in -7i32..=7 {
                    if x * x + y * y + z * z <= 36 {
                        brute += 1;
                    }
                }
            }
        }
        let g = Grid::unit([15, 15, 15]).unwrap();
        let voi = SphereVoi::new([7.0, 7.0, 7.0], 6.0).unwrap();
        let n = voi_membership(&voi, &g).count();
        assert_eq!(n, brute);
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 216.0;
        assert!((n as f64 - analytic).abs() / analytic < 0.05);
    }

    #[test]
    fn crop_and_embed_round_trip() {
        let g = Grid::new([8, 9, 10], Spacing::new(0.5, 0.5, 2.0).unwrap(), [-3.0, 1.0, 4.0]).unwrap();
        let m = Mask::from_indices(g, [g.index(2, 3, 4), g.index(5, 6, 7)]);
        let (lo, hi) = m.bounding_box().unwrap();
        let c = m.crop(lo, hi);
        assert_eq!(c.grid().dims, [4, 4, 4]);
        assert_eq!(c.embed_into(&g).unwrap(), m);
    }

    proptest! {
        #[test]
        fn mask_resampling_stays_binary_and_monotone_voi(
            r1 in 6.0f64..9.0, dr in 0.0f64..3.0,
            cx in 0.0f64..20.0, cy in 0.0f64..20.0, cz in 0.0f64..20.0,
        ) {
            let g = Grid::new([20, 20, 12], Spacing::new(0.7, 0.7, 2.5).unwrap(), [0.0; 3]).unwrap();
            let small = voi_membership(&SphereVoi::new([cx, cy, cz], r1).unwrap(), &g);
            let big = voi_membership(&SphereVoi::new([cx, cy, cz], r1 + dr).unwrap(), &g);
            prop_assert!(small.is_subset_of(&big));
            let rs = small.resample_isometric(1.0).unwrap();
            prop_assert_eq!(rs.grid().spacing, Spacing::isotropic(1.0).unwrap());
        }

        #[test]
        fn nearest_resampling_preserves_sphere_volume(
            r in 5.0f64..8.0,
            ox in 0.0f64..0.7, oz in 0.0f64..2.5,
        ) {
            let g = Grid::new([40, 40, 12], Spacing::new(0.7, 0.7, 2.5).unwrap(), [ox, 0.0, oz]).unwrap();
            let c = [14.0, 14.0, 15.0];
            let mut m = Mask::empty(g);
            for i in 0..g.len() {
                if dist(g.index_center_mm(i), c) <= r {
                    m.data_mut()[i] = true;
                }
            }
            let before = m.physical_volume();
            let after = m.resample_isometric(1.0).unwrap().physical_volume();
            prop_assert!((after - before).abs() / before <= 0.10, "{} vs {}", before, after);
        }
    }
}
