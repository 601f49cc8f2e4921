//! Synthetic phantoms for benchmarks.

use nodctx_core::{Grid, Mask, Point, Spacing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cube(n: usize) -> Grid {
    Grid::new([n; 3], Spacing::new(1.0, 1.0, 1.0).expect("unit spacing"), [0.0; 3]).expect("nonempty grid")
}

pub fn ball(grid: Grid, c: Point, r: f64) -> Mask {
    let mut m = Mask::empty(grid);
    paint_capsule(&mut m, c, c, r);
    m
}

/// Set every voxel within `r` of the segment `a`–`b`, scanning only its
/// bounding box.
pub fn paint_capsule(m: &mut Mask, a: Point, b: Point, r: f64) {
    let g = *m.grid();
    let lo: Vec<usize> = (0..3).map(|k| (a[k].min(b[k]) - r).floor().max(0.0) as usize).collect();
    let hi: Vec<usize> = (0..3)
        .map(|k| ((a[k].max(b[k]) + r).ceil().max(0.0) as usize).min(g.dims[k] - 1))
        .collect();
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let l2 = ab.iter().map(|v| v * v).sum::<f64>();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let p = [x as f64, y as f64, z as f64];
                let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
                let t = if l2 > 0.0 {
                    ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / l2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d2: f64 = (0..3).map(|k| (ap[k] - t * ab[k]).powi(2)).sum();
                if d2 <= r * r {
                    m.set(x, y, z, true);
                }
            }
        }
    }
}

/// Random branching tree of tapering tubes filling an `n`³ unit grid.
pub fn vessel_tree(n: usize, seed: u64) -> Mask {
    let grid = cube(n);
    let mut m = Mask::empty(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = n as f64;
    let mut stack = vec![([s / 2.0, s / 2.0, 2.0], [0.0, 0.0, 1.0], s / 16.0, 0u32)];
    while let Some((start, dir, r, depth)) = stack.pop() {
        let len = rng.gen_range(0.15..0.3) * s;
        let end = [start[0] + dir[0] * len, start[1] + dir[1] * len, start[2] + dir[2] * len];
        paint_capsule(&mut m, start, end, r);
        if depth >= 5 || r < 1.0 {
            continue;
        }
        for _ in 0..2 {
            let mut d = [
                dir[0] + rng.gen_range(-0.8..0.8),
                dir[1] + rng.gen_range(-0.8..0.8),
                dir[2] + rng.gen_range(-0.8..0.8),
            ];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            d.iter_mut().for_each(|v| *v /= norm);
            stack.push((end, d, r * 0.75, depth + 1));
        }
    }
    m
}

/// Uniform random speckle with the given foreground fraction.
pub fn speckle(n: usize, fraction: f64, seed: u64) -> Mask {
    let grid = cube(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mask::from_indices(grid, (0..grid.len()).filter(|_| rng.gen_bool(fraction)))
}
