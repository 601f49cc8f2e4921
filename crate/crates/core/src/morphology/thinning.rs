//! Topology-preserving 3-D thinning to one-voxel-wide centerlines.
//!
//! Border voxels are peeled in six directional subiterations. A voxel is
//! removed only if it is a simple point under (26, 6) connectivity and is not
//! a curve endpoint, and only if some object voxel lies on its inner side.
//! Candidates found in a subiteration are re-checked one at
//! a time against the current image before removal, which keeps the
//! component count and the tunnel/cavity structure unchanged.

use std::sync::OnceLock;

use crate::volume::{Grid, Mask};

const CENTER: usize = 13;

/// Subiteration order: the direction whose neighbor must be background.
const DIRECTIONS: [[i64; 3]; 6] = [
    [0, -1, 0],
    [0, 1, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 0, 1],
    [0, 0, -1],
];

#[inline]
fn cube_index(d: [i64; 3]) -> usize {
    ((d[2] + 1) * 9 + (d[1] + 1) * 3 + (d[0] + 1)) as usize
}

fn cube_offset(j: usize) -> [i64; 3] {
    [(j % 3) as i64 - 1, ((j / 3) % 3) as i64 - 1, (j / 9) as i64 - 1]
}

struct CubeTables {
    adj26: Vec<Vec<usize>>,
    adj6: Vec<Vec<usize>>,
    in_n18: [bool; 27],
    face: [bool; 27],
}

fn tables() -> &'static CubeTables {
    static T: OnceLock<CubeTables> = OnceLock::new();
    T.get_or_init(|| {
        let mut adj26 = vec![Vec::new(); 27];
        let mut adj6 = vec![Vec::new(); 27];
        let mut in_n18 = [false; 27];
        let mut face = [false; 27];
        for j in 0..27 {
            let a = cube_offset(j);
            let nz = a.iter().filter(|&&c| c != 0).count();
            in_n18[j] = nz <= 2 && j != CENTER;
            face[j] = nz == 1;
            for k in 0..27 {
                if k == j || k == CENTER || j == CENTER {
                    continue;
                }
                let b = cube_offset(k);
                let d: Vec<i64> = (0..3).map(|i| (a[i] - b[i]).abs()).collect();
                if d.iter().all(|&c| c <= 1) {
                    adj26[j].push(k);
                    if d.iter().sum::<i64>() == 1 {
                        adj6[j].push(k);
                    }
                }
            }
        }
        CubeTables {
            adj26,
            adj6,
            in_n18,
            face,
        }
    })
}

/// Number of 26-connected foreground components in the 26-neighborhood.
fn foreground_components(nb: &[bool; 27]) -> usize {
    let t = tables();
    let mut seen = [false; 27];
    let mut stack = Vec::with_capacity(26);
    let mut n = 0;
    for s in 0..27 {
        if s == CENTER || !nb[s] || seen[s] {
            continue;
        }
        n += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(j) = stack.pop() {
            for &k in &t.adj26[j] {
                if nb[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    n
}

/// Number of 6-connected background components within the 18-neighborhood
/// that touch a face neighbor of the center.
fn background_components(nb: &[bool; 27]) -> usize {
    let t = tables();
    let mut seen = [false; 27];
    let mut stack = Vec::with_capacity(18);
    let mut n = 0;
    for s in 0..27 {
        if !t.face[s] || nb[s] || seen[s] {
            continue;
        }
        n += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(j) = stack.pop() {
            for &k in &t.adj6[j] {
                if t.in_n18[k] && !nb[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    n
}

/// Removing the center voxel leaves the topology unchanged.
pub fn is_simple_point(nb: &[bool; 27]) -> bool {
    foreground_components(nb) == 1 && background_components(nb) == 1
}

fn neighborhood(img: &[bool], grid: &Grid, i: usize) -> [bool; 27] {
    let c = grid.coords(i);
    let mut nb = [false; 27];
    for (j, slot) in nb.iter_mut().enumerate() {
        let d = cube_offset(j);
        *slot = grid
            .checked_index(c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2])
            .map(|k| img[k])
            .unwrap_or(false);
    }
    nb
}

fn neighbor_count(nb: &[bool; 27]) -> usize {
    nb.iter()
        .enumerate()
        .filter(|&(j, &b)| j != CENTER && b)
        .count()
}

/// Whether some object voxel lies on the inner side of a border facing
/// `dir`. Voxels that are one voxel thin along `dir` are left for the other
/// directions, so a thin remnant is never eaten along its length.
fn has_inner_neighbor(nb: &[bool; 27], dir: [i64; 3]) -> bool {
    (0..27).any(|j| {
        let o = cube_offset(j);
        j != CENTER && nb[j] && o[0] * dir[0] + o[1] * dir[1] + o[2] * dir[2] < 0
    })
}

/// Thin `mask` to a curve skeleton. The result is a subset of the input, has
/// the same 26-connected components, and is a fixed point of this function.
pub fn skeletonize(mask: &Mask) -> Mask {
    let grid = *mask.grid();
    let mut img = mask.data().to_vec();
    let mut active: Vec<usize> = mask.indices().collect();
    let mut candidates = Vec::new();

    loop {
        let mut removed = 0usize;
        for dir in DIRECTIONS {
            let border = cube_index(dir);
            candidates.clear();
            for &i in &active {
                if !img[i] {
                    continue;
                }
                let nb = neighborhood(&img, &grid, i);
                if nb[border] || neighbor_count(&nb) <= 1 || !has_inner_neighbor(&nb, dir) || !is_simple_point(&nb) {
                    continue;
                }
                candidates.push(i);
            }
            for &i in &candidates {
                let nb = neighborhood(&img, &grid, i);
                if has_inner_neighbor(&nb, dir) && is_simple_point(&nb) {
                    img[i] = false;
                    removed += 1;
                }
            }
            if !candidates.is_empty() {
                active.retain(|&i| img[i]);
            }
        }
        if removed == 0 {
            break;
        }
    }
    Mask::new(grid, img).expect("grid unchanged")
}
