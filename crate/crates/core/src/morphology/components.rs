//! Connected-component labeling with 6-, 18- or 26-connectivity.

use crate::volume::{Grid, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Face6,
    Edge18,
    Vertex26,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Connectivity::Face6),
            18 => Some(Connectivity::Edge18),
            26 => Some(Connectivity::Vertex26),
            _ => None,
        }
    }

    /// Whether a nonzero offset is a neighbor under this connectivity.
    pub fn admits(self, d: [i64; 3]) -> bool {
        let nonzero = d.iter().filter(|&&c| c != 0).count();
        let in_cube = d.iter().all(|c| c.abs() <= 1);
        in_cube
            && nonzero > 0
            && match self {
                Connectivity::Face6 => nonzero == 1,
                Connectivity::Edge18 => nonzero <= 2,
                Connectivity::Vertex26 => true,
            }
    }

    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if self.admits([dx, dy, dz]) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets preceding the current voxel in raster order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|d| (d[2], d[1], d[0]) < (0, 0, 0))
            .collect()
    }
}

/// Component labels per voxel: 0 for background, `1..=count` otherwise,
/// numbered in raster order of each component's first voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub grid: Grid,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Labeling {
    /// Voxel indices of each component, ascending; entry `k` is label `k + 1`.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass labeling with union-find over provisional labels.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Labeling {
    let grid = *mask.grid();
    let [nx, ny, nz] = grid.dims;
    let back = connectivity.backward_offsets();
    let mut prov = vec![u32::MAX; grid.len()];
    let mut ds = DisjointSet { parent: Vec::new() };

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if !mask.data()[i] {
                    continue;
                }
                let mut label = u32::MAX;
                for d in &back {
                    let Some(j) = grid.checked_index(x as i64 + d[0], y as i64 + d[1], z as i64 + d[2])
                    else {
                        continue;
                    };
                    let lj = prov[j];
                    if lj == u32::MAX {
                        continue;
                    }
                    if label == u32::MAX {
                        label = lj;
                    } else {
                        ds.union(label, lj);
                    }
                }
                prov[i] = if label == u32::MAX { ds.make() } else { label };
            }
        }
    }

    let mut final_of = vec![0u32; ds.parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; grid.len()];
    for i in 0..grid.len() {
        if prov[i] == u32::MAX {
            continue;
        }
        let r = ds.find(prov[i]) as usize;
        if final_of[r] == 0 {
            count += 1;
            final_of[r] = count;
        }
        labels[i] = final_of[r];
    }
    Labeling {
        grid,
        labels,
        count: count as usize,
    }
}
