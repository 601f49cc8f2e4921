//! Decomposition of a thin skeleton into branches between endpoints and
//! junctions.
//!
//! Junction voxels (three or more 26-neighbors) that touch each other form a
//! junction cluster, treated as one graph node. Each branch leaving a cluster
//! starts at the cluster's representative voxel and walks through the cluster
//! to the arm, so arms meeting at a junction share their first point.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::morphology::components::Connectivity;
use crate::volume::{dist, dist2, Grid, Mask, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    /// Voxel indices along the branch in the skeleton grid.
    pub voxels: Vec<usize>,
    /// Voxel centers in mm, parallel to `voxels`.
    pub polyline: Vec<Point>,
    pub length_mm: f64,
}

impl Branch {
    /// Branch from physical points, without a backing voxel path.
    pub fn from_points(points: Vec<Point>) -> Branch {
        let length_mm = polyline_length(&points);
        Branch {
            voxels: Vec::new(),
            polyline: points,
            length_mm,
        }
    }

    fn from_voxels(grid: &Grid, voxels: Vec<usize>) -> Branch {
        let polyline: Vec<Point> = voxels.iter().map(|&i| grid.index_center_mm(i)).collect();
        let length_mm = polyline_length(&polyline);
        Branch {
            voxels,
            polyline,
            length_mm,
        }
    }

    pub fn first(&self) -> Point {
        self.polyline[0]
    }

    pub fn last(&self) -> Point {
        *self.polyline.last().expect("branch has at least one point")
    }

    pub fn len(&self) -> usize {
        self.polyline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polyline.is_empty()
    }

    /// Endpoint nearer to `p`, and whether it is the last point.
    pub fn end_nearer(&self, p: Point) -> (Point, bool) {
        let (a, b) = (self.first(), self.last());
        if dist2(b, p) < dist2(a, p) {
            (b, true)
        } else {
            (a, false)
        }
    }

    fn sort_key(&self) -> (usize, usize, usize) {
        match (self.voxels.first(), self.voxels.last()) {
            (Some(&a), Some(&b)) => (a.min(b), a.max(b), self.voxels.len()),
            _ => (usize::MAX, usize::MAX, self.polyline.len()),
        }
    }
}

fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).fold(0.0, |acc, w| acc + dist(w[0], w[1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct SkeletonNode {
    pub voxel: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkeletonGraph {
    pub grid: Grid,
    pub nodes: Vec<SkeletonNode>,
    pub branches: Vec<Branch>,
}

impl SkeletonGraph {
    pub fn junctions(&self) -> impl Iterator<Item = &SkeletonNode> {
        self.nodes.iter().filter(|n| n.degree >= 3)
    }
}

struct Neighbors<'a> {
    grid: &'a Grid,
    on: &'a HashSet<usize>,
    offsets: Vec<[i64; 3]>,
}

impl Neighbors<'_> {
    /// Skeleton neighbors of `i`, face neighbors first, then by index.
    fn of(&self, i: usize) -> Vec<usize> {
        let c = self.grid.coords(i);
        let mut out: Vec<(usize, usize)> = self
            .offsets
            .iter()
            .filter_map(|d| {
                let j = self
                    .grid
                    .checked_index(c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2])?;
                let nz = d.iter().filter(|&&v| v != 0).count();
                self.on.contains(&j).then_some((nz, j))
            })
            .collect();
        out.sort_unstable();
        out.into_iter().map(|(_, j)| j).collect()
    }
}

/// Split a thin skeleton into maximal simple paths.
pub fn extract_branches(skeleton: &Mask) -> SkeletonGraph {
    let grid = *skeleton.grid();
    let voxels: Vec<usize> = skeleton.indices().collect();
    let on: HashSet<usize> = voxels.iter().copied().collect();
    let nbrs = Neighbors {
        grid: &grid,
        on: &on,
        offsets: Connectivity::Vertex26.offsets(),
    };
    let adjacency: HashMap<usize, Vec<usize>> = voxels.iter().map(|&i| (i, nbrs.of(i))).collect();
    let degree = |i: usize| adjacency[&i].len();
    let is_junction = |i: usize| degree(i) >= 3;

    let nodes: Vec<SkeletonNode> = voxels
        .iter()
        .map(|&i| SkeletonNode {
            voxel: i,
            degree: degree(i),
        })
        .collect();

    // junction clusters and their representative voxel
    let mut cluster_of: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &j in voxels.iter().filter(|&&i| is_junction(i)) {
        if cluster_of.contains_key(&j) {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![j];
        cluster_of.insert(j, id);
        let mut k = 0;
        while k < members.len() {
            for &n in &adjacency[&members[k]] {
                if is_junction(n) && !cluster_of.contains_key(&n) {
                    cluster_of.insert(n, id);
                    members.push(n);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        clusters.push(members);
    }
    let reps: Vec<usize> = clusters
        .iter()
        .map(|m| representative(&grid, m, &adjacency))
        .collect();

    // path inside a cluster from its representative to `target`
    let cluster_path = |target: usize| -> Vec<usize> {
        let cid = cluster_of[&target];
        let rep = reps[cid];
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([rep]);
        prev.insert(rep, rep);
        while let Some(c) = queue.pop_front() {
            if c == target {
                break;
            }
            for &n in &adjacency[&c] {
                if cluster_of.get(&n) == Some(&cid) && !prev.contains_key(&n) {
                    prev.insert(n, c);
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![target];
        let mut c = target;
        while c != rep {
            c = prev[&c];
            path.push(c);
        }
        path.reverse();
        path
    };

    let mut visited: HashSet<usize> = HashSet::new();
    let mut branches: Vec<Vec<usize>> = Vec::new();

    // Walk from `start` (non-junction) away from `from`, until an endpoint or
    // a junction. Returns the walked voxels and the junction reached, if any.
    let walk = |start: usize, from: Option<usize>, visited: &mut HashSet<usize>| {
        let mut path = vec![start];
        visited.insert(start);
        let mut prev = from;
        let mut cur = start;
        loop {
            let adj = &adjacency[&cur];
            if let Some(&next) = adj
                .iter()
                .find(|&&n| Some(n) != prev && !is_junction(n) && !visited.contains(&n))
            {
                visited.insert(next);
                path.push(next);
                prev = Some(cur);
                cur = next;
                continue;
            }
            let junction = adj
                .iter()
                .copied()
                .find(|&n| is_junction(n) && (Some(n) != prev || path.len() > 1));
            return (path, junction);
        }
    };

    // arms leaving junction clusters
    for (cid, members) in clusters.iter().enumerate() {
        for &j in members {
            for &n in &adjacency[&j] {
                if is_junction(n) || visited.contains(&n) {
                    continue;
                }
                let (arm, end_junction) = walk(n, Some(j), &mut visited);
                let mut path = cluster_path(j);
                path.extend(arm);
                if let Some(e) = end_junction {
                    let mut tail = cluster_path(e);
                    tail.reverse();
                    path.extend(tail);
                }
                branches.push(path);
            }
        }
        // a cluster without arms becomes a branch of its own
        if members.iter().all(|&j| adjacency[&j].iter().all(|&n| is_junction(n))) {
            let rep = reps[cid];
            let mut path = vec![rep];
            path.extend(members.iter().copied().filter(|&m| m != rep));
            branches.push(path);
        }
    }

    // simple open paths starting at endpoints, then isolated voxels
    for &i in &voxels {
        if visited.contains(&i) || is_junction(i) || degree(i) > 1 {
            continue;
        }
        let (path, _) = walk(i, None, &mut visited);
        branches.push(path);
    }

    // remaining non-junction voxels lie on cycles
    for &i in &voxels {
        if visited.contains(&i) || is_junction(i) {
            continue;
        }
        let (mut path, _) = walk(i, None, &mut visited);
        if path.len() > 1 && adjacency[path.last().unwrap()].contains(&i) {
            path.push(i);
        }
        branches.push(path);
    }

    let mut branches: Vec<Branch> = branches
        .into_iter()
        .map(|v| Branch::from_voxels(&grid, v))
        .collect();
    branches.sort_by_key(|b| b.sort_key());
    SkeletonGraph {
        grid,
        nodes,
        branches,
    }
}

/// Cluster voxel nearest the cluster centroid; ties go to the higher degree,
/// then the lower index.
fn representative(grid: &Grid, members: &[usize], adjacency: &HashMap<usize, Vec<usize>>) -> usize {
    let n = members.len() as f64;
    let mut c = [0.0; 3];
    for &m in members {
        let p = grid.index_center_mm(m);
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    *members
        .iter()
        .min_by(|&&a, &&b| {
            dist2(grid.index_center_mm(a), c)
                .partial_cmp(&dist2(grid.index_center_mm(b), c))
                .unwrap()
                .then(adjacency[&b].len().cmp(&adjacency[&a].len()))
                .then(a.cmp(&b))
        })
        .expect("cluster is nonempty")
}
