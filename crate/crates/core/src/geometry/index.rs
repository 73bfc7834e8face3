//! Uniform voxel hash used for radius and k-nearest-neighbor queries.

use std::collections::HashMap;

use super::Point3;

type Cell = (i64, i64, i64);

/// Spatial hash over a borrowed point set.
///
/// Queries return indices into the slice the index was built from. Results are
/// sorted by index (radius) or by `(distance, index)` (k-nearest), so callers
/// never observe hash-map iteration order.
pub struct GridIndex<'a> {
    points: &'a [Point3],
    cell_size: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a [Point3], cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, cell_size)).or_default().push(i);
        }
        Self {
            points,
            cell_size,
            cells,
        }
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    /// Indices of all points within `radius` of `query` (inclusive), ascending.
    pub fn within_radius(&self, query: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(query, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Calls `f(index, squared_distance)` for every point within `radius`.
    pub fn for_each_within(&self, query: &Point3, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let reach = (radius / self.cell_size).ceil() as i64;
        let (cx, cy, cz) = cell_of(query, self.cell_size);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in bucket {
                            let d2 = (self.points[i] - query).norm_squared();
                            if d2 <= r2 {
                                f(i, d2);
                            }
                        }
                    }
                }
            }
        }
    }

    /// True if any point lies within `radius` of `query`.
    pub fn any_within(&self, query: &Point3, radius: f64) -> bool {
        let mut hit = false;
        self.for_each_within(query, radius, |_, _| hit = true);
        hit
    }

    /// The `k` nearest points to `query` ordered by `(distance, index)`.
    ///
    /// The query point itself is included when it belongs to the indexed set.
    pub fn nearest(&self, query: &Point3, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let (cx, cy, cz) = cell_of(query, self.cell_size);
        let mut found: Vec<(f64, usize)> = Vec::new();
        let mut ring = 0i64;
        loop {
            // Visit only the shell at Chebyshev distance `ring`.
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in bucket {
                                found.push(((self.points[i] - query).norm_squared(), i));
                            }
                        }
                    }
                }
            }
            // Everything strictly inside `ring * cell_size` has been visited.
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let safe = ring as f64 * self.cell_size;
                if found[k - 1].0 <= safe * safe || found.len() == self.points.len() {
                    return found[..k].iter().map(|&(_, i)| i).collect();
                }
            }
            ring += 1;
        }
    }
}

fn cell_of(p: &Point3, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}
