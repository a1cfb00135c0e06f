//! Grid-hash connected-component clustering of planar points.
//!
//! Points are binned into square cells of edge `radius`; occupied cells
//! that touch (8-neighborhood) belong to the same component. Two points
//! closer than `radius` always share a component; points farther apart
//! than `2*sqrt(2)*radius` never do. Deterministic: output clusters are
//! ordered by their lowest input index.

/// A cluster of input indices.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub indices: Vec<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// 2D centroid over the referenced points.
    pub fn centroid_xy(&self, xy: &[(f64, f64)]) -> (f64, f64) {
        let n = self.indices.len() as f64;
        let (sx, sy) = self
            .indices
            .iter()
            .fold((0.0, 0.0), |(ax, ay), &i| (ax + xy[i].0, ay + xy[i].1));
        (sx / n, sy / n)
    }

    /// Axis-aligned bounding-box extent (max of dx, dy).
    pub fn extent_xy(&self, xy: &[(f64, f64)]) -> f64 {
        let mut b = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &i in &self.indices {
            b.0 = b.0.min(xy[i].0);
            b.1 = b.1.min(xy[i].1);
            b.2 = b.2.max(xy[i].0);
            b.3 = b.3.max(xy[i].1);
        }
        (b.2 - b.0).max(b.3 - b.1)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Attach the larger root index under the smaller for determinism.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Cluster `xy` points with the given linking radius; clusters smaller
/// than `min_points` are dropped.
pub fn cluster_points(xy: &[(f64, f64)], radius: f64, min_points: usize) -> Vec<Cluster> {
    assert!(radius > 0.0, "linking radius must be positive");
    if xy.is_empty() {
        return Vec::new();
    }
    let key = |p: &(f64, f64)| -> (i64, i64) {
        ((p.0 / radius).floor() as i64, (p.1 / radius).floor() as i64)
    };
    let mut cells: std::collections::HashMap<(i64, i64), usize> = std::collections::HashMap::new();
    let mut ds = DisjointSet::new(xy.len());
    for (i, p) in xy.iter().enumerate() {
        let k = key(p);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if let Some(&j) = cells.get(&(k.0 + dx, k.1 + dy)) {
                    ds.union(i, j);
                }
            }
        }
        // One representative per cell is enough: same-cell points were
        // already unioned with it when inserted.
        cells.entry(k).or_insert(i);
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..xy.len() {
        let r = ds.find(i);
        by_root.entry(r).or_default().push(i);
    }
    by_root
        .into_values()
        .filter(|v| v.len() >= min_points)
        .map(|indices| Cluster { indices })
        .collect()
}
