//! Axis-aligned bounding-box hierarchy for closest-hit ray queries.

use nalgebra::{Point3, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb { min: Point3::from([f64::INFINITY; 3]), max: Point3::from([f64::NEG_INFINITY; 3]) }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    /// Entry parameter of the ray, or `None` if it misses the box.
    fn entry(&self, orig: &Point3<f64>, inv_dir: &Vector3<f64>) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let ta = (self.min[a] - orig[a]) * inv_dir[a];
            let tb = (self.max[a] - orig[a]) * inv_dir[a];
            // NaN (origin on a slab with a parallel ray) leaves the bounds alone.
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        // Slack keeps boxes whose float bounds round just past a hit.
        (t0 <= t1 * (1.0 + 1e-12) + 1e-300).then_some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(triangles: &[[Point3<f64>; 3]]) -> Self {
        let centroids: Vec<Point3<f64>> =
            triangles.iter().map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0)).collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..triangles.len()).collect() };
        if !triangles.is_empty() {
            bvh.build_node(triangles, &centroids, 0, triangles.len());
        }
        bvh
    }

    fn build_node(&mut self, tris: &[[Point3<f64>; 3]], centroids: &[Point3<f64>], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &f in &self.order[start..end] {
            tris[f].iter().for_each(|p| bounds.grow(p));
            cbounds.grow(&centroids[f]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, len: end - start });
            return id;
        }
        let extent = cbounds.max - cbounds.min;
        let axis = extent.imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, len: 0 });
        let left = self.build_node(tris, centroids, start, mid);
        let right = self.build_node(tris, centroids, mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Closest hit by `(t, face)`; `hit(face)` returns the ray parameter of an
    /// accepted intersection with that face.
    pub fn closest(&self, orig: &Point3<f64>, dir: &Vector3<f64>, hit: impl Fn(usize) -> Option<f64>) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let Some(t_entry) = node.bounds().entry(orig, &inv) else { continue };
            if best.is_some_and(|(bt, _)| t_entry > bt * (1.0 + 1e-9)) {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &f in &self.order[start..start + len] {
                        if let Some(t) = hit(f) {
                            if best.is_none_or(|b| (t, f) < b) {
                                best = Some((t, f));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

/// Brute-force closest hit with the same tie rule as [`Bvh::closest`].
pub fn closest_brute_force(n: usize, hit: impl Fn(usize) -> Option<f64>) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for f in 0..n {
        if let Some(t) = hit(f) {
            if best.is_none_or(|b| (t, f) < b) {
                best = Some((t, f));
            }
        }
    }
    best
}

/// Möller-Trumbore ray/triangle parameter; `None` for parallel rays and misses.
pub fn ray_triangle(orig: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = orig - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}
