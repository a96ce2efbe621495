//! Exact nearest-neighbour search over trajectory knots with periodic axes.

/// Wrapped per-axis distance: `min(|d|, P − |d|)` on periodic axes.
#[inline]
pub(crate) fn axis_gap(a: f64, b: f64, period: Option<f64>) -> f64 {
    let d = (a - b).abs();
    match period {
        Some(p) => {
            let r = d.rem_euclid(p);
            r.min(p - r)
        }
        None => d,
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64], periods: &[Option<f64>]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        let g = axis_gap(a[k], b[k], periods[k]);
        acc += g * g;
    }
    acc
}

const LEAF: usize = 16;

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Range into `order`.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Static k-d tree returning the same answer as a linear scan ordered by
/// `(distance, key)`, where `key` is the insertion order.
pub struct KdTree {
    dim: usize,
    periods: Vec<Option<f64>>,
    points: Vec<f64>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// `points` are row-major, `dim` values each. Periodic coordinates are
    /// used as given; the bounding boxes handle the wrap.
    pub fn new(points: Vec<f64>, dim: usize, periods: Vec<Option<f64>>) -> Self {
        let count = if dim == 0 { 0 } else { points.len() / dim };
        let mut tree = KdTree {
            dim,
            periods,
            points,
            order: (0..count as u32).collect(),
            nodes: Vec::new(),
        };
        if count > 0 {
            tree.build(0, count);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize * self.dim..(i as usize + 1) * self.dim];
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo: lo.clone(), hi: hi.clone(), start, end, children: None });
        if end - start > LEAF {
            let axis = (0..self.dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = start + (end - start) / 2;
            let (dim, points) = (self.dim, &self.points);
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                points[a as usize * dim + axis]
                    .total_cmp(&points[b as usize * dim + axis])
                    .then(a.cmp(&b))
            });
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    fn box_bound(&self, node: &Node, q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim {
            let (lo, hi) = (node.lo[k], node.hi[k]);
            let g = if q[k] >= lo && q[k] <= hi {
                0.0
            } else {
                match self.periods[k] {
                    None if q[k] < lo => lo - q[k],
                    None => q[k] - hi,
                    Some(p) if hi - lo >= p => 0.0,
                    Some(p) => {
                        // Offset of q along the arc starting at lo.
                        let r = (q[k] - lo).rem_euclid(p);
                        if r <= hi - lo {
                            0.0
                        } else {
                            (r - (hi - lo)).min(p - r)
                        }
                    }
                }
            };
            acc += g * g;
        }
        acc
    }

    /// Key of the nearest point and its squared distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(u32, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, id: usize, q: &[f64], best: &mut (u32, f64)) {
        let node = &self.nodes[id];
        // Rounding in the bound is tiny; the slack keeps the search exact.
        if self.box_bound(node, q) - 1e-20 > best.1 * (1.0 + 1e-12) {
            return;
        }
        match node.children {
            None => {
                for &i in &self.order[node.start..node.end] {
                    let d = squared_distance(self.point(i), q, &self.periods);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Some((l, r)) => {
                let (bl, br) = (self.box_bound(&self.nodes[l], q), self.box_bound(&self.nodes[r], q));
                if bl <= br {
                    self.search(l, q, best);
                    self.search(r, q, best);
                } else {
                    self.search(r, q, best);
                    self.search(l, q, best);
                }
            }
        }
    }
}
