//! Kd-tree with lazy deletion, backing the approximate list-construction
//! backend.
//!
//! `nearest` returns an alive point whose distance is within a factor
//! `(1 + rho)` of the true nearest alive distance: a subtree is only pruned
//! when every point in it is provably farther than `best / (1 + rho)`.
//! Ties and near-ties may therefore resolve differently than an exact scan.

use crate::embedding::{euclidean_sq, EmbeddingModel};

struct Node {
    point: u32,
    axis: u16,
    split: f32,
    left: i32,
    right: i32,
    parent: i32,
    alive: u32,
    dead: bool,
}

pub struct KdTree<'a> {
    model: &'a EmbeddingModel,
    nodes: Vec<Node>,
    node_of_point: Vec<u32>,
    root: i32,
    alive_total: usize,
    // (1 + rho)^2: pruning works on squared distances.
    bound_sq: f64,
}

impl<'a> KdTree<'a> {
    pub fn build(model: &'a EmbeddingModel, rho: f64) -> Self {
        assert!(rho >= 0.0, "rho must be non-negative");
        let n = model.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            model,
            nodes: Vec::with_capacity(n),
            node_of_point: vec![0; n],
            root: -1,
            alive_total: n,
            bound_sq: (1.0 + rho) * (1.0 + rho),
        };
        tree.root = tree.build_range(&mut order, -1);
        tree
    }

    fn build_range(&mut self, order: &mut [u32], parent: i32) -> i32 {
        if order.is_empty() {
            return -1;
        }
        let axis = self.widest_axis(order);
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            let va = self.model.vector(a as usize)[axis];
            let vb = self.model.vector(b as usize)[axis];
            va.partial_cmp(&vb).unwrap().then(a.cmp(&b))
        });
        let point = order[mid];
        let id = self.nodes.len() as i32;
        self.nodes.push(Node {
            point,
            axis: axis as u16,
            split: self.model.vector(point as usize)[axis],
            left: -1,
            right: -1,
            parent,
            alive: order.len() as u32,
            dead: false,
        });
        self.node_of_point[point as usize] = id as u32;
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_range(lo, id);
        let right = self.build_range(&mut hi[1..], id);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    fn widest_axis(&self, order: &[u32]) -> usize {
        let dim = self.model.dim();
        let mut lo = vec![f32::INFINITY; dim];
        let mut hi = vec![f32::NEG_INFINITY; dim];
        for &p in order {
            for (d, &v) in self.model.vector(p as usize).iter().enumerate() {
                if v < lo[d] {
                    lo[d] = v;
                }
                if v > hi[d] {
                    hi[d] = v;
                }
            }
        }
        let mut best = 0;
        let mut spread = -1.0f32;
        for d in 0..dim {
            let s = hi[d] - lo[d];
            if s > spread {
                spread = s;
                best = d;
            }
        }
        best
    }

    pub fn alive(&self) -> usize {
        self.alive_total
    }

    /// Mark a point as used; it will not be returned by later queries.
    pub fn remove(&mut self, point: usize) {
        let mut id = self.node_of_point[point] as i32;
        let node = &mut self.nodes[id as usize];
        assert!(!node.dead, "point removed twice");
        node.dead = true;
        self.alive_total -= 1;
        while id >= 0 {
            self.nodes[id as usize].alive -= 1;
            id = self.nodes[id as usize].parent;
        }
    }

    /// Nearest alive point to `query` under the (1 + rho) contract.
    pub fn nearest(&self, query: &[f32]) -> Option<usize> {
        if self.alive_total == 0 {
            return None;
        }
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(self.root, query, &mut best);
        Some(best.1 as usize)
    }

    fn search(&self, id: i32, query: &[f32], best: &mut (f64, u32)) {
        if id < 0 {
            return;
        }
        let node = &self.nodes[id as usize];
        if node.alive == 0 {
            return;
        }
        if !node.dead {
            let d2 = euclidean_sq(query, self.model.vector(node.point as usize));
            if (d2, node.point) < *best {
                *best = (d2, node.point);
            }
        }
        let diff = query[node.axis as usize] as f64 - node.split as f64;
        let (near, far) = if diff <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, query, best);
        // Every far-side point is at least |diff| away along this axis.
        if diff * diff * self.bound_sq <= best.0 {
            self.search(far, query, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(n: usize, dim: usize, seed: u64) -> EmbeddingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = (0..n).map(|i| format!("w{i}")).collect();
        let vectors = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        EmbeddingModel::from_parts("rand", dim, words, vectors, false).unwrap()
    }

    fn exact_nearest(model: &EmbeddingModel, q: &[f32], alive: &[bool]) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for i in 0..model.len() {
            if !alive[i] {
                continue;
            }
            let d2 = euclidean_sq(q, model.vector(i));
            if (d2, i) < best {
                best = (d2, i);
            }
        }
        best
    }

    #[test]
    fn rho_zero_matches_exact_scan() {
        let model = random_model(200, 4, 7);
        let mut tree = KdTree::build(&model, 0.0);
        let mut alive = vec![true; model.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..150 {
            let q: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let got = tree.nearest(&q).unwrap();
            let (_, want) = exact_nearest(&model, &q, &alive);
            assert_eq!(got, want);
            // remove the found point, as the greedy chain does
            tree.remove(got);
            alive[got] = false;
        }
    }

    #[test]
    fn rho_bound_holds_under_deletions() {
        let model = random_model(300, 6, 11);
        let rho = 0.5;
        let mut tree = KdTree::build(&model, rho);
        let mut alive = vec![true; model.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..250 {
            let q: Vec<f32> = (0..6).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let got = tree.nearest(&q).unwrap();
            assert!(alive[got]);
            let got_d = euclidean_sq(&q, model.vector(got)).sqrt();
            let (true_d2, _) = exact_nearest(&model, &q, &alive);
            assert!(
                got_d <= (1.0 + rho) * true_d2.sqrt() + 1e-9,
                "{got_d} vs {}",
                true_d2.sqrt()
            );
            tree.remove(got);
            alive[got] = false;
        }
    }

    #[test]
    fn exhausts_all_points() {
        let model = random_model(50, 3, 3);
        let mut tree = KdTree::build(&model, 0.0);
        let q = vec![0.0f32; 3];
        let mut seen = std::collections::HashSet::new();
        while tree.alive() > 0 {
            let p = tree.nearest(&q).unwrap();
            assert!(seen.insert(p));
            tree.remove(p);
        }
        assert_eq!(seen.len(), 50);
    }
}
