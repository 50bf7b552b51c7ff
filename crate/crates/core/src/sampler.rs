/// Complete binary sum tree over non-negative weights.
///
/// Supports drawing an index proportionally to its weight and zeroing a weight,
/// both in `O(log n)`. Internal nodes are recomputed from their children on
/// every update, so sums never drift.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().max(1).next_power_of_two();
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + weights.len()].copy_from_slice(weights);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { leaves, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.nodes[self.leaves + index]
    }

    pub fn set(&mut self, index: usize, weight: f64) {
        let mut i = self.leaves + index;
        self.nodes[i] = weight;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Index whose cumulative weight interval contains `target`, for
    /// `target` in `[0, total)`. Never returns a zero-weight leaf while the
    /// total is positive.
    pub fn find(&self, target: f64) -> usize {
        let mut i = 1;
        let mut rest = target;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            let right = self.nodes[2 * i + 1];
            if right <= 0.0 || (rest < left && left > 0.0) {
                i *= 2;
            } else {
                rest -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_intervals() {
        let tree = SumTree::new(&[1.0, 0.0, 2.0, 1.0, 0.5]);
        assert_eq!(tree.total(), 4.5);
        assert_eq!(tree.find(0.0), 0);
        assert_eq!(tree.find(0.999), 0);
        assert_eq!(tree.find(1.0), 2);
        assert_eq!(tree.find(2.999), 2);
        assert_eq!(tree.find(3.5), 3);
        assert_eq!(tree.find(4.2), 4);
    }

    #[test]
    fn zeroed_leaves_are_skipped() {
        let mut tree = SumTree::new(&[1.0, 1.0, 1.0]);
        tree.set(1, 0.0);
        assert_eq!(tree.total(), 2.0);
        assert_eq!(tree.find(1.0), 2);
        tree.set(2, 0.0);
        // Rounding can push the target to the total; it must still land on a live leaf.
        assert_eq!(tree.find(1.0), 0);
        assert_eq!(tree.find(5.0), 0);
    }
}
