//! Self-avoiding-walk tree over a graph, materialized lazily.
//!
//! A node is a walk `v1..vk` whose prefix `v1..v(k-1)` is vertex-distinct;
//! the final vertex may revisit the path, which terminates the walk. The
//! tree rooted at a query vertex has one child per admissible extension of
//! the walk, and marginal ratios computed on it match the ratios of the
//! underlying graph once terminal walks are fixed to the right colors:
//!
//! * a walk ending at a pinned vertex terminates with that pin's color
//!   (pins take precedence over everything else),
//! * a walk whose final step revisits a path vertex `w` terminates, fixed
//!   blue when `w`'s successor along the path has a larger index than the
//!   walk's previous endpoint, fixed green otherwise,
//! * immediate backtracking (returning to the predecessor) is not a child.
//!
//! Children are produced in ascending neighbor order, so traversals are
//! deterministic for a given adjacency structure.

use crate::graph::{Color, Graph, PinSet};
use crate::{Error, Result};

/// Terminal state of a walk endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Free,
    FixedBlue,
    FixedGreen,
}

impl NodeStatus {
    pub fn is_free(self) -> bool {
        self == NodeStatus::Free
    }

    pub fn fixed_color(self) -> Option<Color> {
        match self {
            NodeStatus::Free => None,
            NodeStatus::FixedBlue => Some(Color::Blue),
            NodeStatus::FixedGreen => Some(Color::Green),
        }
    }

    fn from_pin(color: Color) -> NodeStatus {
        match color {
            Color::Blue => NodeStatus::FixedBlue,
            Color::Green => NodeStatus::FixedGreen,
        }
    }
}

/// One walk in the tree: the vertex sequence plus a membership bitset for
/// O(1) revisit detection.
#[derive(Debug, Clone)]
pub struct WalkNode {
    path: Vec<u32>,
    in_path: Box<[u64]>,
    status: NodeStatus,
}

impl WalkNode {
    /// The walk's final vertex.
    pub fn end(&self) -> u32 {
        *self.path.last().expect("walk is never empty")
    }

    /// Number of steps taken from the root.
    pub fn depth(&self) -> usize {
        self.path.len() - 1
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    pub fn status(&self) -> NodeStatus {
        self.status
    }

    pub fn is_free(&self) -> bool {
        self.status.is_free()
    }

    fn contains(&self, v: u32) -> bool {
        self.in_path[(v / 64) as usize] & (1u64 << (v % 64)) != 0
    }
}

/// The children of a free walk node: extensions that stay free, plus counts
/// of terminal children by fixed color. Terminal children carry no further
/// structure, so only their multiplicities are kept. A blue-fixed child
/// contributes a factor `beta` to the parent's ratio and a green-fixed child
/// a factor `1/gamma`.
#[derive(Debug, Default)]
pub struct ChildSet {
    pub free: Vec<WalkNode>,
    pub fixed_blue: u32,
    pub fixed_green: u32,
}

impl ChildSet {
    /// Total child count, the quantity depth budgeting charges for.
    pub fn total(&self) -> u32 {
        self.free.len() as u32 + self.fixed_blue + self.fixed_green
    }
}

/// Starts a walk tree at `v`. The root carries `v`'s pin status if any; the
/// caller decides whether a fixed root is acceptable for its query.
pub fn root(graph: &Graph, pins: &PinSet, v: u32) -> Result<WalkNode> {
    if v >= graph.n() as u32 {
        return Err(Error::InvalidInput(format!(
            "walk root {v} out of range for a graph on {} vertices",
            graph.n()
        )));
    }
    let words = (graph.n() + 63) / 64;
    let mut in_path = vec![0u64; words].into_boxed_slice();
    in_path[(v / 64) as usize] |= 1u64 << (v % 64);
    let status = pins.get(v).map_or(NodeStatus::Free, NodeStatus::from_pin);
    Ok(WalkNode { path: vec![v], in_path, status })
}

/// Enumerates the children of a free walk node in ascending neighbor order.
pub fn expand(graph: &Graph, pins: &PinSet, node: &WalkNode) -> ChildSet {
    debug_assert!(node.is_free(), "fixed walks are leaves");
    let u = node.end();
    let prev = if node.path.len() >= 2 {
        Some(node.path[node.path.len() - 2])
    } else {
        None
    };
    let mut out = ChildSet::default();
    for &w in graph.neighbors(u) {
        if Some(w) == prev {
            continue;
        }
        let status = if let Some(color) = pins.get(w) {
            // Pins terminate the walk regardless of how it arrived.
            NodeStatus::from_pin(color)
        } else if node.contains(w) {
            // Revisiting w closes a cycle; the tie is broken by comparing
            // w's successor along the path against the walk's endpoint.
            let i = node.path.iter().position(|&p| p == w).expect("w is on the path");
            let successor = node.path[i + 1];
            if successor > u {
                NodeStatus::FixedBlue
            } else {
                NodeStatus::FixedGreen
            }
        } else {
            NodeStatus::Free
        };
        match status {
            NodeStatus::FixedBlue => out.fixed_blue += 1,
            NodeStatus::FixedGreen => out.fixed_green += 1,
            NodeStatus::Free => {
                let mut path = Vec::with_capacity(node.path.len() + 1);
                path.extend_from_slice(&node.path);
                path.push(w);
                let mut in_path = node.in_path.clone();
                in_path[(w / 64) as usize] |= 1u64 << (w % 64);
                out.free.push(WalkNode { path, in_path, status: NodeStatus::Free });
            }
        }
    }
    out
}

// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, PinSet};

    fn triangle() -> Graph {
        Graph::complete(3)
    }

    #[test]
    fn triangle_walks_close_with_opposite_colors() {
        let g = triangle();
        let pins = PinSet::new();
        let r = root(&g, &pins, 0).unwrap();
        assert!(r.is_free());
        let c = expand(&g, &pins, &r);
        assert_eq!(c.free.len(), 2);
        assert_eq!((c.fixed_blue, c.fixed_green), (0, 0));
        assert_eq!(c.free[0].path(), &[0, 1]);
        assert_eq!(c.free[1].path(), &[0, 2]);

        // 0-1-2 then back to 0: successor of 0 is 1, endpoint is 2, so the
        // closure fixes green. 0-2-1 then back to 0: successor 2 > endpoint
        // 1, so it fixes blue.
        let c01 = expand(&g, &pins, &c.free[0]);
        assert_eq!(c01.free.len(), 1);
        assert_eq!(c01.free[0].path(), &[0, 1, 2]);
        let c012 = expand(&g, &pins, &c01.free[0]);
        assert!(c012.free.is_empty());
        assert_eq!((c012.fixed_blue, c012.fixed_green), (0, 1));

        let c02 = expand(&g, &pins, &c.free[1]);
        let c021 = expand(&g, &pins, &c02.free[0]);
        assert!(c021.free.is_empty());
        assert_eq!((c021.fixed_blue, c021.fixed_green), (1, 0));
    }

    #[test]
    fn star_center_has_leaf_children_that_dead_end() {
        let g = Graph::star(9);
        let pins = PinSet::new();
        let r = root(&g, &pins, 0).unwrap();
        let c = expand(&g, &pins, &r);
        assert_eq!(c.free.len(), 9);
        assert_eq!(c.total(), 9);
        let ends: Vec<u32> = c.free.iter().map(|n| n.end()).collect();
        assert_eq!(ends, (1..=9).collect::<Vec<u32>>());
        for leaf in &c.free {
            let sub = expand(&g, &pins, leaf);
            assert_eq!(sub.total(), 0, "leaf walks only backtrack");
        }
    }

    #[test]
    fn pinned_neighbors_terminate_the_walk() {
        let g = Graph::path(3);
        let pins = PinSet::from_pairs(&[(0, Color::Blue)]);
        let r = root(&g, &pins, 1).unwrap();
        let c = expand(&g, &pins, &r);
        assert_eq!(c.free.len(), 1);
        assert_eq!(c.free[0].end(), 2);
        assert_eq!((c.fixed_blue, c.fixed_green), (1, 0));
    }

    #[test]
    fn pins_take_precedence_over_cycle_closure() {
        // Walk 0-1-2 in a triangle with 0 pinned blue: the closure back to 0
        // would fix green, but the pin wins.
        let g = triangle();
        let pins = PinSet::from_pairs(&[(0, Color::Blue)]);
        let r = root(&g, &pins, 0).unwrap();
        assert_eq!(r.status(), NodeStatus::FixedBlue);
        let walk01 = {
            let free_root = root(&g, &PinSet::new(), 0).unwrap();
            expand(&g, &PinSet::new(), &free_root).free.remove(0)
        };
        let walk012 = expand(&g, &pins, &walk01).free.remove(0);
        let closed = expand(&g, &pins, &walk012);
        assert_eq!((closed.fixed_blue, closed.fixed_green), (1, 0));
    }

    #[test]
    fn immediate_backtracking_is_skipped() {
        let g = Graph::path(3);
        let pins = PinSet::new();
        let r = root(&g, &pins, 0).unwrap();
        let c = expand(&g, &pins, &r);
        assert_eq!(c.free.len(), 1);
        let mid = &c.free[0];
        let c2 = expand(&g, &pins, mid);
        // Neighbor 0 is the predecessor: skipped, not a cycle closure.
        assert_eq!(c2.free.len(), 1);
        assert_eq!(c2.free[0].path(), &[0, 1, 2]);
        assert_eq!(c2.total(), 1);
    }

    #[test]
    fn root_rejects_out_of_range_vertices() {
        let g = Graph::path(3);
        assert!(root(&g, &PinSet::new(), 3).is_err());
    }
}
