use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::matrix::WeightMatrix;

fn adjacency(w: &WeightMatrix, zero_tol: f64) -> Vec<Vec<bool>> {
    let d = w.d();
    (0..d).map(|i| (0..d).map(|j| i != j && w.get(i, j).abs() > zero_tol).collect()).collect()
}

/// Kahn's algorithm with smallest-index tie-breaking. On failure returns the
/// nodes that could not be ordered.
fn kahn(adj: &[Vec<bool>]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let d = adj.len();
    let mut indeg: Vec<usize> = (0..d).map(|j| (0..d).filter(|&i| adj[i][j]).count()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..d).filter(|&j| indeg[j] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for j in 0..d {
            if adj[i][j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
    }
    if order.len() == d {
        Ok(order)
    } else {
        Err((0..d).filter(|&j| indeg[j] > 0).collect())
    }
}

/// Extracts one cycle among `remaining`, where every node has a predecessor in the set.
fn cycle_in(adj: &[Vec<bool>], remaining: &[usize]) -> Vec<usize> {
    let d = adj.len();
    let mut in_set = vec![false; d];
    for &r in remaining {
        in_set[r] = true;
    }
    let mut pos = vec![usize::MAX; d];
    let mut walk = Vec::new();
    let mut cur = remaining[0];
    // Walk backwards along smallest-index predecessors until a node repeats.
    while pos[cur] == usize::MAX {
        pos[cur] = walk.len();
        walk.push(cur);
        cur = (0..d).find(|&p| in_set[p] && adj[p][cur]).expect("every unordered node has an unordered predecessor");
    }
    let mut cycle = walk[pos[cur]..].to_vec();
    cycle.reverse();
    // Rotate so the smallest node comes first.
    let k = cycle.iter().enumerate().min_by_key(|(_, v)| **v).map(|(k, _)| k).unwrap_or(0);
    cycle.rotate_left(k);
    cycle
}

/// A directed cycle in the support of `w` (nodes in edge order), if any.
pub fn find_cycle(w: &WeightMatrix, zero_tol: f64) -> Option<Vec<usize>> {
    let adj = adjacency(w, zero_tol);
    kahn(&adj).err().map(|rest| cycle_in(&adj, &rest))
}

/// Topological order of the support of `w`; ties go to the smaller index.
pub fn topological_order(w: &WeightMatrix, zero_tol: f64) -> Result<Vec<usize>> {
    let adj = adjacency(w, zero_tol);
    kahn(&adj).map_err(|rest| Error::CyclicGraph { cycle: cycle_in(&adj, &rest) })
}

/// Zeros entries with `|w| ≤ zero_tol`, then repeatedly deletes the weakest edge
/// of a remaining cycle until the support is acyclic.
pub fn repair_to_dag(w: &WeightMatrix, zero_tol: f64) -> WeightMatrix {
    let mut out = w.as_array().mapv(|x| if x.abs() > zero_tol { x } else { 0.0 });
    loop {
        let current = WeightMatrix::new(out.clone()).expect("repair keeps a valid matrix");
        let Some(cycle) = find_cycle(&current, zero_tol) else {
            return current;
        };
        let (i, j) = (0..cycle.len())
            .map(|k| (cycle[k], cycle[(k + 1) % cycle.len()]))
            .min_by(|a, b| out[[a.0, a.1]].abs().total_cmp(&out[[b.0, b.1]].abs()))
            .expect("cycles have at least two edges");
        log::debug!("repair_to_dag: removing edge {i}->{j} (w = {})", out[[i, j]]);
        out[[i, j]] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn wm(a: Array2<f64>) -> WeightMatrix {
        WeightMatrix::new(a).unwrap()
    }

    #[test]
    fn chain_order() {
        let w = wm(array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]);
        assert_eq!(topological_order(&w, 0.0).unwrap(), vec![0, 1, 2]);
        let rev = wm(array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(topological_order(&rev, 0.0).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn empty_graph_orders_by_index() {
        assert_eq!(topological_order(&WeightMatrix::zeros(4), 0.0).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_cycle_is_reported() {
        let w = wm(array![[0.0, 0.9, 0.0], [0.1, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        match topological_order(&w, 0.0) {
            Err(Error::CyclicGraph { cycle }) => assert_eq!(cycle, vec![0, 1]),
            other => panic!("expected cycle, got {other:?}"),
        }
        // Below the tolerance the back edge is ignored.
        assert!(topological_order(&w, 0.2).is_ok());
    }

    #[test]
    fn reported_cycle_is_a_real_cycle() {
        let w = wm(array![[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 0.0]]);
        let c = find_cycle(&w, 0.0).unwrap();
        assert_eq!(c, vec![1, 2, 3]);
    }

    #[test]
    fn repair_removes_weakest_edge() {
        let w = wm(array![[0.0, 0.9], [0.1, 0.0]]);
        let r = repair_to_dag(&w, 0.0);
        assert_eq!(r.as_array(), &array![[0.0, 0.9], [0.0, 0.0]]);
    }

    #[test]
    fn repair_keeps_dags() {
        let w = wm(array![[0.0, 0.5, 1e-12], [0.0, 0.0, -2.0], [0.0, 0.0, 0.0]]);
        let r = repair_to_dag(&w, 1e-8);
        assert_eq!(r.as_array(), &array![[0.0, 0.5, 0.0], [0.0, 0.0, -2.0], [0.0, 0.0, 0.0]]);
    }

    #[test]
    fn repair_three_cycle_with_chord_is_minimal() {
        // 0→1→2→0 plus chord 0→2; greedy first cuts 2→0 (0.2) which breaks both cycles.
        let w = wm(array![[0.0, 1.0, 0.7], [0.0, 0.0, 0.8], [0.2, 0.0, 0.0]]);
        let r = repair_to_dag(&w, 0.0);
        assert!(topological_order(&r, 0.0).is_ok());
        let removed: f64 = (w.as_array() - r.as_array()).iter().map(|x| x.abs()).sum();

        // Exhaustive oracle over all edge subsets to delete.
        let edges = w.edges(0.0);
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << edges.len()) {
            let mut a = w.as_array().clone();
            let mut cost = 0.0;
            for (k, &(i, j, x)) in edges.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    a[[i, j]] = 0.0;
                    cost += x.abs();
                }
            }
            if topological_order(&wm(a), 0.0).is_ok() {
                best = best.min(cost);
            }
        }
        assert!((removed - best).abs() < 1e-12);
    }
}
