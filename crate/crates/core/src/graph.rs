//! Directed graphs `(X, E)` carrying a Markov chain.
//!
//! Every vectorized quantity in the crate (edge functions, expectation
//! points, gradients, Hessians) is laid out in the canonical edge order
//! held by [`ChainGraph`]: lexicographic by `(source, target)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A validated, strongly connected directed graph over states `0..num_states`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainGraph {
    num_states: usize,
    edges: Vec<(usize, usize)>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl ChainGraph {
    /// Builds a graph, sorting the edges into canonical order.
    ///
    /// Self-loops are allowed. Duplicate edges and graphs that are not
    /// strongly connected are rejected.
    pub fn new(num_states: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_states < 2 {
            return Err(Error::TooFewStates(num_states));
        }
        check_range(num_states, edges)?;
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        if let Some((from, to)) = unreachable_pair(num_states, &sorted) {
            return Err(Error::NotStronglyConnected { from, to });
        }

        let mut outgoing = vec![Vec::new(); num_states];
        let mut incoming = vec![Vec::new(); num_states];
        for (k, &(x, y)) in sorted.iter().enumerate() {
            outgoing[x].push(k);
            incoming[y].push(k);
        }
        Ok(Self {
            num_states,
            edges: sorted,
            outgoing,
            incoming,
        })
    }

    /// The complete graph `X × X`, self-loops included.
    pub fn complete(num_states: usize) -> Result<Self> {
        let edges: Vec<_> = (0..num_states)
            .flat_map(|x| (0..num_states).map(move |y| (x, y)))
            .collect();
        Self::new(num_states, &edges)
    }

    /// The directed cycle `0 → 1 → … → n-1 → 0`.
    pub fn cycle(num_states: usize) -> Result<Self> {
        let edges: Vec<_> = (0..num_states)
            .map(|x| (x, (x + 1) % num_states))
            .collect();
        Self::new(num_states, &edges)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Position of `(x, y)` in the canonical order, if it is an edge.
    pub fn edge_index(&self, x: usize, y: usize) -> Option<usize> {
        self.edges.binary_search(&(x, y)).ok()
    }

    /// Like [`edge_index`](Self::edge_index) but reports unknown edges as errors.
    pub fn require_edge(&self, x: usize, y: usize) -> Result<usize> {
        self.edge_index(x, y).ok_or(Error::UnknownEdge(x, y))
    }

    /// Positions of the edges leaving `x`.
    pub fn outgoing(&self, x: usize) -> &[usize] {
        &self.outgoing[x]
    }

    /// Positions of the edges entering `x`.
    pub fn incoming(&self, x: usize) -> &[usize] {
        &self.incoming[x]
    }

    pub fn check_state(&self, x: usize) -> Result<()> {
        if x < self.num_states {
            Ok(())
        } else {
            Err(Error::OutOfRangeState {
                state: x,
                num_states: self.num_states,
            })
        }
    }

    /// The graph with every edge reversed.
    pub fn reversed(&self) -> Self {
        let edges: Vec<_> = self.edges.iter().map(|&(x, y)| (y, x)).collect();
        // Reversal preserves strong connectivity and distinctness.
        Self::new(self.num_states, &edges).expect("reversal of a valid graph")
    }
}

/// True iff every ordered pair of states is joined by a directed path.
pub fn strongly_connected(num_states: usize, edges: &[(usize, usize)]) -> Result<bool> {
    check_range(num_states, edges)?;
    if num_states == 0 {
        return Ok(true);
    }
    Ok(tarjan_component_count(num_states, edges) == 1)
}

fn check_range(num_states: usize, edges: &[(usize, usize)]) -> Result<()> {
    for &(x, y) in edges {
        for s in [x, y] {
            if s >= num_states {
                return Err(Error::OutOfRangeState {
                    state: s,
                    num_states,
                });
            }
        }
    }
    Ok(())
}

fn adjacency(num_states: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); num_states];
    for &(x, y) in edges {
        adj[x].push(y);
    }
    adj
}

/// Number of strongly connected components, via an iterative Tarjan pass.
fn tarjan_component_count(num_states: usize, edges: &[(usize, usize)]) -> usize {
    const UNVISITED: usize = usize::MAX;
    let adj = adjacency(num_states, edges);
    let mut index = vec![UNVISITED; num_states];
    let mut low = vec![0; num_states];
    let mut on_stack = vec![false; num_states];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut components = 0;

    for root in 0..num_states {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, position of the next neighbour to explore)
        let mut call_stack = vec![(root, 0usize)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call_stack.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call_stack.pop();
            if let Some(&(parent, _)) = call_stack.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                components += 1;
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    if w == v {
                        break;
                    }
                }
            }
        }
    }
    components
}

/// Lexicographically first `(x, y)` with no directed path from `x` to `y`.
fn unreachable_pair(num_states: usize, edges: &[(usize, usize)]) -> Option<(usize, usize)> {
    if tarjan_component_count(num_states, edges) == 1 {
        return None;
    }
    let adj = adjacency(num_states, edges);
    for x in 0..num_states {
        let mut seen = vec![false; num_states];
        let mut queue = VecDeque::from([x]);
        seen[x] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(y) = seen.iter().position(|&s| !s) {
            return Some((x, y));
        }
    }
    None
}
