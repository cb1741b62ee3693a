//! Star junctions, their per-edge grids, and grid functions that are
//! continuous at the shared vertex.
//!
//! Edge `i` is the segment `[0, a_i]`; the point `x = 0` of every edge is the
//! single vertex. A [`GridFunction`] stores the vertex value once, so reading
//! node 0 through any edge yields the same number.

use thiserror::Error;

use crate::scalar::{sup_abs, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("a junction needs at least one edge")]
    NoEdges,
    #[error("expected {expected} edge lengths, got {got}")]
    LengthCount { expected: usize, got: usize },
    #[error("edge {edge} has invalid length {value} (must be finite and > 0)")]
    BadLength { edge: usize, value: f64 },
    #[error("edge {edge} has {nodes} nodes; at least 3 are required")]
    TooFewNodes { edge: usize, nodes: usize },
    #[error("edge {edge} expects {expected} values, got {got}")]
    ValueCount { edge: usize, expected: usize, got: usize },
    #[error("grid functions live on different grids")]
    GridMismatch,
}

/// The bounded star junction: `I` edges glued at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Junction<T> {
    lengths: Vec<T>,
}

impl<T: Real> Junction<T> {
    pub fn new(num_edges: usize, lengths: Vec<T>) -> Result<Self, GridError> {
        if num_edges == 0 {
            return Err(GridError::NoEdges);
        }
        if lengths.len() != num_edges {
            return Err(GridError::LengthCount {
                expected: num_edges,
                got: lengths.len(),
            });
        }
        for (edge, &a) in lengths.iter().enumerate() {
            if !a.is_finite() || a <= T::zero() {
                return Err(GridError::BadLength {
                    edge,
                    value: a.as_f64(),
                });
            }
        }
        Ok(Self { lengths })
    }

    pub fn num_edges(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn length(&self, edge: usize) -> T {
        self.lengths[edge]
    }

    pub fn min_length(&self) -> T {
        self.lengths
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

/// Validated junction constructor.
pub fn build_junction<T: Real>(num_edges: usize, lengths: &[T]) -> Result<Junction<T>, GridError> {
    Junction::new(num_edges, lengths.to_vec())
}

/// Uniform grid on every edge of a junction.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionGrid<T> {
    junction: Junction<T>,
    nodes: Vec<usize>,
}

impl<T: Real> JunctionGrid<T> {
    pub fn new(junction: Junction<T>, nodes_per_edge: Vec<usize>) -> Result<Self, GridError> {
        if nodes_per_edge.len() != junction.num_edges() {
            return Err(GridError::LengthCount {
                expected: junction.num_edges(),
                got: nodes_per_edge.len(),
            });
        }
        if let Some((edge, &nodes)) = nodes_per_edge.iter().enumerate().find(|(_, &n)| n < 3) {
            return Err(GridError::TooFewNodes { edge, nodes });
        }
        Ok(Self {
            junction,
            nodes: nodes_per_edge,
        })
    }

    /// Same node count on every edge.
    pub fn uniform(junction: Junction<T>, nodes: usize) -> Result<Self, GridError> {
        let count = junction.num_edges();
        Self::new(junction, vec![nodes; count])
    }

    pub fn junction(&self) -> &Junction<T> {
        &self.junction
    }

    pub fn num_edges(&self) -> usize {
        self.junction.num_edges()
    }

    pub fn nodes(&self, edge: usize) -> usize {
        self.nodes[edge]
    }

    pub fn nodes_per_edge(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self, edge: usize) -> T {
        self.junction.length(edge) / T::from_count(self.nodes[edge] - 1)
    }

    /// Coordinate of `node` on `edge`. The last node sits exactly at `a_i`.
    pub fn coordinate(&self, edge: usize, node: usize) -> T {
        let last = self.nodes[edge] - 1;
        if node == last {
            self.junction.length(edge)
        } else {
            self.junction.length(edge) * T::from_count(node) / T::from_count(last)
        }
    }

    pub fn coordinates(&self, edge: usize) -> Vec<T> {
        (0..self.nodes[edge])
            .map(|j| self.coordinate(edge, j))
            .collect()
    }
}

/// A function on the junction grid with one shared vertex value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    grid: JunctionGrid<T>,
    vertex_value: T,
    edge_values: Vec<Vec<T>>,
}

impl<T: Real> GridFunction<T> {
    /// `edge_values[i]` holds nodes `1..N_i` of edge `i` (the vertex excluded).
    pub fn new(grid: JunctionGrid<T>, vertex_value: T, edge_values: Vec<Vec<T>>) -> Result<Self, GridError> {
        if edge_values.len() != grid.num_edges() {
            return Err(GridError::LengthCount {
                expected: grid.num_edges(),
                got: edge_values.len(),
            });
        }
        for (edge, values) in edge_values.iter().enumerate() {
            let expected = grid.nodes(edge) - 1;
            if values.len() != expected {
                return Err(GridError::ValueCount {
                    edge,
                    expected,
                    got: values.len(),
                });
            }
        }
        Ok(Self {
            grid,
            vertex_value,
            edge_values,
        })
    }

    pub fn zeros(grid: JunctionGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: JunctionGrid<T>, value: T) -> Self {
        let edge_values = (0..grid.num_edges())
            .map(|i| vec![value; grid.nodes(i) - 1])
            .collect();
        Self {
            grid,
            vertex_value: value,
            edge_values,
        }
    }

    /// Samples `f(edge, x)`. The vertex value is taken from edge 0.
    pub fn from_fn(grid: JunctionGrid<T>, mut f: impl FnMut(usize, T) -> T) -> Self {
        let vertex_value = f(0, T::zero());
        let edge_values = (0..grid.num_edges())
            .map(|i| {
                (1..grid.nodes(i))
                    .map(|j| f(i, grid.coordinate(i, j)))
                    .collect()
            })
            .collect();
        Self {
            grid,
            vertex_value,
            edge_values,
        }
    }

    /// Builds from full per-edge node vectors (vertex included). The vertex
    /// entry of edge 0 becomes the shared value; other edges' vertex entries
    /// are ignored.
    pub fn from_edge_nodes(grid: JunctionGrid<T>, full: &[Vec<T>]) -> Result<Self, GridError> {
        if full.len() != grid.num_edges() {
            return Err(GridError::LengthCount {
                expected: grid.num_edges(),
                got: full.len(),
            });
        }
        for (edge, values) in full.iter().enumerate() {
            if values.len() != grid.nodes(edge) {
                return Err(GridError::ValueCount {
                    edge,
                    expected: grid.nodes(edge),
                    got: values.len(),
                });
            }
        }
        let vertex_value = full[0][0];
        let edge_values = full.iter().map(|v| v[1..].to_vec()).collect();
        Ok(Self {
            grid,
            vertex_value,
            edge_values,
        })
    }

    pub fn grid(&self) -> &JunctionGrid<T> {
        &self.grid
    }

    pub fn vertex_value(&self) -> T {
        self.vertex_value
    }

    /// Value at `node` of `edge`; node 0 is the vertex.
    pub fn value(&self, edge: usize, node: usize) -> T {
        if node == 0 {
            self.vertex_value
        } else {
            self.edge_values[edge][node - 1]
        }
    }

    /// Interior and outer nodes of `edge` (vertex excluded).
    pub fn edge_values(&self, edge: usize) -> &[T] {
        &self.edge_values[edge]
    }

    /// All nodes of `edge`, vertex first.
    pub fn edge_nodes(&self, edge: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.grid.nodes(edge));
        out.push(self.vertex_value);
        out.extend_from_slice(&self.edge_values[edge]);
        out
    }

    /// Piecewise-linear evaluation at `x` on `edge`; `x` is clamped to `[0, a_i]`.
    pub fn interpolate(&self, edge: usize, x: T) -> T {
        let n = self.grid.nodes(edge);
        let h = self.grid.spacing(edge);
        let s = (x / h).max(T::zero());
        let j = s.floor().to_usize().unwrap_or(0).min(n - 2);
        let w = (s - T::from_count(j)).min(T::one());
        self.value(edge, j) * (T::one() - w) + self.value(edge, j + 1) * w
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            vertex_value: f(self.vertex_value),
            edge_values: self
                .edge_values
                .iter()
                .map(|v| v.iter().map(|&x| f(x)).collect())
                .collect(),
        }
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            vertex_value: f(self.vertex_value, other.vertex_value),
            edge_values: self
                .edge_values
                .iter()
                .zip(&other.edge_values)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn sup_norm(&self) -> T {
        sup_norm(self)
    }
}

/// One-sided second-order derivative at the vertex, per edge:
/// `(-3 f(0) + 4 f(h) - f(2h)) / (2h)`.
pub fn vertex_gradient<T: Real>(f: &GridFunction<T>) -> Vec<T> {
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    (0..f.grid.num_edges())
        .map(|i| {
            let h = f.grid.spacing(i);
            (-three * f.vertex_value + four * f.value(i, 1) - f.value(i, 2)) / (two * h)
        })
        .collect()
}

/// Maximum of `|f|` over all nodes, vertex and outer ends included.
pub fn sup_norm<T: Real>(f: &GridFunction<T>) -> T {
    f.edge_values
        .iter()
        .fold(f.vertex_value.abs(), |acc, v| acc.max(sup_abs(v)))
}

/// Derivative at every node of one edge: second-order one-sided stencils at
/// both ends and central differences inside.
pub fn node_derivatives<T: Real>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let mut out = Vec::with_capacity(n);
    out.push((-three * values[0] + four * values[1] - values[2]) / (two * h));
    for j in 1..n - 1 {
        out.push((values[j + 1] - values[j - 1]) / (two * h));
    }
    out.push((three * values[n - 1] - four * values[n - 2] + values[n - 3]) / (two * h));
    out
}
