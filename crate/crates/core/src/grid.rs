//! Gridded workspace, occupancy matrices, and quad transition systems.
//!
//! The workspace is the square `[-a/2, a/2]^2` partitioned into a
//! `2^D x 2^D` grid. Matrix row 1 is the north (top) row; column 1 is the
//! west (left) column. The quad transition system (QTS) over a matrix is a
//! quad tree whose leaves carry the matrix entries and whose internal
//! nodes carry the sum of their four children, with edges labeled by the
//! quadrant direction.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("step {step}s violates the sampling bound: step must be >= {bound}s (side {side}m, depth {depth}, max speed {max_speed}m/s)")]
    StepTooSmall {
        step: f64,
        bound: f64,
        side: f64,
        depth: u32,
        max_speed: f64,
    },
    #[error("depth {0} exceeds the default guard of 6 (the tree has sum_i 4^i nodes); set allow_deep_grid to override")]
    DepthTooLarge(u32),
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error("cell index [{i},{j}] out of range for a {side}x{side} grid", side = 1usize << *.depth)]
    IndexOutOfRange { i: usize, j: usize, depth: u32 },
    #[error("malformed occupancy matrix: {0}")]
    BadMatrix(String),
}

/// Workspace and swarm configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Grid depth `D`; the grid is `2^D x 2^D`.
    pub depth: u32,
    /// Workspace side length `a` in meters.
    pub side_length: f64,
    /// Number of robots `N`.
    pub robot_count: u64,
    /// Maximum robot speed in m/s.
    pub max_speed: f64,
    /// Sampling step in seconds.
    pub step: f64,
    /// Overrides the `depth <= 6` guard.
    #[serde(default)]
    pub allow_deep_grid: bool,
}

impl GridConfig {
    /// Grid side in cells (`2^D`).
    pub fn cells_per_side(&self) -> usize {
        1usize << self.depth
    }

    /// Cell width in meters (`a / 2^D`).
    pub fn cell_width(&self) -> f64 {
        self.side_length / self.cells_per_side() as f64
    }

    /// Sampling bound `a / (2^(D-1) * u_m)`.
    pub fn step_bound(&self) -> f64 {
        self.side_length / (2f64.powi(self.depth as i32 - 1) * self.max_speed)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.depth < 1 {
            return Err(GridError::InvalidConfig("depth must be >= 1".into()));
        }
        if self.depth > 6 && !self.allow_deep_grid {
            return Err(GridError::DepthTooLarge(self.depth));
        }
        if !(self.side_length > 0.0) {
            return Err(GridError::InvalidConfig("side_length must be > 0".into()));
        }
        if self.robot_count < 1 {
            return Err(GridError::InvalidConfig("robot_count must be >= 1".into()));
        }
        if !(self.max_speed > 0.0) {
            return Err(GridError::InvalidConfig("max_speed must be > 0".into()));
        }
        let bound = self.step_bound();
        // Small slack so a step computed as exactly the bound passes.
        if !(self.step > 0.0) || self.step < bound - 1e-9 {
            return Err(GridError::StepTooSmall {
                step: self.step,
                bound,
                side: self.side_length,
                depth: self.depth,
                max_speed: self.max_speed,
            });
        }
        Ok(())
    }
}

/// Axis-aligned cell rectangle in workspace coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Workspace rectangle of cell `[i,j]` (1-based, row 1 = north).
///
/// Row index grows southwards, so `y` decreases with `i`.
pub fn cell_bounds(cfg: &GridConfig, i: usize, j: usize) -> Result<CellBounds, GridError> {
    let n = cfg.cells_per_side();
    if i < 1 || i > n || j < 1 || j > n {
        return Err(GridError::IndexOutOfRange {
            i,
            j,
            depth: cfg.depth,
        });
    }
    let a = cfg.side_length;
    let w = cfg.cell_width();
    Ok(CellBounds {
        x_min: -a / 2.0 + (j - 1) as f64 * w,
        x_max: -a / 2.0 + j as f64 * w,
        y_min: a / 2.0 - i as f64 * w,
        y_max: a / 2.0 - (i - 1) as f64 * w,
    })
}

/// Per-cell robot counts at one time step (`N[k]`).
///
/// Stored row-major with row 0 at the north edge; accessors are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyMatrix {
    depth: u32,
    counts: Vec<u64>,
}

impl OccupancyMatrix {
    pub fn zeros(depth: u32) -> Self {
        let n = 1usize << depth;
        OccupancyMatrix {
            depth,
            counts: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, GridError> {
        let n = rows.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(GridError::BadMatrix(format!(
                "row count {n} is not a positive power of two"
            )));
        }
        let depth = n.trailing_zeros();
        let mut counts = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(GridError::BadMatrix(format!(
                    "expected {n} columns, got {}",
                    row.len()
                )));
            }
            counts.extend_from_slice(row);
        }
        Ok(OccupancyMatrix { depth, counts })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn side(&self) -> usize {
        1usize << self.depth
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.side() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        let n = self.side();
        self.counts[i * n + j] = v;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Dense integer CSV, row-major, north row first.
    pub fn to_csv(&self) -> String {
        let n = self.side();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&self.get(i, j).to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GridError> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<u64>, _> = line.split(',').map(|s| s.trim().parse()).collect();
            rows.push(row.map_err(|e| GridError::BadMatrix(format!("bad entry: {e}")))?);
        }
        Self::from_rows(&rows)
    }

    /// 180-degree rotation (used by the quadrant-relabeling tests).
    pub fn rotated_180(&self) -> Self {
        let n = self.side();
        let mut out = Self::zeros(self.depth);
        for i in 0..n {
            for j in 0..n {
                out.set(n - 1 - i, n - 1 - j, self.get(i, j));
            }
        }
        out
    }
}

/// Quadrant edge labels, in the fixed child order used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadLabel {
    Nw,
    Ne,
    Sw,
    Se,
}

impl QuadLabel {
    pub const ALL: [QuadLabel; 4] = [QuadLabel::Nw, QuadLabel::Ne, QuadLabel::Sw, QuadLabel::Se];

    pub fn index(self) -> usize {
        match self {
            QuadLabel::Nw => 0,
            QuadLabel::Ne => 1,
            QuadLabel::Sw => 2,
            QuadLabel::Se => 3,
        }
    }

    /// Row/column offsets of the quadrant within a split block.
    fn offsets(self) -> (usize, usize) {
        match self {
            QuadLabel::Nw => (0, 0),
            QuadLabel::Ne => (0, 1),
            QuadLabel::Sw => (1, 0),
            QuadLabel::Se => (1, 1),
        }
    }
}

impl fmt::Display for QuadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QuadLabel::Nw => "NW",
            QuadLabel::Ne => "NE",
            QuadLabel::Sw => "SW",
            QuadLabel::Se => "SE",
        };
        f.write_str(s)
    }
}

/// Nonempty subset of the four quadrant labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet(u8);

impl LabelSet {
    pub const ALL: LabelSet = LabelSet(0b1111);

    pub fn new(labels: &[QuadLabel]) -> Self {
        let mut bits = 0u8;
        for l in labels {
            bits |= 1 << l.index();
        }
        LabelSet(bits)
    }

    pub fn contains(self, l: QuadLabel) -> bool {
        self.0 & (1 << l.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = QuadLabel> {
        QuadLabel::ALL.into_iter().filter(move |l| self.contains(*l))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == LabelSet::ALL {
            return f.write_str("L");
        }
        let mut first = true;
        for l in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
            first = false;
        }
        Ok(())
    }
}

/// Node handle inside a [`Qts`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
struct QtsNode {
    value: f64,
    /// Children in `QuadLabel::ALL` order; `None` for leaves.
    children: Option<[NodeId; 4]>,
    /// Top-left corner and side of the submatrix this node covers.
    row: usize,
    col: usize,
    span: usize,
}

/// Quad transition system: the quad tree over an occupancy matrix.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Qts {
    depth: u32,
    nodes: Vec<QtsNode>,
    root: NodeId,
}

impl Qts {
    /// Builds the QTS of `m`: leaves carry matrix entries, internal nodes
    /// the sum of their children.
    pub fn from_occupancy(m: &OccupancyMatrix) -> Qts {
        let values: Vec<f64> = (0..m.side())
            .flat_map(|i| (0..m.side()).map(move |j| m.get(i, j) as f64))
            .collect();
        Self::from_values(m.depth(), &values)
    }

    /// Builds a QTS over arbitrary real-valued cells (row-major).
    pub fn from_values(depth: u32, cells: &[f64]) -> Qts {
        let n = 1usize << depth;
        assert_eq!(cells.len(), n * n, "cell count must be 4^D");
        let mut nodes = Vec::new();
        let root = Self::build(&mut nodes, cells, n, 0, 0, n);
        Qts { depth, nodes, root }
    }

    fn build(
        nodes: &mut Vec<QtsNode>,
        cells: &[f64],
        side: usize,
        row: usize,
        col: usize,
        span: usize,
    ) -> NodeId {
        if span == 1 {
            let id = NodeId(nodes.len());
            nodes.push(QtsNode {
                value: cells[row * side + col],
                children: None,
                row,
                col,
                span,
            });
            return id;
        }
        let half = span / 2;
        let mut children = [NodeId(0); 4];
        let mut sum = 0.0;
        // Reserve the parent slot first so the root is node 0.
        let id = NodeId(nodes.len());
        nodes.push(QtsNode {
            value: 0.0,
            children: None,
            row,
            col,
            span,
        });
        for label in QuadLabel::ALL {
            let (dr, dc) = label.offsets();
            let child = Self::build(nodes, cells, side, row + dr * half, col + dc * half, half);
            sum += nodes[child.0].value;
            children[label.index()] = child;
        }
        nodes[id.0].value = sum;
        nodes[id.0].children = Some(children);
        id
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn value(&self, v: NodeId) -> f64 {
        self.nodes[v.0].value
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v.0].children.is_none()
    }

    pub fn child(&self, v: NodeId, label: QuadLabel) -> Option<NodeId> {
        self.nodes[v.0].children.map(|c| c[label.index()])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn iter_nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Matrix block covered by `v`: (row, col, span), 0-based.
    pub fn block(&self, v: NodeId) -> (usize, usize, usize) {
        let n = &self.nodes[v.0];
        (n.row, n.col, n.span)
    }

    /// The leaf cells (0-based `(i,j)`) under `v`, in row-major order.
    pub fn leaf_cells(&self, v: NodeId) -> Vec<(usize, usize)> {
        let (row, col, span) = self.block(v);
        (row..row + span)
            .flat_map(|i| (col..col + span).map(move |j| (i, j)))
            .collect()
    }

    /// All maximal `B`-labeled paths from `v`, each materialized up to
    /// index `kappa` (the final leaf repeats when a path is shorter).
    ///
    /// Paths are produced lazily; the count is `|B|^min(kappa, depth below v)`.
    pub fn labeled_paths(&self, v: NodeId, labels: LabelSet, kappa: usize) -> LabeledPaths<'_> {
        assert!(!labels.is_empty(), "label set must be nonempty");
        LabeledPaths {
            qts: self,
            labels,
            kappa,
            stack: vec![vec![v]],
        }
    }
}

/// One materialized `B`-labeled path: `nodes[i]` is the path element at
/// index `i`; indexing past the final leaf repeats the leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPath {
    pub nodes: Vec<NodeId>,
}

impl LabeledPath {
    pub fn at(&self, index: usize) -> NodeId {
        if index < self.nodes.len() {
            self.nodes[index]
        } else {
            *self.nodes.last().expect("path is nonempty")
        }
    }
}

/// Lazy DFS enumeration of labeled paths.
pub struct LabeledPaths<'a> {
    qts: &'a Qts,
    labels: LabelSet,
    kappa: usize,
    stack: Vec<Vec<NodeId>>,
}

impl Iterator for LabeledPaths<'_> {
    type Item = LabeledPath;

    fn next(&mut self) -> Option<LabeledPath> {
        while let Some(prefix) = self.stack.pop() {
            let last = *prefix.last().unwrap();
            if prefix.len() > self.kappa || self.qts.is_leaf(last) {
                let mut nodes = prefix;
                while nodes.len() <= self.kappa {
                    nodes.push(last);
                }
                return Some(LabeledPath { nodes });
            }
            // Push in reverse label order so paths come out NW-first.
            for label in QuadLabel::ALL.iter().rev() {
                if self.labels.contains(*label) {
                    let child = self.qts.child(last, *label).unwrap();
                    let mut next = prefix.clone();
                    next.push(child);
                    self.stack.push(next);
                }
            }
        }
        None
    }
}
