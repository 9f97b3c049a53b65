//! Space-time grids, node indexing and the field containers used by the solvers.
//!
//! Nodes are numbered with axis 0 running fastest. Periodic axes carry `cells`
//! nodes (`x_i = x_min + i h`, index arithmetic modulo `cells`); Neumann axes
//! carry `cells + 1` nodes including both end points, with mirrored ghost values
//! outside the box.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(x_min: f64, x_max: f64, cells: usize) -> Self {
        Axis { x_min, x_max, cells }
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    fn points(&self, bc: BoundaryCondition) -> usize {
        match bc {
            BoundaryCondition::Periodic => self.cells,
            BoundaryCondition::Neumann => self.cells + 1,
        }
    }
}

/// Discretization geometry shared by every field of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Axis>,
    steps: Vec<f64>,
    shape: Vec<usize>,
    dt: f64,
    time_steps: usize,
    bc: BoundaryCondition,
    // (node * dim + axis) -> neighbour index, `None` across a Neumann wall
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>, dt: f64, time_steps: usize, bc: BoundaryCondition) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, axis) in axes.iter().enumerate() {
            if !(axis.x_max > axis.x_min) || !axis.x_min.is_finite() || !axis.x_max.is_finite() {
                return Err(Error::InvalidGrid(format!("axis {k}: empty interval")));
            }
            if axis.points(bc) < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: at least 3 nodes required, got {}",
                    axis.points(bc)
                )));
            }
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("time step must be positive, got {dt}")));
        }
        if time_steps == 0 {
            return Err(Error::InvalidGrid("at least one time step required".into()));
        }

        let steps: Vec<f64> = axes.iter().map(Axis::step).collect();
        let shape: Vec<usize> = axes.iter().map(|a| a.points(bc)).collect();
        let nodes: usize = shape.iter().product();
        let dim = axes.len();

        let mut left = vec![None; nodes * dim];
        let mut right = vec![None; nodes * dim];
        let mut stride = 1;
        for axis in 0..dim {
            let n = shape[axis];
            for node in 0..nodes {
                let i = (node / stride) % n;
                let base = node - i * stride;
                let (l, r) = match bc {
                    BoundaryCondition::Periodic => (Some((i + n - 1) % n), Some((i + 1) % n)),
                    BoundaryCondition::Neumann => (
                        if i == 0 { None } else { Some(i - 1) },
                        if i + 1 == n { None } else { Some(i + 1) },
                    ),
                };
                left[node * dim + axis] = l.map(|j| base + j * stride);
                right[node * dim + axis] = r.map(|j| base + j * stride);
            }
            stride *= n;
        }

        Ok(GridSpec {
            axes,
            steps,
            shape,
            dt,
            time_steps,
            bc,
            left,
            right,
        })
    }

    pub fn one_d(
        x_min: f64,
        x_max: f64,
        cells: usize,
        dt: f64,
        time_steps: usize,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        GridSpec::new(vec![Axis::new(x_min, x_max, cells)], dt, time_steps, bc)
    }

    /// Builds a grid whose time step divides `horizon` into a whole number of levels.
    pub fn with_horizon(
        axes: Vec<Axis>,
        horizon: f64,
        dt: f64,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} and time step {dt} must be positive"
            )));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || ((steps * dt - horizon) / horizon).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "time step {dt} does not divide the horizon {horizon}"
            )));
        }
        GridSpec::new(axes, dt, steps as usize, bc)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Space step along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.steps[axis]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn nodes(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.time_steps as f64
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Quadrature weight of one node (h, or h1*h2 in 2D).
    pub fn cell_volume(&self) -> f64 {
        self.steps.iter().product()
    }

    pub fn left(&self, node: usize, axis: usize) -> Option<usize> {
        self.left[node * self.dim() + axis]
    }

    pub fn right(&self, node: usize, axis: usize) -> Option<usize> {
        self.right[node * self.dim() + axis]
    }

    /// Per-axis integer coordinates of a node.
    pub fn index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.shape
            .iter()
            .map(|&n| {
                let i = rest % n;
                rest /= n;
                i
            })
            .collect()
    }

    pub fn coordinates(&self, node: usize) -> Vec<f64> {
        self.index(node)
            .into_iter()
            .zip(&self.axes)
            .zip(&self.steps)
            .map(|((i, axis), h)| axis.x_min + i as f64 * h)
            .collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.nodes()).map(|node| f(&self.coordinates(node))).collect()
    }

    pub(crate) fn check_level(&self, len: usize) -> Result<()> {
        if len != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                found: len,
            });
        }
        Ok(())
    }

    pub(crate) fn check_policy_level(&self, len: usize) -> Result<()> {
        let expected = self.nodes() * self.dim();
        if len != expected {
            return Err(Error::DimensionMismatch { expected, found: len });
        }
        Ok(())
    }

    /// Same node layout and time levels as `other`.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        self.shape == other.shape && self.time_steps == other.time_steps && self.bc == other.bc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Value,
    Density,
}

/// Values of `u` or `m` on every (time level, node) pair, levels `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    data: Vec<f64>,
    nodes: usize,
    role: FieldRole,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec, role: FieldRole) -> Self {
        let nodes = grid.nodes();
        ScalarField {
            data: vec![0.0; nodes * (grid.time_steps() + 1)],
            nodes,
            role,
        }
    }

    pub fn from_levels(levels: Vec<Vec<f64>>, role: FieldRole) -> Result<Self> {
        let nodes = levels.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nodes * levels.len());
        for level in levels {
            if level.len() != nodes {
                return Err(Error::DimensionMismatch {
                    expected: nodes,
                    found: level.len(),
                });
            }
            data.extend(level);
        }
        Ok(ScalarField { data, nodes, role })
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn levels(&self) -> usize {
        self.data.len().checked_div(self.nodes).unwrap_or(0)
    }

    pub fn level(&self, tau: usize) -> &[f64] {
        &self.data[tau * self.nodes..(tau + 1) * self.nodes]
    }

    pub fn level_mut(&mut self, tau: usize) -> &mut [f64] {
        &mut self.data[tau * self.nodes..(tau + 1) * self.nodes]
    }

    pub fn iter_levels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.nodes.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest entrywise difference; `INFINITY` when the shapes differ.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        if self.data.len() != other.data.len() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        let expected = grid.nodes() * (grid.time_steps() + 1);
        if self.data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.data.len(),
            });
        }
        Ok(())
    }
}

/// Left/right upwind components of a policy at one node along one axis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SidePair {
    pub left: f64,
    pub right: f64,
}

impl SidePair {
    pub const ZERO: SidePair = SidePair { left: 0.0, right: 0.0 };

    pub fn new(left: f64, right: f64) -> Self {
        SidePair { left, right }
    }

    /// `Q_L⁺`
    pub fn left_eff(self) -> f64 {
        self.left.max(0.0)
    }

    /// `Q_R⁻`
    pub fn right_eff(self) -> f64 {
        self.right.min(0.0)
    }

    pub fn effective(self) -> SidePair {
        SidePair::new(self.left_eff(), self.right_eff())
    }

    /// `sup{Q_L⁺, -Q_R⁻}`
    pub fn sup_norm(self) -> f64 {
        self.left_eff().max(-self.right_eff())
    }

    /// `(Q_L⁺)² + (Q_R⁻)²`
    pub fn norm_sq(self) -> f64 {
        let (l, r) = (self.left_eff(), self.right_eff());
        l * l + r * r
    }

    pub fn lerp(self, other: SidePair, beta: f64) -> SidePair {
        SidePair::new(
            (1.0 - beta) * self.left + beta * other.left,
            (1.0 - beta) * self.right + beta * other.right,
        )
    }
}

/// Two-sided policy on levels `0..T`, one [`SidePair`] per (level, node, axis).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    data: Vec<SidePair>,
    nodes: usize,
    dim: usize,
    levels: usize,
}

impl PolicyField {
    pub fn zeros(grid: &GridSpec) -> Self {
        PolicyField::filled(grid, SidePair::ZERO)
    }

    pub fn filled(grid: &GridSpec, value: SidePair) -> Self {
        let (nodes, dim, levels) = (grid.nodes(), grid.dim(), grid.time_steps());
        PolicyField {
            data: vec![value; nodes * dim * levels],
            nodes,
            dim,
            levels,
        }
    }

    /// Builds a policy by evaluating `f(tau, node, axis)`.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(usize, usize, usize) -> SidePair) -> Self {
        let mut q = PolicyField::zeros(grid);
        for tau in 0..q.levels {
            for node in 0..q.nodes {
                for axis in 0..q.dim {
                    q.data[(tau * q.nodes + node) * q.dim + axis] = f(tau, node, axis);
                }
            }
        }
        q
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All pairs of level `tau`, indexed `node * dim + axis`.
    pub fn level(&self, tau: usize) -> &[SidePair] {
        let n = self.nodes * self.dim;
        &self.data[tau * n..(tau + 1) * n]
    }

    pub fn level_mut(&mut self, tau: usize) -> &mut [SidePair] {
        let n = self.nodes * self.dim;
        &mut self.data[tau * n..(tau + 1) * n]
    }

    pub fn get(&self, tau: usize, node: usize, axis: usize) -> SidePair {
        self.data[(tau * self.nodes + node) * self.dim + axis]
    }

    pub fn set(&mut self, tau: usize, node: usize, axis: usize, value: SidePair) {
        self.data[(tau * self.nodes + node) * self.dim + axis] = value;
    }

    pub fn pairs(&self) -> &[SidePair] {
        &self.data
    }

    pub(crate) fn pairs_mut(&mut self) -> &mut [SidePair] {
        &mut self.data
    }

    /// `max |Q|_∞` over the whole field.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|q| q.sup_norm()).fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &PolicyField) -> bool {
        self.nodes == other.nodes && self.dim == other.dim && self.levels == other.levels
    }

    pub(crate) fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.nodes != grid.nodes() || self.dim != grid.dim() || self.levels != grid.time_steps() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}
