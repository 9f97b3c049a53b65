#![allow(clippy::needless_range_loop)]

//! Independent reference implementations: dense LU with partial pivoting and
//! brute-force stencils written node by node.

#![allow(dead_code)]

use mfg_spi::{BoundaryCondition, SidePair};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut b = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        assert!(a[k][k].abs() > 1e-300, "singular oracle matrix");
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            dense_solve(a, &e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Node-by-node reference for a tensor grid with axis 0 fastest.
pub struct Stencil {
    pub shape: Vec<usize>,
    pub h: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl Stencil {
    pub fn nodes(&self) -> usize {
        self.shape.iter().product()
    }

    fn coords(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.shape
            .iter()
            .map(|&s| {
                let c = rest % s;
                rest /= s;
                c
            })
            .collect()
    }

    fn node(&self, c: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &ci) in c.iter().enumerate() {
            idx += ci * stride;
            stride *= self.shape[k];
        }
        idx
    }

    /// Neighbour at `offset = ±1` along `axis`; `None` past a Neumann wall.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut c = self.coords(node);
        let s = self.shape[axis] as isize;
        let moved = c[axis] as isize + offset;
        c[axis] = match self.bc {
            BoundaryCondition::Periodic => moved.rem_euclid(s) as usize,
            BoundaryCondition::Neumann if moved < 0 || moved >= s => return None,
            BoundaryCondition::Neumann => moved as usize,
        };
        Some(self.node(&c))
    }

    /// Mirrored ghost: a missing neighbour takes the node's own value.
    fn value(&self, u: &[f64], node: usize, axis: usize, offset: isize) -> f64 {
        self.shift(node, axis, offset).map_or(u[node], |j| u[j])
    }

    pub fn laplacian(&self, u: &[f64], i: usize) -> f64 {
        (0..self.shape.len())
            .map(|a| (self.value(u, i, a, -1) - 2.0 * u[i] + self.value(u, i, a, 1)) / (self.h[a] * self.h[a]))
            .sum()
    }

    pub fn d_left(&self, u: &[f64], i: usize, a: usize) -> f64 {
        (u[i] - self.value(u, i, a, -1)) / self.h[a]
    }

    pub fn d_right(&self, u: &[f64], i: usize, a: usize) -> f64 {
        (self.value(u, i, a, 1) - u[i]) / self.h[a]
    }

    /// `Σ_a Q_L⁺ D_L u + Q_R⁻ D_R u`, with `q[i*dim + a]`.
    pub fn advection(&self, q: &[SidePair], u: &[f64], i: usize) -> f64 {
        let d = self.shape.len();
        (0..d)
            .map(|a| {
                let p = q[i * d + a];
                p.left.max(0.0) * self.d_left(u, i, a) + p.right.min(0.0) * self.d_right(u, i, a)
            })
            .sum()
    }

    /// `(1/h)(M_{i+1} Q⁺_{L,i+1} − M_i Q⁺_{L,i}) + (1/h)(M_i Q⁻_{R,i} − M_{i−1} Q⁻_{R,i−1})`,
    /// with no flux through a wall.
    pub fn divergence(&self, m: &[f64], q: &[SidePair], i: usize) -> f64 {
        let d = self.shape.len();
        let mut total = 0.0;
        for a in 0..d {
            let lp = |j: usize| q[j * d + a].left.max(0.0);
            let rm = |j: usize| q[j * d + a].right.min(0.0);
            let h = self.h[a];
            if let Some(r) = self.shift(i, a, 1) {
                total += (m[r] * lp(r) + m[i] * rm(i)) / h;
            }
            if let Some(l) = self.shift(i, a, -1) {
                total -= (m[i] * lp(i) + m[l] * rm(l)) / h;
            }
        }
        total
    }

    /// Dense matrix of a linear node operator, assembled column by column.
    pub fn assemble(&self, op: impl Fn(&[f64], usize) -> f64) -> Vec<Vec<f64>> {
        let n = self.nodes();
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (i, row) in a.iter_mut().enumerate() {
                row[j] = op(&e, i);
            }
        }
        a
    }

    pub fn fpk_matrix(&self, q: &[SidePair], sigma: f64, dt: f64) -> Vec<Vec<f64>> {
        self.assemble(|m, i| m[i] / dt - sigma * self.laplacian(m, i) - self.divergence(m, q, i))
    }

    pub fn hjb_matrix(&self, q: &[SidePair], sigma: f64, dt: f64) -> Vec<Vec<f64>> {
        self.assemble(|u, i| u[i] / dt - sigma * self.laplacian(u, i) + self.advection(q, u, i))
    }

    /// One implicit FPK step from `m`.
    pub fn fpk_step(&self, q: &[SidePair], sigma: f64, dt: f64, m: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = m.iter().map(|v| v / dt).collect();
        dense_solve(&self.fpk_matrix(q, sigma, dt), &rhs)
    }

    /// One implicit HJB step from `u_next`.
    pub fn hjb_step(&self, q: &[SidePair], sigma: f64, dt: f64, u_next: &[f64], v: &[f64], f: &[f64]) -> Vec<f64> {
        let d = self.shape.len();
        let rhs: Vec<f64> = (0..self.nodes())
            .map(|i| {
                let kinetic: f64 = (0..d)
                    .map(|a| {
                        let p = q[i * d + a];
                        p.left.max(0.0).powi(2) + p.right.min(0.0).powi(2)
                    })
                    .sum();
                u_next[i] / dt + 0.5 * kinetic + v[i] + f[i]
            })
            .collect();
        dense_solve(&self.hjb_matrix(q, sigma, dt), &rhs)
    }
}
