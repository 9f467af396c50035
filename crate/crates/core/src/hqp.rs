//! Lexicographic hierarchical least-squares with inequalities.
//!
//! Levels are solved in priority order over one decision vector. Each level
//! first minimizes the violation of its inequalities, then its weighted
//! equality residual, both inside the optimal set of every higher level.
//! That optimal set is carried down as an affine subspace `z0 + N y` (the
//! equality part, `N` from a rank-revealing SVD) plus a growing list of hard
//! inequalities `C z <= d + s*` where `s*` is the slack a level had to accept.
//! Level 0 inequalities must be satisfiable; lower levels may end with
//! non-zero slack.
//!
//! Every sub-problem is a least-squares problem with linear inequalities,
//! solved by a primal active-set method whose steps are minimum-norm
//! solutions of the equality-constrained subproblem. Degenerate optima
//! therefore resolve to the minimum-norm displacement in the free subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One priority level: weighted equalities `A z = b` and inequalities
/// `C z <= d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLevel {
    n_dec: usize,
    eq_matrix: DMatrix<f64>,
    eq_target: DVector<f64>,
    weights: DVector<f64>,
    ineq_matrix: DMatrix<f64>,
    ineq_bound: DVector<f64>,
}

impl TaskLevel {
    pub fn new(n_dec: usize) -> Self {
        Self {
            n_dec,
            eq_matrix: DMatrix::zeros(0, n_dec),
            eq_target: DVector::zeros(0),
            weights: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n_dec),
            ineq_bound: DVector::zeros(0),
        }
    }

    pub fn n_dec(&self) -> usize {
        self.n_dec
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_target(&self) -> &DVector<f64> {
        &self.eq_target
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn ineq_matrix(&self) -> &DMatrix<f64> {
        &self.ineq_matrix
    }

    pub fn ineq_bound(&self) -> &DVector<f64> {
        &self.ineq_bound
    }

    pub fn n_eq(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.n_eq() == 0 && self.n_ineq() == 0
    }

    /// Appends equality rows sharing one weight.
    pub fn push_equalities(&mut self, a: &DMatrix<f64>, b: &DVector<f64>, weight: f64) -> Result<()> {
        self.push_weighted_equalities(a, b, &DVector::from_element(a.nrows(), weight))
    }

    pub fn push_weighted_equalities(&mut self, a: &DMatrix<f64>, b: &DVector<f64>, weights: &DVector<f64>) -> Result<()> {
        if a.ncols() != self.n_dec || a.nrows() != b.len() || weights.len() != b.len() {
            return Err(Error::Dimension(format!(
                "equality block {}x{} with target {} and {} weights on {} decision variables",
                a.nrows(),
                a.ncols(),
                b.len(),
                weights.len(),
                self.n_dec
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Dimension("task weights must be positive".into()));
        }
        self.eq_matrix = vstack(&self.eq_matrix, a);
        self.eq_target = vcat(&self.eq_target, b);
        self.weights = vcat(&self.weights, weights);
        Ok(())
    }

    pub fn push_inequalities(&mut self, c: &DMatrix<f64>, d: &DVector<f64>) -> Result<()> {
        if c.ncols() != self.n_dec || c.nrows() != d.len() {
            return Err(Error::Dimension(format!(
                "inequality block {}x{} with bound {} on {} decision variables",
                c.nrows(),
                c.ncols(),
                d.len(),
                self.n_dec
            )));
        }
        self.ineq_matrix = vstack(&self.ineq_matrix, c);
        self.ineq_bound = vcat(&self.ineq_bound, d);
        Ok(())
    }

    /// Merges another level's rows into this one (same priority).
    pub fn extend(&mut self, other: &TaskLevel) -> Result<()> {
        if other.n_dec != self.n_dec {
            return Err(Error::Dimension(format!(
                "cannot merge levels over {} and {} variables",
                self.n_dec, other.n_dec
            )));
        }
        self.push_weighted_equalities(&other.eq_matrix, &other.eq_target, &other.weights)?;
        self.push_inequalities(&other.ineq_matrix, &other.ineq_bound)
    }

    /// Multiplies every equality weight by `factor`.
    pub fn scale_weights(&mut self, factor: f64) {
        self.weights *= factor;
    }

    /// `‖W (A z - b)‖`.
    pub fn residual(&self, z: &DVector<f64>) -> f64 {
        (&self.eq_matrix * z - &self.eq_target).component_mul(&self.weights).norm()
    }

    /// Elementwise `max(0, C z - d)`.
    pub fn violation(&self, z: &DVector<f64>) -> DVector<f64> {
        (&self.ineq_matrix * z - &self.ineq_bound).map(|v| v.max(0.0))
    }

    /// `‖W (A z - b)‖² + ‖max(0, C z - d)‖²`.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        self.residual(z).powi(2) + self.violation(z).norm_squared()
    }
}

/// Ordered levels, index 0 the highest priority.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    n_dec: usize,
    levels: Vec<TaskLevel>,
}

impl Hierarchy {
    pub fn new(n_dec: usize) -> Self {
        Self { n_dec, levels: Vec::new() }
    }

    pub fn from_levels(n_dec: usize, levels: Vec<TaskLevel>) -> Result<Self> {
        let mut h = Self::new(n_dec);
        for level in levels {
            h.push(level)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, level: TaskLevel) -> Result<()> {
        if level.n_dec != self.n_dec {
            return Err(Error::Dimension(format!(
                "level over {} variables in a hierarchy over {}",
                level.n_dec, self.n_dec
            )));
        }
        self.levels.push(level);
        Ok(())
    }

    pub fn n_dec(&self) -> usize {
        self.n_dec
    }

    pub fn levels(&self) -> &[TaskLevel] {
        &self.levels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HqpSolution {
    pub z: DVector<f64>,
    /// `‖W_k (A_k z - b_k)‖` per level.
    pub residuals: Vec<f64>,
    /// Inequality slack accepted by each level (zero at level 0).
    pub ineq_slacks: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqpOptions {
    /// Singular values below `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Level-0 violation tolerated before reporting infeasibility, relative
    /// to `1 + max |d|`.
    pub feasibility_tol: f64,
    /// Iteration cap per active-set solve; 0 picks a size-based default.
    pub max_iterations: usize,
}

impl Default for HqpOptions {
    fn default() -> Self {
        Self { rank_tol: 1e-10, feasibility_tol: 1e-8, max_iterations: 0 }
    }
}

/// Cascade solver; holds only options, so one instance can be reused.
#[derive(Debug, Clone, Default)]
pub struct HqpSolver {
    pub options: HqpOptions,
}

impl HqpSolver {
    pub fn new(options: HqpOptions) -> Self {
        Self { options }
    }

    pub fn solve(&self, hierarchy: &Hierarchy) -> Result<HqpSolution> {
        solve_with(hierarchy, &self.options)
    }
}

pub fn solve_hierarchy(hierarchy: &Hierarchy) -> Result<HqpSolution> {
    solve_with(hierarchy, &HqpOptions::default())
}

fn solve_with(hierarchy: &Hierarchy, opts: &HqpOptions) -> Result<HqpSolution> {
    let n = hierarchy.n_dec;
    if hierarchy.levels.is_empty() {
        return Err(Error::Dimension("hierarchy has no levels".into()));
    }
    for (k, level) in hierarchy.levels.iter().enumerate() {
        if level.n_dec != n {
            return Err(Error::Dimension(format!("level {k} has {} columns, expected {n}", level.n_dec)));
        }
    }

    let mut z = DVector::zeros(n);
    let mut basis = DMatrix::identity(n, n);
    let mut hard_c = DMatrix::zeros(0, n);
    let mut hard_d = DVector::zeros(0);
    let mut slacks = Vec::with_capacity(hierarchy.levels.len());

    for (k, level) in hierarchy.levels.iter().enumerate() {
        let r = basis.ncols();

        if level.n_ineq() > 0 {
            let m = level.n_ineq();
            if r > 0 {
                // variables (y, s): minimize ‖s‖² s.t. C (z + N y) - s <= d and the hard set
                let cn = &level.ineq_matrix * &basis;
                let mut g = DMatrix::zeros(m + hard_c.nrows(), r + m);
                g.view_mut((0, 0), (m, r)).copy_from(&cn);
                g.view_mut((0, r), (m, m)).copy_from(&(-DMatrix::<f64>::identity(m, m)));
                if hard_c.nrows() > 0 {
                    g.view_mut((m, 0), (hard_c.nrows(), r)).copy_from(&(&hard_c * &basis));
                }
                let own_gap = &level.ineq_bound - &level.ineq_matrix * &z;
                let hard_gap = (&hard_d - &hard_c * &z).map(|v| v.max(0.0));
                let h = vcat(&own_gap, &hard_gap);
                let mut e = DMatrix::zeros(m, r + m);
                e.view_mut((0, r), (m, m)).fill_with_identity();
                let mut x0 = DVector::zeros(r + m);
                for i in 0..m {
                    x0[r + i] = (-own_gap[i]).max(0.0);
                }
                let x = solve_lsi(&e, &DVector::zeros(m), &g, &h, x0, opts)?;
                z += &basis * x.rows(0, r);
            }
            let slack = level.violation(&z);
            if k == 0 {
                let worst = slack.amax();
                let scale = 1.0 + level.ineq_bound.amax();
                if worst > opts.feasibility_tol * scale {
                    return Err(Error::Infeasible { level: 0, violation: worst });
                }
            }
            hard_c = vstack(&hard_c, &level.ineq_matrix);
            hard_d = vcat(&hard_d, &(&level.ineq_bound + &slack));
            slacks.push(slack);
        } else {
            slacks.push(DVector::zeros(0));
        }

        if level.n_eq() > 0 && r > 0 {
            let weighted_a = scale_rows(&level.eq_matrix, &level.weights);
            let e = &weighted_a * &basis;
            let f = (&level.eq_target - &level.eq_matrix * &z).component_mul(&level.weights);
            let y = if hard_c.nrows() > 0 {
                let g = &hard_c * &basis;
                let h = (&hard_d - &hard_c * &z).map(|v| v.max(0.0));
                solve_lsi(&e, &f, &g, &h, DVector::zeros(r), opts)?
            } else {
                min_norm_lstsq(&e, &f, opts.rank_tol)
            };
            z += &basis * &y;
            basis = &basis * null_space(&e, opts.rank_tol);
        }
    }

    let residuals = hierarchy.levels.iter().map(|l| l.residual(&z)).collect();
    Ok(HqpSolution { z, residuals, ineq_slacks: slacks })
}

/// Minimizes `‖E x - f‖²` subject to `G x <= h`, starting from a feasible `x`.
fn solve_lsi(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    mut x: DVector<f64>,
    opts: &HqpOptions,
) -> Result<DVector<f64>> {
    let n = x.len();
    let m = g.nrows();
    let max_iter = if opts.max_iterations > 0 { opts.max_iterations } else { 20 * (n + m) + 100 };
    let row_norms: Vec<f64> = (0..m).map(|i| g.row(i).norm()).collect();
    let mut working: Vec<usize> = Vec::new();

    for _ in 0..max_iter {
        let residual = e * &x - f;
        let (step, null_dim) = if working.is_empty() {
            (min_norm_lstsq(e, &(-&residual), opts.rank_tol), n)
        } else {
            let z = null_space(&select_rows(g, &working), opts.rank_tol);
            let w = min_norm_lstsq(&(e * &z), &(-&residual), opts.rank_tol);
            (&z * w, z.ncols())
        };

        let step_norm = step.norm();
        if null_dim == 0 || step_norm <= 1e-12 * (1.0 + x.norm()) {
            if working.is_empty() {
                return Ok(x);
            }
            // stationarity: E^T r + G_W^T mu = 0, need mu >= 0
            let grad = e.transpose() * &residual;
            let gw_t = select_rows(g, &working).transpose();
            let mu = min_norm_lstsq(&gw_t, &(-&grad), opts.rank_tol);
            let (j, mu_min) = mu
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
            if mu_min >= -1e-10 * (1.0 + grad.amax()) {
                return Ok(x);
            }
            working.remove(j);
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let gi = g.row(i);
            let gp = gi.dot(&step.transpose());
            if gp <= 1e-13 * row_norms[i] * step_norm {
                continue;
            }
            let gap = (h[i] - gi.dot(&x.transpose())).max(0.0);
            let a = gap / gp;
            if a < alpha {
                alpha = a;
                blocking = Some(i);
            }
        }
        x += step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::NotConverged(max_iter))
}

fn scale_rows(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (i, wi) in w.iter().enumerate() {
        out.row_mut(i).scale_mut(*wi);
    }
    out
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub(crate) fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub(crate) fn vcat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Orthonormal basis of `{x : A x = 0}`.
pub fn null_space(a: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::identity(n, n);
    }
    // pad so the SVD returns a full n x n right factor
    let padded = if a.nrows() < n { vstack(a, &DMatrix::zeros(n - a.nrows(), n)) } else { a.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.amax();
    let cutoff = rank_tol * sigma_max;
    let null_rows: Vec<usize> = (0..n).filter(|&i| sigma_max == 0.0 || svd.singular_values[i] <= cutoff).collect();
    DMatrix::from_fn(n, null_rows.len(), |i, j| v_t[(null_rows[j], i)])
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DVector::zeros(n);
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.amax();
    if sigma_max == 0.0 {
        return DVector::zeros(n);
    }
    svd.solve(b, rank_tol * sigma_max).expect("singular vectors requested")
}
