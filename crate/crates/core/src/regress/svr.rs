//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved over `2n` variables `(α, α*)` with pairwise SMO updates
//! and second-order working-set selection. The problem is
//!
//! ```text
//! min  ½ βᵀKβ + ε·Σ|βᵢ| − yᵀβ    s.t.  Σβᵢ = 0,  −C ≤ βᵢ ≤ C,   β = α − α*
//! ```
//!
//! and predictions are `f(x) = Σ βᵢ K(xᵢ, x) + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use wide::f64x4;

use super::{check_shapes, Kernel, RegressError};

pub const DEFAULT_SVR_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResolvedKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl ResolvedKernel {
    /// Resolves an automatic rbf gamma as `1 / (p · mean column variance)`.
    pub fn resolve(kernel: Kernel, x: ArrayView2<'_, f64>) -> Self {
        match kernel {
            Kernel::Linear => ResolvedKernel::Linear,
            Kernel::Rbf { gamma: Some(g) } => ResolvedKernel::Rbf { gamma: g },
            Kernel::Rbf { gamma: None } => {
                let p = x.ncols();
                let mean_var = if x.nrows() == 0 || p == 0 {
                    0.0
                } else {
                    x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0)
                };
                let gamma = if mean_var > 0.0 {
                    1.0 / (p as f64 * mean_var)
                } else {
                    1.0
                };
                ResolvedKernel::Rbf { gamma }
            }
        }
    }

    #[inline]
    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match *self {
            ResolvedKernel::Linear => a.dot(&b),
            ResolvedKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

fn row_norms(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.rows().into_iter().map(|r| r.dot(&r)).collect()
}

/// `K[i][j] = k(a_i, b_j)`, through one matrix product.
pub fn kernel_matrix(
    kernel: ResolvedKernel,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut k = a.dot(&b.t());
    if let ResolvedKernel::Rbf { gamma } = kernel {
        let (na, nb) = (row_norms(a), row_norms(b));
        for ((i, j), v) in k.indexed_iter_mut() {
            let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
            *v = (-gamma * d2).exp();
        }
    }
    k
}

/// Like [`kernel_matrix`] with `a == b`, but exactly symmetric with a unit
/// rbf diagonal.
fn symmetric_kernel(kernel: ResolvedKernel, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let k = x.dot(&x.t());
    let mut k = if k.is_standard_layout() {
        k
    } else {
        k.as_standard_layout().into_owned()
    };
    let n = x.nrows();
    let norms = row_norms(x);
    for i in 0..n {
        for j in 0..=i {
            let v = match kernel {
                ResolvedKernel::Linear => k[[i, j]],
                ResolvedKernel::Rbf { .. } if i == j => 1.0,
                ResolvedKernel::Rbf { gamma } => {
                    let d2 = (norms[i] + norms[j] - 2.0 * k[[i, j]]).max(0.0);
                    (-gamma * d2).exp()
                }
            };
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// `½ βᵀKβ + ε·Σ|βᵢ| − yᵀβ`.
pub fn dual_objective(k: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, beta: &[f64], epsilon: f64) -> f64 {
    let b = ArrayView1::from(beta);
    0.5 * b.dot(&k.dot(&b)) + epsilon * beta.iter().map(|v| v.abs()).sum::<f64>() - y.dot(&b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrSolution {
    /// `α − α*` per training row.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
}

const LANES: usize = 4;
const NEG_INF: f64 = f64::NEG_INFINITY;

#[inline(always)]
fn load(chunk: &[f64]) -> f64x4 {
    f64x4::new(chunk.try_into().expect("lane-sized chunk"))
}

/// Running maximum that keeps the latest index among ties, one per lane.
/// `best` merges the lanes with the same rule.
#[derive(Clone, Copy)]
struct LaneMax {
    v: f64x4,
    i: f64x4,
}

impl LaneMax {
    fn new() -> Self {
        LaneMax {
            v: f64x4::splat(NEG_INF),
            i: f64x4::splat(-1.0),
        }
    }

    #[inline(always)]
    fn offer(&mut self, v: f64x4, idx: f64x4) {
        let take = v.simd_ge(self.v);
        self.v = take.select(v, self.v);
        self.i = take.select(idx, self.i);
    }

    /// Offers one value through lane 0, for the rows past the last full lane group.
    fn offer_one(&mut self, v: f64, idx: usize) {
        let (mut va, mut ia) = (self.v.to_array(), self.i.to_array());
        if v >= va[0] {
            (va[0], ia[0]) = (v, idx as f64);
        }
        (self.v, self.i) = (f64x4::new(va), f64x4::new(ia));
    }

    /// `(value, index)`, or `(−∞, usize::MAX)` when nothing beat −∞.
    fn best(&self) -> (f64, usize) {
        let (v, i) = (self.v.to_array(), self.i.to_array());
        let mut out = (NEG_INF, usize::MAX);
        for l in 0..LANES {
            let idx = i[l] as usize;
            if v[l] > NEG_INF && (v[l] > out.0 || (v[l] == out.0 && idx > out.1)) {
                out = (v[l], idx);
            }
        }
        out
    }
}

fn lane_index() -> f64x4 {
    f64x4::new([0.0, 1.0, 2.0, 3.0])
}

fn pick(plus: (f64, usize), minus: (f64, usize), n: usize) -> (f64, usize) {
    if minus.1 != usize::MAX && minus.0 >= plus.0 {
        (minus.0, minus.1 + n)
    } else {
        plus
    }
}

/// SMO iterate. Variable `t < n` is the α of row `t`, `t ≥ n` the α* of
/// row `t − n`. Only the α-half gradient is stored; the α* half is `2ε − g`.
struct Smo<'a> {
    n: usize,
    k: &'a [f64],
    kd: Vec<f64>,
    ap: Vec<f64>,
    am: Vec<f64>,
    g: Vec<f64>,
    two_eps: f64,
    c: f64,
}

impl<'a> Smo<'a> {
    fn new(p: &'a SvrProblem, c: f64, epsilon: f64) -> Self {
        let n = p.y.len();
        Smo {
            n,
            k: p.k.as_slice().expect("standard layout"),
            kd: p.k.diag().to_vec(),
            g: p.y.iter().map(|y| epsilon - y).collect(),
            ap: vec![0.0; n],
            am: vec![0.0; n],
            two_eps: 2.0 * epsilon,
            c,
        }
    }

    fn row(&self, r: usize) -> &'a [f64] {
        &self.k[r * self.n..(r + 1) * self.n]
    }

    /// Maximal `−y·G` over `I_up`; ties go to the α* half, then the later row.
    fn select_up(&self) -> (f64, usize) {
        let n = self.n;
        let (c, two_eps) = (f64x4::splat(self.c), f64x4::splat(self.two_eps));
        let (mut plus, mut minus) = (LaneMax::new(), LaneMax::new());
        let mut idx = lane_index();
        let chunks = self.ap.chunks_exact(LANES).zip(self.am.chunks_exact(LANES));
        for ((a_p, a_m), g) in chunks.zip(self.g.chunks_exact(LANES)) {
            let (a_p, a_m, g) = (load(a_p), load(a_m), load(g));
            plus.offer(a_p.simd_lt(c).select(-g, f64x4::splat(NEG_INF)), idx);
            minus.offer(a_m.simd_gt(f64x4::ZERO).select(two_eps - g, f64x4::splat(NEG_INF)), idx);
            idx += f64x4::splat(LANES as f64);
        }
        for r in n - n % LANES..n {
            self.offer_up_one(&mut plus, &mut minus, r);
        }
        pick(plus.best(), minus.best(), n)
    }

    fn offer_up_one(&self, plus: &mut LaneMax, minus: &mut LaneMax, r: usize) {
        if self.ap[r] < self.c {
            plus.offer_one(-self.g[r], r);
        }
        if self.am[r] > 0.0 {
            minus.offer_one(self.two_eps - self.g[r], r);
        }
    }

    /// Second-order choice of `j` in `I_low` for the given `i`, plus the
    /// maximal `y·G` over `I_low`. The α* half wins ties, then the later row.
    fn select_low(&self, gmax: f64, i: usize) -> (f64, usize) {
        let n = self.n;
        let ki = self.row(i % n);
        let kd_i = self.kd[i % n];
        let score = |g: f64x4, q: f64x4| {
            let d = f64x4::splat(gmax) + g;
            d.simd_gt(f64x4::ZERO).select(d * d / q, f64x4::splat(NEG_INF))
        };
        let (c, two_eps) = (f64x4::splat(self.c), f64x4::splat(self.two_eps));
        let mut low = f64x4::splat(NEG_INF);
        let (mut plus, mut minus) = (LaneMax::new(), LaneMax::new());
        let mut idx = lane_index();
        let chunks = self.ap.chunks_exact(LANES).zip(self.am.chunks_exact(LANES));
        let chunks = chunks.zip(self.g.chunks_exact(LANES));
        let chunks = chunks.zip(self.kd.chunks_exact(LANES).zip(ki.chunks_exact(LANES)));
        for (((a_p, a_m), g), (kd, k_i)) in chunks {
            let (a_p, a_m, g) = (load(a_p), load(a_m), load(g));
            let q = f64x4::splat(kd_i) + load(kd) - f64x4::splat(2.0) * load(k_i);
            let q = q.simd_gt(f64x4::ZERO).select(q, f64x4::splat(TAU));
            let vp = a_p.simd_gt(f64x4::ZERO).select(g, f64x4::splat(NEG_INF));
            let vm = a_m.simd_lt(c).select(g - two_eps, f64x4::splat(NEG_INF));
            low = low.max(vp).max(vm);
            plus.offer(score(vp, q), idx);
            minus.offer(score(vm, q), idx);
            idx += f64x4::splat(LANES as f64);
        }
        let mut gmax2 = low.to_array().into_iter().fold(NEG_INF, f64::max);
        for r in n - n % LANES..n {
            let q = kd_i + self.kd[r] - 2.0 * ki[r];
            let q = if q > 0.0 { q } else { TAU };
            let one = |v: f64| {
                let d = gmax + v;
                if d > 0.0 { d * d / q } else { NEG_INF }
            };
            if self.ap[r] > 0.0 {
                gmax2 = gmax2.max(self.g[r]);
                plus.offer_one(one(self.g[r]), r);
            }
            if self.am[r] < self.c {
                gmax2 = gmax2.max(self.g[r] - self.two_eps);
                minus.offer_one(one(self.g[r] - self.two_eps), r);
            }
        }
        (gmax2, pick(plus.best(), minus.best(), n).1)
    }

    /// Duality gap and the working pair, if the gap is at least `tol`.
    fn working_pair(&self, up: (f64, usize), tol: f64) -> (f64, Option<(usize, usize)>) {
        let (gmax, i) = up;
        if i == usize::MAX {
            return (0.0, None);
        }
        let (gmax2, j) = self.select_low(gmax, i);
        let gap = gmax + gmax2;
        (gap, (gap >= tol && j != usize::MAX).then_some((i, j)))
    }

    fn alpha(&self, t: usize) -> f64 {
        if t < self.n {
            self.ap[t]
        } else {
            self.am[t - self.n]
        }
    }

    fn grad(&self, t: usize) -> f64 {
        if t < self.n {
            self.g[t]
        } else {
            self.two_eps - self.g[t - self.n]
        }
    }

    fn set_alpha(&mut self, t: usize, v: f64) {
        if t < self.n {
            self.ap[t] = v;
        } else {
            self.am[t - self.n] = v;
        }
    }

    /// Analytic two-variable update of `(i, j)` and the gradient.
    /// Returns the next `I_up` choice, found while updating the gradient.
    fn step(&mut self, i: usize, j: usize) -> (f64, usize) {
        let (n, c) = (self.n, self.c);
        let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
        let (si, sj) = (sign(i), sign(j));
        let (ri, rj) = (i % n, j % n);
        let (ki, kj) = (self.row(ri), self.row(rj));
        let qij = si * sj * ki[rj];
        let (qdi, qdj) = (self.kd[ri], self.kd[rj]);
        let (gi, gj) = (self.grad(i), self.grad(j));
        let (old_i, old_j) = (self.alpha(i), self.alpha(j));
        let (mut ai, mut aj) = (old_i, old_j);
        if si != sj {
            let quad = (qdi + qdj + 2.0 * qij).max(TAU);
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qdi + qdj - 2.0 * qij).max(TAU);
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.set_alpha(i, ai);
        self.set_alpha(j, aj);
        // G_t += Q_ti·di + Q_tj·dj with Q_ts = s_t s_s K
        let (ci, cj) = (si * (ai - old_i), sj * (aj - old_j));
        let (vci, vcj) = (f64x4::splat(ci), f64x4::splat(cj));
        let (vc, two_eps) = (f64x4::splat(c), f64x4::splat(self.two_eps));
        let (mut plus, mut minus) = (LaneMax::new(), LaneMax::new());
        let mut idx = lane_index();
        let chunks = self.g.chunks_exact_mut(LANES);
        let chunks = chunks.zip(ki.chunks_exact(LANES).zip(kj.chunks_exact(LANES)));
        let chunks = chunks.zip(self.ap.chunks_exact(LANES).zip(self.am.chunks_exact(LANES)));
        for ((g_out, (k_i, k_j)), (a_p, a_m)) in chunks {
            let g = load(g_out) + load(k_i) * vci + load(k_j) * vcj;
            g_out.copy_from_slice(g.as_array());
            let (a_p, a_m) = (load(a_p), load(a_m));
            plus.offer(a_p.simd_lt(vc).select(-g, f64x4::splat(NEG_INF)), idx);
            minus.offer(a_m.simd_gt(f64x4::ZERO).select(two_eps - g, f64x4::splat(NEG_INF)), idx);
            idx += f64x4::splat(LANES as f64);
        }
        for r in n - n % LANES..n {
            self.g[r] += ki[r] * ci + kj[r] * cj;
            self.offer_up_one(&mut plus, &mut minus, r);
        }
        pick(plus.best(), minus.best(), n)
    }
}

/// A training set with its kernel matrix, reusable across `C` and `ε`.
#[derive(Debug, Clone)]
pub struct SvrProblem {
    kernel: ResolvedKernel,
    k: Array2<f64>,
    y: Vec<f64>,
}

impl SvrProblem {
    pub fn new(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, kernel: ResolvedKernel) -> Self {
        Self {
            kernel,
            k: symmetric_kernel(kernel, x),
            y: y.to_vec(),
        }
    }

    pub fn kernel(&self) -> ResolvedKernel {
        self.kernel
    }

    pub fn kernel_matrix(&self) -> ArrayView2<'_, f64> {
        self.k.view()
    }

    /// SMO with second-order working-set selection. Stops when
    /// the maximal KKT violation drops below `tol`.
    pub fn solve(&self, c: f64, epsilon: f64, tol: f64) -> Result<SvrSolution, RegressError> {
        let n = self.y.len();
        let mut s = Smo::new(self, c, epsilon);
        let max_iter = 10_000_000usize.max(200 * n);
        let mut iter = 0;
        let mut up = s.select_up();
        let gap = loop {
            let (gap, pair) = s.working_pair(up, tol);
            let Some((i, j)) = pair else {
                break gap;
            };
            if iter >= max_iter {
                return Err(RegressError::NotConverged {
                    iterations: iter,
                    max_violation: gap,
                });
            }
            iter += 1;
            up = s.step(i, j);
        };
        log::trace!("svr converged in {iter} iterations, gap {gap:e}");

        let Smo { ap, am, g, two_eps, .. } = s;
        // bias from free variables, or the midpoint of the feasible range
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for r in 0..n {
            let yg = g[r];
            if ap[r] >= c {
                lb = lb.max(yg);
            } else if ap[r] <= 0.0 {
                ub = ub.min(yg);
            } else {
                sum_free += yg;
                n_free += 1;
            }
        }
        for r in 0..n {
            let yg = g[r] - two_eps;
            if am[r] >= c {
                ub = ub.min(yg);
            } else if am[r] <= 0.0 {
                lb = lb.max(yg);
            } else {
                sum_free += yg;
                n_free += 1;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            0.5 * (ub + lb)
        };
        let beta: Vec<f64> = ap.iter().zip(&am).map(|(p, m)| p - m).collect();
        let objective = dual_objective(self.k.view(), ArrayView1::from(&self.y[..]), &beta, epsilon);
        Ok(SvrSolution {
            beta,
            bias: -rho,
            objective,
            iterations: iter,
        })
    }

    /// Keeps the rows with non-zero coefficients.
    pub fn into_model(&self, x: ArrayView2<'_, f64>, sol: &SvrSolution) -> SvrModel {
        let rows: Vec<usize> = (0..sol.beta.len()).filter(|&r| sol.beta[r] != 0.0).collect();
        SvrModel {
            kernel: self.kernel,
            support: x.select(Axis(0), &rows),
            coef: rows.iter().map(|&r| sol.beta[r]).collect(),
            bias: sol.bias,
            objective: sol.objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: ResolvedKernel,
    pub support: Array2<f64>,
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Dual objective at the solution.
    pub objective: f64,
}

impl SvrModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        if self.coef.is_empty() {
            return Array1::from_elem(x.nrows(), self.bias);
        }
        kernel_matrix(self.kernel, x, self.support.view()).dot(&ArrayView1::from(&self.coef[..]))
            + self.bias
    }

    /// Prediction from a precomputed `K(x, train)` row block, where the
    /// columns cover every training row.
    pub fn predict_from_cross_kernel(
        k_cross: ArrayView2<'_, f64>,
        sol: &SvrSolution,
    ) -> Array1<f64> {
        k_cross
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .zip(&sol.beta)
                    .filter(|(_, b)| **b != 0.0)
                    .map(|(k, b)| b * k)
                    .sum::<f64>()
                    + sol.bias
            })
            .collect()
    }
}

pub fn fit_svr(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    c: f64,
    epsilon: f64,
    kernel: Kernel,
) -> Result<SvrModel, RegressError> {
    check_shapes(x, y)?;
    if !(c > 0.0) || !(epsilon >= 0.0) {
        return Err(RegressError::InvalidParameter(format!(
            "svr needs C > 0 and epsilon >= 0, got C={c}, epsilon={epsilon}"
        )));
    }
    let problem = SvrProblem::new(x, y, ResolvedKernel::resolve(kernel, x));
    let sol = problem.solve(c, epsilon, DEFAULT_SVR_TOL)?;
    Ok(problem.into_model(x, &sol))
}
