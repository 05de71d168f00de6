//! Dense symmetric solves used by the linear-family regressors and RFE.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    // row-major, only the lower triangle is meaningful
    l: Array2<f64>,
}

/// A pivot fell at or below the requested threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub index: usize,
    pub pivot: f64,
}

impl Cholesky {
    /// Factors `a + shift·I`. Fails when any pivot is `<= min_pivot` or non-finite.
    pub fn factor(
        a: ArrayView2<'_, f64>,
        shift: f64,
        min_pivot: f64,
    ) -> Result<Self, NotPositiveDefinite> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = if i == j {
                    let r = l.row(i);
                    (r, r)
                } else {
                    (l.row(i), l.row(j))
                };
                let dot = dot_prefix(ri, rj, j);
                if i == j {
                    let d = a[[i, i]] + shift - dot;
                    if !(d > min_pivot) || !d.is_finite() {
                        return Err(NotPositiveDefinite { index: i, pivot: d });
                    }
                    l[[i, i]] = d.sqrt();
                } else {
                    l[[i, j]] = (a[[i, j]] - dot) / l[[j, j]];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        let mut z = b.to_owned();
        for i in 0..n {
            let s = dot_prefix(self.l.row(i), z.view(), i);
            z[i] = (z[i] - s) / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[[k, i]] * z[k];
            }
            z[i] = s / self.l[[i, i]];
        }
        z
    }
}

#[inline]
fn dot_prefix(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, len: usize) -> f64 {
    let a = a.as_slice().expect("contiguous row");
    let b = b.as_slice().expect("contiguous row");
    a[..len].iter().zip(&b[..len]).map(|(x, y)| x * y).sum()
}

pub fn column_means(x: ArrayView2<'_, f64>) -> Array1<f64> {
    if x.nrows() == 0 {
        return Array1::zeros(x.ncols());
    }
    x.mean_axis(Axis(0)).expect("non-empty")
}

/// `(X - 1·meanᵀ)` as an owned standard-layout matrix.
pub fn center_columns(x: ArrayView2<'_, f64>, means: ArrayView1<'_, f64>) -> Array2<f64> {
    let mut c = x.as_standard_layout().into_owned();
    for mut row in c.rows_mut() {
        row -= &means;
    }
    c
}

/// `XᵀX` for a standard-layout matrix.
pub fn gram(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let g = x.t().dot(&x);
    // dot() is not guaranteed to be bitwise symmetric
    symmetrize(g)
}

fn symmetrize(mut g: Array2<f64>) -> Array2<f64> {
    let n = g.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = g[[i, j]];
            g[[j, i]] = v;
        }
    }
    g
}
