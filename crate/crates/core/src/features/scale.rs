use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Per-column standardization with sample (n - 1) standard deviations.
///
/// Constant columns are recorded and passed through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub constant: Vec<bool>,
}

fn is_constant(sd: f64, mean: f64) -> bool {
    !(sd > 1e-12 * mean.abs().max(1.0))
}

impl Scaler {
    /// Fits column statistics. Requires at least two rows.
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        assert!(n >= 2, "scaler needs at least two rows");
        let mut means = Vec::with_capacity(x.ncols());
        let mut std_devs = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            let c = is_constant(sd, mean);
            means.push(mean);
            std_devs.push(if c { 1.0 } else { sd });
            constant.push(c);
        }
        Self {
            means,
            std_devs,
            constant,
        }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.width(), "scaler width mismatch");
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                if !self.constant[j] {
                    *v = (*v - self.means[j]) / self.std_devs[j];
                }
            }
        }
        out
    }

    pub fn inverse(&self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(z.ncols(), self.width(), "scaler width mismatch");
        let mut out = z.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                if !self.constant[j] {
                    *v = *v * self.std_devs[j] + self.means[j];
                }
            }
        }
        out
    }
}
