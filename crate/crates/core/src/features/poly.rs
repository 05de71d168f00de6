//! Full polynomial expansion: every monomial of total degree `<= degree`,
//! constant term first, then degree-grouped in lexicographic order
//! (`[1, a, b, a², ab, b²]` for two inputs at degree 2).

use ndarray::{Array2, ArrayView2};

pub const MAX_DEGREE: u32 = 5;

/// `C(p + degree, degree)`, saturating at `usize::MAX`.
pub fn expanded_width(p: usize, degree: u32) -> usize {
    let mut w: u128 = 1;
    for i in 1..=degree as u128 {
        w = w * (p as u128 + i) / i;
        if w > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    w as usize
}

/// Precomputed monomial layout for a given input width and degree.
#[derive(Debug, Clone)]
pub struct PolyPlan {
    n_inputs: usize,
    degree: u32,
    /// Non-decreasing input indexes per monomial; empty for the constant.
    terms: Vec<Vec<usize>>,
    /// For each non-constant monomial: (index of the monomial without its last
    /// factor, that last factor).
    recipe: Vec<(usize, usize)>,
}

impl PolyPlan {
    pub fn new(n_inputs: usize, degree: u32) -> Self {
        let mut terms: Vec<Vec<usize>> = vec![Vec::new()];
        let mut recipe = vec![(0, 0)];
        // first index of each degree block
        let mut block_start = vec![0usize];
        for d in 1..=degree as usize {
            let prev_start = block_start[d - 1];
            let prev_end = terms.len();
            block_start.push(prev_end);
            for parent in prev_start..prev_end {
                let last = terms[parent].last().copied().unwrap_or(0);
                for v in last..n_inputs {
                    let mut t = terms[parent].clone();
                    t.push(v);
                    terms.push(t);
                    recipe.push((parent, v));
                }
            }
        }
        Self {
            n_inputs,
            degree,
            terms,
            recipe,
        }
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn expand(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.n_inputs, "expansion input width mismatch");
        let mut out = Array2::<f64>::zeros((x.nrows(), self.width()));
        for (src, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            dst[0] = 1.0;
            for k in 1..self.recipe.len() {
                let (parent, v) = self.recipe[k];
                dst[k] = dst[parent] * src[v];
            }
        }
        out
    }

    /// Monomial names such as `1`, `a`, `a^2*b`.
    pub fn names(&self, inputs: &[String]) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| {
                if t.is_empty() {
                    return "1".to_string();
                }
                let mut parts: Vec<String> = Vec::new();
                let mut i = 0;
                while i < t.len() {
                    let mut j = i;
                    while j < t.len() && t[j] == t[i] {
                        j += 1;
                    }
                    let name = &inputs[t[i]];
                    parts.push(if j - i == 1 {
                        name.clone()
                    } else {
                        format!("{name}^{}", j - i)
                    });
                    i = j;
                }
                parts.join("*")
            })
            .collect()
    }
}
