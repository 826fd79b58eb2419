use nalgebra::DMatrix;

use crate::{Error, Result};

/// `d` vector fields on `R^e`, seen as first-order differential operators.
///
/// Implementors supply the composed derivatives
/// `V_{w[0]} ⋯ V_{w[k-1]} I(y)` for words of length `k ≤ max_word_len()`,
/// where `V_i g(y) = ∇g(y) · V_i(y)` and `I` is the identity. The operator
/// applied last in the composition is `V_{w[0]}`; for example
/// `V_1 V_2 I(y) = DV_2(y) V_1(y)`.
///
/// Derivatives are computed analytically by the implementor; there is no
/// automatic differentiation.
pub trait VectorFieldSet: Send + Sync {
    /// State dimension `e`.
    fn state_dim(&self) -> usize;

    /// Number of fields `d`, matching the noise dimension.
    fn noise_dim(&self) -> usize;

    /// Longest word the implementation can evaluate.
    fn max_word_len(&self) -> usize {
        3
    }

    /// Writes `V_{word[0]} ⋯ V_{word[k-1]} I(y)` into `out` (length `e`).
    fn word(&self, word: &[usize], y: &[f64], out: &mut [f64]);

    /// Matrix representation when every field is linear, `V_i(y) = A_i y`.
    fn as_linear(&self) -> Option<&LinearFields> {
        None
    }
}

/// Linear fields `V_i(y) = A_i y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFields {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl LinearFields {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::domain("LinearFields", "at least one matrix required"))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::domain("LinearFields", "empty matrix"));
        }
        for m in &matrices {
            Error::check_dim("LinearFields rows", dim, m.nrows())?;
            Error::check_dim("LinearFields cols", dim, m.ncols())?;
        }
        Ok(Self { dim, matrices })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `B = Σ_i dx_i A_i`.
    pub fn combine(&self, dx: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim, self.dim);
        self.combine_into(dx, b.as_mut_slice());
        b
    }

    /// Column-major `Σ_i dx_i A_i` written into `out`.
    pub(crate) fn combine_into(&self, dx: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, &w) in self.matrices.iter().zip(dx) {
            for (o, v) in out.iter_mut().zip(a.as_slice()) {
                *o += w * v;
            }
        }
    }
}

/// Column-major `out = m * v` for a square `n × n` matrix.
pub(crate) fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &vj) in v.iter().enumerate() {
        let col = &m[j * n..(j + 1) * n];
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * vj;
        }
    }
}

impl VectorFieldSet for LinearFields {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.matrices.len()
    }

    fn max_word_len(&self) -> usize {
        usize::MAX
    }

    // V_{i1}⋯V_{ik} I(y) = A_{ik} ⋯ A_{i1} y: A_{i1} acts first.
    fn word(&self, word: &[usize], y: &[f64], out: &mut [f64]) {
        let mut cur = y.to_vec();
        let mut next = vec![0.0; self.dim];
        for &i in word {
            mat_vec(self.matrices[i].as_slice(), &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
    }

    fn as_linear(&self) -> Option<&LinearFields> {
        Some(self)
    }
}

/// Hides the linear fast path so the generic word expansion is exercised.
pub struct GenericView<'a, F: VectorFieldSet>(pub &'a F);

impl<F: VectorFieldSet> VectorFieldSet for GenericView<'_, F> {
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }
    fn noise_dim(&self) -> usize {
        self.0.noise_dim()
    }
    fn max_word_len(&self) -> usize {
        self.0.max_word_len()
    }
    fn word(&self, word: &[usize], y: &[f64], out: &mut [f64]) {
        self.0.word(word, y, out)
    }
}
