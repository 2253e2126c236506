use crate::error::{Error, Result};

/// A named trainable tensor with an accumulated gradient of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    name: String,
    shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::shape("ParamTensor::from_values", n, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter values".into()));
        }
        Ok(Self {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.values[r * cols..(r + 1) * cols]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = self.shape[1];
        &mut self.grad[r * cols..(r + 1) * cols]
    }

    /// Views this rank-2 tensor as a matrix (copies values).
    pub fn to_mat(&self) -> Mat {
        debug_assert_eq!(self.shape.len(), 2);
        Mat::from_vec(self.shape[0], self.shape[1], self.values.clone())
    }
}

/// Anything that owns trainable tensors.
pub trait Parameterized {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec size");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · other`
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("inner dim {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                format!("cols {}", self.cols),
                format!("{}", other.cols),
            ));
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("rows {}", self.rows),
                format!("{}", other.rows),
            ));
        }
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Rows `0..n`.
    pub fn head_rows(&self, n: usize) -> Mat {
        Mat::from_vec(n, self.cols, self.data[..n * self.cols].to_vec())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
