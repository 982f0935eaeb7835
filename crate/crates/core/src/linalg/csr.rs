/// Compressed sparse row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix row by row. Each row is a list of `(column, value)`
    /// pairs with strictly increasing columns.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { rows: rows.len(), cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.col_idx[span.clone()].iter().zip(&self.values[span]).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `y1 = A x1` and `y2 = A x2` in one pass over the entries.
    pub fn mul_vec_pair_into(&self, x1: &[f64], x2: &[f64], y1: &mut [f64], y2: &mut [f64]) {
        debug_assert_eq!(x1.len(), self.cols);
        debug_assert_eq!(x2.len(), self.cols);
        for i in 0..self.rows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let (mut a, mut b) = (0.0, 0.0);
            for (&c, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                a += v * x1[c];
                b += v * x2[c];
            }
            y1[i] = a;
            y2[i] = b;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Row-major dense copy. Only meant for small matrices and test oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                out[i * self.cols + c] = v;
            }
        }
        out
    }

    /// Sub-matrix restricted to `row_range` x `col_range`, with indices
    /// shifted to start at zero.
    pub fn submatrix(&self, row_range: std::ops::Range<usize>, col_range: std::ops::Range<usize>) -> CsrMatrix {
        let rows = row_range
            .map(|i| {
                self.row(i).filter(|(c, _)| col_range.contains(c)).map(|(c, v)| (c - col_range.start, v)).collect()
            })
            .collect();
        CsrMatrix::from_rows(col_range.len(), rows)
    }

    /// Column `j` restricted to `row_range`, as a dense vector.
    pub fn column(&self, j: usize, row_range: std::ops::Range<usize>) -> Vec<f64> {
        row_range.map(|i| self.get(i, j)).collect()
    }
}
