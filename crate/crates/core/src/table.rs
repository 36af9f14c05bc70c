//! Dense square tables for gridded kernels.
//!
//! A kernel on the triangle `0 <= y <= x <= 1` (or its mirror) is stored in
//! a full `n x n` array with the invalid half left at zero; quadratures only
//! ever touch the valid half, and interpolation near the diagonal is
//! triangle-aware.

/// Values on the tensor grid `(x_i, y_j) = (i*dx, j*dx)`, row-major in `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2D {
    n: usize,
    data: Vec<f64>,
}

impl Table2D {
    pub fn zeros(n: usize) -> Self {
        Table2D {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Row `i` as a slice (all `y` for fixed `x_i`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Column `j` collected into a vector (all `x` for fixed `y_j`).
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &Table2D) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Interpolate on the lower triangle `y <= x`. Queries are clamped to
    /// the triangle; cells cut by the diagonal use barycentric
    /// interpolation on their valid half.
    pub fn interp_lower(&self, dx: f64, x: f64, y: f64) -> f64 {
        let n = self.n;
        let top = (n - 1) as f64 * dx;
        let xc = x.clamp(0.0, top);
        let yc = y.clamp(0.0, xc);
        let mut i = (xc / dx).floor() as usize;
        if i > n - 2 {
            i = n - 2;
        }
        let mut j = (yc / dx).floor() as usize;
        if j > i {
            j = i;
        }
        if j > n - 2 {
            j = n - 2;
        }
        let tx = (xc / dx - i as f64).clamp(0.0, 1.0);
        let ty = (yc / dx - j as f64).clamp(0.0, 1.0);
        if j == i {
            // Diagonal cell: valid corners (i,j), (i+1,j), (i+1,j+1).
            let ty = ty.min(tx);
            (1.0 - tx) * self.get(i, j) + (tx - ty) * self.get(i + 1, j) + ty * self.get(i + 1, j + 1)
        } else {
            let f00 = self.get(i, j);
            let f10 = self.get(i + 1, j);
            let f01 = self.get(i, j + 1);
            let f11 = self.get(i + 1, j + 1);
            f00 * (1.0 - tx) * (1.0 - ty)
                + f10 * tx * (1.0 - ty)
                + f01 * (1.0 - tx) * ty
                + f11 * tx * ty
        }
    }

    /// Apply `f` to every entry of the lower triangle (j <= i).
    pub fn fill_lower(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for i in 0..self.n {
            for j in 0..=i {
                self.set(i, j, f(i, j));
            }
        }
    }

    /// Apply `f` to every entry of the upper triangle (j >= i).
    pub fn fill_upper(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for i in 0..self.n {
            for j in i..self.n {
                self.set(i, j, f(i, j));
            }
        }
    }

    /// Apply `f` everywhere.
    pub fn fill(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.set(i, j, f(i, j));
            }
        }
    }

    /// Trapezoid of `table(x_i, .) * profile` over `y in [0, x_i]`.
    pub fn trapz_row_lower(&self, dx: f64, i: usize, profile: &[f64]) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let row = self.row(i);
        let mut s = 0.5 * (row[0] * profile[0] + row[i] * profile[i]);
        for j in 1..i {
            s += row[j] * profile[j];
        }
        s * dx
    }

    /// Trapezoid of `table(x_i, .) * profile` over `y in [x_i, 1]`.
    pub fn trapz_row_upper(&self, dx: f64, i: usize, profile: &[f64]) -> f64 {
        let n = self.n;
        if i >= n - 1 {
            return 0.0;
        }
        let row = self.row(i);
        let mut s = 0.5 * (row[i] * profile[i] + row[n - 1] * profile[n - 1]);
        for j in i + 1..n - 1 {
            s += row[j] * profile[j];
        }
        s * dx
    }

    /// Trapezoid of `table(x_i, .) * profile` over the whole interval.
    pub fn trapz_row_full(&self, dx: f64, i: usize, profile: &[f64]) -> f64 {
        let n = self.n;
        let row = self.row(i);
        let mut s = 0.5 * (row[0] * profile[0] + row[n - 1] * profile[n - 1]);
        for j in 1..n - 1 {
            s += row[j] * profile[j];
        }
        s * dx
    }

    /// Double integral of the square over the lower triangle:
    /// `int_0^1 int_0^x f(x,y)^2 dy dx`.
    pub fn l2_sq_lower(&self, dx: f64) -> f64 {
        let n = self.n;
        let inner: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 {
                    0.0
                } else {
                    let row = self.row(i);
                    let mut s = 0.5 * (row[0] * row[0] + row[i] * row[i]);
                    for j in 1..i {
                        s += row[j] * row[j];
                    }
                    s * dx
                }
            })
            .collect();
        crate::grid::trapz(dx, &inner)
    }

    /// Double integral of the square over the upper triangle:
    /// `int_0^1 int_x^1 f(x,y)^2 dy dx`.
    pub fn l2_sq_upper(&self, dx: f64) -> f64 {
        let n = self.n;
        let inner: Vec<f64> = (0..n)
            .map(|i| {
                if i >= n - 1 {
                    0.0
                } else {
                    let row = self.row(i);
                    let mut s = 0.5 * (row[i] * row[i] + row[n - 1] * row[n - 1]);
                    for j in i + 1..n - 1 {
                        s += row[j] * row[j];
                    }
                    s * dx
                }
            })
            .collect();
        crate::grid::trapz(dx, &inner)
    }

    /// Double integral of the square over the whole square.
    pub fn l2_sq_full(&self, dx: f64) -> f64 {
        let n = self.n;
        let inner: Vec<f64> = (0..n)
            .map(|i| crate::grid::l2_sq(dx, self.row(i)))
            .collect();
        crate::grid::trapz(dx, &inner)
    }
}
