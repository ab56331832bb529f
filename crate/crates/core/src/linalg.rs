//! Small dense solvers: reduced row echelon form with rank detection, and least squares.

use crate::scalar::Real;

/// General solution `particular + span(null_basis)` of `A x = b`.
#[derive(Debug, Clone)]
pub struct AffineSolution<T> {
    pub particular: Vec<T>,
    pub null_basis: Vec<Vec<T>>,
    pub rank: usize,
    /// Largest right-hand side entry left in a zero row; non-zero means inconsistent.
    pub residual: T,
}

/// Row-reduces `[A | b]` with partial pivoting; entries below `tol * max|A|` count as zero.
pub fn solve_affine<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>, ncols: usize, tol: T) -> AffineSolution<T> {
    let nrows = a.len();
    let scale = a.iter().flat_map(|r| r.iter()).fold(T::zero(), |m, x| m.max(x.abs()));
    let eps = tol * if scale > T::zero() { scale } else { T::one() };
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let (best, val) = (row..nrows)
            .map(|r| (r, a[r][col].abs()))
            .fold((row, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= eps {
            continue;
        }
        a.swap(row, best);
        b.swap(row, best);
        let p = a[row][col];
        for x in a[row].iter_mut() {
            *x = *x / p;
        }
        b[row] = b[row] / p;
        for r in 0..nrows {
            if r != row {
                let f = a[r][col];
                if f != T::zero() {
                    for c in 0..ncols {
                        let v = a[row][c];
                        a[r][c] = a[r][c] - f * v;
                    }
                    b[r] = b[r] - f * b[row];
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();
    let residual = b[rank..].iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let mut particular = vec![T::zero(); ncols];
    for (r, &c) in pivots.iter().enumerate() {
        particular[c] = b[r];
    }
    let mut is_pivot = vec![false; ncols];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let mut null_basis = Vec::new();
    for free in (0..ncols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![T::zero(); ncols];
        v[free] = T::one();
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = -a[r][free];
        }
        null_basis.push(v);
    }
    AffineSolution { particular, null_basis, rank, residual }
}

/// Minimizes `|A x - b|` by Householder QR; `a` is row-major with `ncols` columns.
pub fn least_squares<T: Real>(a: &[Vec<T>], b: &[T], ncols: usize) -> Option<Vec<T>> {
    let m = a.len();
    if m < ncols {
        return None;
    }
    let mut r: Vec<Vec<T>> = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..ncols {
        let norm = (k..m).map(|i| r[i][k] * r[i][k]).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let alpha = if r[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r[i][k]).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|x| *x * *x).sum::<T>();
        if vnorm2 == T::zero() {
            continue;
        }
        for c in k..ncols {
            let dot = (k..m).map(|i| v[i - k] * r[i][c]).sum::<T>();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in k..m {
                r[i][c] = r[i][c] - f * v[i - k];
            }
        }
        let dot = (k..m).map(|i| v[i - k] * y[i]).sum::<T>();
        let f = T::lit(2.0) * dot / vnorm2;
        for i in k..m {
            y[i] = y[i] - f * v[i - k];
        }
    }
    let mut x = vec![T::zero(); ncols];
    for k in (0..ncols).rev() {
        let s = (k + 1..ncols).map(|c| r[k][c] * x[c]).sum::<T>();
        if r[k][k].abs() <= T::epsilon() * T::lit(1e3) * r[0][0].abs() {
            return None;
        }
        x[k] = (y[k] - s) / r[k][k];
    }
    Some(x)
}
