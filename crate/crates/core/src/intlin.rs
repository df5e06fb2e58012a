//! Small exact integer linear algebra: column Hermite normal form, kernels,
//! and reduction modulo a full-rank lattice.

/// Column-style Hermite normal form: returns `(H, U, pivots)` with
/// `A·U = H`, `U` unimodular, `H` in column echelon form with positive
/// pivots and entries left of each pivot reduced into `[0, pivot)`.
/// `pivots[k]` is the pivot row of column `k`.
pub fn column_hnf(a: &[Vec<i64>], ncols: usize) -> (Vec<Vec<i128>>, Vec<Vec<i128>>, Vec<usize>) {
    let m = a.len();
    let mut h: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut u: Vec<Vec<i128>> = (0..ncols).map(|i| (0..ncols).map(|j| i128::from(i == j)).collect()).collect();
    let col_op = |h: &mut Vec<Vec<i128>>, u: &mut Vec<Vec<i128>>, dst: usize, src: usize, f: i128| {
        for row in h.iter_mut() {
            row[dst] = row[dst].checked_sub(f.checked_mul(row[src]).expect("overflow")).expect("overflow");
        }
        for row in u.iter_mut() {
            row[dst] = row[dst].checked_sub(f.checked_mul(row[src]).expect("overflow")).expect("overflow");
        }
    };
    let swap = |h: &mut Vec<Vec<i128>>, u: &mut Vec<Vec<i128>>, x: usize, y: usize| {
        for row in h.iter_mut() {
            row.swap(x, y);
        }
        for row in u.iter_mut() {
            row.swap(x, y);
        }
    };
    let negate = |h: &mut Vec<Vec<i128>>, u: &mut Vec<Vec<i128>>, x: usize| {
        for row in h.iter_mut() {
            row[x] = -row[x];
        }
        for row in u.iter_mut() {
            row[x] = -row[x];
        }
    };
    let mut k = 0;
    let mut pivots = Vec::new();
    for i in 0..m {
        if k >= ncols {
            break;
        }
        loop {
            // smallest nonzero |entry| in row i among columns ≥ k
            let best = (k..ncols).filter(|&j| h[i][j] != 0).min_by_key(|&j| h[i][j].abs());
            let Some(b) = best else { break };
            swap(&mut h, &mut u, k, b);
            let mut done = true;
            for j in (k + 1)..ncols {
                if h[i][j] != 0 {
                    let f = h[i][j].div_euclid(h[i][k]);
                    col_op(&mut h, &mut u, j, k, f);
                    if h[i][j] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if h[i][k] == 0 {
            continue;
        }
        if h[i][k] < 0 {
            negate(&mut h, &mut u, k);
        }
        for j in 0..k {
            let f = h[i][j].div_euclid(h[i][k]);
            if f != 0 {
                col_op(&mut h, &mut u, j, k, f);
            }
        }
        pivots.push(i);
        k += 1;
    }
    (h, u, pivots)
}

/// Rank over Q.
pub fn rank(a: &[Vec<i64>], ncols: usize) -> usize {
    column_hnf(a, ncols).2.len()
}

/// A Z-basis of `{x ∈ Z^n : A x = 0}`.
pub fn integer_kernel(a: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let (_, u, pivots) = column_hnf(a, ncols);
    (pivots.len()..ncols)
        .map(|j| (0..ncols).map(|i| i64::try_from(u[i][j]).expect("kernel entry overflow")).collect())
        .collect()
}

/// Full-rank lattice `L = V·Z^g` in lower-triangular Hermite form, with the
/// unimodular change of basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    pub h: Vec<Vec<i128>>,
    pub u: Vec<Vec<i128>>,
}

impl LatticeBasis {
    /// `None` when `V` is singular.
    pub fn new(v: &[Vec<i64>]) -> Option<Self> {
        let g = v.len();
        let (h, u, pivots) = column_hnf(v, g);
        (pivots.len() == g && pivots.iter().enumerate().all(|(k, &r)| k == r)).then_some(LatticeBasis { h, u })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// Multiples `k` with `x − Σ kᵢ hᵢ` in the box `∏ [0, h_ii)`.
    pub fn reduce(&self, x: &[i64]) -> (Vec<i64>, Vec<i64>) {
        let g = self.dim();
        let mut y: Vec<i128> = x.iter().map(|&t| t as i128).collect();
        let mut ks = vec![0i64; g];
        for i in 0..g {
            let k = y[i].div_euclid(self.h[i][i]);
            ks[i] = k as i64;
            for r in 0..g {
                y[r] -= k * self.h[r][i];
            }
        }
        (y.into_iter().map(|t| t as i64).collect(), ks)
    }
}

/// `A · B` for small integer matrices.
pub fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.first().map_or(0, Vec::len);
    (0..n).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn identity(n: usize) -> Vec<Vec<i64>> {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_example() {
        let a = vec![vec![1, 2, 3], vec![2, 4, 6]];
        let k = integer_kernel(&a, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(mat_mul(&a, &transpose(&[v.clone()])), vec![vec![0], vec![0]]);
        }
    }

    #[test]
    fn box_reduction() {
        let l = LatticeBasis::new(&[vec![3, 1], vec![1, 3]]).unwrap();
        let (r, _) = l.reduce(&[7, -5]);
        assert!(r.iter().zip(0..).all(|(&x, i)| 0 <= x as i128 && (x as i128) < l.h[i][i]));
        assert!(LatticeBasis::new(&[vec![1, 2], vec![2, 4]]).is_none());
    }

    proptest! {
        #[test]
        fn hnf_is_a_factorization(rows in proptest::collection::vec(proptest::collection::vec(-9i64..9, 4), 3)) {
            let (h, u, _) = column_hnf(&rows, 4);
            for i in 0..3 {
                for j in 0..4 {
                    let s: i128 = (0..4).map(|k| rows[i][k] as i128 * u[k][j]).sum();
                    prop_assert_eq!(s, h[i][j]);
                }
            }
            for v in integer_kernel(&rows, 4) {
                for r in &rows {
                    prop_assert_eq!(r.iter().zip(&v).map(|(a, b)| a * b).sum::<i64>(), 0);
                }
            }
        }

        #[test]
        fn reduction_is_canonical(x in proptest::collection::vec(-50i64..50, 2), k in proptest::collection::vec(-4i64..4, 2)) {
            let v = vec![vec![4, 1], vec![1, 5]];
            let l = LatticeBasis::new(&v).unwrap();
            let shifted: Vec<i64> = (0..2).map(|i| x[i] + v[i][0] * k[0] + v[i][1] * k[1]).collect();
            prop_assert_eq!(l.reduce(&x).0, l.reduce(&shifted).0);
        }
    }
}
