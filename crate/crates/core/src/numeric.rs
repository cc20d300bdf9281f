//! Small numerical building blocks: generic dense inversion, Halton
//! sampling, grid differences and interpolation, RK4.

use crate::scalar_field::Scalar;

/// Inverts a row-major `r x r` matrix by Gauss-Jordan elimination with
/// partial pivoting on the value part. Returns `None` for a zero pivot.
pub fn invert<S: Scalar>(m: &[S], r: usize) -> Option<Vec<S>> {
    assert_eq!(m.len(), r * r);
    let mut a: Vec<S> = m.to_vec();
    let mut inv: Vec<S> = (0..r * r)
        .map(|k| S::constant(if k / r == k % r { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..r {
        let pivot = (col..r)
            .max_by(|&p, &q| {
                a[p * r + col]
                    .value()
                    .abs()
                    .total_cmp(&a[q * r + col].value().abs())
            })
            .unwrap();
        if a[pivot * r + col].value() == 0.0 || !a[pivot * r + col].value().is_finite() {
            return None;
        }
        if pivot != col {
            for k in 0..r {
                a.swap(pivot * r + k, col * r + k);
                inv.swap(pivot * r + k, col * r + k);
            }
        }
        let p = a[col * r + col].clone();
        for k in 0..r {
            a[col * r + k] = a[col * r + k].clone() / p.clone();
            inv[col * r + k] = inv[col * r + k].clone() / p.clone();
        }
        for row in 0..r {
            if row == col {
                continue;
            }
            let factor = a[row * r + col].clone();
            for k in 0..r {
                a[row * r + k] = a[row * r + k].clone() - factor.clone() * a[col * r + k].clone();
                inv[row * r + k] = inv[row * r + k].clone() - factor.clone() * inv[col * r + k].clone();
            }
        }
    }
    Some(inv)
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv_base = 1.0 / base as f64;
    let mut f = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % b) as f64;
        index /= b;
        f *= inv_base;
    }
    out
}

/// Halton sequence in `dims` dimensions. The seed selects the starting index.
#[derive(Debug, Clone)]
pub struct Halton {
    dims: usize,
    next: u64,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "too many Halton dimensions");
        Halton {
            dims,
            next: seed.wrapping_mul(1_000_003).wrapping_add(1) % (1 << 40) + 1,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        (0..self.dims).map(|d| radical_inverse(i, PRIMES[d])).collect()
    }
}

/// Quasi-random points inside an axis-aligned box.
pub fn sample_box(domain: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut h = Halton::new(domain.len(), seed);
    (0..count)
        .map(|_| {
            h.next_point()
                .iter()
                .zip(domain)
                .map(|(u, (lo, hi))| lo + u * (hi - lo))
                .collect()
        })
        .collect()
}

pub(crate) fn is_uniform(grid: &[f64]) -> bool {
    if grid.len() < 3 {
        return true;
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    grid.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
}

/// Second-order derivative of samples on a (possibly non-uniform) grid:
/// centered three-point formula inside, one-sided three-point at the ends.
pub fn grid_derivative2(grid: &[f64], f: &[f64]) -> Vec<f64> {
    let n = grid.len();
    assert_eq!(n, f.len());
    assert!(n >= 3, "need at least three nodes");
    let three = |i0: usize, i1: usize, i2: usize, at: usize| {
        // derivative at grid[at] of the quadratic through three nodes
        let (t0, t1, t2) = (grid[i0], grid[i1], grid[i2]);
        let t = grid[at];
        let l0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
        let l1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
        let l2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
        l0 * f[i0] + l1 * f[i1] + l2 * f[i2]
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                three(0, 1, 2, 0)
            } else if i == n - 1 {
                three(n - 3, n - 2, n - 1, n - 1)
            } else {
                three(i - 1, i, i + 1, i)
            }
        })
        .collect()
}

/// Fourth-order derivative on a uniform grid (five-point stencils, skewed
/// at the ends). Falls back to [`grid_derivative2`] otherwise.
pub fn grid_derivative4(grid: &[f64], f: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n < 5 || !is_uniform(grid) {
        return grid_derivative2(grid, f);
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let c = 1.0 / (12.0 * h);
    (0..n)
        .map(|i| {
            if i == 0 {
                c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4])
            } else if i == 1 {
                c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4])
            } else if i == n - 2 {
                -c * (-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] + f[n - 5])
            } else if i == n - 1 {
                -c * (-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4]
                    - 3.0 * f[n - 5])
            } else {
                c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2])
            }
        })
        .collect()
}

/// Applies a scalar grid-derivative rule to every component of vector samples.
pub fn grid_derivative_vec(
    grid: &[f64],
    values: &[Vec<f64>],
    rule: fn(&[f64], &[f64]) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let dim = values.first().map_or(0, |v| v.len());
    let mut out = vec![vec![0.0; dim]; values.len()];
    let mut column = vec![0.0; values.len()];
    for c in 0..dim {
        for (k, v) in values.iter().enumerate() {
            column[k] = v[c];
        }
        for (k, d) in rule(grid, &column).into_iter().enumerate() {
            out[k][c] = d;
        }
    }
    out
}

/// Cubic Lagrange interpolation of samples at the midpoint of segment `k`,
/// using the four nearest nodes (three when the grid is that short).
pub fn midpoint_value(grid: &[f64], f: &[f64], k: usize) -> f64 {
    let n = grid.len();
    assert!(k + 1 < n);
    let t = 0.5 * (grid[k] + grid[k + 1]);
    let width = n.min(4);
    let start = (k as isize - 1).clamp(0, (n - width) as isize) as usize;
    let nodes = start..start + width;
    let mut acc = 0.0;
    for i in nodes.clone() {
        let mut l = 1.0;
        for j in nodes.clone() {
            if j != i {
                l *= (t - grid[j]) / (grid[i] - grid[j]);
            }
        }
        acc += l * f[i];
    }
    acc
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and slopes.
/// Returns the interpolated value and derivative at `t`.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> (f64, f64) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, deriv)
}

/// Trapezoid rule on a grid.
pub fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Uniform grid of `steps` intervals on `[t0, t1]`, with the step length
/// adjusted so the last node lands exactly on `t1`.
pub fn uniform_grid(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && t1 > t0, "grid needs t1 > t0 and a positive step");
    let steps = (((t1 - t0) / step).round() as usize).max(1);
    let h = (t1 - t0) / steps as f64;
    (0..=steps)
        .map(|k| if k == steps { t1 } else { t0 + k as f64 * h })
        .collect()
}

pub(crate) fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// Classical RK4 step for `y' = f(t, y)`.
pub fn rk4_step<E>(
    f: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    t: f64,
    y: &[f64],
    h: f64,
    k1: Vec<f64>,
) -> Result<Vec<f64>, E> {
    let k2 = f(t + 0.5 * h, &axpy(0.5 * h, &k1, y))?;
    let k3 = f(t + 0.5 * h, &axpy(0.5 * h, &k2, y))?;
    let k4 = f(t + h, &axpy(h, &k3, y))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_field::Jet;

    #[test]
    fn inverse_of_small_matrix() {
        let m = [4.0, 1.0, 2.0, 3.0];
        let inv = invert(&m, 2).unwrap();
        let expected = [0.3, -0.1, -0.2, 0.4];
        for (a, b) in inv.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn inverse_derivative_matches_closed_form() {
        // d/dx inv(diag(1, x)) = diag(0, -1/x^2)
        let m = [
            Jet::constant(1.0),
            Jet::constant(0.0),
            Jet::constant(0.0),
            Jet::variable(2.0, 0, 1, 2),
        ];
        let inv = invert(&m, 2).unwrap();
        assert_eq!(inv[3].value(), 0.5);
        assert_eq!(inv[3].d(0), -0.25);
        assert_eq!(inv[3].dd(0, 0), 0.25);
        assert_eq!(inv[1].d(0), 0.0);
    }

    #[test]
    fn halton_is_deterministic_and_in_unit_box() {
        let a = sample_box(&[(0.0, 1.0), (-2.0, 2.0)], 50, 42);
        let b = sample_box(&[(0.0, 1.0), (-2.0, 2.0)], 50, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p[0] >= 0.0 && p[0] < 1.0 && p[1] >= -2.0 && p[1] < 2.0));
        assert_ne!(a, sample_box(&[(0.0, 1.0), (-2.0, 2.0)], 50, 7));
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn difference_rules_are_exact_on_polynomials() {
        let grid: Vec<f64> = (0..9).map(|k| 0.1 * k as f64).collect();
        let quad: Vec<f64> = grid.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        for (t, d) in grid.iter().zip(grid_derivative2(&grid, &quad)) {
            assert!((d - (6.0 * t - 1.0)).abs() < 1e-12);
        }
        let quartic: Vec<f64> = grid.iter().map(|t| t.powi(4) - 2.0 * t.powi(3)).collect();
        for (t, d) in grid.iter().zip(grid_derivative4(&grid, &quartic)) {
            assert!((d - (4.0 * t.powi(3) - 6.0 * t * t)).abs() < 1e-11);
        }
        let uneven = [0.0, 0.1, 0.35, 0.4, 0.9];
        let q: Vec<f64> = uneven.iter().map(|t| t * t).collect();
        for (t, d) in uneven.iter().zip(grid_derivative2(&uneven, &q)) {
            assert!((d - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_interpolation_is_cubic_exact() {
        let grid: Vec<f64> = (0..6).map(|k| 0.2 * k as f64).collect();
        let f: Vec<f64> = grid.iter().map(|t| t.powi(3) - t).collect();
        for k in 0..5 {
            let t: f64 = 0.5 * (grid[k] + grid[k + 1]);
            assert!((midpoint_value(&grid, &f, k) - (t.powi(3) - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn rk4_integrates_exponential() {
        let mut f = |_t: f64, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![y[0]]) };
        let mut y = vec![1.0];
        let h = 0.01;
        for k in 0..100 {
            let k1 = f(k as f64 * h, &y).unwrap();
            y = rk4_step(&mut f, k as f64 * h, &y, h, k1).unwrap();
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }
}
