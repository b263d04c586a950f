//! Lowest eigenpairs of a real symmetric tridiagonal matrix.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration on a partially pivoted LU factorization of `T - λI`. Vectors
//! whose eigenvalues lie within `1e-3·‖T‖₁` of each other are treated as a
//! cluster and re-orthogonalized against each other, in the manner of
//! LAPACK's `dstebz` + `dstein`.

use crate::error::{Error, Result};
use crate::grid::dot;

const MAX_INVERSE_ITERATIONS: usize = 5;
const EXTRA_ITERATIONS: usize = 1;
const LANES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// `off` holds the n-1 sub/super-diagonal entries.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Eigensolver("empty matrix".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::Eigensolver(format!(
                "off-diagonal length {} does not match dimension {}",
                off.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&off).any(|v| !v.is_finite()) {
            return Err(Error::Eigensolver("non-finite matrix entry".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn one_norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    fn pivmin(&self) -> f64 {
        f64::MIN_POSITIVE.max(f64::MIN_POSITIVE * self.off.iter().map(|e| e * e).fold(1.0, f64::max))
    }

    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia).
    pub fn count_below(&self, x: f64) -> usize {
        let e2: Vec<f64> = self.off.iter().map(|e| e * e).collect();
        let shifts = [x; LANES];
        self.count_below_many(&e2, self.pivmin(), &shifts)[0]
    }

    /// Sturm counts at `LANES` shifts in one sweep. The recurrences are
    /// independent, so interleaving them hides the division latency.
    fn count_below_many(&self, e2: &[f64], pivmin: f64, shifts: &[f64; LANES]) -> [usize; LANES] {
        let mut count = [0usize; LANES];
        let mut q = [0.0; LANES];
        let d0 = self.diag[0];
        for l in 0..LANES {
            let mut v = d0 - shifts[l];
            if v.abs() < pivmin {
                v = -pivmin;
            }
            count[l] += (v < 0.0) as usize;
            q[l] = v;
        }
        for (d, e) in self.diag[1..].iter().zip(e2) {
            for l in 0..LANES {
                let mut v = d - shifts[l] - e / q[l];
                if v.abs() < pivmin {
                    v = -pivmin;
                }
                count[l] += (v < 0.0) as usize;
                q[l] = v;
            }
        }
        count
    }

    /// The `k` smallest eigenvalues in ascending order, to full precision.
    pub fn lowest_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::Eigensolver(format!(
                "requested {k} eigenvalues of a {n}x{n} matrix"
            )));
        }
        let (glo, ghi) = self.gershgorin();
        let span = (ghi - glo).max(f64::MIN_POSITIVE);
        let lo0 = glo - 2.0 * f64::EPSILON * span - f64::MIN_POSITIVE;
        let hi0 = ghi + 2.0 * f64::EPSILON * span + f64::MIN_POSITIVE;
        let mut lower = vec![lo0; k];
        let mut upper = vec![hi0; k];
        let abs_tol = 2.0 * f64::EPSILON * glo.abs().max(ghi.abs());
        let e2: Vec<f64> = self.off.iter().map(|e| e * e).collect();
        let pivmin = self.pivmin();
        let done = |a: f64, b: f64| {
            let mid = 0.5 * (a + b);
            b - a <= abs_tol.max(2.0 * f64::EPSILON * a.abs().max(b.abs())) || mid <= a || mid >= b
        };
        let mut first = 0;
        loop {
            while first < k && done(lower[first], upper[first]) {
                first += 1;
            }
            if first == k {
                break;
            }
            // one midpoint per distinct open bracket, lowest first
            let mut shifts = [0.0; LANES];
            let mut m = 0;
            let mut last = (f64::NAN, f64::NAN);
            for j in first..k {
                let (a, b) = (lower[j], upper[j]);
                if (a, b) == last || done(a, b) {
                    continue;
                }
                last = (a, b);
                shifts[m] = 0.5 * (a + b);
                m += 1;
                if m == LANES {
                    break;
                }
            }
            for l in m..LANES {
                shifts[l] = shifts[0];
            }
            let counts = self.count_below_many(&e2, pivmin, &shifts);
            for (&mid, &c) in shifts[..m].iter().zip(&counts[..m]) {
                // eigenvalue j (0-based) lies below mid iff j < c
                for j in first..k {
                    if j < c {
                        if mid < upper[j] {
                            upper[j] = mid;
                        }
                    } else if mid > lower[j] {
                        lower[j] = mid;
                    }
                }
            }
        }
        Ok((0..k).map(|i| 0.5 * (lower[i] + upper[i])).collect())
    }

    /// The `k` smallest eigenpairs; vectors have unit Euclidean norm.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = self.lowest_eigenvalues(k)?;
        let n = self.dim();
        if n == 1 {
            return Ok((values, vec![vec![1.0]]));
        }
        let norm = self.one_norm().max(f64::MIN_POSITIVE);
        let ortol = 1e-3 * norm;
        let pertol = 10.0 * f64::EPSILON * norm;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut cluster_start = 0;
        let mut prev_shift = f64::NEG_INFINITY;
        for i in 0..k {
            let mut shift = values[i];
            if i > 0 && values[i] - values[i - 1] > ortol {
                cluster_start = i;
            }
            if i > cluster_start && shift - prev_shift < pertol {
                shift = prev_shift + pertol;
            }
            prev_shift = shift;
            let lu = PivotedLu::factor(&self.diag, &self.off, shift, norm);
            let mut x = start_vector(n, i);
            let growth_target = 1.0 / ((n as f64).sqrt() * f64::EPSILON * norm).max(1e-300);
            let mut extra = 0;
            let mut converged = false;
            for _ in 0..MAX_INVERSE_ITERATIONS + EXTRA_ITERATIONS {
                let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                x.iter_mut().for_each(|v| *v /= scale);
                    let mut y = lu.solve(&x);
                    orthogonalize(&mut y, &vectors[cluster_start..i]);
                let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                x = y;
                if ymax >= growth_target || converged {
                    converged = true;
                    extra += 1;
                    if extra > EXTRA_ITERATIONS {
                        break;
                    }
                }
            }
            orthogonalize(&mut x, &vectors[cluster_start..i]);
            let nrm = dot(&x, &x).sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::Eigensolver(format!(
                    "inverse iteration broke down for eigenvalue {i}"
                )));
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            // fix the sign so the largest component is positive
            let imax = x
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (j, v)| {
                    if v.abs() > bv + 1e-14 {
                        (j, v.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if x[imax] < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            vectors.push(x);
        }
        Ok((values, vectors))
    }
}

fn orthogonalize(y: &mut [f64], basis: &[Vec<f64>]) {
    for prev in basis {
        let c = dot(prev, y);
        y.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
    }
}

/// Deterministic pseudo-random start vector, distinct per eigenvalue index.
fn start_vector(n: usize, index: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    (0..n)
        .map(|_| {
            // splitmix64
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Gaussian elimination with partial pivoting for `T - λI`.
struct PivotedLu {
    inv: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, norm: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * norm;
        let mut u0: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut u1: Vec<f64> = off.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n - 1];
        let mut swapped = vec![false; n - 1];
        for k in 0..n - 1 {
            let sub = off[k];
            let below_diag = diag[k + 1] - shift;
            let below_super = if k + 1 < n - 1 { off[k + 1] } else { 0.0 };
            if u0[k].abs() >= sub.abs() {
                let m = if u0[k] == 0.0 { 0.0 } else { sub / u0[k] };
                mult[k] = m;
                u0[k + 1] = below_diag - m * u1[k];
            } else {
                let m = u0[k] / sub;
                mult[k] = m;
                swapped[k] = true;
                let old_super = u1[k];
                u0[k] = sub;
                u1[k] = below_diag;
                if k + 1 < n - 1 {
                    u2[k] = below_super;
                    u1[k + 1] = -m * below_super;
                }
                u0[k + 1] = old_super - m * below_diag;
            }
        }
        for v in u0.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            inv: u0.iter().map(|v| 1.0 / v).collect(),
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for k in 0..n - 1 {
            let (a, b) = (y[k], y[k + 1]);
            let (first, second) = if self.swapped[k] { (b, a) } else { (a, b) };
            y[k] = first;
            y[k + 1] = second - self.mult[k] * first;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] * self.inv[n - 1];
        x[n - 2] = (y[n - 2] - self.u1[n - 2] * x[n - 1]) * self.inv[n - 2];
        let (mut x1, mut x2) = (x[n - 2], x[n - 1]);
        for k in (0..n - 2).rev() {
            let v = (y[k] - self.u1[k] * x1 - self.u2[k] * x2) * self.inv[k];
            x[k] = v;
            x2 = x1;
            x1 = v;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if i + 1 == j {
                t.off[i]
            } else if j + 1 == i {
                t.off[j]
            } else {
                0.0
            }
        })
    }

    fn check_pairs(t: &SymTridiagonal, k: usize) {
        let (vals, vecs) = t.lowest_eigenpairs(k).unwrap();
        let mut reference: Vec<f64> = dense(t).symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = t.one_norm();
        for i in 0..k {
            assert!((vals[i] - reference[i]).abs() < 1e-12 * scale, "eigenvalue {i}");
            let tv = t.apply(&vecs[i]);
            let res: f64 = tv
                .iter()
                .zip(&vecs[i])
                .map(|(a, b)| (a - vals[i] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-12 * scale, "residual {i}: {res:e}");
            for j in 0..=i {
                let ip = dot(&vecs[i], &vecs[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-12, "gram ({i},{j}) = {ip:e}");
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_matrices_match_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 10, 57] {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t = SymTridiagonal::new(d, e).unwrap();
            check_pairs(&t, n);
        }
    }

    #[test]
    fn handles_exactly_degenerate_blocks() {
        // two decoupled identical blocks give exact double eigenvalues
        let mut d = vec![2.0, -1.0, 0.5, 3.0];
        d.extend_from_slice(&[2.0, -1.0, 0.5, 3.0]);
        let e = vec![1.0, 0.3, -0.7, 0.0, 1.0, 0.3, -0.7];
        let t = SymTridiagonal::new(d, e).unwrap();
        check_pairs(&t, 8);
    }

    #[test]
    fn wilkinson_matrix_close_pairs() {
        // W21+ has pairs of eigenvalues agreeing to ~1e-14
        let n = 21;
        let d: Vec<f64> = (0..n).map(|i| (10.0 - i as f64).abs()).collect();
        let t = SymTridiagonal::new(d, vec![1.0; n - 1]).unwrap();
        check_pairs(&t, n);
    }

    #[test]
    fn count_below_brackets_spectrum() {
        let t = SymTridiagonal::new(vec![2.0; 50], vec![-1.0; 49]).unwrap();
        assert_eq!(t.count_below(-0.1), 0);
        assert_eq!(t.count_below(4.1), 50);
        let vals = t.lowest_eigenvalues(50).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 51.0).cos();
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let t = SymTridiagonal::new(vec![1.0, 2.0], vec![0.5]).unwrap();
        assert!(t.lowest_eigenvalues(0).is_err());
        assert!(t.lowest_eigenvalues(3).is_err());
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(SymTridiagonal::new(vec![f64::NAN], vec![]).is_err());
    }
}
