//! Banded complex LU factorization with partial pivoting.
//!
//! Storage is dense row-major; all loops are restricted to the band, so the
//! cost is `O(n · kl · (kl + ku))`. Row interchanges follow the LAPACK
//! `gbtrf` convention: multipliers are not permuted, and interchanges are
//! replayed during the solves.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition number above which a system is reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && i + self.ku >= j, "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        self.data[i * self.n + j] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).map(|j| self.data[i * self.n + j] * x[j]).sum()
            })
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                let lo = j.saturating_sub(self.ku);
                let hi = (j + self.kl + 1).min(self.n);
                (lo..hi).map(|i| self.data[i * self.n + j].norm()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(self) -> Result<BandLu> {
        BandLu::new(self)
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku_fill: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
    norm1: f64,
}

impl BandLu {
    fn new(a: BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku_fill = a.ku + a.kl;
        let norm1 = a.norm1();
        let mut lu = a.data;
        let mut piv = vec![0; n];
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let last_col = (j + ku_fill).min(n - 1);
            let mut p = j;
            let mut best = lu[j * n + j].norm();
            for i in j + 1..=last_row {
                let v = lu[i * n + j].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularSystem { condition: f64::INFINITY });
            }
            if p != j {
                for c in j..=last_col {
                    lu.swap(j * n + c, p * n + c);
                }
            }
            let inv = 1.0 / lu[j * n + j];
            for i in j + 1..=last_row {
                let m = lu[i * n + j] * inv;
                lu[i * n + j] = m;
                if m.norm_sqr() == 0.0 {
                    continue;
                }
                for c in j + 1..=last_col {
                    let u = lu[j * n + c];
                    lu[i * n + c] -= m * u;
                }
            }
        }
        Ok(Self { n, kl, ku_fill, lu, piv, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            b.swap(j, self.piv[j]);
            let bj = b[j];
            for i in j + 1..=(j + self.kl).min(n - 1) {
                b[i] -= self.lu[i * n + j] * bj;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + self.ku_fill).min(n - 1) {
                s -= self.lu[i * n + c] * b[c];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }

    /// Solves `Aᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for c in i.saturating_sub(self.ku_fill)..i {
                s -= self.lu[c * n + i].conj() * b[c];
            }
            b[i] = s / self.lu[i * n + i].conj();
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for i in j + 1..=(j + self.kl).min(n - 1) {
                s -= self.lu[i * n + j].conj() * b[i];
            }
            b[j] = s;
            b.swap(j, self.piv[j]);
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }

    /// Row vector `rᵀ A⁻¹`, i.e. the response of the linear functional `r` to each source.
    pub fn left_solve(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut z: Vec<Complex64> = r.iter().map(|v| v.conj()).collect();
        self.solve_adjoint_in_place(&mut z);
        for v in z.iter_mut() {
            *v = v.conj();
        }
        z
    }

    /// Hager–Higham estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        let one = Complex64::new(1.0, 0.0);
        let mut x = vec![one / n as f64; n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.norm()).sum::<f64>();
            let xi: Vec<Complex64> = y.iter().map(|v| if v.norm() > 0.0 { v / v.norm() } else { one }).collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) =
                z.iter()
                    .enumerate()
                    .map(|(i, v)| (i, v.norm()))
                    .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if j == last_j || zmax <= ztx {
                break;
            }
            last_j = j;
            x = vec![Complex64::new(0.0, 0.0); n];
            x[j] = one;
        }
        // alternating test vector guards against underestimates
        let alt: Vec<Complex64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        self.norm1 * est.max(alt_est)
    }

    /// Returns an error when the condition estimate exceeds [`MAX_CONDITION`].
    pub fn check_condition(&self) -> Result<f64> {
        let c = self.condition_estimate();
        if !c.is_finite() || c > MAX_CONDITION {
            return Err(Error::SingularSystem { condition: c });
        }
        Ok(c)
    }
}
