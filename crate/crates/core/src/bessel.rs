//! Bessel functions of the first kind for integer order.
//!
//! Values come from Miller's backward recurrence normalized with
//! `J_0 + 2 Σ J_2k = 1`, which is stable for all orders at once.

/// `J_0(x) … J_nmax(x)`.
pub fn bessel_j_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = nmax.max(ax.ceil() as usize);
    let mut start = top + 20 + (40.0 * (top as f64 + 1.0)).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // rescale to keep the recurrence in range
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        let m = k - 1;
        if m <= nmax {
            out[m] = j_cur;
        }
        if m > 0 && m % 2 == 0 {
            norm += 2.0 * j_cur;
        }
    }
    norm += j_cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer `n`, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_all(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Smallest order `n` with `|J_k(x)| < tol` for every `k ≥ n`.
pub fn truncation_order(x: f64, tol: f64) -> usize {
    let ax = x.abs();
    let guess = (ax + 10.0 + 4.0 * ax.cbrt()) as usize + 2;
    let vals = bessel_j_all(guess + 10, ax);
    let mut n = vals.len();
    while n > 0 && vals[n - 1].abs() < tol {
        n -= 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: i32, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = (x / 2.0).powi(n) / (1..=n).map(f64::from).product::<f64>();
        for k in 0..80 {
            sum += term;
            term *= -(x * x / 4.0) / ((k + 1) as f64 * (k + 1 + n) as f64);
        }
        sum
    }

    #[test]
    fn matches_power_series() {
        for &x in &[0.01, 0.3, 1.0, 2.404_825_557_695_773, 5.5, 9.0] {
            for n in 0..12 {
                let a = bessel_j(n, x);
                let b = series(n, x);
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn known_zero_and_values() {
        assert!(bessel_j(0, 2.404_825_557_695_773).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert_eq!(bessel_j(0, 0.0), 1.0);
    }

    #[test]
    fn symmetry_relations() {
        for n in -5..=5 {
            let x = 1.7;
            assert!((bessel_j(n, -x) - (-1f64).powi(n) * bessel_j(n, x)).abs() < 1e-15);
            assert!((bessel_j(-n, x) - (-1f64).powi(n) * bessel_j(n, x)).abs() < 1e-15);
        }
    }

    #[test]
    fn large_argument() {
        // asymptotic J_0(x) ~ sqrt(2/(πx)) cos(x - π/4) with first correction
        let x = 60.0;
        let p = 1.0 - 9.0 / (128.0 * x * x);
        let q = -1.0 / (8.0 * x);
        let phase = x - std::f64::consts::FRAC_PI_4;
        let asym = (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * phase.cos() - q * phase.sin());
        assert!((bessel_j(0, x) - asym).abs() < 1e-7);
    }

    #[test]
    fn truncation_order_bounds_tail() {
        let x = 3.0;
        let n = truncation_order(x, 1e-12);
        assert!(bessel_j(n as i32, x).abs() < 1e-12);
        assert!(bessel_j(n as i32 - 1, x).abs() >= 1e-12);
    }
}
