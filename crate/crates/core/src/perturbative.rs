//! Iterative expansion of the comb problem in the couplings between comb sites.
//!
//! The optical amplitudes are eliminated exactly, which leaves an effective
//! mechanical system over `(b_n, b†_n)`. Its on-site part `D` contains the
//! bare mechanical response dressed by the static optical self-energy; the
//! remainder `R` couples sites `n → n±2` through the frequency modulation
//! (`ω_2`) and through the `ω_d`-periodic optical coupling (`ḡ²`). The
//! solution is expanded as
//!
//! ```text
//! M⁻¹ ≈ Σ_{m=0}^{order} (−D⁻¹R)^m D⁻¹
//! ```
//!
//! Order zero gives the shifted thermal terms `X_th(ω ± ω_d)` together with
//! the backaction they carry; order one adds the `−iω_2`-type corrections
//! that reweight the two split peaks; higher orders add the mixed `ω_2 ḡ`
//! terms. With `order = 3` all terms up to cubic order in `{ḡ, ω_2}` that
//! connect distinct comb sites are retained.

use num_complex::Complex64;

use crate::error::{Result, Warning};
use crate::floquet::{comb_index, Modulation, NoiseTransfer, OutputId, SolverOptions, TransferSet};
use crate::model::{chi_m, chi_o, SystemParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Result of the expansion together with regime diagnostics.
#[derive(Debug, Clone)]
pub struct PerturbativeSolution {
    pub transfers: TransferSet,
    pub order: usize,
    pub warnings: Vec<Warning>,
}

/// Closed-form reweighted thermal coefficient of `b_in(ω + sω_d)` in `X±(ω)` for
/// `s = ±1`, to first order in `ω_2`: `s √Γ χ_M(ω+sω_d) [1 + iω_2 χ_M(ω−sω_d)]`.
///
/// At the peak `ω = ω̄_M − sω_d` the bracket is close to `(2ω_d + sω_2)/2ω_d`.
pub fn modulated_thermal_weight(omega: f64, s: i32, p: &SystemParams) -> Result<Complex64> {
    let s = s.signum() as f64;
    let main = chi_m(omega + s * p.omega_d, p.omega_m, p)?;
    let other = chi_m(omega - s * p.omega_d, p.omega_m, p)?;
    Ok(s * p.gamma_m.sqrt() * main * (1.0 + I * p.omega_2 * other))
}

/// Cubic-order expansion with the standard modulation of `p`.
pub fn perturbative_solution(omega: f64, p: &SystemParams, opts: &SolverOptions) -> Result<PerturbativeSolution> {
    perturbative_solution_with(omega, p, &Modulation::from_params(p), opts, 3)
}

pub fn perturbative_solution_with(
    omega: f64,
    p: &SystemParams,
    modulation: &Modulation,
    opts: &SolverOptions,
    order: usize,
) -> Result<PerturbativeSolution> {
    let mut warnings = p.validate()?;
    modulation.validate()?;
    let scale = p.kappa.min(p.omega_m);
    if p.g_bar > 0.1 * scale || p.omega_2 > 0.1 * scale {
        warnings.push(Warning::StrongCoupling { g_bar: p.g_bar, omega_2: p.omega_2 });
    }
    let nh = opts.truncation.max(modulation.max_harmonic()).max(2);
    let nhi = nh as i64;
    let sites = 2 * nh + 1;
    let dim = 2 * sites;
    let mi = |s: i64, f: usize| 2 * (s + nhi) as usize + f;
    let inside = |s: i64| s.abs() <= nhi;
    let wn = |s: i64| omega + s as f64 * p.omega_d;
    let chi_a: Vec<Complex64> = (-nhi..=nhi).map(|s| chi_o(wn(s), p)).collect();
    let chi_ad: Vec<Complex64> = (-nhi..=nhi).map(|s| chi_o(-wn(s), p).conj()).collect();
    let site = |s: i64| (s + nhi) as usize;

    // effective mechanical matrix, dense
    let mut m = vec![ZERO; dim * dim];
    for s in -nhi..=nhi {
        m[mi(s, 0) * dim + mi(s, 0)] += Complex64::new(p.gamma_m / 2.0, -(wn(s) - p.omega_m));
        m[mi(s, 1) * dim + mi(s, 1)] += Complex64::new(p.gamma_m / 2.0, -(wn(s) + p.omega_m));
        for &(k, w) in &modulation.frequency {
            let t = s + k as i64;
            if inside(t) {
                m[mi(s, 0) * dim + mi(t, 0)] += I * w;
                m[mi(s, 1) * dim + mi(t, 1)] -= I * w;
            }
        }
        for &(j, gj) in &modulation.coupling {
            let o = s + j as i64;
            if !inside(o) {
                continue;
            }
            let eta = chi_a[site(o)] - chi_ad[site(o)];
            for &(k, gk) in &modulation.coupling {
                let t = o + k as i64;
                if !inside(t) {
                    continue;
                }
                let v = gj * gk * eta;
                for f in 0..2 {
                    m[mi(s, 0) * dim + mi(t, f)] += v;
                    m[mi(s, 1) * dim + mi(t, f)] -= v;
                }
            }
        }
    }
    // on-site 2×2 blocks and their inverses; R is the remainder
    let mut dinv = vec![[[ZERO; 2]; 2]; sites];
    let mut r = m.clone();
    for s in -nhi..=nhi {
        let (i0, i1) = (mi(s, 0), mi(s, 1));
        let a = m[i0 * dim + i0];
        let b = m[i0 * dim + i1];
        let c = m[i1 * dim + i0];
        let d = m[i1 * dim + i1];
        let det = a * d - b * c;
        if det.norm() == 0.0 {
            return Err(crate::Error::SingularEvaluation(format!(
                "on-site mechanical block singular at omega = {omega}"
            )));
        }
        dinv[site(s)] = [[d / det, -b / det], [-c / det, a / det]];
        for (x, y) in [(i0, i0), (i0, i1), (i1, i0), (i1, i1)] {
            r[x * dim + y] = ZERO;
        }
    }
    let apply_dinv = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![ZERO; dim];
        for s in -nhi..=nhi {
            let di = &dinv[site(s)];
            let (x0, x1) = (v[mi(s, 0)], v[mi(s, 1)]);
            out[mi(s, 0)] = x0 * di[0][0] + x1 * di[1][0];
            out[mi(s, 1)] = x0 * di[0][1] + x1 * di[1][1];
        }
        out
    };
    let row_times_r = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![ZERO; dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == ZERO {
                continue;
            }
            for j in 0..dim {
                let e = r[i * dim + j];
                if e != ZERO {
                    out[j] += vi * e;
                }
            }
        }
        out
    };
    let response = |row: &[Complex64]| -> Vec<Complex64> {
        let mut term = apply_dinv(row);
        let mut total = term.clone();
        for _ in 0..order {
            let next = row_times_r(&term);
            term = apply_dinv(&next).into_iter().map(|v| -v).collect();
            for (t, v) in total.iter_mut().zip(&term) {
                *t += v;
            }
        }
        total
    };

    // map a mechanical row response onto the four input channels
    let sk = p.kappa.sqrt();
    let sg = p.gamma_m.sqrt();
    let to_channels = |z: &[Complex64]| -> Vec<Complex64> {
        let mut c = vec![ZERO; 4 * sites];
        for s in -nhi..=nhi {
            c[comb_index(nh, s, 2)] += z[mi(s, 0)] * sg;
            c[comb_index(nh, s, 3)] += z[mi(s, 1)] * sg;
            for &(j, g) in &modulation.coupling {
                let o = s + j as i64;
                if !inside(o) {
                    continue;
                }
                let w = (-I * g) * z[mi(s, 0)] + (I * g) * z[mi(s, 1)];
                c[comb_index(nh, o, 0)] += w * sk * chi_a[site(o)];
                c[comb_index(nh, o, 1)] += w * sk * chi_ad[site(o)];
            }
        }
        c
    };

    let unit = Complex64::new(1.0, 0.0);
    let mut rx = vec![ZERO; dim];
    rx[mi(0, 0)] = unit;
    rx[mi(0, 1)] = unit;
    let x = to_channels(&response(&rx));

    let mut rpm = vec![ZERO; dim];
    for (s, sign) in [(1i64, 1.0), (-1, -1.0)] {
        rpm[mi(s, 0)] = unit * sign;
        rpm[mi(s, 1)] = unit * sign;
    }
    let x_pm = to_channels(&response(&rpm));

    let lo = Complex64::from_polar(1.0, -opts.lo_phase);
    let (ca, cad) = (chi_a[site(0)], chi_ad[site(0)]);
    let mut ry = vec![ZERO; dim];
    for &(k, g) in &modulation.coupling {
        let t = k as i64;
        if inside(t) {
            let v = g * (-I * lo * ca + I * lo.conj() * cad);
            ry[mi(t, 0)] += v;
            ry[mi(t, 1)] += v;
        }
    }
    let mut y = to_channels(&response(&ry));
    y[comb_index(nh, 0, 0)] += lo * sk * ca;
    y[comb_index(nh, 0, 1)] += lo.conj() * sk * cad;

    let mut y_out: Vec<Complex64> = y.iter().map(|v| -sk * v).collect();
    y_out[comb_index(nh, 0, 0)] += lo;
    y_out[comb_index(nh, 0, 1)] += lo.conj();
    let mut imp = vec![ZERO; 4 * sites];
    imp[comb_index(nh, 0, 0)] = lo * (1.0 - p.kappa * ca);
    imp[comb_index(nh, 0, 1)] = lo.conj() * (1.0 - p.kappa * cad);
    let ba: Vec<Complex64> = y_out.iter().zip(&imp).map(|(a, b)| a - b).collect();

    let mk = |id, c| NoiseTransfer::new(id, omega, nh, c);
    Ok(PerturbativeSolution {
        transfers: TransferSet {
            x: mk(OutputId::X, x),
            x_pm: mk(OutputId::XPm, x_pm),
            y: mk(OutputId::Y, y),
            y_out: mk(OutputId::YOut, y_out),
            imprecision: mk(OutputId::YOut, imp),
            backaction: mk(OutputId::YOut, ba),
            condition: None,
        },
        order,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{solve_transfer_with, NoiseChannel};
    use crate::units::khz;

    fn params(ratio: f64, g: f64) -> SystemParams {
        SystemParams {
            detuning: -khz(75.0),
            kappa: 2.0 * khz(130.0),
            gamma_m: 0.8,
            omega_m: khz(46.0),
            omega_d: khz(0.75),
            omega_2: ratio * 2.0 * khz(0.75),
            g_bar: g,
            n_th: 1e6,
            n_opt: 0.0,
        }
    }

    #[test]
    fn first_order_matches_closed_form_weights() {
        let p = params(0.1, 0.0);
        let opts = SolverOptions::with_truncation(6);
        for w in [p.omega_m - p.omega_d, p.omega_m + p.omega_d, p.omega_m + 123.0] {
            let sol = perturbative_solution_with(w, &p, &Modulation::from_params(&p), &opts, 1).unwrap();
            for s in [1, -1] {
                let got = sol.transfers.x_pm.coefficient(NoiseChannel::MechIn, s as i64);
                let want = modulated_thermal_weight(w, s, &p).unwrap();
                assert!((got - want).norm() < 1e-12 * want.norm(), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn peak_correction_factors() {
        let p = params(0.2, 0.0);
        let low = p.omega_m - p.omega_d;
        let f_low = modulated_thermal_weight(low, 1, &p).unwrap().norm() / (p.gamma_m.sqrt() * 2.0 / p.gamma_m);
        assert!((f_low - (2.0 * p.omega_d + p.omega_2) / (2.0 * p.omega_d)).abs() < 1e-3);
        let high = p.omega_m + p.omega_d;
        let f_high = modulated_thermal_weight(high, -1, &p).unwrap().norm() / (p.gamma_m.sqrt() * 2.0 / p.gamma_m);
        assert!((f_high - (2.0 * p.omega_d - p.omega_2) / (2.0 * p.omega_d)).abs() < 1e-3);
    }

    #[test]
    fn converges_to_comb_solution() {
        let p = params(0.1, 3000.0);
        let opts = SolverOptions::with_truncation(10);
        let m = Modulation::from_params(&p);
        for w in [p.omega_m - p.omega_d, p.omega_m + p.omega_d + 40.0] {
            let exact = solve_transfer_with(w, &p, &m, &opts).unwrap();
            let mut last = f64::INFINITY;
            for order in [1, 3, 8] {
                let approx = perturbative_solution_with(w, &p, &m, &opts, order).unwrap();
                let e = exact.x_pm.psd(&p);
                let err = (approx.transfers.x_pm.psd(&p) - e).abs() / e;
                assert!(err < last);
                last = err;
            }
            assert!(last < 1e-6, "order-8 error {last}");
        }
    }

    #[test]
    fn unmodulated_weights_are_symmetric() {
        let p = params(0.0, 0.0);
        let opts = SolverOptions::with_truncation(4);
        let a = perturbative_solution(p.omega_m - p.omega_d, &p, &opts).unwrap();
        let b = perturbative_solution(p.omega_m + p.omega_d, &p, &opts).unwrap();
        let ra = a.transfers.x_pm.psd(&p);
        let rb = b.transfers.x_pm.psd(&p);
        assert!((ra / rb - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flags_strong_coupling() {
        let p = params(0.1, 1e5);
        let sol = perturbative_solution(p.omega_m, &p, &SolverOptions::with_truncation(4)).unwrap();
        assert!(sol.warnings.iter().any(|w| matches!(w, Warning::StrongCoupling { .. })));
    }
}
