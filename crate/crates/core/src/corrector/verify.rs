//! Residuals of every structural identity of the extended corrector.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExtendedCorrector;
use crate::error::Result;
use crate::grid::{div_slice, grad_slice, CoefficientField, Neighbors};
use crate::scalar::{cast, count, to_f64, Real};
use crate::solvers::operator::{div_flux, SliceCoeffs};
use crate::solvers::TimeScheme;

/// Pass thresholds of [`verify`].
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyThresholds {
    pub corrector: f64,
    pub psi: f64,
    pub sigma_divergence: f64,
    pub zeta: f64,
    pub normalization: f64,
    /// Number of random test vectors for the `â` margins.
    pub margin_samples: usize,
    pub scheme: TimeScheme,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        Self {
            corrector: 1e-8,
            psi: 1e-10,
            sigma_divergence: 1e-10,
            zeta: 1e-10,
            normalization: 1e-10,
            margin_samples: 100,
            scheme: TimeScheme::ImplicitEuler,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityItem {
    pub name: &'static str,
    pub value: f64,
    /// Upper bound on `value`; margins instead require `value > threshold`.
    pub threshold: f64,
    pub is_margin: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct IdentityReport {
    pub items: Vec<IdentityItem>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.items.iter().filter(|i| !i.passed).map(|i| i.name).collect()
    }

    fn bound(&mut self, name: &'static str, value: f64, threshold: f64) {
        self.items.push(IdentityItem { name, value, threshold, is_margin: false, passed: value <= threshold });
    }

    fn margin(&mut self, name: &'static str, value: f64) {
        self.items.push(IdentityItem { name, value, threshold: 0.0, is_margin: true, passed: value > 0.0 });
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for it in &self.items {
            let rel = if it.is_margin { ">" } else { "<=" };
            writeln!(
                f,
                "{:<24} {:>12.4e} {rel} {:<10.1e} {}",
                it.name,
                it.value,
                it.threshold,
                if it.passed { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn rms<T: Real>(v: &[T]) -> T {
    (v.iter().map(|&x| x * x).sum::<T>() / count(v.len())).sqrt()
}

/// Checks the corrector against `a` item by item. Relative residuals are
/// measured against the natural scale of each equation (forcing, flux, or `|â|`).
pub fn verify<T: Real>(
    a: &CoefficientField<T>,
    c: &ExtendedCorrector<T>,
    th: &VerifyThresholds,
) -> Result<IdentityReport> {
    let grid = *a.grid();
    grid.ensure_same(c.grid())?;
    let d = grid.d();
    let nt = grid.n_t();
    let npts = grid.points();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let inv_tau = T::one() / grid.tau();
    let theta = cast::<T>(th.scheme.theta());
    let mut report = IdentityReport::default();
    let ahom_scale = c.ahom.entries().iter().fold(T::zero(), |acc, v| acc.max(v.abs()));

    // Corrector equation, relative to the forcing div(a e_i).
    let mut worst = T::zero();
    let mut flux = vec![T::zero(); npts * d];
    let mut lu = vec![T::zero(); npts];
    let mut lu_prev = vec![T::zero(); npts];
    let mut f = vec![T::zero(); npts];
    for i in 0..d {
        let mut xi = vec![T::zero(); d];
        xi[i] = T::one();
        let (mut res, mut force) = (T::zero(), T::zero());
        for m in 0..nt {
            let p = (m + nt - 1) % nt;
            let full = SliceCoeffs::full(a, m);
            div_flux(&nb, inv_h, &full, Some(c.phi[i].slice(m)), Some(&xi), &mut flux, &mut lu);
            if theta != T::one() {
                div_flux(&nb, inv_h, &full, Some(c.phi[i].slice(p)), Some(&xi), &mut flux, &mut lu_prev);
            }
            div_flux(&nb, inv_h, &full, None, Some(&xi), &mut flux, &mut f);
            for idx in 0..npts {
                let dt = (c.phi[i].slice(m)[idx] - c.phi[i].slice(p)[idx]) * inv_tau;
                let l = if theta == T::one() { lu[idx] } else { theta * lu[idx] + (T::one() - theta) * lu_prev[idx] };
                res = res + (dt - l) * (dt - l);
                force = force + f[idx] * f[idx];
            }
        }
        let r = if force == T::zero() { res.sqrt() } else { (res / force).sqrt() };
        worst = worst.max(r);
    }
    report.bound("corrector equation", to_f64(worst), th.corrector);

    // ψ Poisson residual and σ divergence identity, per slice.
    let mut psi_worst = T::zero();
    let mut sigma_worst = T::zero();
    let mut div_q = vec![T::zero(); npts];
    let mut lap = vec![T::zero(); npts];
    let mut gpsi = vec![T::zero(); npts * d];
    let mut svec = vec![T::zero(); npts * d];
    let mut sdiv = vec![T::zero(); npts];
    for i in 0..d {
        for m in 0..nt {
            let qs = c.q[i].slice(m);
            div_slice(&nb, inv_h, qs, &mut div_q);
            grad_slice(&nb, inv_h, c.psi[i].slice(m), &mut gpsi);
            div_slice(&nb, inv_h, &gpsi, &mut lap);
            let diff: Vec<T> = lap.iter().zip(&div_q).map(|(&x, &y)| x - y).collect();
            let scale = rms(&div_q);
            let r = rms(&diff);
            psi_worst = psi_worst.max(if scale == T::zero() { r } else { r / scale });

            let q_scale = rms(qs);
            for j in 0..d {
                for idx in 0..npts {
                    for k in 0..d {
                        svec[idx * d + k] = c.sigma_component(i, j, k).slice(m)[idx];
                    }
                }
                div_slice(&nb, inv_h, &svec, &mut sdiv);
                let mean_q = c.conditional.get(m, i, j);
                let mut r = T::zero();
                for idx in 0..npts {
                    let target = qs[idx * d + j] - gpsi[idx * d + j] - mean_q;
                    r = r + (sdiv[idx] - target) * (sdiv[idx] - target);
                }
                let r = (r / count(npts)).sqrt();
                sigma_worst = sigma_worst.max(if q_scale == T::zero() { r } else { r / q_scale });
            }
        }
    }
    report.bound("psi poisson", to_f64(psi_worst), th.psi);
    report.bound("sigma divergence", to_f64(sigma_worst), th.sigma_divergence);

    // Skew symmetry, bit for bit.
    let mut skew = T::zero();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let s = c.sigma_component(i, j, k).values();
                let t = c.sigma_component(i, k, j).values();
                skew = s.iter().zip(t).fold(skew, |acc, (&x, &y)| acc.max((x + y).abs()));
            }
        }
    }
    report.bound("sigma skew symmetry", to_f64(skew), 0.0);

    // ζ: the discrete relation, ζ(0) = 0 and the return to zero after one period.
    let tau = grid.tau();
    let mut zrel = T::zero();
    let mut zclose = T::zero();
    for i in 0..d {
        for j in 0..d {
            for step in 1..=nt {
                let m = step % nt;
                let now = if step == nt { c.zeta.period_end()[i * d + j] } else { c.zeta.get(m, i, j) };
                let before = c.zeta.get(step - 1, i, j);
                let expect = tau * (c.conditional.get(m, i, j) - c.ahom.get(j, i));
                zrel = zrel.max((now - before - expect).abs());
            }
            zclose = zclose.max(c.zeta.get(0, i, j).abs()).max(c.zeta.period_end()[i * d + j].abs());
        }
    }
    let zscale = if ahom_scale == T::zero() { T::one() } else { ahom_scale * grid.period() };
    report.bound("zeta relation", to_f64(zrel / zscale), th.zeta);
    report.bound("zeta endpoints", to_f64(zclose / zscale), th.zeta);

    // Normalizations.
    let mut phi_mean = T::zero();
    let mut slice_mean = T::zero();
    for i in 0..d {
        let scale = c.phi[i].max_abs().max(T::one());
        phi_mean = phi_mean.max(c.phi[i].mean()[0].abs() / scale);
        let sigma_i = (0..d * d).map(|jk| &c.sigma[i * d * d + jk]);
        for f in std::iter::once(&c.psi[i]).chain(sigma_i) {
            let scale = f.max_abs().max(T::one());
            for m in 0..nt {
                let mean = f.slice(m).iter().copied().sum::<T>() / count(npts);
                slice_mean = slice_mean.max(mean.abs() / scale);
            }
        }
    }
    report.bound("phi mean", to_f64(phi_mean), th.normalization);
    report.bound("psi sigma slice means", to_f64(slice_mean), th.normalization);

    // Ellipticity margins of â over random unit directions.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let lambda = c.ahom.lambda();
    let mut lower = T::infinity();
    let mut upper = T::infinity();
    for _ in 0..th.margin_samples {
        let xi: Vec<T> = (0..d).map(|_| cast::<T>(rng.random_range(-1.0..1.0))).collect();
        let n2: T = xi.iter().map(|&v| v * v).sum();
        if n2 == T::zero() {
            continue;
        }
        let axi = c.ahom.apply(&xi);
        let quad: T = xi.iter().zip(&axi).map(|(&x, &y)| x * y).sum();
        let norm: T = axi.iter().map(|&v| v * v).sum::<T>().sqrt();
        lower = lower.min(quad / n2 - lambda);
        upper = upper.min(T::one() / lambda - norm / n2.sqrt());
    }
    report.margin("ahom lower margin", to_f64(lower));
    report.margin("ahom upper margin", to_f64(upper));
    Ok(report)
}
