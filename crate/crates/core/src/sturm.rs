//! Solutions of -(p phi')' = lambda phi: closed forms for the two-level
//! profile, RK4 integration of the (phi, p phi') system for general profiles,
//! and the spectral density of the two-level operator.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::profile::BandwidthProfile;

/// (phi_+(lambda, x), phi_-(lambda, x)) for p = p_minus on x <= 0 and p_plus on x > 0.
pub fn toy_fundamental(p_minus: f64, p_plus: f64, lambda: f64, x: f64) -> [C64; 2] {
    toy_pair(p_minus, p_plus, lambda, x).0
}

/// The fluxes (p phi_+', p phi_-') matching [`toy_fundamental`].
pub fn toy_fundamental_flux(p_minus: f64, p_plus: f64, lambda: f64, x: f64) -> [C64; 2] {
    toy_pair(p_minus, p_plus, lambda, x).1
}

fn toy_pair(pm: f64, pp: f64, lambda: f64, x: f64) -> ([C64; 2], [C64; 2]) {
    let km = (lambda / pm).sqrt();
    let kp = (lambda / pp).sqrt();
    let i = C64::i();
    let e = |k: f64| (i * k * x).exp();
    if x <= 0.0 {
        let r = (pp / pm).sqrt();
        let (a, b) = (0.5 * (1.0 + r), 0.5 * (1.0 - r));
        let plus = a * e(km) + b * e(-km);
        let plus_flux = i * pm * km * (a * e(km) - b * e(-km));
        let minus = e(-km);
        let minus_flux = -i * pm * km * e(-km);
        ([plus, minus], [plus_flux, minus_flux])
    } else {
        let r = (pm / pp).sqrt();
        let (a, b) = (0.5 * (1.0 + r), 0.5 * (1.0 - r));
        let plus = e(kp);
        let plus_flux = i * pp * kp * e(kp);
        let minus = a * e(-kp) + b * e(kp);
        let minus_flux = i * pp * kp * (-a * e(-kp) + b * e(kp));
        ([plus, minus], [plus_flux, minus_flux])
    }
}

/// Diagonal of the two-level spectral density in lambda:
/// diag(sqrt p_-, sqrt p_+) / (pi (sqrt p_- + sqrt p_+)^2 sqrt lambda),
/// paired with (phi_+, phi_-).
pub fn toy_spectral_density(p_minus: f64, p_plus: f64, lambda: f64) -> Result<[[f64; 2]; 2]> {
    if !(lambda > 0.0) {
        return Err(Error::SingularEndpoint);
    }
    let (a, b) = (p_minus.sqrt(), p_plus.sqrt());
    let c = PI * (a + b) * (a + b) * lambda.sqrt();
    Ok([[a / c, 0.0], [0.0, b / c]])
}

/// Grid solution of the (phi, p phi') system.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub phi: Vec<C64>,
    pub flux: Vec<C64>,
    profile: BandwidthProfile,
}

/// Integrates u = (phi, p phi'), u' = (u2 / p, -lambda u1) from `x0` to
/// `x_end` with RK4 steps no larger than `step`. Breakpoints of p are grid
/// nodes, so carrying the state across them enforces continuity of phi and
/// p phi'.
pub fn solve_eigen(
    profile: &BandwidthProfile,
    lambda: f64,
    init: [C64; 2],
    x0: f64,
    x_end: f64,
    step: f64,
) -> Result<EigenSolution> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    if lambda > 0.0 {
        let wavelength = 2.0 * PI * (profile.lower_bound() / lambda).sqrt();
        if step > wavelength / 10.0 {
            return Err(Error::StepTooLarge { step, suggested: wavelength / 50.0 });
        }
    }
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let mut cuts = vec![x0];
    cuts.extend(
        profile
            .knots()
            .into_iter()
            .filter(|&t| (t - x0) * dir > 0.0 && (x_end - t) * dir > 0.0),
    );
    cuts.push(x_end);
    cuts.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));

    let piecewise = !profile.is_smooth();
    let mut xs = vec![x0];
    let mut phi = vec![init[0]];
    let mut flux = vec![init[1]];
    let mut u = init;
    for seg in cuts.windows(2) {
        let len = seg[1] - seg[0];
        if len == 0.0 {
            continue;
        }
        let n = (len.abs() / step).ceil().max(1.0) as usize;
        let h = len / n as f64;
        // On a piecewise constant profile p is constant inside a segment; use
        // its interior value so the right-limit convention at nodes is harmless.
        let p_seg = profile.p(0.5 * (seg[0] + seg[1]));
        let p_at = |x: f64| if piecewise { p_seg } else { profile.p(x) };
        let f = |x: f64, v: [C64; 2]| [v[1] / p_at(x), -lambda * v[0]];
        let mut x = seg[0];
        for k in 0..n {
            let k1 = f(x, u);
            let k2 = f(x + 0.5 * h, add(u, k1, 0.5 * h));
            let k3 = f(x + 0.5 * h, add(u, k2, 0.5 * h));
            let k4 = f(x + h, add(u, k3, h));
            for c in 0..2 {
                u[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            x = if k + 1 == n { seg[1] } else { seg[0] + (k + 1) as f64 * h };
            xs.push(x);
            phi.push(u[0]);
            flux.push(u[1]);
        }
    }
    if dir < 0.0 {
        xs.reverse();
        phi.reverse();
        flux.reverse();
    }
    Ok(EigenSolution { lambda, xs, phi, flux, profile: profile.clone() })
}

fn add(u: [C64; 2], k: [C64; 2], h: f64) -> [C64; 2] {
    [u[0] + h * k[0], u[1] + h * k[1]]
}

impl EigenSolution {
    /// (phi(x), p phi'(x)) by cubic Hermite interpolation; x is clamped to the grid.
    pub fn eval(&self, x: f64) -> [C64; 2] {
        let n = self.xs.len();
        if n == 1 {
            return [self.phi[0], self.flux[0]];
        }
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let i = self.xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        if h == 0.0 {
            return [self.phi[i], self.flux[i]];
        }
        let t = (x - x0) / h;
        let p_mid = self.profile.p(0.5 * (x0 + x1));
        let (p0, p1) = if self.profile.is_smooth() { (self.profile.p(x0), self.profile.p(x1)) } else { (p_mid, p_mid) };
        let phi = hermite_c(self.phi[i], self.phi[i + 1], self.flux[i] / p0 * h, self.flux[i + 1] / p1 * h, t);
        let flux = hermite_c(
            self.flux[i],
            self.flux[i + 1],
            -self.lambda * self.phi[i] * h,
            -self.lambda * self.phi[i + 1] * h,
            t,
        );
        [phi, flux]
    }

    /// CSV dump with columns x, Re phi, Im phi, Re p phi', Im p phi'.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,re_phi,im_phi,re_flux,im_flux")?;
        for ((x, p), f) in self.xs.iter().zip(&self.phi).zip(&self.flux) {
            writeln!(out, "{x},{},{},{},{}", p.re, p.im, f.re, f.im)?;
        }
        Ok(())
    }
}

/// W_p(f, g) = p f' g - f p g', from (value, flux) pairs.
pub fn wronskian(f: [C64; 2], g: [C64; 2]) -> C64 {
    f[1] * g[0] - f[0] * g[1]
}

pub(crate) fn hermite_c(y0: C64, y1: C64, m0: C64, m1: C64, t: f64) -> C64 {
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0) + m0 * (t3 - 2.0 * t2 + t) + y1 * (-2.0 * t3 + 3.0 * t2) + m1 * (t3 - t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::BlendShape;
    use crate::quadrature::adaptive;

    #[test]
    fn equal_levels_give_plane_wave() {
        for &x in &[-3.0, -0.2, 0.0, 1.7] {
            let [plus, minus] = toy_fundamental(1.0, 1.0, 2.0, x);
            let want = (C64::i() * 2f64.sqrt() * x).exp();
            assert!((plus - want).norm() < 1e-15);
            assert!((minus - want.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn continuity_at_the_jump() {
        let (pm, pp, lambda) = (1.0, 4.0, 1.3);
        let left = toy_fundamental(pm, pp, lambda, 0.0);
        let right = toy_fundamental(pm, pp, lambda, 1e-300);
        let fl = toy_fundamental_flux(pm, pp, lambda, 0.0);
        let fr = toy_fundamental_flux(pm, pp, lambda, 1e-300);
        for c in 0..2 {
            assert!((left[c] - right[c]).norm() < 1e-12);
            assert!((fl[c] - fr[c]).norm() < 1e-12);
        }
        assert!((left[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn closed_form_matches_ode() {
        let (pm, pp, lambda) = (1.0, 4.0, 1.0);
        let profile = BandwidthProfile::two_level(pm, pp);
        let x0 = 1.0;
        let init = [toy_fundamental(pm, pp, lambda, x0)[0], toy_fundamental_flux(pm, pp, lambda, x0)[0]];
        let sol = solve_eigen(&profile, lambda, init, x0, -PI - 0.5, 1e-3).unwrap();
        let got = sol.eval(-PI);
        let want = toy_fundamental(pm, pp, lambda, -PI)[0];
        assert!((got[0] - want).norm() < 1e-8);
        // cos(-pi) + i 2 sin(-pi)
        assert!((want - C64::new(-1.0, 0.0)).norm() < 1e-12);

        let x0 = 2.0;
        let init = [toy_fundamental(pm, pp, lambda, x0)[1], toy_fundamental_flux(pm, pp, lambda, x0)[1]];
        let sol = solve_eigen(&profile, lambda, init, x0, -2.0, 1e-3).unwrap();
        for i in 0..=40 {
            let x = -2.0 + 0.1 * i as f64;
            let got = sol.eval(x)[0];
            let want = toy_fundamental(pm, pp, lambda, x)[1];
            assert!((got - want).norm() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn cosine_and_constant_solutions() {
        let one = BandwidthProfile::constant(1.0);
        let sol = solve_eigen(&one, 1.0, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0, 10.0, 1e-3).unwrap();
        for (x, p) in sol.xs.iter().zip(&sol.phi) {
            assert!((p.re - x.cos()).abs() < 1e-8 && p.im.abs() < 1e-15);
        }
        for i in 0..100 {
            let x = 0.1 * i as f64 + 0.0137;
            assert!((sol.eval(x)[0].re - x.cos()).abs() < 1e-8);
        }
        let flat = solve_eigen(&one, 0.0, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], -3.0, 5.0, 0.1).unwrap();
        assert!(flat.phi.iter().all(|&p| p == C64::new(1.0, 0.0)));
    }

    #[test]
    fn step_guard() {
        let one = BandwidthProfile::constant(1.0);
        let err = solve_eigen(&one, 100.0, [C64::new(1.0, 0.0); 2], 0.0, 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn toy_wronskian_value() {
        let (pm, pp) = (2.0f64, 5.0f64);
        for &lambda in &[0.3, 1.0, 7.0] {
            for &x in &[-2.0, -0.1, 0.4, 3.0] {
                let v = toy_fundamental(pm, pp, lambda, x);
                let f = toy_fundamental_flux(pm, pp, lambda, x);
                let w = wronskian([v[0], f[0]], [v[1], f[1]]);
                let magnitude = lambda.sqrt() * (pm.sqrt() + pp.sqrt());
                assert!((w - C64::new(0.0, magnitude)).norm() < 1e-12);
                let w = wronskian([v[1], f[1]], [v[0], f[0]]);
                assert!((w - C64::new(0.0, -magnitude)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn wronskian_is_constant_along_integration() {
        let profile = BandwidthProfile::smooth_blend(1.0, 3.0, 1.0, BlendShape::Cubic).unwrap();
        let lambda = 2.0;
        let a = solve_eigen(&profile, lambda, [C64::new(1.0, 0.0), C64::new(0.0, 0.5)], 3.0, -3.0, 1e-3).unwrap();
        let b = solve_eigen(&profile, lambda, [C64::new(0.0, 1.0), C64::new(2.0, 0.0)], 3.0, -3.0, 1e-3).unwrap();
        let w0 = wronskian([a.phi[0], a.flux[0]], [b.phi[0], b.flux[0]]);
        for k in 0..a.xs.len() {
            let w = wronskian([a.phi[k], a.flux[k]], [b.phi[k], b.flux[k]]);
            assert!((w - w0).norm() < 1e-7 * w0.norm());
        }
    }

    #[test]
    fn density_examples() {
        let d = toy_spectral_density(1.0, 1.0, 1.0).unwrap();
        assert!((d[0][0] - 1.0 / (4.0 * PI)).abs() < 1e-16 && d[0][1] == 0.0);
        assert!(matches!(toy_spectral_density(1.0, 2.0, 0.0), Err(Error::SingularEndpoint)));
        let (pm, pp, omega) = (2.0f64, 3.0f64, 4.0f64);
        // Integrable 1/sqrt singularity: integrate in omega = sqrt(lambda).
        let got = adaptive(
            |w| 2.0 * w * toy_spectral_density(pm, pp, w * w).unwrap()[0][0],
            0.0,
            omega.sqrt(),
            Default::default(),
        )
        .unwrap();
        let want = pm.sqrt() * 2.0 * omega.sqrt() / (PI * (pm.sqrt() + pp.sqrt()).powi(2));
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header() {
        let one = BandwidthProfile::constant(1.0);
        let sol = solve_eigen(&one, 1.0, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0, 0.01, 1e-3).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,re_phi,im_phi,re_flux,im_flux\n"));
        assert_eq!(text.lines().count(), sol.xs.len() + 1);
    }
}
