//! Scattering theory for -psi'' + q psi = omega^2 psi with compactly supported
//! q: transmission and reflection coefficients, the scattering solutions
//! Phi = (Phi_1, Phi_2) and the associated spectral transform.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::profile::{BandwidthProfile, Interval, WarpTable};
use crate::quadrature::Rule;
use crate::sturm::hermite_c;

/// Potential q with support in [lo, hi].
#[derive(Clone)]
pub struct Potential {
    q: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
    bound: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("support", &(self.lo, self.hi))
            .field("bound", &self.bound)
            .finish()
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential { q: Arc::new(|_| 0.0), lo: 0.0, hi: 0.0, knots: Vec::new(), bound: 0.0 }
    }

    /// q = q0 on [-a, a]; negative q0 is a well, positive a barrier.
    pub fn square_well(q0: f64, a: f64) -> Self {
        Potential { q: Arc::new(move |_| q0), lo: -a, hi: a, knots: Vec::new(), bound: q0.abs() }
    }

    /// Arbitrary bounded q supported in [lo, hi]; `knots` mark jumps of q.
    pub fn from_fn<F>(q: F, lo: f64, hi: f64, knots: Vec<f64>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo <= hi) {
            return Err(Error::Invalid(format!("potential support [{lo}, {hi}] is empty")));
        }
        let n = 4000;
        let bound = (0..=n)
            .map(|i| q(lo + (hi - lo) * i as f64 / n as f64).abs())
            .fold(0.0, f64::max);
        Ok(Potential { q: Arc::new(q), lo, hi, knots, bound })
    }

    /// The Liouville potential of a smooth eventually constant profile, as a
    /// function of the warped coordinate.
    pub fn from_profile(profile: &BandwidthProfile) -> Result<Self> {
        if !profile.is_smooth() {
            return Err(Error::UnsupportedProfile(
                "the potential of a piecewise constant profile is a distribution",
            ));
        }
        let table = Arc::new(WarpTable::new(profile, 4000)?);
        let (lo, hi) = table.zeta_range();
        let t = Arc::clone(&table);
        Self::from_fn(move |s| t.q_at(s), lo, hi, Vec::new())
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s < self.lo || s > self.hi {
            0.0
        } else {
            (self.q)(s)
        }
    }

    pub fn support(&self) -> Interval {
        Interval { a: self.lo, b: self.hi }
    }

    /// Matching radius a with supp q inside [-a, a].
    pub fn radius(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.bound == 0.0 || self.lo == self.hi
    }

    fn step(&self, omega: f64) -> f64 {
        let k = (omega * omega + self.bound).sqrt().max(1e-3);
        let width = (self.hi - self.lo).max(1e-12);
        (2.0 * PI / (50.0 * omega)).min(0.02 / k).min(width / 8.0)
    }

    /// Integrates (psi, psi') from `from` to `to`, recording the state at `stops`
    /// (all between `from` and `to`).
    fn integrate(&self, omega: f64, from: f64, to: f64, init: [C64; 2], stops: &[f64]) -> ([C64; 2], Vec<[C64; 2]>) {
        let dir = if to >= from { 1.0 } else { -1.0 };
        let mut events: Vec<(f64, Option<usize>)> = Vec::with_capacity(stops.len() + self.knots.len() + 1);
        events.extend(
            self.knots
                .iter()
                .filter(|&&t| (t - from) * dir > 0.0 && (to - t) * dir > 0.0)
                .map(|&t| (t, None)),
        );
        events.extend(stops.iter().enumerate().map(|(k, &t)| (t, Some(k))));
        events.push((to, None));
        events.sort_by(|a, b| (a.0 * dir).total_cmp(&(b.0 * dir)));

        let h_max = self.step(omega);
        let w2 = omega * omega;
        let mut u = init;
        let mut out = vec![[C64::new(0.0, 0.0); 2]; stops.len()];
        let mut x = from;
        for (target, tag) in events {
            let len = target - x;
            if len != 0.0 {
                let n = (len.abs() / h_max).ceil().max(1.0) as usize;
                let h = len / n as f64;
                // Clamp into the segment so jumps at its ends are seen one-sided.
                let nudge = 1e-12 * len.abs();
                let (seg_lo, seg_hi) = (x.min(target) + nudge, x.max(target) - nudge);
                let f = |t: f64, v: [C64; 2]| [v[1], (self.eval(t.clamp(seg_lo, seg_hi)) - w2) * v[0]];
                for k in 0..n {
                    let xk = x + k as f64 * h;
                    let k1 = f(xk, u);
                    let k2 = f(xk + 0.5 * h, [u[0] + 0.5 * h * k1[0], u[1] + 0.5 * h * k1[1]]);
                    let k3 = f(xk + 0.5 * h, [u[0] + 0.5 * h * k2[0], u[1] + 0.5 * h * k2[1]]);
                    let k4 = f(xk + h, [u[0] + h * k3[0], u[1] + h * k3[1]]);
                    u[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                    u[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
                }
                x = target;
            }
            if let Some(k) = tag {
                out[k] = u;
            }
        }
        (u, out)
    }

    /// Solves for the scattering solutions at `omega`, returning the
    /// coefficients and (Phi_1, Phi_2) with derivatives at the sorted `points`
    /// (all inside the support).
    pub(crate) fn solve(&self, omega: f64, points: &[f64]) -> Result<(ScatteringData, Vec<[C64; 4]>)> {
        if !(omega > 0.0) {
            return Err(Error::Invalid(format!("omega must be positive, got {omega}")));
        }
        let i = C64::i();
        if self.lo == self.hi {
            let data = ScatteringData { omega, t: C64::new(1.0, 0.0), r1: C64::new(0.0, 0.0), r2: C64::new(0.0, 0.0) };
            let vals = points.iter().map(|&x| data.tail_values(x, x < self.lo)).collect();
            return Ok((data, vals));
        }
        let (lo, hi) = (self.lo, self.hi);

        // Phi_1 / T: pure e^{i omega x} to the right of the support.
        let e_hi = (i * omega * hi).exp();
        let rev: Vec<f64> = points.iter().rev().copied().collect();
        let (u, u_at) = self.integrate(omega, hi, lo, [e_hi, i * omega * e_hi], &rev);
        let e_lo = (i * omega * lo).exp();
        let a = (u[0] + u[1] / (i * omega)) / (2.0 * e_lo);
        let b = (u[0] - u[1] / (i * omega)) * e_lo / 2.0;
        if a.norm() < 1e-12 {
            return Err(Error::IllConditioned { omega, det: a.norm() });
        }

        // Phi_2 / T: pure e^{-i omega x} to the left of the support.
        let (v, v_at) = self.integrate(omega, lo, hi, [e_lo.conj(), -i * omega * e_lo.conj()], points);
        let d = (v[0] + v[1] / (i * omega)) / (2.0 * e_hi);
        let c = (v[0] - v[1] / (i * omega)) * e_hi / 2.0;
        if c.norm() < 1e-12 {
            return Err(Error::IllConditioned { omega, det: c.norm() });
        }

        let data = ScatteringData { omega, t: 0.5 * (1.0 / a + 1.0 / c), r1: b / a, r2: d / c };
        let n = points.len();
        let vals = (0..n)
            .map(|k| {
                let uu = u_at[n - 1 - k];
                let vv = v_at[k];
                [uu[0] / a, vv[0] / c, uu[1] / a, vv[1] / c]
            })
            .collect();
        Ok((data, vals))
    }
}

/// Transmission and reflection coefficients at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringData {
    pub omega: f64,
    pub t: C64,
    pub r1: C64,
    pub r2: C64,
}

impl ScatteringData {
    /// Frobenius norm of S*S - I for S = [[T, R1], [R2, T]].
    pub fn unitarity_defect(&self) -> f64 {
        let (t, r1, r2) = (self.t, self.r1, self.r2);
        let d11 = t.norm_sqr() + r2.norm_sqr() - 1.0;
        let d22 = r1.norm_sqr() + t.norm_sqr() - 1.0;
        let d12 = t.conj() * r1 + r2.conj() * t;
        (d11 * d11 + d22 * d22 + 2.0 * d12.norm_sqr()).sqrt()
    }

    /// (Phi_1, Phi_2, Phi_1', Phi_2') from the plane-wave forms; valid to the
    /// left (`left = true`) or right of the support of q.
    pub fn tail_values(&self, x: f64, left: bool) -> [C64; 4] {
        let i = C64::i();
        let w = self.omega;
        let ep = (i * w * x).exp();
        let em = ep.conj();
        if left {
            [ep + self.r1 * em, self.t * em, i * w * (ep - self.r1 * em), -i * w * self.t * em]
        } else {
            [self.t * ep, em + self.r2 * ep, i * w * self.t * ep, i * w * (-em + self.r2 * ep)]
        }
    }
}

/// Scattering coefficients of q at `omega`.
pub fn scattering_coeffs(q: &Potential, omega: f64) -> Result<ScatteringData> {
    q.solve(omega, &[]).map(|(d, _)| d)
}

/// Coefficient sweep over a frequency grid, in parallel.
pub fn scattering_sweep(q: &Potential, omegas: &[f64]) -> Result<Vec<ScatteringData>> {
    omegas.par_iter().map(|&w| scattering_coeffs(q, w)).collect()
}

/// CSV with columns omega, Re T, Im T, Re R1, Im R1, Re R2, Im R2, defect.
pub fn write_scattering_csv<W: Write>(mut out: W, data: &[ScatteringData]) -> io::Result<()> {
    writeln!(out, "omega,re_t,im_t,re_r1,im_r1,re_r2,im_r2,unitarity_defect")?;
    for d in data {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:e}",
            d.omega,
            d.t.re,
            d.t.im,
            d.r1.re,
            d.r1.im,
            d.r2.re,
            d.r2.im,
            d.unitarity_defect()
        )?;
    }
    Ok(())
}

/// Phi(omega, .) on a grid over the support of q, with plane-wave tails.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub data: ScatteringData,
    potential: Potential,
    support: Interval,
    xs: Vec<f64>,
    vals: Vec<[C64; 4]>,
}

impl ScatteringSolution {
    pub fn new(q: &Potential, omega: f64) -> Result<Self> {
        let support = q.support();
        let n = ((support.len() / q.step(omega)).ceil() as usize).max(2);
        let xs: Vec<f64> = (0..=n).map(|k| support.a + support.len() * k as f64 / n as f64).collect();
        let (data, vals) = q.solve(omega, &xs)?;
        Ok(ScatteringSolution { data, potential: q.clone(), support, xs, vals })
    }

    /// (Phi_1(omega, x), Phi_2(omega, x)).
    pub fn eval(&self, x: f64) -> [C64; 2] {
        let v = self.eval_with_derivative(x);
        [v[0], v[1]]
    }

    /// (Phi_1, Phi_2, Phi_1', Phi_2').
    pub fn eval_with_derivative(&self, x: f64) -> [C64; 4] {
        if x < self.support.a || x > self.support.b || self.xs.len() < 2 || self.support.len() == 0.0 {
            return self.data.tail_values(x, x < self.support.a);
        }
        let n = self.xs.len();
        let i = self.xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (a, b) = (self.vals[i], self.vals[i + 1]);
        let w2 = self.data.omega * self.data.omega;
        let (q0, q1) = (self.potential.eval(x0), self.potential.eval(x1));
        let mut out = [C64::new(0.0, 0.0); 4];
        for c in 0..2 {
            out[c] = hermite_c(a[c], b[c], a[c + 2] * h, b[c + 2] * h, t);
            // psi'' = (q - omega^2) psi supplies the slopes for psi'.
            out[c + 2] = hermite_c(a[c + 2], b[c + 2], a[c] * (q0 - w2) * h, b[c] * (q1 - w2) * h, t);
        }
        out
    }

    /// Wronskian Phi_1 Phi_2' - Phi_1' Phi_2 at x.
    pub fn wronskian(&self, x: f64) -> C64 {
        let v = self.eval_with_derivative(x);
        v[0] * v[3] - v[2] * v[1]
    }
}

/// Phi(omega, x) for a single frequency.
pub fn scattering_solution(q: &Potential, omega: f64, x: f64) -> Result<[C64; 2]> {
    let support = q.support();
    if x < support.a || x > support.b {
        let v = scattering_coeffs(q, omega)?.tail_values(x, x < support.a);
        return Ok([v[0], v[1]]);
    }
    let (_, vals) = q.solve(omega, &[x])?;
    Ok([vals[0][0], vals[0][1]])
}

/// F(omega_l) = (2 pi)^{-1/2} int f(x) conj Phi(omega_l, x) dx over `window`,
/// one pair per quadrature node of the model.
pub fn spectral_transform<F>(model: &KernelModel, f: F, window: Interval, max_panel: f64) -> Result<Vec<[C64; 2]>>
where
    F: Fn(f64) -> C64 + Sync,
{
    if !matches!(model, KernelModel::Schrodinger(_)) {
        return Err(Error::Invalid("spectral transform needs a Schrödinger model".into()));
    }
    let rule = Rule::with_breaks(window.a, window.b, &model.knots(), max_panel, 10);
    let coeffs = model.project_rule(&rule, f);
    Ok(model
        .quadrature()
        .weights
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            let s = w.sqrt();
            [coeffs[2 * l] / s, coeffs[2 * l + 1] / s]
        })
        .collect())
}
