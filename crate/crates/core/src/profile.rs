//! Bandwidth profiles `p` and the scalar quantities derived from them: the
//! measure `mu_p`, the warps `zeta` and `eta`, the Liouville potential and the
//! max-gap statistic.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, Tolerance};

/// Closed interval [a, b].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a <= b) {
            return Err(Error::Invalid(format!("interval [{a}, {b}] has a > b")));
        }
        Ok(Interval { a, b })
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

/// Evaluator for a user-supplied blend: returns (p, p', p'') on [-R, R].
pub type BlendFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// How a smooth profile moves from `p_minus` to `p_plus` across [-R, R].
#[derive(Clone)]
pub enum BlendShape {
    /// Smoothstep 3t^2 - 2t^3: p' is continuous, p'' jumps at +-R.
    Cubic,
    /// 10t^3 - 15t^4 + 6t^5: p'' is continuous as well.
    Quintic,
    /// Arbitrary evaluator; it must match the plateau values at +-R.
    Custom(BlendFn),
}

impl fmt::Debug for BlendShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlendShape::Cubic => write!(f, "Cubic"),
            BlendShape::Quintic => write!(f, "Quintic"),
            BlendShape::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Smooth profile that is constant outside [-R, R].
#[derive(Debug, Clone)]
pub struct SmoothProfile {
    pub p_minus: f64,
    pub p_plus: f64,
    pub radius: f64,
    pub shape: BlendShape,
}

impl SmoothProfile {
    fn jet(&self, x: f64) -> [f64; 3] {
        let r = self.radius;
        if x <= -r {
            return [self.p_minus, 0.0, 0.0];
        }
        if x >= r {
            return [self.p_plus, 0.0, 0.0];
        }
        let width = 2.0 * r;
        let t = (x + r) / width;
        let dp = self.p_plus - self.p_minus;
        match &self.shape {
            BlendShape::Cubic => {
                let s = t * t * (3.0 - 2.0 * t);
                let s1 = 6.0 * t * (1.0 - t) / width;
                let s2 = (6.0 - 12.0 * t) / (width * width);
                [self.p_minus + dp * s, dp * s1, dp * s2]
            }
            BlendShape::Quintic => {
                let s = t * t * t * (10.0 + t * (6.0 * t - 15.0));
                let s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t) / width;
                let s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (width * width);
                [self.p_minus + dp * s, dp * s1, dp * s2]
            }
            BlendShape::Custom(f) => f(x),
        }
    }
}

/// The function `p` parametrizing the operator `-(p f')'`.
#[derive(Debug, Clone)]
pub enum BandwidthProfile {
    /// `values[k]` holds on `[breakpoints[k-1], breakpoints[k])`.
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    Smooth(SmoothProfile),
}

/// Profile block of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: String,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(rename = "R", default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub p_minus: Option<f64>,
    #[serde(default)]
    pub p_plus: Option<f64>,
    #[serde(default)]
    pub blend: Option<String>,
}

/// Outcome of [`BandwidthProfile::admissibility_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub pass: bool,
    pub lower: f64,
    pub upper: f64,
    pub reasons: Vec<String>,
}

const TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-13, max_depth: 30 };

impl BandwidthProfile {
    pub fn constant(value: f64) -> Self {
        BandwidthProfile::Piecewise { breakpoints: Vec::new(), values: vec![value] }
    }

    /// `p_minus` on x < 0 and `p_plus` on x >= 0.
    pub fn two_level(p_minus: f64, p_plus: f64) -> Self {
        BandwidthProfile::Piecewise { breakpoints: vec![0.0], values: vec![p_minus, p_plus] }
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Invalid(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("breakpoints must be strictly increasing".into()));
        }
        Ok(BandwidthProfile::Piecewise { breakpoints, values })
    }

    pub fn smooth_blend(p_minus: f64, p_plus: f64, radius: f64, shape: BlendShape) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Invalid(format!("plateau radius must be positive, got {radius}")));
        }
        Ok(BandwidthProfile::Smooth(SmoothProfile { p_minus, p_plus, radius, shape }))
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        match spec.kind.as_str() {
            "piecewise" => {
                let profile = Self::piecewise(spec.breakpoints.clone(), spec.values.clone())?;
                profile.require_admissible()?;
                Ok(profile)
            }
            "smooth_blend" => {
                let field = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::Invalid(format!("profile.{name} is required for smooth_blend")))
                };
                let shape = match spec.blend.as_deref().unwrap_or("cubic") {
                    "cubic" => BlendShape::Cubic,
                    "quintic" => BlendShape::Quintic,
                    other => return Err(Error::Invalid(format!("profile.blend: unknown blend '{other}'"))),
                };
                let profile = Self::smooth_blend(
                    field(spec.p_minus, "p_minus")?,
                    field(spec.p_plus, "p_plus")?,
                    field(spec.radius, "R")?,
                    shape,
                )?;
                profile.require_admissible()?;
                Ok(profile)
            }
            other => Err(Error::Invalid(format!("profile.kind: unknown kind '{other}'"))),
        }
    }

    fn require_admissible(&self) -> Result<()> {
        let report = self.admissibility_check();
        if report.pass {
            Ok(())
        } else {
            Err(Error::Invalid(format!("profile: {}", report.reasons.join("; "))))
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, BandwidthProfile::Smooth(_))
    }

    /// p(x); at a breakpoint of a piecewise profile the right limit.
    pub fn p(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }

    /// (p, p', p'') at x; derivatives of piecewise profiles are taken a.e. (zero).
    pub fn jet(&self, x: f64) -> [f64; 3] {
        match self {
            BandwidthProfile::Piecewise { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b <= x);
                [values[k], 0.0, 0.0]
            }
            BandwidthProfile::Smooth(s) => s.jet(x),
        }
    }

    pub fn p_minus(&self) -> f64 {
        match self {
            BandwidthProfile::Piecewise { values, .. } => values[0],
            BandwidthProfile::Smooth(s) => s.p_minus,
        }
    }

    pub fn p_plus(&self) -> f64 {
        match self {
            BandwidthProfile::Piecewise { values, .. } => *values.last().expect("at least one value"),
            BandwidthProfile::Smooth(s) => s.p_plus,
        }
    }

    /// Points where p or one of its derivatives may fail to be smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            BandwidthProfile::Piecewise { breakpoints, .. } => breakpoints.clone(),
            BandwidthProfile::Smooth(s) => vec![-s.radius, s.radius],
        }
    }

    /// Half-width of the region outside of which p is constant.
    pub fn plateau_radius(&self) -> f64 {
        match self {
            BandwidthProfile::Piecewise { breakpoints, .. } => breakpoints
                .iter()
                .fold(0.0f64, |m, b| m.max(b.abs())),
            BandwidthProfile::Smooth(s) => s.radius,
        }
    }

    fn scan_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self {
            BandwidthProfile::Piecewise { values, .. } => {
                for &v in values {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            BandwidthProfile::Smooth(s) => {
                let r = 3.0 * s.radius;
                let n = 6000;
                for i in 0..=n {
                    let v = s.jet(-r + 2.0 * r * i as f64 / n as f64)[0];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                lo = lo.min(s.p_minus).min(s.p_plus);
                hi = hi.max(s.p_minus).max(s.p_plus);
            }
        }
        (lo, hi)
    }

    /// Lower bound c with c <= p everywhere (exact for piecewise, dense scan otherwise).
    pub fn lower_bound(&self) -> f64 {
        self.scan_range().0
    }

    pub fn upper_bound(&self) -> f64 {
        self.scan_range().1
    }

    /// Integral of g(p(u)) over [a, b] for a function g of the profile value.
    fn integrate_of_p<G: Fn(f64) -> f64>(&self, a: f64, b: f64, g: G) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return self.integrate_of_p(b, a, g).map(|v| -v);
        }
        match self {
            BandwidthProfile::Piecewise { breakpoints, values } => {
                let mut total = 0.0;
                let mut lo = a;
                let start = breakpoints.partition_point(|&t| t <= a);
                for k in start..=breakpoints.len() {
                    let hi = if k < breakpoints.len() { breakpoints[k].min(b) } else { b };
                    if hi > lo {
                        total += (hi - lo) * g(values[k]);
                    }
                    lo = hi;
                    if lo >= b {
                        break;
                    }
                }
                Ok(total)
            }
            BandwidthProfile::Smooth(s) => {
                let r = s.radius;
                let mut total = 0.0;
                if a < -r {
                    total += (b.min(-r) - a) * g(s.p_minus);
                }
                if b > r {
                    total += (b - a.max(r)) * g(s.p_plus);
                }
                let lo = a.max(-r);
                let hi = b.min(r);
                if hi > lo {
                    total += adaptive(|u| g(s.jet(u)[0]), lo, hi, TOL)?;
                }
                Ok(total)
            }
        }
    }

    /// mu_p(I) = integral of p^{-1/2} over I.
    pub fn mu(&self, interval: Interval) -> Result<f64> {
        self.integrate_of_p(interval.a, interval.b, |p| 1.0 / p.sqrt())
    }

    /// zeta(x) = integral of p^{-1/2} from 0 to x.
    pub fn zeta(&self, x: f64) -> Result<f64> {
        self.integrate_of_p(0.0, x, |p| 1.0 / p.sqrt())
    }

    /// eta(x) = integral of 1/p from 0 to x.
    pub fn eta(&self, x: f64) -> Result<f64> {
        self.integrate_of_p(0.0, x, |p| 1.0 / p)
    }

    /// Inverse of [`zeta`](Self::zeta), accurate to 1e-12 in the warped coordinate.
    pub fn zeta_inv(&self, y: f64) -> Result<f64> {
        self.invert(y, |p| 1.0 / p.sqrt(), |x| self.zeta(x))
    }

    pub fn eta_inv(&self, y: f64) -> Result<f64> {
        self.invert(y, |p| 1.0 / p, |x| self.eta(x))
    }

    fn invert<D, W>(&self, y: f64, density: D, warp: W) -> Result<f64>
    where
        D: Fn(f64) -> f64,
        W: Fn(f64) -> Result<f64>,
    {
        if y == 0.0 {
            return Ok(0.0);
        }
        if let BandwidthProfile::Piecewise { breakpoints, values } = self {
            // The warp is piecewise linear: walk the pieces from 0.
            let k0 = breakpoints.partition_point(|&t| t <= 0.0);
            let mut x = 0.0;
            let mut acc = 0.0;
            if y > 0.0 {
                for k in k0..=breakpoints.len() {
                    let rate = density(values[k]);
                    let end = if k < breakpoints.len() { breakpoints[k] } else { f64::INFINITY };
                    let gain = (end - x) * rate;
                    if acc + gain >= y {
                        return Ok(x + (y - acc) / rate);
                    }
                    acc += gain;
                    x = end;
                }
            } else {
                let mut k = k0 as isize;
                loop {
                    let idx = k as usize;
                    let rate = density(values[idx]);
                    let start = if idx == 0 { f64::NEG_INFINITY } else { breakpoints[idx - 1] };
                    let gain = (x - start) * rate;
                    if acc - gain <= y {
                        return Ok(x - (acc - y) / rate);
                    }
                    acc -= gain;
                    x = start;
                    k -= 1;
                }
            }
            return Err(Error::RootFinding { target: y });
        }

        // Bracket from the bounds of p, then safeguarded Newton steps.
        let (lo_p, hi_p) = self.scan_range();
        let (d_min, d_max) = {
            let a = density(lo_p);
            let b = density(hi_p);
            (a.min(b), a.max(b))
        };
        let (mut lo, mut hi) = if y > 0.0 { (y / d_max, y / d_min) } else { (y / d_min, y / d_max) };
        let guess = if y > 0.0 { y / density(self.p_plus()) } else { y / density(self.p_minus()) };
        let mut x = guess.clamp(lo, hi);
        for _ in 0..200 {
            let r = warp(x)? - y;
            if r.abs() < 1e-12 {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = x - r / density(self.p(x));
            x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * (1.0 + x.abs()) {
                return Ok(x);
            }
        }
        Err(Error::RootFinding { target: y })
    }

    /// Liouville potential at the warped point zeta(x): p''/4 - p'^2/(16p).
    pub fn potential_q(&self, x: f64) -> Result<f64> {
        match self {
            BandwidthProfile::Piecewise { .. } => Err(Error::UnsupportedProfile(
                "the potential of a piecewise constant profile is a distribution",
            )),
            BandwidthProfile::Smooth(s) => Ok(q_from_jet(s.jet(x))),
        }
    }

    /// Support of the potential in the warped coordinate: [zeta(-R), zeta(R)].
    pub fn potential_support(&self) -> Result<Interval> {
        let r = self.plateau_radius();
        Interval::new(self.zeta(-r)?, self.zeta(r)?)
    }

    /// Per-gap ratios (x_{i+1} - x_i) / inf sqrt(p) over the open gap.
    pub fn gap_ratios(&self, xs: &[f64]) -> Vec<f64> {
        xs.windows(2)
            .map(|w| (w[1] - w[0]) / self.inf_on_open(w[0], w[1]).sqrt())
            .collect()
    }

    /// delta = sup over gaps of gap length over the infimum of sqrt(p) on the gap.
    pub fn max_gap_delta(&self, xs: &[f64]) -> f64 {
        self.gap_ratios(xs).into_iter().fold(0.0, f64::max)
    }

    /// Essential infimum of p over (a, b).
    pub fn inf_on_open(&self, a: f64, b: f64) -> f64 {
        match self {
            BandwidthProfile::Piecewise { breakpoints, values } => {
                let first = breakpoints.partition_point(|&t| t <= a);
                let last = breakpoints.partition_point(|&t| t < b);
                values[first..=last].iter().copied().fold(f64::INFINITY, f64::min)
            }
            BandwidthProfile::Smooth(s) => {
                let n = 64;
                let mut m = s.jet(a)[0].min(s.jet(b)[0]);
                for i in 1..n {
                    m = m.min(s.jet(a + (b - a) * i as f64 / n as f64)[0]);
                }
                m
            }
        }
    }

    /// Compares user-visible derivatives against central finite differences.
    pub fn derivative_defect(&self) -> f64 {
        let BandwidthProfile::Smooth(s) = self else { return 0.0 };
        let r = s.radius;
        let h = 1e-5 * r.max(1.0);
        let mut worst = 0.0f64;
        let n = 200;
        for i in 1..n {
            let x = -r + 2.0 * r * i as f64 / n as f64;
            let [p, p1, p2] = s.jet(x);
            let fd1 = (s.jet(x + h)[0] - s.jet(x - h)[0]) / (2.0 * h);
            let fd2 = (s.jet(x + h)[1] - s.jet(x - h)[1]) / (2.0 * h);
            let scale = p.abs().max(1.0);
            worst = worst.max((fd1 - p1).abs() / scale).max((fd2 - p2).abs() / scale);
        }
        worst
    }

    pub fn admissibility_check(&self) -> AdmissibilityReport {
        let mut reasons = Vec::new();
        match self {
            BandwidthProfile::Piecewise { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    reasons.push("plateau count must be breakpoint count + 1".to_string());
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    reasons.push("breakpoints not strictly increasing".to_string());
                }
                if breakpoints.iter().any(|b| !b.is_finite()) {
                    reasons.push("non-finite breakpoint".to_string());
                }
            }
            BandwidthProfile::Smooth(s) => {
                if !(s.radius > 0.0 && s.radius.is_finite()) {
                    reasons.push("plateau radius must be positive and finite".to_string());
                }
                let left = s.jet(-s.radius * (1.0 - 1e-12));
                let right = s.jet(s.radius * (1.0 - 1e-12));
                let tol = 1e-6 * s.p_minus.abs().max(s.p_plus.abs()).max(1.0);
                if (left[0] - s.p_minus).abs() > tol || (right[0] - s.p_plus).abs() > tol {
                    reasons.push("not eventually constant: blend does not meet the plateaus".to_string());
                }
                if self.derivative_defect() > 1e-4 {
                    reasons.push("supplied derivatives disagree with finite differences".to_string());
                }
            }
        }
        let (lower, upper) = self.scan_range();
        if !(lower > 0.0) {
            reasons.push("not bounded below".to_string());
        }
        if !upper.is_finite() {
            reasons.push("not bounded above".to_string());
        }
        AdmissibilityReport { pass: reasons.is_empty(), lower, upper, reasons }
    }
}

pub(crate) fn q_from_jet([p, p1, p2]: [f64; 3]) -> f64 {
    p2 / 4.0 - p1 * p1 / (16.0 * p)
}

/// Tabulated warp for fast evaluation of zeta, zeta^{-1} and the potential in
/// the warped coordinate. Cubic Hermite interpolation with exact derivatives.
#[derive(Debug, Clone)]
pub struct WarpTable {
    profile: BandwidthProfile,
    radius: f64,
    zeta_lo: f64,
    zeta_hi: f64,
    hx: f64,
    zeta_on_x: Vec<f64>,
    hs: f64,
    x_on_s: Vec<f64>,
}

impl WarpTable {
    pub fn new(profile: &BandwidthProfile, cells: usize) -> Result<Self> {
        let radius = profile.plateau_radius().max(1e-300);
        let zeta_lo = profile.zeta(-radius)?;
        let zeta_hi = profile.zeta(radius)?;
        let cells = cells.max(16);
        let hx = 2.0 * radius / cells as f64;
        let mut zeta_on_x = Vec::with_capacity(cells + 1);
        zeta_on_x.push(zeta_lo);
        let (gx, gw) = crate::quadrature::gauss_legendre(10);
        for i in 0..cells {
            let a = -radius + i as f64 * hx;
            let mid = a + 0.5 * hx;
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(t, w)| 0.5 * hx * w / profile.p(mid + 0.5 * hx * t).sqrt())
                .sum();
            let prev = *zeta_on_x.last().expect("seeded");
            zeta_on_x.push(prev + cell);
        }
        let hs = (zeta_hi - zeta_lo) / cells as f64;
        let mut x_on_s = Vec::with_capacity(cells + 1);
        let mut x = -radius;
        x_on_s.push(x);
        let f = |x: f64| profile.p(x).sqrt();
        for _ in 0..cells {
            let k1 = f(x);
            let k2 = f(x + 0.5 * hs * k1);
            let k3 = f(x + 0.5 * hs * k2);
            let k4 = f(x + hs * k3);
            x += hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            x_on_s.push(x);
        }
        Ok(WarpTable { profile: profile.clone(), radius, zeta_lo, zeta_hi, hx, zeta_on_x, hs, x_on_s })
    }

    pub fn profile(&self) -> &BandwidthProfile {
        &self.profile
    }

    pub fn zeta_range(&self) -> (f64, f64) {
        (self.zeta_lo, self.zeta_hi)
    }

    pub fn zeta(&self, x: f64) -> f64 {
        let r = self.radius;
        if x <= -r {
            return self.zeta_lo + (x + r) / self.profile.p_minus().sqrt();
        }
        if x >= r {
            return self.zeta_hi + (x - r) / self.profile.p_plus().sqrt();
        }
        let d = |u: f64| 1.0 / self.profile.p(u).sqrt();
        hermite(&self.zeta_on_x, -r, self.hx, x, d)
    }

    pub fn zeta_inv(&self, s: f64) -> f64 {
        if s <= self.zeta_lo {
            return -self.radius + (s - self.zeta_lo) * self.profile.p_minus().sqrt();
        }
        if s >= self.zeta_hi {
            return self.radius + (s - self.zeta_hi) * self.profile.p_plus().sqrt();
        }
        // dx/ds = sqrt(p(x(s))) evaluated at the stored node values.
        let i = (((s - self.zeta_lo) / self.hs).floor() as usize).min(self.x_on_s.len() - 2);
        let s0 = self.zeta_lo + i as f64 * self.hs;
        let t = (s - s0) / self.hs;
        let (y0, y1) = (self.x_on_s[i], self.x_on_s[i + 1]);
        let (d0, d1) = (self.profile.p(y0).sqrt(), self.profile.p(y1).sqrt());
        hermite_basis(y0, y1, d0 * self.hs, d1 * self.hs, t)
    }

    /// Potential q(s) at the warped coordinate s.
    pub fn q_at(&self, s: f64) -> f64 {
        if s <= self.zeta_lo || s >= self.zeta_hi || !self.profile.is_smooth() {
            return 0.0;
        }
        q_from_jet(self.profile.jet(self.zeta_inv(s)))
    }
}

fn hermite<D: Fn(f64) -> f64>(vals: &[f64], x0: f64, h: f64, x: f64, deriv: D) -> f64 {
    let i = (((x - x0) / h).floor() as usize).min(vals.len() - 2);
    let a = x0 + i as f64 * h;
    let t = (x - a) / h;
    hermite_basis(vals[i], vals[i + 1], deriv(a) * h, deriv(a + h) * h, t)
}

pub(crate) fn hermite_basis(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
}
