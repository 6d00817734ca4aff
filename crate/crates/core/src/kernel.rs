//! Reproducing kernels of variable-bandwidth Paley–Wiener spaces and the
//! spectral discretizations behind them.
//!
//! Every model exposes a finite family of modes psi_j(x) = sqrt(w_l rho_c) Phi_c(omega_l, x)
//! indexed by a quadrature node omega_l in Lambda^{1/2} and a component c.
//! Coefficient vectors over the modes are orthonormal coordinates: the
//! quadrature kernel is sum_j psi_j(x) conj(psi_j(y)).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{BandwidthProfile, Interval, WarpTable};
use crate::quadrature::Rule;
use crate::schrodinger::{Potential, ScatteringData};
use crate::sturm::toy_fundamental;

/// sin(t) / t with the removable singularity filled in.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Classical Paley–Wiener kernel for Lambda = [0, omega].
pub fn free_kernel(omega: f64, x: f64, y: f64) -> f64 {
    let s = omega.sqrt();
    s / PI * sinc(s * (x - y))
}

/// Closed-form kernel of the two-level profile with Lambda = [0, omega].
pub fn toy_kernel(p_minus: f64, p_plus: f64, omega: f64, x: f64, y: f64) -> f64 {
    let (a, b, s) = (p_minus.sqrt(), p_plus.sqrt(), omega.sqrt());
    let refl = (b - a) / (b + a);
    match (x <= 0.0, y <= 0.0) {
        (true, true) => s / (PI * a) * (sinc(s * (x - y) / a) - refl * sinc(s * (x + y) / a)),
        (false, false) => s / (PI * b) * (sinc(s * (x - y) / b) + refl * sinc(s * (x + y) / b)),
        (true, false) => 2.0 * s / (PI * (a + b)) * sinc(s * (x / a - y / b)),
        (false, true) => 2.0 * s / (PI * (a + b)) * sinc(s * (x / b - y / a)),
    }
}

/// Kernel of the half-line space PW_[0, omega] with Dirichlet condition at 0.
pub fn halfline_kernel(omega: f64, x: f64, y: f64) -> f64 {
    if x < 0.0 || y < 0.0 {
        return 0.0;
    }
    let s = omega.sqrt();
    s / PI * (sinc(s * (x - y)) - sinc(s * (x + y)))
}

/// Finite union of disjoint intervals Lambda in [0, inf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSet {
    intervals: Vec<(f64, f64)>,
}

impl SpectralSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        for &(a, b) in &intervals {
            if !(a >= 0.0 && a < b && b.is_finite()) {
                return Err(Error::Invalid(format!("spectral interval [{a}, {b}] must satisfy 0 <= a < b < inf")));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Invalid("spectral intervals overlap".into()));
        }
        if intervals.is_empty() {
            return Err(Error::Invalid("spectral set is empty".into()));
        }
        Ok(SpectralSet { intervals })
    }

    /// Lambda = [0, omega].
    pub fn band(omega: f64) -> Result<Self> {
        Self::new(vec![(0.0, omega)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Lambda^{1/2} = { sqrt(lambda) : lambda in Lambda }.
    pub fn sqrt_intervals(&self) -> Vec<(f64, f64)> {
        self.intervals.iter().map(|&(a, b)| (a.sqrt(), b.sqrt())).collect()
    }

    /// |Lambda^{1/2}|.
    pub fn sqrt_measure(&self) -> f64 {
        self.sqrt_intervals().iter().map(|(a, b)| b - a).sum()
    }

    pub fn lambda_max(&self) -> f64 {
        self.intervals.last().expect("non-empty").1
    }

    /// Critical density |Lambda^{1/2}| / pi.
    pub fn critical_density(&self) -> f64 {
        self.sqrt_measure() / PI
    }

    /// (1/pi) int_{Lambda^{1/2}} cos(omega d) d omega.
    fn cosine_integral(&self, d: f64) -> f64 {
        self.sqrt_intervals()
            .iter()
            .map(|&(a, b)| if d.abs() < 1e-12 { b - a } else { ((b * d).sin() - (a * d).sin()) / d })
            .sum::<f64>()
            / PI
    }
}

/// Composite Gauss–Legendre rule on Lambda^{1/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl SpectralQuadrature {
    /// Panels no wider than pi / (8 x_max) so that e^{i omega x} is resolved for |x| <= x_max.
    pub fn new(set: &SpectralSet, x_max: f64, order: usize) -> Self {
        let width = PI / (8.0 * x_max.max(1e-3));
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (a, b) in set.sqrt_intervals() {
            let panels = ((b - a) / width).ceil().max(1.0) as usize;
            let rule = Rule::composite(a, b, panels, order);
            nodes.extend(rule.nodes);
            weights.extend(rule.weights);
        }
        SpectralQuadrature { nodes, weights, order }
    }

    /// Nodes on the lattice (k + 1/2) 2 pi / period that fit inside
    /// Lambda^{1/2}: the modes are then (quasi-)periodic with that period, so a
    /// window of this length carries exactly one copy of the discretized
    /// space. An interval too short for a lattice cell gets its midpoint.
    pub fn periodic(set: &SpectralSet, period: f64) -> Self {
        let h = 2.0 * PI / period;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (a, b) in set.sqrt_intervals() {
            let (k0, k1) = ((a / h - 1e-9).ceil() as i64, (b / h + 1e-9).floor() as i64);
            if k1 <= k0 {
                nodes.push(0.5 * (a + b));
                weights.push(b - a);
            }
            for k in k0..k1 {
                nodes.push((k as f64 + 0.5) * h);
                weights.push(h);
            }
        }
        SpectralQuadrature { nodes, weights, order: 1 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// How the spectral nodes of a model are laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRule {
    /// Composite Gauss–Legendre resolving e^{i omega x} for |x| <= x_max.
    Resolve { x_max: f64, order: usize },
    /// Midpoint rule for a window of the given length (in the warped
    /// coordinate for Liouville models).
    Periodic { period: f64 },
}

/// One basis mode: node index, component and the measure attached to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub node: usize,
    pub comp: usize,
    pub omega: f64,
    pub weight: f64,
    pub density: f64,
}

impl Mode {
    pub fn scale(&self) -> f64 {
        (self.weight * self.density).sqrt()
    }

    pub fn lambda(&self) -> f64 {
        self.omega * self.omega
    }
}

fn build_modes(quad: &SpectralQuadrature, densities: &[f64]) -> Vec<Mode> {
    let mut modes = Vec::with_capacity(quad.len() * densities.len());
    for (l, (&omega, &weight)) in quad.nodes.iter().zip(&quad.weights).enumerate() {
        for (comp, &density) in densities.iter().enumerate() {
            modes.push(Mode { node: l, comp, omega, weight, density });
        }
    }
    modes
}

/// Two-level profile p_- (x <= 0), p_+ (x > 0) with Lambda = [0, omega].
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub p_minus: f64,
    pub p_plus: f64,
    pub omega: f64,
    set: SpectralSet,
    quad: SpectralQuadrature,
    modes: Vec<Mode>,
}

impl ToyModel {
    pub fn new(p_minus: f64, p_plus: f64, omega: f64, x_max: f64) -> Result<Self> {
        if !(p_minus > 0.0 && p_plus > 0.0) {
            return Err(Error::Invalid("plateau values must be positive".into()));
        }
        let set = SpectralSet::band(omega)?;
        // Local wavenumber is omega / sqrt(p); resolve the faster side.
        let quad = SpectralQuadrature::new(&set, x_max / p_minus.min(p_plus).sqrt(), 8);
        let (a, b) = (p_minus.sqrt(), p_plus.sqrt());
        // d rho = diag(sqrt p_-, sqrt p_+) / (pi (sqrt p_- + sqrt p_+)^2) d lambda / sqrt(lambda)
        // and d lambda / sqrt(lambda) = 2 d omega.
        let c = 2.0 / (PI * (a + b) * (a + b));
        let modes = build_modes(&quad, &[a * c, b * c]);
        Ok(ToyModel { p_minus, p_plus, omega, set, quad, modes })
    }

    fn phi(&self, omega: f64, x: f64) -> [C64; 2] {
        toy_fundamental(self.p_minus, self.p_plus, omega * omega, x)
    }
}

/// Limit p_- -> infinity: the half-line space with kernel sinc(x - y) - sinc(x + y).
#[derive(Debug, Clone)]
pub struct HalfLineModel {
    pub omega: f64,
    set: SpectralSet,
    quad: SpectralQuadrature,
    modes: Vec<Mode>,
}

impl HalfLineModel {
    pub fn new(omega: f64, x_max: f64) -> Result<Self> {
        let set = SpectralSet::band(omega)?;
        let quad = SpectralQuadrature::new(&set, x_max, 8);
        let modes = build_modes(&quad, &[2.0 / PI]);
        Ok(HalfLineModel { omega, set, quad, modes })
    }
}

/// Schrödinger operator -D^2 + q with the Lebesgue spectral measure (1/2pi) I_2 d omega.
#[derive(Debug, Clone)]
pub struct SchrodingerModel {
    potential: Potential,
    set: SpectralSet,
    quad: SpectralQuadrature,
    data: Vec<ScatteringData>,
    modes: Vec<Mode>,
}

impl SchrodingerModel {
    pub fn new(potential: Potential, set: SpectralSet, rule: NodeRule) -> Result<Self> {
        let quad = match rule {
            NodeRule::Resolve { x_max, order } => SpectralQuadrature::new(&set, x_max.max(potential.radius()), order),
            NodeRule::Periodic { period } => SpectralQuadrature::periodic(&set, period),
        };
        if quad.nodes.iter().any(|&w| w <= 0.0) {
            return Err(Error::Invalid("quadrature node at omega = 0".into()));
        }
        let data = crate::schrodinger::scattering_sweep(&potential, &quad.nodes)?;
        let modes = build_modes(&quad, &[1.0 / (2.0 * PI), 1.0 / (2.0 * PI)]);
        Ok(SchrodingerModel { potential, set, quad, data, modes })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn quad(&self) -> &SpectralQuadrature {
        &self.quad
    }

    pub fn scattering(&self) -> &[ScatteringData] {
        &self.data
    }

    fn is_exterior(&self, x: f64) -> bool {
        let s = self.potential.support();
        x < s.a || x > s.b || s.len() == 0.0
    }

    /// Rows of psi_j at the given points; interior points are solved in one batch per node.
    fn rows(&self, xs: &[f64]) -> Vec<Vec<C64>> {
        let n = self.modes.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; xs.len()];
        let support = self.potential.support();
        let mut interior: Vec<(f64, usize)> = Vec::new();
        for (k, &x) in xs.iter().enumerate() {
            if self.is_exterior(x) {
                let left = x < support.a;
                for (l, d) in self.data.iter().enumerate() {
                    let v = d.tail_values(x, left);
                    let s = self.modes[2 * l].scale();
                    out[k][2 * l] = s * v[0];
                    out[k][2 * l + 1] = s * v[1];
                }
            } else {
                interior.push((x, k));
            }
        }
        if !interior.is_empty() {
            interior.sort_by(|a, b| a.0.total_cmp(&b.0));
            let points: Vec<f64> = interior.iter().map(|p| p.0).collect();
            let columns: Vec<Vec<[C64; 4]>> = self
                .quad
                .nodes
                .par_iter()
                .map(|&w| self.potential.solve(w, &points).map(|r| r.1).expect("solvable at quadrature nodes"))
                .collect();
            for (l, col) in columns.iter().enumerate() {
                let s = self.modes[2 * l].scale();
                for (idx, &(_, k)) in interior.iter().enumerate() {
                    out[k][2 * l] = s * col[idx][0];
                    out[k][2 * l + 1] = s * col[idx][1];
                }
            }
        }
        out
    }

    /// Kernel from the plane-wave forms; both points outside the support of q.
    fn kernel_exterior(&self, x: f64, y: f64) -> f64 {
        let support = self.potential.support();
        let (xl, yl) = (x < support.a, y < support.a);
        if self.potential.is_zero() {
            return self.set.cosine_integral(x - y);
        }
        let osc = |t: f64, pick: &dyn Fn(&ScatteringData) -> C64| -> f64 {
            self.data
                .iter()
                .zip(&self.quad.weights)
                .map(|(d, &w)| w * (pick(d) * C64::from_polar(1.0, d.omega * t)).re)
                .sum::<f64>()
                / PI
        };
        match (xl, yl) {
            (false, false) => self.set.cosine_integral(x - y) + osc(x + y, &|d| d.r2),
            (true, true) => self.set.cosine_integral(x - y) + osc(-(x + y), &|d| d.r1),
            (true, false) => osc(y - x, &|d| d.t),
            (false, true) => osc(x - y, &|d| d.t),
        }
    }
}

/// Liouville pullback of a Schrödinger model to a smooth eventually constant profile.
#[derive(Debug, Clone)]
pub struct LiouvilleModel {
    warp: WarpTable,
    inner: SchrodingerModel,
}

impl LiouvilleModel {
    pub fn new(profile: &BandwidthProfile, set: SpectralSet, rule: NodeRule) -> Result<Self> {
        let potential = Potential::from_profile(profile)?;
        let warp = WarpTable::new(profile, 4000)?;
        let rule = match rule {
            NodeRule::Resolve { x_max, order } => {
                NodeRule::Resolve { x_max: warp.zeta(x_max).abs().max(warp.zeta(-x_max).abs()), order }
            }
            periodic => periodic,
        };
        let inner = SchrodingerModel::new(potential, set, rule)?;
        Ok(LiouvilleModel { warp, inner })
    }

    pub fn inner(&self) -> &SchrodingerModel {
        &self.inner
    }

    pub fn warp(&self) -> &WarpTable {
        &self.warp
    }

    fn factor(&self, x: f64) -> f64 {
        self.warp.profile().p(x).powf(-0.25)
    }
}

/// All kernel representations behind one interface.
#[derive(Debug, Clone)]
pub enum KernelModel {
    Toy(ToyModel),
    HalfLine(HalfLineModel),
    Schrodinger(SchrodingerModel),
    Liouville(LiouvilleModel),
}

impl KernelModel {
    /// Classical band-limited functions: q = 0, Lambda = [0, omega].
    pub fn free(omega: f64, x_max: f64) -> Result<Self> {
        Self::schrodinger_with(Potential::zero(), SpectralSet::band(omega)?, NodeRule::Resolve { x_max, order: 8 })
    }

    pub fn toy(p_minus: f64, p_plus: f64, omega: f64, x_max: f64) -> Result<Self> {
        Ok(KernelModel::Toy(ToyModel::new(p_minus, p_plus, omega, x_max)?))
    }

    pub fn halfline(omega: f64, x_max: f64) -> Result<Self> {
        Ok(KernelModel::HalfLine(HalfLineModel::new(omega, x_max)?))
    }

    pub fn schrodinger(potential: Potential, set: SpectralSet, x_max: f64) -> Result<Self> {
        Self::schrodinger_with(potential, set, NodeRule::Resolve { x_max, order: 8 })
    }

    pub fn schrodinger_with(potential: Potential, set: SpectralSet, rule: NodeRule) -> Result<Self> {
        Ok(KernelModel::Schrodinger(SchrodingerModel::new(potential, set, rule)?))
    }

    pub fn liouville(profile: &BandwidthProfile, set: SpectralSet, x_max: f64) -> Result<Self> {
        Self::liouville_with(profile, set, NodeRule::Resolve { x_max, order: 8 })
    }

    pub fn liouville_with(profile: &BandwidthProfile, set: SpectralSet, rule: NodeRule) -> Result<Self> {
        Ok(KernelModel::Liouville(LiouvilleModel::new(profile, set, rule)?))
    }

    pub fn modes(&self) -> &[Mode] {
        match self {
            KernelModel::Toy(m) => &m.modes,
            KernelModel::HalfLine(m) => &m.modes,
            KernelModel::Schrodinger(m) => &m.modes,
            KernelModel::Liouville(m) => &m.inner.modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.modes().len()
    }

    pub fn spectral_set(&self) -> &SpectralSet {
        match self {
            KernelModel::Toy(m) => &m.set,
            KernelModel::HalfLine(m) => &m.set,
            KernelModel::Schrodinger(m) => &m.set,
            KernelModel::Liouville(m) => &m.inner.set,
        }
    }

    pub fn quadrature(&self) -> &SpectralQuadrature {
        match self {
            KernelModel::Toy(m) => &m.quad,
            KernelModel::HalfLine(m) => &m.quad,
            KernelModel::Schrodinger(m) => &m.quad,
            KernelModel::Liouville(m) => &m.inner.quad,
        }
    }

    /// max Lambda.
    pub fn lambda_max(&self) -> f64 {
        self.spectral_set().lambda_max()
    }

    /// psi_j(x) for every mode, one row per point.
    pub fn basis_rows(&self, xs: &[f64]) -> Vec<Vec<C64>> {
        match self {
            KernelModel::Toy(m) => xs
                .par_iter()
                .map(|&x| {
                    m.modes
                        .chunks(2)
                        .flat_map(|pair| {
                            let phi = m.phi(pair[0].omega, x);
                            [pair[0].scale() * phi[0], pair[1].scale() * phi[1]]
                        })
                        .collect()
                })
                .collect(),
            KernelModel::HalfLine(m) => xs
                .par_iter()
                .map(|&x| {
                    m.modes
                        .iter()
                        .map(|md| C64::new(if x >= 0.0 { md.scale() * (md.omega * x).sin() } else { 0.0 }, 0.0))
                        .collect()
                })
                .collect(),
            KernelModel::Schrodinger(m) => m.rows(xs),
            KernelModel::Liouville(m) => {
                let ss: Vec<f64> = xs.iter().map(|&x| m.warp.zeta(x)).collect();
                let mut rows = m.inner.rows(&ss);
                for (row, &x) in rows.iter_mut().zip(xs) {
                    let f = m.factor(x);
                    row.iter_mut().for_each(|v| *v *= f);
                }
                rows
            }
        }
    }

    /// Best available kernel evaluation: closed forms where they exist, the
    /// plane-wave fast path outside the support of q, quadrature otherwise.
    pub fn kernel(&self, x: f64, y: f64) -> C64 {
        match self {
            KernelModel::Toy(m) => C64::new(toy_kernel(m.p_minus, m.p_plus, m.omega, x, y), 0.0),
            KernelModel::HalfLine(m) => C64::new(halfline_kernel(m.omega, x, y), 0.0),
            KernelModel::Schrodinger(m) => {
                if m.is_exterior(x) && m.is_exterior(y) {
                    C64::new(m.kernel_exterior(x, y), 0.0)
                } else {
                    self.kernel_quadrature(x, y)
                }
            }
            KernelModel::Liouville(m) => {
                let (s, t) = (m.warp.zeta(x), m.warp.zeta(y));
                let inner = if m.inner.is_exterior(s) && m.inner.is_exterior(t) {
                    C64::new(m.inner.kernel_exterior(s, t), 0.0)
                } else {
                    let rows = m.inner.rows(&[s, t]);
                    dot_conj(&rows[0], &rows[1])
                };
                inner * m.factor(x) * m.factor(y)
            }
        }
    }

    /// sum_j psi_j(x) conj(psi_j(y)).
    pub fn kernel_quadrature(&self, x: f64, y: f64) -> C64 {
        let rows = self.basis_rows(&[x, y]);
        dot_conj(&rows[0], &rows[1])
    }

    /// Real part of the kernel plus the imaginary residue when it exceeds 1e-9.
    pub fn kernel_checked(&self, x: f64, y: f64) -> (f64, Option<f64>) {
        let k = self.kernel(x, y);
        (k.re, (k.im.abs() > 1e-9).then_some(k.im))
    }

    /// [k(x_i, y_j)], built in parallel.
    pub fn kernel_matrix(&self, xs: &[f64], ys: &[f64]) -> DMatrix<C64> {
        let fast = |x: f64| match self {
            KernelModel::Toy(_) | KernelModel::HalfLine(_) => true,
            KernelModel::Schrodinger(m) => m.is_exterior(x),
            KernelModel::Liouville(m) => m.inner.is_exterior(m.warp.zeta(x)),
        };
        let slow_x: Vec<usize> = (0..xs.len()).filter(|&i| !fast(xs[i])).collect();
        let slow_y: Vec<usize> = (0..ys.len()).filter(|&j| !fast(ys[j])).collect();
        let rows_x = if slow_x.is_empty() && slow_y.is_empty() { Vec::new() } else { self.basis_rows(xs) };
        let rows_y = if slow_x.is_empty() && slow_y.is_empty() { Vec::new() } else { self.basis_rows(ys) };
        let entries: Vec<C64> = (0..xs.len() * ys.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % xs.len(), idx / xs.len());
                if fast(xs[i]) && fast(ys[j]) {
                    self.kernel(xs[i], ys[j])
                } else {
                    dot_conj(&rows_x[i], &rows_y[j])
                }
            })
            .collect();
        DMatrix::from_vec(xs.len(), ys.len(), entries)
    }

    /// Coefficients c_j = sum_k w_k f(x_k) conj(psi_j(x_k)) for a spatial rule.
    pub fn project_rule<F>(&self, rule: &Rule, f: F) -> Vec<C64>
    where
        F: Fn(f64) -> C64 + Sync,
    {
        let n = self.dim();
        let chunk = 512;
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for start in (0..rule.len()).step_by(chunk) {
            let end = (start + chunk).min(rule.len());
            let xs = &rule.nodes[start..end];
            let rows = self.basis_rows(xs);
            let vals: Vec<C64> = xs.iter().zip(&rule.weights[start..end]).map(|(&x, &w)| w * f(x)).collect();
            let part: Vec<C64> = (0..n)
                .into_par_iter()
                .map(|j| rows.iter().zip(&vals).map(|(r, v)| v * r[j].conj()).sum())
                .collect();
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        acc
    }

    /// Matrix B with B[j][i] = int over [cuts_i, cuts_{i+1}] of conj(psi_j).
    pub fn cell_integrals(&self, cuts: &[f64]) -> DMatrix<C64> {
        let n = self.dim();
        let cells = cuts.len().saturating_sub(1);
        let order = 10;
        let max_len = PI / (2.0 * self.max_local_wavenumber());
        let mut owner = Vec::new();
        let mut rule = Rule { nodes: Vec::new(), weights: Vec::new() };
        for i in 0..cells {
            let part = Rule::with_breaks(cuts[i], cuts[i + 1], &self.knots(), max_len, order);
            owner.extend(std::iter::repeat_n(i, part.len()));
            rule.nodes.extend(part.nodes);
            rule.weights.extend(part.weights);
        }
        let mut out = DMatrix::<C64>::zeros(n, cells);
        let chunk = 512;
        for start in (0..rule.len()).step_by(chunk) {
            let end = (start + chunk).min(rule.len());
            let rows = self.basis_rows(&rule.nodes[start..end]);
            for (k, row) in rows.iter().enumerate() {
                let w = rule.weights[start + k];
                let i = owner[start + k];
                for j in 0..n {
                    out[(j, i)] += w * row[j].conj();
                }
            }
        }
        out
    }

    /// Largest spatial wavenumber of any mode.
    pub fn max_local_wavenumber(&self) -> f64 {
        let w = self.lambda_max().sqrt();
        match self {
            KernelModel::Toy(m) => w / m.p_minus.min(m.p_plus).sqrt(),
            KernelModel::HalfLine(_) => w,
            KernelModel::Schrodinger(m) => (w * w + m.potential.bound()).sqrt(),
            KernelModel::Liouville(m) => {
                let p = m.warp.profile();
                (w * w + m.inner.potential.bound()).sqrt() / p.lower_bound().sqrt()
            }
        }
    }

    /// Points where the modes are not smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            KernelModel::Toy(_) | KernelModel::HalfLine(_) => vec![0.0],
            KernelModel::Schrodinger(m) => {
                let s = m.potential.support();
                vec![s.a, s.b]
            }
            KernelModel::Liouville(m) => m.warp.profile().knots(),
        }
    }

    /// Composite rule on `window` suited to integrating products of modes.
    pub fn spatial_rule(&self, window: Interval) -> Rule {
        let max_len = PI / (2.0 * self.max_local_wavenumber());
        Rule::with_breaks(window.a, window.b, &self.knots(), max_len, 10)
    }
}

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// int over {|y - x| > b} within `window` of |k(x, y)|^2 dy.
pub fn kernel_tail_mass(model: &KernelModel, x: f64, b: f64, window: Interval) -> f64 {
    let rule = model.spatial_rule(window);
    let ys: Vec<f64> = rule.nodes.iter().copied().filter(|y| (y - x).abs() > b).collect();
    let ws: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .filter(|(y, _)| (*y - x).abs() > b)
        .map(|(_, &w)| w)
        .collect();
    if ys.is_empty() {
        return 0.0;
    }
    let row = model.kernel_matrix(&[x], &ys);
    row.iter().zip(&ws).map(|(k, w)| w * k.norm_sqr()).sum()
}

/// (1/|I|) int_I k(y, y) dy.
pub fn diagonal_average(model: &KernelModel, interval: Interval) -> Result<f64> {
    if !(interval.len() > 0.0) {
        return Err(Error::Invalid("diagonal average needs |I| > 0".into()));
    }
    let rule = model.spatial_rule(interval);
    let diag = diagonal(model, &rule.nodes);
    Ok(diag.iter().zip(&rule.weights).map(|(k, w)| w * k).sum::<f64>() / interval.len())
}

/// k(y, y) at each point, batching interior evaluations.
pub fn diagonal(model: &KernelModel, ys: &[f64]) -> Vec<f64> {
    match model {
        KernelModel::Schrodinger(m) => {
            let slow: Vec<f64> = ys.iter().copied().filter(|&y| !m.is_exterior(y)).collect();
            let rows = model.basis_rows(&slow);
            let mut slow_vals = rows.iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>());
            ys.iter()
                .map(|&y| if m.is_exterior(y) { m.kernel_exterior(y, y) } else { slow_vals.next().expect("counted") })
                .collect()
        }
        _ => {
            let rows = model.basis_rows(ys);
            match model {
                KernelModel::Toy(_) | KernelModel::HalfLine(_) => ys.iter().map(|&y| model.kernel(y, y).re).collect(),
                _ => rows.iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::BlendShape;

    #[test]
    fn toy_kernel_examples() {
        for &(x, y) in &[(0.3, -1.2), (-2.0, -0.5), (1.0, 4.0)] {
            assert!((toy_kernel(1.0, 1.0, 2.0, x, y) - free_kernel(2.0, x, y)).abs() < 1e-15);
        }
        // Diagonal at the orthonormal-basis nodes.
        let (pm, pp, om) = (1.0f64, 4.0f64, 2.0f64);
        let xj = PI * 3.0 * pp.sqrt() / om.sqrt();
        assert!((toy_kernel(pm, pp, om, xj, xj) - om.sqrt() / (PI * pp.sqrt())).abs() < 1e-14);
        let xj = -PI * 2.0 * pm.sqrt() / om.sqrt();
        assert!((toy_kernel(pm, pp, om, xj, xj) - om.sqrt() / (PI * pm.sqrt())).abs() < 1e-14);
        let w0 = 0.5 * (pm.sqrt() + pp.sqrt());
        assert!((toy_kernel(pm, pp, om, 0.0, 0.0) - om.sqrt() / (PI * w0)).abs() < 1e-14);
        let (x, y) = (-0.7, 1.3);
        let want = 2.0 * om.sqrt() / (PI * 3.0) * sinc(om.sqrt() * (x / 1.0 - y / 2.0));
        assert!((toy_kernel(pm, pp, om, x, y) - want).abs() < 1e-15);
        assert!((toy_kernel(pm, pp, om, x, y) - toy_kernel(pm, pp, om, y, x)).abs() < 1e-15);
    }

    #[test]
    fn halfline_kernel_examples() {
        assert_eq!(halfline_kernel(3.0, 0.0, 0.0), 0.0);
        let om = 3.0f64;
        let x = PI / (2.0 * om.sqrt());
        assert!((halfline_kernel(om, x, x) - om.sqrt() / PI).abs() < 1e-15);
        assert_eq!(halfline_kernel(om, -1.0, 2.0), 0.0);
    }

    #[test]
    fn quadrature_weights_sum_to_measure() {
        let set = SpectralSet::new(vec![(1.0, 4.0), (9.0, 16.0)]).unwrap();
        let q = SpectralQuadrature::new(&set, 30.0, 8);
        let total: f64 = q.weights.iter().sum();
        assert!((total - set.sqrt_measure()).abs() < 1e-12);
        assert!((set.sqrt_measure() - 2.0).abs() < 1e-15);
        assert!(SpectralSet::new(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn toy_quadrature_matches_closed_form() {
        let model = KernelModel::toy(2.0, 3.0, 4.0, 10.0).unwrap();
        for &(x, y) in &[(-3.0, 2.0), (1.0, 7.5), (-9.0, -0.25), (0.0, 0.0)] {
            let q = model.kernel_quadrature(x, y);
            assert!((q.re - toy_kernel(2.0, 3.0, 4.0, x, y)).abs() < 1e-10, "({x},{y})");
            assert!(q.im.abs() < 1e-12);
        }
    }

    #[test]
    fn free_schrodinger_is_sinc() {
        let model = KernelModel::free(1.5, 20.0).unwrap();
        for &(x, y) in &[(-3.0, 2.0), (19.0, -19.0), (0.0, 0.0)] {
            let want = free_kernel(1.5, x, y);
            assert!((model.kernel(x, y).re - want).abs() < 1e-10);
            assert!((model.kernel_quadrature(x, y).re - want).abs() < 1e-10);
        }
    }

    #[test]
    fn fast_path_matches_quadrature() {
        let pot = Potential::square_well(-1.0, 1.0);
        let model = KernelModel::schrodinger(pot, SpectralSet::band(2.0).unwrap(), 12.0).unwrap();
        for &(x, y) in &[(2.0, 5.0), (-3.0, -1.5), (-4.0, 6.0), (7.0, -2.5), (0.3, 3.0), (-0.5, 0.5)] {
            let fast = model.kernel(x, y);
            let slow = model.kernel_quadrature(x, y);
            assert!((fast - slow).norm() < 1e-6, "({x},{y}) {fast} vs {slow}");
            assert!(slow.im.abs() < 1e-9);
        }
        assert!(model.kernel(0.2, 0.2).re > 0.0);
    }

    #[test]
    fn liouville_of_constant_profile_is_sinc() {
        let flat = BandwidthProfile::smooth_blend(1.0, 1.0, 1.0, BlendShape::Cubic).unwrap();
        let model = KernelModel::liouville(&flat, SpectralSet::band(1.0).unwrap(), 10.0).unwrap();
        for &(x, y) in &[(-3.0, 2.0), (0.5, -0.25), (8.0, 9.0)] {
            assert!((model.kernel(x, y).re - free_kernel(1.0, x, y)).abs() < 1e-9);
        }
    }

    #[test]
    fn liouville_kernel_is_hermitian_and_psd() {
        let p = BandwidthProfile::smooth_blend(1.0, 3.0, 1.5, BlendShape::Quintic).unwrap();
        let model = KernelModel::liouville(&p, SpectralSet::band(1.0).unwrap(), 12.0).unwrap();
        let pts = [-6.0, -1.0, -0.2, 0.4, 1.2, 5.0, 9.0];
        let g = model.kernel_matrix(&pts, &pts);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert!((g[(i, j)] - g[(j, i)].conj()).norm() < 1e-10);
            }
        }
        let eig = g.symmetric_eigenvalues();
        let trace: f64 = (0..pts.len()).map(|i| g[(i, i)].re).sum();
        assert!(eig.iter().all(|&e| e >= -1e-8 * trace));
    }

    #[test]
    fn free_diagonal_average_is_constant() {
        let model = KernelModel::free(2.0, 30.0).unwrap();
        let avg = diagonal_average(&model, Interval::new(-13.0, 7.0).unwrap()).unwrap();
        assert!((avg - 2f64.sqrt() / PI).abs() < 1e-10);
    }

    #[test]
    fn tail_mass_shrinks() {
        let model = KernelModel::free(1.0, 200.0).unwrap();
        let window = Interval::new(-200.0, 200.0).unwrap();
        let mut last = f64::INFINITY;
        for &b in &[1.0, 5.0, 20.0, 80.0, 400.0] {
            let m = kernel_tail_mass(&model, 0.0, b, window);
            assert!(m <= last + 1e-12);
            last = m;
        }
        assert_eq!(last, 0.0);
    }
}
