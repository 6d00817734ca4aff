//! Beurling densities measured in the metric of mu_p, separation, and the
//! empirical density-threshold sweep.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, NodeRule, SpectralSet};
use crate::profile::{BandwidthProfile, Interval};
use crate::sampling::{frame_bounds_estimate, SampleSet};
use crate::schrodinger::Potential;

/// Finite-window estimates of the lower and upper mu_p-Beurling densities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub r: Vec<f64>,
    pub inf_count: Vec<usize>,
    pub sup_count: Vec<usize>,
    /// Value at the largest r.
    pub d_minus: f64,
    pub d_plus: f64,
    /// Whether inf_count / r (resp. sup_count / r) moves monotonically in r.
    pub monotone_minus: bool,
    pub monotone_plus: bool,
    /// The window in the warped coordinate.
    pub window: (f64, f64),
}

impl DensityReport {
    pub fn lower(&self) -> Vec<f64> {
        self.r.iter().zip(&self.inf_count).map(|(r, &c)| c as f64 / r).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.r.iter().zip(&self.sup_count).map(|(r, &c)| c as f64 / r).collect()
    }

    /// CSV with columns r, inf_count/r, sup_count/r.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,lower,upper")?;
        for ((r, lo), hi) in self.r.iter().zip(self.lower()).zip(self.upper()) {
            writeln!(out, "{r},{lo},{hi}")?;
        }
        Ok(())
    }
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0])
}

/// Slides intervals of mu_p-length r across `window` in steps of r * `step_frac`
/// and records the least and largest number of points of X they contain.
pub fn beurling_density(
    profile: &BandwidthProfile,
    x: &SampleSet,
    r_list: &[f64],
    window: Interval,
    step_frac: f64,
) -> Result<DensityReport> {
    if x.points().iter().any(|&t| !window.contains(t)) {
        return Err(Error::Window("sample points escape the window".into()));
    }
    let s: Vec<f64> = x.points().iter().map(|&t| profile.zeta(t)).collect::<Result<_>>()?;
    let (lo, hi) = (profile.zeta(window.a)?, profile.zeta(window.b)?);
    let mut inf_count = Vec::with_capacity(r_list.len());
    let mut sup_count = Vec::with_capacity(r_list.len());
    for &r in r_list {
        if !(r > 0.0 && r <= (hi - lo) / 4.0 * (1.0 + 1e-12)) {
            return Err(Error::Window(format!("r = {r} must lie in (0, mu_p(window) / 4 = {}]", (hi - lo) / 4.0)));
        }
        let step = r * step_frac;
        let positions = ((hi - lo - r) / step).floor() as usize;
        let count = |t: f64| s.partition_point(|&v| v < t + r) - s.partition_point(|&v| v < t);
        let (mut mn, mut mx) = (usize::MAX, 0);
        for k in 0..=positions + 1 {
            let t = (lo + k as f64 * step).min(hi - r);
            let c = count(t);
            mn = mn.min(c);
            mx = mx.max(c);
        }
        inf_count.push(mn);
        sup_count.push(mx);
    }
    let mut report = DensityReport {
        r: r_list.to_vec(),
        inf_count,
        sup_count,
        d_minus: 0.0,
        d_plus: 0.0,
        monotone_minus: true,
        monotone_plus: true,
        window: (lo, hi),
    };
    let (lower, upper) = (report.lower(), report.upper());
    report.d_minus = lower.last().copied().unwrap_or(0.0);
    report.d_plus = upper.last().copied().unwrap_or(0.0);
    report.monotone_minus = monotone(&lower);
    report.monotone_plus = monotone(&upper);
    Ok(report)
}

/// Minimal mu_p-gap and the largest number of points in a unit mu_p-interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub min_gap: f64,
    pub n0: usize,
    /// min_gap above 1e-6.
    pub separated: bool,
}

pub fn separation(profile: &BandwidthProfile, x: &SampleSet) -> Result<Separation> {
    if x.len() < 2 {
        return Err(Error::Invalid("separation needs at least two points".into()));
    }
    let pts = x.points();
    let s: Vec<f64> = pts.iter().map(|&t| profile.zeta(t)).collect::<Result<_>>()?;
    let mut min_gap = f64::INFINITY;
    for w in pts.windows(2) {
        min_gap = min_gap.min(profile.mu(Interval { a: w[0], b: w[1] })?);
    }
    let n0 = (0..s.len()).map(|i| s.partition_point(|&v| v < s[i] + 1.0) - i).max().unwrap_or(0);
    Ok(Separation { min_gap, n0, separated: min_gap > 1e-6 })
}

/// eta = max gap ratio and the resulting lower density bound 1/eta, checked
/// against the measured lower density at r_max = mu_p(span X) / 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDensity {
    pub eta: f64,
    pub bound: f64,
    pub d_minus: f64,
    pub r_max: f64,
    /// d_minus >= 1/eta - 3/r_max.
    pub holds: bool,
}

pub fn gap_density_bound(profile: &BandwidthProfile, x: &SampleSet) -> Result<GapDensity> {
    if x.len() < 2 {
        return Err(Error::Invalid("gap density needs at least two points".into()));
    }
    let pts = x.points();
    let eta = profile.max_gap_delta(pts);
    let window = Interval { a: pts[0], b: pts[pts.len() - 1] };
    let r_max = profile.mu(window)? / 4.0;
    let report = beurling_density(profile, x, &[r_max], window, 1.0 / 50.0)?;
    let d_minus = report.d_minus;
    Ok(GapDensity { eta, bound: 1.0 / eta, d_minus, r_max, holds: d_minus >= 1.0 / eta - 3.0 / r_max })
}

/// floor(d mu_p([-l, l])) points zeta^{-1}(s) with s evenly spread over
/// [zeta(-l), zeta(l)) at cell midpoints.
pub fn quasi_uniform(profile: &BandwidthProfile, density: f64, l: f64) -> Result<SampleSet> {
    let (lo, hi) = (profile.zeta(-l)?, profile.zeta(l)?);
    let count = ((hi - lo) * density).floor() as usize;
    let step = (hi - lo) / count as f64;
    let pts = (0..count)
        .map(|k| profile.zeta_inv(lo + (k as f64 + 0.5) * step))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(pts)
}

/// One cell of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandauRow {
    pub density: f64,
    pub window: f64,
    pub a_est: f64,
    pub b_est: f64,
    pub riesz_min: f64,
    pub samples: usize,
    pub dim: usize,
}

/// Sweep table plus the bracket of the empirical threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandauSweep {
    pub rows: Vec<LandauRow>,
    /// Per density: true when A_est stays bounded below as the window grows.
    pub stable: Vec<(f64, bool)>,
    /// (last degenerating density, first stabilizing density), when the
    /// classification switches exactly once.
    pub bracket: Option<(f64, f64)>,
    pub critical: f64,
}

impl LandauSweep {
    /// CSV with columns density, window, A_est, B_est, riesz_min, samples, dim.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "density,window,a_est,b_est,riesz_min,samples,dim")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{},{}", r.density, r.window, r.a_est, r.b_est, r.riesz_min, r.samples, r.dim)?;
        }
        Ok(())
    }
}

/// For each density, builds quasi-uniform sets in mu_p-coordinates over the
/// windows [-l, l], estimates frame bounds on a model discretized for that
/// window, and classifies the density as degenerating or stable. With
/// `profile = None` the free operator is used.
pub fn landau_sweep(profile: Option<&BandwidthProfile>, set: &SpectralSet, densities: &[f64], windows: &[f64]) -> Result<LandauSweep> {
    let unit = BandwidthProfile::constant(1.0);
    let p = profile.unwrap_or(&unit);
    let mut rows = Vec::new();
    for &l in windows {
        let period = p.zeta(l)? - p.zeta(-l)?;
        let rule = NodeRule::Periodic { period };
        let model = match profile {
            None => KernelModel::schrodinger_with(Potential::zero(), set.clone(), rule)?,
            Some(prof) => KernelModel::liouville_with(prof, set.clone(), rule)?,
        };
        for &d in densities {
            let x = quasi_uniform(p, d, l)?;
            let fb = frame_bounds_estimate(&model, &x)?;
            rows.push(LandauRow {
                density: d,
                window: l,
                a_est: fb.a_est,
                b_est: fb.b_est,
                riesz_min: fb.riesz_min,
                samples: fb.samples,
                dim: fb.dim,
            });
        }
    }
    let stable: Vec<(f64, bool)> = densities
        .iter()
        .map(|&d| {
            let cells: Vec<&LandauRow> = rows.iter().filter(|r| r.density == d).collect();
            let bounded = cells.iter().all(|r| r.a_est >= 1e-3 * r.b_est);
            let first = cells.first().map(|r| r.a_est).unwrap_or(0.0);
            let last = cells.last().map(|r| r.a_est).unwrap_or(0.0);
            (d, bounded && last >= 0.5 * first)
        })
        .collect();
    let switches = stable.windows(2).filter(|w| w[0].1 != w[1].1).count();
    let bracket = match stable.iter().position(|s| s.1) {
        Some(k) if k > 0 && switches == 1 => Some((stable[k - 1].0, stable[k].0)),
        _ => None,
    };
    Ok(LandauSweep { rows, stable, bracket, critical: set.critical_density() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lattice(step: f64, a: f64, b: f64) -> SampleSet {
        SampleSet::lattice(step, 0.0, Interval::new(a, b).unwrap()).unwrap()
    }

    #[test]
    fn lattice_density() {
        let flat = BandwidthProfile::constant(1.0);
        let x = lattice(0.5, -100.0, 100.0);
        let rs = [5.0, 10.0, 40.0];
        let rep = beurling_density(&flat, &x, &rs, Interval::new(-100.0, 100.0).unwrap(), 0.02).unwrap();
        for (r, (lo, hi)) in rs.iter().zip(rep.lower().iter().zip(rep.upper())) {
            assert!((lo - 2.0).abs() <= 2.0 / r && (hi - 2.0).abs() <= 2.0 / r);
            assert!(*lo <= hi);
        }
        let empty = beurling_density(&flat, &SampleSet::new(vec![]).unwrap(), &[5.0], Interval::new(0.0, 40.0).unwrap(), 0.02).unwrap();
        assert_eq!(empty.d_plus, 0.0);
        assert!(beurling_density(&flat, &x, &[60.0], Interval::new(-100.0, 100.0).unwrap(), 0.02).is_err());
    }

    #[test]
    fn toy_halves_have_equal_density() {
        let toy = BandwidthProfile::two_level(1.0, 4.0);
        let pts: Vec<f64> = (-100..0).map(|j| j as f64).chain((0..=50).map(|j| 2.0 * j as f64)).collect();
        let x = SampleSet::new(pts).unwrap();
        let rep = beurling_density(&toy, &x, &[10.0, 20.0], Interval::new(-100.0, 100.0).unwrap(), 0.02).unwrap();
        for (r, (lo, hi)) in rep.r.iter().zip(rep.lower().iter().zip(rep.upper())) {
            assert!((lo - 1.0).abs() <= 2.0 / r && (hi - 1.0).abs() <= 2.0 / r, "{lo} {hi}");
        }
    }

    #[test]
    fn separation_examples() {
        let flat = BandwidthProfile::constant(1.0);
        let s = separation(&flat, &lattice(PI, -30.0, 30.0)).unwrap();
        assert!((s.min_gap - PI).abs() < 1e-12 && s.n0 == 1 && s.separated);
        let s = separation(&flat, &SampleSet::new(vec![0.0, 1e-9, 3.0]).unwrap()).unwrap();
        assert!((s.min_gap - 1e-9).abs() < 1e-15 && !s.separated);
        let toy = BandwidthProfile::two_level(1.0, 4.0);
        let s = separation(&toy, &SampleSet::new(vec![-3.0, -1.0, 2.0, 6.0]).unwrap()).unwrap();
        assert!((s.min_gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gap_bound_on_lattices() {
        let flat = BandwidthProfile::constant(1.0);
        let g = gap_density_bound(&flat, &lattice(1.0, -200.0, 200.0)).unwrap();
        assert!((g.eta - 1.0).abs() < 1e-12 && g.holds && g.d_minus >= 1.0 - 1e-12);
        let g = gap_density_bound(&flat, &lattice(2.0, -200.0, 200.0)).unwrap();
        assert!((g.bound - 0.5).abs() < 1e-12 && (g.d_minus - 0.5).abs() < 0.02 && g.holds);
    }

    #[test]
    fn free_sweep_brackets_nyquist() {
        let set = SpectralSet::band(1.0).unwrap();
        let densities: Vec<f64> = [0.75, 0.85, 0.95, 1.05, 1.15].iter().map(|f| f / PI).collect();
        let sweep = landau_sweep(None, &set, &densities, &[40.0, 80.0]).unwrap();
        let (lo, hi) = sweep.bracket.expect("threshold bracketed");
        assert!(lo < 1.0 / PI && hi > 1.0 / PI);
    }
}
