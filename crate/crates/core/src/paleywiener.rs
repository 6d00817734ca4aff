//! Functions of variable bandwidth stored by their spectral coefficients.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::profile::{BandwidthProfile, Interval};
use crate::quadrature::Rule;

/// f = sum_j c_j psi_j for the modes of `model`; ||c||_2 = ||f||_{L^2}.
#[derive(Debug, Clone)]
pub struct VarBandFunction<'a> {
    model: &'a KernelModel,
    coeffs: Vec<C64>,
}

impl<'a> VarBandFunction<'a> {
    /// From orthonormal mode coefficients.
    pub fn from_coeffs(model: &'a KernelModel, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != model.dim() {
            return Err(Error::NodeMismatch { expected: model.dim(), got: coeffs.len() });
        }
        Ok(VarBandFunction { model, coeffs })
    }

    pub fn zero(model: &'a KernelModel) -> Self {
        VarBandFunction { model, coeffs: vec![C64::new(0.0, 0.0); model.dim()] }
    }

    /// The reproducing element k(., x0), i.e. c_j = conj(psi_j(x0)).
    pub fn kernel_element(model: &'a KernelModel, x0: f64) -> Self {
        let row = model.basis_rows(&[x0]).pop().expect("one row");
        VarBandFunction { model, coeffs: row.into_iter().map(|v| v.conj()).collect() }
    }

    /// Unit-norm random function: a Gaussian combination of `atoms` wave
    /// packets centred in `window`. Each packet is the kernel element at its
    /// centre filtered by a Gaussian spectral window of width |I|/20 around
    /// the middle of a band interval I, so the spectrum is below 1e-12 at the
    /// band edges and the packet decays like a Gaussian in space.
    pub fn random<R: Rng + ?Sized>(model: &'a KernelModel, rng: &mut R, window: Interval, atoms: usize) -> Self {
        let bands = model.spectral_set().sqrt_intervals();
        let mut coeffs = vec![C64::new(0.0, 0.0); model.dim()];
        for _ in 0..atoms.max(1) {
            let z = rng.random_range(window.a..=window.b);
            let amp = C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
            let (a, b) = bands[rng.random_range(0..bands.len())];
            let sigma = (b - a) / 20.0;
            let centre = rng.random_range(a + EDGE_SIGMAS * sigma..=b - EDGE_SIGMAS * sigma);
            let row = model.basis_rows(&[z]).pop().expect("one row");
            for ((c, m), r) in coeffs.iter_mut().zip(model.modes()).zip(&row) {
                let u = (m.omega - centre) / sigma;
                if m.omega >= a && m.omega <= b && u.abs() < 40.0 {
                    *c += amp * (-0.5 * u * u).exp() * r.conj();
                }
            }
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            coeffs.iter_mut().for_each(|c| *c /= norm);
        }
        VarBandFunction { model, coeffs }
    }

    pub fn model(&self) -> &'a KernelModel {
        self.model
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// F at the nodes, one value per mode: c_j / sqrt(w_l rho_c).
    pub fn spectrum(&self) -> Vec<C64> {
        self.coeffs.iter().zip(self.model.modes()).map(|(c, m)| c / m.scale()).collect()
    }

    /// L^2 norm from the spectral side.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// L^2 norm by spatial quadrature over `window`.
    pub fn spatial_norm(&self, window: Interval) -> f64 {
        let rule = self.model.spatial_rule(window);
        let vals = self.evaluate_many(&rule.nodes);
        vals.iter().zip(&rule.weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn evaluate(&self, x: f64) -> C64 {
        self.evaluate_many(&[x])[0]
    }

    pub fn evaluate_many(&self, xs: &[f64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(512) {
            let rows = self.model.basis_rows(chunk);
            out.extend(rows.iter().map(|r| r.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum::<C64>()));
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        VarBandFunction { model: self.model, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        VarBandFunction {
            model: self.model,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// ||A^k f|| / (omega^k ||f||) from the spectral side.
    pub fn bernstein_ratio(&self, k: u32, omega: f64) -> Result<f64> {
        let total: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let moment: f64 = self
            .coeffs
            .iter()
            .zip(self.model.modes())
            .map(|(c, m)| (m.lambda() / omega).powi(2 * k as i32) * c.norm_sqr())
            .sum();
        Ok((moment / total).sqrt())
    }

    /// CSV with columns x, Re f, Im f.
    pub fn write_csv<W: Write>(&self, mut out: W, xs: &[f64]) -> io::Result<()> {
        writeln!(out, "x,re_f,im_f")?;
        for (x, v) in xs.iter().zip(self.evaluate_many(xs)) {
            writeln!(out, "{x},{},{}", v.re, v.im)?;
        }
        Ok(())
    }

    /// CSV with columns omega, Re F1, Im F1, Re F2, Im F2 (second pair zero
    /// for one-component models).
    pub fn write_spectrum_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "omega,re_f1,im_f1,re_f2,im_f2")?;
        let spec = self.spectrum();
        let modes = self.model.modes();
        let mut j = 0;
        while j < modes.len() {
            let f1 = spec[j];
            let f2 = if j + 1 < modes.len() && modes[j + 1].node == modes[j].node { spec[j + 1] } else { C64::new(0.0, 0.0) };
            writeln!(out, "{},{},{},{},{}", modes[j].omega, f1.re, f1.im, f2.re, f2.im)?;
            j += if j + 1 < modes.len() && modes[j + 1].node == modes[j].node { 2 } else { 1 };
        }
        Ok(())
    }
}

// Packet centres keep this many spectral widths away from the band edges.
const EDGE_SIGMAS: f64 = 7.5;

/// f from spectral values F, one per mode: f = sum_l w_l rho F Phi.
pub fn synthesize<'a>(model: &'a KernelModel, spectrum: &[C64]) -> Result<VarBandFunction<'a>> {
    if spectrum.len() != model.dim() {
        return Err(Error::NodeMismatch { expected: model.dim(), got: spectrum.len() });
    }
    let coeffs = spectrum.iter().zip(model.modes()).map(|(f, m)| f * m.scale()).collect();
    VarBandFunction::from_coeffs(model, coeffs)
}

pub fn evaluate(f: &VarBandFunction<'_>, x: f64) -> C64 {
    f.evaluate(x)
}

/// Orthogonal projection of the step function sum_i values_i chi_[cuts_i, cuts_{i+1}).
pub fn project_step<'a>(model: &'a KernelModel, cuts: &[f64], values: &[C64]) -> Result<VarBandFunction<'a>> {
    check_cells(cuts, values.len())?;
    let b = model.cell_integrals(cuts);
    let coeffs = (0..model.dim())
        .map(|j| values.iter().enumerate().map(|(i, v)| b[(j, i)] * v).sum())
        .collect();
    VarBandFunction::from_coeffs(model, coeffs)
}

pub(crate) fn check_cells(cuts: &[f64], cells: usize) -> Result<()> {
    if cuts.len() != cells + 1 {
        return Err(Error::NodeMismatch { expected: cuts.len().saturating_sub(1), got: cells });
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("step breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// int_bands F(lambda) e^{i lambda t} d lambda by composite Gauss–Legendre.
pub fn bandlimited_eval<F>(bands: &[(f64, f64)], spectrum: F, t: f64) -> C64
where
    F: Fn(f64) -> C64,
{
    bands
        .iter()
        .map(|&(a, b)| {
            let panels = ((b - a) * t.abs().max(1.0) / (PI / 4.0)).ceil() as usize;
            let rule = Rule::composite(a, b, panels, 10);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&l, &w)| w * spectrum(l) * C64::from_polar(1.0, l * t))
                .sum::<C64>()
        })
        .sum()
}

/// f(x) = int F(lambda) e^{i lambda eta(x)} d lambda with eta(x) = int_0^x dt/p:
/// the classical band-limited function with spectrum F, evaluated in the warped time.
pub fn warped_bandlimited_eval<F>(profile: &BandwidthProfile, bands: &[(f64, f64)], spectrum: F, x: f64) -> Result<C64>
where
    F: Fn(f64) -> C64,
{
    Ok(bandlimited_eval(bands, spectrum, profile.eta(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{free_kernel, toy_kernel};
    use crate::quadrature::{adaptive, Tolerance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_element_reproduces_kernel() {
        let model = KernelModel::toy(1.0, 4.0, 1.0, 20.0).unwrap();
        let f = VarBandFunction::kernel_element(&model, -1.5);
        for &x in &[-7.0, -1.5, 0.0, 3.0, 12.0] {
            let want = toy_kernel(1.0, 4.0, 1.0, x, -1.5);
            assert!((f.evaluate(x).re - want).abs() < 1e-9);
        }
        let zero = synthesize(&model, &vec![C64::new(0.0, 0.0); model.dim()]).unwrap();
        assert_eq!(zero.evaluate(0.3), C64::new(0.0, 0.0));
        assert!(synthesize(&model, &[C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn parseval_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [KernelModel::toy(2.0, 3.0, 1.0, 200.0).unwrap(), KernelModel::free(1.0, 200.0).unwrap()] {
            for _ in 0..3 {
                let f = VarBandFunction::random(&model, &mut rng, Interval::new(-10.0, 10.0).unwrap(), 6);
                let spatial = f.spatial_norm(Interval::new(-200.0, 200.0).unwrap());
                assert!((spatial - 1.0).abs() < 1e-3, "{spatial}");
            }
        }
    }

    #[test]
    fn box_projection_matches_fourier_transform() {
        let model = KernelModel::free(2.0, 10.0).unwrap();
        let h = 0.8;
        let f = project_step(&model, &[-h / 2.0, h / 2.0], &[C64::new(1.0, 0.0)]).unwrap();
        for (m, v) in model.modes().iter().zip(f.spectrum()) {
            let want = h * (m.omega * h / 2.0).sin() / (m.omega * h / 2.0);
            assert!((v - want).norm() < 1e-10);
        }
        // The projection of a box is k integrated over the box.
        let direct = adaptive(|y| free_kernel(2.0, 0.3, y), -h / 2.0, h / 2.0, Tolerance::default()).unwrap();
        assert!((f.evaluate(0.3).re - direct).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent() {
        let model = KernelModel::toy(1.0, 2.0, 1.0, 60.0).unwrap();
        let cuts: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        let vals: Vec<C64> = (0..40).map(|i| C64::new((i as f64 * 0.7).sin(), 0.0)).collect();
        let f = project_step(&model, &cuts, &vals).unwrap();
        let window = Interval::new(-60.0, 60.0).unwrap();
        let rule = model.spatial_rule(window);
        let again = model.project_rule(&rule, |x| f.evaluate(x));
        let diff: f64 = again.iter().zip(f.coeffs()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        // Re-projecting f restricted to the window moves it by at most the
        // mass f carries outside the window.
        let inside = f.spatial_norm(window);
        let tail = (f.norm().powi(2) - inside * inside).max(0.0).sqrt();
        assert!(diff <= 1.01 * tail + 1e-6 * f.norm(), "{diff} vs tail {tail}");
    }

    #[test]
    fn bernstein_examples() {
        let model = KernelModel::free(4.0, 5.0).unwrap();
        let n = model.dim();
        let mut c = vec![C64::new(0.0, 0.0); n];
        c[n - 1] = C64::new(1.0, 0.0);
        let top = VarBandFunction::from_coeffs(&model, c.clone()).unwrap();
        assert!((top.bernstein_ratio(1, 4.0).unwrap() - 1.0).abs() < 1e-2);
        assert_eq!(top.bernstein_ratio(0, 4.0).unwrap(), 1.0);
        let quarter = model.modes().iter().position(|m| m.omega >= 1.0).unwrap();
        c[n - 1] = C64::new(0.0, 0.0);
        c[quarter] = C64::new(1.0, 0.0);
        let f = VarBandFunction::from_coeffs(&model, c).unwrap();
        let lam = model.modes()[quarter].lambda();
        assert!((f.bernstein_ratio(1, 4.0).unwrap() - lam / 4.0).abs() < 1e-12);
        assert!((lam / 4.0 - 0.25).abs() < 0.05);
        assert!(VarBandFunction::zero(&model).bernstein_ratio(1, 4.0).is_err());
    }

    #[test]
    fn warped_evaluation() {
        let bands = [(-1.5, 1.5)];
        let one = |_: f64| C64::new(1.0, 0.0);
        let flat = BandwidthProfile::constant(1.0);
        let v = warped_bandlimited_eval(&flat, &bands, one, 0.7).unwrap();
        assert!((v.re - 2.0 * (1.5f64 * 0.7).sin() / 0.7).abs() < 1e-12);
        let two = BandwidthProfile::constant(2.0);
        for &x in &[-13.0, 0.4, 5.5, 30.0] {
            let got = warped_bandlimited_eval(&two, &bands, one, x).unwrap();
            let re = adaptive(|l| (l * x / 2.0).cos(), -1.5, 1.5, Tolerance { abs: 1e-13, rel: 1e-12, max_depth: 40 }).unwrap();
            let im = adaptive(|l| (l * x / 2.0).sin(), -1.5, 1.5, Tolerance { abs: 1e-13, rel: 1e-12, max_depth: 40 }).unwrap();
            assert!((got - C64::new(re, im)).norm() < 1e-8);
        }
    }

    #[test]
    fn warped_samples_are_classical_samples() {
        let p = BandwidthProfile::two_level(1.0, 3.0);
        let bands = [(-1.0, 1.0)];
        let spec = |l: f64| C64::new((1.0 - l * l).max(0.0), 0.3 * l);
        for j in -8..=8 {
            let t = 0.9 * j as f64;
            let x = p.eta_inv(t).unwrap();
            let warped = warped_bandlimited_eval(&p, &bands, spec, x).unwrap();
            assert!((warped - bandlimited_eval(&bands, spec, t)).norm() < 1e-10);
        }
    }
}
