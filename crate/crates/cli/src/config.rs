//! Experiment configuration: one JSON document, validated field by field
//! before anything is computed.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use varband::{BandwidthProfile, Interval, KernelModel, Potential, ProfileSpec, SpectralSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(field: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { field: field.into(), message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// q = 0 on the line.
    Free,
    /// Two-level profile; needs a piecewise profile with one breakpoint at 0.
    Toy,
    HalfLine,
    /// -D^2 + q with q obtained from the (smooth) profile.
    Schrodinger,
    /// -(p f')' through the Liouville transform.
    Liouville,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct QuadratureConfig {
    /// Spatial extent the spectral nodes must resolve; defaults to the window.
    pub x_max: Option<f64>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Grid points per axis of the kernel heatmap.
    pub points: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub nodes: usize,
    /// [q0, a] selects the square well q0 on [-a, a] instead of the profile potential.
    pub square_well: Option<[f64; 2]>,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig { omega_min: 0.05, omega_max: 5.0, nodes: 200, square_well: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    /// Target delta sqrt(omega) / pi of the sampling lattice.
    pub theta: f64,
    pub functions: usize,
    pub atoms: usize,
    /// Region holding the centres of the random test functions.
    pub support: [f64; 2],
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig { theta: 0.6, functions: 3, atoms: 4, support: [-20.0, 20.0], max_iter: 60, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShannonConfig {
    pub p_minus: f64,
    pub p_plus: f64,
    pub omega: f64,
    /// Gram matrix over |j| <= gram_j.
    pub gram_j: usize,
    /// Expansion truncation |j| <= j_max.
    pub j_max: usize,
    pub functions: usize,
}

impl Default for ShannonConfig {
    fn default() -> Self {
        ShannonConfig { p_minus: 1.0, p_plus: 4.0, omega: 1.0, gram_j: 20, j_max: 200, functions: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    /// Spacing in the warped coordinate; jittered by `jitter` times itself.
    pub spacing: f64,
    pub jitter: f64,
    pub r: Vec<f64>,
    pub step_frac: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { spacing: 1.0, jitter: 0.3, r: vec![2.0, 4.0, 8.0, 16.0], step_frac: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandauConfig {
    /// Densities as multiples of the critical density.
    pub factors: Vec<f64>,
    /// Half-lengths l of the windows [-l, l].
    pub windows: Vec<f64>,
}

impl Default for LandauConfig {
    fn default() -> Self {
        LandauConfig { factors: (0..10).map(|k| 0.55 + 0.1 * k as f64).collect(), windows: vec![50.0, 100.0, 200.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SelftestConfig {
    /// Case ids to run; empty means the invariant suite plus every case.
    pub cases: Vec<String>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub profile: Option<ProfileSpec>,
    /// Intervals of Lambda.
    pub spectral: Vec<[f64; 2]>,
    pub quadrature: QuadratureConfig,
    pub window: [f64; 2],
    pub seed: u64,
    pub tolerance_scale: f64,
    pub kernel: KernelConfig,
    pub scatter: ScatterConfig,
    pub reconstruct: ReconstructConfig,
    pub shannon: ShannonConfig,
    pub density: DensityConfig,
    pub landau: LandauConfig,
    pub selftest: SelftestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::Free,
            profile: None,
            spectral: vec![[0.0, 1.0]],
            quadrature: QuadratureConfig::default(),
            window: [-40.0, 40.0],
            seed: 1,
            tolerance_scale: 1.0,
            kernel: KernelConfig::default(),
            scatter: ScatterConfig::default(),
            reconstruct: ReconstructConfig::default(),
            shannon: ShannonConfig::default(),
            density: DensityConfig::default(),
            landau: LandauConfig::default(),
            selftest: SelftestConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        err(field, format!("must be positive and finite, got {v}"))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).or_else(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).or_else(|e| err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let [a, b] = self.window;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return err("window", format!("need a < b, got [{a}, {b}]"));
        }
        positive("tolerance_scale", self.tolerance_scale)?;
        if let Some(x) = self.quadrature.x_max {
            positive("quadrature.x_max", x)?;
        }
        self.spectral_set()?;
        let profile = self.profile()?;
        match self.model {
            ModelKind::Toy => {
                self.toy_levels()?;
                self.single_band("spectral")?;
            }
            ModelKind::HalfLine => {
                self.single_band("spectral")?;
                if a < 0.0 {
                    return err("window", "the half-line model lives on [0, inf)");
                }
            }
            ModelKind::Schrodinger | ModelKind::Liouville => {
                if !profile.is_smooth() {
                    return err("profile", "this model needs a smooth_blend profile");
                }
            }
            ModelKind::Free => {}
        }
        if self.kernel.points < 2 {
            return err("kernel.points", "need at least 2 points");
        }
        let s = &self.scatter;
        if !(s.omega_min > 0.0 && s.omega_min < s.omega_max) {
            return err("scatter.omega_min", "need 0 < omega_min < omega_max");
        }
        if s.nodes < 2 {
            return err("scatter.nodes", "need at least 2 nodes");
        }
        if let Some([_, width]) = s.square_well {
            positive("scatter.square_well[1]", width)?;
        }
        let r = &self.reconstruct;
        if !(r.theta > 0.0 && r.theta < 1.0) {
            return err("reconstruct.theta", format!("must lie in (0, 1), got {}", r.theta));
        }
        if r.support[0] >= r.support[1] || r.support.iter().any(|v| v.is_nan()) {
            return err("reconstruct.support", "must be a non-empty interval");
        }
        if r.max_iter == 0 || r.functions == 0 || r.atoms == 0 {
            return err("reconstruct", "max_iter, functions and atoms must be positive");
        }
        let sh = &self.shannon;
        positive("shannon.p_minus", sh.p_minus)?;
        positive("shannon.p_plus", sh.p_plus)?;
        positive("shannon.omega", sh.omega)?;
        if sh.j_max == 0 || sh.gram_j == 0 {
            return err("shannon.j_max", "j_max and gram_j must be positive");
        }
        let d = &self.density;
        positive("density.spacing", d.spacing)?;
        if !(0.0..0.5).contains(&d.jitter) {
            return err("density.jitter", "must lie in [0, 0.5)");
        }
        positive("density.step_frac", d.step_frac)?;
        if d.r.is_empty() {
            return err("density.r", "need at least one radius");
        }
        for &v in &d.r {
            positive("density.r", v)?;
        }
        let l = &self.landau;
        if l.factors.is_empty() || l.windows.is_empty() {
            return err("landau", "factors and windows must be non-empty");
        }
        if l.factors.windows(2).any(|w| w[1] <= w[0]) {
            return err("landau.factors", "must be strictly increasing");
        }
        for &v in l.factors.iter().chain(&l.windows) {
            positive("landau", v)?;
        }
        for id in &self.selftest.cases {
            if id != "invariants" && crate::selftest::find(id).is_none() {
                return err("selftest.cases", format!("unknown case '{id}'"));
            }
        }
        Ok(())
    }

    fn single_band(&self, field: &str) -> Result<f64, ConfigError> {
        match self.spectral.as_slice() {
            [[a, b]] if *a == 0.0 => Ok(*b),
            _ => err(field, "this model needs a single band [0, omega]"),
        }
    }

    fn toy_levels(&self) -> Result<(f64, f64), ConfigError> {
        match &self.profile {
            Some(spec) if spec.kind == "piecewise" && spec.breakpoints == [0.0] && spec.values.len() == 2 => {
                Ok((spec.values[0], spec.values[1]))
            }
            _ => err("profile", "the toy model needs a piecewise profile with breakpoints [0] and two values"),
        }
    }

    /// reconstruct.support, which must lie inside the window for the
    /// subcommands that draw random functions.
    pub fn support(&self) -> Result<Interval, ConfigError> {
        let [a, b] = self.reconstruct.support;
        if a < self.window[0] || b > self.window[1] {
            return err("reconstruct.support", "must lie inside the window");
        }
        Ok(Interval { a, b })
    }

    pub fn window(&self) -> Interval {
        Interval { a: self.window[0], b: self.window[1] }
    }

    pub fn spectral_set(&self) -> Result<SpectralSet, ConfigError> {
        SpectralSet::new(self.spectral.iter().map(|[a, b]| (*a, *b)).collect()).or_else(|e| err("spectral", e.to_string()))
    }

    /// The configured profile, or p = 1.
    pub fn profile(&self) -> Result<BandwidthProfile, ConfigError> {
        match &self.profile {
            None => Ok(BandwidthProfile::constant(1.0)),
            Some(spec) => BandwidthProfile::from_spec(spec).or_else(|e| err("profile", e.to_string())),
        }
    }

    pub fn x_max(&self) -> f64 {
        self.quadrature.x_max.unwrap_or(self.window[0].abs().max(self.window[1].abs()))
    }

    pub fn build_model(&self) -> Result<KernelModel, ConfigError> {
        let set = self.spectral_set()?;
        let x_max = self.x_max();
        let built = match self.model {
            ModelKind::Free => KernelModel::schrodinger(Potential::zero(), set, x_max),
            ModelKind::Toy => {
                let (pm, pp) = self.toy_levels()?;
                KernelModel::toy(pm, pp, self.single_band("spectral")?, x_max)
            }
            ModelKind::HalfLine => KernelModel::halfline(self.single_band("spectral")?, x_max),
            ModelKind::Schrodinger => {
                let pot = Potential::from_profile(&self.profile()?).or_else(|e| err("profile", e.to_string()))?;
                KernelModel::schrodinger(pot, set, x_max)
            }
            ModelKind::Liouville => KernelModel::liouville(&self.profile()?, set, x_max),
        };
        built.or_else(|e| err("model", e.to_string()))
    }
}
