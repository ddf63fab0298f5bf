use std::path::Path;

use serde::{Deserialize, Serialize};

use se2_harmonic::coset_series::SpectralSettings;
use se2_harmonic::crystal::CrystalGroup;
use se2_harmonic::quadrature::Orders;
use se2_harmonic::spectra::BandLimit;
use se2_harmonic::testfn::{Harmonic, TestFunction};

/// A validation failure at a dotted field path.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn fail<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CrystalSpec {
    Preset {
        preset: String,
    },
    Explicit {
        a1: [f64; 2],
        a2: [f64; 2],
        order: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialConfig {
    pub p_max: f64,
    pub nodes: usize,
    pub tail_tol: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            p_max: 12.0,
            nodes: 64,
            tail_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Rule over the support of each test function for `f̂`.
    pub transform: [usize; 3],
    /// Rule over each translate of the fundamental domain.
    pub domain: [usize; 3],
    /// Equal-weight rule on the coset space.
    pub coset: [usize; 3],
    /// Rule over the first factor of a group convolution.
    pub conv_group: [usize; 3],
    /// Rule over the kernel of the coset action.
    pub conv_action: [usize; 3],
    /// Midpoint grid on the fundamental domain for pointwise comparisons.
    pub grid: [usize; 3],
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            transform: [48, 48, 64],
            domain: [40, 40, 32],
            coset: [32, 32, 32],
            conv_group: [32, 32, 16],
            conv_action: [24, 24, 16],
            grid: [4, 4, 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub k_max: usize,
    pub n_max: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { k_max: 8, n_max: 8 }
    }
}

/// Thresholds used by `verify`; every defect is compared with `<`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub irrep: f64,
    pub weil: f64,
    pub plancherel: f64,
    pub convolution: f64,
    pub reconstruction: f64,
    pub coefficients: f64,
    pub matrix_form: f64,
    pub tilde_conv: f64,
    pub plancherel_conv: f64,
    /// Bound on the imaginary part of the series route to `‖f̃‖²`.
    pub imaginary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            irrep: 1e-8,
            weil: 1e-6,
            plancherel: 1e-3,
            convolution: 1e-4,
            reconstruction: 1e-4,
            coefficients: 1e-4,
            matrix_form: 1e-10,
            tilde_conv: 1e-4,
            plancherel_conv: 1e-3,
            imaginary: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random `(p, g)` pairs for the representation checks.
    pub irrep_samples: usize,
    /// Group elements at which reconstruction is compared.
    pub reconstruction_points: usize,
    /// Basis elements whose coefficients also go through the matrix-element form.
    pub matrix_form_elements: usize,
    /// Basis truncation for the coefficient checks (defaults to `basis`).
    pub coefficient_basis: Option<BasisConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            irrep_samples: 200,
            reconstruction_points: 20,
            matrix_form_elements: 4,
            coefficient_basis: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub crystal: CrystalSpec,
    #[serde(default)]
    pub band: BandLimit,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            crystal: CrystalSpec::Preset {
                preset: "p4".into(),
            },
            band: BandLimit::default(),
            radial: RadialConfig::default(),
            quadrature: QuadratureConfig::default(),
            basis: BasisConfig::default(),
            functions: vec![
                TestFunction::gaussian(
                    [0.1, 0.05],
                    0.52,
                    vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(1, 0.3, 0.1)],
                ),
                TestFunction::windowed(
                    [-0.05, 0.1],
                    0.55,
                    [1.0, 0.5],
                    vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(-2, 0.2, -0.4)],
                ),
            ],
            tolerances: Tolerances::default(),
            verify: VerifyConfig::default(),
            output: None,
        }
    }
}

/// A validated config with its derived objects.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub group: CrystalGroup,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).or_else(|e| fail("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
            path: match e.path().to_string() {
                p if p == "." => "<root>".into(),
                p => p,
            },
            message: e.inner().to_string(),
        })
    }

    pub fn validate(self) -> Result<Experiment, ConfigError> {
        let group = match &self.crystal {
            CrystalSpec::Preset { preset } => {
                CrystalGroup::preset(preset).or_else(|e| fail("crystal.preset", e.to_string()))?
            }
            CrystalSpec::Explicit { a1, a2, order } => {
                CrystalGroup::new(*a1, *a2, *order).or_else(|e| fail("crystal", e.to_string()))?
            }
        };
        if self.band.n == 0 {
            return fail("band.n", "must be positive");
        }
        if self.band.guard >= self.band.n {
            return fail("band.guard", format!("must be below band.n = {}", self.band.n));
        }
        positive("radial.p_max", self.radial.p_max)?;
        positive("radial.tail_tol", self.radial.tail_tol)?;
        if self.radial.nodes == 0 {
            return fail("radial.nodes", "must be positive");
        }
        let q = &self.quadrature;
        for (name, orders, min) in [
            ("transform", q.transform, 2),
            ("domain", q.domain, 2),
            ("coset", q.coset, 1),
            ("conv_group", q.conv_group, 2),
            ("conv_action", q.conv_action, 2),
            ("grid", q.grid, 1),
        ] {
            for (i, &o) in orders.iter().enumerate() {
                if o < min {
                    return fail(format!("quadrature.{name}[{i}]"), format!("must be at least {min}"));
                }
            }
        }
        if self.functions.is_empty() {
            return fail("functions", "at least one test function is required");
        }
        for (i, f) in self.functions.iter().enumerate() {
            f.validate().or_else(|e| fail(format!("functions[{i}]"), e.to_string()))?;
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("irrep", t.irrep),
            ("weil", t.weil),
            ("plancherel", t.plancherel),
            ("convolution", t.convolution),
            ("reconstruction", t.reconstruction),
            ("coefficients", t.coefficients),
            ("matrix_form", t.matrix_form),
            ("tilde_conv", t.tilde_conv),
            ("plancherel_conv", t.plancherel_conv),
            ("imaginary", t.imaginary),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("tolerances.{name}"), "must be finite and non-negative");
            }
        }
        Ok(Experiment { config: self, group })
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        fail(path, format!("must be positive and finite, got {v}"))
    }
}

fn orders(o: [usize; 3]) -> Orders {
    Orders::new(o[0], o[1], o[2])
}

impl Experiment {
    pub fn spectral(&self) -> SpectralSettings {
        let c = &self.config;
        SpectralSettings {
            band: c.band,
            p_max: c.radial.p_max,
            radial_nodes: c.radial.nodes,
            tail_tol: c.radial.tail_tol,
            transform_orders: orders(c.quadrature.transform),
            domain_orders: orders(c.quadrature.domain),
        }
    }

    pub fn orders(&self, o: [usize; 3]) -> Orders {
        orders(o)
    }

    /// The config with a preset crystal written out as its lattice basis
    /// and point-group order; parses back to an equivalent config.
    pub fn expanded(&self) -> ExperimentConfig {
        let [a1, a2] = self.group.lattice_basis();
        ExperimentConfig {
            crystal: CrystalSpec::Explicit {
                a1,
                a2,
                order: self.group.point_order(),
            },
            ..self.config.clone()
        }
    }
}
