//! Compactly supported test functions on SE(2).
//!
//! Each family is a spatial window times a trigonometric polynomial in θ,
//! cut off at a fixed multiple of the window width so the support is a
//! declared disk.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::Disk;

/// A shareable pure function on the group.
pub type GroupFn = Arc<dyn Fn(&GroupElement) -> Complex64 + Send + Sync>;

/// One term `(re + i im) e^{inθ}` of the angular factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub n: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Harmonic {
    pub fn new(n: i64, re: f64, im: f64) -> Self {
        Self { n, re, im }
    }

    pub fn coefficient(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn default_cutoff() -> f64 {
    6.0
}

fn constant_harmonic() -> Vec<Harmonic> {
    vec![Harmonic::new(0, 1.0, 0.0)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `exp(−|x − c|²/2σ²) Σ c_n e^{inθ}` for `|x − c| ≤ cutoff·σ`, else 0.
    GaussianBump {
        center: [f64; 2],
        sigma: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        #[serde(default = "constant_harmonic")]
        harmonics: Vec<Harmonic>,
    },
    /// A Gaussian window times the plane wave `e^{i⟨wave, x − c⟩}`, times
    /// the angular factor; complex valued whenever `wave ≠ 0`.
    TrigWindowed {
        center: [f64; 2],
        sigma: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        wave: [f64; 2],
        #[serde(default = "constant_harmonic")]
        harmonics: Vec<Harmonic>,
    },
    Zero,
}

impl TestFunction {
    pub fn gaussian(center: [f64; 2], sigma: f64, harmonics: Vec<Harmonic>) -> Self {
        TestFunction::GaussianBump {
            center,
            sigma,
            cutoff: default_cutoff(),
            harmonics,
        }
    }

    pub fn windowed(center: [f64; 2], sigma: f64, wave: [f64; 2], harmonics: Vec<Harmonic>) -> Self {
        TestFunction::TrigWindowed {
            center,
            sigma,
            cutoff: default_cutoff(),
            wave,
            harmonics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (center, sigma, cutoff, harmonics) = match self {
            TestFunction::Zero => return Ok(()),
            TestFunction::GaussianBump {
                center,
                sigma,
                cutoff,
                harmonics,
            }
            | TestFunction::TrigWindowed {
                center,
                sigma,
                cutoff,
                harmonics,
                ..
            } => (center, sigma, cutoff, harmonics),
        };
        if !(*sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::UnboundedSupport(format!("sigma must be positive, got {sigma}")));
        }
        if !(*cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::UnboundedSupport(format!(
                "cutoff must be positive and finite, got {cutoff}"
            )));
        }
        if !center.iter().all(|v| v.is_finite())
            || !harmonics.iter().all(|h| h.re.is_finite() && h.im.is_finite())
        {
            return Err(Error::UnboundedSupport("non-finite parameters".into()));
        }
        if let TestFunction::TrigWindowed { wave, .. } = self {
            if !wave.iter().all(|v| v.is_finite()) {
                return Err(Error::UnboundedSupport("non-finite wave vector".into()));
            }
        }
        Ok(())
    }

    /// Declared support. The zero function gets the unit disk at the origin.
    pub fn support(&self) -> Disk {
        match self {
            TestFunction::Zero => Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            TestFunction::GaussianBump {
                center,
                sigma,
                cutoff,
                ..
            }
            | TestFunction::TrigWindowed {
                center,
                sigma,
                cutoff,
                ..
            } => Disk {
                center: *center,
                radius: sigma * cutoff,
            },
        }
    }

    /// Largest `|n|` among the angular harmonics.
    pub fn angular_degree(&self) -> usize {
        match self {
            TestFunction::Zero => 0,
            TestFunction::GaussianBump { harmonics, .. }
            | TestFunction::TrigWindowed { harmonics, .. } => harmonics
                .iter()
                .map(|h| h.n.unsigned_abs() as usize)
                .max()
                .unwrap_or(0),
        }
    }

    /// Whether the function takes only real values.
    pub fn is_real(&self) -> bool {
        match self {
            TestFunction::Zero => true,
            TestFunction::GaussianBump { harmonics, .. } => is_real_trig(harmonics),
            TestFunction::TrigWindowed { wave, harmonics, .. } => {
                *wave == [0.0, 0.0] && is_real_trig(harmonics)
            }
        }
    }

    /// `α f` for real `α`.
    pub fn scaled(&self, alpha: f64) -> TestFunction {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Zero => {}
            TestFunction::GaussianBump { harmonics, .. }
            | TestFunction::TrigWindowed { harmonics, .. } => {
                for h in harmonics.iter_mut() {
                    h.re *= alpha;
                    h.im *= alpha;
                }
            }
        }
        out
    }

    /// Angular terms; empty for the zero function.
    pub fn harmonics(&self) -> &[Harmonic] {
        match self {
            TestFunction::Zero => &[],
            TestFunction::GaussianBump { harmonics, .. }
            | TestFunction::TrigWindowed { harmonics, .. } => harmonics,
        }
    }

    /// The spatial factor: `f(x, θ) = spatial(x) Σ c_n e^{inθ}`.
    pub fn spatial(&self, x: [f64; 2]) -> Complex64 {
        match self {
            TestFunction::Zero => Complex64::new(0.0, 0.0),
            TestFunction::GaussianBump {
                center,
                sigma,
                cutoff,
                ..
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r2 = d[0] * d[0] + d[1] * d[1];
                if r2 > (sigma * cutoff).powi(2) {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
            }
            TestFunction::TrigWindowed {
                center,
                sigma,
                cutoff,
                wave,
                ..
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r2 = d[0] * d[0] + d[1] * d[1];
                if r2 > (sigma * cutoff).powi(2) {
                    return Complex64::new(0.0, 0.0);
                }
                let window = (-r2 / (2.0 * sigma * sigma)).exp();
                Complex64::from_polar(window, wave[0] * d[0] + wave[1] * d[1])
            }
        }
    }

    pub fn eval(&self, g: &GroupElement) -> Complex64 {
        let s = self.spatial(g.translation_part());
        if s == Complex64::new(0.0, 0.0) {
            return s;
        }
        s * angular(self.harmonics(), g.theta())
    }

    pub fn to_fn(&self) -> GroupFn {
        let f = self.clone();
        Arc::new(move |g: &GroupElement| f.eval(g))
    }

    /// `∫ f dg` in closed form, ignoring the cutoff (exact up to the
    /// Gaussian mass outside `cutoff·σ`).
    pub fn untruncated_integral(&self) -> Complex64 {
        match self {
            TestFunction::Zero => Complex64::new(0.0, 0.0),
            TestFunction::GaussianBump {
                sigma, harmonics, ..
            } => {
                // ∫ e^{−r²/2σ²} dx = 2πσ²; the θ-average keeps the n = 0 term
                constant_term(harmonics) * (2.0 * PI * sigma * sigma) / (2.0 * PI)
            }
            TestFunction::TrigWindowed {
                sigma,
                wave,
                harmonics,
                ..
            } => {
                let k2 = wave[0] * wave[0] + wave[1] * wave[1];
                constant_term(harmonics) * (2.0 * PI * sigma * sigma) * (-k2 * sigma * sigma / 2.0).exp()
                    / (2.0 * PI)
            }
        }
    }
}

fn angular(harmonics: &[Harmonic], theta: f64) -> Complex64 {
    harmonics
        .iter()
        .map(|h| h.coefficient() * Complex64::from_polar(1.0, h.n as f64 * theta))
        .sum()
}

fn constant_term(harmonics: &[Harmonic]) -> Complex64 {
    harmonics
        .iter()
        .filter(|h| h.n == 0)
        .map(|h| h.coefficient())
        .sum()
}

fn is_real_trig(harmonics: &[Harmonic]) -> bool {
    // real iff c_{−n} = conj(c_n) for the summed coefficients
    let mut by_n = std::collections::BTreeMap::<i64, Complex64>::new();
    for h in harmonics {
        *by_n.entry(h.n).or_default() += h.coefficient();
    }
    by_n.iter().all(|(&n, &c)| {
        let partner = by_n.get(&-n).copied().unwrap_or_default();
        (c - partner.conj()).norm() <= 1e-15 * (1.0 + c.norm())
    })
}
