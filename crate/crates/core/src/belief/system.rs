use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::geometry::{check_psd, Polytope};

/// Axis-aligned box `lo <= v <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    pub fn clamp(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(x, (lo, hi))| x.clamp(*lo, *hi)),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(lo, hi)| if hi > lo { rng.random_range(*lo..*hi) } else { *lo }),
        )
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Restriction to a subset of coordinates.
    pub fn select(&self, idx: &[usize]) -> BoxBounds {
        BoxBounds {
            lo: idx.iter().map(|&i| self.lo[i]).collect(),
            hi: idx.iter().map(|&i| self.hi[i]).collect(),
        }
    }
}

/// Measurement noise in a zone. `Unavailable` means no measurement is taken
/// there, the `R → ∞` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasurementNoise {
    Cov(DMatrix<f64>),
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementZone {
    pub region: Polytope,
    pub noise: MeasurementNoise,
}

/// Discrete-time linear system with Gaussian process noise, piecewise-constant
/// measurement noise over polytopic zones, and a tracking gain `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    /// Checked in order; the first zone containing the query point wins.
    pub zones: Vec<MeasurementZone>,
    pub default_noise: MeasurementNoise,
    pub gain: DMatrix<f64>,
    pub input_bounds: BoxBounds,
    pub state_bounds: BoxBounds,
    pub dt: f64,
    /// State indices that measurement zones (and regions) are defined over.
    pub workspace: Vec<usize>,
}

impl LinearGaussianSystem {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn meas_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn closed_loop(&self) -> DMatrix<f64> {
        &self.a - &self.b * &self.gain
    }

    pub fn project(&self, x: &DVector<f64>) -> Vec<f64> {
        self.workspace.iter().map(|&i| x[i]).collect()
    }

    /// Noise model at state `x`.
    pub fn noise_at(&self, x: &DVector<f64>) -> &MeasurementNoise {
        let p = self.project(x);
        self.zones
            .iter()
            .find(|z| z.region.contains(&p))
            .map(|z| &z.noise)
            .unwrap_or(&self.default_noise)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.closed_loop()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Dimension, noise, and stability checks.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let (n, m, p) = (self.state_dim(), self.input_dim(), self.meas_dim());
        let dim = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(DynamicsError::Dimension(what.to_string()))
            }
        };
        dim("A must be square", self.a.is_square())?;
        dim("B rows must match A", self.b.nrows() == n)?;
        dim("C columns must match A", self.c.ncols() == n)?;
        dim("D must be p×m", self.d.nrows() == p && self.d.ncols() == m)?;
        dim("Q must be n×n", self.process_noise.shape() == (n, n))?;
        dim("K must be m×n", self.gain.shape() == (m, n))?;
        dim("input bounds must have m entries", self.input_bounds.dim() == m)?;
        dim("state bounds must have n entries", self.state_bounds.dim() == n)?;
        dim(
            "workspace indices must address the state",
            !self.workspace.is_empty() && self.workspace.iter().all(|&i| i < n),
        )?;
        check_psd(&self.process_noise).map_err(|e| DynamicsError::Noise(format!("Q: {e}")))?;
        let noises = self
            .zones
            .iter()
            .map(|z| &z.noise)
            .chain(std::iter::once(&self.default_noise));
        for noise in noises {
            if let MeasurementNoise::Cov(r) = noise {
                dim("R must be p×p", r.shape() == (p, p))?;
                check_psd(r).map_err(|e| DynamicsError::Noise(format!("R: {e}")))?;
            }
        }
        for z in &self.zones {
            dim(
                "measurement zone dimension must match the workspace",
                z.region.dim() == self.workspace.len(),
            )?;
        }
        if !(self.dt > 0.0) {
            return Err(DynamicsError::Dimension("dt must be positive".into()));
        }
        let radius = self.spectral_radius();
        if !(radius < 1.0) {
            return Err(DynamicsError::UnstableGain { radius });
        }
        Ok(())
    }

    /// Upper bound on how far the workspace projection can move in one step,
    /// over the state and input boxes.
    pub fn max_step_displacement(&self) -> f64 {
        let n = self.state_dim();
        let a_minus_i = &self.a - DMatrix::identity(n, n);
        let mag = |lo: f64, hi: f64| lo.abs().max(hi.abs());
        self.workspace
            .iter()
            .map(|&r| {
                let from_state: f64 = (0..n)
                    .map(|j| {
                        let c = a_minus_i[(r, j)];
                        if c == 0.0 {
                            0.0
                        } else {
                            c.abs() * mag(self.state_bounds.lo[j], self.state_bounds.hi[j])
                        }
                    })
                    .sum();
                let from_input: f64 = (0..self.input_dim())
                    .map(|j| {
                        let c = self.b[(r, j)];
                        if c == 0.0 {
                            0.0
                        } else {
                            c.abs() * mag(self.input_bounds.lo[j], self.input_bounds.hi[j])
                        }
                    })
                    .sum();
                (from_state + from_input).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Gaussian belief `N(mean, Σ⁺ + Λ⁺)` split into estimation error and
/// estimate uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub mean: DVector<f64>,
    pub est_cov: DMatrix<f64>,
    pub mean_cov: DMatrix<f64>,
}

impl Belief {
    /// Initial belief: the estimate equals the mean, so `Λ⁺ = 0`.
    pub fn initial(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            est_cov: cov,
            mean_cov: DMatrix::zeros(n, n),
        }
    }

    pub fn total_cov(&self) -> DMatrix<f64> {
        &self.est_cov + &self.mean_cov
    }
}

/// Nominal controls and the states they produce under noise-free dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalPlan {
    pub controls: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
}

impl NominalPlan {
    pub fn from_controls(
        sys: &LinearGaussianSystem,
        start: DVector<f64>,
        controls: Vec<DVector<f64>>,
    ) -> Self {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(start);
        for u in &controls {
            let x = states.last().unwrap();
            states.push(&sys.a * x + &sys.b * u);
        }
        Self { controls, states }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Largest deviation of the stored states from the nominal dynamics.
    pub fn residual(&self, sys: &LinearGaussianSystem) -> f64 {
        self.controls
            .iter()
            .enumerate()
            .map(|(k, u)| (&sys.a * &self.states[k] + &sys.b * u - &self.states[k + 1]).amax())
            .fold(0.0, f64::max)
    }
}
