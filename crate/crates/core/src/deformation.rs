//! Random domain mappings on the reference unit square.
//!
//! A realization of the random domain is described by a map `F(x, y)` from the
//! reference square `U = (0,1)^2` onto the deformed domain, parameterized by a
//! stochastic point `y` in `[-1, 1]^N`. After pulling the PDE back to `U`, the
//! deformation only enters through the Jacobian `∂F`, its determinant and the
//! matrix coefficient `G = (a∘F) det(∂F) ∂F⁻¹ ∂F⁻ᵀ`.
//!
//! Two variants are supported:
//!
//! * [`Variant::Generic`]: `F(x, y) = x + Σ_l a_l b_l(x) y_l v(x)` with scalar
//!   mode profiles `b_l` and a direction field `v`.
//! * [`Variant::UpperHalfStretch`]: the upper half `x₂ > 0.5` is stretched
//!   vertically by `1 + c·e(y, x₁)` with `e(y, x₁) = Σ_l a_l φ_l(x₁) y_l`; the
//!   lower half is left untouched.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the reference square.
pub type Point = [f64; 2];

/// Smallest admissible Jacobian determinant.
pub const DET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformationError {
    #[error("stochastic point has {got} components, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stochastic coordinate y[{index}] = {value} lies outside [-1, 1]")]
    CoordinateOutOfRange { index: usize, value: f64 },
    #[error("mode index {index} out of range 1..={count}")]
    ModeIndex { index: usize, count: usize },
    #[error("truncation level {requested} out of range 1..={count}")]
    Truncation { requested: usize, count: usize },
    #[error("singular Jacobian (det = {det:e}) at x = ({}, {})", x[0], x[1])]
    SingularJacobian { det: f64, x: Point },
    #[error("inadmissible deformation: delta_tilde = {delta_tilde} <= 0")]
    Inadmissible { delta_tilde: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, DeformationError>;

/// A scalar mode profile with an analytic gradient.
pub trait Profile: Send + Sync + fmt::Debug {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> [f64; 2];
}

/// A vector direction field with an analytic Jacobian.
pub trait DirectionField: Send + Sync + fmt::Debug {
    fn value(&self, x: Point) -> [f64; 2];
    fn jacobian(&self, x: Point) -> Matrix2<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile(pub f64);

impl Profile for ConstantProfile {
    fn value(&self, _x: Point) -> f64 {
        self.0
    }
    fn gradient(&self, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// `offset + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineProfile {
    pub offset: f64,
    pub slope: [f64; 2],
}

impl Profile for AffineProfile {
    fn value(&self, x: Point) -> f64 {
        self.offset + self.slope[0] * x[0] + self.slope[1] * x[1]
    }
    fn gradient(&self, _x: Point) -> [f64; 2] {
        self.slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// `scale · trig(frequency · π · x₁ / period)`, constant in `x₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigProfile {
    pub scale: f64,
    pub frequency: f64,
    pub period: f64,
    pub kind: Trig,
}

impl Profile for TrigProfile {
    fn value(&self, x: Point) -> f64 {
        let arg = self.frequency * PI * x[0] / self.period;
        match self.kind {
            Trig::Sin => self.scale * arg.sin(),
            Trig::Cos => self.scale * arg.cos(),
        }
    }
    fn gradient(&self, x: Point) -> [f64; 2] {
        let k = self.frequency * PI / self.period;
        let arg = k * x[0];
        let d = match self.kind {
            Trig::Sin => self.scale * k * arg.cos(),
            Trig::Cos => -self.scale * k * arg.sin(),
        };
        [d, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDirection(pub [f64; 2]);

impl DirectionField for ConstantDirection {
    fn value(&self, _x: Point) -> [f64; 2] {
        self.0
    }
    fn jacobian(&self, _x: Point) -> Matrix2<f64> {
        Matrix2::zeros()
    }
}

/// One term of the deformation expansion.
#[derive(Debug, Clone)]
pub struct DeformationMode {
    /// 1-based mode number.
    pub index: usize,
    /// Mode amplitude (`√λ_l`, with any rescaling of the random variable
    /// absorbed).
    pub amplitude: f64,
    pub profile: Arc<dyn Profile>,
    /// Sampled `sup |b_l|`.
    pub profile_sup: f64,
    /// Sampled `sup ‖B_l(x)‖₂`.
    pub mode_matrix_sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Generic,
    UpperHalfStretch,
}

/// A validated point of `[-1, 1]^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPoint(Vec<f64>);

impl StochasticPoint {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        for (index, &value) in y.iter().enumerate() {
            if !(-1.0..=1.0).contains(&value) {
                return Err(DeformationError::CoordinateOutOfRange { index, value });
            }
        }
        Ok(Self(y))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Pads with zeros up to length `n` (no-op if already long enough).
    pub fn padded(&self, n: usize) -> Self {
        let mut y = self.0.clone();
        if y.len() < n {
            y.resize(n, 0.0);
        }
        Self(y)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lattice used to estimate the `sup` norms of the mode fields: the vertices
/// of an `n × n` structured triangulation plus its triangle barycenters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupSampling {
    pub vertices_per_side: usize,
}

impl Default for SupSampling {
    fn default() -> Self {
        Self {
            vertices_per_side: 129,
        }
    }
}

impl SupSampling {
    fn points(&self) -> Vec<Point> {
        let n = self.vertices_per_side.max(2);
        let h = 1.0 / (n - 1) as f64;
        let mut pts = Vec::with_capacity(n * n + 2 * (n - 1) * (n - 1));
        for j in 0..n {
            for i in 0..n {
                pts.push([i as f64 * h, j as f64 * h]);
            }
        }
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let (x0, y0) = (i as f64 * h, j as f64 * h);
                pts.push([x0 + 2.0 * h / 3.0, y0 + h / 3.0]);
                pts.push([x0 + h / 3.0, y0 + 2.0 * h / 3.0]);
            }
        }
        pts
    }
}

/// Parameters of the vertical-stretch experiment model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentModelParams {
    /// Total stochastic dimension `N`.
    pub n_modes: usize,
    /// Correlation length `L`.
    pub correlation_length: f64,
    /// Period `L_p` of the trigonometric profiles.
    pub period: f64,
    /// Stretch scaling `c`.
    pub scaling: f64,
    /// Amplitudes decay as `n^{-decay_exponent}` for `n ≥ 2`.
    pub decay_exponent: f64,
    /// Half width `h` of the uniform law `U(-h, h)` of the random variables;
    /// absorbed into the amplitudes so that the model sees `y ∈ [-1, 1]`.
    pub variable_half_width: f64,
    pub leading_mode: LeadingMode,
}

/// Coefficient of the constant first mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadingMode {
    /// `(√π L / 2)^{1/2}`, the usual first eigenvalue of the Gaussian
    /// covariance expansion. Reproduces the reported experiment moments.
    #[default]
    Sqrt,
    /// `√π L / 2`.
    Linear,
}

impl LeadingMode {
    /// Amplitude given `√π L`.
    pub fn amplitude(self, sqrt_pi_l: f64) -> f64 {
        match self {
            LeadingMode::Sqrt => (sqrt_pi_l / 2.0).sqrt(),
            LeadingMode::Linear => sqrt_pi_l / 2.0,
        }
    }
}

impl Default for ExperimentModelParams {
    fn default() -> Self {
        Self {
            n_modes: 15,
            correlation_length: 19.0 / 50.0,
            period: 1.0,
            scaling: 1.0 / 2.175,
            decay_exponent: 1.0,
            variable_half_width: 3f64.sqrt(),
            leading_mode: LeadingMode::Sqrt,
        }
    }
}

/// The random domain mapping.
#[derive(Debug, Clone)]
pub struct DeformationModel {
    modes: Vec<DeformationMode>,
    direction: Arc<dyn DirectionField>,
    scaling: f64,
    variant: Variant,
    sampling: SupSampling,
    half_width: f64,
}

fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    let fro2 = m.iter().map(|v| v * v).sum::<f64>();
    let det = m.determinant();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

impl DeformationModel {
    /// `F(x, y) = x + Σ_l a_l b_l(x) y_l v(x)`.
    pub fn generic(
        modes: Vec<(f64, Arc<dyn Profile>)>,
        direction: Arc<dyn DirectionField>,
        sampling: SupSampling,
    ) -> Result<Self> {
        Self::build(modes, direction, 1.0, Variant::Generic, sampling)
    }

    /// Vertical stretch of the upper half by `1 + c·e(y, x₁)`; the profiles
    /// are the functions `φ_l(x₁)` of the expansion of `e`.
    pub fn upper_half_stretch(
        modes: Vec<(f64, Arc<dyn Profile>)>,
        scaling: f64,
        sampling: SupSampling,
    ) -> Result<Self> {
        Self::build(
            modes,
            Arc::new(ConstantDirection([0.0, 1.0])),
            scaling,
            Variant::UpperHalfStretch,
            sampling,
        )
    }

    /// The vertical-stretch model with a constant first mode and
    /// `n^{-1} sin/cos(⌊n/2⌋ π x₁ / L_p)` profiles for `n ≥ 2`.
    pub fn experiment(params: &ExperimentModelParams, sampling: SupSampling) -> Result<Self> {
        let p = params;
        if p.n_modes == 0 {
            return Err(DeformationError::InvalidParameter("n_modes must be >= 1".into()));
        }
        if !(p.correlation_length > 0.0 && p.period > 0.0 && p.variable_half_width > 0.0) {
            return Err(DeformationError::InvalidParameter(
                "correlation length, period and half width must be positive".into(),
            ));
        }
        let sqrt_pi_l = PI.sqrt() * p.correlation_length;
        let mut modes: Vec<(f64, Arc<dyn Profile>)> = Vec::with_capacity(p.n_modes);
        modes.push((
            p.variable_half_width * p.leading_mode.amplitude(sqrt_pi_l),
            Arc::new(ConstantProfile(1.0)),
        ));
        for n in 2..=p.n_modes {
            let nf = n as f64;
            let amplitude = p.variable_half_width * sqrt_pi_l.sqrt() / nf.powf(p.decay_exponent);
            let kind = if n % 2 == 0 { Trig::Sin } else { Trig::Cos };
            modes.push((
                amplitude,
                Arc::new(TrigProfile {
                    scale: 1.0 / nf,
                    frequency: (n / 2) as f64,
                    period: p.period,
                    kind,
                }),
            ));
        }
        Ok(Self::upper_half_stretch(modes, p.scaling, sampling)?.with_variable_half_width(p.variable_half_width))
    }

    fn build(
        modes: Vec<(f64, Arc<dyn Profile>)>,
        direction: Arc<dyn DirectionField>,
        scaling: f64,
        variant: Variant,
        sampling: SupSampling,
    ) -> Result<Self> {
        if !(scaling >= 0.0 && scaling.is_finite()) {
            return Err(DeformationError::InvalidParameter(format!(
                "scaling must be finite and >= 0, got {scaling}"
            )));
        }
        let mut model = Self {
            modes: Vec::with_capacity(modes.len()),
            direction,
            scaling,
            variant,
            sampling,
            half_width: 1.0,
        };
        for (k, (amplitude, profile)) in modes.into_iter().enumerate() {
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(DeformationError::InvalidParameter(format!(
                    "mode {} amplitude must be finite and >= 0, got {amplitude}",
                    k + 1
                )));
            }
            model.modes.push(DeformationMode {
                index: k + 1,
                amplitude,
                profile,
                profile_sup: 0.0,
                mode_matrix_sup: 0.0,
            });
        }
        let points = sampling.points();
        for k in 0..model.modes.len() {
            let mut profile_sup = 0.0f64;
            let mut matrix_sup = 0.0f64;
            for &x in &points {
                profile_sup = profile_sup.max(model.modes[k].profile.value(x).abs());
                matrix_sup = matrix_sup.max(spectral_norm(&model.mode_matrix_unchecked(k, x)));
            }
            model.modes[k].profile_sup = profile_sup;
            model.modes[k].mode_matrix_sup = matrix_sup;
        }
        let weighted: Vec<f64> = model
            .modes
            .iter()
            .map(|m| m.amplitude * m.profile_sup)
            .collect();
        if let Some(w) = weighted.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(DeformationError::InvalidParameter(format!(
                "amplitude * sup|b_l| must be non-increasing; mode {} exceeds mode {}",
                w + 2,
                w + 1
            )));
        }
        Ok(model)
    }

    pub fn modes(&self) -> &[DeformationMode] {
        &self.modes
    }

    /// Total stochastic dimension `N`.
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn scaling(&self) -> f64 {
        self.scaling
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    fn check(&self, y: &StochasticPoint) -> Result<()> {
        if y.len() != self.modes.len() {
            return Err(DeformationError::DimensionMismatch {
                expected: self.modes.len(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `e(y, x) = Σ_l a_l b_l(x) y_l` and its gradient.
    fn expansion(&self, x: Point, y: &[f64]) -> (f64, [f64; 2]) {
        let mut e = 0.0;
        let mut de = [0.0, 0.0];
        for (mode, &yl) in self.modes.iter().zip(y) {
            let s = mode.amplitude * yl;
            let g = mode.profile.gradient(x);
            e += s * mode.profile.value(x);
            de[0] += s * g[0];
            de[1] += s * g[1];
        }
        (e, de)
    }

    pub fn map_point(&self, x: Point, y: &StochasticPoint) -> Result<Point> {
        self.check(y)?;
        let (e, _) = self.expansion(x, y.as_slice());
        Ok(match self.variant {
            Variant::Generic => {
                let v = self.direction.value(x);
                [x[0] + e * v[0], x[1] + e * v[1]]
            }
            Variant::UpperHalfStretch => {
                if x[1] > 0.5 {
                    [x[0], (x[1] - 0.5) * (1.0 + self.scaling * e) + 0.5]
                } else {
                    x
                }
            }
        })
    }

    fn jacobian_unchecked(&self, x: Point, y: &[f64]) -> Matrix2<f64> {
        let (e, de) = self.expansion(x, y);
        match self.variant {
            Variant::Generic => {
                let v = self.direction.value(x);
                let dv = self.direction.jacobian(x);
                Matrix2::new(
                    1.0 + e * dv[(0, 0)] + de[0] * v[0],
                    e * dv[(0, 1)] + de[1] * v[0],
                    e * dv[(1, 0)] + de[0] * v[1],
                    1.0 + e * dv[(1, 1)] + de[1] * v[1],
                )
            }
            Variant::UpperHalfStretch => {
                if x[1] > 0.5 {
                    Matrix2::new(
                        1.0,
                        0.0,
                        (x[1] - 0.5) * self.scaling * de[0],
                        1.0 + self.scaling * e,
                    )
                } else {
                    Matrix2::identity()
                }
            }
        }
    }

    /// `∂F(x, y)`; fails when the determinant is not safely positive.
    pub fn jacobian(&self, x: Point, y: &StochasticPoint) -> Result<Matrix2<f64>> {
        self.check(y)?;
        let j = self.jacobian_unchecked(x, y.as_slice());
        let det = j.determinant();
        if !(det > DET_TOLERANCE) {
            return Err(DeformationError::SingularJacobian { det, x });
        }
        Ok(j)
    }

    fn mode_matrix_unchecked(&self, k: usize, x: Point) -> Matrix2<f64> {
        let mode = &self.modes[k];
        let b = mode.profile.value(x);
        let g = mode.profile.gradient(x);
        match self.variant {
            Variant::Generic => {
                let v = self.direction.value(x);
                let dv = self.direction.jacobian(x);
                dv * b + Matrix2::new(g[0] * v[0], g[1] * v[0], g[0] * v[1], g[1] * v[1])
            }
            Variant::UpperHalfStretch => {
                if x[1] > 0.5 {
                    let c = self.scaling;
                    Matrix2::new(0.0, 0.0, c * (x[1] - 0.5) * g[0], c * b)
                } else {
                    Matrix2::zeros()
                }
            }
        }
    }

    /// `B_l(x)` for the 1-based mode number `l`.
    pub fn mode_matrix(&self, l: usize, x: Point) -> Result<Matrix2<f64>> {
        if l == 0 || l > self.modes.len() {
            return Err(DeformationError::ModeIndex {
                index: l,
                count: self.modes.len(),
            });
        }
        Ok(self.mode_matrix_unchecked(l - 1, x))
    }

    pub fn jacobian_det_weight(&self, x: Point, y: &StochasticPoint) -> Result<f64> {
        Ok(self.jacobian(x, y)?.determinant())
    }

    /// `G = (a∘F) det(∂F) ∂F⁻¹ ∂F⁻ᵀ`, symmetric by construction.
    pub fn diffusion_matrix<A>(&self, a: A, x: Point, y: &StochasticPoint) -> Result<Matrix2<f64>>
    where
        A: Fn(Point) -> f64,
    {
        let j = self.jacobian(x, y)?;
        let fx = self.map_point(x, y)?;
        Ok(coefficient_from_jacobian(&j, a(fx)))
    }

    /// Keeps modes `1..=n_s`.
    pub fn truncate(&self, n_s: usize) -> Result<Self> {
        if n_s == 0 || n_s > self.modes.len() {
            return Err(DeformationError::Truncation {
                requested: n_s,
                count: self.modes.len(),
            });
        }
        let mut m = self.clone();
        m.modes.truncate(n_s);
        Ok(m)
    }

    /// Records that the amplitudes absorb the half width `h` of the law
    /// `U(-h, h)` of the random variables, so that `√λ_l = a_l / h`.
    pub fn with_variable_half_width(mut self, h: f64) -> Self {
        self.half_width = h;
        self
    }

    pub fn variable_half_width(&self) -> f64 {
        self.half_width
    }

    /// `√λ_l` of every mode.
    pub fn sqrt_lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.amplitude / self.half_width).collect()
    }

    /// `Σ_l √λ_l sup‖B_l‖₂` over the retained modes.
    pub fn mode_sum(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude / self.half_width * m.mode_matrix_sup)
            .sum()
    }

    /// `Σ_l a_l sup‖B_l‖₂`: the largest perturbation `‖∂F - I‖` over
    /// `y ∈ [-1, 1]^N`.
    pub fn perturbation_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude * m.mode_matrix_sup).sum()
    }

    /// `1 - Σ_l √λ_l sup‖B_l‖₂`.
    pub fn delta_tilde(&self) -> f64 {
        1.0 - self.mode_sum()
    }

    /// Tail `B_T = Σ_{l > n_s} √λ_l sup‖B_l‖₂`.
    pub fn tail_bound(&self, n_s: usize) -> f64 {
        self.modes
            .iter()
            .skip(n_s)
            .map(|m| m.amplitude / self.half_width * m.mode_matrix_sup)
            .sum()
    }

    /// Analyticity-region diagnostics for spatial dimension `d`.
    pub fn region_diagnostics(
        &self,
        d: u32,
        a_min: f64,
        a_max: f64,
        alpha: f64,
    ) -> Result<RegionDiagnostics> {
        RegionDiagnostics::from_delta_tilde(self.delta_tilde(), d, a_min, a_max, alpha)
    }

    pub fn sampling(&self) -> SupSampling {
        self.sampling
    }
}

/// `a · det(J) · J⁻¹ J⁻ᵀ`, written so that the off-diagonal entries are
/// bitwise equal.
pub fn coefficient_from_jacobian(j: &Matrix2<f64>, a: f64) -> Matrix2<f64> {
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    // adj(J) rows
    let (p, q) = (j[(1, 1)], -j[(0, 1)]);
    let (r, s) = (-j[(1, 0)], j[(0, 0)]);
    let scale = a / det;
    let g00 = scale * (p * p + q * q);
    let g01 = scale * (p * r + q * s);
    let g11 = scale * (r * r + s * s);
    Matrix2::new(g00, g01, g01, g11)
}

/// `c = 1/tan(π/8)`.
pub fn sector_constant() -> f64 {
    1.0 / (PI / 8.0).tan()
}

/// Constants describing the complex neighbourhood on which the solution is
/// holomorphic, together with the resulting Chebyshev-ellipse rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionDiagnostics {
    pub d: u32,
    pub delta_tilde: f64,
    pub c: f64,
    pub gamma: f64,
    /// First candidate `δ̃ log(2-γ) / (d + log(2-γ))`.
    pub beta_sector: f64,
    /// Second candidate `√(1 + δ̃²/2) - 1`.
    pub beta_coercive: f64,
    pub beta_max: f64,
    pub tau: f64,
    pub sigma_hat: f64,
    pub alpha: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub b_tilde: f64,
    pub d_tilde: f64,
    pub c_tilde: f64,
    pub epsilon: f64,
}

/// `σ̂ = log(√(τ² + 1) + τ)`.
pub fn sigma_hat(tau: f64) -> f64 {
    ((tau * tau + 1.0).sqrt() + tau).ln()
}

impl RegionDiagnostics {
    pub fn from_delta_tilde(delta_tilde: f64, d: u32, a_min: f64, a_max: f64, alpha: f64) -> Result<Self> {
        if !(delta_tilde > 0.0) {
            return Err(DeformationError::Inadmissible { delta_tilde });
        }
        if delta_tilde >= 1.0 + 1e-15 {
            return Err(DeformationError::InvalidParameter(format!(
                "delta_tilde must be <= 1, got {delta_tilde}"
            )));
        }
        if d == 0 {
            return Err(DeformationError::InvalidParameter("d must be >= 1".into()));
        }
        if !(a_min > 0.0 && a_max >= a_min) {
            return Err(DeformationError::InvalidParameter(format!(
                "need 0 < a_min <= a_max, got a_min = {a_min}, a_max = {a_max}"
            )));
        }
        let dt = delta_tilde.min(1.0);
        let di = d as i32;
        let c = sector_constant();
        let far = c * (2.0 - dt).powi(di);
        let gamma = far / (dt.powi(di) + far);
        let lg = (2.0 - gamma).ln();
        let beta_sector = dt * lg / (d as f64 + lg);
        let beta_coercive = (1.0 + dt * dt / 2.0).sqrt() - 1.0;
        let beta = beta_sector.min(beta_coercive);
        let tau = if dt < 1.0 { beta / (1.0 - dt) } else { f64::INFINITY };
        let sigma_hat = sigma_hat(tau);

        let b_tilde = a_min
            * (c * c - 1.0)
            * dt
            * (dt - 2.0 * beta)
            * (dt.powi(di) * alpha - (2.0 - dt).powi(di) * (2.0 - alpha))
            / (((1.0 + c) * a_max + a_min).powi(2) * (2.0 - dt).powi(2 * di) * (2.0 - alpha).powi(2));
        let denom = a_min * c * dt.powi(di) * alpha;
        let d_tilde = (1.0 + c) / denom
            * ((2.0 - dt + beta).powi(2) + 2.0 * beta * (2.0 + (beta - dt)));
        let c_tilde = (1.0 + c) * (2.0 * beta - dt + 2.0).powi(2) / denom;
        let epsilon = 1.0 / ((1.0 + (c_tilde / b_tilde).powi(2)) * d_tilde);

        Ok(Self {
            d,
            delta_tilde: dt,
            c,
            gamma,
            beta_sector,
            beta_coercive,
            beta_max: beta,
            tau,
            sigma_hat,
            alpha,
            a_min,
            a_max,
            b_tilde,
            d_tilde,
            c_tilde,
            epsilon,
        })
    }
}
