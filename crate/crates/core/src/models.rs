//! Model catalog: the scalar triple `(g, h, b)` behind every matrix SDE
//! `dX = g(X) dB h(X) + h(X) dBᵀ g(X) + b(X) dt` and the eigenvalue particle
//! system it induces.
//!
//! Eigenvalue drift is
//!
//! ```text
//! β · ( b(λ_i) + κ · Σ_{k≠i} G(λ_i, λ_k) / (λ_i − λ_k) ),   G(x,y) = g²(x)h²(y) + g²(y)h²(x)
//! ```
//!
//! with `κ = 2` for Hermitian (complex) models and `κ = 1` otherwise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::ModelError;
use crate::expr::Expr;

/// Scalar coefficient function.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarFn {
    Const(f64),
    /// `√|x|`
    SqrtAbs,
    /// `√|1 − x|`
    SqrtAbsOneMinus,
    /// `intercept + slope·x`
    Affine { intercept: f64, slope: f64 },
    Custom(Expr),
}

impl ScalarFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Const(c) => *c,
            ScalarFn::SqrtAbs => x.abs().sqrt(),
            ScalarFn::SqrtAbsOneMinus => (1.0 - x).abs().sqrt(),
            ScalarFn::Affine { intercept, slope } => intercept + slope * x,
            ScalarFn::Custom(e) => e.eval(x),
        }
    }

    /// `f(x)²`, evaluated without the square root where one is involved.
    #[inline]
    pub fn squared(&self, x: f64) -> f64 {
        match self {
            ScalarFn::SqrtAbs => x.abs(),
            ScalarFn::SqrtAbsOneMinus => (1.0 - x).abs(),
            other => {
                let v = other.eval(x);
                v * v
            }
        }
    }

    /// Wraps a parsed expression; expressions without `x` become constants.
    pub fn from_expr(e: Expr) -> Self {
        if e.depends_on_x() {
            ScalarFn::Custom(e)
        } else {
            ScalarFn::Const(e.eval(0.0))
        }
    }

    /// `(intercept, slope)` when the function is affine (constants included).
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            ScalarFn::Const(c) => Some((*c, 0.0)),
            ScalarFn::Affine { intercept, slope } => Some((*intercept, *slope)),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Const(c) => write!(f, "{c}"),
            ScalarFn::SqrtAbs => write!(f, "sqrt(abs(x))"),
            ScalarFn::SqrtAbsOneMinus => write!(f, "sqrt(abs(1 - x))"),
            ScalarFn::Affine { intercept, slope } => write!(f, "{intercept} + {slope} * x"),
            ScalarFn::Custom(e) => write!(f, "{e}"),
        }
    }
}

/// Closed interval of admissible eigenvalues; bounds may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub const REAL: Domain = Domain { lower: f64::NEG_INFINITY, upper: f64::INFINITY };
    pub const NON_NEGATIVE: Domain = Domain { lower: 0.0, upper: f64::INFINITY };
    pub const UNIT: Domain = Domain { lower: 0.0, upper: 1.0 };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    /// Mirror image of `x` in the nearest violated bound.
    pub fn reflect(&self, x: f64) -> f64 {
        if x < self.lower {
            self.clamp(2.0 * self.lower - x)
        } else if x > self.upper {
            self.clamp(2.0 * self.upper - x)
        } else {
            x
        }
    }

    pub fn is_bounded_below(&self) -> bool {
        self.lower.is_finite()
    }
}

/// Declared hypotheses of the non-collision theorem. These are declarations
/// attached by the catalog, not checked symbolically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Regularity {
    pub b_lipschitz: bool,
    pub g2_lipschitz: bool,
    pub h2_lipschitz: bool,
    pub g2h2_convex_or_c11: bool,
    pub g_positive_off_diagonal: bool,
}

impl Regularity {
    pub const ALL: Regularity = Regularity {
        b_lipschitz: true,
        g2_lipschitz: true,
        h2_lipschitz: true,
        g2h2_convex_or_c11: true,
        g_positive_off_diagonal: true,
    };

    /// Whether the non-collision theorem's hypotheses are declared; for
    /// `p = 2` the condition on `g²h²` is not needed.
    pub fn non_collision_hypotheses(&self, p: usize) -> bool {
        self.b_lipschitz && self.g2_lipschitz && self.h2_lipschitz && (p <= 2 || self.g2h2_convex_or_c11)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelFamily {
    Dyson,
    Wishart,
    GeneralizedWishart,
    WishartOu,
    BesqParticles,
    Jacobi,
    BetaWishart,
    BetaJacobi,
    LaguerreComplex,
    Custom,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 10] = [
        ModelFamily::Dyson,
        ModelFamily::Wishart,
        ModelFamily::GeneralizedWishart,
        ModelFamily::WishartOu,
        ModelFamily::BesqParticles,
        ModelFamily::Jacobi,
        ModelFamily::BetaWishart,
        ModelFamily::BetaJacobi,
        ModelFamily::LaguerreComplex,
        ModelFamily::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Dyson => "dyson",
            ModelFamily::Wishart => "wishart",
            ModelFamily::GeneralizedWishart => "generalized-wishart",
            ModelFamily::WishartOu => "wishart-ou",
            ModelFamily::BesqParticles => "besq-particles",
            ModelFamily::Jacobi => "jacobi",
            ModelFamily::BetaWishart => "beta-wishart",
            ModelFamily::BetaJacobi => "beta-jacobi",
            ModelFamily::LaguerreComplex => "laguerre-complex",
            ModelFamily::Custom => "custom",
        }
    }

    /// Parameters that must be present. `beta` is accepted by every family.
    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            ModelFamily::Dyson | ModelFamily::Custom => &[],
            ModelFamily::Wishart | ModelFamily::GeneralizedWishart | ModelFamily::LaguerreComplex => &["alpha"],
            ModelFamily::WishartOu => &["alpha", "c"],
            ModelFamily::BesqParticles => &["nu", "N"],
            ModelFamily::Jacobi => &["q", "r"],
            ModelFamily::BetaWishart => &["alpha", "beta"],
            ModelFamily::BetaJacobi => &["q", "r", "beta"],
        }
    }

    pub fn allows_param(self, name: &str) -> bool {
        name == "beta" || self.required_params().contains(&name)
    }

    /// Whether the family's eigenvalue process lives on a bounded-below
    /// domain (so a positivity experiment makes sense).
    pub fn has_positivity_theory(self) -> bool {
        matches!(
            self,
            ModelFamily::BesqParticles
                | ModelFamily::Wishart
                | ModelFamily::GeneralizedWishart
                | ModelFamily::Jacobi
                | ModelFamily::BetaWishart
                | ModelFamily::BetaJacobi
        )
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// Expressions for the `custom` family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CustomCoefficients {
    pub g: String,
    pub h: String,
    pub b: String,
}

/// A named model family with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelId {
    pub family: ModelFamily,
    pub params: BTreeMap<String, f64>,
    /// Hermitian variant (doubles the interaction). Implied by
    /// `besq-particles` and `laguerre-complex`.
    pub complex: bool,
    pub custom: Option<CustomCoefficients>,
}

impl ModelId {
    pub fn new(family: ModelFamily, params: &[(&str, f64)]) -> Self {
        Self {
            family,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            complex: false,
            custom: None,
        }
    }

    pub fn dyson(beta: f64) -> Self {
        Self::new(ModelFamily::Dyson, &[("beta", beta)])
    }

    pub fn wishart(alpha: f64) -> Self {
        Self::new(ModelFamily::Wishart, &[("alpha", alpha)])
    }

    pub fn generalized_wishart(alpha: f64) -> Self {
        Self::new(ModelFamily::GeneralizedWishart, &[("alpha", alpha)])
    }

    pub fn wishart_ou(alpha: f64, c: f64) -> Self {
        Self::new(ModelFamily::WishartOu, &[("alpha", alpha), ("c", c)])
    }

    pub fn besq_particles(nu: f64, n: usize) -> Self {
        Self::new(ModelFamily::BesqParticles, &[("nu", nu), ("N", n as f64)])
    }

    pub fn jacobi(q: f64, r: f64) -> Self {
        Self::new(ModelFamily::Jacobi, &[("q", q), ("r", r)])
    }

    pub fn beta_wishart(alpha: f64, beta: f64) -> Self {
        Self::new(ModelFamily::BetaWishart, &[("alpha", alpha), ("beta", beta)])
    }

    pub fn beta_jacobi(q: f64, r: f64, beta: f64) -> Self {
        Self::new(ModelFamily::BetaJacobi, &[("q", q), ("r", r), ("beta", beta)])
    }

    pub fn laguerre_complex(alpha: f64) -> Self {
        Self::new(ModelFamily::LaguerreComplex, &[("alpha", alpha)])
    }

    pub fn custom(g: &str, h: &str, b: &str) -> Self {
        Self {
            family: ModelFamily::Custom,
            params: BTreeMap::new(),
            complex: false,
            custom: Some(CustomCoefficients { g: g.into(), h: h.into(), b: b.into() }),
        }
    }

    pub fn with_complex(mut self, complex: bool) -> Self {
        self.complex = complex;
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    fn required(&self, name: &str) -> Result<f64, ModelError> {
        let v = self.param(name).ok_or_else(|| ModelError::InvalidParameter {
            name: name.into(),
            reason: format!("required by model `{}`", self.family),
        })?;
        if !v.is_finite() {
            return Err(ModelError::InvalidParameter { name: name.into(), reason: "must be finite".into() });
        }
        Ok(v)
    }

    /// Checks the parameter set against the family.
    pub fn validate(&self) -> Result<(), ModelError> {
        for name in self.params.keys() {
            if !self.family.allows_param(name) {
                return Err(ModelError::InvalidParameter {
                    name: name.clone(),
                    reason: format!("not a parameter of model `{}`", self.family),
                });
            }
        }
        for name in self.family.required_params() {
            self.required(name)?;
        }
        if let Some(beta) = self.param("beta") {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(ModelError::InvalidParameter { name: "beta".into(), reason: "must be > 0".into() });
            }
        }
        match (self.family, &self.custom) {
            (ModelFamily::Custom, None) => Err(ModelError::InvalidParameter {
                name: "g".into(),
                reason: "custom model needs g, h and b expressions".into(),
            }),
            (ModelFamily::Custom, Some(_)) => Ok(()),
            (_, Some(_)) => Err(ModelError::InvalidParameter {
                name: "g".into(),
                reason: "coefficient expressions are only accepted by the custom model".into(),
            }),
            (_, None) => Ok(()),
        }
    }
}

/// A model: the coefficient triple plus β-deformation and metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoefficients {
    pub name: String,
    pub g: ScalarFn,
    pub h: ScalarFn,
    pub b: ScalarFn,
    pub beta: f64,
    pub complex_mode: bool,
    pub domain: Domain,
    pub regularity: Regularity,
    /// The positivity / confinement theorem covers these parameters, so
    /// schemes may truncate at the domain boundary.
    pub boundary_preserving: bool,
    /// Parameters outside the ranges covered by theory.
    pub warnings: Vec<String>,
}

impl SpectralCoefficients {
    /// Builds a model directly from its triple, with `β = 1` on all of ℝ and
    /// no regularity declared.
    pub fn from_functions(name: &str, g: ScalarFn, h: ScalarFn, b: ScalarFn) -> Self {
        Self {
            name: name.to_string(),
            g,
            h,
            b,
            beta: 1.0,
            complex_mode: false,
            domain: Domain::REAL,
            regularity: Regularity::default(),
            boundary_preserving: false,
            warnings: Vec::new(),
        }
    }

    /// Interaction multiplier κ: 2 in Hermitian mode, 1 otherwise.
    #[inline]
    pub fn interaction_factor(&self) -> f64 {
        if self.complex_mode {
            2.0
        } else {
            1.0
        }
    }

    /// β of the equivalent real system: `κ·β` (a Hermitian system is the
    /// β = 2 version of the real one with `b/2`).
    pub fn effective_beta(&self) -> f64 {
        self.interaction_factor() * self.beta
    }

    /// Eigenvalue diffusion coefficient `2 g(λ) h(λ)`.
    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        2.0 * self.g.eval(x) * self.h.eval(x)
    }

    /// `g²(x) h²(x)`.
    #[inline]
    pub fn g2h2(&self, x: f64) -> f64 {
        self.g.squared(x) * self.h.squared(x)
    }
}

/// Interaction kernel `G(x, y) = g²(x)h²(y) + g²(y)h²(x)`.
#[inline]
pub fn kernel_g(coeff: &SpectralCoefficients, x: f64, y: f64) -> f64 {
    coeff.g.squared(x) * coeff.h.squared(y) + coeff.g.squared(y) * coeff.h.squared(x)
}

/// Index of the first non-increasing consecutive pair, if any.
pub fn check_strictly_ascending(lambda: &[f64]) -> Result<(), ModelError> {
    match lambda.windows(2).position(|w| !(w[1] > w[0])) {
        Some(index) => Err(ModelError::NotStrictlyAscending { index }),
        None => Ok(()),
    }
}

/// `S_i = Σ_{k≠i} G(λ_i, λ_k) / (λ_i − λ_k)` for strictly ascending `λ`.
pub fn interaction_sums(coeff: &SpectralCoefficients, lambda: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_strictly_ascending(lambda)?;
    let p = lambda.len();
    let mut sums = vec![0.0; p];
    for i in 0..p {
        for k in i + 1..p {
            let term = kernel_g(coeff, lambda[i], lambda[k]) / (lambda[i] - lambda[k]);
            sums[i] += term;
            sums[k] -= term;
        }
    }
    Ok(sums)
}

/// Eigenvalue drift `β(b(λ_i) + κ S_i)`.
pub fn eigen_drift(coeff: &SpectralCoefficients, lambda: &[f64]) -> Result<Vec<f64>, ModelError> {
    let sums = interaction_sums(coeff, lambda)?;
    let kappa = coeff.interaction_factor();
    Ok(lambda.iter().zip(&sums).map(|(&l, &s)| coeff.beta * (coeff.b.eval(l) + kappa * s)).collect())
}

/// Largest finite-difference slope of `f` on a uniform grid over `[lo, hi]`.
/// Diagnostic only.
pub fn lipschitz_probe(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    if !(hi > lo) || points < 2 {
        return 0.0;
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut prev = f(lo);
    let mut k = 0.0f64;
    for i in 1..points {
        let x = lo + step * i as f64;
        let v = f(x);
        k = k.max((v - prev).abs() / step);
        prev = v;
    }
    k
}

/// Builds the coefficients of a catalog model in dimension `p`.
///
/// Parameters outside the ranges covered by theory are accepted and recorded
/// in [`SpectralCoefficients::warnings`].
pub fn catalog(id: &ModelId, p: usize) -> Result<SpectralCoefficients, ModelError> {
    id.validate()?;
    if p == 0 {
        return Err(ModelError::InvalidParameter { name: "p".into(), reason: "must be at least 1".into() });
    }
    let beta = id.param("beta").unwrap_or(1.0);
    let pm1 = (p - 1) as f64;
    let mut warnings = Vec::new();

    let mut coeff = SpectralCoefficients {
        name: id.family.name().to_string(),
        g: ScalarFn::SqrtAbs,
        h: ScalarFn::Const(1.0),
        b: ScalarFn::Const(0.0),
        beta,
        complex_mode: id.complex,
        domain: Domain::NON_NEGATIVE,
        regularity: Regularity::ALL,
        boundary_preserving: false,
        warnings: Vec::new(),
    };

    match id.family {
        ModelFamily::Dyson => {
            coeff.g = ScalarFn::Const(0.5);
            coeff.domain = Domain::REAL;
        }
        ModelFamily::Wishart | ModelFamily::BetaWishart | ModelFamily::LaguerreComplex => {
            let alpha = id.required("alpha")?;
            coeff.b = ScalarFn::Const(alpha);
            if id.family == ModelFamily::LaguerreComplex {
                coeff.complex_mode = true;
            }
        }
        ModelFamily::GeneralizedWishart => {
            coeff.b = ScalarFn::Const(id.required("alpha")?);
            coeff.domain = Domain::REAL;
        }
        ModelFamily::WishartOu => {
            let alpha = id.required("alpha")?;
            let c = id.required("c")?;
            coeff.b = ScalarFn::Affine { intercept: alpha, slope: c };
            if c <= 0.0 {
                warnings.push(format!("c = {c} is not positive"));
            }
        }
        ModelFamily::BesqParticles => {
            let nu = id.required("nu")?;
            let n = id.required("N")?;
            if n.fract() != 0.0 || n as usize != p {
                return Err(ModelError::InvalidParameter {
                    name: "N".into(),
                    reason: format!("particle count {n} must equal the dimension p = {p}"),
                });
            }
            coeff.b = ScalarFn::Const(2.0 * (nu + n));
            coeff.complex_mode = true;
        }
        ModelFamily::Jacobi | ModelFamily::BetaJacobi => {
            let q = id.required("q")?;
            let r = id.required("r")?;
            coeff.h = ScalarFn::SqrtAbsOneMinus;
            coeff.b = ScalarFn::Affine { intercept: q, slope: -(q + r) };
            coeff.domain = Domain::UNIT;
        }
        ModelFamily::Custom => {
            let exprs = id.custom.as_ref().expect("validated");
            coeff.g = ScalarFn::from_expr(Expr::parse(&exprs.g)?);
            coeff.h = ScalarFn::from_expr(Expr::parse(&exprs.h)?);
            coeff.b = ScalarFn::from_expr(Expr::parse(&exprs.b)?);
            coeff.domain = Domain::REAL;
            coeff.regularity = Regularity::default();
        }
    }

    // Inward-pointing drift at the boundary: at λ₁ = 0 the interaction sum
    // is −(p−1) for every family with g²(0) = 0, and at λ_p = 1 it is +(p−1)
    // for the Jacobi kernel.
    let kappa = coeff.interaction_factor();
    coeff.boundary_preserving = match id.family {
        ModelFamily::Wishart | ModelFamily::BetaWishart | ModelFamily::LaguerreComplex | ModelFamily::WishartOu => {
            let alpha = id.required("alpha")?;
            let ok = alpha >= kappa * pm1;
            if !ok {
                warnings.push(format!("alpha = {alpha} < {}: non-negativity is not guaranteed", kappa * pm1));
            }
            ok
        }
        ModelFamily::BesqParticles => {
            let nu = id.required("nu")?;
            let ok = nu >= -1.0;
            if !ok {
                warnings.push(format!("nu = {nu} < -1: non-negativity is not guaranteed"));
            }
            ok
        }
        ModelFamily::Jacobi | ModelFamily::BetaJacobi => {
            let qr = id.required("q")?.min(id.required("r")?);
            let ok = qr >= kappa * pm1;
            if !ok {
                warnings.push(format!("min(q, r) = {qr} < {}: confinement to [0, 1] is not guaranteed", kappa * pm1));
            }
            ok
        }
        _ => false,
    };
    if coeff.effective_beta() < 1.0 {
        warnings.push(format!("effective beta = {} < 1: collisions are possible", coeff.effective_beta()));
    }
    coeff.warnings = warnings;
    Ok(coeff)
}
