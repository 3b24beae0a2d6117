//! Divergence measures between a 2×2 joint distribution and the product of
//! its marginals, plus the convex generator shared with the ICA contrast.
//!
//! Integrals over the joint support become sums over the four cells. Every
//! probability entering `ln` or a fractional power is clamped below at
//! [`EPS_FLOOR`](crate::scalar::EPS_FLOOR).

use std::fmt;
use std::str::FromStr;

use crate::error::{IcaError, Result};
use crate::scalar::{floor, Scalar};

/// Curvature parameter α of the convex generator.
///
/// `α = ±1` select the closed-form limits; every other value uses the generic
/// expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityParam<T> {
    pub alpha: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Generic,
    /// `t ln t − t + 1`
    PlusOne,
    /// `t − 1 − ln t`
    MinusOne,
}

impl<T: Scalar> ConvexityParam<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(IcaError::invalid("alpha must be finite"));
        }
        Ok(Self { alpha })
    }

    fn branch(&self) -> Branch {
        if self.alpha == T::one() {
            Branch::PlusOne
        } else if self.alpha == -T::one() {
            Branch::MinusOne
        } else {
            Branch::Generic
        }
    }

    /// `f(t)`, without argument checks. `t` is clamped to the floor first.
    #[inline]
    pub(crate) fn eval(&self, t: T) -> T {
        let t = floor(t);
        match self.branch() {
            Branch::PlusOne => t * t.ln() - t + T::one(),
            Branch::MinusOne => t - T::one() - t.ln(),
            Branch::Generic => {
                let a = self.alpha;
                let one = T::one();
                let p = (one + a) / T::lit(2.0);
                // 1 − p + p t − t^p, arranged to avoid cancellation near α = −1.
                let bracket = p * (t - one) - (p * t.ln()).exp_m1();
                T::lit(4.0) / ((one - a) * (one + a)) * bracket
            }
        }
    }

    /// `f'(t)`, without argument checks. `t` is clamped to the floor first.
    #[inline]
    pub(crate) fn derivative(&self, t: T) -> T {
        let t = floor(t);
        match self.branch() {
            Branch::PlusOne => t.ln(),
            Branch::MinusOne => T::one() - t.recip(),
            Branch::Generic => {
                let a = self.alpha;
                let one = T::one();
                let e = (a - one) / T::lit(2.0);
                -T::lit(2.0) / (one - a) * (e * t.ln()).exp_m1()
            }
        }
    }
}

/// Convex generator `f(t) = 4/(1−α²)·[(1−α)/2 + (1+α)/2·t − t^{(1+α)/2}]`.
pub fn convex_f<T: Scalar>(t: T, alpha: ConvexityParam<T>) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(IcaError::invalid(format!("convex_f needs t >= 0, got {t}")));
    }
    Ok(alpha.eval(t))
}

/// Derivative `f'(t) = 2/(1−α)·[1 − t^{(α−1)/2}]`.
pub fn convex_f_prime<T: Scalar>(t: T, alpha: ConvexityParam<T>) -> Result<T> {
    if !(t > T::zero()) {
        return Err(IcaError::invalid(format!("convex_f_prime needs t > 0, got {t}")));
    }
    Ok(alpha.derivative(t))
}

/// Joint 2×2 table `joint[i][j] = p(x1 = i, x2 = j)` with its marginals.
/// Index 0 is event A, index 1 is event B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteBivariate<T> {
    pub joint: [[T; 2]; 2],
    pub marg1: [T; 2],
    pub marg2: [T; 2],
}

impl<T: Scalar> DiscreteBivariate<T> {
    pub fn new(joint: [[T; 2]; 2]) -> Result<Self> {
        let mut total = T::zero();
        for row in &joint {
            for &p in row {
                if !(p >= T::zero()) || !p.is_finite() {
                    return Err(IcaError::invalid(format!("joint cell {p} is not a probability")));
                }
                total += p;
            }
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
        if (total - T::one()).abs() > tol {
            return Err(IcaError::invalid(format!("joint sums to {total}, not 1")));
        }
        let marg1 = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
        let marg2 = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
        Ok(Self { joint, marg1, marg2 })
    }

    /// Product-of-marginals table for given marginals.
    pub fn independent(marg1: [T; 2], marg2: [T; 2]) -> Result<Self> {
        check_marginal(marg1)?;
        check_marginal(marg2)?;
        let mut d = Self::new([
            [marg1[0] * marg2[0], marg1[0] * marg2[1]],
            [marg1[1] * marg2[0], marg1[1] * marg2[1]],
        ])?;
        d.marg1 = marg1;
        d.marg2 = marg2;
        Ok(d)
    }

    /// Table with fixed first marginal and free cells `p(A,A)`, `p(B,A)`.
    /// Returns `None` for nodes outside the feasible box.
    pub fn from_free_cells(marg1: [T; 2], p_aa: T, p_ba: T) -> Option<Self> {
        if p_aa < T::zero() || p_ba < T::zero() || p_aa > marg1[0] || p_ba > marg1[1] {
            return None;
        }
        let nonneg = |v: T| if v < T::zero() { T::zero() } else { v };
        Self::new([[p_aa, nonneg(marg1[0] - p_aa)], [p_ba, nonneg(marg1[1] - p_ba)]]).ok()
    }

    fn cells(&self) -> [T; 4] {
        [
            self.joint[0][0],
            self.joint[0][1],
            self.joint[1][0],
            self.joint[1][1],
        ]
    }

    /// Product of the marginals in the same cell order as `cells`.
    fn product_cells(&self) -> [T; 4] {
        [
            self.marg1[0] * self.marg2[0],
            self.marg1[0] * self.marg2[1],
            self.marg1[1] * self.marg2[0],
            self.marg1[1] * self.marg2[1],
        ]
    }
}

fn check_marginal<T: Scalar>(m: [T; 2]) -> Result<()> {
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
    if !(m[0] > T::zero() && m[1] > T::zero()) || (m[0] + m[1] - T::one()).abs() > tol {
        return Err(IcaError::invalid(format!(
            "marginal ({}, {}) is not a positive distribution",
            m[0], m[1]
        )));
    }
    Ok(())
}

/// Weight λ of the Jensen-type divergences and order β of the β-divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceParams<T> {
    pub alpha: T,
    pub lambda: T,
    pub beta: T,
}

impl<T: Scalar> Default for DivergenceParams<T> {
    fn default() -> Self {
        Self {
            alpha: -T::one(),
            lambda: T::lit(0.5),
            beta: T::lit(0.5),
        }
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(IcaError::invalid(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

fn entropy<T: Scalar>(p: &[T; 4]) -> T {
    p.iter().map(|&v| -v * floor(v).ln()).sum()
}

/// Kullback-Leibler divergence of the joint from the product of marginals.
pub fn kl_div<T: Scalar>(d: &DiscreteBivariate<T>) -> T {
    let p = d.cells();
    let q = d.product_cells();
    p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| pi * (floor(pi).ln() - floor(qi).ln()))
        .sum()
}

/// Squared Euclidean distance between joint and product tables.
pub fn e_div<T: Scalar>(d: &DiscreteBivariate<T>) -> T {
    let p = d.cells();
    let q = d.product_cells();
    p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| (pi - qi) * (pi - qi))
        .sum()
}

/// Inner products `(⟨a,a⟩, ⟨b,b⟩, ⟨a,b⟩)` of two cell vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsTerms<T> {
    pub aa: T,
    pub bb: T,
    pub ab: T,
}

impl<T: Scalar> CsTerms<T> {
    fn of(a: &[T; 4], b: &[T; 4]) -> Self {
        let mut t = Self {
            aa: T::zero(),
            bb: T::zero(),
            ab: T::zero(),
        };
        for (&x, &y) in a.iter().zip(b.iter()) {
            t.aa += x * x;
            t.bb += y * y;
            t.ab += x * y;
        }
        t
    }

    fn log_ratio(&self) -> Result<T> {
        if !(self.aa > T::zero() && self.bb > T::zero() && self.ab > T::zero()) {
            return Err(IcaError::DegenerateDivergence(format!(
                "Cauchy-Schwarz terms ({}, {}, {}) are not all positive",
                self.aa, self.bb, self.ab
            )));
        }
        Ok(self.aa.ln() + self.bb.ln() - T::lit(2.0) * self.ab.ln())
    }

    fn angle(&self) -> Result<T> {
        let denom = (self.aa * self.bb).sqrt();
        if !(denom > T::zero()) {
            return Err(IcaError::DegenerateDivergence("zero norm in angle".into()));
        }
        let c = (self.ab / denom).min(T::one()).max(-T::one());
        Ok(c.acos())
    }
}

/// `V_J = Σp², V_M = Σ(p₁p₂)², V_C = Σ p·p₁p₂`.
pub fn cs_terms<T: Scalar>(d: &DiscreteBivariate<T>) -> CsTerms<T> {
    CsTerms::of(&d.cells(), &d.product_cells())
}

/// Same inner products after mapping both tables through `f`.
pub fn ccs_terms<T: Scalar>(d: &DiscreteBivariate<T>, alpha: ConvexityParam<T>) -> CsTerms<T> {
    let f = d.cells().map(|v| alpha.eval(v));
    let g = d.product_cells().map(|v| alpha.eval(v));
    CsTerms::of(&f, &g)
}

/// Cauchy-Schwarz divergence.
pub fn cs_div<T: Scalar>(d: &DiscreteBivariate<T>) -> Result<T> {
    cs_terms(d).log_ratio()
}

/// Convex Cauchy-Schwarz divergence: the Cauchy-Schwarz log-ratio of
/// `f(joint)` against `f(product of marginals)`.
pub fn ccs_div<T: Scalar>(d: &DiscreteBivariate<T>, alpha: ConvexityParam<T>) -> Result<T> {
    ccs_terms(d, alpha).log_ratio()
}

pub fn cs_angle<T: Scalar>(d: &DiscreteBivariate<T>) -> Result<T> {
    cs_terms(d).angle()
}

pub fn ccs_angle<T: Scalar>(d: &DiscreteBivariate<T>, alpha: ConvexityParam<T>) -> Result<T> {
    ccs_terms(d, alpha).angle()
}

/// Amari α-divergence with the `4/(1−α²)` normalisation; `α = −1` is
/// `KL(joint‖product)` and `α = 1` is `KL(product‖joint)`.
pub fn alpha_div<T: Scalar>(d: &DiscreteBivariate<T>, alpha: ConvexityParam<T>) -> T {
    let p = d.cells();
    let q = d.product_cells();
    match alpha.branch() {
        Branch::MinusOne => kl_div(d),
        Branch::PlusOne => q
            .iter()
            .zip(p.iter())
            .map(|(&qi, &pi)| qi * (floor(qi).ln() - floor(pi).ln()))
            .sum(),
        Branch::Generic => {
            let a = alpha.alpha;
            let one = T::one();
            let two = T::lit(2.0);
            let wp = (one - a) / two;
            let wq = (one + a) / two;
            let s: T = p
                .iter()
                .zip(q.iter())
                .map(|(&pi, &qi)| wp * pi + wq * qi - floor(pi).powf(wp) * floor(qi).powf(wq))
                .sum();
            T::lit(4.0) / ((one - a) * (one + a)) * s
        }
    }
}

/// Csiszár f-divergence `Σ p · f(p₁p₂ / p)` for a convex `f` with `f(1) = 0`.
pub fn f_div<T: Scalar, F: Fn(T) -> T>(d: &DiscreteBivariate<T>, f: F) -> T {
    let p = d.cells();
    let q = d.product_cells();
    p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| pi * f(qi / floor(pi)))
        .sum()
}

/// Jensen-Shannon divergence with weight λ on the joint.
pub fn js_div<T: Scalar>(d: &DiscreteBivariate<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let p = d.cells();
    let q = d.product_cells();
    let mut m = [T::zero(); 4];
    for k in 0..4 {
        m[k] = lambda * p[k] + (T::one() - lambda) * q[k];
    }
    Ok(entropy(&m) - lambda * entropy(&p) - (T::one() - lambda) * entropy(&q))
}

/// Convex (Jensen) divergence built on the generator `f`.
pub fn c_div<T: Scalar>(d: &DiscreteBivariate<T>, alpha: ConvexityParam<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let p = d.cells();
    let q = d.product_cells();
    let one = T::one();
    Ok(p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| {
            let mix = lambda * pi + (one - lambda) * qi;
            lambda * alpha.eval(pi) + (one - lambda) * alpha.eval(qi) - alpha.eval(mix)
        })
        .sum())
}

/// β-divergence `Σ [p(p^β − q^β)/β − (p^{β+1} − q^{β+1})/(β+1)]`, `β ∉ {−1, 0}`.
pub fn beta_div<T: Scalar>(d: &DiscreteBivariate<T>, beta: T) -> Result<T> {
    if beta == T::zero() || beta == -T::one() || !beta.is_finite() {
        return Err(IcaError::invalid(format!(
            "beta must be finite and not in {{-1, 0}}, got {beta}"
        )));
    }
    let p = d.cells();
    let q = d.product_cells();
    let b1 = beta + T::one();
    Ok(p.iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| {
            let (pc, qc) = (floor(pi), floor(qi));
            pi * (pc.powf(beta) - qc.powf(beta)) / beta - (pc.powf(b1) - qc.powf(b1)) / b1
        })
        .sum())
}

/// Identifier for the divergences usable in surface studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    Kl,
    Euclidean,
    CauchySchwarz,
    Alpha,
    JensenShannon,
    Convex,
    Beta,
    Ccs,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 8] = [
        DivergenceKind::Kl,
        DivergenceKind::Euclidean,
        DivergenceKind::CauchySchwarz,
        DivergenceKind::Alpha,
        DivergenceKind::JensenShannon,
        DivergenceKind::Convex,
        DivergenceKind::Beta,
        DivergenceKind::Ccs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceKind::Kl => "kl",
            DivergenceKind::Euclidean => "e",
            DivergenceKind::CauchySchwarz => "cs",
            DivergenceKind::Alpha => "alpha",
            DivergenceKind::JensenShannon => "js",
            DivergenceKind::Convex => "c",
            DivergenceKind::Beta => "beta",
            DivergenceKind::Ccs => "ccs",
        }
    }

    pub fn evaluate<T: Scalar>(self, d: &DiscreteBivariate<T>, params: &DivergenceParams<T>) -> Result<T> {
        let alpha = ConvexityParam::new(params.alpha)?;
        match self {
            DivergenceKind::Kl => Ok(kl_div(d)),
            DivergenceKind::Euclidean => Ok(e_div(d)),
            DivergenceKind::CauchySchwarz => cs_div(d),
            DivergenceKind::Alpha => Ok(alpha_div(d, alpha)),
            DivergenceKind::JensenShannon => js_div(d, params.lambda),
            DivergenceKind::Convex => c_div(d, alpha, params.lambda),
            DivergenceKind::Beta => beta_div(d, params.beta),
            DivergenceKind::Ccs => ccs_div(d, alpha),
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DivergenceKind {
    type Err = IcaError;

    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().as_str() {
            "kl" | "kl-div" => DivergenceKind::Kl,
            "e" | "ed" | "e-div" | "euclidean" => DivergenceKind::Euclidean,
            "cs" | "cs-div" => DivergenceKind::CauchySchwarz,
            "alpha" | "alpha-div" => DivergenceKind::Alpha,
            "js" | "js-div" => DivergenceKind::JensenShannon,
            "c" | "c-div" | "convex" => DivergenceKind::Convex,
            "beta" | "beta-div" => DivergenceKind::Beta,
            "ccs" | "ccs-div" => DivergenceKind::Ccs,
            other => return Err(IcaError::invalid(format!("unknown divergence '{other}'"))),
        };
        Ok(k)
    }
}

/// One evaluated node of a surface or slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<T> {
    pub p_aa: T,
    pub p_ba: T,
    pub value: T,
}

/// Interior grid `lo + (k+1)·(hi−lo)/(n+1)`, `k = 0..n`.
fn interior_grid<T: Scalar>(hi: T, n: usize) -> impl Iterator<Item = T> {
    let denom = T::from_usize_lossy(n + 1);
    (0..n).map(move |k| hi * T::from_usize_lossy(k + 1) / denom)
}

/// Divergence over the free cells `p(A,A) ∈ (0, marg1[0])`,
/// `p(B,A) ∈ (0, marg1[1])` on an `n × n` interior grid.
pub fn divergence_surface<T: Scalar>(
    marg1: [T; 2],
    resolution: usize,
    which: DivergenceKind,
    params: &DivergenceParams<T>,
) -> Result<Vec<SurfacePoint<T>>> {
    check_marginal(marg1)?;
    if resolution < 8 {
        return Err(IcaError::invalid(format!(
            "grid resolution must be >= 8, got {resolution}"
        )));
    }
    let mut out = Vec::with_capacity(resolution * resolution);
    for p_aa in interior_grid(marg1[0], resolution) {
        for p_ba in interior_grid(marg1[1], resolution) {
            let Some(d) = DiscreteBivariate::from_free_cells(marg1, p_aa, p_ba) else {
                continue;
            };
            let value = which.evaluate(&d, params)?;
            out.push(SurfacePoint { p_aa, p_ba, value });
        }
    }
    Ok(out)
}

/// Section of the surface along `p(A,A)` with `p(B,A)` held at its
/// independent value `marg1[1]·marg2[0]`. The section crosses the
/// independence line at `p(A,A) = marg1[0]·marg2[0]`.
pub fn divergence_slice<T: Scalar>(
    marg1: [T; 2],
    marg2: [T; 2],
    resolution: usize,
    which: DivergenceKind,
    params: &DivergenceParams<T>,
) -> Result<Vec<SurfacePoint<T>>> {
    check_marginal(marg1)?;
    check_marginal(marg2)?;
    if resolution < 8 {
        return Err(IcaError::invalid(format!(
            "grid resolution must be >= 8, got {resolution}"
        )));
    }
    let p_ba = marg1[1] * marg2[0];
    let mut out = Vec::with_capacity(resolution);
    for p_aa in interior_grid(marg1[0], resolution) {
        let Some(d) = DiscreteBivariate::from_free_cells(marg1, p_aa, p_ba) else {
            continue;
        };
        let value = which.evaluate(&d, params)?;
        out.push(SurfacePoint { p_aa, p_ba, value });
    }
    Ok(out)
}

/// Discrete second differences `v[k−1] − 2v[k] + v[k+1]` of a sampled curve.
pub fn second_differences<T: Scalar>(values: &[T]) -> Vec<T> {
    values
        .windows(3)
        .map(|w| w[0] - T::lit(2.0) * w[1] + w[2])
        .collect()
}
