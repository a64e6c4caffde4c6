//! Problem data and the derived constants of the coupled critical system.
//!
//! [`ProblemParams`] carries (d, R, λ, β). From it — together with the
//! single-equation levels m_i and the attained Sobolev quotient S delivered
//! by the solver — [`compute_constants`] evaluates the whole constant chain
//! C̄, K₁…K₄, K, C₁…C₃, δ that calibrates the weak-coupling regime: K is the
//! coupling threshold below which the cooperative system has a least-energy
//! solution with every component bounded away from zero in L⁶.

use std::sync::OnceLock;

use serde::Serialize;

use crate::bubbles;
use crate::error::{Error, Result};
use crate::radial::{principal_eigenvalue, RadialGrid};
use crate::scalar::{as_f64, lit, Scalar};

/// Sign pattern of the off-diagonal couplings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// All β_ij > 0 for i ≠ j.
    Cooperative,
    /// All β_ij < 0 for i ≠ j.
    Competitive,
    /// All β_ij = 0 (includes d = 1): the system splits into scalar equations.
    Decoupled,
    /// Off-diagonal couplings of both signs.
    Mixed,
}

/// The data of one problem instance: d components on the ball B_R with
/// linear coefficients λ_i and a symmetric coupling matrix β.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams<T> {
    d: usize,
    radius: T,
    lambdas: Vec<T>,
    /// Row-major d×d, validated symmetric with positive diagonal.
    beta: Vec<T>,
}

impl<T: Scalar> ProblemParams<T> {
    pub fn new(radius: T, lambdas: Vec<T>, beta_rows: Vec<Vec<T>>) -> Result<Self> {
        let d = lambdas.len();
        if d == 0 {
            return Err(Error::InvalidParams("need at least one component".into()));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!(
                "radius must be positive and finite, got {}",
                as_f64(radius)
            )));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParams("lambda values must be finite".into()));
        }
        if beta_rows.len() != d || beta_rows.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParams(format!(
                "coupling matrix must be {d}×{d} to match {d} lambda values"
            )));
        }
        let mut beta = Vec::with_capacity(d * d);
        for row in &beta_rows {
            for &b in row {
                if !b.is_finite() {
                    return Err(Error::InvalidParams("coupling entries must be finite".into()));
                }
                beta.push(b);
            }
        }
        for i in 0..d {
            if !(beta[i * d + i] > T::zero()) {
                return Err(Error::InvalidParams(format!(
                    "self-coupling beta[{i}][{i}] must be positive, got {}",
                    as_f64(beta[i * d + i])
                )));
            }
            for j in 0..i {
                if beta[i * d + j] != beta[j * d + i] {
                    return Err(Error::InvalidParams(format!(
                        "coupling matrix must be symmetric: beta[{i}][{j}] = {} ≠ beta[{j}][{i}] = {}",
                        as_f64(beta[i * d + j]),
                        as_f64(beta[j * d + i])
                    )));
                }
            }
        }
        Ok(Self {
            d,
            radius,
            lambdas,
            beta,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn lambda(&self, i: usize) -> T {
        self.lambdas[i]
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn beta(&self, i: usize, j: usize) -> T {
        self.beta[i * self.d + j]
    }

    pub fn max_diag(&self) -> T {
        (0..self.d)
            .map(|i| self.beta(i, i))
            .fold(T::neg_infinity(), T::max)
    }

    pub fn min_diag(&self) -> T {
        (0..self.d)
            .map(|i| self.beta(i, i))
            .fold(T::infinity(), T::min)
    }

    /// Largest |β_ij| over i ≠ j; zero when d = 1.
    pub fn max_offdiag_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    m = m.max(self.beta(i, j).abs());
                }
            }
        }
        m
    }

    pub fn regime(&self) -> Regime {
        let mut pos = false;
        let mut neg = false;
        for i in 0..self.d {
            for j in 0..i {
                let b = self.beta(i, j);
                if b > T::zero() {
                    pos = true;
                } else if b < T::zero() {
                    neg = true;
                }
            }
        }
        match (pos, neg) {
            (true, false) => Regime::Cooperative,
            (false, true) => Regime::Competitive,
            (false, false) => Regime::Decoupled,
            (true, true) => Regime::Mixed,
        }
    }

    /// The subsystem obtained by keeping the listed components (0-based,
    /// strictly increasing).
    pub fn restricted(&self, subset: &[usize]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::InvalidSubset("subset must be non-empty".into()));
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) || *subset.last().unwrap() >= self.d {
            return Err(Error::InvalidSubset(format!(
                "subset must be strictly increasing within 0..{}, got {subset:?}",
                self.d
            )));
        }
        let lambdas = subset.iter().map(|&i| self.lambdas[i]).collect();
        let beta_rows = subset
            .iter()
            .map(|&i| subset.iter().map(|&j| self.beta(i, j)).collect())
            .collect();
        Self::new(self.radius, lambdas, beta_rows)
    }
}

/// The limiting Sobolev data of the critical embedding H¹(ℝ³) ↪ L⁶(ℝ³):
/// S̃ is the best constant; the standard bubble realizes
/// ∫|∇U|² = ∫U⁶ = S̃^{3/2}.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SobolevTilde<T> {
    pub s_tilde: T,
    /// S̃^{3/2}: the common value of the bubble's gradient energy and L⁶ mass.
    pub bubble_energy: T,
}

static SOBOLEV_CACHE: OnceLock<(f64, f64)> = OnceLock::new();

/// Computes S̃ from the bubble's gradient energy: radial quadrature out to a
/// finite radius plus the analytic tail of the integrand. The value is
/// computed once at f64 precision and converted to the requested scalar.
pub fn sobolev_tilde<T: Scalar>() -> SobolevTilde<T> {
    let &(energy, s_tilde) = SOBOLEV_CACHE.get_or_init(|| {
        let energy = bubbles::grad_energy_r3(1.0f64);
        (energy, energy.powf(2.0 / 3.0))
    });
    SobolevTilde {
        s_tilde: lit(s_tilde),
        bubble_energy: lit(energy),
    }
}

/// The spectral endpoints of the existence window on the ball B_R.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LambdaBounds<T> {
    /// First Dirichlet eigenvalue λ₁(B_R) of −Δ, from the grid eigensolve.
    pub lambda1: T,
    /// λ*(B_R) = λ₁/4 (exactly; the scalar critical equation on a ball has a
    /// positive solution iff λ ∈ (−λ₁, −λ*)).
    pub lambda_star: T,
}

/// Resolution of the internal eigensolve behind [`lambda_bounds`].
const EIGEN_GRID_CELLS: usize = 2048;

pub fn lambda_bounds<T: Scalar>(radius: T) -> Result<LambdaBounds<T>> {
    lambda_bounds_at(radius, EIGEN_GRID_CELLS)
}

pub fn lambda_bounds_at<T: Scalar>(radius: T, n: usize) -> Result<LambdaBounds<T>> {
    let grid = RadialGrid::new(radius, n)?;
    let (lambda1, _) = principal_eigenvalue(&grid);
    Ok(LambdaBounds {
        lambda1,
        lambda_star: lambda1 / lit::<T>(4.0),
    })
}

/// Position of one λ_i relative to the window (−λ₁, −λ*).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WindowVerdict {
    Inside,
    /// λ ≤ −λ₁: the quadratic form ‖·‖²_λ is no longer positive definite.
    BelowWindow,
    /// λ ≥ −λ*: no positive solution exists; minimizing sequences concentrate.
    AboveWindow,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComponentAdmissibility<T> {
    pub lambda: T,
    pub verdict: WindowVerdict,
    /// Distance to the nearest window endpoint; positive inside, negative outside.
    pub margin: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport<T> {
    pub lambda1: T,
    pub lambda_star: T,
    /// The open window (−λ₁, −λ*) that every λ_i must lie in.
    pub window: (T, T),
    pub components: Vec<ComponentAdmissibility<T>>,
    pub all_admissible: bool,
}

pub fn check_admissible<T: Scalar>(params: &ProblemParams<T>) -> Result<AdmissibilityReport<T>> {
    let bounds = lambda_bounds(params.radius())?;
    let lo = -bounds.lambda1;
    let hi = -bounds.lambda_star;
    let components: Vec<_> = params
        .lambdas()
        .iter()
        .map(|&lambda| {
            let margin = (lambda - lo).min(hi - lambda);
            let verdict = if lambda <= lo {
                WindowVerdict::BelowWindow
            } else if lambda >= hi {
                WindowVerdict::AboveWindow
            } else {
                WindowVerdict::Inside
            };
            ComponentAdmissibility {
                lambda,
                verdict,
                margin,
            }
        })
        .collect();
    let all_admissible = components
        .iter()
        .all(|c| c.verdict == WindowVerdict::Inside);
    Ok(AdmissibilityReport {
        lambda1: bounds.lambda1,
        lambda_star: bounds.lambda_star,
        window: (lo, hi),
        components,
        all_admissible,
    })
}

/// Every constant the energy estimates quote, evaluated for one problem
/// instance. Immutable after construction.
#[derive(Clone, Debug, Serialize)]
pub struct DerivedConstants<T> {
    pub s_tilde: T,
    /// S: the smallest attained single-component quotient min_i Q_i.
    pub s_quotient: T,
    pub lambda1: T,
    pub lambda_star: T,
    /// C̄ = (d/3)·max_i β_ii^{−1/2}·S̃^{3/2}: upper bound for the ground level.
    pub cbar: T,
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
    /// K = min{K₁, K₂, K₃, K₄}: the weak-coupling threshold.
    pub k: T,
    /// Lower/upper L⁶ bounds for components of low-energy Nehari states.
    pub c1: T,
    pub c2: T,
    /// L⁶ floor in the purely competitive case.
    pub c3: T,
    /// δ = (1/2)·min_i{β_ii^{−1}S̃³ − (3m_i)²} > 0.
    pub delta: T,
    /// Single-equation least-energy levels m_i.
    pub m: Vec<T>,
    /// ℬ = (1/3)P_max^{−1/2}·S̃^{3/2}: ground level of the whole-space limit system.
    pub b_limit: T,
    /// P_max = max{Σ_ij β_ij|x_i|³|x_j|³ : |x| = 1}.
    pub p_max: T,
    pub notes: String,
}

/// Evaluates the constant chain. `m` are the single-equation levels and
/// `s_quotient` the attained quotient S, both produced by the solver.
pub fn compute_constants<T: Scalar>(
    params: &ProblemParams<T>,
    m: &[T],
    s_quotient: T,
) -> Result<DerivedConstants<T>> {
    let d = params.d();
    if m.len() != d {
        return Err(Error::InvalidParams(format!(
            "got {} single-equation levels for {d} components",
            m.len()
        )));
    }
    if m.iter().any(|&mi| !(mi > T::zero()) || !mi.is_finite()) {
        return Err(Error::InvalidParams(
            "single-equation levels m_i must be positive and finite".into(),
        ));
    }
    if !(s_quotient > T::zero()) || !s_quotient.is_finite() {
        return Err(Error::InvalidParams(format!(
            "quotient S must be positive and finite, got {}",
            as_f64(s_quotient)
        )));
    }
    let adm = check_admissible(params)?;
    if let Some((i, c)) = adm
        .components
        .iter()
        .enumerate()
        .find(|(_, c)| c.verdict != WindowVerdict::Inside)
    {
        return Err(Error::Inadmissible {
            component: i,
            lambda: as_f64(c.lambda),
            lo: as_f64(adm.window.0),
            hi: as_f64(adm.window.1),
        });
    }

    let st = sobolev_tilde::<T>();
    let s = s_quotient;
    let energy = st.bubble_energy; // S̃^{3/2}
    let s_tilde_cubed = energy * energy; // S̃³, from the primary computed quantity

    let half = lit::<T>(0.5);
    let three = lit::<T>(3.0);
    let six = lit::<T>(6.0);

    let cbar = lit::<T>(d as f64) / three * params.min_diag().sqrt().recip() * energy;
    let six_cbar = six * cbar;
    let k1 = lit::<T>(7.0) * s.powi(3) / (lit::<T>(12.0) * six_cbar * six_cbar);

    let growth = (six_cbar / s).powf(lit::<T>(1.5)); // (6C̄/S)^{3/2}
    let c2 = (six_cbar / s).powi(3);
    let c1 = (s / (lit::<T>(d as f64) * k1.max(params.max_diag()) * growth)).powi(6);
    let c3 = (0..d)
        .map(|i| (s / params.beta(i, i)).powf(lit::<T>(1.5)))
        .fold(T::infinity(), T::min);

    let min_bm = (0..d)
        .map(|i| (params.beta(i, i) * m[i]).sqrt())
        .fold(T::infinity(), T::min);
    let sum_mb = (0..d)
        .map(|i| (m[i] / params.beta(i, i)).sqrt())
        .fold(T::zero(), |a, b| a + b);
    let k2 = min_bm / (lit::<T>(2.0) * sum_mb);

    let sum_3mb = (0..d)
        .map(|i| (three * m[i] / params.beta(i, i)).sqrt())
        .fold(T::zero(), |a, b| a + b);
    let k3 = k1
        .min(s.powi(3) / (lit::<T>(4.0) * six_cbar * six_cbar))
        .min(
            s.powf(lit::<T>(2.5)) * c1.powf(three.recip())
                / (lit::<T>(4.0) * six_cbar.powf(lit::<T>(1.5)) * sum_3mb),
        )
        .min(half * three.sqrt() * min_bm / (sum_3mb + growth));

    let delta = half
        * (0..d)
            .map(|i| s_tilde_cubed / params.beta(i, i) - (three * m[i]).powi(2))
            .fold(T::infinity(), T::min);
    if !(delta > T::zero()) {
        return Err(Error::InvalidParams(format!(
            "delta = {} is not positive: some level m_i reached its strict upper \
             bound (1/3)beta_ii^(-1/2) S_tilde^(3/2), so the upstream single-equation \
             solve did not converge below the compactness threshold",
            as_f64(delta)
        )));
    }
    let k4 = params.min_diag() * s.powi(3) * delta / (six_cbar * six_cbar * s_tilde_cubed);
    let k = k1.min(k2).min(k3).min(k4);

    let pm = bubbles::pmax(params);
    let b_limit = energy / (three * pm.value.sqrt());

    Ok(DerivedConstants {
        s_tilde: st.s_tilde,
        s_quotient: s,
        lambda1: adm.lambda1,
        lambda_star: adm.lambda_star,
        cbar,
        k1,
        k2,
        k3,
        k4,
        k,
        c1,
        c2,
        c3,
        delta,
        m: m.to_vec(),
        b_limit,
        p_max: pm.value,
        notes: "delta is defined with the cubed limiting Sobolev constant S_tilde^3, and the \
                threshold k4 uses the same convention, so that delta > 0 is exactly the \
                statement that every m_i lies strictly below (1/3) beta_ii^(-1/2) S_tilde^(3/2); \
                a 3/2-power in delta's definition would break that equivalence"
            .into(),
    })
}
