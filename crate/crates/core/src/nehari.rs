//! Nehari constraints: interaction data, residuals, and the scaling
//! projections onto the manifolds 𝒩_I and ℳ.
//!
//! For a field tuple u and subset I, the Nehari residuals are
//! G_i(u) = ‖u_i‖_i² − Σ_{j∈I} ∫β_ij|u_i|³|u_j|³; the manifold 𝒩_I is their
//! common zero set. Projection finds positive scales t with (t_iu_i) ∈ 𝒩_I.
//! In the variables s = t³ the scaled energy is strictly concave whenever
//! the coupling Gram matrix B (b_ij = ∫β_ij|u_i|³|u_j|³) is positive
//! definite, so its unique critical point — found by a damped Newton
//! iteration — is the global maximum of the scaling energy. When every
//! off-diagonal coupling is nonpositive that gate fails structurally, and a
//! componentwise Gauss–Seidel on the scalar quartics converges instead.

use serde::Serialize;

use crate::constants::ProblemParams;
use crate::dense::{cholesky, cholesky_solve};
use crate::error::{Error, Result};
use crate::radial::{h1_inner, lp_mixed, FieldVector};
use crate::scalar::{as_f64, lit, Scalar};

/// Default relative tolerance for manifold membership: residuals are
/// compared against tol · Σ‖u_i‖².
pub const PROJECTION_TOL: f64 = 1e-10;

/// Checks that `subset` is strictly increasing inside 0..d.
pub(crate) fn validate_subset(subset: &[usize], d: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset must be non-empty".into()));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) || *subset.last().unwrap() >= d {
        return Err(Error::InvalidSubset(format!(
            "subset must be strictly increasing within 0..{d}, got {subset:?}"
        )));
    }
    Ok(())
}

/// The discrete ingredients of every Nehari computation on a subset I:
/// norms N_a = ‖u_{i_a}‖² and the coupling Gram matrix
/// b_ab = ∫β_{i_ai_b}|u_{i_a}|³|u_{i_b}|³, indexed by position in I.
#[derive(Clone, Debug, Serialize)]
pub struct InteractionData<T> {
    subset: Vec<usize>,
    norms: Vec<T>,
    mixed: Vec<T>,
}

impl<T: Scalar> InteractionData<T> {
    /// Global component indices this data covers.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Number of components in the subset.
    pub fn dim(&self) -> usize {
        self.subset.len()
    }

    /// ‖u_{i_a}‖² for position a in the subset.
    pub fn norm(&self, a: usize) -> T {
        self.norms[a]
    }

    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    /// ∫β_ij|u_i|³|u_j|³ for positions (a, b) in the subset.
    pub fn mixed(&self, a: usize, b: usize) -> T {
        self.mixed[a * self.subset.len() + b]
    }

    /// Nehari residuals G_a = N_a − Σ_b mixed_ab.
    pub fn residuals(&self) -> Vec<T> {
        let q = self.dim();
        (0..q)
            .map(|a| self.norms[a] - (0..q).map(|b| self.mixed(a, b)).fold(T::zero(), |x, y| x + y))
            .collect()
    }

    /// Energy of the scaled tuple (t_a u_a): Σ t_a²N_a/2 − Σ t_a³t_b³b_ab/6.
    /// Its critical points in t are exactly the Nehari projections.
    pub fn scaling_energy(&self, t: &[T]) -> T {
        let q = self.dim();
        debug_assert_eq!(t.len(), q);
        let half = lit::<T>(0.5);
        let sixth = lit::<T>(6.0).recip();
        let mut quad = T::zero();
        let mut coupling = T::zero();
        for a in 0..q {
            quad += t[a] * t[a] * self.norms[a];
            let ta3 = t[a].powi(3);
            for b in 0..q {
                coupling += ta3 * t[b].powi(3) * self.mixed(a, b);
            }
        }
        half * quad - sixth * coupling
    }
}

/// Exact discrete norms and coupling integrals of `u` on the subset.
/// `u` must carry all d components of `params`; zero components outside the
/// subset are simply never touched.
pub fn interaction_data<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
) -> Result<InteractionData<T>> {
    let d = params.d();
    if u.len() != d {
        return Err(Error::FieldLength {
            expected: d,
            got: u.len(),
        });
    }
    validate_subset(subset, d)?;
    let q = subset.len();
    let norms: Vec<T> = subset
        .iter()
        .map(|&i| h1_inner(u.component(i), u.component(i), params.lambda(i)))
        .collect::<Result<_>>()?;
    let mut mixed = vec![T::zero(); q * q];
    for a in 0..q {
        for b in 0..=a {
            let (i, j) = (subset[a], subset[b]);
            let v = params.beta(i, j) * lp_mixed(u.component(i), u.component(j), 3)?;
            mixed[a * q + b] = v;
            mixed[b * q + a] = v;
        }
    }
    Ok(InteractionData {
        subset: subset.to_vec(),
        norms,
        mixed,
    })
}

/// The stability matrix A_I(u) of the constrained problem, with its
/// diagonal-dominance margins: a_aa = 4b_aa + Σ_{c≠a}b_ac, a_ab = 3b_ab.
/// Strict dominance puts u in the region where the manifold is a natural
/// constraint and A is positive definite (Gershgorin).
#[derive(Clone, Debug, Serialize)]
pub struct MatrixA<T> {
    pub entries: Vec<T>,
    /// margin_a = a_aa − Σ_{b≠a}|a_ab| per component.
    pub margins: Vec<T>,
    /// min over components of the margins.
    pub dominance_margin: T,
    pub diagonally_dominant: bool,
}

pub fn matrix_a<T: Scalar>(data: &InteractionData<T>) -> MatrixA<T> {
    let q = data.dim();
    let mut entries = vec![T::zero(); q * q];
    for a in 0..q {
        for b in 0..q {
            entries[a * q + b] = if a == b {
                let off = (0..q)
                    .filter(|&c| c != a)
                    .map(|c| data.mixed(a, c))
                    .fold(T::zero(), |x, y| x + y);
                lit::<T>(4.0) * data.mixed(a, a) + off
            } else {
                lit::<T>(3.0) * data.mixed(a, b)
            };
        }
    }
    let margins: Vec<T> = (0..q)
        .map(|a| {
            let off_abs = (0..q)
                .filter(|&b| b != a)
                .map(|b| entries[a * q + b].abs())
                .fold(T::zero(), |x, y| x + y);
            entries[a * q + a] - off_abs
        })
        .collect();
    let dominance_margin = margins.iter().copied().fold(T::infinity(), T::min);
    MatrixA {
        entries,
        margins,
        dominance_margin,
        diagonally_dominant: dominance_margin > T::zero(),
    }
}

/// Residuals, membership verdict, and stability data of `u` on 𝒩_I.
#[derive(Clone, Debug, Serialize)]
pub struct NehariReport<T> {
    pub subset: Vec<usize>,
    /// G_a(u) per component of the subset.
    pub residuals: Vec<T>,
    /// max_a |G_a| ≤ tol · Σ‖u_a‖²
    pub on_manifold: bool,
    pub matrix_a: MatrixA<T>,
    pub dominance_margin: T,
    /// The relative tolerance the verdict used.
    pub tol: T,
}

pub fn nehari_report<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
    tol: T,
) -> Result<NehariReport<T>> {
    let data = interaction_data(u, params, subset)?;
    Ok(report_from_data(&data, tol))
}

fn report_from_data<T: Scalar>(data: &InteractionData<T>, tol: T) -> NehariReport<T> {
    let residuals = data.residuals();
    let scale = data.norms().iter().fold(T::zero(), |a, &b| a + b);
    let max_res = residuals.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let a = matrix_a(data);
    let dominance_margin = a.dominance_margin;
    NehariReport {
        subset: data.subset().to_vec(),
        residuals,
        on_manifold: max_res <= tol * scale,
        matrix_a: a,
        dominance_margin,
        tol,
    }
}

/// Scales one component onto its own Nehari set: t⁴ = ‖u‖_i²/(β_ii|u|₆⁶).
pub fn project_single<T: Scalar>(
    u: &crate::radial::ComponentField<T>,
    params: &ProblemParams<T>,
    i: usize,
) -> Result<(T, crate::radial::ComponentField<T>)> {
    if i >= params.d() {
        return Err(Error::InvalidSubset(format!(
            "component {i} out of range for d = {}",
            params.d()
        )));
    }
    let l6 = lp_mixed(u, u, 3)?;
    if !(l6 > T::zero()) {
        return Err(Error::ZeroComponent { component: i });
    }
    let norm = h1_inner(u, u, params.lambda(i))?;
    if !(norm > T::zero()) {
        return Err(Error::ZeroComponent { component: i });
    }
    let t = (norm / (params.beta(i, i) * l6)).powf(lit::<T>(0.25));
    Ok((t, u.scaled(t)))
}

/// Newton iteration on F_a(s) = s_a^{−1/3}N_a − Σ_b s_b b_ab = 0 in the
/// concave branch (B positive definite). Step damping keeps s > 0.
fn newton_scales<T: Scalar>(data: &InteractionData<T>) -> Result<Vec<T>> {
    let q = data.dim();
    let third = lit::<T>(3.0).recip();
    // Decoupled start: s_a = (N_a/b_aa)^{3/4}.
    let mut s: Vec<T> = (0..q)
        .map(|a| (data.norm(a) / data.mixed(a, a)).powf(lit::<T>(0.75)))
        .collect();
    let f = |s: &[T]| -> Vec<T> {
        (0..q)
            .map(|a| {
                let coupled = (0..q)
                    .map(|b| s[b] * data.mixed(a, b))
                    .fold(T::zero(), |x, y| x + y);
                s[a].powf(-third) * data.norm(a) - coupled
            })
            .collect()
    };
    let scale_of = |s: &[T]| -> T {
        (0..q)
            .map(|a| s[a].powf(-third) * data.norm(a))
            .fold(T::zero(), T::max)
    };
    let norm_inf = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a.max(b.abs()));

    let mut fv = f(&s);
    for _ in 0..80 {
        if norm_inf(&fv) <= lit::<T>(1e-13) * scale_of(&s) {
            return Ok(s);
        }
        // −J = (1/3)s^{−4/3}N on the diagonal plus B: positive definite here.
        let four_thirds = lit::<T>(4.0) * third;
        let mut neg_j = vec![T::zero(); q * q];
        for a in 0..q {
            for b in 0..q {
                neg_j[a * q + b] = data.mixed(a, b);
            }
            neg_j[a * q + a] += third * s[a].powf(-four_thirds) * data.norm(a);
        }
        let l = cholesky(&neg_j, q).ok_or(Error::InteractionIndefinite)?;
        let step = cholesky_solve(&l, q, &fv); // solves (−J)Δ = F, i.e. JΔ = −F
        let mut damping = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = s
                .iter()
                .zip(&step)
                .map(|(&sa, &da)| sa + damping * da)
                .collect();
            if cand.iter().all(|&c| c > T::zero()) {
                let fc = f(&cand);
                if norm_inf(&fc) < norm_inf(&fv) {
                    s = cand;
                    fv = fc;
                    accepted = true;
                    break;
                }
            }
            damping = damping * lit::<T>(0.5);
        }
        if !accepted {
            return Err(Error::ProjectionFailed(format!(
                "newton stalled at residual {:.3e}",
                as_f64(norm_inf(&fv))
            )));
        }
    }
    if norm_inf(&f(&s)) <= lit::<T>(1e-11) * scale_of(&s) {
        Ok(s)
    } else {
        Err(Error::ProjectionFailed(
            "newton did not reach tolerance within the iteration budget".into(),
        ))
    }
}

/// Unique positive root of q(t) = b t⁴ + c t − N with b > 0, N > 0, c ≤ 0:
/// q(0) < 0 and q is eventually increasing, so bisection is safe.
fn quartic_root<T: Scalar>(b: T, c: T, n: T) -> T {
    let mut hi = (n / b).powf(lit::<T>(0.25)).max(T::one());
    let q = |t: T| b * t.powi(4) + c * t - n;
    let mut grow = 0;
    while q(hi) < T::zero() && grow < 200 {
        hi = hi * lit::<T>(2.0);
        grow += 1;
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * lit::<T>(0.5);
        if q(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= lit::<T>(1e-16) * hi {
            break;
        }
    }
    (lo + hi) * lit::<T>(0.5)
}

/// Gauss–Seidel on the componentwise quartics for nonpositive couplings:
/// t_a solves b_aa t⁴ + (Σ_{b≠a}t_b³ b_ab) t − N_a = 0 given the others.
fn gauss_seidel_scales<T: Scalar>(data: &InteractionData<T>) -> Result<Vec<T>> {
    let q = data.dim();
    let mut t: Vec<T> = (0..q)
        .map(|a| (data.norm(a) / data.mixed(a, a)).powf(lit::<T>(0.25)))
        .collect();
    for sweep in 0..1000 {
        let mut max_change = T::zero();
        for a in 0..q {
            let c = (0..q)
                .filter(|&b| b != a)
                .map(|b| t[b].powi(3) * data.mixed(a, b))
                .fold(T::zero(), |x, y| x + y);
            let root = quartic_root(data.mixed(a, a), c, data.norm(a));
            // Late sweeps damp toward the root to settle oscillation.
            let next = if sweep > 100 {
                (t[a] + root) * lit::<T>(0.5)
            } else {
                root
            };
            max_change = max_change.max((next - t[a]).abs() / next);
            t[a] = next;
        }
        if max_change <= lit::<T>(1e-14) {
            return Ok(t);
        }
    }
    Err(Error::ProjectionFailed(
        "componentwise iteration did not settle within the sweep budget".into(),
    ))
}

/// Projects `u` onto 𝒩_I: returns the scales t, the scaled fields, and a
/// membership report recomputed from the scaled fields.
///
/// Branching: with all in-subset off-diagonal couplings ≥ 0 (or mixed
/// signs), the concave Newton branch runs and requires B ≻ 0 — failure
/// reports [`Error::InteractionIndefinite`] rather than guessing. With all
/// couplings ≤ 0, the componentwise quartic iteration runs instead.
pub fn project_system<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
) -> Result<(Vec<T>, FieldVector<T>, NehariReport<T>)> {
    let data = interaction_data(u, params, subset)?;
    let q = data.dim();
    for a in 0..q {
        if !(data.mixed(a, a) > T::zero()) {
            return Err(Error::ZeroComponent {
                component: data.subset()[a],
            });
        }
        if !(data.norm(a) > T::zero()) {
            return Err(Error::ZeroComponent {
                component: data.subset()[a],
            });
        }
    }

    let all_nonpositive = (0..q).all(|a| (0..q).all(|b| a == b || data.mixed(a, b) <= T::zero()));
    let s_or_t = if q == 1 {
        vec![(data.norm(0) / data.mixed(0, 0)).powf(lit::<T>(0.75))]
    } else if all_nonpositive {
        gauss_seidel_scales(&data)?.iter().map(|&t| t.powi(3)).collect()
    } else {
        newton_scales(&data)?
    };
    let t: Vec<T> = s_or_t.iter().map(|&s| s.powf(lit::<T>(3.0).recip())).collect();

    let mut scaled = u.clone();
    for (pos, &i) in subset.iter().enumerate() {
        scaled.components_mut()[i] = u.component(i).scaled(t[pos]);
    }
    let final_data = interaction_data(&scaled, params, subset)?;
    let report = report_from_data(&final_data, lit(PROJECTION_TOL));
    Ok((t, scaled, report))
}

/// Scales the whole tuple onto the aggregate manifold ℳ:
/// t⁴ = Σ‖u_i‖² / Σ_ij ∫β_ij|u_i|³|u_j|³.
pub fn project_aggregate<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
) -> Result<(T, FieldVector<T>)> {
    let full: Vec<usize> = (0..params.d()).collect();
    let data = interaction_data(u, params, &full)?;
    let d = data.dim();
    let sum_norms = data.norms().iter().fold(T::zero(), |a, &b| a + b);
    let mut sum_mixed = T::zero();
    for a in 0..d {
        for b in 0..d {
            sum_mixed += data.mixed(a, b);
        }
    }
    if !(sum_mixed > T::zero()) {
        return Err(Error::NotScalable {
            value: as_f64(sum_mixed),
        });
    }
    if !(sum_norms > T::zero()) {
        return Err(Error::InvalidParams(
            "aggregate norm must be positive to scale onto the manifold".into(),
        ));
    }
    let t = (sum_norms / sum_mixed).powf(lit::<T>(0.25));
    let scaled_components = u.iter().map(|c| c.scaled(t)).collect();
    Ok((t, FieldVector::new(scaled_components)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{ComponentField, RadialGrid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid() -> Arc<RadialGrid<f64>> {
        RadialGrid::new(1.0, 512).unwrap()
    }

    fn smooth(grid: &Arc<RadialGrid<f64>>, k: f64, amp: f64) -> ComponentField<f64> {
        ComponentField::from_fn_dirichlet(grid, |r| {
            if r == 0.0 {
                amp * k * PI
            } else {
                amp * (k * PI * r).sin() / r
            }
        })
    }

    fn params2(b12: f64) -> ProblemParams<f64> {
        ProblemParams::new(
            1.0,
            vec![-0.5 * PI * PI; 2],
            vec![vec![1.0, b12], vec![b12, 1.0]],
        )
        .unwrap()
    }

    fn pair(g: &Arc<RadialGrid<f64>>) -> FieldVector<f64> {
        FieldVector::new(vec![smooth(g, 1.0, 1.5), smooth(g, 2.0, 1.0)]).unwrap()
    }

    #[test]
    fn interaction_data_is_symmetric_and_positive_on_the_diagonal() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.4);
        let data = interaction_data(&u, &params, &[0, 1]).unwrap();
        assert_eq!(data.mixed(0, 1), data.mixed(1, 0));
        assert!(data.mixed(0, 0) > 0.0 && data.mixed(1, 1) > 0.0);
        assert!(data.norm(0) > 0.0 && data.norm(1) > 0.0);
    }

    #[test]
    fn disjoint_supports_decouple() {
        let g = grid();
        let inner = ComponentField::from_fn_dirichlet(&g, |r| {
            if r < 0.3 {
                (PI * r / 0.3).sin().powi(2)
            } else {
                0.0
            }
        });
        let outer = ComponentField::from_fn_dirichlet(&g, |r| {
            if r > 0.6 {
                (PI * (r - 0.6) / 0.4).sin().powi(2)
            } else {
                0.0
            }
        });
        let params = params2(0.8);
        let u = FieldVector::new(vec![inner.clone(), outer.clone()]).unwrap();
        let data = interaction_data(&u, &params, &[0, 1]).unwrap();
        assert_eq!(data.mixed(0, 1), 0.0);

        let (t, _, report) = project_system(&u, &params, &[0, 1]).unwrap();
        let (t0, _) = project_single(&inner, &params, 0).unwrap();
        let (t1, _) = project_single(&outer, &params, 1).unwrap();
        assert_relative_eq!(t[0], t0, max_relative = 1e-12);
        assert_relative_eq!(t[1], t1, max_relative = 1e-12);
        assert!(report.on_manifold);
    }

    #[test]
    fn single_component_subset_matches_project_single() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.4);
        let (t, _, report) = project_system(&u, &params, &[1]).unwrap();
        let (ts, _) = project_single(u.component(1), &params, 1).unwrap();
        assert_relative_eq!(t[0], ts, max_relative = 1e-13);
        assert!(report.on_manifold);
    }

    #[test]
    fn projection_is_idempotent_and_scale_covariant() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.05);
        let (_, scaled, report) = project_system(&u, &params, &[0, 1]).unwrap();
        assert!(report.on_manifold);
        // t = 1 at a point already on the manifold.
        let (t2, _, _) = project_system(&scaled, &params, &[0, 1]).unwrap();
        assert_relative_eq!(t2[0], 1.0, max_relative = 1e-11);
        assert_relative_eq!(t2[1], 1.0, max_relative = 1e-11);

        // project_single covariance: the projected field ignores input scale.
        let (ta, fa) = project_single(u.component(0), &params, 0).unwrap();
        let (tb, fb) = project_single(&u.component(0).scaled(3.0), &params, 0).unwrap();
        assert_relative_eq!(tb, ta / 3.0, max_relative = 1e-13);
        for (x, y) in fa.values().iter().zip(fb.values()) {
            assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn symmetric_cooperative_projection_matches_the_bisection_oracle() {
        let g = grid();
        let w = smooth(&g, 1.0, 1.2);
        let params = params2(0.01);
        let u = FieldVector::new(vec![w.clone(), w.clone()]).unwrap();
        let data = interaction_data(&u, &params, &[0, 1]).unwrap();
        let (t, _, report) = project_system(&u, &params, &[0, 1]).unwrap();
        assert!(report.on_manifold);
        assert_relative_eq!(t[0], t[1], max_relative = 1e-12);

        // Equal components and equal λ reduce the stationarity system to
        // t²N = t⁶(b_aa + b_ab); bisect the scalar form independently.
        let n = data.norm(0);
        let bsum = data.mixed(0, 0) + data.mixed(0, 1);
        let f = |t: f64| t * t * n - t.powi(6) * bsum;
        let mut lo = 0.5;
        let mut hi = 2.0;
        while f(lo) <= 0.0 {
            lo *= 0.5;
        }
        while f(hi) >= 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert_relative_eq!(t[0], oracle, max_relative = 1e-10);
    }

    #[test]
    fn competitive_projection_converges_and_dominance_margin_is_4n() {
        let g = grid();
        let u = pair(&g);
        let params = params2(-0.3);
        let (t, scaled, report) = project_system(&u, &params, &[0, 1]).unwrap();
        assert!(t.iter().all(|&x| x > 0.0));
        assert!(report.on_manifold, "residuals: {:?}", report.residuals);

        // On 𝒩 with nonpositive couplings, margin_a = 4‖u_a‖² exactly.
        let data = interaction_data(&scaled, &params, &[0, 1]).unwrap();
        let a = matrix_a(&data);
        for i in 0..2 {
            assert_relative_eq!(a.margins[i], 4.0 * data.norm(i), max_relative = 1e-9);
        }
        assert!(a.diagonally_dominant);
    }

    #[test]
    fn cooperative_maximality_certificate() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.05);
        let data = interaction_data(&u, &params, &[0, 1]).unwrap();
        let (t, _, _) = project_system(&u, &params, &[0, 1]).unwrap();
        let center = data.scaling_energy(&t);
        // 5² grid of multiplicative perturbations around t*.
        let factors = [0.98, 0.99, 1.0, 1.01, 1.02];
        for &fa in &factors {
            for &fb in &factors {
                let probe = [t[0] * fa, t[1] * fb];
                let v = data.scaling_energy(&probe);
                assert!(
                    v <= center + 1e-12 * center.abs(),
                    "scaling energy {v} beats the projection value {center} at {probe:?}"
                );
            }
        }
    }

    #[test]
    fn full_set_projection_lands_inside_the_aggregate_manifold() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.1);
        let (_, scaled, _) = project_system(&u, &params, &[0, 1]).unwrap();
        let (t, _) = project_aggregate(&scaled, &params).unwrap();
        assert_relative_eq!(t, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn aggregate_projection_closed_form_and_failure() {
        let g = grid();
        let w = smooth(&g, 1.0, 1.3);
        let zero = ComponentField::zeros(&g);
        let params = params2(0.4);
        // Single nonzero component: t⁴ = ‖u₁‖²/(β₁₁|u₁|₆⁶).
        let u = FieldVector::new(vec![w.clone(), zero]).unwrap();
        let (t, scaled) = project_aggregate(&u, &params).unwrap();
        let n = h1_inner(&w, &w, params.lambda(0)).unwrap();
        let l6 = lp_mixed(&w, &w, 3).unwrap();
        assert_relative_eq!(t, (n / l6).powf(0.25), max_relative = 1e-12);
        assert!(scaled.component(1).values().iter().all(|&v| v == 0.0));

        // Strongly negative coupling with full overlap: nothing to scale onto.
        let strong = params2(-5.0);
        let uu = FieldVector::new(vec![w.clone(), w.clone()]).unwrap();
        assert!(matches!(
            project_aggregate(&uu, &strong),
            Err(Error::NotScalable { .. })
        ));
    }

    #[test]
    fn cooperative_gate_rejects_indefinite_coupling() {
        let g = grid();
        let w = smooth(&g, 1.0, 1.0);
        // Identical components with β₁₂ = 7: B = |w|₆⁶·[[1,7],[7,1]] is indefinite.
        let params = params2(7.0);
        let u = FieldVector::new(vec![w.clone(), w.clone()]).unwrap();
        assert!(matches!(
            project_system(&u, &params, &[0, 1]),
            Err(Error::InteractionIndefinite)
        ));
    }

    #[test]
    fn zero_components_are_rejected() {
        let g = grid();
        let w = smooth(&g, 1.0, 1.0);
        let zero = ComponentField::zeros(&g);
        let params = params2(0.1);
        let u = FieldVector::new(vec![w.clone(), zero.clone()]).unwrap();
        assert!(matches!(
            project_system(&u, &params, &[0, 1]),
            Err(Error::ZeroComponent { component: 1 })
        ));
        assert!(matches!(
            project_single(&zero, &params, 0),
            Err(Error::ZeroComponent { component: 0 })
        ));
        assert!(matches!(
            project_single(&w, &params, 5),
            Err(Error::InvalidSubset(_))
        ));
    }

    #[test]
    fn report_tolerance_semantics() {
        let g = grid();
        let u = pair(&g);
        let params = params2(0.2);
        let report = nehari_report(&u, &params, &[0, 1], 1e-10).unwrap();
        // Unprojected smooth fields are far from the manifold.
        assert!(!report.on_manifold);
        let (_, _, proj_report) = project_system(&u, &params, &[0, 1]).unwrap();
        assert!(proj_report.on_manifold);
        let sum: f64 = proj_report.residuals.iter().map(|r| r.abs()).sum();
        assert!(sum.is_finite());
    }
}
