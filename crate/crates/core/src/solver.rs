//! Descent solvers for the constrained least-energy problems.
//!
//! Three minimizations drive everything downstream: the scalar quotient
//! Q_i = ‖u‖²_{λ_i}/|u|₆² per component (levels m_i), the least energy over
//! the product Nehari set of a subsystem (levels 𝒞_I), and the infimum over
//! the aggregate constraint (the ground level 𝒜). All share one skeleton:
//! a gradient represented in the discrete H₀¹ metric — so that its pairing
//! with any test field reproduces the directional derivative of the
//! *discrete* energy to rounding — componentwise absolute values (the
//! energy is even in each component, so this never increases it), a
//! projection back onto the constraint, and acceptance only on energy
//! decrease. The finite grid regularizes the critical exponent; the
//! concentration detector is the honesty mechanism, flagging iterates whose
//! effective width has collapsed to mesh scale.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bubbles::cutoff_test_field;
use crate::constants::{
    check_admissible, compute_constants, sobolev_tilde, ProblemParams, Regime, WindowVerdict,
};
use crate::error::{Error, Result};
use crate::nehari::{
    interaction_data, nehari_report, project_aggregate, project_single, project_system,
    validate_subset, NehariReport, PROJECTION_TOL,
};
use crate::radial::{h1_inner, lp_mixed, ComponentField, FieldVector, RadialGrid};
use crate::scalar::{as_f64, lit, Scalar};

/// Consecutive near-zero energy decreases before a run is declared stalled.
const STALL_LIMIT: usize = 30;
/// Smallest backtracking step before giving up on the current direction.
const STEP_FLOOR: f64 = 1e-14;
/// Largest step the growth policy may reach.
const STEP_CAP: f64 = 1e3;

/// Iteration budgets and tolerances for the descent loops.
///
/// `Default` matches the resolution the command-line driver uses; every
/// entry point calls [`SolveConfig::validate`] first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Number of radial cells n; the mesh size is h = R/n. At least 256.
    pub grid_cells: usize,
    /// Iteration cap per descent run.
    pub max_iters: usize,
    /// Relative energy decrease under which an accepted step counts toward
    /// the stall limit.
    pub energy_tol: f64,
    /// Relative Nehari residual required of returned iterates.
    pub residual_tol: f64,
    /// Relative preconditioned gradient norm that declares convergence.
    pub gradient_tol: f64,
    /// Backtracking factor for rejected steps, in (0, 1).
    pub step_shrink: f64,
    /// Growth factor applied to the step after accepted ones, ≥ 1.
    pub step_grow: f64,
    /// Which family of initial iterates the system minimizers run.
    pub init: InitRecipe,
    /// Seed for the randomized extra start.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            grid_cells: 2048,
            max_iters: 20_000,
            energy_tol: 1e-11,
            residual_tol: 1e-8,
            gradient_tol: 1e-6,
            step_shrink: 0.5,
            step_grow: 1.5,
            init: InitRecipe::Auto,
            seed: 42,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_cells < 256 {
            return Err(Error::InvalidConfig(format!(
                "grid_cells = {}; need at least 256 cells",
                self.grid_cells
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        for (name, value) in [
            ("energy_tol", self.energy_tol),
            ("residual_tol", self.residual_tol),
            ("gradient_tol", self.gradient_tol),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "step_shrink must lie in (0, 1), got {}",
                self.step_shrink
            )));
        }
        if !(self.step_grow >= 1.0 && self.step_grow.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_grow must be at least 1, got {}",
                self.step_grow
            )));
        }
        Ok(())
    }
}

/// Families of initial iterates for the system minimizers.
///
/// `Auto` picks by coupling sign: every run starts from the projected
/// product of scalar minimizers plus one seeded multiplicative perturbation
/// of it; cooperative systems add equal-scale concentrated bubbles, while
/// competitive (and mixed) systems add scale-separated bubbles — in the
/// radial reduction, separation of concentration scales is the available
/// substitute for spatial segregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRecipe {
    Auto,
    /// Equal-scale cutoff bubbles on every component.
    Bubble,
    /// Bubbles with geometrically separated concentration scales.
    TwoScale,
}

/// Which variational level a [`SolveResult`] reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    /// m_i: the scalar least-energy level of component i alone.
    Single(usize),
    /// 𝒞_I for the listed components (ascending indices).
    Subsystem(Vec<usize>),
    /// The ground level 𝒜; `nontrivial` records whether every component
    /// cleared the L⁶ floor.
    Ground { nontrivial: bool },
}

/// Mesh-resolution diagnostic.
///
/// On the bubble family the ratio √3·|u|₆²/(S̃^{1/2}|u|∞²) equals the
/// concentration scale exactly, so it serves as an effective-width estimate
/// ε̂ for arbitrary fields. Anything narrower than four cells is
/// indistinguishable from a mesh artifact: the flag marks the result as not
/// converged in the continuum. On the ball this is precisely the signature
/// of λ at the nonexistence end of the window.
#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport<T> {
    /// ε̂ per component; zero components report the domain radius.
    pub effective_width: Vec<T>,
    /// ε̂/h per component.
    pub mesh_ratio: Vec<T>,
    /// ε̂ < 4h, per component.
    pub flagged: Vec<bool>,
    /// True when any nonzero component is flagged.
    pub concentrated: bool,
}

/// Outcome of one constrained minimization.
#[derive(Clone, Debug, Serialize)]
pub struct SolveResult<T> {
    /// Radial profiles, always with one entry per system component;
    /// components outside the solved subset are identically zero.
    #[serde(skip)]
    pub fields: FieldVector<T>,
    /// The reported level, (1/3)Σ‖u_i‖² at the final iterate.
    pub level: T,
    pub kind: LevelKind,
    /// The scalar quotient Q_i (present on `Single` runs).
    pub quotient: Option<T>,
    /// Constraint residuals and interaction-matrix diagnostics at the end.
    pub nehari: NehariReport<T>,
    pub concentration: ConcentrationReport<T>,
    /// Descent iterations spent on the returned start.
    pub iterations: usize,
    /// True when a stop criterion other than the iteration cap fired.
    pub converged: bool,
    /// Sign pattern of the couplings actually solved (the restricted
    /// system's, for subsystem runs). `Mixed` marks results outside the
    /// proven existence regimes.
    pub regime: Regime,
}

/// Scalar least-energy data for every component, solved on one shared grid.
#[derive(Clone, Debug)]
pub struct ScalarLevels<T> {
    pub results: Vec<SolveResult<T>>,
    /// Levels m_i = (1/3)β_ii^{−1/2}Q_i^{3/2}.
    pub m: Vec<T>,
    /// Attained quotients Q_i.
    pub quotients: Vec<T>,
    /// S = min_i Q_i, the quotient entering the L⁶ floors.
    pub s_quotient: T,
}

impl<T: Scalar> ScalarLevels<T> {
    /// The solved profile ω_i.
    pub fn omega(&self, i: usize) -> &ComponentField<T> {
        self.results[i].fields.component(i)
    }

    /// True when any scalar solve hit the mesh-resolution flag.
    pub fn concentrated(&self) -> bool {
        self.results.iter().any(|r| r.concentration.concentrated)
    }
}

/// J_I(u) = (1/2)Σ‖u_i‖² − (1/6)ΣΣ∫β_ij|u_i|³|u_j|³ over the subset.
pub fn energy<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
) -> Result<T> {
    let data = interaction_data(u, params, subset)?;
    let ones = vec![T::one(); data.dim()];
    Ok(data.scaling_energy(&ones))
}

/// The H₀¹ representative of dJ(u): component i solves
/// K g_i = K u_i + λ_i W u_i − W f_i with f_i = Σ_j β_ij|u_j|³|u_i|u_i,
/// where K is the Dirichlet stiffness form and W the volume quadrature.
/// Both sides use the same discrete forms as [`energy`], so
/// Σ_i ⟨g_i, v_i⟩_{H₀¹} equals the directional derivative of the discrete
/// energy exactly (to rounding), and descent in this metric behaves
/// mesh-independently.
pub fn gradient<T: Scalar>(u: &FieldVector<T>, params: &ProblemParams<T>) -> Result<FieldVector<T>> {
    let all: Vec<usize> = (0..params.d()).collect();
    let (g, _, _) = preconditioned_gradient(u, params, &all)?;
    Ok(g)
}

/// Gradient restricted to `subset` (other components zero), plus the squared
/// H₀¹ norms of the gradient and of the iterate over the subset.
fn preconditioned_gradient<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
) -> Result<(FieldVector<T>, T, T)> {
    let d = params.d();
    if u.len() != d {
        return Err(Error::FieldLength {
            expected: d,
            got: u.len(),
        });
    }
    let grid = u.grid().clone();
    let n = grid.n();
    let cubes: Vec<Vec<T>> = u
        .iter()
        .map(|c| c.values().iter().map(|&v| v.abs().powi(3)).collect())
        .collect();
    let mut components = Vec::with_capacity(d);
    let mut gnorm2 = T::zero();
    let mut unorm2 = T::zero();
    for i in 0..d {
        if !subset.contains(&i) {
            components.push(ComponentField::zeros(&grid));
            continue;
        }
        let ui = u.component(i).values();
        let mut rhs = vec![T::zero(); n];
        for k in 0..n {
            let mut coupling = T::zero();
            for (j, cube) in cubes.iter().enumerate() {
                coupling += params.beta(i, j) * cube[k];
            }
            let f = ui[k].abs() * ui[k] * coupling;
            rhs[k] = grid.vol_weight(k) * (params.lambda(i) * ui[k] - f);
        }
        let x = grid.solve_stiffness(&rhs);
        let mut values = Vec::with_capacity(n + 1);
        for k in 0..n {
            values.push(ui[k] + x[k]);
        }
        values.push(ui[n]);
        let g = ComponentField::from_values(&grid, values)?;
        gnorm2 += h1_inner(&g, &g, T::zero())?;
        unorm2 += h1_inner(u.component(i), u.component(i), T::zero())?;
        components.push(g);
    }
    Ok((FieldVector::new(components)?, gnorm2, unorm2))
}

/// Effective-width diagnostic for every component; see
/// [`ConcentrationReport`] for the convention.
pub fn detect_concentration<T: Scalar>(u: &FieldVector<T>) -> ConcentrationReport<T> {
    let grid = u.grid();
    let h = grid.spacing();
    let sqrt_s = sobolev_tilde::<T>().s_tilde.sqrt();
    let sqrt3 = lit::<T>(3.0).sqrt();
    let threshold = lit::<T>(4.0) * h;
    let mut effective_width = Vec::with_capacity(u.len());
    let mut mesh_ratio = Vec::with_capacity(u.len());
    let mut flagged = Vec::with_capacity(u.len());
    let mut concentrated = false;
    for comp in u.iter() {
        let linf = comp.linf();
        let (eps_hat, flag) = if linf > T::zero() {
            let l6 = lp_mixed(comp, comp, 3).expect("component and grid agree");
            let eps_hat = sqrt3 * l6.cbrt() / (sqrt_s * linf * linf);
            (eps_hat, eps_hat < threshold)
        } else {
            (grid.radius(), false)
        };
        concentrated |= flag;
        effective_width.push(eps_hat);
        mesh_ratio.push(eps_hat / h);
        flagged.push(flag);
    }
    ConcentrationReport {
        effective_width,
        mesh_ratio,
        flagged,
        concentrated,
    }
}

/// Least energy of the scalar problem for component i: minimizes the
/// quotient Q(u) = ‖u‖²_{λ_i}/|u|₆² by preconditioned descent from a
/// cutoff-bubble start, then scales the minimizer onto its Nehari set.
///
/// λ_i ≤ −λ₁ is rejected (the quadratic form degenerates); λ_i above the
/// window runs to the mesh floor and comes back with the concentration flag
/// set — on the ball that is the nonexistence signature, not an error.
pub fn solve_single<T: Scalar>(
    params: &ProblemParams<T>,
    i: usize,
    config: &SolveConfig,
) -> Result<SolveResult<T>> {
    config.validate()?;
    let grid = RadialGrid::new(params.radius(), config.grid_cells)?;
    solve_single_on(&grid, params, i, config)
}

pub(crate) fn solve_single_on<T: Scalar>(
    grid: &Arc<RadialGrid<T>>,
    params: &ProblemParams<T>,
    i: usize,
    config: &SolveConfig,
) -> Result<SolveResult<T>> {
    if i >= params.d() {
        return Err(Error::InvalidSubset(format!(
            "component {i} out of range for d = {}",
            params.d()
        )));
    }
    let adm = check_admissible(params)?;
    if adm.components[i].verdict == WindowVerdict::BelowWindow {
        return Err(Error::Inadmissible {
            component: i,
            lambda: as_f64(params.lambda(i)),
            lo: as_f64(adm.window.0),
            hi: as_f64(adm.window.1),
        });
    }
    let lambda = params.lambda(i);
    let beta = params.beta(i, i);

    let eps0 = grid.radius() / lit::<T>(8.0);
    let mut u = normalized_l6(&cutoff_test_field(eps0, grid)?)
        .ok_or_else(|| Error::ZeroComponent { component: i })?;
    let mut q = h1_inner(&u, &u, lambda)?;

    let gradient_tol = lit::<T>(config.gradient_tol);
    let energy_tol = lit::<T>(config.energy_tol);
    let shrink = lit::<T>(config.step_shrink);
    let grow = lit::<T>(config.step_grow);
    let step_floor = lit::<T>(STEP_FLOOR);
    let step_cap = lit::<T>(STEP_CAP);
    let mut tau = T::one();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut stall = 0usize;

    while iterations < config.max_iters {
        iterations += 1;
        let (g, gnorm2, unorm2) = quotient_gradient(grid, &u, lambda, q)?;
        if gnorm2 <= gradient_tol * gradient_tol * unorm2 {
            converged = true;
            break;
        }
        let q_before = q;

        // Backtracking step on the quotient.
        let mut stepped = false;
        while tau >= step_floor {
            let trial: Vec<T> = u
                .values()
                .iter()
                .zip(g.values())
                .map(|(&a, &b)| (a - tau * b).abs())
                .collect();
            let trial = ComponentField::from_values(grid, trial)?;
            if let Some(v) = normalized_l6(&trial) {
                let qv = h1_inner(&v, &v, lambda)?;
                if qv.is_finite() && qv < q {
                    u = v;
                    q = qv;
                    tau = (tau * grow).min(step_cap);
                    stepped = true;
                    break;
                }
            }
            tau = tau * shrink;
        }
        if !stepped {
            tau = T::one();
        }

        // Inverse-type update: the fixed point of p ↦ (K+λW)⁻¹(q·W|p|⁴p),
        // L⁶-normalized, is the discrete minimizer; one application per
        // iteration contracts much faster than the gradient step alone.
        if let Some((p, qp)) = picard_candidate(grid, &u, lambda, q)? {
            if qp < q {
                u = p;
                q = qp;
            }
        }

        if q_before - q <= energy_tol * q_before {
            stall += 1;
            if stall >= STALL_LIMIT {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }

    let (_, omega) = project_single(&u, params, i)?;
    let m = h1_inner(&omega, &omega, lambda)? / lit::<T>(3.0);
    // Closed-form consistency of the two routes to the level.
    debug_assert!({
        let alg = q.powf(lit::<T>(1.5)) / (lit::<T>(3.0) * beta.sqrt());
        (m - alg).abs() <= lit::<T>(1e-8) * m
    });

    let components: Vec<ComponentField<T>> = (0..params.d())
        .map(|j| {
            if j == i {
                omega.clone()
            } else {
                ComponentField::zeros(grid)
            }
        })
        .collect();
    let fields = FieldVector::new(components)?;
    let subset = [i];
    let nehari = nehari_report(&fields, params, &subset, lit::<T>(PROJECTION_TOL))?;
    let concentration = detect_concentration(&fields);
    Ok(SolveResult {
        fields,
        level: m,
        kind: LevelKind::Single(i),
        quotient: Some(q),
        nehari,
        concentration,
        iterations,
        converged,
        regime: params.regime(),
    })
}

/// Runs [`solve_single`] for every component on one shared grid.
pub fn scalar_levels<T: Scalar>(
    params: &ProblemParams<T>,
    config: &SolveConfig,
) -> Result<ScalarLevels<T>> {
    config.validate()?;
    let grid = RadialGrid::new(params.radius(), config.grid_cells)?;
    scalar_levels_on(&grid, params, config)
}

fn scalar_levels_on<T: Scalar>(
    grid: &Arc<RadialGrid<T>>,
    params: &ProblemParams<T>,
    config: &SolveConfig,
) -> Result<ScalarLevels<T>> {
    let mut results = Vec::with_capacity(params.d());
    for i in 0..params.d() {
        results.push(solve_single_on(grid, params, i, config)?);
    }
    let m: Vec<T> = results.iter().map(|r| r.level).collect();
    let quotients: Vec<T> = results
        .iter()
        .map(|r| r.quotient.expect("single solves report quotients"))
        .collect();
    let s_quotient = quotients
        .iter()
        .fold(T::infinity(), |acc, &v| acc.min(v));
    Ok(ScalarLevels {
        results,
        m,
        quotients,
        s_quotient,
    })
}

/// Least energy over the product Nehari set of `subset`: preconditioned
/// gradient steps, componentwise absolute value, re-projection, acceptance
/// only on decrease, run from the start family of [`InitRecipe`] with the
/// best survivor returned.
///
/// Returned iterates satisfy the constraint residuals to the projection
/// tolerance and the per-component L⁶ floors of the applicable regime
/// (cooperative/decoupled: C₁; competitive: C₃ less a 10⁻³ relative
/// allowance, exact equality being attained in the decoupled limit). A
/// start whose components dip below the floor is discarded; if every start
/// does, the last collapse is reported.
pub fn minimize_on_nehari<T: Scalar>(
    params: &ProblemParams<T>,
    subset: &[usize],
    config: &SolveConfig,
) -> Result<SolveResult<T>> {
    config.validate()?;
    validate_subset(subset, params.d())?;
    let adm = check_admissible(params)?;
    for &i in subset {
        if adm.components[i].verdict != WindowVerdict::Inside {
            return Err(Error::Inadmissible {
                component: i,
                lambda: as_f64(params.lambda(i)),
                lo: as_f64(adm.window.0),
                hi: as_f64(adm.window.1),
            });
        }
    }
    let grid = RadialGrid::new(params.radius(), config.grid_cells)?;
    let restricted = params.restricted(subset)?;
    let regime = restricted.regime();

    let mut singles = Vec::with_capacity(subset.len());
    for &i in subset {
        singles.push(solve_single_on(&grid, params, i, config)?);
    }
    let m: Vec<T> = singles.iter().map(|r| r.level).collect();
    let s_quotient = singles
        .iter()
        .map(|r| r.quotient.expect("single solves report quotients"))
        .fold(T::infinity(), |acc, v| acc.min(v));
    let consts = compute_constants(&restricted, &m, s_quotient)?;
    let floor = match regime {
        Regime::Cooperative | Regime::Decoupled => consts.c1,
        Regime::Competitive => consts.c3 * lit::<T>(1.0 - 1e-3),
        // Outside the proven regimes no floor lemma applies; rely on the
        // zero-component guard in the projection instead.
        Regime::Mixed => T::zero(),
    };

    let starts = build_starts(&grid, params, subset, &singles, regime, config)?;
    let mut best: Option<Candidate<T>> = None;
    let mut last_err: Option<Error> = None;
    for start in &starts {
        match descend_nehari(start, params, subset, config, floor) {
            Ok(cand) => {
                if best.as_ref().map_or(true, |b| cand.level < b.level) {
                    best = Some(cand);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            return Err(last_err
                .unwrap_or_else(|| Error::ProjectionFailed("no start produced an iterate".into())))
        }
    };

    let concentration = detect_concentration(&best.fields);
    Ok(SolveResult {
        level: best.level,
        kind: LevelKind::Subsystem(subset.to_vec()),
        quotient: None,
        nehari: best.report,
        concentration,
        iterations: best.iterations,
        converged: best.converged,
        regime,
        fields: best.fields,
    })
}

/// Ground level: minimizes the scale-invariant quotient
/// (1/3)(Σ‖u_i‖²)^{3/2}/(ΣΣ∫β_ij|u_i|³|u_j|³)^{1/2} over nonzero field
/// vectors, i.e. J on the aggregate constraint. Starts: one semitrivial
/// start per component (these stay semitrivial — the gradient of a zero
/// component vanishes identically), the product of scalar minimizers, a
/// symmetric bubble, and a seeded perturbation. The best survivor is
/// labeled nontrivial exactly when every component clears the C₁ floor.
///
/// Requires nonnegative couplings (the attainment regime); mixed or
/// competitive signs are rejected as outside the aggregate theory.
pub fn minimize_on_aggregate<T: Scalar>(
    params: &ProblemParams<T>,
    config: &SolveConfig,
) -> Result<SolveResult<T>> {
    config.validate()?;
    let regime = params.regime();
    if !matches!(regime, Regime::Cooperative | Regime::Decoupled) {
        return Err(Error::RegimeViolated(
            "the aggregate (ground-state) level requires nonnegative couplings".into(),
        ));
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

    let grid = RadialGrid::new(params.radius(), config.grid_cells)?;
    let scalars = scalar_levels_on(&grid, params, config)?;
    let consts = compute_constants(params, &scalars.m, scalars.s_quotient)?;
    let d = params.d();
    let full: Vec<usize> = (0..d).collect();

    let mut starts: Vec<FieldVector<T>> = Vec::new();
    for i in 0..d {
        starts.push(scalars.results[i].fields.clone());
    }
    let product = FieldVector::new(
        (0..d)
            .map(|i| scalars.omega(i).clone())
            .collect::<Vec<_>>(),
    )?;
    starts.push(product.clone());
    let bubble = cutoff_test_field(grid.radius() / lit::<T>(8.0), &grid)?;
    starts.push(FieldVector::new(vec![bubble; d])?);
    starts.push(perturb(&product, config.seed));

    let mut best: Option<Candidate<T>> = None;
    let mut last_err: Option<Error> = None;
    for start in &starts {
        match descend_aggregate(start, params, config) {
            Ok(cand) => {
                if best.as_ref().map_or(true, |b| cand.level < b.level) {
                    best = Some(cand);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = match best {
        Some(b) => b,
        // Should not occur for admissible cooperative data; it signals a
        // step-policy failure.
        None => {
            return Err(last_err.unwrap_or(Error::NoConvergence {
                iters: config.max_iters,
                gradient: f64::NAN,
                decrease: 0.0,
            }))
        }
    };

    let nontrivial = best
        .fields
        .iter()
        .map(|c| lp_mixed(c, c, 3))
        .collect::<Result<Vec<T>>>()?
        .iter()
        .all(|&l6| l6 >= consts.c1);
    let report = nehari_report(&best.fields, params, &full, lit::<T>(PROJECTION_TOL))?;
    let concentration = detect_concentration(&best.fields);
    Ok(SolveResult {
        level: best.level,
        kind: LevelKind::Ground { nontrivial },
        quotient: None,
        nehari: report,
        concentration,
        iterations: best.iterations,
        converged: best.converged,
        regime,
        fields: best.fields,
    })
}

struct Candidate<T> {
    fields: FieldVector<T>,
    level: T,
    report: NehariReport<T>,
    iterations: usize,
    converged: bool,
}

fn build_starts<T: Scalar>(
    grid: &Arc<RadialGrid<T>>,
    params: &ProblemParams<T>,
    subset: &[usize],
    singles: &[SolveResult<T>],
    regime: Regime,
    config: &SolveConfig,
) -> Result<Vec<FieldVector<T>>> {
    let d = params.d();
    let assemble = |profiles: Vec<(usize, ComponentField<T>)>| -> Result<FieldVector<T>> {
        let mut comps: Vec<ComponentField<T>> =
            (0..d).map(|_| ComponentField::zeros(grid)).collect();
        for (i, f) in profiles {
            comps[i] = f;
        }
        FieldVector::new(comps)
    };

    let product = assemble(
        subset
            .iter()
            .enumerate()
            .map(|(pos, &i)| (i, singles[pos].fields.component(i).clone()))
            .collect(),
    )?;

    let bubble_start = || -> Result<FieldVector<T>> {
        let w = cutoff_test_field(grid.radius() / lit::<T>(8.0), grid)?;
        assemble(subset.iter().map(|&i| (i, w.clone())).collect())
    };
    let two_scale_start = || -> Result<FieldVector<T>> {
        let min_eps = lit::<T>(10.0) * grid.spacing();
        let profiles = subset
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let eps = (grid.radius() / lit::<T>(6.0))
                    * lit::<T>(3.0).powi(-(pos as i32));
                cutoff_test_field(eps.max(min_eps), grid).map(|w| (i, w))
            })
            .collect::<Result<Vec<_>>>()?;
        assemble(profiles)
    };

    let mut starts = Vec::new();
    match config.init {
        InitRecipe::Bubble => starts.push(bubble_start()?),
        InitRecipe::TwoScale => starts.push(two_scale_start()?),
        InitRecipe::Auto => {
            starts.push(product.clone());
            starts.push(perturb(&product, config.seed));
            match regime {
                Regime::Cooperative | Regime::Decoupled => starts.push(bubble_start()?),
                Regime::Competitive | Regime::Mixed => {
                    starts.push(two_scale_start()?);
                    starts.push(bubble_start()?);
                }
            }
        }
    }
    Ok(starts)
}

/// Multiplies each component by a seeded factor in [0.85, 1.15]; zero
/// components stay zero, so this respects semitrivial structure.
fn perturb<T: Scalar>(u: &FieldVector<T>, seed: u64) -> FieldVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<ComponentField<T>> = u
        .iter()
        .map(|c| {
            let factor = lit::<T>(0.85 + 0.3 * rng.gen::<f64>());
            c.scaled(factor)
        })
        .collect();
    FieldVector::new(comps).expect("perturbation preserves the grid")
}

fn descend_nehari<T: Scalar>(
    start: &FieldVector<T>,
    params: &ProblemParams<T>,
    subset: &[usize],
    config: &SolveConfig,
    floor: T,
) -> Result<Candidate<T>> {
    let (_, mut u, mut report) = project_system(start, params, subset)?;
    let mut j = energy(&u, params, subset)?;
    let gradient_tol = lit::<T>(config.gradient_tol);
    let energy_tol = lit::<T>(config.energy_tol);
    let shrink = lit::<T>(config.step_shrink);
    let grow = lit::<T>(config.step_grow);
    let step_floor = lit::<T>(STEP_FLOOR);
    let step_cap = lit::<T>(STEP_CAP);
    let mut tau = T::one();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut stall = 0usize;

    while iterations < config.max_iters {
        iterations += 1;
        let (g, gnorm2, unorm2) = preconditioned_gradient(&u, params, subset)?;
        if gnorm2 <= gradient_tol * gradient_tol * unorm2 {
            converged = true;
            break;
        }
        let j_before = j;
        let mut accepted = false;
        while tau >= step_floor {
            let trial = step_abs(&u, &g, tau, subset)?;
            if subset
                .iter()
                .any(|&i| !(trial.component(i).linf() > T::zero()))
            {
                tau = tau * shrink;
                continue;
            }
            if let Ok((_, v, rep)) = project_system(&trial, params, subset) {
                let jv = energy(&v, params, subset)?;
                if jv.is_finite() && jv < j {
                    debug_assert!(jv <= j, "descent must be monotone");
                    u = v;
                    report = rep;
                    j = jv;
                    tau = (tau * grow).min(step_cap);
                    accepted = true;
                    break;
                }
            }
            tau = tau * shrink;
        }
        if !accepted {
            // No projectable decrease at the step floor: numerically a
            // constrained minimizer.
            converged = true;
            break;
        }
        if j_before - j <= energy_tol * j_before.abs() {
            stall += 1;
            if stall >= STALL_LIMIT {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }

    for &i in subset {
        let l6 = lp_mixed(u.component(i), u.component(i), 3)?;
        if l6 < floor {
            return Err(Error::ComponentCollapse {
                component: i,
                value: as_f64(l6),
                floor: as_f64(floor),
            });
        }
    }

    let data = interaction_data(&u, params, subset)?;
    let level = data.norms().iter().fold(T::zero(), |a, &b| a + b) / lit::<T>(3.0);
    debug_assert!(
        (j - level).abs() <= lit::<T>(1e-8) * level.abs().max(T::one()),
        "level identity violated on the Nehari set"
    );
    Ok(Candidate {
        fields: u,
        level,
        report,
        iterations,
        converged,
    })
}

fn descend_aggregate<T: Scalar>(
    start: &FieldVector<T>,
    params: &ProblemParams<T>,
    config: &SolveConfig,
) -> Result<Candidate<T>> {
    let full: Vec<usize> = (0..params.d()).collect();
    let (_, mut u) = project_aggregate(start, params)?;
    let mut j = aggregate_level(&u, params, &full)?;
    let gradient_tol = lit::<T>(config.gradient_tol);
    let energy_tol = lit::<T>(config.energy_tol);
    let shrink = lit::<T>(config.step_shrink);
    let grow = lit::<T>(config.step_grow);
    let step_floor = lit::<T>(STEP_FLOOR);
    let step_cap = lit::<T>(STEP_CAP);
    let mut tau = T::one();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut stall = 0usize;

    while iterations < config.max_iters {
        iterations += 1;
        let (g, gnorm2, unorm2) = preconditioned_gradient(&u, params, &full)?;
        if gnorm2 <= gradient_tol * gradient_tol * unorm2 {
            converged = true;
            break;
        }
        let j_before = j;
        let mut accepted = false;
        while tau >= step_floor {
            let trial = step_abs(&u, &g, tau, &full)?;
            if trial.iter().all(|c| !(c.linf() > T::zero())) {
                tau = tau * shrink;
                continue;
            }
            if let Ok((_, v)) = project_aggregate(&trial, params) {
                let jv = aggregate_level(&v, params, &full)?;
                if jv.is_finite() && jv < j {
                    u = v;
                    j = jv;
                    tau = (tau * grow).min(step_cap);
                    accepted = true;
                    break;
                }
            }
            tau = tau * shrink;
        }
        if !accepted {
            converged = true;
            break;
        }
        if j_before - j <= energy_tol * j_before.abs() {
            stall += 1;
            if stall >= STALL_LIMIT {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(Candidate {
        level: j,
        report: nehari_report(&u, params, &full, lit::<T>(PROJECTION_TOL))?,
        fields: u,
        iterations,
        converged,
    })
}

/// (1/3)Σ‖u_i‖² — equals J on the aggregate constraint.
fn aggregate_level<T: Scalar>(
    u: &FieldVector<T>,
    params: &ProblemParams<T>,
    full: &[usize],
) -> Result<T> {
    let data = interaction_data(u, params, full)?;
    Ok(data.norms().iter().fold(T::zero(), |a, &b| a + b) / lit::<T>(3.0))
}

/// |u − τg| on the subset components, zero elsewhere.
fn step_abs<T: Scalar>(
    u: &FieldVector<T>,
    g: &FieldVector<T>,
    tau: T,
    subset: &[usize],
) -> Result<FieldVector<T>> {
    let grid = u.grid().clone();
    let comps: Vec<ComponentField<T>> = (0..u.len())
        .map(|i| {
            if subset.contains(&i) {
                let values: Vec<T> = u
                    .component(i)
                    .values()
                    .iter()
                    .zip(g.component(i).values())
                    .map(|(&a, &b)| (a - tau * b).abs())
                    .collect();
                ComponentField::from_values(&grid, values)
            } else {
                Ok(ComponentField::zeros(&grid))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FieldVector::new(comps)
}

/// Scales to ∫u⁶ = 1; `None` when the field vanishes identically.
fn normalized_l6<T: Scalar>(u: &ComponentField<T>) -> Option<ComponentField<T>> {
    let l6 = lp_mixed(u, u, 3).ok()?;
    if !(l6 > T::zero()) || !l6.is_finite() {
        return None;
    }
    Some(u.scaled(l6.powf(lit::<T>(-1.0 / 6.0))))
}

/// K-preconditioned gradient of the quotient at an ∫u⁶ = 1 iterate with
/// current value q: g = u + K⁻¹(λWu − qW|u|⁴u). Returns (g, ‖g‖²_K, ‖u‖²_K).
fn quotient_gradient<T: Scalar>(
    grid: &Arc<RadialGrid<T>>,
    u: &ComponentField<T>,
    lambda: T,
    q: T,
) -> Result<(ComponentField<T>, T, T)> {
    let n = grid.n();
    let uv = u.values();
    let mut rhs = vec![T::zero(); n];
    for k in 0..n {
        let v = uv[k];
        rhs[k] = grid.vol_weight(k) * (lambda * v - q * v.abs().powi(4) * v);
    }
    let x = grid.solve_stiffness(&rhs);
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..n {
        values.push(uv[k] + x[k]);
    }
    values.push(uv[n]);
    let g = ComponentField::from_values(grid, values)?;
    let gnorm2 = h1_inner(&g, &g, T::zero())?;
    let unorm2 = h1_inner(u, u, T::zero())?;
    Ok((g, gnorm2, unorm2))
}

/// One inverse-iteration candidate: solve (K + λW)p = q·W(|u|⁴u) and
/// normalize. `None` when the update degenerates.
fn picard_candidate<T: Scalar>(
    grid: &Arc<RadialGrid<T>>,
    u: &ComponentField<T>,
    lambda: T,
    q: T,
) -> Result<Option<(ComponentField<T>, T)>> {
    let n = grid.n();
    let uv = u.values();
    let rhs: Vec<T> = (0..n)
        .map(|k| {
            let v = uv[k];
            grid.vol_weight(k) * q * v.abs().powi(4) * v
        })
        .collect();
    let x = grid.solve_shifted(lambda, &rhs);
    let mut values = x;
    values.push(T::zero());
    let p = ComponentField::from_values(grid, values)?;
    match normalized_l6(&p) {
        Some(p) => {
            let qp = h1_inner(&p, &p, lambda)?;
            if qp.is_finite() {
                Ok(Some((p, qp)))
            } else {
                Ok(None)
            }
        }
        None => Ok(None),
    }
}
