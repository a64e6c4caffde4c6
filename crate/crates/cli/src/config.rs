//! The run configuration document.
//!
//! One TOML file fully determines a run: problem parameters, solver
//! settings, and the per-mode sections. Command-line flags layer on top
//! (`--grid` and `--seed` override the solver settings, `--out` the output
//! directory), and the subcommand names the mode; [`RunConfig::normalize`]
//! folds all of that in and fills the remaining defaults, so the
//! configuration echoed into the manifest is complete and reproduces the
//! run without the original flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nehari_lab::constants::ProblemParams;
use nehari_lab::solver::SolveConfig;
use nehari_lab::Real;

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Constants,
    Solve,
    Verify,
    Expansion,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Constants => "constants",
            Mode::Solve => "solve",
            Mode::Verify => "verify",
            Mode::Expansion => "expansion",
            Mode::Sweep => "sweep",
        }
    }
}

/// Everything a run needs. Unknown keys are rejected so typos fail loudly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Filled in from the subcommand when absent; must agree when present.
    pub mode: Option<Mode>,
    /// Output directory; `runs/<mode>` when omitted.
    pub out: Option<PathBuf>,
    /// Convenience override applied to `solve.seed` (the `--seed` flag wins
    /// over both).
    pub seed: Option<u64>,
    pub params: ParamsConfig,
    pub solve: SolveConfig,
    pub verify: VerifyConfig,
    pub expansion: ExpansionConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            out: None,
            seed: None,
            params: ParamsConfig::default(),
            solve: SolveConfig::default(),
            verify: VerifyConfig::default(),
            expansion: ExpansionConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Problem data: the ball radius, one λ per component, and the full
/// symmetric coupling matrix, row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub radius: f64,
    pub lambda: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl Default for ParamsConfig {
    /// Two decoupled components on the unit ball, λ in the middle of the
    /// admissible window.
    fn default() -> Self {
        let lambda = -0.5 * std::f64::consts::PI.powi(2);
        Self {
            radius: 1.0,
            lambda: vec![lambda, lambda],
            beta: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }
}

impl ParamsConfig {
    /// Symmetry, positivity, and shape checks all live in the core
    /// constructor; this only pins the failure to the `params` section.
    pub fn build(&self) -> Result<ProblemParams<Real>, Failure> {
        ProblemParams::new(self.radius, self.lambda.clone(), self.beta.clone())
            .map_err(|e| Failure::Config(format!("params: {e}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Check names to run; empty means the whole standard suite.
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Bubble widths ε to tabulate; each must be resolvable on the run's
    /// grid (ε ≥ 10h).
    pub epsilons: Vec<f64>,
}

impl Default for ExpansionConfig {
    /// Twelve log-spaced widths in [6×10⁻³, 6×10⁻²]: resolvable on the
    /// default 2048-cell unit ball, wide enough to fit the ε-expansions.
    fn default() -> Self {
        let epsilons = (0..12)
            .map(|k| 6e-3 * 10f64.powf(k as f64 / 11.0))
            .collect();
        Self { epsilons }
    }
}

/// One point of a coupling sweep: either a plain number or a multiple of
/// the computed weak-coupling threshold K, written like `"0.9K"`. The
/// string form is kept verbatim so the manifest echoes the document byte
/// for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Threshold(String),
}

impl SweepValue {
    /// The K-multiple encoded by a threshold token, if it parses.
    fn threshold_factor(token: &str) -> Option<f64> {
        let prefix = token.trim().strip_suffix('K')?;
        if prefix.is_empty() {
            return Some(1.0);
        }
        prefix.parse().ok().filter(|f: &f64| f.is_finite())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        match self {
            SweepValue::Number(x) if x.is_finite() => Ok(()),
            SweepValue::Number(x) => Err(Failure::Config(format!(
                "sweep.values: coupling must be finite, got {x}"
            ))),
            SweepValue::Threshold(s) => Self::threshold_factor(s).map(|_| ()).ok_or_else(|| {
                Failure::Config(format!(
                    "sweep.values: \"{s}\" is neither a number nor a multiple of K like \"0.9K\""
                ))
            }),
        }
    }

    /// True when resolving this value needs the computed threshold K.
    pub fn needs_threshold(&self) -> bool {
        matches!(self, SweepValue::Threshold(_))
    }

    /// The numeric coupling, given the threshold K.
    pub fn resolve(&self, k: f64) -> f64 {
        match self {
            SweepValue::Number(x) => *x,
            SweepValue::Threshold(s) => {
                Self::threshold_factor(s).expect("validated at load time") * k
            }
        }
    }

    /// The token as written in the document, for summary tables.
    pub fn token(&self) -> String {
        match self {
            SweepValue::Number(x) => format!("{x}"),
            SweepValue::Threshold(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Indices `[i, j]`, i ≠ j, of the off-diagonal coupling to sweep.
    pub pair: [usize; 2],
    /// Couplings to visit, one solve run each.
    pub values: Vec<SweepValue>,
    /// Concurrent solve runs; 0 means one per value, capped by the machine.
    pub workers: usize,
}

impl Default for SweepConfig {
    /// β₁₂ across both coupling signs: repulsive, mildly repulsive, and two
    /// weakly cooperative points below the threshold K.
    fn default() -> Self {
        Self {
            pair: [0, 1],
            values: vec![
                SweepValue::Number(-1.0),
                SweepValue::Number(-0.5),
                SweepValue::Threshold("0.25K".into()),
                SweepValue::Threshold("0.9K".into()),
            ],
            workers: 0,
        }
    }
}

impl RunConfig {
    /// Reads the document, or starts from the built-in defaults when no
    /// path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::Config(format!("config: cannot read {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("config: {e}")))
    }

    /// Applies the subcommand and flag overrides, fills the derived
    /// defaults, and validates everything that can be validated without
    /// running: the effective configuration that comes back is the one the
    /// manifest records.
    pub fn normalize(
        mut self,
        mode: Mode,
        out: Option<PathBuf>,
        grid: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Self, Failure> {
        if let Some(declared) = self.mode {
            if declared != mode {
                return Err(Failure::Config(format!(
                    "mode: the document says {} but the {} subcommand was invoked",
                    declared.name(),
                    mode.name()
                )));
            }
        }
        self.mode = Some(mode);

        if let Some(n) = grid {
            self.solve.grid_cells = n;
        }
        let effective_seed = seed.or(self.seed).unwrap_or(self.solve.seed);
        self.seed = Some(effective_seed);
        self.solve.seed = effective_seed;

        if let Some(dir) = out {
            self.out = Some(dir);
        }
        if self.out.is_none() {
            self.out = Some(PathBuf::from(format!("runs/{}", mode.name())));
        }

        self.solve
            .validate()
            .map_err(|e| Failure::Config(format!("solve: {e}")))?;
        let params = self.params.build()?;

        match mode {
            Mode::Verify => {
                for name in &self.verify.checks {
                    if !crate::run::CHECK_NAMES.contains(&name.as_str()) {
                        return Err(Failure::Config(format!(
                            "verify.checks: unknown check \"{name}\"; known checks are {}",
                            crate::run::CHECK_NAMES.join(", ")
                        )));
                    }
                }
            }
            Mode::Expansion => {
                if self.expansion.epsilons.is_empty() {
                    return Err(Failure::Config(
                        "expansion.epsilons: need at least one bubble width".into(),
                    ));
                }
            }
            Mode::Sweep => {
                let d = params.d();
                let [i, j] = self.sweep.pair;
                if i == j {
                    return Err(Failure::Config(
                        "sweep.pair: indices must differ (the sweep varies an off-diagonal coupling)"
                            .into(),
                    ));
                }
                if i >= d || j >= d {
                    return Err(Failure::Config(format!(
                        "sweep.pair: [{i}, {j}] out of range for {d} components"
                    )));
                }
                if self.sweep.values.is_empty() {
                    return Err(Failure::Config(
                        "sweep.values: need at least one coupling".into(),
                    ));
                }
                for value in &self.sweep.values {
                    value.validate()?;
                }
            }
            Mode::Constants | Mode::Solve => {}
        }

        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_normalize_to_a_complete_document() {
        let rc = RunConfig::default()
            .normalize(Mode::Constants, None, Some(512), Some(7))
            .unwrap();
        assert_eq!(rc.mode, Some(Mode::Constants));
        assert_eq!(rc.out.as_deref(), Some(Path::new("runs/constants")));
        assert_eq!(rc.seed, Some(7));
        assert_eq!(rc.solve.seed, 7);
        assert_eq!(rc.solve.grid_cells, 512);
    }

    #[test]
    fn mode_conflicts_are_config_errors() {
        let doc = "mode = \"solve\"";
        let rc: RunConfig = toml::from_str(doc).unwrap();
        let err = rc.normalize(Mode::Verify, None, None, None).unwrap_err();
        match err {
            Failure::Config(msg) => assert!(msg.contains("mode"), "{msg}"),
            other => panic!("expected a config failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("grid = 4096").unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn seed_precedence_is_flag_then_key_then_solver() {
        let doc = "seed = 9\n[solve]\nseed = 13";
        let rc: RunConfig = toml::from_str(doc).unwrap();
        let from_key = rc
            .clone()
            .normalize(Mode::Solve, None, None, None)
            .unwrap();
        assert_eq!(from_key.solve.seed, 9);
        let from_flag = rc.normalize(Mode::Solve, None, None, Some(3)).unwrap();
        assert_eq!(from_flag.solve.seed, 3);
        assert_eq!(from_flag.seed, Some(3));
    }

    #[test]
    fn sweep_tokens_parse_and_round_trip() {
        let doc = "[sweep]\nvalues = [-1.0, \"0.25K\", \"K\"]";
        let rc: RunConfig = toml::from_str(doc).unwrap();
        let values = &rc.sweep.values;
        assert_eq!(values[0], SweepValue::Number(-1.0));
        assert_eq!(values[1].resolve(2.0), 0.5);
        assert_eq!(values[2].resolve(2.0), 2.0);
        assert_eq!(values[1].token(), "0.25K");

        let err = SweepValue::Threshold("0.9Q".into()).validate().unwrap_err();
        assert!(matches!(err, Failure::Config(_)));

        let back: RunConfig = toml::from_str(&toml::to_string(&rc).unwrap()).unwrap();
        assert_eq!(back.sweep, rc.sweep);
    }

    #[test]
    fn asymmetric_couplings_name_the_params_section() {
        let mut cfg = ParamsConfig::default();
        cfg.beta[0][1] = 0.3;
        let err = cfg.build().unwrap_err();
        match err {
            Failure::Config(msg) => {
                assert!(msg.starts_with("params:"), "{msg}");
                assert!(msg.contains("symmetric"), "{msg}");
            }
            other => panic!("expected a config failure, got {other:?}"),
        }
    }
}
