use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{SearchOptions, EXHAUSTIVE_CAP};
use crate::seqplan::{EpsilonSpec, PlanMode, DEFAULT_HORIZON};
use crate::verify::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Construct,
    Verify,
    Witness,
    Oracle,
    Renorm,
    Characters,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Construct => "construct",
            Mode::Verify => "verify",
            Mode::Witness => "witness",
            Mode::Oracle => "oracle",
            Mode::Renorm => "renorm",
            Mode::Characters => "characters",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PermutationSource {
    Identity,
    Reversal,
    /// Falls back to the run seed when `seed` is absent.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    C,
    M,
    P,
    Dim,
    Block,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub epsilon: EpsilonSpec,
    pub plan: PlanMode,
    pub horizon: usize,
    pub block_count: usize,
    /// Upper limit on blocks planned while searching for a witness block.
    pub max_blocks: usize,
    pub dims: Vec<usize>,
    pub targets: Vec<f64>,
    pub permutation: PermutationSource,
    /// Random permutations per target in witness sweeps.
    pub permutations: usize,
    /// Explicit system (JSON rows or CSV) for `verify` and `oracle`.
    pub system: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
    pub ranks: Vec<u32>,
    pub p: Vec<f64>,
    pub trials: usize,
    pub samples: usize,
    pub exhaustive_cap: usize,
    pub restarts: usize,
    pub max_passes: usize,
    pub sweep: Option<SweepConfig>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            epsilon: EpsilonSpec::Constant { value: 0.5 },
            plan: PlanMode::Theorem2,
            horizon: DEFAULT_HORIZON,
            block_count: 2,
            max_blocks: 1000,
            dims: vec![4],
            targets: vec![2.0],
            permutation: PermutationSource::Identity,
            permutations: 1,
            system: None,
            tolerances: Tolerances::default(),
            seed: None,
            ranks: vec![2],
            p: Vec::new(),
            trials: 32,
            samples: 10_000,
            exhaustive_cap: EXHAUSTIVE_CAP,
            restarts: 4,
            max_passes: 50,
            sweep: None,
            output: None,
            format: Format::Json,
        }
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("{value} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parse errors name the offending field (if any) and line.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("<config>")
                .to_string();
            Error::Config { field, message: msg }
        })
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            exhaustive_cap: self.exhaustive_cap,
            seed: self.seed.unwrap_or(0),
            restarts: self.restarts,
            max_passes: self.max_passes,
        }
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or_else(|| Error::config("mode", "no mode given"))
    }

    fn needs_seed(&self, mode: Mode) -> bool {
        let random_perm = matches!(self.permutation, PermutationSource::Random { seed: None });
        match mode {
            Mode::Witness => random_perm,
            Mode::Renorm => true,
            Mode::Characters => !self.p.is_empty(),
            Mode::Oracle => false,
            Mode::Construct | Mode::Verify => false,
            Mode::Sweep => matches!(self.sweep.as_ref().map(|s| s.axis), Some(SweepAxis::C | SweepAxis::P)),
        }
    }

    /// Checks every numeric field; randomized modes must carry a seed.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        match &self.epsilon {
            EpsilonSpec::Constant { value } if !(0.0..=1.0).contains(value) => {
                return Err(Error::config("epsilon.value", format!("{value} outside [0, 1]")));
            }
            EpsilonSpec::PowerLaw { exponent, scale } => {
                positive("epsilon.exponent", *exponent)?;
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(Error::config("epsilon.scale", format!("{scale} outside (0, 1]")));
                }
            }
            EpsilonSpec::Geometric { first, ratio } => {
                if !(0.0..=1.0).contains(first) {
                    return Err(Error::config("epsilon.first", format!("{first} outside [0, 1]")));
                }
                if !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::config("epsilon.ratio", format!("{ratio} outside (0, 1]")));
                }
            }
            _ => {}
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.block_count == 0 {
            return Err(Error::config("block_count", "must be at least 1"));
        }
        if self.max_blocks == 0 {
            return Err(Error::config("max_blocks", "must be at least 1"));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::config("dims", "need at least one positive dimension"));
        }
        if self.targets.is_empty() {
            return Err(Error::config("targets", "need at least one target"));
        }
        for c in &self.targets {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::config("targets", format!("{c} must be finite and non-negative")));
            }
        }
        if self.permutations == 0 {
            return Err(Error::config("permutations", "must be at least 1"));
        }
        for &m in &self.ranks {
            if m == 0 || m > crate::characters::MAX_RANK {
                return Err(Error::config("ranks", format!("{m} outside 1..=12")));
            }
        }
        for &p in &self.p {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::config("p", format!("{p} outside [1, inf)")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        let tol = self.tolerances;
        positive("tolerances.identity", tol.identity)?;
        positive("tolerances.inequality", tol.inequality)?;
        if mode == Mode::Sweep {
            match &self.sweep {
                None => return Err(Error::config("sweep", "sweep mode needs an axis")),
                Some(s) if s.values.is_empty() => {
                    return Err(Error::config("sweep.values", "axis is empty"));
                }
                Some(s) => {
                    for v in &s.values {
                        if !v.is_finite() {
                            return Err(Error::config("sweep.values", format!("{v} is not finite")));
                        }
                        let integral = matches!(s.axis, SweepAxis::M | SweepAxis::Dim | SweepAxis::Block);
                        if integral && (v.fract() != 0.0 || *v < 1.0) {
                            return Err(Error::config("sweep.values", format!("{v} is not a positive integer")));
                        }
                    }
                }
            }
        }
        if self.needs_seed(mode) && self.seed.is_none() {
            return Err(Error::config(
                "seed",
                format!("mode {} is randomized; pass --seed or set `seed`", mode.name()),
            ));
        }
        Ok(())
    }
}
