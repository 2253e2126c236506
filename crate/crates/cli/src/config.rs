//! Experiment configuration: one TOML document, every section optional,
//! unknown keys rejected.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use learnpath_core::agent::{AgentHyper, Variant};
use learnpath_core::akt::{AktLiteModel, AktTrainHyper};
use learnpath_core::env::{Backing, EnvConfig, StudentDynamics, StudentEnv, StudentProfile};
use learnpath_core::knowledge::{ExerciseCatalog, GoalConfig};
use learnpath_core::nn::Checkpoint;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub catalog: CatalogSection,
    pub environment: EnvironmentSection,
    pub goal: GoalSection,
    pub agent: AgentSection,
    pub run: RunSection,
    pub akt: AktSection,
    pub logs: LogsSection,
    pub eval: EvalSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            catalog: CatalogSection::default(),
            environment: EnvironmentSection::default(),
            goal: GoalSection::default(),
            agent: AgentSection::default(),
            run: RunSection::default(),
            akt: AktSection::default(),
            logs: LogsSection::default(),
            eval: EvalSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogSection {
    pub exercises: usize,
    pub topics: usize,
    pub areas: usize,
    /// Optional `exercise_id,topic_id,area_id` file; overrides the counts.
    pub path: Option<PathBuf>,
}

impl Default for CatalogSection {
    fn default() -> Self {
        Self {
            exercises: 20,
            topics: 10,
            areas: 7,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackingKind {
    Analytic,
    Akt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub backing: BackingKind,
    /// akt-lite checkpoint, required for the `akt` backing.
    pub akt_checkpoint: Option<PathBuf>,
    pub seed_history_len: usize,
    pub d_floor: f64,
    pub student: StudentSection,
    pub profile: ProfileSection,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            backing: BackingKind::Analytic,
            akt_checkpoint: None,
            seed_history_len: env.seed_history_len,
            d_floor: env.d_floor,
            student: StudentSection::default(),
            profile: ProfileSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudentSection {
    pub eta_correct: f64,
    pub eta_wrong: f64,
    pub kappa: f64,
    pub slip: f64,
    pub guess: f64,
}

impl Default for StudentSection {
    fn default() -> Self {
        let d = StudentDynamics::default();
        Self {
            eta_correct: d.eta_correct,
            eta_wrong: d.eta_wrong,
            kappa: d.kappa,
            slip: d.slip,
            guess: d.guess,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub ability_mean: f64,
    pub ability_std: f64,
    pub offset_std: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let p = StudentProfile::default();
        Self {
            ability_mean: p.ability_mean,
            ability_std: p.ability_std,
            offset_std: p.offset_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalSection {
    pub beta: f64,
    pub t_max: usize,
}

impl Default for GoalSection {
    fn default() -> Self {
        let g = GoalConfig::default();
        Self {
            beta: g.beta,
            t_max: g.t_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    A2c,
    Ppo,
    Eppo,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::A2c => Variant::A2c,
            VariantName::Ppo => Variant::Ppo,
            VariantName::Eppo => Variant::Eppo,
        }
    }
}

impl From<Variant> for VariantName {
    fn from(v: Variant) -> Self {
        match v {
            Variant::A2c => VariantName::A2c,
            Variant::Ppo => VariantName::Ppo,
            Variant::Eppo => VariantName::Eppo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub variant: VariantName,
    pub gamma: f64,
    pub clip_eps: f64,
    pub alpha: f64,
    pub vf_coef: f64,
    pub lr: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub episodes_per_update: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub normalize_advantages: bool,
}

impl Default for AgentSection {
    fn default() -> Self {
        let h = AgentHyper::default();
        Self {
            variant: VariantName::Eppo,
            gamma: h.gamma,
            clip_eps: h.clip_eps,
            alpha: h.alpha,
            vf_coef: h.vf_coef,
            lr: h.lr,
            update_epochs: h.update_epochs,
            minibatch_size: h.minibatch_size,
            episodes_per_update: h.episodes_per_update,
            buffer_capacity: h.buffer_capacity,
            hidden: h.hidden,
            normalize_advantages: h.normalize_advantages,
        }
    }
}

impl AgentSection {
    pub fn hyper(&self) -> AgentHyper {
        AgentHyper {
            gamma: self.gamma,
            clip_eps: self.clip_eps,
            alpha: self.alpha,
            vf_coef: self.vf_coef,
            lr: self.lr,
            update_epochs: self.update_epochs,
            minibatch_size: self.minibatch_size,
            episodes_per_update: self.episodes_per_update,
            buffer_capacity: self.buffer_capacity,
            hidden: self.hidden,
            normalize_advantages: self.normalize_advantages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Updates between checkpoints.
    pub checkpoint_every: usize,
    /// Collect the episodes of an update window on all cores.
    pub parallel: bool,
    pub curve_window: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            episodes: 3000,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            checkpoint_every: 25,
            parallel: false,
            curve_window: learnpath_core::metrics::DEFAULT_CURVE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AktSection {
    pub width: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Share of logs held out for the accuracy report.
    pub holdout: f64,
}

impl Default for AktSection {
    fn default() -> Self {
        let h = AktTrainHyper::default();
        Self {
            width: 16,
            lr: h.lr,
            epochs: h.epochs,
            batch: h.batch,
            holdout: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogsSection {
    pub students: usize,
    pub steps: usize,
}

impl Default for LogsSection {
    fn default() -> Self {
        Self { students: 500, steps: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub students: usize,
    /// Highest-probability actions instead of sampling.
    pub greedy: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            students: 50,
            greedy: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start].matches('\n').count() + 1);
            CliError::config(format!("line {line}: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.context(&path.display().to_string()))?;
        cfg.base_dir = match path.parent() {
            Some(dir) if !dir.as_os_str().is_empty() => dir.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        GoalConfig::new(self.goal.beta, self.goal.t_max)?;
        self.agent.hyper().validate()?;
        self.env_config_without_model().profile.validate()?;
        self.env_config_without_model().dynamics.validate()?;
        if self.environment.backing == BackingKind::Akt && self.environment.akt_checkpoint.is_none() {
            return Err(CliError::config("environment.akt_checkpoint is required when environment.backing = \"akt\""));
        }
        if !(self.environment.d_floor > 0.0) {
            return Err(CliError::config("environment.d_floor must be positive"));
        }
        if self.run.seeds.is_empty() {
            return Err(CliError::config("run.seeds must list at least one seed"));
        }
        if self.run.checkpoint_every == 0 {
            return Err(CliError::config("run.checkpoint_every must be positive"));
        }
        if self.akt.width == 0 || self.akt.batch == 0 || !(self.akt.lr > 0.0) {
            return Err(CliError::config("akt.width, akt.batch and akt.lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.akt.holdout) {
            return Err(CliError::config("akt.holdout must lie in [0,1)"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.run.out_dir)
    }

    pub fn variant(&self) -> Variant {
        self.agent.variant.into()
    }

    pub fn catalog(&self) -> CliResult<Arc<ExerciseCatalog>> {
        let catalog = match &self.catalog.path {
            Some(p) => {
                let path = self.resolve(p);
                let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
                ExerciseCatalog::read(BufReader::new(file)).map_err(|e| CliError::from(e).context(&path.display().to_string()))?
            }
            None => ExerciseCatalog::synthetic(self.catalog.exercises, self.catalog.topics, self.catalog.areas)?,
        };
        Ok(Arc::new(catalog))
    }

    fn env_config_without_model(&self) -> EnvConfig {
        let s = self.environment.student;
        let p = self.environment.profile;
        EnvConfig {
            profile: StudentProfile {
                ability_mean: p.ability_mean,
                ability_std: p.ability_std,
                offset_std: p.offset_std,
            },
            dynamics: StudentDynamics {
                eta_correct: s.eta_correct,
                eta_wrong: s.eta_wrong,
                kappa: s.kappa,
                slip: s.slip,
                guess: s.guess,
            },
            d_floor: self.environment.d_floor,
            seed_history_len: self.environment.seed_history_len,
            backing: Backing::Analytic,
        }
    }

    pub fn goal(&self) -> CliResult<GoalConfig> {
        Ok(GoalConfig::new(self.goal.beta, self.goal.t_max)?)
    }

    pub fn env(&self) -> CliResult<StudentEnv> {
        let mut config = self.env_config_without_model();
        if self.environment.backing == BackingKind::Akt {
            let path = self.resolve(self.environment.akt_checkpoint.as_deref().expect("validated"));
            let ckpt = Checkpoint::load(&path).map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
            config.backing = Backing::Akt(Arc::new(AktLiteModel::from_checkpoint(&ckpt)?));
        }
        Ok(StudentEnv::new(self.catalog()?, config, self.goal()?)?)
    }

    pub fn akt_hyper(&self) -> AktTrainHyper {
        AktTrainHyper {
            lr: self.akt.lr,
            epochs: self.akt.epochs,
            batch: self.akt.batch,
        }
    }

    /// The resolved configuration as TOML; what the manifest hash covers.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        sha256_hex(self.canonical_toml().as_bytes())
    }

    /// A copy whose paths are absolute, so the document can be re-run from
    /// anywhere.
    pub fn resolved(&self) -> CliResult<Self> {
        let abs = |p: &Path| std::path::absolute(self.resolve(p)).map_err(|e| CliError::io(p, e));
        let mut out = self.clone();
        if let Some(p) = &self.catalog.path {
            out.catalog.path = Some(abs(p)?);
        }
        if let Some(p) = &self.environment.akt_checkpoint {
            out.environment.akt_checkpoint = Some(abs(p)?);
        }
        out.run.out_dir = abs(&self.run.out_dir)?;
        out.base_dir = std::path::absolute(&self.base_dir).map_err(|e| CliError::io(&self.base_dir, e))?;
        Ok(out)
    }

    /// Hash of everything that shapes a training trajectory: catalog
    /// contents, environment, goal and agent. Run bookkeeping (episode
    /// count, output location, checkpoint cadence) is excluded, so a run
    /// may be resumed with a larger episode budget.
    pub fn fingerprint(&self) -> CliResult<String> {
        #[derive(Serialize)]
        struct Shape<'a> {
            catalog: String,
            environment: &'a EnvironmentSection,
            goal: &'a GoalSection,
            agent: &'a AgentSection,
        }
        let mut environment = self.environment.clone();
        environment.akt_checkpoint = None;
        if let (BackingKind::Akt, Some(p)) = (self.environment.backing, &self.environment.akt_checkpoint) {
            let path = self.resolve(p);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            environment.akt_checkpoint = Some(PathBuf::from(sha256_hex(&bytes)));
        }
        let shape = Shape {
            catalog: self.catalog()?.to_delimited(),
            environment: &environment,
            goal: &self.goal,
            agent: &self.agent,
        };
        Ok(sha256_hex(toml::to_string(&shape).expect("serializes").as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
