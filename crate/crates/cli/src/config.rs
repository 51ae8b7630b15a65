//! Run configuration read from TOML.
//!
//! Every key is optional. Defaults:
//!
//! ```toml
//! [paths]
//! corpus = "records.jsonl"    # relative paths resolve against the config file
//! # memberships = "memberships.txt"  # default: inferred from participation
//!
//! [preprocess]
//! # stopwords = "stopwords.txt"
//! stemmer = "identity"        # identity | english | spanish
//! min_df = 0.01
//!
//! [lda]
//! k = "sqrt(n/2)"             # "sqrt(n/2)", "mn/t" or an integer
//! # alpha = 2.5               # default: 50 / k
//! beta = 0.1
//! iterations = 1000
//! fold_in_iterations = 50
//! seed = 0
//!
//! [profiles]
//! strategies = ["euclidean", "dice", "sorensen", "cosine", "overlap"]
//! baselines = ["termmon", "termint", "topicmon", "topicint"]
//! tiny = 50
//!
//! [retrieval]
//! mu = 2000.0
//! depth = 1000
//!
//! [evaluation]
//! splits = 5
//! ratio = 0.8
//! seed = 0
//! cutoff = 10
//! min_interventions = 10
//! scatter = false
//! parallel_splits = false
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subprof::corpus::{read_stopwords, PreprocessConfig, Stemmer};
use subprof::eval::{ExperimentConfig, System};
use subprof::fusion::DEFAULT_DEPTH;
use subprof::lda::{
    KHeuristic, LdaConfig, DEFAULT_BETA, DEFAULT_FOLD_IN_ITERATIONS, DEFAULT_ITERATIONS,
};
use subprof::profiles::TINY_THRESHOLD;
use subprof::retrieval::DEFAULT_MU;
use subprof::topicselect::Strategy;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub memberships: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("records.jsonl"),
            memberships: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    pub stopwords: Option<PathBuf>,
    pub stemmer: String,
    pub min_df: f64,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            stopwords: None,
            stemmer: "identity".into(),
            min_df: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lda {
    pub k: String,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    pub seed: u64,
}

impl Default for Lda {
    fn default() -> Self {
        Self {
            k: KHeuristic::SqrtHalfN.to_string(),
            alpha: None,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            fold_in_iterations: DEFAULT_FOLD_IN_ITERATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profiles {
    pub strategies: Vec<String>,
    pub baselines: Vec<String>,
    pub tiny: u32,
}

impl Default for Profiles {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.iter().map(|s| s.to_string()).collect(),
            baselines: ["termmon", "termint", "topicmon", "topicint"]
                .map(String::from)
                .to_vec(),
            tiny: TINY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Retrieval {
    pub mu: f64,
    pub depth: usize,
}

impl Default for Retrieval {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            depth: DEFAULT_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluation {
    pub splits: usize,
    pub ratio: f64,
    pub seed: u64,
    pub cutoff: usize,
    pub min_interventions: usize,
    pub scatter: bool,
    pub parallel_splits: bool,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            splits: 5,
            ratio: 0.8,
            seed: 0,
            cutoff: 10,
            min_interventions: 10,
            scatter: false,
            parallel_splits: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub preprocess: Preprocess,
    pub lda: Lda,
    pub profiles: Profiles,
    pub retrieval: Retrieval,
    pub evaluation: Evaluation,
}

impl RunConfig {
    /// Parses `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        if let Some(p) = self.paths.memberships.as_mut() {
            fix(p);
        }
        if let Some(p) = self.preprocess.stopwords.as_mut() {
            fix(p);
        }
    }

    /// Overrides both the LDA and the partition seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.lda.seed = seed;
        self.evaluation.seed = seed;
    }

    pub fn k_heuristic(&self) -> Result<KHeuristic, CliError> {
        self.lda
            .k
            .parse()
            .map_err(|e| CliError::Config(format!("lda.k: {e}")))
    }

    pub fn lda_config(&self, k: usize) -> LdaConfig {
        LdaConfig {
            k,
            alpha: self.lda.alpha,
            beta: self.lda.beta,
            iterations: self.lda.iterations,
            seed: self.lda.seed,
        }
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig, CliError> {
        let stemmer = Stemmer::by_name(&self.preprocess.stemmer)
            .map_err(|e| CliError::Config(format!("preprocess.stemmer: {e}")))?;
        let mut config = PreprocessConfig::default()
            .with_stemmer(stemmer)
            .with_min_df(self.preprocess.min_df);
        if let Some(path) = &self.preprocess.stopwords {
            config.stopwords = read_stopwords(path)
                .map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
        }
        Ok(config)
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>, CliError> {
        self.profiles
            .strategies
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Config(format!("profiles.strategies: {e}")))
            })
            .collect()
    }

    /// Strategies followed by baselines, as configured.
    pub fn systems(&self) -> Result<Vec<System>, CliError> {
        let mut systems: Vec<System> = self.strategies()?.into_iter().map(System::Lda).collect();
        for b in &self.profiles.baselines {
            let s: System = b
                .parse()
                .map_err(|e| CliError::Config(format!("profiles.baselines: {e}")))?;
            if matches!(s, System::Lda(_)) {
                return Err(CliError::Config(format!(
                    "profiles.baselines: `{b}` is a strategy"
                )));
            }
            systems.push(s);
        }
        Ok(systems)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let systems = self.systems()?;
        if systems.is_empty() {
            return Err(CliError::Config(
                "no strategies or baselines to evaluate".into(),
            ));
        }
        Ok(ExperimentConfig {
            systems,
            k_heuristics: vec![self.k_heuristic()?],
            alpha: self.lda.alpha,
            beta: self.lda.beta,
            iterations: self.lda.iterations,
            fold_in_iterations: self.lda.fold_in_iterations,
            lda_seed: self.lda.seed,
            mu: self.retrieval.mu,
            depth: self.retrieval.depth,
            ratio: self.evaluation.ratio,
            n_splits: self.evaluation.splits,
            split_seed: self.evaluation.seed,
            cutoff: self.evaluation.cutoff,
            min_interventions: self.evaluation.min_interventions,
            tiny_threshold: self.profiles.tiny,
            preprocess: self.preprocess_config()?,
            scatter: self.evaluation.scatter,
            parallel_splits: self.evaluation.parallel_splits,
        })
    }
}
