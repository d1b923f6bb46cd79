use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acoustic::{AcousticConfig, AugmentConfig, MelConfig};
use crate::classifiers::{BoostConfig, CnnConfig, ForestConfig, NbConfig, SvmConfig};
use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionMode, Modality};
use crate::lexical::EmbeddingConfig;
use crate::media::IngestConfig;
use crate::seed;
use crate::visual::VisualConfig;

/// Environment variable that overrides `cache_dir`.
pub const CACHE_ENV: &str = "DDP_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Svm(SvmConfig),
    Mnb(NbConfig),
    Forest(ForestConfig),
    Boost(BoostConfig),
    Cnn(CnnConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Svm(_) => "svm",
            ModelSpec::Mnb(_) => "mnb",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Boost(_) => "boost",
            ModelSpec::Cnn(_) => "cnn",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Svm(c) => c.validate(),
            ModelSpec::Cnn(c) => c.validate(),
            ModelSpec::Mnb(c) if !(c.alpha > 0.0) => Err(Error::usage("mnb alpha must be positive")),
            ModelSpec::Forest(c) if c.n_trees == 0 || c.max_depth == Some(0) => {
                Err(Error::usage("forest needs n_trees >= 1 and max_depth >= 1"))
            }
            ModelSpec::Boost(c) if c.max_depth == 0 || !(c.learning_rate > 0.0) => {
                Err(Error::usage("boost needs max_depth >= 1 and a positive learning_rate"))
            }
            _ => Ok(()),
        }
    }

    /// Overwrite the model's own seed, if it has one.
    fn reseed(&mut self, s: u64) {
        match self {
            ModelSpec::Forest(c) => c.seed = s,
            ModelSpec::Boost(c) => c.seed = s,
            ModelSpec::Cnn(c) => c.seed = s,
            ModelSpec::Svm(_) | ModelSpec::Mnb(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Replays `<media stem>.faces.jsonl` recorded next to each media file.
    Replay,
    /// The whole frame is the face.
    FullFrame,
    /// External detector program, see [`crate::visual::CommandDetector`].
    Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualSection {
    pub enabled: bool,
    pub detector: DetectorKind,
    pub detector_command: Vec<String>,
    pub detector_version: String,
    /// Evenly spaced frames kept per training video; `None` keeps all.
    pub train_frames_per_video: Option<usize>,
    /// Evenly spaced frames scored per test video; `None` scores all.
    pub eval_frames_per_video: Option<usize>,
    pub preprocess: VisualConfig,
    pub model: ModelSpec,
}

impl Default for VisualSection {
    fn default() -> Self {
        VisualSection {
            enabled: true,
            detector: DetectorKind::FullFrame,
            detector_command: Vec::new(),
            detector_version: "1".into(),
            train_frames_per_video: None,
            eval_frames_per_video: None,
            preprocess: VisualConfig::default(),
            model: ModelSpec::Cnn(CnnConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticSection {
    pub enabled: bool,
    pub features: AcousticConfig,
    pub mel: MelConfig,
    /// Time-shifted copies of each training chunk added to the training set.
    pub augment_copies: usize,
    pub augment: AugmentConfig,
    pub model: ModelSpec,
}

impl Default for AcousticSection {
    fn default() -> Self {
        AcousticSection {
            enabled: true,
            features: AcousticConfig::default(),
            mel: MelConfig::default(),
            augment_copies: 1,
            augment: AugmentConfig::default(),
            model: ModelSpec::Svm(SvmConfig {
                c: 2.0,
                gamma: 1.0,
                ..SvmConfig::default()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexicalFeatures {
    /// Raw in-vocabulary term counts.
    Counts,
    /// L2-normalized TF-IDF vector.
    Tfidf,
    /// TF-IDF weighted mean of word embeddings.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexicalSection {
    pub enabled: bool,
    pub features: LexicalFeatures,
    pub embedding: EmbeddingConfig,
    pub model: ModelSpec,
}

impl Default for LexicalSection {
    fn default() -> Self {
        LexicalSection {
            enabled: true,
            features: LexicalFeatures::Embedding,
            embedding: EmbeddingConfig::default(),
            model: ModelSpec::Svm(SvmConfig {
                c: 1.0,
                gamma: 9.0,
                ..SvmConfig::default()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Master seed. Split, augmentation, embedding and model seeds are all derived from it.
    pub seed: u64,
    pub fusion: FusionMode,
    pub dataset: DatasetConfig,
    /// Held-out fold when `dataset.n_folds` is set.
    pub fold: usize,
    pub ingest: IngestConfig,
    pub visual: VisualSection,
    pub acoustic: AcousticSection,
    pub lexical: LexicalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifest: PathBuf::from("manifest.jsonl"),
            cache_dir: None,
            out_dir: PathBuf::from("out"),
            seed: 1,
            fusion: FusionMode::HardMajority,
            dataset: DatasetConfig::default(),
            fold: 0,
            ingest: IngestConfig::default(),
            visual: VisualSection::default(),
            acoustic: AcousticSection::default(),
            lexical: LexicalSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::usage(format!("invalid config: {e}")))
    }

    /// Parse a config file; relative paths in it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = rebase(base, &cfg.manifest);
        cfg.out_dir = rebase(base, &cfg.out_dir);
        cfg.cache_dir = cfg.cache_dir.map(|p| rebase(base, &p));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn section_enabled(&self, m: Modality) -> bool {
        match m {
            Modality::Visual => self.visual.enabled,
            Modality::Acoustic => self.acoustic.enabled,
            Modality::Lexical => self.lexical.enabled,
        }
    }

    pub fn model(&self, m: Modality) -> &ModelSpec {
        match m {
            Modality::Visual => &self.visual.model,
            Modality::Acoustic => &self.acoustic.model,
            Modality::Lexical => &self.lexical.model,
        }
    }

    /// `DDP_CACHE_DIR`, else `cache_dir`, else `<out_dir>/cache`.
    pub fn resolved_cache_dir(&self) -> PathBuf {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.ingest.validate()?;
        if matches!(self.dataset.n_folds, Some(k) if self.fold >= k) {
            return Err(Error::usage(format!("fold {} out of range", self.fold)));
        }
        self.visual.preprocess.validate()?;
        self.acoustic.features.validate()?;
        self.acoustic.mel.validate()?;
        for m in Modality::ALL {
            self.model(m).validate().map_err(|e| Error::usage(format!("{m} model: {e}")))?;
        }
        if !Modality::ALL.iter().any(|&m| self.section_enabled(m)) {
            return Err(Error::usage("every modality is disabled"));
        }
        for m in [Modality::Acoustic, Modality::Lexical] {
            if matches!(self.model(m), ModelSpec::Cnn(_)) {
                return Err(Error::usage(format!("the cnn model is only available for the visual modality, not {m}")));
            }
        }
        if let ModelSpec::Cnn(c) = &self.visual.model {
            if c.image_size != self.visual.preprocess.image_size {
                return Err(Error::usage(format!(
                    "visual cnn image_size {} differs from preprocess image_size {}",
                    c.image_size, self.visual.preprocess.image_size
                )));
            }
        }
        if matches!(self.lexical.model, ModelSpec::Mnb(_)) && self.lexical.features == LexicalFeatures::Embedding {
            return Err(Error::usage("mnb needs nonnegative lexical features: use counts or tfidf"));
        }
        if self.visual.detector == DetectorKind::Command && self.visual.detector_command.is_empty() {
            return Err(Error::usage("detector = \"command\" needs detector_command"));
        }
        if matches!(self.visual.train_frames_per_video, Some(0)) || matches!(self.visual.eval_frames_per_video, Some(0)) {
            return Err(Error::usage("frames_per_video limits must be positive"));
        }
        Ok(())
    }

    /// Copy with every component seed derived from the master seed.
    pub fn effective(&self) -> ExperimentConfig {
        let mut c = self.clone();
        let s = self.seed;
        c.dataset.split_seed = seed::derive(s, "split");
        c.acoustic.augment.seed = seed::derive(s, "acoustic/augment");
        c.lexical.embedding.seed = seed::derive(s, "lexical/embedding");
        for m in Modality::ALL {
            let derived = seed::derive(s, &format!("{m}/model"));
            match m {
                Modality::Visual => c.visual.model.reseed(derived),
                Modality::Acoustic => c.acoustic.model.reseed(derived),
                Modality::Lexical => c.lexical.model.reseed(derived),
            }
        }
        c
    }
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
