//! Experiment configuration: a flat dotted-key file (`fl.N = 20`, `#`
//! comments) or the same keys as a flat JSON object. Every run echoes its
//! full effective configuration so results can be replayed exactly.

use flsim_core::attacks::{AttackConfig, AttackKind, GammaSearch, Perturbation, ThreatModel};
use flsim_core::federation::{DefenseConfig, FLConfig};
use flsim_core::flguard::FLGuardHyper;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// A config problem with the line it came from (0 for cross-key checks or
/// JSON input).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetConfig {
    Synth {
        n_classes: usize,
        dim: usize,
        n_per_class: usize,
        test_per_class: usize,
        spread: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub q: f64,
    pub fl: FLConfig,
    pub hidden: Vec<usize>,
    pub attack: Option<AttackConfig>,
    pub defense: DefenseConfig,
    pub flguard: FLGuardHyper,
    pub output: OutputConfig,
    pub record_timing: bool,
    /// Sorted effective key/value pairs for the report echo.
    pub echo: Vec<(String, String)>,
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "dataset.kind",
    "dataset.n_classes",
    "dataset.dim",
    "dataset.n_per_class",
    "dataset.test_per_class",
    "dataset.spread",
    "dataset.q",
    "dataset.images",
    "dataset.labels",
    "dataset.test_images",
    "dataset.test_labels",
    "fl.R",
    "fl.N",
    "fl.M",
    "fl.P",
    "fl.I",
    "fl.b",
    "fl.eta",
    "fl.alpha",
    "fl.k",
    "model.hidden",
    "attack.kind",
    "attack.threat_model",
    "attack.perturbation",
    "attack.gamma_init",
    "attack.threshold",
    "attack.max_iters",
    "attack.lie_z",
    "defense.kind",
    "defense.m",
    "defense.M",
    "defense.e",
    "defense.iters",
    "defense.subdim",
    "defense.root_size",
    "flguard.tau",
    "flguard.noise_var",
    "flguard.mask_ratio",
    "flguard.lr",
    "flguard.epochs",
    "flguard.batch",
    "flguard.pca_components",
    "flguard.n_clusters",
    "output.dir",
    "output.format",
    "output.timing",
];

/// Raw key/value pairs with source line numbers.
#[derive(Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return Self::parse_json(text);
        }
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(Diagnostic {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                errors.push(Diagnostic {
                    line: line_no,
                    message: format!("unknown key `{key}`"),
                });
                continue;
            }
            if entries.insert(key.clone(), (value, line_no)).is_some() {
                errors.push(Diagnostic {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        if errors.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(ConfigError(errors))
        }
    }

    fn parse_json(text: &str) -> Result<RawConfig, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            ConfigError(vec![Diagnostic {
                line: e.line(),
                message: format!("invalid JSON: {e}"),
            }])
        })?;
        let obj = value.as_object().ok_or_else(|| {
            ConfigError(vec![Diagnostic {
                line: 0,
                message: "top-level JSON value must be an object of dotted keys".into(),
            }])
        })?;
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (key, v) in obj {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                errors.push(Diagnostic {
                    line: 0,
                    message: format!("unknown key `{key}`"),
                });
                continue;
            }
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    errors.push(Diagnostic {
                        line: 0,
                        message: format!("key `{key}`: unsupported JSON value {other}"),
                    });
                    continue;
                }
            };
            entries.insert(key.clone(), (text, 0));
        }
        if errors.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(ConfigError(errors))
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(_, l)| *l).unwrap_or(0)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn typed<T: std::str::FromStr>(
        &self,
        key: &str,
        default: T,
        errors: &mut Vec<Diagnostic>,
    ) -> T {
        match self.get(key) {
            None => default,
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => v,
                Err(_) => {
                    errors.push(Diagnostic {
                        line: self.line_of(key),
                        message: format!(
                            "key `{key}`: cannot parse `{raw}` as {}",
                            std::any::type_name::<T>()
                        ),
                    });
                    default
                }
            },
        }
    }
}

fn parse_attack(
    raw: &RawConfig,
    errors: &mut Vec<Diagnostic>,
) -> Option<AttackConfig> {
    let kind_raw = raw.get("attack.kind").unwrap_or("none");
    let kind = match kind_raw {
        "none" => return None,
        "sf" | "sign_flip" => AttackKind::SignFlip,
        "lie" => AttackKind::Lie,
        "min_max" => AttackKind::MinMax,
        "min_sum" => AttackKind::MinSum,
        "stat_opt" => AttackKind::StatOpt,
        "dyn_opt" => AttackKind::DynOpt,
        "adaptive" => AttackKind::AdaptiveFlGuard,
        "slf" => AttackKind::StaticLabelFlip,
        "dlf" => AttackKind::DynamicLabelFlip,
        other => {
            errors.push(Diagnostic {
                line: raw.line_of("attack.kind"),
                message: format!("unknown attack kind `{other}`"),
            });
            return None;
        }
    };
    let default_threat = match kind {
        AttackKind::StatOpt | AttackKind::DynOpt | AttackKind::AdaptiveFlGuard => ThreatModel::T1,
        AttackKind::StaticLabelFlip | AttackKind::DynamicLabelFlip => ThreatModel::T5,
        _ => ThreatModel::T3,
    };
    let threat = match raw.get("attack.threat_model") {
        None => default_threat,
        Some("t1") | Some("T1") => ThreatModel::T1,
        Some("t2") | Some("T2") => ThreatModel::T2,
        Some("t3") | Some("T3") => ThreatModel::T3,
        Some("t4") | Some("T4") => ThreatModel::T4,
        Some("t5") | Some("T5") => ThreatModel::T5,
        Some(other) => {
            errors.push(Diagnostic {
                line: raw.line_of("attack.threat_model"),
                message: format!("unknown threat model `{other}`"),
            });
            default_threat
        }
    };
    let perturbation = match raw.get("attack.perturbation") {
        None | Some("sgn") => Perturbation::InverseSign,
        Some("uv") => Perturbation::InverseUnit,
        Some(other) => {
            errors.push(Diagnostic {
                line: raw.line_of("attack.perturbation"),
                message: format!("unknown perturbation `{other}` (use uv or sgn)"),
            });
            Perturbation::InverseSign
        }
    };
    let defaults = GammaSearch::default();
    let search = GammaSearch {
        gamma_init: raw.typed("attack.gamma_init", defaults.gamma_init, errors),
        threshold: raw.typed("attack.threshold", defaults.threshold, errors),
        max_iters: raw.typed("attack.max_iters", defaults.max_iters, errors),
    };
    if search.gamma_init <= 0.0 {
        errors.push(Diagnostic {
            line: raw.line_of("attack.gamma_init"),
            message: format!("attack.gamma_init = {} must be > 0", search.gamma_init),
        });
    }
    if search.threshold <= 0.0 {
        errors.push(Diagnostic {
            line: raw.line_of("attack.threshold"),
            message: format!("attack.threshold = {} must be > 0", search.threshold),
        });
    }
    let lie_z = raw.typed("attack.lie_z", 1.5, errors);

    // threat-model legality per the capability table
    let legal = match kind {
        AttackKind::StatOpt | AttackKind::DynOpt | AttackKind::AdaptiveFlGuard => {
            matches!(threat, ThreatModel::T1 | ThreatModel::T2)
        }
        AttackKind::Lie | AttackKind::MinMax | AttackKind::MinSum | AttackKind::SignFlip => {
            matches!(threat, ThreatModel::T3 | ThreatModel::T4)
        }
        AttackKind::StaticLabelFlip | AttackKind::DynamicLabelFlip => {
            matches!(threat, ThreatModel::T5)
        }
    };
    if !legal {
        errors.push(Diagnostic {
            line: raw.line_of("attack.threat_model"),
            message: format!(
                "attack `{kind_raw}` is not defined under threat model {threat:?} \
                 (AGR-aware attacks need T1/T2, AGR-agnostic model attacks T3/T4, label flips T5)"
            ),
        });
    }
    Some(AttackConfig {
        kind,
        threat,
        perturbation,
        search,
        lie_z,
    })
}

fn parse_defense(
    raw: &RawConfig,
    flguard: FLGuardHyper,
    errors: &mut Vec<Diagnostic>,
) -> DefenseConfig {
    match raw.get("defense.kind").unwrap_or("fed_avg") {
        "fed_avg" | "fedavg" => DefenseConfig::FedAvg,
        "trimmed_mean" => DefenseConfig::TrimmedMean {
            m: raw.typed("defense.m", 0, errors),
        },
        "multi_krum" => DefenseConfig::MultiKrum {
            m_assumed: raw.typed("defense.M", 0, errors),
        },
        "bulyan" => DefenseConfig::Bulyan {
            m_assumed: raw.typed("defense.M", 0, errors),
        },
        "dnc" => DefenseConfig::Dnc {
            m_assumed: raw.typed("defense.M", 0, errors),
            e: raw.typed("defense.e", 1.5, errors),
            iters: raw.typed("defense.iters", 1, errors),
            subdim: raw.typed("defense.subdim", 3072, errors),
        },
        "fltrust" => DefenseConfig::FlTrust {
            root_size: raw.typed("defense.root_size", 100, errors),
        },
        "flguard" => DefenseConfig::FlGuard(flguard),
        other => {
            errors.push(Diagnostic {
                line: raw.line_of("defense.kind"),
                message: format!("unknown defense kind `{other}`"),
            });
            DefenseConfig::FedAvg
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate. `seed_override` wins over the file's seed.
    pub fn from_text(
        text: &str,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
        format_override: Option<OutputFormat>,
    ) -> Result<ExperimentConfig, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let mut errors: Vec<Diagnostic> = Vec::new();

        let seed = seed_override.unwrap_or_else(|| raw.typed("seed", 42u64, &mut errors));

        let dataset = match raw.get("dataset.kind").unwrap_or("synth") {
            "synth" => DatasetConfig::Synth {
                n_classes: raw.typed("dataset.n_classes", 4usize, &mut errors),
                dim: raw.typed("dataset.dim", 16usize, &mut errors),
                n_per_class: raw.typed("dataset.n_per_class", 120usize, &mut errors),
                test_per_class: raw.typed("dataset.test_per_class", 40usize, &mut errors),
                spread: raw.typed("dataset.spread", 0.05f64, &mut errors),
            },
            "idx" => {
                let path = |key: &str, errors: &mut Vec<Diagnostic>| -> PathBuf {
                    match raw.get(key) {
                        Some(p) => PathBuf::from(p),
                        None => {
                            errors.push(Diagnostic {
                                line: 0,
                                message: format!("dataset.kind = idx requires `{key}`"),
                            });
                            PathBuf::new()
                        }
                    }
                };
                DatasetConfig::Idx {
                    images: path("dataset.images", &mut errors),
                    labels: path("dataset.labels", &mut errors),
                    test_images: path("dataset.test_images", &mut errors),
                    test_labels: path("dataset.test_labels", &mut errors),
                }
            }
            other => {
                errors.push(Diagnostic {
                    line: raw.line_of("dataset.kind"),
                    message: format!("unknown dataset kind `{other}` (use synth or idx)"),
                });
                DatasetConfig::Synth {
                    n_classes: 4,
                    dim: 16,
                    n_per_class: 120,
                    test_per_class: 40,
                    spread: 0.05,
                }
            }
        };

        let default_q = match &dataset {
            DatasetConfig::Synth { n_classes, .. } => 1.0 / (*n_classes).max(1) as f64,
            DatasetConfig::Idx { .. } => 0.1,
        };
        let q = raw.typed("dataset.q", default_q, &mut errors);
        if !(q > 0.0 && q <= 1.0) {
            errors.push(Diagnostic {
                line: raw.line_of("dataset.q"),
                message: format!("dataset.q = {q} outside (0, 1]"),
            });
        }

        let n_clients = raw.typed("fl.N", 20usize, &mut errors);
        let fl = FLConfig {
            rounds: raw.typed("fl.R", 60u64, &mut errors),
            n_clients,
            n_malicious: raw.typed("fl.M", 0usize, &mut errors),
            participants: raw.typed("fl.P", n_clients, &mut errors),
            local_iters: raw.typed("fl.I", 5usize, &mut errors),
            batch: raw.typed("fl.b", 32usize, &mut errors),
            eta: raw.typed("fl.eta", 1.0f64, &mut errors),
            alpha: raw.typed("fl.alpha", 0.05f64, &mut errors),
            k: raw.typed("fl.k", 5u64, &mut errors),
            seed,
        };
        if 2 * fl.n_malicious >= fl.n_clients {
            errors.push(Diagnostic {
                line: raw.line_of("fl.M"),
                message: format!(
                    "malicious clients must stay a minority: M = {} violates M < N/2 with N = {}",
                    fl.n_malicious, fl.n_clients
                ),
            });
        } else if let Err(e) = fl.validate() {
            errors.push(Diagnostic {
                line: 0,
                message: e.to_string(),
            });
        }

        let hidden: Vec<usize> = match raw.get("model.hidden") {
            None => vec![32],
            Some(spec) if spec.trim().is_empty() => vec![],
            Some(spec) => {
                let mut out = Vec::new();
                for part in spec.split(',') {
                    match part.trim().parse::<usize>() {
                        Ok(v) if v > 0 => out.push(v),
                        _ => errors.push(Diagnostic {
                            line: raw.line_of("model.hidden"),
                            message: format!("model.hidden: bad layer width `{part}`"),
                        }),
                    }
                }
                out
            }
        };

        let defaults = FLGuardHyper::default();
        let flguard = FLGuardHyper {
            tau: raw.typed("flguard.tau", defaults.tau, &mut errors),
            noise_var: raw.typed("flguard.noise_var", defaults.noise_var, &mut errors),
            mask_ratio: raw.typed("flguard.mask_ratio", defaults.mask_ratio, &mut errors),
            lr: raw.typed("flguard.lr", defaults.lr, &mut errors),
            epochs: raw.typed("flguard.epochs", defaults.epochs, &mut errors),
            batch: raw.typed("flguard.batch", defaults.batch, &mut errors),
            pca_components: raw.typed("flguard.pca_components", defaults.pca_components, &mut errors),
            n_clusters: raw.typed("flguard.n_clusters", defaults.n_clusters, &mut errors),
        };
        if let Err(e) = flguard.validate() {
            errors.push(Diagnostic {
                line: 0,
                message: e.to_string(),
            });
        }

        let attack = parse_attack(&raw, &mut errors);
        let defense = parse_defense(&raw, flguard, &mut errors);

        // attack feasibility against the rest of the config
        if let Some(a) = &attack {
            if fl.n_malicious == 0 {
                errors.push(Diagnostic {
                    line: raw.line_of("attack.kind"),
                    message: "an attack is configured but fl.M = 0".into(),
                });
            }
            if a.kind == AttackKind::AdaptiveFlGuard
                && !matches!(defense, DefenseConfig::FlGuard(_))
            {
                errors.push(Diagnostic {
                    line: raw.line_of("attack.kind"),
                    message: "the adaptive attack targets the contrastive filter; set defense.kind = flguard".into(),
                });
            }
        }

        let output = OutputConfig {
            dir: out_override
                .unwrap_or_else(|| PathBuf::from(raw.get("output.dir").unwrap_or("out"))),
            format: format_override.unwrap_or(match raw.get("output.format") {
                None | Some("both") => OutputFormat::Both,
                Some("csv") => OutputFormat::Csv,
                Some("json") => OutputFormat::Json,
                Some(other) => {
                    errors.push(Diagnostic {
                        line: raw.line_of("output.format"),
                        message: format!("unknown output format `{other}`"),
                    });
                    OutputFormat::Both
                }
            }),
        };
        let record_timing = raw.typed("output.timing", false, &mut errors);

        if !errors.is_empty() {
            return Err(ConfigError(errors));
        }

        let mut cfg = ExperimentConfig {
            seed,
            dataset,
            q,
            fl,
            hidden,
            attack,
            defense,
            flguard,
            output,
            record_timing,
            echo: Vec::new(),
        };
        cfg.echo = cfg.effective_echo();
        Ok(cfg)
    }

    /// Sorted key/value pairs describing the effective configuration.
    pub fn effective_echo(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        push("seed", self.seed.to_string());
        match &self.dataset {
            DatasetConfig::Synth {
                n_classes,
                dim,
                n_per_class,
                test_per_class,
                spread,
            } => {
                push("dataset.kind", "synth".into());
                push("dataset.n_classes", n_classes.to_string());
                push("dataset.dim", dim.to_string());
                push("dataset.n_per_class", n_per_class.to_string());
                push("dataset.test_per_class", test_per_class.to_string());
                push("dataset.spread", spread.to_string());
            }
            DatasetConfig::Idx {
                images,
                labels,
                test_images,
                test_labels,
            } => {
                push("dataset.kind", "idx".into());
                push("dataset.images", images.display().to_string());
                push("dataset.labels", labels.display().to_string());
                push("dataset.test_images", test_images.display().to_string());
                push("dataset.test_labels", test_labels.display().to_string());
            }
        }
        push("dataset.q", self.q.to_string());
        push("fl.R", self.fl.rounds.to_string());
        push("fl.N", self.fl.n_clients.to_string());
        push("fl.M", self.fl.n_malicious.to_string());
        push("fl.P", self.fl.participants.to_string());
        push("fl.I", self.fl.local_iters.to_string());
        push("fl.b", self.fl.batch.to_string());
        push("fl.eta", self.fl.eta.to_string());
        push("fl.alpha", self.fl.alpha.to_string());
        push("fl.k", self.fl.k.to_string());
        push(
            "model.hidden",
            self.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        match &self.attack {
            None => push("attack.kind", "none".into()),
            Some(a) => {
                let kind = match a.kind {
                    AttackKind::SignFlip => "sf",
                    AttackKind::Lie => "lie",
                    AttackKind::MinMax => "min_max",
                    AttackKind::MinSum => "min_sum",
                    AttackKind::StatOpt => "stat_opt",
                    AttackKind::DynOpt => "dyn_opt",
                    AttackKind::AdaptiveFlGuard => "adaptive",
                    AttackKind::StaticLabelFlip => "slf",
                    AttackKind::DynamicLabelFlip => "dlf",
                };
                push("attack.kind", kind.into());
                push("attack.threat_model", format!("{:?}", a.threat).to_lowercase());
                push(
                    "attack.perturbation",
                    match a.perturbation {
                        Perturbation::InverseUnit => "uv".into(),
                        Perturbation::InverseSign => "sgn".into(),
                    },
                );
                push("attack.gamma_init", a.search.gamma_init.to_string());
                push("attack.threshold", a.search.threshold.to_string());
                push("attack.max_iters", a.search.max_iters.to_string());
                push("attack.lie_z", a.lie_z.to_string());
            }
        }
        match &self.defense {
            DefenseConfig::FedAvg => push("defense.kind", "fed_avg".into()),
            DefenseConfig::TrimmedMean { m } => {
                push("defense.kind", "trimmed_mean".into());
                push("defense.m", m.to_string());
            }
            DefenseConfig::MultiKrum { m_assumed } => {
                push("defense.kind", "multi_krum".into());
                push("defense.M", m_assumed.to_string());
            }
            DefenseConfig::Bulyan { m_assumed } => {
                push("defense.kind", "bulyan".into());
                push("defense.M", m_assumed.to_string());
            }
            DefenseConfig::Dnc {
                m_assumed,
                e,
                iters,
                subdim,
            } => {
                push("defense.kind", "dnc".into());
                push("defense.M", m_assumed.to_string());
                push("defense.e", e.to_string());
                push("defense.iters", iters.to_string());
                push("defense.subdim", subdim.to_string());
            }
            DefenseConfig::FlTrust { root_size } => {
                push("defense.kind", "fltrust".into());
                push("defense.root_size", root_size.to_string());
            }
            DefenseConfig::FlGuard(h) => {
                push("defense.kind", "flguard".into());
                push("flguard.tau", h.tau.to_string());
                push("flguard.noise_var", h.noise_var.to_string());
                push("flguard.mask_ratio", h.mask_ratio.to_string());
                push("flguard.lr", h.lr.to_string());
                push("flguard.epochs", h.epochs.to_string());
                push("flguard.batch", h.batch.to_string());
                push("flguard.pca_components", h.pca_components.to_string());
                push("flguard.n_clusters", h.n_clusters.to_string());
            }
        }
        push("output.timing", self.record_timing.to_string());
        kv.sort();
        kv
    }
}
