//! Run manifests: which suite, detector, methods and attack settings a run uses.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use patchsearch::attack::{AttackConfig, Placement, Strategy};
use patchsearch::config::KeyValues;
use patchsearch::detector::{Task, ToyDetectorConfig};
use patchsearch::rng::RngSeed;

pub const DEFAULT_AREA_THRESHOLD: f64 = 0.1;

/// Attack method run on every scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ldap,
    Fixed(Placement),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ldap => "ldap",
            Method::Fixed(p) => p.name(),
        }
    }

    pub fn all() -> Vec<Method> {
        std::iter::once(Method::Ldap)
            .chain(Placement::ALL.into_iter().map(Method::Fixed))
            .collect()
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "ldap" {
            return Ok(Method::Ldap);
        }
        s.parse::<Placement>()
            .map(Method::Fixed)
            .map_err(|_| format!("unknown method `{s}`"))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Train / validation / test pair counts for the patch detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaSplit {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for AdaSplit {
    fn default() -> Self {
        Self {
            train: 40,
            val: 20,
            test: 40,
        }
    }
}

impl AdaSplit {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    /// Suite name as written in the manifest, echoed verbatim.
    pub suite_id: String,
    pub suite_dir: PathBuf,
    /// Restricts the run to these scene seeds; all suite scenes when `None`.
    pub seeds: Option<Vec<u64>>,
    pub detector: ToyDetectorConfig,
    pub methods: Vec<Method>,
    pub attack: AttackConfig,
    pub area_threshold: f64,
    pub ada: AdaSplit,
}

const MANIFEST_KEYS: &[&str] = &[
    "suite",
    "seeds",
    "detector",
    "detector.*",
    "methods",
    "area_threshold",
    "ada_train",
    "ada_val",
    "ada_test",
];

/// Command-line overrides applied on top of a manifest file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub task: Option<Task>,
    pub strategy: Option<Strategy>,
    pub n_primitives: Option<usize>,
    pub max_steps: Option<usize>,
    pub area_threshold: Option<f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_key_values(&kv, base).with_context(|| format!("manifest {}", path.display()))
    }

    /// Relative paths are resolved against `base`.
    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<Self> {
        let attack_keys: Vec<String> = AttackConfig::default().to_key_values().keys().map(String::from).collect();
        let mut known: Vec<&str> = MANIFEST_KEYS.to_vec();
        known.extend(attack_keys.iter().map(String::as_str));
        kv.reject_unknown(&known)?;

        let Some(suite_id) = kv.get("suite") else {
            bail!("manifest needs a `suite` directory");
        };
        let suite_dir = base.join(suite_id);

        let mut det_kv = match kv.get("detector") {
            Some(p) => KeyValues::load(base.join(p))?,
            None => {
                let default = suite_dir.join(crate::suite::DETECTOR_FILE);
                if default.exists() {
                    KeyValues::load(default)?
                } else {
                    KeyValues::default()
                }
            }
        };
        for k in kv.keys() {
            if let Some(inner) = k.strip_prefix("detector.") {
                det_kv.set(inner, kv.get(k).unwrap_or_default());
            }
        }
        let detector = ToyDetectorConfig::from_key_values(&det_kv).context("detector config")?;

        let mut attack = AttackConfig::default();
        attack.apply(kv)?;

        let methods = match kv.list::<Method>("methods")? {
            Some(m) if m.is_empty() => bail!("`methods` is empty"),
            Some(m) => m,
            None => vec![Method::Ldap],
        };
        let mut ada = AdaSplit::default();
        kv.read_into("ada_train", &mut ada.train)?;
        kv.read_into("ada_val", &mut ada.val)?;
        kv.read_into("ada_test", &mut ada.test)?;

        let m = Self {
            suite_id: suite_id.to_string(),
            suite_dir,
            seeds: kv.get("seeds").map(parse_seeds).transpose()?,
            detector,
            methods,
            attack,
            area_threshold: kv.parsed("area_threshold")?.unwrap_or(DEFAULT_AREA_THRESHOLD),
            ada,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.attack.seed = RngSeed(s);
        }
        if let Some(m) = &o.methods {
            self.methods = m.clone();
        }
        if let Some(t) = o.task {
            self.attack.task = t;
        }
        if let Some(s) = o.strategy {
            self.attack.strategy = s;
        }
        if let Some(n) = o.n_primitives {
            self.attack.n_primitives = n;
        }
        if let Some(n) = o.max_steps {
            self.attack.max_steps = n;
        }
        if let Some(a) = o.area_threshold {
            self.area_threshold = a;
        }
        self.attack.validate()?;
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("no methods selected");
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                bail!("method `{m}` listed twice");
            }
        }
        if !(self.area_threshold > 0.0 && self.area_threshold.is_finite()) {
            bail!("area_threshold must be positive");
        }
        if self.ada.train == 0 || self.ada.val == 0 || self.ada.test == 0 {
            bail!("ADA split sizes must be positive");
        }
        Ok(())
    }

    /// Fully resolved manifest, defaults included, for `manifest.txt`.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = self.attack.to_key_values();
        kv.set("suite", &self.suite_id);
        if let Some(seeds) = &self.seeds {
            kv.set("seeds", join(seeds));
        }
        let det = self.detector.to_key_values();
        for k in det.keys() {
            kv.set(format!("detector.{k}"), det.get(k).unwrap_or_default());
        }
        kv.set("methods", join(&self.methods));
        kv.set("area_threshold", self.area_threshold);
        kv.set("ada_train", self.ada.train);
        kv.set("ada_val", self.ada.val);
        kv.set("ada_test", self.ada.test);
        kv
    }
}

/// Comma-separated seeds and inclusive `a-b` ranges.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let parse = |s: &str| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    if out.is_empty() {
        bail!("`seeds` is empty");
    }
    Ok(out)
}

pub fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
