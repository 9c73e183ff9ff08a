//! JSON context configuration and the exact `λ_n` cache.
//!
//! ```json
//! { "family": "B", "d": 2, "k": {"long": "3/2", "short": "1/2"}, "N": 14 }
//! ```
//!
//! `k` is one scalar (uniform), a list in orbit order, or a map from orbit
//! label to scalar. Scalars are rational strings, decimal numbers, or
//! `{"re": .., "im": ..}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dunkl::DunklContext;
use crate::error::{Error, Result};
use crate::kernel::default_truncation;
use crate::reflection_groups::{
    generate_group, orbit_labels, select_positive, Family, RootSystem, DEFAULT_GROUP_CAP,
};
use crate::scalar::{CRational, Scalar};

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "DUNKL_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealLiteral {
    Text(String),
    Number(f64),
}

impl RealLiteral {
    fn text(&self) -> String {
        match self {
            RealLiteral::Text(s) => s.clone(),
            // shortest round-trip decimal, so 0.1 becomes 1/10 in exact mode
            RealLiteral::Number(v) => format!("{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarLiteral {
    Real(RealLiteral),
    Complex { re: RealLiteral, im: RealLiteral },
}

impl ScalarLiteral {
    pub fn parse<C: Scalar>(&self) -> Result<C> {
        match self {
            ScalarLiteral::Real(r) => C::parse_scalar(&r.text()),
            ScalarLiteral::Complex { re, im } => {
                Ok(C::from_parts(C::parse_scalar(&re.text())?, C::parse_scalar(&im.text())?))
            }
        }
    }

    /// Whether the literal has an exact rational reading.
    fn is_exact(&self) -> bool {
        let ok = |r: &RealLiteral| match r {
            RealLiteral::Text(s) => CRational::parse_scalar(s).is_ok(),
            RealLiteral::Number(v) => v.is_finite(),
        };
        match self {
            ScalarLiteral::Real(r) => ok(r),
            ScalarLiteral::Complex { re, im } => ok(re) && ok(im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultiplicitySpec {
    Uniform(ScalarLiteral),
    Orbits(Vec<ScalarLiteral>),
    Named(BTreeMap<String, ScalarLiteral>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Order parameter of `I2(m)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Explicit roots for `"custom"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<Vec<Vec<ScalarLiteral>>>,
    pub k: MultiplicitySpec,
    #[serde(default, rename = "N", alias = "n", skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

impl ContextConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ContextConfig = serde_json::from_str(s)?;
        cfg.param()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Rank parameter passed to [`RootSystem::build`].
    pub fn param(&self) -> Result<usize> {
        let missing = |what: &str| Error::Config(format!("family {} needs \"{what}\"", self.family));
        match self.family {
            Family::I2 => self.m.ok_or_else(|| missing("m")),
            Family::Custom => {
                let roots = self.roots.as_ref().ok_or_else(|| missing("roots"))?;
                roots.first().map(|r| r.len()).ok_or_else(|| Error::Config("empty root list".into()))
            }
            _ => self.d.ok_or_else(|| missing("d")),
        }
    }

    /// Whether the root system has irrational entries and must run in
    /// floating mode.
    pub fn needs_float(&self) -> bool {
        let roots_float = match self.family {
            Family::I2 => !matches!(self.m, Some(1 | 2 | 4)),
            Family::Custom => self.roots.iter().flatten().flatten().any(|s| !s.is_exact()),
            _ => false,
        };
        roots_float || !self.k_literals().iter().all(|s| s.is_exact())
    }

    fn k_literals(&self) -> Vec<&ScalarLiteral> {
        match &self.k {
            MultiplicitySpec::Uniform(s) => vec![s],
            MultiplicitySpec::Orbits(v) => v.iter().collect(),
            MultiplicitySpec::Named(m) => m.values().collect(),
        }
    }

    pub fn root_system<C: Scalar>(&self) -> Result<RootSystem<C>> {
        match (&self.family, &self.roots) {
            (Family::Custom, Some(roots)) => {
                let parsed = roots
                    .iter()
                    .map(|r| r.iter().map(|s| s.parse::<C>()).collect::<Result<Vec<C>>>())
                    .collect::<Result<Vec<_>>>()?;
                RootSystem::custom(self.param()?, parsed)
            }
            _ => RootSystem::build(self.family, self.param()?),
        }
    }

    /// Dunkl context with the configured multiplicities (not yet prepared).
    pub fn context<C: Scalar>(&self) -> Result<DunklContext<C>> {
        let rs = self.root_system::<C>()?;
        let values = self.orbit_values(&rs)?;
        DunklContext::for_roots(rs, values)
    }

    fn orbit_values<C: Scalar>(&self, rs: &RootSystem<C>) -> Result<Vec<C>> {
        match &self.k {
            MultiplicitySpec::Uniform(s) => Ok(vec![s.parse()?]),
            MultiplicitySpec::Orbits(v) => v.iter().map(|s| s.parse()).collect(),
            MultiplicitySpec::Named(map) => {
                let group = generate_group(&select_positive(rs), DEFAULT_GROUP_CAP)?;
                let labels = orbit_labels(rs, &group);
                if let Some(bad) = map.keys().find(|key| !labels.contains(key)) {
                    return Err(Error::Config(format!(
                        "unknown orbit \"{bad}\"; orbits are {}",
                        labels.join(", ")
                    )));
                }
                labels
                    .iter()
                    .map(|l| {
                        map.get(l)
                            .ok_or_else(|| Error::Config(format!("no multiplicity for orbit \"{l}\"")))?
                            .parse()
                    })
                    .collect()
            }
        }
    }

    /// Configured truncation degree, else the default for the dimension.
    pub fn truncation(&self) -> Result<usize> {
        match self.degree {
            Some(n) => Ok(n),
            None => {
                let d = match self.family {
                    Family::I2 => 2,
                    _ => self.param()?,
                };
                Ok(default_truncation(d))
            }
        }
    }

    /// Stable short key for cache file names.
    pub fn cache_key(&self) -> String {
        let mut canon = self.clone();
        canon.degree = None;
        let text = serde_json::to_string(&canon).unwrap_or_default();
        // FNV-1a, stable across toolchains
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{}{}-{h:016x}", self.family, self.param().unwrap_or(0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedDegree {
    pub n: usize,
    /// `λ_n(g)` by group index as rational strings; `null` when `H_n` is
    /// realized on `P_n` instead.
    pub lambda: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextCache {
    pub key: String,
    pub group_order: usize,
    pub gamma: String,
    pub degrees: Vec<CachedDegree>,
}

impl ContextCache {
    pub fn from_context(key: &str, ctx: &DunklContext<CRational>) -> Result<Self> {
        let mut degrees = Vec::new();
        for n in 1..=ctx.prepared_degree() {
            let lambda = ctx.h(n)?.lambda().map(|l| l.coefficients().iter().map(|c| c.to_string()).collect());
            degrees.push(CachedDegree { n, lambda });
        }
        Ok(ContextCache {
            key: key.to_string(),
            group_order: ctx.group().order(),
            gamma: ctx.gamma().to_string(),
            degrees,
        })
    }

    /// Installs cached degrees in order, stopping at the first one without
    /// group-algebra coefficients. Each installed `λ_n` is re-checked.
    pub fn restore(&self, ctx: &mut DunklContext<CRational>) -> Result<usize> {
        if self.group_order != ctx.group().order() {
            return Err(Error::Config("cache does not match the configured group".into()));
        }
        for deg in &self.degrees {
            if deg.n != ctx.prepared_degree() + 1 {
                continue;
            }
            let Some(lambda) = &deg.lambda else { break };
            let values = lambda.iter().map(|s| CRational::parse_scalar(s)).collect::<Result<Vec<_>>>()?;
            ctx.install_lambda(deg.n, values)?;
        }
        Ok(ctx.prepared_degree())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        }
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Cache directory from [`CACHE_DIR_ENV`], if set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn cache_path(dir: &Path, cfg: &ContextConfig) -> PathBuf {
    dir.join(format!("{}.json", cfg.cache_key()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex64;

    #[test]
    fn parses_named_orbits() {
        let cfg = ContextConfig::from_json(r#"{"family":"B","d":2,"k":{"long":"3/2","short":"1/2"}}"#).unwrap();
        assert!(!cfg.needs_float());
        let ctx = cfg.context::<CRational>().unwrap();
        assert_eq!(ctx.group().order(), 8);
        assert_eq!(ctx.gamma(), &CRational::from_i64(4));
        assert_eq!(cfg.truncation().unwrap(), 14);
    }

    #[test]
    fn scalar_forms() {
        let cfg = ContextConfig::from_json(r#"{"family":"Z2","d":1,"k":0.5,"N":6}"#).unwrap();
        let ctx = cfg.context::<CRational>().unwrap();
        assert_eq!(ctx.gamma(), &CRational::ratio(1, 2));
        assert_eq!(cfg.truncation().unwrap(), 6);
        let cfg = ContextConfig::from_json(r#"{"family":"Z2","d":1,"k":{"re":"1/2","im":"1"}}"#).unwrap();
        let ctx = cfg.context::<CRational>().unwrap();
        assert_eq!(ctx.gamma(), &CRational::new(CRational::ratio(1, 2).re, CRational::from_i64(1).re));
        let cfg = ContextConfig::from_json(r#"{"family":"Z2","d":2,"k":["1","2"]}"#).unwrap();
        assert_eq!(cfg.context::<CRational>().unwrap().gamma(), &CRational::from_i64(3));
    }

    #[test]
    fn float_mode_for_dihedral() {
        let cfg = ContextConfig::from_json(r#"{"family":"I2","m":5,"k":"1/2"}"#).unwrap();
        assert!(cfg.needs_float());
        let ctx = cfg.context::<Complex64>().unwrap();
        assert_eq!(ctx.group().order(), 10);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ContextConfig::from_json(r#"{"family":"B","k":"1"}"#).is_err());
        assert!(ContextConfig::from_json(r#"{"family":"Q","d":2,"k":"1"}"#).is_err());
        let cfg = ContextConfig::from_json(r#"{"family":"B","d":2,"k":{"long":"1","tiny":"1"}}"#).unwrap();
        assert!(cfg.context::<CRational>().is_err());
        let cfg = ContextConfig::from_json(r#"{"family":"B","d":2,"k":{"long":"1"}}"#).unwrap();
        assert!(cfg.context::<CRational>().is_err());
    }

    #[test]
    fn cache_round_trip() {
        let cfg = ContextConfig::from_json(r#"{"family":"B","d":2,"k":{"long":"1/2","short":"1"}}"#).unwrap();
        let mut ctx = cfg.context::<CRational>().unwrap();
        ctx.prepare(4).unwrap();
        let cache = ContextCache::from_context(&cfg.cache_key(), &ctx).unwrap();
        let text = serde_json::to_string(&cache).unwrap();
        assert!(!text.contains('.'));
        let back: ContextCache = serde_json::from_str(&text).unwrap();
        let mut fresh = cfg.context::<CRational>().unwrap();
        assert_eq!(back.restore(&mut fresh).unwrap(), 4);
        for n in 1..=4 {
            assert_eq!(fresh.h(n).unwrap().lambda(), ctx.h(n).unwrap().lambda());
        }
        // a different k gives a different key
        let other = ContextConfig::from_json(r#"{"family":"B","d":2,"k":{"long":"1","short":"1"}}"#).unwrap();
        assert_ne!(other.cache_key(), cfg.cache_key());
    }
}
