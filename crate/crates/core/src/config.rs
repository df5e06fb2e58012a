//! JSON configuration files: groups, cycles and morphisms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, GroupError};
use crate::group::{Factor, PlecticGroup, SchottkyFactor};
use crate::integration::{CycleTermRecord, PlecticCycle};
use crate::padic::parse_rational;
use crate::proj::Pgl2;
use crate::schreier::{CosetTable, FiniteIndexSubgroup, StallingsGraph};
use crate::tree::BoundaryBall;
use crate::words::FreeWord;

/// A matrix `[[a, b], [c, d]]` of rational strings, or a hyperbolic element
/// given by its attracting and repelling points and multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorConfig {
    Matrix([[String; 2]; 2]),
    Fixed { attracting: String, repelling: String, multiplier: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallConfig {
    pub center: String,
    pub radius: i64,
    #[serde(default)]
    pub complement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlaceConfig {
    Trivial,
    Cyclic { generator: GeneratorConfig },
    Schottky { generators: Vec<GeneratorConfig>, balls: Vec<BallConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    #[serde(default)]
    pub name: String,
    pub p: u32,
    pub precision: u32,
    pub places: Vec<PlaceConfig>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_word_bound")]
    pub word_bound: usize,
    #[serde(default)]
    pub seed: u64,
    /// Default cycle for `integrate` and `aj`.
    #[serde(default)]
    pub cycle: Option<Vec<CycleTermRecord>>,
}

fn default_depth() -> usize {
    2
}

fn default_word_bound() -> usize {
    8
}

fn rational(s: &str) -> Result<num_rational::BigRational, ConfigError> {
    parse_rational(s).ok_or_else(|| ConfigError::Invalid(format!("not a rational: {s:?}")))
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<Pgl2, ConfigError> {
        match self {
            GeneratorConfig::Matrix(m) => Pgl2::from_strings(m).ok_or_else(|| ConfigError::Invalid(format!("bad matrix {m:?}"))),
            GeneratorConfig::Fixed { attracting, repelling, multiplier } => {
                Pgl2::with_fixed_points(&rational(attracting)?, &rational(repelling)?, &rational(multiplier)?)
                    .map_err(|e| ConfigError::Group(GroupError::Geom(e)))
            }
        }
    }
}

impl BallConfig {
    pub fn build(&self, p: u32) -> Result<BoundaryBall, ConfigError> {
        let b = BoundaryBall::closed(p, &rational(&self.center)?, self.radius);
        Ok(if self.complement { b.complement() } else { b })
    }
}

impl GroupConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: GroupConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.p < 2 || !(2..self.p).take_while(|d| d * d <= self.p).all(|d| self.p % d != 0) {
            return Err(ConfigError::Invalid(format!("{} is not prime", self.p)));
        }
        if self.precision == 0 || self.depth == 0 || self.word_bound == 0 {
            return Err(ConfigError::Invalid("precision, depth and word_bound must be positive".into()));
        }
        if self.places.is_empty() {
            return Err(ConfigError::Invalid("no places".into()));
        }
        Ok(())
    }

    /// Certifies every factor.
    pub fn build(&self) -> Result<PlecticGroup, ConfigError> {
        let (p, n) = (self.p, self.precision);
        let factors = self
            .places
            .iter()
            .map(|pl| {
                Ok(match pl {
                    PlaceConfig::Trivial => Factor::Trivial,
                    PlaceConfig::Cyclic { generator } => {
                        Factor::Cyclic(SchottkyFactor::cyclic(p, n, generator.build()?).map_err(GroupError::from)?)
                    }
                    PlaceConfig::Schottky { generators, balls } => {
                        let gens = generators.iter().map(GeneratorConfig::build).collect::<Result<Vec<_>, _>>()?;
                        let balls = balls.iter().map(|b| b.build(p)).collect::<Result<Vec<_>, _>>()?;
                        let f = SchottkyFactor::certify(p, n, gens, balls).map_err(GroupError::from)?;
                        if f.rank() == 1 {
                            Factor::Cyclic(f)
                        } else {
                            Factor::Schottky(f)
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(PlecticGroup::new(p, n, factors))
    }

    pub fn default_cycle(&self) -> Result<Option<PlecticCycle>, ConfigError> {
        self.cycle.as_ref().map(|c| cycle_from_records(c, self)).transpose()
    }
}

fn read(path: impl AsRef<Path>) -> Result<String, ConfigError> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

pub fn cycle_from_records(recs: &[CycleTermRecord], cfg: &GroupConfig) -> Result<PlecticCycle, ConfigError> {
    let d = PlecticCycle::from_records(recs, cfg.p, cfg.precision)?;
    if d.terms.iter().any(|t| t.places.len() != cfg.places.len()) {
        return Err(ConfigError::Invalid(format!("cycle terms must have {} places", cfg.places.len())));
    }
    Ok(d)
}

/// A cycle file: a JSON array of terms `{"coeff": 1, "places": [{"x": "2", "y": "3"}]}`.
pub fn load_cycle(path: impl AsRef<Path>, cfg: &GroupConfig) -> Result<PlecticCycle, ConfigError> {
    let recs: Vec<CycleTermRecord> = serde_json::from_str(&read(path)?)?;
    cycle_from_records(&recs, cfg)
}

/// A subgroup of one factor: the whole factor, a coset action, or the
/// subgroup generated by words (which must have finite index).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SubgroupConfig {
    #[serde(default)]
    pub table: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub words: Option<Vec<String>>,
}

impl SubgroupConfig {
    pub fn build(&self, f: &SchottkyFactor) -> Result<FiniteIndexSubgroup, ConfigError> {
        let table = match (&self.table, &self.words) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("give either a table or words, not both".into())),
            (Some(t), None) => CosetTable::from_action(t.clone())?,
            (None, Some(ws)) => {
                let words = ws
                    .iter()
                    .map(|w| FreeWord::parse(w).ok_or_else(|| ConfigError::Invalid(format!("bad word {w:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                StallingsGraph::fold(f.rank(), &words)
                    .coset_table()
                    .map_err(|_| ConfigError::Invalid("subgroup words generate an infinite-index subgroup".into()))?
            }
            (None, None) => CosetTable::trivial(f.rank()),
        };
        if table.rank() != f.rank() {
            return Err(ConfigError::Invalid(format!("coset table has rank {}, factor has rank {}", table.rank(), f.rank())));
        }
        Ok(FiniteIndexSubgroup::new(f.clone(), table)?)
    }
}

/// `{"g": [matrix per place], "target": {...}, "source": {...}, "word_bound": n}`.
/// Only the first nontrivial place (or `place`) carries subgroups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphismConfig {
    pub g: Vec<[[String; 2]; 2]>,
    #[serde(default)]
    pub place: Option<usize>,
    #[serde(default)]
    pub source: SubgroupConfig,
    #[serde(default)]
    pub target: SubgroupConfig,
    #[serde(default = "default_word_bound")]
    pub word_bound: usize,
    /// Sample cycles for the functoriality check.
    #[serde(default)]
    pub samples: Vec<Vec<CycleTermRecord>>,
}

impl MorphismConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(&read(path)?)?)
    }

    pub fn place(&self, group: &PlecticGroup) -> Result<usize, ConfigError> {
        match self.place {
            Some(k) => Ok(k),
            None => group.support().first().copied().ok_or_else(|| ConfigError::Invalid("group has no nontrivial place".into())),
        }
    }

    pub fn matrix(&self, place: usize) -> Result<Pgl2, ConfigError> {
        let m = self.g.get(place).ok_or_else(|| ConfigError::Invalid(format!("no matrix for place {place}")))?;
        Pgl2::from_strings(m).ok_or_else(|| ConfigError::Invalid(format!("bad matrix {m:?}")))
    }
}
