//! Two-arm bandit over the UCI Mushroom (`agaricus-lepiota`) records.
//!
//! Arm 0 eats the mushroom, arm 1 leaves it. Contexts are the one-hot
//! encoding of the 22 categorical attributes, built from the values observed
//! in the file, followed by the bias feature. Both arms see the same context.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_arm, read_file, EnvError, EnvStep, Environment, RegretKind};
use crate::bandit::ContextVector;

pub const EAT: usize = 0;
pub const NO_EAT: usize = 1;

type Domain = &'static [(char, &'static str)];

/// Attribute names with their value codes and readable labels.
pub const ATTRIBUTES: [(&str, Domain); 22] = [
    ("cap-shape", &[('b', "bell"), ('c', "conical"), ('x', "convex"), ('f', "flat"), ('k', "knobbed"), ('s', "sunken")]),
    ("cap-surface", &[('f', "fibrous"), ('g', "grooves"), ('y', "scaly"), ('s', "smooth")]),
    (
        "cap-color",
        &[
            ('n', "brown"), ('b', "buff"), ('c', "cinnamon"), ('g', "gray"), ('r', "green"),
            ('p', "pink"), ('u', "purple"), ('e', "red"), ('w', "white"), ('y', "yellow"),
        ],
    ),
    ("bruises", &[('t', "bruises"), ('f', "no")]),
    (
        "odor",
        &[
            ('a', "almond"), ('l', "anise"), ('c', "creosote"), ('y', "fishy"), ('f', "foul"),
            ('m', "musty"), ('n', "none"), ('p', "pungent"), ('s', "spicy"),
        ],
    ),
    ("gill-attachment", &[('a', "attached"), ('d', "descending"), ('f', "free"), ('n', "notched")]),
    ("gill-spacing", &[('c', "close"), ('w', "crowded"), ('d', "distant")]),
    ("gill-size", &[('b', "broad"), ('n', "narrow")]),
    (
        "gill-color",
        &[
            ('k', "black"), ('n', "brown"), ('b', "buff"), ('h', "chocolate"), ('g', "gray"), ('r', "green"),
            ('o', "orange"), ('p', "pink"), ('u', "purple"), ('e', "red"), ('w', "white"), ('y', "yellow"),
        ],
    ),
    ("stalk-shape", &[('e', "enlarging"), ('t', "tapering")]),
    (
        "stalk-root",
        &[('b', "bulbous"), ('c', "club"), ('u', "cup"), ('e', "equal"), ('z', "rhizomorphs"), ('r', "rooted"), ('?', "missing")],
    ),
    ("stalk-surface-above-ring", &[('f', "fibrous"), ('y', "scaly"), ('k', "silky"), ('s', "smooth")]),
    ("stalk-surface-below-ring", &[('f', "fibrous"), ('y', "scaly"), ('k', "silky"), ('s', "smooth")]),
    (
        "stalk-color-above-ring",
        &[
            ('n', "brown"), ('b', "buff"), ('c', "cinnamon"), ('g', "gray"), ('o', "orange"),
            ('p', "pink"), ('e', "red"), ('w', "white"), ('y', "yellow"),
        ],
    ),
    (
        "stalk-color-below-ring",
        &[
            ('n', "brown"), ('b', "buff"), ('c', "cinnamon"), ('g', "gray"), ('o', "orange"),
            ('p', "pink"), ('e', "red"), ('w', "white"), ('y', "yellow"),
        ],
    ),
    ("veil-type", &[('p', "partial"), ('u', "universal")]),
    ("veil-color", &[('n', "brown"), ('o', "orange"), ('w', "white"), ('y', "yellow")]),
    ("ring-number", &[('n', "none"), ('o', "one"), ('t', "two")]),
    (
        "ring-type",
        &[
            ('c', "cobwebby"), ('e', "evanescent"), ('f', "flaring"), ('l', "large"),
            ('n', "none"), ('p', "pendant"), ('s', "sheathing"), ('z', "zone"),
        ],
    ),
    (
        "spore-print-color",
        &[
            ('k', "black"), ('n', "brown"), ('b', "buff"), ('h', "chocolate"), ('r', "green"),
            ('o', "orange"), ('u', "purple"), ('w', "white"), ('y', "yellow"),
        ],
    ),
    ("population", &[('a', "abundant"), ('c', "clustered"), ('n', "numerous"), ('s', "scattered"), ('v', "several"), ('y', "solitary")]),
    ("habitat", &[('g', "grasses"), ('l', "leaves"), ('m', "meadows"), ('p', "paths"), ('u', "urban"), ('w', "waste"), ('d', "woods")]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MushroomRewards {
    pub eat_edible: f64,
    pub eat_poisonous: f64,
    pub noeat_edible: f64,
    pub noeat_poisonous: f64,
}

impl Default for MushroomRewards {
    fn default() -> Self {
        Self {
            eat_edible: 5.0,
            eat_poisonous: -35.0,
            noeat_edible: 0.0,
            noeat_poisonous: 5.0,
        }
    }
}

impl MushroomRewards {
    /// Expected reward of `arm` for a record of the given class.
    pub fn reward(&self, edible: bool, arm: usize) -> f64 {
        match (edible, arm) {
            (true, EAT) => self.eat_edible,
            (false, EAT) => self.eat_poisonous,
            (true, _) => self.noeat_edible,
            (false, _) => self.noeat_poisonous,
        }
    }

    fn range(&self) -> (f64, f64) {
        let vals = [self.eat_edible, self.eat_poisonous, self.noeat_edible, self.noeat_poisonous];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushroomConfig {
    pub data_path: PathBuf,
    #[serde(default)]
    pub rewards: MushroomRewards,
}

#[derive(Debug, Clone)]
struct Record {
    edible: bool,
    /// Index into each attribute's domain table.
    values: [u8; 22],
}

/// Parsed records plus the data-derived one-hot layout.
#[derive(Debug)]
pub struct MushroomData {
    records: Vec<Record>,
    /// Column offset of each observed (attribute, domain index) pair.
    columns: [Vec<Option<usize>>; 22],
    categorical_dim: usize,
    rewards: MushroomRewards,
}

impl MushroomData {
    pub fn load(config: &MushroomConfig) -> Result<Self, EnvError> {
        let text = read_file(&config.data_path)?;
        Self::parse(&text, &config.data_path, config.rewards)
    }

    pub fn parse(text: &str, path: &Path, rewards: MushroomRewards) -> Result<Self, EnvError> {
        let malformed = |line: usize, message: String| EnvError::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 23 {
                return Err(malformed(line_no, format!("expected 23 fields, found {}", fields.len())));
            }
            let edible = match fields[0] {
                "e" => true,
                "p" => false,
                other => return Err(malformed(line_no, format!("class must be 'e' or 'p', found '{other}'"))),
            };
            let mut values = [0u8; 22];
            for (j, field) in fields[1..].iter().enumerate() {
                let (name, domain) = ATTRIBUTES[j];
                let mut chars = field.chars();
                let code = match (chars.next(), chars.next()) {
                    (Some(c), None) => c,
                    _ => {
                        return Err(EnvError::UnknownCategory {
                            path: path.to_path_buf(),
                            line: line_no,
                            attribute: name,
                            value: field.to_string(),
                        })
                    }
                };
                let idx = domain.iter().position(|&(c, _)| c == code).ok_or_else(|| EnvError::UnknownCategory {
                    path: path.to_path_buf(),
                    line: line_no,
                    attribute: name,
                    value: field.to_string(),
                })?;
                values[j] = idx as u8;
            }
            records.push(Record { edible, values });
        }
        if records.is_empty() {
            return Err(EnvError::Empty(format!("{} holds no mushroom records", path.display())));
        }

        let mut seen: [Vec<bool>; 22] = std::array::from_fn(|j| vec![false; ATTRIBUTES[j].1.len()]);
        for r in &records {
            for (j, &v) in r.values.iter().enumerate() {
                seen[j][v as usize] = true;
            }
        }
        let mut offset = 0;
        let columns = std::array::from_fn(|j| {
            seen[j]
                .iter()
                .map(|&s| {
                    s.then(|| {
                        offset += 1;
                        offset - 1
                    })
                })
                .collect()
        });
        Ok(Self {
            records,
            columns,
            categorical_dim: offset,
            rewards,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One-hot width before the bias feature.
    pub fn categorical_dim(&self) -> usize {
        self.categorical_dim
    }

    pub fn rewards(&self) -> MushroomRewards {
        self.rewards
    }

    pub fn is_edible(&self, index: usize) -> bool {
        self.records[index].edible
    }

    pub fn encode(&self, index: usize) -> Result<ContextVector, EnvError> {
        let mut x = vec![0.0; self.categorical_dim];
        for (j, &v) in self.records[index].values.iter().enumerate() {
            let col = self.columns[j][v as usize].expect("observed value has a column");
            x[col] = 1.0;
        }
        Ok(ContextVector::augmented(x)?)
    }

    fn describe(&self, index: usize, decoded: bool) -> String {
        self.records[index]
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (name, domain) = ATTRIBUTES[j];
                let (code, label) = domain[v as usize];
                if decoded {
                    format!("{name}={label}")
                } else {
                    format!("{name}={code}")
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Samples records with replacement.
pub struct MushroomEnv {
    data: Arc<MushroomData>,
    rng: ChaCha8Rng,
    pending: Option<usize>,
}

impl MushroomEnv {
    pub fn new(data: Arc<MushroomData>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { data, rng, pending: None }
    }
}

impl Environment for MushroomEnv {
    fn name(&self) -> &'static str {
        "mushroom"
    }

    fn num_arms(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.data.categorical_dim + 1
    }

    fn reward_range(&self) -> (f64, f64) {
        self.data.rewards.range()
    }

    fn regret_kind(&self) -> RegretKind {
        RegretKind::Expected
    }

    fn next_step(&mut self) -> Result<EnvStep, EnvError> {
        let index = self.rng.random_range(0..self.data.len());
        self.pending = Some(index);
        let x = self.data.encode(index)?;
        let edible = self.data.is_edible(index);
        let rewards = self.data.rewards;
        let expected = vec![rewards.reward(edible, EAT), rewards.reward(edible, NO_EAT)];
        let mut step = EnvStep::new(
            vec![x.clone(), x],
            expected,
            vec![
                "eat: eat the mushroom".to_string(),
                "don't eat: leave the mushroom alone".to_string(),
            ],
            self.data.describe(index, false),
        );
        step.feature_text = self.data.describe(index, true);
        Ok(step)
    }

    fn pull(&mut self, arm: usize) -> Result<f64, EnvError> {
        check_arm(arm, 2)?;
        let index = self.pending.take().ok_or(EnvError::NoPendingRound)?;
        Ok(self.data.rewards.reward(self.data.is_edible(index), arm))
    }
}
