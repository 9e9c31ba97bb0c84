//! Labeled sample records and the stratified 70/30 then 90/10 split.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::{Error, Result};

/// Diagnosis; malignant is the positive class everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malignant];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malignant => "malignant",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Accepts `benign`/`malignant` (any case), `B`/`M` and `0`/`1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" | "b" | "0" => Ok(Label::Benign),
            "malignant" | "m" | "1" => Ok(Label::Malignant),
            _ => Err(Error::InvalidParameter("label must be benign or malignant")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Magnification {
    X40,
    X100,
    X200,
    X400,
}

impl Magnification {
    pub const ALL: [Magnification; 4] = [
        Magnification::X40,
        Magnification::X100,
        Magnification::X200,
        Magnification::X400,
    ];

    pub fn factor(&self) -> u32 {
        match self {
            Magnification::X40 => 40,
            Magnification::X100 => 100,
            Magnification::X200 => 200,
            Magnification::X400 => 400,
        }
    }

    pub fn from_factor(f: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.factor() == f)
    }
}

impl fmt::Display for Magnification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.factor())
    }
}

impl FromStr for Magnification {
    type Err = Error;

    /// Accepts `200`, `200X` or `200x`.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_end_matches(['x', 'X']);
        digits
            .parse::<u32>()
            .ok()
            .and_then(Self::from_factor)
            .ok_or(Error::InvalidParameter(
                "magnification must be 40, 100, 200 or 400",
            ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleRecord {
    pub path: String,
    pub label: Label,
    pub magnification: Magnification,
    pub patient_id: String,
    pub subtype: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Stratified by class at image level.
    #[default]
    Image,
    /// Whole patients are assigned to one split; class proportions are
    /// approximate.
    Patient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: Vec<SampleRecord>,
    pub validation: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
    pub seed: u64,
    pub mode: SplitMode,
}

impl SplitManifest {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records tagged with their split, in train, validation, test order.
    pub fn iter(&self) -> impl Iterator<Item = (Split, &SampleRecord)> {
        self.train
            .iter()
            .map(|r| (Split::Train, r))
            .chain(self.validation.iter().map(|r| (Split::Validation, r)))
            .chain(self.test.iter().map(|r| (Split::Test, r)))
    }

    pub fn part(&self, split: Split) -> &[SampleRecord] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

pub const MIN_RECORDS: usize = 10;

/// Test share 30% of each class, rounded half-up.
fn test_count(n: usize) -> usize {
    (3 * n + 5) / 10
}

/// Splits records into test (30% per class, rounded half-up), then 10% of the
/// remainder (floored) into validation, the rest into train. Shuffling uses a
/// SplitMix64 generator seeded with `seed`.
pub fn split(records: &[SampleRecord], seed: u64, mode: SplitMode) -> Result<SplitManifest> {
    if records.len() < MIN_RECORDS {
        return Err(Error::TooFewRecords {
            found: records.len(),
            required: MIN_RECORDS,
        });
    }
    let mut by_class: [Vec<SampleRecord>; 2] = [Vec::new(), Vec::new()];
    for r in records {
        by_class[r.label as usize].push(r.clone());
    }
    if by_class.iter().any(|c| c.is_empty()) {
        return Err(Error::SingleClass);
    }
    // input order must not matter
    for class in by_class.iter_mut() {
        class.sort();
    }

    let mut rng = SplitMix64::seed_from_u64(seed);
    let tests = by_class.each_ref().map(|c| test_count(c.len()));
    let pools = [by_class[0].len() - tests[0], by_class[1].len() - tests[1]];
    let validations = validation_counts(pools);

    let mut manifest = SplitManifest {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        mode,
    };
    for (k, class) in by_class.into_iter().enumerate() {
        let (test, validation, train) = match mode {
            SplitMode::Image => split_images(class, tests[k], validations[k], &mut rng),
            SplitMode::Patient => split_patients(class, tests[k], validations[k], &mut rng),
        };
        manifest.test.extend(test);
        manifest.validation.extend(validation);
        manifest.train.extend(train);
    }
    Ok(manifest)
}

/// Total validation size is floor(10% of the pooled remainder); it is
/// apportioned to classes by largest remainder, ties to benign.
fn validation_counts(pools: [usize; 2]) -> [usize; 2] {
    let total_pool = pools[0] + pools[1];
    let total = total_pool / 10;
    if total_pool == 0 {
        return [0, 0];
    }
    let mut counts = pools.map(|p| p * total / total_pool);
    let fracs = pools.map(|p| p * total % total_pool);
    let mut leftover = total - counts[0] - counts[1];
    let order = if fracs[1] > fracs[0] { [1, 0] } else { [0, 1] };
    for k in order {
        if leftover > 0 && counts[k] < pools[k] {
            counts[k] += 1;
            leftover -= 1;
        }
    }
    counts
}

type Parts = (Vec<SampleRecord>, Vec<SampleRecord>, Vec<SampleRecord>);

fn split_images(
    mut class: Vec<SampleRecord>,
    test: usize,
    validation: usize,
    rng: &mut SplitMix64,
) -> Parts {
    class.shuffle(rng);
    let mut rest = class.split_off(test);
    let train = rest.split_off(validation);
    (class, rest, train)
}

fn split_patients(
    class: Vec<SampleRecord>,
    test: usize,
    validation: usize,
    rng: &mut SplitMix64,
) -> Parts {
    let mut patients: BTreeMap<String, Vec<SampleRecord>> = BTreeMap::new();
    for r in class {
        patients.entry(r.patient_id.clone()).or_default().push(r);
    }
    let mut groups: Vec<Vec<SampleRecord>> = patients.into_values().collect();
    groups.shuffle(rng);
    let (mut t, mut v, mut tr) = (Vec::new(), Vec::new(), Vec::new());
    for g in groups {
        if t.len() < test {
            t.extend(g);
        } else if v.len() < validation {
            v.extend(g);
        } else {
            tr.extend(g);
        }
    }
    (t, v, tr)
}
