//! Domain records shared by every stage of a run.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_PROFILE: &str = "python";

/// A synthesis task: a function header with its docstring, and the held-out
/// assertions used only for final judgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub prompt: String,
    pub entry_point: String,
    #[serde(default)]
    pub ground_truth_tests: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_solution: Option<String>,
    #[serde(default = "default_profile")]
    pub interpreter_profile: String,
}

fn default_profile() -> String {
    DEFAULT_PROFILE.to_string()
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::ProblemLoad {
            problem_id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(fail("empty id".into()));
        }
        if !text::is_identifier(&self.entry_point) {
            return Err(fail(format!(
                "entry_point {:?} is not an identifier",
                self.entry_point
            )));
        }
        if !text::mentions_identifier(&self.prompt, &self.entry_point) {
            return Err(fail(format!(
                "entry_point {} does not appear in the prompt",
                self.entry_point
            )));
        }
        if let Some(bad) = self
            .ground_truth_tests
            .iter()
            .position(|t| !text::mentions_identifier(t, &self.entry_point))
        {
            return Err(fail(format!(
                "ground-truth test {bad} does not reference entry point {}",
                self.entry_point
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramOrigin {
    Init,
    Crossover,
    Mutation,
}

impl ProgramOrigin {
    pub fn parent_count(self) -> usize {
        match self {
            ProgramOrigin::Init => 0,
            ProgramOrigin::Crossover => 2,
            ProgramOrigin::Mutation => 1,
        }
    }
}

/// One program individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateProgram {
    pub id: String,
    pub source: String,
    pub origin: ProgramOrigin,
    #[serde(default)]
    pub parent_ids: Vec<String>,
    pub born_iteration: u32,
    /// Set when the provider response could not be turned into code. Such an
    /// individual is never executed and scores zero.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub malformed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "bits_opt")]
    pub pass_vector: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
}

impl CandidateProgram {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        origin: ProgramOrigin,
        parent_ids: Vec<String>,
        born_iteration: u32,
    ) -> Result<Self> {
        if parent_ids.len() != origin.parent_count() {
            return Err(Error::InvalidArgument(format!(
                "{origin:?} program needs {} parents, got {}",
                origin.parent_count(),
                parent_ids.len()
            )));
        }
        if born_iteration == 0 {
            return Err(Error::InvalidArgument("born_iteration starts at 1".into()));
        }
        Ok(Self {
            id: id.into(),
            source: source.into(),
            origin,
            parent_ids,
            born_iteration,
            malformed: false,
            pass_vector: None,
            fitness: None,
        })
    }

    /// Zero-fitness stand-in for an offspring slot whose response was unusable.
    pub fn placeholder(
        id: impl Into<String>,
        origin: ProgramOrigin,
        parent_ids: Vec<String>,
        born_iteration: u32,
    ) -> Result<Self> {
        let mut p = Self::new(id, String::new(), origin, parent_ids, born_iteration)?;
        p.malformed = true;
        Ok(p)
    }

    pub fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrigin {
    Init,
    Augment,
}

/// One assertion individual together with its last computed metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub assertion: String,
    pub origin: TestOrigin,
    pub born_iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrimination: Option<f64>,
}

impl TestCase {
    pub fn new(
        id: impl Into<String>,
        assertion: impl Into<String>,
        origin: TestOrigin,
        born_iteration: u32,
    ) -> Result<Self> {
        let assertion = assertion.into();
        if assertion.trim().is_empty() {
            return Err(Error::InvalidArgument("empty assertion".into()));
        }
        if !text::is_balanced(&assertion) {
            return Err(Error::InvalidArgument(format!(
                "unbalanced assertion: {assertion}"
            )));
        }
        if born_iteration == 0 {
            return Err(Error::InvalidArgument("born_iteration starts at 1".into()));
        }
        Ok(Self {
            id: id.into(),
            assertion,
            origin,
            born_iteration,
            pass_rate: None,
            confidence: None,
            discrimination: None,
        })
    }

    pub fn clear_metrics(&mut self) {
        self.pass_rate = None;
        self.confidence = None;
        self.discrimination = None;
    }
}

/// The five generative operator kinds, used for prompt templates, script
/// matching and token accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ProgramInit,
    ProgramCrossover,
    ProgramMutation,
    TestInit,
    TestAugment,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::ProgramInit,
        PromptKind::ProgramCrossover,
        PromptKind::ProgramMutation,
        PromptKind::TestInit,
        PromptKind::TestAugment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::ProgramInit => "program_init",
            PromptKind::ProgramCrossover => "program_crossover",
            PromptKind::ProgramMutation => "program_mutation",
            PromptKind::TestInit => "test_init",
            PromptKind::TestAugment => "test_augment",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_program_generation(self) -> bool {
        matches!(
            self,
            PromptKind::ProgramInit | PromptKind::ProgramCrossover | PromptKind::ProgramMutation
        )
    }

    pub fn is_test_generation(self) -> bool {
        !self.is_program_generation()
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown prompt kind {s:?}")))
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            other => Err(Error::InvalidArgument(format!("bad bit {other:?}"))),
        })
        .collect()
}

mod bits_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<bool>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bits) => s.serialize_some(&super::bits_to_string(bits)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<bool>>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        raw.map(|s| super::bits_from_str(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
