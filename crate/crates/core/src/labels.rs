//! The fixed ten-label SRM taxonomy and compact label sets.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Source,
    Sink,
    Sanitizer,
    Cwe78,
    Cwe79,
    Cwe89,
    Cwe306,
    Cwe601,
    Cwe862,
    Cwe863,
}

pub const LABEL_COUNT: usize = 10;

impl Label {
    /// Taxonomy order.
    pub const ALL: [Label; LABEL_COUNT] = [
        Label::Source,
        Label::Sink,
        Label::Sanitizer,
        Label::Cwe78,
        Label::Cwe79,
        Label::Cwe89,
        Label::Cwe306,
        Label::Cwe601,
        Label::Cwe862,
        Label::Cwe863,
    ];

    pub const ROLES: [Label; 3] = [Label::Source, Label::Sink, Label::Sanitizer];

    pub const CWES: [Label; 7] = [
        Label::Cwe78,
        Label::Cwe79,
        Label::Cwe89,
        Label::Cwe306,
        Label::Cwe601,
        Label::Cwe862,
        Label::Cwe863,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn id(self) -> &'static str {
        match self {
            Label::Source => "source",
            Label::Sink => "sink",
            Label::Sanitizer => "sanitizer",
            Label::Cwe78 => "cwe78",
            Label::Cwe79 => "cwe79",
            Label::Cwe89 => "cwe89",
            Label::Cwe306 => "cwe306",
            Label::Cwe601 => "cwe601",
            Label::Cwe862 => "cwe862",
            Label::Cwe863 => "cwe863",
        }
    }

    pub fn from_id(id: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.id() == id)
    }

    pub fn is_cwe(self) -> bool {
        self.index() >= 3
    }

    pub fn cwe_number(self) -> Option<u32> {
        Some(match self {
            Label::Cwe78 => 78,
            Label::Cwe79 => 79,
            Label::Cwe89 => 89,
            Label::Cwe306 => 306,
            Label::Cwe601 => 601,
            Label::Cwe862 => 862,
            Label::Cwe863 => 863,
            _ => return None,
        })
    }

    /// `CWE-89` style rule id.
    pub fn cwe_rule_id(self) -> Option<String> {
        self.cwe_number().map(|n| format!("CWE-{n}"))
    }

    pub fn cwe_name(self) -> Option<&'static str> {
        Some(match self {
            Label::Cwe78 => "OS Command Injection",
            Label::Cwe79 => "Cross-site Scripting",
            Label::Cwe89 => "SQL Injection",
            Label::Cwe306 => "Missing Authentication",
            Label::Cwe601 => "Open Redirect",
            Label::Cwe862 => "Missing Authorisation",
            Label::Cwe863 => "Incorrect Authorisation",
            _ => return None,
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = String::deserialize(d)?;
        Label::from_id(&id).ok_or_else(|| serde::de::Error::custom(format!("unknown label `{id}`")))
    }
}

/// A subset of the taxonomy, one bit per label in taxonomy order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_bits(bits: u16) -> LabelSet {
        LabelSet(bits & ((1 << LABEL_COUNT) - 1))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn from_bools(bools: &[bool]) -> LabelSet {
        let mut s = LabelSet::EMPTY;
        for (i, b) in bools.iter().take(LABEL_COUNT).enumerate() {
            if *b {
                s.0 |= 1 << i;
            }
        }
        s
    }

    pub fn to_bools(self) -> [bool; LABEL_COUNT] {
        std::array::from_fn(|i| self.0 & (1 << i) != 0)
    }

    pub fn contains(self, l: Label) -> bool {
        self.0 & (1 << l.index()) != 0
    }

    pub fn insert(&mut self, l: Label) {
        self.0 |= 1 << l.index();
    }

    pub fn remove(&mut self, l: Label) {
        self.0 &= !(1 << l.index());
    }

    pub fn with(mut self, l: Label) -> LabelSet {
        self.insert(l);
        self
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: LabelSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset(self, other: LabelSet) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn union(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn intersection(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Label> {
        Label::ALL.into_iter().filter(move |l| self.contains(*l))
    }

    pub fn has_role(self) -> bool {
        Label::ROLES.iter().any(|l| self.contains(*l))
    }

    pub fn has_cwe(self) -> bool {
        Label::CWES.iter().any(|l| self.contains(*l))
    }

    /// Taxonomy-ordered bit string, e.g. `0100010000` for {sink, cwe89}.
    pub fn bit_string(self) -> String {
        self.to_bools()
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut s = LabelSet::EMPTY;
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.iter().map(Label::id).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

impl Serialize for LabelSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<Label>::deserialize(d)?;
        Ok(labels.into_iter().collect())
    }
}
