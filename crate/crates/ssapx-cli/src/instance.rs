//! Canonical JSON instance files.

use std::collections::BTreeMap;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// Largest integer written as a JSON number; larger values are written as strings.
pub const MAX_JSON_INT: u64 = 1 << 53;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    SubsetSum,
    Partition,
    Unbounded,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::SubsetSum => "subset-sum",
            Problem::Partition => "partition",
            Problem::Unbounded => "unbounded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub problem: Problem,
    #[serde(serialize_with = "ser_ints", deserialize_with = "de_ints")]
    pub items: Vec<u64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_int",
        deserialize_with = "de_opt_int"
    )]
    pub target: Option<u64>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Int {
    Num(u64),
    Str(String),
}

impl Int {
    fn value<E: de::Error>(self) -> Result<u64, E> {
        match self {
            Int::Num(v) if v <= MAX_JSON_INT => Ok(v),
            Int::Num(v) => Err(E::custom(format!("{v} exceeds 2^53; encode it as a string"))),
            Int::Str(s) => s.parse().map_err(|_| E::custom(format!("`{s}` is not a nonnegative integer"))),
        }
    }
}

fn ser_int<S: Serializer>(v: u64, s: S) -> Result<S::Ok, S::Error> {
    if v <= MAX_JSON_INT {
        s.serialize_u64(v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

fn ser_ints<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct One(u64);
    impl Serialize for One {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_int(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&One(x))?;
    }
    seq.end()
}

fn de_ints<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
    Vec::<Int>::deserialize(d)?.into_iter().map(Int::value).collect()
}

fn ser_opt_int<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_int(*x, s),
        None => s.serialize_none(),
    }
}

fn de_opt_int<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    Option::<Int>::deserialize(d)?.map(Int::value).transpose()
}

impl InstanceFile {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, String> {
        let f: InstanceFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), String> {
        match (self.problem, self.target) {
            (Problem::Partition, Some(_)) => return Err("partition instances take no target".into()),
            (Problem::SubsetSum | Problem::Unbounded, None) => {
                return Err(format!("{} instances need a target", self.problem.name()))
            }
            _ => {}
        }
        if self.problem == Problem::Unbounded && self.items.contains(&0) {
            return Err("unbounded items must be positive".into());
        }
        Ok(())
    }

    /// Compact canonical form; `parse` followed by `to_canonical` is the identity on it.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    /// Target used by the solvers: `floor(Σ/2)` for partition.
    pub fn effective_target(&self) -> u64 {
        match self.target {
            Some(t) => t,
            None => (self.items.iter().map(|&v| v as u128).sum::<u128>() / 2) as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let text = r#"{"problem":"subset-sum","items":[3,34,4,12,5,2],"target":9,"meta":{"seed":1}}"#;
        let f = InstanceFile::parse(text).unwrap();
        assert_eq!(f.to_canonical(), text);
        let text = r#"{"problem":"partition","items":[1,"18014398509481984"],"meta":{}}"#;
        let f = InstanceFile::parse(text).unwrap();
        assert_eq!(f.items[1], 1 << 54);
        assert_eq!(f.to_canonical(), text);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(InstanceFile::parse("{").is_err());
        assert!(InstanceFile::parse(r#"{"problem":"partition","items":[1],"target":3}"#).is_err());
        assert!(InstanceFile::parse(r#"{"problem":"subset-sum","items":[1]}"#).is_err());
        assert!(InstanceFile::parse(r#"{"problem":"unbounded","items":[0],"target":3}"#).is_err());
        assert!(InstanceFile::parse(r#"{"problem":"partition","items":[-1]}"#).is_err());
        assert!(InstanceFile::parse(r#"{"problem":"partition","items":[9007199254740993]}"#).is_err());
        assert!(InstanceFile::parse(r#"{"problem":"partition","items":[],"extra":1}"#).is_err());
    }

    #[test]
    fn partition_target_is_half() {
        let f = InstanceFile::parse(r#"{"problem":"partition","items":[3,1,1,2,2,1]}"#).unwrap();
        assert_eq!(f.effective_target(), 5);
    }
}
