//! Deterministic instance generators.
//!
//! A spec string looks like `uniform:n=50,seed=1,max=1000000,t=half`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{InstanceFile, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Uniform,
    /// Distinct values clustered in `[B, 2B]`.
    DenseWindow,
    /// Products of small primes.
    SmoothHeavy,
    /// About one value per power of two.
    AdversarialSparse,
}

impl Kind {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "uniform" => Kind::Uniform,
            "dense-window" => Kind::DenseWindow,
            "smooth-heavy" => Kind::SmoothHeavy,
            "adversarial-sparse" => Kind::AdversarialSparse,
            _ => return Err(format!("unknown generator kind `{s}`")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Uniform => "uniform",
            Kind::DenseWindow => "dense-window",
            Kind::SmoothHeavy => "smooth-heavy",
            Kind::AdversarialSparse => "adversarial-sparse",
        }
    }
}

/// How the target is derived from the items.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetRule {
    /// `floor(f * Σ)`.
    Fraction(f64),
    Absolute(u64),
}

impl TargetRule {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "half" => TargetRule::Fraction(0.5),
            "third" => TargetRule::Fraction(1.0 / 3.0),
            "quarter" => TargetRule::Fraction(0.25),
            _ => {
                if let Some(v) = s.strip_prefix("abs:") {
                    TargetRule::Absolute(v.parse().map_err(|_| format!("bad absolute target `{v}`"))?)
                } else {
                    let f: f64 = s.parse().map_err(|_| format!("bad target rule `{s}`"))?;
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(format!("target fraction {f} must lie in (0, 1]"));
                    }
                    TargetRule::Fraction(f)
                }
            }
        })
    }

    pub fn apply(self, items: &[u64]) -> u64 {
        match self {
            TargetRule::Fraction(f) => (items.iter().map(|&v| v as f64).sum::<f64>() * f).floor() as u64,
            TargetRule::Absolute(t) => t,
        }
    }
}

/// Parsed generator spec.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub kind: Kind,
    pub n: usize,
    pub seed: u64,
    pub max: u64,
    pub target: TargetRule,
}

impl GenSpec {
    pub fn new(kind: Kind, n: usize, seed: u64, max: u64, target: TargetRule) -> Self {
        Self { kind, n, seed, max, target }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = GenSpec::new(Kind::parse(kind)?, 100, 0, 1_000_000, TargetRule::Fraction(0.5));
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| format!("bad value for {k}: `{v}`"));
            match k {
                "n" => spec.n = num(v)? as usize,
                "seed" => spec.seed = num(v)?,
                "max" => spec.max = num(v)?,
                "t" => spec.target = TargetRule::parse(v)?,
                _ => return Err(format!("unknown generator key `{k}`")),
            }
        }
        if spec.max < 2 {
            return Err("max must be at least 2".into());
        }
        Ok(spec)
    }
}

fn draw(spec: &GenSpec, rng: &mut ChaCha8Rng) -> u64 {
    let max = spec.max;
    match spec.kind {
        Kind::Uniform => rng.gen_range(1..=max),
        Kind::DenseWindow => rng.gen_range(max / 2..=max).max(1),
        Kind::SmoothHeavy => {
            let mut v = 1u64;
            loop {
                let p = [2u64, 3, 5, 7][rng.gen_range(0..4)];
                if v * p > max {
                    break v;
                }
                v *= p;
                if rng.gen_bool(0.1) {
                    break v;
                }
            }
        }
        Kind::AdversarialSparse => {
            let top = 63 - max.leading_zeros();
            let k = rng.gen_range(0..=top);
            let lo = 1u64 << k;
            rng.gen_range(lo..=(lo + lo / 8).min(max))
        }
    }
}

/// Deterministic instance for `problem`. Unbounded instances get distinct items.
pub fn gen_instance(problem: Problem, spec: &GenSpec) -> Result<InstanceFile, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::with_capacity(spec.n);
    let distinct = problem == Problem::Unbounded || spec.kind == Kind::DenseWindow;
    let mut seen = BTreeSet::new();
    let mut tries = 0usize;
    while items.len() < spec.n {
        tries += 1;
        if tries > 100 * spec.n + 1000 {
            return Err(format!("cannot draw {} distinct values below {}", spec.n, spec.max));
        }
        let v = draw(spec, &mut rng);
        if distinct && !seen.insert(v) {
            continue;
        }
        items.push(v);
    }
    let target = match problem {
        Problem::Partition => None,
        _ => Some(spec.target.apply(&items)),
    };
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), spec.kind.name().into());
    meta.insert("n".into(), spec.n.into());
    meta.insert("seed".into(), spec.seed.into());
    meta.insert("max".into(), spec.max.into());
    Ok(InstanceFile { problem, items, target, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = GenSpec::parse("uniform:n=50,seed=7").unwrap();
        let a = gen_instance(Problem::SubsetSum, &spec).unwrap();
        let b = gen_instance(Problem::SubsetSum, &spec).unwrap();
        assert_eq!(a.to_canonical(), b.to_canonical());
        assert_eq!(a.items.len(), 50);
        let c = gen_instance(Problem::SubsetSum, &GenSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.items, c.items);
    }

    #[test]
    fn target_rules() {
        let spec = GenSpec::parse("uniform:n=10,seed=1,t=half").unwrap();
        let f = gen_instance(Problem::SubsetSum, &spec).unwrap();
        assert_eq!(f.target, Some(f.items.iter().sum::<u64>() / 2));
        assert!(gen_instance(Problem::Partition, &spec).unwrap().target.is_none());
        let spec = GenSpec::parse("uniform:n=10,t=abs:77").unwrap();
        assert_eq!(gen_instance(Problem::Unbounded, &spec).unwrap().target, Some(77));
        assert!(GenSpec::parse("uniform:t=2.0").is_err());
        assert!(GenSpec::parse("nope:n=1").is_err());
        assert!(GenSpec::parse("uniform:n").is_err());
    }

    #[test]
    fn kinds_respect_ranges() {
        for kind in ["uniform", "dense-window", "smooth-heavy", "adversarial-sparse"] {
            let spec = GenSpec::parse(&format!("{kind}:n=40,seed=3,max=5000")).unwrap();
            let f = gen_instance(Problem::Unbounded, &spec).unwrap();
            assert!(f.items.iter().all(|&v| v >= 1 && v <= 5000), "{kind}");
            let set: BTreeSet<u64> = f.items.iter().copied().collect();
            assert_eq!(set.len(), 40);
        }
        let spec = GenSpec::parse("dense-window:n=30,max=1000").unwrap();
        let f = gen_instance(Problem::SubsetSum, &spec).unwrap();
        assert!(f.items.iter().all(|&v| v >= 500));
        assert!(gen_instance(Problem::Unbounded, &GenSpec::parse("uniform:n=10,max=4").unwrap()).is_err());
    }
}
