//! Bundled test data: a small marine-litter standard schema and a seeded
//! generator for larger synthetic schemas.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{canonical_name, parse_standard_csv, refine_schema};
use crate::lev::similarity_score;
use crate::model::{ColumnMeta, EntryId, StandardEntry, StandardSchema, TierPath};

const MARINE_LITTER_CSV: &str = include_str!("../fixtures/marine_litter.csv");

/// Entry names in a generated schema never score above this against each other.
pub const SYNTHETIC_MAX_SIMILARITY: u32 = 60;

/// The hand-built marine-litter schema, refined: 33 entries, up to three tiers.
pub fn marine_litter_schema() -> StandardSchema {
    let raw = parse_standard_csv(MARINE_LITTER_CSV, "marine_litter").expect("bundled fixture parses");
    refine_schema(&raw)
}

pub fn marine_litter_csv() -> &'static str {
    MARINE_LITTER_CSV
}

// (T1, materials)
const MATERIALS: &[(&str, &[&str])] = &[
    ("plastics", &["polystyrene", "nylon", "acrylic", "vinyl", "polyester", "latex"]),
    ("Metal", &["aluminium", "steel", "copper", "tin", "iron", "brass"]),
    ("Glass", &["glass", "crystal", "mirror"]),
    ("Paper", &["cardboard", "newsprint", "parchment", "tissue"]),
    ("Rubber", &["rubber", "neoprene", "silicone"]),
    ("Cloth", &["cotton", "wool", "canvas", "denim", "hessian"]),
    ("Wood", &["timber", "plywood", "cork", "bamboo"]),
    ("Ceramics", &["porcelain", "clay", "terracotta"]),
];

// (T2, objects)
const OBJECTS: &[(&str, &[&str])] = &[
    ("packaging", &["bottle", "jar", "carton", "sachet", "crate", "wrapper", "tube", "pallet"]),
    ("fishing gear", &["net", "float", "hook", "trap", "sinker", "lure", "rope"]),
    ("household", &["bucket", "brush", "glove", "sponge", "hanger", "mat", "comb"]),
    ("tableware", &["plate", "cup", "spoon", "fork", "straw", "bowl", "tray"]),
    ("personal items", &["shoe", "hat", "sock", "toy", "pen", "lighter", "badge"]),
    ("construction", &["pipe", "tile", "brick", "hinge", "panel", "insulation"]),
];

// (T3, qualifiers)
const QUALIFIERS: &[(&str, &[&str])] = &[
    ("fragments", &["broken", "shredded", "crushed", "splintered"]),
    ("weathered", &["faded", "rusted", "bleached", "encrusted"]),
    ("intact", &["sealed", "whole", "folded"]),
];

/// A seeded synthetic standard schema of `n_entries` distinct entries.
///
/// Names are `[qualifier] material object`; the path is the material's class,
/// the object's use group, and the qualifier's condition when there is one.
/// Candidates scoring above [`SYNTHETIC_MAX_SIMILARITY`] against an accepted
/// name are rejected. Returns fewer entries only if the vocabulary runs out.
pub fn synthetic_standard_schema(n_entries: usize, seed: u64) -> StandardSchema {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<StandardEntry> = Vec::with_capacity(n_entries);
    let mut names: Vec<String> = Vec::with_capacity(n_entries);
    let max_attempts = n_entries * 400 + 1000;

    for _ in 0..max_attempts {
        if entries.len() == n_entries {
            break;
        }
        let (t1, materials) = MATERIALS.choose(&mut rng).expect("non-empty");
        let (t2, objects) = OBJECTS.choose(&mut rng).expect("non-empty");
        let material = materials.choose(&mut rng).expect("non-empty");
        let object = objects.choose(&mut rng).expect("non-empty");
        let qualifier = if rng.random_bool(0.5) {
            let (t3, words) = QUALIFIERS.choose(&mut rng).expect("non-empty");
            Some((*t3, *words.choose(&mut rng).expect("non-empty")))
        } else {
            None
        };

        let name = match qualifier {
            Some((_, q)) => format!("{q} {material} {object}"),
            None => format!("{material} {object}"),
        };
        let canon = canonical_name(&name);
        if names
            .iter()
            .any(|n| similarity_score(n, &canon) > SYNTHETIC_MAX_SIMILARITY)
        {
            continue;
        }

        let mut tiers = vec![*t1, *t2];
        tiers.extend(qualifier.map(|(t3, _)| t3));
        entries.push(StandardEntry {
            id: EntryId::from_ordinal(entries.len() + 1),
            meta: ColumnMeta::named(name),
            path: TierPath::new(tiers).expect("fixed vocabulary is a valid path"),
        });
        names.push(canon);
    }

    StandardSchema {
        name: format!("synthetic-{seed}"),
        normalized: true,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schema;

    #[test]
    fn marine_litter_has_paper_rows() {
        let s = marine_litter_schema();
        assert!((25..=40).contains(&s.len()));
        assert!(validate_schema(&s).is_empty());
        let by_name = |n: &str| s.entries.iter().find(|e| e.meta.name == n).unwrap();
        assert_eq!(by_name("plates").path.tiers(), ["Metal"]);
        assert_eq!(by_name("straw").path.tiers(), ["plastics", "soft plastics"]);
        assert!(s.entries.iter().all(|e| e.path.len() <= 3));
        assert!(s.entries.iter().any(|e| e.path.len() == 3));
    }

    #[test]
    fn synthetic_is_seeded_and_diverse() {
        let a = synthetic_standard_schema(300, 7);
        let b = synthetic_standard_schema(300, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        assert_ne!(a, synthetic_standard_schema(300, 8));
        assert!(validate_schema(&a).is_empty());
        let names: Vec<String> = a.entries.iter().map(|e| canonical_name(&e.meta.name)).collect();
        for (i, x) in names.iter().enumerate() {
            for y in &names[i + 1..] {
                assert!(similarity_score(x, y) <= SYNTHETIC_MAX_SIMILARITY, "{x} / {y}");
            }
        }
    }
}
