//! Target-network initialization from a source network.
//!
//! The target starts from a fresh random initialization. Then the weights
//! tied to what both domains share are copied from the source:
//!
//! * input rows of `W1` for every feature of a common slot (the five
//!   slot-indexed tracker blocks), for the shared non-slot features
//!   (intents, KB count block, turn) and for the agent-action features of
//!   common actions;
//! * output columns of `W2` and entries of `b2` for common actions;
//! * all of `b1`, since hidden units are not tied to any slot.

use std::collections::BTreeSet;

use crate::domain::{DomainSchema, UnifiedSpace};
use crate::error::{Error, Result};
use crate::neural::QWeights;
use crate::tracker::FeatureLayout;

#[derive(Debug, Clone)]
pub struct TransferSpec<'a> {
    pub source_weights: &'a QWeights,
    pub space: &'a UnifiedSpace,
    pub fresh_seed: u64,
}

/// Slot positions present in both schemas and the action indices they
/// induce, always including greet and close.
pub fn common_indices(source: &DomainSchema, target: &DomainSchema, space: &UnifiedSpace) -> (Vec<usize>, Vec<usize>) {
    let shared: BTreeSet<usize> = source
        .slots
        .iter()
        .filter(|s| target.has_slot(s))
        .filter_map(|s| space.slot_index(s))
        .collect();
    let mut actions = vec![0, 1];
    for &k in &shared {
        let r = UnifiedSpace::request_action_index(k);
        actions.extend([r, r + 1]);
    }
    (shared.into_iter().collect(), actions)
}

/// Input features whose `W1` rows are copied.
pub fn copied_features(space: &UnifiedSpace) -> Vec<usize> {
    let layout = FeatureLayout::new(space);
    let mut features: BTreeSet<usize> = layout.shared_features().into_iter().collect();
    for &k in &space.common_slot_indices {
        features.extend(layout.slot_features(k));
    }
    for &a in &space.common_action_indices {
        features.insert(layout.agent_action().start + a);
    }
    features.into_iter().collect()
}

pub fn initialize_weights(spec: &TransferSpec) -> Result<QWeights> {
    let source = spec.source_weights;
    let space = spec.space;
    if source.manifest != space.manifest_digest {
        return Err(Error::TransferIncompatible(format!(
            "source weights carry manifest {:016x}, space is {}",
            source.manifest,
            space.digest_hex()
        )));
    }
    let layout = FeatureLayout::new(space);
    if source.d != layout.dim() || source.n_actions != space.n_actions() {
        return Err(Error::TransferIncompatible(format!(
            "source network is {}x{}x{}, space needs {}x_x{}",
            source.d,
            source.h,
            source.n_actions,
            layout.dim(),
            space.n_actions()
        )));
    }

    let h = source.h;
    let n_actions = source.n_actions;
    let mut target = QWeights::rand_init(source.d, h, n_actions, space.manifest_digest, spec.fresh_seed);

    for i in copied_features(space) {
        target.w1[i * h..(i + 1) * h].copy_from_slice(&source.w1[i * h..(i + 1) * h]);
    }
    for &a in &space.common_action_indices {
        for j in 0..h {
            target.w2[j * n_actions + a] = source.w2[j * n_actions + a];
        }
        target.b2[a] = source.b2[a];
    }
    target.b1.copy_from_slice(&source.b1);
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_unified_space;
    use crate::domain::tests::schema;

    fn marked_source(space: &UnifiedSpace, h: usize) -> QWeights {
        let d = FeatureLayout::new(space).dim();
        let mut w = QWeights::zeros(d, h, space.n_actions(), space.manifest_digest);
        // Recognizable constants, well outside the fresh init range.
        for (i, x) in w.w1.iter_mut().enumerate() {
            *x = 100.0 + i as f64;
        }
        for (i, x) in w.w2.iter_mut().enumerate() {
            *x = -100.0 - i as f64;
        }
        for (i, x) in w.b1.iter_mut().enumerate() {
            *x = 50.0 + i as f64;
        }
        for (i, x) in w.b2.iter_mut().enumerate() {
            *x = -50.0 - i as f64;
        }
        w
    }

    #[test]
    fn disjoint_domains_copy_only_shared_parts() {
        let s = schema("s", &["a", "b"]);
        let t = schema("t", &["c"]);
        let space = build_unified_space(&s, &t).unwrap();
        assert_eq!(common_indices(&s, &t, &space), (vec![], vec![0, 1]));
        let layout = FeatureLayout::new(&space);
        let h = 4;
        let source = marked_source(&space, h);
        let w = initialize_weights(&TransferSpec {
            source_weights: &source,
            space: &space,
            fresh_seed: 1,
        })
        .unwrap();
        assert_eq!(w.b1, source.b1);
        let copied = copied_features(&space);
        let mut expected: Vec<usize> = layout.shared_features();
        expected.extend([layout.agent_action().start, layout.agent_action().start + 1]);
        expected.sort();
        assert_eq!(copied, expected);
        for k in 0..space.n_slots() {
            for f in layout.slot_features(k) {
                assert_ne!(w.w1[f * h], source.w1[f * h]);
            }
        }
        for a in 2..space.n_actions() {
            assert_ne!(w.b2[a], source.b2[a]);
        }
    }

    #[test]
    fn identical_domains_copy_everything() {
        let s = schema("s", &["a", "b", "c"]);
        let space = build_unified_space(&s, &s).unwrap();
        let source = marked_source(&space, 5);
        let w = initialize_weights(&TransferSpec {
            source_weights: &source,
            space: &space,
            fresh_seed: 3,
        })
        .unwrap();
        assert_eq!(w.w1, source.w1);
        assert_eq!(w.w2, source.w2);
        assert_eq!(w.b1, source.b1);
        assert_eq!(w.b2, source.b2);
        assert_eq!(w.manifest, source.manifest);
    }

    #[test]
    fn manifest_mismatch_is_rejected() {
        let s = schema("s", &["a", "b"]);
        let space = build_unified_space(&s, &schema("t", &["b", "c"])).unwrap();
        let mut source = marked_source(&space, 3);
        source.manifest ^= 1;
        assert!(matches!(
            initialize_weights(&TransferSpec {
                source_weights: &source,
                space: &space,
                fresh_seed: 0
            }),
            Err(Error::TransferIncompatible(_))
        ));
    }

    #[test]
    fn common_indices_agree_with_space() {
        let s = schema("s", &["date", "city", "theater"]);
        let t = schema("t", &["food", "date", "city"]);
        let space = build_unified_space(&s, &t).unwrap();
        let (slots, actions) = common_indices(&s, &t, &space);
        assert_eq!(slots, space.common_slot_indices);
        assert_eq!(actions, space.common_action_indices);
        assert_eq!(slots, [0, 1]);
        assert_eq!(actions, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn repeated_initialization_is_identical() {
        let space = build_unified_space(&schema("s", &["a", "b"]), &schema("t", &["b", "c"])).unwrap();
        let source = marked_source(&space, 6);
        let spec = TransferSpec {
            source_weights: &source,
            space: &space,
            fresh_seed: 17,
        };
        assert_eq!(initialize_weights(&spec).unwrap(), initialize_weights(&spec).unwrap());
    }
}
