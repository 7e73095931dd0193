use super::{affine_form, to_dnf, ChcDocument, DnfError};
use crate::lia::{
    ChcSystem, DnfFormula, LiaError, LinearMap, StateSpace, StateVector, TransitionBlock,
    TransitionRelation,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("{section}: {source}")]
    Formula {
        section: String,
        #[source]
        source: DnfError,
    },
    #[error("transition block {block}, map {map}: {source}")]
    Assignment {
        block: usize,
        map: usize,
        #[source]
        source: super::TermError,
    },
    #[error(transparent)]
    Model(#[from] LiaError),
    #[error("transition blocks {first} and {second} overlap at state ({witness})")]
    OverlappingGuards {
        first: usize,
        second: usize,
        witness: StateVector,
    },
}

/// Lowers a parsed document.
///
/// Each block guard is conjoined with the loop guard, so every block is
/// contained in `B` by construction. Unassigned variables keep their value.
/// When the box has at most `oracle_limit` states and there are several
/// blocks, guard disjointness is checked by enumeration; otherwise the check
/// is skipped with a warning.
pub fn lower_document(
    doc: &ChcDocument,
    dnf_cap: usize,
    oracle_limit: u128,
) -> Result<ChcSystem, LowerError> {
    let (sys, warnings) = lower_document_with_warnings(doc, dnf_cap, oracle_limit)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(sys)
}

/// As [`lower_document`], returning warnings instead of logging them.
pub fn lower_document_with_warnings(
    doc: &ChcDocument,
    dnf_cap: usize,
    oracle_limit: u128,
) -> Result<(ChcSystem, Vec<String>), LowerError> {
    let mut warnings = Vec::new();
    let vars = &doc.variables;
    let n = vars.len();
    let space = StateSpace::new(n, doc.int_bound)?;
    let lower = |section: &str, f| {
        to_dnf(f, vars, dnf_cap).map_err(|source| LowerError::Formula {
            section: section.to_string(),
            source,
        })
    };
    let pre = lower("pre", &doc.pre)?;
    let guard = lower("guard", &doc.guard)?;
    let post = lower("post", &doc.post)?;

    let mut blocks = Vec::with_capacity(doc.trans.len());
    for (bi, block) in doc.trans.iter().enumerate() {
        let local = lower(&format!("block {bi} guard"), &block.guard)?;
        let combined = local.and(&guard, dnf_cap)?;
        let mut maps = Vec::with_capacity(block.maps.len());
        for (mi, assigns) in block.maps.iter().enumerate() {
            let mut map = LinearMap::identity(n);
            for a in assigns {
                let idx = vars
                    .iter()
                    .position(|v| *v == a.var)
                    .expect("parser checks assignment targets");
                let form = affine_form(&a.term, vars).map_err(|source| LowerError::Assignment {
                    block: bi,
                    map: mi,
                    source,
                })?;
                map.matrix[idx] = form.coeffs;
                map.offset[idx] = form.constant;
            }
            maps.push(map);
        }
        blocks.push(TransitionBlock {
            guard: combined,
            maps,
        });
    }
    let trans = TransitionRelation::new(n, blocks)?;
    if trans.block_count() > 1 {
        if space.cardinality() <= oracle_limit {
            check_disjoint(&trans, &space)?;
        } else {
            warnings.push(format!(
                "state box too large for the guard-disjointness check ({} states)",
                space.cardinality()
            ));
        }
    }
    Ok((ChcSystem::new(space, pre, guard, trans, post)?, warnings))
}

fn check_disjoint(trans: &TransitionRelation, space: &StateSpace) -> Result<(), LowerError> {
    let guards: Vec<&DnfFormula> = trans.blocks().iter().map(|b| &b.guard).collect();
    for s in space.points() {
        let mut first = None;
        for (i, g) in guards.iter().enumerate() {
            if g.holds(s.coords()) {
                if let Some(f) = first {
                    return Err(LowerError::OverlappingGuards {
                        first: f,
                        second: i,
                        witness: s,
                    });
                }
                first = Some(i);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_chc;
    use crate::lia::{apply_transition, DEFAULT_DNF_CAP};

    const LIMIT: u128 = 20_000_000;

    #[test]
    fn toy_lowering() {
        let doc = parse_chc(
            "(chc (vars x y) (bound 64) (pre (and (= x 1) (= y 1))) (guard true)
              (trans (block true ((x (+ x y)) (y (+ x y))))) (post (>= y 1)))",
        )
        .unwrap();
        let sys = lower_document(&doc, DEFAULT_DNF_CAP, LIMIT).unwrap();
        assert_eq!(sys.trans.block_count(), 1);
        let map = &sys.trans.blocks()[0].maps[0];
        assert_eq!(map.matrix, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(map.offset, vec![0, 0]);
    }

    #[test]
    fn deterministic_conditional() {
        let doc = parse_chc(
            "(chc (vars x y) (bound 32) (pre (and (= x 1) (= y 1))) (guard (<= x 14))
              (trans (block (> x 5) ((x (+ x 1))))
                     (block (<= x 5) ((y (+ y 1)) (x (+ x 2)))))
              (post true))",
        )
        .unwrap();
        let sys = lower_document(&doc, DEFAULT_DNF_CAP, LIMIT).unwrap();
        assert_eq!(sys.trans.block_count(), 2);
        assert_eq!(sys.trans.max_maps(), 1);
        let out = apply_transition(&sys.trans, &sys.space, &StateVector(vec![1, 1]));
        assert_eq!(
            out.tails.into_iter().collect::<Vec<_>>(),
            vec![StateVector(vec![3, 2])]
        );
    }

    #[test]
    fn nondeterministic_conditional() {
        let doc = parse_chc(
            "(chc (vars x y) (bound 32) (pre (and (= x 1) (= y 1))) (guard (<= (+ x y) 14))
              (trans (block true ((x (+ (* 2 x) y)) (y (+ y 4))) ((x (+ x 1)) (y (- y 1)))))
              (post true))",
        )
        .unwrap();
        let sys = lower_document(&doc, DEFAULT_DNF_CAP, LIMIT).unwrap();
        assert_eq!(sys.trans.block_count(), 1);
        assert_eq!(sys.trans.max_maps(), 2);
    }

    #[test]
    fn overlapping_guards_detected() {
        let doc = parse_chc(
            "(chc (vars x) (bound 8) (pre true) (guard true)
              (trans (block (>= x 0) ((x 1))) (block (<= x 0) ((x 2))))
              (post true))",
        )
        .unwrap();
        match lower_document(&doc, DEFAULT_DNF_CAP, LIMIT) {
            Err(LowerError::OverlappingGuards { witness, .. }) => {
                assert_eq!(witness, StateVector(vec![0]))
            }
            other => panic!("expected overlap, got {other:?}"),
        }
    }
}
