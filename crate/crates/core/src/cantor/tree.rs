use std::ops::Range;

use super::{geometry_to_construction, ChildRule, Construction, ConstructionError, LevelEntry, LevelSet};
use crate::cf::CfWord;
use crate::geometry::{Convergents, Interval, LevelCase};

/// One fundamental interval in a materialized [`LevelTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Index of the parent in the previous level.
    pub parent: usize,
    /// Last quotient `a_n` of the word.
    pub quotient: u64,
    pub conv: Convergents,
    pub rule: ChildRule,
    /// `J_n` of the word.
    pub interval: Interval,
    /// Indices of the children in the next level, empty on the last level.
    pub children: Range<usize>,
}

impl TreeNode {
    pub fn case(&self) -> LevelCase {
        self.rule.case
    }
}

/// Levels `0..=depth` of a construction, each sorted left to right. Level 0
/// holds the empty word.
#[derive(Debug, Clone)]
pub struct LevelTree {
    levels: Vec<Vec<TreeNode>>,
}

impl LevelTree {
    /// Materializes every level up to `depth`, failing once more than
    /// `node_budget` nodes would be held in total.
    pub fn build<C: Construction + ?Sized>(
        construction: &C,
        depth: usize,
        node_budget: usize,
    ) -> Result<Self, ConstructionError> {
        let root_word = CfWord::empty();
        let root_rule = construction.child_rule(&root_word)?;
        let root_conv = Convergents::of(&root_word);
        let root = TreeNode {
            parent: 0,
            quotient: 0,
            interval: root_conv
                .children_hull(root_rule.lo, root_rule.hi)
                .map_err(geometry_to_construction)?,
            conv: root_conv,
            rule: root_rule,
            children: 0..0,
        };
        let mut levels = vec![vec![root]];
        let mut total = 1usize;
        let mut word_cache: Vec<CfWord> = vec![root_word];
        for n in 0..depth {
            let parents = &levels[n];
            let mut next = Vec::new();
            let mut next_words = Vec::new();
            let mut ranges = Vec::with_capacity(parents.len());
            for (idx, node) in parents.iter().enumerate() {
                let start = next.len();
                let rule = node.rule;
                let quotients: Box<dyn Iterator<Item = u64>> = if n % 2 == 1 {
                    Box::new(rule.lo..=rule.hi)
                } else {
                    Box::new((rule.lo..=rule.hi).rev())
                };
                for a in quotients {
                    total += 1;
                    if total > node_budget {
                        return Err(ConstructionError::Explosion {
                            level: n + 1,
                            budget: node_budget,
                        });
                    }
                    let word = word_cache[idx].with(a).expect("positive quotient");
                    let child_rule = construction.child_rule(&word)?;
                    let conv = node.conv.child(a);
                    let interval = conv
                        .children_hull(child_rule.lo, child_rule.hi)
                        .map_err(geometry_to_construction)?;
                    next.push(TreeNode {
                        parent: idx,
                        quotient: a,
                        conv,
                        rule: child_rule,
                        interval,
                        children: 0..0,
                    });
                    next_words.push(word);
                }
                ranges.push(start..next.len());
            }
            for (node, range) in levels[n].iter_mut().zip(ranges) {
                node.children = range;
            }
            levels.push(next);
            word_cache = next_words;
        }
        Ok(LevelTree { levels })
    }

    /// Deepest materialized order.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &[TreeNode] {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<TreeNode>] {
        &self.levels
    }

    pub fn node(&self, n: usize, idx: usize) -> &TreeNode {
        &self.levels[n][idx]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Index of the ancestor at level `m <= n` of node `idx` at level `n`.
    pub fn ancestor(&self, n: usize, idx: usize, m: usize) -> usize {
        let mut idx = idx;
        for level in (m + 1..=n).rev() {
            idx = self.levels[level][idx].parent;
        }
        idx
    }

    /// Word of node `idx` at level `n`.
    pub fn word(&self, n: usize, idx: usize) -> CfWord {
        let mut quotients = vec![0u64; n];
        let mut idx = idx;
        for level in (1..=n).rev() {
            let node = &self.levels[level][idx];
            quotients[level - 1] = node.quotient;
            idx = node.parent;
        }
        CfWord::from_quotients(&quotients)
    }

    /// Level `n` as a [`LevelSet`].
    pub fn level_set(&self, n: usize) -> LevelSet {
        let entries = self.levels[n]
            .iter()
            .enumerate()
            .map(|(idx, node)| LevelEntry {
                word: self.word(n, idx),
                interval: node.interval.clone(),
                case: node.rule.case,
            })
            .collect();
        LevelSet {
            n,
            entries,
            truncated: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::cantor::{enumerate_level, BoundedType, CantorSchedule, EnumerationMode};

    #[test]
    fn tree_levels_match_enumeration() {
        let s = CantorSchedule::new(2, 2, int(1), vec![1, 1]).unwrap();
        let tree = LevelTree::build(&s, 7, 1_000_000).unwrap();
        for n in 1..=7 {
            let level = enumerate_level(&s, n, 1_000_000, EnumerationMode::Exhaustive).unwrap();
            assert_eq!(tree.level_set(n), level, "level {n}");
        }
    }

    #[test]
    fn children_nest_in_parents() {
        let c = BoundedType::new(3).unwrap();
        let tree = LevelTree::build(&c, 4, 10_000).unwrap();
        for n in 0..4 {
            for node in tree.level(n) {
                for child in &tree.level(n + 1)[node.children.clone()] {
                    assert!(node.interval.closure_contains(&child.interval));
                }
            }
        }
        assert_eq!(tree.node_count(), 1 + 3 + 9 + 27 + 81);
        assert_eq!(tree.ancestor(4, 80, 1), 2);
    }

    #[test]
    fn budget_is_enforced() {
        let c = BoundedType::new(3).unwrap();
        assert!(matches!(
            LevelTree::build(&c, 4, 100),
            Err(ConstructionError::Explosion { level: 4, .. })
        ));
    }
}
