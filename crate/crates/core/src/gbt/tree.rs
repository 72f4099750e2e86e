use serde::{Deserialize, Serialize};

use super::split::{best_split, leaf_weight, Features, SplitParams};
use super::GbtError;

/// A regression tree node. Rows with `value < threshold` take the left branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Largest feature index referenced by any split.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub x: Features<'a>,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub features: &'a [usize],
    pub params: SplitParams,
    pub max_depth: usize,
}

impl TreeBuilder<'_> {
    pub fn grow(&self, rows: Vec<usize>) -> Result<TreeNode, GbtError> {
        self.grow_at(rows, 0)
    }

    fn grow_at(&self, rows: Vec<usize>, depth: usize) -> Result<TreeNode, GbtError> {
        if depth < self.max_depth {
            if let Some(split) = best_split(self.x, &rows, self.grad, self.hess, self.features, &self.params) {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.x.value(r, split.feature) < split.threshold);
                return Ok(TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(self.grow_at(left, depth + 1)?),
                    right: Box::new(self.grow_at(right, depth + 1)?),
                });
            }
        }
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        Ok(TreeNode::Leaf { weight: leaf_weight(g, h, self.params.lambda)? })
    }
}
