//! Sparse leaf-indicator matrices: column `j` of a tree's block holds the leaf
//! value `v_j` on every row routed to leaf `j`, zero elsewhere.

use std::io::Write;

use crate::dataset::Dataset;
use crate::ensemble::{DecisionTree, TreeEnsemble};
use crate::error::{Error, Result};

/// One tree's columns in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingBlock {
    tree_index: usize,
    n_rows: usize,
    values: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    leaf_of_row: Vec<u32>,
    lipschitz: f64,
}

impl MappingBlock {
    pub fn build(tree: &DecisionTree, tree_index: usize, data: &Dataset) -> Self {
        let n_rows = data.n_rows();
        let n_leaves = tree.n_leaves();
        let leaf_of_row: Vec<u32> = data.rows().map(|x| tree.route(x) as u32).collect();

        let mut col_ptr = vec![0usize; n_leaves + 1];
        for &leaf in &leaf_of_row {
            col_ptr[leaf as usize + 1] += 1;
        }
        for j in 0..n_leaves {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let mut row_idx = vec![0usize; n_rows];
        for (i, &leaf) in leaf_of_row.iter().enumerate() {
            let slot = &mut fill[leaf as usize];
            row_idx[*slot] = i;
            *slot += 1;
        }

        let values = tree.leaf_values();
        let lipschitz = values
            .iter()
            .enumerate()
            .map(|(j, v)| v * v * (col_ptr[j + 1] - col_ptr[j]) as f64)
            .fold(0.0, f64::max);
        Self {
            tree_index,
            n_rows,
            values,
            col_ptr,
            row_idx,
            leaf_of_row,
            lipschitz,
        }
    }

    pub fn tree_index(&self) -> usize {
        self.tree_index
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_leaves(&self) -> usize {
        self.values.len()
    }

    pub fn leaf_values(&self) -> &[f64] {
        &self.values
    }

    pub fn leaf_count(&self, leaf: usize) -> usize {
        self.col_ptr[leaf + 1] - self.col_ptr[leaf]
    }

    pub fn leaf_counts(&self) -> Vec<usize> {
        (0..self.n_leaves()).map(|j| self.leaf_count(j)).collect()
    }

    /// Sorted row indices routed to `leaf`.
    pub fn column_rows(&self, leaf: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[leaf]..self.col_ptr[leaf + 1]]
    }

    pub fn leaf_of_row(&self, row: usize) -> usize {
        self.leaf_of_row[row] as usize
    }

    /// Largest eigenvalue of `M_t^T M_t`. Leaf supports are disjoint, so the
    /// Gram matrix is diagonal with entries `v_j^2 n_j`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// A block whose columns are all zero; the solver skips it.
    pub fn is_inert(&self) -> bool {
        self.lipschitz <= 0.0
    }

    /// `out = -M_t^T r`, the gradient of `0.5 * ||r||^2` with respect to this block.
    pub fn gradient_into(&self, residual: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for (&leaf, &r) in self.leaf_of_row.iter().zip(residual) {
            out[leaf as usize] += r;
        }
        for (g, &v) in out.iter_mut().zip(&self.values) {
            *g *= -v;
        }
    }

    pub fn gradient(&self, residual: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_leaves()];
        self.gradient_into(residual, &mut out);
        out
    }

    /// `r += M_t (old - new)`.
    pub fn apply_delta(&self, residual: &mut [f64], old: &[f64], new: &[f64]) {
        for (j, (&o, &n)) in old.iter().zip(new).enumerate() {
            let step = self.values[j] * (o - n);
            if step != 0.0 {
                for &i in self.column_rows(j) {
                    residual[i] += step;
                }
            }
        }
    }

    /// `out += M_t w_t`.
    pub fn accumulate(&self, weights: &[f64], out: &mut [f64]) {
        for (o, &leaf) in out.iter_mut().zip(&self.leaf_of_row) {
            *o += self.values[leaf as usize] * weights[leaf as usize];
        }
    }
}

/// Horizontal stack of per-tree blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    blocks: Vec<MappingBlock>,
    offsets: Vec<usize>,
    n_rows: usize,
}

impl MappingMatrix {
    pub fn build(ensemble: &TreeEnsemble, data: &Dataset) -> Result<Self> {
        if data.n_features() != ensemble.n_features() {
            return Err(Error::dims(
                "dataset feature count",
                ensemble.n_features(),
                data.n_features(),
            ));
        }
        let blocks: Vec<MappingBlock> = ensemble
            .trees()
            .iter()
            .enumerate()
            .map(|(t, tree)| MappingBlock::build(tree, t, data))
            .collect();
        Ok(Self::from_blocks(blocks))
    }

    pub fn from_blocks(blocks: Vec<MappingBlock>) -> Self {
        let n_rows = blocks.first().map_or(0, MappingBlock::n_rows);
        let mut offsets = vec![0];
        for b in &blocks {
            assert_eq!(b.n_rows(), n_rows, "blocks must share the row count");
            offsets.push(offsets.last().unwrap() + b.n_leaves());
        }
        Self {
            blocks,
            offsets,
            n_rows,
        }
    }

    pub fn blocks(&self) -> &[MappingBlock] {
        &self.blocks
    }

    pub fn block(&self, t: usize) -> &MappingBlock {
        &self.blocks[t]
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `M w`.
    pub fn predict(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n_columns() {
            return Err(Error::dims("weight vector", self.n_columns(), w.len()));
        }
        let mut out = vec![0.0; self.n_rows];
        for (t, block) in self.blocks.iter().enumerate() {
            block.accumulate(&w[self.offsets[t]..self.offsets[t + 1]], &mut out);
        }
        Ok(out)
    }

    /// `M^T r`.
    pub fn transpose_mul(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_rows {
            return Err(Error::dims("row vector", self.n_rows, r.len()));
        }
        let mut out = vec![0.0; self.n_columns()];
        for (t, block) in self.blocks.iter().enumerate() {
            let col = &mut out[self.offsets[t]..self.offsets[t + 1]];
            block.gradient_into(r, col);
            col.iter_mut().for_each(|g| *g = -*g);
        }
        Ok(out)
    }

    /// Debug dump: one `row col value` line per nonzero, columns in stacked order.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, block) in self.blocks.iter().enumerate() {
            for j in 0..block.n_leaves() {
                let v = block.leaf_values()[j];
                for &i in block.column_rows(j) {
                    writeln!(out, "{i} {} {v:?}", self.offsets[t] + j)?;
                }
            }
        }
        Ok(())
    }
}

/// Weight vector partitioned into per-tree blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedWeights {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl BlockedWeights {
    pub fn zeros(matrix: &MappingMatrix) -> Self {
        Self {
            values: vec![0.0; matrix.n_columns()],
            offsets: matrix.offsets().to_vec(),
        }
    }

    /// `offsets` starts at 0 and ends at `values.len()`.
    pub fn from_parts(values: Vec<f64>, offsets: Vec<usize>) -> Result<Self> {
        let ok = offsets.first() == Some(&0)
            && offsets.last() == Some(&values.len())
            && offsets.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(Error::InvalidInput(
                "block offsets do not partition the weights".into(),
            ));
        }
        Ok(Self { values, offsets })
    }

    pub fn from_flat(matrix: &MappingMatrix, values: Vec<f64>) -> Result<Self> {
        if values.len() != matrix.n_columns() {
            return Err(Error::dims(
                "weight vector",
                matrix.n_columns(),
                values.len(),
            ));
        }
        Self::from_parts(values, matrix.offsets().to_vec())
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block(&self, t: usize) -> &[f64] {
        &self.values[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn block_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.offsets.windows(2).map(|w| &self.values[w[0]..w[1]])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn nnz(&self, zero_tolerance: f64) -> usize {
        self.values
            .iter()
            .filter(|w| w.abs() > zero_tolerance)
            .count()
    }

    pub fn is_compatible(&self, matrix: &MappingMatrix) -> bool {
        self.offsets == matrix.offsets()
    }
}

/// `r = y - M w`, maintained incrementally with periodic recomputation.
#[derive(Debug, Clone)]
pub struct Residual {
    values: Vec<f64>,
    updates_since_refresh: usize,
    refresh_interval: usize,
}

impl Residual {
    pub fn new(
        matrix: &MappingMatrix,
        y: &[f64],
        w: &BlockedWeights,
        refresh_interval: usize,
    ) -> Result<Self> {
        let mut r = Self {
            values: vec![0.0; y.len()],
            updates_since_refresh: 0,
            refresh_interval: refresh_interval.max(1),
        };
        r.refresh(matrix, y, w)?;
        Ok(r)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn half_squared_norm(&self) -> f64 {
        0.5 * self.values.iter().map(|r| r * r).sum::<f64>()
    }

    /// Applies `r += M_t (old - new)` and counts the update toward the refresh interval.
    pub fn apply_block_delta(&mut self, block: &MappingBlock, old: &[f64], new: &[f64]) {
        block.apply_delta(&mut self.values, old, new);
        self.updates_since_refresh += 1;
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Counts one block update made through [`Residual::values_mut`].
    pub(crate) fn mark_update(&mut self) {
        self.updates_since_refresh += 1;
    }

    pub fn needs_refresh(&self) -> bool {
        self.updates_since_refresh >= self.refresh_interval
    }

    /// Recomputes `y - M w` from scratch.
    pub fn refresh(&mut self, matrix: &MappingMatrix, y: &[f64], w: &BlockedWeights) -> Result<()> {
        if y.len() != matrix.n_rows() {
            return Err(Error::dims("target length", matrix.n_rows(), y.len()));
        }
        let fitted = matrix.predict(w.as_slice())?;
        self.values.clear();
        self.values
            .extend(y.iter().zip(&fitted).map(|(y, f)| y - f));
        self.updates_since_refresh = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Node;

    fn step_tree() -> DecisionTree {
        DecisionTree::new(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 1.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    value: 0.0,
                    count: 2,
                },
                Node::Leaf {
                    value: 10.0,
                    count: 2,
                },
            ],
            0,
        )
        .unwrap()
    }

    fn line_data() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.0, 0.0, 10.0, 10.0],
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_block() {
        let b = MappingBlock::build(&DecisionTree::constant(3.0, 4), 0, &line_data());
        assert_eq!(b.column_rows(0), &[0, 1, 2, 3]);
        assert_eq!(b.lipschitz(), 36.0);
    }

    #[test]
    fn step_block_columns_and_lipschitz() {
        let b = MappingBlock::build(&step_tree(), 0, &line_data());
        assert_eq!(b.column_rows(0), &[0, 1]);
        assert_eq!(b.column_rows(1), &[2, 3]);
        assert_eq!(b.lipschitz(), 200.0);
        assert_eq!(b.gradient(&[0.0, 0.0, 10.0, 10.0]), vec![0.0, -200.0]);
        assert_eq!(b.gradient(&[0.0; 4]), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_valued_tree_is_inert() {
        let b = MappingBlock::build(&DecisionTree::constant(0.0, 4), 0, &line_data());
        assert!(b.is_inert());
    }

    #[test]
    fn delta_from_zero_subtracts_leaf_value() {
        let data = line_data();
        let m =
            MappingMatrix::build(&TreeEnsemble::new(vec![step_tree()], 1).unwrap(), &data).unwrap();
        let w = BlockedWeights::zeros(&m);
        let mut r = Residual::new(&m, data.target(), &w, 1000).unwrap();
        r.apply_block_delta(m.block(0), &[0.0, 0.0], &[0.0, 1.0]);
        assert_eq!(r.as_slice(), &[0.0, 0.0, 0.0, 0.0]);
        r.apply_block_delta(m.block(0), &[0.0, 1.0], &[0.0, 1.0]);
        assert_eq!(r.as_slice(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn predict_checks_length() {
        let m = MappingMatrix::build(
            &TreeEnsemble::new(vec![step_tree()], 1).unwrap(),
            &line_data(),
        )
        .unwrap();
        assert!(m.predict(&[1.0]).is_err());
        assert_eq!(m.predict(&[0.0, 1.0]).unwrap(), vec![0.0, 0.0, 10.0, 10.0]);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn triplet_dump_lists_each_row_once_per_block() {
        let m = MappingMatrix::build(
            &TreeEnsemble::new(vec![step_tree()], 1).unwrap(),
            &line_data(),
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("3 1 10.0"));
    }
}
