//! Joint grid search over the interpolation weights.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::corpus::{Document, ParallelDocumentCorpus};
use crate::decoder::{doc_decode, Weights};
use crate::error::{Error, Result};
use crate::eval::corpus_bleu;
use crate::lm::LanguageModel;
use crate::proposal::Lattice;

pub const DEFAULT_LAMBDA12: [f64; 7] = [0.8, 1.0, 1.5, 2.0, 2.2, 2.5, 3.0];
pub const DEFAULT_LAMBDA3: [f64; 4] = [0.2, 0.5, 0.8, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub lambda3_values: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda1_values: DEFAULT_LAMBDA12.to_vec(),
            lambda2_values: DEFAULT_LAMBDA12.to_vec(),
            lambda3_values: DEFAULT_LAMBDA3.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let lists = [&self.lambda1_values, &self.lambda2_values, &self.lambda3_values];
        if lists.iter().any(|l| l.is_empty()) {
            return Err(Error::invalid("grid has an empty weight list"));
        }
        if lists.iter().flat_map(|l| l.iter()).any(|w| !w.is_finite()) {
            return Err(Error::invalid("grid contains a non-finite weight"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lambda1_values.len() * self.lambda2_values.len() * self.lambda3_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// λ1 outer, λ2 middle, λ3 inner; `lambda_lm` is 1.
    pub fn points(&self) -> Vec<Weights> {
        let mut out = Vec::with_capacity(self.len());
        for &l1 in &self.lambda1_values {
            for &l2 in &self.lambda2_values {
                for &l3 in &self.lambda3_values {
                    out.push(Weights::new(l1, l2, l3));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub weights: Weights,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Weights,
    pub metric: f64,
    /// One row per grid point in iteration order.
    pub table: Vec<GridRow>,
}

impl GridResult {
    /// `lambda1 lambda2 lambda3 bleu`, tab separated, with a header line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("lambda1\tlambda2\tlambda3\tbleu\n");
        for r in &self.table {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:.6}",
                r.weights.lambda1, r.weights.lambda2, r.weights.lambda3, r.metric
            );
        }
        s
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Orders `lattices` to follow `dev`'s documents.
fn align<'a>(dev: &ParallelDocumentCorpus, lattices: &'a [Lattice]) -> Result<Vec<&'a Lattice>> {
    dev.docs
        .iter()
        .map(|(src, _)| {
            lattices
                .iter()
                .find(|l| l.doc_id == src.id)
                .ok_or_else(|| Error::invalid(format!("no lattice for dev document {}", src.id)))
        })
        .collect()
}

/// Decodes every lattice with `weights`.
pub fn decode_all<L: LanguageModel, C: ChannelModel>(
    lattices: &[&Lattice],
    lm: &L,
    channel: &C,
    weights: &Weights,
    beam: usize,
) -> Result<Vec<Document>> {
    lattices
        .iter()
        .map(|l| doc_decode(l, lm, channel, weights, beam).map(|r| r.output))
        .collect()
}

/// Grid search with case-insensitive corpus BLEU against the dev references.
pub fn grid_search<L: LanguageModel, C: ChannelModel>(
    dev: &ParallelDocumentCorpus,
    lattices: &[Lattice],
    lm: &L,
    channel: &C,
    grid: &GridSpec,
    beam: usize,
) -> Result<GridResult> {
    let refs = vec![dev.targets()];
    grid_search_with(dev, lattices, lm, channel, grid, beam, |out| {
        Ok(corpus_bleu(out, &refs, true)?.bleu)
    })
}

/// Grid search under an arbitrary metric of the decoded dev outputs (higher
/// is better). Points are evaluated in parallel; the earliest point wins
/// ties.
pub fn grid_search_with<L, C, M>(
    dev: &ParallelDocumentCorpus,
    lattices: &[Lattice],
    lm: &L,
    channel: &C,
    grid: &GridSpec,
    beam: usize,
    metric: M,
) -> Result<GridResult>
where
    L: LanguageModel,
    C: ChannelModel,
    M: Fn(&[Document]) -> Result<f64> + Sync,
{
    grid.validate()?;
    let ordered = align(dev, lattices)?;
    let table = grid
        .points()
        .into_par_iter()
        .map(|w| {
            let out = decode_all(&ordered, lm, channel, &w, beam)?;
            Ok(GridRow {
                weights: w,
                metric: metric(&out)?,
            })
        })
        .collect::<Result<Vec<GridRow>>>()?;
    let mut best = table[0];
    for r in &table[1..] {
        if r.metric > best.metric {
            best = *r;
        }
    }
    log::info!("grid search: best {} with metric {:.4}", best.weights, best.metric);
    Ok(GridResult {
        best: best.weights,
        metric: best.metric,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_196_points_in_order() {
        let g = GridSpec::default();
        let p = g.points();
        assert_eq!(p.len(), 196);
        assert_eq!(p[0], Weights::new(0.8, 0.8, 0.2));
        assert_eq!(p[1], Weights::new(0.8, 0.8, 0.5));
        assert_eq!(p[4], Weights::new(0.8, 1.0, 0.2));
        assert_eq!(p[195], Weights::new(3.0, 3.0, 1.0));
    }

    #[test]
    fn empty_list_rejected() {
        let g = GridSpec {
            lambda3_values: vec![],
            ..GridSpec::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn tsv_header_and_rows() {
        let r = GridResult {
            best: Weights::new(1.0, 2.0, 0.5),
            metric: 10.0,
            table: vec![GridRow {
                weights: Weights::new(1.0, 2.0, 0.5),
                metric: 10.0,
            }],
        };
        assert_eq!(r.to_tsv(), "lambda1\tlambda2\tlambda3\tbleu\n1\t2\t0.5\t10.000000\n");
    }
}
