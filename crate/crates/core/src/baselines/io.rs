//! Baseline model container (little-endian):
//!
//! ```text
//! "AEDC" | u16 version | u8 kind (0 nb, 1 rf, 2 svm) | u8 0
//! nb : u32 d | f64 priors[2] | f64 means[2][d] | f64 variances[2][d]
//! rf : u32 d | u32 trees, each: u64 seed, u32 nodes, each node:
//!      u8 0, f64 p1 (leaf) | u8 1, u32 feature, f64 threshold, u32 left, u32 right
//! svm: f64 gamma c bias platt_a platt_b | u8 converged | u64 iterations
//!      | u32 n_sv | u32 d | f64 dual_coef[n_sv] | f64 support_vectors[n_sv][d]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BaselineModel, DecisionTree, NbModel, Node, RfModel, SvmModel};
use crate::binio::{put_f64s, put_u32, put_u64, Reader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AEDC";
const VERSION: u16 = 1;

pub fn write_baseline<W: Write>(mut w: W, model: &BaselineModel) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    match model {
        BaselineModel::NaiveBayes(m) => {
            w.write_all(&[0, 0])?;
            put_u32(&mut w, m.n_features())?;
            put_f64s(&mut w, &m.priors)?;
            for v in m.means.iter().chain(&m.variances) {
                put_f64s(&mut w, v)?;
            }
        }
        BaselineModel::RandomForest(m) => {
            w.write_all(&[1, 0])?;
            put_u32(&mut w, m.n_features)?;
            put_u32(&mut w, m.trees.len())?;
            for (tree, &seed) in m.trees.iter().zip(&m.tree_seeds) {
                put_u64(&mut w, seed)?;
                put_u32(&mut w, tree.nodes.len())?;
                for node in &tree.nodes {
                    match *node {
                        Node::Leaf { p1 } => {
                            w.write_all(&[0])?;
                            put_f64s(&mut w, &[p1])?;
                        }
                        Node::Split { feature, threshold, left, right } => {
                            w.write_all(&[1])?;
                            put_u32(&mut w, feature)?;
                            put_f64s(&mut w, &[threshold])?;
                            put_u32(&mut w, left)?;
                            put_u32(&mut w, right)?;
                        }
                    }
                }
            }
        }
        BaselineModel::Svm(m) => {
            w.write_all(&[2, 0])?;
            put_f64s(&mut w, &[m.gamma, m.c, m.bias, m.platt_a, m.platt_b])?;
            w.write_all(&[u8::from(m.converged)])?;
            put_u64(&mut w, m.iterations as u64)?;
            put_u32(&mut w, m.support_vectors.len())?;
            put_u32(&mut w, m.n_features())?;
            put_f64s(&mut w, &m.dual_coef)?;
            for sv in &m.support_vectors {
                put_f64s(&mut w, sv)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn read_baseline<R: Read>(r: R) -> Result<BaselineModel> {
    let mut r = Reader::new(r);
    r.header(MAGIC, VERSION)?;
    let kind = r.u8()?;
    r.u8()?;
    let model = match kind {
        0 => {
            let d = r.u32()?;
            let priors = [r.f64()?, r.f64()?];
            let means = [r.f64s(d)?, r.f64s(d)?];
            let variances = [r.f64s(d)?, r.f64s(d)?];
            BaselineModel::NaiveBayes(NbModel { priors, means, variances })
        }
        1 => {
            let n_features = r.u32()?;
            let n_trees = r.u32()?;
            let (mut trees, mut tree_seeds) = (Vec::new(), Vec::new());
            for _ in 0..n_trees {
                tree_seeds.push(r.u64()?);
                let n_nodes = r.u32()?;
                let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
                for id in 0..n_nodes {
                    nodes.push(match r.u8()? {
                        0 => Node::Leaf { p1: r.f64()? },
                        1 => {
                            let (feature, threshold, left, right) = (r.u32()?, r.f64()?, r.u32()?, r.u32()?);
                            // children always follow their parent, which rules out cycles
                            if feature >= n_features || left <= id || right <= id || left >= n_nodes || right >= n_nodes {
                                return Err(bad(format!("corrupt split node {id}")));
                            }
                            Node::Split { feature, threshold, left, right }
                        }
                        t => return Err(bad(format!("unknown node tag {t}"))),
                    });
                }
                if nodes.is_empty() {
                    return Err(bad("empty tree"));
                }
                trees.push(DecisionTree { nodes });
            }
            BaselineModel::RandomForest(RfModel { trees, tree_seeds, n_features })
        }
        2 => {
            let [gamma, c, bias, platt_a, platt_b] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
            let converged = r.u8()? != 0;
            let iterations = r.u64()? as usize;
            let (n_sv, d) = (r.u32()?, r.u32()?);
            let dual_coef = r.f64s(n_sv)?;
            let support_vectors = (0..n_sv).map(|_| r.f64s(d)).collect::<Result<_>>()?;
            BaselineModel::Svm(SvmModel { support_vectors, dual_coef, bias, gamma, c, platt_a, platt_b, converged, iterations })
        }
        other => return Err(bad(format!("unknown baseline kind {other}"))),
    };
    r.expect_end()?;
    Ok(model)
}

pub fn save_baseline(path: &Path, model: &BaselineModel) -> Result<()> {
    write_baseline(BufWriter::new(File::create(path)?), model)
}

pub fn load_baseline(path: &Path) -> Result<BaselineModel> {
    read_baseline(BufReader::new(File::open(path)?))
}
