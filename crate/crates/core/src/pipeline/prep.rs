//! Baseline preprocessing: per-feature z-scoring, then RFE selection or PCA
//! projection. Persisted as its own small container:
//!
//! ```text
//! "AEDP" | u16 version | u32 d | f64 mean[d] | f64 std[d]
//! u8 kind: 0 none | 1 rfe: u32 m, u32 idx[m] | 2 pca: u32 n, f64 mean[d], f64 components[n][d], f64 explained[n]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::binio::{put_f64s, put_u32, Reader};
use crate::error::{Error, Result};
use crate::features::PcaModel;

const MAGIC: &[u8; 4] = b"AEDP";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    None,
    Select(Vec<usize>),
    Pca(PcaModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePrep {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub projection: Projection,
}

impl FeaturePrep {
    /// Per-column mean and population std; constant columns keep std 1.
    pub fn zscore(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let std: Vec<f64> = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(c, m)| {
                let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len().max(1) as f64).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Self { mean: mean.to_vec(), std, projection: Projection::None }
    }

    pub fn n_inputs(&self) -> usize {
        self.mean.len()
    }

    pub fn n_outputs(&self) -> usize {
        match &self.projection {
            Projection::None => self.mean.len(),
            Projection::Select(idx) => idx.len(),
            Projection::Pca(p) => p.n_components(),
        }
    }

    pub fn standardize_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for mut row in z.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        z
    }

    /// Project already standardized rows.
    pub fn project_rows(&self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.projection {
            Projection::None => z.to_owned(),
            Projection::Select(idx) => z.select(Axis(1), idx),
            Projection::Pca(p) => p.transform_rows(z),
        }
    }

    pub fn apply_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::shape(format!("{} features", self.n_inputs()), format!("{} features", x.ncols())));
        }
        Ok(self.project_rows(self.standardize_rows(x).view()))
    }
}

pub fn write_prep<W: Write>(mut w: W, p: &FeaturePrep) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u32(&mut w, p.mean.len())?;
    put_f64s(&mut w, &p.mean)?;
    put_f64s(&mut w, &p.std)?;
    match &p.projection {
        Projection::None => w.write_all(&[0])?,
        Projection::Select(idx) => {
            w.write_all(&[1])?;
            put_u32(&mut w, idx.len())?;
            for &i in idx {
                put_u32(&mut w, i)?;
            }
        }
        Projection::Pca(m) => {
            w.write_all(&[2])?;
            put_u32(&mut w, m.n_components())?;
            put_f64s(&mut w, m.mean.as_slice().expect("contiguous"))?;
            for row in m.components.rows() {
                put_f64s(&mut w, &row.to_vec())?;
            }
            put_f64s(&mut w, &m.explained_variance)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_prep<R: Read>(r: R) -> Result<FeaturePrep> {
    let mut r = Reader::new(r);
    r.header(MAGIC, VERSION)?;
    let d = r.u32()?;
    let mean = r.f64s(d)?;
    let std = r.f64s(d)?;
    let projection = match r.u8()? {
        0 => Projection::None,
        1 => {
            let m = r.u32()?;
            let idx: Vec<usize> = (0..m).map(|_| r.u32()).collect::<Result<_>>()?;
            if idx.iter().any(|&i| i >= d) {
                return Err(Error::Format("selected feature index out of range".into()));
            }
            Projection::Select(idx)
        }
        2 => {
            let n = r.u32()?;
            let pmean = Array1::from(r.f64s(d)?);
            let comps = r.f64s(n * d)?;
            let components = Array2::from_shape_vec((n, d), comps).map_err(|e| Error::Format(e.to_string()))?;
            let explained_variance = r.f64s(n)?;
            Projection::Pca(PcaModel { mean: pmean, components, explained_variance })
        }
        k => return Err(Error::Format(format!("unknown projection kind {k}"))),
    };
    r.expect_end()?;
    Ok(FeaturePrep { mean, std, projection })
}

pub fn save_prep(path: &Path, p: &FeaturePrep) -> Result<()> {
    write_prep(BufWriter::new(File::create(path)?), p)
}

pub fn load_prep(path: &Path) -> Result<FeaturePrep> {
    read_prep(BufReader::new(File::open(path)?))
}
