//! Model file layout (little-endian):
//!
//! ```text
//! "AEDN" | u16 version | u8 kind (0 cnn, 1 mlp) | u8 0
//! spec: cnn u32 h1 w1 k n_k n_d | mlp u32 h1 w1 l m ; then f64 dropout_p
//! u64 seed | u32 best_epoch
//! u32 epochs, each: u32 epoch, f64 train_loss train_acc val_loss val_acc
//! u32 tensors, each: u32 ndim, u32 dims[ndim], f32 values[prod(dims)]
//! ```
//!
//! Tensors follow the declared order of [`Network::tensors`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::Network;
use super::train::{EpochStats, TrainedModel};
use super::{CnnSpec, MlpSpec, ModelSpec};
use crate::binio::{put_u32, Reader};
use crate::error::{Error, Result};
use crate::rng;

const MAGIC: &[u8; 4] = b"AEDN";
const VERSION: u16 = 1;

pub fn write_model<W: Write>(mut w: W, model: &TrainedModel) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    match model.spec {
        ModelSpec::Cnn(s) => {
            w.write_all(&[0, 0])?;
            for v in [s.h1, s.w1, s.k, s.n_k, s.n_d] {
                put_u32(&mut w, v)?;
            }
        }
        ModelSpec::Mlp(s) => {
            w.write_all(&[1, 0])?;
            for v in [s.h1, s.w1, s.l, s.m] {
                put_u32(&mut w, v)?;
            }
        }
    }
    w.write_all(&model.spec.dropout_p().to_le_bytes())?;
    w.write_all(&model.seed.to_le_bytes())?;
    put_u32(&mut w, model.best_epoch)?;
    put_u32(&mut w, model.history.len())?;
    for e in &model.history {
        put_u32(&mut w, e.epoch)?;
        for v in [e.train_loss, e.train_acc, e.val_loss, e.val_acc] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let tensors = model.network.tensors();
    put_u32(&mut w, tensors.len())?;
    for (shape, data) in tensors {
        put_u32(&mut w, shape.len())?;
        for d in shape {
            put_u32(&mut w, d)?;
        }
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<TrainedModel> {
    let mut r = Reader::new(r);
    r.header(MAGIC, VERSION)?;
    let [kind, _] = r.bytes::<2>()?;
    let spec = match kind {
        0 => {
            let (h1, w1, k, n_k, n_d) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            ModelSpec::Cnn(CnnSpec { h1, w1, k, n_k, n_d, dropout_p: r.f64()? })
        }
        1 => {
            let (h1, w1, l, m) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            ModelSpec::Mlp(MlpSpec { h1, w1, l, m, dropout_p: r.f64()? })
        }
        other => return Err(Error::Format(format!("unknown model kind {other}"))),
    };
    spec.validate().map_err(|e| Error::Format(format!("invalid stored spec: {e}")))?;
    let seed = r.u64()?;
    let best_epoch = r.u32()?;
    let n_epochs = r.u32()?;
    if n_epochs > super::MAX_EPOCHS_LIMIT {
        return Err(Error::Format(format!("history of {n_epochs} epochs exceeds the limit")));
    }
    let mut history = Vec::with_capacity(n_epochs);
    for _ in 0..n_epochs {
        let epoch = r.u32()?;
        history.push(EpochStats {
            epoch,
            train_loss: r.f64()?,
            train_acc: r.f64()?,
            val_loss: r.f64()?,
            val_acc: r.f64()?,
        });
    }
    let mut network = Network::<f32>::init(spec, &mut rng::seeded(0))?;
    let expected: Vec<Vec<usize>> = network.tensors().into_iter().map(|(s, _)| s).collect();
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Error::Format(format!("expected {} tensors, found {count}", expected.len())));
    }
    for (slot, shape) in network.tensors_mut().into_iter().zip(&expected) {
        let ndim = r.u32()?;
        let dims: Vec<usize> = (0..ndim).map(|_| r.u32()).collect::<Result<_>>()?;
        if &dims != shape {
            return Err(Error::Format(format!("tensor shape {dims:?} does not match spec shape {shape:?}")));
        }
        for v in slot.iter_mut() {
            *v = r.f32()?;
        }
    }
    r.expect_end()?;
    Ok(TrainedModel { spec, network, history, seed, best_epoch })
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    read_model(BufReader::new(File::open(path)?))
}

pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in history {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}
