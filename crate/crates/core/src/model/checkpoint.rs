//! Binary model checkpoints: a versioned header with the cascade
//! thresholds, followed by named little-endian f32 tensors.
//!
//! Layout: magic "CLEX" | version u32 | kind u8 | context_dim u32 |
//! t_A f64 | t_L f64 | tensor count u32 | tensors. Each tensor is
//! name length u32 | name bytes | rank u32 | dims u32 x rank | data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

use super::cnn::CnnParams;
use super::linear::LinearModel;
use super::thresholds::Thresholds;
use super::CnnConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CLEX";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cnn,
    Linear,
}

#[derive(Debug, Clone)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub context_dim: u32,
    pub thresholds: Thresholds,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Parse(format!("checkpoint missing tensor {name:?}")))
    }

    /// Packs the aggression and loss one-vs-rest CNNs with the tuned
    /// thresholds.
    pub fn from_cnn_pair(
        aggression: &CnnParams,
        loss: &CnnParams,
        thresholds: Thresholds,
    ) -> Checkpoint {
        let mut tensors = Vec::new();
        for (prefix, params) in [("aggression", aggression), ("loss", loss)] {
            tensors.extend(cnn_tensors(prefix, params));
        }
        Checkpoint {
            kind: ModelKind::Cnn,
            context_dim: aggression.context_dim as u32,
            thresholds,
            tensors,
        }
    }

    pub fn to_cnn_pair(&self, dropout: f64) -> Result<(CnnParams, CnnParams)> {
        if self.kind != ModelKind::Cnn {
            return Err(Error::Parse("checkpoint does not hold a CNN".into()));
        }
        Ok((
            self.read_cnn("aggression", dropout)?,
            self.read_cnn("loss", dropout)?,
        ))
    }

    fn read_cnn(&self, prefix: &str, dropout: f64) -> Result<CnnParams> {
        let emb = self.tensor(&format!("{prefix}.emb"))?;
        let [vocab_size, emb_dim] = dims2(emb)?;
        let conv1_w = self.tensor(&format!("{prefix}.conv1_w"))?;
        let [n_filters, _] = dims2(conv1_w)?;
        let dense_w = self.tensor(&format!("{prefix}.dense_w"))?;
        let [dense_dim, _] = dims2(dense_w)?;
        let params = CnnParams {
            vocab_size,
            emb_dim,
            n_filters,
            dense_dim,
            context_dim: self.context_dim as usize,
            dropout,
            emb: to_f64(&emb.data),
            conv1_w: to_f64(&conv1_w.data),
            conv1_b: to_f64(&self.tensor(&format!("{prefix}.conv1_b"))?.data),
            conv2_w: to_f64(&self.tensor(&format!("{prefix}.conv2_w"))?.data),
            conv2_b: to_f64(&self.tensor(&format!("{prefix}.conv2_b"))?.data),
            dense_w: to_f64(&dense_w.data),
            dense_b: to_f64(&self.tensor(&format!("{prefix}.dense_b"))?.data),
            out_w: to_f64(&self.tensor(&format!("{prefix}.out_w"))?.data),
            out_b: self.tensor(&format!("{prefix}.out_b"))?.data[0] as f64,
        };
        let expect = CnnConfig {
            emb_dim,
            n_filters,
            dense_dim,
            context_dim: params.context_dim,
            dropout,
        };
        let _ = expect;
        Ok(params)
    }

    pub fn from_linear(model: &LinearModel, context_dim: u32) -> Checkpoint {
        Checkpoint {
            kind: ModelKind::Linear,
            context_dim,
            thresholds: Thresholds {
                t_aggression: 0.0,
                t_loss: 0.0,
            },
            tensors: vec![
                Tensor {
                    name: "linear.weights".into(),
                    dims: vec![3, model.dim as u32],
                    data: model.weights.iter().map(|&v| v as f32).collect(),
                },
                Tensor {
                    name: "linear.biases".into(),
                    dims: vec![3],
                    data: model.biases.iter().map(|&v| v as f32).collect(),
                },
            ],
        }
    }

    pub fn to_linear(&self) -> Result<LinearModel> {
        if self.kind != ModelKind::Linear {
            return Err(Error::Parse("checkpoint does not hold a linear model".into()));
        }
        let weights = self.tensor("linear.weights")?;
        let [_, dim] = dims2(weights)?;
        let biases = &self.tensor("linear.biases")?.data;
        if biases.len() != 3 {
            return Err(Error::Parse("linear.biases must have 3 entries".into()));
        }
        Ok(LinearModel {
            dim,
            weights: to_f64(&weights.data),
            biases: [biases[0] as f64, biases[1] as f64, biases[2] as f64],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[match self.kind {
            ModelKind::Cnn => 0u8,
            ModelKind::Linear => 1u8,
        }])?;
        w.write_all(&self.context_dim.to_le_bytes())?;
        w.write_all(&self.thresholds.t_aggression.to_le_bytes())?;
        w.write_all(&self.thresholds.t_loss.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            let expected: usize = t.dims.iter().map(|&d| d as usize).product();
            debug_assert_eq!(expected, t.data.len(), "tensor {} shape", t.name);
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
            for &d in &t.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            for &v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Parse("bad checkpoint magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut kind_byte = [0u8; 1];
        r.read_exact(&mut kind_byte)?;
        let kind = match kind_byte[0] {
            0 => ModelKind::Cnn,
            1 => ModelKind::Linear,
            other => return Err(Error::Parse(format!("unknown model kind {other}"))),
        };
        let context_dim = read_u32(&mut r)?;
        let t_aggression = read_f64(&mut r)?;
        let t_loss = read_f64(&mut r)?;
        let n_tensors = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name_len = read_u32(&mut r)? as usize;
            if name_len > 4096 {
                return Err(Error::Parse("tensor name too long".into()));
            }
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Parse("tensor name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)? as usize;
            if rank > 8 {
                return Err(Error::Parse("tensor rank too large".into()));
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(read_u32(&mut r)?);
            }
            let count: usize = dims.iter().map(|&d| d as usize).product();
            let mut data = vec![0f32; count];
            let mut buf = [0u8; 4];
            for v in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f32::from_le_bytes(buf);
            }
            tensors.push(Tensor { name, dims, data });
        }
        Ok(Checkpoint {
            kind,
            context_dim,
            thresholds: Thresholds {
                t_aggression,
                t_loss,
            },
            tensors,
        })
    }
}

fn cnn_tensors(prefix: &str, p: &CnnParams) -> Vec<Tensor> {
    let t = |name: &str, dims: Vec<u32>, data: &[f64]| Tensor {
        name: format!("{prefix}.{name}"),
        dims,
        data: data.iter().map(|&v| v as f32).collect(),
    };
    vec![
        t("emb", vec![p.vocab_size as u32, p.emb_dim as u32], &p.emb),
        t("conv1_w", vec![p.n_filters as u32, p.emb_dim as u32], &p.conv1_w),
        t("conv1_b", vec![p.n_filters as u32], &p.conv1_b),
        t(
            "conv2_w",
            vec![p.n_filters as u32, 2 * p.emb_dim as u32],
            &p.conv2_w,
        ),
        t("conv2_b", vec![p.n_filters as u32], &p.conv2_b),
        t(
            "dense_w",
            vec![p.dense_dim as u32, 2 * p.n_filters as u32],
            &p.dense_w,
        ),
        t("dense_b", vec![p.dense_dim as u32], &p.dense_b),
        t(
            "out_w",
            vec![(p.dense_dim + p.context_dim) as u32],
            &p.out_w,
        ),
        t("out_b", vec![1], &[p.out_b]),
    ]
}

fn dims2(t: &Tensor) -> Result<[usize; 2]> {
    if t.dims.len() != 2 {
        return Err(Error::Parse(format!(
            "tensor {} must be rank 2, got rank {}",
            t.name,
            t.dims.len()
        )));
    }
    Ok([t.dims[0] as usize, t.dims[1] as usize])
}

fn to_f64(data: &[f32]) -> Vec<f64> {
    data.iter().map(|&v| v as f64).collect()
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
