//! Binary network checkpoints.
//!
//! Layout (little-endian): magic `LPLB`, version u32 = 1, layer count u32;
//! per layer a header (in_dim u32, out_dim u32, activation tag u8,
//! batch-norm flag u8); then per layer the f64 parameter arrays in
//! declaration order: weight (row-major), bias, and when batch-norm is
//! present scale, shift, running mean, running variance and the momentum
//! scalar. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::error::{Result, SubstrateError};
use crate::net::{Activation, DenseNet, Layer, LayerSpec, Mode};
use crate::rng::Rng;

const MAGIC: &[u8; 4] = b"LPLB";
const VERSION: u32 = 1;

pub fn save_net(net: &DenseNet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(net.layers.len() as u32)?;
    for layer in &net.layers {
        w.write_u32::<LittleEndian>(layer.in_dim() as u32)?;
        w.write_u32::<LittleEndian>(layer.out_dim() as u32)?;
        w.write_u8(layer.activation.tag())?;
        w.write_u8(layer.batch_norm.is_some() as u8)?;
    }
    for layer in &net.layers {
        for v in layer.weight.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for v in layer.bias.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        if let Some(bn) = &layer.batch_norm {
            for arr in [&bn.scale, &bn.shift, &bn.running_mean, &bn.running_var] {
                for v in arr.iter() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
            w.write_f64::<LittleEndian>(bn.momentum)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_net(path: &Path) -> Result<DenseNet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SubstrateError::Checkpoint(format!(
            "{}: bad magic {:?}",
            path.display(),
            magic
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(SubstrateError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let n_layers = r.read_u32::<LittleEndian>()? as usize;
    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.read_u32::<LittleEndian>()? as usize;
        let out_dim = r.read_u32::<LittleEndian>()? as usize;
        let tag = r.read_u8()?;
        let activation = Activation::from_tag(tag)
            .ok_or_else(|| SubstrateError::Checkpoint(format!("bad activation tag {tag}")))?;
        let batch_norm = r.read_u8()? != 0;
        specs.push(LayerSpec {
            in_dim,
            out_dim,
            activation,
            batch_norm,
        });
    }
    let mut net = DenseNet::new(&specs, 0.9, &mut Rng::new(0));
    for layer in &mut net.layers {
        read_layer(&mut r, layer)?;
    }
    net.set_mode(Mode::Eval);
    Ok(net)
}

fn read_layer<R: Read>(r: &mut R, layer: &mut Layer) -> Result<()> {
    let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
    layer.weight = read_array2(r, in_dim, out_dim)?;
    layer.bias = read_array1(r, out_dim)?;
    if let Some(bn) = &mut layer.batch_norm {
        bn.scale = read_array1(r, out_dim)?;
        bn.shift = read_array1(r, out_dim)?;
        bn.running_mean = read_array1(r, out_dim)?;
        bn.running_var = read_array1(r, out_dim)?;
        bn.momentum = r.read_f64::<LittleEndian>()?;
    }
    Ok(())
}

fn read_array1<R: Read>(r: &mut R, n: usize) -> Result<Array1<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut v)?;
    Ok(Array1::from_vec(v))
}

fn read_array2<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut v = vec![0.0; rows * cols];
    r.read_f64_into::<LittleEndian>(&mut v)?;
    Array2::from_shape_vec((rows, cols), v)
        .map_err(|e| SubstrateError::Checkpoint(e.to_string()))
}
