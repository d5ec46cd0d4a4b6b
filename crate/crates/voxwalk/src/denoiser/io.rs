//! VXWT named-tensor weight container.
//!
//! Layout, little-endian: magic `VXWT`, version u16, tensor count u32, then
//! per tensor: name length u16 + UTF-8 bytes, rank u8, dims u32 x rank,
//! f32 payload. Raw weights are stored under the layer name ("lig_in.w"),
//! the EMA shadow under an "ema." prefix; a "meta" tensor carries the grid
//! length and sigma.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::net::{layer_shapes, DenoiserConfig, DenoiserParams, LAYER_NAMES};
use super::tensor::Conv3;
use crate::error::{Result, VoxwalkError};

const VXWT_MAGIC: &[u8; 4] = b"VXWT";
const VXWT_VERSION: u16 = 1;

fn write_tensor<W: Write>(w: &mut W, name: &str, dims: &[u32], data: &[f64]) -> Result<()> {
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[dims.len() as u8])?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in data {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn save_params<W: Write>(params: &DenoiserParams, mut w: W) -> Result<()> {
    let cfg = &params.config;
    let n_tensors = 1 + 2 * 2 * params.convs.len();
    w.write_all(VXWT_MAGIC)?;
    w.write_all(&VXWT_VERSION.to_le_bytes())?;
    w.write_all(&(n_tensors as u32).to_le_bytes())?;
    write_tensor(
        &mut w,
        "meta",
        &[2],
        &[cfg.grid_length as f64, cfg.sigma],
    )?;
    for (prefix, convs) in [("", &params.convs), ("ema.", &params.ema)] {
        for (name, conv) in LAYER_NAMES.iter().zip(convs.iter()) {
            write_tensor(
                &mut w,
                &format!("{prefix}{name}.w"),
                &[conv.cout as u32, conv.cin as u32, 3, 3, 3],
                &conv.w,
            )?;
            write_tensor(&mut w, &format!("{prefix}{name}.b"), &[conv.cout as u32], &conv.b)?;
        }
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| VoxwalkError::Format("truncated VXWT stream".into()))?;
    Ok(buf)
}

fn read_raw_tensors<R: Read>(mut r: R) -> Result<HashMap<String, (Vec<u32>, Vec<f64>)>> {
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != VXWT_MAGIC {
        return Err(VoxwalkError::Format("bad VXWT magic".into()));
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VXWT_VERSION {
        return Err(VoxwalkError::Format(format!(
            "unsupported VXWT version {version}"
        )));
    }
    let count = u32::from_le_bytes(read_exact(&mut r)?);
    let mut out = HashMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| VoxwalkError::Format("truncated VXWT tensor name".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| VoxwalkError::Format("non-UTF-8 tensor name".into()))?;
        let rank = read_exact::<_, 1>(&mut r)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(read_exact(&mut r)?));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let mut payload = vec![0u8; n * 4];
        r.read_exact(&mut payload)
            .map_err(|_| VoxwalkError::Format(format!("truncated payload for tensor '{name}'")))?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        out.insert(name, (dims, data));
    }
    Ok(out)
}

fn take_conv(
    map: &mut HashMap<String, (Vec<u32>, Vec<f64>)>,
    prefix: &str,
    name: &str,
    cin: usize,
    cout: usize,
) -> Result<Conv3> {
    let wname = format!("{prefix}{name}.w");
    let bname = format!("{prefix}{name}.b");
    let (wdims, w) = map
        .remove(&wname)
        .ok_or_else(|| VoxwalkError::Format(format!("missing tensor '{wname}'")))?;
    let expect = [cout as u32, cin as u32, 3, 3, 3];
    if wdims != expect {
        return Err(VoxwalkError::Format(format!(
            "tensor '{wname}' has dims {wdims:?}, expected {expect:?}"
        )));
    }
    let (bdims, b) = map
        .remove(&bname)
        .ok_or_else(|| VoxwalkError::Format(format!("missing tensor '{bname}'")))?;
    if bdims != [cout as u32] {
        return Err(VoxwalkError::Format(format!(
            "tensor '{bname}' has dims {bdims:?}, expected [{cout}]"
        )));
    }
    Ok(Conv3 { cin, cout, w, b })
}

/// Load parameters saved by `save_params`. The embedded meta tensor must
/// agree with `config`.
pub fn load_params<R: Read>(r: R, config: DenoiserConfig) -> Result<DenoiserParams> {
    config.validate()?;
    let mut map = read_raw_tensors(r)?;
    let (mdims, meta) = map
        .remove("meta")
        .ok_or_else(|| VoxwalkError::Format("missing tensor 'meta'".into()))?;
    if mdims != [2] {
        return Err(VoxwalkError::Format("bad meta tensor shape".into()));
    }
    if meta[0] as usize != config.grid_length {
        return Err(VoxwalkError::Format(format!(
            "weights were trained for grid length {}, config says {}",
            meta[0], config.grid_length
        )));
    }
    if (meta[1] - config.sigma).abs() > 1e-6 {
        return Err(VoxwalkError::Format(format!(
            "weights were trained at sigma {}, config says {}",
            meta[1], config.sigma
        )));
    }
    let shapes = layer_shapes(&config);
    let mut convs = Vec::new();
    let mut ema = Vec::new();
    for (name, &(cin, cout)) in LAYER_NAMES.iter().zip(&shapes) {
        convs.push(take_conv(&mut map, "", name, cin, cout)?);
        ema.push(take_conv(&mut map, "ema.", name, cin, cout)?);
    }
    Ok(DenoiserParams { config, convs, ema })
}

/// Sigma recorded in a VXWT file without loading the full weights.
pub fn peek_meta<R: Read>(r: R) -> Result<(usize, f64)> {
    let mut map = read_raw_tensors(r)?;
    let (_, meta) = map
        .remove("meta")
        .ok_or_else(|| VoxwalkError::Format("missing tensor 'meta'".into()))?;
    Ok((meta[0] as usize, meta[1]))
}

pub fn save_params_file(params: &DenoiserParams, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    save_params(params, std::io::BufWriter::new(f))
}

pub fn load_params_file(path: &Path, config: DenoiserConfig) -> Result<DenoiserParams> {
    let f = std::fs::File::open(path)?;
    load_params(std::io::BufReader::new(f), config)
}

pub fn peek_meta_file(path: &Path) -> Result<(usize, f64)> {
    let f = std::fs::File::open(path)?;
    peek_meta(std::io::BufReader::new(f))
}
