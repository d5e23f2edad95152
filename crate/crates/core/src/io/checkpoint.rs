//! Network checkpoints: magic, format version, a spec descriptor, then
//! named arrays (name length, name, rank, extents, little-endian 32-bit
//! floats). Weights and momentum buffers both round-trip bit-exactly at
//! 32-bit precision.

use crate::error::{Error, Result};
use crate::netgraph::{NetParams, NetworkSpec, ParamSet, StageSpec};
use crate::tensor::{Element, Tensor};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"BXNETCK\0";
const VERSION: u32 = 1;

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_array<E: Element>(out: &mut Vec<u8>, name: &str, t: &Tensor<E>) {
    push_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    push_u32(out, t.rank() as u32);
    for &d in t.shape() {
        push_u32(out, d as u32);
    }
    for v in t.data() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
}

/// Serializes the spec and parameter set.
pub fn encode<E: Element>(spec: &NetworkSpec, params: &ParamSet<E>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);
    push_u32(&mut out, spec.stages().len() as u32);
    for s in spec.stages() {
        push_u32(&mut out, s.filter_count as u32);
        push_u32(&mut out, s.filter_size as u32);
        push_u32(&mut out, s.pool as u32);
        out.push(u8::from(s.tapped));
    }
    push_u32(&mut out, spec.fusion_classes() as u32);

    let mut arrays: Vec<(String, &Tensor<E>)> = Vec::new();
    for (i, p) in params.weights.stages.iter().enumerate() {
        arrays.push((format!("stage{}.filters", i), &p.filters));
        arrays.push((format!("stage{}.bias", i), &p.bias));
    }
    arrays.push(("fusion.filters".into(), &params.weights.fusion.filters));
    arrays.push(("fusion.bias".into(), &params.weights.fusion.bias));
    for (i, p) in params.velocity.stages.iter().enumerate() {
        arrays.push((format!("stage{}.filters.vel", i), &p.filters));
        arrays.push((format!("stage{}.bias.vel", i), &p.bias));
    }
    arrays.push(("fusion.filters.vel".into(), &params.velocity.fusion.filters));
    arrays.push(("fusion.bias.vel".into(), &params.velocity.fusion.bias));

    push_u32(&mut out, arrays.len() as u32);
    for (name, t) in arrays {
        push_array(&mut out, &name, t);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err("unexpected end of checkpoint".into());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
}

/// Decodes a checkpoint into the spec and a parameter set of the requested
/// element type.
pub fn decode<E: Element>(bytes: &[u8]) -> std::result::Result<(NetworkSpec, ParamSet<E>), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {}", version));
    }
    let n_stages = r.u32()? as usize;
    if n_stages > 1024 {
        return Err(format!("implausible stage count {}", n_stages));
    }
    let mut stages = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        let filter_count = r.u32()? as usize;
        let filter_size = r.u32()? as usize;
        let pool = r.u32()? as usize;
        let tapped = r.u8()? != 0;
        stages.push(StageSpec::new(filter_count, filter_size, pool, tapped));
    }
    let fusion_classes = r.u32()? as usize;
    let spec = NetworkSpec::new(stages, fusion_classes).map_err(|e| e.to_string())?;

    let mut named: std::collections::HashMap<String, Tensor<E>> = std::collections::HashMap::new();
    let n_arrays = r.u32()? as usize;
    for _ in 0..n_arrays {
        let name_len = r.u32()? as usize;
        if name_len > 4096 {
            return Err("implausible array name length".into());
        }
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| "array name is not utf-8".to_string())?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(format!("implausible rank {} for {}", rank, name));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(4 * len)?;
        let data: Vec<E> = raw
            .chunks_exact(4)
            .map(|b| E::from_f32(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| e.to_string())?;
        named.insert(name, t);
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes after checkpoint payload".into());
    }

    let mut take_named = |name: String, expected: &[usize]| -> std::result::Result<Tensor<E>, String> {
        let t = named
            .remove(&name)
            .ok_or_else(|| format!("missing array {}", name))?;
        if t.shape() != expected {
            return Err(format!(
                "array {} has shape {:?}, spec implies {:?}",
                name,
                t.shape(),
                expected
            ));
        }
        Ok(t)
    };

    let template = NetParams::<E>::zeros(&spec);
    let mut load_bank = |suffix: &str| -> std::result::Result<NetParams<E>, String> {
        let mut bank = NetParams::<E>::zeros(&spec);
        for (i, p) in bank.stages.iter_mut().enumerate() {
            p.filters = take_named(
                format!("stage{}.filters{}", i, suffix),
                template.stages[i].filters.shape(),
            )?;
            p.bias = take_named(
                format!("stage{}.bias{}", i, suffix),
                template.stages[i].bias.shape(),
            )?;
        }
        bank.fusion.filters = take_named(
            format!("fusion.filters{}", suffix),
            template.fusion.filters.shape(),
        )?;
        bank.fusion.bias = take_named(
            format!("fusion.bias{}", suffix),
            template.fusion.bias.shape(),
        )?;
        Ok(bank)
    };

    let weights = load_bank("")?;
    let velocity = load_bank(".vel")?;
    Ok((spec, ParamSet { weights, velocity }))
}

pub fn save_checkpoint<E: Element>(
    path: &Path,
    spec: &NetworkSpec,
    params: &ParamSet<E>,
) -> Result<()> {
    let bytes = encode(spec, params);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint<E: Element>(path: &Path) -> Result<(NetworkSpec, ParamSet<E>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    decode(&bytes).map_err(|reason| Error::format(path.display().to_string(), reason))
}
