//! Binary parameter dump.
//!
//! Layout (little endian): magic `REXNET`, `u32` version, `u32` tensor count,
//! then per tensor: `u32` layer index, `u8` name length + name bytes, `u32`
//! rank, `u64` dims, `f64` values.

use std::io::{Read, Write};

use super::{NetError, Network};

const MAGIC: &[u8; 6] = b"REXNET";
const VERSION: u32 = 1;

pub fn save_params<W: Write>(net: &Network, mut out: W) -> Result<(), NetError> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let params = net.params();
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for ((layer, name), tensor) in net.param_names().into_iter().zip(params) {
        out.write_all(&(layer as u32).to_le_bytes())?;
        out.write_all(&[name.len() as u8])?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NetError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Loads a dump produced by [`save_params`] into a network of the same architecture.
pub fn load_params<R: Read>(net: &mut Network, mut input: R) -> Result<(), NetError> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NetError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NetError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    let names = net.param_names();
    if count != names.len() {
        return Err(NetError::Checkpoint(format!(
            "expected {} tensors, found {count}",
            names.len()
        )));
    }
    let mut params = net.params_mut();
    for ((layer, name), tensor) in names.into_iter().zip(params.iter_mut()) {
        let got_layer = read_u32(&mut input)? as usize;
        let mut len = [0u8; 1];
        input.read_exact(&mut len)?;
        let mut got_name = vec![0u8; len[0] as usize];
        input.read_exact(&mut got_name)?;
        if got_layer != layer || got_name != name.as_bytes() {
            return Err(NetError::Checkpoint(format!(
                "expected layer {layer} {name}, found layer {got_layer} {}",
                String::from_utf8_lossy(&got_name)
            )));
        }
        let rank = read_u32(&mut input)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut input)? as usize);
        }
        if shape != tensor.shape() {
            return Err(NetError::Checkpoint(format!(
                "layer {layer} {name}: shape {shape:?} != {:?}",
                tensor.shape()
            )));
        }
        for v in tensor.data_mut() {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::{architectures, Network};

    #[test]
    fn round_trip_is_bit_exact() {
        let src = Network::build(&architectures::reward_model_image(11, 3, 4), &[11, 11, 3], 5).unwrap();
        let mut bytes = Vec::new();
        save_params(&src, &mut bytes).unwrap();
        let mut dst = Network::build(src.specs(), src.input_shape(), 99).unwrap();
        load_params(&mut dst, bytes.as_slice()).unwrap();
        for (a, b) in src.params().iter().zip(dst.params()) {
            let a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let src = Network::build(&architectures::tanh_mlp(4, 2), &[4], 0).unwrap();
        let mut bytes = Vec::new();
        save_params(&src, &mut bytes).unwrap();
        let mut other = Network::build(&architectures::tanh_mlp(4, 3), &[4], 0).unwrap();
        assert!(load_params(&mut other, bytes.as_slice()).is_err());
        assert!(load_params(&mut other, &b"NOTNET"[..]).is_err());
    }
}
