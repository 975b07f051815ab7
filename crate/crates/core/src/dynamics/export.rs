//! Trajectory files.
//!
//! CSV: header `t,kind,index,coord,value`, one row per coordinate, herd rows
//! before herder rows at each time.
//!
//! Binary (little-endian): a 32-byte header
//! `magic "HLAB" | version u32 | K u32 | N u32 | M u32 | d u32 | 8 zero bytes`
//! followed by the herd as `[K+1][N][d]` f64 and the herders as
//! `[K+1][M][d]` f64.

use std::io::{Read, Write};

use super::simulate::TrajectoryBundle;
use crate::error::{HerdError, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"HLAB";
pub const BINARY_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> HerdError {
    HerdError::Io {
        path: "<stream>".into(),
        message: e.to_string(),
    }
}

pub fn write_csv<W: Write>(bundle: &TrajectoryBundle, out: &mut W) -> Result<()> {
    let mut buf = String::from("t,kind,index,coord,value\n");
    let d = bundle.d;
    for (k, t) in bundle.times.iter().enumerate() {
        for (kind, block) in [("herd", bundle.herd_at(k)), ("herder", bundle.herders_at(k))] {
            for (i, p) in block.chunks(d).enumerate() {
                for (c, v) in p.iter().enumerate() {
                    buf.push_str(&format!("{t},{kind},{i},{c},{v}\n"));
                }
            }
        }
        if buf.len() > 1 << 20 {
            out.write_all(buf.as_bytes()).map_err(io_err)?;
            buf.clear();
        }
    }
    out.write_all(buf.as_bytes()).map_err(io_err)
}

pub fn write_binary<W: Write>(bundle: &TrajectoryBundle, out: &mut W) -> Result<()> {
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(BINARY_MAGIC);
    for v in [
        BINARY_VERSION,
        bundle.steps() as u32,
        bundle.n as u32,
        bundle.m as u32,
        bundle.d as u32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&[0u8; 8]);
    out.write_all(&header).map_err(io_err)?;
    let mut body = Vec::with_capacity(8 * (bundle.herd.len() + bundle.herders.len()));
    for v in bundle.herd.iter().chain(&bundle.herders) {
        body.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&body).map_err(io_err)
}

/// Parsed binary file: `(K, N, M, d, herd, herders)`.
pub type BinaryTrajectory = (usize, usize, usize, usize, Vec<f64>, Vec<f64>);

pub fn read_binary<R: Read>(input: &mut R) -> Result<BinaryTrajectory> {
    let bad = |msg: &str| HerdError::Parse {
        location: "binary trajectory".into(),
        message: msg.into(),
    };
    let mut header = [0u8; 32];
    input.read_exact(&mut header).map_err(io_err)?;
    if &header[..4] != BINARY_MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    if word(0) != BINARY_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (k, n, m, d) = (word(1), word(2), word(3), word(4));
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(io_err)?;
    let nh = (k + 1) * n * d;
    let nm = (k + 1) * m * d;
    if rest.len() != 8 * (nh + nm) {
        return Err(bad("payload length does not match the header"));
    }
    let vals: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((k, n, m, d, vals[..nh].to_vec(), vals[nh..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_finite, NoControl};
    use crate::model::{Noise, SystemSpec};

    fn bundle() -> TrajectoryBundle {
        let mut spec = SystemSpec::new(2, 3, 2, 0.2, 0.1);
        spec.noises.sigma_i = Noise::scalar(1.0, 2);
        simulate_finite(&spec, &NoControl, 1, 0).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let b = bundle();
        let mut buf = Vec::new();
        write_binary(&b, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"HLAB");
        assert_eq!(buf.len(), 32 + 8 * (3 * 3 * 2 + 3 * 2 * 2));
        let (k, n, m, d, herd, herders) = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!((k, n, m, d), (2, 3, 2, 2));
        assert_eq!(herd, b.herd);
        assert_eq!(herders, b.herders);
        buf[0] = b'X';
        assert!(read_binary(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_layout() {
        let b = bundle();
        let mut buf = Vec::new();
        write_csv(&b, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,kind,index,coord,value"));
        assert_eq!(text.lines().count(), 1 + 3 * (3 * 2 + 2 * 2));
        let second = lines.next().unwrap();
        assert!(second.starts_with("0,herd,0,0,"));
        let parsed: f64 = second.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, b.herd[0]);
    }
}
