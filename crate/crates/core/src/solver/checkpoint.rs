//! Binary state checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   8 bytes  "TMHDCKP1"
//! n       u64      dimension
//! N       u64      modes per axis
//! t       f64
//! step    u64
//! r       f64      Diophantine exponent
//! c_est   f64
//! J       u64      certified lattice radius
//! argmin  3 x i64  minimizing wavevector (unused trailing entries zero)
//! btilde  n x f64
//! v       n x N^n x (re f64, im f64)   component-major, lexicographic j
//! b       same as v
//! ```
//!
//! "Lexicographic j" runs `j_1` slowest with every component ascending from
//! `-N/2`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::state::SimulationState;
use crate::diophantine::BackgroundField;
use crate::error::{Error, Result};
use crate::spectral::{SpectralGrid, SpectralVectorField};

const MAGIC: &[u8; 8] = b"TMHDCKP1";

pub fn write_checkpoint(state: &SimulationState, mut out: impl Write) -> Result<()> {
    let grid = state.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(grid.n() as u64).to_le_bytes())?;
    out.write_all(&state.t.to_le_bytes())?;
    out.write_all(&state.step_count.to_le_bytes())?;
    out.write_all(&state.bf.r.to_le_bytes())?;
    out.write_all(&state.bf.c_est.to_le_bytes())?;
    out.write_all(&(state.bf.lattice_radius as u64).to_le_bytes())?;
    for c in state.bf.argmin {
        out.write_all(&c.to_le_bytes())?;
    }
    for x in &state.bf.btilde {
        out.write_all(&x.to_le_bytes())?;
    }
    let order = grid.lexicographic_indices();
    for field in [&state.v, &state.b] {
        for comp in field.components() {
            for &idx in &order {
                out.write_all(&comp[idx].re.to_le_bytes())?;
                out.write_all(&comp[idx].im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn save_checkpoint(state: &SimulationState, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(state, &mut w)?;
    w.flush()?;
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("checkpoint is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_checkpoint(mut input: impl Read) -> Result<SimulationState> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let dim = read_u64(&mut input)? as usize;
    let n = read_u64(&mut input)? as usize;
    let grid = SpectralGrid::new(dim, n).map_err(|e| Error::Format(e.to_string()))?;
    let t = read_f64(&mut input)?;
    let step_count = read_u64(&mut input)?;
    let r = read_f64(&mut input)?;
    let c_est = read_f64(&mut input)?;
    let lattice_radius = read_u64(&mut input)? as i64;
    let mut argmin = [0i64; 3];
    for c in argmin.iter_mut() {
        *c = read_u64(&mut input)? as i64;
    }
    let btilde = (0..dim).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
    let order = grid.lexicographic_indices();
    let mut read_field = || -> Result<SpectralVectorField> {
        let mut comps = vec![vec![Complex64::default(); grid.len()]; dim];
        for comp in comps.iter_mut() {
            for &idx in &order {
                let re = read_f64(&mut input)?;
                let im = read_f64(&mut input)?;
                comp[idx] = Complex64::new(re, im);
            }
        }
        SpectralVectorField::from_components(&grid, comps)
    };
    let v = read_field()?;
    let b = read_field()?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let bf = BackgroundField {
        btilde,
        r,
        c_est,
        lattice_radius,
        argmin,
    };
    Ok(SimulationState {
        v,
        b,
        t,
        step_count,
        bf,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<SimulationState> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
