//! Binary checkpoints.
//!
//! Layout, all little-endian: the magic `NPDCKPT1`; `u64` dim, n, N; `f64`
//! time, D, z_1..z_N; then N+1 arrays of `n^dim` `f64` values in grid order
//! (first axis fastest): c_1..c_N and ρ̃.

use crate::CliError;
use npd_core::spectral::make_grid;
use npd_core::{BodyCharge, NpdState, RealField, SpeciesParams};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"NPDCKPT1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: NpdState,
    pub params: SpeciesParams,
    pub body: BodyCharge,
}

pub fn encode(state: &NpdState, params: &SpeciesParams, body: &BodyCharge) -> Vec<u8> {
    let grid = state.grid();
    let ns = state.n_species();
    let mut out = Vec::with_capacity(8 * (4 + 2 + ns + (ns + 1) * grid.len()));
    out.extend_from_slice(MAGIC);
    for v in [grid.dim(), grid.n(), ns] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&state.time().to_le_bytes());
    out.extend_from_slice(&params.diffusivity().to_le_bytes());
    for z in params.valences() {
        out.extend_from_slice(&z.to_le_bytes());
    }
    for field in state
        .concentrations()
        .iter()
        .chain(std::iter::once(body.field()))
    {
        for v in field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CliError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                CliError::Checkpoint(format!(
                    "size mismatch: file ends at byte {}",
                    self.bytes.len()
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CliError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CliError::Checkpoint(
            "bad magic: not an NPDCKPT1 checkpoint".into(),
        ));
    }
    let mut r = Reader {
        bytes,
        pos: MAGIC.len(),
    };
    let dim = r.u64()? as usize;
    let n = r.u64()? as usize;
    let ns = r.u64()? as usize;
    if ns == 0 || ns > 1 << 16 {
        return Err(CliError::Checkpoint(format!(
            "implausible species count {ns}"
        )));
    }
    let grid = make_grid::<f64>(dim, n).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let time = r.f64()?;
    let diffusivity = r.f64()?;
    let valences = (0..ns).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let expected = r.pos + 8 * (ns + 1) * grid.len();
    if bytes.len() != expected {
        return Err(CliError::Checkpoint(format!(
            "size mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut fields = Vec::with_capacity(ns + 1);
    for _ in 0..=ns {
        let raw = r.take(8 * grid.len())?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        fields.push(
            RealField::from_values(&grid, values)
                .map_err(|e| CliError::Checkpoint(e.to_string()))?,
        );
    }
    let rho_tilde = fields.pop().expect("ns + 1 fields");
    let core = |e: npd_core::NpdError| CliError::Checkpoint(e.to_string());
    Ok(Checkpoint {
        state: NpdState::new(time, fields).map_err(core)?,
        params: SpeciesParams::new(diffusivity, valences).map_err(core)?,
        body: BodyCharge::new(rho_tilde).map_err(core)?,
    })
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn save(
    path: &Path,
    state: &NpdState,
    params: &SpeciesParams,
    body: &BodyCharge,
) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(state, params, body)).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes)
}
