use std::io::{Read, Write};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::ndmath::{Mlp, OutputActivation, Tensor};

use super::net::{RewardEnsemble, RewardNet};

/// Widths, output activation, slope, then each parameter as
/// `rows, cols, values`. Adam moments are not stored.
pub(crate) fn write_mlp<W: Write>(w: &mut Writer<W>, mlp: &Mlp) -> Result<()> {
    w.u64(mlp.sizes().len() as u64)?;
    for s in mlp.sizes() {
        w.u64(*s as u64)?;
    }
    w.u32(match mlp.output_activation() {
        OutputActivation::Identity => 0,
        OutputActivation::Tanh => 1,
    })?;
    w.f64(mlp.slope())?;
    for t in mlp.params().values() {
        w.u64(t.rows() as u64)?;
        w.u64(t.cols() as u64)?;
        w.f64s(t.values())?;
    }
    Ok(())
}

pub(crate) fn read_mlp<R: Read>(r: &mut Reader<R>) -> Result<Mlp> {
    let n = r.len()?;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    let output = match r.u32()? {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Tanh,
        other => return Err(Error::Format(format!("unknown output activation {other}"))),
    };
    let slope = r.f64()?;
    let mut values = Vec::with_capacity(2 * (n - 1));
    for _ in 0..2 * (n - 1) {
        let rows = r.len()?;
        let cols = r.len()?;
        let v = r.f64s()?;
        values.push(Tensor::matrix(rows, cols, v).map_err(|e| Error::Format(e.to_string()))?);
    }
    Mlp::from_parts(sizes, output, slope, values)
}

pub(crate) fn write_ensemble<W: Write>(w: &mut Writer<W>, ens: &RewardEnsemble) -> Result<()> {
    w.u64(ens.state_dim() as u64)?;
    w.u64(ens.action_dim() as u64)?;
    w.u64(ens.len() as u64)?;
    for m in ens.members() {
        write_mlp(w, m.mlp())?;
    }
    Ok(())
}

pub(crate) fn read_ensemble<R: Read>(r: &mut Reader<R>) -> Result<RewardEnsemble> {
    let sd = r.len()?;
    let ad = r.len()?;
    let n = r.len()?;
    if n == 0 || n > 1024 {
        return Err(Error::Format(format!("implausible ensemble size {n}")));
    }
    let members = (0..n)
        .map(|_| RewardNet::from_mlp(read_mlp(r)?, sd, ad))
        .collect::<Result<Vec<_>>>()?;
    RewardEnsemble::from_members(members)
}
