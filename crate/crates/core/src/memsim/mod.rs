//! Warp-level model of shared, global and constant memory.
//!
//! Each function here prices one warp-wide request. [`MemSim`] strings
//! those prices together over a kernel run and keeps the [`Metrics`].

mod access;
mod metrics;
mod model;
mod sim;

pub use access::{Lane, Space, WarpAccess};
pub use metrics::{Metrics, METRICS_CSV_HEADER};
pub use model::{MemModel, MAX_REGISTERS_PER_THREAD, MAX_THREADS_PER_TB};
pub use sim::{AccessRecord, MemSim, Phase, PhaseStats, PhaseTable};

use crate::error::{Error, Result};

/// Cycles needed to serve a shared-memory request.
///
/// Every active lane's start address falls in bank
/// `(address / bank_width) % bank_count`. Distinct addresses that land in the
/// same bank are served one per cycle, including two sub-word addresses of
/// the same bank word. Identical addresses are broadcast and count once.
/// A request with no active lane costs nothing.
pub fn sm_cycles(model: &MemModel, access: &WarpAccess) -> Result<u64> {
    expect_space(access, Space::Shared)?;
    check_lane_count(model, access)?;
    let mut hits: Vec<(u64, u64)> = Vec::with_capacity(access.lanes().len());
    for lane in access.active() {
        if lane.width > model.bank_width_bytes() {
            return Err(Error::Model(format!(
                "{}-byte shared access exceeds the {}-byte bank width",
                lane.width,
                model.bank_width_bytes()
            )));
        }
        let bank = (lane.addr / model.bank_width_bytes() as u64) % model.bank_count() as u64;
        hits.push((bank, lane.addr));
    }
    hits.sort_unstable();
    hits.dedup();
    let worst = hits
        .chunk_by(|a, b| a.0 == b.0)
        .map(|run| run.len() as u64)
        .max()
        .unwrap_or(0);
    Ok(worst)
}

/// Number of aligned global-memory segments touched by the request.
pub fn gm_transactions(model: &MemModel, access: &WarpAccess) -> Result<u64> {
    expect_space(access, Space::Global)?;
    check_lane_count(model, access)?;
    let seg = model.gm_segment_bytes() as u64;
    let mut segments = Vec::with_capacity(access.lanes().len());
    for lane in access.active() {
        let first = lane.addr / seg;
        let last = (lane.addr + lane.width as u64 - 1) / seg;
        segments.extend(first..=last);
    }
    segments.sort_unstable();
    segments.dedup();
    Ok(segments.len() as u64)
}

/// Serialized request count and whether the warp hit the broadcast path.
///
/// Returns `(distinct addresses, all lanes identical)`. An empty request is
/// `(0, false)`.
pub fn cm_request(model: &MemModel, access: &WarpAccess) -> Result<(u64, bool)> {
    expect_space(access, Space::Constant)?;
    check_lane_count(model, access)?;
    let mut distinct: Vec<u64> = access.active().map(|l| l.addr).collect();
    distinct.sort_unstable();
    distinct.dedup();
    Ok((distinct.len() as u64, distinct.len() == 1))
}

/// `n = W_SMB / W_CD`, the shared-memory bandwidth multiplier available by
/// widening each lane's unit of work to a full bank word.
pub fn bandwidth_factor(model: &MemModel) -> Result<u32> {
    model::ratio(model.bank_width_bytes(), model.elem_width_bytes())
}

fn expect_space(access: &WarpAccess, space: Space) -> Result<()> {
    if access.space() != space {
        return Err(Error::Model(format!(
            "expected a {space:?} request, got {:?}",
            access.space()
        )));
    }
    Ok(())
}

fn check_lane_count(model: &MemModel, access: &WarpAccess) -> Result<()> {
    if access.lanes().len() > model.warp_size() as usize {
        return Err(Error::Model(format!(
            "{} lanes exceed the warp size {}",
            access.lanes().len(),
            model.warp_size()
        )));
    }
    Ok(())
}
