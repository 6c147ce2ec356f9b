use super::{cm_request, gm_transactions, sm_cycles, MemModel, Metrics, Space, WarpAccess};
use crate::error::Result;

/// What a request is doing, for per-phase accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Input image, global memory to register or shared memory.
    GmImageLoad,
    GmFilterLoad,
    GmOutputStore,
    /// Staging image rows into shared memory.
    SmImageStore,
    /// Staging the transposed filter tile into shared memory.
    SmFilterStore,
    /// Image pixels, shared memory to registers.
    SmImageRead,
    SmFilterRead,
    CmFilterRead,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::GmImageLoad,
        Phase::GmFilterLoad,
        Phase::GmOutputStore,
        Phase::SmImageStore,
        Phase::SmFilterStore,
        Phase::SmImageRead,
        Phase::SmFilterRead,
        Phase::CmFilterRead,
    ];

    pub fn space(self) -> Space {
        match self {
            Phase::GmImageLoad | Phase::GmFilterLoad | Phase::GmOutputStore => Space::Global,
            Phase::SmImageStore | Phase::SmFilterStore | Phase::SmImageRead | Phase::SmFilterRead => Space::Shared,
            Phase::CmFilterRead => Space::Constant,
        }
    }
}

/// Per-phase totals. `cost` is transactions (global), cycles (shared) or
/// serialized requests (constant).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseStats {
    pub requests: u64,
    pub cost: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseTable([PhaseStats; 8]);

impl PhaseTable {
    pub fn get(&self, phase: Phase) -> PhaseStats {
        self.0[phase as usize]
    }

    fn get_mut(&mut self, phase: Phase) -> &mut PhaseStats {
        &mut self.0[phase as usize]
    }

    pub fn merge(&mut self, other: &PhaseTable) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            a.requests += b.requests;
            a.cost += b.cost;
            a.bytes += b.bytes;
        }
    }
}

/// One priced warp request, kept when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub phase: Phase,
    pub active_lanes: u32,
    pub bytes: u64,
    pub cost: u64,
    /// Constant-memory requests only: every lane used one address.
    pub broadcast: bool,
}

/// Accumulates the cost of a stream of warp requests.
#[derive(Debug, Clone)]
pub struct MemSim {
    model: MemModel,
    metrics: Metrics,
    phases: PhaseTable,
    trace: Option<Vec<AccessRecord>>,
}

impl MemSim {
    pub fn new(model: MemModel) -> Self {
        MemSim {
            model,
            metrics: Metrics::default(),
            phases: PhaseTable::default(),
            trace: None,
        }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on.then(Vec::new);
        self
    }

    pub fn model(&self) -> &MemModel {
        &self.model
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn metrics_mut(&mut self) -> &mut Metrics {
        &mut self.metrics
    }

    pub fn phases(&self) -> &PhaseTable {
        &self.phases
    }

    pub fn trace(&self) -> Option<&[AccessRecord]> {
        self.trace.as_deref()
    }

    pub fn into_parts(self) -> (Metrics, PhaseTable, Option<Vec<AccessRecord>>) {
        (self.metrics, self.phases, self.trace)
    }

    /// Prices `access` under `phase` and adds it to the totals. Requests with
    /// no active lane are dropped. Returns the cost.
    pub fn issue(&mut self, phase: Phase, access: &WarpAccess) -> Result<u64> {
        let active = access.active_count() as u32;
        if active == 0 {
            return Ok(0);
        }
        let bytes: u64 = access.active().map(|l| l.width as u64).sum();
        let mut broadcast = false;
        let cost = match phase.space() {
            Space::Global => {
                let tx = gm_transactions(&self.model, access)?;
                self.metrics.gm_transactions += tx;
                self.metrics.gm_bytes += bytes;
                if phase == Phase::GmImageLoad {
                    self.metrics.gm_pixel_reads += bytes / self.model.elem_width_bytes() as u64;
                }
                tx
            }
            Space::Shared => {
                let cycles = sm_cycles(&self.model, access)?;
                self.metrics.sm_access_requests += 1;
                self.metrics.sm_cycles += cycles;
                self.metrics.sm_conflict_excess += cycles - 1;
                cycles
            }
            Space::Constant => {
                let (req, hit) = cm_request(&self.model, access)?;
                self.metrics.cm_requests += req;
                if hit {
                    self.metrics.cm_broadcast_hits += 1;
                }
                broadcast = hit;
                req
            }
        };
        let st = self.phases.get_mut(phase);
        st.requests += 1;
        st.cost += cost;
        st.bytes += bytes;
        if let Some(t) = &mut self.trace {
            t.push(AccessRecord {
                phase,
                active_lanes: active,
                bytes,
                cost,
                broadcast,
            });
        }
        Ok(cost)
    }

    /// Folds another shard of the same run into this one.
    pub fn absorb(&mut self, other: MemSim) {
        self.metrics.merge(&other.metrics);
        self.phases.merge(&other.phases);
        if let (Some(dst), Some(src)) = (&mut self.trace, other.trace) {
            dst.extend(src);
        }
    }
}
