//! Block partitioning and the bookkeeping shared by both kernel emulations.

use crate::error::Result;
use crate::memsim::{AccessRecord, Lane, MemModel, MemSim, Metrics, Phase, PhaseTable, Space, WarpAccess};
use crate::tensor::OutputMap;

/// One thread block's share of the output domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    /// Grid coordinates (block row, block column).
    pub grid: (usize, usize),
    /// Top-left output pixel, which is also the top-left input pixel read.
    pub y0: usize,
    pub x0: usize,
    pub eff_h: usize,
    pub eff_w: usize,
    /// Extra input rows below and columns right of the block (`K - 1`).
    pub halo: usize,
}

impl BlockPlan {
    /// Input pixels the block reads: `(eff_h + K - 1) * (eff_w + K - 1)`.
    pub fn footprint(&self) -> usize {
        (self.eff_h + self.halo) * (self.eff_w + self.halo)
    }

    pub fn is_full(&self, block_h: usize, block_w: usize) -> bool {
        self.eff_h == block_h && self.eff_w == block_w
    }
}

/// Tiles an `out_h`×`out_w` output domain with `block_h`×`block_w` blocks,
/// row-major. Blocks on the right and bottom edges shrink to fit.
pub fn tile_output(out_h: usize, out_w: usize, block_h: usize, block_w: usize, k: usize) -> Vec<BlockPlan> {
    let rows = out_h.div_ceil(block_h);
    let cols = out_w.div_ceil(block_w);
    let mut plans = Vec::with_capacity(rows * cols);
    for by in 0..rows {
        for bx in 0..cols {
            let y0 = by * block_h;
            let x0 = bx * block_w;
            plans.push(BlockPlan {
                grid: (by, bx),
                y0,
                x0,
                eff_h: block_h.min(out_h - y0),
                eff_w: block_w.min(out_w - x0),
                halo: k - 1,
            });
        }
    }
    plans
}

/// What one simulated thread block did.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub plan: BlockPlan,
    pub filter_start: usize,
    pub filter_count: usize,
    /// Input-image elements fetched from global memory.
    pub gm_image_reads: u64,
    /// Distinct input-image elements among those fetches.
    pub gm_image_distinct: u64,
    /// Elements each working thread moved from shared memory into its
    /// image registers, in thread order. Idle threads are omitted.
    pub thread_sm_pixel_loads: Vec<u64>,
    pub metrics: Metrics,
}

/// Result of one emulated kernel launch.
#[derive(Debug, Clone)]
pub struct KernelRun {
    pub output: OutputMap,
    pub metrics: Metrics,
    pub phases: PhaseTable,
    pub blocks: Vec<BlockReport>,
    /// Every priced request in issue order, when tracing was requested.
    pub trace: Option<Vec<AccessRecord>>,
}

impl KernelRun {
    pub(crate) fn new(output: OutputMap, model: MemModel, trace: bool) -> (Self, MemSim) {
        let run = KernelRun {
            output,
            metrics: Metrics::default(),
            phases: PhaseTable::default(),
            blocks: Vec::new(),
            trace: None,
        };
        (run, MemSim::new(model).with_trace(trace))
    }

    pub(crate) fn finish(mut self, total: MemSim) -> Self {
        let (metrics, phases, trace) = total.into_parts();
        self.metrics = metrics;
        self.phases = phases;
        self.trace = trace;
        self
    }
}

/// Byte offsets of the image, filter and output arrays in simulated global
/// memory. Each array starts on a 256-byte boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GmLayout {
    pub image: u64,
    pub filters: u64,
    pub output: u64,
}

impl GmLayout {
    pub fn new(image_elems: usize, filter_elems: usize, elem_bytes: u64) -> Self {
        let align = |b: u64| b.div_ceil(256) * 256;
        let filters = align(image_elems as u64 * elem_bytes);
        let output = filters + align(filter_elems as u64 * elem_bytes);
        GmLayout {
            image: 0,
            filters,
            output,
        }
    }
}

/// Splits `len` elements starting at element `start` into pieces that never
/// cross an `n`-element boundary. Yields `(offset from start, length)`.
pub(crate) fn aligned_chunks(start: usize, len: usize, n: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut off = 0;
    std::iter::from_fn(move || {
        if off >= len {
            return None;
        }
        let pos = start + off;
        let take = (n - pos % n).min(len - off);
        let item = (off, take);
        off += take;
        Some(item)
    })
}

/// Issues one request per warp for the `threads` threads of a block; `lane`
/// maps a thread id to its access (or `None` when idle).
pub(crate) fn issue_warps(
    sim: &mut MemSim,
    phase: Phase,
    threads: usize,
    mut lane: impl FnMut(usize) -> Option<Lane>,
) -> Result<()> {
    let ws = sim.model().warp_size() as usize;
    let space: Space = phase.space();
    for w0 in (0..threads).step_by(ws) {
        let lanes: Vec<Option<Lane>> = (w0..threads.min(w0 + ws)).map(&mut lane).collect();
        if lanes.iter().any(Option::is_some) {
            sim.issue(phase, &WarpAccess::new(space, lanes))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_full_grid() {
        let p = tile_output(16, 16, 4, 8, 3);
        assert_eq!(p.len(), 8);
        assert!(p.iter().all(|b| b.is_full(4, 8) && b.footprint() == 60));
    }

    #[test]
    fn single_pixel_domain() {
        let p = tile_output(1, 1, 4, 8, 3);
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].eff_h, p[0].eff_w), (1, 1));
    }

    #[test]
    fn remainder_column() {
        let p = tile_output(10, 10, 8, 8, 3);
        assert_eq!(p.len(), 4);
        assert_eq!(p[1].eff_w, 2);
        assert_eq!(p[2].eff_h, 2);
    }

    #[test]
    fn chunks_respect_boundaries() {
        let c: Vec<_> = aligned_chunks(3, 6, 2).collect();
        assert_eq!(c, vec![(0, 1), (1, 2), (3, 2), (5, 1)]);
        let c: Vec<_> = aligned_chunks(4, 4, 2).collect();
        assert_eq!(c, vec![(0, 2), (2, 2)]);
        assert_eq!(aligned_chunks(0, 5, 1).count(), 5);
    }
}
