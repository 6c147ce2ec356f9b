//! Single-channel kernel emulation.
//!
//! A thread block owns an `H`×`W` tile of every output map and walks down it
//! one row at a time. Each thread produces `n` adjacent outputs per row and
//! keeps a `K`×`(K+n-1)` window of input pixels in registers; the row above
//! the window is dropped as the next one arrives. Shared memory only ever
//! holds single image rows (a ring of `K + 1` slots), so every input pixel of
//! the tile leaves global memory exactly once. Filters sit in constant
//! memory and all lanes of a warp read the same tap at the same time.
//!
//! Per block the emulation issues, in order:
//!
//! 1. the first `K` rows, global to shared;
//! 2. `K - 1` rows, shared to registers;
//! 3. for each output row: prefetch the next input row from global memory,
//!    pull the newest row from shared memory, run every filter (reading taps
//!    from constant memory and storing `n` outputs per thread), then commit
//!    the prefetched row to shared memory.

use std::collections::HashSet;

use crate::costmodel::{self, Violation};
use crate::error::{Error, Result};
use crate::memsim::{Lane, MemModel, MemSim, Phase};
use crate::oracle::output_dims;
use crate::tensor::{FilterBank, Image, OutputMap};
use crate::tiling::{aligned_chunks, issue_warps, tile_output, BlockPlan, BlockReport, GmLayout, KernelRun};

/// Block and vector sizes of the single-channel kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecialConfig {
    /// Block width in output pixels.
    pub w: usize,
    /// Block height in output rows.
    pub h: usize,
    /// Elements each lane moves and computes as one unit.
    pub n: usize,
    /// Issue the next row's global load before computing the current row.
    pub prefetch: bool,
}

impl SpecialConfig {
    pub fn new(w: usize, h: usize, n: usize) -> Self {
        SpecialConfig {
            w,
            h,
            n,
            prefetch: true,
        }
    }

    pub fn threads(&self) -> usize {
        self.w / self.n
    }

    /// Register estimate: the `K`×`(K+n-1)` window plus `n` accumulators.
    pub fn registers(&self, k: usize) -> usize {
        registers(k, self.n)
    }

    /// Elements per shared-memory row slot. Wide enough that every thread's
    /// `n`-wide window loads stay in bounds; equals `W + K - 1` whenever
    /// `K - 1` is a multiple of `n`.
    pub fn row_stride(&self, k: usize) -> usize {
        row_stride(self.w, k, self.n)
    }

    /// Bytes of shared memory for the `K + 1` row slots.
    pub fn sm_bytes(&self, k: usize, elem_bytes: usize) -> usize {
        (k + 1) * self.row_stride(k) * elem_bytes
    }

    pub fn label(&self) -> String {
        format!("W={};H={};n={}", self.w, self.h, self.n)
    }
}

fn units_per_row(k: usize, n: usize) -> usize {
    (k + n - 1).div_ceil(n)
}

fn row_stride(w: usize, k: usize, n: usize) -> usize {
    w + (units_per_row(k, n) - 1) * n
}

fn registers(k: usize, n: usize) -> usize {
    k * (k + n - 1) + n
}

/// Partitions the output of an `n_y`×`n_x` image into `H`×`W` blocks.
pub fn plan_blocks(n_y: usize, n_x: usize, k: usize, cfg: &SpecialConfig) -> Vec<BlockPlan> {
    tile_output(n_y + 1 - k, n_x + 1 - k, cfg.h, cfg.w, k)
}

/// Matched-width kernel: lanes move `cfg.n` elements at a time and the model
/// must satisfy `bank_width == n * elem_width`.
pub fn run_special(image: &Image, filters: &FilterBank, cfg: &SpecialConfig, model: &MemModel) -> Result<KernelRun> {
    SpecialKernel::new(*cfg, *model).run(image, filters)
}

/// The same algorithm with one element per lane and `W` threads per block,
/// regardless of the bank width.
pub fn run_special_unmatched(
    image: &Image,
    filters: &FilterBank,
    cfg: &SpecialConfig,
    model: &MemModel,
) -> Result<KernelRun> {
    SpecialKernel::new(*cfg, *model).run_unmatched(image, filters)
}

/// Runner with options; see [`run_special`].
#[derive(Debug, Clone, Copy)]
pub struct SpecialKernel {
    cfg: SpecialConfig,
    model: MemModel,
    trace: bool,
}

impl SpecialKernel {
    pub fn new(cfg: SpecialConfig, model: MemModel) -> Self {
        SpecialKernel {
            cfg,
            model,
            trace: false,
        }
    }

    /// Keep a per-request trace in the result.
    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn run(&self, image: &Image, filters: &FilterBank) -> Result<KernelRun> {
        self.check(image, filters, &self.cfg)?;
        self.simulate(image, filters, self.cfg.n)
    }

    pub fn run_unmatched(&self, image: &Image, filters: &FilterBank) -> Result<KernelRun> {
        // one element per lane; the model keeps its own bank width
        let layout = SpecialConfig { n: 1, ..self.cfg };
        self.check_with(image, filters, &layout, 1)?;
        self.simulate(image, filters, 1)
    }

    fn check(&self, image: &Image, filters: &FilterBank, cfg: &SpecialConfig) -> Result<()> {
        self.check_with(image, filters, cfg, self.model.n() as usize)
    }

    fn check_with(&self, image: &Image, filters: &FilterBank, cfg: &SpecialConfig, want_n: usize) -> Result<()> {
        if image.channels() != 1 || filters.channels() != 1 {
            return Err(Error::WrongKernel(format!(
                "the single-channel kernel needs C = 1, got image C = {} and filter C = {}",
                image.channels(),
                filters.channels()
            )));
        }
        output_dims(image, filters)?;
        let mut v = costmodel::validate_special_layout(cfg, filters.size(), filters.count(), &self.model);
        if cfg.n != want_n {
            v.push(Violation::VectorWidth {
                n: cfg.n,
                expected: want_n,
            });
        }
        into_result(v)
    }

    fn simulate(&self, image: &Image, filters: &FilterBank, n: usize) -> Result<KernelRun> {
        let (oy, ox) = output_dims(image, filters)?;
        let cfg = SpecialConfig { n, ..self.cfg };
        let output = OutputMap::zeros(filters.count(), oy, ox)?;
        let (mut run, mut total) = KernelRun::new(output, self.model, self.trace);
        for plan in plan_blocks(image.height(), image.width(), filters.size(), &cfg) {
            let mut block = BlockSim::new(&cfg, &self.model, image, filters, plan, self.trace);
            block.run(&mut run.output)?;
            let report = block.report();
            total.absorb(block.sim);
            run.blocks.push(report);
        }
        Ok(run.finish(total))
    }
}

pub(crate) fn into_result(v: Vec<Violation>) -> Result<()> {
    if v.is_empty() {
        return Ok(());
    }
    if v.iter().all(Violation::is_capacity) {
        if let Some(Violation::SmCapacity { required, available } | Violation::CmCapacity { required, available }) =
            v.first().cloned()
        {
            let what = match v[0] {
                Violation::SmCapacity { .. } => "shared memory",
                _ => "constant memory",
            };
            return Err(Error::Capacity {
                what,
                required,
                available,
            });
        }
    }
    Err(Error::Invalid(v))
}

struct BlockSim<'a> {
    image: &'a Image,
    filters: &'a FilterBank,
    plan: BlockPlan,
    sim: MemSim,
    k: usize,
    n: usize,
    threads: usize,
    units: usize,
    stride: usize,
    eb: u64,
    gm: GmLayout,
    prefetch: bool,
    /// `K + 1` row slots.
    smem: Vec<f32>,
    /// Per thread: `K` rows of `units * n` pixels, indexed by row mod K.
    regs: Vec<f32>,
    gm_reads: Vec<usize>,
    loads: Vec<u64>,
}

impl<'a> BlockSim<'a> {
    fn new(
        cfg: &SpecialConfig,
        model: &MemModel,
        image: &'a Image,
        filters: &'a FilterBank,
        plan: BlockPlan,
        trace: bool,
    ) -> Self {
        let k = filters.size();
        let n = cfg.n;
        let units = units_per_row(k, n);
        let stride = row_stride(cfg.w, k, n);
        let threads = cfg.threads();
        let eb = model.elem_width_bytes() as u64;
        let mut sim = MemSim::new(*model).with_trace(trace);
        let m = sim.metrics_mut();
        m.registers_per_thread = registers(k, n) as u64;
        m.sm_bytes_used = ((k + 1) * stride) as u64 * eb;
        BlockSim {
            image,
            filters,
            plan,
            sim,
            k,
            n,
            threads,
            units,
            stride,
            eb,
            gm: GmLayout::new(image.data().len(), filters.data().len(), eb),
            prefetch: cfg.prefetch,
            smem: vec![0.0; (k + 1) * stride],
            regs: vec![0.0; threads * k * units * n],
            gm_reads: Vec::new(),
            loads: vec![0; threads],
        }
    }

    fn rows(&self) -> usize {
        self.plan.eff_h + self.k - 1
    }

    fn row_len(&self) -> usize {
        self.plan.eff_w + self.k - 1
    }

    fn slot(&self, r: usize) -> usize {
        (r % (self.k + 1)) * self.stride
    }

    fn working(&self, t: usize) -> bool {
        t * self.n < self.plan.eff_w
    }

    fn run(&mut self, out: &mut OutputMap) -> Result<()> {
        let k = self.k;
        let rows = self.rows();
        for r in 0..k {
            let row = self.gm_load_row(r)?;
            self.sm_store_row(r, &row)?;
        }
        // barrier
        for r in 0..k - 1 {
            self.load_regs(r)?;
        }
        for r in k - 1..rows {
            let next = r + 1 < rows;
            let prefetched = if self.prefetch && next {
                Some(self.gm_load_row(r + 1)?)
            } else {
                None
            };
            self.load_regs(r)?;
            for f in 0..self.filters.count() {
                self.compute(out, f, r + 1 - k)?;
            }
            // barrier
            if let Some(row) = prefetched {
                self.sm_store_row(r + 1, &row)?;
            } else if next {
                let row = self.gm_load_row(r + 1)?;
                self.sm_store_row(r + 1, &row)?;
            }
            // barrier
        }
        Ok(())
    }

    /// Chunks of block row `r`, as `(offset, len)` in elements. Slots are
    /// aligned to `n`, so every chunk is a whole or trailing partial unit.
    fn row_chunks(&self) -> Vec<(usize, usize)> {
        aligned_chunks(0, self.row_len(), self.n).collect()
    }

    /// Global to registers: chunk `i` of the row goes to thread `i % threads`.
    fn gm_load_row(&mut self, r: usize) -> Result<Vec<f32>> {
        let chunks = self.row_chunks();
        let (y, x0, nx) = (self.plan.y0 + r, self.plan.x0, self.image.width());
        let rounds = chunks.len().div_ceil(self.threads);
        for round in 0..rounds {
            let base = round * self.threads;
            let (gm, eb) = (self.gm, self.eb);
            issue_warps(&mut self.sim, Phase::GmImageLoad, self.threads, |t| {
                chunks.get(base + t).map(|&(off, len)| {
                    Lane::new(gm.image + ((y * nx + x0 + off) as u64) * eb, (len as u64 * eb) as u32)
                })
            })?;
        }
        let start = self.image.index(0, y, x0);
        self.gm_reads.extend(start..start + self.row_len());
        Ok(self.image.data()[start..start + self.row_len()].to_vec())
    }

    fn sm_store_row(&mut self, r: usize, row: &[f32]) -> Result<()> {
        let chunks = self.row_chunks();
        let slot = self.slot(r);
        let rounds = chunks.len().div_ceil(self.threads);
        for round in 0..rounds {
            let base = round * self.threads;
            let eb = self.eb;
            issue_warps(&mut self.sim, Phase::SmImageStore, self.threads, |t| {
                chunks
                    .get(base + t)
                    .map(|&(off, len)| Lane::new((slot + off) as u64 * eb, (len as u64 * eb) as u32))
            })?;
        }
        self.smem[slot..slot + row.len()].copy_from_slice(row);
        Ok(())
    }

    /// Shared memory to registers: each working thread reads `units` n-wide
    /// words starting at its own first input column.
    fn load_regs(&mut self, r: usize) -> Result<()> {
        let slot = self.slot(r);
        let (n, eb, units) = (self.n, self.eb, self.units);
        let working: Vec<bool> = (0..self.threads).map(|t| self.working(t)).collect();
        for j in 0..units {
            issue_warps(&mut self.sim, Phase::SmImageRead, self.threads, |t| {
                working[t].then(|| Lane::new((slot + (t + j) * n) as u64 * eb, (n as u64 * eb) as u32))
            })?;
        }
        let width = units * n;
        let ring = r % self.k;
        for t in (0..self.threads).filter(|&t| working[t]) {
            let dst = (t * self.k + ring) * width;
            let src = slot + t * n;
            self.regs[dst..dst + width].copy_from_slice(&self.smem[src..src + width]);
            self.loads[t] += width as u64;
        }
        Ok(())
    }

    /// Output row `oy` of the block for filter `f`.
    fn compute(&mut self, out: &mut OutputMap, f: usize, oy: usize) -> Result<()> {
        let k = self.k;
        let eb = self.eb;
        let working: Vec<bool> = (0..self.threads).map(|t| self.working(t)).collect();
        for tap in 0..k * k {
            let addr = ((f * k * k + tap) as u64) * eb;
            issue_warps(&mut self.sim, Phase::CmFilterRead, self.threads, |t| {
                working[t].then(|| Lane::new(addr, eb as u32))
            })?;
        }
        let width = self.units * self.n;
        let (y, x0) = (self.plan.y0 + oy, self.plan.x0);
        for t in (0..self.threads).filter(|&t| working[t]) {
            for e in 0..self.n {
                let x = t * self.n + e;
                if x >= self.plan.eff_w {
                    break;
                }
                let mut acc = 0.0f32;
                for ky in 0..k {
                    let row = (t * k + (oy + ky) % k) * width;
                    for kx in 0..k {
                        acc += self.regs[row + e + kx] * self.filters.get(f, 0, ky, kx);
                    }
                }
                out.set(f, y, x0 + x, acc);
            }
        }
        let (oh, ow) = (out.height(), out.width());
        let (n, gm, eff_w) = (self.n, self.gm, self.plan.eff_w);
        issue_warps(&mut self.sim, Phase::GmOutputStore, self.threads, |t| {
            working[t].then(|| {
                let len = n.min(eff_w - t * n);
                let idx = (f * oh + y) * ow + x0 + t * n;
                Lane::new(gm.output + idx as u64 * eb, (len as u64 * eb) as u32)
            })
        })
    }

    fn report(&self) -> BlockReport {
        let distinct: HashSet<usize> = self.gm_reads.iter().copied().collect();
        BlockReport {
            plan: self.plan,
            filter_start: 0,
            filter_count: self.filters.count(),
            gm_image_reads: self.gm_reads.len() as u64,
            gm_image_distinct: distinct.len() as u64,
            thread_sm_pixel_loads: (0..self.threads)
                .filter(|&t| self.working(t))
                .map(|t| self.loads[t])
                .collect(),
            metrics: *self.sim.metrics(),
        }
    }
}
