//! Multi-channel kernel emulation.
//!
//! Thread blocks form a `TB_X`×`TB_Y` grid: `TB_X = ceil(F / F_TB)` filter
//! tiles by `TB_Y` spatial blocks of `H`×`W` outputs. A block loops over the
//! input channels `C_SH` at a time and keeps the partial sums for its tile in
//! registers until the end.
//!
//! Inside a block, thread `(tx, ty)` owns `F_T` filters and `W_T`
//! horizontally adjacent outputs of one block row. Filters are dealt out in
//! `n`-wide units so that in each read round the `T_X` threads of a row take
//! adjacent units of the same filter-tile row:
//! thread `tx` owns units `q * T_X + tx` for `q < F_T / n`.
//!
//! Shared memory holds the filter tile first, transposed to
//! `[c][ky*K+kx][F_TB + pad]`, then the image tile `[c][H+K-1][W+K-1]`.
//! The filter rows are padded so the scalar, channel-contiguous staging
//! stores of one filter land in distinct banks.

use std::collections::HashSet;

use crate::costmodel;
use crate::error::Result;
use crate::memsim::{Lane, MemModel, MemSim, Phase};
use crate::oracle::output_dims;
use crate::special::into_result;
use crate::tensor::{FilterBank, Image, OutputMap};
use crate::tiling::{aligned_chunks, issue_warps, tile_output, BlockPlan, BlockReport, GmLayout, KernelRun};

/// Tiling parameters of the multi-channel kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneralConfig {
    pub w: usize,
    pub h: usize,
    /// Filters per thread block.
    pub f_tb: usize,
    /// Output pixels per thread.
    pub w_t: usize,
    /// Filters per thread.
    pub f_t: usize,
    /// Channels staged in shared memory per iteration.
    pub c_sh: usize,
    /// Extra elements at the end of each transposed filter row.
    pub pad: usize,
}

impl GeneralConfig {
    /// Config with the padding picked by [`conflict_free_pad`].
    pub fn new(w: usize, h: usize, f_tb: usize, w_t: usize, f_t: usize, c_sh: usize, n: usize) -> Self {
        GeneralConfig {
            w,
            h,
            f_tb,
            w_t,
            f_t,
            c_sh,
            pad: conflict_free_pad(f_tb, n),
        }
    }

    /// Known-good tilings for 3×3, 5×5 and 7×7 filters; `None` for other sizes.
    pub fn table1(k: usize, n: usize) -> Option<Self> {
        match k {
            3 => Some(Self::new(32, 4, 64, 16, 4, 2, n)),
            5 => Some(Self::new(32, 8, 32, 8, 8, 1, n)),
            7 => Some(Self::new(64, 4, 32, 8, 8, 1, n)),
            _ => None,
        }
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }

    /// Threads along X (filters): `F_TB / F_T`.
    pub fn t_x(&self) -> usize {
        self.f_tb / self.f_t
    }

    /// Threads along Y (pixels): `W * H / W_T`.
    pub fn t_y(&self) -> usize {
        self.w * self.h / self.w_t
    }

    pub fn threads(&self) -> usize {
        self.t_x() * self.t_y()
    }

    /// `rAcc[F_T][W_T]`, `rImg[W_T+K-1]`, `rFlt[F_T]`.
    pub fn registers(&self, k: usize) -> usize {
        self.f_t * self.w_t + (self.w_t + k - 1) + self.f_t
    }

    pub fn filter_tile_elems(&self, k: usize) -> usize {
        self.c_sh * k * k * (self.f_tb + self.pad)
    }

    pub fn image_tile_elems(&self, k: usize) -> usize {
        self.c_sh * (self.h + k - 1) * (self.w + k - 1)
    }

    pub fn sm_bytes(&self, k: usize, elem_bytes: usize) -> usize {
        (self.filter_tile_elems(k) + self.image_tile_elems(k)) * elem_bytes
    }

    pub fn label(&self) -> String {
        format!(
            "W={};H={};F_TB={};W_T={};F_T={};C_SH={};pad={}",
            self.w, self.h, self.f_tb, self.w_t, self.f_t, self.c_sh, self.pad
        )
    }
}

/// Padding that makes the filter-row stride an odd number of bank words, so
/// consecutive filter rows start in consecutive banks. `n` elements when
/// `F_TB / n` is even, none otherwise.
pub fn conflict_free_pad(f_tb: usize, n: usize) -> usize {
    if (f_tb / n).is_multiple_of(2) {
        n
    } else {
        0
    }
}

/// Element offset of `shFlt[c][kk][f_local]` in the transposed filter tile.
pub fn sm_filter_offset(cfg: &GeneralConfig, k: usize, c: usize, kk: usize, f_local: usize) -> usize {
    let row = cfg.f_tb + cfg.pad;
    c * k * k * row + kk * row + f_local
}

/// Byte address of `shFlt[c][kk][f_local]` for 4-byte elements.
pub fn sm_filter_address(cfg: &GeneralConfig, k: usize, c: usize, kk: usize, f_local: usize) -> usize {
    4 * sm_filter_offset(cfg, k, c, kk, f_local)
}

/// How the `(output pixel, filter)` domain is split over blocks and threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutPlan {
    pub tb_x: usize,
    pub tb_y: usize,
    pub t_x: usize,
    pub t_y: usize,
    /// Spatial blocks, indexed by TB_Y.
    pub blocks: Vec<BlockPlan>,
    /// `(first filter, filter count)` per TB_X.
    pub filter_tiles: Vec<(usize, usize)>,
    cfg: GeneralConfig,
    n: usize,
}

impl LayoutPlan {
    /// Local filter indices owned by thread column `tx`, in register order.
    pub fn thread_filters(&self, tx: usize) -> Vec<usize> {
        let units = self.cfg.f_t / self.n;
        (0..units)
            .flat_map(|q| (0..self.n).map(move |e| (q * self.t_x + tx) * self.n + e))
            .collect()
    }

    /// `(block row, first block column)` of thread row `ty`.
    pub fn thread_pixels(&self, ty: usize) -> (usize, usize) {
        let per_row = self.cfg.w / self.cfg.w_t;
        (ty / per_row, (ty % per_row) * self.cfg.w_t)
    }
}

/// Builds the block grid for an `n_y`×`n_x` image, `F` filters of size `K`
/// and vector width `n`.
pub fn plan_general_layout(n_y: usize, n_x: usize, k: usize, f: usize, cfg: &GeneralConfig, n: usize) -> LayoutPlan {
    let blocks = tile_output(n_y + 1 - k, n_x + 1 - k, cfg.h, cfg.w, k);
    let tb_x = f.div_ceil(cfg.f_tb);
    let filter_tiles = (0..tb_x)
        .map(|bx| (bx * cfg.f_tb, cfg.f_tb.min(f - bx * cfg.f_tb)))
        .collect();
    LayoutPlan {
        tb_x,
        tb_y: blocks.len(),
        t_x: cfg.t_x(),
        t_y: cfg.t_y(),
        blocks,
        filter_tiles,
        cfg: *cfg,
        n,
    }
}

pub fn run_general(image: &Image, filters: &FilterBank, cfg: &GeneralConfig, model: &MemModel) -> Result<KernelRun> {
    GeneralKernel::new(*cfg, *model).run(image, filters)
}

#[derive(Debug, Clone, Copy)]
pub struct GeneralKernel {
    cfg: GeneralConfig,
    model: MemModel,
    trace: bool,
}

impl GeneralKernel {
    pub fn new(cfg: GeneralConfig, model: MemModel) -> Self {
        GeneralKernel {
            cfg,
            model,
            trace: false,
        }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn run(&self, image: &Image, filters: &FilterBank) -> Result<KernelRun> {
        let (oy, ox) = output_dims(image, filters)?;
        let k = filters.size();
        into_result(costmodel::validate_general(
            &self.cfg,
            k,
            image.channels(),
            filters.count(),
            &self.model,
        ))?;
        let n = self.model.n() as usize;
        let layout = plan_general_layout(image.height(), image.width(), k, filters.count(), &self.cfg, n);
        let output = OutputMap::zeros(filters.count(), oy, ox)?;
        let (mut run, mut total) = KernelRun::new(output, self.model, self.trace);
        for plan in &layout.blocks {
            for &(f0, f_eff) in &layout.filter_tiles {
                let mut tb = BlockSim::new(self, &layout, image, filters, *plan, f0, f_eff);
                tb.run(&mut run.output)?;
                let report = tb.report();
                total.absorb(tb.sim);
                run.blocks.push(report);
            }
        }
        Ok(run.finish(total))
    }
}

#[derive(Clone, Copy)]
struct Thread {
    row: usize,
    seg: usize,
    /// Outputs of this thread inside the block.
    outputs: usize,
    /// Has at least one output pixel and one filter inside the tile.
    working: bool,
}

/// Values fetched from global memory for one channel chunk, waiting in
/// registers to be committed to shared memory.
struct Staged {
    c0: usize,
    image: Vec<(usize, f32)>,
    filters: Vec<(usize, f32)>,
}

struct BlockSim<'a> {
    cfg: GeneralConfig,
    layout: &'a LayoutPlan,
    image: &'a Image,
    filters: &'a FilterBank,
    plan: BlockPlan,
    f0: usize,
    f_eff: usize,
    sim: MemSim,
    k: usize,
    n: usize,
    eb: u64,
    gm: GmLayout,
    threads: Vec<Thread>,
    smem: Vec<f32>,
    img_base: usize,
    acc: Vec<f32>,
    rimg: Vec<f32>,
    rflt: Vec<f32>,
    gm_reads: Vec<usize>,
    loads: Vec<u64>,
}

impl<'a> BlockSim<'a> {
    fn new(
        kernel: &GeneralKernel,
        layout: &'a LayoutPlan,
        image: &'a Image,
        filters: &'a FilterBank,
        plan: BlockPlan,
        f0: usize,
        f_eff: usize,
    ) -> Self {
        let cfg = kernel.cfg;
        let k = filters.size();
        let n = layout.n;
        let eb = kernel.model.elem_width_bytes() as u64;
        let threads: Vec<Thread> = (0..cfg.threads())
            .map(|tid| {
                let (tx, ty) = (tid % layout.t_x, tid / layout.t_x);
                let (row, seg) = layout.thread_pixels(ty);
                let outputs = if row < plan.eff_h && seg < plan.eff_w {
                    cfg.w_t.min(plan.eff_w - seg)
                } else {
                    0
                };
                Thread {
                    row,
                    seg,
                    outputs,
                    working: outputs > 0 && tx * n < f_eff,
                }
            })
            .collect();
        let mut sim = MemSim::new(kernel.model).with_trace(kernel.trace);
        let m = sim.metrics_mut();
        m.registers_per_thread = cfg.registers(k) as u64;
        m.sm_bytes_used = cfg.sm_bytes(k, eb as usize) as u64;
        let t = cfg.threads();
        BlockSim {
            cfg,
            layout,
            image,
            filters,
            plan,
            f0,
            f_eff,
            sim,
            k,
            n,
            eb,
            gm: GmLayout::new(image.data().len(), filters.data().len(), eb),
            threads,
            smem: vec![0.0; cfg.filter_tile_elems(k) + cfg.image_tile_elems(k)],
            img_base: cfg.filter_tile_elems(k),
            acc: vec![0.0; t * cfg.f_t * cfg.w_t],
            rimg: vec![0.0; t * (cfg.w_t + k - 1)],
            rflt: vec![0.0; t * cfg.f_t],
            gm_reads: Vec::new(),
            loads: vec![0; t],
        }
    }

    fn channels(&self) -> usize {
        self.image.channels()
    }

    fn chunk_len(&self, c0: usize) -> usize {
        self.cfg.c_sh.min(self.channels() - c0)
    }

    fn tx(&self, tid: usize) -> usize {
        tid % self.layout.t_x
    }

    fn run(&mut self, out: &mut OutputMap) -> Result<()> {
        let staged = self.stage(0)?;
        self.commit(staged)?;
        // barrier
        let mut c0 = 0;
        while c0 < self.channels() {
            let next = c0 + self.cfg.c_sh;
            let prefetched = if next < self.channels() {
                Some(self.stage(next)?)
            } else {
                None
            };
            for i in 0..self.chunk_len(c0) {
                for j in 0..self.k {
                    self.load_image_row(i, j)?;
                    for kx in 0..self.k {
                        self.load_filters(i, j * self.k + kx)?;
                        self.fma(kx);
                    }
                }
            }
            // barrier
            if let Some(s) = prefetched {
                self.commit(s)?;
            }
            // barrier
            c0 = next;
        }
        self.write_back(out)
    }

    /// Global-memory loads for channels `c0..c0+C_SH` of the image tile and
    /// the filter tile.
    fn stage(&mut self, c0: usize) -> Result<Staged> {
        let k = self.k;
        let cs = self.chunk_len(c0);
        let nthreads = self.threads.len();
        let (eb, gm) = (self.eb, self.gm);

        let jobs = self.image_jobs(c0);
        for base in (0..jobs.len()).step_by(nthreads) {
            issue_warps(&mut self.sim, Phase::GmImageLoad, nthreads, |t| {
                jobs.get(base + t)
                    .copied()
                    .flatten()
                    .map(|(g, _, l)| Lane::new(gm.image + g as u64 * eb, (l as u64 * eb) as u32))
            })?;
        }
        let mut image = Vec::new();
        for &(g, s, l) in jobs.iter().flatten() {
            self.gm_reads.extend(g..g + l);
            image.extend((0..l).map(|e| (s + e, self.image.data()[g + e])));
        }

        // filters: one warp request per filter (and per 32 values), lanes
        // walking the contiguous (channel, tap) run of that filter
        let ws = self.sim.model().warp_size() as usize;
        let run = cs * k * k;
        let mut filters = Vec::with_capacity(self.f_eff * run);
        for fl in 0..self.f_eff {
            let g0 = self.filters.index(self.f0 + fl, c0, 0, 0);
            for start in (0..run).step_by(ws) {
                let lanes = ws.min(run - start);
                issue_warps(&mut self.sim, Phase::GmFilterLoad, lanes, |l| {
                    Some(Lane::new(gm.filters + (g0 + start + l) as u64 * eb, eb as u32))
                })?;
            }
            for idx in 0..run {
                let s = sm_filter_offset(&self.cfg, k, idx / (k * k), idx % (k * k), fl);
                filters.push((s, self.filters.data()[g0 + idx]));
            }
        }
        Ok(Staged { c0, image, filters })
    }

    /// Lane jobs `(gm element, shared element, length)` that copy one
    /// channel chunk of the image tile. Lanes walk the full-width tile in
    /// n-element words; words past the block's input columns are masked.
    fn image_jobs(&self, c0: usize) -> Vec<Option<(usize, usize, usize)>> {
        let k = self.k;
        let rows = self.plan.eff_h + k - 1;
        let len = self.plan.eff_w + k - 1;
        let (ht, wt) = (self.cfg.h + k - 1, self.cfg.w + k - 1);
        let mut jobs = Vec::new();
        for i in 0..self.chunk_len(c0) {
            for r in 0..rows {
                let sm_row = self.img_base + (i * ht + r) * wt;
                let gm_row = self.image.index(c0 + i, self.plan.y0 + r, self.plan.x0);
                jobs.extend(
                    aligned_chunks(sm_row, wt, self.n)
                        .map(|(off, l)| (off < len).then(|| (gm_row + off, sm_row + off, l.min(len - off)))),
                );
            }
        }
        jobs
    }

    /// Shared-memory stores of a staged chunk, with the same lane mapping
    /// as the loads that fetched it.
    fn commit(&mut self, staged: Staged) -> Result<()> {
        let k = self.k;
        let cs = self.chunk_len(staged.c0);
        let nthreads = self.threads.len();
        let eb = self.eb;

        let jobs = self.image_jobs(staged.c0);
        for base in (0..jobs.len()).step_by(nthreads) {
            issue_warps(&mut self.sim, Phase::SmImageStore, nthreads, |t| {
                jobs.get(base + t)
                    .copied()
                    .flatten()
                    .map(|(_, s, l)| Lane::new(s as u64 * eb, (l as u64 * eb) as u32))
            })?;
        }

        let ws = self.sim.model().warp_size() as usize;
        let run = cs * k * k;
        for fl in 0..self.f_eff {
            for start in (0..run).step_by(ws) {
                let lanes = ws.min(run - start);
                let cfg = self.cfg;
                issue_warps(&mut self.sim, Phase::SmFilterStore, lanes, |l| {
                    let idx = start + l;
                    let s = sm_filter_offset(&cfg, k, idx / (k * k), idx % (k * k), fl);
                    Some(Lane::new(s as u64 * eb, eb as u32))
                })?;
            }
        }

        for (s, v) in staged.image.into_iter().chain(staged.filters) {
            self.smem[s] = v;
        }
        Ok(())
    }

    /// `rImg <- shImg[i][row + j][seg .. seg + outputs + K - 1]`
    fn load_image_row(&mut self, i: usize, j: usize) -> Result<()> {
        let k = self.k;
        let (ht, wt) = (self.cfg.h + k - 1, self.cfg.w + k - 1);
        let span = self.cfg.w_t + k - 1;
        let (n, eb) = (self.n, self.eb);
        let chunks: Vec<Vec<(usize, usize)>> = self
            .threads
            .iter()
            .map(|t| {
                if !t.working {
                    return Vec::new();
                }
                let start = self.img_base + (i * ht + t.row + j) * wt + t.seg;
                aligned_chunks(start, t.outputs + k - 1, n)
                    .map(|(off, l)| (start + off, l))
                    .collect()
            })
            .collect();
        let rounds = chunks.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..rounds {
            issue_warps(&mut self.sim, Phase::SmImageRead, chunks.len(), |t| {
                chunks[t]
                    .get(r)
                    .map(|&(s, l)| Lane::new(s as u64 * eb, (l as u64 * eb) as u32))
            })?;
        }
        for (tid, list) in chunks.iter().enumerate() {
            let mut p = tid * span;
            for &(s, l) in list {
                self.rimg[p..p + l].copy_from_slice(&self.smem[s..s + l]);
                p += l;
                self.loads[tid] += l as u64;
            }
        }
        Ok(())
    }

    /// `rFlt <- shFlt[i][kk][thread's units]`, one n-wide unit per round.
    fn load_filters(&mut self, i: usize, kk: usize) -> Result<()> {
        let (n, eb, k) = (self.n, self.eb, self.k);
        let t_x = self.layout.t_x;
        let f_eff = self.f_eff;
        let cfg = self.cfg;
        let units = cfg.f_t / n;
        for q in 0..units {
            let threads = &self.threads;
            issue_warps(&mut self.sim, Phase::SmFilterRead, threads.len(), |tid| {
                let fl = (q * t_x + tid % t_x) * n;
                (threads[tid].working && fl < f_eff).then(|| {
                    let s = sm_filter_offset(&cfg, k, i, kk, fl);
                    Lane::new(s as u64 * eb, (n.min(f_eff - fl) as u64 * eb) as u32)
                })
            })?;
        }
        for tid in 0..self.threads.len() {
            if !self.threads[tid].working {
                continue;
            }
            let tx = self.tx(tid);
            for q in 0..units {
                let fl = (q * t_x + tx) * n;
                for e in 0..n.min(f_eff.saturating_sub(fl)) {
                    self.rflt[tid * cfg.f_t + q * n + e] = self.smem[sm_filter_offset(&cfg, k, i, kk, fl + e)];
                }
            }
        }
        Ok(())
    }

    /// `rAcc[ft][wt] += rFlt[ft] * rImg[kx + wt]`
    fn fma(&mut self, kx: usize) {
        let (f_t, w_t, n) = (self.cfg.f_t, self.cfg.w_t, self.n);
        let span = w_t + self.k - 1;
        let t_x = self.layout.t_x;
        for tid in 0..self.threads.len() {
            let t = self.threads[tid];
            if !t.working {
                continue;
            }
            let tx = tid % t_x;
            for ft in 0..f_t {
                let fl = ((ft / n) * t_x + tx) * n + ft % n;
                if fl >= self.f_eff {
                    continue;
                }
                let flt = self.rflt[tid * f_t + ft];
                let acc = &mut self.acc[(tid * f_t + ft) * w_t..][..t.outputs];
                let img = &self.rimg[tid * span + kx..][..t.outputs];
                for (a, &p) in acc.iter_mut().zip(img) {
                    *a += p * flt;
                }
            }
        }
    }

    /// Uncoalesced write-back: adjacent lanes hold different output maps.
    fn write_back(&mut self, out: &mut OutputMap) -> Result<()> {
        let (f_t, w_t, n, eb) = (self.cfg.f_t, self.cfg.w_t, self.n, self.eb);
        let t_x = self.layout.t_x;
        let (oh, ow) = (out.height(), out.width());
        let (y0, x0, f0, f_eff, gm) = (self.plan.y0, self.plan.x0, self.f0, self.f_eff, self.gm);
        let per_filter = w_t.div_ceil(n);
        for ft in 0..f_t {
            for u in 0..per_filter {
                let threads = &self.threads;
                issue_warps(&mut self.sim, Phase::GmOutputStore, threads.len(), |tid| {
                    let t = threads[tid];
                    let fl = ((ft / n) * t_x + tid % t_x) * n + ft % n;
                    (t.working && fl < f_eff && u * n < t.outputs).then(|| {
                        let len = n.min(t.outputs - u * n);
                        let idx = ((f0 + fl) * oh + y0 + t.row) * ow + x0 + t.seg + u * n;
                        Lane::new(gm.output + idx as u64 * eb, (len as u64 * eb) as u32)
                    })
                })?;
            }
        }
        for (tid, t) in self.threads.iter().enumerate() {
            if !t.working {
                continue;
            }
            let tx = tid % t_x;
            for ft in 0..f_t {
                let fl = ((ft / n) * t_x + tx) * n + ft % n;
                if fl >= f_eff {
                    continue;
                }
                for wt in 0..t.outputs {
                    let v = self.acc[(tid * f_t + ft) * w_t + wt];
                    out.set(f0 + fl, y0 + t.row, x0 + t.seg + wt, v);
                }
            }
        }
        Ok(())
    }

    fn report(&self) -> BlockReport {
        let distinct: HashSet<usize> = self.gm_reads.iter().copied().collect();
        BlockReport {
            plan: self.plan,
            filter_start: self.f0,
            filter_count: self.f_eff,
            gm_image_reads: self.gm_reads.len() as u64,
            gm_image_distinct: distinct.len() as u64,
            thread_sm_pixel_loads: self
                .threads
                .iter()
                .zip(&self.loads)
                .filter(|(t, _)| t.working)
                .map(|(_, &l)| l)
                .collect(),
            metrics: *self.sim.metrics(),
        }
    }
}
