//! Synthetic workload generators: network receive loops over ring buffers,
//! direct-I/O storage block streams, and memory streamers.
//!
//! Each workload owns a disjoint contiguous line-address range. DMA address
//! generation and CPU consumption are both deterministic functions of
//! (spec, epoch, seed); random streams use a per-workload seeded generator.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{AccessKind, AccessLevel, CacheModel, EvictDest, InstanceEnd};
use crate::geometry::{ClassId, DeviceId, LineAddr};
use crate::telemetry::CounterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Priority {
    High,
    Low,
}

impl std::fmt::Display for Priority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Priority::High => write!(f, "high"),
            Priority::Low => write!(f, "low"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetRxParams {
    /// Ring slots per core; addresses are reused cyclically.
    pub ring_entries: usize,
    /// Payload lines per packet; one descriptor line is separate.
    pub lines_per_packet: usize,
    /// Consume payload lines, or only the descriptor.
    pub touch: bool,
    /// Packets consumed per core per epoch. Defaults to keeping pace with
    /// the device budget.
    pub packets_per_epoch: Option<u64>,
}

impl Default for NetRxParams {
    fn default() -> Self {
        NetRxParams {
            ring_entries: 2048,
            lines_per_packet: 16,
            touch: true,
            packets_per_epoch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageStreamParams {
    /// Block size in lines (512 = 32KB blocks).
    pub block_lines: usize,
    pub queue_depth: usize,
    /// Each block lands at new addresses (direct-I/O user buffers).
    pub fresh_buffers: bool,
    /// CPU reads per line after a block arrives.
    pub process_reads_per_line: usize,
    /// Line reads per core per epoch. Defaults to keeping pace.
    pub cpu_lines_per_epoch: Option<u64>,
}

impl Default for StorageStreamParams {
    fn default() -> Self {
        StorageStreamParams {
            block_lines: 512,
            queue_depth: 32,
            fresh_buffers: true,
            process_reads_per_line: 1,
            cpu_lines_per_epoch: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemPattern {
    Sequential,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemOp {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemStreamParams {
    pub working_set_lines: u64,
    pub pattern: MemPattern,
    pub op: MemOp,
    pub accesses_per_epoch: u64,
}

impl Default for MemStreamParams {
    fn default() -> Self {
        MemStreamParams {
            working_set_lines: 1024,
            pattern: MemPattern::Sequential,
            op: MemOp::Read,
            accesses_per_epoch: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadKind {
    NetRx(NetRxParams),
    StorageStream(StorageStreamParams),
    MemStream(MemStreamParams),
}

impl WorkloadKind {
    pub fn name(&self) -> &'static str {
        match self {
            WorkloadKind::NetRx(_) => "net_rx",
            WorkloadKind::StorageStream(_) => "storage_stream",
            WorkloadKind::MemStream(_) => "mem_stream",
        }
    }

    pub fn is_io(&self) -> bool {
        !matches!(self, WorkloadKind::MemStream(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub name: String,
    pub kind: WorkloadKind,
    pub priority: Priority,
    pub cores: Vec<usize>,
    /// Required for net_rx and storage_stream, resolved by the engine.
    pub device: Option<String>,
    /// Static initial way mask; needed for controller-off experiments.
    pub initial_mask: Option<(usize, usize)>,
    /// Workloads with a `launch` scripted event start inactive.
    pub starts_active: bool,
}

/// Mutation context handed to workload steps: the cache model plus the
/// counter application rules shared with the engine's DMA path.
pub struct SimCtx<'a> {
    pub model: &'a mut CacheModel,
    pub counters: &'a mut CounterSet,
}

impl SimCtx<'_> {
    /// Runs one demand access and folds its outcome into the counters.
    pub fn cpu_access(
        &mut self,
        widx: usize,
        class: ClassId,
        core: usize,
        addr: LineAddr,
        kind: AccessKind,
    ) -> AccessLevel {
        let out = self.model.cpu_access(core, addr, kind, class);
        let w = &mut self.counters.workloads[widx];
        w.accesses += 1;
        match out.level {
            AccessLevel::MlcHit => w.mlc_hits += 1,
            AccessLevel::LlcHit => {
                w.mlc_misses += 1;
                w.llc_hits += 1;
            }
            AccessLevel::Memory => {
                w.mlc_misses += 1;
                w.llc_misses += 1;
                self.counters.global.memory_read_lines += 1;
            }
        }
        if out.migrated_to_inclusive {
            self.counters.global.inclusive_migrations += 1;
        }
        if out.bloat_fill {
            self.counters.global.bloat_fills += 1;
        }
        for ev in &out.evicted {
            match ev.dest {
                EvictDest::Llc => self.counters.workloads[widx].victim_fills += 1,
                EvictDest::Memory => self.counters.global.memory_write_lines += 1,
                EvictDest::Dropped => {}
            }
        }
        for ev in &out.events {
            let ledger = &mut self.counters.devices[ev.device.0 as usize].ledger;
            match ev.end {
                InstanceEnd::ConsumedFromCache => ledger.consumed_from_cache += 1,
                InstanceEnd::ConsumedFromMemory => ledger.consumed_from_memory += 1,
                InstanceEnd::Leaked => ledger.leaked += 1,
                InstanceEnd::Overwritten => ledger.overwritten += 1,
            }
        }
        out.level
    }
}

// ── net_rx ────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
struct Ring {
    entries: usize,
    /// Total packets whose descriptor has been DMA-written.
    fills_done: u64,
    /// Payload lines of the in-progress packet already written.
    fill_progress: usize,
    /// Total packets consumed.
    consumed_done: u64,
    fill_epoch: Vec<u64>,
}

impl Ring {
    fn occupancy(&self) -> u64 {
        self.fills_done - self.consumed_done
    }

    fn can_fill(&self) -> bool {
        self.occupancy() < self.entries as u64
    }
}

#[derive(Debug)]
pub struct NetRxState {
    params: NetRxParams,
    device: DeviceId,
    rings: Vec<Ring>,
    packets_per_epoch: u64,
    fill_cursor: usize,
    desc_base: u64,
    payload_base: u64,
}

impl NetRxState {
    fn slot_desc_addr(&self, core_idx: usize, slot: u64) -> u64 {
        self.desc_base + (core_idx * self.params.ring_entries) as u64 + slot
    }

    fn slot_payload_addr(&self, core_idx: usize, slot: u64, k: usize) -> u64 {
        self.payload_base
            + ((core_idx * self.params.ring_entries) as u64 + slot)
                * self.params.lines_per_packet as u64
            + k as u64
    }

    /// Produces this epoch's DMA addresses, marking slots filled as their
    /// descriptors are emitted. Packets may straddle epochs when the budget
    /// runs out mid-payload.
    fn dma_addrs(&mut self, mut budget: u64, epoch: u64) -> Vec<LineAddr> {
        let mut addrs = Vec::new();
        let cores = self.rings.len();
        let mut stalled = 0;
        while budget > 0 && stalled < cores {
            let c = self.fill_cursor % cores;
            if !self.rings[c].can_fill() {
                self.fill_cursor = (self.fill_cursor + 1) % cores;
                stalled += 1;
                continue;
            }
            stalled = 0;
            let slot = self.rings[c].fills_done % self.rings[c].entries as u64;
            let lpp = self.params.lines_per_packet;
            // Payload lines first, descriptor last.
            while self.rings[c].fill_progress < lpp && budget > 0 {
                let k = self.rings[c].fill_progress;
                addrs.push(LineAddr(self.slot_payload_addr(c, slot, k)));
                self.rings[c].fill_progress += 1;
                budget -= 1;
            }
            if self.rings[c].fill_progress == lpp && budget > 0 {
                addrs.push(LineAddr(self.slot_desc_addr(c, slot)));
                budget -= 1;
                self.rings[c].fill_progress = 0;
                let slot_idx = slot as usize;
                self.rings[c].fill_epoch[slot_idx] = epoch;
                self.rings[c].fills_done += 1;
                self.fill_cursor = (self.fill_cursor + 1) % cores;
            } else if budget == 0 {
                break;
            }
        }
        addrs
    }

    fn cpu_step(
        &mut self,
        widx: usize,
        class: ClassId,
        cores: &[usize],
        epoch: u64,
        ctx: &mut SimCtx,
    ) {
        for (ci, &core) in cores.iter().enumerate() {
            for _ in 0..self.packets_per_epoch {
                if self.rings[ci].occupancy() == 0 {
                    break;
                }
                let seq = self.rings[ci].consumed_done;
                let slot = seq % self.rings[ci].entries as u64;
                ctx.cpu_access(
                    widx,
                    class,
                    core,
                    LineAddr(self.slot_desc_addr(ci, slot)),
                    AccessKind::Read,
                );
                if self.params.touch {
                    for k in 0..self.params.lines_per_packet {
                        ctx.cpu_access(
                            widx,
                            class,
                            core,
                            LineAddr(self.slot_payload_addr(ci, slot, k)),
                            AccessKind::Read,
                        );
                    }
                }
                let filled_at = self.rings[ci].fill_epoch[slot as usize];
                let w = &mut ctx.counters.workloads[widx];
                w.completed_units += 1;
                w.packet_latency_epochs += epoch.saturating_sub(filled_at);
                self.rings[ci].consumed_done += 1;
            }
        }
    }
}

// ── storage_stream ────────────────────────────────────────────────────

#[derive(Debug, Clone)]
struct Block {
    base: u64,
    written: usize,
    reads_done: u64,
    core_idx: usize,
}

#[derive(Debug)]
pub struct StorageState {
    params: StorageStreamParams,
    device: DeviceId,
    blocks: VecDeque<Block>,
    next_seq: u64,
    cpu_lines_per_epoch: u64,
    base: u64,
}

impl StorageState {
    fn block_base(&self, seq: u64) -> u64 {
        if self.params.fresh_buffers {
            self.base + seq * self.params.block_lines as u64
        } else {
            self.base + (seq % self.params.queue_depth as u64) * self.params.block_lines as u64
        }
    }

    fn admit(&mut self, core_count: usize) {
        while self.blocks.len() < self.params.queue_depth {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.blocks.push_back(Block {
                base: self.block_base(seq),
                written: 0,
                reads_done: 0,
                core_idx: (seq % core_count as u64) as usize,
            });
        }
    }

    fn dma_addrs(&mut self, mut budget: u64, _epoch: u64) -> Vec<LineAddr> {
        let mut addrs = Vec::new();
        for b in self.blocks.iter_mut() {
            while b.written < self.params.block_lines && budget > 0 {
                addrs.push(LineAddr(b.base + b.written as u64));
                b.written += 1;
                budget -= 1;
            }
            if budget == 0 {
                break;
            }
        }
        addrs
    }

    fn cpu_step(
        &mut self,
        widx: usize,
        class: ClassId,
        cores: &[usize],
        _epoch: u64,
        ctx: &mut SimCtx,
    ) {
        let reps = self.params.process_reads_per_line as u64;
        let total = self.params.block_lines as u64 * reps;
        for (ci, &core) in cores.iter().enumerate() {
            let mut budget = self.cpu_lines_per_epoch;
            for b in self.blocks.iter_mut() {
                if b.core_idx != ci || b.written < self.params.block_lines {
                    continue;
                }
                while b.reads_done < total && budget > 0 {
                    let line = b.reads_done / reps;
                    ctx.cpu_access(
                        widx,
                        class,
                        core,
                        LineAddr(b.base + line),
                        AccessKind::Read,
                    );
                    b.reads_done += 1;
                    budget -= 1;
                }
                if budget == 0 {
                    break;
                }
            }
        }
        let before = self.blocks.len();
        self.blocks.retain(|b| b.reads_done < total);
        let completed = (before - self.blocks.len()) as u64;
        ctx.counters.workloads[widx].completed_units += completed;
        self.admit(cores.len());
    }
}

// ── mem_stream ────────────────────────────────────────────────────────

#[derive(Debug)]
struct MemCursor {
    start: u64,
    len: u64,
    pos: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug)]
pub struct MemState {
    params: MemStreamParams,
    cursors: Vec<MemCursor>,
}

impl MemState {
    fn cpu_step(
        &mut self,
        widx: usize,
        class: ClassId,
        cores: &[usize],
        _epoch: u64,
        ctx: &mut SimCtx,
    ) {
        let kind = match self.params.op {
            MemOp::Read => AccessKind::Read,
            MemOp::Write => AccessKind::Write,
        };
        for (ci, &core) in cores.iter().enumerate() {
            let cur = &mut self.cursors[ci];
            for _ in 0..self.params.accesses_per_epoch {
                let off = match self.params.pattern {
                    MemPattern::Sequential => {
                        let o = cur.pos;
                        cur.pos = (cur.pos + 1) % cur.len;
                        o
                    }
                    MemPattern::Random => cur.rng.gen_range(0..cur.len),
                };
                ctx.cpu_access(widx, class, core, LineAddr(cur.start + off), kind);
            }
        }
    }
}

// ── runtime wrapper ───────────────────────────────────────────────────

#[derive(Debug)]
pub enum KindState {
    NetRx(NetRxState),
    Storage(StorageState),
    Mem(MemState),
}

/// Live state of one workload within a run.
#[derive(Debug)]
pub struct WorkloadRuntime {
    pub widx: usize,
    pub class: ClassId,
    pub cores: Vec<usize>,
    pub active: bool,
    pub state: KindState,
}

impl WorkloadRuntime {
    /// `addr_base` must give the workload a private address range; `seed`
    /// feeds the per-workload random generator; `device_budget` is the
    /// bound device's lines_per_epoch (0 for mem_stream).
    pub fn new(
        widx: usize,
        spec: &WorkloadSpec,
        device: Option<DeviceId>,
        device_budget: u64,
        addr_base: u64,
        seed: u64,
    ) -> Self {
        let class = ClassId(widx as u16);
        let state = match &spec.kind {
            WorkloadKind::NetRx(p) => {
                let cores = spec.cores.len() as u64;
                let per_packet = p.lines_per_packet as u64 + 1;
                let packets_per_epoch = p
                    .packets_per_epoch
                    .unwrap_or_else(|| device_budget / per_packet / cores.max(1) + 1);
                let rings = spec
                    .cores
                    .iter()
                    .map(|_| Ring {
                        entries: p.ring_entries,
                        fills_done: 0,
                        fill_progress: 0,
                        consumed_done: 0,
                        fill_epoch: vec![0; p.ring_entries],
                    })
                    .collect();
                let desc_span = (spec.cores.len() * p.ring_entries) as u64;
                KindState::NetRx(NetRxState {
                    params: p.clone(),
                    device: device.expect("net_rx requires a device"),
                    rings,
                    packets_per_epoch,
                    fill_cursor: 0,
                    desc_base: addr_base,
                    payload_base: addr_base + desc_span,
                })
            }
            WorkloadKind::StorageStream(p) => {
                let cores = spec.cores.len() as u64;
                let reps = p.process_reads_per_line as u64;
                let cpu_lines = p
                    .cpu_lines_per_epoch
                    .unwrap_or_else(|| device_budget * reps / cores.max(1) + 16);
                let mut st = StorageState {
                    params: p.clone(),
                    device: device.expect("storage_stream requires a device"),
                    blocks: VecDeque::new(),
                    next_seq: 0,
                    cpu_lines_per_epoch: cpu_lines,
                    base: addr_base,
                };
                st.admit(spec.cores.len());
                KindState::Storage(st)
            }
            WorkloadKind::MemStream(p) => {
                let n = spec.cores.len() as u64;
                let base_len = p.working_set_lines / n;
                let rem = p.working_set_lines % n;
                let mut start = addr_base;
                let cursors = (0..n)
                    .map(|i| {
                        let len = base_len + if i < rem { 1 } else { 0 };
                        let c = MemCursor {
                            start,
                            len: len.max(1),
                            pos: 0,
                            rng: ChaCha8Rng::seed_from_u64(
                                seed.wrapping_add((widx as u64 + 1) * 0x9E37_79B9)
                                    .wrapping_add(i),
                            ),
                        };
                        start += len.max(1);
                        c
                    })
                    .collect();
                KindState::Mem(MemState {
                    params: p.clone(),
                    cursors,
                })
            }
        };
        WorkloadRuntime {
            widx,
            class,
            cores: spec.cores.clone(),
            active: spec.starts_active,
            state,
        }
    }

    pub fn device(&self) -> Option<DeviceId> {
        match &self.state {
            KindState::NetRx(s) => Some(s.device),
            KindState::Storage(s) => Some(s.device),
            KindState::Mem(_) => None,
        }
    }

    /// DMA addresses this workload wants written this epoch, within budget.
    pub fn dma_addrs(&mut self, budget: u64, epoch: u64) -> Vec<LineAddr> {
        if !self.active {
            return Vec::new();
        }
        match &mut self.state {
            KindState::NetRx(s) => s.dma_addrs(budget, epoch),
            KindState::Storage(s) => s.dma_addrs(budget, epoch),
            KindState::Mem(_) => Vec::new(),
        }
    }

    /// One epoch of CPU work.
    pub fn cpu_step(&mut self, epoch: u64, ctx: &mut SimCtx) {
        if !self.active {
            return;
        }
        let widx = self.widx;
        let class = self.class;
        let cores = self.cores.clone();
        match &mut self.state {
            KindState::NetRx(s) => s.cpu_step(widx, class, &cores, epoch, ctx),
            KindState::Storage(s) => s.cpu_step(widx, class, &cores, epoch, ctx),
            KindState::Mem(s) => s.cpu_step(widx, class, &cores, epoch, ctx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::ModelConfig;
    use crate::geometry::CacheGeometry;

    fn spec_net(touch: bool) -> WorkloadSpec {
        WorkloadSpec {
            name: "net".into(),
            kind: WorkloadKind::NetRx(NetRxParams {
                ring_entries: 8,
                lines_per_packet: 4,
                touch,
                packets_per_epoch: Some(4),
            }),
            priority: Priority::High,
            cores: vec![0, 1],
            device: Some("nic".into()),
            initial_mask: None,
            starts_active: true,
        }
    }

    fn run_net(touch: bool, epochs: u64) -> CounterSet {
        let mut model = CacheModel::new(ModelConfig::new(CacheGeometry::default()), 1, 1).unwrap();
        let mut counters = CounterSet::new(1, 1);
        let spec = spec_net(touch);
        let mut w = WorkloadRuntime::new(0, &spec, Some(DeviceId(0)), 64, 1 << 20, 7);
        for epoch in 0..epochs {
            let addrs = w.dma_addrs(64, epoch);
            assert!(addrs.len() <= 64);
            for a in addrs {
                let out = model.dma_write_line(DeviceId(0), a, true).unwrap();
                let d = &mut counters.devices[0];
                d.dma_lines_written += 1;
                match out.kind {
                    crate::cache::DmaWriteKind::UpdateInPlace { .. } => d.dma_updates += 1,
                    crate::cache::DmaWriteKind::AllocateDca { .. } => d.dma_allocations += 1,
                    crate::cache::DmaWriteKind::MemoryWrite => d.dma_memory_writes += 1,
                }
            }
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut counters,
            };
            w.cpu_step(epoch, &mut ctx);
        }
        counters
    }

    #[test]
    fn non_touching_rx_reads_descriptors_only() {
        let c = run_net(false, 20);
        let per_packet_reads = c.workloads[0].accesses as f64 / c.workloads[0].completed_units as f64;
        assert!(per_packet_reads < 1.5, "NT should read ~1 line per packet");
        assert!(c.workloads[0].completed_units > 0);
    }

    #[test]
    fn touching_rx_reads_payload_and_migrates() {
        let c = run_net(true, 20);
        let per_packet = c.workloads[0].accesses as f64 / c.workloads[0].completed_units as f64;
        assert!(per_packet > 4.5, "T reads descriptor + 4 payload lines");
        assert!(c.global.inclusive_migrations > 0);
    }

    #[test]
    fn warm_ring_is_update_dominant() {
        // Ring footprint (2 cores x 8 slots x 5 lines = 80 lines) fits in
        // the DCA+inclusive capacity; once warm, DMA writes update in place.
        let c = run_net(true, 60);
        let d = &c.devices[0];
        assert!(
            d.dma_updates > d.dma_allocations,
            "updates {} should dominate allocations {}",
            d.dma_updates,
            d.dma_allocations
        );
    }

    #[test]
    fn storage_stream_completes_blocks_and_paces() {
        let mut model = CacheModel::new(ModelConfig::new(CacheGeometry::default()), 1, 1).unwrap();
        let mut counters = CounterSet::new(1, 1);
        let spec = WorkloadSpec {
            name: "fio".into(),
            kind: WorkloadKind::StorageStream(StorageStreamParams {
                block_lines: 64,
                queue_depth: 4,
                fresh_buffers: true,
                process_reads_per_line: 2,
                cpu_lines_per_epoch: None,
            }),
            priority: Priority::Low,
            cores: vec![2],
            device: Some("ssd".into()),
            initial_mask: None,
            starts_active: true,
        };
        let mut w = WorkloadRuntime::new(0, &spec, Some(DeviceId(0)), 128, 1 << 30, 7);
        for epoch in 0..50 {
            let addrs = w.dma_addrs(128, epoch);
            assert!(addrs.len() <= 128);
            for a in addrs {
                model.dma_write_line(DeviceId(0), a, true).unwrap();
                counters.devices[0].dma_lines_written += 1;
                counters.devices[0].dma_allocations += 1; // fresh addrs
            }
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut counters,
            };
            w.cpu_step(epoch, &mut ctx);
        }
        let w0 = &counters.workloads[0];
        assert!(w0.completed_units > 10, "blocks completed: {}", w0.completed_units);
        // 2 reads per line: half the reads are MLC hits on the repeat.
        assert!(w0.mlc_hits > 0);
    }

    #[test]
    fn fitting_mem_stream_hits_after_warmup() {
        // Working set = 2 LLC ways' capacity, allocated 2 ways, no
        // co-runner: steady-state cache hit rate (MLC+LLC) >= 95%.
        let geom = CacheGeometry::default();
        let mut model = CacheModel::new(ModelConfig::new(geom.clone()), 0, 1).unwrap();
        model
            .set_way_mask(ClassId(0), crate::geometry::WayMask::new(3, 4))
            .unwrap();
        let mut counters = CounterSet::new(1, 0);
        let spec = WorkloadSpec {
            name: "xmem".into(),
            kind: WorkloadKind::MemStream(MemStreamParams {
                working_set_lines: 2 * geom.llc_sets as u64,
                pattern: MemPattern::Sequential,
                op: MemOp::Read,
                accesses_per_epoch: 256,
            }),
            priority: Priority::High,
            cores: vec![0, 1],
            device: None,
            initial_mask: None,
            starts_active: true,
        };
        let mut w = WorkloadRuntime::new(0, &spec, None, 0, 0, 7);
        for epoch in 0..40 {
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut counters,
            };
            w.cpu_step(epoch, &mut ctx);
        }
        let warm = counters.workloads[0];
        // Measure the last quarter of the run.
        let mut tail = CounterSet::new(1, 0);
        for epoch in 40..50 {
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut tail,
            };
            w.cpu_step(epoch, &mut ctx);
        }
        let t = tail.workloads[0];
        let hit = (t.mlc_hits + t.llc_hits) as f64 / t.accesses as f64;
        assert!(
            hit >= 0.95,
            "steady-state cache hit rate {hit:.3} (warmup accesses {})",
            warm.accesses
        );
    }

    #[test]
    fn random_thrasher_misses_everywhere() {
        let geom = CacheGeometry::default();
        let total_cache =
            (geom.llc_sets * geom.llc_ways + geom.core_count * geom.mlc_sets * geom.mlc_ways)
                as u64;
        let mut model = CacheModel::new(ModelConfig::new(geom), 0, 1).unwrap();
        let mut counters = CounterSet::new(1, 0);
        let spec = WorkloadSpec {
            name: "rand".into(),
            kind: WorkloadKind::MemStream(MemStreamParams {
                working_set_lines: total_cache * 16,
                pattern: MemPattern::Random,
                op: MemOp::Read,
                accesses_per_epoch: 512,
            }),
            priority: Priority::Low,
            cores: vec![0],
            device: None,
            initial_mask: None,
            starts_active: true,
        };
        let mut w = WorkloadRuntime::new(0, &spec, None, 0, 0, 7);
        for epoch in 0..30 {
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut counters,
            };
            w.cpu_step(epoch, &mut ctx);
        }
        let c = counters.workloads[0];
        let mlc_miss = c.mlc_misses as f64 / c.accesses as f64;
        let llc_miss = c.llc_misses as f64 / c.mlc_misses as f64;
        assert!(mlc_miss > 0.90, "mlc miss {mlc_miss:.3}");
        assert!(llc_miss > 0.90, "llc miss {llc_miss:.3}");
    }

    #[test]
    fn per_epoch_work_is_deterministic() {
        let c1 = run_net(true, 15);
        let c2 = run_net(true, 15);
        assert_eq!(c1, c2);
    }
}
