//! Shared test support: the independent brute-force reference simulator
//! and random-trace equivalence machinery used by the oracle and
//! acceptance suites.
#![allow(dead_code)]


use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use llcsim::cache::{
    AccessKind, AccessLevel, AccessOutcome, CacheModel, DmaReadKind, DmaReadOutcome, DmaWriteKind,
    DmaWriteOutcome, EvictDest, Eviction, InstanceEnd, InstanceEvent, ModelConfig,
};
use llcsim::geometry::{CacheGeometry, ClassId, DeviceId, LineAddr, WayMask};

// ──────────────────────────────────────────────────────────────────────
// Reference simulator
// ──────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
struct RefLine {
    addr: u64,
    way: usize,
    owner: u16,
    io: Option<u16>,
    dirty: bool,
    consumed: bool,
    inclusive: bool,
}

/// One LLC set: lines in most-recently-used-first order.
type RefSet = Vec<RefLine>;

#[derive(Clone, Debug)]
struct RefMlcLine {
    addr: u64,
    owner: u16,
    io: Option<u16>,
    dirty: bool,
}

struct RefSim {
    geom: CacheGeometry,
    migrate_non_io: bool,
    llc: Vec<RefSet>,
    /// Per core, per set, MRU-first.
    mlc: Vec<Vec<Vec<RefMlcLine>>>,
    masks: Vec<(usize, usize)>,
    /// Memory-side I/O provenance: (addr, device, pending).
    memory_io: Vec<(u64, u16, bool)>,
}

impl RefSim {
    fn new(geom: CacheGeometry, migrate_non_io: bool, class_count: usize) -> Self {
        let llc = vec![Vec::new(); geom.llc_sets];
        let mlc = vec![vec![Vec::new(); geom.mlc_sets]; geom.core_count];
        let masks = vec![(0, geom.llc_ways - 1); class_count];
        RefSim {
            geom,
            migrate_non_io,
            llc,
            mlc,
            masks,
            memory_io: Vec::new(),
        }
    }

    fn is_inclusive_way(&self, way: usize) -> bool {
        way >= self.geom.llc_ways - self.geom.inclusive_way_count
    }

    fn mem_io_get(&self, addr: u64) -> Option<(u16, bool)> {
        self.memory_io
            .iter()
            .find(|e| e.0 == addr)
            .map(|e| (e.1, e.2))
    }

    fn mem_io_remove(&mut self, addr: u64) {
        self.memory_io.retain(|e| e.0 != addr);
    }

    fn mem_io_put(&mut self, addr: u64, device: u16, pending: bool) {
        self.mem_io_remove(addr);
        self.memory_io.push((addr, device, pending));
    }

    fn llc_pos(&self, addr: u64) -> Option<(usize, usize)> {
        let set = (addr % self.geom.llc_sets as u64) as usize;
        self.llc[set]
            .iter()
            .position(|l| l.addr == addr)
            .map(|p| (set, p))
    }

    fn in_any_mlc(&self, addr: u64, skip: Option<usize>) -> bool {
        let set = (addr % self.geom.mlc_sets as u64) as usize;
        (0..self.geom.core_count)
            .filter(|&c| Some(c) != skip)
            .any(|c| self.mlc[c][set].iter().any(|l| l.addr == addr))
    }

    /// Victim way within [lo, hi]: lowest-index unused way if any frame in
    /// range is free, else the least-recently-used resident line's way.
    fn pick_victim_way(&self, set: usize, lo: usize, hi: usize) -> usize {
        let used: Vec<usize> = self.llc[set]
            .iter()
            .map(|l| l.way)
            .filter(|w| *w >= lo && *w <= hi)
            .collect();
        for w in lo..=hi {
            if !used.contains(&w) {
                return w;
            }
        }
        // MRU-first order: the last line in range is LRU.
        self.llc[set]
            .iter()
            .rev()
            .find(|l| l.way >= lo && l.way <= hi)
            .map(|l| l.way)
            .unwrap()
    }

    /// Removes the line occupying `way`, reporting eviction effects.
    fn evict_way(
        &mut self,
        set: usize,
        way: usize,
        evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) -> Option<RefLine> {
        let pos = self.llc[set].iter().position(|l| l.way == way)?;
        let line = self.llc[set].remove(pos);
        evicted.push(Eviction {
            addr: LineAddr(line.addr),
            dest: if line.dirty {
                EvictDest::Memory
            } else {
                EvictDest::Dropped
            },
        });
        if let Some(dev) = line.io {
            if !line.consumed {
                events.push(InstanceEvent {
                    device: DeviceId(dev),
                    addr: LineAddr(line.addr),
                    end: InstanceEnd::Leaked,
                });
            }
            self.mem_io_put(line.addr, dev, false);
        }
        Some(line)
    }

    fn touch(&mut self, set: usize, addr: u64) {
        if let Some(pos) = self.llc[set].iter().position(|l| l.addr == addr) {
            let line = self.llc[set].remove(pos);
            self.llc[set].insert(0, line);
        }
    }

    fn end_pending_as_overwritten(&mut self, addr: u64, events: &mut Vec<InstanceEvent>) {
        if let Some((set, pos)) = self.llc_pos(addr) {
            let line = &mut self.llc[set][pos];
            if let Some(dev) = line.io {
                if !line.consumed {
                    line.consumed = true;
                    events.push(InstanceEvent {
                        device: DeviceId(dev),
                        addr: LineAddr(addr),
                        end: InstanceEnd::Overwritten,
                    });
                }
            }
        }
        if let Some((dev, true)) = self.mem_io_get(addr) {
            self.mem_io_remove(addr);
            events.push(InstanceEvent {
                device: DeviceId(dev),
                addr: LineAddr(addr),
                end: InstanceEnd::Overwritten,
            });
        }
    }

    fn drop_mlc_copies(&mut self, addr: u64) {
        let set = (addr % self.geom.mlc_sets as u64) as usize;
        for core in 0..self.geom.core_count {
            self.mlc[core][set].retain(|l| l.addr != addr);
        }
    }

    /// MLC eviction handling: merge, shared drop, or masked victim fill.
    fn spill_to_llc(
        &mut self,
        from_core: usize,
        victim: RefMlcLine,
        evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) -> (Option<usize>, bool) {
        if let Some((set, pos)) = self.llc_pos(victim.addr) {
            let shared = self.in_any_mlc(victim.addr, Some(from_core));
            let line = &mut self.llc[set][pos];
            line.dirty |= victim.dirty;
            if !shared {
                line.inclusive = false;
            }
            self.touch(set, victim.addr);
            evicted.push(Eviction {
                addr: LineAddr(victim.addr),
                dest: EvictDest::Llc,
            });
            return (None, false);
        }
        if self.in_any_mlc(victim.addr, Some(from_core)) {
            if victim.dirty {
                if let Some(dev) = victim.io {
                    self.mem_io_put(victim.addr, dev, false);
                }
            }
            evicted.push(Eviction {
                addr: LineAddr(victim.addr),
                dest: if victim.dirty {
                    EvictDest::Memory
                } else {
                    EvictDest::Dropped
                },
            });
            return (None, false);
        }
        let set = (victim.addr % self.geom.llc_sets as u64) as usize;
        let (lo, hi) = self.masks[victim.owner as usize];
        let way = self.pick_victim_way(set, lo, hi);
        self.evict_way(set, way, evicted, events);
        let bloat = victim.io.is_some();
        self.llc[set].insert(
            0,
            RefLine {
                addr: victim.addr,
                way,
                owner: victim.owner,
                io: victim.io,
                dirty: victim.dirty,
                consumed: true,
                inclusive: false,
            },
        );
        evicted.push(Eviction {
            addr: LineAddr(victim.addr),
            dest: EvictDest::Llc,
        });
        (Some(way), bloat)
    }

    fn install_mlc(
        &mut self,
        core: usize,
        line: RefMlcLine,
        evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) -> (Option<usize>, bool) {
        let set = (line.addr % self.geom.mlc_sets as u64) as usize;
        let mut fill = (None, false);
        if self.mlc[core][set].len() == self.geom.mlc_ways {
            let victim = self.mlc[core][set].pop().unwrap();
            fill = self.spill_to_llc(core, victim, evicted, events);
        }
        self.mlc[core][set].insert(0, line);
        fill
    }

    fn cpu_access(&mut self, core: usize, addr: u64, kind: AccessKind, class: u16) -> AccessOutcome {
        let mset = (addr % self.geom.mlc_sets as u64) as usize;
        if let Some(pos) = self.mlc[core][mset].iter().position(|l| l.addr == addr) {
            let mut line = self.mlc[core][mset].remove(pos);
            if kind == AccessKind::Write {
                line.dirty = true;
                line.io = None;
                self.cpu_write_strips_io(addr);
            }
            self.mlc[core][mset].insert(0, line);
            return AccessOutcome {
                level: AccessLevel::MlcHit,
                migrated_to_inclusive: false,
                dropped_from_llc: false,
                migration_way: None,
                llc_way_filled: None,
                bloat_fill: false,
                evicted: vec![],
                events: vec![],
            };
        }

        let mut evicted = Vec::new();
        let mut events = Vec::new();
        let mut migrated = false;
        let mut migration_way = None;
        let mut dropped = false;

        let (level, new_line) = if let Some((set, pos)) = self.llc_pos(addr) {
            let snapshot = self.llc[set][pos].clone();
            if let Some(dev) = snapshot.io {
                if !snapshot.consumed {
                    events.push(InstanceEvent {
                        device: DeviceId(dev),
                        addr: LineAddr(addr),
                        end: InstanceEnd::ConsumedFromCache,
                    });
                }
            }
            if self.is_inclusive_way(snapshot.way) {
                let line = &mut self.llc[set][pos];
                line.consumed = true;
                line.inclusive = true;
                self.touch(set, addr);
            } else if snapshot.io.is_some() || self.migrate_non_io {
                let dst = {
                    let lo = self.geom.llc_ways - self.geom.inclusive_way_count;
                    self.pick_victim_way(set, lo, self.geom.llc_ways - 1)
                };
                self.evict_way(set, dst, &mut evicted, &mut events);
                let pos = self.llc[set].iter().position(|l| l.addr == addr).unwrap();
                let mut line = self.llc[set].remove(pos);
                line.way = dst;
                line.consumed = true;
                line.inclusive = true;
                self.llc[set].insert(0, line);
                migrated = true;
                migration_way = Some(dst);
            } else {
                let pos = self.llc[set].iter().position(|l| l.addr == addr).unwrap();
                self.llc[set].remove(pos);
                dropped = true;
            }
            (
                AccessLevel::LlcHit,
                RefMlcLine {
                    addr,
                    owner: class,
                    io: snapshot.io,
                    dirty: dropped && snapshot.dirty,
                },
            )
        } else {
            let mut io = None;
            if let Some((dev, pending)) = self.mem_io_get(addr) {
                io = Some(dev);
                if pending {
                    events.push(InstanceEvent {
                        device: DeviceId(dev),
                        addr: LineAddr(addr),
                        end: InstanceEnd::ConsumedFromMemory,
                    });
                }
                self.mem_io_remove(addr);
            }
            (
                AccessLevel::Memory,
                RefMlcLine {
                    addr,
                    owner: class,
                    io,
                    dirty: false,
                },
            )
        };

        let mut line = new_line;
        if kind == AccessKind::Write {
            line.dirty = true;
            line.io = None;
            self.cpu_write_strips_io(addr);
        }
        let (filled, bloat) = self.install_mlc(core, line, &mut evicted, &mut events);

        AccessOutcome {
            level,
            migrated_to_inclusive: migrated,
            dropped_from_llc: dropped,
            migration_way,
            llc_way_filled: filled,
            bloat_fill: bloat,
            evicted,
            events,
        }
    }

    fn cpu_write_strips_io(&mut self, addr: u64) {
        if let Some((set, pos)) = self.llc_pos(addr) {
            self.llc[set][pos].io = None;
            self.llc[set][pos].consumed = true;
        }
        self.mem_io_remove(addr);
    }

    fn dma_write(&mut self, device: u16, addr: u64, dca: bool) -> DmaWriteOutcome {
        let mut evicted = Vec::new();
        let mut leak_victims = Vec::new();
        let mut events = Vec::new();

        let kind = if dca {
            if let Some((set, pos)) = self.llc_pos(addr) {
                self.end_pending_as_overwritten(addr, &mut events);
                self.mem_io_remove(addr);
                let line = &mut self.llc[set][pos];
                line.dirty = true;
                line.consumed = false;
                line.io = Some(device);
                line.inclusive = false;
                let way = line.way;
                self.touch(set, addr);
                self.drop_mlc_copies(addr);
                DmaWriteKind::UpdateInPlace { way }
            } else {
                self.end_pending_as_overwritten(addr, &mut events);
                self.mem_io_remove(addr);
                let set = (addr % self.geom.llc_sets as u64) as usize;
                let way = self.pick_victim_way(set, 0, self.geom.dca_way_count - 1);
                if let Some(old) = self.evict_way(set, way, &mut evicted, &mut events) {
                    if old.io.is_some() && !old.consumed {
                        leak_victims.push(InstanceEvent {
                            device: DeviceId(old.io.unwrap()),
                            addr: LineAddr(old.addr),
                            end: InstanceEnd::Leaked,
                        });
                    }
                }
                self.llc[set].insert(
                    0,
                    RefLine {
                        addr,
                        way,
                        owner: (self.masks.len() + device as usize) as u16,
                        io: Some(device),
                        dirty: true,
                        consumed: false,
                        inclusive: false,
                    },
                );
                self.drop_mlc_copies(addr);
                DmaWriteKind::AllocateDca { way }
            }
        } else {
            self.end_pending_as_overwritten(addr, &mut events);
            if let Some((set, pos)) = self.llc_pos(addr) {
                self.llc[set].remove(pos);
            }
            self.drop_mlc_copies(addr);
            self.mem_io_put(addr, device, true);
            DmaWriteKind::MemoryWrite
        };
        DmaWriteOutcome {
            kind,
            evicted,
            leak_victims,
            events,
        }
    }

    fn dma_read(&mut self, addr: u64) -> DmaReadOutcome {
        let mut evicted = Vec::new();
        let mut events = Vec::new();
        let kind = if let Some((set, _)) = self.llc_pos(addr) {
            self.touch(set, addr);
            DmaReadKind::FromLlc
        } else {
            let mset = (addr % self.geom.mlc_sets as u64) as usize;
            let holder = (0..self.geom.core_count)
                .find(|&c| self.mlc[c][mset].iter().any(|l| l.addr == addr));
            if let Some(core) = holder {
                let pos = self.mlc[core][mset]
                    .iter()
                    .position(|l| l.addr == addr)
                    .unwrap();
                let (owner, io, dirty) = {
                    let l = &mut self.mlc[core][mset][pos];
                    let r = (l.owner, l.io, l.dirty);
                    l.dirty = false;
                    r
                };
                let set = (addr % self.geom.llc_sets as u64) as usize;
                let lo = self.geom.llc_ways - self.geom.inclusive_way_count;
                let way = self.pick_victim_way(set, lo, self.geom.llc_ways - 1);
                self.evict_way(set, way, &mut evicted, &mut events);
                self.llc[set].insert(
                    0,
                    RefLine {
                        addr,
                        way,
                        owner,
                        io,
                        dirty,
                        consumed: true,
                        inclusive: true,
                    },
                );
                DmaReadKind::AllocatedInclusive { way }
            } else {
                DmaReadKind::FromMemory
            }
        };
        DmaReadOutcome {
            kind,
            evicted,
            events,
        }
    }

    fn set_mask(&mut self, class: u16, lo: usize, hi: usize) {
        self.masks[class as usize] = (lo, hi);
    }

    fn dump_state(&self) -> String {
        let mut rows: Vec<(usize, usize, String)> = Vec::new();
        for (set, lines) in self.llc.iter().enumerate() {
            for l in lines {
                rows.push((
                    set,
                    l.way,
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        set,
                        l.way,
                        l.addr,
                        if l.inclusive { 'I' } else { 'E' },
                        l.owner,
                        l.io.map(|d| d.to_string()).unwrap_or_default(),
                        l.consumed as u8,
                        l.dirty as u8
                    ),
                ));
            }
        }
        rows.sort();
        rows.into_iter()
            .map(|r| r.2 + "\n")
            .collect::<Vec<_>>()
            .join("")
    }
}

// ──────────────────────────────────────────────────────────────────────
// Trace generation and equivalence
// ──────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub enum TraceOp {
    Cpu {
        core: usize,
        addr: u64,
        write: bool,
        class: u16,
    },
    DmaWrite {
        device: u16,
        addr: u64,
        dca: bool,
    },
    DmaRead {
        device: u16,
        addr: u64,
    },
    SetMask {
        class: u16,
        lo: usize,
        hi: usize,
    },
}

pub fn random_trace(rng: &mut StdRng, geom: &CacheGeometry, len: usize, classes: u16) -> Vec<TraceOp> {
    let addr_space = (geom.llc_sets * geom.llc_ways * 3) as u64;
    let mut ops = Vec::with_capacity(len);
    for _ in 0..len {
        let addr = rng.gen_range(0..addr_space);
        let op = match rng.gen_range(0..100) {
            0..=54 => TraceOp::Cpu {
                core: rng.gen_range(0..geom.core_count),
                addr,
                write: rng.gen_bool(0.3),
                class: rng.gen_range(0..classes),
            },
            55..=84 => TraceOp::DmaWrite {
                device: rng.gen_range(0..2),
                addr,
                dca: rng.gen_bool(0.8),
            },
            85..=94 => TraceOp::DmaRead {
                device: rng.gen_range(0..2),
                addr,
            },
            _ => {
                let lo = rng.gen_range(0..geom.llc_ways);
                let hi = rng.gen_range(lo..geom.llc_ways);
                TraceOp::SetMask {
                    class: rng.gen_range(0..classes),
                    lo,
                    hi,
                }
            }
        };
        ops.push(op);
    }
    ops
}

pub fn run_equivalence(geom: CacheGeometry, migrate_non_io: bool, seed: u64, len: usize) {
    let classes: u16 = 3;
    let mut rng = StdRng::seed_from_u64(seed);
    let trace = random_trace(&mut rng, &geom, len, classes);

    let mut cfg = ModelConfig::new(geom.clone());
    cfg.migrate_non_io = migrate_non_io;
    let mut model = CacheModel::new(cfg, 2, classes as usize).unwrap();
    let mut reference = RefSim::new(geom, migrate_non_io, classes as usize);

    for (i, op) in trace.iter().enumerate() {
        match *op {
            TraceOp::Cpu {
                core,
                addr,
                write,
                class,
            } => {
                let kind = if write {
                    AccessKind::Write
                } else {
                    AccessKind::Read
                };
                let got = model.cpu_access(core, LineAddr(addr), kind, ClassId(class));
                let want = reference.cpu_access(core, addr, kind, class);
                assert_eq!(got, want, "cpu op {i} diverged on seed {seed}: {op:?}");
            }
            TraceOp::DmaWrite { device, addr, dca } => {
                let got = model
                    .dma_write_line(DeviceId(device), LineAddr(addr), dca)
                    .unwrap();
                let want = reference.dma_write(device, addr, dca);
                assert_eq!(got, want, "dma write {i} diverged on seed {seed}: {op:?}");
            }
            TraceOp::DmaRead { device, addr } => {
                let got = model.dma_read_line(DeviceId(device), LineAddr(addr)).unwrap();
                let want = reference.dma_read(addr);
                assert_eq!(got, want, "dma read {i} diverged on seed {seed}: {op:?}");
            }
            TraceOp::SetMask { class, lo, hi } => {
                model
                    .set_way_mask(ClassId(class), WayMask::new(lo, hi))
                    .unwrap();
                reference.set_mask(class, lo, hi);
            }
        }
        model.audit().unwrap_or_else(|e| panic!("audit failed at op {i}, seed {seed}: {e}"));
    }
    assert_eq!(
        model.dump_state(),
        reference.dump_state(),
        "final state diverged on seed {seed}"
    );
}

pub fn oracle_geometry() -> CacheGeometry {
    CacheGeometry {
        llc_sets: 4,
        llc_ways: 4,
        dca_way_count: 1,
        inclusive_way_count: 1,
        mlc_sets: 2,
        mlc_ways: 2,
        core_count: 2,
        ..CacheGeometry::default()
    }
}

pub fn mid_geometry() -> CacheGeometry {
    CacheGeometry {
        llc_sets: 8,
        llc_ways: 6,
        dca_way_count: 2,
        inclusive_way_count: 2,
        mlc_sets: 4,
        mlc_ways: 2,
        core_count: 3,
        ..CacheGeometry::default()
    }
}

