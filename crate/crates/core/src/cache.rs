//! Non-inclusive LLC model with DCA ways and inclusive ways, plus per-core
//! MLCs.
//!
//! Semantics in brief:
//! - Demand fetches fill the MLC only; the LLC is filled by MLC victim fill,
//!   DCA write-allocate, inclusive-way migration, or egress read-allocation.
//! - A line present in both the LLC and any MLC must sit in an inclusive way.
//!   A CPU read of an LLC line in a non-inclusive way therefore migrates the
//!   line into an inclusive way of the same set (or drops it from the LLC for
//!   non-I/O lines when `migrate_non_io` is off).
//! - DMA writes with DCA update in place on an LLC hit and write-allocate
//!   into DCA ways on a miss; without DCA they go to memory and invalidate
//!   cached copies.
//! - Victim selection is per-set LRU with lowest-index invalid-first
//!   tie-break. MLC victim fills are confined to the owner class's way mask;
//!   migration and DCA allocation ignore masks.
//!
//! The model mutates no counters itself; every operation returns a full
//! outcome record (evictions, leak victims, I/O-instance events) that the
//! engine turns into telemetry and the oracle tests compare verbatim.

use std::collections::HashMap;

use crate::error::ConfigError;
use crate::geometry::{CacheGeometry, ClassId, DeviceId, LineAddr, WayMask};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub geometry: CacheGeometry,
    /// When off, non-I/O LLC lines are silently dropped from the LLC on a
    /// CPU read instead of migrating to inclusive ways. I/O lines always
    /// migrate.
    pub migrate_non_io: bool,
}

impl ModelConfig {
    pub fn new(geometry: CacheGeometry) -> Self {
        ModelConfig {
            geometry,
            migrate_non_io: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessLevel {
    MlcHit,
    LlcHit,
    Memory,
}

/// Where an evicted line went. `Llc` marks an MLC victim written into the
/// LLC (victim fill or in-place merge); `Memory` a dirty writeback;
/// `Dropped` a clean line discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictDest {
    Llc,
    Memory,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub addr: LineAddr,
    pub dest: EvictDest,
}

/// How a DMA-written line instance ended. Every instance ends in exactly one
/// of these (or stays pending); the telemetry ledger reconciles the totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceEnd {
    /// First CPU access found the instance in the cache hierarchy.
    ConsumedFromCache,
    /// First CPU access fetched the instance from memory.
    ConsumedFromMemory,
    /// Evicted from the LLC before any CPU access.
    Leaked,
    /// Replaced by a newer DMA write (or a CPU write) before any CPU access.
    Overwritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceEvent {
    pub device: DeviceId,
    pub addr: LineAddr,
    pub end: InstanceEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub level: AccessLevel,
    pub migrated_to_inclusive: bool,
    /// Non-I/O line dropped from the LLC on read (`migrate_non_io` off).
    pub dropped_from_llc: bool,
    /// Way that received the inclusive-way migration, if any.
    pub migration_way: Option<usize>,
    /// Way that received the MLC victim fill (new frames only; in-place
    /// merges into an existing LLC copy do not count).
    pub llc_way_filled: Option<usize>,
    /// The victim fill installed an I/O-origin, already-consumed line
    /// (DMA bloat).
    pub bloat_fill: bool,
    pub evicted: Vec<Eviction>,
    pub events: Vec<InstanceEvent>,
}

impl AccessOutcome {
    fn level(level: AccessLevel) -> Self {
        AccessOutcome {
            level,
            migrated_to_inclusive: false,
            dropped_from_llc: false,
            migration_way: None,
            llc_way_filled: None,
            bloat_fill: false,
            evicted: Vec::new(),
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaWriteKind {
    UpdateInPlace { way: usize },
    AllocateDca { way: usize },
    MemoryWrite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmaWriteOutcome {
    pub kind: DmaWriteKind,
    pub evicted: Vec<Eviction>,
    /// Unconsumed I/O victims displaced by this write-allocation, keyed by
    /// the device whose data leaked. This is the DMA-leak counter feed.
    pub leak_victims: Vec<InstanceEvent>,
    pub events: Vec<InstanceEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaReadKind {
    FromLlc,
    AllocatedInclusive { way: usize },
    FromMemory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmaReadOutcome {
    pub kind: DmaReadKind,
    pub evicted: Vec<Eviction>,
    pub events: Vec<InstanceEvent>,
}

#[derive(Debug, Clone, Copy, Default)]
struct LlcFrame {
    valid: bool,
    addr: LineAddr,
    owner: ClassId,
    io_origin: Option<DeviceId>,
    dirty: bool,
    consumed: bool,
    inclusive: bool,
    stamp: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct MlcFrame {
    valid: bool,
    addr: LineAddr,
    owner: ClassId,
    io_origin: Option<DeviceId>,
    dirty: bool,
    stamp: u64,
}

/// Memory-side record for line addresses whose current contents are I/O
/// data. `pending` marks an instance DMA-written but not yet touched by any
/// CPU core (the non-DCA ingress path).
#[derive(Debug, Clone, Copy)]
struct MemProvenance {
    device: DeviceId,
    pending: bool,
}

pub struct CacheModel {
    cfg: ModelConfig,
    llc: Vec<LlcFrame>,
    mlcs: Vec<Vec<MlcFrame>>,
    masks: Vec<WayMask>,
    device_count: usize,
    stamp: u64,
    provenance: HashMap<u64, MemProvenance>,
}

impl CacheModel {
    pub fn new(
        cfg: ModelConfig,
        device_count: usize,
        class_count: usize,
    ) -> Result<Self, ConfigError> {
        cfg.geometry.validate()?;
        let g = &cfg.geometry;
        let llc = vec![LlcFrame::default(); g.llc_sets * g.llc_ways];
        let mlcs = vec![vec![MlcFrame::default(); g.mlc_sets * g.mlc_ways]; g.core_count];
        let masks = vec![g.full_mask(); class_count];
        Ok(CacheModel {
            cfg,
            llc,
            mlcs,
            masks,
            device_count,
            stamp: 0,
            provenance: HashMap::new(),
        })
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.cfg.geometry
    }

    pub fn mask(&self, class: ClassId) -> WayMask {
        self.masks[class.0 as usize]
    }

    /// Restricts future LLC fills and victim selections on behalf of
    /// `class` to `mask`. Resident lines outside the mask are untouched.
    pub fn set_way_mask(&mut self, class: ClassId, mask: WayMask) -> Result<(), ConfigError> {
        let checked = WayMask::checked(mask.lo, mask.hi, self.cfg.geometry.llc_ways)?;
        let slot = self
            .masks
            .get_mut(class.0 as usize)
            .ok_or_else(|| ConfigError::Scenario(format!("unknown class {}", class.0)))?;
        *slot = checked;
        Ok(())
    }

    fn check_device(&self, device: DeviceId) -> Result<(), ConfigError> {
        if (device.0 as usize) < self.device_count {
            Ok(())
        } else {
            Err(ConfigError::UnknownDevice(format!("#{}", device.0)))
        }
    }

    fn tick_stamp(&mut self) -> u64 {
        self.stamp += 1;
        self.stamp
    }

    fn llc_idx(&self, set: usize, way: usize) -> usize {
        set * self.cfg.geometry.llc_ways + way
    }

    fn mlc_idx(&self, set: usize, way: usize) -> usize {
        set * self.cfg.geometry.mlc_ways + way
    }

    fn find_llc(&self, addr: LineAddr) -> Option<(usize, usize)> {
        let set = addr.llc_set(&self.cfg.geometry);
        for way in 0..self.cfg.geometry.llc_ways {
            let f = &self.llc[self.llc_idx(set, way)];
            if f.valid && f.addr == addr {
                return Some((set, way));
            }
        }
        None
    }

    fn find_mlc(&self, core: usize, addr: LineAddr) -> Option<(usize, usize)> {
        let set = addr.mlc_set(&self.cfg.geometry);
        for way in 0..self.cfg.geometry.mlc_ways {
            let f = &self.mlcs[core][self.mlc_idx(set, way)];
            if f.valid && f.addr == addr {
                return Some((set, way));
            }
        }
        None
    }

    fn addr_in_any_mlc(&self, addr: LineAddr, skip_core: Option<usize>) -> bool {
        (0..self.cfg.geometry.core_count)
            .filter(|&c| Some(c) != skip_core)
            .any(|c| self.find_mlc(c, addr).is_some())
    }

    /// Invalid frame with the lowest index if any, else LRU, within
    /// `allowed`.
    pub fn select_victim(&self, set: usize, allowed: WayMask) -> usize {
        let mut lru_way = allowed.lo;
        let mut lru_stamp = u64::MAX;
        for way in allowed.iter() {
            let f = &self.llc[self.llc_idx(set, way)];
            if !f.valid {
                return way;
            }
            if f.stamp < lru_stamp {
                lru_stamp = f.stamp;
                lru_way = way;
            }
        }
        lru_way
    }

    fn select_mlc_victim(&self, core: usize, set: usize) -> usize {
        let mut lru_way = 0;
        let mut lru_stamp = u64::MAX;
        for way in 0..self.cfg.geometry.mlc_ways {
            let f = &self.mlcs[core][self.mlc_idx(set, way)];
            if !f.valid {
                return way;
            }
            if f.stamp < lru_stamp {
                lru_stamp = f.stamp;
                lru_way = way;
            }
        }
        lru_way
    }

    /// Invalidates an LLC frame, recording the eviction and, when the frame
    /// held an unconsumed I/O instance, the leak event. Memory keeps I/O
    /// provenance for the address so later demand fetches stay flagged.
    fn evict_llc_frame(
        &mut self,
        set: usize,
        way: usize,
        evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) {
        let idx = self.llc_idx(set, way);
        let f = self.llc[idx];
        debug_assert!(f.valid);
        let dest = if f.dirty {
            EvictDest::Memory
        } else {
            EvictDest::Dropped
        };
        evicted.push(Eviction { addr: f.addr, dest });
        if let Some(dev) = f.io_origin {
            if !f.consumed {
                events.push(InstanceEvent {
                    device: dev,
                    addr: f.addr,
                    end: InstanceEnd::Leaked,
                });
            }
            self.provenance.insert(
                f.addr.0,
                MemProvenance {
                    device: dev,
                    pending: false,
                },
            );
        }
        self.llc[idx].valid = false;
    }

    /// Ends any pending instance currently held for `addr` (cached frame or
    /// memory-side record) as overwritten, without touching frame validity.
    fn overwrite_pending(&mut self, addr: LineAddr, events: &mut Vec<InstanceEvent>) {
        if let Some((set, way)) = self.find_llc(addr) {
            let idx = self.llc_idx(set, way);
            let f = &mut self.llc[idx];
            if let Some(dev) = f.io_origin {
                if !f.consumed {
                    f.consumed = true;
                    events.push(InstanceEvent {
                        device: dev,
                        addr,
                        end: InstanceEnd::Overwritten,
                    });
                }
            }
        }
        if let Some(p) = self.provenance.get(&addr.0) {
            if p.pending {
                let device = p.device;
                self.provenance.remove(&addr.0);
                events.push(InstanceEvent {
                    device,
                    addr,
                    end: InstanceEnd::Overwritten,
                });
            }
        }
    }

    fn invalidate_mlc_copies(&mut self, addr: LineAddr) {
        let set = addr.mlc_set(&self.cfg.geometry);
        for core in 0..self.cfg.geometry.core_count {
            for way in 0..self.cfg.geometry.mlc_ways {
                let idx = self.mlc_idx(set, way);
                let f = &mut self.mlcs[core][idx];
                if f.valid && f.addr == addr {
                    f.valid = false;
                }
            }
        }
    }

    /// Installs `line` into `core`'s MLC, evicting a victim if needed. The
    /// victim is written into the LLC within its owner's way mask (victim
    /// fill), unless another MLC still holds it.
    fn install_mlc(
        &mut self,
        core: usize,
        line: MlcFrame,
        outcome_evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) -> (Option<usize>, bool) {
        let set = line.addr.mlc_set(&self.cfg.geometry);
        let way = self.select_mlc_victim(core, set);
        let idx = self.mlc_idx(set, way);
        let victim = self.mlcs[core][idx];
        let mut filled_way = None;
        let mut bloat = false;
        if victim.valid {
            let r = self.victim_fill(core, victim, outcome_evicted, events);
            filled_way = r.0;
            bloat = r.1;
        }
        self.mlcs[core][idx] = line;
        (filled_way, bloat)
    }

    /// Handles an MLC eviction: merge into an existing LLC copy, drop if
    /// another MLC still holds the line, else fill a frame within the
    /// owner's mask.
    fn victim_fill(
        &mut self,
        from_core: usize,
        victim: MlcFrame,
        evicted: &mut Vec<Eviction>,
        events: &mut Vec<InstanceEvent>,
    ) -> (Option<usize>, bool) {
        let stamp = self.tick_stamp();
        if let Some((set, way)) = self.find_llc(victim.addr) {
            // Already LLC-resident, which the inclusive-residency invariant
            // pins to an inclusive way. Merge dirtiness and recency.
            debug_assert!(self.cfg.geometry.is_inclusive_way(way));
            let still_shared = self.addr_in_any_mlc(victim.addr, Some(from_core));
            let idx = self.llc_idx(set, way);
            let f = &mut self.llc[idx];
            f.dirty |= victim.dirty;
            f.stamp = stamp;
            if !still_shared {
                f.inclusive = false;
            }
            evicted.push(Eviction {
                addr: victim.addr,
                dest: EvictDest::Llc,
            });
            return (None, false);
        }
        if self.addr_in_any_mlc(victim.addr, Some(from_core)) {
            // Another core still holds the line; no victim fill. A dirty
            // copy goes straight to memory.
            let dest = if victim.dirty {
                EvictDest::Memory
            } else {
                EvictDest::Dropped
            };
            if victim.io_origin.is_some() && victim.dirty {
                self.provenance.insert(
                    victim.addr.0,
                    MemProvenance {
                        device: victim.io_origin.unwrap(),
                        pending: false,
                    },
                );
            }
            evicted.push(Eviction {
                addr: victim.addr,
                dest,
            });
            return (None, false);
        }
        let set = victim.addr.llc_set(&self.cfg.geometry);
        let mask = self.masks[victim.owner.0 as usize];
        let way = self.select_victim(set, mask);
        let idx = self.llc_idx(set, way);
        if self.llc[idx].valid {
            self.evict_llc_frame(set, way, evicted, events);
        }
        self.llc[idx] = LlcFrame {
            valid: true,
            addr: victim.addr,
            owner: victim.owner,
            io_origin: victim.io_origin,
            dirty: victim.dirty,
            consumed: true,
            inclusive: false,
            stamp,
        };
        evicted.push(Eviction {
            addr: victim.addr,
            dest: EvictDest::Llc,
        });
        (Some(way), victim.io_origin.is_some())
    }

    /// CPU demand access.
    pub fn cpu_access(
        &mut self,
        core: usize,
        addr: LineAddr,
        kind: AccessKind,
        class: ClassId,
    ) -> AccessOutcome {
        debug_assert!(core < self.cfg.geometry.core_count);
        let stamp = self.tick_stamp();

        // MLC hit: recency, dirty on write. A CPU write repurposes the line
        // as non-I/O data.
        if let Some((set, way)) = self.find_mlc(core, addr) {
            let idx = self.mlc_idx(set, way);
            let f = &mut self.mlcs[core][idx];
            f.stamp = stamp;
            if kind == AccessKind::Write {
                f.dirty = true;
                f.io_origin = None;
                self.clear_io_identity(addr);
            }
            return AccessOutcome::level(AccessLevel::MlcHit);
        }

        let mut out = AccessOutcome::level(AccessLevel::Memory);

        let mlc_line = if let Some((set, way)) = self.find_llc(addr) {
            out.level = AccessLevel::LlcHit;
            let idx = self.llc_idx(set, way);
            let frame = self.llc[idx];

            // First CPU touch of a DMA-written instance consumes it.
            if let Some(dev) = frame.io_origin {
                if !frame.consumed {
                    out.events.push(InstanceEvent {
                        device: dev,
                        addr,
                        end: InstanceEnd::ConsumedFromCache,
                    });
                }
            }

            if self.cfg.geometry.is_inclusive_way(way) {
                let f = &mut self.llc[idx];
                f.stamp = stamp;
                f.consumed = true;
                f.inclusive = true;
            } else if frame.io_origin.is_some() || self.cfg.migrate_non_io {
                // Migrate into an inclusive way of the same set. Migration
                // is a hardware mechanism and ignores class masks.
                let incl = self.cfg.geometry.inclusive_ways();
                let dst = self.select_victim(set, incl);
                let dst_idx = self.llc_idx(set, dst);
                if self.llc[dst_idx].valid {
                    self.evict_llc_frame(set, dst, &mut out.evicted, &mut out.events);
                }
                self.llc[idx].valid = false;
                self.llc[dst_idx] = LlcFrame {
                    consumed: true,
                    inclusive: true,
                    stamp,
                    ..frame
                };
                out.migrated_to_inclusive = true;
                out.migration_way = Some(dst);
            } else {
                // migrate_non_io off: the LLC copy moves to the MLC.
                self.llc[idx].valid = false;
                out.dropped_from_llc = true;
            }

            MlcFrame {
                valid: true,
                addr,
                owner: class,
                io_origin: frame.io_origin,
                // Dirtiness stays with the LLC copy when one remains; a
                // dropped line carries it into the MLC.
                dirty: out.dropped_from_llc && frame.dirty,
                stamp,
            }
        } else {
            // Demand fetch from memory fills the MLC only.
            let mut io_origin = None;
            if let Some(p) = self.provenance.get(&addr.0).copied() {
                io_origin = Some(p.device);
                if p.pending {
                    out.events.push(InstanceEvent {
                        device: p.device,
                        addr,
                        end: InstanceEnd::ConsumedFromMemory,
                    });
                }
                self.provenance.remove(&addr.0);
            }
            MlcFrame {
                valid: true,
                addr,
                owner: class,
                io_origin,
                dirty: false,
                stamp,
            }
        };

        let mut line = mlc_line;
        if kind == AccessKind::Write {
            line.dirty = true;
            line.io_origin = None;
            self.clear_io_identity(addr);
        }
        let (filled, bloat) = self.install_mlc(core, line, &mut out.evicted, &mut out.events);
        out.llc_way_filled = filled;
        out.bloat_fill = bloat;

        #[cfg(debug_assertions)]
        self.debug_check_addr(addr);
        out
    }

    /// A CPU write replaces I/O data with CPU data: drop the I/O identity
    /// from any LLC copy and from memory-side provenance.
    fn clear_io_identity(&mut self, addr: LineAddr) {
        if let Some((set, way)) = self.find_llc(addr) {
            let idx = self.llc_idx(set, way);
            let f = &mut self.llc[idx];
            f.io_origin = None;
            f.consumed = true;
        }
        self.provenance.remove(&addr.0);
    }

    /// Ingress DMA write of one line.
    pub fn dma_write_line(
        &mut self,
        device: DeviceId,
        addr: LineAddr,
        dca_enabled: bool,
    ) -> Result<DmaWriteOutcome, ConfigError> {
        self.check_device(device)?;
        let stamp = self.tick_stamp();
        let mut evicted = Vec::new();
        let mut leak_victims = Vec::new();
        let mut events = Vec::new();

        let kind = if dca_enabled {
            if let Some((set, way)) = self.find_llc(addr) {
                // In-place update wherever the line lives, including
                // standard and inclusive ways.
                self.overwrite_pending(addr, &mut events);
                self.provenance.remove(&addr.0);
                let idx = self.llc_idx(set, way);
            let f = &mut self.llc[idx];
                f.dirty = true;
                f.consumed = false;
                f.io_origin = Some(device);
                f.stamp = stamp;
                f.inclusive = false;
                self.invalidate_mlc_copies(addr);
                DmaWriteKind::UpdateInPlace { way }
            } else {
                self.overwrite_pending(addr, &mut events);
                self.provenance.remove(&addr.0);
                let set = addr.llc_set(&self.cfg.geometry);
                let way = self.select_victim(set, self.cfg.geometry.dca_ways());
                let idx = self.llc_idx(set, way);
                if self.llc[idx].valid {
                    let victim = self.llc[idx];
                    let was_pending = victim.io_origin.is_some() && !victim.consumed;
                    self.evict_llc_frame(set, way, &mut evicted, &mut events);
                    if was_pending {
                        leak_victims.push(InstanceEvent {
                            device: victim.io_origin.unwrap(),
                            addr: victim.addr,
                            end: InstanceEnd::Leaked,
                        });
                    }
                }
                self.llc[idx] = LlcFrame {
                    valid: true,
                    addr,
                    owner: self.device_owner_class(device),
                    io_origin: Some(device),
                    dirty: true,
                    consumed: false,
                    inclusive: false,
                    stamp,
                };
                self.invalidate_mlc_copies(addr);
                DmaWriteKind::AllocateDca { way }
            }
        } else {
            // Non-DCA path: data lands in memory; cached copies become
            // stale and are invalidated without writeback.
            self.overwrite_pending(addr, &mut events);
            if let Some((set, way)) = self.find_llc(addr) {
                let idx = self.llc_idx(set, way);
                self.llc[idx].valid = false;
            }
            self.invalidate_mlc_copies(addr);
            self.provenance.insert(
                addr.0,
                MemProvenance {
                    device,
                    pending: true,
                },
            );
            DmaWriteKind::MemoryWrite
        };

        #[cfg(debug_assertions)]
        self.debug_check_addr(addr);
        Ok(DmaWriteOutcome {
            kind,
            evicted,
            leak_victims,
            events,
        })
    }

    /// Egress DMA read of one line.
    pub fn dma_read_line(
        &mut self,
        device: DeviceId,
        addr: LineAddr,
    ) -> Result<DmaReadOutcome, ConfigError> {
        self.check_device(device)?;
        let stamp = self.tick_stamp();
        let mut evicted = Vec::new();
        let mut events = Vec::new();

        let kind = if let Some((set, way)) = self.find_llc(addr) {
            let idx = self.llc_idx(set, way);
            self.llc[idx].stamp = stamp;
            DmaReadKind::FromLlc
        } else if let Some(core) = (0..self.cfg.geometry.core_count)
            .find(|&c| self.find_mlc(c, addr).is_some())
        {
            // MLC-only lines are read-allocated into an inclusive way; the
            // MLC copy stays and ownership of dirtiness moves to the LLC.
            let (mset, mway) = self.find_mlc(core, addr).unwrap();
            let midx = self.mlc_idx(mset, mway);
            let mlc = self.mlcs[core][midx];
            self.mlcs[core][midx].dirty = false;
            let set = addr.llc_set(&self.cfg.geometry);
            let way = self.select_victim(set, self.cfg.geometry.inclusive_ways());
            let idx = self.llc_idx(set, way);
            if self.llc[idx].valid {
                self.evict_llc_frame(set, way, &mut evicted, &mut events);
            }
            self.llc[idx] = LlcFrame {
                valid: true,
                addr,
                owner: mlc.owner,
                io_origin: mlc.io_origin,
                dirty: mlc.dirty,
                consumed: true,
                inclusive: true,
                stamp,
            };
            DmaReadKind::AllocatedInclusive { way }
        } else {
            DmaReadKind::FromMemory
        };

        #[cfg(debug_assertions)]
        self.debug_check_addr(addr);
        Ok(DmaReadOutcome {
            kind,
            evicted,
            events,
        })
    }

    /// DMA-allocated frames are owned by a per-device class so the state
    /// dump can attribute them; the id lives past the workload classes.
    fn device_owner_class(&self, device: DeviceId) -> ClassId {
        ClassId((self.masks.len() + device.0 as usize) as u16)
    }

    pub fn llc_contains(&self, addr: LineAddr) -> Option<(usize, usize)> {
        self.find_llc(addr)
    }

    pub fn mlc_contains(&self, core: usize, addr: LineAddr) -> bool {
        self.find_mlc(core, addr).is_some()
    }

    /// Count of addresses with a pending (unconsumed) DMA-written instance,
    /// cached or memory-resident. Used by reconciliation checks.
    pub fn pending_instances(&self) -> u64 {
        let cached = self
            .llc
            .iter()
            .filter(|f| f.valid && f.io_origin.is_some() && !f.consumed)
            .count() as u64;
        let mem = self.provenance.values().filter(|p| p.pending).count() as u64;
        cached + mem
    }

    /// One line per resident LLC line:
    /// `set,way,addr,state,owner,io_origin,consumed,dirty` with state E or I
    /// and an empty io_origin field for non-I/O lines.
    pub fn dump_state(&self) -> String {
        let g = &self.cfg.geometry;
        let mut out = String::new();
        for set in 0..g.llc_sets {
            for way in 0..g.llc_ways {
                let f = &self.llc[self.llc_idx(set, way)];
                if !f.valid {
                    continue;
                }
                let state = if f.inclusive { 'I' } else { 'E' };
                let io = f
                    .io_origin
                    .map(|d| d.0.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    set,
                    way,
                    f.addr.0,
                    state,
                    f.owner.0,
                    io,
                    f.consumed as u8,
                    f.dirty as u8
                ));
            }
        }
        out
    }

    #[cfg(debug_assertions)]
    fn debug_check_addr(&self, addr: LineAddr) {
        if let Some((_, way)) = self.find_llc(addr) {
            let in_mlc = self.addr_in_any_mlc(addr, None);
            if in_mlc {
                assert!(
                    self.cfg.geometry.is_inclusive_way(way),
                    "addr {} in LLC way {} and an MLC but way is not inclusive",
                    addr.0,
                    way
                );
            }
        }
    }

    /// Full structural audit of all model invariants. O(model); meant for
    /// oracle tests and per-tick debug checks, not per-access use.
    pub fn audit(&self) -> Result<(), String> {
        let g = &self.cfg.geometry;
        for set in 0..g.llc_sets {
            let mut seen = Vec::new();
            for way in 0..g.llc_ways {
                let f = &self.llc[self.llc_idx(set, way)];
                if !f.valid {
                    continue;
                }
                if f.addr.llc_set(g) != set {
                    return Err(format!("addr {} stored in wrong set {}", f.addr.0, set));
                }
                if seen.contains(&f.addr) {
                    return Err(format!("addr {} duplicated in LLC set {}", f.addr.0, set));
                }
                seen.push(f.addr);
                if f.inclusive && !g.is_inclusive_way(way) {
                    return Err(format!(
                        "inclusive-state addr {} in non-inclusive way {}",
                        f.addr.0, way
                    ));
                }
                let in_mlc = self.addr_in_any_mlc(f.addr, None);
                if in_mlc && !g.is_inclusive_way(way) {
                    return Err(format!(
                        "addr {} in LLC way {} and an MLC (inclusive-residency violation)",
                        f.addr.0, way
                    ));
                }
                if in_mlc && !f.inclusive {
                    return Err(format!(
                        "addr {} shared with an MLC but LLC state is exclusive",
                        f.addr.0
                    ));
                }
                if f.io_origin.is_some() && !f.consumed {
                    if let Some(p) = self.provenance.get(&f.addr.0) {
                        if p.pending {
                            return Err(format!(
                                "addr {} pending both in cache and memory",
                                f.addr.0
                            ));
                        }
                    }
                }
            }
        }
        for (addr, p) in &self.provenance {
            if p.pending {
                let a = LineAddr(*addr);
                if self.find_llc(a).is_some() || self.addr_in_any_mlc(a, None) {
                    return Err(format!("memory-pending addr {addr} is cached"));
                }
            }
        }
        for core in 0..g.core_count {
            for set in 0..g.mlc_sets {
                let mut seen = Vec::new();
                for way in 0..g.mlc_ways {
                    let f = &self.mlcs[core][self.mlc_idx(set, way)];
                    if !f.valid {
                        continue;
                    }
                    if f.addr.mlc_set(g) != set {
                        return Err(format!(
                            "MLC addr {} stored in wrong set {set}",
                            f.addr.0
                        ));
                    }
                    if seen.contains(&f.addr) {
                        return Err(format!(
                            "addr {} duplicated in core {core} MLC set {set}",
                            f.addr.0
                        ));
                    }
                    seen.push(f.addr);
                }
            }
        }
        Ok(())
    }
}
