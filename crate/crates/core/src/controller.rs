//! Runtime LLC-management state machine.
//!
//! A pure (state, snapshot) -> (state, actions) controller. It never touches
//! the cache model; the engine applies the emitted mask and DCA actions at
//! tick boundaries.
//!
//! Behavior:
//! - Priority zones: HP Zone shared by high-priority workloads, LP Zone for
//!   low-priority ones, and a DCA Zone reserved for I/O HPWs whenever one is
//!   active. From the initial partitions the LP Zone expands leftward one
//!   way at a time while HPW hit rates hold.
//! - Storage antagonists: a storage workload leaking DMA writes heavily
//!   while missing in the LLC and dominating DMA traffic gets its device's
//!   DCA disabled and is demoted to the LP Zone.
//! - Non-I/O antagonists: workloads missing in both MLC and LLC above the
//!   antagonist threshold are demoted and, together with I/O antagonists,
//!   confined to trash ways that shrink toward the rightmost standard way.
//! - Phase changes: metric fluctuations against detection-time or baseline
//!   values restore demoted workloads or trigger a full re-search; after
//!   `stable_interval` quiet ticks the controller probes the initial
//!   allocation for one `revert_interval` to estimate attainable hit rates.

use crate::geometry::{CacheGeometry, DeviceId, WayMask};
use crate::telemetry::{Rate, RateSnapshot};
use crate::workload::Priority;

/// Detection and timing parameters. Fractions are relative thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// T1: tolerated relative drop in an HPW's LLC hit rate.
    pub hpw_llc_hit_thr: f64,
    /// T2: DCA miss (leak) rate above which DMA leak is significant.
    pub dmalk_dca_ms_thr: f64,
    /// T3: storage share of DMA write traffic implicating storage I/O.
    pub dmalk_io_tp_thr: f64,
    /// T4: LLC miss rate above which a storage workload is not caching.
    pub dmalk_llc_ms_thr: f64,
    /// T5: MLC/LLC miss rate marking a non-I/O antagonist.
    pub ant_cache_miss_thr: f64,
    /// Relative fluctuation treated as instability.
    pub instability_thr: f64,
    /// Quiet ticks in stable phase before a revert probe.
    pub stable_interval: u64,
    /// Ticks spent on the revert probe.
    pub revert_interval: u64,
    /// Minimum ticks between zone boundary moves.
    pub expand_period: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            hpw_llc_hit_thr: 0.20,
            dmalk_dca_ms_thr: 0.40,
            dmalk_io_tp_thr: 0.35,
            dmalk_llc_ms_thr: 0.40,
            ant_cache_miss_thr: 0.90,
            instability_thr: 0.10,
            stable_interval: 10,
            revert_interval: 1,
            expand_period: 2,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("hpw_llc_hit_thr", self.hpw_llc_hit_thr),
            ("dmalk_dca_ms_thr", self.dmalk_dca_ms_thr),
            ("dmalk_io_tp_thr", self.dmalk_io_tp_thr),
            ("dmalk_llc_ms_thr", self.dmalk_llc_ms_thr),
            ("ant_cache_miss_thr", self.ant_cache_miss_thr),
            ("instability_thr", self.instability_thr),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must be in (0,1], got {v}"));
            }
        }
        for (name, v) in [
            ("stable_interval", self.stable_interval),
            ("revert_interval", self.revert_interval),
            ("expand_period", self.expand_period),
        ] {
            if v == 0 {
                return Err(format!("{name} must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Storage antagonist test: all three conditions must hold strictly.
pub fn detect_storage_antagonist(
    dca_leak_rate: f64,
    workload_llc_miss_rate: f64,
    storage_write_share: f64,
    t: &Thresholds,
) -> bool {
    dca_leak_rate > t.dmalk_dca_ms_thr
        && workload_llc_miss_rate > t.dmalk_llc_ms_thr
        && storage_write_share > t.dmalk_io_tp_thr
}

/// Non-I/O antagonist test: both miss rates above the threshold.
pub fn detect_non_io_antagonist(mlc_miss_rate: f64, llc_miss_rate: f64, t: &Thresholds) -> bool {
    mlc_miss_rate > t.ant_cache_miss_thr && llc_miss_rate > t.ant_cache_miss_thr
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Searching,
    Stable,
    Reverted,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Searching => write!(f, "searching"),
            Phase::Stable => write!(f, "stable"),
            Phase::Reverted => write!(f, "reverted"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Antagonist {
    None,
    StorageIo,
    NonIo,
}

impl std::fmt::Display for Antagonist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Antagonist::None => write!(f, "none"),
            Antagonist::StorageIo => write!(f, "storage_io"),
            Antagonist::NonIo => write!(f, "non_io"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zones {
    pub dca_zone: Option<WayMask>,
    pub hp_zone: WayMask,
    pub lp_zone: Option<WayMask>,
    pub trash_ways: Option<WayMask>,
}

impl Zones {
    /// Structural invariants: contiguity is inherent to WayMask; check the
    /// zone relationships.
    pub fn validate(&self, geom: &CacheGeometry) -> Result<(), String> {
        if let (Some(dca), Some(lp)) = (&self.dca_zone, &self.lp_zone) {
            if lp.overlaps(dca) {
                return Err(format!("lp_zone {lp} overlaps DCA zone {dca}"));
            }
            if lp.overlaps(&geom.inclusive_ways()) {
                return Err(format!("lp_zone {lp} overlaps inclusive ways"));
            }
        }
        if self.dca_zone.is_some() {
            let incl = geom.inclusive_ways();
            if !(self.hp_zone.lo <= incl.lo && self.hp_zone.hi >= incl.hi) {
                return Err("hp_zone must include inclusive ways".into());
            }
        }
        if let Some(trash) = &self.trash_ways {
            let anchor = geom.standard_ways().hi;
            if !trash.contains(anchor) {
                return Err(format!("trash {trash} misses rightmost standard way {anchor}"));
            }
            if let Some(lp) = &self.lp_zone {
                if trash.lo < lp.lo || trash.hi > lp.hi {
                    return Err(format!("trash {trash} outside lp_zone {lp}"));
                }
            } else {
                return Err("trash ways without an LP zone".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Net,
    Storage,
    Mem,
}

/// Controller-side registry entry for one workload.
#[derive(Debug, Clone)]
pub struct WorkloadState {
    pub widx: usize,
    pub name: String,
    pub kind: ControllerKind,
    pub device: Option<DeviceId>,
    pub declared: Priority,
    pub effective: Priority,
    pub antagonist: Antagonist,
    pub active: bool,
    /// LLC hit rate recorded at the initial partitions.
    pub baseline_hit_rate: Option<f64>,
    /// LLC miss rate at non-I/O antagonist detection.
    pub detect_llc_miss: Option<f64>,
    /// I/O throughput at storage antagonist detection.
    pub detect_io_throughput: Option<f64>,
}

impl WorkloadState {
    fn is_io(&self) -> bool {
        self.kind != ControllerKind::Mem
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Policies {
    /// Extension: allocate non-I/O HPWs to all ways except DCA ways.
    pub exclude_dca_for_nonio_hpw: bool,
    /// Extension: confine DMA-bloating network workloads to trash ways.
    pub net_bloat_to_trash: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SetMask { widx: usize, mask: WayMask },
    SetDca { device: DeviceId, enabled: bool },
}

/// One `tick,action,target,detail` decision-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub tick: u64,
    pub action: String,
    pub target: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
struct ExpandCheck {
    /// HPW hit rates just before the boundary move.
    pre: Vec<Option<f64>>,
    /// Post-move snapshots seen (keeps the last two).
    post: Vec<Vec<Option<f64>>>,
    waited: u64,
}

#[derive(Debug, Clone)]
struct ShrinkCheck {
    pre_ant_llc_miss: Vec<(usize, f64)>,
    pre_ant_io_tp: Vec<(usize, f64)>,
    pre_mem_bw: u64,
}

#[derive(Debug, Clone)]
struct RevertProbe {
    saved_masks: Vec<(usize, WayMask)>,
    pre_rates: Vec<Option<f64>>,
}

pub struct Controller {
    geom: CacheGeometry,
    thresholds: Thresholds,
    policies: Policies,
    pub phase: Phase,
    ticks_in_phase: u64,
    pub zones: Zones,
    pub workloads: Vec<WorkloadState>,
    device_dca: Vec<bool>,
    current_masks: Vec<Option<WayMask>>,
    baseline_pending: bool,
    expand_check: Option<ExpandCheck>,
    ticks_since_move: u64,
    expansion_finished: bool,
    shrink_check: Option<ShrinkCheck>,
    shrink_stopped: bool,
    revert_probe: Option<RevertProbe>,
    log: Vec<LogEntry>,
}

/// Workload description the engine hands the controller at startup.
#[derive(Debug, Clone)]
pub struct WorkloadInfo {
    pub name: String,
    pub kind: ControllerKind,
    pub device: Option<DeviceId>,
    pub priority: Priority,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadEvent {
    Launch,
    Terminate,
}

impl Controller {
    pub fn new(
        geom: CacheGeometry,
        thresholds: Thresholds,
        policies: Policies,
        workloads: &[WorkloadInfo],
        device_dca: Vec<bool>,
    ) -> Self {
        let states = workloads
            .iter()
            .enumerate()
            .map(|(i, w)| WorkloadState {
                widx: i,
                name: w.name.clone(),
                kind: w.kind,
                device: w.device,
                declared: w.priority,
                effective: w.priority,
                antagonist: Antagonist::None,
                active: w.active,
                baseline_hit_rate: None,
                detect_llc_miss: None,
                detect_io_throughput: None,
            })
            .collect::<Vec<_>>();
        let count = states.len();
        let mut c = Controller {
            zones: Zones {
                dca_zone: None,
                hp_zone: geom.full_mask(),
                lp_zone: None,
                trash_ways: None,
            },
            geom,
            thresholds,
            policies,
            phase: Phase::Searching,
            ticks_in_phase: 0,
            workloads: states,
            device_dca,
            current_masks: vec![None; count],
            baseline_pending: true,
            expand_check: None,
            ticks_since_move: 0,
            expansion_finished: false,
            shrink_check: None,
            shrink_stopped: false,
            revert_probe: None,
            log: Vec::new(),
        };
        c.recompute_initial_partitions(0);
        c
    }

    pub fn take_log(&mut self) -> Vec<LogEntry> {
        std::mem::take(&mut self.log)
    }

    fn log(&mut self, tick: u64, action: &str, target: &str, detail: String) {
        self.log.push(LogEntry {
            tick,
            action: action.to_string(),
            target: target.to_string(),
            detail,
        });
    }

    /// Initial partitions for the current workload mix.
    fn initial_zones(&self) -> Zones {
        let g = &self.geom;
        let io_hpw_active = self
            .workloads
            .iter()
            .any(|w| w.active && w.is_io() && w.effective == Priority::High);
        let any_lpw = self
            .workloads
            .iter()
            .any(|w| w.active && w.effective == Priority::Low);
        if io_hpw_active {
            let std = g.standard_ways();
            let lp_lo = if std.width() >= 2 { std.hi - 1 } else { std.lo };
            Zones {
                dca_zone: Some(g.dca_ways()),
                hp_zone: WayMask::new(g.dca_way_count, g.llc_ways - 1),
                lp_zone: any_lpw.then(|| WayMask::new(lp_lo, std.hi)),
                trash_ways: None,
            }
        } else {
            Zones {
                dca_zone: None,
                hp_zone: g.full_mask(),
                lp_zone: any_lpw.then(|| WayMask::new(g.llc_ways - 2, g.llc_ways - 1)),
                trash_ways: None,
            }
        }
    }

    /// Mask for one workload under the current zones.
    fn mask_for(&self, w: &WorkloadState) -> WayMask {
        if w.antagonist != Antagonist::None {
            if let Some(trash) = self.zones.trash_ways {
                return trash;
            }
        }
        if w.effective == Priority::Low {
            if let Some(lp) = self.zones.lp_zone {
                return lp;
            }
        }
        // High priority (or a low-priority workload with no LP zone, which
        // cannot happen once zones are recomputed): widest legal mask.
        if w.is_io() {
            if let Some(dca) = self.zones.dca_zone {
                return WayMask::new(dca.lo, self.zones.hp_zone.hi);
            }
        } else if self.policies.exclude_dca_for_nonio_hpw {
            return WayMask::new(self.geom.dca_way_count, self.zones.hp_zone.hi);
        }
        self.zones.hp_zone
    }

    /// Emits SetMask actions for every active workload whose assignment
    /// changed.
    fn emit_masks(&mut self, tick: u64, out: &mut Vec<Action>) {
        for i in 0..self.workloads.len() {
            if !self.workloads[i].active {
                continue;
            }
            let mask = self.mask_for(&self.workloads[i]);
            if self.current_masks[i] != Some(mask) {
                self.current_masks[i] = Some(mask);
                out.push(Action::SetMask { widx: i, mask });
                let name = self.workloads[i].name.clone();
                self.log(tick, "set_mask", &name, format!("{mask}"));
            }
        }
    }

    /// Recomputes initial partitions, restarts the search, and re-records
    /// baselines: the response to workload events and phase changes.
    fn recompute_initial_partitions(&mut self, tick: u64) {
        let mut zones = self.initial_zones();
        let has_antagonist = self
            .workloads
            .iter()
            .any(|w| w.active && w.antagonist != Antagonist::None);
        if has_antagonist {
            if let Some(t) = Self::trash_for(&self.geom, &mut zones) {
                zones.trash_ways = Some(t);
            }
        }
        self.zones = zones;
        self.phase = Phase::Searching;
        self.ticks_in_phase = 0;
        self.expand_check = None;
        self.ticks_since_move = 0;
        self.expansion_finished = false;
        self.shrink_check = None;
        self.shrink_stopped = false;
        self.revert_probe = None;
        self.baseline_pending = true;
        self.log(tick, "partition", "zones", format!("{:?}", self.zones_summary()));
    }

    fn zones_summary(&self) -> String {
        format!(
            "dca={:?} hp={} lp={:?} trash={:?}",
            self.zones.dca_zone.map(|m| m.to_string()),
            self.zones.hp_zone,
            self.zones.lp_zone.map(|m| m.to_string()),
            self.zones.trash_ways.map(|m| m.to_string())
        )
    }

    /// Initial trash mask: the LP Zone's standard-way span. Extends the LP
    /// Zone to reach the rightmost standard way when it sits entirely in
    /// inclusive ways (the no-I/O initial partitions).
    fn trash_for(geom: &CacheGeometry, zones: &mut Zones) -> Option<WayMask> {
        let std = geom.standard_ways();
        let lp = zones.lp_zone?;
        if lp.hi < std.lo {
            return None;
        }
        if lp.lo > std.hi {
            // LP zone sits right of the standard ways; pull it left.
            let nl = WayMask::new(std.hi, lp.hi);
            zones.lp_zone = Some(nl);
            return Some(WayMask::new(std.hi, std.hi));
        }
        Some(WayMask::new(lp.lo.max(std.lo), std.hi))
    }

    pub fn on_workload_event(
        &mut self,
        tick: u64,
        widx: usize,
        event: WorkloadEvent,
    ) -> Vec<Action> {
        match event {
            WorkloadEvent::Launch => self.workloads[widx].active = true,
            WorkloadEvent::Terminate => self.workloads[widx].active = false,
        }
        let name = self.workloads[widx].name.clone();
        self.log(tick, "workload_event", &name, format!("{event:?}"));
        self.recompute_initial_partitions(tick);
        let mut out = Vec::new();
        self.emit_masks(tick, &mut out);
        out
    }

    /// Initial mask assignment at run start.
    pub fn initial_actions(&mut self) -> Vec<Action> {
        let mut out = Vec::new();
        self.emit_masks(0, &mut out);
        out
    }

    fn hpw_hit_rates(&self, snap: &RateSnapshot) -> Vec<Option<f64>> {
        self.workloads
            .iter()
            .map(|w| {
                if w.active && w.effective == Priority::High {
                    rate_opt(&snap.workloads[w.widx].llc_hit_rate)
                } else {
                    None
                }
            })
            .collect()
    }

    fn rates_stable(&self, a: &[Option<f64>], b: &[Option<f64>]) -> bool {
        a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => {
                let base = x.max(*y).max(1e-9);
                (x - y).abs() <= self.thresholds.instability_thr * base
            }
            _ => true,
        })
    }

    /// Main per-tick entry point. `snap` covers exactly the tick that just
    /// ran; actions apply before the next tick's epochs.
    pub fn tick(&mut self, tick: u64, snap: &RateSnapshot) -> Vec<Action> {
        let mut out = Vec::new();
        self.ticks_in_phase += 1;
        self.ticks_since_move += 1;

        if self.baseline_pending {
            for w in &mut self.workloads {
                if w.active && w.effective == Priority::High {
                    w.baseline_hit_rate = rate_opt(&snap.workloads[w.widx].llc_hit_rate);
                }
            }
            self.baseline_pending = false;
        }

        match self.phase {
            Phase::Searching => {
                if self.run_antagonist_restores(tick, snap, &mut out) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                if self.detect_storage_antagonists(tick, snap, &mut out) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                self.run_expansion(tick, snap, &mut out);
            }
            Phase::Stable => {
                if self.run_antagonist_restores(tick, snap, &mut out) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                if self.run_hpw_drift_check(tick, snap) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                if self.detect_storage_antagonists(tick, snap, &mut out) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                if self.detect_non_io_antagonists(tick, snap, &mut out) {
                    self.emit_masks(tick, &mut out);
                    return out;
                }
                self.run_trash_shrink(tick, snap, &mut out);
                if self.phase == Phase::Stable && self.ticks_in_phase >= self.thresholds.stable_interval {
                    self.enter_revert(tick, snap, &mut out);
                }
            }
            Phase::Reverted => {
                if self.ticks_in_phase >= self.thresholds.revert_interval {
                    self.judge_revert(tick, snap, &mut out);
                }
            }
        }
        self.emit_masks(tick, &mut out);
        out
    }

    // ── LP-zone expansion ─────────────────────────────────────────────

    fn lp_min_lo(&self) -> usize {
        if self.zones.dca_zone.is_some() {
            self.geom.dca_way_count
        } else {
            0
        }
    }

    fn run_expansion(&mut self, tick: u64, snap: &RateSnapshot, _out: &mut Vec<Action>) {
        if self.zones.lp_zone.is_none() {
            self.to_stable(tick, "no LP zone to search");
            return;
        }
        if self.expansion_finished {
            self.to_stable(tick, "expansion finished");
            return;
        }

        if self.expand_check.is_some() {
            let rates = self.hpw_hit_rates(snap);
            let check = self.expand_check.as_mut().unwrap();
            check.waited += 1;
            check.post.push(rates);
            if check.post.len() > 2 {
                check.post.remove(0);
            }
            let (posts, waited) = (check.post.clone(), check.waited);
            let ready =
                (posts.len() == 2 && self.rates_stable(&posts[0], &posts[1])) || waited >= 5;
            if !ready {
                return;
            }
            let check = self.expand_check.take().unwrap();
            let latest = check.post.last().unwrap();
            let mut rollback = false;
            for (i, (pre, post)) in check.pre.iter().zip(latest).enumerate() {
                if let (Some(pre), Some(post)) = (pre, post) {
                    if *pre > 0.0 && (pre - post) / pre > self.thresholds.hpw_llc_hit_thr {
                        let name = self.workloads[i].name.clone();
                        self.log(
                            tick,
                            "expand_rollback",
                            &name,
                            format!("hit {pre:.3} -> {post:.3}"),
                        );
                        rollback = true;
                        break;
                    }
                }
            }
            if rollback {
                let lp = self.zones.lp_zone.unwrap();
                self.zones.lp_zone = Some(WayMask::new(lp.lo + 1, lp.hi));
                self.sync_trash_to_lp();
                self.ticks_since_move = 0;
                self.expansion_finished = true;
                self.to_stable(tick, "expansion rolled back");
                return;
            }
        }

        let lp = self.zones.lp_zone.unwrap();
        if lp.lo <= self.lp_min_lo() {
            self.expansion_finished = true;
            self.to_stable(tick, "LP zone at maximum width");
            return;
        }
        if self.ticks_since_move >= self.thresholds.expand_period && self.expand_check.is_none() {
            let pre = self.hpw_hit_rates(snap);
            self.zones.lp_zone = Some(WayMask::new(lp.lo - 1, lp.hi));
            self.sync_trash_to_lp();
            self.ticks_since_move = 0;
            self.expand_check = Some(ExpandCheck {
                pre,
                post: Vec::new(),
                waited: 0,
            });
            self.log(
                tick,
                "expand_lp",
                "lp_zone",
                format!("{}", self.zones.lp_zone.unwrap()),
            );
        }
    }

    /// Trash ways stay within the LP zone when it moves.
    fn sync_trash_to_lp(&mut self) {
        if let (Some(trash), Some(lp)) = (self.zones.trash_ways, self.zones.lp_zone) {
            let std = self.geom.standard_ways();
            let lo = trash.lo.max(lp.lo).min(std.hi);
            self.zones.trash_ways = Some(WayMask::new(lo, std.hi.min(lp.hi)));
        }
    }

    fn to_stable(&mut self, tick: u64, why: &str) {
        if self.phase != Phase::Stable {
            self.phase = Phase::Stable;
            self.ticks_in_phase = 0;
            self.log(tick, "phase", "stable", why.to_string());
        }
    }

    // ── Antagonist detection ──────────────────────────────────────────

    fn detect_storage_antagonists(
        &mut self,
        tick: u64,
        snap: &RateSnapshot,
        out: &mut Vec<Action>,
    ) -> bool {
        let share = &snap.storage_write_share;
        if share.empty_denominator {
            return false;
        }
        let mut fired = false;
        for i in 0..self.workloads.len() {
            let w = &self.workloads[i];
            if !w.active
                || w.kind != ControllerKind::Storage
                || w.antagonist != Antagonist::None
            {
                continue;
            }
            let Some(dev) = w.device else { continue };
            if !self.device_dca[dev.0 as usize] {
                continue;
            }
            let leak = &snap.devices[dev.0 as usize].dca_leak_rate;
            let miss = &snap.workloads[w.widx].llc_miss_rate;
            if leak.empty_denominator || miss.empty_denominator {
                continue;
            }
            if detect_storage_antagonist(leak.value, miss.value, share.value, &self.thresholds) {
                let name = w.name.clone();
                let tp = snap.workloads[w.widx].io_throughput;
                self.workloads[i].antagonist = Antagonist::StorageIo;
                self.workloads[i].effective = Priority::Low;
                self.workloads[i].detect_io_throughput = Some(tp as f64);
                self.device_dca[dev.0 as usize] = false;
                out.push(Action::SetDca {
                    device: dev,
                    enabled: false,
                });
                self.log(
                    tick,
                    "storage_antagonist",
                    &name,
                    format!(
                        "leak {:.3} miss {:.3} share {:.3}; DCA off",
                        leak.value, miss.value, share.value
                    ),
                );
                fired = true;
            }
        }
        if fired {
            self.recompute_initial_partitions(tick);
        }
        fired
    }

    fn detect_non_io_antagonists(
        &mut self,
        tick: u64,
        snap: &RateSnapshot,
        out: &mut Vec<Action>,
    ) -> bool {
        let mut reallocate = false;
        let mut flagged = false;
        for i in 0..self.workloads.len() {
            let w = &self.workloads[i];
            if !w.active || w.antagonist != Antagonist::None {
                continue;
            }
            let rates = &snap.workloads[w.widx];
            let hit = match w.kind {
                ControllerKind::Mem => {
                    let (mlc, llc) = (&rates.mlc_miss_rate, &rates.llc_miss_rate);
                    if mlc.empty_denominator || llc.empty_denominator {
                        continue;
                    }
                    detect_non_io_antagonist(mlc.value, llc.value, &self.thresholds)
                }
                ControllerKind::Net if self.policies.net_bloat_to_trash => {
                    // Bloat pressure beyond what the LP zone can absorb.
                    let lp_capacity = self
                        .zones
                        .lp_zone
                        .map(|m| (m.width() * self.geom.llc_sets) as u64)
                        .unwrap_or(0);
                    rates.victim_fills > lp_capacity.max(1)
                }
                _ => false,
            };
            if hit {
                let was_high = self.workloads[i].effective == Priority::High;
                self.workloads[i].antagonist = Antagonist::NonIo;
                self.workloads[i].effective = Priority::Low;
                self.workloads[i].detect_llc_miss = Some(rates.llc_miss_rate.value);
                let name = self.workloads[i].name.clone();
                self.log(
                    tick,
                    "non_io_antagonist",
                    &name,
                    format!(
                        "mlc {:.3} llc {:.3}",
                        rates.mlc_miss_rate.value, rates.llc_miss_rate.value
                    ),
                );
                flagged = true;
                reallocate |= was_high;
            }
        }
        if flagged {
            if reallocate {
                self.recompute_initial_partitions(tick);
            } else if self.zones.trash_ways.is_none() {
                let mut zones = self.zones.clone();
                if let Some(t) = Self::trash_for(&self.geom, &mut zones) {
                    zones.trash_ways = Some(t);
                    self.zones = zones;
                    self.shrink_stopped = false;
                    self.shrink_check = None;
                    self.ticks_since_move = 0;
                }
            }
        }
        let _ = out;
        flagged
    }

    // ── Trash-way shrinking ───────────────────────────────────────────

    fn antagonist_indices(&self) -> Vec<usize> {
        self.workloads
            .iter()
            .filter(|w| w.active && w.antagonist != Antagonist::None)
            .map(|w| w.widx)
            .collect()
    }

    fn run_trash_shrink(&mut self, tick: u64, snap: &RateSnapshot, _out: &mut Vec<Action>) {
        let ants = self.antagonist_indices();
        if ants.is_empty() || self.shrink_stopped {
            return;
        }
        let Some(trash) = self.zones.trash_ways else {
            return;
        };

        // Judge the previous shrink first.
        if let Some(check) = &self.shrink_check {
            let thr = self.thresholds.instability_thr;
            let mut unstable = None;
            for (widx, pre) in &check.pre_ant_llc_miss {
                let now = snap.workloads[*widx].llc_miss_rate.value;
                if *pre > 0.0 && ((now - pre).abs() / pre) > thr {
                    unstable = Some(format!("llc_miss w{widx} {pre:.3} -> {now:.3}"));
                }
            }
            for (widx, pre) in &check.pre_ant_io_tp {
                let now = snap.workloads[*widx].io_throughput as f64;
                if *pre > 0.0 && ((now - pre).abs() / pre) > thr {
                    unstable = Some(format!("io_tp w{widx} {pre:.0} -> {now:.0}"));
                }
            }
            let pre_bw = check.pre_mem_bw as f64;
            let now_bw = snap.memory_bandwidth as f64;
            if pre_bw > 0.0 && ((now_bw - pre_bw).abs() / pre_bw) > thr {
                unstable = Some(format!("mem_bw {pre_bw:.0} -> {now_bw:.0}"));
            }
            if self.ticks_since_move < self.thresholds.expand_period {
                return; // judge at the shrink cadence
            }
            self.shrink_check = None;
            if let Some(reason) = unstable {
                let widened = WayMask::new(trash.lo.saturating_sub(1).max(self.lp_trash_floor_lo()), trash.hi);
                self.zones.trash_ways = Some(widened);
                self.shrink_stopped = true;
                self.ticks_since_move = 0;
                self.log(tick, "shrink_rollback", "trash_ways", reason);
                return;
            }
        }

        let floor = self.geom.standard_ways().hi;
        if trash.lo >= floor {
            return; // width 1 at the rightmost standard way
        }
        if self.ticks_since_move < self.thresholds.expand_period {
            return;
        }
        // Record pre-shrink references and shrink one way.
        let pre_ant_llc_miss = ants
            .iter()
            .map(|&w| (w, snap.workloads[w].llc_miss_rate.value))
            .collect();
        let pre_ant_io_tp = ants
            .iter()
            .filter(|&&w| self.workloads[w].kind == ControllerKind::Storage)
            .map(|&w| (w, snap.workloads[w].io_throughput as f64))
            .collect();
        self.shrink_check = Some(ShrinkCheck {
            pre_ant_llc_miss,
            pre_ant_io_tp,
            pre_mem_bw: snap.memory_bandwidth,
        });
        self.zones.trash_ways = Some(WayMask::new(trash.lo + 1, trash.hi));
        self.ticks_since_move = 0;
        self.log(
            tick,
            "shrink_trash",
            "trash_ways",
            format!("{}", self.zones.trash_ways.unwrap()),
        );
    }

    fn lp_trash_floor_lo(&self) -> usize {
        self.zones
            .lp_zone
            .map(|lp| lp.lo.max(self.geom.standard_ways().lo))
            .unwrap_or(self.geom.standard_ways().lo)
    }

    // ── Phase-change restores and revert probing ──────────────────────

    /// Restores previously reclassified workloads whose behavior shifted.
    /// Runs in searching and stable phases; returns true when the restore
    /// triggered a full reallocation.
    fn run_antagonist_restores(
        &mut self,
        tick: u64,
        snap: &RateSnapshot,
        out: &mut Vec<Action>,
    ) -> bool {
        let thr = self.thresholds.instability_thr;
        let mut reallocate = false;
        for i in 0..self.workloads.len() {
            let w = self.workloads[i].clone();
            if !w.active {
                continue;
            }
            match w.antagonist {
                Antagonist::NonIo => {
                    if let Some(pre) = w.detect_llc_miss {
                        let now = snap.workloads[w.widx].llc_miss_rate;
                        if !now.empty_denominator
                            && pre > 0.0
                            && ((now.value - pre).abs() / pre) > thr
                        {
                            self.workloads[i].antagonist = Antagonist::None;
                            self.workloads[i].detect_llc_miss = None;
                            self.workloads[i].effective = w.declared;
                            self.log(
                                tick,
                                "restore",
                                &w.name,
                                format!("llc_miss {pre:.3} -> {:.3}", now.value),
                            );
                            if w.declared == Priority::High {
                                reallocate = true;
                            }
                        }
                    }
                }
                Antagonist::StorageIo => {
                    if let Some(pre) = w.detect_io_throughput {
                        let now = snap.workloads[w.widx].io_throughput as f64;
                        if pre > 0.0 && ((now - pre).abs() / pre) > thr {
                            self.workloads[i].antagonist = Antagonist::None;
                            self.workloads[i].detect_io_throughput = None;
                            self.workloads[i].effective = w.declared;
                            if let Some(dev) = w.device {
                                self.device_dca[dev.0 as usize] = true;
                                out.push(Action::SetDca {
                                    device: dev,
                                    enabled: true,
                                });
                            }
                            self.log(
                                tick,
                                "restore",
                                &w.name,
                                format!("io_tp {pre:.0} -> {now:.0}; DCA on"),
                            );
                            reallocate = true;
                        }
                    }
                }
                Antagonist::None => {}
            }
        }
        self.drop_cleared_trash(tick);
        if reallocate {
            self.recompute_initial_partitions(tick);
        }
        reallocate
    }

    /// Re-search when any HPW's hit rate drifts beyond T1 from the value
    /// recorded at the initial partitions. Stable phase only.
    fn run_hpw_drift_check(&mut self, tick: u64, snap: &RateSnapshot) -> bool {
        let t1 = self.thresholds.hpw_llc_hit_thr;
        let mut reallocate = false;
        for w in &self.workloads {
            if !w.active || w.effective != Priority::High {
                continue;
            }
            if let (Some(base), Some(now)) = (
                w.baseline_hit_rate,
                rate_opt(&snap.workloads[w.widx].llc_hit_rate),
            ) {
                if base > 0.0 && ((now - base).abs() / base) > t1 {
                    let name = w.name.clone();
                    self.log
                        .push(LogEntry {
                            tick,
                            action: "phase_change".into(),
                            target: name,
                            detail: format!("hit {base:.3} -> {now:.3}; re-search"),
                        });
                    reallocate = true;
                }
            }
        }
        if reallocate {
            self.recompute_initial_partitions(tick);
        }
        reallocate
    }

    /// Clears trash ways once no antagonist remains.
    fn drop_cleared_trash(&mut self, _tick: u64) -> bool {
        if self.zones.trash_ways.is_some() && self.antagonist_indices().is_empty() {
            self.zones.trash_ways = None;
            self.shrink_check = None;
            self.shrink_stopped = false;
            return true;
        }
        false
    }

    fn enter_revert(&mut self, tick: u64, snap: &RateSnapshot, out: &mut Vec<Action>) {
        let pre_rates = self.hpw_hit_rates(snap);
        let saved_masks = self
            .workloads
            .iter()
            .filter(|w| w.active)
            .map(|w| (w.widx, self.mask_for(w)))
            .collect();
        // Probe masks: the initial partitions for the current mix, trash
        // suspended, antagonists treated as plain LPWs.
        let probe_zones = self.initial_zones();
        let saved_zones = std::mem::replace(&mut self.zones, probe_zones);
        for i in 0..self.workloads.len() {
            if !self.workloads[i].active {
                continue;
            }
            let mask = self.mask_for(&self.workloads[i]);
            if self.current_masks[i] != Some(mask) {
                self.current_masks[i] = Some(mask);
                out.push(Action::SetMask { widx: i, mask });
            }
        }
        self.zones = saved_zones;
        self.revert_probe = Some(RevertProbe {
            saved_masks,
            pre_rates,
        });
        self.phase = Phase::Reverted;
        self.ticks_in_phase = 0;
        self.log(tick, "revert", "zones", "probing initial allocation".into());
    }

    fn judge_revert(&mut self, tick: u64, snap: &RateSnapshot, out: &mut Vec<Action>) {
        let probe = self.revert_probe.take().unwrap();
        let probe_rates = self.hpw_hit_rates(snap);
        let t1 = self.thresholds.hpw_llc_hit_thr;
        let mut research = false;
        for (pre, now) in probe.pre_rates.iter().zip(&probe_rates) {
            if let (Some(pre), Some(now)) = (pre, now) {
                if *now > 0.0 && (now - pre) / now > t1 {
                    research = true;
                }
            }
        }
        if research {
            self.log(
                tick,
                "revert_research",
                "zones",
                "attainable hit rate exceeds current".into(),
            );
            self.recompute_initial_partitions(tick);
            return;
        }
        // Probe passed: restore the saved allocation.
        for (widx, mask) in probe.saved_masks {
            if self.current_masks[widx] != Some(mask) {
                self.current_masks[widx] = Some(mask);
                out.push(Action::SetMask { widx, mask });
            }
        }
        self.phase = Phase::Stable;
        self.ticks_in_phase = 0;
        self.log(tick, "revert_restore", "zones", "no phase change".into());
    }
}

fn rate_opt(r: &Rate) -> Option<f64> {
    if r.empty_denominator {
        None
    } else {
        Some(r.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{DeviceRates, WorkloadRates};

    fn thresholds() -> Thresholds {
        Thresholds::default()
    }

    fn geom() -> CacheGeometry {
        CacheGeometry::default()
    }

    fn wr(hit: f64, mlc_miss: f64, llc_miss: f64, tp: u64) -> WorkloadRates {
        WorkloadRates {
            llc_hit_rate: Rate {
                value: hit,
                empty_denominator: false,
            },
            mlc_miss_rate: Rate {
                value: mlc_miss,
                empty_denominator: false,
            },
            llc_miss_rate: Rate {
                value: llc_miss,
                empty_denominator: false,
            },
            latency_proxy: Rate {
                value: 1.0,
                empty_denominator: false,
            },
            io_throughput: tp,
            mean_packet_latency: Rate::zero(),
            victim_fills: 0,
        }
    }

    fn snap(workloads: Vec<WorkloadRates>, leak: f64, share: f64) -> RateSnapshot {
        RateSnapshot {
            window: 0,
            workloads,
            devices: vec![DeviceRates {
                dca_leak_rate: Rate {
                    value: leak,
                    empty_denominator: false,
                },
                dma_lines_written: 1000,
            }],
            storage_write_share: Rate {
                value: share,
                empty_denominator: false,
            },
            memory_bandwidth: 1000,
        }
    }

    #[test]
    fn storage_detection_conjunction_and_flips() {
        let t = thresholds();
        assert!(detect_storage_antagonist(0.50, 0.45, 0.40, &t));
        // Each condition independently necessary; threshold-equal fails.
        assert!(!detect_storage_antagonist(0.40, 0.45, 0.40, &t));
        assert!(!detect_storage_antagonist(0.50, 0.40, 0.40, &t));
        assert!(!detect_storage_antagonist(0.50, 0.45, 0.35, &t));
    }

    #[test]
    fn non_io_detection_conjunction_and_flips() {
        let t = thresholds();
        assert!(detect_non_io_antagonist(0.95, 0.93, &t));
        assert!(!detect_non_io_antagonist(0.90, 0.93, &t));
        assert!(!detect_non_io_antagonist(0.95, 0.50, &t));
    }

    fn one_hpw_one_lpw() -> Vec<WorkloadInfo> {
        vec![
            WorkloadInfo {
                name: "hp".into(),
                kind: ControllerKind::Mem,
                device: None,
                priority: Priority::High,
                active: true,
            },
            WorkloadInfo {
                name: "lp".into(),
                kind: ControllerKind::Mem,
                device: None,
                priority: Priority::Low,
                active: true,
            },
        ]
    }

    #[test]
    fn initial_partitions_without_io() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        assert_eq!(c.zones.hp_zone, WayMask::new(0, 10));
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(9, 10)));
        assert!(c.zones.dca_zone.is_none());
        let actions = c.initial_actions();
        assert!(actions.contains(&Action::SetMask {
            widx: 0,
            mask: WayMask::new(0, 10)
        }));
        assert!(actions.contains(&Action::SetMask {
            widx: 1,
            mask: WayMask::new(9, 10)
        }));
        c.zones.validate(&geom()).unwrap();
    }

    #[test]
    fn initial_partitions_with_io_hpw() {
        let infos = vec![
            WorkloadInfo {
                name: "net".into(),
                kind: ControllerKind::Net,
                device: Some(DeviceId(0)),
                priority: Priority::High,
                active: true,
            },
            WorkloadInfo {
                name: "lp".into(),
                kind: ControllerKind::Mem,
                device: None,
                priority: Priority::Low,
                active: true,
            },
        ];
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &infos, vec![true]);
        assert_eq!(c.zones.dca_zone, Some(WayMask::new(0, 1)));
        assert_eq!(c.zones.hp_zone, WayMask::new(2, 10));
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(7, 8)));
        let actions = c.initial_actions();
        // I/O HPW gets hp ∪ dca = the full span.
        assert!(actions.contains(&Action::SetMask {
            widx: 0,
            mask: WayMask::new(0, 10)
        }));
        assert!(actions.contains(&Action::SetMask {
            widx: 1,
            mask: WayMask::new(7, 8)
        }));
        c.zones.validate(&geom()).unwrap();
    }

    #[test]
    fn last_lpw_termination_clears_lp_zone() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        let hp_before = c.zones.hp_zone;
        c.on_workload_event(5, 1, WorkloadEvent::Terminate);
        assert!(c.zones.lp_zone.is_none());
        assert_eq!(c.zones.hp_zone, hp_before);
    }

    #[test]
    fn lp_expands_then_rolls_back_on_hpw_drop() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        c.initial_actions();
        let good = snap(vec![wr(0.9, 0.5, 0.1, 0); 2], 0.0, 0.0);
        // Ticks 1,2: baseline + expansion due after expand_period.
        c.tick(1, &good);
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(9, 10)));
        c.tick(2, &good);
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(8, 10)), "expanded one way");
        // Two stable post-snapshots -> commit, next expansion.
        c.tick(3, &good);
        c.tick(4, &good);
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(7, 10)));
        // HPW hit rate collapses by more than T1: rollback + stable.
        let bad = snap(vec![wr(0.5, 0.5, 0.5, 0), wr(0.9, 0.5, 0.1, 0)], 0.0, 0.0);
        c.tick(5, &bad);
        c.tick(6, &bad);
        assert_eq!(c.zones.lp_zone, Some(WayMask::new(8, 10)), "rolled back");
        assert_eq!(c.phase, Phase::Stable);
    }

    #[test]
    fn storage_antagonist_disables_dca_and_demotes() {
        let infos = vec![
            WorkloadInfo {
                name: "net".into(),
                kind: ControllerKind::Net,
                device: Some(DeviceId(1)),
                priority: Priority::High,
                active: true,
            },
            WorkloadInfo {
                name: "fio".into(),
                kind: ControllerKind::Storage,
                device: Some(DeviceId(0)),
                priority: Priority::Low,
                active: true,
            },
        ];
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &infos, vec![true, true]);
        c.initial_actions();
        let s = snap(
            vec![wr(0.9, 0.5, 0.1, 100), wr(0.1, 0.9, 0.45, 50)],
            0.50,
            0.40,
        );
        let actions = c.tick(1, &s);
        assert!(actions.contains(&Action::SetDca {
            device: DeviceId(0),
            enabled: false
        }));
        assert_eq!(c.workloads[1].antagonist, Antagonist::StorageIo);
        assert_eq!(c.workloads[1].effective, Priority::Low);
        assert_eq!(c.phase, Phase::Searching, "reallocation restarts search");
    }

    #[test]
    fn non_io_antagonist_joins_trash_and_shrinks() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        c.initial_actions();
        let quiet = snap(vec![wr(0.9, 0.5, 0.1, 0); 2], 0.0, 0.0);
        // Drive to stable: expansion hits max after several ticks.
        for t in 1..30 {
            c.tick(t, &quiet);
            if c.phase == Phase::Stable {
                break;
            }
        }
        assert_eq!(c.phase, Phase::Stable);
        let thrash = snap(
            vec![wr(0.9, 0.5, 0.1, 0), wr(0.05, 0.95, 0.93, 0)],
            0.0,
            0.0,
        );
        let mut saw_trash = None;
        for t in 30..60 {
            c.tick(t, &thrash);
            if let Some(trash) = c.zones.trash_ways {
                saw_trash = Some(trash);
                if trash.lo == geom().standard_ways().hi {
                    break;
                }
            }
        }
        let trash = saw_trash.expect("trash ways created");
        assert_eq!(c.workloads[1].antagonist, Antagonist::NonIo);
        // Shrinks down to width 1 at the rightmost standard way under
        // stable metrics.
        assert_eq!(c.zones.trash_ways, Some(WayMask::new(8, 8)), "trash {trash}");
        c.zones.validate(&geom()).unwrap();
    }

    #[test]
    fn shrink_rolls_back_on_instability() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        c.initial_actions();
        let quiet = snap(vec![wr(0.9, 0.5, 0.1, 0); 2], 0.0, 0.0);
        for t in 1..30 {
            c.tick(t, &quiet);
            if c.phase == Phase::Stable {
                break;
            }
        }
        let mut thrash = snap(
            vec![wr(0.9, 0.5, 0.1, 0), wr(0.05, 0.95, 0.93, 0)],
            0.0,
            0.0,
        );
        // Flag + first shrink.
        let mut t = 30;
        while t < 40 {
            c.tick(t, &thrash);
            t += 1;
            if c.shrink_check.is_some() {
                break;
            }
        }
        assert!(c.shrink_check.is_some(), "a shrink should be pending");
        // System memory bandwidth swings by more than 10% after the shrink:
        // roll back the step and stop shrinking.
        thrash.memory_bandwidth = 2000;
        let before = c.zones.trash_ways.unwrap();
        for _ in 0..3 {
            c.tick(t, &thrash);
            t += 1;
        }
        assert!(c.shrink_stopped);
        let after = c.zones.trash_ways.unwrap();
        assert!(after.width() >= before.width(), "rolled back: {before} -> {after}");
    }

    #[test]
    fn revert_cadence_and_restore() {
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &one_hpw_one_lpw(), vec![]);
        c.initial_actions();
        let quiet = snap(vec![wr(0.9, 0.5, 0.1, 0); 2], 0.0, 0.0);
        let mut phases = Vec::new();
        for t in 1..40 {
            c.tick(t, &quiet);
            phases.push(c.phase);
        }
        let reverted = phases.iter().filter(|p| **p == Phase::Reverted).count();
        assert!(reverted >= 1, "at least one revert probe in 40 quiet ticks");
        // Probe shows no improvement -> back to stable, not searching.
        assert!(phases.windows(2).any(|w| w[0] == Phase::Reverted && w[1] == Phase::Stable));
    }

    #[test]
    fn storage_restore_reenables_dca() {
        let infos = vec![WorkloadInfo {
            name: "fio".into(),
            kind: ControllerKind::Storage,
            device: Some(DeviceId(0)),
            priority: Priority::Low,
            active: true,
        }];
        let mut c = Controller::new(geom(), thresholds(), Policies::default(), &infos, vec![true]);
        c.initial_actions();
        let s = snap(vec![wr(0.1, 0.9, 0.45, 50)], 0.50, 0.40);
        c.tick(1, &s);
        assert_eq!(c.workloads[0].antagonist, Antagonist::StorageIo);
        // Burst completes: throughput collapses 90% -> restore + DCA on.
        let done = snap(vec![wr(0.1, 0.9, 0.45, 5)], 0.0, 0.0);
        let mut restored = false;
        for t in 2..20 {
            let actions = c.tick(t, &done);
            if actions.contains(&Action::SetDca {
                device: DeviceId(0),
                enabled: true,
            }) {
                restored = true;
                break;
            }
        }
        assert!(restored);
        assert_eq!(c.workloads[0].antagonist, Antagonist::None);
    }
}
