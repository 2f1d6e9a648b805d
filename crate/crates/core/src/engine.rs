//! The epoch loop: devices DMA, workloads run, telemetry advances, the
//! controller acts at tick boundaries.
//!
//! Ordering per epoch is fixed and documented: scripted events at the tick
//! start, then device DMA in declaration order, then workload CPU steps in
//! declaration order. A run is fully deterministic given (scenario, seed).

use crate::cache::{CacheModel, ModelConfig};
use crate::controller::{
    Action, Antagonist, Controller, ControllerKind, LogEntry, Phase, Policies, Thresholds,
    WorkloadEvent, WorkloadInfo,
};
use crate::device::{DeviceKind, DeviceSet, DeviceSpec, DmaBatch};
use crate::error::{ConfigError, SimAssertion};
use crate::geometry::{CacheGeometry, ClassId, DeviceId, WayMask};
use crate::telemetry::{
    snapshot, CostModel, CounterSet, DcaMissMetric, RateSnapshot,
};
use crate::workload::{Priority, SimCtx, WorkloadKind, WorkloadRuntime, WorkloadSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedEvent {
    Launch { workload: String },
    Terminate { workload: String },
    SetMask { workload: String, lo: usize, hi: usize },
    SetDca { device: String, enabled: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: CacheGeometry,
    pub migrate_non_io: bool,
    pub epochs_per_tick: u64,
    pub total_ticks: u64,
    pub warmup_ticks: u64,
    pub seed: u64,
    pub devices: Vec<DeviceSpec>,
    pub workloads: Vec<WorkloadSpec>,
    pub thresholds: Thresholds,
    pub controller_enabled: bool,
    pub exclude_dca_for_nonio_hpw: bool,
    pub net_bloat_to_trash: bool,
    pub cost: CostModel,
    pub dca_miss_metric: DcaMissMetric,
    pub scripted_events: Vec<(u64, ScriptedEvent)>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            geometry: CacheGeometry::default(),
            migrate_non_io: true,
            epochs_per_tick: 100,
            total_ticks: 70,
            warmup_ticks: 10,
            seed: 0,
            devices: Vec::new(),
            workloads: Vec::new(),
            thresholds: Thresholds::default(),
            controller_enabled: true,
            exclude_dca_for_nonio_hpw: false,
            net_bloat_to_trash: false,
            cost: CostModel::default(),
            dca_miss_metric: DcaMissMetric::Leak,
            scripted_events: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name == name)
    }

    pub fn workload_index(&self, name: &str) -> Option<usize> {
        self.workloads.iter().position(|w| w.name == name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        self.thresholds
            .validate()
            .map_err(ConfigError::Scenario)?;
        if self.epochs_per_tick == 0 || self.total_ticks == 0 {
            return Err(ConfigError::Scenario(
                "epochs_per_tick and total_ticks must be positive".into(),
            ));
        }
        if self.warmup_ticks >= self.total_ticks {
            return Err(ConfigError::Scenario(format!(
                "warmup_ticks {} must be < total_ticks {}",
                self.warmup_ticks, self.total_ticks
            )));
        }
        let mut seen_cores = vec![false; self.geometry.core_count];
        let mut device_users = vec![None::<&str>; self.devices.len()];
        for w in &self.workloads {
            if w.cores.is_empty() {
                return Err(ConfigError::Scenario(format!(
                    "workload {} has no cores",
                    w.name
                )));
            }
            for &c in &w.cores {
                if c >= self.geometry.core_count {
                    return Err(ConfigError::Scenario(format!(
                        "workload {} uses core {c} >= core_count {}",
                        w.name, self.geometry.core_count
                    )));
                }
                if seen_cores[c] {
                    return Err(ConfigError::Scenario(format!(
                        "core {c} assigned to more than one workload"
                    )));
                }
                seen_cores[c] = true;
            }
            if let Some((lo, hi)) = w.initial_mask {
                WayMask::checked(lo, hi, self.geometry.llc_ways)?;
            }
            match (&w.kind, &w.device) {
                (WorkloadKind::MemStream(_), Some(_)) => {
                    return Err(ConfigError::Scenario(format!(
                        "mem_stream {} must not reference a device",
                        w.name
                    )));
                }
                (WorkloadKind::MemStream(_), None) => {}
                (_, None) => {
                    return Err(ConfigError::Scenario(format!(
                        "workload {} requires a device",
                        w.name
                    )));
                }
                (kind, Some(dev)) => {
                    let di = self
                        .device_index(dev)
                        .ok_or_else(|| ConfigError::UnknownDevice(dev.clone()))?;
                    let want = match kind {
                        WorkloadKind::NetRx(_) => DeviceKind::Network,
                        WorkloadKind::StorageStream(_) => DeviceKind::Storage,
                        WorkloadKind::MemStream(_) => unreachable!(),
                    };
                    if self.devices[di].kind != want {
                        return Err(ConfigError::Scenario(format!(
                            "workload {} needs a {want} device, {dev} is {}",
                            w.name, self.devices[di].kind
                        )));
                    }
                    if let Some(user) = device_users[di] {
                        return Err(ConfigError::Scenario(format!(
                            "device {dev} driven by both {user} and {}",
                            w.name
                        )));
                    }
                    device_users[di] = Some(&w.name);
                }
            }
        }
        for (tick, ev) in &self.scripted_events {
            if *tick >= self.total_ticks {
                return Err(ConfigError::Scenario(format!(
                    "scripted event at tick {tick} beyond run end"
                )));
            }
            match ev {
                ScriptedEvent::Launch { workload } | ScriptedEvent::Terminate { workload } => {
                    if self.workload_index(workload).is_none() {
                        return Err(ConfigError::UnknownWorkload(workload.clone()));
                    }
                }
                ScriptedEvent::SetMask { workload, lo, hi } => {
                    if self.workload_index(workload).is_none() {
                        return Err(ConfigError::UnknownWorkload(workload.clone()));
                    }
                    WayMask::checked(*lo, *hi, self.geometry.llc_ways)?;
                }
                ScriptedEvent::SetDca { device, .. } => {
                    if self.device_index(device).is_none() {
                        return Err(ConfigError::UnknownDevice(device.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Assertion(#[from] SimAssertion),
}

/// Per-workload presentation state recorded each tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMeta {
    pub mask: WayMask,
    pub priority: Priority,
    pub antagonist: Antagonist,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickData {
    pub tick: u64,
    /// Phase the tick's epochs ran under; None when the controller is off.
    pub phase: Option<Phase>,
    pub snapshot: RateSnapshot,
    pub workloads: Vec<WorkloadMeta>,
    pub device_dca: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkloadSummary {
    pub llc_hit_rate: Option<f64>,
    pub mlc_miss_rate: Option<f64>,
    pub llc_miss_rate: Option<f64>,
    pub latency_proxy: Option<f64>,
    pub io_throughput: f64,
    pub mean_packet_latency: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceSummary {
    pub dca_leak_rate: Option<f64>,
    pub dma_lines_per_tick: f64,
}

/// Means over the result window (the last `window` ticks). Rate means are
/// taken over the CSV-rounded per-tick values so a summary recomputed from
/// an emitted report matches exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub window: u64,
    pub workloads: Vec<WorkloadSummary>,
    pub devices: Vec<DeviceSummary>,
    pub memory_bandwidth: f64,
}

#[derive(Debug)]
pub struct Report {
    pub scenario: Scenario,
    pub ticks: Vec<TickData>,
    pub actions: Vec<LogEntry>,
    pub summary: Summary,
    pub final_counters: CounterSet,
    /// Per-workload LLC hit rate recorded by the controller at the last
    /// initial partitions; empty when the controller is off.
    pub hpw_baselines: Vec<Option<f64>>,
}

impl Report {
    /// Ticks covered by the summary window.
    pub fn result_window(&self) -> u64 {
        self.summary.window
    }
}

/// Rounds to the CSV's 6-decimal precision.
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn run(scenario: &Scenario) -> Result<Report, SimError> {
    scenario.validate()?;
    let class_count = scenario.workloads.len();
    let mut cfg = ModelConfig::new(scenario.geometry.clone());
    cfg.migrate_non_io = scenario.migrate_non_io;
    let mut model = CacheModel::new(cfg, scenario.devices.len(), class_count.max(1))?;
    let mut devices = DeviceSet::new(scenario.devices.clone());
    let device_kinds: Vec<DeviceKind> = scenario.devices.iter().map(|d| d.kind).collect();

    let mut workloads: Vec<WorkloadRuntime> = Vec::new();
    for (i, spec) in scenario.workloads.iter().enumerate() {
        let (dev_id, budget) = match &spec.device {
            Some(name) => {
                let di = scenario.device_index(name).unwrap();
                (Some(DeviceId(di as u16)), scenario.devices[di].lines_per_epoch)
            }
            None => (None, 0),
        };
        let addr_base = (i as u64 + 1) << 40;
        workloads.push(WorkloadRuntime::new(
            i,
            spec,
            dev_id,
            budget,
            addr_base,
            scenario.seed,
        ));
    }

    // Device -> driving workload index.
    let mut driver_of_device: Vec<Option<usize>> = vec![None; scenario.devices.len()];
    for (i, w) in workloads.iter().enumerate() {
        if let Some(d) = w.device() {
            driver_of_device[d.0 as usize] = Some(i);
        }
    }

    // Static masks from the scenario file.
    let mut current_masks: Vec<WayMask> = vec![scenario.geometry.full_mask(); class_count];
    let mut engine_log: Vec<LogEntry> = Vec::new();
    for (i, spec) in scenario.workloads.iter().enumerate() {
        if let Some((lo, hi)) = spec.initial_mask {
            let mask = WayMask::new(lo, hi);
            model.set_way_mask(ClassId(i as u16), mask)?;
            current_masks[i] = mask;
        }
    }

    let mut controller = if scenario.controller_enabled {
        let infos: Vec<WorkloadInfo> = scenario
            .workloads
            .iter()
            .map(|w| WorkloadInfo {
                name: w.name.clone(),
                kind: match w.kind {
                    WorkloadKind::NetRx(_) => ControllerKind::Net,
                    WorkloadKind::StorageStream(_) => ControllerKind::Storage,
                    WorkloadKind::MemStream(_) => ControllerKind::Mem,
                },
                device: w
                    .device
                    .as_ref()
                    .map(|n| DeviceId(scenario.device_index(n).unwrap() as u16)),
                priority: w.priority,
                active: w.starts_active,
            })
            .collect();
        let dca_flags = scenario.devices.iter().map(|d| d.dca_enabled).collect();
        Some(Controller::new(
            scenario.geometry.clone(),
            scenario.thresholds.clone(),
            Policies {
                exclude_dca_for_nonio_hpw: scenario.exclude_dca_for_nonio_hpw,
                net_bloat_to_trash: scenario.net_bloat_to_trash,
            },
            &infos,
            dca_flags,
        ))
    } else {
        None
    };

    if let Some(c) = controller.as_mut() {
        let actions = c.initial_actions();
        apply_actions(&actions, &mut model, &mut devices, &mut current_masks)?;
    }

    let mut counters = CounterSet::new(class_count, scenario.devices.len());
    let mut prev = counters.clone();
    let mut ticks: Vec<TickData> = Vec::with_capacity(scenario.total_ticks as usize);
    let mut epoch: u64 = 0;

    let mut events = scenario.scripted_events.clone();
    events.sort_by_key(|(t, _)| *t);
    let mut next_event = 0usize;

    for tick in 0..scenario.total_ticks {
        while next_event < events.len() && events[next_event].0 == tick {
            let (_, ev) = &events[next_event];
            apply_scripted_event(
                tick,
                ev,
                scenario,
                &mut model,
                &mut devices,
                &mut workloads,
                controller.as_mut(),
                &mut current_masks,
                &mut engine_log,
            )?;
            next_event += 1;
        }

        let phase = controller.as_ref().map(|c| c.phase);

        for _ in 0..scenario.epochs_per_tick {
            for dev in 0..scenario.devices.len() {
                let Some(widx) = driver_of_device[dev] else {
                    continue;
                };
                let budget = scenario.devices[dev].lines_per_epoch;
                let addrs = workloads[widx].dma_addrs(budget, epoch);
                if addrs.is_empty() {
                    continue;
                }
                let batch = DmaBatch {
                    device: DeviceId(dev as u16),
                    addrs,
                    epoch_issued: epoch,
                };
                let result = devices.issue_dma(&batch, &mut model)?;
                apply_dma_result(&mut counters, dev, &batch, &result);
            }
            let mut ctx = SimCtx {
                model: &mut model,
                counters: &mut counters,
            };
            for w in workloads.iter_mut() {
                w.cpu_step(epoch, &mut ctx);
            }
            epoch += 1;
        }

        counters
            .check_reconciliation(model.pending_instances())
            .map_err(SimAssertion)?;
        #[cfg(debug_assertions)]
        model.audit().map_err(SimAssertion)?;

        let snap = snapshot(
            tick,
            &counters,
            &prev,
            &device_kinds,
            &scenario.cost,
            scenario.dca_miss_metric,
        );
        prev = counters.clone();

        let meta: Vec<WorkloadMeta> = (0..class_count)
            .map(|i| {
                let (priority, antagonist) = match controller.as_ref() {
                    Some(c) => (c.workloads[i].effective, c.workloads[i].antagonist),
                    None => (scenario.workloads[i].priority, Antagonist::None),
                };
                WorkloadMeta {
                    mask: current_masks[i],
                    priority,
                    antagonist,
                    active: workloads[i].active,
                }
            })
            .collect();
        ticks.push(TickData {
            tick,
            phase,
            snapshot: snap.clone(),
            workloads: meta,
            device_dca: devices.iter().map(|d| d.dca_enabled).collect(),
        });

        if let Some(c) = controller.as_mut() {
            let actions = c.tick(tick, &snap);
            apply_actions(&actions, &mut model, &mut devices, &mut current_masks)?;
        }
    }

    let mut actions = engine_log;
    let mut hpw_baselines = Vec::new();
    if let Some(c) = controller.as_mut() {
        actions.extend(c.take_log());
        hpw_baselines = c.workloads.iter().map(|w| w.baseline_hit_rate).collect();
    }
    actions.sort_by_key(|e| e.tick);

    let summary = summarize(&ticks, scenario);
    Ok(Report {
        scenario: scenario.clone(),
        ticks,
        actions,
        summary,
        final_counters: counters,
        hpw_baselines,
    })
}

fn apply_actions(
    actions: &[Action],
    model: &mut CacheModel,
    devices: &mut DeviceSet,
    current_masks: &mut [WayMask],
) -> Result<(), SimError> {
    for a in actions {
        match a {
            Action::SetMask { widx, mask } => {
                model.set_way_mask(ClassId(*widx as u16), *mask)?;
                current_masks[*widx] = *mask;
            }
            Action::SetDca { device, enabled } => {
                devices.set_dca_enabled(*device, *enabled)?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn apply_scripted_event(
    tick: u64,
    ev: &ScriptedEvent,
    scenario: &Scenario,
    model: &mut CacheModel,
    devices: &mut DeviceSet,
    workloads: &mut [WorkloadRuntime],
    controller: Option<&mut Controller>,
    current_masks: &mut [WayMask],
    log: &mut Vec<LogEntry>,
) -> Result<(), SimError> {
    match ev {
        ScriptedEvent::Launch { workload } | ScriptedEvent::Terminate { workload } => {
            let widx = scenario.workload_index(workload).unwrap();
            let launch = matches!(ev, ScriptedEvent::Launch { .. });
            workloads[widx].active = launch;
            log.push(LogEntry {
                tick,
                action: if launch { "launch" } else { "terminate" }.into(),
                target: workload.clone(),
                detail: "scripted".into(),
            });
            if let Some(c) = controller {
                let event = if launch {
                    WorkloadEvent::Launch
                } else {
                    WorkloadEvent::Terminate
                };
                let actions = c.on_workload_event(tick, widx, event);
                apply_actions(&actions, model, devices, current_masks)?;
            }
        }
        ScriptedEvent::SetMask { workload, lo, hi } => {
            let widx = scenario.workload_index(workload).unwrap();
            let mask = WayMask::new(*lo, *hi);
            model.set_way_mask(ClassId(widx as u16), mask)?;
            current_masks[widx] = mask;
            log.push(LogEntry {
                tick,
                action: "set_mask".into(),
                target: workload.clone(),
                detail: format!("{mask} (scripted)"),
            });
        }
        ScriptedEvent::SetDca { device, enabled } => {
            let di = scenario.device_index(device).unwrap();
            devices.set_dca_enabled(DeviceId(di as u16), *enabled)?;
            log.push(LogEntry {
                tick,
                action: "set_dca".into(),
                target: device.clone(),
                detail: format!("{enabled} (scripted)"),
            });
        }
    }
    Ok(())
}

fn apply_dma_result(
    counters: &mut CounterSet,
    dev_idx: usize,
    batch: &DmaBatch,
    result: &crate::device::DmaBatchResult,
) {
    let d = &mut counters.devices[dev_idx];
    d.dma_lines_written += batch.addrs.len() as u64;
    d.dma_updates += result.updates;
    d.dma_allocations += result.allocations;
    d.dma_memory_writes += result.memory_writes;
    counters.global.memory_write_lines += result.memory_writes;
    for leak in &result.leak_events {
        counters.devices[leak.device.0 as usize].leak_events += 1;
    }
    for out in &result.outcomes {
        for ev in &out.evicted {
            if ev.dest == crate::cache::EvictDest::Memory {
                counters.global.memory_write_lines += 1;
            }
        }
        for ev in &out.events {
            let ledger = &mut counters.devices[ev.device.0 as usize].ledger;
            match ev.end {
                crate::cache::InstanceEnd::ConsumedFromCache => ledger.consumed_from_cache += 1,
                crate::cache::InstanceEnd::ConsumedFromMemory => ledger.consumed_from_memory += 1,
                crate::cache::InstanceEnd::Leaked => ledger.leaked += 1,
                crate::cache::InstanceEnd::Overwritten => ledger.overwritten += 1,
            }
        }
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0u64;
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn summarize(ticks: &[TickData], scenario: &Scenario) -> Summary {
    let window = 10u64.min(ticks.len() as u64).max(1);
    let tail = &ticks[ticks.len() - window as usize..];
    let nw = scenario.workloads.len();
    let nd = scenario.devices.len();
    let rate = |r: &crate::telemetry::Rate| {
        if r.empty_denominator {
            None
        } else {
            Some(round6(r.value))
        }
    };

    let workloads = (0..nw)
        .map(|i| WorkloadSummary {
            llc_hit_rate: mean_defined(tail.iter().map(|t| rate(&t.snapshot.workloads[i].llc_hit_rate))),
            mlc_miss_rate: mean_defined(tail.iter().map(|t| rate(&t.snapshot.workloads[i].mlc_miss_rate))),
            llc_miss_rate: mean_defined(tail.iter().map(|t| rate(&t.snapshot.workloads[i].llc_miss_rate))),
            latency_proxy: mean_defined(tail.iter().map(|t| rate(&t.snapshot.workloads[i].latency_proxy))),
            io_throughput: tail
                .iter()
                .map(|t| t.snapshot.workloads[i].io_throughput as f64)
                .sum::<f64>()
                / window as f64,
            mean_packet_latency: mean_defined(
                tail.iter()
                    .map(|t| rate(&t.snapshot.workloads[i].mean_packet_latency)),
            ),
        })
        .collect();
    let devices = (0..nd)
        .map(|i| DeviceSummary {
            dca_leak_rate: mean_defined(tail.iter().map(|t| rate(&t.snapshot.devices[i].dca_leak_rate))),
            dma_lines_per_tick: tail
                .iter()
                .map(|t| t.snapshot.devices[i].dma_lines_written as f64)
                .sum::<f64>()
                / window as f64,
        })
        .collect();
    Summary {
        window,
        workloads,
        devices,
        memory_bandwidth: tail
            .iter()
            .map(|t| t.snapshot.memory_bandwidth as f64)
            .sum::<f64>()
            / window as f64,
    }
}
