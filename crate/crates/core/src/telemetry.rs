//! Event counters and the windowed rates the controller consumes.
//!
//! Counters are cumulative; `snapshot` turns the delta between two counter
//! states into per-tick rates. All divisions by zero yield 0 with the
//! empty-denominator marker set, so consumers can tell "no traffic" from
//! "zero rate".

use crate::device::DeviceKind;

/// Unitless access-cost constants for the latency proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub mlc_hit: f64,
    pub llc_hit: f64,
    pub memory: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            mlc_hit: 1.0,
            llc_hit: 4.0,
            memory: 20.0,
        }
    }
}

/// Average access cost over a window; the stand-in for measured latency.
pub fn latency_proxy(mlc_hits: u64, llc_hits: u64, memory: u64, cost: &CostModel) -> Rate {
    let total = mlc_hits + llc_hits + memory;
    Rate::compute(
        mlc_hits as f64 * cost.mlc_hit
            + llc_hits as f64 * cost.llc_hit
            + memory as f64 * cost.memory,
        total as f64,
    )
}

/// Which per-window statistic stands in for the "DCA miss rate" antagonist
/// signal: the leak fraction (default) or the write-allocate fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcaMissMetric {
    Leak,
    AllocFraction,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkloadCounters {
    pub accesses: u64,
    pub mlc_hits: u64,
    pub mlc_misses: u64,
    /// Demand accesses only; DMA traffic is not counted here.
    pub llc_hits: u64,
    pub llc_misses: u64,
    /// Completed packets (net) or blocks (storage).
    pub completed_units: u64,
    /// MLC victim fills charged to this workload's lines.
    pub victim_fills: u64,
    /// Sum of per-packet residency (consume epoch - fill epoch), net only.
    pub packet_latency_epochs: u64,
}

/// Terminal classification of DMA-written line instances, per device.
/// Every written line ends in exactly one bucket or is still pending.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstanceLedger {
    pub consumed_from_cache: u64,
    pub consumed_from_memory: u64,
    pub leaked: u64,
    pub overwritten: u64,
}

impl InstanceLedger {
    pub fn ended(&self) -> u64 {
        self.consumed_from_cache + self.consumed_from_memory + self.leaked + self.overwritten
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeviceCounters {
    pub dma_lines_written: u64,
    pub dma_updates: u64,
    pub dma_allocations: u64,
    /// Unconsumed I/O victims displaced by DCA write-allocations, keyed by
    /// the device whose data leaked.
    pub leak_events: u64,
    pub dma_memory_writes: u64,
    pub ledger: InstanceLedger,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GlobalCounters {
    pub memory_read_lines: u64,
    pub memory_write_lines: u64,
    pub inclusive_migrations: u64,
    /// MLC victim fills whose line is I/O-origin and consumed (DMA bloat).
    pub bloat_fills: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CounterSet {
    pub workloads: Vec<WorkloadCounters>,
    pub devices: Vec<DeviceCounters>,
    pub global: GlobalCounters,
}

impl CounterSet {
    pub fn new(workloads: usize, devices: usize) -> Self {
        CounterSet {
            workloads: vec![WorkloadCounters::default(); workloads],
            devices: vec![DeviceCounters::default(); devices],
            global: GlobalCounters::default(),
        }
    }

    /// Verifies the counter identities. `pending_instances` is the model's
    /// live count of unconsumed DMA-written instances.
    pub fn check_reconciliation(&self, pending_instances: u64) -> Result<(), String> {
        for (i, w) in self.workloads.iter().enumerate() {
            if w.mlc_hits + w.mlc_misses != w.accesses {
                return Err(format!(
                    "workload {i}: mlc_hits {} + mlc_misses {} != accesses {}",
                    w.mlc_hits, w.mlc_misses, w.accesses
                ));
            }
            if w.llc_hits + w.llc_misses != w.mlc_misses {
                return Err(format!(
                    "workload {i}: llc_hits {} + llc_misses {} != mlc_misses {}",
                    w.llc_hits, w.llc_misses, w.mlc_misses
                ));
            }
        }
        let mut pending_total = 0u64;
        for (i, d) in self.devices.iter().enumerate() {
            if d.dma_updates + d.dma_allocations + d.dma_memory_writes != d.dma_lines_written {
                return Err(format!(
                    "device {i}: updates {} + allocations {} + memory {} != written {}",
                    d.dma_updates, d.dma_allocations, d.dma_memory_writes, d.dma_lines_written
                ));
            }
            let ended = d.ledger.ended();
            if ended > d.dma_lines_written {
                return Err(format!(
                    "device {i}: ledger ended {ended} exceeds written {}",
                    d.dma_lines_written
                ));
            }
            pending_total += d.dma_lines_written - ended;
        }
        if pending_total != pending_instances {
            return Err(format!(
                "ledger pending {pending_total} != model pending {pending_instances}"
            ));
        }
        Ok(())
    }
}

/// A windowed fraction or average. `empty_denominator` marks windows where
/// the denominator was zero; the value is then 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub empty_denominator: bool,
}

impl Rate {
    pub fn compute(num: f64, den: f64) -> Rate {
        if den == 0.0 {
            Rate {
                value: 0.0,
                empty_denominator: true,
            }
        } else {
            Rate {
                value: num / den,
                empty_denominator: false,
            }
        }
    }

    pub fn zero() -> Rate {
        Rate {
            value: 0.0,
            empty_denominator: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadRates {
    pub llc_hit_rate: Rate,
    pub mlc_miss_rate: Rate,
    pub llc_miss_rate: Rate,
    pub latency_proxy: Rate,
    /// Completed packets or blocks in this window.
    pub io_throughput: u64,
    pub mean_packet_latency: Rate,
    /// MLC victim fills charged to this workload, this window.
    pub victim_fills: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRates {
    pub dca_leak_rate: Rate,
    pub dma_lines_written: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSnapshot {
    pub window: u64,
    pub workloads: Vec<WorkloadRates>,
    pub devices: Vec<DeviceRates>,
    /// storage dma_lines_written / total dma_lines_written, this window.
    pub storage_write_share: Rate,
    /// memory_read_lines + memory_write_lines, this window.
    pub memory_bandwidth: u64,
}

/// Rates over the window between two counter states of the same run.
pub fn snapshot(
    window: u64,
    counters: &CounterSet,
    prev: &CounterSet,
    device_kinds: &[DeviceKind],
    cost: &CostModel,
    metric: DcaMissMetric,
) -> RateSnapshot {
    let workloads = counters
        .workloads
        .iter()
        .zip(&prev.workloads)
        .map(|(now, before)| {
            let acc = now.accesses - before.accesses;
            let mlc_h = now.mlc_hits - before.mlc_hits;
            let mlc_m = now.mlc_misses - before.mlc_misses;
            let llc_h = now.llc_hits - before.llc_hits;
            let llc_m = now.llc_misses - before.llc_misses;
            let units = now.completed_units - before.completed_units;
            let pkt_lat = now.packet_latency_epochs - before.packet_latency_epochs;
            WorkloadRates {
                llc_hit_rate: Rate::compute(llc_h as f64, mlc_m as f64),
                mlc_miss_rate: Rate::compute(mlc_m as f64, acc as f64),
                llc_miss_rate: Rate::compute(llc_m as f64, mlc_m as f64),
                latency_proxy: latency_proxy(mlc_h, llc_h, llc_m, cost),
                io_throughput: units,
                mean_packet_latency: Rate::compute(pkt_lat as f64, units as f64),
                victim_fills: now.victim_fills - before.victim_fills,
            }
        })
        .collect();

    let mut total_written = 0u64;
    let mut storage_written = 0u64;
    let devices: Vec<DeviceRates> = counters
        .devices
        .iter()
        .zip(&prev.devices)
        .enumerate()
        .map(|(i, (now, before))| {
            let written = now.dma_lines_written - before.dma_lines_written;
            total_written += written;
            if device_kinds[i] == DeviceKind::Storage {
                storage_written += written;
            }
            let miss_num = match metric {
                DcaMissMetric::Leak => now.leak_events - before.leak_events,
                DcaMissMetric::AllocFraction => now.dma_allocations - before.dma_allocations,
            };
            DeviceRates {
                dca_leak_rate: Rate::compute(miss_num as f64, written as f64),
                dma_lines_written: written,
            }
        })
        .collect();

    let mem_bw = (counters.global.memory_read_lines - prev.global.memory_read_lines)
        + (counters.global.memory_write_lines - prev.global.memory_write_lines);

    RateSnapshot {
        window,
        workloads,
        devices,
        storage_write_share: Rate::compute(storage_written as f64, total_written as f64),
        memory_bandwidth: mem_bw,
    }
}
