//! DMA-capable devices: bandwidth pacing and the per-device DCA enable knob.

use crate::cache::{CacheModel, DmaWriteKind, DmaWriteOutcome, InstanceEvent};
use crate::error::{ConfigError, SimAssertion};
use crate::geometry::{DeviceId, LineAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    Network,
    Storage,
}

impl std::fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviceKind::Network => write!(f, "network"),
            DeviceKind::Storage => write!(f, "storage"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub name: String,
    pub kind: DeviceKind,
    /// Ingress DMA-write budget per epoch, in cache lines. A hard budget:
    /// unissued lines do not accumulate.
    pub lines_per_epoch: u64,
    pub dca_enabled: bool,
}

/// Runtime device state; the DCA flag is the mutable part.
#[derive(Debug, Clone)]
pub struct Device {
    pub id: DeviceId,
    pub spec: DeviceSpec,
    pub dca_enabled: bool,
}

impl Device {
    pub fn new(id: DeviceId, spec: DeviceSpec) -> Self {
        let dca = spec.dca_enabled;
        Device {
            id,
            spec,
            dca_enabled: dca,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmaBatch {
    pub device: DeviceId,
    pub addrs: Vec<LineAddr>,
    pub epoch_issued: u64,
}

/// Aggregate result of one batch: per-line outcomes plus the leak events
/// and memory-write count the telemetry layer wants.
#[derive(Debug, Clone, PartialEq)]
pub struct DmaBatchResult {
    pub outcomes: Vec<DmaWriteOutcome>,
    pub leak_events: Vec<InstanceEvent>,
    pub memory_writes: u64,
    pub updates: u64,
    pub allocations: u64,
}

#[derive(Debug, Default)]
pub struct DeviceSet {
    devices: Vec<Device>,
}

impl DeviceSet {
    pub fn new(specs: Vec<DeviceSpec>) -> Self {
        let devices = specs
            .into_iter()
            .enumerate()
            .map(|(i, s)| Device::new(DeviceId(i as u16), s))
            .collect();
        DeviceSet { devices }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Device> {
        self.devices.iter()
    }

    pub fn get(&self, id: DeviceId) -> Result<&Device, ConfigError> {
        self.devices
            .get(id.0 as usize)
            .ok_or_else(|| ConfigError::UnknownDevice(format!("#{}", id.0)))
    }

    pub fn by_name(&self, name: &str) -> Result<&Device, ConfigError> {
        self.devices
            .iter()
            .find(|d| d.spec.name == name)
            .ok_or_else(|| ConfigError::UnknownDevice(name.to_string()))
    }

    pub fn set_dca_enabled(&mut self, id: DeviceId, enabled: bool) -> Result<(), ConfigError> {
        let dev = self
            .devices
            .get_mut(id.0 as usize)
            .ok_or_else(|| ConfigError::UnknownDevice(format!("#{}", id.0)))?;
        dev.dca_enabled = enabled;
        Ok(())
    }

    /// Applies one DMA batch to the model under the device's current DCA
    /// flag, enforcing the per-epoch pacing budget.
    pub fn issue_dma(
        &self,
        batch: &DmaBatch,
        model: &mut CacheModel,
    ) -> Result<DmaBatchResult, SimAssertion> {
        let dev = self
            .get(batch.device)
            .map_err(|e| SimAssertion(e.to_string()))?;
        if batch.addrs.len() as u64 > dev.spec.lines_per_epoch {
            return Err(SimAssertion(format!(
                "device {} issued {} lines in epoch {}, budget {}",
                dev.spec.name,
                batch.addrs.len(),
                batch.epoch_issued,
                dev.spec.lines_per_epoch
            )));
        }
        let mut result = DmaBatchResult {
            outcomes: Vec::with_capacity(batch.addrs.len()),
            leak_events: Vec::new(),
            memory_writes: 0,
            updates: 0,
            allocations: 0,
        };
        for &addr in &batch.addrs {
            let out = model
                .dma_write_line(dev.id, addr, dev.dca_enabled)
                .map_err(|e| SimAssertion(e.to_string()))?;
            match out.kind {
                DmaWriteKind::UpdateInPlace { .. } => result.updates += 1,
                DmaWriteKind::AllocateDca { .. } => result.allocations += 1,
                DmaWriteKind::MemoryWrite => result.memory_writes += 1,
            }
            result.leak_events.extend(out.leak_victims.iter().copied());
            result.outcomes.push(out);
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::ModelConfig;
    use crate::geometry::CacheGeometry;

    fn model() -> CacheModel {
        CacheModel::new(ModelConfig::new(CacheGeometry::default()), 2, 2).unwrap()
    }

    fn two_devices() -> DeviceSet {
        DeviceSet::new(vec![
            DeviceSpec {
                name: "nic".into(),
                kind: DeviceKind::Network,
                lines_per_epoch: 64,
                dca_enabled: true,
            },
            DeviceSpec {
                name: "ssd".into(),
                kind: DeviceKind::Storage,
                lines_per_epoch: 40000,
                dca_enabled: true,
            },
        ])
    }

    #[test]
    fn cold_batch_allocates_every_line() {
        let mut m = model();
        let devs = two_devices();
        let batch = DmaBatch {
            device: DeviceId(0),
            addrs: (0..16).map(LineAddr).collect(),
            epoch_issued: 0,
        };
        let r = devs.issue_dma(&batch, &mut m).unwrap();
        assert_eq!(r.allocations, 16);
        assert_eq!(r.updates + r.memory_writes, 0);
        assert!(r.leak_events.is_empty());
    }

    #[test]
    fn pacing_violation_is_assertion_failure() {
        let mut m = model();
        let devs = two_devices();
        let batch = DmaBatch {
            device: DeviceId(0),
            addrs: (0..65).map(LineAddr).collect(),
            epoch_issued: 3,
        };
        assert!(devs.issue_dma(&batch, &mut m).is_err());
    }

    #[test]
    fn large_block_through_small_dca_region_leaks_heavily() {
        let mut m = model();
        let devs = two_devices();
        // 32768 fresh lines into a 2-way x 256-set DCA region: almost every
        // allocation evicts an unconsumed line.
        let batch = DmaBatch {
            device: DeviceId(1),
            addrs: (0..32768).map(LineAddr).collect(),
            epoch_issued: 0,
        };
        let r = devs.issue_dma(&batch, &mut m).unwrap();
        assert_eq!(r.allocations, 32768);
        assert!(r.leak_events.len() as u64 > 30000);

        // Same batch with DCA off: no allocations, all memory writes.
        let mut m = model();
        let mut devs = two_devices();
        devs.set_dca_enabled(DeviceId(1), false).unwrap();
        let r = devs.issue_dma(&batch, &mut m).unwrap();
        assert_eq!(r.allocations, 0);
        assert_eq!(r.memory_writes, 32768);
        assert!(r.leak_events.is_empty());
    }

    #[test]
    fn selective_dca_per_device() {
        let mut m = model();
        let mut devs = two_devices();
        devs.set_dca_enabled(DeviceId(1), false).unwrap();
        let net = DmaBatch {
            device: DeviceId(0),
            addrs: vec![LineAddr(1)],
            epoch_issued: 0,
        };
        let ssd = DmaBatch {
            device: DeviceId(1),
            addrs: vec![LineAddr(2)],
            epoch_issued: 0,
        };
        let rn = devs.issue_dma(&net, &mut m).unwrap();
        let rs = devs.issue_dma(&ssd, &mut m).unwrap();
        assert_eq!(rn.allocations, 1);
        assert_eq!(rs.memory_writes, 1);
        // Toggle back on: write-allocate resumes.
        devs.set_dca_enabled(DeviceId(1), true).unwrap();
        let rs = devs
            .issue_dma(
                &DmaBatch {
                    device: DeviceId(1),
                    addrs: vec![LineAddr(3)],
                    epoch_issued: 1,
                },
                &mut m,
            )
            .unwrap();
        assert_eq!(rs.allocations, 1);
    }

    #[test]
    fn unknown_device_rejected() {
        let devs = two_devices();
        assert!(devs.by_name("tape").is_err());
        assert!(devs.get(DeviceId(7)).is_err());
    }
}
