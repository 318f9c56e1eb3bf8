//! Heterogeneous device set: speeds, memory capacities and the bandwidth
//! matrix, plus the two elementary time computations.
//!
//! Transfers between distinct devices take `volume / bandwidth[src][dst]`;
//! same-device transfers are free. Links have no contention: concurrent
//! transfers on one link do not slow each other down.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type DeviceIndex = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceRecord {
    pub id: String,
    /// Operations per time unit.
    pub speed: f64,
    /// Bytes.
    pub memory: f64,
}

impl DeviceRecord {
    pub fn new(id: impl Into<String>, speed: f64, memory: f64) -> Self {
        DeviceRecord {
            id: id.into(),
            speed,
            memory,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cluster has no devices")]
    Empty,
    #[error("duplicate device id {0}")]
    DuplicateDevice(String),
    #[error("device {id}: speed and memory must be positive (speed {speed}, memory {memory})")]
    InvalidDevice { id: String, speed: f64, memory: f64 },
    #[error("bandwidth matrix incomplete: {0}")]
    BandwidthIncomplete(String),
    #[error("negative bandwidth {value} from {src} to {dst}")]
    NegativeBandwidth {
        src: String,
        dst: String,
        value: f64,
    },
    #[error("unreachable link from {src} to {dst}")]
    UnreachableLink { src: String, dst: String },
}

/// Device set with a dense, possibly asymmetric bandwidth matrix.
/// Devices are stored sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceCluster {
    devices: Vec<DeviceRecord>,
    bandwidth: Vec<Vec<f64>>,
    index: HashMap<String, DeviceIndex>,
}

impl DeviceCluster {
    /// `bandwidth[i][j]` is the rate from `devices[i]` to `devices[j]` in
    /// input order. The diagonal is ignored.
    pub fn new(devices: Vec<DeviceRecord>, bandwidth: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        let k = devices.len();
        if k == 0 {
            return Err(ClusterError::Empty);
        }
        let mut index = HashMap::with_capacity(k);
        for d in &devices {
            if index.insert(d.id.clone(), 0).is_some() {
                return Err(ClusterError::DuplicateDevice(d.id.clone()));
            }
            if !(d.speed > 0.0 && d.speed.is_finite() && d.memory > 0.0) {
                return Err(ClusterError::InvalidDevice {
                    id: d.id.clone(),
                    speed: d.speed,
                    memory: d.memory,
                });
            }
        }
        if bandwidth.len() != k {
            return Err(ClusterError::BandwidthIncomplete(format!(
                "{} rows for {k} devices",
                bandwidth.len()
            )));
        }
        for (i, row) in bandwidth.iter().enumerate() {
            if row.len() != k {
                return Err(ClusterError::BandwidthIncomplete(format!(
                    "row {i} ({}) has {} entries, expected {k}",
                    devices[i].id,
                    row.len()
                )));
            }
            for (j, &value) in row.iter().enumerate() {
                if i != j && !(value >= 0.0) {
                    return Err(ClusterError::NegativeBandwidth {
                        src: devices[i].id.clone(),
                        dst: devices[j].id.clone(),
                        value,
                    });
                }
            }
        }

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| devices[a].id.cmp(&devices[b].id));
        let bandwidth = order
            .iter()
            .map(|&i| order.iter().map(|&j| bandwidth[i][j]).collect())
            .collect();
        let mut slots: Vec<Option<DeviceRecord>> = devices.into_iter().map(Some).collect();
        let devices: Vec<DeviceRecord> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        let index = devices
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(DeviceCluster {
            devices,
            bandwidth,
            index,
        })
    }

    /// Cluster where every off-diagonal link has the same bandwidth.
    pub fn uniform(devices: Vec<DeviceRecord>, bandwidth: f64) -> Result<Self, ClusterError> {
        let k = devices.len();
        let matrix = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if i == j { 0.0 } else { bandwidth })
                    .collect()
            })
            .collect();
        DeviceCluster::new(devices, matrix)
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn devices(&self) -> &[DeviceRecord] {
        &self.devices
    }

    pub fn device(&self, d: DeviceIndex) -> &DeviceRecord {
        &self.devices[d]
    }

    pub fn speed(&self, d: DeviceIndex) -> f64 {
        self.devices[d].speed
    }

    pub fn memory(&self, d: DeviceIndex) -> f64 {
        self.devices[d].memory
    }

    pub fn id(&self, d: DeviceIndex) -> &str {
        &self.devices[d].id
    }

    pub fn index_of(&self, id: &str) -> Option<DeviceIndex> {
        self.index.get(id).copied()
    }

    pub fn bandwidth(&self, src: DeviceIndex, dst: DeviceIndex) -> f64 {
        self.bandwidth[src][dst]
    }

    pub fn bandwidth_matrix(&self) -> &[Vec<f64>] {
        &self.bandwidth
    }

    pub fn max_speed(&self) -> f64 {
        self.devices.iter().map(|d| d.speed).fold(0.0, f64::max)
    }

    /// Device indices sorted by descending speed, ties by ascending id.
    pub fn by_speed_desc(&self) -> Vec<DeviceIndex> {
        let mut order: Vec<DeviceIndex> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.speed(b).total_cmp(&self.speed(a)).then(a.cmp(&b)));
        order
    }

    pub fn exec_time(&self, cost: f64, d: DeviceIndex) -> f64 {
        exec_time(cost, &self.devices[d])
    }

    /// Zero on the same device, `volume / bandwidth` otherwise.
    pub fn transfer_time(
        &self,
        volume: f64,
        src: DeviceIndex,
        dst: DeviceIndex,
    ) -> Result<f64, ClusterError> {
        if src == dst || volume == 0.0 {
            return Ok(0.0);
        }
        let rate = self.bandwidth[src][dst];
        if rate > 0.0 {
            Ok(volume / rate)
        } else {
            Err(ClusterError::UnreachableLink {
                src: self.id(src).to_string(),
                dst: self.id(dst).to_string(),
            })
        }
    }
}

/// `cost / speed`.
pub fn exec_time(cost: f64, device: &DeviceRecord) -> f64 {
    cost / device.speed
}
