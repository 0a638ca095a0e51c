use serde::{Deserialize, Serialize};

use crate::transfer::VolumeReport;
use crate::{Error, Result};

/// Byte-counting stand-in for one memory pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arena {
    pub capacity: Option<u64>,
    pub used: u64,
    pub high_water: u64,
}

impl Arena {
    pub fn with_capacity(capacity: Option<u64>) -> Self {
        Self { capacity, ..Default::default() }
    }

    pub fn alloc(&mut self, bytes: u64) -> Result<()> {
        let used = self.used + bytes;
        if let Some(cap) = self.capacity {
            if used > cap {
                return Err(Error::Capacity { required: used, capacity: cap });
            }
        }
        self.used = used;
        self.high_water = self.high_water.max(used);
        Ok(())
    }

    pub fn free(&mut self, bytes: u64) {
        assert!(bytes <= self.used, "freeing {bytes} bytes with only {} in use", self.used);
        self.used -= bytes;
    }
}

/// Bytes moved by an executed batch, in the planner's categories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferCounters {
    pub host_to_device_bytes: u64,
    pub device_to_host_bytes: u64,
    pub device_copy_bytes: u64,
    pub grad_carry_bytes: u64,
    pub writeback_bytes: u64,
    pub invalidations: u64,
}

impl TransferCounters {
    pub fn from_volume(v: &VolumeReport) -> Self {
        Self {
            host_to_device_bytes: v.host_to_device_bytes,
            device_to_host_bytes: v.device_to_host_bytes,
            device_copy_bytes: v.device_copy_bytes,
            grad_carry_bytes: v.grad_carry_bytes,
            writeback_bytes: v.writeback_bytes,
            invalidations: v.invalidations,
        }
    }

    pub fn add(&mut self, o: &TransferCounters) {
        self.host_to_device_bytes += o.host_to_device_bytes;
        self.device_to_host_bytes += o.device_to_host_bytes;
        self.device_copy_bytes += o.device_copy_bytes;
        self.grad_carry_bytes += o.grad_carry_bytes;
        self.writeback_bytes += o.writeback_bytes;
        self.invalidations += o.invalidations;
    }
}

/// Emulated host and device pools plus cumulative transfer counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaCounters {
    pub host: Arena,
    pub device: Arena,
    pub totals: TransferCounters,
    /// Refreshes of untouched Gaussians moved by momentum-only steps.
    pub untouched_writeback_bytes: u64,
}

impl ArenaCounters {
    pub fn new(device_capacity: Option<u64>) -> Self {
        Self { device: Arena::with_capacity(device_capacity), ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_and_high_water() {
        let mut a = Arena::with_capacity(Some(100));
        a.alloc(60).unwrap();
        a.alloc(40).unwrap();
        a.free(50);
        assert_eq!((a.used, a.high_water), (50, 100));
        assert!(matches!(a.alloc(51), Err(Error::Capacity { required: 101, capacity: 100 })));
        assert_eq!(a.used, 50);
    }
}
