//! Cache geometry, line addressing, and way masks.
//!
//! Way roles are positional: DCA ways are the leftmost `dca_way_count`
//! indices, inclusive ways the rightmost `inclusive_way_count`, and the ways
//! between them are the standard ways.

use crate::error::ConfigError;

/// Identifies one cache-line-sized aligned block. Set mapping is plain
/// modulo: no physical-address or slice hashing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineAddr(pub u64);

impl LineAddr {
    pub fn llc_set(self, geom: &CacheGeometry) -> usize {
        (self.0 % geom.llc_sets as u64) as usize
    }

    pub fn mlc_set(self, geom: &CacheGeometry) -> usize {
        (self.0 % geom.mlc_sets as u64) as usize
    }
}

/// Allocation class for CAT-style way masking. One class per workload;
/// devices get a class of their own so DMA-allocated lines have an owner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u16);

/// DMA-capable device handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceId(pub u16);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheGeometry {
    pub llc_sets: usize,
    pub llc_ways: usize,
    pub dca_way_count: usize,
    pub inclusive_way_count: usize,
    pub line_bytes: usize,
    pub mlc_sets: usize,
    pub mlc_ways: usize,
    pub core_count: usize,
}

impl Default for CacheGeometry {
    fn default() -> Self {
        CacheGeometry {
            llc_sets: 256,
            llc_ways: 11,
            dca_way_count: 2,
            inclusive_way_count: 2,
            line_bytes: 64,
            mlc_sets: 32,
            mlc_ways: 8,
            core_count: 8,
        }
    }
}

impl CacheGeometry {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("llc_sets", self.llc_sets),
            ("llc_ways", self.llc_ways),
            ("dca_way_count", self.dca_way_count),
            ("inclusive_way_count", self.inclusive_way_count),
            ("line_bytes", self.line_bytes),
            ("mlc_sets", self.mlc_sets),
            ("mlc_ways", self.mlc_ways),
            ("core_count", self.core_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::Geometry(format!("{name} must be > 0")));
            }
        }
        if !self.line_bytes.is_power_of_two() {
            return Err(ConfigError::Geometry(format!(
                "line_bytes {} is not a power of two",
                self.line_bytes
            )));
        }
        if self.dca_way_count + self.inclusive_way_count >= self.llc_ways {
            return Err(ConfigError::Geometry(format!(
                "no standard ways: dca {} + inclusive {} >= ways {}",
                self.dca_way_count, self.inclusive_way_count, self.llc_ways
            )));
        }
        Ok(())
    }

    pub fn is_dca_way(&self, way: usize) -> bool {
        way < self.dca_way_count
    }

    pub fn is_inclusive_way(&self, way: usize) -> bool {
        way >= self.llc_ways - self.inclusive_way_count
    }

    pub fn is_standard_way(&self, way: usize) -> bool {
        !self.is_dca_way(way) && !self.is_inclusive_way(way)
    }

    /// Way range holding DCA ways, `[0, dca_way_count - 1]`.
    pub fn dca_ways(&self) -> WayMask {
        WayMask::new(0, self.dca_way_count - 1)
    }

    /// Way range holding inclusive ways, the rightmost ways.
    pub fn inclusive_ways(&self) -> WayMask {
        WayMask::new(self.llc_ways - self.inclusive_way_count, self.llc_ways - 1)
    }

    /// Standard ways: everything between DCA and inclusive ways.
    pub fn standard_ways(&self) -> WayMask {
        WayMask::new(
            self.dca_way_count,
            self.llc_ways - self.inclusive_way_count - 1,
        )
    }

    /// Full-LLC mask, the default for every allocation class.
    pub fn full_mask(&self) -> WayMask {
        WayMask::new(0, self.llc_ways - 1)
    }
}

/// Contiguous, inclusive way range `[lo, hi]`. CAT only supports contiguous
/// allocations, so the representation cannot express anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WayMask {
    pub lo: usize,
    pub hi: usize,
}

impl WayMask {
    /// Builds a mask; panics if `lo > hi`. Use `checked` for fallible paths.
    pub fn new(lo: usize, hi: usize) -> Self {
        assert!(lo <= hi, "empty way mask [{lo},{hi}]");
        WayMask { lo, hi }
    }

    pub fn checked(lo: usize, hi: usize, llc_ways: usize) -> Result<Self, ConfigError> {
        if lo > hi {
            return Err(ConfigError::Mask(format!("empty range [{lo},{hi}]")));
        }
        if hi >= llc_ways {
            return Err(ConfigError::Mask(format!(
                "range [{lo},{hi}] exceeds {llc_ways} ways"
            )));
        }
        Ok(WayMask { lo, hi })
    }

    pub fn contains(&self, way: usize) -> bool {
        way >= self.lo && way <= self.hi
    }

    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn overlaps(&self, other: &WayMask) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

impl std::fmt::Display for WayMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}
