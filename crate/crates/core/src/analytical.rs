//! Closed-form hardware models: roofline attainable performance, tile
//! occupancy, effective grid size, and shared-memory footprint.

use thiserror::Error;

use crate::types::DeviceModel;

/// CUDA limit on threads per block; caps the square tile at 32x32.
pub const MAX_THREADS_PER_BLOCK: u32 = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticalError {
    #[error("arithmetic intensity must be > 0, got {0}")]
    NonPositiveIntensity(f64),
    #[error("tile size {tile} needs {threads} threads per block (limit {MAX_THREADS_PER_BLOCK})")]
    TileTooLarge { tile: u32, threads: u64 },
}

/// Which roof bounds a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    MemoryBound,
    ComputeBound,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::MemoryBound => "memory_bound",
            Regime::ComputeBound => "compute_bound",
        }
    }
}

/// One point on the roofline curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RooflinePoint {
    pub arithmetic_intensity: f64,
    pub attainable_tflops: f64,
    pub regime: Regime,
}

/// Attainable performance at a given arithmetic intensity:
/// min(peak compute, ai * peak bandwidth). A workload sitting exactly on the
/// ridge point classifies as compute bound (the boundary is closed on the
/// right).
pub fn roofline(ai: f64, device: &DeviceModel) -> Result<RooflinePoint, AnalyticalError> {
    if !(ai > 0.0) {
        return Err(AnalyticalError::NonPositiveIntensity(ai));
    }
    let memory_roof = ai * device.peak_bandwidth_gbs / 1000.0;
    let attainable = memory_roof.min(device.peak_tflops);
    let regime = if ai < device.ridge_point() {
        Regime::MemoryBound
    } else {
        Regime::ComputeBound
    };
    Ok(RooflinePoint { arithmetic_intensity: ai, attainable_tflops: attainable, regime })
}

/// Number of thread blocks launched for an M x N output with square tiles:
/// ceil(M/tile) * ceil(N/tile).
pub fn effective_grid_size(m: u64, n: u64, tile_size: u32) -> u64 {
    assert!(m >= 1 && n >= 1 && tile_size >= 1, "dimensions and tile must be positive");
    let t = tile_size as u64;
    m.div_ceil(t) * n.div_ceil(t)
}

/// Shared-memory footprint of a tile*tile block staging both operands:
/// 2 * tile^2 * 4 bytes.
pub fn shared_memory_usage(tile_size: u32) -> u64 {
    assert!(tile_size >= 1, "tile must be positive");
    2 * (tile_size as u64) * (tile_size as u64) * 4
}

/// Per-SM occupancy limits for one tile size and the binding minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    pub tile_size: u32,
    pub threads_per_block: u32,
    pub shared_mem_bytes: u64,
    pub blocks_limit_threads: u32,
    pub blocks_limit_smem: u32,
    pub blocks_limit_hw: u32,
    pub max_active_blocks: u32,
}

/// Maximum blocks resident per SM for a square tile: the minimum of the
/// thread limit, the shared-memory limit, and the hardware block cap.
pub fn max_active_blocks(tile_size: u32, device: &DeviceModel) -> Result<OccupancyReport, AnalyticalError> {
    assert!(tile_size >= 1, "tile must be positive");
    let threads = tile_size as u64 * tile_size as u64;
    if threads > MAX_THREADS_PER_BLOCK as u64 {
        return Err(AnalyticalError::TileTooLarge { tile: tile_size, threads });
    }
    let threads_per_block = threads as u32;
    let shared_mem_bytes = shared_memory_usage(tile_size);
    let blocks_limit_threads = device.max_threads_per_sm / threads_per_block;
    let blocks_limit_smem = (device.shared_mem_per_sm_bytes / shared_mem_bytes) as u32;
    let blocks_limit_hw = device.max_blocks_per_sm;
    let max_active_blocks = blocks_limit_threads.min(blocks_limit_smem).min(blocks_limit_hw);
    Ok(OccupancyReport {
        tile_size,
        threads_per_block,
        shared_mem_bytes,
        blocks_limit_threads,
        blocks_limit_smem,
        blocks_limit_hw,
        max_active_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roofline_memory_bound_point() {
        let point = roofline(10.0, &DeviceModel::default()).unwrap();
        assert_relative_eq!(point.attainable_tflops, 5.042, max_relative = 1e-12);
        assert_eq!(point.regime, Regime::MemoryBound);
    }

    #[test]
    fn roofline_compute_bound_point() {
        let point = roofline(100.0, &DeviceModel::default()).unwrap();
        assert_eq!(point.attainable_tflops, 29.15);
        assert_eq!(point.regime, Regime::ComputeBound);
    }

    #[test]
    fn ridge_point_classifies_compute_bound() {
        let device = DeviceModel::default();
        let point = roofline(device.ridge_point(), &device).unwrap();
        assert_eq!(point.regime, Regime::ComputeBound);
        assert_relative_eq!(point.attainable_tflops, device.peak_tflops, max_relative = 1e-12);
    }

    #[test]
    fn roofline_rejects_non_positive_intensity() {
        assert!(matches!(
            roofline(0.0, &DeviceModel::default()),
            Err(AnalyticalError::NonPositiveIntensity(_))
        ));
    }

    #[test]
    fn roofline_is_monotone_and_saturates() {
        let device = DeviceModel::default();
        let mut last = 0.0;
        for ai in [0.1, 1.0, 10.0, 57.0, 58.0, 100.0, 1e6] {
            let point = roofline(ai, &device).unwrap();
            assert!(point.attainable_tflops >= last);
            assert!(point.attainable_tflops <= device.peak_tflops);
            last = point.attainable_tflops;
        }
        assert_eq!(last, device.peak_tflops);
    }

    #[test]
    fn grid_size_examples() {
        assert_eq!(effective_grid_size(1000, 1000, 16), 3969);
        assert_eq!(effective_grid_size(16, 16, 16), 1);
        assert_eq!(effective_grid_size(17, 16, 16), 2);
    }

    #[test]
    fn grid_covers_output() {
        for (m, n, t) in [(1u64, 1u64, 1u32), (1000, 1000, 16), (17, 16, 16), (96, 64, 32)] {
            let grid = effective_grid_size(m, n, t);
            let covered = grid * (t as u64) * (t as u64);
            assert!(covered >= m * n);
            if m % t as u64 == 0 && n % t as u64 == 0 {
                assert_eq!(covered, m * n);
            }
        }
    }

    #[test]
    fn shared_memory_examples() {
        assert_eq!(shared_memory_usage(16), 2048);
        assert_eq!(shared_memory_usage(1), 8);
        assert_eq!(shared_memory_usage(32), 8192);
    }

    #[test]
    fn occupancy_reproduces_device_table() {
        let device = DeviceModel::default();
        for (tile, expected) in [(1u32, 24u32), (4, 24), (8, 24), (16, 6), (32, 1)] {
            let report = max_active_blocks(tile, &device).unwrap();
            assert_eq!(report.max_active_blocks, expected, "tile {tile}");
            assert_eq!(
                report.max_active_blocks,
                report
                    .blocks_limit_threads
                    .min(report.blocks_limit_smem)
                    .min(report.blocks_limit_hw)
            );
        }
    }

    #[test]
    fn occupancy_limit_breakdown_for_tile_32() {
        let report = max_active_blocks(32, &DeviceModel::default()).unwrap();
        assert_eq!(report.blocks_limit_threads, 1);
        assert_eq!(report.blocks_limit_smem, 12);
        assert_eq!(report.blocks_limit_hw, 24);
    }

    #[test]
    fn occupancy_non_increasing_in_tile() {
        let device = DeviceModel::default();
        let mut last = u32::MAX;
        for tile in 1..=32 {
            let blocks = max_active_blocks(tile, &device).unwrap().max_active_blocks;
            assert!(blocks <= last, "tile {tile}");
            last = blocks;
        }
    }

    #[test]
    fn oversized_tile_is_an_error() {
        assert!(matches!(
            max_active_blocks(33, &DeviceModel::default()),
            Err(AnalyticalError::TileTooLarge { .. })
        ));
    }
}
