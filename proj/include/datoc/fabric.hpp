// Fabric configuration: tile grid dimensions and per-tile resource budgets.
#pragma once

#include <cstdint>

namespace datoc {

struct FabricConfig {
  int rows = 4;
  int cols = 5;
  int ports_in_per_tile = 2;
  int ports_out_per_tile = 2;
  int fifo_default_depth = 2;
  int dma_bandwidth = 16;  // elements per cycle per port
  std::int64_t local_mem_bytes = 512 * 1024;
  int burst_alignment = 32;  // elements; minimum unit for DMA splitting
  // Transfers at least this large may split across idle ports.
  std::int64_t dma_split_threshold = 2048;

  int tile_count() const { return rows * cols; }
  bool valid() const {
    return rows >= 1 && cols >= 1 && ports_in_per_tile >= 1 && ports_out_per_tile >= 1 &&
           fifo_default_depth >= 1 && dma_bandwidth >= 1;
  }
};

struct TileCoord {
  int row = 0;
  int col = 0;
  bool operator==(const TileCoord&) const = default;
  auto operator<=>(const TileCoord&) const = default;
};

inline int tile_linear(const FabricConfig& f, TileCoord t) { return t.row * f.cols + t.col; }

}  // namespace datoc
