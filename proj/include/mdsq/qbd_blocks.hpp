#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mdsq/statespace.hpp"

namespace mdsq {

/// Generator blocks of a level-independent QBD in the layout
///
///   [ B1 B2          ]
///   [ B0 A1 A2       ]
///   [    A0 A1 A2    ]
///   [       A0 A1 .. ]
///
/// B0 is q_l x q_b (first level -> boundary), B1 is q_b x q_b, B2 is q_b x q_l,
/// A0/A1/A2 are q_l x q_l (down, local, up).
struct QbdBlocks {
  Eigen::MatrixXd B0, B1, B2, A0, A1, A2;

  /// State labels; empty when the blocks were assembled by hand.
  std::vector<ChainState> boundary;
  std::vector<ChainState> level;  ///< first-level states; level j adds (j-1)*k to m
  int boundary_top = 0;
  int level_width = 1;

  int qb() const { return static_cast<int>(B1.rows()); }
  int ql() const { return static_cast<int>(A1.rows()); }

  /// (level, offset): level 0 is the boundary, level j >= 1 the j-th level.
  std::optional<std::pair<int, int>> locate(const ChainState& s) const;

  /// The state at `offset` of level j (j = 0 is the boundary).
  ChainState state_at(int level_index, int offset) const;
};

/// Plain-text dump: header line "qb ql", then B0, B1, B2, A0, A1, A2 row-major,
/// one matrix row per line, entries space-separated.
void write_blocks(std::ostream& os, const QbdBlocks& blocks);
QbdBlocks read_blocks(std::istream& is);

}  // namespace mdsq
