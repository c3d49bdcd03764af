#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <variant>

#include "mrdl/core.hpp"

namespace mrdl {

/// Row produced by the pairwise safety constraint with robot `j`.
struct NeighborRow {
  std::size_t j = 0;
  bool operator==(const NeighborRow&) const = default;
};

/// Row produced by one face of the acceleration box: sign * u[axis] <= alpha.
struct BoxFace {
  int axis = 0;
  int sign = 1;
  bool operator==(const BoxFace&) const = default;
};

using RowKind = std::variant<NeighborRow, BoxFace>;

/// One linear inequality a^T u <= b_hat of the per-robot program.
struct ConstraintRow {
  Vec2 a = Vec2::Zero();
  double b_hat = 0.0;
  RowKind kind = BoxFace{};

  bool is_neighbor() const { return std::holds_alternative<NeighborRow>(kind); }

  std::optional<std::size_t> neighbor() const {
    if (const auto* n = std::get_if<NeighborRow>(&kind)) return n->j;
    return std::nullopt;
  }
};

/// Box rows in the fixed order +x, +y, -x, -y.
inline std::array<ConstraintRow, 4> box_rows(double alpha) {
  return {ConstraintRow{Vec2(1.0, 0.0), alpha, BoxFace{0, +1}},
          ConstraintRow{Vec2(0.0, 1.0), alpha, BoxFace{1, +1}},
          ConstraintRow{Vec2(-1.0, 0.0), alpha, BoxFace{0, -1}},
          ConstraintRow{Vec2(0.0, -1.0), alpha, BoxFace{1, -1}}};
}

}  // namespace mrdl
