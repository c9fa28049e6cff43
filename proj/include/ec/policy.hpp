#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ec {

/// Per-dimension action box.
struct ActionBounds {
  std::vector<double> low;
  std::vector<double> high;

  static ActionBounds symmetric(std::size_t dim, double limit) {
    return {std::vector<double>(dim, -limit), std::vector<double>(dim, limit)};
  }
  std::size_t size() const noexcept { return low.size(); }
};

/// Maps observations to actions; may carry recurrent state across steps.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Clears recurrent state at the start of an episode.
  virtual void reset() = 0;
  virtual std::vector<double> act(std::span<const double> observation) = 0;
};

}  // namespace ec
