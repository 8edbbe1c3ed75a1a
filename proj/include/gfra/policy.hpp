#pragma once

#include <string>
#include <string_view>

#include "gfra/error.hpp"

namespace gfra {

// How the receiver combines the replicas of one packet.
enum class CombiningPolicy {
  None,       // each replica decoded on its own
  Selection,  // interference-free fragments merged (SC)
  MaxRatio,   // MMSE/MRC, combined SINR is the sum of branch SINRs
};

inline std::string to_string(CombiningPolicy p) {
  switch (p) {
    case CombiningPolicy::None: return "none";
    case CombiningPolicy::Selection: return "sc";
    case CombiningPolicy::MaxRatio: return "mrc";
  }
  return "?";
}

inline CombiningPolicy parse_policy(std::string_view s) {
  if (s == "none") return CombiningPolicy::None;
  if (s == "sc") return CombiningPolicy::Selection;
  if (s == "mrc") return CombiningPolicy::MaxRatio;
  throw InvalidArgument("unknown combining policy '" + std::string(s) + "'");
}

// Relative slack applied to every SINR >= St comparison so that a replica sitting
// exactly on the threshold is not lost to rounding.
inline constexpr double kThresholdSlack = 1e-12;

}  // namespace gfra
