#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// `args` excludes the program name. Subcommands: simulate, dataset, train,
// denoise, metrics, skeletonize.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Shortest round-trip decimal, always with a fractional part or exponent;
// infinities as "inf" / "-inf".
std::string format_metric(double v);

}  // namespace fpd
