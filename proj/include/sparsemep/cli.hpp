#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sparsemep {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Runs one CLI invocation (args excludes the program name) and returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace sparsemep
