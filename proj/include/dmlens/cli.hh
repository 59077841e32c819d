#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmlens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;
inline constexpr int kExitDivergence = 3;

/* Subcommands: analyze, gen, audit, version. `args` excludes the program
 * name. Reports go to `out`, diagnostics to `err`.
 */
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

} // namespace dmlens::cli
