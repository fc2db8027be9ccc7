#pragma once

#include <iosfwd>

namespace asc::cli {

/// Runs one `asc` invocation. Exit codes: 0 success, 1 domain error (bad
/// input, failed audit), 2 usage error. Data goes to `out`, diagnostics to
/// `err` and the ASC_LOG-controlled logger.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace asc::cli
