#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lexsum::cli {

/// Runs one `lexsum` invocation. `args` excludes the program name. Returns the
/// process exit code: 0 on success, 1 on a pipeline error, 2 on a usage error.
/// Errors are reported on `err` as {"error":{"module":...,"message":...}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lexsum::cli
