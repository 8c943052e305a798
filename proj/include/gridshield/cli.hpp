#pragma once

#include <ostream>

namespace gridshield::cli {

/// Exit codes: 0 every scenario passed, 1 a scenario failed, 2 bad arguments/config/log.
int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridshield::cli
