// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <span>
#include <string>

namespace vulnkit {

/// Runs one `vulnkit` subcommand. `args` excludes the program name.
/// Returns 0 on success (findings included), 1 on I/O or analysis errors,
/// 2 on usage errors.
int execute_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace vulnkit
