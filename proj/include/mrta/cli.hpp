// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrta
{

enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_backend = 3,
};

/// Entry point of the mrta command; args[0] is the program name.
/// Subcommands: ingest, generate, eval, serve, chat. Returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace mrta
