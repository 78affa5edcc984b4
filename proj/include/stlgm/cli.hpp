#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stlgm/config.hpp"
#include "stlgm/samplers.hpp"

namespace stlgm {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitIo = 4 };

/// Entry point behind the stlgm binary. Prints "run directory: <path>" on
/// success; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Arguments exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// File names inside a fit run directory.
std::string posterior_file(Stage stage, std::size_t chain = 0);
std::string w_draw_file(Stage stage, std::size_t chain = 0);

/// Reads the parameter and w-draw files of one chain from a fit run directory.
PosteriorSamples load_fit(const std::filesystem::path& run_dir, Stage stage, std::size_t chain = 0);

/// Version string baked in at configure time (git describe when available).
std::string_view build_version();

}  // namespace stlgm
