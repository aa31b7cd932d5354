#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "evfuse/core.hpp"

namespace evfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDegenerate = 3;

int exit_code_for(ErrorCode code);

/// Written as manifest.json next to every subcommand's outputs. `argv` holds
/// the arguments after the program name so `rerun` can replay the command.
struct RunManifest {
    std::string subcommand;
    FusionConfig config;
    std::map<std::string, std::string> inputs;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::size_t repeat = 1;
    std::vector<std::string> argv;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Parses and dispatches; never throws. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evfuse::cli
