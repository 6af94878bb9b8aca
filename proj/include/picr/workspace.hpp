#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "picr/bisim.hpp"

namespace picr {

struct WorkspaceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SystemDef {
    std::string name;
    std::optional<std::filesystem::path> env;
    std::vector<Name> alloc;
    std::filesystem::path process;
};

// Manifest of named systems: `[system.NAME]` sections with `env`, `alloc`
// and `process` keys; paths are relative to the manifest.
struct Workspace {
    std::filesystem::path root;
    std::map<std::string, SystemDef> systems;
};

Workspace parse_workspace(const std::string& text, const std::filesystem::path& root);
Workspace load_workspace(const std::filesystem::path& manifest);

std::string read_file(const std::filesystem::path& p);
TypeEnv load_env(const std::filesystem::path& p);
ProcessTerm load_process(const std::filesystem::path& p);
// Comma- or space-separated names; duplicates are rejected.
std::vector<Name> parse_name_list(const std::string& text);

TypedSystem load_system(const Workspace& ws, const std::string& name);

}  // namespace picr
