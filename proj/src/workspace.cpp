#include "picr/workspace.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace picr {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v, int line) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
        throw WorkspaceError("line " + std::to_string(line) + ": expected a quoted string");
    return v.substr(1, v.size() - 2);
}

std::vector<Name> parse_array(const std::string& v, int line) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw WorkspaceError("line " + std::to_string(line) + ": expected a list of names");
    std::vector<Name> out;
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(unquote(item, line));
    }
    return out;
}

void check_unique(const std::vector<Name>& names, const std::string& where) {
    std::set<Name> seen;
    for (auto& n : names)
        if (!seen.insert(n).second) throw WorkspaceError(where + ": duplicate allocated name '" + n + "'");
}

}  // namespace

Workspace parse_workspace(const std::string& text, const std::filesystem::path& root) {
    Workspace ws;
    ws.root = root;
    std::stringstream in(text);
    std::string raw;
    SystemDef* cur = nullptr;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto hash = raw.find('#');
        auto s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.rfind("[system.", 0) != 0)
                throw WorkspaceError("line " + std::to_string(line) + ": expected [system.NAME]");
            auto name = trim(s.substr(8, s.size() - 9));
            if (name.empty()) throw WorkspaceError("line " + std::to_string(line) + ": empty system name");
            if (ws.systems.count(name)) throw WorkspaceError("line " + std::to_string(line) + ": system '" + name + "' defined twice");
            cur = &ws.systems[name];
            cur->name = name;
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw WorkspaceError("line " + std::to_string(line) + ": expected key = value");
        if (!cur) throw WorkspaceError("line " + std::to_string(line) + ": key outside a [system.NAME] section");
        auto key = trim(s.substr(0, eq)), val = trim(s.substr(eq + 1));
        if (key == "env") {
            cur->env = unquote(val, line);
        } else if (key == "process") {
            cur->process = unquote(val, line);
        } else if (key == "alloc") {
            cur->alloc = parse_array(val, line);
            check_unique(cur->alloc, "system '" + cur->name + "'");
        } else {
            throw WorkspaceError("line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }
    for (auto& [name, def] : ws.systems)
        if (def.process.empty()) throw WorkspaceError("system '" + name + "' has no process");
    return ws;
}

Workspace load_workspace(const std::filesystem::path& manifest) {
    return parse_workspace(read_file(manifest), manifest.parent_path());
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw WorkspaceError("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TypeEnv load_env(const std::filesystem::path& p) { return parse_env(read_file(p)); }

ProcessTerm load_process(const std::filesystem::path& p) { return parse(read_file(p)); }

std::vector<Name> parse_name_list(const std::string& text) {
    std::vector<Name> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    check_unique(out, "allocated names");
    return out;
}

TypedSystem load_system(const Workspace& ws, const std::string& name) {
    auto it = ws.systems.find(name);
    if (it == ws.systems.end()) throw WorkspaceError("unknown system '" + name + "'");
    const auto& def = it->second;
    TypedSystem s;
    if (def.env) s.env = load_env(ws.root / *def.env);
    s.system.resources.allocated.insert(def.alloc.begin(), def.alloc.end());
    s.system.process = load_process(ws.root / def.process);
    return s;
}

}  // namespace picr
