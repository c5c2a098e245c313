#pragma once

#include <string>
#include <vector>

#include "sparselqr/system_model.hpp"

namespace sparselqr {

struct SystemSpec {
    LtiSystem system;
    std::vector<int> agents;  // nodes per agent
};

// System specification file: "A", "B", "D" row-major with explicit "m", "q",
// "nodes" as [{"m_j","p_j"}...], "agents" as node-count integers.
SystemSpec load_system_json(const std::string& path);
SystemSpec parse_system_json(const std::string& text);
std::string system_to_json(const LtiSystem& sys, const std::vector<int>& agents);
void save_system_json(const std::string& path, const LtiSystem& sys,
                      const std::vector<int>& agents);

// 17-significant-digit decimal formatting shared by all emitted files.
std::string format_number(double v);

}  // namespace sparselqr
