#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "rates.hpp"

namespace msj {

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    bool paper_scale = false;
    int threads = 0;           // 0 = config / hardware default
    bool log_scale_ci = false;  // force log-scale intervals in estimate output
};

struct RunResult {
    std::vector<std::string> files;  // written files, manifest last
};

// Dispatches one of: simulate, estimate, sweep, clt, independence,
// lemma-check, surface, lasso, tree, slice. Writes CSV outputs plus a JSON
// manifest into out_dir and returns the file list.
RunResult run_command(const std::string& command, const AppConfig& config,
                      const std::string& out_dir, const RunOptions& options);

const std::vector<std::string>& known_commands();

// Pinned file formats, exposed for tests.
std::string rate_fit_csv(const RateFit& fit, const StateSpace& states);
std::string oe_table_csv(const OETable& table, const StateSpace& states,
                         const std::vector<std::pair<int, int>>& transitions);
std::string oe_table_csv(const OETable2D& table, const StateSpace& states,
                         const std::vector<std::pair<int, int>>& transitions);
RateFit read_rate_fit_csv(const std::string& path, StateSpace& states);

}  // namespace msj
