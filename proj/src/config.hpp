#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggregate.hpp"
#include "model.hpp"
#include "simulate.hpp"

namespace msj {

// INI-style config with dotted sections. Parsing is strict: unknown sections
// or keys, duplicates, and missing required keys are load-time errors that
// cite file and line.
//
//   [model]
//   states = 1, 2, 3
//   absorbing = 3
//   kind = markov
//
//   [model.transitions]
//   1 -> 2 = 0.09 + 0.0018*t + 0.045*sin(t/2)
//
//   [simulation]
//   n = 100000
//   initial_state = 1
//   horizon = 40
//   censoring = uniform(10, 40)
//   master_seed = 20240801
class AppConfig {
public:
    static AppConfig load(const std::string& path);
    static AppConfig from_text(std::string text, std::string source_name);

    const std::string& source() const { return source_; }
    const std::string& raw_text() const { return text_; }

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key) const;
    std::int64_t get_int_or(const std::string& section, const std::string& key,
                            std::int64_t fallback) const;
    std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_double_list(const std::string& section,
                                        const std::string& key) const;

    // Typed views (throw ValidationError when the block is missing).
    const IntensityModel& model() const;
    SimConfig simulation() const;  // includes the model
    TimeGrid grid() const;
    std::optional<TimeGrid> duration_grid() const;

    // Label resolution against the model's state space.
    int state_index(const std::string& label) const;
    std::pair<int, int> transition_key(const std::string& spec) const;

private:
    void parse();
    void check_schema() const;
    void build_model();

    struct Entry {
        std::string value;
        int line;
    };

    std::string source_;
    std::string text_;
    std::map<std::string, std::vector<std::pair<std::string, Entry>>> sections_;
    std::optional<IntensityModel> model_;
};

CensoringSpec parse_censoring(const std::string& text, const std::string& context);

}  // namespace msj
