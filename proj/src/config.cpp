#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "csv.hpp"

namespace msj {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Allowed keys per section; [model.transitions] accepts arbitrary
// "from -> to" keys and is handled separately.
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"model", {"states", "absorbing", "kind"}},
        {"model.transitions", {}},
        {"simulation",
         {"n", "initial_state", "horizon", "censoring", "master_seed", "threads"}},
        {"grid", {"t0", "t_max", "bins"}},
        {"grid.duration", {"t0", "t_max", "bins"}},
        {"data", {"events"}},
        {"estimation",
         {"method", "level", "ci_scale", "transition", "lambda", "lambda_list", "tol",
          "max_iter", "max_depth", "min_exposure", "min_deviance_gain"}},
        {"experiment",
         {"name", "reps", "n", "m_list", "t_eval", "s_eval", "u_eval", "delta_t", "delta_u",
          "d_list", "paper_n", "bins"}},
        {"slice", {"fit", "transition", "d_list"}},
    };
    return s;
}

const std::map<std::string, std::set<std::string>>& required_keys() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"model", {"states", "kind"}},
        {"simulation", {"n", "initial_state", "horizon", "censoring", "master_seed"}},
        {"grid", {"t_max", "bins"}},
        {"grid.duration", {"t_max", "bins"}},
        {"data", {"events"}},
        {"slice", {"fit", "d_list"}},
    };
    return s;
}

}  // namespace

CensoringSpec parse_censoring(const std::string& text, const std::string& context) {
    std::string t = trim(text);
    if (t == "none") return CensoringSpec{CensoringSpec::Law::None, 0.0, 0.0};
    auto open = t.find('(');
    if (open == std::string::npos || t.back() != ')')
        throw ValidationError(context + ": censoring must be uniform(lo, hi), fixed(r) or none");
    std::string name = trim(t.substr(0, open));
    std::string args = t.substr(open + 1, t.size() - open - 2);
    std::vector<double> vals;
    std::size_t start = 0;
    while (start <= args.size()) {
        auto comma = args.find(',', start);
        std::string piece = trim(args.substr(start, comma == std::string::npos
                                                        ? std::string::npos
                                                        : comma - start));
        if (!piece.empty()) vals.push_back(parse_double(piece, context));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (name == "uniform") {
        if (vals.size() != 2)
            throw ValidationError(context + ": uniform censoring takes two arguments");
        return CensoringSpec::uniform(vals[0], vals[1]);
    }
    if (name == "fixed") {
        if (vals.size() != 1)
            throw ValidationError(context + ": fixed censoring takes one argument");
        return CensoringSpec::fixed(vals[0]);
    }
    throw ValidationError(context + ": unknown censoring law '" + name + "'");
}

AppConfig AppConfig::load(const std::string& path) {
    return from_text(read_text_file(path), path);
}

AppConfig AppConfig::from_text(std::string text, std::string source_name) {
    AppConfig cfg;
    cfg.source_ = std::move(source_name);
    cfg.text_ = std::move(text);
    cfg.parse();
    cfg.check_schema();
    if (cfg.has_section("model")) cfg.build_model();
    return cfg;
}

void AppConfig::parse() {
    std::string section;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text_.size()) {
        auto eol = text_.find('\n', pos);
        std::string_view line = eol == std::string::npos
                                    ? std::string_view(text_).substr(pos)
                                    : std::string_view(text_).substr(pos, eol - pos);
        pos = eol == std::string::npos ? text_.size() + 1 : eol + 1;
        ++line_no;

        auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        std::string stripped = trim(line);
        if (stripped.empty()) continue;

        const std::string where = source_ + ":" + std::to_string(line_no);
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ValidationError(where + ": unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ValidationError(where + ": empty section name");
            sections_.try_emplace(section);
            continue;
        }
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ValidationError(where + ": expected 'key = value'");
        if (section.empty())
            throw ValidationError(where + ": key outside of any [section]");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ValidationError(where + ": empty key");
        for (const auto& [k, e] : sections_[section])
            if (k == key)
                throw ValidationError(where + ": duplicate key '" + key + "' in [" + section +
                                      "] (first at line " + std::to_string(e.line) + ")");
        sections_[section].emplace_back(key, Entry{value, line_no});
    }
}

void AppConfig::check_schema() const {
    for (const auto& [section, entries] : sections_) {
        auto it = schema().find(section);
        if (it == schema().end())
            throw ValidationError(source_ + ": unknown section [" + section + "]");
        if (section == "model.transitions") continue;
        for (const auto& [key, entry] : entries)
            if (!it->second.count(key))
                throw ValidationError(source_ + ":" + std::to_string(entry.line) +
                                      ": unknown key '" + key + "' in [" + section + "]");
    }
    for (const auto& [section, required] : required_keys()) {
        if (!has_section(section)) continue;
        for (const auto& key : required)
            if (!has(section, key))
                throw ValidationError(source_ + ": [" + section + "] is missing required key '" +
                                      key + "'");
    }
    if (has_section("model") && !has_section("model.transitions"))
        throw ValidationError(source_ + ": [model] requires a [model.transitions] section");
    if (has_section("model.transitions")) {
        auto it = sections_.find("model.transitions");
        if (it->second.empty())
            throw ValidationError(source_ + ": [model.transitions] lists no transitions");
    }
}

void AppConfig::build_model() {
    IntensityModel model;
    for (const auto& label : get_list("model", "states")) {
        if (label == "CENS")
            throw ValidationError(source_ + ": state label CENS is reserved");
        if (model.states.find(label) >= 0)
            throw ValidationError(source_ + ": duplicate state label '" + label + "'");
        model.states.labels.push_back(label);
    }
    if (model.states.size() == 0) throw ValidationError(source_ + ": empty state list");

    model.absorbing.assign(static_cast<std::size_t>(model.states.size()), false);
    if (has("model", "absorbing"))
        for (const auto& label : get_list("model", "absorbing")) {
            int idx = model.states.find(label);
            if (idx < 0)
                throw ValidationError(source_ + ": absorbing state '" + label +
                                      "' is not declared");
            model.absorbing[static_cast<std::size_t>(idx)] = true;
        }

    std::string kind = get_string("model", "kind");
    if (kind == "markov")
        model.kind = ModelKind::Markov;
    else if (kind == "semi_markov")
        model.kind = ModelKind::SemiMarkov;
    else
        throw ValidationError(source_ + ": kind must be markov or semi_markov, got '" + kind +
                              "'");

    for (const auto& [key, entry] : sections_.at("model.transitions")) {
        const std::string where = source_ + ":" + std::to_string(entry.line);
        auto arrow = key.find("->");
        if (arrow == std::string::npos)
            throw ValidationError(where + ": transition key must look like 'from -> to'");
        std::string from_label = trim(key.substr(0, arrow));
        std::string to_label = trim(key.substr(arrow + 2));
        int from = model.states.find(from_label);
        int to = model.states.find(to_label);
        if (from < 0)
            throw ValidationError(where + ": state '" + from_label + "' is not declared");
        if (to < 0) throw ValidationError(where + ": state '" + to_label + "' is not declared");
        if (from == to) throw ValidationError(where + ": self transitions are not allowed");
        if (model.is_absorbing(from))
            throw ValidationError(where + ": transition out of absorbing state '" + from_label +
                                  "'");
        IntensityExpr expr;
        try {
            expr = IntensityExpr::parse(entry.value);
        } catch (const ParseError& err) {
            throw ValidationError(where + ": " + err.what());
        }
        if (model.kind == ModelKind::Markov && expr.uses_duration())
            throw ValidationError(where +
                                  ": markov model but the expression depends on duration u");
        model.transitions.push_back({from, to, std::move(expr)});
    }
    std::sort(model.transitions.begin(), model.transitions.end(),
              [](const ModelTransition& a, const ModelTransition& b) {
                  return std::tie(a.from, a.to) < std::tie(b.from, b.to);
              });
    for (std::size_t i = 1; i < model.transitions.size(); ++i)
        if (model.transitions[i - 1].from == model.transitions[i].from &&
            model.transitions[i - 1].to == model.transitions[i].to)
            throw ValidationError(source_ + ": duplicate transition " +
                                  model.states.label(model.transitions[i].from) + " -> " +
                                  model.states.label(model.transitions[i].to));

    model_ = std::move(model);

    // With a simulation block present, run the full horizon scan now so bad
    // intensities surface at load time.
    if (has_section("simulation")) simulation();
}

bool AppConfig::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool AppConfig::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return false;
    for (const auto& [k, e] : it->second)
        if (k == key) return true;
    return false;
}

std::string AppConfig::get_string(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it != sections_.end())
        for (const auto& [k, e] : it->second)
            if (k == key) return e.value;
    throw ValidationError(source_ + ": [" + section + "] is missing required key '" + key + "'");
}

std::string AppConfig::get_string_or(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

double AppConfig::get_double(const std::string& section, const std::string& key) const {
    return parse_double(get_string(section, key), source_ + ": [" + section + "] " + key);
}

double AppConfig::get_double_or(const std::string& section, const std::string& key,
                                double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

std::int64_t AppConfig::get_int(const std::string& section, const std::string& key) const {
    return parse_int(get_string(section, key), source_ + ": [" + section + "] " + key);
}

std::int64_t AppConfig::get_int_or(const std::string& section, const std::string& key,
                                   std::int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::vector<std::string> AppConfig::get_list(const std::string& section,
                                             const std::string& key) const {
    std::string raw = get_string(section, key);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto comma = raw.find(',', start);
        std::string piece = trim(std::string_view(raw).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!piece.empty()) out.push_back(std::move(piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty())
        throw ValidationError(source_ + ": [" + section + "] " + key + " lists no values");
    return out;
}

std::vector<double> AppConfig::get_double_list(const std::string& section,
                                               const std::string& key) const {
    std::vector<double> out;
    for (const auto& piece : get_list(section, key))
        out.push_back(parse_double(piece, source_ + ": [" + section + "] " + key));
    return out;
}

const IntensityModel& AppConfig::model() const {
    if (!model_) throw ValidationError(source_ + ": no [model] section");
    return *model_;
}

SimConfig AppConfig::simulation() const {
    if (!has_section("simulation"))
        throw ValidationError(source_ + ": no [simulation] section");
    SimConfig config;
    config.model = model();
    config.n = get_int("simulation", "n");
    config.horizon = get_double("simulation", "horizon");
    std::string censoring = get_string("simulation", "censoring");
    config.censoring = parse_censoring(censoring, source_ + ": [simulation] censoring");
    if (config.censoring.law == CensoringSpec::Law::None)
        config.censoring = CensoringSpec::none(config.horizon);
    config.master_seed = static_cast<std::uint64_t>(get_int("simulation", "master_seed"));
    config.threads = static_cast<int>(get_int_or("simulation", "threads", 0));
    std::string initial = get_string("simulation", "initial_state");
    config.initial_state = config.model.states.find(initial);
    if (config.initial_state < 0)
        throw ValidationError(source_ + ": initial_state '" + initial + "' is not declared");
    config.validate();
    return config;
}

TimeGrid AppConfig::grid() const {
    if (!has_section("grid")) throw ValidationError(source_ + ": no [grid] section");
    TimeGrid g{get_double_or("grid", "t0", 0.0), get_double("grid", "t_max"),
               static_cast<int>(get_int("grid", "bins"))};
    g.validate();
    return g;
}

std::optional<TimeGrid> AppConfig::duration_grid() const {
    if (!has_section("grid.duration")) return std::nullopt;
    TimeGrid g{get_double_or("grid.duration", "t0", 0.0), get_double("grid.duration", "t_max"),
               static_cast<int>(get_int("grid.duration", "bins"))};
    g.validate();
    return g;
}

int AppConfig::state_index(const std::string& label) const {
    int idx = model().states.find(label);
    if (idx < 0) throw ValidationError(source_ + ": state '" + label + "' is not declared");
    return idx;
}

std::pair<int, int> AppConfig::transition_key(const std::string& spec) const {
    auto arrow = spec.find("->");
    if (arrow == std::string::npos)
        throw ValidationError(source_ + ": transition must look like 'from -> to', got '" +
                              spec + "'");
    return {state_index(trim(spec.substr(0, arrow))), state_index(trim(spec.substr(arrow + 2)))};
}

}  // namespace msj
