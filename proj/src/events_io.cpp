#include "events_io.hpp"

#include "csv.hpp"

namespace msj {

namespace {

constexpr std::string_view kCensorLabel = "CENS";

}  // namespace

std::string events_csv(std::span<const Trajectory> cohort, const StateSpace& states) {
    std::string out = "id,time,from,to\n";
    for (const Trajectory& traj : cohort) {
        int state = traj.initial_state;
        for (const Jump& j : traj.jumps) {
            out += std::to_string(traj.subject_id);
            out += ',';
            out += format_sig9(j.time);
            out += ',';
            out += states.label(j.from);
            out += ',';
            out += states.label(j.to);
            out += '\n';
            state = j.to;
        }
        out += std::to_string(traj.subject_id);
        out += ',';
        out += format_sig9(traj.censor_time);
        out += ',';
        out += states.label(state);
        out += ",CENS\n";
    }
    return out;
}

void write_events_csv(const std::string& path, std::span<const Trajectory> cohort,
                      const StateSpace& states) {
    write_text_file(path, events_csv(cohort, states));
}

IngestResult ingest_events(const std::string& path) {
    return ingest_events_text(read_text_file(path), path);
}

IngestResult ingest_events_text(std::string_view text, const std::string& source_name) {
    IngestResult result;
    auto intern = [&](std::string_view label, int line) {
        if (label == kCensorLabel)
            throw ValidationError(source_name + ":" + std::to_string(line) +
                                  ": CENS is reserved for censoring rows");
        int idx = result.states.find(label);
        if (idx >= 0) return idx;
        result.states.labels.emplace_back(label);
        return result.states.size() - 1;
    };

    bool have_subject = false;
    bool have_prev_id = false;
    std::int64_t prev_id = 0;
    Trajectory current;
    int current_state = 0;
    bool censored = false;

    auto flush = [&](int line) {
        if (!have_subject) return;
        if (!censored)
            throw ValidationError(source_name + ":" + std::to_string(line) + ": subject " +
                                  std::to_string(current.subject_id) + " has no CENS row");
        result.cohort.push_back(std::move(current));
        current = Trajectory{};
        have_subject = false;
        censored = false;
    };

    std::size_t pos = 0;
    int line_no = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line =
            eol == std::string_view::npos ? text.substr(pos) : text.substr(pos, eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        if (!saw_header) {
            if (line != "id,time,from,to")
                throw ValidationError(source_name + ":1: expected header id,time,from,to");
            saw_header = true;
            continue;
        }

        const std::string where = source_name + ":" + std::to_string(line_no);
        auto fields = split_csv_line(line);
        if (fields.size() != 4)
            throw ValidationError(where + ": expected 4 fields, got " +
                                  std::to_string(fields.size()));
        std::int64_t id = parse_int(fields[0], where);
        double time = parse_double(fields[1], where);
        if (time < 0.0) throw ValidationError(where + ": negative time");

        if (have_prev_id && id < prev_id)
            throw ValidationError(where + ": rows are not sorted by id");
        if (!have_subject || id != current.subject_id) {
            if (have_subject && id == prev_id)
                throw ValidationError(where + ": rows for subject " + std::to_string(id) +
                                      " are not contiguous");
            flush(line_no);
            current.subject_id = id;
            have_subject = true;
            censored = false;
            current.initial_state = intern(fields[2], line_no);
            current_state = current.initial_state;
        }
        prev_id = id;
        have_prev_id = true;

        if (censored)
            throw ValidationError(where + ": row after the CENS row for subject " +
                                  std::to_string(id));

        double last_time = current.jumps.empty() ? -1.0 : current.jumps.back().time;
        if (!current.jumps.empty() && !(time > last_time))
            throw ValidationError(where + ": times not strictly increasing for subject " +
                                  std::to_string(id));

        int from = intern(fields[2], line_no);
        if (from != current_state)
            throw ValidationError(where + ": subject " + std::to_string(id) + " is in state '" +
                                  result.states.label(current_state) + "' but row says '" +
                                  std::string(fields[2]) + "'");

        if (fields[3] == kCensorLabel) {
            current.censor_time = time;
            censored = true;
        } else {
            int to = intern(fields[3], line_no);
            if (to == from)
                throw ValidationError(where + ": self transition for subject " +
                                      std::to_string(id));
            current.jumps.push_back({time, from, to});
            current_state = to;
        }
    }
    flush(line_no);
    if (!saw_header) throw ValidationError(source_name + ": empty events file");
    return result;
}

}  // namespace msj
