#pragma once

#include <span>
#include <string>
#include <vector>

#include "model.hpp"
#include "simulate.hpp"

namespace msj {

// Event-history CSV: header `id,time,from,to`, one row per jump plus one
// terminal row per subject with to=CENS at the censor time. Times carry
// 9 significant digits; rows are sorted by (id, time); LF line endings.
std::string events_csv(std::span<const Trajectory> cohort, const StateSpace& states);

void write_events_csv(const std::string& path, std::span<const Trajectory> cohort,
                      const StateSpace& states);

struct IngestResult {
    std::vector<Trajectory> cohort;
    StateSpace states;  // labels in order of first appearance
};

// Streaming ingestion with per-row diagnostics (line numbers and subject
// ids). Enforces: sorted input, strictly increasing times per id, state-chain
// consistency, and exactly one CENS row per id, last.
IngestResult ingest_events(const std::string& path);
IngestResult ingest_events_text(std::string_view text, const std::string& source_name);

}  // namespace msj
