#ifndef THERMOSCOPE_IO_HPP
#define THERMOSCOPE_IO_HPP

#include <string>

#include "json.hpp"
#include "thermoscope/dataset.hpp"
#include "thermoscope/report.hpp"
#include "thermoscope/simulate.hpp"

namespace thermoscope {

// Key order is part of the on-disk contract: serialize-parse-serialize is
// byte identical, and the digest is taken over this canonical text.
using Json = nlohmann::ordered_json;

Json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const Json& j);

// FNV-1a 64-bit over the canonical dataset text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
std::string dataset_digest(const Dataset& dataset);

Json report_to_json(const AssessmentReport& report, const Dataset& dataset);
Json estimate_to_json(const HamiltonianEstimate& estimate, const std::string& digest);

// Candidate levels: each entry names dataset observables, supplies explicit
// matrices, or gives coefficient vectors over the dataset observables.
std::vector<LevelOfDescription> levels_from_json(const Json& j, const Dataset& dataset);

SimulationConfig config_from_json(const Json& j);

// Tidy per-sample table: measured means, their projections onto one level,
// and the residuals.
std::string plot_csv(const Dataset& dataset, const LevelOfDescription& level);

// path "-" means stdin/stdout.
Json load_json(const std::string& path);
void save_text(const std::string& path, const std::string& text);

}  // namespace thermoscope

#endif
