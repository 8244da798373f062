#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffq/estimator.hpp"
#include "ffq/smoothing.hpp"

namespace ffq::io {

std::string version();

// Shortest-round-trip decimal text; used for every numeric output so reruns
// are byte-identical.
std::string format_double(double v);

std::uint64_t fnv1a(const std::string& s);
std::string config_hash(const nlohmann::json& config);

// Long-format CSV (subject_id, time, value), one variable per file. Rows are
// grouped by subject in order of first appearance and sorted by time within
// a subject. map_months rescales times linearly from {1..12} onto the
// declared domain.
LongitudinalDataset read_long_csv(const std::string& path, const std::string& variable,
                                  double domain_lo, double domain_hi, bool map_months);

struct MetaHeader {
    std::string config_hash;
    std::uint64_t seed = 0;
};

// CSV with a '#'-prefixed metadata block (tool version, config hash, seed)
// above the header row.
void write_csv(const std::string& path, const MetaHeader& meta,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);

nlohmann::json basis_to_json(const BasisSystem& basis);
BasisSystem basis_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

}  // namespace ffq::io
