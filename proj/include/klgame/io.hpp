#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "klgame/analysis.hpp"
#include "klgame/estimation.hpp"
#include "klgame/solver.hpp"

namespace klgame {

/// Shortest text form that round-trips a double exactly (17 significant digits).
std::string format_float(Scalar value);

/// Writes to "<path>.tmp" then renames, so partially written outputs never
/// appear under the final name.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Dataset CSV: header "x,a1,a2,p", 0-based indices, floats at 17 significant
/// digits.
std::string dataset_to_csv(const OfflineDataset& data);
void write_dataset_csv(const std::filesystem::path& path, const OfflineDataset& data);

/// Reads a dataset CSV, rejecting malformed rows and out-of-range indices.
/// The behavior policy is not stored in the file and is left empty.
OfflineDataset read_dataset_csv(const std::filesystem::path& path, Index num_contexts,
                                Index num_actions);

/// Trace CSV: header "t,alpha,V_t,residual"; optional columns left empty.
std::string trace_to_csv(const SelfPlayTrace& trace);

std::string bounds_to_json(const std::vector<BoundReport>& reports);

}  // namespace klgame
