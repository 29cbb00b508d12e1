#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dpdlab/models.hpp"
#include "dpdlab/training.hpp"

namespace dpdlab::io {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

/// Structured-text model file: kind, M, layer specs, layout map, state
/// normalization and the flat parameter array (round-trip exact decimals).
std::string model_to_string(const dpd::DpdModel& model);
/// Throws Errc::io for malformed content or a version mismatch.
dpd::DpdModel model_from_string(const std::string& text);
void save_model(const std::filesystem::path& path, const dpd::DpdModel& model);
dpd::DpdModel load_model(const std::filesystem::path& path);

/// Binary dataset cache: "DPDLABDS" magic, u32 version, u64 header length,
/// JSON header (grid, gains, seeds, lengths), then per state the interleaved
/// little-endian doubles of input and target.
void save_dataset(const std::filesystem::path& path, const ila::Dataset& dataset);
ila::Dataset load_dataset(const std::filesystem::path& path);

/// Header: epoch,total_loss,J_<i>... for the trained states.
void write_loss_csv(std::ostream& os, const ila::TrainResult& result);

/// Writes via a temporary file and rename. Throws Errc::io.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dpdlab::io
