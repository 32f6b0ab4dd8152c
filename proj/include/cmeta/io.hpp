#pragma once

#include "cmeta/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace cmeta {

// Dataset files carry one study per record with the fields
// label, n11, n10, n01, n00. CSV files start with exactly that header; the
// JSON mirror is {"name": ..., "studies": [{"label": ..., "n11": ...}, ...]}.
// Readers only check syntax; call validate_dataset for the table invariants.

MetaDataset parse_csv(std::string_view text, std::string name);
MetaDataset parse_json(std::string_view text, std::string name = {});

std::string to_csv(const MetaDataset& ds);
std::string to_json(const MetaDataset& ds, int indent = 2);

/// Reads a .csv or .json file; the dataset name defaults to the file stem.
MetaDataset read_dataset(const std::filesystem::path& path);

/// read_dataset followed by validate_dataset.
MetaDataset load_dataset(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cmeta
