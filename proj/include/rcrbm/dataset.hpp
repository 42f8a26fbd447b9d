#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rcrbm {

enum class Stage { baseline, early, inter, presurgery, unknown };
enum class Subtype { hr_pos_her2_neg, tn_or_her2_pos, unknown };

std::string_view to_string(Stage s);
std::string_view to_string(Subtype s);
Stage parse_stage(std::string_view s);
Subtype parse_subtype(std::string_view s);

struct SampleRecord {
    std::string sample_id;
    std::string patient_id;
    std::filesystem::path image_path;  // resolved against the manifest directory
    std::filesystem::path mask_path;
    int label = 0;                     // 1 = pCR, 0 = non-pCR
    Stage stage = Stage::unknown;
    Subtype subtype = Subtype::unknown;
};

struct Dataset {
    std::vector<SampleRecord> records;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

inline constexpr std::string_view kManifestHeader = "sample_id,patient_id,image,mask,label,stage,subtype";

// Parses the manifest CSV. Paths are resolved relative to the manifest's
// directory. Throws Error naming the row for malformed input.
Dataset load_manifest(const std::filesystem::path& path);

// Writes a manifest; paths are written relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const Dataset& ds);

Dataset make_dataset(std::vector<SampleRecord> records);

// Keeps records matching the given stage/subtype (nullopt = any).
Dataset filter_dataset(const Dataset& ds, std::optional<Stage> stage, std::optional<Subtype> subtype);

}  // namespace rcrbm
