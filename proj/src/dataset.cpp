#include "rcrbm/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "rcrbm/error.hpp"

namespace rcrbm {

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::baseline: return "baseline";
        case Stage::early: return "early";
        case Stage::inter: return "inter";
        case Stage::presurgery: return "presurgery";
        case Stage::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Subtype s) {
    switch (s) {
        case Subtype::hr_pos_her2_neg: return "HR+HER2-";
        case Subtype::tn_or_her2_pos: return "TN/HER2+";
        case Subtype::unknown: return "unknown";
    }
    return "unknown";
}

Stage parse_stage(std::string_view s) {
    for (auto st : {Stage::baseline, Stage::early, Stage::inter, Stage::presurgery, Stage::unknown})
        if (to_string(st) == s) return st;
    throw Error("unknown stage '" + std::string(s) + "'");
}

Subtype parse_subtype(std::string_view s) {
    for (auto st : {Subtype::hr_pos_her2_neg, Subtype::tn_or_her2_pos, Subtype::unknown})
        if (to_string(st) == s) return st;
    throw Error("unknown subtype '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace

Dataset make_dataset(std::vector<SampleRecord> records) {
    Dataset ds;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.sample_id).second) throw Error("duplicate sample_id '" + r.sample_id + "'");
        if (r.label != 0 && r.label != 1) throw Error("label of '" + r.sample_id + "' must be 0 or 1");
        (r.label == 1 ? ds.n_positive : ds.n_negative)++;
    }
    ds.records = std::move(records);
    return ds;
}

Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    const auto base = path.parent_path();

    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
    strip_cr(line);
    if (line != kManifestHeader) {
        throw Error(path.string() + ": header must be '" + std::string(kManifestHeader) + "'");
    }

    std::vector<SampleRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const auto where = path.string() + " row " + std::to_string(row);
        if (cells.size() != 7) {
            throw Error(where + ": expected 7 fields, got " + std::to_string(cells.size()));
        }
        SampleRecord r;
        r.sample_id = cells[0];
        r.patient_id = cells[1];
        if (r.sample_id.empty()) throw Error(where + ": empty sample_id");
        r.image_path = base / cells[2];
        r.mask_path = base / cells[3];
        if (cells[4] == "0") {
            r.label = 0;
        } else if (cells[4] == "1") {
            r.label = 1;
        } else {
            throw Error(where + ": label must be 0 or 1, got '" + cells[4] + "'");
        }
        try {
            r.stage = parse_stage(cells[5]);
            r.subtype = parse_subtype(cells[6]);
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    return make_dataset(std::move(records));
}

void write_manifest(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write manifest " + path.string());
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return (base.empty() ? p : p.lexically_relative(base)).generic_string();
    };
    out << kManifestHeader << '\n';
    for (const auto& r : ds.records) {
        out << r.sample_id << ',' << r.patient_id << ','
            << rel(r.image_path) << ',' << rel(r.mask_path) << ',' << r.label << ','
            << to_string(r.stage) << ',' << to_string(r.subtype) << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

Dataset filter_dataset(const Dataset& ds, std::optional<Stage> stage, std::optional<Subtype> subtype) {
    std::vector<SampleRecord> kept;
    for (const auto& r : ds.records) {
        if (stage && r.stage != *stage) continue;
        if (subtype && r.subtype != *subtype) continue;
        kept.push_back(r);
    }
    return make_dataset(std::move(kept));
}

}  // namespace rcrbm
