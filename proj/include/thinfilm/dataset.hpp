#pragma once
// Domain types and the on-disk dataset store.
//
// Layout: root/<patient_id>/<slide_id>/manifest.json
//         root/<patient_id>/<slide_id>/fov_<n>/z<k>.png   (8-bit RGB)
//         root/<patient_id>/<slide_id>/annotations.jsonl  (one object per line)
//         root/<patient_id>/<slide_id>/ground_truth.json  (optional)
// All coordinates are pixel units, origin top-left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinfilm/image.hpp"
#include "thinfilm/png_io.hpp"
#include "thinfilm/rng.hpp"

namespace thinfilm {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Stage { ring, late, transitional, doubtful };
enum class Species { Pf, Pv, Po, Pm, unknown };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::ring: return "ring";
        case Stage::late: return "late";
        case Stage::transitional: return "transitional";
        case Stage::doubtful: return "doubtful";
    }
    return "?";
}

inline const char* to_string(Species s) {
    switch (s) {
        case Species::Pf: return "Pf";
        case Species::Pv: return "Pv";
        case Species::Po: return "Po";
        case Species::Pm: return "Pm";
        case Species::unknown: return "unknown";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "ring") return Stage::ring;
    if (s == "late") return Stage::late;
    if (s == "transitional") return Stage::transitional;
    if (s == "doubtful") return Stage::doubtful;
    throw std::runtime_error("unknown stage: " + s);
}

inline Species species_from_string(const std::string& s) {
    if (s == "Pf") return Species::Pf;
    if (s == "Pv") return Species::Pv;
    if (s == "Po") return Species::Po;
    if (s == "Pm") return Species::Pm;
    if (s == "unknown") return Species::unknown;
    throw std::runtime_error("unknown species: " + s);
}

struct Annotation {
    double cx = 0.0, cy = 0.0;
    Stage stage = Stage::ring;
    Species species = Species::unknown;
    int fov_index = 0;
};

// One field of view: a z-stack of color images. Slices are loaded lazily
// from disk; synthetic FoVs may hold their slices in memory instead.
struct FovStack {
    int fov_index = 0;
    std::string slide_id;
    std::optional<std::pair<double, double>> stage_xy_um;
    std::vector<std::string> slice_paths;     // on-disk stack
    std::vector<ColorImage> slices_memory;    // in-memory stack (synthetic)

    std::size_t slice_count() const {
        return slice_paths.empty() ? slices_memory.size() : slice_paths.size();
    }

    ColorImage load_slice(std::size_t k) const {
        if (!slice_paths.empty()) return read_png(slice_paths.at(k));
        return slices_memory.at(k);
    }
};

// Synthetic ground truth for one rendered RBC.
struct GtRbc {
    double cx = 0.0, cy = 0.0;
    bool is_single = false;        // not part of a clump
    bool touches_border = false;
};

// Ground truth for one rendered object (parasite or distractor).
struct GtObject {
    double cx = 0.0, cy = 0.0;
    Stage stage = Stage::ring;
    Species species = Species::unknown;
    bool is_parasite = false;
    bool in_single_rbc = false;
    bool host_touches_border = false;  // host RBC excluded by the border rule
    int fov_index = 0;

    bool in_countable_rbc() const { return in_single_rbc && !host_touches_border; }
};

struct GroundTruth {
    std::optional<double> parasitemia_per_ul;   // from rendered counts
    std::optional<Species> species;
    std::optional<std::int64_t> rbc_count;      // countable single RBCs (non-border)
    std::vector<GtRbc> rbcs;                    // per-FoV lists flattened; fov in objects
    std::vector<GtObject> objects;
    std::map<int, std::vector<GtRbc>> rbcs_by_fov;
};

struct SampleRecord {
    std::string patient_id;
    std::string slide_id;
    std::string provenance = "synthetic";  // or "external"
    std::vector<FovStack> fovs;
    std::vector<Annotation> annotations;
    std::optional<GroundTruth> ground_truth;
    std::string root_dir;  // where this sample lives on disk, if loaded

    std::string key() const { return patient_id + "/" + slide_id; }
};

struct DatasetSplit {
    std::set<std::string> train;
    std::set<std::string> validation;
    std::set<std::string> holdout;
};

struct LoadReport {
    std::vector<std::string> warnings;  // per-sample problems, sample skipped
};

// ---------------------------------------------------------------------------
// Serialization

inline json ground_truth_to_json(const GroundTruth& gt) {
    json j;
    if (gt.parasitemia_per_ul) j["parasitemia_per_ul"] = *gt.parasitemia_per_ul;
    if (gt.species) j["species"] = to_string(*gt.species);
    if (gt.rbc_count) j["rbc_count"] = *gt.rbc_count;
    json fovs = json::object();
    for (const auto& [fov, rbcs] : gt.rbcs_by_fov) {
        json arr = json::array();
        for (const auto& r : rbcs) {
            arr.push_back({{"cx", r.cx}, {"cy", r.cy}, {"single", r.is_single}, {"border", r.touches_border}});
        }
        fovs[std::to_string(fov)] = std::move(arr);
    }
    j["rbcs_by_fov"] = std::move(fovs);
    json objs = json::array();
    for (const auto& o : gt.objects) {
        objs.push_back({{"cx", o.cx},
                        {"cy", o.cy},
                        {"fov", o.fov_index},
                        {"stage", to_string(o.stage)},
                        {"species", to_string(o.species)},
                        {"parasite", o.is_parasite},
                        {"in_single_rbc", o.in_single_rbc},
                        {"host_border", o.host_touches_border}});
    }
    j["objects"] = std::move(objs);
    return j;
}

inline GroundTruth ground_truth_from_json(const json& j) {
    GroundTruth gt;
    if (j.contains("parasitemia_per_ul")) gt.parasitemia_per_ul = j["parasitemia_per_ul"].get<double>();
    if (j.contains("species")) gt.species = species_from_string(j["species"].get<std::string>());
    if (j.contains("rbc_count")) gt.rbc_count = j["rbc_count"].get<std::int64_t>();
    if (j.contains("rbcs_by_fov")) {
        for (const auto& [key, arr] : j["rbcs_by_fov"].items()) {
            const int fov = std::stoi(key);
            for (const auto& e : arr) {
                GtRbc r;
                r.cx = e["cx"].get<double>();
                r.cy = e["cy"].get<double>();
                r.is_single = e["single"].get<bool>();
                r.touches_border = e["border"].get<bool>();
                gt.rbcs_by_fov[fov].push_back(r);
                gt.rbcs.push_back(r);
            }
        }
    }
    if (j.contains("objects")) {
        for (const auto& e : j["objects"]) {
            GtObject o;
            o.cx = e["cx"].get<double>();
            o.cy = e["cy"].get<double>();
            o.fov_index = e["fov"].get<int>();
            o.stage = stage_from_string(e["stage"].get<std::string>());
            o.species = species_from_string(e["species"].get<std::string>());
            o.is_parasite = e["parasite"].get<bool>();
            o.in_single_rbc = e["in_single_rbc"].get<bool>();
            o.host_touches_border = e.value("host_border", false);
            gt.objects.push_back(o);
        }
    }
    return gt;
}

// Write one sample to root/<patient>/<slide>/. FoV slices must be in memory.
inline void save_sample(const fs::path& root, const SampleRecord& sample) {
    const fs::path dir = root / sample.patient_id / sample.slide_id;
    fs::create_directories(dir);

    json manifest;
    manifest["schema_version"] = 1;
    manifest["patient_id"] = sample.patient_id;
    manifest["slide_id"] = sample.slide_id;
    manifest["provenance"] = sample.provenance;
    json fovs = json::array();
    for (const auto& fov : sample.fovs) {
        const std::string fov_dir = "fov_" + std::to_string(fov.fov_index);
        fs::create_directories(dir / fov_dir);
        json jf;
        jf["index"] = fov.fov_index;
        jf["dir"] = fov_dir;
        jf["slices"] = static_cast<int>(fov.slice_count());
        if (fov.stage_xy_um) jf["stage_xy_um"] = {fov.stage_xy_um->first, fov.stage_xy_um->second};
        for (std::size_t k = 0; k < fov.slice_count(); ++k) {
            const std::string name = "z" + std::to_string(k) + ".png";
            write_png((dir / fov_dir / name).string(), fov.load_slice(k));
        }
        fovs.push_back(std::move(jf));
    }
    manifest["fovs"] = std::move(fovs);
    {
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "annotations.jsonl");
        for (const auto& a : sample.annotations) {
            json ja = {{"cx", a.cx},
                       {"cy", a.cy},
                       {"stage", to_string(a.stage)},
                       {"species", to_string(a.species)},
                       {"fov", a.fov_index}};
            out << ja.dump() << "\n";
        }
    }
    if (sample.ground_truth) {
        std::ofstream out(dir / "ground_truth.json");
        out << ground_truth_to_json(*sample.ground_truth).dump() << "\n";
    }
}

inline SampleRecord load_sample_dir(const fs::path& slide_dir) {
    const fs::path manifest_path = slide_dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing manifest: " + manifest_path.string());
    json manifest = json::parse(in);

    SampleRecord sample;
    sample.patient_id = manifest.at("patient_id").get<std::string>();
    sample.slide_id = manifest.at("slide_id").get<std::string>();
    sample.provenance = manifest.value("provenance", std::string("external"));
    sample.root_dir = slide_dir.string();

    for (const auto& jf : manifest.at("fovs")) {
        FovStack fov;
        fov.fov_index = jf.at("index").get<int>();
        fov.slide_id = sample.slide_id;
        if (jf.contains("stage_xy_um")) {
            fov.stage_xy_um = {jf["stage_xy_um"][0].get<double>(), jf["stage_xy_um"][1].get<double>()};
        }
        const std::string fov_dir = jf.at("dir").get<std::string>();
        const int slices = jf.at("slices").get<int>();
        for (int k = 0; k < slices; ++k) {
            const fs::path p = slide_dir / fov_dir / ("z" + std::to_string(k) + ".png");
            if (!fs::exists(p)) throw std::runtime_error("missing image: " + p.string());
            fov.slice_paths.push_back(p.string());
        }
        sample.fovs.push_back(std::move(fov));
    }

    const fs::path ann_path = slide_dir / "annotations.jsonl";
    if (fs::exists(ann_path)) {
        std::ifstream ann(ann_path);
        std::string line;
        int lineno = 0;
        while (std::getline(ann, line)) {
            ++lineno;
            if (line.empty()) continue;
            json ja = json::parse(line);
            Annotation a;
            a.cx = ja.at("cx").get<double>();
            a.cy = ja.at("cy").get<double>();
            a.stage = stage_from_string(ja.at("stage").get<std::string>());
            a.species = species_from_string(ja.at("species").get<std::string>());
            a.fov_index = ja.at("fov").get<int>();
            sample.annotations.push_back(a);
        }
    }

    const fs::path gt_path = slide_dir / "ground_truth.json";
    if (fs::exists(gt_path)) {
        std::ifstream gt_in(gt_path);
        sample.ground_truth = ground_truth_from_json(json::parse(gt_in));
    }
    return sample;
}

// Load every sample under root. A missing root or unreadable directory
// structure is fatal; per-sample problems are reported and the sample
// skipped.
inline std::vector<SampleRecord> load_dataset(const fs::path& root, LoadReport* report = nullptr) {
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw std::runtime_error("dataset root does not exist: " + root.string());
    }
    std::vector<SampleRecord> samples;
    std::vector<fs::path> slide_dirs;
    for (const auto& patient : fs::directory_iterator(root)) {
        if (!patient.is_directory()) continue;
        for (const auto& slide : fs::directory_iterator(patient.path())) {
            if (!slide.is_directory()) continue;
            slide_dirs.push_back(slide.path());
        }
    }
    std::sort(slide_dirs.begin(), slide_dirs.end());
    for (const auto& dir : slide_dirs) {
        try {
            samples.push_back(load_sample_dir(dir));
        } catch (const std::exception& e) {
            if (report) report->warnings.push_back(e.what());
        }
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Patient-level splitting

// Deterministic patient-level split. Multi-slide patients always land in a
// single partition. Partition sizes use largest-remainder rounding so that
// they always sum to the patient count.
inline DatasetSplit split_by_patient(const std::vector<SampleRecord>& samples,
                                     double train_frac, double val_frac, double holdout_frac,
                                     std::uint64_t seed) {
    const double total = train_frac + val_frac + holdout_frac;
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
    if (train_frac < 0 || val_frac < 0 || holdout_frac < 0) throw std::invalid_argument("split fractions must be nonnegative");

    std::set<std::string> patient_set;
    for (const auto& s : samples) patient_set.insert(s.patient_id);
    std::vector<std::string> patients(patient_set.begin(), patient_set.end());

    int nonzero = (train_frac > 0) + (val_frac > 0) + (holdout_frac > 0);
    if (static_cast<int>(patients.size()) < nonzero) {
        throw std::runtime_error("fewer patients than nonzero partitions");
    }

    Rng rng(seed);
    rng.shuffle(patients);

    const auto n = static_cast<double>(patients.size());
    const double exact[3] = {train_frac * n, val_frac * n, holdout_frac * n};
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        counts[i] = static_cast<std::size_t>(std::floor(exact[i]));
        remainders[i] = exact[i] - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < patients.size()) {
        int best = -1;
        for (int i = 0; i < 3; ++i) {
            // Only partitions with a nonzero fraction may absorb remainders.
            if (exact[i] <= 0.0) continue;
            if (best < 0 || remainders[i] > remainders[best]) best = i;
        }
        ++counts[best];
        remainders[best] = -1.0;
        ++assigned;
    }
    // Guarantee at least one patient per nonzero partition.
    for (int i = 0; i < 3; ++i) {
        if (exact[i] > 0.0 && counts[i] == 0) {
            int donor = 0;
            for (int j = 0; j < 3; ++j)
                if (counts[j] > counts[donor]) donor = j;
            --counts[donor];
            ++counts[i];
        }
    }

    DatasetSplit split;
    std::size_t k = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) split.train.insert(patients[k++]);
    for (std::size_t i = 0; i < counts[1]; ++i) split.validation.insert(patients[k++]);
    for (std::size_t i = 0; i < counts[2]; ++i) split.holdout.insert(patients[k++]);
    return split;
}

// Distractor pool for classifier training: detections farther than
// match_radius from EVERY annotation. Transitional and doubtful annotations
// also shield their neighborhood, keeping ambiguous objects out of the
// negative pool. Works on any detection type exposing center coordinates.
constexpr double kDefaultMatchRadiusPx = 10.0;

template <typename Det>
std::vector<Det> derive_distractor_pool(const SampleRecord& sample,
                                        const std::vector<Det>& detections,
                                        double match_radius = kDefaultMatchRadiusPx) {
    std::vector<Det> pool;
    for (const auto& det : detections) {
        bool near_annotation = false;
        for (const auto& a : sample.annotations) {
            if (a.fov_index != det.fov_index) continue;
            const double dx = a.cx - det.cx, dy = a.cy - det.cy;
            if (dx * dx + dy * dy <= match_radius * match_radius) {
                near_annotation = true;
                break;
            }
        }
        if (!near_annotation) pool.push_back(det);
    }
    return pool;
}

inline json split_to_json(const DatasetSplit& s) {
    auto arr = [](const std::set<std::string>& v) { return json(std::vector<std::string>(v.begin(), v.end())); };
    return json{{"schema_version", 1}, {"train", arr(s.train)}, {"validation", arr(s.validation)}, {"holdout", arr(s.holdout)}};
}

inline DatasetSplit split_from_json(const json& j) {
    DatasetSplit s;
    for (const auto& p : j.at("train")) s.train.insert(p.get<std::string>());
    for (const auto& p : j.at("validation")) s.validation.insert(p.get<std::string>());
    for (const auto& p : j.at("holdout")) s.holdout.insert(p.get<std::string>());
    return s;
}

}  // namespace thinfilm
