#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lab/config.hpp"

namespace sslgmm::lab {

struct TaskStatus {
    std::string name;
    bool ok = true;
    std::string message;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string experiment;
    std::string started_at;
    std::string finished_at;
    std::string status;  // complete | partial
    int threads = 1;
    std::vector<TaskStatus> tasks;
    std::vector<std::string> outputs;  // relative to output_dir, includes summary.json and manifest.json
    bool reused = false;               // identical config found on disk; nothing was run

    int failed_tasks() const;
};

struct RunOptions {
    int threads = 1;
    bool force = false;
    std::ostream* log = nullptr;
};

inline constexpr const char* manifest_name = "manifest.json";
inline constexpr const char* summary_name = "summary.json";

// Executes the configured protocol (each panel into its own subdirectory), writes CSVs,
// summary.json and manifest.json. Failed cells are recorded, not fatal.
RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Hash identifying a run: effective config plus library version.
std::string run_hash(const ExperimentConfig& cfg);

RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace sslgmm::lab
