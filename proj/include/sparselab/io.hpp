#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparselab/experiments.hpp"

namespace sparselab {

inline constexpr const char* kVersion = "0.3.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt12(double v);

// throws ConfigError naming the first key of `j` outside `allowed`
void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& where);
nlohmann::json load_json(const std::filesystem::path& path);

// FNV-1a, 16 hex digits; json variant hashes the canonical dump
std::string digest_bytes(const std::string& bytes);
std::string digest(const nlohmann::json& j);
std::string read_file(const std::filesystem::path& path);

void write_atomic(const std::filesystem::path& path, const std::string& content);

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool points = false;
};
struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
};
std::string svg_plot(const PlotSpec& spec);

// built from config blocks
DiscreteSpace space_from_json(const nlohmann::json& j);
BallBasis basis_from_config(const nlohmann::json& j);
GridFunction weight_from_json(const nlohmann::json& j, const BallBasis& basis);
GridFunction symbol_from_json(const nlohmann::json& j, const DiscreteSpace& space);

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::map<std::string, std::string> output_digests;
    int exit_code = 0;
    double wall_seconds = 0.0;
    std::string version = kVersion;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

}  // namespace sparselab
