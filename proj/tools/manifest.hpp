#pragma once

// Run manifests: what a subcommand read, wrote and took, so each output can
// be traced back to its inputs and settings.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ct::cli {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& p);

class RunManifest {
public:
    explicit RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    void set_options(nlohmann::ordered_json options) { options_ = std::move(options); }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void input(const std::filesystem::path& p) { inputs_.push_back(p); }
    void output(const std::filesystem::path& p) { outputs_.push_back(p); }

    /// Runs f and records its wall time under `phase`.
    template <class F>
    decltype(auto) timed(const std::string& phase, F&& f)
    {
        const auto t0 = std::chrono::steady_clock::now();
        struct Stop {
            RunManifest* m;
            std::string phase;
            std::chrono::steady_clock::time_point t0;
            ~Stop() { m->timings_.emplace_back(phase, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()); }
        } stop{this, phase, t0};
        return f();
    }

    /// Writes the manifest; digests are taken now, after outputs exist.
    void write(const std::filesystem::path& where) const;

private:
    std::string subcommand_;
    nlohmann::ordered_json options_ = nlohmann::ordered_json::object();
    std::optional<std::uint64_t> seed_;
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::filesystem::path> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace ct::cli
