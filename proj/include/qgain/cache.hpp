#pragma once

// On-disk moment tables: a little-endian binary format for the cache and a
// CSV export, plus a provider that fills the cache on demand.

#include "qgain/experiments.hpp"
#include "qgain/order_stats.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace qgain {

inline constexpr std::uint32_t kMomentFormatVersion = 1;

/// Binary layout: "QGMT", u32 version, i32 λ, u8 method, u8 has_e2,
/// i64 samples, u64 seed, f64 std_err, λ doubles of e1, λ² doubles of e2
/// (column-major, only when has_e2).
std::string encode_moment_table(const MomentTable& table);
/// Throws ValidationError on bad magic, version mismatch or truncation.
MomentTable decode_moment_table(const std::string& bytes);

void write_moment_table(const std::filesystem::path& path, const MomentTable& table);
MomentTable read_moment_table(const std::filesystem::path& path);

/// CSV with columns i, e1 and, when present, e2_1..e2_λ (row i of E2).
std::string moment_table_to_csv(const MomentTable& table);
MomentTable moment_table_from_csv(const std::string& text);

/// Writes via a temporary file in the same directory and renames it over
/// the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// QGAIN_CACHE_DIR when set, otherwise $HOME/.cache/qgain, otherwise
/// ./.qgain_cache.
std::filesystem::path default_cache_dir();

/// qgmt_l{λ}_{method}_s{samples}_seed{seed}.bin; samples and seed are 0 for
/// tables without e2.
std::string cache_filename(const MomentTable& key_like);
std::string cache_filename(int lambda, MomentMethod method, std::int64_t samples, std::uint64_t seed);

class MomentCache {
public:
    explicit MomentCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    /// Returns the cached table for the request or builds and stores it.
    /// Concurrent callers for the same key are serialized by a lock file;
    /// other keys are never touched.
    MomentTable get(const TableRequest& request, bool* hit = nullptr) const;
    std::filesystem::path path_for(const TableRequest& request) const;

private:
    std::filesystem::path dir_;
};

/// Same tables as direct_moments, served through a cache.
MomentProvider cached_moments(const MomentCache& cache, std::uint64_t seed = 1, int workers = 1);

} // namespace qgain
