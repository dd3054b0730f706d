#include "qgain/cache.hpp"

#include "qgain/error.hpp"
#include "qgain/format.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace qgain {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'Q', 'G', 'M', 'T'};

template <class T>
void put(std::string& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U u = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        if (pos_ + sizeof(T) > bytes_.size()) throw ValidationError("moment table file is truncated");
        U u = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) {
            u |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        }
        pos_ += sizeof(T);
        return std::bit_cast<T>(u);
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 4;
};

std::uint8_t method_code(MomentMethod m) {
    switch (m) {
    case MomentMethod::quadrature: return 0;
    case MomentMethod::monte_carlo: return 1;
    case MomentMethod::blom: return 2;
    }
    return 255;
}

MomentMethod method_from_code(std::uint8_t c) {
    switch (c) {
    case 0: return MomentMethod::quadrature;
    case 1: return MomentMethod::monte_carlo;
    case 2: return MomentMethod::blom;
    default: throw ValidationError("moment table file has an unknown method code");
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

class FileLock {
public:
    explicit FileLock(const fs::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw std::runtime_error("cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw std::runtime_error("cannot lock " + path.string());
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

bool default_grid(const QuadratureSettings& g) {
    const QuadratureSettings d{};
    return g.lower == d.lower && g.upper == d.upper && g.panels == d.panels;
}

} // namespace

std::string encode_moment_table(const MomentTable& t) {
    require(t.lambda >= 1 && t.e1.size() == t.lambda, "moment table is inconsistent");
    std::string out(kMagic, 4);
    put(out, kMomentFormatVersion);
    put(out, static_cast<std::int32_t>(t.lambda));
    put(out, method_code(t.method));
    put(out, static_cast<std::uint8_t>(t.has_e2() ? 1 : 0));
    put(out, static_cast<std::int64_t>(t.mc_samples.value_or(0)));
    put(out, static_cast<std::uint64_t>(t.seed.value_or(0)));
    put(out, t.mc_std_err.value_or(0.0));
    for (int i = 0; i < t.lambda; ++i) put(out, t.e1[i]);
    if (t.e2) {
        require(t.e2->rows() == t.lambda && t.e2->cols() == t.lambda, "e2 has wrong shape");
        for (Eigen::Index k = 0; k < t.e2->size(); ++k) put(out, t.e2->data()[k]);
    }
    return out;
}

MomentTable decode_moment_table(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ValidationError("not a moment table file (bad magic)");
    }
    Reader r(bytes);
    const auto version = r.get<std::uint32_t>();
    if (version != kMomentFormatVersion) {
        throw ValidationError("moment table version " + std::to_string(version) + " does not match " +
                              std::to_string(kMomentFormatVersion));
    }
    MomentTable t;
    t.lambda = r.get<std::int32_t>();
    if (t.lambda < 1 || t.lambda > 100000000) throw ValidationError("moment table has invalid lambda");
    t.method = method_from_code(r.get<std::uint8_t>());
    const bool has_e2 = r.get<std::uint8_t>() != 0;
    const auto samples = r.get<std::int64_t>();
    const auto seed = r.get<std::uint64_t>();
    const auto se = r.get<double>();
    t.e1.resize(t.lambda);
    for (int i = 0; i < t.lambda; ++i) t.e1[i] = r.get<double>();
    if (has_e2) {
        Eigen::MatrixXd e2(t.lambda, t.lambda);
        for (Eigen::Index k = 0; k < e2.size(); ++k) e2.data()[k] = r.get<double>();
        t.e2 = std::move(e2);
        t.mc_samples = samples;
        t.seed = seed;
        t.mc_std_err = se;
    }
    if (!r.done()) throw ValidationError("moment table file has trailing bytes");
    return t;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(parent);
    const fs::path tmp = parent / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_moment_table(const fs::path& path, const MomentTable& table) {
    write_file_atomic(path, encode_moment_table(table));
}

MomentTable read_moment_table(const fs::path& path) { return decode_moment_table(read_file(path)); }

std::string moment_table_to_csv(const MomentTable& t) {
    std::string out = "# lambda=" + std::to_string(t.lambda) + " method=" + to_string(t.method);
    if (t.e2) {
        out += " samples=" + std::to_string(t.mc_samples.value_or(0)) +
               " seed=" + std::to_string(t.seed.value_or(0)) +
               " std_err=" + format_double(t.mc_std_err.value_or(0.0));
    }
    out += "\ni,e1";
    if (t.e2) {
        for (int j = 1; j <= t.lambda; ++j) out += ",e2_" + std::to_string(j);
    }
    out += "\n";
    for (int i = 0; i < t.lambda; ++i) {
        out += std::to_string(i + 1) + "," + format_double(t.e1[i]);
        if (t.e2) {
            for (int j = 0; j < t.lambda; ++j) out += "," + format_double((*t.e2)(i, j));
        }
        out += "\n";
    }
    return out;
}

MomentTable moment_table_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    MomentTable t;
    std::vector<std::vector<double>> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string kv;
            while (meta >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
                if (k == "method") t.method = moment_method_from_string(v);
                else if (k == "samples") t.mc_samples = std::stoll(v);
                else if (k == "seed") t.seed = std::stoull(v);
                else if (k == "std_err") t.mc_std_err = parse_double(v);
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto cells = split(line, ',');
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c]));
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), "moment CSV has no rows");
    t.lambda = static_cast<int>(rows.size());
    const std::size_t width = rows.front().size();
    require(width == 1 || width == rows.size() + 1, "moment CSV has the wrong number of columns");
    t.e1.resize(t.lambda);
    if (width > 1) t.e2 = Eigen::MatrixXd(t.lambda, t.lambda);
    for (int i = 0; i < t.lambda; ++i) {
        require(rows[i].size() == width, "moment CSV rows differ in length");
        t.e1[i] = rows[i][0];
        for (int j = 0; t.e2 && j < t.lambda; ++j) (*t.e2)(i, j) = rows[i][j + 1];
    }
    if (!t.e2) {
        t.mc_samples.reset();
        t.seed.reset();
        t.mc_std_err.reset();
    }
    return t;
}

fs::path default_cache_dir() {
    if (const char* env = std::getenv("QGAIN_CACHE_DIR"); env && *env) return fs::path(env);
    if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "qgain";
    return fs::path(".qgain_cache");
}

std::string cache_filename(int lambda, MomentMethod method, std::int64_t samples, std::uint64_t seed) {
    return "qgmt_l" + std::to_string(lambda) + "_" + to_string(method) + "_s" + std::to_string(samples) +
           "_seed" + std::to_string(seed) + ".bin";
}

std::string cache_filename(const MomentTable& t) {
    return cache_filename(t.lambda, t.method, t.e2 ? t.mc_samples.value_or(0) : 0,
                          t.e2 ? t.seed.value_or(0) : 0);
}

MomentCache::MomentCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path MomentCache::path_for(const TableRequest& req) const {
    const std::int64_t samples =
        req.with_e2 ? (req.samples > 0 ? req.samples : default_e2_samples(req.lambda)) : 0;
    const std::uint64_t seed = req.with_e2 ? req.seed : 0;
    return dir_ / cache_filename(req.lambda, req.method, samples, seed);
}

MomentTable MomentCache::get(const TableRequest& req, bool* hit) const {
    if (hit) *hit = false;
    if (!default_grid(req.grid)) return build_table(req);
    require(req.lambda >= 1, "lambda must be at least 1");
    fs::create_directories(dir_);
    const fs::path path = path_for(req);
    FileLock lock(fs::path(path.string() + ".lock"));
    if (fs::exists(path)) {
        MomentTable t = read_moment_table(path);
        if (t.lambda != req.lambda || t.method != req.method || t.has_e2() != req.with_e2) {
            throw ValidationError("cache file " + path.string() + " does not match its key");
        }
        if (hit) *hit = true;
        return t;
    }
    MomentTable t = build_table(req);
    write_moment_table(path, t);
    return t;
}

MomentProvider cached_moments(const MomentCache& cache, std::uint64_t seed, int workers) {
    return [cache, seed, workers](int lambda, bool need_e2) {
        TableRequest req;
        req.lambda = lambda;
        req.method = figure_method(lambda);
        req.with_e2 = need_e2;
        req.seed = seed;
        req.workers = workers;
        return cache.get(req);
    };
}

} // namespace qgain
