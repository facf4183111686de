#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace floodgnn {

/// Rejected input: bad configuration, violated precondition, malformed file.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values or physically impossible states produced while computing.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Small deterministic RNG helpers. The standard distributions are
// implementation-defined, so everything that must reproduce bit-for-bit
// draws through these.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ULL) { next_u64(); }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// 64-bit FNV-1a, used for content identity of artifacts (not security).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

/// "%.17g" formatting; every float written to text artifacts goes through this.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Little-endian binary helpers shared by the FGB/FGG/FGP containers.

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void raw(std::string_view s) { buf_.append(s); }
    void f64_array(std::span<const double> a) { for (double v : a) f64(v); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string raw(std::size_t n);
    bool at_end() const { return pos_ == buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) const;
    std::string buf_;
    std::size_t pos_ = 0;
};

/// Runs body(0..n-1) on up to `jobs` threads. Each index runs exactly once;
/// the exception of the lowest failing index is rethrown after all finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

std::string read_file(const std::string& path);
/// Writes atomically enough for our purposes: the file is either complete or absent.
void write_file(const std::string& path, std::string_view bytes);

/// Container header used by FGB, FGG and FGP: magic, u32 version, u32 length + JSON text.
void write_container_header(ByteWriter& w, std::string_view magic, std::uint32_t version,
                            const std::string& json_text);
/// Returns the JSON text; throws InvalidInput on bad magic or unsupported version.
std::string read_container_header(ByteReader& r, std::string_view magic, std::uint32_t version);

}  // namespace floodgnn
