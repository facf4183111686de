#include "floodgnn/common.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace floodgnn {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw InvalidInput("truncated binary container");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::raw(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + path);
    }
    fs::rename(tmp, p);
}

void write_container_header(ByteWriter& w, std::string_view magic, std::uint32_t version,
                            const std::string& json_text) {
    w.raw(magic);
    w.u32(version);
    w.u32(static_cast<std::uint32_t>(json_text.size()));
    w.raw(json_text);
}

std::string read_container_header(ByteReader& r, std::string_view magic, std::uint32_t version) {
    if (r.remaining() < magic.size() || r.raw(magic.size()) != magic)
        throw InvalidInput("bad magic, expected " + std::string(magic));
    std::uint32_t v = r.u32();
    if (v != version)
        throw InvalidInput(std::string(magic) + ": unsupported version " + std::to_string(v));
    std::uint32_t n = r.u32();
    return r.raw(n);
}

}  // namespace floodgnn
