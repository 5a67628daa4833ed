#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pbtrom {

/// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::byte> bytes);
    void update_doubles(std::span<const double> values);
    /// Lower-case hex digest; the object cannot be updated afterwards.
    std::string hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::span<const std::byte> bytes);

/// Little-endian encoding helpers for binary artifacts.
namespace binio {

inline constexpr std::size_t kHeaderSize = 16;

void append_u32(std::vector<std::byte>& out, std::uint32_t v);
void append_f64(std::vector<std::byte>& out, double v);
void append_f64s(std::vector<std::byte>& out, std::span<const double> values);

/// 8-byte magic, u32 version, u32 record count.
void append_header(std::vector<std::byte>& out, const char (&magic)[9], std::uint32_t version,
                   std::uint32_t count);

class Reader {
public:
    Reader(std::span<const std::byte> bytes, std::string what)
        : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32();
    double f64();
    void f64s(std::span<double> out);
    /// Checks magic and version, returns the record count.
    std::uint32_t header(const char (&magic)[9], std::uint32_t version);
    void expect_end() const;
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const;
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<std::byte> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::byte> bytes);

} // namespace binio
} // namespace pbtrom
