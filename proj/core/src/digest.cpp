#include "pbtrom/digest.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "pbtrom/error.hpp"

namespace pbtrom {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are written in native order and assume a little-endian host");

struct Sha256::Impl {
    EVP_MD_CTX* ctx = nullptr;
    bool finished = false;
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest initialization failed");
    }
}

Sha256::~Sha256() {
    if (impl_ && impl_->ctx != nullptr) EVP_MD_CTX_free(impl_->ctx);
}

void Sha256::update(std::span<const std::byte> bytes) {
    if (impl_->finished) throw StateError("sha256: update after hex()");
    if (bytes.empty()) return;
    EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
}

void Sha256::update_doubles(std::span<const double> values) {
    update(std::as_bytes(values));
}

std::string Sha256::hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(impl_->ctx, md, &len);
    impl_->finished = true;
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::span<const std::byte> bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex();
}

namespace binio {

void append_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::vector<std::byte>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFF));
}

void append_f64s(std::vector<std::byte>& out, std::span<const double> values) {
    const auto bytes = std::as_bytes(values);
    out.insert(out.end(), bytes.begin(), bytes.end());
}

void append_header(std::vector<std::byte>& out, const char (&magic)[9], std::uint32_t version,
                   std::uint32_t count) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>(magic[i]));
    append_u32(out, version);
    append_u32(out, count);
}

void Reader::need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
        throw FormatError(what_ + ": truncated (needed " + std::to_string(n) + " more bytes at offset " +
                          std::to_string(pos_) + ")");
    }
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(std::to_integer<unsigned>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
}

double Reader::f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(std::to_integer<unsigned>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
}

void Reader::f64s(std::span<double> out) {
    need(out.size() * 8);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * 8);
    pos_ += out.size() * 8;
}

std::uint32_t Reader::header(const char (&magic)[9], std::uint32_t version) {
    need(kHeaderSize);
    if (std::memcmp(bytes_.data() + pos_, magic, 8) != 0) {
        throw FormatError(what_ + ": bad magic (expected " + std::string(magic, 8) + ")");
    }
    pos_ += 8;
    const auto v = u32();
    if (v != version) {
        throw FormatError(what_ + ": unsupported format version " + std::to_string(v));
    }
    return u32();
}

void Reader::expect_end() const {
    if (pos_ != bytes_.size()) {
        throw FormatError(what_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
    }
}

std::vector<std::byte> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

void write_file(const std::string& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path);
}

} // namespace binio
} // namespace pbtrom
