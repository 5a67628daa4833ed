#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include <pbtrom/checkpoint.hpp>
#include <pbtrom/error.hpp>

#include "test_util.hpp"

using namespace pbtrom;
namespace fs = std::filesystem;

namespace {

void flip_byte(const std::string& path, std::streamoff at) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(at);
    char c = 0;
    f.get(c);
    f.seekp(at);
    f.put(static_cast<char>(c ^ 0x5a));
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2);
}

btrom::Column sample_column(std::uint64_t seed) {
    auto c = btrom::build_column(40, 3, 6, seed);
    c.scaler = {-0.5, 2.0};
    return c;
}

} // namespace

TEST(ColumnCheckpoint, RoundTripIsBitExact) {
    const auto col = btrom::freeze(sample_column(1));
    const auto dir = testutil::temp_dir("ckpt_col");
    checkpoint::save_column(col, dir);
    EXPECT_EQ(checkpoint::checkpoint_kind(dir), "column");
    const auto back = checkpoint::load_column(dir);
    EXPECT_EQ(back, col);
    EXPECT_EQ(btrom::parameter_digest(back), btrom::parameter_digest(col));
}

TEST(ColumnCheckpoint, WeightsLayout) {
    const auto col = sample_column(2);
    const auto bytes = checkpoint::column_weights(col);
    std::size_t params = 0;
    for (auto c : {Component::Encoder, Component::Decoder, Component::Projector}) params += col.parameter_count(c);
    EXPECT_EQ(bytes.size(), 16 + 8 * params);
    EXPECT_EQ(std::memcmp(bytes.data(), "PBTWGT", 6), 0);
    double first = 0.0;
    std::memcpy(&first, bytes.data() + 16, 8);
    EXPECT_EQ(first, col.encoder[0].W(0, 0));
    double second = 0.0;
    std::memcpy(&second, bytes.data() + 24, 8);
    EXPECT_EQ(second, col.encoder[0].W(0, 1));
}

TEST(ColumnCheckpoint, TamperedWeightsFail) {
    const auto dir = testutil::temp_dir("ckpt_col_tamper");
    checkpoint::save_column(sample_column(3), dir);
    flip_byte(dir + "/weights.bin", 100);
    EXPECT_THROW(checkpoint::load_column(dir), FormatError);
}

TEST(ColumnCheckpoint, TruncatedWeightsFail) {
    const auto dir = testutil::temp_dir("ckpt_col_trunc");
    checkpoint::save_column(sample_column(4), dir);
    fs::resize_file(dir + "/weights.bin", fs::file_size(dir + "/weights.bin") - 8);
    EXPECT_THROW(checkpoint::load_column(dir), FormatError);
}

TEST(ColumnCheckpoint, WrongVersionFails) {
    const auto dir = testutil::temp_dir("ckpt_col_version");
    checkpoint::save_column(sample_column(5), dir);
    auto j = read_json(dir + "/manifest.json");
    j["format_version"] = checkpoint::kFormatVersion + 1;
    write_json(dir + "/manifest.json", j);
    EXPECT_THROW(checkpoint::load_column(dir), FormatError);
}

TEST(ColumnCheckpoint, MissingDirectoryFails) {
    EXPECT_THROW(checkpoint::load_column(testutil::temp_dir("ckpt_missing") + "/nope"), FormatError);
}

TEST(StackCheckpoint, RoundTripWithGatesAndRbf) {
    const auto p0 = btrom::freeze(sample_column(6));
    const auto p1 = btrom::freeze(btrom::build_column(50, 3, 6, 7));
    auto stack = progressive::attach_child({p0, p1}, 40, 3, 6, progressive::InitMode::Scratch, 8);
    Rng rng(9);
    for (auto& [key, gate] : stack.gates) gate.W = testutil::random_matrix(gate.W.rows(), gate.W.cols(), rng);
    Matrix in(3, 2);
    in << 0, 1, 0.5, 2, 1, 3;
    checkpoint::StackCheckpoint ck{stack, latent::fit_rbf(in, testutil::random_matrix(3, 3, rng), 1e-10, true), {"a", "b"}};
    const auto dir = testutil::temp_dir("ckpt_stack");
    checkpoint::save_stack(ck, dir);
    EXPECT_EQ(checkpoint::checkpoint_kind(dir), "stack");
    const auto back = checkpoint::load_stack(dir);
    EXPECT_EQ(back.stack, stack);
    ASSERT_TRUE(back.rbf.has_value());
    EXPECT_EQ(*back.rbf, *ck.rbf);
    EXPECT_EQ(back.source_digests, ck.source_digests);
    EXPECT_EQ(back.stack.adapters[1].mode, progressive::AdapterMode::LinearResample);
}

TEST(StackCheckpoint, TamperedGatesFail) {
    const auto p0 = btrom::freeze(sample_column(10));
    auto stack = progressive::attach_child({p0}, 40, 3, 6, progressive::InitMode::Scratch, 11);
    const auto dir = testutil::temp_dir("ckpt_stack_tamper");
    checkpoint::save_stack({stack, std::nullopt, {""}}, dir);
    flip_byte(dir + "/gates.bin", 40);
    EXPECT_THROW(checkpoint::load_stack(dir), FormatError);
}

TEST(StackCheckpoint, TamperedParentColumnFails) {
    const auto p0 = btrom::freeze(sample_column(12));
    auto stack = progressive::attach_child({p0}, 40, 3, 6, progressive::InitMode::Scratch, 13);
    const auto dir = testutil::temp_dir("ckpt_stack_parent");
    checkpoint::save_stack({stack, std::nullopt, {""}}, dir);
    flip_byte(dir + "/columns/0/weights.bin", 64);
    EXPECT_THROW(checkpoint::load_stack(dir), FormatError);
}

TEST(LoadParent, AcceptsColumnAndStandaloneStack) {
    const auto col = sample_column(14);
    const auto cdir = testutil::temp_dir("parent_col");
    checkpoint::save_column(col, cdir);
    const auto a = checkpoint::load_parent(cdir);
    EXPECT_TRUE(a.frozen);
    EXPECT_EQ(btrom::parameter_digest(a), btrom::parameter_digest(col));

    const auto sdir = testutil::temp_dir("parent_stack");
    checkpoint::save_stack({progressive::standalone(col), std::nullopt, {}}, sdir);
    EXPECT_EQ(btrom::parameter_digest(checkpoint::load_parent(sdir)), btrom::parameter_digest(col));
}

TEST(LoadParent, RejectsStackWithParents) {
    const auto p0 = btrom::freeze(sample_column(15));
    auto stack = progressive::attach_child({p0}, 40, 3, 6, progressive::InitMode::Scratch, 16);
    const auto dir = testutil::temp_dir("parent_reject");
    checkpoint::save_stack({stack, std::nullopt, {""}}, dir);
    EXPECT_THROW(checkpoint::load_parent(dir), ValueError);
}

TEST(ManifestDigest, ChangesWithContent) {
    const auto a = testutil::temp_dir("digest_a");
    const auto b = testutil::temp_dir("digest_b");
    checkpoint::save_column(sample_column(17), a);
    checkpoint::save_column(sample_column(18), b);
    EXPECT_EQ(checkpoint::manifest_digest(a).size(), 64u);
    EXPECT_NE(checkpoint::manifest_digest(a), checkpoint::manifest_digest(b));
}
