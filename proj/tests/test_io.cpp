#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "evfuse/io.hpp"
#include "oracles.hpp"

using namespace evfuse;
using namespace evfuse::io;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

void append_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

}  // namespace

TEST_CASE("EMB1 byte layout is little-endian float32 after a 16-byte header") {
    const auto dir = oracle::temp_dir("io_emb1_layout");
    write_emb1(dir / "a.emb1", Tensor3({1, 1, 2}, {1.0, -2.5}));
    std::vector<std::uint8_t> expected{'E', 'M', 'B', '1'};
    append_u32(expected, 1);
    append_u32(expected, 1);
    append_u32(expected, 2);
    for (float f : {1.0f, -2.5f}) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        append_u32(expected, u);
    }
    CHECK(read_file(dir / "a.emb1") == expected);
}

TEST_CASE("EMB1 round trip keeps float32 values") {
    std::mt19937_64 rng(601);
    const auto dir = oracle::temp_dir("io_emb1");
    const auto t = oracle::random_tensor({2, 7, 3}, rng, -5, 5);
    write_emb1(dir / "x.emb1", t);
    const auto back = read_emb1(dir / "x.emb1");
    REQUIRE(back.shape == t.shape);
    for (std::size_t k = 0; k < t.data.size(); ++k) CHECK(back.data[k] == static_cast<double>(static_cast<float>(t.data[k])));

    write_emb1_blocks(dir / "two.emb1", {t, Tensor3({1, 1, 3}, {1, 2, 3})});
    CHECK(read_emb1_blocks(dir / "two.emb1").size() == 2);
    CHECK(oracle::error_code([&] { read_emb1(dir / "two.emb1"); }) == ErrorCode::Parse);
}

TEST_CASE("EMB1 read errors") {
    const auto dir = oracle::temp_dir("io_emb1_err");
    write_file(dir / "bad_magic.emb1", "EMB2xxxxxxxxxxxx");
    CHECK(oracle::error_code([&] { read_emb1(dir / "bad_magic.emb1"); }) == ErrorCode::Parse);
    std::vector<std::uint8_t> trunc{'E', 'M', 'B', '1'};
    append_u32(trunc, 1);
    append_u32(trunc, 2);
    append_u32(trunc, 2);
    trunc.push_back(0);
    std::ofstream(dir / "trunc.emb1", std::ios::binary)
        .write(reinterpret_cast<const char*>(trunc.data()), static_cast<std::streamsize>(trunc.size()));
    CHECK(oracle::error_code([&] { read_emb1(dir / "trunc.emb1"); }) == ErrorCode::Parse);
    CHECK(oracle::error_code([&] { read_emb1(dir / "missing.emb1"); }) == ErrorCode::Io);
    Tensor3 nan({1, 1, 1}, {std::nan("")});
    CHECK(oracle::error_code([&] { write_emb1(dir / "nan.emb1", nan); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("JSON-lines embeddings load with their video ids") {
    const auto dir = oracle::temp_dir("io_jsonl");
    write_file(dir / "e.jsonl",
               "{\"video_id\": \"a\", \"embeddings\": [[1, 2], [3, 4], [5, 6]]}\n"
               "\n"
               "{\"video_id\": \"b\", \"embeddings\": [[0, 0], [0, 1], [1, 0]]}\n");
    const auto l = load_sequence(dir / "e.jsonl", Modality::Event);
    CHECK(l.video_ids == std::vector<std::string>{"a", "b"});
    CHECK(l.sequence.shape() == Shape{2, 3, 2});
    CHECK(l.sequence.values.at(0, 2, 1) == 6.0);
    CHECK(l.sequence.modality == Modality::Event);

    write_file(dir / "ragged.jsonl",
               "{\"video_id\": \"a\", \"embeddings\": [[1, 2], [3, 4]]}\n"
               "{\"video_id\": \"b\", \"embeddings\": [[0, 0]]}\n");
    CHECK(oracle::error_code([&] { load_sequence(dir / "ragged.jsonl", Modality::Image); }) ==
          ErrorCode::ShapeMismatch);
    write_file(dir / "broken.jsonl", "{\"video_id\": \"a\", \"embeddings\": [[1, 2]\n");
    CHECK(oracle::error_code([&] { load_sequence(dir / "broken.jsonl", Modality::Image); }) == ErrorCode::Parse);

    write_emb1(dir / "x.emb1", Tensor3({2, 1, 1}, {1, 2}));
    CHECK(load_sequence(dir / "x.emb1", Modality::Image).video_ids == std::vector<std::string>{"video_0", "video_1"});
}

TEST_CASE("FRM1 round trip and errors") {
    const auto dir = oracle::temp_dir("io_frm1");
    write_frm1(dir / "v.frm1", 2, 1, 3, {0, 51, 255, 10, 20, 30});
    const auto f = read_frm1(dir / "v.frm1");
    CHECK(f.frames == 2);
    CHECK(f.height == 1);
    CHECK(f.width == 3);
    CHECK(f.pixels[1] == 51 / 255.0);
    CHECK(f.pixels[2] == 1.0);
    CHECK(read_file(dir / "v.frm1").size() == 16 + 6);
    CHECK(oracle::error_code([&] { write_frm1(dir / "w.frm1", 2, 2, 2, {1, 2}); }) == ErrorCode::ShapeMismatch);
    auto bytes = read_file(dir / "v.frm1");
    bytes.push_back(7);
    std::ofstream(dir / "trail.frm1", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    CHECK(oracle::error_code([&] { read_frm1(dir / "trail.frm1"); }) == ErrorCode::Parse);
}

TEST_CASE("packed events round trip and pad each segment to a byte") {
    const auto dir = oracle::temp_dir("io_events");
    events::EventSegment a{1, 1, 3, {1, 0, 1}};
    events::EventSegment b{2, 1, 3, {0, 0, 1, 1, 1, 1}};
    write_events(dir / "e.bin", dir / "e.json", {a, b}, events::EventOptions{});
    // 101 -> 0xA0, then 001111 -> 0x3C.
    CHECK(read_file(dir / "e.bin") == std::vector<std::uint8_t>{0xA0, 0x3C});
    const auto meta = read_json(dir / "e.json");
    CHECK(meta["segments"][1]["byte_offset"] == 1);
    CHECK(read_events(dir / "e.bin", dir / "e.json") == std::vector<events::EventSegment>{a, b});
}

TEST_CASE("labels read, align and reject bad values") {
    const auto dir = oracle::temp_dir("io_labels");
    write_file(dir / "v.json", R"([{"video_id": "b", "label": 1}, {"video_id": "a", "label": 0}])");
    const auto v = read_labels(dir / "v.json");
    CHECK_FALSE(v.per_step);
    CHECK(align_labels(v, {"a", "b"}, 5) == std::vector<int>{0, 1});
    CHECK(oracle::error_code([&] { align_labels(v, {"a", "c"}, 5); }) == ErrorCode::ShapeMismatch);

    write_file(dir / "s.json", R"([{"video_id": "a", "labels": [0, 1, 1]}, {"video_id": "b", "labels": [0, 0, 0]}])");
    const auto s = read_labels(dir / "s.json");
    CHECK(s.per_step);
    CHECK(align_labels(s, {"b", "a"}, 3) == std::vector<int>{0, 0, 0, 0, 1, 1});
    CHECK(oracle::error_code([&] { align_labels(s, {"a"}, 4); }) == ErrorCode::ShapeMismatch);

    write_file(dir / "bad.json", R"([{"video_id": "a", "label": 2}])");
    CHECK(oracle::error_code([&] { read_labels(dir / "bad.json"); }) == ErrorCode::DegenerateLabels);
    write_file(dir / "mixed.json", R"([{"video_id": "a", "label": 1}, {"video_id": "b", "labels": [1]}])");
    CHECK(oracle::error_code([&] { read_labels(dir / "mixed.json"); }) == ErrorCode::Parse);
}

TEST_CASE("heads and affine refiner round trip") {
    std::mt19937_64 rng(603);
    std::uniform_real_distribution<double> u(-1, 1);
    auto h = losses::LinearHeads::zeros(3);
    for (auto* v : {&h.image.mean_weight, &h.event.logvar_bias, &h.classifier_weight}) {
        for (double& x : *v) x = u(rng);
    }
    h.classifier_bias = u(rng);
    const auto dir = oracle::temp_dir("io_heads");
    write_heads(dir / "h.json", h);
    const auto back = read_heads(dir / "h.json");
    CHECK(back.image.mean_weight == h.image.mean_weight);
    CHECK(back.event.logvar_bias == h.event.logvar_bias);
    CHECK(back.classifier_weight == h.classifier_weight);
    CHECK(back.classifier_bias == h.classifier_bias);
    CHECK(oracle::error_code([] { heads_from_json(nlohmann::json{{"image", 3}}); }) == ErrorCode::Parse);

    refine::AffineEstimator est(2, {0.5, 0.25, -1.0, 2.0}, {0.125, -0.75});
    write_affine(dir / "r.emb1", est);
    const auto r = read_affine(dir / "r.emb1");
    CHECK(r.weight() == est.weight());
    CHECK(r.bias() == est.bias());
    write_emb1(dir / "one.emb1", Tensor3({1, 2, 2}));
    CHECK(oracle::error_code([&] { read_affine(dir / "one.emb1"); }) == ErrorCode::Parse);
}

TEST_CASE("scores CSV round trip") {
    const auto dir = oracle::temp_dir("io_scores");
    const std::vector<ScoreSeries> s{{"a", {0.1, 1.0 / 3.0}, {0, 1}, std::nullopt},
                                     {"b", {0.7}, {}, false},
                                     {"c", {0.25, 0.5}, {0, 0}, true}};
    write_scores_csv(dir / "s.csv", s);
    const auto back = read_scores_csv(dir / "s.csv");
    REQUIRE(back.size() == 3);
    CHECK(back[0].probabilities == s[0].probabilities);
    CHECK(back[0].labels == s[0].labels);
    CHECK(back[0].video_is_anomalous == true);
    CHECK(back[1].labels.empty());
    CHECK(back[1].video_is_anomalous == false);
    CHECK(back[2].video_is_anomalous == true);

    std::ifstream in(dir / "s.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "video_id,segment_index,score,label,video_is_anomalous");

    write_file(dir / "gap.csv", "video_id,segment_index,score,label,video_is_anomalous\na,0,0.5,1,1\na,2,0.5,1,1\n");
    CHECK(oracle::error_code([&] { read_scores_csv(dir / "gap.csv"); }) == ErrorCode::Parse);
    write_file(dir / "hdr.csv", "id,score\n");
    CHECK(oracle::error_code([&] { read_scores_csv(dir / "hdr.csv"); }) == ErrorCode::Parse);
    write_file(dir / "empty.csv", "");
    CHECK(oracle::error_code([&] { read_scores_csv(dir / "empty.csv"); }) == ErrorCode::EmptyInput);
    CHECK(oracle::error_code([&] { write_scores_csv(dir / "c.csv", {{"a,b", {0.1}, {}, std::nullopt}}); }) ==
          ErrorCode::InvalidConfig);
}

TEST_CASE("key-value config overrides known fields") {
    const auto dir = oracle::temp_dir("io_kv");
    write_file(dir / "c.toml",
               "# comment\n[fusion]\nnu = 4\nrefine_steps = 3   # trailing\nnoise_model = \"gaussian\"\n"
               "segment_len=8\n");
    FusionConfig cfg;
    apply_kv_config(read_kv_config(dir / "c.toml"), cfg);
    CHECK(cfg.nu == 4.0);
    CHECK(cfg.refine_steps == 3);
    CHECK(cfg.noise_model == NoiseKind::Gaussian);
    CHECK(cfg.segment_len == 8);
    CHECK(cfg.epsilon == 1e-8);

    write_file(dir / "unknown.toml", "gamma = 2\n");
    CHECK(oracle::error_code([&] { apply_kv_config(read_kv_config(dir / "unknown.toml"), cfg); }) ==
          ErrorCode::InvalidConfig);
    write_file(dir / "noeq.toml", "nu 4\n");
    CHECK(oracle::error_code([&] { read_kv_config(dir / "noeq.toml"); }) == ErrorCode::Parse);
    CHECK(oracle::error_code([&] { apply_kv_config({{"nu", "four"}}, cfg); }) == ErrorCode::Parse);
    CHECK(oracle::error_code([&] { apply_kv_config({{"segment_len", "0"}}, cfg); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config JSON round trip") {
    FusionConfig cfg;
    cfg.nu = 3.5;
    cfg.refine_steps = 2;
    cfg.noise_model = NoiseKind::Gaussian;
    cfg.reg_lambda2 = 0.0;
    const auto back = config_from_json(config_to_json(cfg));
    CHECK(back.nu == 3.5);
    CHECK(back.refine_steps == 2);
    CHECK(back.noise_model == NoiseKind::Gaussian);
    CHECK(back.reg_lambda2 == 0.0);
    CHECK(back.segment_len == 16);
}

TEST_CASE("sweep CSV records the seed, masks and column layout") {
    perturb::SweepResult sweep;
    sweep.seed = 42;
    sweep.dim = 4;
    perturb::SweepRow clean;
    clean.noise_type = "CLEAN";
    perturb::SweepRow row;
    row.noise_type = "IMG_NOISE";
    row.rho = 0.5;
    row.mask.indices = {1, 3};
    row.dwx = -0.25;
    row.dwe = 0.25;
    sweep.rows = {clean, row};
    const auto dir = oracle::temp_dir("io_sweep");
    write_sweep_csv(dir / "p.csv", sweep);
    std::ifstream in(dir / "p.csv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "# seed=42 dim=4");
    CHECK(lines[1] == "# mask IMG_NOISE rho=0.5 indices=1 3");
    CHECK(lines[2] == "noise_type,rho,auc,ap,brier,kl,dwe,dwe_ab,dwe_n,dwx,dwx_ab,dwx_n");
    CHECK(lines[4] == "IMG_NOISE,0.5,0,0,0,0,0.25,0,0,-0.25,0,0");
    const auto j = sweep_summary(sweep);
    CHECK(j["rows"][1]["mask_indices"] == nlohmann::json::array({1, 3}));
    CHECK(j["clean_weights"]["we"] == 1.0);
}
