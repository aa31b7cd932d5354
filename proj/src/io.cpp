#include "evfuse/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace evfuse::io {

using nlohmann::json;

namespace {

[[noreturn]] void io_fail(const fs::path& path, const std::string& what) {
    throw Error(ErrorCode::Io, path.string() + ": " + what);
}

[[noreturn]] void parse_fail(const fs::path& path, const std::string& what) {
    throw Error(ErrorCode::Parse, path.string() + ": " + what);
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) io_fail(path, "cannot open for writing");
    return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_fail(path, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put_u32(std::vector<std::uint8_t>& buf, std::size_t v) {
    if (v > 0xFFFFFFFFu) throw Error(ErrorCode::InvalidConfig, "dimension does not fit in u32");
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& buf, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xFF));
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    const fs::path& path;
    std::size_t pos = 0;

    bool done() const { return pos == bytes.size(); }
    void need(std::size_t n) const {
        if (bytes.size() - pos < n) parse_fail(path, "truncated file at byte " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[pos + k]) << (8 * k);
        pos += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void magic(const char* m) {
        need(4);
        if (std::memcmp(bytes.data() + pos, m, 4) != 0) parse_fail(path, std::string("missing ") + m + " magic");
        pos += 4;
    }
};

// Shortest representation that reads back to the same double.
std::string fmt(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const fs::path& path, const std::string& what) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) parse_fail(path, "bad " + what + " '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const fs::path& path, const std::string& what) {
    long long v = 0;
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), last, v);
    if (ec != std::errc() || ptr != last) parse_fail(path, "bad " + what + " '" + s + "'");
    return v;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void write_emb1(const fs::path& path, const Tensor3& values) { write_emb1_blocks(path, {values}); }

void write_emb1_blocks(const fs::path& path, const std::vector<Tensor3>& blocks) {
    std::vector<std::uint8_t> buf;
    for (const auto& t : blocks) {
        validate_tensor(t, "EMB1 block");
        buf.insert(buf.end(), {'E', 'M', 'B', '1'});
        put_u32(buf, t.shape.batch);
        put_u32(buf, t.shape.steps);
        put_u32(buf, t.shape.dim);
        for (double v : t.data) put_f32(buf, v);
    }
    auto out = open_out(path, true);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) io_fail(path, "write failed");
}

std::vector<Tensor3> read_emb1_blocks(const fs::path& path) {
    const auto bytes = read_bytes(path);
    Reader r{bytes, path};
    std::vector<Tensor3> blocks;
    while (!r.done()) {
        r.magic("EMB1");
        Shape s;
        s.batch = r.u32();
        s.steps = r.u32();
        s.dim = r.u32();
        r.need(s.size() * 4);
        Tensor3 t(s);
        for (double& v : t.data) {
            v = r.f32();
            if (!std::isfinite(v)) parse_fail(path, "non-finite value in EMB1 payload");
        }
        blocks.push_back(std::move(t));
    }
    if (blocks.empty()) parse_fail(path, "empty EMB1 file");
    return blocks;
}

Tensor3 read_emb1(const fs::path& path) {
    auto blocks = read_emb1_blocks(path);
    if (blocks.size() != 1) parse_fail(path, "expected a single EMB1 block");
    return std::move(blocks.front());
}

LoadedSequence read_embedding_jsonl(const fs::path& path, Modality modality) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::vector<std::vector<double>>> videos;
    LoadedSequence out;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
            out.video_ids.push_back(j.at("video_id").get<std::string>());
            videos.push_back(j.at("embeddings").get<std::vector<std::vector<double>>>());
        } catch (const json::exception& e) {
            parse_fail(path, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (videos.empty()) throw Error(ErrorCode::EmptyInput, path.string() + ": no embeddings");
    const std::size_t steps = videos[0].size();
    const std::size_t dim = steps > 0 ? videos[0][0].size() : 0;
    if (steps == 0 || dim == 0) throw Error(ErrorCode::EmptyInput, path.string() + ": empty embedding");
    Tensor3 t({videos.size(), steps, dim});
    for (std::size_t b = 0; b < videos.size(); ++b) {
        if (videos[b].size() != steps) {
            throw Error(ErrorCode::ShapeMismatch, path.string() + ": video " + out.video_ids[b] + " has " +
                                                      std::to_string(videos[b].size()) + " steps, expected " +
                                                      std::to_string(steps));
        }
        for (std::size_t s = 0; s < steps; ++s) {
            if (videos[b][s].size() != dim) {
                throw Error(ErrorCode::ShapeMismatch, path.string() + ": ragged embedding dims");
            }
            std::copy(videos[b][s].begin(), videos[b][s].end(), t.slice(b, s).begin());
        }
    }
    out.sequence = {std::move(t), modality};
    validate_sequence(out.sequence);
    return out;
}

LoadedSequence load_sequence(const fs::path& path, Modality modality) {
    const auto ext = path.extension().string();
    if (ext == ".jsonl" || ext == ".json") return read_embedding_jsonl(path, modality);
    LoadedSequence out{{read_emb1(path), modality}, {}};
    validate_sequence(out.sequence);
    for (std::size_t b = 0; b < out.sequence.shape().batch; ++b) out.video_ids.push_back("video_" + std::to_string(b));
    return out;
}

void write_frm1(const fs::path& path, std::size_t frames, std::size_t height, std::size_t width,
                const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != frames * height * width) {
        throw Error(ErrorCode::ShapeMismatch, "pixel count does not match frames*height*width");
    }
    std::vector<std::uint8_t> buf{'F', 'R', 'M', '1'};
    put_u32(buf, frames);
    put_u32(buf, height);
    put_u32(buf, width);
    buf.insert(buf.end(), pixels.begin(), pixels.end());
    auto out = open_out(path, true);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) io_fail(path, "write failed");
}

events::FrameSequence read_frm1(const fs::path& path) {
    const auto bytes = read_bytes(path);
    Reader r{bytes, path};
    r.magic("FRM1");
    events::FrameSequence f;
    f.frames = r.u32();
    f.height = r.u32();
    f.width = r.u32();
    const std::size_t n = f.frames * f.height * f.width;
    r.need(n);
    f.pixels.resize(n);
    for (std::size_t k = 0; k < n; ++k) f.pixels[k] = bytes[r.pos + k] / 255.0;
    if (r.pos + n != bytes.size()) parse_fail(path, "trailing bytes after FRM1 payload");
    return f;
}

void write_events(const fs::path& bin_path, const fs::path& json_path,
                  const std::vector<events::EventSegment>& segments, const events::EventOptions& options) {
    std::vector<std::uint8_t> buf;
    json segs = json::array();
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& seg = segments[s];
        const std::size_t offset = buf.size();
        const std::size_t bits = seg.maps.size();
        buf.resize(offset + (bits + 7) / 8, 0);
        for (std::size_t k = 0; k < bits; ++k) {
            if (seg.maps[k]) buf[offset + k / 8] |= static_cast<std::uint8_t>(0x80u >> (k % 8));
        }
        segs.push_back({{"index", s},
                        {"pairs", seg.pairs},
                        {"height", seg.height},
                        {"width", seg.width},
                        {"byte_offset", offset},
                        {"bits", bits}});
    }
    auto out = open_out(bin_path, true);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) io_fail(bin_path, "write failed");
    write_json(json_path, {{"format", "packed-bits-msb-first"},
                           {"threshold", options.threshold},
                           {"clamp", options.clamp},
                           {"clamp_mode", std::string(events::to_string(options.clamp_mode))},
                           {"segment_len", options.segment_len},
                           {"segments", segs}});
}

std::vector<events::EventSegment> read_events(const fs::path& bin_path, const fs::path& json_path) {
    const auto bytes = read_bytes(bin_path);
    const json meta = read_json(json_path);
    std::vector<events::EventSegment> out;
    try {
        for (const auto& s : meta.at("segments")) {
            events::EventSegment seg;
            seg.pairs = s.at("pairs").get<std::size_t>();
            seg.height = s.at("height").get<std::size_t>();
            seg.width = s.at("width").get<std::size_t>();
            const auto offset = s.at("byte_offset").get<std::size_t>();
            const std::size_t bits = seg.pairs * seg.height * seg.width;
            if (offset + (bits + 7) / 8 > bytes.size()) parse_fail(bin_path, "segment runs past end of file");
            seg.maps.resize(bits);
            for (std::size_t k = 0; k < bits; ++k) seg.maps[k] = (bytes[offset + k / 8] >> (7 - k % 8)) & 1u;
            out.push_back(std::move(seg));
        }
    } catch (const json::exception& e) {
        parse_fail(json_path, e.what());
    }
    return out;
}

LabelSet read_labels(const fs::path& path) {
    const json j = read_json(path);
    LabelSet out;
    if (!j.is_array()) parse_fail(path, "labels must be a JSON array");
    bool any_step = false, any_video = false;
    try {
        for (const auto& rec : j) {
            out.video_ids.push_back(rec.at("video_id").get<std::string>());
            if (rec.contains("labels")) {
                any_step = true;
                for (int y : rec.at("labels").get<std::vector<int>>()) out.labels.push_back(y);
            } else {
                any_video = true;
                out.labels.push_back(rec.at("label").get<int>());
            }
        }
    } catch (const json::exception& e) {
        parse_fail(path, e.what());
    }
    if (any_step && any_video) parse_fail(path, "mixes per-video and per-step labels");
    for (int y : out.labels) {
        if (y != 0 && y != 1) throw Error(ErrorCode::DegenerateLabels, path.string() + ": labels must be 0 or 1");
    }
    out.per_step = any_step;
    return out;
}

std::vector<int> align_labels(const LabelSet& labels, const std::vector<std::string>& video_ids,
                              std::size_t steps) {
    const std::size_t per = labels.per_step ? steps : 1;
    if (labels.labels.size() != labels.video_ids.size() * per) {
        throw Error(ErrorCode::ShapeMismatch, "per-step labels must have one entry per step");
    }
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t k = 0; k < labels.video_ids.size(); ++k) where.emplace(labels.video_ids[k], k);
    std::vector<int> out;
    out.reserve(video_ids.size() * per);
    for (const auto& id : video_ids) {
        const auto it = where.find(id);
        if (it == where.end()) throw Error(ErrorCode::ShapeMismatch, "no label for video '" + id + "'");
        const auto first = labels.labels.begin() + static_cast<std::ptrdiff_t>(it->second * per);
        out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(per));
    }
    return out;
}

namespace {

json projection_to_json(const losses::ProjectionHeads& h) {
    return {{"mean_weight", h.mean_weight},
            {"mean_bias", h.mean_bias},
            {"logvar_weight", h.logvar_weight},
            {"logvar_bias", h.logvar_bias}};
}

losses::ProjectionHeads projection_from_json(const json& j, std::size_t dim) {
    losses::ProjectionHeads h;
    h.dim = dim;
    h.mean_weight = j.at("mean_weight").get<std::vector<double>>();
    h.mean_bias = j.at("mean_bias").get<std::vector<double>>();
    h.logvar_weight = j.at("logvar_weight").get<std::vector<double>>();
    h.logvar_bias = j.at("logvar_bias").get<std::vector<double>>();
    return h;
}

}  // namespace

json heads_to_json(const losses::LinearHeads& heads) {
    return {{"dim", heads.dim()},
            {"image", projection_to_json(heads.image)},
            {"event", projection_to_json(heads.event)},
            {"classifier_weight", heads.classifier_weight},
            {"classifier_bias", heads.classifier_bias}};
}

losses::LinearHeads heads_from_json(const json& j) {
    losses::LinearHeads h;
    try {
        const auto dim = j.at("dim").get<std::size_t>();
        h.image = projection_from_json(j.at("image"), dim);
        h.event = projection_from_json(j.at("event"), dim);
        h.classifier_weight = j.at("classifier_weight").get<std::vector<double>>();
        h.classifier_bias = j.at("classifier_bias").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("heads JSON: ") + e.what());
    }
    h.validate();
    return h;
}

void write_heads(const fs::path& path, const losses::LinearHeads& heads) { write_json(path, heads_to_json(heads)); }

losses::LinearHeads read_heads(const fs::path& path) {
    try {
        return heads_from_json(read_json(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) parse_fail(path, e.what());
        throw;
    }
}

void write_affine(const fs::path& path, const refine::AffineEstimator& est) {
    const std::size_t d = est.dim();
    write_emb1_blocks(path, {Tensor3({1, d, d}, est.weight()), Tensor3({1, 1, d}, est.bias())});
}

refine::AffineEstimator read_affine(const fs::path& path) {
    const auto blocks = read_emb1_blocks(path);
    if (blocks.size() != 2) parse_fail(path, "refiner file needs a weight block and a bias block");
    const std::size_t d = blocks[0].shape.dim;
    if (blocks[0].shape != Shape{1, d, d} || blocks[1].shape != Shape{1, 1, d}) {
        throw Error(ErrorCode::ShapeMismatch, path.string() + ": refiner blocks must be (1,D,D) and (1,1,D)");
    }
    return refine::make_affine_estimator(d, blocks[0].data, blocks[1].data);
}

void write_scores_csv(const fs::path& path, const std::vector<ScoreSeries>& series) {
    auto out = open_out(path);
    out << "video_id,segment_index,score,label,video_is_anomalous\n";
    for (const auto& s : series) {
        if (s.video_id.find(',') != std::string::npos) {
            throw Error(ErrorCode::InvalidConfig, "video id '" + s.video_id + "' contains a comma");
        }
        std::string flag;
        if (s.video_is_anomalous) {
            flag = *s.video_is_anomalous ? "1" : "0";
        } else if (!s.labels.empty()) {
            flag = std::find(s.labels.begin(), s.labels.end(), 1) != s.labels.end() ? "1" : "0";
        }
        for (std::size_t k = 0; k < s.probabilities.size(); ++k) {
            out << s.video_id << ',' << k << ',' << fmt(s.probabilities[k]) << ',';
            if (k < s.labels.size()) out << s.labels[k];
            out << ',' << flag << '\n';
        }
    }
    if (!out) io_fail(path, "write failed");
}

std::vector<ScoreSeries> read_scores_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyInput, path.string() + ": empty scores file");
    const auto header = split_csv(line);
    const std::vector<std::string> expected{"video_id", "segment_index", "score", "label", "video_is_anomalous"};
    if (header.size() < 4 || !std::equal(header.begin(), header.end(), expected.begin())) {
        parse_fail(path, "unexpected header '" + line + "'");
    }
    std::vector<ScoreSeries> out;
    std::unordered_map<std::string, std::size_t> where;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) parse_fail(path, "line " + std::to_string(lineno) + ": wrong column count");
        auto [it, fresh] = where.emplace(cells[0], out.size());
        if (fresh) out.push_back(ScoreSeries{cells[0], {}, {}, std::nullopt});
        ScoreSeries& s = out[it->second];
        if (parse_int(cells[1], path, "segment_index") != static_cast<long long>(s.probabilities.size())) {
            parse_fail(path, "line " + std::to_string(lineno) + ": segment indices must be consecutive per video");
        }
        s.probabilities.push_back(parse_double(cells[2], path, "score"));
        if (!cells[3].empty()) s.labels.push_back(static_cast<int>(parse_int(cells[3], path, "label")));
        if (cells.size() > 4 && !cells[4].empty()) {
            s.video_is_anomalous = parse_int(cells[4], path, "video_is_anomalous") != 0;
        }
    }
    if (out.empty()) throw Error(ErrorCode::EmptyInput, path.string() + ": no score rows");
    return out;
}

void write_sweep_csv(const fs::path& path, const perturb::SweepResult& sweep) {
    auto out = open_out(path);
    out << "# seed=" << sweep.seed << " dim=" << sweep.dim << '\n';
    for (const auto& row : sweep.rows) {
        if (row.noise_type == "CLEAN") continue;
        out << "# mask " << row.noise_type << " rho=" << fmt(row.rho) << " indices=";
        for (std::size_t k = 0; k < row.mask.indices.size(); ++k) out << (k ? " " : "") << row.mask.indices[k];
        out << '\n';
    }
    out << "noise_type,rho,auc,ap,brier,kl,dwe,dwe_ab,dwe_n,dwx,dwx_ab,dwx_n\n";
    for (const auto& row : sweep.rows) {
        out << row.noise_type << ',' << fmt(row.rho) << ',' << fmt(row.report.auc) << ',' << fmt(row.report.ap)
            << ',' << fmt(row.report.brier) << ',' << fmt(row.report.pred_kl) << ',' << fmt(row.dwe) << ','
            << fmt(row.dwe_ab) << ',' << fmt(row.dwe_n) << ',' << fmt(row.dwx) << ',' << fmt(row.dwx_ab) << ','
            << fmt(row.dwx_n) << '\n';
    }
    if (!out) io_fail(path, "write failed");
}

json sweep_summary(const perturb::SweepResult& sweep) {
    json rows = json::array();
    for (const auto& row : sweep.rows) {
        json r{{"noise_type", row.noise_type},
               {"rho", row.rho},
               {"auc", row.report.auc},
               {"ap", row.report.ap},
               {"brier", row.report.brier},
               {"kl", row.report.pred_kl},
               {"dwe", row.dwe},
               {"dwx", row.dwx},
               {"mask_indices", row.mask.indices},
               {"surface_dwx", row.surface}};
        if (row.report.ano_auc) r["ano_auc"] = *row.report.ano_auc;
        rows.push_back(std::move(r));
    }
    return {{"seed", sweep.seed},
            {"dim", sweep.dim},
            {"clean_weights",
             {{"wx", sweep.clean_wx},
              {"wx_ab", sweep.clean_wx_ab},
              {"wx_n", sweep.clean_wx_n},
              {"we", 1.0 - sweep.clean_wx},
              {"we_ab", 1.0 - sweep.clean_wx_ab},
              {"we_n", 1.0 - sweep.clean_wx_n}}},
            {"rows", rows}};
}

std::map<std::string, std::string> read_kv_config(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) parse_fail(path, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) parse_fail(path, "line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

void apply_kv_config(const std::map<std::string, std::string>& kv, FusionConfig& cfg) {
    const fs::path where("config");
    for (const auto& [key, value] : kv) {
        if (key == "nu") {
            cfg.nu = parse_double(value, where, key);
        } else if (key == "epsilon") {
            cfg.epsilon = parse_double(value, where, key);
        } else if (key == "refine_steps") {
            const auto n = parse_int(value, where, key);
            if (n < 0) throw Error(ErrorCode::InvalidConfig, "refine_steps must be >= 0");
            cfg.refine_steps = static_cast<std::size_t>(n);
        } else if (key == "refine_lambda") {
            cfg.refine_lambda = parse_double(value, where, key);
        } else if (key == "reg_lambda1") {
            cfg.reg_lambda1 = parse_double(value, where, key);
        } else if (key == "reg_lambda2") {
            cfg.reg_lambda2 = parse_double(value, where, key);
        } else if (key == "noise_model") {
            cfg.noise_model = noise_kind_from_string(value);
        } else if (key == "segment_len") {
            const auto n = parse_int(value, where, key);
            if (n < 1) throw Error(ErrorCode::InvalidConfig, "segment_len must be >= 1");
            cfg.segment_len = static_cast<std::size_t>(n);
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
        }
    }
}

json config_to_json(const FusionConfig& cfg) {
    return {{"nu", cfg.nu},
            {"epsilon", cfg.epsilon},
            {"refine_steps", cfg.refine_steps},
            {"refine_lambda", cfg.refine_lambda},
            {"reg_lambda1", cfg.reg_lambda1},
            {"reg_lambda2", cfg.reg_lambda2},
            {"noise_model", std::string(to_string(cfg.noise_model))},
            {"segment_len", cfg.segment_len}};
}

FusionConfig config_from_json(const json& j) {
    FusionConfig cfg;
    try {
        cfg.nu = j.at("nu").get<double>();
        cfg.epsilon = j.at("epsilon").get<double>();
        cfg.refine_steps = j.at("refine_steps").get<std::size_t>();
        cfg.refine_lambda = j.at("refine_lambda").get<double>();
        cfg.reg_lambda1 = j.at("reg_lambda1").get<double>();
        cfg.reg_lambda2 = j.at("reg_lambda2").get<double>();
        cfg.noise_model = noise_kind_from_string(j.at("noise_model").get<std::string>());
        cfg.segment_len = j.at("segment_len").get<std::size_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("config JSON: ") + e.what());
    }
    return cfg;
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) io_fail(path, "write failed");
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        parse_fail(path, e.what());
    }
}

}  // namespace evfuse::io
