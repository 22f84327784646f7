#include "setdino/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace setdino::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::ifstream open_in(const std::string& path, bool binary) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

std::ofstream open_out(const std::string& path, bool binary) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

}  // namespace

void write_image_file(const std::string& path, const Image& img) {
    auto f = open_out(path, true);
    ordered_json header;
    header["dtype"] = "float32";
    header["shape"] = {img.channels, img.height, img.width};
    header["order"] = "chw";
    const std::string h = header.dump();
    f << h << "\n";
    static_assert(sizeof(float) == 4);
    f.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    if (!f) throw IoError("short write: " + path);
}

Image read_image_file(const std::string& path) {
    auto f = open_in(path, true);
    std::string header_line;
    if (!std::getline(f, header_line)) throw IoError("missing image header: " + path);
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw IoError("bad image header in " + path + ": " + e.what());
    }
    if (header.value("dtype", "") != "float32")
        throw IoError("unsupported image dtype in " + path);
    auto shape = header.at("shape");
    if (!shape.is_array() || shape.size() != 3)
        throw IoError("image shape must be [C,H,W] in " + path);
    Image img(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>());
    f.read(reinterpret_cast<char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(img.data.size() * sizeof(float)))
        throw IoError("truncated image data: " + path);
    return img;
}

void write_manifest_jsonl(const std::string& path, const synthgen::Manifest& manifest) {
    auto f = open_out(path, false);
    ordered_json head;
    head["record"] = "manifest_header";
    head["n_batches"] = manifest.n_batches;
    head["channels"] = manifest.channels;
    head["image_size"] = manifest.image_size;
    head["n_cells"] = manifest.cells.size();
    f << head.dump() << "\n";
    for (const auto& c : manifest.cells) {
        ordered_json rec;
        rec["cell_id"] = c.cell_id;
        rec["gene"] = c.gene_id;
        rec["guide"] = c.guide_id;
        rec["batch"] = c.batch_id;
        rec["escaper"] = c.escaper;
        rec["well_row"] = c.well_row;
        rec["well_col"] = c.well_col;
        rec["cell_seed"] = c.cell_seed;
        rec["split"] = synthgen::split_name(c.split);
        rec["image"] = c.image_path;
        f << rec.dump() << "\n";
    }
    if (!f) throw IoError("short write: " + path);
}

synthgen::Manifest read_manifest_jsonl(const std::string& path) {
    auto f = open_in(path, false);
    synthgen::Manifest manifest;
    std::string line;
    bool have_header = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("bad manifest line in " + path + ": " + e.what());
        }
        if (!have_header) {
            if (rec.value("record", "") != "manifest_header")
                throw IoError("manifest missing header line: " + path);
            manifest.n_batches = rec.at("n_batches").get<int>();
            manifest.channels = rec.at("channels").get<int>();
            manifest.image_size = rec.at("image_size").get<int>();
            have_header = true;
            continue;
        }
        synthgen::CellMeta c;
        c.cell_id = rec.at("cell_id").get<long>();
        c.gene_id = rec.at("gene").get<int>();
        c.guide_id = rec.at("guide").get<int>();
        c.batch_id = rec.at("batch").get<int>();
        c.escaper = rec.at("escaper").get<bool>();
        c.well_row = rec.at("well_row").get<float>();
        c.well_col = rec.at("well_col").get<float>();
        c.cell_seed = rec.at("cell_seed").get<std::uint64_t>();
        c.split = synthgen::split_from_name(rec.at("split").get<std::string>());
        c.image_path = rec.value("image", "");
        manifest.cells.push_back(std::move(c));
    }
    if (!have_header) throw IoError("empty manifest: " + path);
    return manifest;
}

void write_edges_csv(const std::string& path, const std::vector<std::pair<int, int>>& edges) {
    auto f = open_out(path, false);
    f << "gene_a,gene_b\n";
    for (auto [a, b] : edges) f << a << "," << b << "\n";
    if (!f) throw IoError("short write: " + path);
}

std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::string& path) {
    auto f = open_in(path, false);
    std::vector<std::pair<std::string, std::string>> edges;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError("edge CSV line lacks two columns: " + line);
        std::string a = line.substr(0, comma);
        std::string b = line.substr(comma + 1);
        if (first) {
            first = false;
            // tolerate a header line
            if (a == "gene_a" || a == "gene" || a == "gene_1") continue;
        }
        edges.emplace_back(std::move(a), std::move(b));
    }
    return edges;
}

namespace {

ordered_json world_config_to_json(const synthgen::WorldConfig& c) {
    ordered_json j;
    j["n_genes"] = c.n_genes;
    j["guides_per_gene"] = c.guides_per_gene;
    j["n_ntc_guides"] = c.n_ntc_guides;
    j["n_batches"] = c.n_batches;
    j["image_size"] = c.image_size;
    j["n_modules"] = c.n_modules;
    j["module_size"] = c.module_size;
    j["module_cos_floor"] = c.module_cos_floor;
    j["effect_magnitude_median"] = c.effect_magnitude_median;
    j["effect_magnitude_log_sigma"] = c.effect_magnitude_log_sigma;
    j["effect_sparsity_min"] = c.effect_sparsity_min;
    j["effect_sparsity_max"] = c.effect_sparsity_max;
    j["curated_magnitude_boost"] = c.curated_magnitude_boost;
    j["guide_efficacy_min"] = c.guide_efficacy_min;
    j["guide_efficacy_max"] = c.guide_efficacy_max;
    j["escaper_rate"] = c.escaper_rate;
    j["gain_min"] = c.gain_min;
    j["gain_max"] = c.gain_max;
    j["offset_min"] = c.offset_min;
    j["offset_max"] = c.offset_max;
    j["blur_sigma_min"] = c.blur_sigma_min;
    j["blur_sigma_max"] = c.blur_sigma_max;
    j["cell_param_noise"] = c.cell_param_noise;
    j["pixel_noise"] = c.pixel_noise;
    j["illumination_plane_strength"] = c.illumination_plane_strength;
    j["train_batches"] = c.train_batches;
    j["val_batches"] = c.val_batches;
    j["test_batches"] = c.test_batches;
    return j;
}

synthgen::WorldConfig world_config_from_json(const json& j) {
    synthgen::WorldConfig c;
    c.n_genes = j.at("n_genes").get<int>();
    c.guides_per_gene = j.at("guides_per_gene").get<int>();
    c.n_ntc_guides = j.at("n_ntc_guides").get<int>();
    c.n_batches = j.at("n_batches").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.n_modules = j.at("n_modules").get<int>();
    c.module_size = j.at("module_size").get<int>();
    c.module_cos_floor = j.at("module_cos_floor").get<double>();
    c.effect_magnitude_median = j.at("effect_magnitude_median").get<double>();
    c.effect_magnitude_log_sigma = j.at("effect_magnitude_log_sigma").get<double>();
    c.effect_sparsity_min = j.at("effect_sparsity_min").get<int>();
    c.effect_sparsity_max = j.at("effect_sparsity_max").get<int>();
    c.curated_magnitude_boost = j.at("curated_magnitude_boost").get<double>();
    c.guide_efficacy_min = j.at("guide_efficacy_min").get<double>();
    c.guide_efficacy_max = j.at("guide_efficacy_max").get<double>();
    c.escaper_rate = j.at("escaper_rate").get<double>();
    c.gain_min = j.at("gain_min").get<double>();
    c.gain_max = j.at("gain_max").get<double>();
    c.offset_min = j.at("offset_min").get<double>();
    c.offset_max = j.at("offset_max").get<double>();
    c.blur_sigma_min = j.at("blur_sigma_min").get<double>();
    c.blur_sigma_max = j.at("blur_sigma_max").get<double>();
    c.cell_param_noise = j.at("cell_param_noise").get<double>();
    c.pixel_noise = j.at("pixel_noise").get<double>();
    c.illumination_plane_strength = j.at("illumination_plane_strength").get<double>();
    c.train_batches = j.at("train_batches").get<int>();
    c.val_batches = j.at("val_batches").get<int>();
    c.test_batches = j.at("test_batches").get<int>();
    return c;
}

}  // namespace

std::string world_to_json(const synthgen::WorldSpec& world) {
    ordered_json j;
    j["format"] = "setdino_world";
    j["version"] = 1;
    j["rng_seed"] = world.rng_seed;
    j["config"] = world_config_to_json(world.config);
    j["escaper_rate"] = world.escaper_rate;
    j["module_assignment"] = world.module_assignment;
    j["module_curated"] = world.module_curated;
    j["guide_efficacy"] = world.guide_efficacy;
    ordered_json effects = ordered_json::array();
    for (const auto& e : world.gene_effects)
        effects.push_back(std::vector<float>(e.begin(), e.end()));
    j["gene_effects"] = std::move(effects);
    ordered_json batches = ordered_json::array();
    for (const auto& b : world.batch_confounders) {
        ordered_json jb;
        jb["gain"] = std::vector<float>(b.gain.begin(), b.gain.end());
        jb["offset"] = std::vector<float>(b.offset.begin(), b.offset.end());
        jb["blur_sigma"] = b.blur_sigma;
        batches.push_back(std::move(jb));
    }
    j["batch_confounders"] = std::move(batches);
    return j.dump(2);
}

synthgen::WorldSpec world_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw IoError(std::string("bad world JSON: ") + e.what());
    }
    if (j.value("format", "") != "setdino_world")
        throw IoError("not a world spec file");
    synthgen::WorldSpec w;
    w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    w.config = world_config_from_json(j.at("config"));
    w.escaper_rate = j.at("escaper_rate").get<float>();
    w.module_assignment = j.at("module_assignment").get<std::vector<int>>();
    w.module_curated = j.at("module_curated").get<std::vector<bool>>();
    w.guide_efficacy = j.at("guide_efficacy").get<std::vector<float>>();
    for (const auto& e : j.at("gene_effects")) {
        std::array<float, synthgen::kMorphParamCount> arr{};
        auto v = e.get<std::vector<float>>();
        if (v.size() != arr.size()) throw IoError("gene effect dimension mismatch");
        std::copy(v.begin(), v.end(), arr.begin());
        w.gene_effects.push_back(arr);
    }
    for (const auto& b : j.at("batch_confounders")) {
        synthgen::BatchConfounders bc;
        auto gain = b.at("gain").get<std::vector<float>>();
        auto offset = b.at("offset").get<std::vector<float>>();
        if (gain.size() != 4 || offset.size() != 4)
            throw IoError("batch confounders must have 4 channels");
        std::copy(gain.begin(), gain.end(), bc.gain.begin());
        std::copy(offset.begin(), offset.end(), bc.offset.begin());
        bc.blur_sigma = b.at("blur_sigma").get<float>();
        w.batch_confounders.push_back(bc);
    }
    return w;
}

void write_world_json(const std::string& path, const synthgen::WorldSpec& world) {
    write_text_file(path, world_to_json(world));
}

synthgen::WorldSpec read_world_json(const std::string& path) {
    return world_from_json(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
    auto f = open_in(path, true);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    auto f = open_out(path, true);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("short write: " + path);
}

std::string content_hash(const std::string& data) {
    // FNV-1a folded through splitmix for avalanche; stable across platforms
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    h = splitmix64(h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace setdino::io
