#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "setdino/image.hpp"
#include "setdino/synthgen.hpp"

namespace setdino::io {

// Image files: one JSON shape header line, then raw little-endian float32
// data in [C, H, W] order.
void write_image_file(const std::string& path, const Image& img);
Image read_image_file(const std::string& path);

// Manifest: one JSON record per line (metadata + relative image path).
void write_manifest_jsonl(const std::string& path, const synthgen::Manifest& manifest);
synthgen::Manifest read_manifest_jsonl(const std::string& path);

// Relationship edges: two-column CSV of gene identifiers with a header line.
void write_edges_csv(const std::string& path, const std::vector<std::pair<int, int>>& edges);
std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::string& path);

std::string world_to_json(const synthgen::WorldSpec& world);
synthgen::WorldSpec world_from_json(const std::string& json_text);
void write_world_json(const std::string& path, const synthgen::WorldSpec& world);
synthgen::WorldSpec read_world_json(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Stable 64-bit content hash (hex string); used for config/dataset hashes.
std::string content_hash(const std::string& data);

}  // namespace setdino::io
