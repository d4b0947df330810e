#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pel/batch.hpp"
#include "pel/codecs.hpp"

namespace pel {

// "PELB1" container: magic, codec kind byte, delta and offset as 8-byte
// floats, n and d as 8-byte integers, then n*d symbols as zig-zag varints.
// Little-endian, bit-exact round-trip. Malformed input raises ConfigError.
void write_bitstream(const std::filesystem::path& path, const Bitstream& y);
Bitstream read_bitstream(const std::filesystem::path& path);

// "PELS1" sibling container for sample dumps: magic, n, d, raw 8-byte floats.
void write_samples(const std::filesystem::path& path, const SampleBatch& x);
SampleBatch read_samples(const std::filesystem::path& path);

// Shortest decimal that round-trips the exact 64-bit value, locale-free.
// Infinities print as "inf"/"-inf".
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// FNV-1a 64-bit over the file bytes, as recorded in run manifests.
uint64_t hash_file(const std::filesystem::path& path);

}  // namespace pel
