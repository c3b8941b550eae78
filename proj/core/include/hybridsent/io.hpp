#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hybridsent/tensor.hpp"
#include "hybridsent/text.hpp"

namespace hybridsent {

// ---------------------------------------------------------------------------
// NTC1: little-endian named-tensor container.
//   magic "NTC1" | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims |
//               float32 payload (row-major)
// Used for encoder weights and classifier checkpoints.
// ---------------------------------------------------------------------------

struct NamedTensor {
    std::string name;
    Tensorf value;
};

void write_ntc1(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_ntc1(const std::string& path);

// ---------------------------------------------------------------------------
// BFC1: little-endian feature cache.
//   magic "BFC1" | u32 record count | u32 L | u32 H
//   per record: u8 label | u32 mask popcount | L x H float32 row-major
// ---------------------------------------------------------------------------

struct FeatureRecord {
    std::uint8_t label = 0;
    std::uint32_t mask_count = 0;  // leading positions with mask 1
    std::vector<float> values;     // L*H row-major
};

struct FeatureCache {
    std::uint32_t seq_len = 0;  // L
    std::uint32_t hidden = 0;   // H
    std::vector<FeatureRecord> records;
};

void write_bfc1(const std::string& path, const FeatureCache& cache);
FeatureCache read_bfc1(const std::string& path);

// Streaming writer so large extractions never hold the whole cache in memory.
// The record count is fixed up front; close() verifies it was honored.
class FeatureCacheWriter {
public:
    FeatureCacheWriter(const std::string& path, std::uint32_t record_count, std::uint32_t seq_len,
                       std::uint32_t hidden);
    ~FeatureCacheWriter();

    void append(const FeatureRecord& record);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Dataset: JSON-lines, one {"text": ..., "label": 0|1} object per line.
// ---------------------------------------------------------------------------

std::vector<RawExample> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<RawExample>& examples);

}  // namespace hybridsent
